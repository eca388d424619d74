use rand::Rng;

use super::{init_orthonormal, Graph, NnError, NodeId, ParamId, ParamStore, Real, Tensor};

/// An LSTM cell with gates stacked `[input, forget, output, candidate]` in
/// the rows of one `[4h, in + h]` weight matrix applied to `[x; h_prev]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LstmCell {
    pub w: ParamId,
    pub b: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCell {
    /// Orthonormal blocks per gate and input part; forget-gate bias 1.
    pub fn build<T: Real>(
        store: &mut ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut impl Rng,
    ) -> Result<Self, NnError> {
        let cols = input + hidden;
        let mut w = Tensor::zeros(&[4 * hidden, cols]);
        for gate in 0..4 {
            for (offset, width) in [(0, input), (input, hidden)] {
                let block: Tensor<T> = init_orthonormal(hidden, width, rng);
                for r in 0..hidden {
                    let dst = &mut w.row_mut(gate * hidden + r)[offset..offset + width];
                    dst.copy_from_slice(block.row(r));
                }
            }
        }
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data[hidden..2 * hidden]
            .iter_mut()
            .for_each(|x| *x = T::one());
        Ok(LstmCell {
            w: store.add(format!("{prefix}.w"), w)?,
            b: store.add(format!("{prefix}.b"), b)?,
            input,
            hidden,
        })
    }

    pub fn bind<T: Real>(
        store: &ParamStore<T>,
        prefix: &str,
        input: usize,
        hidden: usize,
    ) -> Result<Self, NnError> {
        Ok(LstmCell {
            w: store.expect(&format!("{prefix}.w"), &[4 * hidden, input + hidden])?,
            b: store.expect(&format!("{prefix}.b"), &[4 * hidden])?,
            input,
            hidden,
        })
    }

    /// One step from `xh = [x; h_prev]`; returns `(h, c)`.
    pub fn step_concat<T: Real>(
        &self,
        g: &mut Graph<T>,
        xh: NodeId,
        c_prev: NodeId,
    ) -> (NodeId, NodeId) {
        let h = self.hidden;
        let gates = g.affine(self.w, xh, Some(self.b));
        let i = g.slice(gates, 0, h);
        let i = g.sigmoid(i);
        let f = g.slice(gates, h, h);
        let f = g.sigmoid(f);
        let o = g.slice(gates, 2 * h, h);
        let o = g.sigmoid(o);
        let cand = g.slice(gates, 3 * h, h);
        let cand = g.tanh(cand);
        let keep = g.mul(f, c_prev);
        let write = g.mul(i, cand);
        let c = g.add(keep, write);
        let tc = g.tanh(c);
        let out = g.mul(o, tc);
        (out, c)
    }

    pub fn step<T: Real>(
        &self,
        g: &mut Graph<T>,
        x: NodeId,
        h_prev: NodeId,
        c_prev: NodeId,
    ) -> (NodeId, NodeId) {
        let xh = g.concat(&[x, h_prev]);
        self.step_concat(g, xh, c_prev)
    }
}
