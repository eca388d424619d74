//! Exhaustive assignment search for small bipartite graphs.

/// Largest number of left vertices that can be assigned distinct adjacent
/// right vertices, by trying every assignment.
pub fn brute_force_matching(adjacency: &[Vec<bool>], right: usize) -> usize {
    fn go(l: usize, adjacency: &[Vec<bool>], used: &mut Vec<bool>) -> usize {
        if l == adjacency.len() {
            return 0;
        }
        // leave l unmatched
        let mut best = go(l + 1, adjacency, used);
        for r in 0..used.len() {
            if adjacency[l][r] && !used[r] {
                used[r] = true;
                best = best.max(1 + go(l + 1, adjacency, used));
                used[r] = false;
            }
        }
        best
    }
    go(0, adjacency, &mut vec![false; right])
}
