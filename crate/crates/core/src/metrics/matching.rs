/// A maximum-cardinality matching in a bipartite graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub size: usize,
    /// For each left vertex, its matched right vertex.
    pub left: Vec<Option<usize>>,
}

/// Kuhn's augmenting-path algorithm. `adjacency[l]` lists the right vertices
/// adjacent to left vertex `l`; right vertices are `0..right_count`.
pub fn max_bipartite_matching(adjacency: &[Vec<usize>], right_count: usize) -> Matching {
    let mut owner: Vec<Option<usize>> = vec![None; right_count];
    let mut size = 0;
    for l in 0..adjacency.len() {
        let mut visited = vec![false; right_count];
        if augment(l, adjacency, &mut owner, &mut visited) {
            size += 1;
        }
    }
    let mut left = vec![None; adjacency.len()];
    for (r, o) in owner.iter().enumerate() {
        if let Some(l) = *o {
            left[l] = Some(r);
        }
    }
    Matching { size, left }
}

fn augment(
    l: usize,
    adjacency: &[Vec<usize>],
    owner: &mut [Option<usize>],
    visited: &mut [bool],
) -> bool {
    for &r in &adjacency[l] {
        if visited[r] {
            continue;
        }
        visited[r] = true;
        if owner[r].is_none_or(|other| augment(other, adjacency, owner, visited)) {
            owner[r] = Some(l);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn needs_augmenting_path() {
        // greedy would match 0-0 and strand 1
        let adjacency = vec![vec![0, 1], vec![0]];
        let m = max_bipartite_matching(&adjacency, 2);
        assert_eq!(m.size, 2);
        assert_eq!(m.left, vec![Some(1), Some(0)]);
    }

    #[test]
    fn empty_sides() {
        assert_eq!(max_bipartite_matching(&[], 3).size, 0);
        assert_eq!(max_bipartite_matching(&[vec![], vec![]], 0).size, 0);
    }
}
