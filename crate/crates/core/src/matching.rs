//! Maximum-cardinality bipartite matching (augmenting paths).

/// Matches left vertices to right vertices. `adjacency[l]` lists the right
/// vertices adjacent to `l` in preference order; preference only affects
/// which maximum matching is returned, not its size.
///
/// Returns, for every left vertex, its matched right vertex.
pub fn maximum_matching(adjacency: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let mut right_owner: Vec<Option<usize>> = vec![None; n_right];
    let mut visited = vec![false; n_right];
    for left in 0..adjacency.len() {
        visited.iter_mut().for_each(|v| *v = false);
        augment(left, adjacency, &mut right_owner, &mut visited);
    }
    let mut left_match = vec![None; adjacency.len()];
    for (right, owner) in right_owner.into_iter().enumerate() {
        if let Some(left) = owner {
            left_match[left] = Some(right);
        }
    }
    left_match
}

fn augment(left: usize, adjacency: &[Vec<usize>], right_owner: &mut [Option<usize>], visited: &mut [bool]) -> bool {
    for &right in &adjacency[left] {
        if visited[right] {
            continue;
        }
        visited[right] = true;
        let free = match right_owner[right] {
            None => true,
            Some(other) => augment(other, adjacency, right_owner, visited),
        };
        if free {
            right_owner[right] = Some(left);
            return true;
        }
    }
    false
}

pub fn matching_size(adjacency: &[Vec<usize>], n_right: usize) -> usize {
    maximum_matching(adjacency, n_right).iter().flatten().count()
}
