//! Directed-graph algorithms over adjacency lists (`adj[v]` = successors of `v`).

use std::collections::VecDeque;

/// Breadth-first distances from any of `sources`; `None` for unreachable vertices.
pub fn bfs_distances(adj: &[Vec<usize>], sources: &[usize]) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s].is_none() {
            dist[s] = Some(0);
            queue.push_back(s);
        }
    }
    while let Some(v) = queue.pop_front() {
        let d = dist[v].expect("queued vertices have a distance");
        for &w in &adj[v] {
            if dist[w].is_none() {
                dist[w] = Some(d + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Largest finite shortest-path distance over all ordered vertex pairs.
pub fn diameter(adj: &[Vec<usize>]) -> usize {
    (0..adj.len())
        .map(|v| bfs_distances(adj, &[v]).into_iter().flatten().max().unwrap_or(0))
        .max()
        .unwrap_or(0)
}

/// Strongly connected components by Tarjan's algorithm, iteratively.
/// Returns the component id of every vertex; ids are dense from 0.
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    // (vertex, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        while let Some(&(v, pos)) = call.last() {
            if pos == 0 && index[v] == UNSEEN {
                index[v] = next_index;
                low[v] = next_index;
                next_index += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(pos) {
                call.last_mut().expect("frame exists").1 += 1;
                if index[w] == UNSEEN {
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("component root is on the stack");
                    on_stack[w] = false;
                    comp[w] = next_comp;
                    if w == v {
                        break;
                    }
                }
                next_comp += 1;
            }
        }
    }
    comp
}

pub fn scc_count(adj: &[Vec<usize>]) -> usize {
    strongly_connected_components(adj)
        .into_iter()
        .max()
        .map(|m| m + 1)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let single = vec![vec![]];
        assert_eq!((scc_count(&single), diameter(&single)), (1, 0));
        let cycle = vec![vec![1], vec![2], vec![0]];
        assert_eq!((scc_count(&cycle), diameter(&cycle)), (1, 2));
        let chain = vec![vec![1], vec![2], vec![]];
        assert_eq!((scc_count(&chain), diameter(&chain)), (3, 2));
        assert_eq!(bfs_distances(&chain, &[1]), vec![None, Some(0), Some(1)]);
        assert_eq!(scc_count(&[]), 0);
    }

    #[test]
    fn long_path_does_not_overflow_the_stack() {
        let n = 200_000;
        let adj: Vec<Vec<usize>> = (0..n).map(|i| if i + 1 < n { vec![i + 1] } else { vec![0] }).collect();
        assert_eq!(scc_count(&adj), 1);
    }
}
