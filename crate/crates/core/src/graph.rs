//! Small directed-graph helpers over adjacency lists.

/// Strongly connected components of `adj`.
///
/// Returns the component index of every node. Components are numbered in
/// the order Tarjan's algorithm completes them (reverse topological).
pub fn scc(adj: &[Vec<usize>]) -> Vec<usize> {
    const UNSEEN: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![UNSEEN; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    // (node, next child position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if *pos < adj[v].len() {
                let w = adj[v][*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
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
    }
    comp
}

/// Nodes that lie on some cycle through a node satisfying `marked`.
///
/// A node qualifies when its strongly connected component is nontrivial
/// (more than one node, or a self-loop) and contains a marked node.
pub fn on_marked_cycle(adj: &[Vec<usize>], marked: impl Fn(usize) -> bool) -> Vec<bool> {
    let comp = scc(adj);
    let ncomp = comp.iter().copied().max().map_or(0, |m| m + 1);
    let mut size = vec![0usize; ncomp];
    let mut self_loop = vec![false; ncomp];
    let mut has_mark = vec![false; ncomp];
    for v in 0..adj.len() {
        let c = comp[v];
        size[c] += 1;
        if adj[v].contains(&v) {
            self_loop[c] = true;
        }
        if marked(v) {
            has_mark[c] = true;
        }
    }
    (0..adj.len())
        .map(|v| {
            let c = comp[v];
            has_mark[c] && (size[c] > 1 || self_loop[c])
        })
        .collect()
}

/// Nodes from which some node in `targets` is reachable (targets included).
pub fn backward_reachable(adj: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = adj.len();
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let mut seen = targets.to_vec();
    let mut work: Vec<usize> = (0..n).filter(|&v| seen[v]).collect();
    while let Some(v) = work.pop() {
        for &u in &rev[v] {
            if !seen[u] {
                seen[u] = true;
                work.push(u);
            }
        }
    }
    seen
}

/// Nodes reachable from `roots` (roots included).
pub fn forward_reachable(adj: &[Vec<usize>], roots: &[usize]) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut work = Vec::new();
    for &r in roots {
        if !seen[r] {
            seen[r] = true;
            work.push(r);
        }
    }
    while let Some(v) = work.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                work.push(w);
            }
        }
    }
    seen
}
