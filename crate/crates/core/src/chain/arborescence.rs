//! Minimum-weight spanning in-trees (Chu–Liu/Edmonds).

/// A directed weighted edge `from -> to`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A spanning in-tree: every non-root node keeps exactly one out-edge and
/// following out-edges from any node ends at the root.
#[derive(Debug, Clone, PartialEq)]
pub struct InTree {
    pub root: usize,
    /// Index into the edge list of each node's out-edge; `None` at the root.
    pub parent_edge: Vec<Option<usize>>,
    pub total_weight: f64,
}

/// Minimum spanning out-arborescence: each non-root node picks one incoming
/// arc. Returns the chosen arc index per node (`usize::MAX` at the root), or
/// `None` if some node is unreachable from the root.
fn min_out_arborescence(n: usize, root: usize, arcs: &[Arc]) -> Option<Vec<usize>> {
    const NONE: usize = usize::MAX;
    let mut best = vec![NONE; n];
    for (k, a) in arcs.iter().enumerate() {
        if a.from != a.to && a.to != root && (best[a.to] == NONE || a.weight < arcs[best[a.to]].weight) {
            best[a.to] = k;
        }
    }
    if (0..n).any(|v| v != root && best[v] == NONE) {
        return None;
    }
    // Find the cycles formed by the chosen arcs.
    let mut comp = vec![NONE; n];
    let mut in_cycle = vec![false; n];
    let mut mark = vec![NONE; n];
    let mut count = 0;
    for s in 0..n {
        let mut v = s;
        while v != root && mark[v] == NONE && comp[v] == NONE {
            mark[v] = s;
            v = arcs[best[v]].from;
        }
        if v != root && mark[v] == s && comp[v] == NONE {
            // `v` closes a new cycle.
            let mut u = v;
            loop {
                comp[u] = count;
                in_cycle[u] = true;
                u = arcs[best[u]].from;
                if u == v {
                    break;
                }
            }
            count += 1;
        }
    }
    if count == 0 {
        return Some(best);
    }
    for v in 0..n {
        if comp[v] == NONE {
            comp[v] = count;
            count += 1;
        }
    }
    let mut contracted = Vec::with_capacity(arcs.len());
    let mut origin = Vec::with_capacity(arcs.len());
    for (k, a) in arcs.iter().enumerate() {
        let (cu, cv) = (comp[a.from], comp[a.to]);
        if cu != cv {
            let w = if in_cycle[a.to] { a.weight - arcs[best[a.to]].weight } else { a.weight };
            contracted.push(Arc { from: cu, to: cv, weight: w });
            origin.push(k);
        }
    }
    let sub = min_out_arborescence(count, comp[root], &contracted)?;
    let mut chosen = vec![NONE; n];
    for v in 0..n {
        if v != root && in_cycle[v] {
            chosen[v] = best[v];
        }
    }
    for (c, &k) in sub.iter().enumerate() {
        if c == comp[root] {
            continue;
        }
        let e = origin[k];
        chosen[arcs[e].to] = e;
    }
    Some(chosen)
}

/// The minimum-weight in-tree rooted at `root`, or `None` if some node
/// cannot reach `root`.
pub fn min_in_tree(n: usize, edges: &[Arc], root: usize) -> Option<InTree> {
    let reversed: Vec<Arc> = edges
        .iter()
        .map(|e| Arc { from: e.to, to: e.from, weight: e.weight })
        .collect();
    let chosen = min_out_arborescence(n, root, &reversed)?;
    let parent_edge: Vec<Option<usize>> = chosen.iter().map(|&k| (k != usize::MAX).then_some(k)).collect();
    let total_weight = parent_edge.iter().flatten().map(|&k| edges[k].weight).sum();
    Some(InTree { root, parent_edge, total_weight })
}

impl InTree {
    /// Checks the in-tree shape against `edges`: one out-edge per non-root
    /// node, every path ends at the root, weight adds up.
    pub fn is_valid(&self, n: usize, edges: &[Arc]) -> bool {
        if self.parent_edge.len() != n || self.parent_edge[self.root].is_some() {
            return false;
        }
        for v in 0..n {
            if v == self.root {
                continue;
            }
            match self.parent_edge[v] {
                Some(k) if edges[k].from == v => {}
                _ => return false,
            }
            let mut u = v;
            for _ in 0..=n {
                if u == self.root {
                    break;
                }
                u = edges[self.parent_edge[u].unwrap()].to;
            }
            if u != self.root {
                return false;
            }
        }
        let w: f64 = self.parent_edge.iter().flatten().map(|&k| edges[k].weight).sum();
        (w - self.total_weight).abs() < 1e-9
    }
}
