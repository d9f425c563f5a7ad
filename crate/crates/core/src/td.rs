//! Tree decompositions of small graphs: a min-fill heuristic, a checker, and
//! conversion to nice form for the dynamic program.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::TdError;
use crate::gen;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDecomposition {
    pub bags: Vec<BTreeSet<usize>>,
    /// Undirected tree edges between bag indices.
    pub tree: Vec<(usize, usize)>,
    pub root: usize,
}

impl TreeDecomposition {
    pub fn width(&self) -> usize {
        self.bags.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1)
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.bags.len()];
        for &(a, b) in &self.tree {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }
}

fn edge_list(adj: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for (a, ns) in adj.iter().enumerate() {
        for &b in ns {
            if a < b {
                out.push((a, b));
            }
        }
    }
    out
}

/// Min-fill elimination with min-degree tie-break; remaining ties are broken
/// by a seeded shuffle.
pub fn decompose(adj: &[Vec<usize>], seed: u64) -> TreeDecomposition {
    let n = adj.len();
    if n == 0 {
        return TreeDecomposition { bags: vec![BTreeSet::new()], tree: vec![], root: 0 };
    }
    let mut nb: Vec<BTreeSet<usize>> = adj.iter().map(|v| v.iter().copied().collect()).collect();
    let mut tiebreak: Vec<usize> = (0..n).collect();
    tiebreak.shuffle(&mut gen::rng(seed));
    let mut alive: BTreeSet<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut later: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    while !alive.is_empty() {
        let fill = |v: usize| {
            let ns: Vec<usize> = nb[v].iter().copied().collect();
            let mut missing = 0;
            for i in 0..ns.len() {
                for j in i + 1..ns.len() {
                    if !nb[ns[i]].contains(&ns[j]) {
                        missing += 1;
                    }
                }
            }
            missing
        };
        let v = *alive.iter().min_by_key(|&&v| (fill(v), nb[v].len(), tiebreak[v])).unwrap();
        let ns: Vec<usize> = nb[v].iter().copied().collect();
        for &a in &ns {
            for &b in &ns {
                if a != b {
                    nb[a].insert(b);
                }
            }
            nb[a].remove(&v);
        }
        later[v] = nb[v].clone();
        nb[v].clear();
        alive.remove(&v);
        order.push(v);
    }
    let pos: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let bags: Vec<BTreeSet<usize>> = order
        .iter()
        .map(|&v| {
            let mut b = later[v].clone();
            b.insert(v);
            b
        })
        .collect();
    let mut tree = Vec::new();
    let mut roots = Vec::new();
    for (i, &v) in order.iter().enumerate() {
        match later[v].iter().map(|u| pos[u]).min() {
            Some(p) => tree.push((i, p)),
            None => roots.push(i),
        }
    }
    // join the trees of separate components
    for w in roots.windows(2) {
        tree.push((w[0], w[1]));
    }
    let root = *roots.last().unwrap();
    TreeDecomposition { bags, tree, root }
}

/// Checks vertex coverage, edge coverage and connectedness of occurrences.
pub fn check(adj: &[Vec<usize>], td: &TreeDecomposition) -> Result<(), TdError> {
    let bad = |m: String| Err(TdError::Invalid(m));
    let nodes = td.bags.len();
    if td.tree.len() + 1 != nodes {
        return bad(format!("{} tree edges for {} bags", td.tree.len(), nodes));
    }
    let tadj = td.adjacency();
    let mut seen = vec![false; nodes];
    let mut stack = vec![td.root];
    while let Some(x) = stack.pop() {
        if std::mem::replace(&mut seen[x], true) {
            continue;
        }
        stack.extend(tadj[x].iter().copied());
    }
    if seen.iter().any(|s| !s) {
        return bad("bag tree is not connected".into());
    }
    for v in 0..adj.len() {
        let holders: Vec<usize> = (0..nodes).filter(|&b| td.bags[b].contains(&v)).collect();
        if holders.is_empty() {
            return bad(format!("vertex {v} in no bag"));
        }
        let mut reach = BTreeSet::from([holders[0]]);
        let mut stack = vec![holders[0]];
        while let Some(x) = stack.pop() {
            for &y in &tadj[x] {
                if td.bags[y].contains(&v) && reach.insert(y) {
                    stack.push(y);
                }
            }
        }
        if reach.len() != holders.len() {
            return bad(format!("bags holding {v} are not connected"));
        }
    }
    for (a, b) in edge_list(adj) {
        if !td.bags.iter().any(|bag| bag.contains(&a) && bag.contains(&b)) {
            return bad(format!("edge {a}-{b} uncovered"));
        }
    }
    Ok(())
}

pub fn verify(adj: &[Vec<usize>], td: &TreeDecomposition) -> bool {
    check(adj, td).is_ok()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NiceKind {
    Leaf,
    Introduce(usize),
    Forget(usize),
    Join,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceNode {
    pub kind: NiceKind,
    pub bag: BTreeSet<usize>,
    pub children: Vec<usize>,
}

/// Nice decomposition. Children always precede their parent in `nodes`, so
/// a forward pass is a valid bottom-up order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceTreeDecomposition {
    pub nodes: Vec<NiceNode>,
    pub root: usize,
}

impl NiceTreeDecomposition {
    pub fn width(&self) -> usize {
        self.nodes.iter().map(|n| n.bag.len()).max().unwrap_or(1).saturating_sub(1)
    }

    pub fn as_plain(&self) -> TreeDecomposition {
        let mut tree = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            for &c in &n.children {
                tree.push((c, i));
            }
        }
        TreeDecomposition { bags: self.nodes.iter().map(|n| n.bag.clone()).collect(), tree, root: self.root }
    }

    /// Node kinds agree with the bags of their children.
    pub fn check_kinds(&self) -> Result<(), TdError> {
        let bad = |m: String| Err(TdError::Invalid(m));
        if !self.nodes[self.root].bag.is_empty() {
            return bad("root bag not empty".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            let kid = |j: usize| &self.nodes[n.children[j]].bag;
            let ok = match n.kind {
                NiceKind::Leaf => n.children.is_empty() && n.bag.is_empty(),
                NiceKind::Introduce(v) => {
                    n.children.len() == 1 && !kid(0).contains(&v) && {
                        let mut b = kid(0).clone();
                        b.insert(v);
                        b == n.bag
                    }
                }
                NiceKind::Forget(v) => {
                    n.children.len() == 1 && kid(0).contains(&v) && {
                        let mut b = kid(0).clone();
                        b.remove(&v);
                        b == n.bag
                    }
                }
                NiceKind::Join => n.children.len() == 2 && *kid(0) == n.bag && *kid(1) == n.bag,
            };
            if !ok {
                return bad(format!("node {i} ({:?}) disagrees with its children", n.kind));
            }
            if n.children.iter().any(|&c| c >= i) {
                return bad(format!("node {i} precedes a child"));
            }
        }
        Ok(())
    }
}

struct NiceBuilder {
    nodes: Vec<NiceNode>,
}

impl NiceBuilder {
    fn push(&mut self, kind: NiceKind, bag: BTreeSet<usize>, children: Vec<usize>) -> usize {
        self.nodes.push(NiceNode { kind, bag, children });
        self.nodes.len() - 1
    }

    /// Forget then introduce until the bag of `from` becomes `to`.
    fn morph(&mut self, mut from: usize, to: &BTreeSet<usize>) -> usize {
        let current = self.nodes[from].bag.clone();
        for &v in current.difference(to) {
            let mut b = self.nodes[from].bag.clone();
            b.remove(&v);
            from = self.push(NiceKind::Forget(v), b, vec![from]);
        }
        for &v in to.difference(&current) {
            let mut b = self.nodes[from].bag.clone();
            b.insert(v);
            from = self.push(NiceKind::Introduce(v), b, vec![from]);
        }
        from
    }

    fn build(&mut self, td: &TreeDecomposition, adj: &[Vec<usize>], x: usize, parent: Option<usize>) -> usize {
        let bag = &td.bags[x];
        let kids: Vec<usize> = adj[x].iter().copied().filter(|&c| Some(c) != parent).collect();
        let mut parts = Vec::new();
        for c in kids {
            let sub = self.build(td, adj, c, Some(x));
            parts.push(self.morph(sub, bag));
        }
        if parts.is_empty() {
            let leaf = self.push(NiceKind::Leaf, BTreeSet::new(), vec![]);
            return self.morph(leaf, bag);
        }
        let mut acc = parts[0];
        for &p in &parts[1..] {
            acc = self.push(NiceKind::Join, bag.clone(), vec![acc, p]);
        }
        acc
    }
}

/// Nice form with empty leaves and an empty root; width is unchanged.
pub fn make_nice(td: &TreeDecomposition) -> NiceTreeDecomposition {
    let adj = td.adjacency();
    let mut b = NiceBuilder { nodes: Vec::new() };
    let top = b.build(td, &adj, td.root, None);
    let root = b.morph(top, &BTreeSet::new());
    NiceTreeDecomposition { nodes: b.nodes, root }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    #[test]
    fn small_graphs() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        let td = decompose(&path, 0);
        assert!(verify(&path, &td));
        assert_eq!(td.width(), 1);
        let single = graph(1, &[]);
        let td = decompose(&single, 0);
        assert_eq!(td.bags.len(), 1);
        assert_eq!(td.width(), 0);
        let cycle = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
        let td = decompose(&cycle, 0);
        assert!(verify(&cycle, &td));
        assert_eq!(td.width(), 2);
    }

    #[test]
    fn checker_rejects_bad_decompositions() {
        let path = graph(3, &[(0, 1), (1, 2)]);
        let td = TreeDecomposition {
            bags: vec![BTreeSet::from([0, 1]), BTreeSet::from([2])],
            tree: vec![(0, 1)],
            root: 0,
        };
        assert!(!verify(&path, &td), "edge 1-2 uncovered");
        // 0 occurs in two bags separated by a bag without it
        let g = graph(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]);
        let td = TreeDecomposition {
            bags: vec![BTreeSet::from([0, 1, 2]), BTreeSet::from([2, 3]), BTreeSet::from([0, 3])],
            tree: vec![(0, 1), (1, 2)],
            root: 0,
        };
        assert!(!verify(&g, &td));
    }

    #[test]
    fn single_bag_becomes_a_chain() {
        let td = TreeDecomposition { bags: vec![BTreeSet::from([0, 1])], tree: vec![], root: 0 };
        let nice = make_nice(&td);
        nice.check_kinds().unwrap();
        let kinds: Vec<NiceKind> = nice.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            vec![NiceKind::Leaf, NiceKind::Introduce(0), NiceKind::Introduce(1), NiceKind::Forget(0), NiceKind::Forget(1)]
        );
    }

    fn random_graph() -> impl Strategy<Value = Vec<Vec<usize>>> {
        (1usize..12).prop_flat_map(|n| {
            proptest::collection::vec((0..n, 0..n), 0..3 * n).prop_map(move |es| {
                let es: Vec<(usize, usize)> = es.into_iter().filter(|(a, b)| a != b).collect();
                let mut adj = graph(n, &es);
                for v in &mut adj {
                    v.sort();
                    v.dedup();
                }
                adj
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn decompose_is_valid_and_nice_keeps_width(adj in random_graph(), seed in 0u64..1000) {
            let td = decompose(&adj, seed);
            prop_assert!(check(&adj, &td).is_ok(), "{:?}", check(&adj, &td));
            prop_assert_eq!(decompose(&adj, seed), td.clone());
            let nice = make_nice(&td);
            prop_assert!(nice.check_kinds().is_ok());
            prop_assert!(check(&adj, &nice.as_plain()).is_ok());
            prop_assert_eq!(nice.width(), td.width());
        }

        #[test]
        fn trees_have_width_one(n in 2usize..20, seed in 0u64..100) {
            let mut r = gen::rng(seed);
            let edges: Vec<(usize, usize)> = (1..n).map(|v| (v, rand::Rng::gen_range(&mut r, 0..v))).collect();
            let adj = graph(n, &edges);
            prop_assert_eq!(decompose(&adj, seed).width(), 1);
        }
    }
}
