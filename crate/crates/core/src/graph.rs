//! Directed acyclic graphs stored as sorted parent lists.

use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Acyclic directed graph over nodes `0..p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn empty(p: usize) -> Self {
        Self {
            parents: vec![Vec::new(); p],
        }
    }

    /// Builds a graph from `(from, to)` pairs, rejecting cycles, self-loops
    /// and duplicates.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(p);
        for &(a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    /// Builds a graph from one parent list per node.
    pub fn from_parents(parents: Vec<Vec<usize>>) -> Result<Self> {
        let p = parents.len();
        let mut g = Self::empty(p);
        for (j, pa) in parents.iter().enumerate() {
            for &a in pa {
                g.add_edge(a, j)?;
            }
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.parents.len()
    }

    pub fn parents(&self, j: usize) -> &[usize] {
        &self.parents[j]
    }

    pub fn children(&self, j: usize) -> Vec<usize> {
        (0..self.p()).filter(|&c| self.parents[c].contains(&j)).collect()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.parents[to].binary_search(&from).is_ok()
    }

    pub fn n_edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// All edges `(from, to)`, sorted lexicographically.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parents
            .iter()
            .enumerate()
            .flat_map(|(j, pa)| pa.iter().map(move |&a| (a, j)))
            .collect();
        e.sort_unstable();
        e
    }

    fn check_node(&self, j: usize) -> Result<()> {
        if j >= self.p() {
            return Err(Error::NodeOutOfRange { node: j, p: self.p() });
        }
        Ok(())
    }

    /// A directed path `from ⇝ to`, if one exists.
    pub fn find_path(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let p = self.p();
        let children: Vec<Vec<usize>> = (0..p).map(|j| self.children(j)).collect();
        let mut prev = vec![usize::MAX; p];
        let mut seen = vec![false; p];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(v) = stack.pop() {
            if v == to {
                let mut path = vec![to];
                let mut cur = to;
                while cur != from {
                    cur = prev[cur];
                    path.push(cur);
                }
                path.reverse();
                return Some(path);
            }
            for &c in children[v].iter().rev() {
                if !seen[c] {
                    seen[c] = true;
                    prev[c] = v;
                    stack.push(c);
                }
            }
        }
        None
    }

    /// Whether adding `from -> to` would close a directed cycle.
    pub fn creates_cycle(&self, from: usize, to: usize) -> bool {
        from == to || self.find_path(to, from).is_some()
    }

    /// Adds `from -> to` in place, leaving the graph untouched on error.
    pub fn add_edge(&mut self, from: usize, to: usize) -> Result<()> {
        self.check_node(from)?;
        self.check_node(to)?;
        if from == to {
            return Err(Error::SelfLoop(from));
        }
        if self.has_edge(from, to) {
            return Err(Error::DuplicateEdge(from, to));
        }
        if let Some(mut path) = self.find_path(to, from) {
            path.push(to);
            return Err(Error::Cycle { from, to, path });
        }
        let pa = &mut self.parents[to];
        let pos = pa.binary_search(&from).unwrap_err();
        pa.insert(pos, from);
        debug_assert!(self.is_acyclic());
        Ok(())
    }

    /// Returns a copy with `from -> to` added.
    pub fn add_edge_checked(&self, from: usize, to: usize) -> Result<Self> {
        let mut g = self.clone();
        g.add_edge(from, to)?;
        Ok(g)
    }

    pub fn remove_edge(&mut self, from: usize, to: usize) -> bool {
        match self.parents[to].binary_search(&from) {
            Ok(pos) => {
                self.parents[to].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Replaces the parent list of `j`. Fails, leaving `self` unchanged, if
    /// the result would be cyclic.
    pub fn set_parents(&mut self, j: usize, parents: &[usize]) -> Result<()> {
        let old = std::mem::take(&mut self.parents[j]);
        for &a in parents {
            if let Err(e) = self.add_edge(a, j) {
                self.parents[j] = old;
                return Err(e);
            }
        }
        Ok(())
    }

    /// Kahn's algorithm, always taking the smallest available node, so an
    /// edgeless graph yields `0..p`.
    pub fn topological_order(&self) -> Vec<usize> {
        self.try_topological_order()
            .expect("Dag invariant guarantees acyclicity")
    }

    fn try_topological_order(&self) -> Option<Vec<usize>> {
        let p = self.p();
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let children: Vec<Vec<usize>> = (0..p).map(|j| self.children(j)).collect();
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..p).filter(|&j| indeg[j] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(p);
        while let Some(Reverse(v)) = heap.pop() {
            order.push(v);
            for &c in &children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    heap.push(Reverse(c));
                }
            }
        }
        (order.len() == p).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.try_topological_order().is_some()
    }

    /// Every node reachable from `j` by a directed path, excluding `j`.
    pub fn descendants(&self, j: usize) -> Vec<usize> {
        let p = self.p();
        let children: Vec<Vec<usize>> = (0..p).map(|v| self.children(v)).collect();
        let mut seen = vec![false; p];
        let mut stack = vec![j];
        while let Some(v) = stack.pop() {
            for &c in &children[v] {
                if !seen[c] {
                    seen[c] = true;
                    stack.push(c);
                }
            }
        }
        (0..p).filter(|&v| seen[v] && v != j).collect()
    }

    /// Parents, children and the children's other parents of `j`.
    pub fn markov_blanket(&self, j: usize) -> Vec<usize> {
        let mut mb = vec![false; self.p()];
        for &a in &self.parents[j] {
            mb[a] = true;
        }
        for c in self.children(j) {
            mb[c] = true;
            for &a in &self.parents[c] {
                mb[a] = true;
            }
        }
        mb[j] = false;
        (0..self.p()).filter(|&v| mb[v]).collect()
    }

    /// The members of `candidates` whose edge into `j` could be added (or is
    /// already present) without creating a cycle.
    pub fn admissible_candidates(&self, j: usize, candidates: &[usize]) -> Vec<usize> {
        let desc = self.descendants(j);
        candidates
            .iter()
            .copied()
            .filter(|&c| c != j && !desc.contains(&c))
            .collect()
    }

    /// One `from -> to` line per edge.
    pub fn to_edge_list(&self, names: Option<&[String]>) -> String {
        let label = |v: usize| names.map_or_else(|| v.to_string(), |n| n[v].clone());
        let mut s = String::new();
        for (a, b) in self.edges() {
            let _ = writeln!(s, "{} -> {}", label(a), label(b));
        }
        s
    }

    pub fn to_dot(&self, names: Option<&[String]>) -> String {
        let label = |v: usize| names.map_or_else(|| v.to_string(), |n| n[v].clone());
        let mut s = String::from("digraph G {\n");
        for v in 0..self.p() {
            let _ = writeln!(s, "  n{v} [label=\"{}\"];", label(v).replace('"', "\\\""));
        }
        for (a, b) in self.edges() {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }

    /// Parses edge-list text; `resolve` maps a token to a node index.
    /// Blank lines and `#` comments are ignored.
    pub fn parse_edge_list(
        p: usize,
        text: &str,
        resolve: impl Fn(&str) -> Result<usize>,
    ) -> Result<Self> {
        let mut g = Self::empty(p);
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (a, b) = parse_edge_line(line).ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected 'from -> to', got '{line}'"),
            })?;
            g.add_edge(resolve(a)?, resolve(b)?)?;
        }
        Ok(g)
    }

    /// Structural Hamming distance restricted to presence/absence of each
    /// ordered pair.
    pub fn edge_difference(&self, other: &Dag) -> usize {
        let a = self.edges();
        let b = other.edges();
        a.iter().filter(|e| !b.contains(e)).count() + b.iter().filter(|e| !a.contains(e)).count()
    }
}

pub(crate) fn parse_edge_line(line: &str) -> Option<(&str, &str)> {
    let (a, b) = line.split_once("->")?;
    let (a, b) = (a.trim(), b.trim());
    (!a.is_empty() && !b.is_empty()).then_some((a, b))
}

/// Index-based resolver for [`Dag::parse_edge_list`].
pub fn resolve_index(p: usize) -> impl Fn(&str) -> Result<usize> {
    move |tok: &str| {
        let j: usize = tok
            .parse()
            .map_err(|_| Error::UnknownVariable(tok.to_string()))?;
        if j >= p {
            return Err(Error::NodeOutOfRange { node: j, p });
        }
        Ok(j)
    }
}

/// Candidate parents `Ca(j)` of one node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub node: usize,
    pub candidates: Vec<usize>,
}

impl CandidateSet {
    pub fn new(node: usize, mut candidates: Vec<usize>) -> Result<Self> {
        candidates.sort_unstable();
        candidates.dedup();
        if candidates.contains(&node) {
            return Err(Error::SelfParent(node));
        }
        Ok(Self { node, candidates })
    }

    /// Every other node.
    pub fn all_others(node: usize, p: usize) -> Self {
        Self {
            node,
            candidates: (0..p).filter(|&v| v != node).collect(),
        }
    }

    /// Nodes that precede `node` in `order`.
    pub fn predecessors(node: usize, order: &[usize]) -> Self {
        let pos = order.iter().position(|&v| v == node).unwrap_or(order.len());
        let mut candidates = order[..pos].to_vec();
        candidates.sort_unstable();
        Self { node, candidates }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// 0-based version of the five-node example: x1→x2, x2→x3, x1→x4, x3→x4,
    /// x2→x5, x3→x5, x4→x5.
    fn five_node() -> Vec<(usize, usize)> {
        vec![(0, 1), (1, 2), (0, 3), (2, 3), (1, 4), (2, 4), (3, 4)]
    }

    #[test]
    fn add_and_reject() {
        let g = Dag::empty(3).add_edge_checked(0, 1).unwrap();
        assert_eq!(g.n_edges(), 1);
        let g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        match g.add_edge_checked(2, 0) {
            Err(Error::Cycle { path, .. }) => assert_eq!(path, vec![0, 1, 2, 0]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(g.add_edge_checked(1, 1), Err(Error::SelfLoop(1))));
        assert!(matches!(g.add_edge_checked(0, 1), Err(Error::DuplicateEdge(0, 1))));
    }

    #[test]
    fn five_node_example_any_order() {
        let mut e = five_node();
        for rot in 0..e.len() {
            e.rotate_left(1);
            let mut rev = e.clone();
            rev.reverse();
            for edges in [&e, &rev] {
                let g = Dag::from_edges(5, edges).unwrap();
                assert_eq!(g.n_edges(), 7, "rotation {rot}");
            }
        }
    }

    #[test]
    fn five_node_order_and_blanket() {
        let g = Dag::from_edges(5, &five_node()).unwrap();
        let order = g.topological_order();
        let pos = |v: usize| order.iter().position(|&x| x == v).unwrap();
        for (a, b) in five_node() {
            assert!(pos(a) < pos(b));
        }
        assert_eq!(g.markov_blanket(2), vec![0, 1, 3, 4]);
        assert_eq!(Dag::empty(4).topological_order(), vec![0, 1, 2, 3]);
        assert!(Dag::empty(3).markov_blanket(1).is_empty());
        let g = Dag::from_edges(3, &[(0, 2)]).unwrap();
        assert_eq!(g.markov_blanket(2), vec![0]);
    }

    #[test]
    fn admissible_on_chain() {
        let g = Dag::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(g.admissible_candidates(0, &[1, 2]).is_empty());
        assert_eq!(Dag::empty(3).admissible_candidates(0, &[1, 2]), vec![1, 2]);
    }

    #[test]
    fn edge_list_and_dot() {
        let g = Dag::from_edges(3, &[(0, 2), (1, 2)]).unwrap();
        let text = g.to_edge_list(None);
        assert_eq!(text, "0 -> 2\n1 -> 2\n");
        assert_eq!(Dag::parse_edge_list(3, &text, resolve_index(3)).unwrap(), g);
        let dot = g.to_dot(None);
        assert!(dot.contains("n0 -> n2;") && dot.starts_with("digraph"));
        assert!(Dag::parse_edge_list(3, "0 - 1", resolve_index(3)).is_err());
        assert!(matches!(
            Dag::parse_edge_list(2, "0 -> 1\n1 -> 0", resolve_index(2)),
            Err(Error::Cycle { .. })
        ));
    }

    #[test]
    fn predecessor_candidates() {
        let ca = CandidateSet::predecessors(2, &[3, 2, 0, 1]);
        assert_eq!(ca.candidates, vec![3]);
        assert!(CandidateSet::new(1, vec![1, 0]).is_err());
    }

    /// Random DAG: an edge a→b is allowed only when perm[a] < perm[b].
    fn arb_dag() -> impl Strategy<Value = Dag> {
        (2usize..8).prop_flat_map(|p| {
            (
                Just(p),
                Just((0..p).collect::<Vec<_>>()).prop_shuffle(),
                proptest::collection::vec(any::<bool>(), p * p),
            )
        })
        .prop_map(|(p, perm, bits)| {
            let mut g = Dag::empty(p);
            for a in 0..p {
                for b in 0..p {
                    if perm[a] < perm[b] && bits[a * p + b] {
                        g.add_edge(a, b).unwrap();
                    }
                }
            }
            g
        })
    }

    /// Reference cycle test: does the graph plus the extra edge admit a
    /// topological order? Computed by repeatedly deleting sources.
    fn brute_cyclic(g: &Dag, extra: (usize, usize)) -> bool {
        let p = g.p();
        let mut edges = g.edges();
        edges.push(extra);
        let mut alive = vec![true; p];
        loop {
            let src = (0..p).find(|&v| alive[v] && !edges.iter().any(|&(a, b)| b == v && alive[a]));
            match src {
                Some(v) => alive[v] = false,
                None => return alive.iter().any(|&x| x),
            }
        }
    }

    proptest! {
        #[test]
        fn topological_order_respects_edges(g in arb_dag()) {
            let order = g.topological_order();
            let mut pos = vec![0; g.p()];
            for (i, &v) in order.iter().enumerate() { pos[v] = i; }
            for (a, b) in g.edges() { prop_assert!(pos[a] < pos[b]); }
        }

        #[test]
        fn admissible_matches_brute_force(g in arb_dag(), j in 0usize..8) {
            let j = j % g.p();
            let ca: Vec<usize> = (0..g.p()).filter(|&v| v != j).collect();
            let adm = g.admissible_candidates(j, &ca);
            for &c in &ca {
                let ok = g.has_edge(c, j) || !brute_cyclic(&g, (c, j));
                prop_assert_eq!(adm.contains(&c), ok, "candidate {}", c);
                if ok && !g.has_edge(c, j) {
                    prop_assert!(g.add_edge_checked(c, j).is_ok());
                }
            }
        }

        #[test]
        fn mutations_preserve_acyclicity(g in arb_dag(), a in 0usize..8, b in 0usize..8) {
            let (a, b) = (a % g.p(), b % g.p());
            match g.add_edge_checked(a, b) {
                Ok(h) => prop_assert!(h.is_acyclic()),
                Err(_) => prop_assert!(a == b || g.has_edge(a, b) || brute_cyclic(&g, (a, b))),
            }
        }
    }
}
