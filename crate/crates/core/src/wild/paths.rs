//! Covering a paired double tree `[tau, tau_bar]_gamma` by self-avoiding paths.
//!
//! The graph has a red top root with edges to the roots of two copies of
//! `tau`; leaves are joined in pairs by green edges. Each step starts at a
//! red root, climbs one of its planted trees to a leaf whose partner lies in
//! a different planted tree, crosses that green edge and descends to the red
//! root below the partner. The path's edges are removed, isolated vertices
//! dropped, and surviving path vertices become red roots.

use serde::Serialize;

use super::pairing::Pairing;
use super::trees::TernaryTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Edge {
    /// Tree edge `(parent, child)`.
    Tree(usize, usize),
    /// Green edge between two leaves, smaller id first.
    Green(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Colour {
    Red,
    Yellow,
    Black,
}

#[derive(Debug, Clone, Serialize)]
pub struct Path {
    /// Vertices in traversal order; a cycle starts and ends at the same root.
    pub vertices: Vec<usize>,
    pub edges: Vec<Edge>,
    pub start: usize,
    pub end: usize,
    /// Interior vertices that are not leaves.
    pub yellow: Vec<usize>,
    pub leaves: [usize; 2],
}

impl Path {
    pub fn is_cycle(&self) -> bool {
        self.start == self.end
    }

    /// Colour given to a vertex of this path when it is built.
    pub fn colour(&self, v: usize) -> Option<Colour> {
        if v == self.start || v == self.end {
            Some(Colour::Red)
        } else if self.leaves.contains(&v) {
            Some(Colour::Black)
        } else if self.yellow.contains(&v) {
            Some(Colour::Yellow)
        } else {
            None
        }
    }
}

/// The graph `[tau, tau_bar]_gamma` before decomposition.
#[derive(Debug, Clone)]
pub struct DoubleTree {
    /// Number of vertices; vertex 0 is the top root.
    pub vertex_count: usize,
    pub edges: Vec<Edge>,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    /// Vertex id of each leaf, left copy first, depth-first order.
    pub leaf_vertex: Vec<usize>,
    /// Leaf partner by vertex id (`None` for non-leaves).
    partner: Vec<Option<usize>>,
}

impl DoubleTree {
    /// `gamma` indexes the `2 l(tau)` leaves: `0..l` on the left copy, `l..2l`
    /// on the right one, depth-first within each copy.
    pub fn new(tau: &TernaryTree, gamma: &Pairing) -> Result<Self> {
        let l = tau.leaves();
        if gamma.len() != 2 * l {
            return Err(crate::error::invalid(
                "gamma",
                format!("pairing has {} leaves, [tau, tau] has {}", gamma.len(), 2 * l),
            ));
        }
        let mut g = DoubleTree {
            vertex_count: 1,
            edges: Vec::new(),
            children: vec![Vec::new()],
            parent: vec![None],
            leaf_vertex: Vec::new(),
            partner: Vec::new(),
        };
        g.plant(tau, 0);
        g.plant(tau, 0);
        g.partner = vec![None; g.vertex_count];
        for (i, &v) in g.leaf_vertex.iter().enumerate() {
            let w = g.leaf_vertex[gamma.partner(i)];
            g.partner[v] = Some(w);
            if v < w {
                g.edges.push(Edge::Green(v, w));
            }
        }
        Ok(g)
    }

    fn plant(&mut self, tree: &TernaryTree, parent: usize) {
        let id = self.vertex_count;
        self.vertex_count += 1;
        self.children.push(Vec::new());
        self.parent.push(Some(parent));
        self.children[parent].push(id);
        self.edges.push(Edge::Tree(parent, id));
        match tree.children() {
            None => self.leaf_vertex.push(id),
            Some(kids) => {
                for k in kids.iter() {
                    self.plant(k, id);
                }
            }
        }
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.partner[v].is_some()
    }
}

/// Paths `p_0 .. p_{N-1}` and the vertex colours after each step.
#[derive(Debug, Clone, Serialize)]
pub struct PathDecomposition {
    pub paths: Vec<Path>,
    /// `colours[i][v]` is the colour of `v` in the graph left after step `i`
    /// (`None` once `v` has been removed).
    pub colours: Vec<Vec<Option<Colour>>>,
}

struct State<'a> {
    g: &'a DoubleTree,
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    green: Vec<bool>,
    alive: Vec<bool>,
}

impl State<'_> {
    fn subtree_contains(&self, top: usize, v: usize) -> bool {
        let mut x = v;
        loop {
            if x == top {
                return true;
            }
            match self.parent[x] {
                Some(p) => x = p,
                None => return false,
            }
        }
    }

    fn leaves_below(&self, top: usize, out: &mut Vec<usize>) {
        if self.g.is_leaf(top) {
            out.push(top);
        }
        for &c in &self.children[top] {
            self.leaves_below(c, out);
        }
    }

    /// Vertices from the root above `v` down to `v`.
    fn chain_from_root(&self, v: usize) -> Vec<usize> {
        let mut chain = vec![v];
        let mut x = v;
        while let Some(p) = self.parent[x] {
            chain.push(p);
            x = p;
        }
        chain.reverse();
        chain
    }

    fn remove_tree_edge(&mut self, parent: usize, child: usize) {
        self.children[parent].retain(|&c| c != child);
        self.parent[child] = None;
    }

    fn colours(&self) -> Vec<Option<Colour>> {
        (0..self.g.vertex_count)
            .map(|v| {
                if !self.alive[v] {
                    None
                } else if self.parent[v].is_none() {
                    Some(Colour::Red)
                } else {
                    Some(Colour::Black)
                }
            })
            .collect()
    }

    /// Every component is one or two planted ternary trees glued at a red
    /// root, and the surviving leaves are perfectly paired.
    fn check_f3(&self, step: usize) -> Result<()> {
        let fail = |reason: String| Err(Error::PathDecomposition { step, reason });
        for v in 0..self.g.vertex_count {
            if !self.alive[v] {
                continue;
            }
            let k = self.children[v].len();
            if self.parent[v].is_none() {
                if !(k == 1 || k == 2) {
                    return fail(format!("root {v} carries {k} planted trees"));
                }
                if self.g.is_leaf(v) {
                    return fail(format!("leaf {v} became a root"));
                }
            } else if self.g.is_leaf(v) {
                if k != 0 {
                    return fail(format!("leaf {v} has children"));
                }
                let w = self.g.partner[v].expect("leaf");
                if !self.green[v] || !self.alive[w] || !self.green[w] {
                    return fail(format!("leaf {v} lost its partner"));
                }
            } else if k != 3 {
                return fail(format!("inner vertex {v} has {k} children"));
            }
        }
        Ok(())
    }
}

/// Run the decomposition and check every structural invariant on the way.
pub fn path_decompose(tau: &TernaryTree, gamma: &Pairing) -> Result<PathDecomposition> {
    let g = DoubleTree::new(tau, gamma)?;
    let mut s = State {
        g: &g,
        children: g.children.clone(),
        parent: g.parent.clone(),
        green: (0..g.vertex_count).map(|v| g.is_leaf(v)).collect(),
        alive: vec![true; g.vertex_count],
    };
    s.check_f3(0)?;
    let mut paths = Vec::new();
    let mut colours = Vec::new();
    let mut step = 0;
    while let Some(v) = (0..g.vertex_count).find(|&v| s.alive[v] && s.parent[v].is_none()) {
        let planted = s.children[v][0];
        let mut leaves = Vec::new();
        s.leaves_below(planted, &mut leaves);
        let Some(&up_leaf) = leaves.iter().find(|&&leaf| {
            let w = g.partner[leaf].expect("leaf");
            !s.subtree_contains(planted, w)
        }) else {
            return Err(Error::PathDecomposition {
                step,
                reason: format!("every leaf above root {v} is paired inside its own tree"),
            });
        };
        let down_leaf = g.partner[up_leaf].expect("leaf");

        let ascent = s.chain_from_root(up_leaf);
        let mut descent = s.chain_from_root(down_leaf);
        descent.reverse();
        debug_assert_eq!(ascent[0], v);
        let end = *descent.last().expect("non-empty");

        let mut edges = Vec::new();
        for w in ascent.windows(2) {
            edges.push(Edge::Tree(w[0], w[1]));
        }
        edges.push(Edge::Green(up_leaf.min(down_leaf), up_leaf.max(down_leaf)));
        for w in descent.windows(2) {
            edges.push(Edge::Tree(w[1], w[0]));
        }
        let vertices: Vec<usize> = ascent.iter().chain(&descent).copied().collect();
        let yellow: Vec<usize> = vertices[1..vertices.len() - 1]
            .iter()
            .copied()
            .filter(|&x| !g.is_leaf(x))
            .collect();

        for e in &edges {
            match *e {
                Edge::Tree(p, c) => s.remove_tree_edge(p, c),
                Edge::Green(a, b) => {
                    s.green[a] = false;
                    s.green[b] = false;
                }
            }
        }
        for &x in &vertices {
            let isolated = s.children[x].is_empty() && s.parent[x].is_none() && !s.green[x];
            if isolated {
                s.alive[x] = false;
            }
        }
        step += 1;
        s.check_f3(step)?;
        colours.push(s.colours());
        paths.push(Path {
            vertices,
            edges,
            start: v,
            end,
            yellow,
            leaves: [up_leaf, down_leaf],
        });
        if step > 2 * g.vertex_count {
            return Err(Error::PathDecomposition {
                step,
                reason: "algorithm did not terminate".into(),
            });
        }
    }
    let dec = PathDecomposition { paths, colours };
    check_invariants(&g, tau, &dec)?;
    Ok(dec)
}

/// The final invariants: `l(tau)` paths whose edges partition the graph,
/// non-leaf vertices are path endpoints exactly twice and (except the top
/// root) yellow exactly once, and each leaf lies on exactly one path.
pub fn check_invariants(g: &DoubleTree, tau: &TernaryTree, dec: &PathDecomposition) -> Result<()> {
    let step = dec.paths.len();
    let fail = |reason: String| Err(Error::PathDecomposition { step, reason });
    if dec.paths.len() != tau.leaves() {
        return fail(format!("{} paths for l(tau) = {}", dec.paths.len(), tau.leaves()));
    }
    let mut used: Vec<Edge> = dec.paths.iter().flat_map(|p| p.edges.iter().copied()).collect();
    let mut all = g.edges.clone();
    used.sort_by_key(edge_key);
    all.sort_by_key(edge_key);
    if used != all {
        return fail("path edges do not partition the edge set".into());
    }
    let n = g.vertex_count;
    let mut endpoint = vec![0usize; n];
    let mut yellow = vec![0usize; n];
    let mut on_path = vec![0usize; n];
    for p in &dec.paths {
        endpoint[p.start] += 1;
        endpoint[p.end] += 1;
        for &y in &p.yellow {
            yellow[y] += 1;
        }
        let mut distinct = p.vertices.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() + usize::from(p.is_cycle()) != p.vertices.len() {
            return fail("path is not self-avoiding".into());
        }
        for v in distinct {
            on_path[v] += 1;
        }
    }
    for v in 0..n {
        if g.is_leaf(v) {
            if on_path[v] != 1 || endpoint[v] != 0 {
                return fail(format!("leaf {v} lies on {} paths", on_path[v]));
            }
        } else {
            let want_yellow = usize::from(v != 0);
            if endpoint[v] != 2 || yellow[v] != want_yellow {
                return fail(format!(
                    "vertex {v}: {} endpoint slots, {} yellow appearances",
                    endpoint[v], yellow[v]
                ));
            }
        }
    }
    Ok(())
}

fn edge_key(e: &Edge) -> (u8, usize, usize) {
    match *e {
        Edge::Tree(a, b) => (0, a, b),
        Edge::Green(a, b) => (1, a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wild::pairing::enumerate_pairings;
    use crate::wild::trees::ordered_trees;

    #[test]
    fn single_leaf_gives_one_cycle() {
        let gamma = Pairing::new(vec![1, 0]).unwrap();
        let d = path_decompose(&TernaryTree::Leaf, &gamma).unwrap();
        assert_eq!(d.paths.len(), 1);
        assert!(d.paths[0].is_cycle());
        assert_eq!(d.paths[0].edges.len(), 3);
        assert!(d.colours[0].iter().all(Option::is_none));
    }

    #[test]
    fn cherry_over_all_fifteen_pairings() {
        let tau = TernaryTree::cherry();
        for gamma in enumerate_pairings(6).unwrap() {
            let d = path_decompose(&tau, &gamma).unwrap();
            assert_eq!(d.paths.len(), 3);
            // vertices 1 and 5 are the roots of the two copies.
            for inner in [1, 5] {
                let red = d.paths.iter().map(|p| usize::from(p.start == inner) + usize::from(p.end == inner)).sum::<usize>();
                let yellow = d.paths.iter().filter(|p| p.yellow.contains(&inner)).count();
                assert_eq!((red, yellow), (2, 1));
            }
        }
    }

    #[test]
    fn fully_crossing_cherry_pairing() {
        let gamma = Pairing::new(vec![3, 4, 5, 0, 1, 2]).unwrap();
        let d = path_decompose(&TernaryTree::cherry(), &gamma).unwrap();
        assert_eq!(d.paths.len(), 3);
        // Both copies hang from the top root, so the first path is a cycle.
        assert!(d.paths[0].is_cycle());
        assert_eq!(d.paths[0].yellow, vec![1, 5]);
        assert!(d.paths[1..].iter().all(|p| !p.is_cycle()));
    }

    #[test]
    fn exhaustive_up_to_five_leaves() {
        let mut checked = 0;
        for i in 0..=2 {
            for tau in ordered_trees(i) {
                for gamma in enumerate_pairings(2 * tau.leaves()).unwrap() {
                    path_decompose(&tau, &gamma).unwrap();
                    checked += 1;
                }
            }
        }
        assert_eq!(checked, 1 + 15 + 3 * 945);
    }

    #[test]
    fn rejects_wrong_pairing_size() {
        let gamma = Pairing::new(vec![1, 0]).unwrap();
        assert!(path_decompose(&TernaryTree::cherry(), &gamma).is_err());
    }
}
