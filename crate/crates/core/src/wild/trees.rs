//! Rooted ternary ordered trees and their permutation classes.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{invalid, Result};

/// Default guard on the number of inner nodes accepted by [`enumerate_trees`].
pub const MAX_INNER: usize = 6;

/// A leaf, or an inner node with three ordered children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TernaryTree {
    Leaf,
    Node(Box<[TernaryTree; 3]>),
}

impl TernaryTree {
    pub fn node(a: TernaryTree, b: TernaryTree, c: TernaryTree) -> Self {
        TernaryTree::Node(Box::new([a, b, c]))
    }

    /// `[•,•,•]`.
    pub fn cherry() -> Self {
        Self::node(Self::Leaf, Self::Leaf, Self::Leaf)
    }

    pub fn leaves(&self) -> usize {
        match self {
            TernaryTree::Leaf => 1,
            TernaryTree::Node(c) => c.iter().map(Self::leaves).sum(),
        }
    }

    pub fn inner(&self) -> usize {
        match self {
            TernaryTree::Leaf => 0,
            TernaryTree::Node(c) => 1 + c.iter().map(Self::inner).sum::<usize>(),
        }
    }

    pub fn children(&self) -> Option<&[TernaryTree; 3]> {
        match self {
            TernaryTree::Leaf => None,
            TernaryTree::Node(c) => Some(c),
        }
    }

    /// Representative with children sorted recursively.
    pub fn canonical(&self) -> Self {
        match self {
            TernaryTree::Leaf => TernaryTree::Leaf,
            TernaryTree::Node(c) => {
                let mut kids = [c[0].canonical(), c[1].canonical(), c[2].canonical()];
                kids.sort();
                TernaryTree::Node(Box::new(kids))
            }
        }
    }

    /// Number of ordered trees whose canonical form equals `self.canonical()`.
    pub fn multiplicity(&self) -> u64 {
        match self {
            TernaryTree::Leaf => 1,
            TernaryTree::Node(c) => {
                let kids: Vec<TernaryTree> = c.iter().map(Self::canonical).collect();
                let mut counts: BTreeMap<&TernaryTree, u64> = BTreeMap::new();
                for k in &kids {
                    *counts.entry(k).or_default() += 1;
                }
                let arrangements = 6 / counts.values().map(|&m| factorial(m)).product::<u64>();
                arrangements * c.iter().map(Self::multiplicity).product::<u64>()
            }
        }
    }

    /// Every distinct subtree (including `self`), children before parents.
    pub fn subtrees(&self) -> Vec<TernaryTree> {
        let mut out = Vec::new();
        self.collect_subtrees(&mut out);
        out
    }

    fn collect_subtrees(&self, out: &mut Vec<TernaryTree>) {
        if let TernaryTree::Node(c) = self {
            for k in c.iter() {
                k.collect_subtrees(out);
            }
        }
        if !out.contains(self) {
            out.push(self.clone());
        }
    }
}

fn factorial(m: u64) -> u64 {
    (1..=m).product()
}

impl fmt::Display for TernaryTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TernaryTree::Leaf => write!(f, "•"),
            TernaryTree::Node(c) => write!(f, "[{},{},{}]", c[0], c[1], c[2]),
        }
    }
}

/// A permutation class of ordered trees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalTreeClass {
    pub tree: TernaryTree,
    pub multiplicity: u64,
}

impl CanonicalTreeClass {
    pub fn leaves(&self) -> usize {
        self.tree.leaves()
    }

    pub fn inner(&self) -> usize {
        self.tree.inner()
    }
}

/// All ordered trees with exactly `inner` inner nodes, by brute force.
pub fn ordered_trees(inner: usize) -> Vec<TernaryTree> {
    if inner == 0 {
        return vec![TernaryTree::Leaf];
    }
    let mut out = Vec::new();
    for a in 0..inner {
        for b in 0..inner - a {
            let c = inner - 1 - a - b;
            for ta in ordered_trees(a) {
                for tb in ordered_trees(b) {
                    for tc in ordered_trees(c) {
                        out.push(TernaryTree::node(ta.clone(), tb.clone(), tc));
                    }
                }
            }
        }
    }
    out
}

/// Canonical trees with exactly `inner` inner nodes.
fn canonical_trees(inner: usize, memo: &mut Vec<Vec<TernaryTree>>) -> Vec<TernaryTree> {
    while memo.len() <= inner {
        let i = memo.len();
        let level = if i == 0 {
            vec![TernaryTree::Leaf]
        } else {
            let mut level = Vec::new();
            for a in 0..i {
                for b in 0..i - a {
                    let c = i - 1 - a - b;
                    for ta in &memo[a] {
                        for tb in &memo[b] {
                            for tc in &memo[c] {
                                if ta <= tb && tb <= tc {
                                    level.push(TernaryTree::node(ta.clone(), tb.clone(), tc.clone()));
                                }
                            }
                        }
                    }
                }
            }
            level.sort();
            level.dedup();
            level
        };
        memo.push(level);
    }
    memo[inner].clone()
}

/// Classes of all trees with at most `n` inner nodes, ordered by inner count.
pub fn enumerate_trees(n: usize) -> Result<Vec<CanonicalTreeClass>> {
    enumerate_trees_with_limit(n, MAX_INNER)
}

pub fn enumerate_trees_with_limit(n: usize, limit: usize) -> Result<Vec<CanonicalTreeClass>> {
    if n > limit {
        return Err(invalid("N", format!("{n} inner nodes exceeds the guard {limit}")));
    }
    let mut memo = Vec::new();
    let mut out = Vec::new();
    for i in 0..=n {
        for tree in canonical_trees(i, &mut memo) {
            let multiplicity = tree.multiplicity();
            out.push(CanonicalTreeClass { tree, multiplicity });
        }
    }
    Ok(out)
}
