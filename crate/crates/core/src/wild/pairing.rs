//! Perfect matchings of leaves.

use crate::error::{invalid, Result};

/// Largest leaf count accepted by [`enumerate_pairings`].
pub const MAX_PAIRED_LEAVES: usize = 12;

/// A perfect matching on `0..n`: `partner[i]` is the leaf paired with `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pairing {
    partner: Vec<usize>,
}

impl Pairing {
    pub fn new(partner: Vec<usize>) -> Result<Self> {
        let n = partner.len();
        for (i, &j) in partner.iter().enumerate() {
            if j >= n || j == i || partner[j] != i {
                return Err(invalid("pairing", format!("leaf {i} is not properly matched")));
            }
        }
        Ok(Self { partner })
    }

    pub fn len(&self) -> usize {
        self.partner.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partner.is_empty()
    }

    pub fn partner(&self, leaf: usize) -> usize {
        self.partner[leaf]
    }

    /// Pairs `(i, j)` with `i < j`, sorted.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.partner
            .iter()
            .enumerate()
            .filter(|(i, j)| i < j)
            .map(|(i, &j)| (i, j))
            .collect()
    }
}

/// `(n - 1)!!`.
pub fn double_factorial_odd(n: usize) -> u64 {
    (1..n as u64).step_by(2).product()
}

/// All `(n - 1)!!` pairings of `n` leaves.
pub fn enumerate_pairings(n: usize) -> Result<Vec<Pairing>> {
    if n % 2 == 1 {
        return Err(invalid("n_leaves", format!("cannot pair an odd number ({n}) of leaves")));
    }
    if n > MAX_PAIRED_LEAVES {
        return Err(invalid("n_leaves", format!("{n} exceeds the guard {MAX_PAIRED_LEAVES}")));
    }
    let mut out = Vec::new();
    let mut partner = vec![usize::MAX; n];
    fill(&mut partner, &mut out);
    Ok(out)
}

fn fill(partner: &mut Vec<usize>, out: &mut Vec<Pairing>) {
    let Some(i) = partner.iter().position(|&p| p == usize::MAX) else {
        out.push(Pairing {
            partner: partner.clone(),
        });
        return;
    };
    for j in i + 1..partner.len() {
        if partner[j] == usize::MAX {
            partner[i] = j;
            partner[j] = i;
            fill(partner, out);
            partner[i] = usize::MAX;
            partner[j] = usize::MAX;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn counts_are_double_factorials() {
        for n in (0..=12).step_by(2) {
            let all = enumerate_pairings(n).unwrap();
            assert_eq!(all.len() as u64, double_factorial_odd(n));
            let distinct: HashSet<_> = all.iter().collect();
            assert_eq!(distinct.len(), all.len());
        }
        assert_eq!(enumerate_pairings(2).unwrap().len(), 1);
        assert_eq!(enumerate_pairings(6).unwrap().len(), 15);
        assert_eq!(enumerate_pairings(8).unwrap().len(), 105);
        assert!(enumerate_pairings(5).is_err());
        assert!(enumerate_pairings(14).is_err());
    }

    #[test]
    fn six_plus_nine() {
        // Leaves 0..3 on the left tree, 3..6 on the right one.
        let all = enumerate_pairings(6).unwrap();
        let crossing = all
            .iter()
            .filter(|p| (0..3).all(|i| p.partner(i) >= 3))
            .count();
        assert_eq!((crossing, all.len() - crossing), (6, 9));
    }

    #[test]
    fn rejects_bad_matchings() {
        assert!(Pairing::new(vec![1, 0, 3, 2]).is_ok());
        assert!(Pairing::new(vec![1, 2, 0]).is_err());
        assert!(Pairing::new(vec![0, 1]).is_err());
    }
}
