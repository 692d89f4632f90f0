//! Reaction classes: which sizes are first produced after exactly `k`
//! reactions starting from a given initial support.
//!
//! `S_0` is the initial support and `S_k` collects every size not yet seen
//! that is a product `n1 + n2 - ell` of two sizes from `S_0 ∪ … ∪ S_{k-1}`.
//! Pairs may repeat a size (`n1 == n2`). Only sizes `<= n_max` are tracked,
//! both as products and as reactants.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionClassTable {
    ell: usize,
    n_max: usize,
    support0: BTreeSet<usize>,
    /// `number[n] = Some(s_n)` for attainable sizes.
    number: Vec<Option<usize>>,
    classes: Vec<BTreeSet<usize>>,
}

impl ReactionClassTable {
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn support0(&self) -> &BTreeSet<usize> {
        &self.support0
    }

    /// `S_0, S_1, …, S_K`; the last class is the final nonempty one.
    pub fn classes(&self) -> &[BTreeSet<usize>] {
        &self.classes
    }

    /// Attainable sizes `S_∞` within the table range.
    pub fn attainable(&self) -> impl Iterator<Item = usize> + '_ {
        self.number
            .iter()
            .enumerate()
            .filter_map(|(n, s)| s.map(|_| n))
    }
}

/// Level-synchronous closure of the initial support.
///
/// Each new level only needs pairs with at least one member in the previous
/// level, because pairs drawn entirely from older levels were already
/// examined.
pub fn compute_classes(
    support0: &BTreeSet<usize>,
    ell: usize,
    n_max: usize,
) -> Result<ReactionClassTable> {
    let Some(&largest) = support0.iter().next_back() else {
        return Err(Error::InvalidParams("initial support is empty".into()));
    };
    if support0.contains(&0) {
        return Err(Error::InvalidParams("size 0 is not a cluster".into()));
    }
    if n_max < largest {
        return Err(Error::InvalidParams(format!(
            "n_max = {n_max} is below the largest initial size {largest}"
        )));
    }

    let mut number = vec![None; n_max + 1];
    let mut seen: Vec<usize> = Vec::new();
    for &n in support0 {
        number[n] = Some(0);
        seen.push(n);
    }
    let mut classes = vec![support0.clone()];
    let mut frontier: Vec<usize> = support0.iter().copied().collect();

    for level in 1.. {
        let mut next = BTreeSet::new();
        for &a in &frontier {
            for &b in &seen {
                let sum = a + b;
                if sum <= ell {
                    continue;
                }
                let product = sum - ell;
                if product <= n_max && number[product].is_none() {
                    next.insert(product);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        for &n in &next {
            number[n] = Some(level);
        }
        seen.extend(next.iter().copied());
        frontier = next.iter().copied().collect();
        classes.push(next);
    }

    Ok(ReactionClassTable {
        ell,
        n_max,
        support0: support0.clone(),
        number,
        classes,
    })
}

/// `s_n` if `n` is attainable within the table range, else `None`.
pub fn reaction_number(table: &ReactionClassTable, n: usize) -> Option<usize> {
    table.number.get(n).copied().flatten()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[usize]) -> BTreeSet<usize> {
        xs.iter().copied().collect()
    }

    #[test]
    fn dimer_monomer_loss_classes() {
        let t = compute_classes(&set(&[2]), 1, 9).unwrap();
        assert_eq!(
            t.classes(),
            &[set(&[2]), set(&[3]), set(&[4, 5]), set(&[6, 7, 8, 9])]
        );
        assert_eq!(reaction_number(&t, 2), Some(0));
        assert_eq!(reaction_number(&t, 3), Some(1));
        assert_eq!(reaction_number(&t, 5), Some(2));
        assert_eq!(reaction_number(&t, 11), None);
    }

    #[test]
    fn closed_small_system() {
        let t = compute_classes(&set(&[1, 2, 3]), 3, 3).unwrap();
        assert_eq!(t.classes(), &[set(&[1, 2, 3])]);
    }

    #[test]
    fn unattainable_sizes() {
        // ell = 2 with even support only ever produces even sizes.
        let t = compute_classes(&set(&[4]), 2, 20).unwrap();
        assert!(t.attainable().all(|n| n % 2 == 0));
        assert_eq!(reaction_number(&t, 6), Some(1));
        assert_eq!(reaction_number(&t, 5), None);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(compute_classes(&BTreeSet::new(), 1, 5).is_err());
        assert!(compute_classes(&set(&[7]), 1, 5).is_err());
        assert!(compute_classes(&set(&[0, 2]), 1, 5).is_err());
    }
}
