//! The graded pieces `P_n^(r)` of the jet algebra and coordinates on them.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::RatFunc;
use crate::diffalg::{DiffMonomial, DiffPoly, JetVar};
use crate::poly::{Monomial, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GradedError {
    #[error("monomial {0} is outside the space")]
    NotInSpace(String),
    #[error("coordinate vector has length {got}, basis has {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Which monomials of degree `n` are spanned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    /// Every monomial of the grading.
    Raw,
    /// Only genuine products, i.e. the single jets `∂ξ^ℓ ϕ^(j)` are left out.
    Products,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GradedBasis {
    degree: u32,
    max_level: u32,
    kind: BasisKind,
    monomials: Vec<DiffMonomial>,
    index: HashMap<DiffMonomial, usize>,
}

impl GradedBasis {
    pub fn new(degree: u32, max_level: u32) -> Self {
        Self::with_kind(degree, max_level, BasisKind::Raw)
    }

    pub fn products(degree: u32, max_level: u32) -> Self {
        Self::with_kind(degree, max_level, BasisKind::Products)
    }

    pub fn with_kind(degree: u32, max_level: u32, kind: BasisKind) -> Self {
        let mut monomials = enumerate(degree, max_level);
        if kind == BasisKind::Products {
            monomials.retain(|m| m.as_var().is_none());
        }
        let index = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        GradedBasis {
            degree,
            max_level,
            kind,
            monomials,
            index,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn monomials(&self) -> &[DiffMonomial] {
        &self.monomials
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn position(&self, m: &DiffMonomial) -> Option<usize> {
        self.index.get(m).copied()
    }

    pub fn contains(&self, m: &DiffMonomial) -> bool {
        self.index.contains_key(m)
    }
}

pub fn basis(n: u32, r: u32) -> GradedBasis {
    GradedBasis::new(n, r)
}

pub fn dim(n: u32, r: u32) -> usize {
    basis(n, r).len()
}

/// Dimension of the span of genuine products (no single-jet monomials).
pub fn product_dim(n: u32, r: u32) -> usize {
    GradedBasis::products(n, r).len()
}

// Partitions of `n` into parts >= 2, each part d realized by a jet with
// ℓ + 2j − 1 = d; multiset generation over the canonically ordered jets.
fn enumerate(n: u32, r: u32) -> Vec<DiffMonomial> {
    let mut jets: Vec<JetVar> = (1..=r)
        .flat_map(|level| (1..=n).map(move |order| JetVar::new(level, order)))
        .filter(|v| v.weight() <= n)
        .collect();
    jets.sort();
    let mut out = Vec::new();
    let mut stack: Vec<(JetVar, u32)> = Vec::new();
    fn rec(
        jets: &[JetVar],
        start: usize,
        remaining: u32,
        stack: &mut Vec<(JetVar, u32)>,
        out: &mut Vec<DiffMonomial>,
    ) {
        if remaining == 0 {
            out.push(Monomial::from_factors(stack.clone()));
            return;
        }
        for i in start..jets.len() {
            let w = jets[i].weight();
            if w > remaining {
                continue;
            }
            let max_e = remaining / w;
            for e in 1..=max_e {
                stack.push((jets[i], e));
                rec(jets, i + 1, remaining - e * w, stack, out);
                stack.pop();
            }
        }
    }
    rec(&jets, 0, n, &mut stack, &mut out);
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoordVector {
    basis: Arc<GradedBasis>,
    entries: Vec<RatFunc>,
}

impl CoordVector {
    pub fn new(basis: Arc<GradedBasis>, entries: Vec<RatFunc>) -> Result<Self, GradedError> {
        if entries.len() != basis.len() {
            return Err(GradedError::LengthMismatch {
                got: entries.len(),
                expected: basis.len(),
            });
        }
        Ok(CoordVector { basis, entries })
    }

    pub fn zero(basis: Arc<GradedBasis>) -> Self {
        let entries = vec![RatFunc::zero(); basis.len()];
        CoordVector { basis, entries }
    }

    pub fn basis(&self) -> &GradedBasis {
        &self.basis
    }

    pub fn entries(&self) -> &[RatFunc] {
        &self.entries
    }

    pub fn support_len(&self) -> usize {
        self.entries.iter().filter(|c| !c.is_zero()).count()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(RatFunc::is_zero)
    }

    pub fn to_poly(&self) -> DiffPoly {
        from_coords(self)
    }

    /// Nonzero `(monomial, coefficient)` pairs in basis order.
    pub fn nonzero(&self) -> impl Iterator<Item = (&DiffMonomial, &RatFunc)> {
        self.basis
            .monomials()
            .iter()
            .zip(&self.entries)
            .filter(|(_, c)| !c.is_zero())
    }
}

pub fn coords(p: &DiffPoly, basis: &Arc<GradedBasis>) -> Result<CoordVector, GradedError> {
    let mut entries = vec![RatFunc::zero(); basis.len()];
    for (m, c) in p.terms() {
        let i = basis
            .position(m)
            .ok_or_else(|| GradedError::NotInSpace(crate::diffalg::render_monomial(m)))?;
        entries[i] = c.clone();
    }
    Ok(CoordVector {
        basis: Arc::clone(basis),
        entries,
    })
}

pub fn from_coords(v: &CoordVector) -> DiffPoly {
    let mut p = DiffPoly::zero();
    for (m, c) in v.basis.monomials().iter().zip(&v.entries) {
        p.add_term(m.clone(), c.clone());
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffalg::{derive_xi, mono, parse};

    // Independent oracle: brute force over exponent vectors of all jets with
    // weight <= n, keeping those whose weighted sum is exactly n.
    fn brute_force_count(n: u32, r: u32) -> usize {
        let jets: Vec<JetVar> = (1..=r)
            .flat_map(|j| (1..=n).map(move |l| JetVar::new(j, l)))
            .filter(|v| v.order + 2 * v.level - 1 <= n)
            .collect();
        fn count(jets: &[JetVar], n: u32) -> usize {
            match jets.split_first() {
                None => usize::from(n == 0),
                Some((v, rest)) => {
                    let w = v.order + 2 * v.level - 1;
                    (0..=n / w).map(|e| count(rest, n - e * w)).sum()
                }
            }
        }
        count(&jets, n)
    }

    #[test]
    fn basis_examples() {
        assert_eq!(basis(2, 1).monomials(), &[mono(&[(1, 1, 1)])]);
        let b6 = basis(6, 1);
        assert_eq!(b6.len(), 4);
        for m in [
            mono(&[(1, 5, 1)]),
            mono(&[(1, 3, 1), (1, 1, 1)]),
            mono(&[(1, 2, 2)]),
            mono(&[(1, 1, 3)]),
        ] {
            assert!(b6.contains(&m));
        }
        assert_eq!(basis(9, 2).len(), 16);
        assert_eq!(dim(3, 1), 1);
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for n in 2..=14 {
            for r in 1..=3 {
                assert_eq!(dim(n, r), brute_force_count(n, r), "n={n} r={r}");
            }
        }
        assert_eq!(brute_force_count(6, 1), 4);
        assert_eq!(brute_force_count(3, 1), 1);
        assert_eq!(brute_force_count(9, 2), 16);
    }

    #[test]
    fn product_convention_counts() {
        assert_eq!(product_dim(6, 1), 3);
        assert_eq!(product_dim(9, 2), 14);
        assert_eq!(dim(11, 2), 33);
        assert_eq!(product_dim(11, 2), 31);
    }

    #[test]
    fn dim_monotone_in_level() {
        for n in 2..=12 {
            assert!(dim(n, 1) <= dim(n, 2) && dim(n, 2) <= dim(n, 3));
        }
    }

    #[test]
    fn coords_examples() {
        let b = Arc::new(basis(4, 1));
        let k2 = parse("((3-h^2)/24)*D3[phi,1]+(-3/4)*D1[phi,1]^2").unwrap();
        let v = coords(&k2, &b).unwrap();
        assert_eq!(v.support_len(), 2);
        assert_eq!(from_coords(&v), k2);
        assert!(coords(&DiffPoly::zero(), &b).unwrap().is_zero());
        let b6 = Arc::new(basis(6, 1));
        let cross = parse("D1[phi,1]*D1[phi,2]").unwrap();
        assert!(matches!(
            coords(&cross, &b6),
            Err(GradedError::NotInSpace(_))
        ));
    }

    #[test]
    fn derivative_maps_between_pieces() {
        for (n, r) in [(5, 1), (7, 2), (9, 2)] {
            let target = Arc::new(basis(n + 1, r));
            for m in basis(n, r).monomials() {
                let d = derive_xi(&DiffPoly::term(m.clone(), RatFunc::one()));
                assert!(coords(&d, &target).is_ok());
            }
        }
    }
}
