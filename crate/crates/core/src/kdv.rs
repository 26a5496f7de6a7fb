//! The potential KdV hierarchy `∂_{t_j} ϕ = K_j(ϕ)` generated by the
//! recursion operator, the derivative-picture flows `H_j = ∂ξ K_j`, and
//! their linearizations.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::coeff::RatFunc;
use crate::diffalg::{
    derive_xi_n, frechet, integrate_xi, jet, mono, DiffAlgError, DiffPoly, LinDiffOp,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KdvError {
    #[error("dispersion coefficient vanishes")]
    ZeroDispersion,
    #[error("flow index must be at least 2, got {0}")]
    BadIndex(u32),
    #[error(transparent)]
    DiffAlg(#[from] DiffAlgError),
}

/// Coefficients of `K_2 = a ∂ξ³ϕ + e (∂ξϕ)²`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KdvParams {
    pub a: RatFunc,
    pub e: RatFunc,
}

impl KdvParams {
    pub fn new(a: RatFunc, e: RatFunc) -> Result<Self, KdvError> {
        if a.is_zero() {
            return Err(KdvError::ZeroDispersion);
        }
        Ok(KdvParams { a, e })
    }

    /// The normalization with nonlinear coefficient `−3/4`.
    pub fn standard(a: RatFunc) -> Result<Self, KdvError> {
        Self::new(a, RatFunc::frac(-3, 4))
    }

    pub fn k2(&self) -> DiffPoly {
        let mut k = DiffPoly::zero();
        k.add_term(mono(&[(1, 3, 1)]), self.a.clone());
        k.add_term(mono(&[(1, 1, 2)]), self.e.clone());
        k
    }

    // L = ∂² + (4e/3a)·∂ξϕ + (2e/3a)·∂ξ²ϕ·∫
    fn recursion_coeffs(&self) -> (RatFunc, RatFunc) {
        let inv = self.a.recip().expect("a is nonzero");
        let mult = &(&self.e * &inv) * &RatFunc::frac(2, 3);
        (&mult * &RatFunc::from_int(2), mult)
    }

    pub fn recursion_apply(&self, f: &DiffPoly) -> Result<DiffPoly, KdvError> {
        if f.is_zero() {
            return Ok(DiffPoly::zero());
        }
        let (c1, c2) = self.recursion_coeffs();
        let int = integrate_xi(f)?;
        let mut out = derive_xi_n(f, 2);
        out.add_assign(&jet(1, 1).mul(f).scale(&c1));
        out.add_assign(&jet(1, 2).mul(&int).scale(&c2));
        Ok(out)
    }

    /// `K_j = b_j ∫ L^{j−1}[∂ξ²ϕ]`.
    pub fn flow(&self, j: u32, b: &RatFunc) -> Result<DiffPoly, KdvError> {
        if j < 2 {
            return Err(KdvError::BadIndex(j));
        }
        if b.is_zero() {
            return Ok(DiffPoly::zero());
        }
        let mut f = jet(1, 2);
        for _ in 1..j {
            f = self.recursion_apply(&f)?;
        }
        Ok(integrate_xi(&f)?.scale(b))
    }

    pub fn h_flow(&self, j: u32, b: &RatFunc) -> Result<DiffPoly, KdvError> {
        Ok(derive_xi_n(&self.flow(j, b)?, 1))
    }

    pub fn linearize_flow(&self, j: u32, b: &RatFunc) -> Result<LinDiffOp, KdvError> {
        Ok(frechet(&self.flow(j, b)?, 1))
    }

    /// Linearization of `H_j` acting on a perturbation of `φ = ∂ξϕ`.
    pub fn linearize_h_flow(&self, j: u32, b: &RatFunc) -> Result<LinDiffOp, KdvError> {
        Ok(frechet(&self.h_flow(j, b)?, 1).lowered()?)
    }
}

pub fn k2(a: &RatFunc) -> Result<DiffPoly, KdvError> {
    Ok(KdvParams::standard(a.clone())?.k2())
}

pub fn recursion_apply(f: &DiffPoly, a: &RatFunc) -> Result<DiffPoly, KdvError> {
    KdvParams::standard(a.clone())?.recursion_apply(f)
}

pub fn flow(j: u32, b: &RatFunc, a: &RatFunc) -> Result<DiffPoly, KdvError> {
    KdvParams::standard(a.clone())?.flow(j, b)
}

pub fn h_flow(j: u32, b: &RatFunc, a: &RatFunc) -> Result<DiffPoly, KdvError> {
    KdvParams::standard(a.clone())?.h_flow(j, b)
}

pub fn linearize_flow(j: u32, b: &RatFunc, a: &RatFunc) -> Result<LinDiffOp, KdvError> {
    KdvParams::standard(a.clone())?.linearize_flow(j, b)
}

pub fn linearize_h_flow(j: u32, b: &RatFunc, a: &RatFunc) -> Result<LinDiffOp, KdvError> {
    KdvParams::standard(a.clone())?.linearize_h_flow(j, b)
}

/// Slow-time index `m` to the flow `K_m` and its leading coefficient `b_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTable {
    params: KdvParams,
    flows: BTreeMap<u32, (DiffPoly, RatFunc)>,
}

impl FlowTable {
    pub fn new(params: KdvParams) -> Self {
        let mut flows = BTreeMap::new();
        flows.insert(2, (params.k2(), params.a.clone()));
        FlowTable { params, flows }
    }

    pub fn params(&self) -> &KdvParams {
        &self.params
    }

    pub fn insert(&mut self, m: u32, b: RatFunc) -> Result<&DiffPoly, KdvError> {
        let k = self.params.flow(m, &b)?;
        self.flows.insert(m, (k, b));
        Ok(&self.flows[&m].0)
    }

    pub fn flow(&self, m: u32) -> Option<&DiffPoly> {
        self.flows.get(&m).map(|(k, _)| k)
    }

    pub fn b(&self, m: u32) -> Option<&RatFunc> {
        self.flows.get(&m).map(|(_, b)| b)
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> + '_ {
        self.flows.keys().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::parse_ratfunc;
    use crate::diffalg::{evolutionary_derive, parse, render};

    fn r(s: &str) -> RatFunc {
        parse_ratfunc(s).unwrap()
    }

    #[test]
    fn k2_examples() {
        let a = r("(3-h^2)/24");
        assert_eq!(
            render(&k2(&a).unwrap()),
            "((-h^2+3)/24)*D3[phi,1]+(-3/4)*D1[phi,1]^2"
        );
        assert_eq!(
            k2(&RatFunc::one()).unwrap(),
            parse("D3[phi,1]+(-3/4)*D1[phi,1]^2").unwrap()
        );
        assert_eq!(k2(&RatFunc::zero()), Err(KdvError::ZeroDispersion));
    }

    #[test]
    fn recursion_examples() {
        let a = r("(3-h^2)/24");
        assert!(recursion_apply(&DiffPoly::zero(), &a).unwrap().is_zero());
        let got = recursion_apply(&jet(1, 2), &a).unwrap();
        let mut want = jet(1, 4);
        want.add_term(
            mono(&[(1, 2, 1), (1, 1, 1)]),
            &RatFunc::frac(-3, 2) * &a.recip().unwrap(),
        );
        assert_eq!(got, want);
        let sq = parse("D1[phi,1]^2").unwrap();
        assert!(matches!(
            recursion_apply(&sq, &a),
            Err(KdvError::DiffAlg(DiffAlgError::NotExact { .. }))
        ));
    }

    #[test]
    fn second_flow_is_k2() {
        for a in [r("(3-h^2)/24"), r("1"), r("-2/(h+5)")] {
            assert_eq!(flow(2, &a, &a).unwrap(), k2(&a).unwrap());
        }
        let p = KdvParams::new(r("1/8"), r("5/7")).unwrap();
        assert_eq!(p.flow(2, &p.a).unwrap(), p.k2());
    }

    #[test]
    fn third_flow_linear_term_and_grading() {
        let a = r("(3-h^2)/24");
        let b3 = r("-(h^4-30*h^2-15)/1920");
        let k3 = flow(3, &b3, &a).unwrap();
        assert_eq!(k3.coeff(&mono(&[(1, 5, 1)])), b3);
        assert_eq!(k3.weights(), vec![6]);
        assert!(k3.len() > 1);
        assert!(flow(3, &RatFunc::zero(), &a).unwrap().is_zero());
        assert_eq!(flow(1, &b3, &a), Err(KdvError::BadIndex(1)));
    }

    #[test]
    fn flows_commute() {
        let p = KdvParams::standard(r("(3-h^2)/24")).unwrap();
        let ks: Vec<DiffPoly> = (2..=4)
            .map(|j| p.flow(j, &RatFunc::one()).unwrap())
            .collect();
        for i in 0..ks.len() {
            assert_eq!(ks[i].weights(), vec![2 * (i as u32 + 2)]);
            for j in i + 1..ks.len() {
                let fi = BTreeMap::from([(1, ks[i].clone())]);
                let fj = BTreeMap::from([(1, ks[j].clone())]);
                let lhs = evolutionary_derive(&ks[j], &fi).unwrap();
                let rhs = evolutionary_derive(&ks[i], &fj).unwrap();
                assert_eq!(lhs, rhs, "K{} and K{}", i + 2, j + 2);
            }
        }
    }

    #[test]
    fn coefficients_finite_at_zero() {
        let p = KdvParams::standard(r("(3-h^2)/24")).unwrap();
        let k4 = p.flow(4, &r("1/(h^2+1)")).unwrap();
        for (_, c) in k4.terms() {
            assert!(c
                .eval_at(&crate::coeff::Rational::from_integer(0.into()))
                .is_ok());
        }
    }

    #[test]
    fn linearizations() {
        let a = r("(3-h^2)/24");
        let op = linearize_flow(2, &a, &a).unwrap();
        let mut want = DiffPoly::zero();
        want.add_term(mono(&[(2, 3, 1)]), a.clone());
        want.add_term(mono(&[(2, 1, 1), (1, 1, 1)]), r("-3/2"));
        assert_eq!(op.apply_to_field(2).unwrap(), want);
        assert!(frechet(&DiffPoly::zero(), 1).is_zero());
        let hop = linearize_h_flow(2, &a, &a).unwrap();
        // ∂ξ(a φ'' − (3/4)φ²) linearized: a ∂³ − (3/2)(φ' + φ ∂)
        assert_eq!(hop.coeff(3), DiffPoly::constant(a.clone()));
        assert_eq!(hop.coeff(1), jet(1, 1).scale(&r("-3/2")));
        assert_eq!(hop.coeff(0), jet(1, 2).scale(&r("-3/2")));
        assert_eq!(h_flow(2, &a, &a).unwrap(), derive_xi_n(&k2(&a).unwrap(), 1));
    }
}
