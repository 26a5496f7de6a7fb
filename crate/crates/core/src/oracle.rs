//! Exact cross-checks of symbolic identities at random rational points.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coeff::{CoeffError, HPoly, RatFunc, Rational};
use crate::diffalg::{
    derive_xi, evolutionary_derive, frechet, integrate_xi, jet, DiffPoly, JetVar,
};
use crate::graded::GradedBasis;
use crate::kdv::KdvParams;
use crate::linsolve::LinSystem;
use crate::series::{compose, shift_expand, AnalyticKernel, Field};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("sample does not cover {0}")]
    UncoveredVariable(String),
    #[error("coefficient has a pole at the sample point")]
    PoleAtPoint,
}

impl From<CoeffError> for OracleError {
    fn from(_: CoeffError) -> Self {
        OracleError::PoleAtPoint
    }
}

/// Placeholder level for the direction of a Fréchet derivative.
const DIRECTION_LEVEL: u32 = 99;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetSample {
    pub values: HashMap<JetVar, Rational>,
    pub h0: Rational,
}

impl JetSample {
    pub fn new(h0: Rational) -> Self {
        JetSample {
            values: HashMap::new(),
            h0,
        }
    }

    pub fn with(mut self, v: JetVar, x: Rational) -> Self {
        self.values.insert(v, x);
        self
    }

    /// Random values for the jets of `levels` up to `max_order`.
    pub fn random(rng: &mut impl Rng, levels: &[u32], max_order: u32, h0: Rational) -> Self {
        let mut s = JetSample::new(h0);
        for &l in levels {
            for k in 1..=max_order {
                s.values.insert(JetVar::new(l, k), random_rational(rng));
            }
        }
        s
    }
}

pub fn random_rational(rng: &mut impl Rng) -> Rational {
    let n: i64 = rng.gen_range(-9..=9);
    let d: i64 = rng.gen_range(1..=7);
    Rational::new(n.into(), d.into())
}

/// A random `h0` avoiding the small poles that occur in the reductions.
pub fn random_h0(rng: &mut impl Rng) -> Rational {
    loop {
        let n: i64 = rng.gen_range(1..=11);
        let d: i64 = rng.gen_range(2..=13);
        let h = Rational::new(n.into(), d.into());
        let h2 = &h * &h;
        let bad = [1, 3]
            .iter()
            .any(|k| h2 == Rational::from_integer((*k).into()));
        if !bad {
            return h;
        }
    }
}

pub fn eval_poly(p: &DiffPoly, s: &JetSample) -> Result<Rational, OracleError> {
    p.eval(
        |c| c.eval_at(&s.h0).map_err(OracleError::from),
        |v| {
            s.values
                .get(v)
                .cloned()
                .ok_or_else(|| OracleError::UncoveredVariable(v.to_string()))
        },
    )
}

fn max_order(p: &DiffPoly) -> u32 {
    p.vars().iter().map(|v| v.order).max().unwrap_or(0)
}

fn levels(p: &DiffPoly) -> Vec<u32> {
    let mut l: Vec<u32> = p.vars().iter().map(|v| v.level).collect();
    l.sort();
    l.dedup();
    l
}

/// `p(u + θv)` as a polynomial in θ, with the level-1 jets of `u` and `v`
/// taken from `s` (the direction under [`DIRECTION_LEVEL`]).
fn along_theta(p: &DiffPoly, s: &JetSample) -> Result<HPoly, OracleError> {
    let mut out = HPoly::zero();
    for (m, c) in p.terms() {
        let mut t = HPoly::constant(c.eval_at(&s.h0)?);
        for (v, e) in m.factors() {
            let get = |w: &JetVar| {
                s.values
                    .get(w)
                    .cloned()
                    .ok_or_else(|| OracleError::UncoveredVariable(w.to_string()))
            };
            let base = get(v)?;
            let f = if v.level == 1 {
                let dir = get(&JetVar::new(DIRECTION_LEVEL, v.order))?;
                HPoly::from_coeffs(vec![base, dir])
            } else {
                HPoly::constant(base)
            };
            t = &t * &f.pow(*e);
        }
        out = &out + &t;
    }
    Ok(out)
}

/// Checks `p(u + θv) = p(u) + θ·p'(u)v + O(θ²)` exactly at random points;
/// for `p` linear in the level-1 jets the `O(θ²)` part must vanish too.
pub fn frechet_check(p: &DiffPoly, trials: usize, rng: &mut impl Rng) -> bool {
    let lin = match frechet(p, 1).apply_to_field(DIRECTION_LEVEL) {
        Ok(l) => l,
        Err(_) => return p.is_zero(),
    };
    let linear = p.terms().all(|(m, _)| {
        m.factors()
            .iter()
            .filter(|(v, _)| v.level == 1)
            .map(|(_, e)| e)
            .sum::<u32>()
            <= 1
    });
    let order = max_order(p).max(1);
    let mut lv = levels(p);
    lv.push(DIRECTION_LEVEL);
    (0..trials).all(|_| {
        let h0 = random_h0(rng);
        let s = JetSample::random(rng, &lv, order, h0);
        let (Ok(theta), Ok(p0), Ok(p1)) =
            (along_theta(p, &s), eval_poly(p, &s), eval_poly(&lin, &s))
        else {
            return false;
        };
        let ok = theta.coeff(0) == p0 && theta.coeff(1) == p1;
        ok && (!linear || theta.degree().unwrap_or(0) <= 1)
    })
}

/// Checks `D_{K_{j1}} D_{K_{j2}} ∂ξϕ = D_{K_{j2}} D_{K_{j1}} ∂ξϕ` at random
/// points.
pub fn commute_check(
    params: &KdvParams,
    j1: u32,
    j2: u32,
    trials: usize,
    rng: &mut impl Rng,
) -> bool {
    let (Ok(k1), Ok(k2)) = (
        params.flow(j1, &RatFunc::one()),
        params.flow(j2, &RatFunc::one()),
    ) else {
        return false;
    };
    let d = |p: &DiffPoly, k: &DiffPoly| evolutionary_derive(p, &BTreeMap::from([(1, k.clone())]));
    let u = jet(1, 1);
    let (Ok(a1), Ok(b1)) = (d(&u, &k2), d(&u, &k1)) else {
        return false;
    };
    let (Ok(lhs), Ok(rhs)) = (d(&a1, &k1), d(&b1, &k2)) else {
        return false;
    };
    let order = max_order(&lhs).max(max_order(&rhs)).max(1);
    (0..trials).all(|_| {
        let h0 = random_h0(rng);
        let s = JetSample::random(rng, &[1], order, h0);
        matches!((eval_poly(&lhs, &s), eval_poly(&rhs, &s)), (Ok(x), Ok(y)) if x == y)
    })
}

/// A random element of `P_n^(r)` with small rational coefficients.
pub fn random_poly(rng: &mut impl Rng, n: u32, r: u32) -> DiffPoly {
    let b = GradedBasis::new(n, r);
    let mut p = DiffPoly::zero();
    for m in b.monomials() {
        if rng.gen_bool(0.6) {
            p.add_term(m.clone(), RatFunc::from_rational(random_rational(rng)));
        }
    }
    p
}

pub fn integrate_roundtrip_check(trials: usize, rng: &mut impl Rng) -> bool {
    (0..trials).all(|_| {
        let n = rng.gen_range(2..=9);
        let r = rng.gen_range(1..=2);
        let p = random_poly(rng, n, r);
        matches!(integrate_xi(&derive_xi(&p)), Ok(q) if q == p)
    })
}

pub fn trig_identity_check(order: u32) -> bool {
    let one = RatFunc::one();
    let beta = shift_expand(Field::Phi, 1, &RatFunc::h(), order).sub(&shift_expand(
        Field::Phi,
        0,
        &RatFunc::h(),
        order,
    ));
    let Ok(beta) = beta else { return false };
    let (Ok(s), Ok(c)) = (
        compose(&AnalyticKernel::Sin, &beta),
        compose(&AnalyticKernel::Cos, &beta),
    ) else {
        return false;
    };
    let sum = s.mul(&s).and_then(|x| c.mul(&c).and_then(|y| x.add(&y)));
    matches!(sum, Ok(v) if v.poly() == &crate::series::ExtPoly::constant(one))
}

/// A random matrix over `Q(h)` of the given size and target rank, built as a
/// product of random factors with polynomial entries.
pub fn random_matrix(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    rank: usize,
) -> Vec<Vec<RatFunc>> {
    let entry = |rng: &mut ChaCha8Rng| {
        let c: Vec<i64> = (0..2).map(|_| rng.gen_range(-4..=4)).collect();
        RatFunc::from_poly(HPoly::from_ints(&c))
    };
    let mut inner = ChaCha8Rng::seed_from_u64(rng.gen());
    let left: Vec<Vec<RatFunc>> = (0..rows)
        .map(|_| (0..rank).map(|_| entry(&mut inner)).collect())
        .collect();
    let right: Vec<Vec<RatFunc>> = (0..rank)
        .map(|_| (0..cols).map(|_| entry(&mut inner)).collect())
        .collect();
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    (0..rank).fold(RatFunc::zero(), |acc, k| {
                        &acc + &(&left[i][k] * &right[k][j])
                    })
                })
                .collect()
        })
        .collect()
}

/// The symbolic rank equals the rank after specializing `h` at random points
/// that do not drop it; a drop is only allowed at isolated values, so the
/// maximum over the points must agree.
pub fn rank_specialization_check(trials: usize, points: usize, rng: &mut impl Rng) -> bool {
    (0..trials).all(|_| {
        let rows = rng.gen_range(2..=5);
        let cols = rng.gen_range(2..=5);
        let rank = rng.gen_range(0..=rows.min(cols));
        let m = random_matrix(rng, rows, cols, rank);
        let sys = LinSystem::new(m, vec![vec![]; rows]);
        let symbolic = sys.rank();
        let spec: Vec<usize> = (0..points)
            .filter_map(|_| sys.specialize(&random_h0(rng)).ok().map(|s| s.rank()))
            .collect();
        spec.iter().all(|&r| r <= symbolic) && spec.iter().max() == Some(&symbolic)
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
}

/// The full self-check suite on the standard hierarchy and the reduction of
/// the given model.
pub fn selfcheck(seed: u64, trials: usize) -> Vec<CheckResult> {
    use crate::coeff::SignParams;
    use crate::pipeline::{reduce, ModelKind};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut push = |name: &str, passed: bool| {
        out.push(CheckResult {
            name: name.to_string(),
            passed,
        })
    };
    let a = crate::coeff::parse_ratfunc("(3-h^2)/24").expect("literal");
    let params = KdvParams::standard(a).expect("nonzero");
    push(
        "flow(2) equals K2",
        params.flow(2, &params.a).ok() == Some(params.k2()),
    );
    for j in 2..=4 {
        push(
            &format!("flow({j}) is exact"),
            params.flow(j, &RatFunc::one()).is_ok(),
        );
    }
    for (j1, j2) in [(2, 2), (2, 3), (2, 4), (3, 4)] {
        push(
            &format!("flows {j1} and {j2} commute"),
            commute_check(&params, j1, j2, trials.min(20), &mut rng),
        );
    }
    match reduce(ModelKind::Dnls, 9, SignParams::default()) {
        Ok(rs) => {
            let k3 = rs.flows.flow(3).cloned().unwrap_or_default();
            let f2 = rs.f2.clone().unwrap_or_default();
            let g2 = rs.g2.clone().unwrap_or_default();
            push(
                "frechet K2",
                frechet_check(&rs.flows.params().k2(), trials, &mut rng),
            );
            push("frechet K3", frechet_check(&k3, trials, &mut rng));
            push("frechet f2", frechet_check(&f2, trials, &mut rng));
            push("frechet g2", frechet_check(&g2, trials, &mut rng));
        }
        Err(_) => push("reduction to order 9", false),
    }
    push(
        "integrate after derive is identity",
        integrate_roundtrip_check(trials, &mut rng),
    );
    push("sin^2 + cos^2 = 1 to order 9", trig_identity_check(9));
    push(
        "symbolic rank matches specialized rank",
        rank_specialization_check(trials.min(40), 5, &mut rng),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::parse_ratfunc;
    use crate::diffalg::parse;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    #[test]
    fn eval_examples() {
        let s = JetSample::new(q(1, 1)).with(JetVar::new(1, 1), q(1, 2));
        assert_eq!(
            eval_poly(&parse("D1[phi,1]^2").unwrap(), &s).unwrap(),
            q(1, 4)
        );
        let k2 = parse("((3-h^2)/24)*D3[phi,1]+(-3/4)*D1[phi,1]^2").unwrap();
        let zero = JetSample::new(q(1, 1))
            .with(JetVar::new(1, 1), q(0, 1))
            .with(JetVar::new(1, 3), q(0, 1));
        assert_eq!(eval_poly(&k2, &zero).unwrap(), q(0, 1));
        let a = DiffPoly::term(
            crate::diffalg::mono(&[(1, 3, 1)]),
            parse_ratfunc("(3-h^2)/24").unwrap(),
        );
        let s = JetSample::new(q(1, 1)).with(JetVar::new(1, 3), q(1, 1));
        assert_eq!(eval_poly(&a, &s).unwrap(), q(1, 12));
        assert!(matches!(
            eval_poly(&a, &JetSample::new(q(1, 1))),
            Err(OracleError::UncoveredVariable(_))
        ));
        let pole = DiffPoly::term(
            crate::diffalg::mono(&[(1, 3, 1)]),
            parse_ratfunc("1/(h-1)").unwrap(),
        );
        assert_eq!(eval_poly(&pole, &s), Err(OracleError::PoleAtPoint));
    }

    #[test]
    fn frechet_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let params = KdvParams::standard(parse_ratfunc("(3-h^2)/24").unwrap()).unwrap();
        assert!(frechet_check(&params.k2(), 20, &mut rng));
        assert!(frechet_check(
            &parse("(5/3)*D4[phi,1]").unwrap(),
            5,
            &mut rng
        ));
        assert!(frechet_check(&parse("D1[phi,1]^3").unwrap(), 20, &mut rng));
        assert!(frechet_check(
            &parse("D1[phi,2]*D2[phi,1]^2").unwrap(),
            20,
            &mut rng
        ));
    }

    #[test]
    fn commute_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = KdvParams::standard(parse_ratfunc("(3-h^2)/24").unwrap()).unwrap();
        for (a, b) in [(2, 3), (2, 2), (3, 4)] {
            assert!(commute_check(&params, a, b, 5, &mut rng));
        }
    }

    #[test]
    fn broken_commutation_is_detected() {
        // K2 with the wrong nonlinearity for its recursion operator.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let good = KdvParams::standard(RatFunc::one()).unwrap();
        let k3 = good.flow(3, &RatFunc::one()).unwrap();
        let bad = parse("D3[phi,1]+D1[phi,1]^2").unwrap();
        let d = |p: &DiffPoly, k: &DiffPoly| {
            evolutionary_derive(p, &BTreeMap::from([(1, k.clone())])).unwrap()
        };
        let lhs = d(&bad, &k3);
        let rhs = d(&k3, &bad);
        let s = JetSample::random(&mut rng, &[1], 12, q(1, 2));
        assert_ne!(eval_poly(&lhs, &s).unwrap(), eval_poly(&rhs, &s).unwrap());
    }

    #[test]
    fn small_suites() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(integrate_roundtrip_check(10, &mut rng));
        assert!(trig_identity_check(7));
        assert!(rank_specialization_check(10, 5, &mut rng));
    }
}
