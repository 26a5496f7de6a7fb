//! Truncated ε-series over the slow fields `ν^(i)`, `ϕ^(i)` and their κ- and
//! slow-time derivatives.
//!
//! The ε-power of a term is carried by its variables: `ν^(i)` has weight
//! `2i`, `ϕ^(i)` weight `2i − 1`, every `∂κ` adds 1 and every `∂_{t_m}` adds
//! `2m − 1`. A series is therefore a polynomial in [`ExtVar`]s truncated at a
//! total weight `N`; its ε^k coefficient is the weight-k component.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{RatFunc, Rational};
use crate::poly::{Monomial, Poly, Variable};

/// Highest slow time `t_m` tracked.
pub const MAX_TIME: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SeriesError {
    #[error("truncation orders differ: {0} vs {1}")]
    TruncationMismatch(u32, u32),
    #[error("argument of an analytic kernel has a nonzero ε⁰ term")]
    NonSmallArgument,
    #[error("power needs unit ε⁰ term")]
    NonUnitBase,
    #[error("monomial with odd total κ-order cannot absorb the scale factor")]
    OddKappaOrder,
    #[error("slow time t{0} is beyond the tracked range")]
    TimeOutOfRange(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Field {
    Nu,
    Phi,
}

impl Field {
    pub fn base_weight(self, level: u32) -> u32 {
        match self {
            Field::Nu => 2 * level,
            Field::Phi => 2 * level - 1,
        }
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Field::Nu => "nu",
            Field::Phi => "phi",
        })
    }
}

/// `∂κ^x ∂_{t1}^{t[0]} … ∂_{t4}^{t[3]}` applied to `ν^(level)` or `ϕ^(level)`.
/// After the change of frame `x` counts ξ-derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExtVar {
    pub field: Field,
    pub level: u32,
    pub x: u32,
    pub t: [u32; MAX_TIME],
}

impl ExtVar {
    pub fn new(field: Field, level: u32) -> Self {
        ExtVar {
            field,
            level,
            x: 0,
            t: [0; MAX_TIME],
        }
    }

    pub fn nu(level: u32) -> Self {
        Self::new(Field::Nu, level)
    }

    pub fn phi(level: u32) -> Self {
        Self::new(Field::Phi, level)
    }

    pub fn dx(mut self, k: u32) -> Self {
        self.x += k;
        self
    }

    /// Adds `k` derivatives in `t_m` (1-based).
    pub fn dt(mut self, m: usize, k: u32) -> Self {
        self.t[m - 1] += k;
        self
    }

    pub fn has_time(&self) -> bool {
        self.t.iter().any(|&d| d > 0)
    }
}

impl Variable for ExtVar {
    fn weight(&self) -> u32 {
        let tw: u32 = self
            .t
            .iter()
            .enumerate()
            .map(|(i, d)| (2 * i as u32 + 1) * d)
            .sum();
        self.field.base_weight(self.level) + self.x + tw
    }
}

impl fmt::Display for ExtVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.field, self.level)?;
        if self.x > 0 {
            write!(f, "_x{}", self.x)?;
        }
        for (i, d) in self.t.iter().enumerate() {
            if *d > 0 {
                write!(f, "_t{}^{}", i + 1, d)?;
            }
        }
        Ok(())
    }
}

pub type ExtPoly = Poly<ExtVar>;

pub fn kappa_order(m: &Monomial<ExtVar>) -> u32 {
    m.factors().iter().map(|(v, e)| v.x * e).sum()
}

pub fn d_kappa(p: &ExtPoly) -> ExtPoly {
    p.derive::<()>(|v| Ok(ExtPoly::var(v.dx(1))))
        .expect("infallible")
}

pub fn d_time(p: &ExtPoly, m: usize) -> Result<ExtPoly, SeriesError> {
    if m == 0 || m > MAX_TIME {
        return Err(SeriesError::TimeOutOfRange(m));
    }
    Ok(p.derive::<()>(|v| Ok(ExtPoly::var(v.dt(m, 1))))
        .expect("infallible"))
}

/// Truncated formal power series in ε.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpsSeries {
    order: u32,
    poly: ExtPoly,
}

impl EpsSeries {
    pub fn new(order: u32, poly: ExtPoly) -> Self {
        EpsSeries {
            order,
            poly: poly.truncate(order),
        }
    }

    pub fn zero(order: u32) -> Self {
        Self::new(order, ExtPoly::zero())
    }

    pub fn constant(order: u32, c: RatFunc) -> Self {
        Self::new(order, ExtPoly::constant(c))
    }

    pub fn var(order: u32, v: ExtVar) -> Self {
        Self::new(order, ExtPoly::var(v))
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn poly(&self) -> &ExtPoly {
        &self.poly
    }

    pub fn into_poly(self) -> ExtPoly {
        self.poly
    }

    pub fn is_zero(&self) -> bool {
        self.poly.is_zero()
    }

    /// Coefficient of ε^k.
    pub fn coeff(&self, k: u32) -> ExtPoly {
        self.poly.weight_component(k)
    }

    fn check(&self, other: &Self) -> Result<(), SeriesError> {
        if self.order != other.order {
            return Err(SeriesError::TruncationMismatch(self.order, other.order));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(EpsSeries {
            order: self.order,
            poly: self.poly.add(&other.poly),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(EpsSeries {
            order: self.order,
            poly: self.poly.sub(&other.poly),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check(other)?;
        Ok(EpsSeries {
            order: self.order,
            poly: self.poly.mul_truncated(&other.poly, self.order),
        })
    }

    pub fn neg(&self) -> Self {
        EpsSeries {
            order: self.order,
            poly: self.poly.neg(),
        }
    }

    pub fn scale(&self, c: &RatFunc) -> Self {
        EpsSeries {
            order: self.order,
            poly: self.poly.scale(c),
        }
    }

    /// `(1 + s)^p` for a series with unit ε⁰ term.
    pub fn powf(&self, p: &Rational) -> Result<Self, SeriesError> {
        let c0 = self.coeff(0);
        if c0 != ExtPoly::one() {
            return Err(SeriesError::NonUnitBase);
        }
        let s = EpsSeries {
            order: self.order,
            poly: self.poly.sub(&c0),
        };
        compose(&AnalyticKernel::Binomial(p.clone()), &s)
    }

    /// Multiplies every monomial of total κ-order `a` by `(ζ²)^{a/2}`, i.e.
    /// restores a spatial scale `ζ` that was set to 1 while expanding shifts.
    pub fn rescale_kappa(&self, zeta_sq: &RatFunc) -> Result<Self, SeriesError> {
        let mut out = ExtPoly::zero();
        for (m, c) in self.poly.terms() {
            let a = kappa_order(m);
            if a % 2 == 1 {
                return Err(SeriesError::OddKappaOrder);
            }
            let k = zeta_sq.pow((a / 2) as i32).expect("nonnegative power");
            out.add_term(m.clone(), c * &k);
        }
        Ok(EpsSeries {
            order: self.order,
            poly: out,
        })
    }
}

/// Scalar functions composed with small series through exact Taylor
/// coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnalyticKernel {
    Sin,
    Cos,
    /// `(1 + s)^p`.
    Binomial(Rational),
}

impl AnalyticKernel {
    pub fn sqrt1p() -> Self {
        AnalyticKernel::Binomial(Rational::new(1.into(), 2.into()))
    }

    pub fn name(&self) -> String {
        match self {
            AnalyticKernel::Sin => "sin".into(),
            AnalyticKernel::Cos => "cos".into(),
            AnalyticKernel::Binomial(p) if *p == Rational::new(1.into(), 2.into()) => {
                "sqrt1p".into()
            }
            AnalyticKernel::Binomial(p) => format!("pow1p({p})"),
        }
    }

    /// Taylor coefficient of `s^k` at 0.
    pub fn taylor(&self, k: u32) -> Rational {
        let fact = (1..=k).fold(Rational::from_integer(1.into()), |acc, i| {
            acc * Rational::from_integer(i.into())
        });
        let sign = |e: u32| Rational::from_integer(if e.is_multiple_of(2) { 1 } else { -1 }.into());
        match self {
            AnalyticKernel::Sin if k % 2 == 1 => sign((k - 1) / 2) / fact,
            AnalyticKernel::Cos if k.is_multiple_of(2) => sign(k / 2) / fact,
            AnalyticKernel::Sin | AnalyticKernel::Cos => Rational::from_integer(0.into()),
            AnalyticKernel::Binomial(p) => {
                let num = (0..k).fold(Rational::from_integer(1.into()), |acc, i| {
                    acc * (p - Rational::from_integer(i.into()))
                });
                num / fact
            }
        }
    }
}

pub fn compose(k: &AnalyticKernel, s: &EpsSeries) -> Result<EpsSeries, SeriesError> {
    if !s.coeff(0).is_zero() {
        return Err(SeriesError::NonSmallArgument);
    }
    let n = s.order();
    let mut out = ExtPoly::zero();
    let mut power = ExtPoly::one();
    for j in 0..=n {
        if power.is_zero() {
            break;
        }
        let c = k.taylor(j);
        if c != Rational::from_integer(0.into()) {
            out.add_assign(&power.scale_rational(&c));
        }
        power = power.mul_truncated(s.poly(), n);
    }
    Ok(EpsSeries::new(n, out))
}

fn levels(field: Field, n: u32) -> impl Iterator<Item = u32> {
    (1..).take_while(move |&i| field.base_weight(i) <= n)
}

/// Value at the site `n + dir` (`dir ∈ {−1, 0, 1}`) of the slow expansion of
/// a field: `Σ_i Σ_k ε^{w_i + k} (dir·ζ)^k/k! ∂κ^k field^(i)`. The `ν`
/// background 1 is included; the `ϕ` background `−σt` is not, since it
/// cancels from every phase difference.
pub fn shift_expand(field: Field, dir: i32, zeta: &RatFunc, n: u32) -> EpsSeries {
    let mut p = ExtPoly::zero();
    if field == Field::Nu {
        p = ExtPoly::one();
    }
    for level in levels(field, n) {
        let base = ExtVar::new(field, level);
        let max_k = if dir == 0 { 0 } else { n - base.weight() };
        let mut c = RatFunc::one();
        for k in 0..=max_k {
            if k > 0 {
                c = &(&c * zeta) * &RatFunc::frac(dir as i64, k as i64);
            }
            p.add_term(Monomial::var(base.dx(k)), c.clone());
        }
    }
    EpsSeries::new(n, p)
}

/// `∂_t` of the slow expansion of a field: `Σ_i Σ_m ε^{w_i + 2m − 1} ∂_{t_m}
/// field^(i)`, with the background contribution `−σ` for `ϕ`.
pub fn time_expand(field: Field, sigma: &RatFunc, n: u32) -> EpsSeries {
    let mut p = ExtPoly::zero();
    if field == Field::Phi {
        p = ExtPoly::constant(-sigma);
    }
    for level in levels(field, n) {
        for m in 1..=MAX_TIME {
            let v = ExtVar::new(field, level).dt(m, 1);
            if v.weight() <= n {
                p.add_term(Monomial::var(v), RatFunc::one());
            }
        }
    }
    EpsSeries::new(n, p)
}

/// Rewrites every variable in the comoving frame `ξ = κ − c t_1`:
/// `∂κ → ∂ξ`, `∂_{t1} → −c ∂ξ`.
pub fn to_frame(p: &ExtPoly, c: &RatFunc) -> ExtPoly {
    let minus_c = -c;
    p.map_vars(|v| {
        let mut w = *v;
        w.x += w.t[0];
        w.t[0] = 0;
        let k = minus_c.pow(v.t[0] as i32).expect("nonnegative power");
        (w, k)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(level: u32) -> ExtPoly {
        ExtPoly::var(ExtVar::nu(level))
    }

    #[test]
    fn arithmetic_examples() {
        // ϕ^(1) has weight 1, so it stands for εx
        let u = ExtPoly::var(ExtVar::phi(1));
        let a = EpsSeries::new(2, ExtPoly::one().add(&u));
        let b = EpsSeries::new(2, ExtPoly::one().sub(&u));
        let prod = a.mul(&b).unwrap();
        assert_eq!(prod.poly(), &ExtPoly::one().sub(&u.mul(&u)));
        let e3 = EpsSeries::new(9, ExtPoly::var(ExtVar::phi(2)));
        let e7 = EpsSeries::new(9, ExtPoly::var(ExtVar::phi(4)));
        assert!(e3.mul(&e7).unwrap().is_zero());
        assert_eq!(a.add(&EpsSeries::zero(2)).unwrap(), a);
        assert_eq!(
            a.add(&EpsSeries::zero(3)),
            Err(SeriesError::TruncationMismatch(2, 3))
        );
    }

    #[test]
    fn compose_examples() {
        let u = ExtPoly::var(ExtVar::phi(1));
        let s = EpsSeries::new(3, u.clone());
        let sin = compose(&AnalyticKernel::Sin, &s).unwrap();
        assert_eq!(sin.poly(), &u.sub(&u.pow(3).scale(&RatFunc::frac(1, 6))));
        let v = x(1);
        let r = compose(&AnalyticKernel::sqrt1p(), &EpsSeries::new(4, v.clone())).unwrap();
        let want = ExtPoly::one()
            .add(&v.scale(&RatFunc::frac(1, 2)))
            .sub(&v.pow(2).scale(&RatFunc::frac(1, 8)));
        assert_eq!(r.poly(), &want);
        let cos0 = compose(&AnalyticKernel::Cos, &EpsSeries::zero(5)).unwrap();
        assert_eq!(cos0.poly(), &ExtPoly::one());
        assert_eq!(
            compose(
                &AnalyticKernel::Sin,
                &EpsSeries::constant(3, RatFunc::one())
            ),
            Err(SeriesError::NonSmallArgument)
        );
    }

    #[test]
    fn sin_cos_identity() {
        let n = 9;
        let beta = shift_expand(Field::Phi, 1, &RatFunc::h(), n)
            .sub(&shift_expand(Field::Phi, 0, &RatFunc::h(), n))
            .unwrap();
        let s = compose(&AnalyticKernel::Sin, &beta).unwrap();
        let c = compose(&AnalyticKernel::Cos, &beta).unwrap();
        let one = s.mul(&s).unwrap().add(&c.mul(&c).unwrap()).unwrap();
        assert_eq!(one.poly(), &ExtPoly::one());
    }

    #[test]
    fn shift_examples() {
        let h = RatFunc::h();
        let n = 9;
        for dir in [1, -1] {
            let beta = shift_expand(Field::Phi, dir, &h, n)
                .sub(&shift_expand(Field::Phi, 0, &h, n))
                .unwrap();
            assert!(beta.coeff(0).is_zero());
            assert!(beta.coeff(1).is_zero());
            assert_eq!(
                beta.coeff(2),
                ExtPoly::var(ExtVar::phi(1).dx(1)).scale(&(&h * &RatFunc::from_int(dir as i64)))
            );
        }
        let nu = shift_expand(Field::Nu, 1, &h, n);
        assert_eq!(nu.coeff(0), ExtPoly::one());
        assert_eq!(nu.coeff(2), x(1));
        assert_eq!(kappa_order(&Monomial::var(ExtVar::nu(1).dx(3))), 3);
    }

    #[test]
    fn second_difference_parity() {
        let n = 9;
        for field in [Field::Nu, Field::Phi] {
            let z = RatFunc::one();
            let d2 = shift_expand(field, 1, &z, n)
                .add(&shift_expand(field, -1, &z, n))
                .unwrap()
                .sub(&shift_expand(field, 0, &z, n).scale(&RatFunc::from_int(2)))
                .unwrap();
            for (m, _) in d2.poly().terms() {
                assert_eq!(kappa_order(m) % 2, 0);
            }
        }
    }

    #[test]
    fn time_examples() {
        let sigma = RatFunc::one();
        let dphi = time_expand(Field::Phi, &sigma, 9);
        assert_eq!(dphi.coeff(0), ExtPoly::constant(-&sigma));
        let dnu = time_expand(Field::Nu, &sigma, 9);
        assert_eq!(dnu.coeff(3), ExtPoly::var(ExtVar::nu(1).dt(1, 1)));
        assert!(dnu.coeff(1).is_zero());
    }

    #[test]
    fn frame_change() {
        let c = RatFunc::from_int(-1);
        let p = ExtPoly::var(ExtVar::phi(1).dt(1, 2).dx(1));
        let q = to_frame(&p, &c);
        assert_eq!(q, ExtPoly::var(ExtVar::phi(1).dx(3)));
        let r = to_frame(
            &ExtPoly::var(ExtVar::phi(2).dt(1, 1).dt(2, 1)),
            &RatFunc::one(),
        );
        assert_eq!(r, ExtPoly::var(ExtVar::phi(2).dx(1).dt(2, 1)).neg());
    }

    #[test]
    fn rescale_needs_even_order() {
        let p = EpsSeries::new(9, ExtPoly::var(ExtVar::phi(1).dx(2)));
        let q = p.rescale_kappa(&RatFunc::h().pow(2).unwrap()).unwrap();
        assert_eq!(q.poly(), &p.poly().scale(&RatFunc::h().pow(2).unwrap()));
        let odd = EpsSeries::new(9, ExtPoly::var(ExtVar::phi(1).dx(1)));
        assert_eq!(
            odd.rescale_kappa(&RatFunc::one()),
            Err(SeriesError::OddKappaOrder)
        );
    }

    #[test]
    fn binomial_coefficients() {
        let k = AnalyticKernel::Binomial(Rational::new((-1).into(), 2.into()));
        assert_eq!(k.taylor(2), Rational::new(3.into(), 8.into()));
        assert_eq!(
            AnalyticKernel::sqrt1p().taylor(3),
            Rational::new(1.into(), 16.into())
        );
        assert_eq!(
            AnalyticKernel::Sin.taylor(5),
            Rational::new(1.into(), 120.into())
        );
    }
}
