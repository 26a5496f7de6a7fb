//! Order-by-order multiscale reduction of the lattice models.
//!
//! The Madelung residuals are expanded to order ε^N, the density levels
//! `ν^(k)` are eliminated from the even orders, the odd orders are read in
//! the comoving frame, and each odd order from ε⁵ on fixes one more slow-time
//! evolution of the phase levels.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{RatFunc, Rational, Sign, SignParams};
use crate::compat::{self, CompatError};
use crate::diffalg::{
    derive_xi, derive_xi_n, evolutionary_derive, frechet, jet, mono, render, DiffAlgError, DiffPoly,
};
use crate::graded::{coords, CoordVector, GradedBasis, GradedError};
use crate::kdv::{FlowTable, KdvError, KdvParams};
use crate::poly::{Monomial, Variable};
use crate::series::{
    compose, d_kappa, d_time, shift_expand, time_expand, to_frame, AnalyticKernel, EpsSeries,
    ExtPoly, ExtVar, Field, SeriesError,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("order {0} is not supported (expected 5, 7 or 9)")]
    BadOrder(u32),
    #[error("imaginary group velocity: c² = {0}")]
    ImaginarySpeed(String),
    #[error("dispersion relation gives c² = {0}, which has no rational square root")]
    IrrationalSpeed(String),
    #[error("order ε^{0} does not have the expected form: {1}")]
    BadShape(u32, String),
    #[error("order ε^{0} carries a residual of the wrong parity")]
    OrderParity(u32),
    #[error("fast-wave source on the newest level survives at order ε^{0}")]
    FastWaveSource(u32),
    #[error("unremovable secularity at order ε^{0}: {1}")]
    UnremovableSecularity(u32, String),
    #[error("slow-time derivative {0} has no known flow")]
    MissingFlow(String),
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    DiffAlg(#[from] DiffAlgError),
    #[error(transparent)]
    Kdv(#[from] KdvError),
    #[error(transparent)]
    Graded(#[from] GradedError),
    #[error(transparent)]
    Compat(#[from] Box<CompatError>),
}

impl From<CompatError> for PipelineError {
    fn from(e: CompatError) -> Self {
        PipelineError::Compat(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dnls,
    Al,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Dnls => "dnls",
            ModelKind::Al => "al",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "dnls" => Ok(ModelKind::Dnls),
            "al" => Ok(ModelKind::Al),
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

/// Expressions over the lattice data at sites `n − 1, n, n + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LatticeExpr {
    Const(RatFunc),
    Sigma,
    /// `ν_{n+site}`.
    Nu(i32),
    /// `β^± = ϕ_{n±1} − ϕ_n`.
    Beta(i32),
    DtNu,
    DtPhi,
    Add(Vec<LatticeExpr>),
    Mul(Vec<LatticeExpr>),
    Pow(Box<LatticeExpr>, Rational),
    Sin(Box<LatticeExpr>),
    Cos(Box<LatticeExpr>),
}

/// Numeric lattice data for floating-point cross-checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeSample {
    pub nu: [f64; 3],
    pub phi: [f64; 3],
    pub dt_nu: f64,
    pub dt_phi: f64,
    pub h: f64,
    pub sigma: f64,
}

impl LatticeExpr {
    fn c(x: RatFunc) -> Self {
        LatticeExpr::Const(x)
    }

    fn sqrt(self) -> Self {
        LatticeExpr::Pow(Box::new(self), Rational::new(1.into(), 2.into()))
    }

    fn rsqrt(self) -> Self {
        LatticeExpr::Pow(Box::new(self), Rational::new((-1).into(), 2.into()))
    }

    pub fn to_series(&self, sigma: &RatFunc, n: u32) -> Result<EpsSeries, SeriesError> {
        let one = RatFunc::one();
        Ok(match self {
            LatticeExpr::Const(k) => EpsSeries::constant(n, k.clone()),
            LatticeExpr::Sigma => EpsSeries::constant(n, sigma.clone()),
            LatticeExpr::Nu(site) => shift_expand(Field::Nu, *site, &one, n),
            LatticeExpr::Beta(dir) => shift_expand(Field::Phi, *dir, &one, n)
                .sub(&shift_expand(Field::Phi, 0, &one, n))?,
            LatticeExpr::DtNu => time_expand(Field::Nu, sigma, n),
            LatticeExpr::DtPhi => time_expand(Field::Phi, sigma, n),
            LatticeExpr::Add(xs) => {
                let mut acc = EpsSeries::zero(n);
                for x in xs {
                    acc = acc.add(&x.to_series(sigma, n)?)?;
                }
                acc
            }
            LatticeExpr::Mul(xs) => {
                let mut acc = EpsSeries::constant(n, RatFunc::one());
                for x in xs {
                    acc = acc.mul(&x.to_series(sigma, n)?)?;
                }
                acc
            }
            LatticeExpr::Pow(x, p) => x.to_series(sigma, n)?.powf(p)?,
            LatticeExpr::Sin(x) => compose(&AnalyticKernel::Sin, &x.to_series(sigma, n)?)?,
            LatticeExpr::Cos(x) => compose(&AnalyticKernel::Cos, &x.to_series(sigma, n)?)?,
        })
    }

    pub fn eval_f64(&self, s: &LatticeSample) -> f64 {
        let idx = |site: i32| (site + 1) as usize;
        match self {
            LatticeExpr::Const(k) => ratfunc_f64(k, s.h),
            LatticeExpr::Sigma => s.sigma,
            LatticeExpr::Nu(site) => s.nu[idx(*site)],
            LatticeExpr::Beta(dir) => s.phi[idx(*dir)] - s.phi[1],
            LatticeExpr::DtNu => s.dt_nu,
            LatticeExpr::DtPhi => s.dt_phi,
            LatticeExpr::Add(xs) => xs.iter().map(|x| x.eval_f64(s)).sum(),
            LatticeExpr::Mul(xs) => xs.iter().map(|x| x.eval_f64(s)).product(),
            LatticeExpr::Pow(x, p) => x.eval_f64(s).powf(rational_f64(p)),
            LatticeExpr::Sin(x) => x.eval_f64(s).sin(),
            LatticeExpr::Cos(x) => x.eval_f64(s).cos(),
        }
    }
}

fn rational_f64(q: &Rational) -> f64 {
    let n: f64 = q.numer().to_string().parse().unwrap_or(f64::NAN);
    let d: f64 = q.denom().to_string().parse().unwrap_or(f64::NAN);
    n / d
}

fn ratfunc_f64(f: &RatFunc, h: f64) -> f64 {
    let ev = |p: &crate::coeff::HPoly| {
        p.coeffs()
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * h + rational_f64(c))
    };
    ev(f.num()) / ev(f.den())
}

/// The pair of real residuals obtained from `f_n = √ν_n e^{iϕ_n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub r_nu: LatticeExpr,
    pub r_phi: LatticeExpr,
}

pub fn madelung(kind: ModelKind) -> ModelSpec {
    use LatticeExpr as E;
    let inv_h2 = RatFunc::h().pow(-2).expect("h is nonzero");
    let half_inv_h2 = inv_h2.scale(&Rational::new(1.into(), 2.into()));
    let sqrt_alpha = |d: i32| E::Mul(vec![E::Nu(0), E::Nu(d)]).sqrt();
    let sqrt_gamma = |d: i32| E::Mul(vec![E::Nu(d).sqrt(), E::Nu(0).rsqrt()]);
    let sum = |f: &dyn Fn(i32) -> E| E::Add(vec![f(1), f(-1)]);
    let sin_part = sum(&|d| E::Mul(vec![sqrt_alpha(d), E::Sin(Box::new(E::Beta(d)))]));
    let cos_gamma = sum(&|d| E::Mul(vec![sqrt_gamma(d), E::Cos(Box::new(E::Beta(d)))]));
    let phi_common = vec![
        E::DtPhi,
        E::c(inv_h2.clone()),
        E::Mul(vec![E::c(-half_inv_h2), cos_gamma]),
    ];
    match kind {
        ModelKind::Dnls => ModelSpec {
            kind,
            r_nu: E::Add(vec![E::DtNu, E::Mul(vec![E::c(inv_h2), sin_part])]),
            r_phi: E::Add(
                phi_common
                    .into_iter()
                    .chain([E::Mul(vec![E::Sigma, E::Nu(0)])])
                    .collect(),
            ),
        },
        ModelKind::Al => {
            let cos_alpha = sum(&|d| E::Mul(vec![sqrt_alpha(d), E::Cos(Box::new(E::Beta(d)))]));
            let prefactor = E::Add(vec![
                E::c(inv_h2),
                E::Mul(vec![E::c(RatFunc::from_int(-1)), E::Sigma, E::Nu(0)]),
            ]);
            ModelSpec {
                kind,
                r_nu: E::Add(vec![E::DtNu, E::Mul(vec![prefactor, sin_part])]),
                r_phi: E::Add(
                    phi_common
                        .into_iter()
                        .chain([E::Mul(vec![E::c(RatFunc::frac(1, 2)), E::Sigma, cos_alpha])])
                        .collect(),
                ),
            }
        }
    }
}

/// The square of the lattice-to-slow scale ζ, chosen so that the group
/// velocity satisfies `c² = σ` and stays finite as `h → 0`.
pub fn zeta_squared(kind: ModelKind, sigma: &RatFunc) -> RatFunc {
    let h2 = RatFunc::h().pow(2).expect("power");
    match kind {
        ModelKind::Dnls => h2,
        ModelKind::Al => {
            let den = &RatFunc::one() - &(sigma * &h2);
            h2.try_div(&den).expect("nonzero denominator")
        }
    }
}

/// One solved odd order `ε^{2k+1}`, `k ≥ 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub order: u32,
    /// Common coefficient of the new slow-time unknowns `∂ξ∂_{t_m}ϕ^(j)`.
    pub alpha: RatFunc,
    pub unknowns: Vec<String>,
    /// `∂ξ` of the sum of the unknown evolutions.
    pub source: DiffPoly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReducedSystem {
    pub model: ModelKind,
    pub signs: SignParams,
    pub max_order: u32,
    pub zeta_sq: RatFunc,
    pub c: RatFunc,
    /// `ν^(k)` in terms of the phase variables, before the change of frame.
    pub nu_relations: Vec<ExtPoly>,
    pub kdv: KdvParams,
    pub flows: FlowTable,
    /// Right-hand side of the `ϕ^(2)` equation before `K_3` is split off.
    pub phi2_rhs: Option<DiffPoly>,
    pub f2: Option<DiffPoly>,
    pub f3: Option<DiffPoly>,
    /// Forcing of the `φ^(3) = ∂ξϕ^(3)` equation.
    pub g2: Option<DiffPoly>,
    pub stages: Vec<StageRecord>,
}

impl ReducedSystem {
    pub fn a(&self) -> &RatFunc {
        &self.kdv.a
    }

    pub fn eps2_relation(&self) -> &ExtPoly {
        &self.nu_relations[0]
    }

    pub fn f2_coords(&self) -> Option<Result<CoordVector, GradedError>> {
        let b = std::sync::Arc::new(GradedBasis::products(6, 1));
        self.f2.as_ref().map(|f| coords(f, &b))
    }

    pub fn g2_coords(&self) -> Option<Result<CoordVector, GradedError>> {
        let b = std::sync::Arc::new(GradedBasis::products(9, 2));
        self.g2.as_ref().map(|g| coords(g, &b))
    }

    /// Forcing of the newest level equation at the given odd order.
    pub fn forcing(&self, order: u32) -> Option<&DiffPoly> {
        match order {
            7 => self.f2.as_ref(),
            9 => self.g2.as_ref(),
            _ => None,
        }
    }

    pub fn b(&self, m: u32) -> Option<&RatFunc> {
        self.flows.b(m)
    }
}

/// Residual series after expansion, with ζ restored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub r_nu: EpsSeries,
    pub r_phi: EpsSeries,
}

pub fn expand(spec: &ModelSpec, signs: &SignParams, n: u32) -> Result<Expansion, SeriesError> {
    let sigma = signs.sigma();
    let z2 = zeta_squared(spec.kind, &sigma);
    Ok(Expansion {
        r_nu: spec.r_nu.to_series(&sigma, n)?.rescale_kappa(&z2)?,
        r_phi: spec.r_phi.to_series(&sigma, n)?.rescale_kappa(&z2)?,
    })
}

fn apply_derivatives(base: &ExtPoly, v: &ExtVar) -> Result<ExtPoly, SeriesError> {
    let mut p = base.clone();
    for _ in 0..v.x {
        p = d_kappa(&p);
    }
    for (i, d) in v.t.iter().enumerate() {
        for _ in 0..*d {
            p = d_time(&p, i + 1)?;
        }
    }
    Ok(p)
}

fn substitute_nu(p: &ExtPoly, rel: &[ExtPoly], n: u32) -> Result<ExtPoly, SeriesError> {
    let mut cache: HashMap<ExtVar, ExtPoly> = HashMap::new();
    let out = p.substitute(|v| {
        if v.field != Field::Nu || v.level as usize > rel.len() {
            return Ok(None);
        }
        if let Some(x) = cache.get(v) {
            return Ok(Some(x.clone()));
        }
        let img = apply_derivatives(&rel[v.level as usize - 1], v)?.truncate(n);
        cache.insert(*v, img.clone());
        Ok(Some(img))
    })?;
    Ok(out.truncate(n))
}

fn has_nu(p: &ExtPoly) -> bool {
    p.vars().iter().any(|v| v.field == Field::Nu)
}

fn render_ext(p: &ExtPoly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    p.terms()
        .map(|(m, c)| {
            let f: Vec<String> = m
                .factors()
                .iter()
                .map(|(v, e)| {
                    if *e == 1 {
                        v.to_string()
                    } else {
                        format!("{v}^{e}")
                    }
                })
                .collect();
            if m.is_one() {
                format!("({c})")
            } else if c.is_one() {
                f.join("*")
            } else {
                format!("({c})*{}", f.join("*"))
            }
        })
        .collect::<Vec<_>>()
        .join("+")
}

pub fn render_relation(level: u32, p: &ExtPoly) -> String {
    format!("nu{level} = {}", render_ext(p))
}

/// Eliminates `ν^(1..)` from the even orders of the phase residual.
fn eliminate_nu(ex: &Expansion, sigma: &RatFunc) -> Result<Vec<ExtPoly>, PipelineError> {
    let n = ex.r_phi.order();
    if !ex.r_phi.coeff(0).is_zero() {
        return Err(PipelineError::OrderParity(0));
    }
    let mut rel: Vec<ExtPoly> = Vec::new();
    for k in 1..=n / 2 {
        let comp = substitute_nu(&ex.r_phi.coeff(2 * k), &rel, n)?;
        let target = ExtVar::nu(k);
        let mono_t = Monomial::var(target);
        let coeff = comp.coeff(&mono_t);
        if &coeff != sigma {
            return Err(PipelineError::BadShape(
                2 * k,
                format!("coefficient of nu{k} is {coeff}"),
            ));
        }
        let rest = comp.filter(|m, _| m != &mono_t);
        if has_nu(&rest) {
            return Err(PipelineError::BadShape(
                2 * k,
                "density level appears nonlinearly".into(),
            ));
        }
        rel.push(rest.scale(&-sigma));
    }
    for k in (1..=n).step_by(2) {
        if !ex.r_phi.coeff(k).is_zero() {
            return Err(PipelineError::OrderParity(k));
        }
    }
    Ok(rel)
}

/// Resolves slow-time derivatives of the phase levels through the known
/// flows `∂_{t_m} ϕ^(j)`.
struct Resolver {
    known: BTreeMap<(usize, u32), DiffPoly>,
    cache: HashMap<ExtVar, DiffPoly>,
}

impl Resolver {
    fn new() -> Self {
        Resolver {
            known: BTreeMap::new(),
            cache: HashMap::new(),
        }
    }

    fn insert(&mut self, m: usize, level: u32, flow: DiffPoly) {
        self.known.insert((m, level), flow);
        self.cache.clear();
    }

    fn flows_at(&self, m: usize) -> BTreeMap<u32, DiffPoly> {
        self.known
            .iter()
            .filter(|((mm, _), _)| *mm == m)
            .map(|((_, l), f)| (*l, f.clone()))
            .collect()
    }

    fn resolve(&mut self, v: &ExtVar) -> Result<DiffPoly, PipelineError> {
        if let Some(p) = self.cache.get(v) {
            return Ok(p.clone());
        }
        if v.field == Field::Nu {
            return Err(PipelineError::MissingFlow(v.to_string()));
        }
        if v.t[0] > 0 {
            return Err(PipelineError::MissingFlow(v.to_string()));
        }
        let out = if !v.has_time() {
            if v.x == 0 {
                return Err(PipelineError::BadShape(
                    v.weight(),
                    format!("undifferentiated {v}"),
                ));
            }
            jet(v.level, v.x)
        } else {
            let m = (0..v.t.len())
                .rev()
                .find(|&i| v.t[i] > 0)
                .expect("has time")
                + 1;
            let mut p = self
                .known
                .get(&(m, v.level))
                .cloned()
                .ok_or_else(|| PipelineError::MissingFlow(v.to_string()))?;
            let mut rest = v.t;
            rest[m - 1] -= 1;
            for (i, d) in rest.iter().enumerate() {
                for _ in 0..*d {
                    let fl = self.flows_at(i + 1);
                    p = evolutionary_derive(&p, &fl)
                        .map_err(|_| PipelineError::MissingFlow(format!("{v} (via t{})", i + 1)))?;
                }
            }
            derive_xi_n(&p, v.x)
        };
        self.cache.insert(*v, out.clone());
        Ok(out)
    }

    fn resolve_poly(&mut self, p: &ExtPoly) -> Result<DiffPoly, PipelineError> {
        let mut out = DiffPoly::zero();
        for (m, c) in p.terms() {
            let mut acc = DiffPoly::constant(c.clone());
            for (v, e) in m.factors() {
                let img = self.resolve(v)?;
                acc = acc.mul(&img.pow(*e));
            }
            out.add_assign(&acc);
        }
        Ok(out)
    }
}

/// Splits the odd-order equation into `α Σ ∂ξ∂_{t_m}ϕ^(j)` over the new
/// unknowns (`m + j = k + 1`) and the rest, returning `(α, rest)`.
fn split_unknowns(
    eq: &ExtPoly,
    order: u32,
) -> Result<(RatFunc, ExtPoly, Vec<String>), PipelineError> {
    let k = (order - 1) / 2;
    let is_unknown = |v: &ExtVar| {
        v.field == Field::Phi && v.x == 1 && v.t[0] == 0 && v.t.iter().sum::<u32>() == 1 && {
            let m = v.t.iter().position(|&d| d == 1).expect("one time") as u32 + 1;
            m + v.level == k + 1
        }
    };
    let mut alpha: Option<RatFunc> = None;
    let mut names = Vec::new();
    let mut rest = ExtPoly::zero();
    for (m, c) in eq.terms() {
        match m.as_var() {
            Some(v) if is_unknown(v) => {
                match &alpha {
                    None => alpha = Some(c.clone()),
                    Some(a) if a == c => {}
                    Some(a) => {
                        return Err(PipelineError::UnremovableSecularity(
                            order,
                            format!("unknown {v} has coefficient {c}, expected {a}"),
                        ))
                    }
                }
                names.push(v.to_string());
            }
            _ => {
                if m.factors().iter().any(|(v, _)| is_unknown(v)) {
                    return Err(PipelineError::UnremovableSecularity(
                        order,
                        "new slow-time derivative enters nonlinearly".into(),
                    ));
                }
                rest.add_term(m.clone(), c.clone());
            }
        }
    }
    let alpha = alpha.ok_or_else(|| {
        PipelineError::UnremovableSecularity(order, "no slow-time evolution appears".into())
    })?;
    let expected = (k - 1) as usize;
    if names.len() != expected {
        return Err(PipelineError::UnremovableSecularity(
            order,
            format!(
                "{} of {expected} new slow-time derivatives appear",
                names.len()
            ),
        ));
    }
    Ok((alpha, rest, names))
}

fn levels_present(p: &DiffPoly) -> Vec<u32> {
    let mut l: Vec<u32> = p.vars().iter().map(|v| v.level).collect();
    l.dedup();
    l
}

fn split_by_level(p: &DiffPoly, level: u32) -> (DiffPoly, DiffPoly) {
    let with = p.filter(|m, _| m.factors().iter().any(|(v, _)| v.level == level));
    let without = p.sub(&with);
    (with, without)
}

/// Sign of the group velocity from the `ε³` equation
/// `A ∂_{t1}²ϕ^(1) + B ∂κ²ϕ^(1) = 0`.
fn dispersion(eps3: &ExtPoly, c_sign: Sign) -> Result<RatFunc, PipelineError> {
    let tt = Monomial::var(ExtVar::phi(1).dt(1, 2));
    let xx = Monomial::var(ExtVar::phi(1).dx(2));
    let a = eps3.coeff(&tt);
    let b = eps3.coeff(&xx);
    if a.is_zero() || eps3.len() != 2 || b.is_zero() {
        return Err(PipelineError::BadShape(3, render_ext(eps3)));
    }
    let c2 = (-&b).try_div(&a).expect("nonzero");
    if c2.is_one() {
        return Ok(c_sign.as_ratfunc());
    }
    if (&c2 + &RatFunc::one()).is_zero() || c2.sign_near_zero() < 0 {
        return Err(PipelineError::ImaginarySpeed(c2.to_string()));
    }
    Err(PipelineError::IrrationalSpeed(c2.to_string()))
}

pub fn reduce(
    kind: ModelKind,
    max_order: u32,
    signs: SignParams,
) -> Result<ReducedSystem, PipelineError> {
    if ![5, 7, 9].contains(&max_order) {
        return Err(PipelineError::BadOrder(max_order));
    }
    let spec = madelung(kind);
    let sigma = signs.sigma();
    let ex = expand(&spec, &signs, max_order)?;
    let rel = eliminate_nu(&ex, &sigma)?;

    let r_nu = substitute_nu(ex.r_nu.poly(), &rel, max_order)?;
    if has_nu(&r_nu) {
        return Err(PipelineError::BadShape(
            max_order,
            "density levels remain".into(),
        ));
    }
    for w in r_nu.weights() {
        if w % 2 == 0 {
            return Err(PipelineError::OrderParity(w));
        }
    }
    if !r_nu.weight_component(1).is_zero() {
        return Err(PipelineError::BadShape(
            1,
            render_ext(&r_nu.weight_component(1)),
        ));
    }
    let c = dispersion(&r_nu.weight_component(3), signs.c_sign)?;
    let framed = to_frame(&r_nu, &c);
    if !framed.weight_component(3).is_zero() {
        return Err(PipelineError::FastWaveSource(3));
    }

    let mut resolver = Resolver::new();
    let mut stages = Vec::new();

    let mut stage = |order: u32, resolver: &mut Resolver| -> Result<DiffPoly, PipelineError> {
        let eq = framed.weight_component(order);
        let (alpha, rest, unknowns) = split_unknowns(&eq, order)?;
        let rest = resolver.resolve_poly(&rest)?;
        let k = (order - 1) / 2;
        if levels_present(&rest).contains(&k) {
            return Err(PipelineError::FastWaveSource(order));
        }
        let source = rest.scale(&(-&alpha.recip().expect("nonzero")));
        stages.push(StageRecord {
            order,
            alpha,
            unknowns,
            source: source.clone(),
        });
        Ok(source)
    };

    // ε⁵: ∂_{t2}ϕ^(1) = K_2.
    let q5 = stage(5, &mut resolver)?;
    let k2 = crate::diffalg::integrate_xi(&q5)?;
    let a = k2.coeff(&mono(&[(1, 3, 1)]));
    let e = k2.coeff(&mono(&[(1, 1, 2)]));
    if k2.len() != 2 || a.is_zero() {
        return Err(PipelineError::UnremovableSecularity(5, render(&k2)));
    }
    let kdv = KdvParams::new(a, e)?;
    let mut flows = FlowTable::new(kdv.clone());
    resolver.insert(2, 1, k2.clone());

    let mut phi2_rhs = None;
    let mut f2 = None;
    let mut f3 = None;
    let mut g2 = None;

    if max_order >= 7 {
        let q7 = stage(7, &mut resolver)?;
        let s = crate::diffalg::integrate_xi(&q7)?;
        let (s2, r6) = split_by_level(&s, 2);
        let lin2 = frechet(&k2, 1).apply_to_field(2)?;
        if s2 != lin2 {
            return Err(PipelineError::UnremovableSecularity(
                7,
                format!("level-2 part {} is not the linearized flow", render(&s2)),
            ));
        }
        let b3 = r6.coeff(&mono(&[(1, 5, 1)]));
        let k3 = flows.insert(3, b3)?.clone();
        let forcing = r6.sub(&k3);
        resolver.insert(3, 1, k3.clone());
        resolver.insert(2, 2, lin2.add(&forcing));
        phi2_rhs = Some(r6);
        f2 = Some(forcing);
    }

    if max_order >= 9 {
        let f2v = f2.clone().expect("set at order 7");
        let sol = compat::solve_f3(&flows, &f2v)?;
        let f3v = sol.f3;
        let k3 = flows.flow(3).expect("set").clone();
        let lin3 = frechet(&k3, 1).apply_to_field(2)?;
        resolver.insert(3, 2, lin3.add(&f3v));
        let q9 = stage(9, &mut resolver)?;
        let lin_k2_3 = frechet(&k2, 1).apply_to_field(3)?;
        let gfull = q9
            .sub(&derive_xi(&lin_k2_3))
            .sub(&derive_xi(&lin3.add(&f3v)));
        if levels_present(&gfull).contains(&3) {
            return Err(PipelineError::UnremovableSecularity(
                9,
                "level-3 terms beyond the linearized flow".into(),
            ));
        }
        let b4 = gfull.coeff(&mono(&[(1, 8, 1)]));
        let k4 = flows.insert(4, b4)?.clone();
        let g = gfull.sub(&derive_xi(&k4));
        let lin_phi2 = mono(&[(2, 6, 1)]);
        if !g.coeff(&lin_phi2).is_zero() {
            return Err(PipelineError::UnremovableSecularity(
                9,
                "linear term in the second level survives".into(),
            ));
        }
        f3 = Some(f3v);
        g2 = Some(g);
    }

    Ok(ReducedSystem {
        model: kind,
        signs,
        max_order,
        zeta_sq: zeta_squared(kind, &sigma),
        c,
        nu_relations: rel,
        kdv,
        flows,
        phi2_rhs,
        f2,
        f3,
        g2,
        stages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::parse_ratfunc;

    fn r(s: &str) -> RatFunc {
        parse_ratfunc(s).unwrap()
    }

    #[test]
    fn model_names() {
        assert_eq!("DNLS".parse::<ModelKind>().unwrap(), ModelKind::Dnls);
        assert_eq!(ModelKind::Al.to_string(), "al");
        assert!("xyz".parse::<ModelKind>().is_err());
    }

    #[test]
    fn background_is_a_solution() {
        for kind in [ModelKind::Dnls, ModelKind::Al] {
            let ex = expand(&madelung(kind), &SignParams::default(), 5).unwrap();
            assert!(ex.r_nu.coeff(0).is_zero());
            assert!(ex.r_phi.coeff(0).is_zero());
        }
    }

    #[test]
    fn eps2_relation() {
        let rs = reduce(ModelKind::Dnls, 5, SignParams::default()).unwrap();
        assert_eq!(
            rs.eps2_relation(),
            &ExtPoly::var(ExtVar::phi(1).dt(1, 1)).neg()
        );
        assert_eq!(
            render_relation(1, rs.eps2_relation()),
            "nu1 = (-1)*phi1_t1^1"
        );
    }

    #[test]
    fn dnls_order_five() {
        for (sign, a) in [(Sign::Plus, "(3-h^2)/24"), (Sign::Minus, "(h^2-3)/24")] {
            let rs = reduce(ModelKind::Dnls, 5, SignParams::with_c(sign)).unwrap();
            assert_eq!(rs.c, sign.as_ratfunc());
            assert_eq!(rs.a(), &r(a));
            assert_eq!(rs.kdv.e, r("-3/4"));
            assert_eq!(rs.stages[0].alpha, &rs.c * &RatFunc::from_int(2));
        }
    }

    #[test]
    fn defocusing_sign_is_rejected() {
        let signs = SignParams {
            sigma: Sign::Minus,
            c_sign: Sign::Plus,
        };
        assert!(matches!(
            reduce(ModelKind::Dnls, 5, signs),
            Err(PipelineError::ImaginarySpeed(_))
        ));
    }

    #[test]
    fn bad_order() {
        assert_eq!(
            reduce(ModelKind::Dnls, 4, SignParams::default()),
            Err(PipelineError::BadOrder(4))
        );
    }
}
