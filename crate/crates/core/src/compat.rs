//! Compatibility of the slow-time evolutions of the higher phase levels.
//!
//! At ε⁷ the `ϕ^(2)` equations in `t_2` and `t_3` must commute:
//! `[∂t3 − K3']f2 = [∂t2 − K2']f3`. At ε⁹ the same holds for `φ^(3)` with the
//! derivative-picture flows: `[∂t3 − H3']g2 = [∂t2 − H2']g3`. Both are linear
//! systems for the unknown forcing of the `t_3` equation, with the known
//! forcing as a symbolic right-hand side.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeff::{RatFunc, SignParams};
use crate::diffalg::{
    derive_xi, evolutionary_derive, frechet, render, render_monomial, DiffAlgError, DiffMonomial,
    DiffPoly, LinDiffOp,
};
use crate::graded::{coords, BasisKind, GradedBasis, GradedError};
use crate::kdv::FlowTable;
use crate::linsolve::{LinSystem, Solution};
use crate::pipeline::{reduce, ModelKind, PipelineError, ReducedSystem};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompatError {
    #[error("reduction stage missing: {0}")]
    StageMissing(&'static str),
    #[error("the order ε⁷ compatibility condition fails")]
    Eps7Unsatisfied,
    #[error(transparent)]
    DiffAlg(#[from] DiffAlgError),
    #[error(transparent)]
    Graded(#[from] GradedError),
    #[error(transparent)]
    Pipeline(#[from] Box<PipelineError>),
}

impl From<PipelineError> for CompatError {
    fn from(e: PipelineError) -> Self {
        CompatError::Pipeline(Box::new(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Eps7,
    Eps9,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Eps7 => "eps7",
            Stage::Eps9 => "eps9",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "INTEGRABLE_CONSISTENT")]
    IntegrableConsistent,
    #[serde(rename = "OBSTRUCTED")]
    Obstructed,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::IntegrableConsistent => "INTEGRABLE_CONSISTENT",
            Verdict::Obstructed => "OBSTRUCTED",
        })
    }
}

/// The compatibility system with the known forcing left symbolic: one
/// right-hand-side column per coordinate of the known forcing.
#[derive(Debug, Clone)]
pub struct SymbolicSystem {
    pub unknowns: Arc<GradedBasis>,
    pub params: Arc<GradedBasis>,
    pub rows: Vec<DiffMonomial>,
    pub system: LinSystem,
    pub solution: Solution,
}

impl SymbolicSystem {
    /// Number of independent conditions on the known forcing.
    pub fn n_conditions(&self) -> usize {
        self.solution.constraints.len()
    }

    pub fn n_free(&self) -> usize {
        self.params.len() - self.n_conditions()
    }

    /// Evaluates every independent condition at concrete forcing coordinates.
    pub fn evaluate(&self, gamma: &[RatFunc]) -> Vec<RatFunc> {
        self.solution
            .constraints
            .iter()
            .map(|c| dot(c, gamma))
            .collect()
    }

    /// The unknown forcing for concrete coordinates of the known one.
    pub fn resolve(&self, gamma: &[RatFunc]) -> DiffPoly {
        let mut p = DiffPoly::zero();
        for (m, row) in self
            .unknowns
            .monomials()
            .iter()
            .zip(&self.solution.particular)
        {
            p.add_term(m.clone(), dot(row, gamma));
        }
        p
    }
}

fn dot(a: &[RatFunc], b: &[RatFunc]) -> RatFunc {
    a.iter()
        .zip(b)
        .fold(RatFunc::zero(), |acc, (x, y)| acc + x * y)
}

/// `[∂_t − L]` with the evolution of every level given by `flows`.
struct TimeOperator {
    flows: BTreeMap<u32, DiffPoly>,
    lin: LinDiffOp,
}

impl TimeOperator {
    fn apply(&self, f: &DiffPoly) -> Result<DiffPoly, DiffAlgError> {
        Ok(evolutionary_derive(f, &self.flows)?.sub(&self.lin.apply(f)))
    }
}

fn assemble(
    unknowns: Arc<GradedBasis>,
    params: Arc<GradedBasis>,
    lhs: &TimeOperator,
    rhs: &TimeOperator,
) -> Result<SymbolicSystem, DiffAlgError> {
    let one = |m: &DiffMonomial| DiffPoly::term(m.clone(), RatFunc::one());
    let cols: Vec<DiffPoly> = unknowns
        .monomials()
        .iter()
        .map(|m| lhs.apply(&one(m)))
        .collect::<Result<_, _>>()?;
    let pcols: Vec<DiffPoly> = params
        .monomials()
        .iter()
        .map(|m| rhs.apply(&one(m)))
        .collect::<Result<_, _>>()?;
    let mut index: BTreeMap<DiffMonomial, usize> = BTreeMap::new();
    for p in cols.iter().chain(&pcols) {
        for (m, _) in p.terms() {
            index.entry(m.clone()).or_insert(0);
        }
    }
    for (i, v) in index.values_mut().enumerate() {
        *v = i;
    }
    let n_rows = index.len();
    let mut matrix = vec![vec![RatFunc::zero(); cols.len()]; n_rows];
    let mut b = vec![vec![RatFunc::zero(); pcols.len()]; n_rows];
    for (j, p) in cols.iter().enumerate() {
        for (m, c) in p.terms() {
            matrix[index[m]][j] = c.clone();
        }
    }
    for (j, p) in pcols.iter().enumerate() {
        for (m, c) in p.terms() {
            b[index[m]][j] = c.clone();
        }
    }
    let rows: Vec<DiffMonomial> = index.keys().cloned().collect();
    let system = LinSystem::new(matrix, b).with_labels(
        unknowns.monomials().iter().map(render_monomial).collect(),
        rows.iter().map(render_monomial).collect(),
    );
    let solution = system.solve();
    Ok(SymbolicSystem {
        unknowns,
        params,
        rows,
        system,
        solution,
    })
}

fn flow(flows: &FlowTable, m: u32) -> Result<&DiffPoly, CompatError> {
    flows
        .flow(m)
        .ok_or(CompatError::StageMissing("slow-time flow"))
}

/// The ε⁷ system `[∂t2 − K2'] f3 = [∂t3 − K3'] f2` over the given basis of
/// `P_8^(1)` for `f3` and the product basis of `P_6^(1)` for `f2`.
pub fn eps7_system(flows: &FlowTable, kind: BasisKind) -> Result<SymbolicSystem, CompatError> {
    let op = |m: u32| -> Result<TimeOperator, CompatError> {
        let k = flow(flows, m)?;
        Ok(TimeOperator {
            flows: BTreeMap::from([(1, k.clone())]),
            lin: frechet(k, 1),
        })
    };
    Ok(assemble(
        Arc::new(GradedBasis::with_kind(8, 1, kind)),
        Arc::new(GradedBasis::products(6, 1)),
        &op(2)?,
        &op(3)?,
    )?)
}

/// The ε⁹ system `[∂t2 − H2'] g3 = [∂t3 − H3'] g2` over the given basis of
/// `P_11^(2)` for `g3` and the product basis of `P_9^(2)` for `g2`.
pub fn eps9_system(
    flows: &FlowTable,
    f2: &DiffPoly,
    f3: &DiffPoly,
    kind: BasisKind,
) -> Result<SymbolicSystem, CompatError> {
    let op = |m: u32, f: &DiffPoly| -> Result<TimeOperator, CompatError> {
        let k = flow(flows, m)?;
        let lin = frechet(k, 1);
        let level2 = lin.apply_to_field(2)?.add(f);
        Ok(TimeOperator {
            flows: BTreeMap::from([(1, k.clone()), (2, level2)]),
            lin: frechet(&derive_xi(k), 1).lowered()?,
        })
    };
    Ok(assemble(
        Arc::new(GradedBasis::with_kind(11, 2, kind)),
        Arc::new(GradedBasis::products(9, 2)),
        &op(2, f2)?,
        &op(3, f3)?,
    )?)
}

#[derive(Debug, Clone)]
pub struct Eps7Solution {
    pub f3: DiffPoly,
    pub system: SymbolicSystem,
    pub values: Vec<RatFunc>,
}

/// Solves the ε⁷ condition for `f3` at the given `f2`. The `t_3` forcing is
/// taken without a linear term: any such term is a multiple of `K_4` and is
/// absorbed by `b_4`.
pub fn solve_f3(flows: &FlowTable, f2: &DiffPoly) -> Result<Eps7Solution, CompatError> {
    let system = eps7_system(flows, BasisKind::Products)?;
    let gamma = coords(f2, &system.params)?;
    let values = system.evaluate(gamma.entries());
    if values.iter().any(|v| !v.is_zero()) {
        return Err(CompatError::Eps7Unsatisfied);
    }
    let f3 = system.resolve(gamma.entries());
    Ok(Eps7Solution { f3, system, values })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub model: ModelKind,
    pub stage: Stage,
    pub n_unknowns: usize,
    pub n_equations: usize,
    pub rank: usize,
    /// Coordinates of the known forcing treated symbolically.
    pub n_params: usize,
    /// Inconsistency rows before removing dependent ones.
    pub raw_conditions: usize,
    /// Independent conditions on the known forcing.
    pub n_conditions: usize,
    /// Forcing coordinates left free by the conditions.
    pub n_free: usize,
    /// Each independent condition as a linear form over the forcing
    /// monomials, rendered `coeff*monomial`.
    pub conditions: Vec<String>,
    /// The conditions evaluated at the model's forcing.
    pub constraints: Vec<String>,
    pub satisfied: bool,
    /// The `t_3` forcing, when consistent.
    pub resolved: Option<String>,
}

fn report(
    model: ModelKind,
    stage: Stage,
    sys: &SymbolicSystem,
    forcing: &DiffPoly,
) -> Result<ObstructionReport, CompatError> {
    let gamma = coords(forcing, &sys.params)?;
    let values = sys.evaluate(gamma.entries());
    let satisfied = values.iter().all(RatFunc::is_zero);
    let conditions = sys
        .solution
        .constraints
        .iter()
        .map(|form| {
            let mut p = DiffPoly::zero();
            for (m, c) in sys.params.monomials().iter().zip(form) {
                p.add_term(m.clone(), c.clone());
            }
            render(&p)
        })
        .collect();
    Ok(ObstructionReport {
        model,
        stage,
        n_unknowns: sys.system.n_cols(),
        n_equations: sys.system.n_rows(),
        rank: sys.solution.rank,
        n_params: sys.params.len(),
        raw_conditions: sys.solution.residual_rows.len(),
        n_conditions: sys.n_conditions(),
        n_free: sys.n_free(),
        conditions,
        constraints: values.iter().map(|v| v.to_string()).collect(),
        satisfied,
        resolved: satisfied.then(|| render(&sys.resolve(gamma.entries()))),
    })
}

pub fn check_eps7(rs: &ReducedSystem) -> Result<ObstructionReport, CompatError> {
    let f2 = rs
        .f2
        .as_ref()
        .ok_or(CompatError::StageMissing("order ε⁷ forcing"))?;
    let sys = eps7_system(&rs.flows, BasisKind::Products)?;
    report(rs.model, Stage::Eps7, &sys, f2)
}

pub fn check_eps9(
    rs: &ReducedSystem,
    eps7: &ObstructionReport,
) -> Result<ObstructionReport, CompatError> {
    if !eps7.satisfied {
        return Err(CompatError::Eps7Unsatisfied);
    }
    let missing = CompatError::StageMissing("order ε⁹ forcing");
    let (f2, f3, g2) = match (&rs.f2, &rs.f3, &rs.g2) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(missing),
    };
    let sys = eps9_system(&rs.flows, f2, f3, BasisKind::Products)?;
    report(rs.model, Stage::Eps9, &sys, g2)
}

#[derive(Debug, Clone)]
pub struct VerdictReport {
    pub reduced: ReducedSystem,
    pub reports: Vec<ObstructionReport>,
    pub verdict: Verdict,
}

pub fn verdict(
    model: ModelKind,
    max_order: u32,
    signs: SignParams,
) -> Result<VerdictReport, CompatError> {
    let reduced = reduce(model, max_order, signs)?;
    let mut reports = Vec::new();
    if max_order >= 7 {
        reports.push(check_eps7(&reduced)?);
    }
    if max_order >= 9 {
        let r9 = check_eps9(&reduced, &reports[0])?;
        reports.push(r9);
    }
    let verdict = if reports.iter().all(|r| r.satisfied) {
        Verdict::IntegrableConsistent
    } else {
        Verdict::Obstructed
    };
    Ok(VerdictReport {
        reduced,
        reports,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::parse_ratfunc;
    use crate::diffalg::parse;
    use crate::kdv::KdvParams;

    fn table() -> FlowTable {
        let a = parse_ratfunc("(3-h^2)/24").unwrap();
        let mut t = FlowTable::new(KdvParams::standard(a).unwrap());
        t.insert(3, parse_ratfunc("(15+30*h^2-h^4)/1920").unwrap())
            .unwrap();
        t.insert(
            4,
            parse_ratfunc("(315+525*h^2+273*h^4-h^6)/322560").unwrap(),
        )
        .unwrap();
        t
    }

    fn residual(t: &FlowTable, f2: &DiffPoly, f3: &DiffPoly) -> DiffPoly {
        let side = |m: u32, f: &DiffPoly| {
            let k = t.flow(m).unwrap();
            evolutionary_derive(f, &BTreeMap::from([(1, k.clone())]))
                .unwrap()
                .sub(&frechet(k, 1).apply(f))
        };
        side(2, f3).sub(&side(3, f2))
    }

    #[test]
    fn dimensions() {
        let t = table();
        let s7 = eps7_system(&t, BasisKind::Products).unwrap();
        assert_eq!((s7.unknowns.len(), s7.params.len()), (6, 3));
        assert_eq!(s7.solution.rank, 6);
        assert_eq!(s7.n_conditions(), 0);
        let raw = eps7_system(&t, BasisKind::Raw).unwrap();
        assert_eq!(raw.unknowns.len(), 7);
        assert_eq!(raw.solution.nullspace.len(), 1);
    }

    #[test]
    fn zero_forcing_gives_zero_f3() {
        let sol = solve_f3(&table(), &DiffPoly::zero()).unwrap();
        assert!(sol.f3.is_zero());
        assert!(sol.values.iter().all(RatFunc::is_zero));
    }

    #[test]
    fn f3_solves_the_condition_and_scales() {
        let t = table();
        let f2 = parse("D3[phi,1]*D1[phi,1]+(2/3-h)*D2[phi,1]^2+(1/(h+1))*D1[phi,1]^3").unwrap();
        let sol = solve_f3(&t, &f2).unwrap();
        assert!(residual(&t, &f2, &sol.f3).is_zero());
        let lam = parse_ratfunc("(h+2)/5").unwrap();
        let scaled = solve_f3(&t, &f2.scale(&lam)).unwrap();
        assert_eq!(scaled.f3, sol.f3.scale(&lam));
    }

    #[test]
    fn zero_forcings_pass_both_stages() {
        let t = table();
        let s9 = eps9_system(
            &t,
            &DiffPoly::zero(),
            &DiffPoly::zero(),
            BasisKind::Products,
        )
        .unwrap();
        assert_eq!((s9.unknowns.len(), s9.params.len()), (31, 14));
        let zeros = vec![RatFunc::zero(); s9.params.len()];
        assert!(s9.evaluate(&zeros).iter().all(RatFunc::is_zero));
        assert!(s9.resolve(&zeros).is_zero());
    }

    #[test]
    fn labels() {
        assert_eq!(Stage::Eps7.to_string(), "eps7");
        assert_eq!(Verdict::Obstructed.to_string(), "OBSTRUCTED");
        assert_eq!(
            Verdict::IntegrableConsistent.to_string(),
            "INTEGRABLE_CONSISTENT"
        );
    }
}
