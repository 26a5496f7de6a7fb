use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use multiscale_core::compat::{ObstructionReport, VerdictReport};
use multiscale_core::diffalg::render_monomial;
use multiscale_core::pipeline::{ModelKind, ReducedSystem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Term {
    pub monomial: String,
    pub coeff: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Obstruction {
    pub stage: String,
    pub n_unknowns: usize,
    pub rank: usize,
    pub constraints: Vec<String>,
    pub satisfied: bool,
}

impl From<&ObstructionReport> for Obstruction {
    fn from(r: &ObstructionReport) -> Self {
        Obstruction {
            stage: r.stage.to_string(),
            n_unknowns: r.n_unknowns,
            rank: r.rank,
            constraints: r.constraints.clone(),
            satisfied: r.satisfied,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub model: ModelKind,
    pub order: u32,
    pub c_sign: i64,
    pub a: String,
    pub b: BTreeMap<String, String>,
    /// Forcing of the newest level at the highest order reached.
    pub forcing: Vec<Term>,
    pub obstruction: Option<Obstruction>,
    pub verdict: Option<String>,
}

impl Report {
    pub fn from_reduction(rs: &ReducedSystem) -> Self {
        let b = rs
            .flows
            .indices()
            .filter_map(|m| rs.b(m).map(|v| (m.to_string(), v.to_string())))
            .collect();
        let forcing = rs
            .forcing(rs.max_order)
            .map(|p| {
                p.terms()
                    .map(|(m, c)| Term {
                        monomial: render_monomial(m),
                        coeff: c.to_string(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        Report {
            model: rs.model,
            order: rs.max_order,
            c_sign: rs.signs.c_sign.value(),
            a: rs.a().to_string(),
            b,
            forcing,
            obstruction: None,
            verdict: None,
        }
    }

    /// The obstruction shown is the first unsatisfied stage, or the last one.
    pub fn from_verdict(v: &VerdictReport) -> Self {
        let mut r = Self::from_reduction(&v.reduced);
        let shown = v.reports.iter().find(|s| !s.satisfied).or(v.reports.last());
        r.obstruction = shown.map(Obstruction::from);
        r.verdict = Some(v.verdict.to_string());
        r
    }
}
