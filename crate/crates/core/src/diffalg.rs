//! Differential polynomial algebra in the jets `∂ξ^ℓ ϕ^(j)`, `ℓ ≥ 1`.
//!
//! Provides the total ξ-derivative, exact antiderivatives decided by linear
//! algebra on the graded pieces, Fréchet linearizations and evolutionary
//! (prolonged) derivations, plus the textual grammar
//! `(coeff)*D3[phi,1]+(-3/4)*D1[phi,1]^2`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::coeff::{parse_ratfunc, RatFunc, Rational};
use crate::graded::GradedBasis;
use crate::linsolve::LinSystem;
use crate::poly::{Monomial, Poly, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DiffAlgError {
    #[error("not a total ξ-derivative (degree {degree} component)")]
    NotExact { degree: u32 },
    #[error("no flow supplied for level {0}")]
    MissingFlow(u32),
    #[error("operator of order 0 cannot act on a bare field")]
    ZeroOrderOnField,
    #[error("parse error: {0}")]
    Parse(String),
}

/// The jet `∂ξ^order ϕ^(level)`, graded by `order + 2·level − 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct JetVar {
    pub level: u32,
    pub order: u32,
}

impl JetVar {
    pub fn new(level: u32, order: u32) -> Self {
        JetVar { level, order }
    }

    pub fn shifted(self, by: u32) -> Self {
        JetVar {
            order: self.order + by,
            ..self
        }
    }
}

impl Variable for JetVar {
    fn weight(&self) -> u32 {
        self.order + 2 * self.level - 1
    }
}

// Canonical factor order: level descending, then order descending.
impl Ord for JetVar {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .level
            .cmp(&self.level)
            .then_with(|| other.order.cmp(&self.order))
    }
}

impl PartialOrd for JetVar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for JetVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "D{}[phi,{}]", self.order, self.level)
    }
}

pub type DiffMonomial = Monomial<JetVar>;
pub type DiffPoly = Poly<JetVar>;

/// `∂ξ^order ϕ^(level)` as a polynomial.
pub fn jet(level: u32, order: u32) -> DiffPoly {
    DiffPoly::var(JetVar::new(level, order))
}

pub fn mono(factors: &[(u32, u32, u32)]) -> DiffMonomial {
    Monomial::from_factors(
        factors
            .iter()
            .map(|&(level, order, e)| (JetVar::new(level, order), e))
            .collect(),
    )
}

pub fn derive_xi(p: &DiffPoly) -> DiffPoly {
    p.derive::<()>(|v| Ok(DiffPoly::var(v.shifted(1))))
        .expect("infallible")
}

pub fn derive_xi_n(p: &DiffPoly, n: u32) -> DiffPoly {
    (0..n).fold(p.clone(), |acc, _| derive_xi(&acc))
}

/// Highest field level present, 0 for constants.
pub fn max_level(p: &DiffPoly) -> u32 {
    p.vars().iter().map(|v| v.level).max().unwrap_or(0)
}

/// Antiderivative with zero integration constant, computed per homogeneous
/// component by solving `∂ξ q = p` over the raw basis one degree lower.
pub fn integrate_xi(p: &DiffPoly) -> Result<DiffPoly, DiffAlgError> {
    let mut out = DiffPoly::zero();
    for degree in p.weights() {
        let comp = p.weight_component(degree);
        if degree < 3 {
            return Err(DiffAlgError::NotExact { degree });
        }
        let basis = GradedBasis::new(degree - 1, max_level(&comp).max(1));
        let images: Vec<DiffPoly> = basis
            .monomials()
            .iter()
            .map(|m| derive_xi(&DiffPoly::term(m.clone(), RatFunc::one())))
            .collect();
        let mut rows: BTreeMap<DiffMonomial, usize> = BTreeMap::new();
        for img in images.iter().chain(std::iter::once(&comp)) {
            for (m, _) in img.terms() {
                let next = rows.len();
                rows.entry(m.clone()).or_insert(next);
            }
        }
        let mut matrix = vec![vec![RatFunc::zero(); images.len()]; rows.len()];
        for (col, img) in images.iter().enumerate() {
            for (m, c) in img.terms() {
                matrix[rows[m]][col] = c.clone();
            }
        }
        let mut rhs = vec![vec![RatFunc::zero()]; rows.len()];
        for (m, c) in comp.terms() {
            rhs[rows[m]][0] = c.clone();
        }
        let sol = LinSystem::new(matrix, rhs).solve();
        if !sol.residual_rows.is_empty() {
            return Err(DiffAlgError::NotExact { degree });
        }
        for (m, x) in basis.monomials().iter().zip(&sol.particular) {
            out.add_term(m.clone(), x[0].clone());
        }
    }
    Ok(out)
}

/// Linear differential operator `Σ_k coeff_k ∂ξ^k` with polynomial coefficients.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct LinDiffOp {
    terms: BTreeMap<u32, DiffPoly>,
}

impl LinDiffOp {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        Self::from_terms([(0, DiffPoly::one())])
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (u32, DiffPoly)>) -> Self {
        let mut op = Self::zero();
        for (k, c) in terms {
            op.add_term(k, &c);
        }
        op
    }

    pub fn add_term(&mut self, order: u32, coeff: &DiffPoly) {
        let e = self.terms.entry(order).or_default();
        e.add_assign(coeff);
        if e.is_zero() {
            self.terms.remove(&order);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, &DiffPoly)> {
        self.terms.iter().map(|(k, c)| (*k, c))
    }

    pub fn coeff(&self, order: u32) -> DiffPoly {
        self.terms.get(&order).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn apply(&self, v: &DiffPoly) -> DiffPoly {
        let mut out = DiffPoly::zero();
        let mut dv = v.clone();
        let mut current = 0;
        for (&k, c) in &self.terms {
            while current < k {
                dv = derive_xi(&dv);
                current += 1;
            }
            out.add_assign(&c.mul(&dv));
        }
        out
    }

    /// Applies the operator to the field `ϕ^(level)` itself, i.e. maps
    /// `∂ξ^k` to the jet `∂ξ^k ϕ^(level)`.
    pub fn apply_to_field(&self, level: u32) -> Result<DiffPoly, DiffAlgError> {
        let mut out = DiffPoly::zero();
        for (&k, c) in &self.terms {
            if k == 0 {
                return Err(DiffAlgError::ZeroOrderOnField);
            }
            out.add_assign(&c.mul(&jet(level, k)));
        }
        Ok(out)
    }

    /// The same operator seen in the potential-derivative picture
    /// `φ = ∂ξϕ`: every `∂ξ^k` becomes `∂ξ^(k−1)`.
    pub fn lowered(&self) -> Result<Self, DiffAlgError> {
        let mut op = Self::zero();
        for (&k, c) in &self.terms {
            if k == 0 {
                return Err(DiffAlgError::ZeroOrderOnField);
            }
            op.add_term(k - 1, c);
        }
        Ok(op)
    }
}

impl fmt::Display for LinDiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(k, c)| format!("[{}]*d^{}", render(c), k))
            .collect();
        write!(f, "{}", parts.join("+"))
    }
}

/// Fréchet derivative of `p` along the field `ϕ^(level)`.
pub fn frechet(p: &DiffPoly, level: u32) -> LinDiffOp {
    let mut op = LinDiffOp::zero();
    for (m, c) in p.terms() {
        for (i, (v, e)) in m.factors().iter().enumerate() {
            if v.level != level {
                continue;
            }
            let mut rest: Vec<(JetVar, u32)> = m.factors().to_vec();
            rest[i].1 -= 1;
            let coeff = DiffPoly::term(
                Monomial::from_factors(rest),
                c.scale(&Rational::from_integer((*e).into())),
            );
            op.add_term(v.order, &coeff);
        }
    }
    op
}

pub fn apply_op(op: &LinDiffOp, v: &DiffPoly) -> DiffPoly {
    op.apply(v)
}

/// Prolonged evolutionary derivation: every jet `∂ξ^ℓ ϕ^(j)` is mapped to
/// `∂ξ^ℓ flows[j]`.
pub fn evolutionary_derive(
    p: &DiffPoly,
    flows: &BTreeMap<u32, DiffPoly>,
) -> Result<DiffPoly, DiffAlgError> {
    let mut prolonged: BTreeMap<u32, Vec<DiffPoly>> = BTreeMap::new();
    p.derive(|v| {
        let flow = flows
            .get(&v.level)
            .ok_or(DiffAlgError::MissingFlow(v.level))?;
        let tower = prolonged
            .entry(v.level)
            .or_insert_with(|| vec![flow.clone()]);
        while tower.len() <= v.order as usize {
            let next = derive_xi(tower.last().expect("nonempty"));
            tower.push(next);
        }
        Ok(tower[v.order as usize].clone())
    })
}

fn render_term(m: &DiffMonomial, c: &RatFunc) -> String {
    let factors: Vec<String> = m
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
    match (m.is_one(), c.is_one()) {
        (true, _) => format!("({c})"),
        (false, true) => factors.join("*"),
        (false, false) => format!("({c})*{}", factors.join("*")),
    }
}

pub fn render_monomial(m: &DiffMonomial) -> String {
    render_term(m, &RatFunc::one())
}

/// Canonical text form; `0` for the zero polynomial.
pub fn render(p: &DiffPoly) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    p.terms()
        .map(|(m, c)| render_term(m, c))
        .collect::<Vec<_>>()
        .join("+")
}

pub fn parse(input: &str) -> Result<DiffPoly, DiffAlgError> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s == "0" {
        return Ok(DiffPoly::zero());
    }
    let err = |m: &str| DiffAlgError::Parse(m.to_string());
    let chars: Vec<char> = s.chars().collect();
    let mut out = DiffPoly::zero();
    let mut i = 0;
    while i < chars.len() {
        let mut negative = false;
        if i > 0 || chars[i] == '+' || chars[i] == '-' {
            match chars[i] {
                '+' => {}
                '-' => negative = true,
                _ => return Err(err("expected '+' or '-' between terms")),
            }
            i += 1;
        }
        let start = i;
        let mut depth = 0i32;
        while i < chars.len() {
            match chars[i] {
                '(' | '[' => depth += 1,
                ')' | ']' => depth -= 1,
                '+' | '-' if depth == 0 => break,
                _ => {}
            }
            i += 1;
        }
        let (m, c) = parse_term(&chars[start..i])?;
        out.add_term(m, if negative { -c } else { c });
    }
    Ok(out)
}

fn parse_term(chars: &[char]) -> Result<(DiffMonomial, RatFunc), DiffAlgError> {
    let err = |m: &str| DiffAlgError::Parse(m.to_string());
    let mut i = 0;
    let mut coeff = RatFunc::one();
    if chars.first() == Some(&'(') {
        let mut depth = 0;
        let mut end = None;
        for (k, &ch) in chars.iter().enumerate() {
            match ch {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(k);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or_else(|| err("unbalanced parentheses"))?;
        let text: String = chars[1..end].iter().collect();
        coeff = parse_ratfunc(&text).map_err(|e| DiffAlgError::Parse(e.to_string()))?;
        i = end + 1;
        if i == chars.len() {
            return Ok((Monomial::one(), coeff));
        }
        if chars[i] != '*' {
            return Err(err("expected '*' after coefficient"));
        }
        i += 1;
    }
    let rest: String = chars[i..].iter().collect();
    if rest.is_empty() {
        return Err(err("empty term"));
    }
    let mut factors = Vec::new();
    for f in rest.split('*') {
        factors.push(parse_factor(f)?);
    }
    Ok((Monomial::from_factors(factors), coeff))
}

fn parse_factor(f: &str) -> Result<(JetVar, u32), DiffAlgError> {
    let err = || DiffAlgError::Parse(format!("bad factor {f:?}"));
    let body = f.strip_prefix('D').ok_or_else(err)?;
    let open = body.find('[').ok_or_else(err)?;
    let close = body.find(']').ok_or_else(err)?;
    let order: u32 = body[..open].parse().map_err(|_| err())?;
    let inner = &body[open + 1..close];
    let level: u32 = inner
        .strip_prefix("phi,")
        .ok_or_else(err)?
        .parse()
        .map_err(|_| err())?;
    let tail = &body[close + 1..];
    let exp = match tail.strip_prefix('^') {
        Some(e) => e.parse().map_err(|_| err())?,
        None if tail.is_empty() => 1,
        None => return Err(err()),
    };
    if level == 0 || order == 0 || exp == 0 {
        return Err(err());
    }
    Ok((JetVar::new(level, order), exp))
}
