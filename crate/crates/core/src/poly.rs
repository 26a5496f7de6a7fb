//! Sparse commutative polynomials over `Q(h)` in an ordered set of graded
//! variables. Both the jet algebra and the ε-series workspace are built on it.

use std::cmp::Ordering;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Debug;
use std::hash::Hash;

use crate::coeff::{RatFunc, Rational};

/// A polynomial variable with an additive weight (jet degree, ε-power, ...).
pub trait Variable: Clone + Ord + Hash + Debug {
    fn weight(&self) -> u32;
}

/// Product of variables with positive exponents, factors sorted by the
/// variable order. Monomials compare by total weight, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial<V> {
    factors: Vec<(V, u32)>,
    weight: u32,
}

impl<V: Variable> Monomial<V> {
    pub fn one() -> Self {
        Monomial {
            factors: Vec::new(),
            weight: 0,
        }
    }

    pub fn var(v: V) -> Self {
        Self::from_factors(vec![(v, 1)])
    }

    pub fn from_factors(mut factors: Vec<(V, u32)>) -> Self {
        factors.retain(|(_, e)| *e > 0);
        factors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(V, u32)> = Vec::with_capacity(factors.len());
        for (v, e) in factors {
            match merged.last_mut() {
                Some((w, f)) if *w == v => *f += e,
                _ => merged.push((v, e)),
            }
        }
        let weight = merged.iter().map(|(v, e)| v.weight() * e).sum();
        Monomial {
            factors: merged,
            weight,
        }
    }

    pub fn factors(&self) -> &[(V, u32)] {
        &self.factors
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    pub fn is_one(&self) -> bool {
        self.factors.is_empty()
    }

    /// Total number of factors counted with multiplicity.
    pub fn total_degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    /// `Some(v)` when the monomial is a single variable to the first power.
    pub fn as_var(&self) -> Option<&V> {
        match self.factors.as_slice() {
            [(v, 1)] => Some(v),
            _ => None,
        }
    }

    pub fn exponent(&self, v: &V) -> u32 {
        self.factors
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.factors[i].1)
            .unwrap_or(0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Vec::with_capacity(self.factors.len() + other.factors.len());
        let (mut i, mut j) = (0, 0);
        while i < self.factors.len() && j < other.factors.len() {
            match self.factors[i].0.cmp(&other.factors[j].0) {
                Ordering::Less => {
                    out.push(self.factors[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.factors[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((
                        self.factors[i].0.clone(),
                        self.factors[i].1 + other.factors[j].1,
                    ));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.factors[i..]);
        out.extend_from_slice(&other.factors[j..]);
        Monomial {
            factors: out,
            weight: self.weight + other.weight,
        }
    }

    /// Divides out one power of the factor at `index`.
    fn without_one(&self, index: usize) -> Self {
        let mut factors = self.factors.clone();
        let (v, e) = &mut factors[index];
        let w = v.weight();
        if *e == 1 {
            factors.remove(index);
        } else {
            *e -= 1;
        }
        Monomial {
            factors,
            weight: self.weight - w,
        }
    }
}

impl<V: Variable> PartialOrd for Monomial<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<V: Variable> Ord for Monomial<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .cmp(&other.weight)
            .then_with(|| self.factors.cmp(&other.factors))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Poly<V: Variable> {
    terms: BTreeMap<Monomial<V>, RatFunc>,
}

impl<V: Variable> Default for Poly<V> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<V: Variable> Poly<V> {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(RatFunc::one())
    }

    pub fn constant(c: RatFunc) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(v: V) -> Self {
        Self::term(Monomial::var(v), RatFunc::one())
    }

    pub fn term(m: Monomial<V>, c: RatFunc) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial<V>, &RatFunc)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial<V>, RatFunc)> {
        self.terms.into_iter()
    }

    pub fn coeff(&self, m: &Monomial<V>) -> RatFunc {
        self.terms.get(m).cloned().unwrap_or_else(RatFunc::zero)
    }

    pub fn coeff_of_var(&self, v: &V) -> RatFunc {
        self.coeff(&Monomial::var(v.clone()))
    }

    pub fn constant_term(&self) -> RatFunc {
        self.coeff(&Monomial::one())
    }

    pub fn add_term(&mut self, m: Monomial<V>, c: RatFunc) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                let sum = e.get() + &c;
                if sum.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = sum;
                }
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (m, c) in &other.terms {
            self.add_term(m.clone(), c.clone());
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), -c);
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&RatFunc::from_int(-1))
    }

    pub fn scale(&self, c: &RatFunc) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Poly {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn scale_rational(&self, c: &Rational) -> Self {
        self.scale(&RatFunc::from_rational(c.clone()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.mul_truncated(other, u32::MAX)
    }

    /// Product keeping only monomials of weight `<= max_weight`.
    pub fn mul_truncated(&self, other: &Self, max_weight: u32) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            if ma.weight > max_weight {
                break;
            }
            for (mb, cb) in &other.terms {
                if ma.weight + mb.weight > max_weight {
                    break;
                }
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn max_weight(&self) -> Option<u32> {
        self.terms.keys().next_back().map(|m| m.weight)
    }

    pub fn min_weight(&self) -> Option<u32> {
        self.terms.keys().next().map(|m| m.weight)
    }

    /// Keeps the terms satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Monomial<V>, &RatFunc) -> bool) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .filter(|(m, c)| keep(m, c))
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn weight_component(&self, w: u32) -> Self {
        self.filter(|m, _| m.weight == w)
    }

    pub fn truncate(&self, max_weight: u32) -> Self {
        self.filter(|m, _| m.weight <= max_weight)
    }

    /// Weights that occur, ascending.
    pub fn weights(&self) -> Vec<u32> {
        let mut w: Vec<u32> = self.terms.keys().map(|m| m.weight).collect();
        w.dedup();
        w
    }

    pub fn vars(&self) -> Vec<V> {
        let mut vs: Vec<V> = self
            .terms
            .keys()
            .flat_map(|m| m.factors.iter().map(|(v, _)| v.clone()))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Applies a derivation determined by its values on the variables:
    /// `D(p) = Σ ∂p/∂v · image(v)`.
    pub fn derive<E>(&self, mut image: impl FnMut(&V) -> Result<Self, E>) -> Result<Self, E> {
        let mut cache: BTreeMap<V, Self> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for (i, (v, e)) in m.factors.iter().enumerate() {
                let dv = match cache.get(v) {
                    Some(d) => d,
                    None => {
                        let d = image(v)?;
                        cache.entry(v.clone()).or_insert(d)
                    }
                };
                if dv.is_zero() {
                    continue;
                }
                let rest = m.without_one(i);
                let k = c.scale(&Rational::from_integer((*e).into()));
                for (dm, dc) in &dv.terms {
                    out.add_term(rest.mul(dm), &k * dc);
                }
            }
        }
        Ok(out)
    }

    /// Replaces variables by polynomials; variables mapped to `None` stay.
    pub fn substitute<E>(
        &self,
        mut image: impl FnMut(&V) -> Result<Option<Self>, E>,
    ) -> Result<Self, E> {
        let mut cache: BTreeMap<V, Option<Self>> = BTreeMap::new();
        let mut powers: BTreeMap<(V, u32), Self> = BTreeMap::new();
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let mut acc = Self::constant(c.clone());
            let mut kept: Vec<(V, u32)> = Vec::new();
            for (v, e) in &m.factors {
                if !cache.contains_key(v) {
                    let img = image(v)?;
                    cache.insert(v.clone(), img);
                }
                match &cache[v] {
                    None => kept.push((v.clone(), *e)),
                    Some(img) => {
                        let key = (v.clone(), *e);
                        let pw = powers.entry(key).or_insert_with(|| img.pow(*e));
                        acc = acc.mul(pw);
                    }
                }
            }
            let kept = Monomial::from_factors(kept);
            for (am, ac) in acc.terms {
                out.add_term(am.mul(&kept), ac);
            }
        }
        Ok(out)
    }

    /// Maps each variable to another variable with a coefficient, e.g. a
    /// change of frame `∂t1 → -c ∂ξ`. The map must be injective on the
    /// variables present for the result to stay canonical; collisions are
    /// merged correctly regardless.
    pub fn map_vars<W: Variable>(&self, mut f: impl FnMut(&V) -> (W, RatFunc)) -> Poly<W> {
        let mut out = Poly::zero();
        for (m, c) in &self.terms {
            let mut coeff = c.clone();
            let mut factors = Vec::with_capacity(m.factors.len());
            for (v, e) in &m.factors {
                let (w, k) = f(v);
                coeff = &coeff * &k.pow(*e as i32).expect("nonnegative power");
                factors.push((w, *e));
            }
            out.add_term(Monomial::from_factors(factors), coeff);
        }
        out
    }

    pub fn eval<E>(
        &self,
        mut coeff: impl FnMut(&RatFunc) -> Result<Rational, E>,
        mut value: impl FnMut(&V) -> Result<Rational, E>,
    ) -> Result<Rational, E> {
        let mut acc = Rational::from_integer(0.into());
        for (m, c) in &self.terms {
            let mut t = coeff(c)?;
            for (v, e) in &m.factors {
                let x = value(v)?;
                for _ in 0..*e {
                    t *= &x;
                }
            }
            acc += t;
        }
        Ok(acc)
    }
}
