use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use super::Rational;

/// Dense univariate polynomial over `Q`, index = power of the variable.
///
/// The coefficient vector is always trimmed: the last entry is nonzero unless
/// the polynomial is zero, in which case the vector is empty.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct HPoly {
    coeffs: Vec<Rational>,
}

impl HPoly {
    pub fn zero() -> Self {
        HPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn from_int(c: i64) -> Self {
        Self::constant(Rational::from_integer(BigInt::from(c)))
    }

    /// The variable itself.
    pub fn h() -> Self {
        Self::monomial(Rational::one(), 1)
    }

    pub fn monomial(c: Rational, power: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); power + 1];
        coeffs[power] = c;
        Self::from_coeffs(coeffs)
    }

    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        HPoly { coeffs }
    }

    /// Builds from small integer coefficients, lowest power first.
    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::from_coeffs(
            coeffs
                .iter()
                .map(|&c| Rational::from_integer(BigInt::from(c)))
                .collect(),
        )
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, power: usize) -> Rational {
        self.coeffs
            .get(power)
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn leading(&self) -> Option<&Rational> {
        self.coeffs.last()
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        HPoly {
            coeffs: self.coeffs.iter().map(|x| x * c).collect(),
        }
    }

    pub fn monic(&self) -> Self {
        match self.leading() {
            None => Self::zero(),
            Some(lc) => self.scale(&lc.recip()),
        }
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn pow(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Euclidean division. Panics on a zero divisor.
    pub fn div_rem(&self, divisor: &HPoly) -> (HPoly, HPoly) {
        let dd = divisor.degree().expect("polynomial division by zero");
        let lc_inv = divisor.coeffs[dd].recip();
        let mut rem = self.coeffs.clone();
        if rem.len() <= dd {
            return (HPoly::zero(), self.clone());
        }
        let mut quot = vec![Rational::zero(); rem.len() - dd];
        for i in (0..quot.len()).rev() {
            let q = &rem[i + dd] * &lc_inv;
            if q.is_zero() {
                continue;
            }
            for (j, dc) in divisor.coeffs.iter().enumerate() {
                rem[i + j] -= &q * dc;
            }
            quot[i] = q;
        }
        rem.truncate(dd);
        (HPoly::from_coeffs(quot), HPoly::from_coeffs(rem))
    }

    /// Monic greatest common divisor; `gcd(0, 0) = 0`.
    pub fn gcd(a: &HPoly, b: &HPoly) -> HPoly {
        let mut x = a.monic();
        let mut y = b.monic();
        while !y.is_zero() {
            let (_, r) = x.div_rem(&y);
            x = y;
            y = r.monic();
        }
        x
    }

    /// Returns `(content, primitive)` where `primitive` has coprime integer
    /// coefficients and a positive leading coefficient, and
    /// `self = content * primitive`.
    pub fn integer_primitive(&self) -> (Rational, Vec<BigInt>) {
        if self.is_zero() {
            return (Rational::zero(), Vec::new());
        }
        let lcm = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = self
            .coeffs
            .iter()
            .map(|c| (c * Rational::from_integer(lcm.clone())).to_integer())
            .collect();
        let mut g = ints.iter().fold(BigInt::zero(), |acc, c| acc.gcd(c));
        if ints.last().is_some_and(|c| c.is_negative()) {
            g = -g;
        }
        let prim = ints.iter().map(|c| c / &g).collect();
        (Rational::new(g, lcm), prim)
    }
}

/// Renders an integer polynomial in descending powers of `var`,
/// e.g. `-5*h^2+7`.
pub(crate) fn render_int_poly(coeffs: &[BigInt], var: &str) -> String {
    let mut out = String::new();
    for (power, c) in coeffs.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let neg = c.is_negative();
        let mag = c.abs();
        if neg {
            out.push('-');
        } else if !out.is_empty() {
            out.push('+');
        }
        match power {
            0 => out.push_str(&mag.to_string()),
            _ => {
                if !mag.is_one() {
                    out.push_str(&mag.to_string());
                    out.push('*');
                }
                out.push_str(var);
                if power > 1 {
                    out.push('^');
                    out.push_str(&power.to_string());
                }
            }
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

impl fmt::Display for HPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (content, prim) = self.integer_primitive();
        if self.is_zero() {
            return write!(f, "0");
        }
        write!(f, "({})*({})", content, render_int_poly(&prim, "h"))
    }
}

impl<'a> Add<&'a HPoly> for &'a HPoly {
    type Output = HPoly;
    fn add(self, rhs: &HPoly) -> HPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect();
        HPoly::from_coeffs(coeffs)
    }
}

impl<'a> Sub<&'a HPoly> for &'a HPoly {
    type Output = HPoly;
    fn sub(self, rhs: &HPoly) -> HPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect();
        HPoly::from_coeffs(coeffs)
    }
}

impl<'a> Mul<&'a HPoly> for &'a HPoly {
    type Output = HPoly;
    fn mul(self, rhs: &HPoly) -> HPoly {
        if self.is_zero() || rhs.is_zero() {
            return HPoly::zero();
        }
        let mut coeffs = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        HPoly::from_coeffs(coeffs)
    }
}

impl Neg for &HPoly {
    type Output = HPoly;
    fn neg(self) -> HPoly {
        HPoly {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}
