use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::hpoly::{render_int_poly, HPoly};
use super::{CoeffError, Rational};

/// Element of `Q(h)` in canonical form: coprime numerator and denominator,
/// monic denominator, zero stored as `0/1`.
///
/// Structural equality coincides with equality in the field.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RatFunc {
    num: HPoly,
    den: HPoly,
}

impl Default for RatFunc {
    fn default() -> Self {
        Self::zero()
    }
}

impl RatFunc {
    pub fn normalize(num: HPoly, den: HPoly) -> Result<Self, CoeffError> {
        if den.is_zero() {
            return Err(CoeffError::ZeroDenominator);
        }
        Ok(Self::normalize_unchecked(num, den))
    }

    fn normalize_unchecked(num: HPoly, den: HPoly) -> Self {
        if num.is_zero() {
            return Self::zero();
        }
        if den.is_constant() {
            let inv = den.coeff(0).recip();
            return RatFunc {
                num: num.scale(&inv),
                den: HPoly::one(),
            };
        }
        let g = HPoly::gcd(&num, &den);
        let (num, den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_rem(&g).0, den.div_rem(&g).0)
        };
        let lc_inv = den.leading().expect("nonzero denominator").recip();
        RatFunc {
            num: num.scale(&lc_inv),
            den: den.scale(&lc_inv),
        }
    }

    pub fn zero() -> Self {
        RatFunc {
            num: HPoly::zero(),
            den: HPoly::one(),
        }
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(c: i64) -> Self {
        Self::from_rational(Rational::from_integer(BigInt::from(c)))
    }

    pub fn frac(n: i64, d: i64) -> Self {
        Self::from_rational(Rational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_rational(c: Rational) -> Self {
        Self::from_poly(HPoly::constant(c))
    }

    pub fn from_poly(p: HPoly) -> Self {
        RatFunc {
            num: p,
            den: HPoly::one(),
        }
    }

    /// The generator `h`.
    pub fn h() -> Self {
        Self::from_poly(HPoly::h())
    }

    pub fn num(&self) -> &HPoly {
        &self.num
    }

    pub fn den(&self) -> &HPoly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_constant()
    }

    /// The rational value of a constant element.
    pub fn as_rational(&self) -> Option<Rational> {
        self.is_constant().then(|| self.num.coeff(0))
    }

    /// Total degree of numerator plus denominator; used as a pivot-size heuristic.
    pub fn complexity(&self) -> usize {
        self.num.degree().unwrap_or(0) + self.den.degree().unwrap_or(0)
    }

    pub fn recip(&self) -> Result<Self, CoeffError> {
        if self.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        Ok(Self::normalize_unchecked(
            self.den.clone(),
            self.num.clone(),
        ))
    }

    pub fn try_div(&self, rhs: &RatFunc) -> Result<Self, CoeffError> {
        if rhs.is_zero() {
            return Err(CoeffError::DivisionByZero);
        }
        Ok(Self::normalize_unchecked(
            &self.num * &rhs.den,
            &self.den * &rhs.num,
        ))
    }

    pub fn pow(&self, e: i32) -> Result<Self, CoeffError> {
        if e >= 0 {
            Ok(RatFunc {
                num: self.num.pow(e as u32),
                den: self.den.pow(e as u32),
            })
        } else {
            self.recip()?.pow(-e)
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        RatFunc {
            num: self.num.scale(c),
            den: self.den.clone(),
        }
    }

    pub fn eval_at(&self, h0: &Rational) -> Result<Rational, CoeffError> {
        let d = self.den.eval(h0);
        if d.is_zero() {
            return Err(CoeffError::PoleAtPoint);
        }
        Ok(self.num.eval(h0) / d)
    }

    /// Splits into integer numerator and denominator coefficient lists with
    /// no common integer content and a positive leading denominator coefficient.
    pub fn integer_parts(&self) -> (Vec<BigInt>, Vec<BigInt>) {
        let (cn, pn) = self.num.integer_primitive();
        let (cd, pd) = self.den.integer_primitive();
        let q = cn / cd;
        let num = pn.iter().map(|c| c * q.numer()).collect();
        let den = pd.iter().map(|c| c * q.denom()).collect();
        (num, den)
    }

    /// The sign of the value near `h = 0` via the lowest nonvanishing
    /// coefficients of numerator and denominator.
    pub fn sign_near_zero(&self) -> i32 {
        let lowest = |p: &HPoly| {
            p.coeffs()
                .iter()
                .find(|c| !c.is_zero())
                .map(|c| if c.is_negative() { -1 } else { 1 })
                .unwrap_or(0)
        };
        lowest(&self.num) * lowest(&self.den)
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let (num, den) = self.integer_parts();
        let terms = |c: &[BigInt]| c.iter().filter(|x| !x.is_zero()).count();
        let num_s = render_int_poly(&num, "h");
        let den_trivial = den.len() == 1 && den[0].is_one();
        if den_trivial {
            return write!(f, "{num_s}");
        }
        let den_s = render_int_poly(&den, "h");
        let wrap = |s: String, n: usize, lead_sign: bool| {
            if n > 1 || lead_sign {
                format!("({s})")
            } else {
                s
            }
        };
        let num_terms = terms(&num);
        let den_terms = terms(&den);
        let den_needs = den_terms > 1 || den_s.contains('*');
        write!(
            f,
            "{}/{}",
            wrap(num_s, num_terms, false),
            wrap(den_s.clone(), den_terms, den_needs),
        )
    }
}

impl<'a> Add<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn add(self, rhs: &RatFunc) -> RatFunc {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den == rhs.den {
            let num = &self.num + &rhs.num;
            if self.den.is_one() {
                return RatFunc::from_poly(num);
            }
            return RatFunc::normalize_unchecked(num, self.den.clone());
        }
        RatFunc::normalize_unchecked(
            &(&self.num * &rhs.den) + &(&rhs.num * &self.den),
            &self.den * &rhs.den,
        )
    }
}

impl AddAssign<&RatFunc> for RatFunc {
    fn add_assign(&mut self, rhs: &RatFunc) {
        *self = &*self + rhs;
    }
}

impl<'a> Sub<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn sub(self, rhs: &RatFunc) -> RatFunc {
        self + &(-rhs)
    }
}

impl<'a> Mul<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn mul(self, rhs: &RatFunc) -> RatFunc {
        if self.is_zero() || rhs.is_zero() {
            return RatFunc::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return RatFunc::from_poly(&self.num * &rhs.num);
        }
        if rhs.is_constant() {
            return self.scale(&rhs.num.coeff(0));
        }
        if self.is_constant() {
            return rhs.scale(&self.num.coeff(0));
        }
        RatFunc::normalize_unchecked(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

/// Panics on division by zero; use [`RatFunc::try_div`] for a checked variant.
impl<'a> Div<&'a RatFunc> for &'a RatFunc {
    type Output = RatFunc;
    fn div(self, rhs: &RatFunc) -> RatFunc {
        self.try_div(rhs).expect("division by zero in Q(h)")
    }
}

impl Neg for &RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        RatFunc {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<RatFunc> for RatFunc {
            type Output = RatFunc;
            fn $m(self, rhs: RatFunc) -> RatFunc {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a RatFunc> for RatFunc {
            type Output = RatFunc;
            fn $m(self, rhs: &RatFunc) -> RatFunc {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for RatFunc {
    type Output = RatFunc;
    fn neg(self) -> RatFunc {
        -&self
    }
}

impl Zero for RatFunc {
    fn zero() -> Self {
        RatFunc::zero()
    }
    fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
}

impl One for RatFunc {
    fn one() -> Self {
        RatFunc::one()
    }
}
