//! Exact Gaussian elimination over `Q(h)`.
//!
//! The right-hand side is a matrix: column `p` holds the coefficients of the
//! `p`-th free parameter, so one elimination handles a symbolic right-hand
//! side that is linear in parameters. A concrete right-hand side is the
//! one-column case. Rows that reduce to `0 = r` are returned as data.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::coeff::{CoeffError, HPoly, RatFunc, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinSystem {
    pub matrix: Vec<Vec<RatFunc>>,
    pub rhs: Vec<Vec<RatFunc>>,
    pub col_labels: Vec<String>,
    pub row_labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Solution {
    pub rank: usize,
    pub pivot_cols: Vec<usize>,
    /// One row per unknown, one column per right-hand-side parameter; free
    /// unknowns are set to zero.
    pub particular: Vec<Vec<RatFunc>>,
    pub nullspace: Vec<Vec<RatFunc>>,
    /// Right-hand-side parts of the rows whose matrix part vanished, with
    /// content removed. Empty iff the system is consistent for every
    /// parameter value.
    pub residual_rows: Vec<Vec<RatFunc>>,
    /// A linearly independent, normalized subset spanning `residual_rows`.
    pub constraints: Vec<Vec<RatFunc>>,
    /// Left multipliers `y` with `y·A = 0` and `y·B = residual`, one per
    /// residual row, when requested.
    pub certificates: Option<Vec<Vec<RatFunc>>>,
}

impl Solution {
    pub fn is_consistent(&self) -> bool {
        self.residual_rows.is_empty()
    }
}

impl LinSystem {
    pub fn new(matrix: Vec<Vec<RatFunc>>, rhs: Vec<Vec<RatFunc>>) -> Self {
        let rows = matrix.len();
        let cols = matrix.first().map(Vec::len).unwrap_or(0);
        LinSystem {
            matrix,
            rhs,
            col_labels: (0..cols).map(|c| format!("x{c}")).collect(),
            row_labels: (0..rows).map(|r| format!("r{r}")).collect(),
        }
    }

    pub fn with_labels(mut self, cols: Vec<String>, rows: Vec<String>) -> Self {
        self.col_labels = cols;
        self.row_labels = rows;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.matrix.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn n_params(&self) -> usize {
        self.rhs.first().map(Vec::len).unwrap_or(0)
    }

    pub fn solve(&self) -> Solution {
        self.eliminate(false)
    }

    pub fn solve_with_certificates(&self) -> Solution {
        self.eliminate(true)
    }

    pub fn rank(&self) -> usize {
        let bare = LinSystem {
            rhs: vec![Vec::new(); self.n_rows()],
            ..self.clone()
        };
        bare.eliminate(false).rank
    }

    /// The system with `h` specialized to `h0`.
    pub fn specialize(&self, h0: &Rational) -> Result<LinSystem, CoeffError> {
        let spec = |rows: &Vec<Vec<RatFunc>>| -> Result<Vec<Vec<RatFunc>>, CoeffError> {
            rows.iter()
                .map(|r| {
                    r.iter()
                        .map(|x| x.eval_at(h0).map(RatFunc::from_rational))
                        .collect()
                })
                .collect()
        };
        Ok(LinSystem {
            matrix: spec(&self.matrix)?,
            rhs: spec(&self.rhs)?,
            col_labels: self.col_labels.clone(),
            row_labels: self.row_labels.clone(),
        })
    }

    fn eliminate(&self, certificates: bool) -> Solution {
        let m = self.n_rows();
        let n = self.n_cols();
        let p = self.n_params();
        let width = n + p + if certificates { m } else { 0 };
        let mut rows: Vec<Vec<RatFunc>> = (0..m)
            .map(|i| {
                let mut r = Vec::with_capacity(width);
                r.extend_from_slice(&self.matrix[i]);
                r.extend_from_slice(&self.rhs[i]);
                if certificates {
                    r.extend((0..m).map(|k| {
                        if k == i {
                            RatFunc::one()
                        } else {
                            RatFunc::zero()
                        }
                    }));
                }
                r
            })
            .collect();

        let pivot_cols = reduce(&mut rows, n);
        let rank = pivot_cols.len();

        let mut particular = vec![vec![RatFunc::zero(); p]; n];
        for (k, &c) in pivot_cols.iter().enumerate() {
            particular[c] = rows[k][n..n + p].to_vec();
        }
        let mut nullspace = Vec::new();
        for f in (0..n).filter(|c| !pivot_cols.contains(c)) {
            let mut v = vec![RatFunc::zero(); n];
            v[f] = RatFunc::one();
            for (k, &c) in pivot_cols.iter().enumerate() {
                v[c] = -&rows[k][f];
            }
            nullspace.push(v);
        }

        let mut residual_rows = Vec::new();
        let mut certs = Vec::new();
        for row in rows.iter().skip(rank) {
            let r = &row[n..n + p];
            if r.iter().all(RatFunc::is_zero) {
                continue;
            }
            residual_rows.push(normalize_form(r));
            if certificates {
                certs.push(row[n + p..].to_vec());
            }
        }
        let constraints = independent_forms(&residual_rows);
        Solution {
            rank,
            pivot_cols,
            particular,
            nullspace,
            residual_rows,
            constraints,
            certificates: certificates.then_some(certs),
        }
    }
}

/// In-place reduced row echelon form on the first `n` columns; returns the
/// pivot columns. Pivots are chosen by lowest numerator-plus-denominator
/// degree among the candidate rows.
fn reduce(rows: &mut [Vec<RatFunc>], n: usize) -> Vec<usize> {
    let m = rows.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..n {
        if r == m {
            break;
        }
        let best = (r..m)
            .filter(|&i| !rows[i][col].is_zero())
            .min_by_key(|&i| (rows[i][col].complexity(), i));
        let Some(best) = best else { continue };
        rows.swap(r, best);
        let inv = rows[r][col].recip().expect("nonzero pivot");
        for x in rows[r].iter_mut() {
            if !x.is_zero() {
                *x = &*x * &inv;
            }
        }
        let pivot_row = rows[r].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == r || row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (x, y) in row.iter_mut().zip(&pivot_row) {
                if !y.is_zero() {
                    *x = &*x - &(&factor * y);
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

// Greedy subset of `forms` that is linearly independent, in input order.
fn independent_forms(forms: &[Vec<RatFunc>]) -> Vec<Vec<RatFunc>> {
    let Some(p) = forms.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut kept: Vec<Vec<RatFunc>> = Vec::new();
    for f in forms {
        let mut trial = kept.clone();
        trial.push(f.clone());
        if reduce(&mut trial, p).len() > kept.len() {
            kept.push(f.clone());
        }
    }
    kept
}

/// Scales a linear form so that its entries are polynomials in `h` whose
/// integer coefficients are jointly coprime and the first nonzero entry has a positive
/// leading coefficient.
pub fn normalize_form(form: &[RatFunc]) -> Vec<RatFunc> {
    let Some(first) = form.iter().position(|x| !x.is_zero()) else {
        return form.to_vec();
    };
    let mut lcm = HPoly::one();
    for x in form.iter().filter(|x| !x.is_zero()) {
        let g = HPoly::gcd(&lcm, x.den());
        lcm = (&lcm * x.den()).div_rem(&g).0.monic();
    }
    let nums: Vec<HPoly> = form
        .iter()
        .map(|x| {
            if x.is_zero() {
                HPoly::zero()
            } else {
                x.num() * &lcm.div_rem(x.den()).0
            }
        })
        .collect();
    let mut den_lcm = BigInt::one();
    let mut num_gcd = BigInt::zero();
    for x in &nums {
        for c in x.coeffs() {
            den_lcm = den_lcm.lcm(c.denom());
        }
    }
    let scaled: Vec<Vec<BigInt>> = nums
        .iter()
        .map(|x| {
            x.coeffs()
                .iter()
                .map(|c| (c * Rational::from_integer(den_lcm.clone())).to_integer())
                .collect()
        })
        .collect();
    for c in scaled.iter().flatten() {
        num_gcd = num_gcd.gcd(c);
    }
    let lead_negative = scaled[first].last().is_some_and(|c| c.is_negative());
    if lead_negative {
        num_gcd = -num_gcd;
    }
    scaled
        .into_iter()
        .map(|c| {
            RatFunc::from_poly(HPoly::from_coeffs(
                c.into_iter()
                    .map(|x| Rational::from_integer(x / &num_gcd))
                    .collect(),
            ))
        })
        .collect()
}

pub fn solve(sys: &LinSystem) -> Solution {
    sys.solve()
}

pub fn rank(sys: &LinSystem) -> usize {
    sys.rank()
}
