//! Small dense matrices over the arbitrary-precision rationals.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> Rational {
    BigRational::from_integer(BigInt::from(v))
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Square matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatMatrix {
    n: usize,
    entries: Vec<Rational>,
}

impl RatMatrix {
    pub fn zeros(n: usize) -> Self {
        RatMatrix {
            n,
            entries: vec![Rational::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = Rational::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        RatMatrix { n, entries }
    }

    pub fn from_integers(rows: &[Vec<i64>]) -> Self {
        let n = rows.len();
        Self::from_fn(n, |i, j| int(rows[i][j]))
    }

    pub fn diagonal(d: &[Rational]) -> Self {
        let n = d.len();
        Self::from_fn(n, |i, j| if i == j { d[i].clone() } else { Rational::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].clone())
    }

    pub fn mul(&self, other: &RatMatrix) -> RatMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut acc = Rational::zero();
            for k in 0..n {
                if !self[(i, k)].is_zero() && !other[(k, j)].is_zero() {
                    acc += &self[(i, k)] * &other[(k, j)];
                }
            }
            acc
        })
    }

    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        assert_eq!(self.n, v.len());
        (0..self.n)
            .map(|i| {
                let mut acc = Rational::zero();
                for (j, vj) in v.iter().enumerate() {
                    acc += &self[(i, j)] * vj;
                }
                acc
            })
            .collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    /// Leading principal minors `det(M[..k, ..k])` for `k = 1..=n`, exact.
    pub fn leading_minors(&self) -> Vec<Rational> {
        (1..=self.n).map(|k| self.leading_block(k).determinant()).collect()
    }

    fn leading_block(&self, k: usize) -> RatMatrix {
        Self::from_fn(k, |i, j| self[(i, j)].clone())
    }

    /// Exact determinant by Gaussian elimination with row pivoting.
    pub fn determinant(&self) -> Rational {
        let n = self.n;
        let mut a = self.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let Some(piv) = (col..n).find(|&r| !a[(r, col)].is_zero()) else {
                return Rational::zero();
            };
            if piv != col {
                a.swap_rows(piv, col);
                det = -det;
            }
            let p = a[(col, col)].clone();
            det *= &p;
            for r in col + 1..n {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let factor = &a[(r, col)] / &p;
                for c in col..n {
                    let delta = &factor * &a[(col, c)];
                    a[(r, c)] -= delta;
                }
            }
        }
        det
    }

    /// Exact inverse by Gauss-Jordan; `None` when singular.
    pub fn inverse(&self) -> Option<RatMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = RatMatrix::identity(n);
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[(r, col)].is_zero())?;
            if piv != col {
                a.swap_rows(piv, col);
                inv.swap_rows(piv, col);
            }
            let p = a[(col, col)].clone();
            for c in 0..n {
                a[(col, c)] /= &p;
                inv[(col, c)] /= &p;
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let factor = a[(r, col)].clone();
                for c in 0..n {
                    let da = &factor * &a[(col, c)];
                    a[(r, c)] -= da;
                    let di = &factor * &inv[(col, c)];
                    inv[(r, c)] -= di;
                }
            }
        }
        Some(inv)
    }

    fn swap_rows(&mut self, r1: usize, r2: usize) {
        let n = self.n;
        for c in 0..n {
            self.entries.swap(r1 * n + c, r2 * n + c);
        }
    }

    pub fn all_positive(&self) -> bool {
        self.entries.iter().all(|x| x.is_positive())
    }

    pub fn min_entry(&self) -> Rational {
        self.entries
            .iter()
            .min()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        (0..self.n)
            .map(|i| {
                let mut acc = Rational::zero();
                for j in 0..self.n {
                    acc += &self[(i, j)];
                }
                acc
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| to_f64(&self[(i, j)])).collect())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for RatMatrix {
    type Output = Rational;
    fn index(&self, (i, j): (usize, usize)) -> &Rational {
        &self.entries[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RatMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Rational {
        &mut self.entries[i * self.n + j]
    }
}

impl fmt::Display for RatMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

pub fn fmt_vec(v: &[Rational]) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}
