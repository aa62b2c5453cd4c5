//! Cartan data `(K, P, S, R, A, Q)` in exact rational arithmetic.
//!
//! `K^τ = P S` with `P` positive diagonal (normalized so `P_1 = 1` on each
//! connected component) and `S` symmetric. Validation is by certificate:
//! exact leading minors for positive definiteness, entrywise positivity of
//! `S^{-1}`, positivity of the row sums `R`, and the identity `P^{-1} 1 = S R 1`.

mod catalog;
mod rational;

use std::collections::VecDeque;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

pub use catalog::{all_simple_types, cartan_matrix, AlgebraSpec, Family, IntMatrix};
pub use rational::{fmt_vec, int, rat, to_f64, RatMatrix, Rational};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CartanError {
    #[error("invalid simple type {family}{rank}")]
    InvalidType { family: Family, rank: usize },
    #[error("unknown algebra family `{0}`")]
    UnknownFamily(String),
    #[error("malformed matrix: {0}")]
    Shape(String),
    #[error("entry ({i},{j}) = {value} violates sign pattern (diagonal > 0, off-diagonal <= 0)")]
    SignPattern { i: usize, j: usize, value: i64 },
    #[error("zero pattern not symmetric at ({i},{j})")]
    ZeroPattern { i: usize, j: usize },
    #[error("matrix is not symmetrizable: inconsistent cycle through ({i},{j})")]
    NotSymmetrizable { i: usize, j: usize },
    #[error("symmetrized matrix is singular")]
    Singular,
    #[error("Cartan data failed validation: {0}")]
    Invalid(String),
}

/// Rational coefficient of `π`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiMultiple(pub Rational);

impl PiMultiple {
    pub fn value(&self) -> f64 {
        to_f64(&self.0) * std::f64::consts::PI
    }
}

impl fmt::Display for PiMultiple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})*pi", self.0)
    }
}

/// Symmetrize `K^τ = P S`.
pub fn decompose(k: &IntMatrix) -> Result<(Vec<Rational>, RatMatrix), CartanError> {
    catalog::check_sign_pattern(k)?;
    let n = k.len();
    for i in 0..n {
        for j in 0..i {
            if (k[i][j] == 0) != (k[j][i] == 0) {
                return Err(CartanError::ZeroPattern { i: i + 1, j: j + 1 });
            }
        }
    }
    // S_ij = K_ji / P_i must be symmetric, so P_j = P_i K_ij / K_ji along edges.
    let mut p: Vec<Option<Rational>> = vec![None; n];
    for root in 0..n {
        if p[root].is_some() {
            continue;
        }
        p[root] = Some(Rational::one());
        let mut queue = VecDeque::from([root]);
        while let Some(i) = queue.pop_front() {
            let pi = p[i].clone().expect("visited");
            for j in 0..n {
                if i == j || k[i][j] == 0 {
                    continue;
                }
                let pj = &pi * rat(k[i][j], k[j][i]);
                match &p[j] {
                    None => {
                        p[j] = Some(pj);
                        queue.push_back(j);
                    }
                    Some(existing) if *existing != pj => {
                        return Err(CartanError::NotSymmetrizable { i: i + 1, j: j + 1 });
                    }
                    Some(_) => {}
                }
            }
        }
    }
    let p: Vec<Rational> = p.into_iter().map(|x| x.expect("all visited")).collect();
    let s = RatMatrix::from_fn(n, |i, j| int(k[j][i]) / &p[i]);
    debug_assert!(s.is_symmetric());
    Ok((p, s))
}

/// Immutable matrix data for one algebra / matrix choice.
#[derive(Clone, Debug)]
pub struct CartanData {
    k: RatMatrix,
    k_int: IntMatrix,
    p: Vec<Rational>,
    s: RatMatrix,
    alpha: RatMatrix,
    k_inv: RatMatrix,
    s_inv: RatMatrix,
    r: Vec<Rational>,
    a: RatMatrix,
    q: RatMatrix,
}

impl CartanData {
    pub fn from_spec(spec: &AlgebraSpec) -> Result<Self, CartanError> {
        Self::assemble(&cartan_matrix(spec)?)
    }

    /// Assemble all derived matrices. Fails only when `K` cannot be
    /// symmetrized or `S` is singular; positivity is left to [`validate`].
    ///
    /// [`validate`]: CartanData::validate
    pub fn assemble(k_int: &IntMatrix) -> Result<Self, CartanError> {
        let (p, s) = decompose(k_int)?;
        let n = p.len();
        let k = RatMatrix::from_integers(k_int);
        let s_inv = s.inverse().ok_or(CartanError::Singular)?;
        let k_inv = k.inverse().ok_or(CartanError::Singular)?;
        let alpha = RatMatrix::from_fn(n, |i, j| s[(i, j)].abs());
        let r = k.transpose().inverse().ok_or(CartanError::Singular)?.row_sums();
        let p_inv: Vec<Rational> = p.iter().map(|x| x.recip()).collect();
        let p_inv_m = RatMatrix::diagonal(&p_inv);
        let a = p_inv_m.mul(&s_inv).mul(&p_inv_m);
        let r_m = RatMatrix::diagonal(&r);
        let q = r_m.mul(&s).mul(&r_m);
        Ok(CartanData {
            k,
            k_int: k_int.clone(),
            p,
            s,
            alpha,
            k_inv,
            s_inv,
            r,
            a,
            q,
        })
    }

    /// Assemble and insist every certificate check passes.
    pub fn validated(k_int: &IntMatrix) -> Result<Self, CartanError> {
        let data = Self::assemble(k_int)?;
        let cert = data.validate();
        if cert.passed() {
            Ok(data)
        } else {
            Err(CartanError::Invalid(cert.failed_checks().join(", ")))
        }
    }

    pub fn rank(&self) -> usize {
        self.p.len()
    }
    pub fn k(&self) -> &RatMatrix {
        &self.k
    }
    pub fn k_int(&self) -> &IntMatrix {
        &self.k_int
    }
    pub fn p(&self) -> &[Rational] {
        &self.p
    }
    pub fn s(&self) -> &RatMatrix {
        &self.s
    }
    pub fn alpha(&self) -> &RatMatrix {
        &self.alpha
    }
    pub fn k_inv(&self) -> &RatMatrix {
        &self.k_inv
    }
    pub fn s_inv(&self) -> &RatMatrix {
        &self.s_inv
    }
    pub fn r(&self) -> &[Rational] {
        &self.r
    }
    pub fn a(&self) -> &RatMatrix {
        &self.a
    }
    pub fn q(&self) -> &RatMatrix {
        &self.q
    }

    pub fn is_a3(&self) -> bool {
        self.k_int == vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]]
    }

    /// Run every structural check in exact arithmetic.
    pub fn validate(&self) -> Certificate {
        let n = self.rank();
        let mut checks = Vec::new();

        let ps = RatMatrix::diagonal(&self.p).mul(&self.s);
        checks.push(Check::new(
            "kt_eq_ps",
            ps == self.k.transpose(),
            format!("P = {}", fmt_vec(&self.p)),
        ));
        checks.push(Check::new(
            "p_positive",
            self.p.iter().all(|x| x.is_positive()),
            fmt_vec(&self.p),
        ));
        checks.push(Check::new("s_symmetric", self.s.is_symmetric(), self.s.to_string()));

        let minors = self.s.leading_minors();
        checks.push(Check::new(
            "s_positive_definite",
            minors.iter().all(|m| m.is_positive()),
            format!("leading minors {}", fmt_vec(&minors)),
        ));
        let inverse_ok = self.s.mul(&self.s_inv) == RatMatrix::identity(n);
        checks.push(Check::new(
            "s_inverse_positive",
            inverse_ok && self.s_inv.all_positive(),
            format!("min entry {}", self.s_inv.min_entry()),
        ));
        let kt_inv = self.k.transpose().inverse().unwrap_or_else(|| RatMatrix::zeros(n));
        checks.push(Check::new(
            "kt_inverse_positive",
            kt_inv.all_positive(),
            format!("min entry {}", kt_inv.min_entry()),
        ));
        checks.push(Check::new(
            "r_positive",
            self.r.iter().all(|x| x.is_positive()),
            format!("R = {}", fmt_vec(&self.r)),
        ));
        let lhs: Vec<Rational> = self.p.iter().map(|x| x.recip()).collect();
        let rhs = self.s.mul_vec(&self.r);
        checks.push(Check::new(
            "p_inv_one_eq_s_r_one",
            lhs == rhs,
            format!("S R 1 = {}", fmt_vec(&rhs)),
        ));
        let q_inv_pos = self.q.inverse().map(|m| m.all_positive()).unwrap_or(false);
        checks.push(Check::new("q_inverse_positive", q_inv_pos, String::new()));

        Certificate {
            label: format!("{}x{}", n, n),
            matrix: self.k_int.clone(),
            checks,
        }
    }

    /// `b = 4π A N`, kept as rational multiples of `π`.
    pub fn vortex_vector_b(&self, n_vec: &[u32]) -> Vec<PiMultiple> {
        assert_eq!(n_vec.len(), self.rank(), "N has wrong length");
        let nv: Vec<Rational> = n_vec.iter().map(|&x| int(x as i64)).collect();
        self.a
            .mul_vec(&nv)
            .into_iter()
            .map(|x| PiMultiple(x * int(4)))
            .collect()
    }

    /// `λ₀ |Ω| / π` as an exact rational.
    pub fn lambda_threshold_coefficient(&self, n_vec: &[u32]) -> Rational {
        assert_eq!(n_vec.len(), self.rank(), "N has wrong length");
        let n = self.rank();
        let mut num = Rational::zero();
        let mut den = Rational::zero();
        for i in 0..n {
            let p_inv = self.p[i].recip();
            for j in 0..n {
                let w = &p_inv * &self.k_inv[(j, i)];
                num += &w * int(n_vec[j] as i64);
                den += w;
            }
        }
        int(16) * num / den
    }

    /// Necessary coupling threshold `λ₀` for domain area `|Ω|`.
    pub fn lambda_threshold(&self, n_vec: &[u32], domain_area: f64) -> f64 {
        assert!(domain_area > 0.0, "domain area must be positive");
        PiMultiple(self.lambda_threshold_coefficient(n_vec)).value() / domain_area
    }

    pub fn numeric(&self) -> CartanNumeric {
        CartanNumeric::from_data(self)
    }
}

/// Floating-point copies of the Cartan data, for the numerical layers.
#[derive(Clone, Debug)]
pub struct CartanNumeric {
    pub n: usize,
    pub k: DMatrix<f64>,
    pub p: DVector<f64>,
    pub s: DMatrix<f64>,
    pub alpha: DMatrix<f64>,
    pub r: DVector<f64>,
    pub a: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// `K̃ = K^τ R`
    pub k_tilde: DMatrix<f64>,
}

impl CartanNumeric {
    fn from_data(d: &CartanData) -> Self {
        let n = d.rank();
        let m = |x: &RatMatrix| DMatrix::from_fn(n, n, |i, j| to_f64(&x[(i, j)]));
        let v = |x: &[Rational]| DVector::from_iterator(n, x.iter().map(to_f64));
        let k = m(&d.k);
        let r = v(&d.r);
        let k_tilde = DMatrix::from_fn(n, n, |i, j| k[(j, i)] * r[j]);
        let p_m = RatMatrix::diagonal(&d.p);
        let a_inv = m(&p_m.mul(&d.s).mul(&p_m));
        CartanNumeric {
            n,
            k,
            p: v(&d.p),
            s: m(&d.s),
            alpha: m(&d.alpha),
            r,
            a: m(&d.a),
            a_inv,
            q: m(&d.q),
            k_tilde,
        }
    }
}

/// One named pass/fail entry with an exact witness.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub witness: String,
}

impl Check {
    fn new(name: &str, passed: bool, witness: String) -> Self {
        Check {
            name: name.to_string(),
            passed,
            witness,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub label: String,
    pub matrix: IntMatrix,
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[certificate.{}]", self.label)?;
        writeln!(f, "matrix = {:?}", self.matrix)?;
        writeln!(f, "status = \"{}\"", if self.passed() { "pass" } else { "fail" })?;
        for c in &self.checks {
            writeln!(
                f,
                "{} = {{ passed = {}, witness = \"{}\" }}",
                c.name, c.passed, c.witness
            )?;
        }
        Ok(())
    }
}

/// Certify an arbitrary integer matrix, reporting failures instead of erroring.
pub fn certify_matrix(k: &IntMatrix) -> Certificate {
    match CartanData::assemble(k) {
        Ok(data) => data.validate(),
        Err(err) => {
            let mut checks = vec![Check::new("assemble", false, err.to_string())];
            // Still report definiteness when only invertibility failed.
            if let Ok((_, s)) = decompose(k) {
                let minors = s.leading_minors();
                checks.push(Check::new(
                    "s_positive_definite",
                    minors.iter().all(|m| m.is_positive()),
                    format!("leading minors {}", fmt_vec(&minors)),
                ));
            }
            Certificate {
                label: format!("{}x{}", k.len(), k.len()),
                matrix: k.clone(),
                checks,
            }
        }
    }
}
