//! SU(4) reduction of the three constraints to one scalar equation
//! `F(t) = t − f₂(f₁(t), f₃(t)) = 0` in `t = e^{c₂}`.

use nalgebra::DVector;

use super::{require_admissible, ConstraintError, ConstraintInput, ConstraintSolution, Method, BOX_RADIUS, RESIDUAL_TOL};

const A3: [[f64; 3]; 3] = [[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]];

/// The explicit maps `f₁, f₂, f₃` for the A3 system.
#[derive(Clone, Debug)]
pub struct SqueezeMaps {
    a: [f64; 3],
    a11: f64,
    a22: f64,
    a33: f64,
    a12: f64,
    a23: f64,
    d1: f64,
    d2: f64,
    d3: f64,
}

impl SqueezeMaps {
    pub fn new(input: &ConstraintInput) -> Result<Self, ConstraintError> {
        if input.rank() != 3 {
            return Err(ConstraintError::NotSu4);
        }
        for (i, row) in A3.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if input.data.k[(i, j)] != v {
                    return Err(ConstraintError::NotSu4);
                }
            }
        }
        let am = &input.a_matrix;
        let (b, l) = (&input.b, input.lambda);
        Ok(SqueezeMaps {
            a: [input.a[0], input.a[1], input.a[2]],
            a11: am[(0, 0)],
            a22: am[(1, 1)],
            a33: am[(2, 2)],
            a12: am[(0, 1)],
            a23: am[(1, 2)],
            d1: 8.0 * b[0] * am[(0, 0)] / (9.0 * l),
            d2: b[1] * am[(1, 1)] / (2.0 * l),
            d3: 8.0 * b[2] * am[(2, 2)] / (9.0 * l),
        })
    }

    fn lin1(&self, s: f64) -> f64 {
        self.a[0] / 3.0 + 2.0 * self.a12 / 3.0 * s
    }
    fn lin2(&self, t: f64, s: f64) -> f64 {
        self.a[1] / 4.0 + 3.0 * self.a12 / 8.0 * t + 3.0 * self.a23 / 8.0 * s
    }
    fn lin3(&self, s: f64) -> f64 {
        self.a[2] / 3.0 + 2.0 * self.a23 / 3.0 * s
    }

    fn root(lin: f64, d: f64) -> f64 {
        lin.mul_add(lin, -d).max(0.0).sqrt()
    }

    pub fn f1(&self, s: f64) -> f64 {
        let l = self.lin1(s);
        (l + Self::root(l, self.d1)) / (2.0 * self.a11)
    }
    pub fn f2(&self, t: f64, s: f64) -> f64 {
        let l = self.lin2(t, s);
        (l + Self::root(l, self.d2)) / (2.0 * self.a22)
    }
    pub fn f3(&self, s: f64) -> f64 {
        let l = self.lin3(s);
        (l + Self::root(l, self.d3)) / (2.0 * self.a33)
    }

    pub fn big_f(&self, t: f64) -> f64 {
        t - self.f2(self.f1(t), self.f3(t))
    }

    pub fn big_f_derivative(&self, t: f64) -> f64 {
        let (x1, x3) = (self.f1(t), self.f3(t));
        let df1 = 2.0 * self.a12 / 3.0 * x1 / Self::root(self.lin1(t), self.d1);
        let df3 = 2.0 * self.a23 / 3.0 * x3 / Self::root(self.lin3(t), self.d3);
        let l2 = self.lin2(x1, x3);
        let f2 = self.f2(x1, x3);
        let r2 = Self::root(l2, self.d2);
        let d2t = 3.0 * self.a12 / 8.0 * f2 / r2;
        let d2s = 3.0 * self.a23 / 8.0 * f2 / r2;
        1.0 - d2t * df1 - d2s * df3
    }

    /// Asymptotic slopes of `f₁(t)/t`, `f₂(t,t)/t`, `f₃(t)/t`.
    pub fn limits(&self) -> [f64; 3] {
        [
            2.0 * self.a12 / (3.0 * self.a11),
            3.0 * (self.a12 + self.a23) / (8.0 * self.a22),
            2.0 * self.a23 / (3.0 * self.a33),
        ]
    }
}

pub fn solve_squeeze(input: &ConstraintInput) -> Result<ConstraintSolution, ConstraintError> {
    let maps = SqueezeMaps::new(input)?;
    require_admissible(input)?;
    let (mut lo, mut hi) = (0.0, BOX_RADIUS);
    if !(maps.big_f(lo) < 0.0 && maps.big_f(hi) > 0.0) {
        return Err(ConstraintError::NoSignChange(BOX_RADIUS));
    }
    let mut iterations = 0;
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if maps.big_f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let f = maps.big_f(t);
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let next = t - f / maps.big_f_derivative(t);
        let next = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        iterations += 1;
        if (next - t).abs() <= 1e-16 * t.abs() {
            t = next;
            break;
        }
        t = next;
    }
    let full = DVector::from_vec(vec![maps.f1(t), t, maps.f3(t)]);
    let sol = ConstraintSolution::finish(input, full, Method::Squeeze, iterations);
    if sol.residual > RESIDUAL_TOL {
        return Err(ConstraintError::NonConvergence(format!(
            "squeeze residual {:e}",
            sol.residual
        )));
    }
    Ok(sol)
}
