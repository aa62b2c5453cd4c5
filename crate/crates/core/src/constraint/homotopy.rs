//! General-rank resolution: start from the exactly solvable `ε = 0` system and
//! iterate `f(1, ·)`, with Newton and ε-stepping as fallbacks.

use nalgebra::{DMatrix, DVector};

use super::{
    f_jacobian, f_map, q_tilde, require_admissible, residuals, ConstraintError, ConstraintInput,
    ConstraintSolution, Method, FIXED_POINT_TOL, RESIDUAL_TOL,
};

#[derive(Clone, Debug)]
pub struct HomotopyOptions {
    /// Damping `θ ∈ (0, 1]`.
    pub theta: f64,
    pub max_picard: usize,
    pub max_newton: usize,
    pub eps_steps: usize,
    /// Skip Picard and go straight to the fallbacks (testing aid).
    pub force_fallback: bool,
}

impl Default for HomotopyOptions {
    fn default() -> Self {
        HomotopyOptions {
            theta: 1.0,
            max_picard: 200_000,
            max_newton: 100,
            eps_steps: 10,
            force_fallback: false,
        }
    }
}

/// The `ε = 0` solution `t⁰ = Q̃⁻¹ P⁻¹ R a`.
pub(crate) fn linear_start(input: &ConstraintInput) -> Result<DVector<f64>, ConstraintError> {
    let d = input.data;
    let rhs = DVector::from_fn(input.rank(), |i, _| d.r[i] * input.a[i] / d.p[i]);
    let chol = q_tilde(input)
        .cholesky()
        .ok_or(ConstraintError::QTildeIndefinite)?;
    Ok(chol.solve(&rhs))
}

/// `t⁰, t¹, …` for undamped Picard at `ε = 1`, at most `count` entries.
pub fn picard_iterates(
    input: &ConstraintInput,
    count: usize,
) -> Result<Vec<DVector<f64>>, ConstraintError> {
    require_admissible(input)?;
    let mut t = linear_start(input)?;
    let mut out = Vec::with_capacity(count);
    out.push(t.clone());
    while out.len() < count {
        let next = f_map(input, 1.0, &t)?;
        let done = (&next - &t).amax() <= FIXED_POINT_TOL;
        t = next;
        out.push(t.clone());
        if done {
            break;
        }
    }
    Ok(out)
}

pub fn solve_homotopy(
    input: &ConstraintInput,
    opts: &HomotopyOptions,
) -> Result<ConstraintSolution, ConstraintError> {
    require_admissible(input)?;
    let t0 = linear_start(input)?;
    let mut trace = Vec::new();

    if !opts.force_fallback {
        let mut t = t0.clone();
        for k in 0..opts.max_picard {
            let f = f_map(input, 1.0, &t)?;
            let step = (&f - &t).amax();
            if step <= FIXED_POINT_TOL {
                let sol = ConstraintSolution::finish(input, f, Method::Homotopy, k + 1);
                if sol.residual <= RESIDUAL_TOL {
                    return Ok(sol);
                }
                trace.push(format!("picard stalled with residual {:e}", sol.residual));
                break;
            }
            t = t.scale(1.0 - opts.theta) + f.scale(opts.theta);
        }
        if trace.is_empty() {
            trace.push(format!("picard hit {} iterations", opts.max_picard));
        }
        match newton(input, 1.0, t, opts.max_newton) {
            Ok((t, it)) => return Ok(ConstraintSolution::finish(input, t, Method::Homotopy, it)),
            Err(msg) => trace.push(format!("newton at eps=1: {msg}")),
        }
    }

    let mut t = t0;
    let mut total = 0;
    for s in 1..=opts.eps_steps {
        let eps = s as f64 / opts.eps_steps as f64;
        match newton(input, eps, t.clone(), opts.max_newton) {
            Ok((next, it)) => {
                t = next;
                total += it;
            }
            Err(msg) => {
                trace.push(format!("eps-stepping failed at eps={eps}: {msg}"));
                return Err(ConstraintError::NonConvergence(trace.join("; ")));
            }
        }
    }
    let sol = ConstraintSolution::finish(input, t, Method::Homotopy, total);
    if sol.residual <= RESIDUAL_TOL {
        Ok(sol)
    } else {
        trace.push(format!("eps-stepping residual {:e}", sol.residual));
        Err(ConstraintError::NonConvergence(trace.join("; ")))
    }
}

/// Damped Newton on `F(ε, t) = t − f(ε, t)`.
fn newton(
    input: &ConstraintInput,
    eps: f64,
    mut t: DVector<f64>,
    max_iter: usize,
) -> Result<(DVector<f64>, usize), String> {
    let n = input.rank();
    let eval = |t: &DVector<f64>| f_map(input, eps, t).map(|f| t - f);
    let mut res = eval(&t).map_err(|e| e.to_string())?;
    for k in 0..max_iter {
        if res.amax() <= FIXED_POINT_TOL && (eps < 1.0 || residuals(input, &t).amax() <= RESIDUAL_TOL) {
            return Ok((t, k));
        }
        let jac = DMatrix::identity(n, n) - f_jacobian(input, &t, eps);
        let delta = jac
            .lu()
            .solve(&res)
            .ok_or_else(|| "singular jacobian".to_string())?;
        let norm = res.norm();
        let mut step = 1.0;
        loop {
            let trial = &t - delta.scale(step);
            if trial.iter().all(|&x| x > 0.0) {
                if let Ok(r) = eval(&trial) {
                    if r.norm() < norm || step < 1e-3 {
                        t = trial;
                        res = r;
                        break;
                    }
                }
            }
            step *= 0.5;
            if step < 1e-12 {
                return Err(format!("line search failed at |F| = {norm:e}"));
            }
        }
    }
    if res.amax() <= FIXED_POINT_TOL {
        Ok((t, max_iter))
    } else {
        Err(format!("no convergence in {max_iter} steps, |F| = {:e}", res.amax()))
    }
}
