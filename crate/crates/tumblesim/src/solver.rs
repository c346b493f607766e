//! Semismooth Newton solver for mixed nonlinear complementarity problems.
//!
//! A problem supplies equality residuals `G(z) = 0` over the full unknown
//! vector `z = [u; v]` together with functions `F(z)` paired with the tail
//! variables `v` through `0 <= v  perp  F(z) >= 0`. The complementarity
//! rows are reformulated with the Fischer-Burmeister function
//! `phi(a, b) = a + b - sqrt(a^2 + b^2)`, whose root set is exactly the
//! complementarity set, and the stacked system is solved by damped Newton
//! iteration with an elementwise generalized Jacobian.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("line search failed at iteration {iteration} (residual {residual:.3e} in row {worst_row})")]
    LineSearchFailed { iteration: usize, residual: f64, worst_row: usize },
    #[error("no convergence after {max_iter} iterations (residual {residual:.3e} in row {worst_row})")]
    MaxIterations { max_iter: usize, residual: f64, worst_row: usize },
    #[error("linear solve produced non-finite step")]
    SingularSystem,
}

impl SolverError {
    /// Residual level the iteration reached before giving up, if known.
    pub fn residual(&self) -> Option<f64> {
        match self {
            SolverError::LineSearchFailed { residual, .. }
            | SolverError::MaxIterations { residual, .. } => Some(*residual),
            SolverError::SingularSystem => None,
        }
    }
}

/// Mixed complementarity problem over `z = [u; v]` with `dim(u) = n_eq`
/// and `dim(v) = n_comp`.
pub trait MncpProblem {
    fn n_eq(&self) -> usize;
    fn n_comp(&self) -> usize;
    /// Write `G(z)` into `eq` (length `n_eq`) and `F(z)` into `comp`
    /// (length `n_comp`).
    fn eval(&self, z: &DVector<f64>, eq: &mut DVector<f64>, comp: &mut DVector<f64>);
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Convergence threshold on the max-norm of the reformulated residual.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
    /// Tikhonov shift used when the Jacobian is numerically singular.
    pub tikhonov: f64,
    /// Residual level below which a stalled iteration (no acceptable
    /// line-search step) is still accepted as converged.
    pub stall_tolerance: f64,
    /// Smoothing parameter of the complementarity reformulation. The
    /// smoothed root satisfies `a * b = smoothing^2` instead of
    /// `a * b = 0`, and the residual is differentiable everywhere.
    pub smoothing: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            max_iterations: 300,
            fd_step: 1e-7,
            tikhonov: 1e-12,
            stall_tolerance: 1e-8,
            smoothing: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_inf: f64,
}

pub fn fischer_burmeister(a: f64, b: f64) -> f64 {
    a + b - (a * a + b * b).sqrt()
}

/// Smoothed FB function: its root set is `a > 0, b > 0, a b = eps^2`,
/// a tight interior approximation of the complementarity set that keeps
/// the residual differentiable at the rolling/sliding and
/// contact/separation transition points.
pub fn fischer_burmeister_smoothed(a: f64, b: f64, eps: f64) -> f64 {
    a + b - (a * a + b * b + 2.0 * eps * eps).sqrt()
}

/// Elementwise derivative of the smoothed FB function; with `eps > 0`
/// the radical never vanishes, but the unsmoothed origin still needs the
/// symmetric subgradient element.
fn fb_partials(a: f64, b: f64, eps: f64) -> (f64, f64) {
    let r = (a * a + b * b + 2.0 * eps * eps).sqrt();
    if r < 1e-300 {
        let c = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        (c, c)
    } else {
        (1.0 - a / r, 1.0 - b / r)
    }
}

struct Workspace {
    eq: DVector<f64>,
    comp: DVector<f64>,
}

fn residual(
    problem: &impl MncpProblem,
    z: &DVector<f64>,
    eps: f64,
    ws: &mut Workspace,
    out: &mut DVector<f64>,
) {
    let ne = problem.n_eq();
    problem.eval(z, &mut ws.eq, &mut ws.comp);
    for i in 0..ne {
        out[i] = ws.eq[i];
    }
    for i in 0..problem.n_comp() {
        out[ne + i] = fischer_burmeister_smoothed(z[ne + i], ws.comp[i], eps);
    }
}

/// Assemble the generalized Jacobian of the FB-reformulated residual:
/// finite differences of `[G; F]` chained through the FB partials.
fn jacobian(
    problem: &impl MncpProblem,
    z: &DVector<f64>,
    base_comp: &DVector<f64>,
    opts: &SolverOptions,
    ws: &mut Workspace,
) -> DMatrix<f64> {
    let ne = problem.n_eq();
    let nc = problem.n_comp();
    let n = ne + nc;
    let mut jac_raw = DMatrix::zeros(n, n);
    let mut zp = z.clone();
    let mut eq_p = DVector::zeros(ne);
    let mut comp_p = DVector::zeros(nc);
    for j in 0..n {
        let h = opts.fd_step * z[j].abs().max(1.0);
        zp[j] = z[j] + h;
        problem.eval(&zp, &mut eq_p, &mut comp_p);
        zp[j] = z[j] - h;
        problem.eval(&zp, &mut ws.eq, &mut ws.comp);
        zp[j] = z[j];
        let inv = 1.0 / (2.0 * h);
        for i in 0..ne {
            jac_raw[(i, j)] = (eq_p[i] - ws.eq[i]) * inv;
        }
        for i in 0..nc {
            jac_raw[(ne + i, j)] = (comp_p[i] - ws.comp[i]) * inv;
        }
    }
    // Chain the complementarity rows through phi(v_i, F_i).
    let mut jac = jac_raw;
    for i in 0..nc {
        let (da, db) = fb_partials(z[ne + i], base_comp[i], opts.smoothing);
        for j in 0..n {
            let mut v = db * jac[(ne + i, j)];
            if j == ne + i {
                v += da;
            }
            jac[(ne + i, j)] = v;
        }
    }
    jac
}

fn linear_solve(
    jac: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tikhonov: f64,
) -> Result<DVector<f64>, SolverError> {
    if let Some(sol) = jac.clone().lu().solve(rhs) {
        if sol.iter().all(|x| x.is_finite()) {
            return Ok(sol);
        }
    }
    // Singular or ill-conditioned: regularized normal equations.
    let n = jac.ncols();
    let mut jtj = jac.transpose() * jac;
    for i in 0..n {
        jtj[(i, i)] += tikhonov;
    }
    let jtr = jac.transpose() * rhs;
    jtj.lu()
        .solve(&jtr)
        .filter(|s| s.iter().all(|x| x.is_finite()))
        .ok_or(SolverError::SingularSystem)
}

/// Solve the MNCP starting from `z` (updated in place).
pub fn solve(
    problem: &impl MncpProblem,
    z: &mut DVector<f64>,
    opts: &SolverOptions,
) -> Result<SolveReport, SolverError> {
    let ne = problem.n_eq();
    let nc = problem.n_comp();
    let n = ne + nc;
    assert_eq!(z.len(), n, "initial guess has wrong dimension");
    let mut ws = Workspace { eq: DVector::zeros(ne), comp: DVector::zeros(nc) };
    let mut phi = DVector::zeros(n);
    let mut phi_trial = DVector::zeros(n);

    residual(problem, z, opts.smoothing, &mut ws, &mut phi);
    let mut merit = phi.norm_squared();
    for iter in 0..opts.max_iterations {
        let res_inf = phi.amax();
        if res_inf <= opts.tolerance {
            return Ok(SolveReport { iterations: iter, residual_inf: res_inf });
        }
        let base_comp = ws.comp.clone();
        let jac = jacobian(problem, z, &base_comp, opts, &mut ws);

        // Armijo backtracking on the squared residual norm, first along
        // the Newton direction, then along increasingly damped
        // Levenberg-Marquardt directions when the Newton step is not a
        // descent direction (kinks of the FB reformulation).
        let mut accepted = false;
        'damping: for damping in [0.0, 1e-10, 1e-7, 1e-4, 1e-2, 1.0, 1e2] {
            let step = if damping == 0.0 {
                match linear_solve(&jac, &(-&phi), opts.tikhonov) {
                    Ok(s) => s,
                    Err(_) => continue,
                }
            } else {
                let mut jtj = jac.transpose() * &jac;
                for i in 0..n {
                    let d = jtj[(i, i)].max(1e-30);
                    jtj[(i, i)] += damping * d + opts.tikhonov;
                }
                let jtr = jac.transpose() * &(-&phi);
                match jtj.lu().solve(&jtr).filter(|s| s.iter().all(|x| x.is_finite())) {
                    Some(s) => s,
                    None => continue,
                }
            };
            let mut t = 1.0;
            while t >= 2.0f64.powi(-20) {
                let z_trial = &*z + &step * t;
                residual(problem, &z_trial, opts.smoothing, &mut ws, &mut phi_trial);
                let merit_trial = phi_trial.norm_squared();
                if merit_trial.is_finite() && merit_trial <= merit * (1.0 - 1e-4 * t) {
                    *z = z_trial;
                    phi.copy_from(&phi_trial);
                    merit = merit_trial;
                    accepted = true;
                    break 'damping;
                }
                t *= 0.5;
            }
        }
        if !accepted {
            if res_inf <= opts.stall_tolerance {
                return Ok(SolveReport { iterations: iter, residual_inf: res_inf });
            }
            return Err(SolverError::LineSearchFailed {
                iteration: iter,
                residual: res_inf,
                worst_row: phi.iamax(),
            });
        }
    }
    let res_inf = phi.amax();
    if res_inf <= opts.stall_tolerance.max(opts.tolerance) {
        Ok(SolveReport { iterations: opts.max_iterations, residual_inf: res_inf })
    } else {
        Err(SolverError::MaxIterations {
            max_iter: opts.max_iterations,
            residual: res_inf,
            worst_row: phi.iamax(),
        })
    }
}
