//! Variable-step BDF(1,2) integrator for index-1 DAEs with diagonal mass.
//!
//! Systems have the semi-explicit shape
//!
//! ```text
//! M dy/dt = r(t, y),   M = diag(m_0 .. m_{d-1}),  m_i = 0 on algebraic rows,
//! ```
//!
//! solved by backward differentiation: order 1 on the first step, order 2
//! afterwards, with the variable-step derivative stencil
//! ydot(t_{n+1}) = c_a y_{n+1} + c_b y_n + c_c y_{n-1}. Each step solves
//! F(y) = M (c_a y + ...) - r(t_{n+1}, y) = 0 by a modified Newton iteration:
//! the finite-difference Jacobian of r is reused across steps and only
//! refreshed when convergence degrades, while the iteration matrix
//! W = c_a M - J is refactored whenever the step size changes.
//!
//! Local error is estimated from the distance between the BDF corrector and a
//! polynomial predictor, weighted RMS over the differential components only;
//! algebraic components are instead pinned after every accepted step (and at
//! every dense-output instant) by a small Newton solve of the constraint rows
//! alone, so reported states satisfy the constraints to solver precision
//! rather than to the step tolerance.
//!
//! Dense output is cubic Hermite on each accepted step, using the BDF
//! derivative at both ends.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Right-hand side contract for the integrator.
///
/// `rhs` takes `&mut self` so implementations can keep scratch buffers.
pub trait DaeSystem {
    fn dim(&self) -> usize;

    /// Mass diagonal; zero entries mark algebraic rows. Each algebraic row i
    /// must be solvable for y_i with the other components frozen (index 1).
    fn mass_diagonal(&self) -> &[f64];

    /// Writes r(t, y): `mass[i] * ydot[i] = out[i]` on differential rows,
    /// `0 = out[i]` on algebraic rows.
    fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()>;
}

/// Integration controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_newton_iterations: usize,
    /// Spacing of the dense-output grid in t* units.
    pub output_dt: f64,
    /// false freezes the step at `initial_step` and accepts every step
    /// (convergence studies); leave true for production runs.
    pub adaptive: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-5,
            atol: 1e-5,
            initial_step: 1e-3,
            max_step: 1.0,
            min_step: 1e-12,
            max_newton_iterations: 8,
            output_dt: 0.1,
            adaptive: true,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("initial_step", self.initial_step),
            ("max_step", self.max_step),
            ("min_step", self.min_step),
            ("output_dt", self.output_dt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!(
                    "integrator {name} must be positive, got {v}"
                )));
            }
        }
        if self.max_newton_iterations < 1 {
            return Err(Error::Config("max_newton_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// Step-level counters for performance reporting and tests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepDiagnostics {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub newton_iterations: usize,
    pub jacobian_rebuilds: usize,
    pub rhs_evaluations: usize,
}

/// States sampled on the requested output grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub diagnostics: StepDiagnostics,
}

/// Newton solve of the algebraic rows alone, adjusting exactly the variables
/// that own those rows (for the spectral system: the last two coefficients of
/// each block). Differential components stay untouched.
pub fn make_consistent(system: &mut dyn DaeSystem, t: f64, y: &mut [f64], tol: f64) -> Result<()> {
    let rows = algebraic_rows(system.mass_diagonal());
    if rows.is_empty() {
        return Ok(());
    }
    let mut scratch = vec![0.0; system.dim()];
    solve_algebraic(
        system,
        t,
        y,
        &rows,
        tol,
        &mut scratch,
        &mut StepDiagnostics::default(),
    )
}

fn algebraic_rows(mass: &[f64]) -> Vec<usize> {
    mass.iter()
        .enumerate()
        .filter(|(_, &m)| m == 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn solve_algebraic(
    system: &mut dyn DaeSystem,
    t: f64,
    y: &mut [f64],
    rows: &[usize],
    tol: f64,
    scratch: &mut [f64],
    diag: &mut StepDiagnostics,
) -> Result<()> {
    let k = rows.len();
    let mut residual = DVector::zeros(k);
    for _ in 0..25 {
        system.rhs(t, y, scratch)?;
        diag.rhs_evaluations += 1;
        let mut worst = 0.0f64;
        for (p, &row) in rows.iter().enumerate() {
            residual[p] = scratch[row];
            worst = worst.max(scratch[row].abs());
        }
        if worst <= tol {
            return Ok(());
        }
        // FD Jacobian of the constraint rows wrt their own variables
        let mut jac = DMatrix::zeros(k, k);
        for (q, &col) in rows.iter().enumerate() {
            let saved = y[col];
            let e = f64::EPSILON.sqrt() * saved.abs().max(1e-3);
            y[col] = saved + e;
            system.rhs(t, y, scratch)?;
            diag.rhs_evaluations += 1;
            y[col] = saved;
            for (p, &row) in rows.iter().enumerate() {
                jac[(p, q)] = (scratch[row] - residual[p]) / e;
            }
        }
        let delta = jac
            .lu()
            .solve(&residual)
            .ok_or(Error::SingularAlgebraic { t })?;
        for (q, &col) in rows.iter().enumerate() {
            y[col] -= delta[q];
        }
    }
    Err(Error::NewtonFailure {
        t,
        reason: "consistency projection did not converge".into(),
    })
}

/// BDF derivative stencil at t_{n+1} for new step h1 and previous step h2.
fn bdf_coeffs(order: usize, h1: f64, h2: f64) -> (f64, f64, f64) {
    if order == 1 {
        (1.0 / h1, -1.0 / h1, 0.0)
    } else {
        let c_a = (2.0 * h1 + h2) / (h1 * (h1 + h2));
        let c_b = -(h1 + h2) / (h1 * h2);
        let c_c = h1 / (h2 * (h1 + h2));
        (c_a, c_b, c_c)
    }
}

struct Workspace {
    residual: Vec<f64>,
    accum: Vec<f64>,
    f_vec: DVector<f64>,
    jac: DMatrix<f64>,
}

/// Integrates from t_span.0 to t_span.1, sampling states every
/// `cfg.output_dt` (the end point is always included). `y0` must satisfy the
/// algebraic rows to within 10 atol; use [`make_consistent`] first.
pub fn solve_dae(
    system: &mut dyn DaeSystem,
    t_span: (f64, f64),
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let (t0, t_end) = t_span;
    if !(t_end > t0) {
        return Err(Error::Config(format!(
            "time span must advance: [{t0}, {t_end}]"
        )));
    }
    let d = system.dim();
    if y0.len() != d {
        return Err(Error::Shape(format!(
            "initial state has {} entries, system dimension is {d}",
            y0.len()
        )));
    }

    let mass = system.mass_diagonal().to_vec();
    let alg_rows = algebraic_rows(&mass);
    let n_diff = d - alg_rows.len();
    let mut diag = StepDiagnostics::default();

    // initial consistency check
    let mut scratch = vec![0.0; d];
    system.rhs(t0, y0, &mut scratch)?;
    diag.rhs_evaluations += 1;
    let worst = alg_rows
        .iter()
        .map(|&i| scratch[i].abs())
        .fold(0.0f64, f64::max);
    let limit = 10.0 * cfg.atol;
    if worst > limit {
        return Err(Error::InconsistentInitial {
            residual: worst,
            limit,
        });
    }

    // output grid
    let span = t_end - t0;
    let n_out = (span / cfg.output_dt).round();
    let exact_grid = (n_out * cfg.output_dt - span).abs() <= 1e-9 * span.max(1.0) && n_out >= 1.0;
    let mut out_times: Vec<f64> = if exact_grid {
        (0..=n_out as usize)
            .map(|k| t0 + k as f64 * cfg.output_dt)
            .collect()
    } else {
        let mut v: Vec<f64> = (0..)
            .map(|k| t0 + k as f64 * cfg.output_dt)
            .take_while(|&t| t < t_end - 1e-12 * span.max(1.0))
            .collect();
        v.push(t_end);
        v
    };
    *out_times.last_mut().unwrap() = out_times.last().unwrap().min(t_end);
    let mut states: Vec<Vec<f64>> = Vec::with_capacity(out_times.len());
    states.push(y0.to_vec());
    let mut next_out = 1;

    // history
    let consistency_tol = 1e-3 * cfg.atol;
    let mut t_n = t0;
    let mut y_n = y0.to_vec();
    let mut ydot_n = vec![0.0; d];
    for i in 0..d {
        if mass[i] != 0.0 {
            ydot_n[i] = scratch[i] / mass[i];
        }
    }
    let mut t_nm1 = t0;
    let mut y_nm1 = y0.to_vec();
    let mut order = 1;

    let mut ws = Workspace {
        residual: vec![0.0; d],
        accum: vec![0.0; d],
        f_vec: DVector::zeros(d),
        jac: DMatrix::zeros(d, d),
    };
    // have_jac: ws.jac is usable (possibly from an older state).
    // jac_fresh: ws.jac was built during the current step attempt, so
    // rebuilding it again cannot rescue a failing iteration.
    let mut have_jac = false;
    let mut jac_fresh = false;
    let mut lu: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)> = None;

    let mut h = cfg
        .initial_step
        .min(cfg.max_step)
        .min(span)
        .max(cfg.min_step);
    let mut weights = vec![0.0; d];
    let mut y_new = vec![0.0; d];
    let mut y_pred = vec![0.0; d];
    let mut newton_failures_in_a_row = 0;

    while t_end - t_n > 1e-12 * span.max(1.0) {
        if !cfg.adaptive {
            h = cfg.initial_step;
        }
        h = h.min(t_end - t_n);
        let t_new = t_n + h;
        for i in 0..d {
            weights[i] = cfg.atol + cfg.rtol * y_n[i].abs();
        }

        let h_prev = t_n - t_nm1;
        let eff_order = if order == 2 && h_prev > 0.0 { 2 } else { 1 };
        let (c_a, c_b, c_c) = bdf_coeffs(eff_order, h, h_prev);

        // predictor: order 1 uses explicit Euler, order 2 a quadratic through
        // (t_{n-1}, y_{n-1}) matching y_n and ydot_n
        if eff_order == 1 {
            for i in 0..d {
                y_pred[i] = y_n[i] + h * ydot_n[i];
            }
        } else {
            for i in 0..d {
                let c2 = (y_nm1[i] - y_n[i] + ydot_n[i] * h_prev) / (h_prev * h_prev);
                y_pred[i] = y_n[i] + ydot_n[i] * h + c2 * h * h;
            }
        }
        for i in 0..d {
            ws.accum[i] = c_b * y_n[i] + c_c * y_nm1[i];
        }

        // modified Newton from the predictor
        y_new.copy_from_slice(&y_pred);
        let mut converged = false;
        let mut rhs_failed = false;
        let mut iters_used = 0;
        let mut prev_norm = f64::INFINITY;
        for it in 0..cfg.max_newton_iterations {
            if system.rhs(t_new, &y_new, &mut ws.residual).is_err() {
                // the iterate left the model's admissible range; a smaller
                // step keeps the predictor closer to the solution manifold
                rhs_failed = true;
                break;
            }
            diag.rhs_evaluations += 1;
            for i in 0..d {
                ws.f_vec[i] = mass[i] * (c_a * y_new[i] + ws.accum[i]) - ws.residual[i];
            }

            if !have_jac {
                if build_jacobian(
                    system,
                    t_new,
                    &mut y_new,
                    &ws.residual,
                    &mut ws.jac,
                    &mut diag,
                )
                .is_err()
                {
                    rhs_failed = true;
                    break;
                }
                have_jac = true;
                jac_fresh = true;
                lu = None;
            }
            let refactor = match &lu {
                None => true,
                Some((built_ca, _)) => (built_ca - c_a).abs() > 1e-12 * c_a.abs(),
            };
            if refactor {
                lu = Some((c_a, iteration_matrix(&ws.jac, &mass, c_a).lu()));
            }

            let Some(delta) = lu.as_ref().unwrap().1.solve(&(-&ws.f_vec)) else {
                rhs_failed = true;
                break;
            };
            diag.newton_iterations += 1;
            iters_used = it + 1;
            let mut norm_sq = 0.0;
            for i in 0..d {
                y_new[i] += delta[i];
                let w = delta[i] / weights[i];
                norm_sq += w * w;
            }
            let norm = (norm_sq / d as f64).sqrt();
            if norm <= 0.33 {
                converged = true;
                break;
            }
            if it >= 1 && norm > 0.9 * prev_norm {
                break; // diverging
            }
            prev_norm = norm;
        }

        if !converged {
            diag.steps_rejected += 1;
            newton_failures_in_a_row += 1;
            if newton_failures_in_a_row > 40 {
                return Err(Error::NewtonFailure {
                    t: t_n,
                    reason: "repeated Newton failures".into(),
                });
            }
            if !jac_fresh && !rhs_failed {
                // retry the same step with a Jacobian at the current state
                have_jac = false;
                continue;
            }
            if !cfg.adaptive {
                return Err(Error::NewtonFailure {
                    t: t_n,
                    reason: "Newton failed with the step size pinned".into(),
                });
            }
            h *= 0.25;
            lu = None;
            jac_fresh = false;
            if h < cfg.min_step {
                return Err(Error::Stiffness {
                    t: t_n,
                    reason: "step size underflow after Newton failures".into(),
                });
            }
            continue;
        }
        newton_failures_in_a_row = 0;

        // pin the constraints before judging the step
        if !alg_rows.is_empty() {
            solve_algebraic(
                system,
                t_new,
                &mut y_new,
                &alg_rows,
                consistency_tol,
                &mut scratch,
                &mut diag,
            )?;
        }

        // weighted RMS of corrector minus predictor, differential rows only
        let mut est = 0.0;
        if n_diff > 0 {
            let mut acc = 0.0;
            for i in 0..d {
                if mass[i] != 0.0 {
                    let w = (y_new[i] - y_pred[i]) / weights[i];
                    acc += w * w;
                }
            }
            // conservative multiples of the true LTE constants, so per-step
            // accumulation stays well inside the requested tolerance
            let err_const = if eff_order == 1 { 1.0 } else { 2.0 };
            est = err_const * (acc / n_diff as f64).sqrt();
        }

        if cfg.adaptive && est > 1.0 {
            diag.steps_rejected += 1;
            let shrink = (0.9 * est.powf(-1.0 / (eff_order as f64 + 1.0))).clamp(0.1, 0.9);
            h *= shrink;
            if h < cfg.min_step {
                return Err(Error::Stiffness {
                    t: t_n,
                    reason: format!("error estimate {est:.3e} forces step below min_step"),
                });
            }
            continue;
        }

        // accepted; BDF derivative at the new point for dense output
        diag.steps_accepted += 1;
        let mut ydot_new = vec![0.0; d];
        for i in 0..d {
            ydot_new[i] = c_a * y_new[i] + ws.accum[i];
        }

        while next_out < out_times.len() && out_times[next_out] <= t_new + 1e-12 * span.max(1.0) {
            let t_out = out_times[next_out];
            let mut y_out = vec![0.0; d];
            hermite(
                t_n, &y_n, &ydot_n, t_new, &y_new, &ydot_new, t_out, &mut y_out,
            );
            if !alg_rows.is_empty() {
                solve_algebraic(
                    system,
                    t_out,
                    &mut y_out,
                    &alg_rows,
                    consistency_tol,
                    &mut scratch,
                    &mut diag,
                )?;
            }
            states.push(y_out);
            next_out += 1;
        }

        t_nm1 = t_n;
        y_nm1.copy_from_slice(&y_n);
        t_n = t_new;
        y_n.copy_from_slice(&y_new);
        ydot_n = ydot_new;
        order = 2;

        if cfg.adaptive {
            let grow = if est > 0.0 {
                (0.9 * est.powf(-1.0 / (eff_order as f64 + 1.0))).clamp(0.1, 2.0)
            } else {
                2.0
            };
            h = (h * grow).min(cfg.max_step);
        }
        // sluggish convergence means the reused Jacobian has drifted too far
        if iters_used >= 4 {
            have_jac = false;
        }
        // the Jacobian now predates the newest state; a Newton failure on the
        // next step should refresh it before the step size shrinks
        jac_fresh = false;
    }

    debug_assert_eq!(states.len(), out_times.len());
    Ok(Trajectory {
        times: out_times,
        states,
        diagnostics: diag,
    })
}

fn iteration_matrix(jac: &DMatrix<f64>, mass: &[f64], c_a: f64) -> DMatrix<f64> {
    let d = mass.len();
    let mut w = -jac.clone();
    for i in 0..d {
        w[(i, i)] += c_a * mass[i];
    }
    w
}

fn build_jacobian(
    system: &mut dyn DaeSystem,
    t: f64,
    y: &mut [f64],
    r_base: &[f64],
    jac: &mut DMatrix<f64>,
    diag: &mut StepDiagnostics,
) -> Result<()> {
    let d = y.len();
    diag.jacobian_rebuilds += 1;
    let mut r_pert = vec![0.0; d];
    for j in 0..d {
        let saved = y[j];
        let e = f64::EPSILON.sqrt() * saved.abs().max(1e-3);
        y[j] = saved + e;
        system.rhs(t, y, &mut r_pert)?;
        diag.rhs_evaluations += 1;
        y[j] = saved;
        for i in 0..d {
            jac[(i, j)] = (r_pert[i] - r_base[i]) / e;
        }
    }
    Ok(())
}

/// Cubic Hermite interpolation between (t0, y0, yd0) and (t1, y1, yd1).
#[allow(clippy::too_many_arguments)]
fn hermite(
    t0: f64,
    y0: &[f64],
    yd0: &[f64],
    t1: f64,
    y1: &[f64],
    yd1: &[f64],
    t: f64,
    out: &mut [f64],
) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    for i in 0..out.len() {
        out[i] = h00 * y0[i] + h10 * h * yd0[i] + h01 * y1[i] + h11 * h * yd1[i];
    }
}
