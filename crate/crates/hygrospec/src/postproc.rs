//! Field reconstruction, surface fluxes, error norms and spectral
//! diagnostics.
//!
//! Solver output is compared on fixed space-time sample grids with the
//! Euclidean norms
//!
//! ```text
//! eps_2(x) = sqrt( (1/N_t) sum_j (Y_num(x, t_j) - Y_ref(x, t_j))^2 )
//! eps_inf  = max over sampled x of eps_2(x)
//! ```
//!
//! the initial instant excluded (both solvers start from the same data).
//! Sensor comparisons use the pointwise relative error
//! eps(t) = |Y_num - Y_meas| / Y_meas. Surface heat flux splits into a
//! sensible part q_s = -k_T dT/dx and a latent part q_l = -k_TM dP_v/dx,
//! in W/m^2 once redimensionalized; the moisture flow is
//! g = -k_M dP_v/dx in kg/(m^2 s).

use crate::dae::Trajectory;
use crate::imex::GridTrajectory;
use crate::problem::DimensionlessProblem;
use crate::rom::SpectralSystem;
use crate::{Error, Result};

/// Space-time samples of both fields on a shared grid, rows per instant.
/// The values are dimensionless (u, v) or dimensional (K, Pa) depending on
/// how the samples were produced; comparisons only require consistency.
#[derive(Debug, Clone)]
pub struct FieldSamples {
    pub positions: Vec<f64>,
    pub times: Vec<f64>,
    pub temperature: Vec<Vec<f64>>,
    pub vapour: Vec<Vec<f64>>,
}

/// Relative error trace of one interior sensor.
#[derive(Debug, Clone)]
pub struct SensorError {
    pub position: f64,
    pub times: Vec<f64>,
    pub epsilon: Vec<f64>,
}

/// Magnitude of the last retained coefficient per instant, maximized over
/// layers; an a-posteriori proxy for the spatial truncation error.
#[derive(Debug, Clone)]
pub struct TailDiagnostics {
    pub times: Vec<f64>,
    pub moisture_tail: Vec<f64>,
    pub heat_tail: Vec<f64>,
}

/// Error norms of one candidate run against a reference.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub positions: Vec<f64>,
    pub eps2_temperature: Vec<f64>,
    pub eps2_vapour: Vec<f64>,
    pub eps_inf_temperature: f64,
    pub eps_inf_vapour: f64,
    /// Per-sensor relative error traces; filled by the caller when
    /// measurements are in play.
    pub relative: Vec<SensorError>,
    /// Spectral tail traces; only meaningful for spectral candidates.
    pub tail: Option<TailDiagnostics>,
}

/// Dimensional heat flux split and moisture flow at one location.
#[derive(Debug, Clone)]
pub struct FluxSeries {
    pub x_0: f64,
    pub times: Vec<f64>,
    /// Sensible heat flux q_s [W/m^2].
    pub sensible: Vec<f64>,
    /// Latent heat flux q_l [W/m^2].
    pub latent: Vec<f64>,
    /// q_s + q_l, stored as the sum so the identity is exact.
    pub total: Vec<f64>,
    /// Moisture flow g [kg/(m^2 s)].
    pub moisture_flow: Vec<f64>,
}

/// One-sided discrete Fourier magnitude of a uniformly sampled series.
#[derive(Debug, Clone)]
pub struct PowerSpectrum {
    /// Cycles per unit of the sampling time.
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
}

/// The uniform x* grid used for all norm comparisons.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Dimensionless (u, v) samples of a spectral trajectory on `x_grid`.
pub fn spectral_samples(
    system: &SpectralSystem,
    traj: &Trajectory,
    x_grid: &[f64],
) -> Result<FieldSamples> {
    let mut temperature = Vec::with_capacity(traj.times.len());
    let mut vapour = Vec::with_capacity(traj.times.len());
    for y in &traj.states {
        let mut u_row = Vec::with_capacity(x_grid.len());
        let mut v_row = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            let (u, v) = system.evaluate(y, x)?;
            u_row.push(u);
            v_row.push(v);
        }
        temperature.push(u_row);
        vapour.push(v_row);
    }
    Ok(FieldSamples {
        positions: x_grid.to_vec(),
        times: traj.times.clone(),
        temperature,
        vapour,
    })
}

/// Dimensionless (u, v) samples of a finite-difference trajectory on
/// `x_grid`, linearly interpolated between nodes (exact on nodes).
pub fn grid_samples(traj: &GridTrajectory, x_grid: &[f64]) -> Result<FieldSamples> {
    let nodes = &traj.positions;
    let nn = nodes.len();
    let dx = nodes[1] - nodes[0];
    let locate = |x: f64| -> Result<(usize, f64)> {
        if !(-1e-12..=1.0 + 1e-12).contains(&x) {
            return Err(Error::Config(format!(
                "sample point x* = {x} outside [0, 1]"
            )));
        }
        let j = ((x / dx).floor() as usize).min(nn - 2);
        Ok((j, ((x - nodes[j]) / dx).clamp(0.0, 1.0)))
    };
    let mut temperature = Vec::with_capacity(traj.times.len());
    let mut vapour = Vec::with_capacity(traj.times.len());
    for (u_nodes, v_nodes) in traj.u.iter().zip(&traj.v) {
        let mut u_row = Vec::with_capacity(x_grid.len());
        let mut v_row = Vec::with_capacity(x_grid.len());
        for &x in x_grid {
            let (j, w) = locate(x)?;
            u_row.push((1.0 - w) * u_nodes[j] + w * u_nodes[j + 1]);
            v_row.push((1.0 - w) * v_nodes[j] + w * v_nodes[j + 1]);
        }
        temperature.push(u_row);
        vapour.push(v_row);
    }
    Ok(FieldSamples {
        positions: x_grid.to_vec(),
        times: traj.times.clone(),
        temperature,
        vapour,
    })
}

/// Dimensional fields: T = u T_ref [K], P_v = v P_v,ref [Pa] on `x_grid`
/// at the trajectory's output instants.
pub fn reconstruct(
    system: &SpectralSystem,
    traj: &Trajectory,
    x_grid: &[f64],
) -> Result<FieldSamples> {
    let mut samples = spectral_samples(system, traj, x_grid)?;
    let scales = &system.problem().scales;
    for row in &mut samples.temperature {
        for x in row.iter_mut() {
            *x *= scales.temperature_k;
        }
    }
    for row in &mut samples.vapour {
        for x in row.iter_mut() {
            *x *= scales.vapour_pressure_pa;
        }
    }
    Ok(samples)
}

fn check_aligned(candidate: &FieldSamples, reference: &FieldSamples) -> Result<()> {
    let same = |a: &[f64], b: &[f64], what: &str| -> Result<()> {
        if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-9) {
            return Err(Error::Shape(format!(
                "candidate and reference {what} grids differ"
            )));
        }
        Ok(())
    };
    same(&candidate.positions, &reference.positions, "position")?;
    same(&candidate.times, &reference.times, "time")?;
    for rows in [
        &candidate.temperature,
        &candidate.vapour,
        &reference.temperature,
        &reference.vapour,
    ] {
        if rows.len() != candidate.times.len()
            || rows.iter().any(|r| r.len() != candidate.positions.len())
        {
            return Err(Error::Shape(
                "field sample rows do not match the declared grids".into(),
            ));
        }
    }
    Ok(())
}

/// Euclidean error norms of a candidate against a reference on matching
/// grids. The initial instant is excluded from the time average when the
/// series starts at t* = 0.
pub fn compute_errors(candidate: &FieldSamples, reference: &FieldSamples) -> Result<ErrorReport> {
    check_aligned(candidate, reference)?;
    let skip = if candidate.times.first().is_some_and(|&t| t == 0.0) && candidate.times.len() > 1 {
        1
    } else {
        0
    };
    let n_t = candidate.times.len() - skip;
    if n_t == 0 {
        return Err(Error::Shape("no instants left to compare".into()));
    }
    let profile = |cand: &[Vec<f64>], refr: &[Vec<f64>]| -> Vec<f64> {
        (0..candidate.positions.len())
            .map(|i| {
                let sum: f64 = cand
                    .iter()
                    .zip(refr)
                    .skip(skip)
                    .map(|(c, r)| (c[i] - r[i]).powi(2))
                    .sum();
                (sum / n_t as f64).sqrt()
            })
            .collect()
    };
    let eps2_temperature = profile(&candidate.temperature, &reference.temperature);
    let eps2_vapour = profile(&candidate.vapour, &reference.vapour);
    let sup = |p: &[f64]| p.iter().cloned().fold(0.0f64, f64::max);
    Ok(ErrorReport {
        positions: candidate.positions.clone(),
        eps_inf_temperature: sup(&eps2_temperature),
        eps_inf_vapour: sup(&eps2_vapour),
        eps2_temperature,
        eps2_vapour,
        relative: Vec::new(),
        tail: None,
    })
}

/// Pointwise relative error |numeric - measured| / measured of one sensor.
pub fn relative_error(numeric: &[f64], measured: &[f64]) -> Result<Vec<f64>> {
    if numeric.len() != measured.len() {
        return Err(Error::Shape(format!(
            "sensor series lengths differ: {} vs {}",
            numeric.len(),
            measured.len()
        )));
    }
    numeric
        .iter()
        .zip(measured)
        .map(|(n, m)| {
            if m.abs() < f64::MIN_POSITIVE {
                Err(Error::Shape(
                    "measured value is zero; relative error undefined".into(),
                ))
            } else {
                Ok((n - m).abs() / m.abs())
            }
        })
        .collect()
}

/// Last-coefficient magnitudes |a_n|, |b_n| per instant, maximized over
/// layers.
pub fn tail_magnitudes(system: &SpectralSystem, traj: &Trajectory) -> TailDiagnostics {
    let n_layers = system.problem().n_layers();
    let mut moisture_tail = Vec::with_capacity(traj.states.len());
    let mut heat_tail = Vec::with_capacity(traj.states.len());
    for y in &traj.states {
        let mut a = 0.0f64;
        let mut b = 0.0f64;
        for l in 0..n_layers {
            a = a.max(system.moisture_coeffs(y, l).last().unwrap().abs());
            b = b.max(system.heat_coeffs(y, l).last().unwrap().abs());
        }
        moisture_tail.push(a);
        heat_tail.push(b);
    }
    TailDiagnostics {
        times: traj.times.clone(),
        moisture_tail,
        heat_tail,
    }
}

/// Dimensional flux split and moisture flow of a spectral trajectory at
/// `x_0`.
pub fn fluxes(system: &SpectralSystem, traj: &Trajectory, x_0: f64) -> Result<FluxSeries> {
    let problem = system.problem();
    let layer = problem.layer_of(x_0)?;
    let scales = &problem.scales;
    let heat_scale = scales.thermal_conductivity * scales.temperature_k / scales.length_m;
    let flow_scale = scales.moisture_transfer * scales.vapour_pressure_pa / scales.length_m;
    let mut out = FluxSeries {
        x_0,
        times: traj.times.clone(),
        sensible: Vec::with_capacity(traj.times.len()),
        latent: Vec::with_capacity(traj.times.len()),
        total: Vec::with_capacity(traj.times.len()),
        moisture_flow: Vec::with_capacity(traj.times.len()),
    };
    for y in &traj.states {
        let (_, v) = system.evaluate(y, x_0)?;
        let (u_x, v_x) = system.evaluate_gradient(y, x_0)?;
        let coeffs = problem.layers[layer].coeffs.eval(v)?;
        let q_s = -coeffs.k_t * heat_scale * u_x;
        let q_l = -coeffs.k_tm * heat_scale * v_x;
        out.sensible.push(q_s);
        out.latent.push(q_l);
        out.total.push(q_s + q_l);
        out.moisture_flow.push(-coeffs.k_m * flow_scale * v_x);
    }
    Ok(out)
}

/// Redimensionalized surface fluxes from a finite-difference trajectory.
/// Only the wall faces (`x_0` = 0 or 1) are supported; gradients there use
/// one-sided second-order stencils on the stored nodes.
pub fn grid_fluxes(
    problem: &DimensionlessProblem,
    traj: &GridTrajectory,
    x_0: f64,
) -> Result<FluxSeries> {
    let n = traj.positions.len();
    if n < 3 {
        return Err(Error::Shape(
            "surface gradients need at least three grid nodes".into(),
        ));
    }
    let left = if x_0 == 0.0 {
        true
    } else if x_0 == 1.0 {
        false
    } else {
        return Err(Error::Config(format!(
            "grid fluxes are defined on the faces x* = 0 and 1, not {x_0}"
        )));
    };
    let dx = traj.positions[1] - traj.positions[0];
    let edge = |f: &[f64]| -> (f64, f64) {
        if left {
            (f[0], (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx))
        } else {
            (
                f[n - 1],
                (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx),
            )
        }
    };
    let layer = if left { 0 } else { problem.layers.len() - 1 };
    let scales = &problem.scales;
    let heat_scale = scales.thermal_conductivity * scales.temperature_k / scales.length_m;
    let flow_scale = scales.moisture_transfer * scales.vapour_pressure_pa / scales.length_m;
    let mut out = FluxSeries {
        x_0,
        times: traj.times.clone(),
        sensible: Vec::with_capacity(traj.times.len()),
        latent: Vec::with_capacity(traj.times.len()),
        total: Vec::with_capacity(traj.times.len()),
        moisture_flow: Vec::with_capacity(traj.times.len()),
    };
    for (v_row, u_row) in traj.v.iter().zip(&traj.u) {
        let (v, v_x) = edge(v_row);
        let (_, u_x) = edge(u_row);
        let coeffs = problem.layers[layer].coeffs.eval(v)?;
        let q_s = -coeffs.k_t * heat_scale * u_x;
        let q_l = -coeffs.k_tm * heat_scale * v_x;
        out.sensible.push(q_s);
        out.latent.push(q_l);
        out.total.push(q_s + q_l);
        out.moisture_flow.push(-coeffs.k_m * flow_scale * v_x);
    }
    Ok(out)
}

/// One-sided power spectrum of a uniformly sampled series by direct
/// summation; adequate for the desk-scale series this crate produces.
/// Frequencies are in cycles per unit of the `times` spacing; power is
/// normalized so a constant series c has DC power c^2.
pub fn power_spectrum(times: &[f64], values: &[f64]) -> Result<PowerSpectrum> {
    let n = values.len();
    if n < 2 || times.len() != n {
        return Err(Error::Shape(
            "power spectrum needs at least two aligned samples".into(),
        ));
    }
    let dt = times[1] - times[0];
    if dt <= 0.0 {
        return Err(Error::Shape("sampling times must increase".into()));
    }
    for j in 1..n {
        if ((times[j] - times[j - 1]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(Error::Shape(
                "power spectrum needs uniform sampling; resample the series first".into(),
            ));
        }
    }
    let mut frequency = Vec::with_capacity(n / 2 + 1);
    let mut power = Vec::with_capacity(n / 2 + 1);
    for k in 0..=n / 2 {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (j, &x) in values.iter().enumerate() {
            let phase = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
            re += x * phase.cos();
            im += x * phase.sin();
        }
        frequency.push(k as f64 / (n as f64 * dt));
        power.push((re * re + im * im) / (n as f64 * n as f64));
    }
    Ok(PowerSpectrum { frequency, power })
}
