//! Tau-Galerkin spectral reduction of the coupled moisture/heat system.
//!
//! Within each layer, both fields are truncated Chebyshev series in the
//! layer coordinate x. Expanding the conservative equations gives the
//! non-conservative form
//!
//! ```text
//! dv/dt = nu(v) v_xx + lambda(v, v_x) v_x
//! du/dt = alpha(v) u_xx + beta u_x + gamma(v) v_xx + delta v_x
//! ```
//!
//! with nu = k_M*/c_M*, alpha = k_T*/c_T*, gamma = k_TM*/c_T*, and the
//! first-derivative coefficients built from the chain rule
//! dk/dx = (dk/dv) dv/dx. The residuals are projected on T_j under the
//! Chebyshev weight for j = 0..n-2, leaving the last two rows of every
//! field block to carry boundary or interface conditions algebraically;
//! the resulting index-1 DAE has the diagonal mass
//! (pi, pi/2, ..., pi/2, 0, 0) per block.
//!
//! Two equivalent assembly routes exist on purpose. [`SpectralSystem`]
//! collapses coefficients, derivatives, and projection pointwise at the
//! quadrature nodes (the path the integrator drives), while
//! [`build_matrices`] forms the six projected matrices G, Lambda, M, N, F, J
//! whose composite action reproduces the same rows; tests pin the two
//! routes against each other.

use nalgebra::DMatrix;

use crate::cheb::{basis_matrix, differentiate_into, mass_entry};
use crate::dae::DaeSystem;
use crate::materials::{DimlessCoefficientSet, WaterProperties};
use crate::problem::{
    BoundaryCondition, BoundaryForcing, DimensionlessProblem, Layer, ReferenceScales,
};
use crate::{ChebQuadrature, ChebSeries, Error, Result};

/// Pointwise non-conservative coefficients at the quadrature nodes.
///
/// `nu`, `alpha`, `gamma` are the bare coefficient ratios; they pair with
/// the metric-squared second-derivative operator. `lambda`, `beta`, `delta`
/// absorb both metric factors of their first-derivative pairings (one from
/// the spectral dv/dx inside the chain rule, one for the operator itself),
/// so the composite rows need no further scaling on those terms.
#[derive(Debug, Clone)]
pub struct NonConservativeCoeffs {
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta: Vec<f64>,
}

fn parabolicity(name: &'static str, node: usize, v: f64, value: f64) -> Result<f64> {
    if value > 0.0 {
        Ok(value)
    } else {
        Err(Error::Parabolicity {
            name,
            node,
            v,
            value,
        })
    }
}

/// Evaluates the six non-conservative coefficients of one layer at the
/// quadrature nodes, for the moisture state `v_series`.
pub fn nonconservative_at_nodes(
    coeffs: &DimlessCoefficientSet,
    v_series: &ChebSeries,
    layer: &Layer,
    rule: &ChebQuadrature,
) -> Result<NonConservativeCoeffs> {
    let m = rule.len();
    let deriv = v_series.derivatives();
    let s = layer.metric();
    let s2 = s * s;
    let mut out = NonConservativeCoeffs {
        nu: Vec::with_capacity(m),
        lambda: Vec::with_capacity(m),
        alpha: Vec::with_capacity(m),
        beta: Vec::with_capacity(m),
        gamma: Vec::with_capacity(m),
        delta: Vec::with_capacity(m),
    };
    for (node, &x) in rule.nodes().iter().enumerate() {
        let v = v_series.eval(x)?;
        let vp = deriv.first.eval(x)?;
        let (vals, derivs) = coeffs.eval_with_derivatives(v)?;
        parabolicity("c_M*", node, v, vals.c_m)?;
        parabolicity("c_T*", node, v, vals.c_t)?;
        out.nu
            .push(parabolicity("k_M*/c_M*", node, v, vals.k_m / vals.c_m)?);
        out.alpha
            .push(parabolicity("k_T*/c_T*", node, v, vals.k_t / vals.c_t)?);
        out.lambda.push(s2 * derivs.k_m * vp / vals.c_m);
        out.beta.push(s2 * derivs.k_t * vp / vals.c_t);
        out.gamma.push(vals.k_tm / vals.c_t);
        out.delta.push(s2 * derivs.k_tm * vp / vals.c_t);
    }
    Ok(out)
}

/// The six projected coefficient matrices of one layer, each (n-1) x (n+1):
/// X_{j,i} = (pi/m) sum_k coeff_k T_j(x_k) T_i(x_k). The moisture block acts
/// as G D^2 + Lambda D, the heat block as M D^2 + N D on its own field plus
/// the coupling F D^2 + J D on moisture, where D is the derivative
/// re-expansion (metric-squared applied to the D^2 inputs of G, M, F).
#[derive(Debug, Clone)]
pub struct LayerBlocks {
    pub g: DMatrix<f64>,
    pub lam: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub j: DMatrix<f64>,
}

/// Builds the six quadrature-projected matrices from pointwise coefficients.
pub fn build_matrices(ncc: &NonConservativeCoeffs, rule: &ChebQuadrature, n: usize) -> LayerBlocks {
    let basis = basis_matrix(rule, n);
    let project = |coeff: &[f64]| {
        let m = rule.len();
        let mut mat = DMatrix::zeros(n - 1, n + 1);
        for row in 0..n - 1 {
            for col in 0..=n {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += coeff[k] * basis[row * m + k] * basis[col * m + k];
                }
                mat[(row, col)] = acc * rule.weight();
            }
        }
        mat
    };
    LayerBlocks {
        g: project(&ncc.nu),
        lam: project(&ncc.lambda),
        m: project(&ncc.alpha),
        n: project(&ncc.beta),
        f: project(&ncc.gamma),
        j: project(&ncc.delta),
    }
}

/// Field values and outward-relevant derivatives at one face of one layer.
/// Derivatives are with respect to the global coordinate (metric applied).
#[derive(Debug, Clone, Copy)]
pub struct EdgeState {
    pub v: f64,
    pub u: f64,
    pub v_x: f64,
    pub u_x: f64,
}

/// Which wall face a boundary residual belongs to; the face flips the sign
/// of the conduction terms relative to the transfer terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Algebraic residual pair (moisture, heat) of one outer face.
///
/// Robin faces balance film transfer against conduction, with rain adding a
/// prescribed moisture flux and its sensible enthalpy stream; Dirichlet
/// faces simply pin the field values to the ambient signals.
pub fn boundary_residuals(
    edge: &EdgeState,
    side: Side,
    forcing: &BoundaryForcing,
    coeffs: &DimlessCoefficientSet,
    t: f64,
    scales: &ReferenceScales,
    water: &WaterProperties,
) -> Result<(f64, f64)> {
    let (u_inf, v_inf) = forcing.ambient(t, scales)?;
    match forcing.condition {
        BoundaryCondition::Dirichlet => Ok((edge.v - v_inf, edge.u - u_inf)),
        BoundaryCondition::Robin { bi_m, bi_t, bi_tm } => {
            let vals = coeffs.eval(edge.v)?;
            let rain = forcing.rain_flux(t, scales)?;
            let h_l = if rain == 0.0 {
                0.0
            } else {
                forcing.liquid_enthalpy(t, scales, water)?
            };
            let sign = match side {
                Side::Left => -1.0,
                Side::Right => 1.0,
            };
            let omega = bi_m * (edge.v - v_inf) - rain + sign * vals.k_m * edge.v_x;
            let kappa = bi_t * (edge.u - u_inf) + bi_tm * (edge.v - v_inf) - h_l * rain
                + sign * (vals.k_t * edge.u_x + vals.k_tm * edge.v_x);
            Ok((omega, kappa))
        }
    }
}

/// Interface residuals between two adjacent layers: field continuity for
/// both fields plus flux continuity, each side's fluxes evaluated with its
/// own coefficient closures at its own interface trace.
pub fn interface_residuals(
    left: &EdgeState,
    right: &EdgeState,
    coeffs_left: &DimlessCoefficientSet,
    coeffs_right: &DimlessCoefficientSet,
) -> Result<[f64; 4]> {
    let cl = coeffs_left.eval(left.v)?;
    let cr = coeffs_right.eval(right.v)?;
    Ok([
        left.v - right.v,
        cl.k_m * left.v_x - cr.k_m * right.v_x,
        left.u - right.u,
        (cl.k_t * left.u_x + cl.k_tm * left.v_x) - (cr.k_t * right.u_x + cr.k_tm * right.v_x),
    ])
}

/// Snapshot of the projected system at one state: the diagonal mass, the
/// per-layer matrix blocks, and the algebraic residual values destined for
/// the last rows of each block.
#[derive(Debug, Clone)]
pub struct ProjectedSystem {
    pub mass: Vec<f64>,
    pub blocks: Vec<LayerBlocks>,
    /// (global row index, residual value) of every algebraic row.
    pub constraint_rows: Vec<(usize, f64)>,
    n: usize,
    metrics: Vec<f64>,
}

impl ProjectedSystem {
    /// Assembles the full right-hand side through the matrix route:
    /// differential rows from the blocks, algebraic rows from the stored
    /// residual values. The state must be the one the snapshot was built at
    /// for the algebraic rows to be meaningful.
    pub fn full_rhs(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let n_modes = n + 1;
        let mut out = vec![0.0; y.len()];
        let mut d1 = vec![0.0; n_modes];
        let mut d2 = vec![0.0; n_modes];
        for (layer, blocks) in self.blocks.iter().enumerate() {
            let s2 = self.metrics[layer] * self.metrics[layer];
            let a_off = 2 * n_modes * layer;
            let b_off = a_off + n_modes;
            let a = &y[a_off..a_off + n_modes];
            let b = &y[b_off..b_off + n_modes];

            differentiate_into(a, &mut d1);
            let da = d1.clone();
            differentiate_into(&da, &mut d2);
            let dda = d2.clone();
            differentiate_into(b, &mut d1);
            let db = d1.clone();
            differentiate_into(&db, &mut d2);
            let ddb = d2.clone();

            for row in 0..n - 1 {
                let mut mo = 0.0;
                let mut he = 0.0;
                for col in 0..n_modes {
                    mo += blocks.g[(row, col)] * s2 * dda[col] + blocks.lam[(row, col)] * da[col];
                    he += blocks.m[(row, col)] * s2 * ddb[col]
                        + blocks.n[(row, col)] * db[col]
                        + blocks.f[(row, col)] * s2 * dda[col]
                        + blocks.j[(row, col)] * da[col];
                }
                out[a_off + row] = mo;
                out[b_off + row] = he;
            }
        }
        for &(row, value) in &self.constraint_rows {
            out[row] = value;
        }
        out
    }
}

/// Per-layer scratch holding derivative coefficients and node traces.
#[derive(Debug, Clone)]
struct Scratch {
    da: Vec<f64>,
    dda: Vec<f64>,
    db: Vec<f64>,
    ddb: Vec<f64>,
    v: Vec<f64>,
    vp: Vec<f64>,
    vpp: Vec<f64>,
    u: Vec<f64>,
    up: Vec<f64>,
    upp: Vec<f64>,
}

/// The assembled reduced-order model: a [`DaeSystem`] over the stacked
/// spectral coefficients of all layers.
///
/// State layout: layer blocks in order; within layer l the moisture
/// coefficients occupy `[2 N l, 2 N l + N)` and the heat coefficients
/// `[2 N l + N, 2 N l + 2 N)`, N modes each. Within each block, rows
/// 0..n-2 are the projected PDE rows and rows n-1, n hold the left and
/// right condition of that layer: the outer boundary residual on outer
/// faces, field continuity on the upstream face, flux continuity on the
/// downstream face.
///
/// `rhs` evaluation is pure in (t, y); clone the system to evaluate
/// concurrently from several threads.
#[derive(Debug, Clone)]
pub struct SpectralSystem {
    problem: DimensionlessProblem,
    n: usize,
    rule: ChebQuadrature,
    basis: Vec<f64>,
    mass: Vec<f64>,
    scratch: Scratch,
}

/// Builds the reduced system with `modes` coefficients per field per layer
/// and `quad_nodes` quadrature points, checking that the algebraic rows are
/// solvable at the projected initial state.
pub fn assemble_dae(
    problem: DimensionlessProblem,
    modes: usize,
    quad_nodes: usize,
) -> Result<SpectralSystem> {
    problem.validate()?;
    if modes < 3 {
        return Err(Error::Assembly(format!(
            "need at least 3 modes per field for two algebraic rows, got {modes}"
        )));
    }
    if quad_nodes < modes {
        return Err(Error::Assembly(format!(
            "quadrature nodes ({quad_nodes}) must be at least the mode count ({modes})"
        )));
    }
    let n = modes - 1;
    let rule = ChebQuadrature::new(quad_nodes)?;
    let basis = basis_matrix(&rule, n);
    let n_layers = problem.n_layers();

    let mut mass = Vec::with_capacity(2 * modes * n_layers);
    for _ in 0..2 * n_layers {
        for row in 0..=n {
            mass.push(if row <= n - 2 {
                mass_entry::<f64>(row)
            } else {
                0.0
            });
        }
    }

    let m = rule.len();
    let scratch = Scratch {
        da: vec![0.0; modes],
        dda: vec![0.0; modes],
        db: vec![0.0; modes],
        ddb: vec![0.0; modes],
        v: vec![0.0; m],
        vp: vec![0.0; m],
        vpp: vec![0.0; m],
        u: vec![0.0; m],
        up: vec![0.0; m],
        upp: vec![0.0; m],
    };
    let mut system = SpectralSystem {
        problem,
        n,
        rule,
        basis,
        mass,
        scratch,
    };
    system.check_algebraic_rows()?;
    Ok(system)
}

impl SpectralSystem {
    /// N, the coefficient count per field per layer.
    pub fn modes(&self) -> usize {
        self.n + 1
    }

    pub fn problem(&self) -> &DimensionlessProblem {
        &self.problem
    }

    pub fn quadrature(&self) -> &ChebQuadrature {
        &self.rule
    }

    fn offsets(&self, layer: usize) -> (usize, usize) {
        let a = 2 * self.modes() * layer;
        (a, a + self.modes())
    }

    /// Moisture coefficient slice of one layer.
    pub fn moisture_coeffs<'y>(&self, y: &'y [f64], layer: usize) -> &'y [f64] {
        let (a, b) = self.offsets(layer);
        &y[a..b]
    }

    /// Heat coefficient slice of one layer.
    pub fn heat_coeffs<'y>(&self, y: &'y [f64], layer: usize) -> &'y [f64] {
        let (_, b) = self.offsets(layer);
        &y[b..b + self.modes()]
    }

    /// Projects the problem's initial fields layer by layer (same rule as
    /// the assembly quadrature). The result generally violates the
    /// algebraic rows; run [`crate::dae::make_consistent`] before
    /// integrating.
    pub fn initial_state(&self) -> Result<Vec<f64>> {
        let mut y = Vec::with_capacity(self.mass.len());
        for layer in &self.problem.layers {
            let v0 = self.rule.project(self.n, |x| {
                self.problem
                    .initial_vapour_pressure
                    .eval(layer.from_spectral(x))
            })?;
            let u0 = self.rule.project(self.n, |x| {
                self.problem
                    .initial_temperature
                    .eval(layer.from_spectral(x))
            })?;
            y.extend_from_slice(v0.coeffs());
            y.extend_from_slice(u0.coeffs());
        }
        Ok(y)
    }

    /// Field values (u, v) at a global position, using the owning layer
    /// (interface points resolve to the left layer).
    pub fn evaluate(&self, y: &[f64], x_star: f64) -> Result<(f64, f64)> {
        let layer = self.problem.layer_of(x_star)?;
        let x = self.problem.layers[layer].to_spectral(x_star)?;
        let u = crate::cheb::eval_slice(self.heat_coeffs(y, layer), x);
        let v = crate::cheb::eval_slice(self.moisture_coeffs(y, layer), x);
        Ok((u, v))
    }

    /// Global-coordinate gradients (du/dx*, dv/dx*) at a position.
    pub fn evaluate_gradient(&self, y: &[f64], x_star: f64) -> Result<(f64, f64)> {
        let layer = self.problem.layer_of(x_star)?;
        let lay = &self.problem.layers[layer];
        let x = lay.to_spectral(x_star)?;
        let s = lay.metric();
        let mut d = vec![0.0; self.modes()];
        differentiate_into(self.heat_coeffs(y, layer), &mut d);
        let u_x = s * crate::cheb::eval_slice(&d, x);
        differentiate_into(self.moisture_coeffs(y, layer), &mut d);
        let v_x = s * crate::cheb::eval_slice(&d, x);
        Ok((u_x, v_x))
    }

    /// Face trace of one layer's state; `Side::Left` is the layer's own
    /// upstream face. Derivatives are global.
    pub fn edge_state(&self, y: &[f64], layer: usize, side: Side) -> EdgeState {
        let s = self.problem.layers[layer].metric();
        let a = self.moisture_coeffs(y, layer);
        let b = self.heat_coeffs(y, layer);
        let mut da = vec![0.0; self.modes()];
        let mut db = vec![0.0; self.modes()];
        differentiate_into(a, &mut da);
        differentiate_into(b, &mut db);
        let sum = |c: &[f64]| -> f64 {
            match side {
                Side::Right => c.iter().sum(),
                Side::Left => c
                    .iter()
                    .enumerate()
                    .map(|(i, &ci)| if i % 2 == 0 { ci } else { -ci })
                    .sum(),
            }
        };
        EdgeState {
            v: sum(a),
            u: sum(b),
            v_x: s * sum(&da),
            u_x: s * sum(&db),
        }
    }

    /// Matrix-route snapshot of the system at one state (diagnostics and
    /// cross-checks; the integration path collapses pointwise instead).
    pub fn projected_at(&mut self, t: f64, y: &[f64]) -> Result<ProjectedSystem> {
        let n_modes = self.modes();
        let mut blocks = Vec::with_capacity(self.problem.n_layers());
        for (idx, layer) in self.problem.layers.iter().enumerate() {
            let a = &y[2 * n_modes * idx..2 * n_modes * idx + n_modes];
            let series = ChebSeries::new(a.to_vec())?;
            let ncc = nonconservative_at_nodes(&layer.coeffs, &series, layer, &self.rule)?;
            blocks.push(build_matrices(&ncc, &self.rule, self.n));
        }
        let mut full = vec![0.0; y.len()];
        self.rhs(t, y, &mut full)?;
        let constraint_rows = self
            .mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 0.0)
            .map(|(i, _)| (i, full[i]))
            .collect();
        Ok(ProjectedSystem {
            mass: self.mass.clone(),
            blocks,
            constraint_rows,
            n: self.n,
            metrics: self.problem.layers.iter().map(|l| l.metric()).collect(),
        })
    }

    /// Nonsingularity of the algebraic subsystem at the initial projection,
    /// by finite differences on the condition rows.
    fn check_algebraic_rows(&mut self) -> Result<()> {
        let mut y = self.initial_state()?;
        let rows: Vec<usize> = self
            .mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m == 0.0)
            .map(|(i, _)| i)
            .collect();
        let k = rows.len();
        let mut base = vec![0.0; y.len()];
        self.rhs(0.0, &y, &mut base)?;
        let mut pert = vec![0.0; y.len()];
        let mut jac = DMatrix::zeros(k, k);
        for (q, &col) in rows.iter().enumerate() {
            let saved = y[col];
            let e = f64::EPSILON.sqrt() * saved.abs().max(1e-3);
            y[col] = saved + e;
            self.rhs(0.0, &y, &mut pert)?;
            y[col] = saved;
            for (p, &row) in rows.iter().enumerate() {
                jac[(p, q)] = (pert[row] - base[row]) / e;
            }
        }
        if !jac.lu().is_invertible() {
            return Err(Error::Assembly(
                "boundary/interface rows are singular at the initial state".into(),
            ));
        }
        Ok(())
    }
}

impl DaeSystem for SpectralSystem {
    fn dim(&self) -> usize {
        self.mass.len()
    }

    fn mass_diagonal(&self) -> &[f64] {
        &self.mass
    }

    fn rhs(&mut self, t: f64, y: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n;
        let n_modes = n + 1;
        let m = self.rule.len();
        let w = self.rule.weight();
        let n_layers = self.problem.n_layers();
        if y.len() != self.mass.len() || out.len() != self.mass.len() {
            return Err(Error::Shape(format!(
                "state length {} does not match system dimension {}",
                y.len(),
                self.mass.len()
            )));
        }

        for (idx, layer) in self.problem.layers.iter().enumerate() {
            let a_off = 2 * n_modes * idx;
            let b_off = a_off + n_modes;
            let a = &y[a_off..a_off + n_modes];
            let b = &y[b_off..b_off + n_modes];
            let sc = &mut self.scratch;
            differentiate_into(a, &mut sc.da);
            differentiate_into(&sc.da, &mut sc.dda);
            differentiate_into(b, &mut sc.db);
            differentiate_into(&sc.db, &mut sc.ddb);

            // node traces of both fields and their spectral derivatives
            for k in 0..m {
                let mut acc = [0.0f64; 6];
                for i in 0..n_modes {
                    let t_ik = self.basis[i * m + k];
                    acc[0] += a[i] * t_ik;
                    acc[1] += sc.da[i] * t_ik;
                    acc[2] += sc.dda[i] * t_ik;
                    acc[3] += b[i] * t_ik;
                    acc[4] += sc.db[i] * t_ik;
                    acc[5] += sc.ddb[i] * t_ik;
                }
                sc.v[k] = acc[0];
                sc.vp[k] = acc[1];
                sc.vpp[k] = acc[2];
                sc.u[k] = acc[3];
                sc.up[k] = acc[4];
                sc.upp[k] = acc[5];
            }

            let s = layer.metric();
            let s2 = s * s;
            // collapsed non-conservative right-hand sides at the nodes
            for k in 0..m {
                let v_k = sc.v[k];
                let (vals, derivs) = layer.coeffs.eval_with_derivatives(v_k)?;
                parabolicity("c_M*", k, v_k, vals.c_m)?;
                parabolicity("c_T*", k, v_k, vals.c_t)?;
                parabolicity("k_M*/c_M*", k, v_k, vals.k_m / vals.c_m)?;
                parabolicity("k_T*/c_T*", k, v_k, vals.k_t / vals.c_t)?;
                let vp = sc.vp[k];
                let mo = s2 * (vals.k_m * sc.vpp[k] + derivs.k_m * vp * vp) / vals.c_m;
                let he = s2
                    * (vals.k_t * sc.upp[k]
                        + derivs.k_t * vp * sc.up[k]
                        + vals.k_tm * sc.vpp[k]
                        + derivs.k_tm * vp * vp)
                    / vals.c_t;
                // reuse the trace buffers for the collapsed values
                sc.vpp[k] = mo;
                sc.upp[k] = he;
            }

            for row in 0..n - 1 {
                let mut mo = 0.0;
                let mut he = 0.0;
                for k in 0..m {
                    let t_jk = self.basis[row * m + k];
                    mo += t_jk * sc.vpp[k];
                    he += t_jk * sc.upp[k];
                }
                out[a_off + row] = w * mo;
                out[b_off + row] = w * he;
            }
        }

        // algebraic rows: outer boundaries and interior interfaces
        let problem = &self.problem;
        for idx in 0..n_layers {
            let a_off = 2 * n_modes * idx;
            let b_off = a_off + n_modes;
            if idx == 0 {
                let edge = self.edge_state(y, 0, Side::Left);
                let (omega, kappa) = boundary_residuals(
                    &edge,
                    Side::Left,
                    &problem.left,
                    &problem.layers[0].coeffs,
                    t,
                    &problem.scales,
                    &problem.water,
                )?;
                out[a_off + n - 1] = omega;
                out[b_off + n - 1] = kappa;
            }
            if idx == n_layers - 1 {
                let edge = self.edge_state(y, idx, Side::Right);
                let (omega, kappa) = boundary_residuals(
                    &edge,
                    Side::Right,
                    &problem.right,
                    &problem.layers[idx].coeffs,
                    t,
                    &problem.scales,
                    &problem.water,
                )?;
                out[a_off + n] = omega;
                out[b_off + n] = kappa;
            }
            if idx + 1 < n_layers {
                let left_edge = self.edge_state(y, idx, Side::Right);
                let right_edge = self.edge_state(y, idx + 1, Side::Left);
                let theta = interface_residuals(
                    &left_edge,
                    &right_edge,
                    &problem.layers[idx].coeffs,
                    &problem.layers[idx + 1].coeffs,
                )?;
                let a_next = 2 * n_modes * (idx + 1);
                let b_next = a_next + n_modes;
                // continuity owns the upstream rows of the next layer,
                // flux continuity the downstream rows of this one
                out[a_next + n - 1] = theta[0];
                out[a_off + n] = theta[1];
                out[b_next + n - 1] = theta[2];
                out[b_off + n] = theta[3];
            }
        }
        Ok(())
    }
}
