//! Semi-implicit finite differences for the coupled moisture/heat system.
//!
//! Vertex-centered uniform grid on the global coordinate. Each step freezes
//! every coefficient at the old state, solves the moisture equation with its
//! own diffusion implicit, then solves the heat equation the same way using
//! the fresh moisture field in the explicit cross-diffusion term. One
//! tridiagonal solve per field per step, no sub-iterations; the scheme is
//! first order in time and second order in space.
//!
//! Face diffusivities are harmonic means of the endpoint-node values, each
//! face evaluated with the coefficient closures of the layer the face lies
//! in, so fluxes stay continuous across cells and material interfaces.
//! Robin faces use a half-cell flux balance: the boundary node owns the
//! cell of width dx/2 whose outer flux is pinned by the surface condition
//! (for moisture Bi_M (v_0 - v_inf) - g*, for heat the total conducted
//! flux k_T du/dx + k_TM dv/dx taken from its balance in one piece), and
//! whose inner flux is the usual face difference. This keeps the scheme
//! conservative and second order for variable coefficients; the
//! fresh-moisture part of the heat row lands on the right-hand side.
//! Ambient forcing is taken at the new time level; Dirichlet faces pin
//! the node.

use crate::materials::CoeffValues;
use crate::problem::{BoundaryCondition, DimensionlessProblem};
use crate::{Error, Result};

/// Uniform grid with the material interfaces aligned on nodes.
#[derive(Debug, Clone)]
pub struct FdGrid {
    n_nodes: usize,
    dx: f64,
    dt: f64,
    /// (left, right) layer adjacency of each node; equal except on
    /// interface nodes. The face between nodes i and i+1 lies in layer
    /// `node_layers[i].1 == node_layers[i+1].0`.
    node_layers: Vec<(usize, usize)>,
}

impl FdGrid {
    pub fn new(problem: &DimensionlessProblem, dx: f64, dt: f64) -> Result<Self> {
        if !(dx > 0.0) || !(dt > 0.0) {
            return Err(Error::Config(format!(
                "grid spacings must be positive, got dx* = {dx}, dt* = {dt}"
            )));
        }
        let cells = (1.0 / dx).round();
        if (cells * dx - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "dx* = {dx} does not divide the unit domain"
            )));
        }
        let n_nodes = cells as usize + 1;
        let on_node = |x: f64| (x / dx - (x / dx).round()).abs() <= 1e-9;
        for layer in &problem.layers {
            if !on_node(layer.extent.0) || !on_node(layer.extent.1) {
                return Err(Error::Config(format!(
                    "layer boundary at x* = {} does not land on a grid node",
                    layer.extent.1
                )));
            }
        }
        let mut face_layer = Vec::with_capacity(n_nodes - 1);
        for i in 0..n_nodes - 1 {
            face_layer.push(problem.layer_of((i as f64 + 0.5) * dx)?);
        }
        let mut node_layers = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let left = if i == 0 {
                face_layer[0]
            } else {
                face_layer[i - 1]
            };
            let right = if i == n_nodes - 1 {
                face_layer[n_nodes - 2]
            } else {
                face_layer[i]
            };
            node_layers.push((left, right));
        }
        Ok(Self {
            n_nodes,
            dx,
            dt,
            node_layers,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Degrees of freedom as counted for solver comparisons: two fields on
    /// the cell count (the classical bookkeeping for this scheme).
    pub fn dof(&self) -> usize {
        2 * (self.n_nodes - 1)
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_nodes).map(|i| i as f64 * self.dx).collect()
    }

    /// Indices of nodes sitting on interior material interfaces.
    pub fn interface_nodes(&self) -> Vec<usize> {
        self.node_layers
            .iter()
            .enumerate()
            .filter(|(_, (l, r))| l != r)
            .map(|(i, _)| i)
            .collect()
    }

    /// Node count inside one layer region, both end nodes included.
    pub fn nodes_in_layer(&self, layer: usize) -> usize {
        self.node_layers
            .iter()
            .filter(|(l, r)| *l == layer || *r == layer)
            .count()
    }
}

/// Grid solution sampled on the output instants.
#[derive(Debug, Clone)]
pub struct GridTrajectory {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Moisture field rows, one per output instant.
    pub v: Vec<Vec<f64>>,
    /// Temperature field rows, one per output instant.
    pub u: Vec<Vec<f64>>,
}

/// Coefficient values of a node under its adjacent layers' closures.
#[derive(Clone, Copy)]
struct NodeVals {
    left: CoeffValues,
    right: CoeffValues,
}

/// Reusable step buffers; construct once per grid and pass to every step.
pub struct ImexWorkspace {
    vals: Vec<NodeVals>,
    km_face: Vec<f64>,
    kt_face: Vec<f64>,
    ktm_face: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl ImexWorkspace {
    pub fn new(grid: &FdGrid) -> Self {
        let nn = grid.n_nodes;
        Self {
            vals: vec![
                NodeVals {
                    left: CoeffValues::default(),
                    right: CoeffValues::default(),
                };
                nn
            ],
            km_face: vec![0.0; nn - 1],
            kt_face: vec![0.0; nn - 1],
            ktm_face: vec![0.0; nn - 1],
            lower: vec![0.0; nn],
            diag: vec![0.0; nn],
            upper: vec![0.0; nn],
            rhs: vec![0.0; nn],
        }
    }
}

/// Advances the problem from t* = 0 to `t_end` on the grid, sampling every
/// `output_dt`. Both `t_end` and `output_dt` must be multiples of the grid's
/// time step, with `output_dt` dividing `t_end`.
pub fn run_imex(
    problem: &DimensionlessProblem,
    grid: &FdGrid,
    t_end: f64,
    output_dt: f64,
) -> Result<GridTrajectory> {
    problem.validate()?;
    let dt = grid.dt;
    let n_steps = (t_end / dt).round() as usize;
    if (n_steps as f64 * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Config(format!(
            "dt* = {dt} does not divide the horizon {t_end}"
        )));
    }
    let out_every = (output_dt / dt).round() as usize;
    if out_every == 0 || (out_every as f64 * dt - output_dt).abs() > 1e-9 * output_dt {
        return Err(Error::Config(format!(
            "dt* = {dt} does not divide the output spacing {output_dt}"
        )));
    }
    if n_steps % out_every != 0 {
        return Err(Error::Config(format!(
            "output spacing {output_dt} does not divide the horizon {t_end}"
        )));
    }

    let nn = grid.n_nodes;
    let mut v: Vec<f64> = (0..nn)
        .map(|i| problem.initial_vapour_pressure.eval(i as f64 * grid.dx))
        .collect();
    let mut u: Vec<f64> = (0..nn)
        .map(|i| problem.initial_temperature.eval(i as f64 * grid.dx))
        .collect();

    let mut ws = ImexWorkspace::new(grid);

    let times: Vec<f64> = (0..=n_steps / out_every)
        .map(|k| k as f64 * output_dt)
        .collect();
    let mut traj = GridTrajectory {
        times,
        positions: grid.positions(),
        v: Vec::with_capacity(n_steps / out_every + 1),
        u: Vec::with_capacity(n_steps / out_every + 1),
    };
    traj.v.push(v.clone());
    traj.u.push(u.clone());

    for step in 0..n_steps {
        let t_new = (step + 1) as f64 * dt;
        imex_step(problem, grid, t_new, &mut v, &mut u, &mut ws)?;
        if (step + 1) % out_every == 0 {
            traj.v.push(v.clone());
            traj.u.push(u.clone());
        }
    }
    Ok(traj)
}

/// One semi-implicit step to the new time level `t_new`; `v`/`u` are
/// replaced by the advanced fields.
pub fn imex_step(
    problem: &DimensionlessProblem,
    grid: &FdGrid,
    t_new: f64,
    v: &mut [f64],
    u: &mut [f64],
    ws: &mut ImexWorkspace,
) -> Result<()> {
    let nn = grid.n_nodes;
    let dx = grid.dx;
    let dt = grid.dt;
    let r = dt / (dx * dx);

    // freeze all coefficients at the old state
    for i in 0..nn {
        let (l, rgt) = grid.node_layers[i];
        let left = eval_checked(problem, l, i, v[i])?;
        let right = if rgt == l {
            left
        } else {
            eval_checked(problem, rgt, i, v[i])?
        };
        ws.vals[i] = NodeVals { left, right };
    }
    // zero-safe harmonic mean: the cross conductivity k_TM may vanish
    let harmonic = |a: f64, b: f64| {
        if a + b == 0.0 {
            0.0
        } else {
            2.0 * a * b / (a + b)
        }
    };
    for f in 0..nn - 1 {
        // the face's endpoint values under the face's own layer closures
        let a = ws.vals[f].right;
        let b = ws.vals[f + 1].left;
        ws.km_face[f] = harmonic(a.k_m, b.k_m);
        ws.kt_face[f] = harmonic(a.k_t, b.k_t);
        ws.ktm_face[f] = harmonic(a.k_tm, b.k_tm);
    }

    // moisture solve: implicit diffusion, frozen coefficients
    for i in 1..nn - 1 {
        let c = 0.5 * (ws.vals[i].left.c_m + ws.vals[i].right.c_m);
        ws.lower[i] = -r * ws.km_face[i - 1];
        ws.upper[i] = -r * ws.km_face[i];
        ws.diag[i] = c + r * (ws.km_face[i - 1] + ws.km_face[i]);
        ws.rhs[i] = c * v[i];
    }
    moisture_boundary_rows(problem, grid, t_new, v, ws, r, true)?;
    moisture_boundary_rows(problem, grid, t_new, v, ws, r, false)?;
    thomas(&ws.lower, &mut ws.diag, &ws.upper, &mut ws.rhs, t_new)?;
    let v_new: Vec<f64> = ws.rhs.clone();

    // heat solve: own diffusion implicit, cross-diffusion of the fresh
    // moisture field explicit with frozen k_TM faces
    for i in 1..nn - 1 {
        let c = 0.5 * (ws.vals[i].left.c_t + ws.vals[i].right.c_t);
        let cross = (ws.ktm_face[i] * (v_new[i + 1] - v_new[i])
            - ws.ktm_face[i - 1] * (v_new[i] - v_new[i - 1]))
            / (dx * dx);
        ws.lower[i] = -r * ws.kt_face[i - 1];
        ws.upper[i] = -r * ws.kt_face[i];
        ws.diag[i] = c + r * (ws.kt_face[i - 1] + ws.kt_face[i]);
        ws.rhs[i] = c * u[i] + dt * cross;
    }
    heat_boundary_rows(problem, grid, t_new, u, &v_new, ws, r, true)?;
    heat_boundary_rows(problem, grid, t_new, u, &v_new, ws, r, false)?;
    thomas(&ws.lower, &mut ws.diag, &ws.upper, &mut ws.rhs, t_new)?;
    u.copy_from_slice(&ws.rhs);
    v.copy_from_slice(&v_new);
    Ok(())
}

fn eval_checked(
    problem: &DimensionlessProblem,
    layer: usize,
    node: usize,
    v: f64,
) -> Result<CoeffValues> {
    let vals = problem.layers[layer].coeffs.eval(v)?;
    for (name, value) in [
        ("c_M*", vals.c_m),
        ("c_T*", vals.c_t),
        ("k_M*", vals.k_m),
        ("k_T*", vals.k_t),
    ] {
        if value <= 0.0 {
            return Err(Error::Parabolicity {
                name,
                node,
                v,
                value,
            });
        }
    }
    Ok(vals)
}

#[allow(clippy::too_many_arguments)]
fn moisture_boundary_rows(
    problem: &DimensionlessProblem,
    grid: &FdGrid,
    t_new: f64,
    v: &[f64],
    ws: &mut ImexWorkspace,
    r: f64,
    left: bool,
) -> Result<()> {
    let nn = grid.n_nodes;
    let dx = grid.dx;
    let (idx, face, forcing) = if left {
        (0usize, ws.km_face[0], &problem.left)
    } else {
        (nn - 1, ws.km_face[nn - 2], &problem.right)
    };
    let (_, v_inf) = forcing.ambient(t_new, &problem.scales)?;
    match forcing.condition {
        BoundaryCondition::Dirichlet => {
            ws.lower[idx] = 0.0;
            ws.upper[idx] = 0.0;
            ws.diag[idx] = 1.0;
            ws.rhs[idx] = v_inf;
        }
        BoundaryCondition::Robin { bi_m, .. } => {
            let g = forcing.rain_flux(t_new, &problem.scales)?;
            // half-cell balance: the outer flux of the dx/2 boundary cell
            // is pinned by the surface condition, the inner one by the
            // usual face difference; using the face diffusivity on both
            // sides keeps the row consistent for variable k_M
            let k_sum = 2.0 * face;
            let c = 0.5 * (ws.vals[idx].left.c_m + ws.vals[idx].right.c_m);
            ws.diag[idx] = c + r * k_sum + 2.0 * r * dx * bi_m;
            ws.rhs[idx] = c * v[idx] + 2.0 * r * dx * (bi_m * v_inf + g);
            if left {
                ws.lower[idx] = 0.0;
                ws.upper[idx] = -r * k_sum;
            } else {
                ws.lower[idx] = -r * k_sum;
                ws.upper[idx] = 0.0;
            }
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn heat_boundary_rows(
    problem: &DimensionlessProblem,
    grid: &FdGrid,
    t_new: f64,
    u: &[f64],
    v_new: &[f64],
    ws: &mut ImexWorkspace,
    r: f64,
    left: bool,
) -> Result<()> {
    let nn = grid.n_nodes;
    let dx = grid.dx;
    let (idx, face, forcing) = if left {
        (0usize, ws.kt_face[0], &problem.left)
    } else {
        (nn - 1, ws.kt_face[nn - 2], &problem.right)
    };
    let (u_inf, v_inf) = forcing.ambient(t_new, &problem.scales)?;
    match forcing.condition {
        BoundaryCondition::Dirichlet => {
            ws.lower[idx] = 0.0;
            ws.upper[idx] = 0.0;
            ws.diag[idx] = 1.0;
            ws.rhs[idx] = u_inf;
        }
        BoundaryCondition::Robin { bi_t, bi_tm, .. } => {
            let g = forcing.rain_flux(t_new, &problem.scales)?;
            let h_l = if g == 0.0 {
                0.0
            } else {
                forcing.liquid_enthalpy(t_new, &problem.scales, &problem.water)?
            };
            let (ktm_face, v_adj) = if left {
                (ws.ktm_face[0], v_new[1])
            } else {
                (ws.ktm_face[nn - 2], v_new[nn - 2])
            };
            // half-cell balance on the total conducted flux
            // k_T du/dx + k_TM dv/dx: the surface condition pins the outer
            // flux of the dx/2 cell in one piece; the moisture part lands
            // on the right-hand side since v is already solved
            let k_sum = 2.0 * face;
            let k_sum_tm = 2.0 * ktm_face;
            let c = 0.5 * (ws.vals[idx].left.c_t + ws.vals[idx].right.c_t);
            let known = bi_tm * (v_new[idx] - v_inf) - h_l * g;
            ws.diag[idx] = c + r * k_sum + 2.0 * r * dx * bi_t;
            ws.rhs[idx] = c * u[idx]
                + r * k_sum_tm * (v_adj - v_new[idx])
                + 2.0 * r * dx * (bi_t * u_inf - known);
            if left {
                ws.lower[idx] = 0.0;
                ws.upper[idx] = -r * k_sum;
            } else {
                ws.lower[idx] = -r * k_sum;
                ws.upper[idx] = 0.0;
            }
        }
    }
    Ok(())
}

/// Thomas algorithm, in place; `rhs` holds the solution afterwards.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64], t: f64) -> Result<()> {
    let n = diag.len();
    for i in 1..n {
        if diag[i - 1].abs() < f64::MIN_POSITIVE {
            return Err(Error::Stiffness {
                t,
                reason: format!("tridiagonal pivot vanished at row {}", i - 1),
            });
        }
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if diag[n - 1].abs() < f64::MIN_POSITIVE {
        return Err(Error::Stiffness {
            t,
            reason: format!("tridiagonal pivot vanished at row {}", n - 1),
        });
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::materials::{CoefficientFit, DimlessCoefficientSet, WaterProperties};
    use crate::problem::{AmbientSignal, BoundaryForcing, InitialField, Layer, ReferenceScales};
    use approx::assert_abs_diff_eq;

    fn constant(value: f64) -> CoefficientFit {
        CoefficientFit::Polynomial {
            coeffs: vec![value],
        }
    }

    fn constant_set(c_m: f64, c_t: f64, k_m: f64, k_t: f64, k_tm: f64) -> DimlessCoefficientSet {
        DimlessCoefficientSet {
            c_m: constant(c_m),
            c_t: constant(c_t),
            k_m: constant(k_m),
            k_t: constant(k_t),
            k_tm: constant(k_tm),
        }
    }

    fn scales() -> ReferenceScales {
        ReferenceScales {
            time_s: 3600.0,
            temperature_k: 293.15,
            vapour_pressure_pa: 1166.9,
            length_m: 0.1,
            moisture_transfer: 5.5e-9,
            thermal_conductivity: 0.6,
        }
    }

    fn dirichlet(u_inf: f64, v_inf: f64) -> BoundaryForcing {
        BoundaryForcing {
            condition: BoundaryCondition::Dirichlet,
            ambient_temperature: AmbientSignal::Constant { value: u_inf },
            ambient_vapour_pressure: AmbientSignal::Constant { value: v_inf },
            rain: None,
        }
    }

    fn single_layer(
        coeffs: DimlessCoefficientSet,
        left: BoundaryForcing,
        right: BoundaryForcing,
    ) -> DimensionlessProblem {
        DimensionlessProblem {
            layers: vec![Layer {
                extent: (0.0, 1.0),
                coeffs,
            }],
            left,
            right,
            initial_temperature: InitialField::Uniform { value: 1.0 },
            initial_vapour_pressure: InitialField::Uniform { value: 1.0 },
            horizon: 1.0,
            scales: scales(),
            water: WaterProperties::standard(),
        }
    }

    #[test]
    fn grid_validates_spacing_and_interfaces() {
        let p = single_layer(
            constant_set(1.0, 1.0, 1.0, 1.0, 0.0),
            dirichlet(1.0, 1.0),
            dirichlet(1.0, 1.0),
        );
        let g = FdGrid::new(&p, 1e-2, 1e-2).unwrap();
        assert_eq!(g.n_nodes(), 101);
        assert_eq!(g.dof(), 200);
        assert!(g.interface_nodes().is_empty());
        assert!(FdGrid::new(&p, 0.013, 1e-2).is_err());

        let set = constant_set(1.0, 1.0, 1.0, 1.0, 0.0);
        let p2 = DimensionlessProblem {
            layers: vec![
                Layer {
                    extent: (0.0, 0.8),
                    coeffs: set.clone(),
                },
                Layer {
                    extent: (0.8, 1.0),
                    coeffs: set,
                },
            ],
            ..single_layer(
                constant_set(1.0, 1.0, 1.0, 1.0, 0.0),
                dirichlet(1.0, 1.0),
                dirichlet(1.0, 1.0),
            )
        };
        let g2 = FdGrid::new(&p2, 1e-2, 1e-2).unwrap();
        // the interface sits on the 81st node (index 80) of 101
        assert_eq!(g2.interface_nodes(), vec![80]);
        assert_eq!(g2.nodes_in_layer(0), 81);
        assert_eq!(g2.nodes_in_layer(1), 21);
    }

    #[test]
    fn discrete_steady_profile_is_a_fixed_point() {
        // linear profiles between Dirichlet values are steady states of the
        // constant-coefficient scheme
        let mut p = single_layer(
            constant_set(2.0, 3.0, 0.7, 1.2, 0.2),
            dirichlet(1.1, 0.9),
            dirichlet(0.9, 1.2),
        );
        p.initial_temperature = InitialField::Polynomial {
            coeffs: vec![1.1, -0.2],
        };
        p.initial_vapour_pressure = InitialField::Polynomial {
            coeffs: vec![0.9, 0.3],
        };
        let grid = FdGrid::new(&p, 0.02, 0.01).unwrap();
        let traj = run_imex(&p, &grid, 1.0, 0.5).unwrap();
        let first_v = &traj.v[0];
        let first_u = &traj.u[0];
        for (row_v, row_u) in traj.v.iter().zip(&traj.u) {
            for i in 0..grid.n_nodes() {
                assert_abs_diff_eq!(row_v[i], first_v[i], epsilon = 1e-12);
                assert_abs_diff_eq!(row_u[i], first_u[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn uniform_fields_stay_uniform_under_robin_equilibrium() {
        let forcing = |ambient_u: f64, ambient_v: f64| BoundaryForcing {
            condition: BoundaryCondition::Robin {
                bi_m: 2.0,
                bi_t: 3.0,
                bi_tm: 0.5,
            },
            ambient_temperature: AmbientSignal::Constant { value: ambient_u },
            ambient_vapour_pressure: AmbientSignal::Constant { value: ambient_v },
            rain: None,
        };
        let p = single_layer(
            constant_set(1.0, 1.0, 1.0, 1.0, 0.3),
            forcing(1.0, 1.0),
            forcing(1.0, 1.0),
        );
        let grid = FdGrid::new(&p, 0.05, 0.02).unwrap();
        let traj = run_imex(&p, &grid, 1.0, 1.0).unwrap();
        for row in traj.v.iter().chain(&traj.u) {
            for &x in row {
                assert_abs_diff_eq!(x, 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn coupled_robin_steady_profile_is_a_fixed_point() {
        // linear steady profiles satisfying the full Robin balances, with
        // nonzero Bi_TM and k_TM so the heat face rows carry the total
        // conducted flux k_T u_x + k_TM v_x; a sign slip in either flux
        // term breaks the fixed point on the very first step
        use nalgebra::{Matrix2, Vector2};
        let (c_m, c_t, k_m, k_t, k_tm) = (2.0, 3.0, 0.7, 1.2, 0.25);
        let (bm_l, bt_l, btm_l) = (2.0, 3.0, 0.4);
        let (bm_r, bt_r, btm_r) = (0.7, 1.2, 0.1);
        let (u_l, v_l) = (0.95, 1.1);
        let (u_r, v_r) = (1.02, 0.9);
        let robin = |bi_m, bi_t, bi_tm, u_inf: f64, v_inf: f64| BoundaryForcing {
            condition: BoundaryCondition::Robin { bi_m, bi_t, bi_tm },
            ambient_temperature: AmbientSignal::Constant { value: u_inf },
            ambient_vapour_pressure: AmbientSignal::Constant { value: v_inf },
            rain: None,
        };
        // v = p + q x from the two moisture balances, then u = a + b x
        // from the heat balances with the moisture profile substituted
        let pq = Matrix2::<f64>::new(bm_l, -k_m, bm_r, bm_r + k_m)
            .try_inverse()
            .unwrap()
            * Vector2::new(bm_l * v_l, bm_r * v_r);
        let (p, q) = (pq[0], pq[1]);
        let ab = Matrix2::<f64>::new(bt_l, -k_t, bt_r, bt_r + k_t)
            .try_inverse()
            .unwrap()
            * Vector2::new(
                bt_l * u_l - btm_l * (p - v_l) + k_tm * q,
                bt_r * u_r - btm_r * (p + q - v_r) - k_tm * q,
            );
        let (a, b) = (ab[0], ab[1]);
        assert!(q.abs() > 1e-3 && b.abs() > 1e-3, "profiles must slope");
        let mut prob = single_layer(
            constant_set(c_m, c_t, k_m, k_t, k_tm),
            robin(bm_l, bt_l, btm_l, u_l, v_l),
            robin(bm_r, bt_r, btm_r, u_r, v_r),
        );
        prob.initial_vapour_pressure = InitialField::Polynomial { coeffs: vec![p, q] };
        prob.initial_temperature = InitialField::Polynomial { coeffs: vec![a, b] };
        let grid = FdGrid::new(&prob, 0.02, 0.01).unwrap();
        let traj = run_imex(&prob, &grid, 1.0, 0.25).unwrap();
        for (row_v, row_u) in traj.v.iter().zip(&traj.u) {
            for i in 0..grid.n_nodes() {
                let x = i as f64 * grid.dx();
                assert_abs_diff_eq!(row_v[i], p + q * x, epsilon = 1e-12);
                assert_abs_diff_eq!(row_u[i], a + b * x, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_horizon_echoes_the_initial_state() {
        let mut p = single_layer(
            constant_set(1.0, 1.0, 1.0, 1.0, 0.0),
            dirichlet(1.0, 1.0),
            dirichlet(1.0, 1.0),
        );
        p.initial_vapour_pressure = InitialField::Polynomial {
            coeffs: vec![1.0, 0.5],
        };
        let grid = FdGrid::new(&p, 0.1, 0.01).unwrap();
        let traj = run_imex(&p, &grid, 0.0, 0.1).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_abs_diff_eq!(traj.v[0][5], 1.25, epsilon = 1e-15);
    }

    #[test]
    fn manufactured_solution_shows_second_order_in_space() {
        // v = exp(-t) cos(pi x / 2) solves v_t = nu v_xx with
        // nu = 4/pi^2: insulated (zero-Biot Robin) left, Dirichlet 0 right.
        // The heat field is given the same setup.
        let nu = 4.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let insulated = BoundaryForcing {
            condition: BoundaryCondition::Robin {
                bi_m: 0.0,
                bi_t: 0.0,
                bi_tm: 0.0,
            },
            ambient_temperature: AmbientSignal::Constant { value: 1.0 },
            ambient_vapour_pressure: AmbientSignal::Constant { value: 1.0 },
            rain: None,
        };
        let mut p = single_layer(
            constant_set(1.0, 1.0, nu, nu, 0.0),
            insulated,
            dirichlet(0.0, 0.0),
        );
        let t_end = 0.1;
        let mut errors = Vec::new();
        for &dx in &[0.04, 0.02, 0.01] {
            let dt = 0.25 * dx * dx;
            // initial data on the cosine profile
            p.initial_vapour_pressure = InitialField::Polynomial {
                coeffs: cosine_poly(),
            };
            p.initial_temperature = InitialField::Polynomial {
                coeffs: cosine_poly(),
            };
            let grid = FdGrid::new(&p, dx, dt).unwrap();
            let traj = run_imex(&p, &grid, t_end, t_end).unwrap();
            let last = traj.v.last().unwrap();
            let mut worst = 0.0f64;
            for (i, &vi) in last.iter().enumerate() {
                let x = i as f64 * dx;
                let exact = (-t_end).exp() * (std::f64::consts::FRAC_PI_2 * x).cos();
                worst = worst.max((vi - exact).abs());
            }
            errors.push(worst);
        }
        let p01 = (errors[0] / errors[1]).log2();
        let p12 = (errors[1] / errors[2]).log2();
        println!("imex spatial orders: {p01:.3}, {p12:.3} (errors {errors:?})");
        assert!(
            (1.8..=2.2).contains(&p01) && (1.8..=2.2).contains(&p12),
            "orders {p01} / {p12} outside [1.8, 2.2], errors {errors:?}"
        );
    }

    /// Chebyshev-free polynomial proxy for cos(pi x/2) on [0, 1], accurate
    /// to ~1e-9: Taylor expansion around 0 up to x^10 (alternating series).
    fn cosine_poly() -> Vec<f64> {
        let h = std::f64::consts::FRAC_PI_2;
        let mut coeffs = vec![0.0; 11];
        let mut fact = 1.0f64;
        for k in 0..=5 {
            if k > 0 {
                fact *= (2 * k - 1) as f64 * (2 * k) as f64;
            }
            coeffs[2 * k] = (-1.0f64).powi(k as i32) * h.powi(2 * k as i32) / fact;
        }
        coeffs
    }

    #[test]
    fn insulated_wall_conserves_discrete_moisture() {
        // zero-Biot Robin faces, no rain: the moisture content proxy
        // sum c_M v dx must hold to a relative drift below 1e-3
        let insulated = BoundaryForcing {
            condition: BoundaryCondition::Robin {
                bi_m: 0.0,
                bi_t: 0.0,
                bi_tm: 0.0,
            },
            ambient_temperature: AmbientSignal::Constant { value: 1.0 },
            ambient_vapour_pressure: AmbientSignal::Constant { value: 1.0 },
            rain: None,
        };
        let mut p = single_layer(
            crate::materials::load_bearing_dimensionless(),
            insulated.clone(),
            insulated,
        );
        p.initial_vapour_pressure = InitialField::Polynomial {
            coeffs: vec![0.99, 0.04, -0.04],
        };
        let grid = FdGrid::new(&p, 1e-2, 1e-2).unwrap();
        let traj = run_imex(&p, &grid, 10.0, 1.0).unwrap();
        let content = |row: &[f64]| -> f64 {
            let set = &p.layers[0].coeffs;
            let mut acc = 0.0;
            for (i, &vi) in row.iter().enumerate() {
                let w = if i == 0 || i == row.len() - 1 {
                    0.5
                } else {
                    1.0
                };
                acc += w * set.c_m.eval(vi) * vi * grid.dx();
            }
            acc
        };
        let m0 = content(&traj.v[0]);
        for row in &traj.v {
            let drift = (content(row) - m0).abs() / m0.abs();
            assert!(drift < 1e-3, "moisture drift {drift:.2e} over budget");
        }
    }
}
