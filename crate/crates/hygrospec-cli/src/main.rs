//! Command-line front end for the coupled heat and moisture wall solvers.
//!
//! Three subcommands cover the workflow: `run` solves one case with the
//! solver of your choice and exports plot-ready tables, `compare` runs
//! both solvers against the high-resolution reference and tabulates the
//! errors, `sweep` maps spectral accuracy against the number of retained
//! modes. Configs are JSON case files or the names of shipped cases
//! (`case1`, `case2`, `validation`).
//!
//! Exit codes: 0 success, 2 configuration or input-data problem, 3 solver
//! failure (the message names the dimensionless time t* of the failure).

mod artifacts;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use hygrospec::cases::{
    builtin_case, convergence_sweep, reference_oracle, solve_imex, solve_spectral, CaseConfig,
    SolverChoice, NORM_GRID_POINTS, ORACLE_IMEX, ORACLE_SPECTRAL,
};
use hygrospec::postproc::{
    compute_errors, fluxes, grid_fluxes, grid_samples, reconstruct, tail_magnitudes, uniform_grid,
    FieldSamples, FluxSeries,
};
use hygrospec::problem::ReferenceScales;
use hygrospec::{Error, Result};

const DETERMINISM_NOTE: &str = "seed-free: every artifact is a pure function of the \
     configuration; the solvers draw no random numbers and parallel sweep runs are independent";

#[derive(Parser)]
#[command(
    name = "hygrospec",
    version,
    about = "Coupled heat and moisture transfer through porous walls"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and export field, flux and coefficient tables.
    Run {
        /// Case config: JSON file or shipped name (case1, case2, validation).
        config: String,
        /// Solver override; defaults to the config's choice.
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        /// Output directory for artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run both solvers plus the reference oracle and tabulate errors.
    Compare {
        /// Case config: JSON file or shipped name.
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep spectral mode counts against the reference oracle.
    Sweep {
        /// Case config: JSON file or shipped name.
        config: String,
        /// Comma-separated mode counts, e.g. 4,6,8,10,13,16.
        #[arg(long, value_delimiter = ',', required = true)]
        modes: Vec<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Spectral,
    Imex,
}

impl From<SolverArg> for SolverChoice {
    fn from(arg: SolverArg) -> Self {
        match arg {
            SolverArg::Spectral => SolverChoice::Spectral,
            SolverArg::Imex => SolverChoice::Imex,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run {
            config,
            solver,
            out,
        } => cmd_run(&config, solver.map(Into::into), &out),
        Command::Compare { config, out } => cmd_compare(&config, &out),
        Command::Sweep { config, modes, out } => cmd_sweep(&config, &modes, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if err.is_input_error() { 2 } else { 3 })
        }
    }
}

/// Loads a config from a JSON file, falling back to the shipped cases
/// when the argument is a bare name.
fn load_case(arg: &str) -> Result<CaseConfig> {
    let path = Path::new(arg);
    let case = if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str::<CaseConfig>(&text)?
    } else if arg.contains('.') || arg.contains(std::path::MAIN_SEPARATOR) {
        return Err(Error::Config(format!("config file '{arg}' not found")));
    } else {
        builtin_case(arg)?
    };
    case.validate()?;
    Ok(case)
}

/// Multiplies dimensionless samples up to kelvin and pascal.
fn redimensionalize(samples: &mut FieldSamples, scales: &ReferenceScales) {
    for row in &mut samples.temperature {
        for value in row {
            *value *= scales.temperature_k;
        }
    }
    for row in &mut samples.vapour {
        for value in row {
            *value *= scales.vapour_pressure_pa;
        }
    }
}

struct Emitter {
    out: PathBuf,
    artifacts: Vec<String>,
}

impl Emitter {
    fn new(out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    fn path_of(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_owned());
        self.out.join(name)
    }

    /// Writes the manifest last so it can list every produced file.
    fn finish(
        mut self,
        command: &str,
        config_arg: &str,
        case: &CaseConfig,
        solvers: &[&str],
        stages: &BTreeMap<&'static str, f64>,
        extra: serde_json::Value,
    ) -> Result<()> {
        self.artifacts.push("manifest.json".to_owned());
        let mut manifest = serde_json::json!({
            "command": command,
            "config": config_arg,
            "case": case.name,
            "solvers": solvers,
            "determinism": DETERMINISM_NOTE,
            "output_dir": self.out.display().to_string(),
            "artifacts": self.artifacts,
            "wall_seconds_per_stage": stages,
        });
        if let (Some(map), serde_json::Value::Object(extra)) = (manifest.as_object_mut(), extra) {
            map.extend(extra);
        }
        artifacts::write_json(&self.out.join("manifest.json"), &manifest)?;
        println!(
            "wrote {} artifact(s) to {}",
            self.artifacts.len(),
            self.out.display()
        );
        Ok(())
    }
}

fn cmd_run(config_arg: &str, solver: Option<SolverChoice>, out: &Path) -> Result<()> {
    let case = load_case(config_arg)?;
    let problem = case.problem()?;
    let solver = solver.unwrap_or(case.solver);
    let grid = uniform_grid(NORM_GRID_POINTS);
    let mut stages = BTreeMap::new();

    struct RunOutput {
        samples: FieldSamples,
        fluxes: Vec<FluxSeries>,
        tail: Option<hygrospec::postproc::TailDiagnostics>,
        dof: usize,
    }
    let output = match solver {
        SolverChoice::Spectral => {
            let run = solve_spectral(&problem, &case.spectral, case.output_dt_t_star)?;
            stages.insert("solve", run.wall_seconds);
            let start = Instant::now();
            let samples = reconstruct(&run.system, &run.trajectory, &grid)?;
            let fluxes = vec![
                fluxes(&run.system, &run.trajectory, 0.0)?,
                fluxes(&run.system, &run.trajectory, 1.0)?,
            ];
            let tail = tail_magnitudes(&run.system, &run.trajectory);
            stages.insert("postprocess", start.elapsed().as_secs_f64());
            RunOutput {
                samples,
                fluxes,
                tail: Some(tail),
                dof: run.dof(),
            }
        }
        SolverChoice::Imex => {
            let run = solve_imex(&problem, &case.imex, case.output_dt_t_star)?;
            stages.insert("solve", run.wall_seconds);
            let start = Instant::now();
            let mut samples = grid_samples(&run.trajectory, &grid)?;
            redimensionalize(&mut samples, &problem.scales);
            let fluxes = vec![
                grid_fluxes(&problem, &run.trajectory, 0.0)?,
                grid_fluxes(&problem, &run.trajectory, 1.0)?,
            ];
            stages.insert("postprocess", start.elapsed().as_secs_f64());
            RunOutput {
                samples,
                fluxes,
                tail: None,
                dof: run.dof(),
            }
        }
    };

    let solver_name = match solver {
        SolverChoice::Spectral => "spectral",
        SolverChoice::Imex => "imex",
    };
    let start = Instant::now();
    let mut emitter = Emitter::new(out)?;
    artifacts::write_json(
        &emitter.path_of("config.json"),
        &serde_json::to_value(&case)?,
    )?;
    artifacts::write_fields(&emitter.path_of("fields.csv"), &output.samples)?;
    artifacts::write_fluxes(&emitter.path_of("fluxes.csv"), &output.fluxes)?;
    let mut plots = vec![
        serde_json::json!({
            "file": "fields.csv",
            "x_column": "x_star",
            "y_columns": ["temperature_k", "vapour_pressure_pa"],
            "series_column": "t_star",
            "y_scale": "linear",
        }),
        serde_json::json!({
            "file": "fluxes.csv",
            "x_column": "t_star",
            "y_columns": ["sensible_w_per_m2", "latent_w_per_m2", "total_w_per_m2", "moisture_kg_per_m2_s"],
            "series_column": "x_star",
            "y_scale": "linear",
        }),
    ];
    if let Some(tail) = &output.tail {
        artifacts::write_coefficients(&emitter.path_of("coefficients.csv"), tail)?;
        plots.push(serde_json::json!({
            "file": "coefficients.csv",
            "x_column": "t_star",
            "y_columns": ["moisture_tail", "heat_tail"],
            "y_scale": "log",
        }));
    }
    artifacts::write_json(
        &emitter.path_of("plots.json"),
        &serde_json::Value::Array(plots),
    )?;
    stages.insert("write", start.elapsed().as_secs_f64());

    println!(
        "{}: solved '{}' over t* in [0, {}] with {} unknowns; {} output instants",
        solver_name,
        case.name,
        case.horizon_t_star,
        output.dof,
        output.samples.times.len()
    );
    emitter.finish(
        "run",
        config_arg,
        &case,
        &[solver_name],
        &stages,
        serde_json::json!({"dof": output.dof}),
    )
}

fn cmd_compare(config_arg: &str, out: &Path) -> Result<()> {
    let case = load_case(config_arg)?;
    let problem = case.problem()?;
    let mut stages = BTreeMap::new();

    let start = Instant::now();
    let oracle = reference_oracle(&problem, case.output_dt_t_star)?;
    stages.insert("oracle", start.elapsed().as_secs_f64());

    let spectral = solve_spectral(&problem, &case.spectral, case.output_dt_t_star)?;
    stages.insert("solve_spectral", spectral.wall_seconds);
    let imex = solve_imex(&problem, &case.imex, case.output_dt_t_star)?;
    stages.insert("solve_imex", imex.wall_seconds);

    let start = Instant::now();
    let spectral_report = compute_errors(&spectral.norm_samples()?, &oracle.samples)?;
    let imex_report = compute_errors(&imex.norm_samples()?, &oracle.samples)?;
    stages.insert("postprocess", start.elapsed().as_secs_f64());

    let summary = serde_json::json!({
        "case": case.name,
        "horizon_t_star": case.horizon_t_star,
        "output_dt_t_star": case.output_dt_t_star,
        "oracle": {
            "spectral_modes": ORACLE_SPECTRAL.modes,
            "spectral_tolerance": ORACLE_SPECTRAL.rtol,
            "imex_dx_star": ORACLE_IMEX.dx_star,
            "imex_dt_star": ORACLE_IMEX.dt_star,
            "route_disagreement_u": oracle.route_disagreement.0,
            "route_disagreement_v": oracle.route_disagreement.1,
        },
        "solvers": {
            "spectral": {
                "dof": spectral.dof(),
                "wall_seconds": spectral.wall_seconds,
                "eps_inf_u": spectral_report.eps_inf_temperature,
                "eps_inf_v": spectral_report.eps_inf_vapour,
            },
            "imex": {
                "dof": imex.dof(),
                "wall_seconds": imex.wall_seconds,
                "eps_inf_u": imex_report.eps_inf_temperature,
                "eps_inf_v": imex_report.eps_inf_vapour,
            },
        },
        "wall_ratio_imex_over_spectral": imex.wall_seconds / spectral.wall_seconds,
    });

    let start = Instant::now();
    let mut emitter = Emitter::new(out)?;
    artifacts::write_json(
        &emitter.path_of("config.json"),
        &serde_json::to_value(&case)?,
    )?;
    artifacts::write_eps2_profile(
        &emitter.path_of("eps2_profile.csv"),
        &spectral_report,
        &imex_report,
    )?;
    artifacts::write_json(&emitter.path_of("summary.json"), &summary)?;
    artifacts::write_json(
        &emitter.path_of("plots.json"),
        &serde_json::json!([{
            "file": "eps2_profile.csv",
            "x_column": "x_star",
            "y_columns": ["eps2_u_spectral", "eps2_v_spectral", "eps2_u_imex", "eps2_v_imex"],
            "y_scale": "log",
        }]),
    )?;
    stages.insert("write", start.elapsed().as_secs_f64());

    println!(
        "spectral: eps_inf_u = {:.3e}, eps_inf_v = {:.3e} ({} DOF, {:.2} s)",
        spectral_report.eps_inf_temperature,
        spectral_report.eps_inf_vapour,
        spectral.dof(),
        spectral.wall_seconds
    );
    println!(
        "imex:     eps_inf_u = {:.3e}, eps_inf_v = {:.3e} ({} DOF, {:.2} s)",
        imex_report.eps_inf_temperature,
        imex_report.eps_inf_vapour,
        imex.dof(),
        imex.wall_seconds
    );
    emitter.finish(
        "compare",
        config_arg,
        &case,
        &["spectral", "imex", "oracle"],
        &stages,
        serde_json::json!({}),
    )
}

fn cmd_sweep(config_arg: &str, modes: &[usize], out: &Path) -> Result<()> {
    let case = load_case(config_arg)?;
    let problem = case.problem()?;
    let mut stages = BTreeMap::new();

    let start = Instant::now();
    let oracle = reference_oracle(&problem, case.output_dt_t_star)?;
    stages.insert("oracle", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let rows = convergence_sweep(
        &problem,
        &case.spectral,
        modes,
        &oracle.samples,
        case.output_dt_t_star,
    );
    stages.insert("sweep", start.elapsed().as_secs_f64());

    let start = Instant::now();
    let mut emitter = Emitter::new(out)?;
    artifacts::write_json(
        &emitter.path_of("config.json"),
        &serde_json::to_value(&case)?,
    )?;
    artifacts::write_sweep(&emitter.path_of("sweep.csv"), &rows)?;
    artifacts::write_json(
        &emitter.path_of("plots.json"),
        &serde_json::json!([{
            "file": "sweep.csv",
            "x_column": "modes",
            "y_columns": ["eps_inf_u", "eps_inf_v"],
            "y_scale": "log",
        }]),
    )?;
    stages.insert("write", start.elapsed().as_secs_f64());

    for row in &rows {
        match (&row.failure, row.eps_inf_u, row.eps_inf_v) {
            (None, Some(u), Some(v)) => println!(
                "N = {:3}: eps_inf_u = {:.3e}, eps_inf_v = {:.3e} ({:.2} s)",
                row.modes, u, v, row.wall_seconds
            ),
            (failure, ..) => eprintln!(
                "N = {:3}: failed: {}",
                row.modes,
                failure.as_deref().unwrap_or("unknown")
            ),
        }
    }
    let failures: BTreeMap<String, String> = rows
        .iter()
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|msg| (r.modes.to_string(), msg.clone()))
        })
        .collect();
    emitter.finish(
        "sweep",
        config_arg,
        &case,
        &["spectral", "oracle"],
        &stages,
        serde_json::json!({"failures": failures}),
    )
}
