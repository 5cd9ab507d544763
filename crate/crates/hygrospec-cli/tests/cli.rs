//! End-to-end tests of the binary: artifact schemas, exit codes and
//! rerun determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hygrospec::cases::read_numeric_csv;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hygrospec"))
}

fn fresh_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hygrospec_cli_{}_{tag}", std::process::id()));
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A small single-layer wall with constant fit coefficients and constant
/// Dirichlet data; solves in milliseconds. Written out verbatim to pin
/// the JSON schema the binary accepts.
fn toy_config(dir: &Path) -> PathBuf {
    let text = r#"{
  "name": "toy",
  "layers": [
    {
      "thickness_m": 0.1,
      "material": {
        "fits": {
          "c_m": { "form": "polynomial", "coeffs": [1.0] },
          "c_t": { "form": "polynomial", "coeffs": [1.0] },
          "k_m": { "form": "polynomial", "coeffs": [0.8] },
          "k_t": { "form": "polynomial", "coeffs": [1.2] },
          "k_tm": { "form": "polynomial", "coeffs": [0.1] }
        }
      }
    }
  ],
  "reference": {
    "time_ref_s": 3600.0,
    "temperature_ref_k": 293.15,
    "vapour_pressure_ref_pa": 1166.9,
    "length_ref_m": 0.1,
    "moisture_transfer_ref_s": 5.4712e-9,
    "thermal_conductivity_ref_w_per_m_k": 0.5021
  },
  "water": {
    "specific_heat_j_per_kg_k": 4180.0,
    "latent_heat_j_per_kg": 2500000.0,
    "gas_constant_j_per_kg_k": 462.0,
    "density_kg_per_m3": 1000.0
  },
  "left": {
    "surface": { "kind": "dirichlet" },
    "ambient_temperature": { "kind": "constant", "value": 1.05 },
    "ambient_vapour_pressure": { "kind": "constant", "value": 0.9 }
  },
  "right": {
    "surface": { "kind": "dirichlet" },
    "ambient_temperature": { "kind": "constant", "value": 0.95 },
    "ambient_vapour_pressure": { "kind": "constant", "value": 1.1 }
  },
  "initial_temperature": { "kind": "uniform", "value": 1.0 },
  "initial_vapour_pressure": { "kind": "uniform", "value": 1.0 },
  "horizon_t_star": 1.0,
  "output_dt_t_star": 0.5,
  "solver": "spectral",
  "spectral": { "modes": 6, "quadrature_nodes": 11, "rtol": 1e-6, "atol": 1e-6 },
  "imex": { "dx_star": 0.02, "dt_star": 0.005 }
}
"#;
    let path = dir.join("toy.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().unwrap();
    assert!(
        output.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let output = bin().args(args).output().unwrap();
    (
        output.status.code().unwrap(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn manifest(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn assert_manifest_lists_the_directory(dir: &Path) {
    let listed: Vec<String> = manifest(dir)["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    let mut on_disk: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    on_disk.sort();
    assert_eq!(listed_sorted, on_disk, "manifest must list every artifact");
    assert_eq!(
        listed.last().map(String::as_str),
        Some("manifest.json"),
        "manifest is written last and lists itself last"
    );
}

#[test]
fn run_exports_the_field_tables() {
    let dir = fresh_dir("run");
    let cfg = toy_config(&dir);
    let out = dir.join("out");
    run_ok(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);

    assert_manifest_lists_the_directory(&out);
    let m = manifest(&out);
    assert_eq!(m["command"], "run");
    assert_eq!(m["solvers"][0], "spectral");
    assert_eq!(m["dof"], 12);
    assert!(m["determinism"].as_str().unwrap().contains("seed-free"));
    assert!(m["wall_seconds_per_stage"]["solve"].as_f64().unwrap() > 0.0);

    let fields = read_numeric_csv(&out.join("fields.csv")).unwrap();
    assert_eq!(
        fields.columns,
        vec!["t_star", "x_star", "temperature_k", "vapour_pressure_pa"]
    );
    // 3 output instants (t* = 0, 0.5, 1) on the 101-point sampling grid
    assert_eq!(fields.rows.len(), 3 * 101);
    let mut x = fields.values("x_star").unwrap();
    x.sort_by(f64::total_cmp);
    x.dedup();
    assert_eq!(x.len(), 101);
    let t = fields.values("t_star").unwrap();
    assert_eq!(t.iter().filter(|&&v| v == 0.0).count(), 101);
    // temperatures come out in kelvin
    let temp = fields.values("temperature_k").unwrap();
    assert!(
        temp.iter().all(|&k| (250.0..350.0).contains(&k)),
        "{temp:?}"
    );

    let fluxes = read_numeric_csv(&out.join("fluxes.csv")).unwrap();
    assert_eq!(fluxes.columns[..2], ["x_star", "t_star"]);
    assert_eq!(fluxes.rows.len(), 2 * 3); // both faces, every instant

    let tail = read_numeric_csv(&out.join("coefficients.csv")).unwrap();
    assert_eq!(tail.columns, vec!["t_star", "moisture_tail", "heat_tail"]);
    assert_eq!(tail.rows.len(), 3);

    // the emitted config parses back and validates
    let cfg_text = std::fs::read_to_string(out.join("config.json")).unwrap();
    let case: hygrospec::cases::CaseConfig = serde_json::from_str(&cfg_text).unwrap();
    case.validate().unwrap();
}

#[test]
fn imex_runs_share_the_file_schema() {
    let dir = fresh_dir("imex_schema");
    let cfg = toy_config(&dir);
    let out = dir.join("out");
    run_ok(&[
        "run",
        cfg.to_str().unwrap(),
        "--solver",
        "imex",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_manifest_lists_the_directory(&out);
    assert_eq!(manifest(&out)["dof"], 100); // 2 fields x (51 - 1) nodes

    let fields = read_numeric_csv(&out.join("fields.csv")).unwrap();
    assert_eq!(
        fields.columns,
        vec!["t_star", "x_star", "temperature_k", "vapour_pressure_pa"]
    );
    let fluxes = read_numeric_csv(&out.join("fluxes.csv")).unwrap();
    assert_eq!(fluxes.columns.len(), 6);
    // spectral tail coefficients do not exist for a grid solver
    assert!(!out.join("coefficients.csv").exists());
}

#[test]
fn reruns_are_bit_identical() {
    let dir = fresh_dir("determinism");
    let cfg = toy_config(&dir);
    let (a, b) = (dir.join("a"), dir.join("b"));
    for out in [&a, &b] {
        run_ok(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    }
    for name in [
        "fields.csv",
        "fluxes.csv",
        "coefficients.csv",
        "config.json",
    ] {
        let bytes_a = std::fs::read(a.join(name)).unwrap();
        let bytes_b = std::fs::read(b.join(name)).unwrap();
        assert_eq!(bytes_a, bytes_b, "{name} differs between identical runs");
    }
}

#[test]
fn bad_inputs_exit_two() {
    let (code, stderr) = exit_code(&["run", "no_such_file.json"]);
    assert_eq!(code, 2, "{stderr}");
    assert!(stderr.contains("not found"), "{stderr}");

    let (code, stderr) = exit_code(&["run", "case9"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("unknown case"), "{stderr}");

    let dir = fresh_dir("badjson");
    let path = dir.join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let (code, _) = exit_code(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 2);

    // schema-valid JSON that fails validation: layers do not tile the wall
    let cfg = toy_config(&dir);
    let mut case: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    case["layers"][0]["thickness_m"] = serde_json::json!(0.07);
    let bad = dir.join("bad_layers.json");
    std::fs::write(&bad, serde_json::to_string(&case).unwrap()).unwrap();
    let (code, stderr) = exit_code(&["run", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("configuration"), "{stderr}");

    // missing --modes is a usage error
    let (code, _) = exit_code(&["sweep", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn solver_failures_exit_three() {
    let dir = fresh_dir("exit3");
    let cfg = toy_config(&dir);
    let mut case: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    // moisture conductivity negative at the initial state: parabolicity
    // is lost the moment the solver evaluates the operator
    case["layers"][0]["material"]["fits"]["k_m"] =
        serde_json::json!({"form": "polynomial", "coeffs": [1.0, -1.5]});
    let path = dir.join("nonparabolic.json");
    std::fs::write(&path, serde_json::to_string(&case).unwrap()).unwrap();
    let (code, stderr) = exit_code(&["run", path.to_str().unwrap()]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("parabolicity"), "{stderr}");
}

#[test]
fn compare_tabulates_both_solvers_against_the_oracle() {
    let dir = fresh_dir("compare");
    let cfg = toy_config(&dir);
    let out = dir.join("out");
    run_ok(&[
        "compare",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_manifest_lists_the_directory(&out);

    let text = std::fs::read_to_string(out.join("summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    for solver in ["spectral", "imex"] {
        let entry = &summary["solvers"][solver];
        let u = entry["eps_inf_u"].as_f64().unwrap();
        let v = entry["eps_inf_v"].as_f64().unwrap();
        assert!(u >= 0.0 && u < 5e-3, "{solver}: {u}");
        assert!(v >= 0.0 && v < 5e-3, "{solver}: {v}");
        assert!(entry["wall_seconds"].as_f64().unwrap() > 0.0);
    }
    assert_eq!(summary["solvers"]["spectral"]["dof"], 12);
    assert_eq!(summary["solvers"]["imex"]["dof"], 100);
    assert!(summary["oracle"]["route_disagreement_v"].as_f64().unwrap() < 5e-4);

    let profile = read_numeric_csv(&out.join("eps2_profile.csv")).unwrap();
    assert_eq!(
        profile.columns,
        vec![
            "x_star",
            "eps2_u_spectral",
            "eps2_v_spectral",
            "eps2_u_imex",
            "eps2_v_imex"
        ]
    );
    assert_eq!(profile.rows.len(), 101);
}

#[test]
fn sweep_writes_one_row_per_mode_count() {
    let dir = fresh_dir("sweep");
    let cfg = toy_config(&dir);
    let out = dir.join("out");
    run_ok(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--modes",
        "4,6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_manifest_lists_the_directory(&out);
    let table = read_numeric_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(
        table.columns,
        vec!["modes", "eps_inf_u", "eps_inf_v", "wall_s"]
    );
    assert_eq!(table.values("modes").unwrap(), vec![4.0, 6.0]);
    let eps_first = table.values("eps_inf_v").unwrap();

    // a second sweep reproduces the error columns bit for bit
    let out2 = dir.join("out2");
    run_ok(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--modes",
        "4,6",
        "--out",
        out2.to_str().unwrap(),
    ]);
    let again = read_numeric_csv(&out2.join("sweep.csv")).unwrap();
    assert_eq!(again.values("eps_inf_v").unwrap(), eps_first);
    assert_eq!(
        again.values("eps_inf_u").unwrap(),
        table.values("eps_inf_u").unwrap()
    );

    // single mode count, single row
    let out3 = dir.join("out3");
    run_ok(&[
        "sweep",
        cfg.to_str().unwrap(),
        "--modes",
        "8",
        "--out",
        out3.to_str().unwrap(),
    ]);
    let single = read_numeric_csv(&out3.join("sweep.csv")).unwrap();
    assert_eq!(single.rows.len(), 1);
}
