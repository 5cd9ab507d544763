//! Deterministic artifact writers.
//!
//! Every table cell is printed with the shortest decimal form that parses
//! back to the same bits, so reruns of the same config produce
//! byte-identical CSV files and downstream readers lose nothing.

use std::path::Path;

use hygrospec::cases::SweepRow;
use hygrospec::postproc::{ErrorReport, FieldSamples, FluxSeries, TailDiagnostics};
use hygrospec::Result;

fn cell(value: f64) -> String {
    format!("{value}")
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Long-form field table: one row per output instant and sample position.
pub fn write_fields(path: &Path, samples: &FieldSamples) -> Result<()> {
    let rows = samples.times.iter().enumerate().flat_map(|(j, t)| {
        let samples = &samples;
        samples.positions.iter().enumerate().map(move |(i, x)| {
            vec![
                cell(*t),
                cell(*x),
                cell(samples.temperature[j][i]),
                cell(samples.vapour[j][i]),
            ]
        })
    });
    write_rows(
        path,
        &["t_star", "x_star", "temperature_k", "vapour_pressure_pa"],
        rows,
    )
}

/// Surface flux traces, one block per face.
pub fn write_fluxes(path: &Path, series: &[FluxSeries]) -> Result<()> {
    let rows = series.iter().flat_map(|s| {
        s.times.iter().enumerate().map(move |(j, t)| {
            vec![
                cell(s.x_0),
                cell(*t),
                cell(s.sensible[j]),
                cell(s.latent[j]),
                cell(s.total[j]),
                cell(s.moisture_flow[j]),
            ]
        })
    });
    write_rows(
        path,
        &[
            "x_star",
            "t_star",
            "sensible_w_per_m2",
            "latent_w_per_m2",
            "total_w_per_m2",
            "moisture_kg_per_m2_s",
        ],
        rows,
    )
}

/// Spectral tail magnitudes per output instant.
pub fn write_coefficients(path: &Path, tail: &TailDiagnostics) -> Result<()> {
    let rows = tail.times.iter().enumerate().map(|(j, t)| {
        vec![
            cell(*t),
            cell(tail.moisture_tail[j]),
            cell(tail.heat_tail[j]),
        ]
    });
    write_rows(path, &["t_star", "moisture_tail", "heat_tail"], rows)
}

/// Per-position time-averaged errors of both solvers against the oracle.
pub fn write_eps2_profile(path: &Path, spectral: &ErrorReport, imex: &ErrorReport) -> Result<()> {
    let rows = spectral.positions.iter().enumerate().map(|(i, x)| {
        vec![
            cell(*x),
            cell(spectral.eps2_temperature[i]),
            cell(spectral.eps2_vapour[i]),
            cell(imex.eps2_temperature[i]),
            cell(imex.eps2_vapour[i]),
        ]
    });
    write_rows(
        path,
        &[
            "x_star",
            "eps2_u_spectral",
            "eps2_v_spectral",
            "eps2_u_imex",
            "eps2_v_imex",
        ],
        rows,
    )
}

/// Convergence table; failed rows leave their error cells empty.
pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let rows = rows.iter().map(|row| {
        vec![
            cell(row.modes as f64),
            row.eps_inf_u.map(cell).unwrap_or_default(),
            row.eps_inf_v.map(cell).unwrap_or_default(),
            cell(row.wall_seconds),
        ]
    });
    write_rows(path, &["modes", "eps_inf_u", "eps_inf_v", "wall_s"], rows)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
