//! CSV and JSON writers.

use lzro_core::analysis::ContrastSeries;
use lzro_core::experiment::{Basis, ScanAxis, ScanResult, Scenario};
use serde::Serialize;

use crate::CliError;

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn columns(sc: &Scenario) -> Vec<String> {
    let x = match sc.scan_axis {
        ScanAxis::DetectionTime => "t_s",
        ScanAxis::Detuning => "detuning_hz",
    };
    let rest: &[&str] = match sc.basis_out {
        Basis::Diabatic => &["p_e_mean", "p_e_stderr", "shots"],
        Basis::Adiabatic => &["p_plus_mean", "p_plus_stderr", "shots"],
        Basis::Both => &["p_e_mean", "p_plus_mean", "p_e_stderr", "p_plus_stderr", "shots"],
    };
    std::iter::once(x).chain(rest.iter().copied()).map(String::from).collect()
}

pub fn scan_csv(res: &ScanResult) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(columns(&res.scenario)).map_err(csv_err)?;
    for p in &res.points {
        let mut row = vec![num(p.x)];
        match res.scenario.basis_out {
            Basis::Diabatic => row.extend([num(p.p_e_mean), num(p.p_e_stderr)]),
            Basis::Adiabatic => row.extend([num(p.p_plus_mean), num(p.p_plus_stderr)]),
            Basis::Both => {
                row.extend([num(p.p_e_mean), num(p.p_plus_mean), num(p.p_e_stderr), num(p.p_plus_stderr)])
            }
        }
        row.push(p.shots.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    finish(w)
}

pub fn contrast_csv(series: &ContrastSeries) -> Result<String, CliError> {
    let rows: Vec<Vec<f64>> = series.points.iter().map(|p| vec![p.t, p.contrast]).collect();
    table_csv(&["t_s", "contrast"], &rows)
}

pub fn table_csv(header: &[&str], rows: &[Vec<f64>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| num(v))).map_err(csv_err)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value).map_err(csv_err)
}
