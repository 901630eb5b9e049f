//! Report rendering: a structured `key = value` text format carrying every
//! scalar metric and the selected-parameter trajectory, and a tabular format
//! with one row per round (weights, residual, selection), rendered at 12
//! significant digits so a re-parse reproduces the trajectory.

use std::fmt::Write as _;
use std::path::Path;

use sleet_core::eval::BacktestReport;
use sleet_core::loss::LossSpec;

use crate::config::ReportFormat;
use crate::error::{CliError, Result};

/// 12 significant digits, scientific; enough that parsing the text back
/// recovers the value within 1e-11 relative error.
fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

fn loss_name(loss: LossSpec) -> &'static str {
    match loss {
        LossSpec::Square => "square",
        LossSpec::Absolute => "absolute",
        LossSpec::AbsolutePercentage => "absolute-percentage",
    }
}

// ---------------------------------------------------------------------------
// Structured text
// ---------------------------------------------------------------------------

/// Scalar metrics and parameter trajectories, one `key = value` per line.
pub fn render_structured(report: &BacktestReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "rule = {}", report.rule);
    let _ = writeln!(out, "loss = {}", loss_name(report.loss));
    let _ = writeln!(out, "rounds = {}", report.rounds);
    let _ = writeln!(out, "experts = {}", report.experts);
    let _ = writeln!(out, "mean_loss = {}", sig12(report.mean_loss));
    if let Some(rmse) = report.rmse {
        let _ = writeln!(out, "rmse = {}", sig12(rmse));
    }
    for (j, regret) in report.regrets.iter().enumerate() {
        let _ = writeln!(out, "regret_{j} = {}", sig12(*regret));
    }
    for group in &report.group_quantiles {
        let _ = writeln!(out, "group_{}_count = {}", group.label, group.count);
        let _ = writeln!(out, "group_{}_q50 = {}", group.label, sig12(group.q50));
        let _ = writeln!(out, "group_{}_q75 = {}", group.label, sig12(group.q75));
        let _ = writeln!(out, "group_{}_q90 = {}", group.label, sig12(group.q90));
    }
    if let Some(selected) = &report.selected {
        for (i, point) in selected.iter().enumerate() {
            let t = i + 1;
            let _ = writeln!(out, "selected_eta_{t} = {}", sig12(point.eta));
            if let Some(alpha) = point.alpha {
                let _ = writeln!(out, "selected_alpha_{t} = {}", sig12(alpha));
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Tabular
// ---------------------------------------------------------------------------

/// One row per round: position, played weights, residual, and the selected
/// parameters when a meta-rule ran (empty cells otherwise).
pub fn render_tabular(report: &BacktestReport) -> String {
    let mut out = String::new();
    let _ = write!(out, "t");
    for j in 0..report.experts {
        let _ = write!(out, ",w{j}");
    }
    let _ = writeln!(out, ",residual,eta,alpha");
    for (i, weights) in report.weight_trajectory.iter().enumerate() {
        let _ = write!(out, "{}", i + 1);
        for &w in weights.as_slice() {
            let _ = write!(out, ",{}", sig12(w));
        }
        let _ = write!(out, ",{}", sig12(report.residuals[i]));
        match report.selected.as_ref().map(|points| points[i]) {
            Some(point) => {
                let _ = write!(out, ",{}", sig12(point.eta));
                match point.alpha {
                    Some(alpha) => {
                        let _ = writeln!(out, ",{}", sig12(alpha));
                    }
                    None => {
                        let _ = writeln!(out, ",");
                    }
                }
            }
            None => {
                let _ = writeln!(out, ",,");
            }
        }
    }
    out
}

/// A parsed tabular row.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularRow {
    pub t: usize,
    pub weights: Vec<f64>,
    pub residual: f64,
    pub eta: Option<f64>,
    pub alpha: Option<f64>,
}

fn cell_number(cell: &str, line_no: usize) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| {
        CliError::Config(format!("tabular line {line_no}: unreadable number \"{cell}\""))
    })
}

/// Parses text produced by [`render_tabular`] back into rows.
pub fn parse_tabular(text: &str) -> Result<Vec<TabularRow>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| CliError::Config("tabular input is empty".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let weight_cols = columns.iter().filter(|c| c.starts_with('w')).count();
    if columns.len() != weight_cols + 4 || weight_cols == 0 {
        return Err(CliError::Config("tabular header is not t,w...,residual,eta,alpha".into()));
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            return Err(CliError::Config(format!(
                "tabular line {line_no}: {} cells, expected {}",
                cells.len(),
                columns.len()
            )));
        }
        let t = cells[0].parse::<usize>().map_err(|_| {
            CliError::Config(format!("tabular line {line_no}: unreadable round \"{}\"", cells[0]))
        })?;
        let weights = cells[1..1 + weight_cols]
            .iter()
            .map(|c| cell_number(c, line_no))
            .collect::<Result<Vec<f64>>>()?;
        let residual = cell_number(cells[1 + weight_cols], line_no)?;
        let eta = match cells[2 + weight_cols] {
            "" => None,
            cell => Some(cell_number(cell, line_no)?),
        };
        let alpha = match cells[3 + weight_cols] {
            "" => None,
            cell => Some(cell_number(cell, line_no)?),
        };
        rows.push(TabularRow { t, weights, residual, eta, alpha });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

/// Renders the report in the requested format and writes it to `path`, or
/// to stdout when no path is given.
pub fn emit_report(
    report: &BacktestReport,
    path: Option<&Path>,
    format: ReportFormat,
) -> Result<()> {
    let text = match format {
        ReportFormat::StructuredText => render_structured(report),
        ReportFormat::Tabular => render_tabular(report),
    };
    match path {
        Some(path) => std::fs::write(path, text)
            .map_err(|source| CliError::Io { path: path.to_path_buf(), source }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sleet_core::eval::GroupQuantiles;
    use sleet_core::tuning::GridPoint;
    use sleet_core::types::WeightVector;

    fn sample_report(selected: bool) -> BacktestReport {
        let selected = selected.then(|| {
            vec![
                GridPoint { eta: 0.1, alpha: Some(0.05) },
                GridPoint { eta: 0.2, alpha: Some(0.05) },
                GridPoint { eta: 0.2, alpha: Some(0.1) },
            ]
        });
        BacktestReport {
            rule: "meta-fixed-share".into(),
            loss: LossSpec::Square,
            rounds: 3,
            experts: 2,
            rmse: Some(0.123456789012345),
            mean_loss: 0.0152415787532,
            regrets: vec![0.25, -0.125],
            residuals: vec![0.1, -0.0625, 1.0 / 3.0],
            weight_trajectory: vec![
                WeightVector::new(vec![0.5, 0.5]).unwrap(),
                WeightVector::new(vec![1.0 / 3.0, 2.0 / 3.0]).unwrap(),
                WeightVector::new(vec![0.9, 0.1]).unwrap(),
            ],
            selected,
            group_quantiles: vec![GroupQuantiles {
                label: "all".into(),
                count: 3,
                q50: 0.1,
                q75: 0.333333333333,
                q90: 0.333333333333,
            }],
        }
    }

    #[test]
    fn tabular_shape_matches_the_report() {
        let text = render_tabular(&sample_report(false));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4, "header plus three rows");
        assert_eq!(lines[0], "t,w0,w1,residual,eta,alpha");
        assert!(lines[1].ends_with(",,"), "no selection columns for a fixed rule");
    }

    #[test]
    fn tabular_round_trips_within_1e_11() {
        for meta in [false, true] {
            let report = sample_report(meta);
            let rows = parse_tabular(&render_tabular(&report)).unwrap();
            assert_eq!(rows.len(), 3);
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(row.t, i + 1);
                for (parsed, original) in
                    row.weights.iter().zip(report.weight_trajectory[i].as_slice())
                {
                    assert!((parsed - original).abs() <= 1e-11 * original.abs().max(1.0));
                }
                assert!(
                    (row.residual - report.residuals[i]).abs()
                        <= 1e-11 * report.residuals[i].abs().max(1.0)
                );
                match (&report.selected, row.eta) {
                    (Some(points), Some(eta)) => {
                        assert!((eta - points[i].eta).abs() <= 1e-11);
                        assert!((row.alpha.unwrap() - points[i].alpha.unwrap()).abs() <= 1e-11);
                    }
                    (None, None) => assert_eq!(row.alpha, None),
                    other => panic!("selection mismatch: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn structured_text_carries_rmse_to_twelve_digits() {
        let report = sample_report(false);
        let text = render_structured(&report);
        let line = text.lines().find(|l| l.starts_with("rmse = ")).unwrap();
        let value: f64 = line.trim_start_matches("rmse = ").parse().unwrap();
        let rmse = report.rmse.unwrap();
        assert!((value - rmse).abs() <= 1e-11 * rmse);
        assert!(text.contains("mean_loss = "));
        assert!(text.contains("regret_1 = "));
        assert!(text.contains("group_all_q90 = "));
    }

    #[test]
    fn structured_text_lists_the_selection_trajectory() {
        let text = render_structured(&sample_report(true));
        assert!(text.contains("selected_eta_1 = 1.00000000000e-1"));
        assert!(text.contains("selected_alpha_3 = 1.00000000000e-1"));
        let no_meta = render_structured(&sample_report(false));
        assert!(!no_meta.contains("selected_eta"));
    }
}
