//! The on-disk stream format: comma-separated text, one round per row.
//!
//! Header: `timestamp,observation[,group],<expert names...>`. The first
//! column is a cosmetic label, the second the observation, and an optional
//! third column literally named `group` carries a per-round label used for
//! residual grouping. Every remaining column is one expert; an empty cell
//! means the expert was inactive that round. Floats are written in Rust's
//! shortest round-trip form, so save-then-load reproduces values bitwise.

use std::fs;
use std::path::Path;

use sleet_core::oracles::Dataset;
use sleet_core::types::{ActiveSet, ForecastRound};

use crate::error::{CliError, Result};

/// A parsed data file: the validated stream plus the optional per-round
/// group labels and the expert names from the header.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub data: Dataset,
    pub groups: Option<Vec<String>>,
    pub expert_names: Vec<String>,
}

fn dataset_error(path: &Path, row: usize, message: impl Into<String>) -> CliError {
    CliError::Dataset { path: path.to_path_buf(), row, message: message.into() }
}

/// Reads and validates a stream. When `bound` is given every value is
/// checked against it row by row; otherwise the bound is inferred as the
/// largest value present.
pub fn load_dataset(path: &Path, bound: Option<f64>) -> Result<LoadedDataset> {
    let text = fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    let mut lines = text.lines().map(str::trim_end);

    let header = lines.next().ok_or_else(|| dataset_error(path, 0, "file is empty"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 3 {
        return Err(dataset_error(
            path,
            0,
            "need at least timestamp, observation, and one expert column",
        ));
    }
    let has_groups = columns[2] == "group";
    let expert_start = if has_groups { 3 } else { 2 };
    let expert_names: Vec<String> =
        columns[expert_start..].iter().map(|s| s.to_string()).collect();
    if expert_names.is_empty() {
        return Err(dataset_error(path, 0, "no expert columns after the group column"));
    }
    let n = expert_names.len();

    let mut rounds = Vec::new();
    let mut groups: Vec<String> = Vec::new();
    let mut t = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        t += 1;
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != columns.len() {
            return Err(dataset_error(
                path,
                t,
                format!("expected {} columns, found {}", columns.len(), cells.len()),
            ));
        }
        let observation: f64 = cells[1]
            .parse()
            .map_err(|_| dataset_error(path, t, format!("unreadable observation {:?}", cells[1])))?;
        if let Some(b) = bound {
            if !(0.0..=b).contains(&observation) {
                return Err(dataset_error(path, t, format!("observation {observation} outside [0, {b}]")));
            }
        }
        if has_groups {
            groups.push(cells[2].to_string());
        }
        let mut forecasts = vec![0.0f64; n];
        let mut members = Vec::new();
        for (j, cell) in cells[expert_start..].iter().enumerate() {
            if cell.is_empty() {
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| {
                dataset_error(path, t, format!("unreadable forecast {cell:?} for expert {}", expert_names[j]))
            })?;
            if let Some(b) = bound {
                if !(0.0..=b).contains(&value) {
                    return Err(dataset_error(
                        path,
                        t,
                        format!("forecast {value} for expert {} outside [0, {b}]", expert_names[j]),
                    ));
                }
            }
            forecasts[j] = value;
            members.push(j);
        }
        if members.is_empty() {
            return Err(dataset_error(path, t, "every expert is inactive"));
        }
        let active = ActiveSet::new(n, members)
            .map_err(|e| dataset_error(path, t, e.to_string()))?;
        let round = ForecastRound::new(t, active, forecasts)
            .and_then(|r| r.with_observation(observation))
            .map_err(|e| dataset_error(path, t, e.to_string()))?;
        rounds.push(round);
    }
    if rounds.is_empty() {
        return Err(dataset_error(path, 0, "no data rows"));
    }

    let data = match bound {
        Some(b) => Dataset::new(rounds, b),
        None => Dataset::with_inferred_bound(rounds),
    }
    .map_err(CliError::Core)?;
    Ok(LoadedDataset {
        data,
        groups: if has_groups { Some(groups) } else { None },
        expert_names,
    })
}

/// Writes a stream in the format `load_dataset` reads. Expert names are
/// `e0..` unless provided; floats use shortest round-trip rendering.
pub fn save_dataset(
    path: &Path,
    data: &Dataset,
    groups: Option<&[String]>,
    expert_names: Option<&[String]>,
) -> Result<()> {
    let n = data.expert_count();
    let mut out = String::from("timestamp,observation");
    if groups.is_some() {
        out.push_str(",group");
    }
    for j in 0..n {
        out.push(',');
        match expert_names {
            Some(names) => out.push_str(&names[j]),
            None => out.push_str(&format!("e{j}")),
        }
    }
    out.push('\n');
    for (i, round) in data.rounds().iter().enumerate() {
        out.push_str(&format!("{}", round.t()));
        out.push_str(&format!(",{:?}", round.observation().expect("dataset rounds are observed")));
        if let Some(groups) = groups {
            out.push(',');
            out.push_str(&groups[i]);
        }
        for j in 0..n {
            out.push(',');
            if let Some(f) = round.forecast(j) {
                out.push_str(&format!("{f:?}"));
            }
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}
