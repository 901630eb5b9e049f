//! Run configuration: a line-oriented `key = value` file, overridden by
//! command-line flags, resolved into a validated run plan. Validation is
//! strict in both directions: every parameter a rule needs must be present,
//! and a parameter no rule uses is rejected rather than ignored.

use std::path::PathBuf;

use sleet_core::loss::LossSpec;
use sleet_core::rules::RuleKind;
use sleet_core::tuning::{alpha_grid, static_grid, Grid, GridPoint, StaticGridName};

use crate::error::{CliError, Result};

fn config_err(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

// ---------------------------------------------------------------------------
// Raw key/value layer
// ---------------------------------------------------------------------------

/// Unresolved settings: every field mirrors one config key / CLI flag and
/// holds the raw text. `None` means "not provided here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    pub data: Option<String>,
    pub loss: Option<String>,
    pub rule: Option<String>,
    pub eta: Option<String>,
    pub alpha: Option<String>,
    pub block_size: Option<String>,
    pub prior: Option<String>,
    pub groups: Option<String>,
    pub grid: Option<String>,
    pub adaptive_grid: Option<String>,
    pub seed: Option<String>,
    pub report: Option<String>,
    pub format: Option<String>,
    pub bound: Option<String>,
    pub budget: Option<String>,
}

impl RawConfig {
    fn slot(&mut self, key: &str) -> Option<&mut Option<String>> {
        match key {
            "data" => Some(&mut self.data),
            "loss" => Some(&mut self.loss),
            "rule" => Some(&mut self.rule),
            "eta" => Some(&mut self.eta),
            "alpha" => Some(&mut self.alpha),
            "block-size" => Some(&mut self.block_size),
            "prior" => Some(&mut self.prior),
            "groups" => Some(&mut self.groups),
            "grid" => Some(&mut self.grid),
            "adaptive-grid" => Some(&mut self.adaptive_grid),
            "seed" => Some(&mut self.seed),
            "report" => Some(&mut self.report),
            "format" => Some(&mut self.format),
            "bound" => Some(&mut self.bound),
            "budget" => Some(&mut self.budget),
            _ => None,
        }
    }

    /// Parses a config file: one `key = value` per line, full-line `#`
    /// comments, blank lines ignored. Unknown and repeated keys are errors.
    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut raw = RawConfig::default();
        for (index, line) in text.lines().enumerate() {
            let line_no = index + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                config_err(format!("config line {line_no}: expected key = value"))
            })?;
            let key = key.trim();
            let value = value.trim();
            let slot = raw.slot(key).ok_or_else(|| {
                config_err(format!("config line {line_no}: unknown key \"{key}\""))
            })?;
            if slot.is_some() {
                return Err(config_err(format!(
                    "config line {line_no}: key \"{key}\" given twice"
                )));
            }
            *slot = Some(value.to_string());
        }
        Ok(raw)
    }

    /// Overlays command-line flags on top of file values; a flag that was
    /// given wins over the file.
    pub fn overlay(self, flags: RawConfig) -> RawConfig {
        RawConfig {
            data: flags.data.or(self.data),
            loss: flags.loss.or(self.loss),
            rule: flags.rule.or(self.rule),
            eta: flags.eta.or(self.eta),
            alpha: flags.alpha.or(self.alpha),
            block_size: flags.block_size.or(self.block_size),
            prior: flags.prior.or(self.prior),
            groups: flags.groups.or(self.groups),
            grid: flags.grid.or(self.grid),
            adaptive_grid: flags.adaptive_grid.or(self.adaptive_grid),
            seed: flags.seed.or(self.seed),
            report: flags.report.or(self.report),
            format: flags.format.or(self.format),
            bound: flags.bound.or(self.bound),
            budget: flags.budget.or(self.budget),
        }
    }
}

// ---------------------------------------------------------------------------
// Resolved plan
// ---------------------------------------------------------------------------

/// Hindsight benchmarks that can run in place of an online rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Uniform,
    BestExpert,
    BestConvex,
    BestCompound(usize),
    Prescient,
    Partition,
}

/// How the online rule is tuned: one fixed parameter point, or a grid the
/// meta-rule selects from (optionally growing at the edges).
#[derive(Debug, Clone, PartialEq)]
pub enum Tuning {
    Fixed { eta: f64, alpha: Option<f64> },
    Meta { grid: GridSpec },
}

/// Grid specification for a meta-rule.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// A predefined grid by name.
    Named(StaticGridName),
    /// Explicit points, `eta` or `eta@alpha` entries.
    Explicit(Vec<GridPoint>),
    /// Seed learning rates for an adaptive grid that extends at its edges;
    /// mixing rates are crossed in automatically when the family needs them.
    Seeds(Vec<f64>),
}

impl GridSpec {
    /// Materializes the grid for the given rule family and reports whether
    /// edge extension is enabled. Mixing rates must be present exactly when
    /// the family uses them.
    pub fn build(&self, kind: RuleKind) -> Result<(Grid, bool)> {
        let needs_alpha = kind == RuleKind::FixedShare;
        let (grid, adaptive) = match self {
            GridSpec::Named(name) => (static_grid(*name), false),
            GridSpec::Explicit(points) => {
                (Grid::from_points(points.clone()).map_err(CliError::Core)?, false)
            }
            GridSpec::Seeds(etas) => {
                let grid = if needs_alpha {
                    Grid::from_eta_alpha_product(etas, &alpha_grid())
                } else {
                    Grid::from_etas(etas)
                };
                (grid.map_err(CliError::Core)?, true)
            }
        };
        if grid.has_alpha() != needs_alpha {
            return Err(config_err(if needs_alpha {
                "fixed-share meta needs a grid with mixing rates (eta@alpha entries, \
                 a fixed-share preset, or adaptive-grid)"
            } else {
                "this rule family takes a plain learning-rate grid, not eta@alpha entries"
            }));
        }
        Ok((grid, adaptive))
    }
}

/// A validated online-rule plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RulePlan {
    pub kind: RuleKind,
    pub gradient: bool,
    /// `Some(block)` when weights are frozen per block of rounds.
    pub block_size: Option<usize>,
    pub tuning: Tuning,
}

/// What the backtest runs: an online rule or a hindsight oracle.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Rule(RulePlan),
    Oracle(OracleKind),
}

/// Initial weight allocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PriorMode {
    Uniform,
    /// Equal mass per expert group (consecutive groups of these sizes),
    /// split equally inside each group.
    Fair(Vec<usize>),
}

/// Report rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    StructuredText,
    Tabular,
}

/// Fully validated run plan.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: PathBuf,
    pub loss: LossSpec,
    /// The rule text as given, echoed in reports.
    pub rule_label: String,
    pub action: Action,
    pub bound: Option<f64>,
    pub prior: PriorMode,
    pub seed: u64,
    /// Function-evaluation budget for search-based oracles.
    pub budget: usize,
    pub report: Option<PathBuf>,
    pub format: ReportFormat,
}

// ---------------------------------------------------------------------------
// Rule grammar
// ---------------------------------------------------------------------------

/// Parses a rule name: an oracle (`uniform`, `best-expert`, `best-convex`,
/// `best-compound:<m>`, `prescient`, `partition`) or a rule of the form
/// `[meta-]<ewa|specialist|fixed-share>[-grad][-op]`.
pub fn parse_rule_name(text: &str) -> Result<ParsedRule> {
    match text {
        "uniform" => return Ok(ParsedRule::Oracle(OracleKind::Uniform)),
        "best-expert" => return Ok(ParsedRule::Oracle(OracleKind::BestExpert)),
        "best-convex" => return Ok(ParsedRule::Oracle(OracleKind::BestConvex)),
        "prescient" => return Ok(ParsedRule::Oracle(OracleKind::Prescient)),
        "partition" => return Ok(ParsedRule::Oracle(OracleKind::Partition)),
        _ => {}
    }
    if let Some(arg) = text.strip_prefix("best-compound:") {
        let switches: usize = arg
            .parse()
            .map_err(|_| config_err(format!("best-compound wants a switch count, got \"{arg}\"")))?;
        return Ok(ParsedRule::Oracle(OracleKind::BestCompound(switches)));
    }
    let mut rest = text;
    let meta = match rest.strip_prefix("meta-") {
        Some(r) => {
            rest = r;
            true
        }
        None => false,
    };
    let operational = match rest.strip_suffix("-op") {
        Some(r) => {
            rest = r;
            true
        }
        None => false,
    };
    let gradient = match rest.strip_suffix("-grad") {
        Some(r) => {
            rest = r;
            true
        }
        None => false,
    };
    let kind = match rest {
        "ewa" => RuleKind::Ewa,
        "specialist" => RuleKind::Specialist,
        "fixed-share" => RuleKind::FixedShare,
        _ => {
            return Err(config_err(format!(
                "unknown rule \"{text}\"; expected an oracle name or \
                 [meta-]<ewa|specialist|fixed-share>[-grad][-op]"
            )))
        }
    };
    Ok(ParsedRule::Rule { kind, gradient, operational, meta })
}

/// Outcome of the rule-name grammar, before parameter validation.
#[derive(Debug, Clone, PartialEq)]
pub enum ParsedRule {
    Oracle(OracleKind),
    Rule { kind: RuleKind, gradient: bool, operational: bool, meta: bool },
}

// ---------------------------------------------------------------------------
// Resolution
// ---------------------------------------------------------------------------

fn parse_f64(key: &str, text: &str) -> Result<f64> {
    text.parse::<f64>()
        .map_err(|_| config_err(format!("{key} wants a number, got \"{text}\"")))
}

fn parse_usize(key: &str, text: &str) -> Result<usize> {
    text.parse::<usize>()
        .map_err(|_| config_err(format!("{key} wants a non-negative integer, got \"{text}\"")))
}

fn forbid(option: &Option<String>, key: &str, why: &str) -> Result<()> {
    if option.is_some() {
        return Err(config_err(format!("{key} does not apply: {why}")));
    }
    Ok(())
}

fn parse_grid_spec(text: &str) -> Result<GridSpec> {
    if let Ok(name) = text.parse::<StaticGridName>() {
        return Ok(GridSpec::Named(name));
    }
    let entries: Vec<&str> = text.split(',').map(str::trim).collect();
    let with_alpha = entries.iter().filter(|e| e.contains('@')).count();
    if with_alpha != 0 && with_alpha != entries.len() {
        return Err(config_err(
            "grid entries must be uniformly eta or eta@alpha, not a mixture",
        ));
    }
    let mut points = Vec::with_capacity(entries.len());
    for entry in entries {
        let point = match entry.split_once('@') {
            Some((eta, alpha)) => GridPoint {
                eta: parse_f64("grid eta", eta)?,
                alpha: Some(parse_f64("grid alpha", alpha)?),
            },
            None => GridPoint { eta: parse_f64("grid eta", entry)?, alpha: None },
        };
        points.push(point);
    }
    Ok(GridSpec::Explicit(points))
}

fn parse_seed_etas(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .map(|e| parse_f64("adaptive-grid eta", e))
        .collect()
}

impl RawConfig {
    /// Validates and resolves into a run plan. Every parameter must be
    /// present exactly when the selected rule uses it.
    pub fn resolve(&self) -> Result<RunConfig> {
        let data = PathBuf::from(
            self.data.as_deref().ok_or_else(|| config_err("missing required key: data"))?,
        );
        let loss = match self.loss.as_deref().unwrap_or("square") {
            "square" => LossSpec::Square,
            "absolute" => LossSpec::Absolute,
            "absolute-percentage" => LossSpec::AbsolutePercentage,
            other => {
                return Err(config_err(format!(
                    "unknown loss \"{other}\"; expected square, absolute, or absolute-percentage"
                )))
            }
        };
        let rule_label = self
            .rule
            .as_deref()
            .ok_or_else(|| config_err("missing required key: rule"))?
            .to_string();
        let parsed = parse_rule_name(&rule_label)?;

        let action = match parsed {
            ParsedRule::Oracle(kind) => {
                for (option, key) in [
                    (&self.eta, "eta"),
                    (&self.alpha, "alpha"),
                    (&self.block_size, "block-size"),
                    (&self.grid, "grid"),
                    (&self.adaptive_grid, "adaptive-grid"),
                    (&self.prior, "prior"),
                    (&self.groups, "groups"),
                ] {
                    forbid(option, key, "oracles take no rule parameters")?;
                }
                if !matches!(kind, OracleKind::BestConvex | OracleKind::Partition) {
                    forbid(
                        &self.budget,
                        "budget",
                        "only best-convex and partition oracles search",
                    )?;
                }
                Action::Oracle(kind)
            }
            ParsedRule::Rule { kind, gradient, operational, meta } => {
                forbid(&self.budget, "budget", "only best-convex and partition oracles search")?;
                let block_size = if operational {
                    let text = self.block_size.as_deref().ok_or_else(|| {
                        config_err("operational rules need block-size")
                    })?;
                    let block = parse_usize("block-size", text)?;
                    if block == 0 {
                        return Err(config_err("block-size must be at least 1"));
                    }
                    Some(block)
                } else {
                    forbid(&self.block_size, "block-size", "the rule is not operational")?;
                    None
                };
                let tuning = if meta {
                    forbid(&self.eta, "eta", "the meta-rule's grid supplies learning rates")?;
                    forbid(&self.alpha, "alpha", "the meta-rule's grid supplies mixing rates")?;
                    let spec = match (&self.grid, &self.adaptive_grid) {
                        (Some(text), None) => parse_grid_spec(text)?,
                        (None, Some(text)) => GridSpec::Seeds(parse_seed_etas(text)?),
                        (None, None) => {
                            return Err(config_err(
                                "meta rules need exactly one of grid or adaptive-grid",
                            ))
                        }
                        (Some(_), Some(_)) => {
                            return Err(config_err(
                                "grid and adaptive-grid are mutually exclusive",
                            ))
                        }
                    };
                    // Validate grid/kind compatibility now so errors surface
                    // before any data is read.
                    spec.build(kind)?;
                    Tuning::Meta { grid: spec }
                } else {
                    forbid(&self.grid, "grid", "grids apply to meta rules only")?;
                    forbid(&self.adaptive_grid, "adaptive-grid", "grids apply to meta rules only")?;
                    let eta = parse_f64(
                        "eta",
                        self.eta
                            .as_deref()
                            .ok_or_else(|| config_err("this rule needs eta"))?,
                    )?;
                    let alpha = if kind == RuleKind::FixedShare {
                        Some(parse_f64(
                            "alpha",
                            self.alpha
                                .as_deref()
                                .ok_or_else(|| config_err("fixed-share needs alpha"))?,
                        )?)
                    } else {
                        forbid(&self.alpha, "alpha", "only fixed-share mixes weights")?;
                        None
                    };
                    Tuning::Fixed { eta, alpha }
                };
                Action::Rule(RulePlan { kind, gradient, block_size, tuning })
            }
        };

        let prior = match (self.prior.as_deref(), &action) {
            (None, _) => {
                forbid(&self.groups, "groups", "groups only shape the fair prior")?;
                PriorMode::Uniform
            }
            (Some("uniform"), Action::Rule(_)) => {
                forbid(&self.groups, "groups", "groups only shape the fair prior")?;
                PriorMode::Uniform
            }
            (Some("fair"), Action::Rule(_)) => {
                let text = self
                    .groups
                    .as_deref()
                    .ok_or_else(|| config_err("prior = fair needs groups (sizes like 24,10,1)"))?;
                let sizes: Vec<usize> = text
                    .split(',')
                    .map(str::trim)
                    .map(|s| parse_usize("groups", s))
                    .collect::<Result<_>>()?;
                if sizes.contains(&0) {
                    return Err(config_err("group sizes must be positive"));
                }
                PriorMode::Fair(sizes)
            }
            (Some(other), Action::Rule(_)) => {
                return Err(config_err(format!(
                    "unknown prior \"{other}\"; expected uniform or fair"
                )))
            }
            // Unreachable for oracles: prior was forbidden above.
            (Some(_), Action::Oracle(_)) => unreachable!("prior rejected for oracles"),
        };

        let bound = match self.bound.as_deref() {
            Some(text) => {
                let b = parse_f64("bound", text)?;
                if !(b.is_finite() && b > 0.0) {
                    return Err(config_err("bound must be positive and finite"));
                }
                Some(b)
            }
            None => None,
        };
        let seed = match self.seed.as_deref() {
            Some(text) => text
                .parse::<u64>()
                .map_err(|_| config_err(format!("seed wants an unsigned integer, got \"{text}\"")))?,
            None => 0,
        };
        let budget = match self.budget.as_deref() {
            Some(text) => {
                let b = parse_usize("budget", text)?;
                if b == 0 {
                    return Err(config_err("budget must be positive"));
                }
                b
            }
            None => 2000,
        };
        let format = match self.format.as_deref().unwrap_or("structured-text") {
            "structured-text" => ReportFormat::StructuredText,
            "tabular" => ReportFormat::Tabular,
            other => {
                return Err(config_err(format!(
                    "unknown format \"{other}\"; expected structured-text or tabular"
                )))
            }
        };

        Ok(RunConfig {
            data,
            loss,
            rule_label,
            action,
            bound,
            prior,
            seed,
            budget,
            report: self.report.as_deref().map(PathBuf::from),
            format,
        })
    }
}
