//! Online hyperparameter selection over a grid of rule instances.
//!
//! One member rule runs per grid point. Each round the meta-rule plays the
//! weights of the member whose cumulative loss is smallest so far, then
//! advances every member on the revealed observation and scores it with its
//! own prediction's plain loss. Selection is therefore prequential: the
//! prediction at round `t` depends only on data through `t - 1`.
//!
//! In adaptive mode the learning-rate grid grows whenever the point just
//! played sits at an endpoint of the current rate range, adding rates
//! `2^{1..3}` above a maximal point and `2^{-1..-3}` below a minimal one.
//! Members created mid-stream start from the prior state and inherit the
//! current minimal cumulative loss, so they compete immediately without any
//! retroactive replay. Share rates are never extended; a new rate is crossed
//! with every share rate already in the grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::LossSpec;
use crate::operational::OperationalState;
use crate::rules::{RuleKind, RuleState};
use crate::types::{aggregate_prediction, ActiveSet, ForecastRound, WeightVector};

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// One grid point: a learning rate, optionally paired with a share rate for
/// fixed-share members.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub eta: f64,
    pub alpha: Option<f64>,
}

/// Ordered set of grid points with their cumulative losses. Order is
/// insertion order and breaks selection ties, so runs are reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<GridPoint>,
    cumulative: Vec<f64>,
}

fn validate_point(p: &GridPoint) -> Result<()> {
    if !(p.eta.is_finite() && p.eta > 0.0) {
        return Err(Error::InvalidGrid("learning rates must be positive and finite"));
    }
    if let Some(a) = p.alpha {
        if !(a.is_finite() && (0.0..=1.0).contains(&a)) {
            return Err(Error::InvalidGrid("share rates must lie in [0, 1]"));
        }
    }
    Ok(())
}

impl Grid {
    /// Grid over learning rates only.
    pub fn from_etas(etas: &[f64]) -> Result<Self> {
        Grid::from_points(etas.iter().map(|&eta| GridPoint { eta, alpha: None }).collect())
    }

    /// Product grid: every rate paired with every share rate, rate-major in
    /// the order given.
    pub fn from_eta_alpha_product(etas: &[f64], alphas: &[f64]) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidGrid("share-rate list must be non-empty"));
        }
        let mut points = Vec::with_capacity(etas.len() * alphas.len());
        for &eta in etas {
            for &alpha in alphas {
                points.push(GridPoint { eta, alpha: Some(alpha) });
            }
        }
        Grid::from_points(points)
    }

    /// Grid from explicit points. Points must be distinct, and either all or
    /// none carry a share rate.
    pub fn from_points(points: Vec<GridPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidGrid("grid must contain at least one point"));
        }
        let with_alpha = points[0].alpha.is_some();
        for (i, p) in points.iter().enumerate() {
            validate_point(p)?;
            if p.alpha.is_some() != with_alpha {
                return Err(Error::InvalidGrid("points must uniformly carry or omit a share rate"));
            }
            for q in &points[..i] {
                if p == q {
                    return Err(Error::InvalidGrid("points must be distinct"));
                }
            }
        }
        let cumulative = alloc::vec![0.0; points.len()];
        Ok(Grid { points, cumulative })
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Grids are validated non-empty; provided for completeness.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// All points in insertion order.
    pub fn points(&self) -> &[GridPoint] {
        &self.points
    }

    /// The point at `index`.
    pub fn point(&self, index: usize) -> GridPoint {
        self.points[index]
    }

    /// Whether points carry share rates.
    pub fn has_alpha(&self) -> bool {
        self.points[0].alpha.is_some()
    }

    /// Cumulative losses aligned with [`Grid::points`].
    pub fn cumulative_losses(&self) -> &[f64] {
        &self.cumulative
    }

    /// Adds one round's loss to the point at `index`.
    pub fn record_loss(&mut self, index: usize, loss: f64) -> Result<()> {
        if index >= self.points.len() {
            return Err(Error::ExpertOutOfRange { expert: index, count: self.points.len() });
        }
        if !loss.is_finite() {
            return Err(Error::InvalidParameter("recorded losses must be finite"));
        }
        self.cumulative[index] += loss;
        Ok(())
    }

    /// Index of the point with the smallest cumulative loss; ties go to the
    /// earliest-added point.
    pub fn select(&self) -> Result<usize> {
        if self.points.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut best = 0usize;
        for i in 1..self.cumulative.len() {
            if self.cumulative[i] < self.cumulative[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Distinct learning rates, smallest and largest.
    fn eta_extremes(&self) -> (f64, f64) {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for p in &self.points {
            if p.eta < min {
                min = p.eta;
            }
            if p.eta > max {
                max = p.eta;
            }
        }
        (min, max)
    }

    /// Distinct share rates in first-appearance order (a single `None` for
    /// rate-only grids).
    fn alpha_order(&self) -> Vec<Option<f64>> {
        let mut seen: Vec<Option<f64>> = Vec::new();
        for p in &self.points {
            if !seen.contains(&p.alpha) {
                seen.push(p.alpha);
            }
        }
        seen
    }

    /// Grows the grid around the point at `selected` when its rate is an
    /// endpoint: rates `{2, 4, 8} * eta` above a maximum, `{1/2, 1/4, 1/8} *
    /// eta` below a minimum, both for a grid with a single rate. Every new
    /// rate is crossed with all share rates present. New points start with
    /// cumulative loss equal to the current minimum. Returns the indices of
    /// the added points; an interior rate adds nothing.
    pub fn extend(&mut self, selected: usize) -> Result<Vec<usize>> {
        if selected >= self.points.len() {
            return Err(Error::ExpertOutOfRange { expert: selected, count: self.points.len() });
        }
        let eta = self.points[selected].eta;
        let (min, max) = self.eta_extremes();
        let mut factors: Vec<f64> = Vec::new();
        if eta == max {
            factors.extend([2.0, 4.0, 8.0]);
        }
        if eta == min {
            factors.extend([0.5, 0.25, 0.125]);
        }
        if factors.is_empty() {
            return Ok(Vec::new());
        }
        let floor = {
            let mut m = self.cumulative[0];
            for &c in &self.cumulative[1..] {
                if c < m {
                    m = c;
                }
            }
            m
        };
        let alphas = self.alpha_order();
        let mut added = Vec::new();
        for f in factors {
            for &alpha in &alphas {
                let p = GridPoint { eta: f * eta, alpha };
                validate_point(&p)?;
                added.push(self.points.len());
                self.points.push(p);
                self.cumulative.push(floor);
            }
        }
        Ok(added)
    }
}

/// Index of the grid point with the smallest cumulative loss (ties to the
/// earliest-added point).
pub fn meta_select(grid: &Grid) -> Result<usize> {
    grid.select()
}

/// The fixed share-rate grid used alongside adaptive learning-rate grids.
pub fn alpha_grid() -> [f64; 8] {
    [0.0, 0.005, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0]
}

/// The built-in static grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StaticGridName {
    /// Nine rates `10^{-k}`, `k = 0..8`.
    SlovakSmall,
    /// Twenty-five rates `{1, 2.5, 5} * 10^{-k}`, `k = 1..8`, plus 1.
    SlovakLarge,
    /// The nine small-grid rates crossed with six share rates.
    SlovakFs,
}

impl core::str::FromStr for StaticGridName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slovak-small" => Ok(StaticGridName::SlovakSmall),
            "slovak-large" => Ok(StaticGridName::SlovakLarge),
            "slovak-fs" => Ok(StaticGridName::SlovakFs),
            _ => Err(Error::InvalidGrid("unknown grid name")),
        }
    }
}

/// Builds one of the built-in grids. Rates are inserted from largest to
/// smallest; the fixed-share grid is rate-major with share rates ascending.
pub fn static_grid(name: StaticGridName) -> Grid {
    let small_etas: Vec<f64> = (0..9).map(|k| libm_free_pow10(-k)).collect();
    match name {
        StaticGridName::SlovakSmall => Grid::from_etas(&small_etas).expect("static grid is valid"),
        StaticGridName::SlovakLarge => {
            let mut etas = alloc::vec![1.0];
            for k in 1..=8 {
                let base = libm_free_pow10(-k);
                for m in [5.0, 2.5, 1.0] {
                    etas.push(m * base);
                }
            }
            Grid::from_etas(&etas).expect("static grid is valid")
        }
        StaticGridName::SlovakFs => {
            Grid::from_eta_alpha_product(&small_etas, &[0.01, 0.05, 0.1, 0.2, 0.3, 0.4])
                .expect("static grid is valid")
        }
    }
}

/// Exact powers of ten without a float `pow`, so grid values are identical
/// across std and libm builds. Positive powers are exact below 2^53; a
/// negative power is one correctly rounded division away.
fn libm_free_pow10(k: i32) -> f64 {
    let mut v = 1.0f64;
    for _ in 0..k.abs() {
        v *= 10.0;
    }
    if k < 0 {
        1.0 / v
    } else {
        v
    }
}

// ---------------------------------------------------------------------------
// Meta state
// ---------------------------------------------------------------------------

/// How to build one member rule from a grid point. All members share the
/// family, loss, gradient mode, prior, and (optionally) block size, so the
/// first-round prediction is the same for every member.
#[derive(Debug, Clone)]
pub struct MemberSpec {
    pub kind: RuleKind,
    pub loss: LossSpec,
    pub gradient: bool,
    pub prior: WeightVector,
    /// `Some(b)` wraps every member in a block-frozen state of block size
    /// `b`; `None` runs the base rules directly.
    pub block_size: Option<usize>,
}

impl MemberSpec {
    fn build(&self, point: &GridPoint) -> Result<Member> {
        let base = match (self.kind, point.alpha) {
            (RuleKind::FixedShare, Some(alpha)) => {
                RuleState::fixed_share(self.loss, point.eta, alpha, self.prior.clone())?
            }
            (RuleKind::FixedShare, None) => {
                return Err(Error::InvalidGrid("fixed-share members need share rates"));
            }
            (_, Some(_)) => {
                return Err(Error::InvalidGrid("share rates only apply to fixed-share members"));
            }
            (RuleKind::Ewa, None) => RuleState::ewa(self.loss, point.eta, self.prior.clone())?,
            (RuleKind::Specialist, None) => {
                RuleState::specialist(self.loss, point.eta, self.prior.clone())?
            }
        };
        let base = if self.gradient { base.gradientize() } else { base };
        Ok(match self.block_size {
            Some(b) => Member::Operational(OperationalState::new(b, base)?),
            None => Member::Base(base),
        })
    }
}

#[derive(Debug, Clone)]
enum Member {
    Base(RuleState),
    Operational(OperationalState),
}

impl Member {
    fn predict(&self, active: &ActiveSet) -> Result<WeightVector> {
        match self {
            Member::Base(s) => s.predict(active),
            Member::Operational(s) => s.predict(active),
        }
    }

    fn step(
        &mut self,
        round: &ForecastRound,
        next_active: Option<&ActiveSet>,
    ) -> Result<WeightVector> {
        match self {
            Member::Base(s) => s.step(round, next_active),
            Member::Operational(s) => s.step(round, next_active),
        }
    }
}

/// The meta-rule: a grid of member rules plus the index currently followed.
#[derive(Debug, Clone)]
pub struct MetaState {
    spec: MemberSpec,
    grid: Grid,
    members: Vec<Member>,
    selected: usize,
    adaptive: bool,
    rounds_seen: usize,
}

impl MetaState {
    /// Builds one member per grid point. Fails when the grid's share-rate
    /// shape does not match the member family.
    pub fn new(spec: MemberSpec, grid: Grid, adaptive: bool) -> Result<Self> {
        let mut members = Vec::with_capacity(grid.len());
        for point in grid.points() {
            members.push(spec.build(point)?);
        }
        let selected = grid.select()?;
        Ok(MetaState { spec, grid, members, selected, adaptive, rounds_seen: 0 })
    }

    /// The grid with its cumulative losses.
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Index of the member the next prediction will come from.
    pub fn selected_index(&self) -> usize {
        self.selected
    }

    /// Parameters of the member the next prediction will come from.
    pub fn selected_point(&self) -> GridPoint {
        self.grid.point(self.selected)
    }

    /// Number of members (grows in adaptive mode).
    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    /// Rounds processed so far.
    pub fn rounds_seen(&self) -> usize {
        self.rounds_seen
    }

    /// Weights of the currently selected member against `active`.
    pub fn predict(&self, active: &ActiveSet) -> Result<WeightVector> {
        self.members[self.selected].predict(active)
    }

    /// Runs one round: plays the selected member's weights, advances every
    /// member and scores it with the plain loss of its own prediction,
    /// extends the grid in adaptive mode when the played rate was an
    /// endpoint, and re-selects. Returns the weights that were played.
    pub fn step(
        &mut self,
        round: &ForecastRound,
        next_active: Option<&ActiveSet>,
    ) -> Result<WeightVector> {
        let played = self.members[self.selected].predict(round.active())?;
        let y = round.observation_or_err()?;
        for (i, member) in self.members.iter_mut().enumerate() {
            let weights = member.step(round, next_active)?;
            let prediction = aggregate_prediction(&weights, round)?;
            // Members are always scored by realized loss, not by the
            // linearized loss their own updates may use.
            let loss = self.spec.loss.eval(prediction, y)?;
            self.grid.record_loss(i, loss)?;
        }
        if self.adaptive {
            let added = self.grid.extend(self.selected)?;
            for idx in added {
                let point = self.grid.point(idx);
                self.members.push(self.spec.build(&point)?);
            }
        }
        self.selected = self.grid.select()?;
        self.rounds_seen += 1;
        Ok(played)
    }
}
