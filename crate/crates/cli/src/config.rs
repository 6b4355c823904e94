//! Experiment configuration: flat `key = value` lines grouped by `[section]`
//! headers (a TOML subset).

use std::path::Path;

use branchlab_core::double::RootBranches;
use branchlab_core::lattice::{PointSet, MAX_DIM};
use branchlab_core::relations::{MEstimator, RelationTag, RelationTruncation};
use branchlab_core::Point;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub experiment: Experiment,
    pub truncation: Truncation,
    pub geometry: Geometry,
    /// Scheduling and paths; not part of the config hash.
    pub run: Run,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Experiment {
    /// Subcommand this file is meant for; checked when present.
    pub name: Option<String>,
    pub d: usize,
    pub seed: u64,
    pub reps: u64,
    /// Input table for `fit`.
    pub input: Option<String>,
}

impl Default for Experiment {
    fn default() -> Self {
        Self {
            name: None,
            d: 5,
            seed: 1,
            reps: 1000,
            input: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Truncation {
    /// Node cap per tree (per branch for double walks).
    pub cap_nodes: u64,
    /// Backbones stop on leaving `B(root, m * |x|)`.
    pub m: f64,
    /// Window backbones stop on leaving `B(0, exit_factor * r)`.
    pub exit_factor: f64,
    /// Generation horizons for visit tables.
    pub horizons: Vec<u32>,
    /// Generations tracked by `tree-stats`.
    pub generations: u32,
    /// `dbrw-visits` caps branches at `depth_factor * |x|^2` generations.
    pub depth_factor: f64,
    /// Attempts per survival-conditioned sample.
    pub budget: u64,
    /// `both` or `forward-only`, for `dbrw-*`.
    pub root_branches: String,
    /// Rerun every capped estimator at twice the cap (or depth) and report
    /// the difference.
    pub self_check: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            cap_nodes: 10_000,
            m: 4.0,
            exit_factor: 4.0,
            horizons: vec![5, 10, 20],
            generations: 30,
            depth_factor: 32.0,
            budget: 100_000,
            root_branches: "both".into(),
            self_check: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Geometry {
    /// Targets; `axis` adds `k * e_1` for each listed `k`.
    pub points: Vec<Vec<i32>>,
    pub axis: Vec<i32>,
    /// Base point of pair experiments (default: the origin).
    pub x: Option<Vec<i32>>,
    pub pool_orbit: bool,
    /// Window radius, or the radius of the class table for `brw-visits`.
    pub radius: f64,
    /// The set `K` for `capacity` and `vacant`; `k_radius` uses a ball.
    pub k_points: Vec<Vec<i32>>,
    pub k_radius: Option<f64>,
    /// Levels; `relation` with tag `M` uses `[u_lo, u[0])`.
    pub u: Vec<f64>,
    pub u_lo: f64,
    /// `L`, `R` or `M`.
    pub tag: String,
    /// `intensity` or `window`.
    pub m_estimator: String,
    /// Chain lengths for `connect`.
    pub ks: Vec<usize>,
    /// Observation radii for `connect`, in units of `|x - y|`.
    pub obs_factors: Vec<f64>,
    /// Windows written out in full by `window`.
    pub export_windows: u64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            axis: Vec::new(),
            x: None,
            pool_orbit: true,
            radius: 3.0,
            k_points: Vec::new(),
            k_radius: None,
            u: vec![0.5],
            u_lo: 0.0,
            tag: "L".into(),
            m_estimator: "intensity".into(),
            ks: vec![1, 2],
            obs_factors: vec![1.5, 2.5, 4.0],
            export_windows: 1,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Run {
    pub threads: Option<usize>,
    pub out: Option<String>,
}

/// Model family of a subcommand, for the dimension guard.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Tree,
    Brw,
    Double,
    Fit,
}

pub const COMMANDS: [(&str, Family); 12] = [
    ("tree-stats", Family::Tree),
    ("brw-visits", Family::Brw),
    ("brw-hit", Family::Brw),
    ("dbrw-hit", Family::Double),
    ("dbrw-visits", Family::Double),
    ("intersect", Family::Double),
    ("capacity", Family::Double),
    ("window", Family::Double),
    ("vacant", Family::Double),
    ("relation", Family::Double),
    ("connect", Family::Double),
    ("fit", Family::Fit),
];

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

/// Dotted key of the `key = value` line containing byte `at`, e.g.
/// `truncation.cap_nodes`.
fn field_at(text: &str, at: usize) -> Option<String> {
    let mut table = None;
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') {
            table = Some(t.trim_matches(|c| c == '[' || c == ']').trim().to_string());
        }
        if at < start + line.len() {
            let key = t.split_once('=')?.0.trim();
            return Some(match table {
                Some(tb) => format!("{tb}.{key}"),
                None => key.to_string(),
            });
        }
        start += line.len();
    }
    None
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let field = e.span().and_then(|s| field_at(text, s.start)).unwrap_or_else(|| "config".into());
            invalid(&field, e.message().trim())
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// SHA-256 over the canonical JSON of everything except `[run]`.
    pub fn hash(&self) -> String {
        let view = (&self.experiment, &self.truncation, &self.geometry);
        let bytes = serde_json::to_vec(&view).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self, command: &str) -> Result<(), CliError> {
        let family = COMMANDS
            .iter()
            .find(|c| c.0 == command)
            .map(|c| c.1)
            .ok_or_else(|| invalid("command", format!("unknown subcommand {command}")))?;
        if let Some(name) = &self.experiment.name {
            if name != command {
                return Err(invalid("experiment.name", format!("config is for {name}, not {command}")));
            }
        }
        let (d, t, g) = (self.experiment.d, &self.truncation, &self.geometry);
        if d == 0 || d > MAX_DIM {
            return Err(invalid("experiment.d", format!("must be in 1..={MAX_DIM}")));
        }
        match family {
            Family::Brw if d < 3 => {
                return Err(invalid("experiment.d", format!("dimension guard: {command} needs d >= 3, got {d}")));
            }
            Family::Double if d < 5 => {
                return Err(invalid("experiment.d", format!("dimension guard: {command} needs d >= 5, got {d}")));
            }
            _ => {}
        }
        if self.experiment.reps == 0 && family != Family::Fit {
            return Err(invalid("experiment.reps", "must be positive"));
        }
        if t.cap_nodes == 0 {
            return Err(invalid("truncation.cap_nodes", "must be positive"));
        }
        if t.budget == 0 {
            return Err(invalid("truncation.budget", "must be positive"));
        }
        if !(t.m >= 2.0) {
            return Err(invalid("truncation.m", "must be at least 2"));
        }
        if !(t.exit_factor > 1.0) {
            return Err(invalid("truncation.exit_factor", "must exceed 1"));
        }
        if t.horizons.is_empty() {
            return Err(invalid("truncation.horizons", "must be nonempty"));
        }
        if !(t.depth_factor > 0.0) {
            return Err(invalid("truncation.depth_factor", "must be positive"));
        }
        if t.generations == 0 {
            return Err(invalid("truncation.generations", "must be positive"));
        }
        self.root_branches()?;
        if !(g.radius >= 1.0) {
            return Err(invalid("geometry.radius", "must be at least 1"));
        }
        if g.u.is_empty() || g.u.iter().any(|u| !(*u > 0.0)) {
            return Err(invalid("geometry.u", "levels must be positive"));
        }
        if !(g.u_lo >= 0.0) {
            return Err(invalid("geometry.u_lo", "must be nonnegative"));
        }
        if g.ks.is_empty() || g.ks.contains(&0) {
            return Err(invalid("geometry.ks", "chain lengths must be positive"));
        }
        if g.obs_factors.is_empty() || g.obs_factors.windows(2).any(|w| !(w[1] > w[0])) || !(g.obs_factors[0] > 0.0) {
            return Err(invalid("geometry.obs_factors", "must be positive and increasing"));
        }
        self.targets()?;
        self.base()?;
        self.k_set()?;
        self.tag()?;
        self.m_estimator()?;
        let needs_targets = matches!(command, "brw-hit" | "dbrw-hit" | "dbrw-visits" | "intersect" | "relation" | "connect");
        if needs_targets && self.targets()?.is_empty() {
            return Err(invalid("geometry.points", format!("{command} needs at least one target")));
        }
        if command == "fit" && self.experiment.input.is_none() {
            return Err(invalid("experiment.input", "fit needs an input table"));
        }
        Ok(())
    }

    fn point(&self, field: &str, c: &[i32]) -> Result<Point, CliError> {
        if c.len() != self.experiment.d {
            return Err(invalid(field, format!("point {c:?} has {} coordinates, expected {}", c.len(), self.experiment.d)));
        }
        Point::new(c).map_err(|e| invalid(field, e))
    }

    pub fn targets(&self) -> Result<Vec<Point>, CliError> {
        let mut out = Vec::new();
        for c in &self.geometry.points {
            out.push(self.point("geometry.points", c)?);
        }
        for &k in &self.geometry.axis {
            out.push(Point::on_axis(self.experiment.d, 0, k));
        }
        Ok(out)
    }

    pub fn base(&self) -> Result<Point, CliError> {
        match &self.geometry.x {
            Some(c) => self.point("geometry.x", c),
            None => Ok(Point::origin(self.experiment.d)),
        }
    }

    /// `K`, by default `{0}`.
    pub fn k_set(&self) -> Result<PointSet, CliError> {
        let d = self.experiment.d;
        if let Some(r) = self.geometry.k_radius {
            if !(r >= 0.0) {
                return Err(invalid("geometry.k_radius", "must be nonnegative"));
            }
            return Ok(PointSet::ball(Point::origin(d), r));
        }
        if self.geometry.k_points.is_empty() {
            return PointSet::new(&[Point::origin(d)]).map_err(|e| invalid("geometry.k_points", e));
        }
        let pts = self
            .geometry
            .k_points
            .iter()
            .map(|c| self.point("geometry.k_points", c))
            .collect::<Result<Vec<_>, _>>()?;
        PointSet::new(&pts).map_err(|e| invalid("geometry.k_points", e))
    }

    pub fn root_branches(&self) -> Result<RootBranches, CliError> {
        match self.truncation.root_branches.as_str() {
            "both" => Ok(RootBranches::Both),
            "forward-only" => Ok(RootBranches::ForwardOnly),
            other => Err(invalid("truncation.root_branches", format!("expected both or forward-only, got {other}"))),
        }
    }

    pub fn tag(&self) -> Result<RelationTag, CliError> {
        let g = &self.geometry;
        match g.tag.as_str() {
            "L" => Ok(RelationTag::L),
            "R" => Ok(RelationTag::R),
            "M" => {
                let hi = g.u[0];
                if !(hi > g.u_lo) {
                    return Err(invalid("geometry.u", "M needs u[0] > u_lo"));
                }
                Ok(RelationTag::M { lo: g.u_lo, hi })
            }
            other => Err(invalid("geometry.tag", format!("expected L, R or M, got {other}"))),
        }
    }

    pub fn m_estimator(&self) -> Result<MEstimator, CliError> {
        match self.geometry.m_estimator.as_str() {
            "intensity" => Ok(MEstimator::Intensity),
            "window" => Ok(MEstimator::Window),
            other => Err(invalid("geometry.m_estimator", format!("expected intensity or window, got {other}"))),
        }
    }

    pub fn relation_truncation(&self, cap_nodes: u64) -> RelationTruncation {
        RelationTruncation {
            m: self.truncation.m,
            cap_nodes,
            budget: self.truncation.budget,
        }
    }
}
