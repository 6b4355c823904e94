//! Random relations built from double walks and interlacement trajectories:
//! `x L y` iff `y` lies in the trace `γ(x)` of a double walk rooted at `x`
//! whose backward part never returns to `x`; `x R y` iff `x ∈ γ(y)`; and
//! `x M_{u',u} y` iff one trajectory with level in `[u', u)` covers both.
//! Also chains of trajectories (`M^k`), exponent fits and correlation
//! probes.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use hashbrown::{HashMap, HashSet};

use crate::brw::{ExploreLimits, OrbitTarget, Replicated};
use crate::double::{backward_avoids, explore_double, BackboneStop, DoubleParams, Part, RootBranches};
use crate::error::{Error, Result};
use crate::interlacement::{Window, WindowSample};
use crate::lattice::{gauge, tree_gauge, Point, PointSet, Site};
use crate::rng::RngStream;
use crate::stats::{weighted_line_fit, Estimate, Moments, Proportion};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RelationTag {
    L,
    R,
    /// Trajectories with level in `[lo, hi)`.
    M {
        lo: f64,
        hi: f64,
    },
}

/// Truncation of every trajectory used by the relation estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationTruncation {
    /// Backbones stop on leaving `B(root, m * |x - y|)`.
    pub m: f64,
    pub cap_nodes: u64,
    /// Attempts per conditioned sample.
    pub budget: u64,
}

impl RelationTruncation {
    fn params(&self, root: Point, scale: f64, law: RootBranches) -> DoubleParams {
        DoubleParams::new(
            BackboneStop::exit_ball(root, self.m * scale.max(1.0)),
            ExploreLimits::nodes(self.cap_nodes),
        )
        .with_root(law)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationRow {
    pub x: Point,
    pub y: Point,
    pub estimate: Estimate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RelationEstimate {
    pub tag: RelationTag,
    pub rows: Vec<RelationRow>,
    pub truncation: RelationTruncation,
    pub seed: u64,
}

/// Index of the first conditioned attempt whose `T'_b` avoids `root`.
fn conditioned_attempt(root: Point, params: &DoubleParams, stream: &RngStream, budget: u64) -> Result<RngStream> {
    for j in 0..budget {
        let s = stream.child(j);
        if backward_avoids(root, &|p: &Point| *p == root, params, &s) {
            return Ok(s);
        }
    }
    Err(Error::RejectionBudget { attempts: budget })
}

/// `P(root + z ∈ γ(root))`, optionally averaged over the orbit of `z`.
#[derive(Clone, Debug)]
pub struct ConditionedHit {
    pub z: Point,
    pub params: DoubleParams,
    pub budget: u64,
    pub seed: u64,
    pub pool_orbit: bool,
}

impl Replicated for ConditionedHit {
    type Acc = (Moments, Option<Error>);

    fn run_one(&self, rep: u64, acc: &mut Self::Acc) {
        let root = Point::origin(self.z.dim());
        let s = match conditioned_attempt(root, &self.params, &RngStream::new(self.seed, rep), self.budget) {
            Ok(s) => s,
            Err(e) => {
                acc.1.get_or_insert(e);
                return;
            }
        };
        let value = if self.pool_orbit {
            let orbit = OrbitTarget::new(self.z);
            let mut hit: HashSet<Site> = HashSet::new();
            explore_double(root, &self.params, &s, |p, _| {
                if orbit.matches(p, &root) {
                    hit.insert(Site::encode(p));
                }
                ControlFlow::Continue(())
            });
            hit.len() as f64 / orbit.orbit_size() as f64
        } else {
            let ex = explore_double(root, &self.params, &s, |p, _| {
                if *p == self.z {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            ex.stopped as u8 as f64
        };
        acc.0.push(value);
    }

    fn merge(into: &mut Self::Acc, from: Self::Acc) {
        into.0.merge(&from.0);
        if into.1.is_none() {
            into.1 = from.1;
        }
    }
}

/// Pooled first-entrance intensity of trajectories covering `0` and `z`:
/// `P_0(T'_b ∩ {0, z'} = ∅, z' ∈ T)` averaged over the orbit of `z`. By
/// reflection symmetry `ν(x, y ∈ γ) = 2 *` this value for `z = y - x`.
#[derive(Clone, Debug)]
pub struct PairIntensity {
    pub z: Point,
    pub params: DoubleParams,
    pub seed: u64,
}

impl Replicated for PairIntensity {
    type Acc = Moments;

    fn run_one(&self, rep: u64, acc: &mut Moments) {
        let root = Point::origin(self.z.dim());
        let orbit = OrbitTarget::new(self.z);
        let stream = RngStream::new(self.seed, rep);
        let mut past: HashSet<Site> = HashSet::new();
        let mut future: HashSet<Site> = HashSet::new();
        let mut rejected = false;
        explore_double(root, &self.params, &stream, |p, tag| {
            if tag.in_backward_rooted() {
                if *p == root {
                    rejected = true;
                    return ControlFlow::Break(());
                }
                if orbit.matches(p, &root) {
                    past.insert(Site::encode(p));
                }
            } else if tag.part == Part::Forward && orbit.matches(p, &root) {
                future.insert(Site::encode(p));
            }
            ControlFlow::Continue(())
        });
        let value = if rejected {
            0.0
        } else {
            future.iter().filter(|s| !past.contains(*s)).count() as f64 / orbit.orbit_size() as f64
        };
        acc.push(value);
    }

    fn merge(into: &mut Moments, from: Moments) {
        into.merge(&from);
    }
}

/// `x M_{lo,hi} y` from Poisson windows on `K = {x, y}`.
#[derive(Clone, Debug)]
pub struct PairWindowHit {
    pub window: Window,
    pub x: Point,
    pub y: Point,
    pub lo: f64,
    pub hi: f64,
    pub seed: u64,
}

impl PairWindowHit {
    pub fn new(x: Point, y: Point, lo: f64, hi: f64, trunc: &RelationTruncation, seed: u64) -> Result<Self> {
        let window = pair_window(x, y, trunc)?;
        Ok(Self {
            window,
            x,
            y,
            lo,
            hi,
            seed,
        })
    }
}

/// Window on `{x, y}` with backbones stopped on leaving `B(x, m |x - y|)`.
pub fn pair_window(x: Point, y: Point, trunc: &RelationTruncation) -> Result<Window> {
    if x == y {
        return Err(Error::Precondition("x and y must differ"));
    }
    let scale = (y - x).norm();
    Window::around(
        PointSet::new(&[x, y])?,
        BackboneStop::exit_ball(x, trunc.m * scale),
        ExploreLimits::nodes(trunc.cap_nodes),
    )
}

impl Replicated for PairWindowHit {
    type Acc = Proportion;

    fn run_one(&self, rep: u64, acc: &mut Proportion) {
        let stream = RngStream::new(self.seed, rep);
        let mut linked = false;
        for a in self.window.arrivals(self.hi, &stream) {
            if a.level < self.lo || !self.window.accepts(&a) {
                continue;
            }
            let other = if a.entry == self.x { self.y } else { self.x };
            let ex = explore_double(a.entry, self.window.params(), &a.stream, |p, _| {
                if *p == other {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if ex.stopped {
                linked = true;
                break;
            }
        }
        acc.record(linked);
    }

    fn merge(into: &mut Proportion, from: Proportion) {
        into.merge(&from);
    }
}

/// How `M` rows are estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MEstimator {
    /// Fraction of sampled windows on `{x, y}` with a covering trajectory.
    Window,
    /// `1 - exp(-(hi - lo) * ν̂)` with `ν̂` from [`PairIntensity`], pooled over
    /// the orbit of `y - x`.
    Intensity,
}

/// Replicate kernel behind [`estimate_relation`], usable with any
/// partition of the replicate range.
#[derive(Clone, Debug)]
pub enum RelationJob {
    Conditioned(ConditionedHit),
    Window(PairWindowHit),
    Intensity { job: PairIntensity, du: f64 },
}

#[derive(Clone, Debug, Default)]
pub struct RelationAcc {
    pub moments: Moments,
    pub linked: Proportion,
    pub error: Option<Error>,
}

impl RelationJob {
    /// `L` and `R` use the survival-conditioned walk (both root branches);
    /// `M` uses interlacement trajectories.
    pub fn new(
        tag: RelationTag,
        x: Point,
        y: Point,
        trunc: &RelationTruncation,
        seed: u64,
        pool_orbit: bool,
        m_estimator: MEstimator,
    ) -> Result<Self> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        let scale = (y - x).norm();
        let origin = Point::origin(x.dim());
        Ok(match tag {
            RelationTag::L | RelationTag::R => {
                let z = if tag == RelationTag::L { y - x } else { x - y };
                RelationJob::Conditioned(ConditionedHit {
                    z,
                    params: trunc.params(origin, scale, RootBranches::Both),
                    budget: trunc.budget,
                    seed,
                    pool_orbit: pool_orbit && !z.is_origin(),
                })
            }
            RelationTag::M { lo, hi } => {
                if !(hi > lo && lo >= 0.0) {
                    return Err(Error::Precondition("need 0 <= lo < hi"));
                }
                if x == y {
                    return Err(Error::Precondition("M rows need x != y"));
                }
                match m_estimator {
                    MEstimator::Window => RelationJob::Window(PairWindowHit::new(x, y, lo, hi, trunc, seed)?),
                    MEstimator::Intensity => RelationJob::Intensity {
                        job: PairIntensity {
                            z: y - x,
                            params: trunc.params(origin, scale, RootBranches::ForwardOnly),
                            seed,
                        },
                        du: hi - lo,
                    },
                }
            }
        })
    }

    pub fn finish(&self, acc: &RelationAcc) -> Result<Estimate> {
        if let Some(e) = &acc.error {
            return Err(e.clone());
        }
        Ok(match self {
            RelationJob::Conditioned(_) => acc.moments.estimate(),
            RelationJob::Window(_) => acc.linked.estimate(),
            RelationJob::Intensity { du, .. } => {
                let nu = 2.0 * acc.moments.mean();
                let nu_se = 2.0 * acc.moments.estimate().se;
                let keep = libm::exp(-du * nu);
                Estimate {
                    value: 1.0 - keep,
                    se: du * keep * nu_se,
                    reps: acc.moments.count(),
                }
            }
        })
    }
}

impl Replicated for RelationJob {
    type Acc = RelationAcc;

    fn run_one(&self, rep: u64, acc: &mut RelationAcc) {
        match self {
            RelationJob::Conditioned(job) => {
                let mut a = (core::mem::take(&mut acc.moments), None);
                job.run_one(rep, &mut a);
                acc.moments = a.0;
                if acc.error.is_none() {
                    acc.error = a.1;
                }
            }
            RelationJob::Window(job) => job.run_one(rep, &mut acc.linked),
            RelationJob::Intensity { job, .. } => job.run_one(rep, &mut acc.moments),
        }
    }

    fn merge(into: &mut RelationAcc, from: RelationAcc) {
        into.moments.merge(&from.moments);
        into.linked.merge(&from.linked);
        if into.error.is_none() {
            into.error = from.error;
        }
    }
}

/// One row of `P[x tag y]`; see [`RelationJob::new`].
pub fn estimate_relation(
    tag: RelationTag,
    x: Point,
    y: Point,
    reps: u64,
    trunc: &RelationTruncation,
    seed: u64,
    pool_orbit: bool,
    m_estimator: MEstimator,
) -> Result<RelationRow> {
    let job = RelationJob::new(tag, x, y, trunc, seed, pool_orbit, m_estimator)?;
    let estimate = job.finish(&job.run_range(0..reps))?;
    Ok(RelationRow { x, y, estimate })
}

/// Weighted log-log fit of estimate against `<xy>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% half-width from the inverse-variance weights.
    pub ci_half_width: f64,
    pub r_squared: f64,
    /// `d + slope`.
    pub alpha_hat: f64,
    pub used_rows: usize,
    pub excluded_rows: usize,
}

/// Fits `log estimate = intercept + slope * log <xy>` with weights
/// `(estimate / se)^2`. Rows with a zero estimate are excluded; fewer than
/// three usable rows with distinct distances is an error.
pub fn fit_exponent(rows: &[RelationRow]) -> Result<ExponentFit> {
    let d = rows.first().map(|r| r.x.dim()).unwrap_or(0);
    let mut pts = Vec::new();
    let mut excluded = 0;
    for r in rows {
        if r.estimate.value <= 0.0 {
            excluded += 1;
            continue;
        }
        let g = gauge(&r.x, &r.y).value();
        let w = if r.estimate.se > 0.0 {
            let rel = r.estimate.se / r.estimate.value;
            1.0 / (rel * rel)
        } else {
            1.0
        };
        pts.push((libm::log(g), libm::log(r.estimate.value), w));
    }
    let mut distinct: Vec<f64> = pts.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData {
            usable: distinct.len(),
            required: 3,
        });
    }
    let fit = weighted_line_fit(&pts).ok_or(Error::InsufficientData {
        usable: pts.len(),
        required: 3,
    })?;
    Ok(ExponentFit {
        slope: fit.slope,
        intercept: fit.intercept,
        ci_half_width: 1.96 * fit.slope_se,
        r_squared: fit.r_squared,
        alpha_hat: d as f64 + fit.slope,
        used_rows: pts.len(),
        excluded_rows: excluded,
    })
}

/// Which trajectories may sit at each position of a chain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LevelRule {
    /// Chains of at most `k` trajectories of any level.
    Any,
    /// Chains of exactly `k` trajectories, the `i`-th with level in
    /// `[u (i-1) / k, u i / k)`.
    Slices { u: f64 },
}

/// Trajectories as nodes, intersecting traces as edges.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryGraph {
    traces: Vec<HashSet<Site>>,
    levels: Vec<f64>,
    adjacency: Vec<Vec<usize>>,
    index: HashMap<Site, Vec<usize>>,
}

impl TrajectoryGraph {
    pub fn new(nodes: Vec<(HashSet<Site>, f64)>) -> Self {
        let mut index: HashMap<Site, Vec<usize>> = HashMap::new();
        let mut traces = Vec::with_capacity(nodes.len());
        let mut levels = Vec::with_capacity(nodes.len());
        for (i, (trace, level)) in nodes.into_iter().enumerate() {
            for s in &trace {
                index.entry(*s).or_default().push(i);
            }
            traces.push(trace);
            levels.push(level);
        }
        let mut adjacency = vec![Vec::new(); traces.len()];
        for ids in index.values() {
            for (a, &i) in ids.iter().enumerate() {
                for &j in &ids[a + 1..] {
                    adjacency[i].push(j);
                    adjacency[j].push(i);
                }
            }
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
            adj.dedup();
        }
        Self {
            traces,
            levels,
            adjacency,
            index,
        }
    }

    /// Accepted trajectories of the windows, with traces optionally
    /// restricted to a set.
    pub fn from_windows(windows: &[WindowSample], restrict: Option<&dyn Fn(&Point) -> bool>) -> Self {
        let mut nodes = Vec::new();
        for w in windows {
            for t in w.accepted() {
                let dim = t.entry.dim();
                let trace: HashSet<Site> = match restrict {
                    None => t.walk.trace().clone(),
                    Some(f) => t.walk.trace().iter().filter(|s| f(&s.decode(dim))).copied().collect(),
                };
                nodes.push((trace, t.level));
            }
        }
        Self::new(nodes)
    }

    pub fn node_count(&self) -> usize {
        self.traces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn level(&self, i: usize) -> f64 {
        self.levels[i]
    }

    pub fn trace(&self, i: usize) -> &HashSet<Site> {
        &self.traces[i]
    }

    /// Trajectories whose trace contains `p`.
    pub fn containing(&self, p: &Point) -> &[usize] {
        self.index.get(&Site::encode(p)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn covers(&self, p: &Point) -> bool {
        !self.containing(p).is_empty()
    }
}

fn slice_of(level: f64, u: f64, k: usize) -> Option<usize> {
    if !(0.0..u).contains(&level) {
        return None;
    }
    Some(((level / u * k as f64) as usize).min(k - 1) + 1)
}

/// Whether `x` and `y` are linked by a chain of trajectories, consecutive
/// ones intersecting, the first containing `x` and the last containing `y`.
pub fn k_connect(graph: &TrajectoryGraph, x: &Point, y: &Point, k: usize, rule: LevelRule) -> bool {
    if k == 0 {
        return false;
    }
    let targets: HashSet<usize> = graph.containing(y).iter().copied().collect();
    if targets.is_empty() {
        return false;
    }
    match rule {
        LevelRule::Any => {
            let mut depth = vec![usize::MAX; graph.node_count()];
            let mut queue = VecDeque::new();
            for &s in graph.containing(x) {
                depth[s] = 1;
                queue.push_back(s);
            }
            while let Some(i) = queue.pop_front() {
                if targets.contains(&i) {
                    return true;
                }
                if depth[i] == k {
                    continue;
                }
                for &j in graph.neighbors(i) {
                    if depth[j] == usize::MAX {
                        depth[j] = depth[i] + 1;
                        queue.push_back(j);
                    }
                }
            }
            false
        }
        LevelRule::Slices { u } => {
            // Position is forced by the slice, so a node is reached at most once.
            let pos: Vec<Option<usize>> = (0..graph.node_count()).map(|i| slice_of(graph.level(i), u, k)).collect();
            let mut seen = vec![false; graph.node_count()];
            let mut queue = VecDeque::new();
            for &s in graph.containing(x) {
                if pos[s] == Some(1) {
                    seen[s] = true;
                    queue.push_back(s);
                }
            }
            while let Some(i) = queue.pop_front() {
                let p = pos[i].unwrap();
                if p == k {
                    if targets.contains(&i) {
                        return true;
                    }
                    continue;
                }
                for &j in graph.neighbors(i) {
                    if !seen[j] && pos[j] == Some(p + 1) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
            false
        }
    }
}

/// `⌈d / 4⌉`.
pub fn connectivity_order(d: usize) -> usize {
    d.div_ceil(4)
}

/// Conditional connection probabilities on nested observation balls.
///
/// Each replicate samples one window at level `u`, keeps the accepted
/// trajectories, restricts their traces to each observation ball
/// `B(center, r_i)` and records, when both points are covered, whether a
/// chain of `k` trajectories links them for every requested `k`.
#[derive(Clone, Debug)]
pub struct ConnectProbe {
    pub window: Window,
    pub x: Point,
    pub y: Point,
    pub u: f64,
    pub center: Point,
    /// Increasing.
    pub radii: Vec<f64>,
    pub ks: Vec<usize>,
    pub rule: LevelRule,
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConnectAcc {
    pub windows: u64,
    /// `[radius][k]`, trials are the covered windows.
    pub linked: Vec<Vec<Proportion>>,
}

impl ConnectProbe {
    fn traces(&self, rep: u64) -> Vec<(HashSet<Site>, f64)> {
        let stream = RngStream::new(self.seed, rep);
        let outer = self.radii.last().copied().unwrap_or(0.0);
        let outer_sq = outer * outer;
        let mut out = Vec::new();
        for a in self.window.arrivals(self.u, &stream) {
            if !self.window.accepts(&a) {
                continue;
            }
            let mut trace = HashSet::new();
            explore_double(a.entry, self.window.params(), &a.stream, |p, _| {
                if ((*p - self.center).norm_sq() as f64) <= outer_sq {
                    trace.insert(Site::encode(p));
                }
                ControlFlow::Continue(())
            });
            out.push((trace, a.level));
        }
        out
    }

    fn run_general(&self, rep: u64, acc: &mut ConnectAcc) {
        let full = self.traces(rep);
        let dim = self.x.dim();
        for (ri, &r) in self.radii.iter().enumerate() {
            let r_sq = r * r;
            let nodes: Vec<(HashSet<Site>, f64)> = full
                .iter()
                .map(|(t, l)| {
                    let kept = t
                        .iter()
                        .filter(|s| ((s.decode(dim) - self.center).norm_sq() as f64) <= r_sq)
                        .copied()
                        .collect();
                    (kept, *l)
                })
                .collect();
            let g = TrajectoryGraph::new(nodes);
            if !(g.covers(&self.x) && g.covers(&self.y)) {
                continue;
            }
            for (ki, &k) in self.ks.iter().enumerate() {
                acc.linked[ri][ki].record(k_connect(&g, &self.x, &self.y, k, self.rule));
            }
        }
    }

    /// Chains of at most two trajectories: both ends meet `{x, y}`, so only
    /// the traces of trajectories through `x` are stored.
    fn run_short(&self, rep: u64, acc: &mut ConnectAcc) {
        let stream = RngStream::new(self.seed, rep);
        let outer = self.radii.iter().copied().fold(0.0, f64::max);
        let outer_sq = outer * outer;
        let params = self.window.params();
        let accepted: Vec<_> = self
            .window
            .arrivals(self.u, &stream)
            .into_iter()
            .filter(|a| self.window.accepts(a))
            .collect();
        let mut through_x = Vec::new();
        let mut through_y = Vec::new();
        let mut one = false;
        for (i, a) in accepted.iter().enumerate() {
            let (mut hx, mut hy) = (false, false);
            explore_double(a.entry, params, &a.stream, |p, _| {
                hx |= *p == self.x;
                hy |= *p == self.y;
                if hx && hy {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            one |= hx && hy;
            if hx {
                through_x.push(i);
            }
            if hy {
                through_y.push(i);
            }
        }
        if through_x.is_empty() || through_y.is_empty() {
            return;
        }
        // Smallest squared distance to the center of a site shared by a
        // trajectory through x and one through y.
        let mut meet = f64::INFINITY;
        if !one && self.ks.contains(&2) {
            let mut near_x: HashSet<Site> = HashSet::new();
            for &i in &through_x {
                let a = &accepted[i];
                explore_double(a.entry, params, &a.stream, |p, _| {
                    if ((*p - self.center).norm_sq() as f64) <= outer_sq {
                        near_x.insert(Site::encode(p));
                    }
                    ControlFlow::Continue(())
                });
            }
            for &i in &through_y {
                let a = &accepted[i];
                explore_double(a.entry, params, &a.stream, |p, _| {
                    let r2 = (*p - self.center).norm_sq() as f64;
                    if r2 < meet && near_x.contains(&Site::encode(p)) {
                        meet = r2;
                    }
                    ControlFlow::Continue(())
                });
            }
        }
        let x_sq = (self.x - self.center).norm_sq() as f64;
        let y_sq = (self.y - self.center).norm_sq() as f64;
        for (ri, &r) in self.radii.iter().enumerate() {
            let r_sq = r * r;
            if x_sq > r_sq || y_sq > r_sq {
                continue;
            }
            for (ki, &k) in self.ks.iter().enumerate() {
                let linked = match k {
                    0 => false,
                    1 => one,
                    _ => one || meet <= r_sq,
                };
                acc.linked[ri][ki].record(linked);
            }
        }
    }

}

impl Replicated for ConnectProbe {
    type Acc = ConnectAcc;

    fn run_one(&self, rep: u64, acc: &mut ConnectAcc) {
        if acc.linked.is_empty() {
            acc.linked = vec![vec![Proportion::default(); self.ks.len()]; self.radii.len()];
        }
        acc.windows += 1;
        if self.rule == LevelRule::Any && self.ks.iter().all(|&k| k <= 2) {
            self.run_short(rep, acc);
        } else {
            self.run_general(rep, acc);
        }
    }

    fn merge(into: &mut ConnectAcc, from: ConnectAcc) {
        if into.linked.is_empty() {
            *into = from;
            return;
        }
        into.windows += from.windows;
        for (a, b) in into.linked.iter_mut().zip(from.linked) {
            for (p, q) in a.iter_mut().zip(b) {
                p.merge(&q);
            }
        }
    }
}

/// One row of a connection experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectRow {
    pub radius: f64,
    pub k: usize,
    pub estimate: Estimate,
    pub covered: u64,
    /// Fewer than 100 covered windows.
    pub degenerate: bool,
}

pub fn connect_rows(probe: &ConnectProbe, acc: &ConnectAcc) -> Vec<ConnectRow> {
    let mut rows = Vec::new();
    for (ri, &radius) in probe.radii.iter().enumerate() {
        for (ki, &k) in probe.ks.iter().enumerate() {
            let p = acc.linked.get(ri).and_then(|v| v.get(ki)).copied().unwrap_or_default();
            rows.push(ConnectRow {
                radius,
                k,
                estimate: p.estimate(),
                covered: p.trials,
                degenerate: p.trials < 100,
            });
        }
    }
    rows
}

/// `P[k_connect | x, y covered]` on windows over `{x, y}` (exact for
/// `k <= 2`, since every trajectory of such a chain meets `{x, y}`).
pub fn k_connect_experiment(
    x: Point,
    y: Point,
    u: f64,
    ks: &[usize],
    radii: &[f64],
    reps: u64,
    trunc: &RelationTruncation,
    seed: u64,
) -> Result<Vec<ConnectRow>> {
    let window = pair_window(x, y, trunc)?;
    let probe = ConnectProbe {
        window,
        x,
        y,
        u,
        center: x,
        radii: radii.to_vec(),
        ks: ks.to_vec(),
        rule: LevelRule::Any,
        seed,
    };
    let acc = probe.run_range(0..reps);
    Ok(connect_rows(&probe, &acc))
}

/// Joint and marginal estimates for `P[x tag y, z tag w]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationReport {
    pub joint: Proportion,
    pub first: Proportion,
    pub second: Proportion,
    /// `<xy>^{4-d} <zw>^{4-d}`.
    pub product_shape: f64,
    /// `<xyzw>^{4-d}`.
    pub cluster_shape: f64,
}

impl CorrelationReport {
    /// Whether `joint <= c * (product_shape + cluster_shape)`.
    pub fn dominated(&self, c: f64) -> bool {
        self.joint.p() <= c * (self.product_shape + self.cluster_shape)
    }
}

/// Joint behaviour of two `L` or `R` events. Walks rooted at the same site
/// are the same walk; distinct roots get independent walks.
pub fn correlation_check(
    tag: RelationTag,
    pts: [Point; 4],
    reps: u64,
    trunc: &RelationTruncation,
    seed: u64,
) -> Result<CorrelationReport> {
    let [x, y, z, w] = pts;
    // (root, target) of each event.
    let (a, b) = match tag {
        RelationTag::L => ((x, y), (z, w)),
        RelationTag::R => ((y, x), (w, z)),
        RelationTag::M { .. } => return Err(Error::Precondition("correlation check is for L and R")),
    };
    let dim = x.dim();
    let scale = [a.1 - a.0, b.1 - b.0, b.0 - a.0].iter().map(|p| p.norm()).fold(1.0, f64::max);
    let mut report = CorrelationReport {
        joint: Proportion::default(),
        first: Proportion::default(),
        second: Proportion::default(),
        product_shape: 0.0,
        cluster_shape: 0.0,
    };
    let e = 4.0 - dim as f64;
    report.product_shape = libm::pow(gauge(&x, &y).value(), e) * libm::pow(gauge(&z, &w).value(), e);
    let mut distinct = vec![x, y, z, w];
    distinct.sort_unstable();
    distinct.dedup();
    report.cluster_shape = if distinct.len() >= 2 {
        libm::pow(tree_gauge(&distinct)?.value(), e)
    } else {
        1.0
    };
    let roots: Vec<Point> = if a.0 == b.0 { vec![a.0] } else { vec![a.0, b.0] };
    for r in 0..reps {
        let base = RngStream::new(seed, r);
        let mut hits = [false, false];
        for (ri, &root) in roots.iter().enumerate() {
            let params = trunc.params(root, scale, RootBranches::Both);
            let s = conditioned_attempt(root, &params, &base.child(ri as u64), trunc.budget)?;
            let want: Vec<(usize, Point)> = [(0usize, a), (1, b)]
                .iter()
                .filter(|(_, ev)| ev.0 == root)
                .map(|&(i, ev)| (i, ev.1))
                .collect();
            explore_double(root, &params, &s, |p, _| {
                for &(i, t) in &want {
                    if *p == t {
                        hits[i] = true;
                    }
                }
                if want.iter().all(|&(i, _)| hits[i]) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
        }
        report.first.record(hits[0]);
        report.second.record(hits[1]);
        report.joint.record(hits[0] && hits[1]);
    }
    Ok(report)
}
