//! Double (survival-conditioned) branching random walks built from a simple
//! random walk backbone `X_0, X_1, ...` with independent forward and backward
//! BRW branches `F(n)`, `B(n)` rooted at every `X_n`.
//!
//! Every branch draws from its own stream keyed by backbone index and role,
//! so shortening the backbone or lowering branch caps on the same stream
//! reveals a subset of the same object.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use hashbrown::{HashMap, HashSet};

use crate::brw::{explore, Exploration, ExploreLimits, OrbitTarget, Replicated, WalkTrace};
use crate::error::{Error, Result};
use crate::lattice::{Point, Site};
use crate::rng::RngStream;
use crate::stats::{Moments, Proportion};

/// When the backbone stops.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackboneStop {
    /// `X_0, ..., X_n` (so `Steps(0)` is the root alone).
    Steps(u64),
    /// Every `X_n` strictly before the first exit from the closed Euclidean
    /// ball `|y - center|^2 <= radius_sq`.
    ExitBall { center: Point, radius_sq: i64 },
}

impl BackboneStop {
    /// Exit from `B(center, radius)`.
    pub fn exit_ball(center: Point, radius: f64) -> Self {
        let r = libm::floor(radius) as i64;
        // Largest integer r^2 not exceeding radius^2.
        let mut radius_sq = r * r;
        while ((radius_sq + 1) as f64) <= radius * radius {
            radius_sq += 1;
        }
        BackboneStop::ExitBall { center, radius_sq }
    }
}

/// Which branches the root carries.
///
/// `Both` is the walk conditioned on survival seen from its root: `F(0)` and
/// `B(0)`. `ForwardOnly` drops `B(0)`; the root is then a typical vertex of
/// the stationary exploration, which is the law needed for the first-entrance
/// decomposition of interlacement trajectories to be consistent across
/// nested sets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum RootBranches {
    #[default]
    Both,
    ForwardOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DoubleParams {
    pub stop: BackboneStop,
    pub branch: ExploreLimits,
    pub root: RootBranches,
}

impl DoubleParams {
    pub fn new(stop: BackboneStop, branch: ExploreLimits) -> Self {
        Self {
            stop,
            branch,
            root: RootBranches::Both,
        }
    }

    pub fn with_root(mut self, root: RootBranches) -> Self {
        self.root = root;
        self
    }

    fn has_branch(&self, n: usize, part: Part) -> bool {
        !(n == 0 && part == Part::Backward && self.root == RootBranches::ForwardOnly)
    }

    /// Backbone stopped on leaving `B(root, m * |x - root|)`, branches capped
    /// at `cap_nodes`.
    pub fn for_target(root: Point, x: Point, m: f64, cap_nodes: u64) -> Self {
        Self::new(
            BackboneStop::exit_ball(root, m * (x - root).norm()),
            ExploreLimits::nodes(cap_nodes),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Forward,
    Backward,
}

/// Location of a vertex inside a double walk.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VertexTag {
    pub n: usize,
    pub part: Part,
    pub depth: u32,
}

impl VertexTag {
    /// Whether the vertex belongs to `T'_b`: a strict descendant of the root
    /// of `B(0)`, or any vertex of `B(n)` for `n >= 1`.
    #[inline]
    pub fn in_backward_rooted(&self) -> bool {
        self.part == Part::Backward && (self.n > 0 || self.depth > 0)
    }
}

pub fn sample_backbone(root: Point, stop: BackboneStop, rng: &mut RngStream) -> Vec<Point> {
    let dim = root.dim();
    let mut path = Vec::new();
    let mut x = root;
    match stop {
        BackboneStop::Steps(n) => {
            path.push(x);
            for _ in 0..n {
                x.step_in_place(rng.direction(dim));
                path.push(x);
            }
        }
        BackboneStop::ExitBall { center, radius_sq } => {
            while (x - center).norm_sq() <= radius_sq {
                path.push(x);
                x.step_in_place(rng.direction(dim));
            }
            if path.is_empty() {
                // A root outside the ball still carries its own branches.
                path.push(root);
            }
        }
    }
    path
}

fn branch_streams(stream: &RngStream, n: usize, part: Part) -> (RngStream, RngStream) {
    let base = 1 + 4 * n as u64 + if part == Part::Backward { 2 } else { 0 };
    (stream.child(base), stream.child(base + 1))
}

/// Streams one branch.
pub fn explore_branch<F>(
    backbone: &[Point],
    n: usize,
    part: Part,
    limits: ExploreLimits,
    stream: &RngStream,
    mut visit: F,
) -> Exploration
where
    F: FnMut(&Point, VertexTag) -> ControlFlow<()>,
{
    let (mut t, mut s) = branch_streams(stream, n, part);
    explore(backbone[n], limits, &mut t, &mut s, |p, depth| {
        visit(p, VertexTag { n, part, depth })
    })
}

/// Summary of a streamed double walk.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DoubleExploration {
    pub backbone_len: usize,
    pub nodes: u64,
    pub truncated_branches: u64,
    pub stopped: bool,
}

/// Streams a whole double walk: the backbone, then every backward branch,
/// then every forward branch. `visit` may stop early.
pub fn explore_double<F>(
    root: Point,
    params: &DoubleParams,
    stream: &RngStream,
    mut visit: F,
) -> DoubleExploration
where
    F: FnMut(&Point, VertexTag) -> ControlFlow<()>,
{
    let backbone = sample_backbone(root, params.stop, &mut stream.child(0));
    let mut out = DoubleExploration {
        backbone_len: backbone.len(),
        ..Default::default()
    };
    for part in [Part::Backward, Part::Forward] {
        for n in 0..backbone.len() {
            if !params.has_branch(n, part) {
                continue;
            }
            let ex = explore_branch(&backbone, n, part, params.branch, stream, &mut visit);
            out.nodes += ex.nodes;
            out.truncated_branches += ex.truncated as u64;
            if ex.stopped {
                out.stopped = true;
                return out;
            }
        }
    }
    out
}

/// Sites of `T'_b`: strict descendants of the root of `B(0)` together with
/// every `B(n)`, `n >= 1`.
#[derive(Clone, Debug, Default)]
pub struct BackwardRootedTrace {
    sites: HashSet<Site>,
}

impl BackwardRootedTrace {
    pub fn contains(&self, x: &Point) -> bool {
        self.sites.contains(&Site::encode(x))
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = &Site> + '_ {
        self.sites.iter()
    }
}

/// A materialized double walk.
#[derive(Clone, Debug)]
pub struct DoubleWalkSample {
    root: Point,
    backbone: Vec<Point>,
    forward: Vec<WalkTrace>,
    backward: Vec<WalkTrace>,
    trace: HashSet<Site>,
    backward_rooted: BackwardRootedTrace,
}

impl DoubleWalkSample {
    pub fn root(&self) -> Point {
        self.root
    }

    pub fn backbone(&self) -> &[Point] {
        &self.backbone
    }

    /// `N`: index of the last backbone vertex.
    pub fn backbone_len(&self) -> usize {
        self.backbone.len() - 1
    }

    pub fn forward(&self) -> &[WalkTrace] {
        &self.forward
    }

    pub fn backward(&self) -> &[WalkTrace] {
        &self.backward
    }

    pub fn backward_rooted(&self) -> &BackwardRootedTrace {
        &self.backward_rooted
    }

    /// Number of branches whose node cap was reached.
    pub fn truncated_branches(&self) -> usize {
        self.forward
            .iter()
            .chain(&self.backward)
            .filter(|t| t.truncation().truncated)
            .count()
    }

    /// Membership in `T_N = U_n Trace(F(n)) U Trace(B(n))`.
    pub fn trace_contains(&self, x: &Point) -> bool {
        x.dim() == self.root.dim() && self.trace.contains(&Site::encode(x))
    }

    pub fn trace(&self) -> &HashSet<Site> {
        &self.trace
    }

    /// Total visits to `x` over all branches.
    pub fn visit_count(&self, x: &Point) -> u64 {
        self.forward
            .iter()
            .chain(&self.backward)
            .map(|t| t.visit_count(x))
            .sum()
    }

    /// Sorted site list of the trace.
    pub fn sorted_sites(&self) -> Vec<Point> {
        let d = self.root.dim();
        let mut v: Vec<Point> = self.trace.iter().map(|s| s.decode(d)).collect();
        v.sort();
        v
    }

    pub fn intersects(&self, other: &DoubleWalkSample) -> bool {
        traces_intersect(&self.trace, &other.trace)
    }
}

/// Probes the smaller set against the larger.
pub fn traces_intersect(a: &HashSet<Site>, b: &HashSet<Site>) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small.iter().any(|s| large.contains(s))
}

fn collect_branch(
    backbone: &[Point],
    n: usize,
    part: Part,
    limits: ExploreLimits,
    stream: &RngStream,
    trace: &mut HashSet<Site>,
    rooted: &mut HashSet<Site>,
    avoid: Option<&dyn Fn(&Point) -> bool>,
) -> core::result::Result<WalkTrace, ()> {
    let mut visits: HashMap<Site, u64> = HashMap::new();
    let ex = explore_branch(backbone, n, part, limits, stream, |p, tag| {
        let key = Site::encode(p);
        *visits.entry(key).or_insert(0) += 1;
        trace.insert(key);
        if tag.in_backward_rooted() {
            rooted.insert(key);
            if let Some(f) = avoid {
                if f(p) {
                    return ControlFlow::Break(());
                }
            }
        }
        ControlFlow::Continue(())
    });
    if ex.stopped {
        return Err(());
    }
    Ok(WalkTrace::from_parts(
        backbone[n],
        visits,
        ex.nodes,
        ex.report(limits.cap_nodes),
    ))
}

fn build(
    root: Point,
    params: &DoubleParams,
    stream: &RngStream,
    avoid: Option<&dyn Fn(&Point) -> bool>,
) -> Option<DoubleWalkSample> {
    let backbone = sample_backbone(root, params.stop, &mut stream.child(0));
    let mut trace = HashSet::new();
    let mut rooted = HashSet::new();
    let mut backward = Vec::with_capacity(backbone.len());
    for n in 0..backbone.len() {
        if !params.has_branch(n, Part::Backward) {
            backward.push(WalkTrace::from_parts(
                backbone[n],
                HashMap::new(),
                0,
                Default::default(),
            ));
            continue;
        }
        let t = collect_branch(
            &backbone,
            n,
            Part::Backward,
            params.branch,
            stream,
            &mut trace,
            &mut rooted,
            avoid,
        )
        .ok()?;
        backward.push(t);
    }
    let mut forward = Vec::with_capacity(backbone.len());
    for n in 0..backbone.len() {
        let mut unused = HashSet::new();
        let t = collect_branch(
            &backbone,
            n,
            Part::Forward,
            params.branch,
            stream,
            &mut trace,
            &mut unused,
            None,
        )
        .ok()?;
        forward.push(t);
    }
    Some(DoubleWalkSample {
        root,
        backbone,
        forward,
        backward,
        trace,
        backward_rooted: BackwardRootedTrace { sites: rooted },
    })
}

/// One double walk from the streams of `stream`.
pub fn sample_double(root: Point, params: &DoubleParams, stream: &RngStream) -> DoubleWalkSample {
    build(root, params, stream, None).expect("unconditioned sampling never rejects")
}

/// Samples a double walk whose `T'_b` avoids every site in `avoid`, by
/// rejection. Attempt `j` uses `stream.child(j)`. Returns the sample and the
/// number of attempts used.
pub fn sample_double_avoiding(
    root: Point,
    avoid: &dyn Fn(&Point) -> bool,
    params: &DoubleParams,
    stream: &RngStream,
    budget: u64,
) -> Result<(DoubleWalkSample, u64)> {
    for j in 0..budget {
        if let Some(s) = build(root, params, &stream.child(j), Some(avoid)) {
            return Ok((s, j + 1));
        }
    }
    Err(Error::RejectionBudget { attempts: budget })
}

/// Double walk conditioned on `T'_b` never returning to its root.
pub fn sample_double_conditioned(
    root: Point,
    params: &DoubleParams,
    stream: &RngStream,
    budget: u64,
) -> Result<(DoubleWalkSample, u64)> {
    sample_double_avoiding(root, &|p: &Point| *p == root, params, stream, budget)
}

/// Whether `T'_b` of the walk on `stream` avoids the set, decided while
/// streaming so a rejection costs only the branches explored so far.
pub fn backward_avoids(
    root: Point,
    avoid: &dyn Fn(&Point) -> bool,
    params: &DoubleParams,
    stream: &RngStream,
) -> bool {
    let backbone = sample_backbone(root, params.stop, &mut stream.child(0));
    for n in 0..backbone.len() {
        if !params.has_branch(n, Part::Backward) {
            continue;
        }
        let ex = explore_branch(
            &backbone,
            n,
            Part::Backward,
            params.branch,
            stream,
            |p, tag| {
                if tag.in_backward_rooted() && avoid(p) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        );
        if ex.stopped {
            return false;
        }
    }
    true
}

/// `P(x in T)` for double walks rooted at the origin, optionally pooled over
/// the orbit of `x`. Each replicate uses `RngStream::new(seed, rep)`.
#[derive(Clone, Debug)]
pub struct DoubleHit {
    pub target: Point,
    pub params: DoubleParams,
    pub seed: u64,
    pub pool_orbit: bool,
}

#[derive(Clone, Debug, Default)]
pub struct DoubleHitAcc {
    pub hits: Moments,
    pub nodes: u64,
    pub truncated_branches: u64,
}

impl Replicated for DoubleHit {
    type Acc = DoubleHitAcc;

    fn run_one(&self, rep: u64, acc: &mut DoubleHitAcc) {
        let origin = Point::origin(self.target.dim());
        let stream = RngStream::new(self.seed, rep);
        let value;
        let ex;
        if self.pool_orbit {
            let orbit = OrbitTarget::new(self.target);
            let mut hit: HashSet<Site> = HashSet::new();
            ex = explore_double(origin, &self.params, &stream, |p, _| {
                if orbit.matches(p, &origin) {
                    hit.insert(Site::encode(p));
                }
                ControlFlow::Continue(())
            });
            value = hit.len() as f64 / orbit.orbit_size() as f64;
        } else {
            let mut found = false;
            ex = explore_double(origin, &self.params, &stream, |p, _| {
                if *p == self.target {
                    found = true;
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            value = found as u8 as f64;
        }
        acc.hits.push(value);
        acc.nodes += ex.nodes;
        acc.truncated_branches += ex.truncated_branches;
    }

    fn merge(into: &mut DoubleHitAcc, from: DoubleHitAcc) {
        into.hits.merge(&from.hits);
        into.nodes += from.nodes;
        into.truncated_branches += from.truncated_branches;
    }
}

/// `P(x in T(root))` with the backbone stopped on leaving `B(root, m|x - root|)`.
pub fn mc_hit_probability_double(
    x: Point,
    m: f64,
    cap_nodes: u64,
    reps: u64,
    seed: u64,
) -> Result<DoubleHitAcc> {
    let origin = Point::origin(x.dim());
    if x == origin {
        return Err(Error::Precondition("target must differ from the root"));
    }
    if m < 2.0 {
        return Err(Error::Precondition("scale factor must be at least 2"));
    }
    Ok(DoubleHit {
        target: x,
        params: DoubleParams::for_target(origin, x, m, cap_nodes),
        seed,
        pool_orbit: false,
    }
    .run_range(0..reps))
}

/// Expected visits `E[N_x]` of the truncated double walk from the origin.
#[derive(Clone, Debug)]
pub struct DoubleVisits {
    pub target: Point,
    pub params: DoubleParams,
    pub seed: u64,
    pub pool_orbit: bool,
}

impl Replicated for DoubleVisits {
    type Acc = Moments;

    fn run_one(&self, rep: u64, acc: &mut Moments) {
        let origin = Point::origin(self.target.dim());
        let stream = RngStream::new(self.seed, rep);
        let orbit = OrbitTarget::new(self.target);
        let mut count = 0u64;
        explore_double(origin, &self.params, &stream, |p, _| {
            if self.pool_orbit {
                count += orbit.matches(p, &origin) as u64;
            } else {
                count += (*p == self.target) as u64;
            }
            ControlFlow::Continue(())
        });
        let v = if self.pool_orbit {
            count as f64 / orbit.orbit_size() as f64
        } else {
            count as f64
        };
        acc.push(v);
    }

    fn merge(into: &mut Moments, from: Moments) {
        into.merge(&from);
    }
}

pub fn mc_expected_visits_double(
    x: Point,
    m: f64,
    branch: ExploreLimits,
    reps: u64,
    seed: u64,
) -> Moments {
    let origin = Point::origin(x.dim());
    let radius = if x == origin { m } else { m * x.norm() };
    DoubleVisits {
        target: x,
        params: DoubleParams::new(BackboneStop::exit_ball(origin, radius), branch),
        seed,
        pool_orbit: false,
    }
    .run_range(0..reps)
}

/// Joint hit probability of a set of points by one double walk from the origin.
#[derive(Clone, Debug)]
pub struct DoubleJointHit {
    pub points: Vec<Point>,
    pub params: DoubleParams,
    pub seed: u64,
}

impl Replicated for DoubleJointHit {
    type Acc = Proportion;

    fn run_one(&self, rep: u64, acc: &mut Proportion) {
        let origin = Point::origin(self.points[0].dim());
        let stream = RngStream::new(self.seed, rep);
        let mut seen = alloc::vec![false; self.points.len()];
        let mut left = self.points.len();
        explore_double(origin, &self.params, &stream, |p, _| {
            for (s, q) in seen.iter_mut().zip(&self.points) {
                if !*s && p == q {
                    *s = true;
                    left -= 1;
                }
            }
            if left == 0 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        acc.record(left == 0);
    }

    fn merge(into: &mut Proportion, from: Proportion) {
        into.merge(&from);
    }
}

/// Whether two independent truncated double walks rooted at `a` and `b` meet.
#[derive(Clone, Debug)]
pub struct DoubleIntersection {
    pub root_a: Point,
    pub root_b: Point,
    pub m: f64,
    pub cap_nodes: u64,
    pub seed: u64,
}

impl DoubleIntersection {
    fn params(&self, root: Point) -> DoubleParams {
        let sep = (self.root_a - self.root_b).norm();
        DoubleParams::new(
            BackboneStop::exit_ball(root, self.m * sep),
            ExploreLimits::nodes(self.cap_nodes),
        )
    }
}

impl Replicated for DoubleIntersection {
    type Acc = Proportion;

    fn run_one(&self, rep: u64, acc: &mut Proportion) {
        let base = RngStream::new(self.seed, rep);
        let a = sample_double(self.root_a, &self.params(self.root_a), &base.child(0));
        let b = sample_double(self.root_b, &self.params(self.root_b), &base.child(1));
        acc.record(a.intersects(&b));
    }

    fn merge(into: &mut Proportion, from: Proportion) {
        into.merge(&from);
    }
}

pub fn mc_intersection(
    root_a: Point,
    root_b: Point,
    m: f64,
    cap_nodes: u64,
    reps: u64,
    seed: u64,
) -> Result<Proportion> {
    if root_a == root_b {
        return Err(Error::Precondition("roots must differ"));
    }
    Ok(DoubleIntersection {
        root_a,
        root_b,
        m,
        cap_nodes,
        seed,
    }
    .run_range(0..reps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: u64) -> DoubleParams {
        DoubleParams::new(BackboneStop::Steps(n), ExploreLimits::nodes(2000))
    }

    #[test]
    fn zero_length_backbone_is_two_branches() {
        let root = Point::origin(5);
        let s = sample_double(root, &small(0), &RngStream::new(3, 0));
        assert_eq!(s.backbone(), &[root]);
        assert_eq!(s.forward().len(), 1);
        assert!(s.trace_contains(&root));
        for site in s.trace() {
            let p = site.decode(5);
            assert!(s.forward()[0].contains(&p) || s.backward()[0].contains(&p));
        }
    }

    #[test]
    fn backbone_steps_are_unit() {
        let s = sample_double(Point::origin(5), &small(50), &RngStream::new(3, 1));
        for w in s.backbone().windows(2) {
            assert_eq!((w[1] - w[0]).norm_sq(), 1);
        }
        assert_eq!(s.backbone_len(), 50);
    }

    #[test]
    fn exit_ball_backbone_stays_inside() {
        let stop = BackboneStop::exit_ball(Point::origin(5), 6.0);
        let path = sample_backbone(Point::origin(5), stop, &mut RngStream::new(9, 9));
        assert!(path.iter().all(|p| p.norm_sq() <= 36));
    }

    #[test]
    fn shorter_backbone_is_nested() {
        let root = Point::origin(5);
        let stream = RngStream::new(4, 2);
        let a = sample_double(root, &small(10), &stream);
        let b = sample_double(root, &small(20), &stream);
        assert!(a.trace().iter().all(|s| b.trace().contains(s)));
    }

    #[test]
    fn conditioned_sample_avoids_root() {
        let root = Point::origin(5);
        for r in 0..20 {
            let (s, attempts) =
                sample_double_conditioned(root, &small(30), &RngStream::new(8, r), 1000).unwrap();
            assert!(attempts >= 1);
            assert!(!s.backward_rooted().contains(&root));
        }
    }
}
