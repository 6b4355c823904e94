//! Branching random walks: GW trees embedded in `Z^d` with one uniform
//! nearest-neighbour step per DFS edge.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{ControlFlow, Range};

use hashbrown::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::gw::{GwTree, TruncationReport};
use crate::lattice::{canonical_classes, Direction, Point, Site};
use crate::rng::RngStream;
use crate::stats::{Estimate, Moments, Proportion};

/// Visit counts `N_x` of one embedded tree.
#[derive(Clone, Debug)]
pub struct WalkTrace {
    root: Point,
    visits: HashMap<Site, u64>,
    tree_size: u64,
    truncation: TruncationReport,
}

impl WalkTrace {
    pub fn root(&self) -> Point {
        self.root
    }

    pub fn tree_size(&self) -> u64 {
        self.tree_size
    }

    pub fn truncation(&self) -> TruncationReport {
        self.truncation
    }

    pub fn visit_count(&self, x: &Point) -> u64 {
        if x.dim() != self.root.dim() {
            return 0;
        }
        self.visits.get(&Site::encode(x)).copied().unwrap_or(0)
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.visit_count(x) > 0
    }

    /// Number of distinct sites visited.
    pub fn range(&self) -> usize {
        self.visits.len()
    }

    pub fn sites(&self) -> impl Iterator<Item = Point> + '_ {
        let d = self.root.dim();
        self.visits.keys().map(move |s| s.decode(d))
    }

    pub fn visits(&self) -> impl Iterator<Item = (Point, u64)> + '_ {
        let d = self.root.dim();
        self.visits.iter().map(move |(s, &c)| (s.decode(d), c))
    }

    pub(crate) fn from_parts(
        root: Point,
        visits: HashMap<Site, u64>,
        tree_size: u64,
        truncation: TruncationReport,
    ) -> Self {
        Self {
            root,
            visits,
            tree_size,
            truncation,
        }
    }
}

/// `visits[x]`, zero when absent.
pub fn visit_count(trace: &WalkTrace, x: &Point) -> u64 {
    trace.visit_count(x)
}

/// Places `tree` in the lattice: vertex `i > 0` receives the `i`-th step
/// drawn from `rng`, which labels DFS edge `i - 1`.
pub fn embed(tree: &GwTree, root: Point, rng: &mut RngStream) -> WalkTrace {
    let dim = root.dim();
    let mut visits: HashMap<Site, u64> = HashMap::new();
    let mut stack: Vec<(Point, u32)> = Vec::new();
    let mut next_site = root;
    for &k in tree.offspring() {
        *visits.entry(Site::encode(&next_site)).or_insert(0) += 1;
        stack.push((next_site, k));
        while let Some(top) = stack.last() {
            if top.1 == 0 {
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(top) = stack.last_mut() {
            top.1 -= 1;
            next_site = top.0.stepped(rng.direction(dim));
        }
    }
    WalkTrace {
        root,
        visits,
        tree_size: tree.size() as u64,
        truncation: TruncationReport {
            truncated: false,
            cap_nodes: tree.size() as u64,
            nodes_generated: tree.size() as u64,
        },
    }
}

/// Node and generation caps for streaming exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExploreLimits {
    pub cap_nodes: u64,
    pub max_depth: Option<u32>,
}

impl ExploreLimits {
    pub fn nodes(cap_nodes: u64) -> Self {
        Self {
            cap_nodes,
            max_depth: None,
        }
    }

    pub fn depth(max_depth: u32) -> Self {
        Self {
            cap_nodes: u64::MAX,
            max_depth: Some(max_depth),
        }
    }
}

/// What a streaming exploration did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Exploration {
    pub nodes: u64,
    pub truncated: bool,
    pub stopped: bool,
}

impl Exploration {
    pub fn report(&self, cap_nodes: u64) -> TruncationReport {
        TruncationReport {
            truncated: self.truncated,
            cap_nodes,
            nodes_generated: self.nodes,
        }
    }
}

/// Depth-first BRW without materializing the tree. `visit` sees every vertex
/// (site, generation) in DFS order and may stop the walk early.
///
/// Offspring counts come from `tree_rng` in vertex order and steps from
/// `step_rng` in edge order, so the visited sequence is the same as
/// `embed(sample_tree(tree_rng, cap), root, step_rng)` (depth caps aside).
pub fn explore<F>(
    root: Point,
    limits: ExploreLimits,
    tree_rng: &mut RngStream,
    step_rng: &mut RngStream,
    mut visit: F,
) -> Exploration
where
    F: FnMut(&Point, u32) -> ControlFlow<()>,
{
    let dim = root.dim();
    // The current DFS path: children still pending at each ancestor and the
    // step that led into it, so the site can be maintained in place.
    let mut path: Vec<(u32, Direction)> = Vec::new();
    let mut site = root;
    let mut entered = Direction(0);
    let mut nodes = 0u64;
    loop {
        nodes += 1;
        if visit(&site, path.len() as u32).is_break() {
            return Exploration {
                nodes,
                truncated: false,
                stopped: true,
            };
        }
        let k = match limits.max_depth {
            Some(h) if path.len() as u32 >= h => 0,
            _ => tree_rng.offspring(),
        };
        if k > 0 {
            path.push((k, entered));
        } else {
            if path.is_empty() {
                return Exploration {
                    nodes,
                    truncated: false,
                    stopped: false,
                };
            }
            site.step_in_place(entered.reversed());
            while path.last().unwrap().0 == 0 {
                let (_, back) = path.pop().unwrap();
                if path.is_empty() {
                    return Exploration {
                        nodes,
                        truncated: false,
                        stopped: false,
                    };
                }
                site.step_in_place(back.reversed());
            }
        }
        if nodes >= limits.cap_nodes {
            return Exploration {
                nodes,
                truncated: true,
                stopped: false,
            };
        }
        path.last_mut().unwrap().0 -= 1;
        entered = step_rng.direction(dim);
        site.step_in_place(entered);
    }
}

/// Streams used by replicate `rep` of a single-tree experiment.
pub(crate) fn tree_streams(seed: u64, rep: u64) -> (RngStream, RngStream) {
    let base = RngStream::new(seed, rep);
    (base.child(0), base.child(1))
}

/// Samples and materializes one BRW.
pub fn sample_walk(
    root: Point,
    limits: ExploreLimits,
    tree_rng: &mut RngStream,
    step_rng: &mut RngStream,
) -> WalkTrace {
    let mut visits: HashMap<Site, u64> = HashMap::new();
    let ex = explore(root, limits, tree_rng, step_rng, |p, _| {
        *visits.entry(Site::encode(p)).or_insert(0) += 1;
        ControlFlow::Continue(())
    });
    WalkTrace {
        root,
        visits,
        tree_size: ex.nodes,
        truncation: ex.report(limits.cap_nodes),
    }
}

/// Anything with a per-replicate kernel and mergeable accumulator. Replicate
/// `r` draws only from streams addressed by `r`, so any partition of the
/// replicate range gives the same merged result when merged in order.
pub trait Replicated: Sync {
    type Acc: Default + Send;
    fn run_one(&self, rep: u64, acc: &mut Self::Acc);
    fn merge(into: &mut Self::Acc, from: Self::Acc);

    fn run_range(&self, reps: Range<u64>) -> Self::Acc {
        let mut acc = Self::Acc::default();
        for r in reps {
            self.run_one(r, &mut acc);
        }
        acc
    }
}

/// Membership test for the signed-permutation orbit of a lattice point.
/// The squared norm filters almost every site before the sort.
#[derive(Clone, Debug)]
pub struct OrbitTarget {
    pub rep: Point,
    canonical: Point,
    norm_sq: i64,
    size: u64,
}

impl OrbitTarget {
    pub fn new(x: Point) -> Self {
        Self {
            rep: x,
            canonical: x.canonical(),
            norm_sq: x.norm_sq(),
            size: x.orbit_size(),
        }
    }

    /// Relative to `origin`.
    #[inline]
    pub fn matches(&self, p: &Point, origin: &Point) -> bool {
        let diff = *p - *origin;
        diff.norm_sq() == self.norm_sq && diff.canonical() == self.canonical
    }

    pub fn orbit_size(&self) -> u64 {
        self.size
    }
}

/// Generation-truncated expected visits, `E[N_x restricted to generations <= H]`.
#[derive(Clone, Debug)]
pub struct TruncatedVisits {
    pub target: Point,
    pub gen_cap: u32,
    pub seed: u64,
    pub pool_orbit: bool,
}

impl Replicated for TruncatedVisits {
    type Acc = Moments;

    fn run_one(&self, rep: u64, acc: &mut Moments) {
        let dim = self.target.dim();
        let (mut t, mut s) = tree_streams(self.seed, rep);
        let origin = Point::origin(dim);
        let orbit = OrbitTarget::new(self.target);
        let mut count = 0u64;
        explore(
            origin,
            ExploreLimits::depth(self.gen_cap),
            &mut t,
            &mut s,
            |p, _| {
                if self.pool_orbit {
                    count += orbit.matches(p, &origin) as u64;
                } else {
                    count += (*p == self.target) as u64;
                }
                ControlFlow::Continue(())
            },
        );
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

/// MC estimate of `sum_{n <= gen_cap} P(X_n = x)` through generation-capped trees.
pub fn mc_truncated_visit_mean(x: Point, gen_cap: u32, reps: u64, seed: u64) -> Estimate {
    TruncatedVisits {
        target: x,
        gen_cap,
        seed,
        pool_orbit: false,
    }
    .run_range(0..reps)
    .estimate()
}

/// One row of a visit table: orbit representative, horizon, pooled estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisitRow {
    pub x: Point,
    pub horizon: u32,
    pub estimate: Estimate,
}

/// Truncated expected visits for every orbit class within Euclidean radius
/// `radius`, at several horizons, all from the same trees. Each per-tree value
/// is the orbit-averaged visit count, so the mean targets `sum_{n<=H} p_n(x)`.
#[derive(Clone, Debug)]
pub struct VisitTable {
    dim: usize,
    horizons: Vec<u32>,
    classes: Vec<Point>,
    index: HashMap<Site, usize>,
    radius_sq: i64,
    seed: u64,
}

/// Accumulator for [`VisitTable`]: per (class, horizon) sums and sums of squares.
#[derive(Clone, Debug, Default)]
pub struct VisitTableAcc {
    reps: u64,
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
}

impl VisitTable {
    pub fn new(dim: usize, radius: u32, horizons: &[u32], seed: u64) -> Result<Self> {
        crate::lattice::check_dim(dim)?;
        if horizons.is_empty() {
            return Err(Error::Precondition("at least one horizon is required"));
        }
        let radius_sq = (radius as i64) * (radius as i64);
        let classes = canonical_classes(dim, radius_sq);
        let index = classes
            .iter()
            .enumerate()
            .map(|(i, p)| (Site::encode(p), i))
            .collect();
        let mut horizons = horizons.to_vec();
        horizons.sort_unstable();
        horizons.dedup();
        Ok(Self {
            dim,
            horizons,
            classes,
            index,
            radius_sq,
            seed,
        })
    }

    pub fn classes(&self) -> &[Point] {
        &self.classes
    }

    pub fn horizons(&self) -> &[u32] {
        &self.horizons
    }

    pub fn rows(&self, acc: &VisitTableAcc) -> Vec<VisitRow> {
        let nh = self.horizons.len();
        let n = acc.reps as f64;
        let mut rows = Vec::new();
        for (c, x) in self.classes.iter().enumerate() {
            for (j, &h) in self.horizons.iter().enumerate() {
                let s = acc.sum.get(c * nh + j).copied().unwrap_or(0.0);
                let q = acc.sum_sq.get(c * nh + j).copied().unwrap_or(0.0);
                let mean = if n > 0.0 { s / n } else { 0.0 };
                let var = if n > 1.0 {
                    ((q - n * mean * mean) / (n - 1.0)).max(0.0)
                } else {
                    0.0
                };
                rows.push(VisitRow {
                    x: *x,
                    horizon: h,
                    estimate: Estimate {
                        value: mean,
                        se: libm::sqrt(var / n.max(1.0)),
                        reps: acc.reps,
                    },
                });
            }
        }
        rows
    }
}

impl Replicated for VisitTable {
    type Acc = VisitTableAcc;

    fn run_one(&self, rep: u64, acc: &mut VisitTableAcc) {
        let nh = self.horizons.len();
        let cells = self.classes.len() * nh;
        if acc.sum.len() != cells {
            acc.sum = vec![0.0; cells];
            acc.sum_sq = vec![0.0; cells];
        }
        let (mut t, mut s) = tree_streams(self.seed, rep);
        let top = *self.horizons.last().unwrap();
        let mut local: HashMap<usize, u64> = HashMap::new();
        explore(
            Point::origin(self.dim),
            ExploreLimits::depth(top),
            &mut t,
            &mut s,
            |p, g| {
                if p.norm_sq() <= self.radius_sq {
                    let c = self.index[&Site::encode(&p.canonical())];
                    for (j, &h) in self.horizons.iter().enumerate() {
                        if g <= h {
                            *local.entry(c * nh + j).or_insert(0) += 1;
                        }
                    }
                }
                ControlFlow::Continue(())
            },
        );
        for (cell, count) in local {
            let v = count as f64 / self.classes[cell / nh].orbit_size() as f64;
            acc.sum[cell] += v;
            acc.sum_sq[cell] += v * v;
        }
        acc.reps += 1;
    }

    fn merge(into: &mut VisitTableAcc, from: VisitTableAcc) {
        if into.sum.is_empty() {
            into.sum = from.sum;
            into.sum_sq = from.sum_sq;
        } else {
            for (a, b) in into.sum.iter_mut().zip(&from.sum) {
                *a += b;
            }
            for (a, b) in into.sum_sq.iter_mut().zip(&from.sum_sq) {
                *a += b;
            }
        }
        into.reps += from.reps;
    }
}

/// Hit probabilities `P(N_x > 0)` for node-capped BRWs from the origin,
/// pooled over the orbit of each target. Doubling `cap_nodes` on the same seed
/// reveals a superset of every tree.
#[derive(Clone, Debug)]
pub struct HitProbability {
    pub targets: Vec<Point>,
    pub cap_nodes: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, Default)]
pub struct HitAcc {
    pub per_target: Vec<Moments>,
    pub truncated: Proportion,
}

impl Replicated for HitProbability {
    type Acc = HitAcc;

    fn run_one(&self, rep: u64, acc: &mut HitAcc) {
        if acc.per_target.len() != self.targets.len() {
            acc.per_target = vec![Moments::new(); self.targets.len()];
        }
        let dim = self.targets[0].dim();
        let origin = Point::origin(dim);
        let orbits: Vec<OrbitTarget> = self.targets.iter().map(|x| OrbitTarget::new(*x)).collect();
        let mut hit: Vec<HashSet<Site>> = vec![HashSet::new(); orbits.len()];
        let (mut t, mut s) = tree_streams(self.seed, rep);
        let ex = explore(
            origin,
            ExploreLimits::nodes(self.cap_nodes),
            &mut t,
            &mut s,
            |p, _| {
                let nsq = p.norm_sq();
                for (o, h) in orbits.iter().zip(hit.iter_mut()) {
                    if nsq == o.norm_sq && p.canonical() == o.canonical {
                        h.insert(Site::encode(p));
                    }
                }
                ControlFlow::Continue(())
            },
        );
        for ((m, h), o) in acc.per_target.iter_mut().zip(&hit).zip(&orbits) {
            m.push(h.len() as f64 / o.orbit_size() as f64);
        }
        acc.truncated.record(ex.truncated);
    }

    fn merge(into: &mut HitAcc, from: HitAcc) {
        if into.per_target.is_empty() {
            into.per_target = from.per_target;
        } else {
            for (a, b) in into.per_target.iter_mut().zip(&from.per_target) {
                a.merge(b);
            }
        }
        into.truncated.merge(&from.truncated);
    }
}

/// `P(N_x > 0)` for a single target, without orbit pooling.
pub fn mc_hit_probability(
    x: Point,
    cap_nodes: u64,
    reps: u64,
    seed: u64,
) -> (Proportion, Proportion) {
    let dim = x.dim();
    let mut hits = Proportion::default();
    let mut truncated = Proportion::default();
    for rep in 0..reps {
        let (mut t, mut s) = tree_streams(seed, rep);
        let mut found = false;
        let ex = explore(
            Point::origin(dim),
            ExploreLimits::nodes(cap_nodes),
            &mut t,
            &mut s,
            |p, _| {
                if *p == x {
                    found = true;
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        );
        hits.record(found);
        truncated.record(ex.truncated);
    }
    (hits, truncated)
}

/// `P(N_x > 0, N_y > 0)` for node-capped BRWs from the origin.
pub fn mc_two_point(
    x: Point,
    y: Point,
    cap_nodes: u64,
    reps: u64,
    seed: u64,
) -> Result<Proportion> {
    let dim = x.dim();
    let origin = Point::origin(dim);
    if x == y || x == origin || y == origin {
        return Err(Error::Precondition("x, y and the root must be distinct"));
    }
    if y.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: y.dim(),
        });
    }
    let mut both = Proportion::default();
    for rep in 0..reps {
        let (mut t, mut s) = tree_streams(seed, rep);
        let (mut hx, mut hy) = (false, false);
        explore(
            origin,
            ExploreLimits::nodes(cap_nodes),
            &mut t,
            &mut s,
            |p, _| {
                hx |= *p == x;
                hy |= *p == y;
                if hx && hy {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            },
        );
        both.record(hx && hy);
    }
    Ok(both)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::sample_tree;

    #[test]
    fn leaf_embeds_to_root() {
        let root = Point::new(&[1, 2, 3, 4, 5]).unwrap();
        let mut rng = RngStream::new(1, 1);
        let tr = embed(&GwTree::leaf(), root, &mut rng);
        assert_eq!(tr.visit_count(&root), 1);
        assert_eq!(tr.tree_size(), 1);
        assert_eq!(tr.range(), 1);
    }

    #[test]
    fn explorer_matches_embedding() {
        for rep in 0..200 {
            let (mut t1, mut s1) = tree_streams(5, rep);
            let (mut t2, mut s2) = tree_streams(5, rep);
            let (tree, report) = sample_tree(&mut t1, 300);
            let a = embed(&tree, Point::origin(5), &mut s1);
            let b = sample_walk(
                Point::origin(5),
                ExploreLimits::nodes(300),
                &mut t2,
                &mut s2,
            );
            assert_eq!(b.tree_size(), tree.size() as u64);
            assert_eq!(b.truncation().truncated, report.truncated);
            let mut va: Vec<_> = a.visits().collect();
            let mut vb: Vec<_> = b.visits().collect();
            va.sort();
            vb.sort();
            assert_eq!(va, vb);
        }
    }

    #[test]
    fn canonical_class_count_small() {
        // d = 2, |x|^2 <= 4: (0,0) (1,0) (1,1) (2,0)
        let c = canonical_classes(2, 4);
        assert_eq!(c.len(), 4);
    }
}
