//! Branching equilibrium measure and capacity, and the windowed construction
//! of branching interlacements: Poisson many double walks enter a finite
//! set `K` at each of its inner-boundary sites, and a walk is kept iff its
//! backward-rooted trace `T'_b` avoids `K`.
//!
//! Arrivals at an entry site are the points of a unit-rate Poisson process
//! on the level axis, so samples at levels `u < u'` from the same stream are
//! coupled: the `u`-sample is the `u'`-sample restricted to levels `<= u`.

use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::Rng;
use rand_distr::Exp1;

use crate::brw::{ExploreLimits, Replicated};
use crate::double::{
    backward_avoids, explore_double, sample_double, BackboneStop, DoubleParams, DoubleWalkSample,
    RootBranches,
};
use crate::error::{Error, Result};
use crate::lattice::{Point, PointSet};
use crate::rng::RngStream;
use crate::stats::{Estimate, Proportion};

/// Whether the double walk on `stream` rooted at `x` first meets `K` at its
/// root, i.e. `T'_b` avoids `K`.
pub fn equilibrium_trial(
    k: &PointSet,
    x: Point,
    params: &DoubleParams,
    stream: &RngStream,
) -> bool {
    backward_avoids(x, &|p: &Point| k.contains(p), params, stream)
}

/// `ê_K(x)` as the fraction of `reps` walks whose `T'_b` avoids `K`.
/// Replicate `r` uses `RngStream::new(seed, r)`.
pub fn estimate_equilibrium(
    k: &PointSet,
    x: Point,
    reps: u64,
    params: &DoubleParams,
    seed: u64,
) -> Result<Proportion> {
    if !k.contains(&x) {
        return Err(Error::Precondition("x must belong to K"));
    }
    let mut acc = Proportion::default();
    for r in 0..reps {
        acc.record(equilibrium_trial(k, x, params, &RngStream::new(seed, r)));
    }
    Ok(acc)
}

/// Per-site equilibrium estimates and their total.
#[derive(Clone, Debug)]
pub struct CapacityEstimate {
    pub per_site: Vec<(Point, Proportion)>,
    pub total: Estimate,
}

/// `ĉap(K) = Σ ê_K(x)`. Site `i` (in sorted order) replicate `r` uses
/// `RngStream::new(seed, r).child(i)`; errors are added in quadrature.
pub fn estimate_capacity(
    k: &PointSet,
    reps: u64,
    params: &DoubleParams,
    seed: u64,
) -> Result<CapacityEstimate> {
    if k.is_empty() {
        return Err(Error::Precondition("K must be nonempty"));
    }
    let mut per_site = Vec::with_capacity(k.len());
    for (i, &x) in k.points().iter().enumerate() {
        let mut acc = Proportion::default();
        for r in 0..reps {
            acc.record(equilibrium_trial(
                k,
                x,
                params,
                &RngStream::new(seed, r).child(i as u64),
            ));
        }
        per_site.push((x, acc));
    }
    let value = per_site.iter().map(|(_, p)| p.p()).sum();
    let var: f64 = per_site.iter().map(|(_, p)| p.se() * p.se()).sum();
    Ok(CapacityEstimate {
        per_site,
        total: Estimate {
            value,
            se: libm::sqrt(var),
            reps,
        },
    })
}

/// Like [`estimate_capacity`] for a set invariant under signed coordinate
/// permutations, with the backbone stop centred at the origin: one estimate
/// per orbit class, weighted by the class size in `K`. Class `c` uses
/// `RngStream::new(seed, r).child(c)`.
pub fn estimate_capacity_symmetric(
    k: &PointSet,
    reps: u64,
    params: &DoubleParams,
    seed: u64,
) -> Result<CapacityEstimate> {
    if k.is_empty() {
        return Err(Error::Precondition("K must be nonempty"));
    }
    if let BackboneStop::ExitBall { center, .. } = params.stop {
        if !center.is_origin() {
            return Err(Error::Precondition(
                "backbone stop must be centred at the origin",
            ));
        }
    }
    let mut classes: Vec<Point> = k.points().iter().map(|p| p.canonical()).collect();
    classes.sort_unstable();
    classes.dedup();
    let mut class_est = Vec::with_capacity(classes.len());
    let mut value = 0.0;
    let mut var = 0.0;
    for (c, rep) in classes.iter().enumerate() {
        let size = rep.orbit_size();
        if rep.orbit().iter().any(|p| !k.contains(p)) {
            return Err(Error::Precondition("K is not symmetric"));
        }
        let mut acc = Proportion::default();
        for r in 0..reps {
            acc.record(equilibrium_trial(
                k,
                *rep,
                params,
                &RngStream::new(seed, r).child(c as u64),
            ));
        }
        value += size as f64 * acc.p();
        var += (size as f64 * acc.se()) * (size as f64 * acc.se());
        class_est.push(acc);
    }
    let per_site = k
        .points()
        .iter()
        .map(|p| {
            let c = classes.binary_search(&p.canonical()).unwrap();
            (*p, class_est[c])
        })
        .collect();
    Ok(CapacityEstimate {
        per_site,
        total: Estimate {
            value,
            se: libm::sqrt(var),
            reps,
        },
    })
}

/// A finite set of sites, its entry sites, and the truncation used for
/// every trajectory.
#[derive(Clone, Debug)]
pub struct Window {
    set: PointSet,
    entries: Vec<Point>,
    radius: Option<f64>,
    params: DoubleParams,
}

impl Window {
    /// `B(0, r)`, with backbones stopped on leaving `B(0, exit_factor * r)`.
    pub fn ball(dim: usize, r: f64, exit_factor: f64, branch: ExploreLimits) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(Error::Precondition("window radius must be at least 1"));
        }
        let origin = Point::origin(dim);
        let set = PointSet::ball(origin, r);
        let mut w = Self::around(
            set,
            BackboneStop::exit_ball(origin, exit_factor * r),
            branch,
        )?;
        w.radius = Some(r);
        Ok(w)
    }

    /// An arbitrary finite set with the given backbone stop.
    pub fn around(set: PointSet, stop: BackboneStop, branch: ExploreLimits) -> Result<Self> {
        if set.is_empty() {
            return Err(Error::Precondition("window set must be nonempty"));
        }
        let entries = set.inner_boundary();
        Ok(Self {
            set,
            entries,
            radius: None,
            params: DoubleParams::new(stop, branch).with_root(RootBranches::ForwardOnly),
        })
    }

    pub fn set(&self) -> &PointSet {
        &self.set
    }

    pub fn entries(&self) -> &[Point] {
        &self.entries
    }

    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn params(&self) -> &DoubleParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.set.dim().unwrap()
    }

    /// Arrivals with level `<= u`, ordered by entry site then level. Entry
    /// `i` draws its levels from `stream.child(i)` and its `j`-th walk uses
    /// `stream.child(i).child(j)`.
    pub fn arrivals(&self, u: f64, stream: &RngStream) -> Vec<Arrival> {
        let mut out = Vec::new();
        for (i, &entry) in self.entries.iter().enumerate() {
            let mut s = stream.child(i as u64);
            let base = s.clone();
            let mut level = 0.0;
            let mut j = 0u64;
            loop {
                let gap: f64 = s.sample(Exp1);
                level += gap;
                if level > u {
                    break;
                }
                out.push(Arrival {
                    entry,
                    level,
                    stream: base.child(j),
                });
                j += 1;
            }
        }
        out
    }

    /// The thinning predicate.
    pub fn accepts(&self, a: &Arrival) -> bool {
        equilibrium_trial(&self.set, a.entry, &self.params, &a.stream)
    }

    /// Whether `K` lies in the window with every site's neighbors inside it.
    pub fn safely_contains(&self, k: &PointSet) -> bool {
        k.points().iter().all(|p| {
            self.set.contains(p)
                && crate::lattice::neighbors(p)
                    .iter()
                    .all(|q| self.set.contains(q))
        })
    }
}

/// One potential trajectory of a window.
#[derive(Clone, Debug)]
pub struct Arrival {
    pub entry: Point,
    pub level: f64,
    pub stream: RngStream,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub entry: Point,
    pub level: f64,
    pub accepted: bool,
    pub walk: DoubleWalkSample,
}

/// One window realization.
#[derive(Clone, Debug)]
pub struct WindowSample {
    pub radius: Option<f64>,
    pub u: f64,
    pub seed: u64,
    pub rep: u64,
    pub trajectories: Vec<Trajectory>,
    /// Sorted sites of the window covered by accepted trajectories.
    pub occupied: Vec<Point>,
}

impl WindowSample {
    pub fn accepted(&self) -> impl Iterator<Item = &Trajectory> + '_ {
        self.trajectories.iter().filter(|t| t.accepted)
    }

    pub fn accepted_count(&self) -> usize {
        self.accepted().count()
    }
}

fn finish_sample(
    window: &Window,
    u: f64,
    seed: u64,
    rep: u64,
    trajectories: Vec<Trajectory>,
) -> WindowSample {
    let mut occupied: Vec<Point> = window
        .set
        .points()
        .iter()
        .filter(|p| {
            trajectories
                .iter()
                .any(|t| t.accepted && t.walk.trace_contains(p))
        })
        .copied()
        .collect();
    occupied.sort_unstable();
    WindowSample {
        radius: window.radius,
        u,
        seed,
        rep,
        trajectories,
        occupied,
    }
}

/// Window `rep` at level `u` from `RngStream::new(seed, rep)`, keeping every
/// arrival, accepted or not.
pub fn sample_window(window: &Window, u: f64, seed: u64, rep: u64) -> WindowSample {
    let stream = RngStream::new(seed, rep);
    let trajectories = window
        .arrivals(u, &stream)
        .into_iter()
        .map(|a| {
            let walk = sample_double(a.entry, &window.params, &a.stream);
            let accepted = !walk
                .backward_rooted()
                .sites()
                .any(|s| window.set.contains_site(s));
            Trajectory {
                entry: a.entry,
                level: a.level,
                accepted,
                walk,
            }
        })
        .collect();
    finish_sample(window, u, seed, rep, trajectories)
}

/// Same realization as [`sample_window`], but rejected arrivals are decided
/// by streaming and dropped.
pub fn sample_window_accepted(window: &Window, u: f64, seed: u64, rep: u64) -> WindowSample {
    let stream = RngStream::new(seed, rep);
    let trajectories = window
        .arrivals(u, &stream)
        .into_iter()
        .filter(|a| window.accepts(a))
        .map(|a| Trajectory {
            entry: a.entry,
            level: a.level,
            accepted: true,
            walk: sample_double(a.entry, &window.params, &a.stream),
        })
        .collect();
    finish_sample(window, u, seed, rep, trajectories)
}

/// Number of accepted trajectories per window, in replicate order.
#[derive(Clone, Debug)]
pub struct WindowCounts {
    pub window: Window,
    pub u: f64,
    pub seed: u64,
}

impl Replicated for WindowCounts {
    type Acc = Vec<u64>;

    fn run_one(&self, rep: u64, acc: &mut Vec<u64>) {
        let stream = RngStream::new(self.seed, rep);
        let n = self
            .window
            .arrivals(self.u, &stream)
            .iter()
            .filter(|a| self.window.accepts(a))
            .count();
        acc.push(n as u64);
    }

    fn merge(into: &mut Vec<u64>, from: Vec<u64>) {
        into.extend(from);
    }
}

pub fn accepted_counts(window: &Window, u: f64, reps: u64, seed: u64) -> Vec<u64> {
    WindowCounts {
        window: window.clone(),
        u,
        seed,
    }
    .run_range(0..reps)
}

/// For each window, the lowest level of an accepted trajectory meeting
/// `K` (infinite if none up to `u_max`). `K` is vacant at level `u` iff the
/// value exceeds `u`.
#[derive(Clone, Debug)]
pub struct VacancyLevels {
    pub window: Window,
    pub k: PointSet,
    pub u_max: f64,
    pub seed: u64,
}

impl VacancyLevels {
    pub fn new(window: Window, k: PointSet, u_max: f64, seed: u64) -> Result<Self> {
        if !window.safely_contains(&k) || k.is_empty() {
            return Err(Error::WindowTooSmall {
                radius: window.radius.unwrap_or(0.0),
            });
        }
        Ok(Self {
            window,
            k,
            u_max,
            seed,
        })
    }
}

impl Replicated for VacancyLevels {
    type Acc = Vec<f64>;

    fn run_one(&self, rep: u64, acc: &mut Vec<f64>) {
        let stream = RngStream::new(self.seed, rep);
        let mut arrivals = self.window.arrivals(self.u_max, &stream);
        arrivals.sort_by(|a, b| a.level.total_cmp(&b.level));
        let mut first = f64::INFINITY;
        for a in &arrivals {
            if !self.window.accepts(a) {
                continue;
            }
            let ex = explore_double(a.entry, &self.window.params, &a.stream, |p, _| {
                if self.k.contains(p) {
                    ControlFlow::Break(())
                } else {
                    ControlFlow::Continue(())
                }
            });
            if ex.stopped {
                first = a.level;
                break;
            }
        }
        acc.push(first);
    }

    fn merge(into: &mut Vec<f64>, from: Vec<f64>) {
        into.extend(from);
    }
}

/// Fraction of levels exceeding `u`.
pub fn vacant_fraction(levels: &[f64], u: f64) -> Proportion {
    let mut p = Proportion::default();
    for &l in levels {
        p.record(l > u);
    }
    p
}

/// Empirical `P[I^u ∩ K = ∅]` over `reps` windows.
pub fn vacant_probability(
    k: &PointSet,
    u: f64,
    reps: u64,
    window: &Window,
    seed: u64,
) -> Result<Proportion> {
    let job = VacancyLevels::new(window.clone(), k.clone(), u, seed)?;
    Ok(vacant_fraction(&job.run_range(0..reps), u))
}
