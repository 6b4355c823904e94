//! Equilibrium measure, capacity and windowed interlacements.

use branchlab_core::brw::{ExploreLimits, Replicated};
use branchlab_core::double::{explore_double, BackboneStop, DoubleParams, RootBranches};
use branchlab_core::interlacement::{
    accepted_counts, estimate_capacity, estimate_equilibrium, sample_window, vacant_fraction,
    vacant_probability, VacancyLevels, Window,
};
use branchlab_core::lattice::PointSet;
use branchlab_core::relations::{estimate_relation, MEstimator, RelationTag, RelationTruncation};
use branchlab_core::stats::Proportion;
use branchlab_core::{Error, Point, RngStream};
use std::ops::ControlFlow;

fn params(center: Point, exit: f64, cap: u64) -> DoubleParams {
    DoubleParams::new(BackboneStop::exit_ball(center, exit), ExploreLimits::nodes(cap))
        .with_root(RootBranches::ForwardOnly)
}

fn axis(k: i32) -> Point {
    Point::on_axis(5, 0, k)
}

fn close(a: &Proportion, b: &Proportion) -> bool {
    (a.p() - b.p()).abs() <= 3.0 * (a.se().powi(2) + b.se().powi(2)).sqrt()
}

#[test]
fn equilibrium_basics() {
    let o = Point::origin(5);
    let prm = params(o, 8.0, 1000);
    let single = PointSet::new(&[o]).unwrap();
    let e = estimate_equilibrium(&single, o, 4000, &prm, 1).unwrap();
    assert!(e.p() > 0.0 && e.p() < 1.0);
    // A superset is avoided less often, realization by realization.
    let pair = PointSet::new(&[o, axis(1)]).unwrap();
    let f = estimate_equilibrium(&pair, o, 4000, &prm, 1).unwrap();
    assert!(f.successes <= e.successes);
    // Translation.
    let z = Point::new(&[5, -3, 2, 0, 1]).unwrap();
    let moved = estimate_equilibrium(&single.translated(z), z, 4000, &params(z, 8.0, 1000), 2).unwrap();
    assert!(close(&e, &moved));
    assert!(matches!(estimate_equilibrium(&single, axis(1), 10, &prm, 1), Err(Error::Precondition(_))));
}

#[test]
fn capacity_sums_and_singletons() {
    let o = Point::origin(5);
    let prm = params(o, 8.0, 1000);
    let single = PointSet::new(&[o]).unwrap();
    let c = estimate_capacity(&single, 4000, &prm, 3).unwrap();
    let e = estimate_equilibrium(&single, o, 4000, &prm, 4).unwrap();
    assert!(close(&c.per_site[0].1, &e));
    let k = PointSet::ball(o, 1.0);
    let c = estimate_capacity(&k, 1000, &prm, 5).unwrap();
    let sum: f64 = c.per_site.iter().map(|s| s.1.p()).sum();
    assert!((c.total.value - sum).abs() < 1e-12);
    assert!(c.per_site.iter().all(|s| (0.0..=1.0).contains(&s.1.p())));
    // Subadditivity.
    let a = PointSet::new(&[o]).unwrap();
    let b = PointSet::new(&[axis(2)]).unwrap();
    let ab = a.union(&b).unwrap();
    let ca = estimate_capacity(&a, 2000, &prm, 6).unwrap().total;
    let cb = estimate_capacity(&b, 2000, &prm, 7).unwrap().total;
    let cab = estimate_capacity(&ab, 2000, &prm, 8).unwrap().total;
    let se = (ca.se.powi(2) + cb.se.powi(2) + cab.se.powi(2)).sqrt();
    assert!(cab.value <= ca.value + cb.value + 3.0 * se);
}

#[test]
fn far_singletons_add_up() {
    let mid = axis(16);
    let prm = params(mid, 48.0, 1000);
    let far = PointSet::new(&[Point::origin(5), axis(32)]).unwrap();
    let two = estimate_capacity(&far, 2000, &prm, 9).unwrap().total;
    let one = estimate_capacity(&PointSet::new(&[Point::origin(5)]).unwrap(), 2000, &params(Point::origin(5), 48.0, 1000), 10)
        .unwrap()
        .total;
    assert!((two.value - 2.0 * one.value).abs() <= 3.0 * (two.se.powi(2) + 4.0 * one.se.powi(2)).sqrt());
}

/// Trajectories entering `B(0, 1)` and hitting the origin have total
/// intensity `ê_{0}(0)`; checks the window construction against the
/// equilibrium measure without any Poisson layer.
#[test]
fn first_entrance_identity() {
    let o = Point::origin(5);
    let (exit, cap) = (8.0, 10_000);
    let window = Window::around(PointSet::ball(o, 1.0), BackboneStop::exit_ball(o, exit), ExploreLimits::nodes(cap)).unwrap();
    let reps = 3000;
    let mut total = 0.0;
    let mut var = 0.0;
    for (i, &x) in window.entries().iter().enumerate() {
        let mut p = Proportion::default();
        for r in 0..reps {
            let s = RngStream::new(50 + i as u64, r);
            let a = branchlab_core::interlacement::Arrival { entry: x, level: 0.0, stream: s };
            let hit = window.accepts(&a) && {
                let mut h = false;
                explore_double(x, window.params(), &a.stream, |q, _| {
                    h = *q == o;
                    if h {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                });
                h
            };
            p.record(hit);
        }
        total += p.p();
        var += p.se().powi(2);
    }
    let e = estimate_equilibrium(&PointSet::new(&[o]).unwrap(), o, 20_000, &params(o, exit, cap), 60).unwrap();
    let se = (var + e.se().powi(2)).sqrt();
    assert!((total - e.p()).abs() <= 3.0 * se, "{total} vs {}", e.p());
}

#[test]
fn occupied_set_grows_with_level() {
    let w = Window::ball(5, 2.0, 4.0, ExploreLimits::nodes(300)).unwrap();
    for rep in 0..20 {
        let lo = sample_window(&w, 0.3, 70, rep);
        let hi = sample_window(&w, 0.9, 70, rep);
        assert!(lo.accepted_count() <= hi.accepted_count());
        assert!(lo.occupied.iter().all(|p| hi.occupied.binary_search(p).is_ok()));
        for t in &lo.trajectories {
            assert_eq!(t.accepted, !t.walk.backward_rooted().sites().any(|s| w.set().contains_site(s)));
        }
        assert_eq!(lo.accepted_count(), lo.accepted().count());
    }
}

#[test]
fn accepted_counts_have_poisson_mean() {
    let o = Point::origin(5);
    let w = Window::ball(5, 1.0, 8.0, ExploreLimits::nodes(1000)).unwrap();
    let u = 0.5;
    let counts = accepted_counts(&w, u, 4000, 80);
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<u64>() as f64 / n;
    let cap = estimate_capacity(&PointSet::ball(o, 1.0), 3000, &params(o, 8.0, 1000), 81).unwrap().total;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = ((var / n) + (u * cap.se).powi(2)).sqrt();
    assert!((mean - u * cap.value).abs() <= 3.0 * se, "{mean} vs {}", u * cap.value);
}

#[test]
fn vacancy_at_zero_and_monotone_in_level() {
    let o = Point::origin(5);
    let k = PointSet::new(&[o]).unwrap();
    let small = Window::around(PointSet::ball(o, 1.0), BackboneStop::exit_ball(o, 8.0), ExploreLimits::nodes(1000)).unwrap();
    assert_eq!(vacant_probability(&k, 0.0, 50, &small, 1).unwrap().p(), 1.0);
    let levels = VacancyLevels::new(small, k, 1.0, 92).unwrap().run_range(0..500);
    let mut last = 1.0;
    for u in [0.25, 0.5, 0.75, 1.0] {
        let v = vacant_fraction(&levels, u).p();
        assert!(v <= last);
        last = v;
    }
}

/// `Σ_{x ∈ ∂B} P_x(accepted, hits 0) - ê_{0}(0)` for `B = B(0, 1.5)`, with
/// its standard error.
fn entrance_gap(cap: u64, reps: u64, seed: u64) -> (f64, f64) {
    let o = Point::origin(5);
    let window = Window::around(PointSet::ball(o, 1.5), BackboneStop::exit_ball(o, 8.0), ExploreLimits::nodes(cap)).unwrap();
    let (mut total, mut var) = (0.0, 0.0);
    for (i, &x) in window.entries().iter().enumerate() {
        let mut p = Proportion::default();
        for r in 0..reps {
            let a = branchlab_core::interlacement::Arrival { entry: x, level: 0.0, stream: RngStream::new(seed + i as u64, r) };
            let hit = window.accepts(&a)
                && explore_double(x, window.params(), &a.stream, |q, _| {
                    if *q == o {
                        ControlFlow::Break(())
                    } else {
                        ControlFlow::Continue(())
                    }
                })
                .stopped;
            p.record(hit);
        }
        total += p.p();
        var += p.se().powi(2);
    }
    let e = estimate_equilibrium(&PointSet::new(&[o]).unwrap(), o, 20_000, &params(o, 8.0, cap), seed + 1000).unwrap();
    (total - e.p(), (var + e.se().powi(2)).sqrt())
}

/// The hit intensity of the origin seen from a window with entries two
/// steps away falls short of `ê` under node caps, by an amount that shrinks
/// as the cap grows.
#[test]
fn wider_window_gap_closes_with_cap() {
    let (g_lo, s_lo) = entrance_gap(100, 2500, 300);
    let (g_hi, s_hi) = entrance_gap(10_000, 2500, 400);
    assert!(g_lo < -3.0 * s_lo, "{g_lo} ± {s_lo}");
    assert!(g_hi.abs() + 2.0 * s_hi < g_lo.abs() / 2.0 + 2.0 * s_lo, "{g_lo} ± {s_lo}, {g_hi} ± {s_hi}");
}

/// The two routes to `P[x M_{0,u} y]` agree at matched truncation.
#[test]
fn pair_intensity_matches_windows() {
    let o = Point::origin(5);
    let y = Point::new(&[1, 1, 0, 0, 0]).unwrap();
    let t = RelationTruncation { m: 4.0, cap_nodes: 2000, budget: 1_000_000 };
    let tag = RelationTag::M { lo: 0.0, hi: 3.0 };
    let w = estimate_relation(tag, o, y, 6000, &t, 100, false, MEstimator::Window).unwrap().estimate;
    let i = estimate_relation(tag, o, y, 30_000, &t, 101, false, MEstimator::Intensity).unwrap().estimate;
    assert!((w.value - i.value).abs() <= 3.0 * (w.se.powi(2) + i.se.powi(2)).sqrt(), "{w:?} vs {i:?}");
}
