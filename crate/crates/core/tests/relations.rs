//! Trajectory graphs, chain connectivity, exponent fits and relation
//! estimators.

use branchlab_core::brw::{ExploreLimits, Replicated};
use branchlab_core::interlacement::{sample_window, Window};
use branchlab_core::lattice::{Point, PointSet, Site};
use branchlab_core::relations::*;
use branchlab_core::stats::Estimate;
use branchlab_core::Error;
use hashbrown::HashSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn line(k: i32) -> Point {
    Point::on_axis(5, 0, k)
}

/// Random graph over sites `0..pool` on a line; `n` trajectories with
/// random traces and levels in `[0, 1)`.
fn random_graph(rng: &mut ChaCha8Rng, n: usize, pool: i32) -> (TrajectoryGraph, Vec<(Vec<i32>, f64)>) {
    let mut raw = Vec::new();
    for _ in 0..n {
        let size = rng.gen_range(1..=4);
        let mut sites: Vec<i32> = (0..size).map(|_| rng.gen_range(0..pool)).collect();
        sites.sort_unstable();
        sites.dedup();
        raw.push((sites, rng.gen::<f64>()));
    }
    let nodes = raw
        .iter()
        .map(|(s, l)| (s.iter().map(|&k| Site::encode(&line(k))).collect::<HashSet<_>>(), *l))
        .collect();
    (TrajectoryGraph::new(nodes), raw)
}

fn meets(a: &[i32], b: &[i32]) -> bool {
    a.iter().any(|s| b.contains(s))
}

/// All chains of at most `k` distinct trajectories, by recursion.
fn brute_any(raw: &[(Vec<i32>, f64)], x: i32, y: i32, k: usize) -> bool {
    fn extend(raw: &[(Vec<i32>, f64)], chain: &mut Vec<usize>, y: i32, k: usize) -> bool {
        let last = *chain.last().unwrap();
        if raw[last].0.contains(&y) {
            return true;
        }
        if chain.len() == k {
            return false;
        }
        for j in 0..raw.len() {
            if !chain.contains(&j) && meets(&raw[last].0, &raw[j].0) {
                chain.push(j);
                if extend(raw, chain, y, k) {
                    return true;
                }
                chain.pop();
            }
        }
        false
    }
    (0..raw.len()).any(|i| raw[i].0.contains(&x) && extend(raw, &mut vec![i], y, k))
}

/// All chains of exactly `k` trajectories, the `i`-th in level slice `i`.
fn brute_slices(raw: &[(Vec<i32>, f64)], x: i32, y: i32, k: usize, u: f64) -> bool {
    let slice = |l: f64| ((l / u * k as f64) as usize).min(k - 1);
    fn extend(raw: &[(Vec<i32>, f64)], last: usize, pos: usize, y: i32, k: usize, slice: &dyn Fn(f64) -> usize) -> bool {
        if pos + 1 == k {
            return raw[last].0.contains(&y);
        }
        (0..raw.len()).any(|j| {
            raw[j].1 < 1.0 && slice(raw[j].1) == pos + 1 && meets(&raw[last].0, &raw[j].0) && extend(raw, j, pos + 1, y, k, slice)
        })
    }
    (0..raw.len()).any(|i| raw[i].1 < u && slice(raw[i].1) == 0 && raw[i].0.contains(&x) && extend(raw, i, 0, y, k, &slice))
}

#[test]
fn k_connect_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let u = 1.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=10);
        let (g, raw) = random_graph(&mut rng, n, 8);
        let (x, y) = (rng.gen_range(0..8), rng.gen_range(0..8));
        for k in 1..=4 {
            assert_eq!(k_connect(&g, &line(x), &line(y), k, LevelRule::Any), brute_any(&raw, x, y, k), "{raw:?} {x} {y} {k}");
            assert_eq!(
                k_connect(&g, &line(x), &line(y), k, LevelRule::Slices { u }),
                brute_slices(&raw, x, y, k, u),
                "{raw:?} {x} {y} {k}"
            );
        }
    }
}

#[test]
fn edges_match_pairwise_intersections() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.gen_range(0..=12);
        let (g, raw) = random_graph(&mut rng, n, 10);
        let mut pairs = 0;
        for i in 0..raw.len() {
            for j in i + 1..raw.len() {
                let m = meets(&raw[i].0, &raw[j].0);
                pairs += m as usize;
                assert_eq!(g.neighbors(i).contains(&j), m);
            }
        }
        assert_eq!(g.edge_count(), pairs);
    }
}

#[test]
fn window_graphs_match_brute_force() {
    let w = Window::ball(5, 2.0, 4.0, ExploreLimits::nodes(200)).unwrap();
    let mut checked = 0;
    for rep in 0..40 {
        let s = sample_window(&w, 0.5, 5, rep);
        let acc: Vec<_> = s.accepted().collect();
        if acc.len() > 20 {
            continue;
        }
        checked += 1;
        let g = TrajectoryGraph::from_windows(core::slice::from_ref(&s), None);
        assert_eq!(g.node_count(), acc.len());
        let mut pairs = 0;
        for i in 0..acc.len() {
            for j in i + 1..acc.len() {
                pairs += acc[i].walk.trace().iter().any(|p| acc[j].walk.trace().contains(p)) as usize;
            }
        }
        assert_eq!(g.edge_count(), pairs);
    }
    assert!(checked > 10);
}

proptest! {
    #[test]
    fn connect_monotone_and_slices_inside_any(seed in any::<u64>(), n in 1usize..10, x in 0i32..6, y in 0i32..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (g, _) = random_graph(&mut rng, n, 6);
        let (px, py) = (line(x), line(y));
        for k in 1..5 {
            if k_connect(&g, &px, &py, k, LevelRule::Any) {
                prop_assert!(k_connect(&g, &px, &py, k + 1, LevelRule::Any));
            }
            if k_connect(&g, &px, &py, k, LevelRule::Slices { u: 1.0 }) {
                prop_assert!(k_connect(&g, &px, &py, k, LevelRule::Any));
            }
        }
        prop_assert!(!k_connect(&g, &px, &py, 0, LevelRule::Any));
    }
}

fn row(r: i32, value: f64, se: f64) -> RelationRow {
    RelationRow {
        x: Point::origin(5),
        y: line(r),
        estimate: Estimate { value, se, reps: 1000 },
    }
}

#[test]
fn fit_recovers_synthetic_power_law() {
    let rows: Vec<_> = [2, 4, 8, 16].iter().map(|&r| row(r, 3.0 * (r as f64).powf(-1.0), 0.01 / r as f64)).collect();
    let f = fit_exponent(&rows).unwrap();
    assert!((f.slope + 1.0).abs() < 1e-9);
    assert!((f.alpha_hat - 4.0).abs() < 1e-9);
    // Relative errors 1/300 at log-distances ln2 * {1, 2, 3, 4}.
    let sxx = 300.0f64.powi(2) * 5.0 * std::f64::consts::LN_2.powi(2);
    assert!((f.ci_half_width - 1.96 / sxx.sqrt()).abs() < 1e-9);
    assert!(f.r_squared > 0.999_999);
    let mut with_zero = rows.clone();
    with_zero.push(row(32, 0.0, 0.0));
    let g = fit_exponent(&with_zero).unwrap();
    assert_eq!((g.used_rows, g.excluded_rows), (4, 1));
    assert!((g.slope - f.slope).abs() < 1e-12);
    assert!(matches!(fit_exponent(&rows[..2]), Err(Error::InsufficientData { .. })));
}

fn trunc() -> RelationTruncation {
    RelationTruncation { m: 4.0, cap_nodes: 2000, budget: 10_000 }
}

#[test]
fn left_and_right_agree() {
    let o = Point::origin(5);
    let z = Point::new(&[1, 1, 0, 0, 0]).unwrap();
    let l = estimate_relation(RelationTag::L, o, z, 4000, &trunc(), 20, false, MEstimator::Intensity).unwrap().estimate;
    let r = estimate_relation(RelationTag::R, o, z, 4000, &trunc(), 21, false, MEstimator::Intensity).unwrap().estimate;
    assert!((l.value - r.value).abs() <= 3.0 * (l.se.powi(2) + r.se.powi(2)).sqrt(), "{l:?} {r:?}");
    assert!(l.value > 0.0 && l.value < 1.0);
}

#[test]
fn far_events_are_nearly_independent() {
    let o = Point::origin(5);
    let far = Point::on_axis(5, 1, 12);
    let pts = [o, line(1), far, far + line(1)];
    let t = RelationTruncation { m: 2.0, cap_nodes: 1000, budget: 10_000 };
    let c = correlation_check(RelationTag::L, pts, 3000, &t, 30).unwrap();
    let prod = c.first.p() * c.second.p();
    let se = (prod * (1.0 - prod) / 3000.0).sqrt();
    assert!((c.joint.p() - prod).abs() <= 4.0 * se + 1e-3, "{c:?}");
    assert!(c.dominated(50.0));
    assert!(correlation_check(RelationTag::M { lo: 0.0, hi: 1.0 }, pts, 1, &trunc(), 0).is_err());
}

#[test]
fn shared_root_means_one_walk() {
    // Both events ask about the same walk and target, so they coincide.
    let o = Point::origin(5);
    let c = correlation_check(RelationTag::L, [o, line(1), o, line(1)], 500, &trunc(), 31).unwrap();
    assert_eq!(c.joint, c.first);
    assert_eq!(c.first, c.second);
}

fn probe(ks: Vec<usize>, seed: u64) -> ConnectProbe {
    let (x, y) = (Point::origin(5), line(2));
    let t = RelationTruncation { m: 4.0, cap_nodes: 500, budget: 1 };
    ConnectProbe {
        window: pair_window(x, y, &t).unwrap(),
        x,
        y,
        u: 2.0,
        center: x,
        radii: vec![3.0, 5.0],
        ks,
        rule: LevelRule::Any,
        seed,
    }
}

#[test]
fn short_chains_agree_with_general_search() {
    let short = probe(vec![1, 2], 40);
    let general = probe(vec![1, 2, 3], 40);
    let a = connect_rows(&short, &short.run_range(0..60));
    let b = connect_rows(&general, &general.run_range(0..60));
    for ra in &a {
        let rb = b.iter().find(|r| r.k == ra.k && r.radius == ra.radius).unwrap();
        assert_eq!(ra, rb);
    }
    for r in &b {
        let k1 = b.iter().find(|q| q.radius == r.radius && q.k == 1).unwrap();
        assert!(r.estimate.value >= k1.estimate.value);
        assert!(r.degenerate == (r.covered < 100));
    }
    assert!(b.iter().all(|r| r.degenerate));
}

#[test]
fn observation_balls_are_nested() {
    let p = probe(vec![1, 2], 41);
    let acc = p.run_range(0..80);
    assert_eq!(acc.windows, 80);
    // A window covering both points in the inner ball covers them in the
    // outer one, and stays linked.
    for k in 0..2 {
        let (inner, outer) = (acc.linked[0][k], acc.linked[1][k]);
        assert!(inner.trials <= outer.trials);
        assert!(inner.successes <= outer.successes);
    }
    assert!(PointSet::ball(Point::origin(5), 3.0).contains(&line(2)));
}
