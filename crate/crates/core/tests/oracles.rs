//! Exact oracles: lattice geometry, step distributions, Green sums and the
//! bound evaluators, each checked against an independent computation.

use std::collections::HashMap;

use branchlab_core::bounds::{h_bound, hc_bound, two_point_bound, two_point_bound_double};
use branchlab_core::green::{
    green_green, green_truncated, lattice_green, lattice_green_convolution, StepTable,
};
use branchlab_core::lattice::{labeled_trees, PointSet};
use branchlab_core::{gauge, neighbors, tree_gauge, Error, Point};
use proptest::prelude::*;

fn p(c: &[i32]) -> Point {
    Point::new(c).unwrap()
}

/// `p_n` by pushing mass along every path, one map per time step.
fn path_dp(d: usize, horizon: usize) -> Vec<HashMap<Vec<i32>, f64>> {
    let mut out = Vec::new();
    let mut cur: HashMap<Vec<i32>, f64> = HashMap::new();
    cur.insert(vec![0; d], 1.0);
    out.push(cur.clone());
    for _ in 0..horizon {
        let mut next = HashMap::new();
        for (x, m) in &cur {
            for i in 0..d {
                for s in [-1, 1] {
                    let mut y = x.clone();
                    y[i] += s;
                    *next.entry(y).or_insert(0.0) += m / (2 * d) as f64;
                }
            }
        }
        cur = next;
        out.push(cur.clone());
    }
    out
}

#[test]
fn step_table_matches_path_enumeration() {
    let h = 8;
    for d in [3usize, 5] {
        let table = StepTable::build(d, h as u32).unwrap();
        let dp = path_dp(d, h);
        for (n, layer) in dp.iter().enumerate() {
            for (x, want) in layer {
                let got = table.p(n as u32, &p(x)).unwrap();
                assert!((got - want).abs() < 1e-14, "d={d} n={n} x={x:?}");
            }
            // Sites outside the support are exactly zero.
            let far = p(&[n as i32 + 1, 0, 0][..3].iter().chain(&[0; 5][..d - 3]).copied().collect::<Vec<_>>());
            if far.l1() <= h as i64 {
                assert_eq!(table.p(n as u32, &far).unwrap(), 0.0);
            }
        }
    }
}

#[test]
fn step_table_small_values() {
    let t = StepTable::build(5, 4).unwrap();
    let o = Point::origin(5);
    let e1 = Point::on_axis(5, 0, 1);
    assert_eq!(t.p(0, &o).unwrap(), 1.0);
    assert!((t.p(1, &e1).unwrap() - 0.1).abs() < 1e-15);
    assert!((t.p(2, &o).unwrap() - 0.1).abs() < 1e-15);
    for n in 0..=4 {
        assert!((t.mass(n) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn parity_and_range_vanish() {
    let t = StepTable::build(5, 10).unwrap();
    for x in [p(&[1, 0, 0, 0, 0]), p(&[1, 1, 0, 0, 0]), p(&[2, 1, 1, 0, 0]), p(&[3, 3, 3, 0, 0])] {
        for n in 0..=10u32 {
            let v = t.p(n, &x).unwrap();
            if x.l1() > n as i64 || (x.l1() - n as i64) % 2 != 0 {
                assert_eq!(v, 0.0);
            } else {
                assert!(v > 0.0);
            }
        }
    }
}

#[test]
fn green_truncated_examples() {
    let o = Point::origin(5);
    let e1 = Point::on_axis(5, 0, 1);
    assert_eq!(green_truncated(&StepTable::build(5, 0).unwrap(), &o).unwrap(), 1.0);
    assert!(matches!(green_truncated(&StepTable::build(5, 0).unwrap(), &e1), Err(Error::OutOfBox)));
    assert!((green_truncated(&StepTable::build(5, 1).unwrap(), &e1).unwrap() - 0.1).abs() < 1e-15);
    let mut last = 0.0;
    for h in 2..=12 {
        let g = green_truncated(&StepTable::build(5, h).unwrap(), &p(&[2, 1, 0, 0, 0])).unwrap();
        assert!(g >= last);
        last = g;
    }
}

#[test]
fn green_green_is_the_time_truncated_convolution() {
    let h = 8u32;
    let t = StepTable::build(5, h).unwrap();
    // Direct double sum over intermediate sites and split times.
    let dp = path_dp(5, h as usize);
    for x in [Point::origin(5), p(&[1, 0, 0, 0, 0]), p(&[2, 1, 0, 0, 0]), p(&[3, 0, 1, 0, 0])] {
        let mut s = 0.0;
        for i in 0..=h as usize {
            for (y, py) in &dp[i] {
                for j in 0..=(h as usize - i) {
                    let z: Vec<i32> = x.coords().iter().zip(y).map(|(a, b)| a - b).collect();
                    if let Some(pz) = dp[j].get(&z) {
                        s += py * pz;
                    }
                }
            }
        }
        let g = green_green(&t, &x).unwrap();
        assert!((g - s).abs() < 1e-12 * s.max(1.0), "{x}: {g} vs {s}");
    }
}

#[test]
fn green_green_shape() {
    let t = StepTable::build(5, 20).unwrap();
    let mut last = f64::INFINITY;
    for k in [2, 4, 6, 8] {
        let x = Point::on_axis(5, 0, k);
        let s = green_green(&t, &x).unwrap();
        assert!(s < last);
        assert!(s >= green_truncated(&t, &x).unwrap());
        assert_eq!(s, green_green(&t, &-x).unwrap());
        last = s;
    }
}

#[test]
fn untruncated_sums_bound_the_tables() {
    let t = StepTable::build(5, 20).unwrap();
    for x in [Point::origin(5), p(&[1, 0, 0, 0, 0]), p(&[2, 2, 0, 0, 0]), p(&[4, 0, 0, 0, 0])] {
        let g = lattice_green(&x).unwrap();
        let gh = green_truncated(&t, &x).unwrap();
        assert!(gh <= g + 1e-9);
        let s = lattice_green_convolution(&x).unwrap();
        assert!(green_green(&t, &x).unwrap() <= s + 1e-9);
    }
    // G = 1 + (1/2d) sum over neighbors of G away from the origin's own visit.
    let o = Point::origin(5);
    let lhs = lattice_green(&o).unwrap();
    let rhs = 1.0 + lattice_green(&Point::on_axis(5, 0, 1)).unwrap();
    assert!((lhs - rhs).abs() < 1e-9);
    // S(x) = sum_n (n + 1) p_n(x) satisfies S = G + P S, i.e. at the origin
    // S(0) = G(0) + S(e_1).
    let s0 = lattice_green_convolution(&o).unwrap();
    let s1 = lattice_green_convolution(&Point::on_axis(5, 0, 1)).unwrap();
    assert!((s0 - (lhs + s1)).abs() < 1e-8);
    assert!(matches!(lattice_green_convolution(&Point::origin(4)), Err(Error::UnsupportedDimension(4))));
}

#[test]
fn memory_guard_and_box() {
    assert!(matches!(StepTable::build_with_limit(5, 20, 10), Err(Error::MemoryBudget { .. })));
    let t = StepTable::build(5, 4).unwrap();
    assert!(t.p(2, &Point::on_axis(5, 0, 9)).is_err() || t.p(2, &Point::on_axis(5, 0, 9)).unwrap() == 0.0);
}

fn signed_permutation(x: &Point, perm: &[usize], signs: &[bool]) -> Point {
    let c: Vec<i32> = perm
        .iter()
        .zip(signs)
        .map(|(&i, &s)| if s { -x.coord(i) } else { x.coord(i) })
        .collect();
    Point::new(&c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn octahedral_symmetry(
        c in prop::collection::vec(-3i32..=3, 5),
        perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle(),
        signs in prop::collection::vec(any::<bool>(), 5),
        n in 0u32..=9,
    ) {
        let t = StepTable::build(5, 9).unwrap();
        let x = Point::new(&c).unwrap();
        let y = signed_permutation(&x, &perm, &signs);
        prop_assert_eq!(t.p(n, &x).unwrap(), t.p(n, &y).unwrap());
        prop_assert_eq!(green_truncated(&t, &x).unwrap(), green_truncated(&t, &y).unwrap());
    }

    #[test]
    fn gauge_properties(a in prop::collection::vec(-20i32..=20, 5), b in prop::collection::vec(-20i32..=20, 5)) {
        let (x, y) = (Point::new(&a).unwrap(), Point::new(&b).unwrap());
        let g = gauge(&x, &y).value();
        prop_assert_eq!(g, gauge(&y, &x).value());
        prop_assert!(g >= 1.0);
        prop_assert_eq!(g == 1.0, (x - y).norm_sq() <= 1);
        if x != y {
            prop_assert_eq!(tree_gauge(&[x, y]).unwrap().value(), g);
        }
    }

    #[test]
    fn tree_gauge_translation_invariant(
        pts in prop::collection::vec(prop::collection::vec(-9i32..=9, 5), 2..=4),
        shift in prop::collection::vec(-50i32..=50, 5),
    ) {
        let w: Vec<Point> = pts.iter().map(|c| Point::new(c).unwrap()).collect();
        let z = Point::new(&shift).unwrap();
        let moved: Vec<Point> = w.iter().map(|p| *p + z).collect();
        match (tree_gauge(&w), tree_gauge(&moved)) {
            (Ok(a), Ok(b)) => prop_assert!((a.value() - b.value()).abs() <= 1e-9 * a.value()),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "translation changed validity"),
        }
    }

    #[test]
    fn tree_gauge_matches_edge_subset_enumeration(pts in prop::collection::vec(prop::collection::vec(-6i32..=6, 5), 2..=4)) {
        let mut w: Vec<Point> = pts.iter().map(|c| Point::new(c).unwrap()).collect();
        w.sort();
        w.dedup();
        prop_assume!(w.len() >= 2);
        prop_assert!((tree_gauge(&w).unwrap().value() - brute_tree_gauge(&w)).abs() < 1e-9);
    }

    #[test]
    fn site_round_trip(c in prop::collection::vec(-1000i32..=1000, 5)) {
        let x = Point::new(&c).unwrap();
        prop_assert_eq!(branchlab_core::Site::encode(&x).decode(5), x);
    }

    #[test]
    fn two_point_bounds_symmetric(a in prop::collection::vec(-12i32..=12, 5), b in prop::collection::vec(-12i32..=12, 5)) {
        let (x, y) = (Point::new(&a).unwrap(), Point::new(&b).unwrap());
        let u = two_point_bound(&x, &y).unwrap();
        let v = two_point_bound(&y, &x).unwrap();
        prop_assert!((u.value - v.value).abs() <= 1e-14 * u.value);
        let u = two_point_bound_double(&x, &y).unwrap();
        let v = two_point_bound_double(&y, &x).unwrap();
        prop_assert!((u.value - v.value).abs() <= 1e-14 * u.value);
        prop_assert!((u.value - u.terms.iter().map(|t| t.1).sum::<f64>()).abs() <= 1e-15 * u.value);
    }
}

/// Minimum over all `(n-1)`-edge subsets of the complete graph that connect
/// every vertex.
fn brute_tree_gauge(w: &[Point]) -> f64 {
    let n = w.len();
    let edges: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let mut best = f64::INFINITY;
    let mut trees = 0;
    for mask in 0u32..(1 << edges.len()) {
        if mask.count_ones() as usize != n - 1 {
            continue;
        }
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        let mut prod = 1.0;
        let mut ok = true;
        for (k, &(a, b)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra == rb {
                    ok = false;
                }
                parent[ra] = rb;
                prod *= gauge(&w[a], &w[b]).value();
            }
        }
        if ok {
            trees += 1;
            best = best.min(prod);
        }
    }
    assert_eq!(trees, n.pow(n as u32 - 2));
    best
}

#[test]
fn labeled_tree_counts_and_distinctness() {
    for n in 2..=5 {
        let mut trees: Vec<Vec<(usize, usize)>> = labeled_trees(n)
            .into_iter()
            .map(|mut t| {
                t.sort();
                t
            })
            .collect();
        let total = trees.len();
        trees.sort();
        trees.dedup();
        assert_eq!(trees.len(), total);
        assert_eq!(total, n.pow(n as u32 - 2));
    }
}

#[test]
fn tree_gauge_examples() {
    let o = Point::origin(5);
    let x = Point::on_axis(5, 0, 5);
    assert_eq!(tree_gauge(&[o, x, x.scaled(2)]).unwrap().value(), 25.0);
    assert!(matches!(tree_gauge(&[o, o]), Err(Error::UnsupportedGaugeSize(1))));
    assert_eq!(gauge(&o, &p(&[3, 4, 0, 0, 0])).value(), 5.0);
}

#[test]
fn neighbors_of_origin() {
    assert_eq!(neighbors(&p(&[0])), vec![p(&[1]), p(&[-1])]);
    let ns = neighbors(&p(&[1, 0, 0, 0, 0]));
    assert_eq!(ns.len(), 10);
    assert!(ns.iter().all(|q| (*q - p(&[1, 0, 0, 0, 0])).norm_sq() == 1));
}

fn dist(name: &str, x: &Point, y: &Point, z: &Point) -> f64 {
    let o = Point::origin(x.dim());
    let (a, b) = match name {
        "x" => (*x, o),
        "y" => (*y, o),
        "z" => (*z, o),
        "x-y" => (*x, *y),
        "x-z" => (*x, *z),
        "y-z" => (*y, *z),
        _ => panic!("unknown distance {name}"),
    };
    (a - b).norm().max(1.0)
}

#[test]
fn h_matches_fixture() {
    let text = include_str!("fixtures/h_terms.txt");
    let (x, y, z) = (p(&[3, 1, 0, 0, 0]), p(&[0, -2, 5, 0, 0]), p(&[1, 1, 1, 1, 1]));
    let d = 5.0;
    let mut want: Vec<(String, f64)> = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut v = 1.0;
        let mut label = Vec::new();
        for f in line.split_whitespace() {
            let (name, shift) = f.split_once(':').unwrap();
            let shift: f64 = shift.parse().unwrap();
            v *= dist(name, &x, &y, &z).powf(-d + shift);
            label.push(format!("|{name}|^(-d+{shift})"));
        }
        want.push((label.join(" "), v));
    }
    let got = h_bound(&x, &y, &z).unwrap();
    assert_eq!(got.term_count(), want.len());
    for ((gl, gv), (wl, wv)) in got.terms.iter().zip(&want) {
        assert_eq!(gl, wl);
        assert!((gv - wv).abs() <= 1e-14 * wv);
    }
    let total: f64 = want.iter().map(|t| t.1).sum();
    assert!((got.value - total).abs() <= 1e-13 * total);
}

#[test]
fn hc_terms_are_all_spanning_trees() {
    let (x, y, z) = (p(&[4, 0, 0, 0, 0]), p(&[0, 4, 0, 0, 0]), p(&[1, 2, 3, 0, 0]));
    let b = hc_bound(&x, &y, &z).unwrap();
    assert_eq!(b.term_count(), 16);
    let w = [Point::origin(5), x, y, z];
    let mut want: Vec<f64> = Vec::new();
    // All 3-edge connected subsets of K4, by the same brute force as above.
    let edges: Vec<(usize, usize)> = (0..4).flat_map(|a| (a + 1..4).map(move |b| (a, b))).collect();
    for mask in 0u32..64 {
        if mask.count_ones() != 3 {
            continue;
        }
        let chosen: Vec<(usize, usize)> = (0..6).filter(|k| mask >> k & 1 == 1).map(|k| edges[k]).collect();
        let mut seen = [false; 4];
        seen[0] = true;
        for _ in 0..3 {
            for &(a, b) in &chosen {
                if seen[a] || seen[b] {
                    seen[a] = true;
                    seen[b] = true;
                }
            }
        }
        if seen.iter().all(|&s| s) {
            want.push(chosen.iter().map(|&(a, b)| gauge(&w[a], &w[b]).value().powf(-1.0)).product());
        }
    }
    assert_eq!(want.len(), 16);
    let mut got: Vec<f64> = b.terms.iter().map(|t| t.1).collect();
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() <= 1e-14 * w);
    }
}

#[test]
fn two_point_double_scales() {
    let (x, y) = (p(&[4, 1, 0, 0, 0]), p(&[0, 5, 2, 0, 0]));
    let a = two_point_bound_double(&x, &y).unwrap().value;
    let b = two_point_bound_double(&x.scaled(2), &y.scaled(2)).unwrap().value;
    assert!((b / a - 2f64.powi(-2)).abs() < 1e-12);
}

#[test]
fn point_set_ball_matches_box_scan() {
    for (d, r) in [(2usize, 2.5f64), (3, 2.0), (5, 3.0)] {
        let o = Point::origin(d);
        let ball = PointSet::ball(o, r);
        let ri = r.floor() as i32;
        let mut count = 0;
        let mut boundary = 0;
        let mut c = vec![-ri; d];
        loop {
            let x = Point::new(&c).unwrap();
            if (x.norm_sq() as f64) <= r * r {
                count += 1;
                assert!(ball.contains(&x));
                if neighbors(&x).iter().any(|q| (q.norm_sq() as f64) > r * r) {
                    boundary += 1;
                }
            }
            let mut i = 0;
            while i < d {
                c[i] += 1;
                if c[i] <= ri {
                    break;
                }
                c[i] = -ri;
                i += 1;
            }
            if i == d {
                break;
            }
        }
        assert_eq!(ball.len(), count);
        assert_eq!(ball.inner_boundary().len(), boundary);
    }
    assert_eq!(PointSet::ball(Point::origin(5), 3.0).len(), 1343);
}
