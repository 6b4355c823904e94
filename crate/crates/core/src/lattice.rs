//! Geometry of the hypercubic lattice: sites, nearest-neighbor steps, the
//! distance gauges `<xy>` and `<W>`, and compact site keys for hash sets.

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Neg, Sub};

use hashbrown::HashSet;

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 9;

pub(crate) fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// A site of the lattice `Z^d`.
///
/// Coordinates beyond `dim` are always zero, so derived equality, ordering
/// and hashing only ever see the meaningful prefix.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Point {
    dim: u8,
    coords: [i32; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i32]) -> Result<Self> {
        check_dim(coords.len())?;
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Self {
            dim: coords.len() as u8,
            coords: c,
        })
    }

    /// # Panics
    /// If `dim` is outside `1..=MAX_DIM`.
    pub fn origin(dim: usize) -> Self {
        assert!(check_dim(dim).is_ok(), "unsupported dimension {dim}");
        Self {
            dim: dim as u8,
            coords: [0; MAX_DIM],
        }
    }

    /// `r * e_axis`.
    pub fn on_axis(dim: usize, axis: usize, r: i32) -> Self {
        let mut p = Self::origin(dim);
        p.coords[axis] = r;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i32] {
        &self.coords[..self.dim as usize]
    }

    #[inline]
    pub fn coord(&self, axis: usize) -> i32 {
        self.coords[axis]
    }

    pub fn is_origin(&self) -> bool {
        self.coords.iter().all(|&c| c == 0)
    }

    #[inline]
    pub fn norm_sq(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64) * (c as i64)).sum()
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq() as f64)
    }

    pub fn l1(&self) -> i64 {
        self.coords().iter().map(|&c| (c as i64).abs()).sum()
    }

    pub fn linf(&self) -> i64 {
        self.coords()
            .iter()
            .map(|&c| (c as i64).abs())
            .max()
            .unwrap_or(0)
    }

    pub fn scaled(&self, k: i32) -> Self {
        let mut p = *self;
        for c in p.coords.iter_mut() {
            *c *= k;
        }
        p
    }

    /// The site one step away in direction `dir`.
    #[inline]
    pub fn stepped(&self, dir: Direction) -> Self {
        let mut p = *self;
        p.coords[dir.axis()] += dir.sign();
        p
    }

    #[inline]
    pub(crate) fn step_in_place(&mut self, dir: Direction) {
        self.coords[dir.axis()] += dir.sign();
    }

    /// Representative of the orbit under the signed-permutation group:
    /// absolute values sorted in decreasing order.
    pub fn canonical(&self) -> Self {
        let mut p = *self;
        let d = self.dim();
        for c in p.coords[..d].iter_mut() {
            *c = c.abs();
        }
        p.coords[..d].sort_unstable_by(|a, b| b.cmp(a));
        p
    }

    /// Number of distinct images of this point under signed permutations of
    /// the coordinates.
    pub fn orbit_size(&self) -> u64 {
        let c = self.canonical();
        let d = self.dim();
        let nonzero = c.coords().iter().filter(|&&v| v != 0).count() as u32;
        let mut n = factorial(d as u64) << nonzero;
        let mut i = 0;
        while i < d {
            let mut j = i;
            while j < d && c.coords[j] == c.coords[i] {
                j += 1;
            }
            n /= factorial((j - i) as u64);
            i = j;
        }
        n
    }

    /// All distinct images under signed permutations, sorted.
    pub fn orbit(&self) -> Vec<Point> {
        let d = self.dim();
        let base = self.canonical();
        let mut perms = Vec::new();
        let mut idx: Vec<usize> = (0..d).collect();
        permutations(&mut idx, 0, &mut perms);
        let mut out = Vec::new();
        for perm in &perms {
            for signs in 0u32..(1 << d) {
                let mut p = Point::origin(d);
                let mut skip = false;
                for (k, &src) in perm.iter().enumerate() {
                    let v = base.coords[src];
                    if signs & (1 << k) != 0 {
                        if v == 0 {
                            skip = true;
                            break;
                        }
                        p.coords[k] = -v;
                    } else {
                        p.coords[k] = v;
                    }
                }
                if !skip {
                    out.push(p);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }
}

fn factorial(n: u64) -> u64 {
    (1..=n).product()
}

fn permutations(idx: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == idx.len() {
        out.push(idx.clone());
        return;
    }
    for i in k..idx.len() {
        idx.swap(k, i);
        permutations(idx, k + 1, out);
        idx.swap(k, i);
    }
}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Lexicographic on coordinates.
impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.coords()
            .cmp(other.coords())
            .then(self.dim.cmp(&other.dim))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.coords().iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

impl Add for Point {
    type Output = Point;
    fn add(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.coords.iter_mut().zip(rhs.coords) {
            *a += b;
        }
        self
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(mut self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        for (a, b) in self.coords.iter_mut().zip(rhs.coords) {
            *a -= b;
        }
        self
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(mut self) -> Point {
        for a in self.coords.iter_mut() {
            *a = -*a;
        }
        self
    }
}

/// One of the `2d` unit steps, indexed `+e_1, -e_1, +e_2, -e_2, ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Direction(pub u8);

impl Direction {
    #[inline]
    pub fn axis(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn sign(self) -> i32 {
        if self.0 & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn all(dim: usize) -> impl Iterator<Item = Direction> {
        (0..2 * dim as u8).map(Direction)
    }

    #[inline]
    pub fn reversed(self) -> Direction {
        Direction(self.0 ^ 1)
    }

    pub fn unit(self, dim: usize) -> Point {
        Point::on_axis(dim, self.axis(), self.sign())
    }
}

/// The `2d` nearest neighbors of `p`, in direction order.
pub fn neighbors(p: &Point) -> Vec<Point> {
    Direction::all(p.dim()).map(|dir| p.stepped(dir)).collect()
}

/// A gauge value `max(distance, 1)`; always at least one.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct GaugeValue(f64);

impl GaugeValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `<xy> = max(|x - y|, 1)` with the Euclidean norm.
pub fn gauge(x: &Point, y: &Point) -> GaugeValue {
    GaugeValue((*x - *y).norm().max(1.0))
}

/// `<W>`: the minimum over labeled spanning trees on `W` of the product of
/// edge gauges. Duplicates are removed first; `W` must then hold 2 to 4 points.
pub fn tree_gauge(points: &[Point]) -> Result<GaugeValue> {
    let mut w: Vec<Point> = points.to_vec();
    w.sort_unstable();
    w.dedup();
    if !(2..=4).contains(&w.len()) {
        return Err(Error::UnsupportedGaugeSize(w.len()));
    }
    let best = labeled_trees(w.len())
        .iter()
        .map(|tree| {
            tree.iter()
                .map(|&(a, b)| gauge(&w[a], &w[b]).value())
                .product::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(GaugeValue(best))
}

/// Every labeled tree on `n` vertices (`n^(n-2)` of them), as edge lists,
/// decoded from Prüfer sequences.
pub fn labeled_trees(n: usize) -> Vec<Vec<(usize, usize)>> {
    match n {
        0 => return Vec::new(),
        1 => return alloc::vec![Vec::new()],
        2 => return alloc::vec![alloc::vec![(0, 1)]],
        _ => {}
    }
    let len = n - 2;
    let total = n.pow(len as u32);
    let mut out = Vec::with_capacity(total);
    let mut seq = alloc::vec![0usize; len];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        out.push(prufer_decode(&seq, n));
    }
    out
}

fn prufer_decode(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = alloc::vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n)
            .find(|&v| degree[v] == 1)
            .expect("a leaf always exists");
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&v| degree[v] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Compact hash key for a site: each coordinate is stored with an offset in
/// `128 / d` bits, so a unit step is a single signed addition on the key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub u128);

impl Site {
    #[inline]
    fn layout(dim: usize) -> (u32, u32) {
        let stride = (128 / dim) as u32;
        (stride, stride.min(32))
    }

    #[inline]
    pub fn encode(p: &Point) -> Site {
        let (stride, width) = Self::layout(p.dim());
        let offset = 1i64 << (width - 1);
        let mut key = 0u128;
        for (i, &c) in p.coords().iter().enumerate() {
            let v = c as i64 + offset;
            assert!(
                v >= 0 && v < (1i64 << width),
                "coordinate {c} exceeds the site key range"
            );
            key |= (v as u128) << (stride * i as u32);
        }
        Site(key)
    }

    pub fn decode(self, dim: usize) -> Point {
        let (stride, width) = Self::layout(dim);
        let offset = 1i64 << (width - 1);
        let mask = (1u128 << width) - 1;
        let mut p = Point::origin(dim);
        for i in 0..dim {
            let v = ((self.0 >> (stride * i as u32)) & mask) as i64;
            p.coords[i] = (v - offset) as i32;
        }
        p
    }
}

/// Canonical representatives (non-increasing absolute values) of all orbit
/// classes with squared norm at most `radius_sq`, in lexicographic order.
pub fn canonical_classes(dim: usize, radius_sq: i64) -> Vec<Point> {
    let max = libm::sqrt(radius_sq as f64) as i32 + 1;
    classes_where(dim, max, radius_sq, |v| (v as i64) * (v as i64))
}

/// Canonical representatives of all classes with `|x|_1 <= l1`.
pub fn canonical_classes_l1(dim: usize, l1: i64) -> Vec<Point> {
    classes_where(dim, l1 as i32, l1, |v| v as i64)
}

fn classes_where(
    dim: usize,
    max: i32,
    budget: i64,
    cost: impl Fn(i32) -> i64 + Copy,
) -> Vec<Point> {
    fn rec(
        dim: usize,
        prefix: &mut Vec<i32>,
        max: i32,
        left: i64,
        cost: &dyn Fn(i32) -> i64,
        out: &mut Vec<Point>,
    ) {
        if prefix.len() == dim {
            out.push(Point::new(prefix).unwrap());
            return;
        }
        for v in 0..=max {
            let c = cost(v);
            if c > left {
                break;
            }
            prefix.push(v);
            rec(dim, prefix, v, left - c, cost, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, &mut Vec::new(), max, budget, &cost, &mut out);
    out.sort();
    out
}

/// A finite set of sites with hashed membership and a sorted listing.
#[derive(Clone, Debug, Default)]
pub struct PointSet {
    points: Vec<Point>,
    keys: HashSet<Site>,
}

impl PointSet {
    /// Duplicates are dropped; all points must share one dimension.
    pub fn new(points: &[Point]) -> Result<Self> {
        if let Some(first) = points.first() {
            for p in points {
                if p.dim() != first.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: first.dim(),
                        found: p.dim(),
                    });
                }
            }
        }
        let mut points = points.to_vec();
        points.sort_unstable();
        points.dedup();
        let keys = points.iter().map(Site::encode).collect();
        Ok(Self { points, keys })
    }

    /// Lattice points of the closed Euclidean ball `|y - center| <= r`.
    pub fn ball(center: Point, r: f64) -> Self {
        let dim = center.dim();
        let rr = r * r;
        let m = libm::floor(r) as i32;
        let mut points = Vec::new();
        let mut cur = alloc::vec![-m; dim];
        loop {
            let n2: i64 = cur.iter().map(|&c| (c as i64) * (c as i64)).sum();
            if (n2 as f64) <= rr {
                points.push(center + Point::new(&cur).unwrap());
            }
            let mut i = 0;
            loop {
                if i == dim {
                    return Self::new(&points).unwrap();
                }
                if cur[i] < m {
                    cur[i] += 1;
                    break;
                }
                cur[i] = -m;
                i += 1;
            }
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.keys.contains(&Site::encode(p))
    }

    pub fn contains_site(&self, s: &Site) -> bool {
        self.keys.contains(s)
    }

    /// Sorted, duplicate-free.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(|p| p.dim())
    }

    /// Sites of the set with at least one neighbor outside it.
    pub fn inner_boundary(&self) -> Vec<Point> {
        self.points
            .iter()
            .filter(|p| neighbors(p).iter().any(|q| !self.contains(q)))
            .copied()
            .collect()
    }

    pub fn translated(&self, z: Point) -> Self {
        let pts: Vec<Point> = self.points.iter().map(|&p| p + z).collect();
        Self::new(&pts).unwrap()
    }

    pub fn union(&self, other: &PointSet) -> Result<Self> {
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        Self::new(&pts)
    }
}
