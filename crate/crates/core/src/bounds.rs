//! Closed-form two- and three-point bound shapes built from gauges.
//!
//! Every distance `|a|` is replaced by `max(|a|, 1)`, so the evaluators are
//! finite on any input. Exponents are `-d + 2` and `-d + 4`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lattice::{gauge, labeled_trees, Point};

/// A bound together with its term-by-term decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub terms: Vec<(String, f64)>,
}

impl BoundValue {
    fn from_terms(terms: Vec<(String, f64)>) -> Self {
        let value = terms.iter().map(|t| t.1).sum();
        Self { value, terms }
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }
}

/// Distances appearing in the bounds: to the origin or between two points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dist {
    X,
    Y,
    Z,
    XY,
    XZ,
    YZ,
}

impl Dist {
    fn name(self) -> &'static str {
        match self {
            Dist::X => "x",
            Dist::Y => "y",
            Dist::Z => "z",
            Dist::XY => "x-y",
            Dist::XZ => "x-z",
            Dist::YZ => "y-z",
        }
    }
}

/// Exponent shift: `Two` is `-d+2`, `Four` is `-d+4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Exp {
    Two,
    Four,
}

use Dist::*;
use Exp::*;

struct Ctx {
    d: f64,
    g: [f64; 6],
}

impl Ctx {
    fn new(pts: &[&Point]) -> Result<Self> {
        let dim = pts[0].dim();
        for p in pts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                });
            }
        }
        let o = Point::origin(dim);
        let x = *pts[0];
        let y = *pts.get(1).copied().unwrap_or(&o);
        let z = *pts.get(2).copied().unwrap_or(&o);
        let g = [
            gauge(&x, &o).value(),
            gauge(&y, &o).value(),
            gauge(&z, &o).value(),
            gauge(&x, &y).value(),
            gauge(&x, &z).value(),
            gauge(&y, &z).value(),
        ];
        Ok(Self { d: dim as f64, g })
    }

    fn factor(&self, dist: Dist, e: Exp) -> f64 {
        let shift = match e {
            Two => 2.0,
            Four => 4.0,
        };
        libm::pow(self.g[dist as usize], -self.d + shift)
    }

    fn term(&self, factors: &[(Dist, Exp)]) -> (String, f64) {
        let mut label = String::new();
        let mut v = 1.0;
        for (i, &(dist, e)) in factors.iter().enumerate() {
            if i > 0 {
                label.push(' ');
            }
            let shift = match e {
                Two => 2,
                Four => 4,
            };
            label.push_str(&format!("|{}|^(-d+{})", dist.name(), shift));
            v *= self.factor(dist, e);
        }
        (label, v)
    }
}

/// `|x|^(-d+4)|y|^(-d+2) + |y|^(-d+4)|x|^(-d+2) + |x-y|^(-d+4)|x|^(-d+2)
/// + |x-y|^(-d+4)|y|^(-d+2)`.
pub fn two_point_bound(x: &Point, y: &Point) -> Result<BoundValue> {
    let c = Ctx::new(&[x, y])?;
    let t = [
        [(X, Four), (Y, Two)],
        [(Y, Four), (X, Two)],
        [(XY, Four), (X, Two)],
        [(XY, Four), (Y, Two)],
    ];
    Ok(BoundValue::from_terms(
        t.iter().map(|f| c.term(f)).collect(),
    ))
}

/// `|x|^(-d+4)|y|^(-d+4) + |x-y|^(-d+4)|x|^(-d+4) + |x-y|^(-d+4)|y|^(-d+4)`.
pub fn two_point_bound_double(x: &Point, y: &Point) -> Result<BoundValue> {
    let c = Ctx::new(&[x, y])?;
    let t = [
        [(X, Four), (Y, Four)],
        [(XY, Four), (X, Four)],
        [(XY, Four), (Y, Four)],
    ];
    Ok(BoundValue::from_terms(
        t.iter().map(|f| c.term(f)).collect(),
    ))
}

const H_TERMS: [[(Dist, Exp); 3]; 24] = [
    [(X, Two), (XY, Four), (XZ, Four)],
    [(X, Two), (XY, Four), (YZ, Four)],
    [(X, Two), (XZ, Four), (YZ, Four)],
    [(Y, Two), (XY, Four), (YZ, Four)],
    [(Y, Two), (XY, Four), (XZ, Four)],
    [(Y, Two), (YZ, Four), (XZ, Four)],
    [(Z, Two), (XZ, Four), (YZ, Four)],
    [(Z, Two), (XZ, Four), (XY, Four)],
    [(Z, Two), (YZ, Four), (XY, Four)],
    [(X, Two), (Y, Four), (YZ, Four)],
    [(X, Two), (Y, Four), (XZ, Four)],
    [(X, Four), (Y, Two), (YZ, Four)],
    [(X, Four), (Y, Two), (XZ, Four)],
    [(X, Two), (Z, Four), (XY, Four)],
    [(X, Two), (Z, Four), (YZ, Four)],
    [(X, Four), (Z, Two), (XY, Four)],
    [(X, Four), (Z, Two), (YZ, Four)],
    [(Y, Two), (Z, Four), (XY, Four)],
    [(Y, Two), (Z, Four), (XZ, Four)],
    [(Y, Four), (Z, Two), (XY, Four)],
    [(Y, Four), (Z, Two), (XZ, Four)],
    [(X, Two), (Y, Four), (Z, Four)],
    [(X, Four), (Y, Two), (Z, Four)],
    [(X, Four), (Y, Four), (Z, Two)],
];

/// The unconditioned three-point shape `h(x, y, z)`: 24 products, each with
/// one `-d+2` factor and two `-d+4` factors.
pub fn h_bound(x: &Point, y: &Point, z: &Point) -> Result<BoundValue> {
    let c = Ctx::new(&[x, y, z])?;
    Ok(BoundValue::from_terms(
        H_TERMS.iter().map(|f| c.term(f)).collect(),
    ))
}

/// `h_c(x, y, z)`: the sum over all 16 labeled spanning trees on
/// `{0, x, y, z}` of the product of edge gauges to the power `-d+4`.
pub fn hc_bound(x: &Point, y: &Point, z: &Point) -> Result<BoundValue> {
    let c = Ctx::new(&[x, y, z])?;
    // Vertex 0 is the origin, 1..=3 are x, y, z.
    let edge = |a: usize, b: usize| match (a.min(b), a.max(b)) {
        (0, 1) => X,
        (0, 2) => Y,
        (0, 3) => Z,
        (1, 2) => XY,
        (1, 3) => XZ,
        (2, 3) => YZ,
        _ => unreachable!("labeled tree on four vertices"),
    };
    let terms = labeled_trees(4)
        .iter()
        .map(|tree| {
            let f: Vec<(Dist, Exp)> = tree.iter().map(|&(a, b)| (edge(a, b), Four)).collect();
            c.term(&f)
        })
        .collect();
    Ok(BoundValue::from_terms(terms))
}
