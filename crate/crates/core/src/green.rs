//! Exact simple-random-walk step distributions and Green functions.
//!
//! [`StepTable`] runs the exact recursion `p_{n+1}(x) = (2d)^-1 sum_e p_n(x+e)`
//! on orbit representatives of the signed-permutation group, so memory grows
//! like the number of partitions of `H` rather than `(2H+1)^d`.
//!
//! [`lattice_green`] and [`lattice_green_convolution`] give the untruncated
//! `G(x) = sum_n p_n(x)` and `S(x) = sum_n (n+1) p_n(x)` through the
//! continuous-time walk, `G(x) = int_0^inf prod_i e^{-t/d} I_{x_i}(t/d) dt`.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{canonical_classes_l1, check_dim, Point, Site};

/// Default cap on stored orbit classes.
pub const DEFAULT_CLASS_LIMIT: u64 = 50_000_000;

/// `p_n(x)` for `n <= H` and every `x` with `|x|_1 <= H`.
#[derive(Clone, Debug)]
pub struct StepTable {
    dim: usize,
    horizon: u32,
    classes: Vec<Point>,
    index: HashMap<Site, usize>,
    // values[n][class]
    values: Vec<Vec<f64>>,
}

impl StepTable {
    pub fn build(dim: usize, horizon: u32) -> Result<Self> {
        Self::build_with_limit(dim, horizon, DEFAULT_CLASS_LIMIT)
    }

    pub fn build_with_limit(dim: usize, horizon: u32, class_limit: u64) -> Result<Self> {
        check_dim(dim)?;
        let required = class_count_bound(dim, horizon) * (horizon as u64 + 1);
        if required > class_limit.saturating_mul(horizon as u64 + 1) {
            return Err(Error::MemoryBudget {
                required,
                limit: class_limit,
            });
        }
        let classes = canonical_classes_l1(dim, horizon as i64);
        let index: HashMap<Site, usize> = classes
            .iter()
            .enumerate()
            .map(|(i, p)| (Site::encode(p), i))
            .collect();
        // For each class, the classes of its 2d neighbours (None beyond the table).
        let neighbours: Vec<Vec<Option<usize>>> = classes
            .iter()
            .map(|c| {
                crate::lattice::neighbors(c)
                    .into_iter()
                    .map(|q| index.get(&Site::encode(&q.canonical())).copied())
                    .collect()
            })
            .collect();
        let w = 1.0 / (2 * dim) as f64;
        let mut values = Vec::with_capacity(horizon as usize + 1);
        let mut cur = vec![0.0; classes.len()];
        cur[0] = 1.0;
        for _ in 0..horizon {
            let next: Vec<f64> = neighbours
                .iter()
                .map(|nb| nb.iter().flatten().map(|&j| cur[j]).sum::<f64>() * w)
                .collect();
            values.push(core::mem::replace(&mut cur, next));
        }
        values.push(cur);
        Ok(Self {
            dim,
            horizon,
            classes,
            index,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Half-width of the cube of sites the table answers for.
    pub fn box_radius(&self) -> u32 {
        self.horizon
    }

    pub fn classes(&self) -> &[Point] {
        &self.classes
    }

    fn class_of(&self, x: &Point) -> Result<Option<usize>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        if x.linf() > self.horizon as i64 {
            return Err(Error::OutOfBox);
        }
        Ok(self.index.get(&Site::encode(&x.canonical())).copied())
    }

    /// `P(X_n = x)`.
    pub fn p(&self, n: u32, x: &Point) -> Result<f64> {
        if n > self.horizon {
            return Err(Error::OutOfBox);
        }
        Ok(match self.class_of(x)? {
            Some(c) => self.values[n as usize][c],
            None => 0.0,
        })
    }

    /// `p_0(x), ..., p_H(x)`.
    pub fn series(&self, x: &Point) -> Result<Vec<f64>> {
        Ok(match self.class_of(x)? {
            Some(c) => self.values.iter().map(|v| v[c]).collect(),
            None => vec![0.0; self.horizon as usize + 1],
        })
    }

    /// `sum_x p_n(x)`, summed over orbit classes with their sizes.
    pub fn mass(&self, n: u32) -> f64 {
        self.classes
            .iter()
            .zip(&self.values[n as usize])
            .map(|(c, v)| v * c.orbit_size() as f64)
            .sum()
    }

    /// CSV rows `n,x_1,...,x_d,p` for the given sites and all `n <= H`.
    pub fn csv_slice(&self, sites: &[Point]) -> Result<alloc::string::String> {
        use core::fmt::Write;
        let mut out = alloc::string::String::from("n");
        for i in 1..=self.dim {
            let _ = write!(out, ",x{i}");
        }
        out.push_str(",p\n");
        for x in sites {
            let s = self.series(x)?;
            for (n, p) in s.iter().enumerate() {
                let _ = write!(out, "{n}");
                for c in x.coords() {
                    let _ = write!(out, ",{c}");
                }
                let _ = writeln!(out, ",{p:e}");
            }
        }
        Ok(out)
    }
}

/// Number of partitions-like classes, bounded crudely by `(H+1)^d / d!`
/// plus lower-order slack; used only for the memory guard.
fn class_count_bound(dim: usize, horizon: u32) -> u64 {
    let mut v: f64 = 1.0;
    for k in 1..=dim {
        v *= (horizon as f64 + k as f64) / k as f64;
    }
    v as u64
}

/// `G_H(x) = sum_{n <= H} p_n(x)`.
pub fn green_truncated(table: &StepTable, x: &Point) -> Result<f64> {
    Ok(table.series(x)?.iter().sum())
}

/// `sum_{k <= H} (k + 1) p_k(x)`, which equals the convolution
/// `sum_y sum_{i + j <= H} p_i(y) p_j(x - y)` of two walks of total length at
/// most `H`.
pub fn green_green(table: &StepTable, x: &Point) -> Result<f64> {
    Ok(table
        .series(x)?
        .iter()
        .enumerate()
        .map(|(k, p)| (k + 1) as f64 * p)
        .sum())
}

/// Untruncated Green function `G(x)`; requires `d >= 3`.
pub fn lattice_green(x: &Point) -> Result<f64> {
    if x.dim() < 3 {
        return Err(Error::UnsupportedDimension(x.dim()));
    }
    Ok(bessel::moment(x, 0))
}

/// Untruncated `S(x) = sum_y G(y) G(x - y) = sum_n (n + 1) p_n(x)`;
/// requires `d >= 5`.
pub fn lattice_green_convolution(x: &Point) -> Result<f64> {
    if x.dim() < 5 {
        return Err(Error::UnsupportedDimension(x.dim()));
    }
    Ok(bessel::moment(x, 1))
}

mod bessel {
    use super::*;

    /// `e^{-z} I_m(z)` for `m = 0..=max_order`.
    pub fn scaled_i(z: f64, max_order: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(max_order + 1, 0.0);
        if z == 0.0 {
            out[0] = 1.0;
            return;
        }
        let m2 = 4.0 * (max_order * max_order) as f64;
        if z > 40.0 + 2.0 * m2 {
            for (m, o) in out.iter_mut().enumerate() {
                *o = asymptotic(z, m);
            }
            return;
        }
        // Miller's backward recurrence I_{k-1} = (2k/z) I_k + I_{k+1},
        // normalised by e^{-z} (I_0 + 2 sum_k I_k) = 1.
        let start = {
            let base = if z > max_order as f64 {
                z
            } else {
                max_order as f64
            };
            (base + 30.0 + 10.0 * libm::sqrt(base)) as usize
        };
        let mut next = 0.0f64;
        let mut cur = 1e-300f64;
        let mut norm = 0.0f64;
        for k in (1..=start).rev() {
            let prev = (2.0 * k as f64 / z) * cur + next;
            next = cur;
            cur = prev;
            // `next` is now I_k (unnormalised), `cur` is I_{k-1}.
            norm += 2.0 * next;
            if k - 1 <= max_order {
                out[k - 1] = cur;
            }
            if k <= max_order {
                out[k] = next;
            }
            if cur > 1e250 {
                cur *= 1e-250;
                next *= 1e-250;
                norm *= 1e-250;
                for o in out.iter_mut() {
                    *o *= 1e-250;
                }
            }
        }
        norm += cur;
        for o in out.iter_mut() {
            *o /= norm;
        }
    }

    /// Large-argument expansion of `e^{-z} I_m(z)`.
    fn asymptotic(z: f64, m: usize) -> f64 {
        let mu = 4.0 * (m * m) as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..60 {
            let odd = (2 * k - 1) as f64;
            let next = -term * (mu - odd * odd) / (k as f64 * 8.0 * z);
            if libm::fabs(next) >= libm::fabs(term) {
                break;
            }
            term = next;
            sum += term;
            if libm::fabs(term) < 1e-18 {
                break;
            }
        }
        sum / libm::sqrt(2.0 * core::f64::consts::PI * z)
    }

    /// `int_0^inf t^k prod_i e^{-t/d} I_{x_i}(t/d) dt`, by the trapezoid rule
    /// after `t = e^s`, which converges geometrically for this integrand.
    pub fn moment(x: &Point, k: u32) -> f64 {
        let d = x.dim() as f64;
        let abs: Vec<usize> = x
            .coords()
            .iter()
            .map(|c| c.unsigned_abs() as usize)
            .collect();
        let max_order = abs.iter().copied().max().unwrap_or(0);
        let h = 1.0 / 32.0;
        let (lo, hi) = (-40.0f64, 120.0f64);
        let steps = ((hi - lo) / h) as usize;
        let mut buf = Vec::new();
        let mut total = 0.0;
        for i in 0..=steps {
            let s = lo + i as f64 * h;
            let t = libm::exp(s);
            scaled_i(t / d, max_order, &mut buf);
            let mut f = 1.0;
            for &a in &abs {
                f *= buf[a];
            }
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            total += w * f * libm::pow(t, k as f64 + 1.0);
        }
        total * h
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn small_argument_series() {
            // e^{-z} I_m(z) ~ (z/2)^m / m! for small z.
            let mut v = Vec::new();
            scaled_i(1e-3, 3, &mut v);
            assert!((v[0] - libm::exp(-1e-3) * (1.0 + 0.25e-6)).abs() < 1e-12);
            assert!((v[2] / (0.5e-3f64.powi(2) / 2.0) - 1.0).abs() < 2e-3);
        }

        #[test]
        fn miller_matches_expansion_at_crossover() {
            let mut v = Vec::new();
            let z = 200.0;
            scaled_i(z, 4, &mut v);
            for m in 0..=4 {
                assert!((v[m] / asymptotic(z, m) - 1.0).abs() < 1e-10, "m={m}");
            }
        }

        #[test]
        fn known_value() {
            // e^{-1} I_0(1) = 0.46575960759364043
            let mut v = Vec::new();
            scaled_i(1.0, 1, &mut v);
            assert!((v[0] - 0.465_759_607_593_640_4).abs() < 1e-13);
            // e^{-1} I_1(1) = 0.2079104153497085
            assert!((v[1] - 0.207_910_415_349_708_5).abs() < 1e-13);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_steps() {
        let t = StepTable::build(5, 4).unwrap();
        let o = Point::origin(5);
        assert_eq!(t.p(0, &o).unwrap(), 1.0);
        assert!((t.p(1, &Point::on_axis(5, 2, -1)).unwrap() - 0.1).abs() < 1e-15);
        assert!((t.p(2, &o).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(t.p(3, &o).unwrap(), 0.0);
        assert_eq!(t.p(2, &Point::on_axis(5, 0, 3)).unwrap(), 0.0);
        assert!(matches!(
            t.p(2, &Point::on_axis(5, 0, 5)),
            Err(Error::OutOfBox)
        ));
    }

    #[test]
    fn mass_is_conserved() {
        let t = StepTable::build(5, 20).unwrap();
        for n in 0..=20 {
            assert!((t.mass(n) - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn memory_guard() {
        assert!(matches!(
            StepTable::build_with_limit(5, 20, 10),
            Err(Error::MemoryBudget { .. })
        ));
    }

    #[test]
    fn green_origin_d5() {
        // G(0) = 1 / (1 - F) with return probability F = 0.135178... in d = 5.
        let g = lattice_green(&Point::origin(5)).unwrap();
        assert!((g - 1.156_308).abs() < 2e-5, "{g}");
    }
}
