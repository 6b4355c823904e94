//! One function per subcommand. Each returns a [`Report`] whose rows depend
//! only on the configuration.

use std::ops::ControlFlow;

use branchlab_core::brw::{explore, ExploreLimits, HitProbability, Replicated, VisitTable};
use branchlab_core::double::{BackboneStop, DoubleHit, DoubleIntersection, DoubleParams, DoubleVisits, RootBranches};
use branchlab_core::green::{lattice_green_convolution, StepTable};
use branchlab_core::interlacement::{
    equilibrium_trial, sample_window, vacant_fraction, VacancyLevels, Window, WindowCounts,
};
use branchlab_core::lattice::PointSet;
use branchlab_core::relations::{
    connect_rows, fit_exponent, pair_window, ConnectProbe, ExponentFit, LevelRule, RelationJob, RelationRow,
};
use branchlab_core::stats::{dispersion_index, weighted_line_fit, Estimate, Moments, Proportion};
use branchlab_core::{gauge, Point, RngStream};
use rand::RngCore;
use serde_json::{json, Map, Value};

use crate::output::{parse_point, read_csv, Cell, Report};
use crate::{run_parallel, CliError, Config};

pub fn dispatch(command: &str, c: &Config) -> Result<Report, CliError> {
    match command {
        "tree-stats" => tree_stats(c),
        "brw-visits" => brw_visits(c),
        "brw-hit" => brw_hit(c),
        "dbrw-hit" => dbrw_hit(c),
        "dbrw-visits" => dbrw_visits(c),
        "intersect" => intersect(c),
        "capacity" => capacity(c),
        "window" => window(c),
        "vacant" => vacant(c),
        "relation" => relation(c),
        "connect" => connect(c),
        "fit" => fit(c),
        other => Err(CliError::Validation(format!("command: unknown subcommand {other}"))),
    }
}

/// Seed of row `i`, derived from the experiment seed.
pub fn row_seed(seed: u64, i: usize) -> u64 {
    RngStream::new(seed, 0x5eed).child(i as u64).next_u64()
}

fn reps(c: &Config) -> u64 {
    c.experiment.reps
}

fn caps(c: &Config) -> Vec<u64> {
    let cap = c.truncation.cap_nodes;
    if c.truncation.self_check {
        vec![cap, cap.saturating_mul(2)]
    } else {
        vec![cap]
    }
}

/// Difference between the doubled-cap and base estimates, NaN without the
/// self-check.
fn delta(values: &[f64]) -> Cell {
    match values {
        [a, b, ..] => Cell::Float(b - a),
        _ => Cell::Float(f64::NAN),
    }
}

fn fit_summary(fit: Result<ExponentFit, branchlab_core::Error>) -> Value {
    match fit {
        Ok(f) => json!({
            "slope": f.slope,
            "intercept": f.intercept,
            "ci_half_width": f.ci_half_width,
            "r_squared": f.r_squared,
            "alpha_hat": f.alpha_hat,
            "used_rows": f.used_rows,
            "excluded_rows": f.excluded_rows,
        }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

// ---------------------------------------------------------------- trees

struct GenerationSizes {
    dim: usize,
    generations: u32,
    seed: u64,
}

#[derive(Default)]
struct GenerationAcc {
    sizes: Vec<Moments>,
    /// Trees with a vertex in generation `n`.
    reached: Vec<u64>,
    trees: u64,
}

impl Replicated for GenerationSizes {
    type Acc = GenerationAcc;

    fn run_one(&self, rep: u64, acc: &mut GenerationAcc) {
        let g = self.generations as usize + 1;
        if acc.sizes.len() != g {
            acc.sizes = vec![Moments::new(); g];
            acc.reached = vec![0; g];
        }
        let base = RngStream::new(self.seed, rep);
        let (mut t, mut s) = (base.child(0), base.child(1));
        let mut counts = vec![0u64; g];
        explore(Point::origin(self.dim), ExploreLimits::depth(self.generations), &mut t, &mut s, |_, depth| {
            counts[depth as usize] += 1;
            ControlFlow::Continue(())
        });
        for (n, &k) in counts.iter().enumerate() {
            acc.sizes[n].push(k as f64);
            acc.reached[n] += (k > 0) as u64;
        }
        acc.trees += 1;
    }

    fn merge(into: &mut GenerationAcc, from: GenerationAcc) {
        if into.sizes.is_empty() {
            *into = from;
            return;
        }
        for (a, b) in into.sizes.iter_mut().zip(&from.sizes) {
            a.merge(b);
        }
        for (a, b) in into.reached.iter_mut().zip(&from.reached) {
            *a += b;
        }
        into.trees += from.trees;
    }
}

/// Mean generation sizes (all equal to 1 at criticality) and the height
/// tail `P(height >= n)` against `1 / (n + 1)`.
fn tree_stats(c: &Config) -> Result<Report, CliError> {
    let job = GenerationSizes {
        dim: c.experiment.d,
        generations: c.truncation.generations,
        seed: c.experiment.seed,
    };
    let acc = run_parallel(&job, reps(c));
    let mut r = Report::new("tree-stats", vec!["n", "mean_size", "se", "z", "p_height_ge", "exact_height_ge"]);
    let mut worst: f64 = 0.0;
    for (n, m) in acc.sizes.iter().enumerate() {
        let e = m.estimate();
        let z = if e.se > 0.0 { (e.value - 1.0) / e.se } else { 0.0 };
        worst = worst.max(z.abs());
        let tail = acc.reached[n] as f64 / acc.trees as f64;
        r.push(vec![n.into(), e.value.into(), e.se.into(), z.into(), tail.into(), (1.0 / (n as f64 + 1.0)).into()]);
    }
    r.summary.insert("max_abs_z".into(), json!(worst));
    Ok(r)
}

// ---------------------------------------------------------------- BRW

fn brw_visits(c: &Config) -> Result<Report, CliError> {
    let d = c.experiment.d;
    let table = VisitTable::new(d, c.geometry.radius as u32, &c.truncation.horizons, c.experiment.seed)?;
    let acc = run_parallel(&table, reps(c));
    let top = *table.horizons().last().unwrap();
    let steps = StepTable::build(d, top)?;
    let mut r = Report::new("brw-visits", vec!["x", "norm", "horizon", "mc", "se", "exact", "z"]);
    let mut worst: f64 = 0.0;
    for row in table.rows(&acc) {
        let series = steps.series(&row.x)?;
        let exact: f64 = series[..=row.horizon as usize].iter().sum();
        let z = if row.estimate.se > 0.0 { (row.estimate.value - exact) / row.estimate.se } else { 0.0 };
        worst = worst.max(z.abs());
        r.push(vec![
            row.x.into(),
            row.x.norm().into(),
            row.horizon.into(),
            row.estimate.value.into(),
            row.estimate.se.into(),
            exact.into(),
            z.into(),
        ]);
    }
    r.summary.insert("max_abs_z".into(), json!(worst));
    Ok(r)
}

fn hit_rows(c: &Config, r: &mut Report, ests: &[Vec<Estimate>], extra: &[Vec<Cell>]) {
    let targets = c.targets().unwrap();
    for (i, x) in targets.iter().enumerate() {
        let vals: Vec<f64> = ests.iter().map(|e| e[i].value).collect();
        let mut row = vec![Cell::from(*x), x.norm().into(), ests[0][i].value.into(), ests[0][i].se.into()];
        row.extend(extra[i].iter().cloned());
        row.push(delta(&vals));
        r.push(row);
    }
}

fn add_fit(r: &mut Report, c: &Config, ests: &[Estimate]) {
    let origin = c.base().unwrap();
    let rows: Vec<RelationRow> = c
        .targets()
        .unwrap()
        .iter()
        .zip(ests)
        .map(|(y, e)| RelationRow { x: origin, y: *y, estimate: *e })
        .collect();
    r.summary.insert("fit".into(), fit_summary(fit_exponent(&rows)));
}

/// `P(N_x > 0)` for node-capped BRWs from the origin.
fn brw_hit(c: &Config) -> Result<Report, CliError> {
    let targets = c.targets()?;
    let mut ests = Vec::new();
    let mut truncated = Vec::new();
    for cap in caps(c) {
        let acc = run_parallel(
            &HitProbability {
                targets: targets.clone(),
                cap_nodes: cap,
                seed: c.experiment.seed,
            },
            reps(c),
        );
        ests.push(acc.per_target.iter().map(Moments::estimate).collect::<Vec<_>>());
        truncated.push(acc.truncated.p());
    }
    let mut r = Report::new("brw-hit", vec!["x", "norm", "p", "se", "truncated", "delta_2cap"]);
    let extra: Vec<Vec<Cell>> = targets.iter().map(|_| vec![truncated[0].into()]).collect();
    hit_rows(c, &mut r, &ests, &extra);
    add_fit(&mut r, c, &ests[0]);
    Ok(r)
}

// ---------------------------------------------------------------- double walks

fn double_params(c: &Config, x: Point, cap: u64) -> Result<DoubleParams, CliError> {
    Ok(DoubleParams::for_target(Point::origin(x.dim()), x, c.truncation.m, cap).with_root(c.root_branches()?))
}

fn dbrw_hit(c: &Config) -> Result<Report, CliError> {
    let targets = c.targets()?;
    if targets.iter().any(Point::is_origin) {
        return Err(CliError::Validation("geometry.points: targets must differ from the root".into()));
    }
    let mut ests = Vec::new();
    let mut trunc = Vec::new();
    for cap in caps(c) {
        let mut row = Vec::new();
        let mut tr = Vec::new();
        for (i, x) in targets.iter().enumerate() {
            let acc = run_parallel(
                &DoubleHit {
                    target: *x,
                    params: double_params(c, *x, cap)?,
                    seed: row_seed(c.experiment.seed, i),
                    pool_orbit: c.geometry.pool_orbit,
                },
                reps(c),
            );
            row.push(acc.hits.estimate());
            tr.push(acc.truncated_branches as f64 / reps(c) as f64);
        }
        ests.push(row);
        trunc.push(tr);
    }
    let mut r = Report::new("dbrw-hit", vec!["x", "norm", "p", "se", "truncated_branches_per_rep", "delta_2cap"]);
    let extra: Vec<Vec<Cell>> = trunc[0].iter().map(|&t| vec![t.into()]).collect();
    hit_rows(c, &mut r, &ests, &extra);
    add_fit(&mut r, c, &ests[0]);
    Ok(r)
}

/// `E[N_x]` for the double walk next to `S(x) = Σ (n + 1) p_n(x)`; the
/// expectation lies between `S` and `2S`. Branches are cut by generation,
/// which leaves the expected visits of early generations exact.
fn dbrw_visits(c: &Config) -> Result<Report, CliError> {
    let targets = c.targets()?;
    let factors: Vec<f64> = if c.truncation.self_check {
        vec![c.truncation.depth_factor, 2.0 * c.truncation.depth_factor]
    } else {
        vec![c.truncation.depth_factor]
    };
    let mut ests = Vec::new();
    for f in factors {
        let mut row = Vec::new();
        for (i, x) in targets.iter().enumerate() {
            let origin = Point::origin(x.dim());
            let scale = x.norm().max(1.0);
            let depth = (f * scale * scale).ceil() as u32;
            let params = DoubleParams::new(BackboneStop::exit_ball(origin, c.truncation.m * scale), ExploreLimits::depth(depth))
                .with_root(c.root_branches()?);
            let m = run_parallel(
                &DoubleVisits {
                    target: *x,
                    params,
                    seed: row_seed(c.experiment.seed, i),
                    pool_orbit: c.geometry.pool_orbit,
                },
                reps(c),
            );
            row.push(m.estimate());
        }
        ests.push(row);
    }
    let mut extra = Vec::new();
    for (i, x) in targets.iter().enumerate() {
        let s = lattice_green_convolution(x)?;
        extra.push(vec![s.into(), (ests[0][i].value / s).into()]);
    }
    let mut r = Report::new("dbrw-visits", vec!["x", "norm", "mean", "se", "s", "ratio", "delta_2depth"]);
    hit_rows(c, &mut r, &ests, &extra);
    Ok(r)
}

/// Whether independent double walks from the base point and from each
/// target meet.
fn intersect(c: &Config) -> Result<Report, CliError> {
    let a = c.base()?;
    let targets = c.targets()?;
    if targets.contains(&a) {
        return Err(CliError::Validation("geometry.points: roots must differ".into()));
    }
    let mut ests = Vec::new();
    for cap in caps(c) {
        let mut row = Vec::new();
        for (i, y) in targets.iter().enumerate() {
            let p = run_parallel(
                &DoubleIntersection {
                    root_a: a,
                    root_b: *y,
                    m: c.truncation.m,
                    cap_nodes: cap,
                    seed: row_seed(c.experiment.seed, i),
                },
                reps(c),
            );
            row.push(p.estimate());
        }
        ests.push(row);
    }
    let mut r = Report::new("intersect", vec!["x", "norm", "p", "se", "delta_2cap"]);
    let extra = vec![Vec::new(); targets.len()];
    hit_rows(c, &mut r, &ests, &extra);
    add_fit(&mut r, c, &ests[0]);
    Ok(r)
}

// ---------------------------------------------------------------- interlacements

/// `ê_K(x)` trials; replicate `r` uses `RngStream::new(seed, r).child(site)`,
/// the streams of `estimate_capacity`.
struct EquilibriumTrials<'a> {
    k: &'a PointSet,
    x: Point,
    site: u64,
    params: DoubleParams,
    seed: u64,
}

impl Replicated for EquilibriumTrials<'_> {
    type Acc = Proportion;

    fn run_one(&self, rep: u64, acc: &mut Proportion) {
        acc.record(equilibrium_trial(self.k, self.x, &self.params, &RngStream::new(self.seed, rep).child(self.site)));
    }

    fn merge(into: &mut Proportion, from: Proportion) {
        into.merge(&from);
    }
}

fn interlacement_params(c: &Config, scale: f64, cap: u64) -> DoubleParams {
    let origin = Point::origin(c.experiment.d);
    DoubleParams::new(
        BackboneStop::exit_ball(origin, c.truncation.exit_factor * scale.max(1.0)),
        ExploreLimits::nodes(cap),
    )
    .with_root(RootBranches::ForwardOnly)
}

/// Per-site estimates and the total, with the total's standard error.
fn capacity_of(k: &PointSet, reps: u64, params: &DoubleParams, seed: u64) -> (Vec<Proportion>, Estimate) {
    let mut per = Vec::new();
    let (mut value, mut var) = (0.0, 0.0);
    for (i, &x) in k.points().iter().enumerate() {
        let p = run_parallel(
            &EquilibriumTrials {
                k,
                x,
                site: i as u64,
                params: *params,
                seed,
            },
            reps,
        );
        value += p.p();
        var += p.se() * p.se();
        per.push(p);
    }
    (per, Estimate { value, se: var.sqrt(), reps })
}

fn k_scale(k: &PointSet) -> f64 {
    k.points().iter().map(Point::norm).fold(0.0, f64::max)
}

fn capacity(c: &Config) -> Result<Report, CliError> {
    let k = c.k_set()?;
    let mut totals = Vec::new();
    let mut first = None;
    for cap in caps(c) {
        let params = interlacement_params(c, k_scale(&k), cap);
        let (per, total) = capacity_of(&k, reps(c), &params, c.experiment.seed);
        totals.push(total);
        first.get_or_insert(per);
    }
    let mut r = Report::new("capacity", vec!["site", "e_hat", "se"]);
    for (x, p) in k.points().iter().zip(first.unwrap()) {
        r.push(vec![(*x).into(), p.p().into(), p.se().into()]);
    }
    r.push(vec!["total".into(), totals[0].value.into(), totals[0].se.into()]);
    let vals: Vec<f64> = totals.iter().map(|t| t.value).collect();
    r.summary.insert("capacity".into(), json!(totals[0].value));
    r.summary.insert("capacity_se".into(), json!(totals[0].se));
    r.summary.insert("delta_2cap".into(), delta(&vals).as_f64().filter(|v| v.is_finite()).map_or(Value::Null, |v| json!(v)));
    Ok(r)
}

fn window_of(c: &Config, cap: u64) -> Result<Window, CliError> {
    Ok(Window::ball(c.experiment.d, c.geometry.radius, c.truncation.exit_factor, ExploreLimits::nodes(cap))?)
}

/// Accepted-trajectory counts per window, their dispersion, and full
/// exports of the first windows.
fn window(c: &Config) -> Result<Report, CliError> {
    let u = c.geometry.u[0];
    let mut means = Vec::new();
    let mut counts = Vec::new();
    for cap in caps(c) {
        let w = window_of(c, cap)?;
        let n = run_parallel(&WindowCounts { window: w, u, seed: c.experiment.seed }, reps(c));
        means.push(n.iter().sum::<u64>() as f64 / n.len() as f64);
        if counts.is_empty() {
            counts = n;
        }
    }
    let mut r = Report::new("window", vec!["rep", "accepted"]);
    for (i, n) in counts.iter().enumerate() {
        r.push(vec![i.into(), (*n).into()]);
    }
    let disp = dispersion_index(&counts);
    r.summary.insert("mean".into(), json!(means[0]));
    r.summary.insert("dispersion_index".into(), json!(disp.value));
    r.summary.insert("dispersion_se".into(), json!(disp.se));
    if let Some(d) = delta(&means).as_f64().filter(|v| v.is_finite()) {
        r.summary.insert("delta_2cap_mean".into(), json!(d));
    }
    let w = window_of(c, c.truncation.cap_nodes)?;
    for rep in 0..c.geometry.export_windows.min(reps(c)) {
        let s = sample_window(&w, u, c.experiment.seed, rep);
        let trajectories: Vec<Value> = s
            .trajectories
            .iter()
            .map(|t| {
                let sites: Vec<Vec<i32>> = t.walk.sorted_sites().iter().map(|p| p.coords().to_vec()).collect();
                json!({
                    "entry": t.entry.coords(),
                    "level": t.level,
                    "accepted": t.accepted,
                    "trace_site_list": sites,
                })
            })
            .collect();
        let doc = json!({
            "r": c.geometry.radius,
            "u": u,
            "seed": c.experiment.seed,
            "rep": rep,
            "trajectories": trajectories,
        });
        let mut body = serde_json::to_string(&doc).expect("window serializes");
        body.push('\n');
        r.extra.push((format!("window-{rep}.json"), body));
    }
    Ok(r)
}

/// Empirical vacancy of `K` next to `exp(-u ĉap(K))`, and the fitted slope
/// of `-log(vacancy)` against `u`.
fn vacant(c: &Config) -> Result<Report, CliError> {
    let k = c.k_set()?;
    let mut us = c.geometry.u.clone();
    us.sort_by(f64::total_cmp);
    us.dedup();
    let u_max = *us.last().unwrap();
    let cap = c.truncation.cap_nodes;
    let w = window_of(c, cap)?;
    let levels = run_parallel(&VacancyLevels::new(w.clone(), k.clone(), u_max, c.experiment.seed)?, reps(c));
    let (_, cap_hat) = capacity_of(&k, reps(c), w.params(), row_seed(c.experiment.seed, 0));
    let mut r = Report::new(
        "vacant",
        vec!["u", "vacant", "se", "neg_log_over_u", "cap_hat", "cap_se", "model_vacant"],
    );
    let mut pts = Vec::new();
    for &u in &us {
        let f = vacant_fraction(&levels, u);
        let nl = -f.p().ln() / u;
        if f.p() > 0.0 && f.se() > 0.0 {
            let se_log = f.se() / f.p();
            pts.push((u, -f.p().ln(), 1.0 / (se_log * se_log)));
        }
        r.push(vec![
            u.into(),
            f.p().into(),
            f.se().into(),
            nl.into(),
            cap_hat.value.into(),
            cap_hat.se.into(),
            (-u * cap_hat.value).exp().into(),
        ]);
    }
    let mut fit = Map::new();
    if let Some(f) = weighted_line_fit(&pts) {
        fit.insert("slope".into(), json!(f.slope));
        fit.insert("slope_se".into(), json!(f.slope_se));
        fit.insert("intercept".into(), json!(f.intercept));
        fit.insert("r_squared".into(), json!(f.r_squared));
    }
    r.summary.insert("fit".into(), Value::Object(fit));
    Ok(r)
}

// ---------------------------------------------------------------- relations

fn relation(c: &Config) -> Result<Report, CliError> {
    let x = c.base()?;
    let targets = c.targets()?;
    let tag = c.tag()?;
    let mut ests: Vec<Vec<Estimate>> = Vec::new();
    for cap in caps(c) {
        let mut row = Vec::new();
        for (i, y) in targets.iter().enumerate() {
            let job = RelationJob::new(
                tag,
                x,
                *y,
                &c.relation_truncation(cap),
                row_seed(c.experiment.seed, i),
                c.geometry.pool_orbit,
                c.m_estimator()?,
            )?;
            row.push(job.finish(&run_parallel(&job, reps(c)))?);
        }
        ests.push(row);
    }
    let mut r = Report::new("relation", vec!["tag", "x", "y", "gauge", "p", "se", "delta_2cap"]);
    r.meta.push(("tag".into(), format!("{tag:?}")));
    for (i, y) in targets.iter().enumerate() {
        let vals: Vec<f64> = ests.iter().map(|e| e[i].value).collect();
        r.push(vec![
            c.geometry.tag.as_str().into(),
            x.into(),
            (*y).into(),
            gauge(&x, y).value().into(),
            ests[0][i].value.into(),
            ests[0][i].se.into(),
            delta(&vals),
        ]);
    }
    add_fit(&mut r, c, &ests[0]);
    Ok(r)
}

/// Conditional chain-connection probabilities on nested observation balls
/// around the base point, for each target.
fn connect(c: &Config) -> Result<Report, CliError> {
    let x = c.base()?;
    let u = c.geometry.u[0];
    let mut r = Report::new("connect", vec!["y", "distance", "radius", "k", "p", "se", "covered", "degenerate", "delta_2cap"]);
    for (i, y) in c.targets()?.iter().enumerate() {
        let dist = (*y - x).norm();
        let radii: Vec<f64> = c.geometry.obs_factors.iter().map(|f| f * dist).collect();
        let mut per_cap = Vec::new();
        for cap in caps(c) {
            let probe = ConnectProbe {
                window: pair_window(x, *y, &c.relation_truncation(cap))?,
                x,
                y: *y,
                u,
                center: x,
                radii: radii.clone(),
                ks: c.geometry.ks.clone(),
                rule: LevelRule::Any,
                seed: row_seed(c.experiment.seed, i),
            };
            per_cap.push(connect_rows(&probe, &run_parallel(&probe, reps(c))));
        }
        for (j, row) in per_cap[0].iter().enumerate() {
            let vals: Vec<f64> = per_cap.iter().map(|rows| rows[j].estimate.value).collect();
            r.push(vec![
                (*y).into(),
                dist.into(),
                row.radius.into(),
                row.k.into(),
                row.estimate.value.into(),
                row.estimate.se.into(),
                row.covered.into(),
                row.degenerate.into(),
                delta(&vals),
            ]);
        }
    }
    Ok(r)
}

/// Log-log fit of a table from `relation`, `dbrw-hit`, `brw-hit` or
/// `intersect`.
fn fit(c: &Config) -> Result<Report, CliError> {
    let path = c.experiment.input.as_ref().unwrap();
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{path}: {e}")))?;
    let (columns, rows) = read_csv(&text)?;
    let col = |name: &str| columns.iter().position(|c| c == name);
    let bad = |m: String| CliError::Validation(format!("input: {m}"));
    let (xi, yi) = (col("x"), col("y"));
    let pi = col("p").or(col("mean")).ok_or_else(|| bad("no p column".into()))?;
    let si = col("se").ok_or_else(|| bad("no se column".into()))?;
    let origin = Point::origin(c.experiment.d);
    let mut parsed = Vec::new();
    for (n, row) in rows.iter().enumerate() {
        let pt = |i: usize| parse_point(&row[i]).ok_or_else(|| bad(format!("row {}: bad point {}", n + 1, row[i])));
        let (x, y) = match (xi, yi) {
            (Some(a), Some(b)) => (pt(a)?, pt(b)?),
            (Some(a), None) => (origin, pt(a)?),
            _ => return Err(bad("no x column".into())),
        };
        let num = |i: usize| row[i].parse::<f64>().map_err(|_| bad(format!("row {}: bad number {}", n + 1, row[i])));
        parsed.push(RelationRow {
            x,
            y,
            estimate: Estimate {
                value: num(pi)?,
                se: num(si)?,
                reps: 0,
            },
        });
    }
    let f = fit_exponent(&parsed)?;
    let mut r = Report::new(
        "fit",
        vec!["slope", "intercept", "ci_half_width", "alpha_hat", "r_squared", "used_rows", "excluded_rows"],
    );
    r.meta.push(("input".into(), path.clone()));
    r.meta.push(("input_sha256".into(), {
        use sha2::{Digest, Sha256};
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }));
    r.push(vec![
        f.slope.into(),
        f.intercept.into(),
        f.ci_half_width.into(),
        f.alpha_hat.into(),
        f.r_squared.into(),
        f.used_rows.into(),
        f.excluded_rows.into(),
    ]);
    Ok(r)
}
