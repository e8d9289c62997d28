//! Derivative-free minimization of tuning criteria.
//!
//! One-parameter criteria are minimized by Brent's method (golden section
//! with parabolic interpolation) run separately on equal sub-intervals of the
//! search range. Two-parameter criteria go through a seeded global search: a
//! coarse grid scan, a simulated-annealing walk, and Nelder-Mead polishing of
//! the most promising points.
//!
//! Objectives may return `+inf` (or NaN, treated as `+inf`) to mark
//! infeasible points. The returned point is always one that was evaluated, so
//! its reported value is exactly `f` at that point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::components::OrthoBasis;
use crate::error::{Result, WocrError};
use crate::weights::{ComponentOrdering, WeightFamily, WeightSpec};

pub const DEFAULT_SUBDIVISIONS: usize = 8;
pub const DEFAULT_BUDGET_2D: usize = 2000;
/// Relative interval tolerance: `tol = DEFAULT_REL_TOL * (hi - lo)`.
pub const DEFAULT_REL_TOL: f64 = 1e-6;
/// Ridge search cap as a multiple of the largest squared statistic.
pub const LAMBDA_RANGE_FACTOR: f64 = 10.0;
pub const A_RANGE: (f64, f64) = (0.1, 200.0);

const GOLDEN: f64 = 0.381_966_011_250_105_1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchRange {
    pub lo: f64,
    pub hi: f64,
    pub subdivisions: usize,
}

impl SearchRange {
    pub fn new(lo: f64, hi: f64, subdivisions: usize) -> Result<Self> {
        let r = Self {
            lo,
            hi,
            subdivisions,
        };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() || self.subdivisions == 0
        {
            return Err(WocrError::InvalidRange {
                lo: self.lo,
                hi: self.hi,
                subdivisions: self.subdivisions,
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn default_tol(&self) -> f64 {
        DEFAULT_REL_TOL * self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn with_subdivisions(mut self, subdivisions: usize) -> Self {
        self.subdivisions = subdivisions;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    /// Minimizer; one coordinate per tuned parameter.
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<(Vec<f64>, f64)>>,
}

/// Wraps an objective, counting calls and keeping the first best point.
struct Tracker<F> {
    f: F,
    evaluations: usize,
    best: Option<(Vec<f64>, f64)>,
    trace: Option<Vec<(Vec<f64>, f64)>>,
}

impl<F: FnMut(&[f64]) -> f64> Tracker<F> {
    fn new(f: F, record: bool) -> Self {
        Self {
            f,
            evaluations: 0,
            best: None,
            trace: record.then(Vec::new),
        }
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let raw = (self.f)(x);
        let v = if raw.is_nan() { f64::INFINITY } else { raw };
        self.evaluations += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push((x.to_vec(), v));
        }
        let better = match &self.best {
            None => true,
            Some((_, b)) => v < *b,
        };
        if better {
            self.best = Some((x.to_vec(), v));
        }
        v
    }

    fn finish(self) -> Result<TuneResult> {
        match self.best {
            Some((point, value)) if value < f64::INFINITY => Ok(TuneResult {
                point,
                objective_value: value,
                evaluations: self.evaluations,
                trace: self.trace,
            }),
            _ => Err(WocrError::AllInfinite),
        }
    }
}

/// Bounded scalar minimization over `range`, bracket by bracket.
pub fn minimize_1d<F>(f: F, range: &SearchRange, tol: f64) -> Result<TuneResult>
where
    F: FnMut(f64) -> f64,
{
    minimize_1d_impl(f, range, tol, false)
}

/// As [`minimize_1d`], also returning every evaluated point.
pub fn minimize_1d_traced<F>(f: F, range: &SearchRange, tol: f64) -> Result<TuneResult>
where
    F: FnMut(f64) -> f64,
{
    minimize_1d_impl(f, range, tol, true)
}

fn minimize_1d_impl<F>(mut f: F, range: &SearchRange, tol: f64, record: bool) -> Result<TuneResult>
where
    F: FnMut(f64) -> f64,
{
    range.validate()?;
    if !(tol > 0.0) {
        return Err(WocrError::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let mut tracker = Tracker::new(|x: &[f64]| f(x[0]), record);
    let k = range.subdivisions;
    let step = range.width() / k as f64;
    let edges: Vec<f64> = (0..=k)
        .map(|i| if i == k { range.hi } else { range.lo + step * i as f64 })
        .collect();
    for &e in &edges {
        tracker.eval(&[e]);
    }
    for w in edges.windows(2) {
        brent_bracket(&mut tracker, w[0], w[1], tol);
    }
    tracker.finish()
}

/// Brent's localmin on `[lo, hi]`.
fn brent_bracket<F: FnMut(&[f64]) -> f64>(tracker: &mut Tracker<F>, lo: f64, hi: f64, tol: f64) {
    let eps = f64::EPSILON.sqrt();
    let (mut a, mut b) = (lo, hi);
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = tracker.eval(&[x]);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e) = (0.0_f64, 0.0_f64);
    for _ in 0..500 {
        let xm = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 && fx.is_finite() && fw.is_finite() && fv.is_finite() {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_prev = e;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = tracker.eval(&[u]);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
}

/// Seeded global minimization over a box.
///
/// Every point of the `g x g` scan grid (`g = 20` for budgets of at least
/// 1000) is evaluated first, so the result is never worse than that grid.
pub fn minimize_2d<F>(
    f: F,
    range_a: &SearchRange,
    range_c: &SearchRange,
    budget: usize,
    seed: u64,
) -> Result<TuneResult>
where
    F: FnMut(f64, f64) -> f64,
{
    minimize_2d_impl(f, range_a, range_c, budget, seed, false)
}

pub fn minimize_2d_traced<F>(
    f: F,
    range_a: &SearchRange,
    range_c: &SearchRange,
    budget: usize,
    seed: u64,
) -> Result<TuneResult>
where
    F: FnMut(f64, f64) -> f64,
{
    minimize_2d_impl(f, range_a, range_c, budget, seed, true)
}

fn minimize_2d_impl<F>(
    mut f: F,
    range_a: &SearchRange,
    range_c: &SearchRange,
    budget: usize,
    seed: u64,
    record: bool,
) -> Result<TuneResult>
where
    F: FnMut(f64, f64) -> f64,
{
    range_a.validate()?;
    range_c.validate()?;
    if budget < 100 {
        return Err(WocrError::InvalidConfig(format!("2-D budget must be >= 100, got {budget}")));
    }
    let (a0, aw) = (range_a.lo, range_a.width());
    let (c0, cw) = (range_c.lo, range_c.width());
    // unit-square coordinates
    let to_box = move |t: &[f64]| -> (f64, f64) {
        let ta = t[0].clamp(0.0, 1.0);
        let tc = t[1].clamp(0.0, 1.0);
        let a = if ta == 1.0 { a0 + aw } else { a0 + aw * ta };
        let c = if tc == 1.0 { c0 + cw } else { c0 + cw * tc };
        (a, c)
    };
    let mut tracker = Tracker::new(
        |t: &[f64]| {
            let (a, c) = to_box(t);
            f(a, c)
        },
        record,
    );

    let g = if budget >= 1000 {
        20
    } else {
        ((0.4 * budget as f64).sqrt().floor() as usize).max(4)
    };
    let mut grid: Vec<(f64, [f64; 2])> = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let t = [i as f64 / (g - 1) as f64, j as f64 / (g - 1) as f64];
            let v = tracker.eval(&t);
            grid.push((v, t));
        }
    }
    let finite: Vec<f64> = grid.iter().map(|p| p.0).filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return Err(WocrError::AllInfinite);
    }

    let remaining = budget.saturating_sub(tracker.evaluations);
    let anneal_budget = remaining / 2;
    let polish_budget = remaining - anneal_budget;

    // annealing walk from the best grid point
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = {
        let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut sorted = finite.clone();
        sorted.sort_by(|x, y| x.total_cmp(y));
        let median = sorted[sorted.len() / 2];
        (median - lo).abs().max(1e-12 * lo.abs().max(1.0))
    };
    let start = grid
        .iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|p| p.1)
        .expect("non-empty grid");
    let mut current = start;
    let mut f_current = grid.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let mut anneal_best = (f_current, current);
    let t0 = spread;
    let qv = 2.62_f64;
    let t_ratio = 2f64.powf(qv - 1.0) - 1.0;
    for k in 1..=anneal_budget {
        let temp = t0 * t_ratio / ((1.0 + k as f64).powf(qv - 1.0) - 1.0);
        let scale = (temp / t0).min(1.0).max(1e-6) * 0.5;
        let mut cand = current;
        for coord in cand.iter_mut() {
            let u: f64 = rng.random::<f64>() - 0.5;
            let step = scale * (std::f64::consts::PI * u).tan();
            *coord = reflect_unit(*coord + step);
        }
        let fc = tracker.eval(&cand);
        let accept = if fc <= f_current {
            true
        } else if fc.is_finite() && f_current.is_finite() {
            let p = (-(fc - f_current) / temp.max(1e-300)).exp();
            rng.random::<f64>() < p
        } else {
            !f_current.is_finite()
        };
        if accept {
            current = cand;
            f_current = fc;
        }
        if fc < anneal_best.0 {
            anneal_best = (fc, cand);
        }
    }

    // Nelder-Mead polish from the best few distinct starts
    let mut starts: Vec<[f64; 2]> = vec![anneal_best.1];
    let mut ranked = grid.clone();
    ranked.sort_by(|x, y| x.0.total_cmp(&y.0));
    let cell = 1.0 / (g - 1) as f64;
    for (v, t) in ranked {
        if starts.len() >= 4 || !v.is_finite() {
            break;
        }
        let far = starts
            .iter()
            .all(|s| (s[0] - t[0]).abs() > 1.5 * cell || (s[1] - t[1]).abs() > 1.5 * cell);
        if far {
            starts.push(t);
        }
    }
    let per_start = polish_budget / starts.len().max(1);
    for s in starts {
        nelder_mead(&mut tracker, s, cell, per_start);
    }
    let mut res = tracker.finish()?;
    let unit_to_box = |t: &[f64]| {
        let (a, c) = to_box(t);
        vec![a, c]
    };
    res.point = unit_to_box(&res.point);
    if let Some(trace) = res.trace.as_mut() {
        for (pt, _) in trace.iter_mut() {
            *pt = unit_to_box(pt);
        }
    }
    Ok(res)
}

fn reflect_unit(mut t: f64) -> f64 {
    if !t.is_finite() {
        return 0.5;
    }
    t = t.rem_euclid(2.0);
    if t > 1.0 {
        2.0 - t
    } else {
        t
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    tracker: &mut Tracker<F>,
    start: [f64; 2],
    size: f64,
    budget: usize,
) {
    if budget < 4 {
        return;
    }
    let clamp = |p: [f64; 2]| [p[0].clamp(0.0, 1.0), p[1].clamp(0.0, 1.0)];
    let offset = |p: [f64; 2], i: usize| {
        let mut q = p;
        q[i] = if q[i] + size <= 1.0 { q[i] + size } else { q[i] - size };
        q
    };
    let mut simplex = [start, offset(start, 0), offset(start, 1)];
    let mut vals = [0.0; 3];
    for (v, p) in vals.iter_mut().zip(simplex.iter()) {
        *v = tracker.eval(p);
    }
    let mut used = 3;
    while used + 4 <= budget {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
        simplex = [simplex[idx[0]], simplex[idx[1]], simplex[idx[2]]];
        vals = [vals[idx[0]], vals[idx[1]], vals[idx[2]]];
        let diam = (0..2)
            .map(|k| {
                let lo = simplex.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
                let hi = simplex.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
                hi - lo
            })
            .fold(0.0, f64::max);
        if diam < 1e-12 {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            clamp([
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ])
        };
        let xr = along(-1.0);
        let fr = tracker.eval(&xr);
        used += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = tracker.eval(&xe);
            used += 1;
            if fe < fr {
                simplex[2] = xe;
                vals[2] = fe;
            } else {
                simplex[2] = xr;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = xr;
            vals[2] = fr;
        } else {
            let (xc, fc) = if fr < vals[2] {
                let p = along(-0.5);
                (p, tracker.eval(&p))
            } else {
                let p = along(0.5);
                (p, tracker.eval(&p))
            };
            used += 1;
            if fc < vals[2].min(fr) {
                simplex[2] = xc;
                vals[2] = fc;
            } else {
                // shrink toward the best vertex
                for i in 1..3 {
                    simplex[i] = [
                        simplex[0][0] + 0.5 * (simplex[i][0] - simplex[0][0]),
                        simplex[0][1] + 0.5 * (simplex[i][1] - simplex[0][1]),
                    ];
                    vals[i] = tracker.eval(&simplex[i]);
                }
                used += 2;
            }
        }
    }
}

/// Default search ranges for a weight specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultRanges {
    /// Ridge `lambda` range, or the expit threshold `c` range.
    pub primary: SearchRange,
    /// Expit scale `a` range, used when `a` is tuned.
    pub scale: SearchRange,
}

/// Search ranges that contain every meaningful tuning value for `spec`.
pub fn default_range(spec: &WeightSpec, basis: &OrthoBasis) -> DefaultRanges {
    let k = DEFAULT_SUBDIVISIONS;
    let d = basis.d();
    let d1 = d[0];
    let dm = d[d.len() - 1];
    let max_g2 = basis.gamma().iter().map(|g| g * g).fold(0.0, f64::max);
    let min_g2 = basis.gamma().iter().map(|g| g * g).fold(f64::INFINITY, f64::min);
    let (lo, hi) = match (spec.family, spec.ordering) {
        (WeightFamily::RidgeShrink, ComponentOrdering::SingularValue) => {
            (0.0, LAMBDA_RANGE_FACTOR * d1 * d1)
        }
        (WeightFamily::RidgeShrink, ComponentOrdering::GammaSquared) => {
            (0.0, LAMBDA_RANGE_FACTOR * max_g2.max(f64::MIN_POSITIVE).max(1e-300))
        }
        (WeightFamily::Expit, ComponentOrdering::SingularValue) => {
            let delta = 0.01 * (d1 - dm + 1.0);
            (dm - delta, d1 + delta)
        }
        (WeightFamily::Expit, ComponentOrdering::GammaSquared) => {
            let delta = 0.01 * (max_g2 - min_g2 + 1.0);
            (0.0, max_g2 + delta)
        }
    };
    let hi = if hi > lo { hi } else { lo + 1.0 };
    DefaultRanges {
        primary: SearchRange {
            lo,
            hi,
            subdivisions: k,
        },
        scale: SearchRange {
            lo: A_RANGE.0,
            hi: A_RANGE.1,
            subdivisions: k,
        },
    }
}
