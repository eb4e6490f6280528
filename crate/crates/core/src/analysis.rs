//! Finite-size-scaling analysis: static collapses for `(p_c, ν, γ)`,
//! curve crossings, algebraic fits `E = a L^κ + b`, and dynamic collapses of
//! the reference-qubit entropy in `t / L^z`.
//!
//! Collapse quality is shape-free: every rescaled point is compared with a
//! weighted straight line through its bracketing neighbours from the other
//! sizes (Houdayer and Hartmann), so no form of the scaling function is
//! assumed.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocols::conditional_average;

pub const P_C_BOUNDS: (f64, f64) = (0.0, 1.0);
pub const NU_BOUNDS: (f64, f64) = (0.3, 8.0);
pub const GAMMA_BOUNDS: (f64, f64) = (-1.0, 1.5);
pub const Z_BOUNDS: (f64, f64) = (0.1, 2.0);
pub const KAPPA_BOUNDS: (f64, f64) = (-4.0, 4.0);

/// Errors below this are treated as this, so noiseless data still has a
/// well-defined weighted objective.
const ERR_FLOOR: f64 = 1e-6;

/// Averaged observable at one `(L, p)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub size: usize,
    pub p: f64,
    pub mean: f64,
    /// Standard error of `mean`.
    pub err: f64,
    pub n: usize,
    /// Per-trajectory values, when available, for resampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl DataPoint {
    pub fn new(size: usize, p: f64, mean: f64, err: f64, n: usize) -> Self {
        Self { size, p, mean, err, n, samples: None }
    }

    pub fn from_samples(size: usize, p: f64, samples: Vec<f64>) -> Result<Self> {
        let (mean, err) = conditional_average(&samples)?;
        Ok(Self { size, p, mean, err, n: samples.len(), samples: Some(samples) })
    }
}

/// Points sorted by `(L, p)` with distinct keys.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    points: Vec<DataPoint>,
}

impl DataSet {
    pub fn new(mut points: Vec<DataPoint>) -> Result<Self> {
        for pt in &points {
            if !(pt.err >= 0.0) || !pt.mean.is_finite() || !pt.p.is_finite() {
                return Err(Error::InsufficientData(format!(
                    "bad point at L = {}, p = {}: mean {}, err {}",
                    pt.size, pt.p, pt.mean, pt.err
                )));
            }
        }
        points.sort_by(|a, b| a.size.cmp(&b.size).then(a.p.total_cmp(&b.p)));
        if let Some(w) = points.windows(2).find(|w| w[0].size == w[1].size && w[0].p == w[1].p) {
            return Err(Error::InsufficientData(format!(
                "duplicate point L = {}, p = {}",
                w[0].size, w[0].p
            )));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.points.iter().map(|p| p.size).collect();
        s.dedup();
        s
    }

    /// Keeps only points whose size passes `keep`.
    pub fn filter_sizes(&self, keep: impl Fn(usize) -> bool) -> DataSet {
        DataSet { points: self.points.iter().filter(|p| keep(p.size)).cloned().collect() }
    }

    /// Keeps only points with `lo <= p <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> DataSet {
        DataSet { points: self.points.iter().filter(|p| p.p >= lo && p.p <= hi).cloned().collect() }
    }

    fn n_distinct_p(&self) -> usize {
        let mut ps: Vec<f64> = self.points.iter().map(|p| p.p).collect();
        ps.sort_by(f64::total_cmp);
        ps.dedup();
        ps.len()
    }

    /// Same shape, new means and errors.
    fn with_values(&self, values: &[(f64, f64)]) -> DataSet {
        let points = self
            .points
            .iter()
            .zip(values)
            .map(|(pt, &(mean, err))| DataPoint { mean, err, samples: None, ..pt.clone() })
            .collect();
        DataSet { points }
    }
}

/// A rescaled point `(x, y ± dy)`.
#[derive(Clone, Copy, Debug)]
struct Scaled {
    x: f64,
    y: f64,
    dy: f64,
}

/// Houdayer-Hartmann quality of a family of curves, one per size, each
/// sorted by increasing `x`. Residuals are weighed by the point's own error
/// only: adding the variance of the interpolating line rewards rescalings
/// that blow up the errors of the neighbours, which gives spurious minima
/// along the direction the linear regime cannot resolve. Returns `None` if fewer than a third of the
/// points have bracketing neighbours on another curve.
fn master_curve_quality(curves: &[Vec<Scaled>]) -> Option<f64> {
    let (sum, used, total) = master_curve_terms(curves);
    if used == 0 || 3 * used < total {
        return None;
    }
    Some(sum / used as f64)
}

fn master_curve_terms(curves: &[Vec<Scaled>]) -> (f64, usize, usize) {
    let total: usize = curves.iter().map(Vec::len).sum();
    let mut sum = 0.0;
    let mut used = 0usize;
    for (ci, curve) in curves.iter().enumerate() {
        for pt in curve {
            let (mut k, mut kx, mut kxx, mut ky, mut kxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut count = 0;
            for (cj, other) in curves.iter().enumerate() {
                if cj == ci || other.len() < 2 {
                    continue;
                }
                let j = other.partition_point(|q| q.x < pt.x);
                if j == other.len() || (j == 0 && other[0].x > pt.x) {
                    continue;
                }
                let lo = if j == 0 { 0 } else { j - 1 };
                for q in [&other[lo], &other[lo + 1]] {
                    let w = 1.0 / (q.dy * q.dy);
                    k += w;
                    kx += w * q.x;
                    kxx += w * q.x * q.x;
                    ky += w * q.y;
                    kxy += w * q.x * q.y;
                    count += 1;
                }
            }
            if count < 2 {
                continue;
            }
            let det = k * kxx - kx * kx;
            let fit = if det > 1e-12 * k * kxx.max(1e-300) {
                (kxx * ky - kx * kxy) / det + pt.x * (k * kxy - kx * ky) / det
            } else {
                // all neighbours at the same abscissa
                ky / k
            };
            let r = pt.y - fit;
            sum += r * r / (pt.dy * pt.dy);
            used += 1;
        }
    }
    (sum, used, total)
}

/// Quality assigned when too few points overlap.
const NO_OVERLAP: f64 = 1e12;

/// `(p, mean, err)`.
type Point = (f64, f64, f64);

/// Size-grouped view used by the objective.
struct Grouped {
    /// `(L, points)`, sorted by `p` within each size.
    groups: Vec<(f64, Vec<Point>)>,
}

impl Grouped {
    fn new(data: &DataSet) -> Self {
        let mut map: BTreeMap<usize, Vec<Point>> = BTreeMap::new();
        for pt in data.points() {
            map.entry(pt.size).or_default().push((pt.p, pt.mean, pt.err.max(ERR_FLOOR)));
        }
        Self { groups: map.into_iter().map(|(l, v)| (l as f64, v)).collect() }
    }

    fn quality(&self, p_c: f64, nu: f64, gamma: f64) -> f64 {
        let curves: Vec<Vec<Scaled>> = self
            .groups
            .iter()
            .map(|(l, pts)| {
                let sx = l.powf(1.0 / nu);
                let sy = l.powf(-gamma);
                pts.iter()
                    .map(|&(p, m, e)| Scaled { x: (p - p_c) * sx, y: m * sy, dy: e * sy })
                    .collect()
            })
            .collect();
        master_curve_quality(&curves).unwrap_or(NO_OVERLAP)
    }
}

/// Master-curve residual of `data` rescaled to
/// `((p - p_c) L^{1/ν}, Q / L^γ)`. Smaller is better; of order 1 to 2 for
/// a collapse consistent with the error bars.
pub fn collapse_quality(data: &DataSet, p_c: f64, nu: f64, gamma: f64) -> f64 {
    Grouped::new(data).quality(p_c, nu, gamma)
}

/// Whether the amplitude exponent is fitted or held fixed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GammaMode {
    Free,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollapseOptions {
    pub gamma: GammaMode,
    /// Number of bootstrap resamples for the error bars.
    pub bootstrap: usize,
    pub seed: u64,
    /// Search range for `p_c`; defaults to the span of the data.
    pub p_c_range: Option<(f64, f64)>,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self { gamma: GammaMode::Free, bootstrap: 100, seed: 0, p_c_range: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub p_c: f64,
    pub nu: f64,
    pub gamma: f64,
    pub quality: f64,
    /// Bootstrap standard deviations; `gamma_err` is 0 when `gamma` is fixed.
    pub p_c_err: f64,
    pub nu_err: f64,
    pub gamma_err: f64,
    pub n_bootstrap: usize,
    /// The optimum touches a search bound.
    pub on_boundary: bool,
}

/// Finds `(p_c, ν, γ)` that best collapse `data` onto one curve.
pub fn fss_collapse(data: &DataSet, opts: &CollapseOptions) -> Result<CollapseParams> {
    let sizes = data.sizes();
    if sizes.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 sizes, got {}", sizes.len())));
    }
    if data.n_distinct_p() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 distinct p values, got {}",
            data.n_distinct_p()
        )));
    }
    let (p_lo, p_hi) = match opts.p_c_range {
        Some(r) => r,
        None => {
            let ps = data.points().iter().map(|p| p.p);
            (ps.clone().fold(f64::INFINITY, f64::min), ps.fold(f64::NEG_INFINITY, f64::max))
        }
    };
    let p_range = (p_lo.max(P_C_BOUNDS.0), p_hi.min(P_C_BOUNDS.1));
    let seed_guess = crossing_estimate(data).ok();
    let (best, quality) = collapse_search(data, opts.gamma, p_range, seed_guess)?;

    let n_boot = opts.bootstrap;
    let estimates: Vec<[f64; 3]> = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let resampled = resample(data, &mut rng);
            let g = Grouped::new(&resampled);
            let f = |v: &[f64]| objective(&g, opts.gamma, p_range, v);
            nelder_mead_restarted(f, &free_vector(opts.gamma, best), &steps(opts.gamma))
                .map(|(v, _)| full_params(opts.gamma, &v))
        })
        .collect::<Result<_>>()?;
    let sd = |k: usize| std_dev(&estimates.iter().map(|e| e[k]).collect::<Vec<_>>());

    let near = |v: f64, (lo, hi): (f64, f64)| (v - lo).abs() < 1e-4 || (hi - v).abs() < 1e-4;
    let on_boundary = near(best[0], p_range)
        || near(best[1], NU_BOUNDS)
        || (matches!(opts.gamma, GammaMode::Free) && near(best[2], GAMMA_BOUNDS));
    Ok(CollapseParams {
        p_c: best[0],
        nu: best[1],
        gamma: best[2],
        quality,
        p_c_err: sd(0),
        nu_err: sd(1),
        gamma_err: if matches!(opts.gamma, GammaMode::Free) { sd(2) } else { 0.0 },
        n_bootstrap: n_boot,
        on_boundary,
    })
}

fn objective(g: &Grouped, mode: GammaMode, p_range: (f64, f64), v: &[f64]) -> f64 {
    let [p_c, nu, gamma] = full_params(mode, v);
    let inside = |x: f64, (lo, hi): (f64, f64)| x >= lo && x <= hi;
    if !inside(p_c, p_range) || !inside(nu, NU_BOUNDS) || !inside(gamma, GAMMA_BOUNDS) {
        return f64::INFINITY;
    }
    g.quality(p_c, nu, gamma)
}

fn full_params(mode: GammaMode, v: &[f64]) -> [f64; 3] {
    match mode {
        GammaMode::Free => [v[0], v[1], v[2]],
        GammaMode::Fixed(g) => [v[0], v[1], g],
    }
}

fn free_vector(mode: GammaMode, full: [f64; 3]) -> Vec<f64> {
    match mode {
        GammaMode::Free => full.to_vec(),
        GammaMode::Fixed(_) => full[..2].to_vec(),
    }
}

fn steps(mode: GammaMode) -> Vec<f64> {
    match mode {
        GammaMode::Free => vec![0.01, 0.2, 0.1],
        GammaMode::Fixed(_) => vec![0.01, 0.2],
    }
}

/// Coarse grid then simplex refinement from the few best grid cells.
fn collapse_search(
    data: &DataSet,
    mode: GammaMode,
    p_range: (f64, f64),
    seed_guess: Option<f64>,
) -> Result<([f64; 3], f64)> {
    let g = Grouped::new(data);
    let np = 25;
    let mut p_grid: Vec<f64> =
        (0..np).map(|k| p_range.0 + (p_range.1 - p_range.0) * k as f64 / (np - 1) as f64).collect();
    if let Some(p) = seed_guess.filter(|p| *p >= p_range.0 && *p <= p_range.1) {
        p_grid.push(p);
    }
    let nu_grid: Vec<f64> =
        (0..20).map(|k| NU_BOUNDS.0 * (NU_BOUNDS.1 / NU_BOUNDS.0).powf(k as f64 / 19.0)).collect();
    let gamma_grid: Vec<f64> = match mode {
        GammaMode::Free => (0..11).map(|k| GAMMA_BOUNDS.0 + 0.25 * k as f64).collect(),
        GammaMode::Fixed(v) => vec![v],
    };
    let mut cells: Vec<([f64; 3], f64)> = Vec::new();
    for &p in &p_grid {
        for &nu in &nu_grid {
            for &gm in &gamma_grid {
                cells.push(([p, nu, gm], g.quality(p, nu, gm)));
            }
        }
    }
    cells.sort_by(|a, b| a.1.total_cmp(&b.1));
    let f = |v: &[f64]| objective(&g, mode, p_range, v);
    let mut best: Option<([f64; 3], f64)> = None;
    for (start, _) in cells.iter().take(4) {
        let (v, q) = nelder_mead_restarted(f, &free_vector(mode, *start), &steps(mode))?;
        if best.as_ref().is_none_or(|b| q < b.1) {
            best = Some((full_params(mode, &v), q));
        }
    }
    let best = best.expect("grid is non-empty");
    if best.1 >= NO_OVERLAP {
        return Err(Error::InsufficientData("curves never overlap after rescaling".into()));
    }
    Ok(best)
}

fn resample<R: Rng + ?Sized>(data: &DataSet, rng: &mut R) -> DataSet {
    let values: Vec<(f64, f64)> = data
        .points()
        .iter()
        .map(|pt| match &pt.samples {
            Some(s) if s.len() >= 2 => {
                let draw: Vec<f64> = (0..s.len()).map(|_| s[rng.random_range(0..s.len())]).collect();
                conditional_average(&draw).expect("non-empty resample")
            }
            _ => {
                let z: f64 = rng.sample(StandardNormal);
                (pt.mean + pt.err * z, pt.err)
            }
        })
        .collect();
    data.with_values(&values)
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

const NM_MAX_EVALS: usize = 20_000;

/// Downhill simplex. Out-of-domain points should evaluate to infinity.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for k in 0..n {
        let mut v = start.to_vec();
        v[k] += step[k];
        if !f(&v).is_finite() {
            v[k] = start[k] - step[k];
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evals = n + 1;
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= 1e-10 * values[0].abs().max(1e-10) && size < 1e-6
            || size < 1e-10
        {
            return Ok((simplex[0].clone(), values[0]));
        }
        if evals > NM_MAX_EVALS {
            return Err(Error::NoConvergence { iterations: evals });
        }

        let centroid: Vec<f64> =
            (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let towards = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = towards(-1.0);
        let fr = f(&xr);
        evals += 1;
        if fr < values[0] {
            let xe = towards(-2.0);
            let fe = f(&xe);
            evals += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = towards(-0.5);
            let fc = f(&xc);
            (xc, fc)
        } else {
            let xc = towards(0.5);
            let fc = f(&xc);
            (xc, fc)
        };
        evals += 1;
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink towards the best vertex
        for i in 1..=n {
            simplex[i] = simplex[i].iter().zip(&simplex[0]).map(|(x, b)| b + 0.5 * (x - b)).collect();
            values[i] = f(&simplex[i]);
        }
        evals += n;
    }
}

/// Simplex search restarted at its own optimum until it stops improving.
fn nelder_mead_restarted<F: Fn(&[f64]) -> f64>(
    f: F,
    start: &[f64],
    step: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let (mut x, mut fx) = nelder_mead(&f, start, step)?;
    for _ in 0..3 {
        let small: Vec<f64> = step.iter().map(|s| s * 0.1).collect();
        let (y, fy) = nelder_mead(&f, &x, &small)?;
        let improved = fy < fx - 1e-12 * fx.abs();
        if fy <= fx {
            x = y;
            fx = fy;
        }
        if !improved {
            break;
        }
    }
    Ok((x, fx))
}

/// Abscissae where the curves of each size pair cross, from linear
/// interpolation between adjacent shared `p` values. Where a pair crosses
/// more than once the steepest crossing is kept.
pub fn pairwise_crossings(data: &DataSet) -> Vec<(usize, usize, f64)> {
    let mut by_size: BTreeMap<usize, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for pt in data.points() {
        by_size.entry(pt.size).or_default().insert(pt.p.to_bits(), (pt.p, pt.mean));
    }
    let sizes: Vec<usize> = by_size.keys().copied().collect();
    let mut out = Vec::new();
    for (i, &l1) in sizes.iter().enumerate() {
        for &l2 in &sizes[i + 1..] {
            let (c1, c2) = (&by_size[&l1], &by_size[&l2]);
            let mut diffs: Vec<(f64, f64)> =
                c1.iter().filter_map(|(k, &(p, m1))| c2.get(k).map(|&(_, m2)| (p, m2 - m1))).collect();
            diffs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut best: Option<(f64, f64)> = None;
            for w in diffs.windows(2) {
                let ((pa, da), (pb, db)) = (w[0], w[1]);
                let crossing = if da == 0.0 {
                    Some(pa)
                } else if db == 0.0 {
                    Some(pb)
                } else if (da < 0.0) != (db < 0.0) {
                    Some(pa - da * (pb - pa) / (db - da))
                } else {
                    None
                };
                if let Some(pc) = crossing {
                    let slope = ((db - da) / (pb - pa)).abs();
                    if best.is_none_or(|(_, s)| slope > s) {
                        best = Some((pc, slope));
                    }
                }
            }
            if let Some((pc, _)) = best {
                out.push((l1, l2, pc));
            }
        }
    }
    out
}

/// Mean of [`pairwise_crossings`]; a starting guess for `p_c`.
pub fn crossing_estimate(data: &DataSet) -> Result<f64> {
    if data.sizes().len() < 2 {
        return Err(Error::InsufficientData("need at least 2 sizes".into()));
    }
    let c = pairwise_crossings(data);
    if c.is_empty() {
        return Err(Error::NoCrossing);
    }
    Ok(c.iter().map(|x| x.2).sum::<f64>() / c.len() as f64)
}

/// One size of an algebraic fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawPoint {
    pub size: usize,
    pub mean: f64,
    pub err: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub kappa: f64,
    pub b: f64,
    /// Weighted sum of squared residuals.
    pub residual: f64,
    pub kappa_err: f64,
    pub n_bootstrap: usize,
}

/// Weighted least squares for `a L^κ + b` at fixed `κ`: `(a, b, χ²)`.
fn linear_part(pts: &[(f64, f64, f64)], kappa: f64) -> (f64, f64, f64) {
    let (mut s, mut su, mut suu, mut sy, mut suy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(l, y, w) in pts {
        let u = l.powf(kappa);
        s += w;
        su += w * u;
        suu += w * u * u;
        sy += w * y;
        suy += w * u * y;
    }
    let det = s * suu - su * su;
    let (a, b) = if det.abs() > 1e-12 * s * suu {
        ((s * suy - su * sy) / det, (suu * sy - su * suy) / det)
    } else {
        (0.0, sy / s)
    };
    let chi2 = pts.iter().map(|&(l, y, w)| w * (y - a * l.powf(kappa) - b).powi(2)).sum();
    (a, b, chi2)
}

fn fit_kappa(pts: &[(f64, f64, f64)]) -> (f64, f64, f64, f64) {
    let chi = |k: f64| linear_part(pts, k).2;
    let n = 800;
    let h = (KAPPA_BOUNDS.1 - KAPPA_BOUNDS.0) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| KAPPA_BOUNDS.0 + h * i as f64).collect();
    let i_best = (0..=n).min_by(|&i, &j| chi(grid[i]).total_cmp(&chi(grid[j]))).unwrap();
    let (mut lo, mut hi) = (grid[i_best] - h, grid[i_best] + h);
    lo = lo.max(KAPPA_BOUNDS.0);
    hi = hi.min(KAPPA_BOUNDS.1);
    let k = golden_section(chi, lo, hi, 1e-12);
    let (a, b, r) = linear_part(pts, k);
    (a, k, b, r)
}

/// Minimizer of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc < fd {
        c
    } else {
        d
    }
}

/// Fits `E = a L^κ + b` by weighted least squares, `κ ∈ [-4, 4]`, with a
/// parametric bootstrap for the error on `κ`.
pub fn fit_power_law(points: &[PowerLawPoint], bootstrap: usize, seed: u64) -> Result<PowerLawFit> {
    let mut sizes: Vec<usize> = points.iter().map(|p| p.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 || sizes.len() != points.len() || sizes[0] == 0 {
        return Err(Error::DegenerateSizes(format!("need at least 4 distinct positive sizes, got {sizes:?}")));
    }
    let mut pts: Vec<(f64, f64, f64)> =
        points.iter().map(|p| (p.size as f64, p.mean, 1.0 / p.err.max(ERR_FLOOR).powi(2))).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (a, kappa, b, residual) = fit_kappa(&pts);

    let kappas: Vec<f64> = (0..bootstrap)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let noisy: Vec<(f64, f64, f64)> = points
                .iter()
                .map(|p| {
                    let z: f64 = rng.sample(StandardNormal);
                    (p.size as f64, p.mean + p.err * z, 1.0 / p.err.max(ERR_FLOOR).powi(2))
                })
                .collect();
            fit_kappa(&noisy).1
        })
        .collect();
    Ok(PowerLawFit { a, kappa, b, residual, kappa_err: std_dev(&kappas), n_bootstrap: bootstrap })
}

/// Reference-qubit entropy versus time for one size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicSeries {
    pub size: usize,
    /// Mean at `t = 0, 1, ...`.
    pub mean: Vec<f64>,
    pub err: Vec<f64>,
    /// Per-trajectory series, when available, for resampling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Vec<Vec<f64>>>,
}

impl DynamicSeries {
    pub fn new(size: usize, mean: Vec<f64>, err: Vec<f64>) -> Result<Self> {
        if mean.len() != err.len() {
            return Err(Error::LengthMismatch { left: mean.len(), right: err.len() });
        }
        if mean.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { size, mean, err, trajectories: None })
    }

    /// Averages equal-length per-trajectory series.
    pub fn from_trajectories(size: usize, trajectories: Vec<Vec<f64>>) -> Result<Self> {
        let len = trajectories.first().ok_or(Error::EmptySample)?.len();
        if let Some(bad) = trajectories.iter().find(|s| s.len() != len) {
            return Err(Error::LengthMismatch { left: len, right: bad.len() });
        }
        let (mean, err) = (0..len)
            .map(|t| conditional_average(&trajectories.iter().map(|s| s[t]).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .unzip();
        Ok(Self { size, mean, err, trajectories: Some(trajectories) })
    }

    fn resampled<R: Rng + ?Sized>(&self, rng: &mut R) -> DynamicSeries {
        match &self.trajectories {
            Some(tr) if tr.len() >= 2 => {
                let draw: Vec<Vec<f64>> = (0..tr.len()).map(|_| tr[rng.random_range(0..tr.len())].clone()).collect();
                let mut s = DynamicSeries::from_trajectories(self.size, draw).expect("same shape");
                s.trajectories = None;
                s
            }
            _ => {
                let mean = self
                    .mean
                    .iter()
                    .zip(&self.err)
                    .map(|(m, e)| m + e * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                DynamicSeries { size: self.size, mean, err: self.err.clone(), trajectories: None }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DynamicCollapseParams {
    pub z: f64,
    pub quality: f64,
    pub z_err: f64,
    pub n_bootstrap: usize,
    pub on_boundary: bool,
}

/// Options for [`dynamic_collapse`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicOptions {
    /// Only points with `window.0 <= S_R(t) / S_R(0) <= window.1` enter the
    /// residual. The upper cut drops the size-independent first steps; the
    /// lower one drops the purified tail, whose standard error is zero.
    pub window: (f64, f64),
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for DynamicOptions {
    fn default() -> Self {
        Self { window: (0.02, 0.5), bootstrap: 100, seed: 0 }
    }
}

/// Master-curve residual of the series plotted against `t / L^z`, over the
/// points inside `window` (relative to each series' initial value).
pub fn dynamic_quality(series: &[DynamicSeries], z: f64, window: (f64, f64)) -> f64 {
    let mut sorted: Vec<&DynamicSeries> = series.iter().collect();
    sorted.sort_by_key(|s| s.size);
    let curves: Vec<Vec<Scaled>> = sorted
        .iter()
        .map(|s| {
            let scale = (s.size as f64).powf(-z);
            let (lo, hi) = (window.0 * s.mean[0], window.1 * s.mean[0]);
            s.mean
                .iter()
                .zip(&s.err)
                .enumerate()
                .filter(|(_, (&y, _))| (lo..=hi).contains(&y))
                .map(|(t, (&y, &e))| Scaled { x: t as f64 * scale, y, dy: e.max(ERR_FLOOR) })
                .collect()
        })
        .collect();
    master_curve_quality(&curves).unwrap_or(NO_OVERLAP)
}

fn best_z(series: &[DynamicSeries], window: (f64, f64)) -> (f64, f64) {
    let f = |z: f64| dynamic_quality(series, z, window);
    let h = 0.01;
    let n = ((Z_BOUNDS.1 - Z_BOUNDS.0) / h).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| Z_BOUNDS.0 + h * i as f64).collect();
    let i = (0..=n).min_by(|&i, &j| f(grid[i]).total_cmp(&f(grid[j]))).unwrap();
    let z = golden_section(f, (grid[i] - h).max(Z_BOUNDS.0), (grid[i] + h).min(Z_BOUNDS.1), 1e-7);
    (z, f(z))
}

/// Finds `z` collapsing `S_R(t)` onto `f(t / L^z)`, with no amplitude
/// rescaling. Each series must fall by at least 10% of its initial value.
pub fn dynamic_collapse(series: &[DynamicSeries], opts: &DynamicOptions) -> Result<DynamicCollapseParams> {
    let DynamicOptions { window, bootstrap, seed } = *opts;
    let mut sizes: Vec<usize> = series.iter().map(|s| s.size).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 || sizes.len() != series.len() {
        return Err(Error::InsufficientData(format!("need series at 3 or more distinct sizes, got {sizes:?}")));
    }
    for s in series {
        let lowest = s.mean.iter().copied().fold(f64::INFINITY, f64::min);
        if !(lowest <= 0.9 * s.mean[0]) {
            return Err(Error::InsufficientDecay { size: s.size });
        }
    }
    let (z, quality) = best_z(series, window);
    let zs: Vec<f64> = (0..bootstrap)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (b as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let resampled: Vec<DynamicSeries> = series.iter().map(|s| s.resampled(&mut rng)).collect();
            best_z(&resampled, window).0
        })
        .collect();
    let on_boundary = (z - Z_BOUNDS.0).abs() < 1e-4 || (Z_BOUNDS.1 - z).abs() < 1e-4;
    Ok(DynamicCollapseParams { z, quality, z_err: std_dev(&zs), n_bootstrap: bootstrap, on_boundary })
}
