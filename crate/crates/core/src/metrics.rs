//! Mixing and dissipation times measured on the grid, Monte Carlo ensembles, and slope fits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::n_mix;
use crate::bump::{eigen_constants, BumpKind};
use crate::density::{indicator_density, Evolution, GridDensity};
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::maps::{perimeter_volume_h, shift_partition, wrap_unit, BernoulliMap, CylinderSet, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    DensityWorstCase,
    PowerIteration,
    WitnessIS,
    WitnessF0,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DensityWorstCase => "density_worst_case",
            Method::PowerIteration => "power_iteration",
            Method::WitnessIS => "witness_I_s",
            Method::WitnessF0 => "witness_f0",
            Method::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TimeMeasurement {
    pub epsilon: f64,
    pub delta: f64,
    pub t: usize,
    pub method: Method,
    /// Residual after `n` steps, `n = 0..=t`.
    pub residuals: Vec<f64>,
}

/// First `n ≥ 1` with `curve[n] ≤ delta`.
pub fn first_below(curve: &[f64], delta: f64) -> Option<usize> {
    curve.iter().enumerate().skip(1).find(|(_, &v)| v <= delta).map(|(n, _)| n)
}

#[derive(Clone, Debug)]
pub struct MixOptions {
    /// Number of point-mass starts.
    pub starts: usize,
    /// Include the cylinder witness `I_s`.
    pub witness: bool,
    /// Step cap; defaults to `8 N_mix` (or `8/ε²` for maps that do not expand).
    pub horizon: Option<usize>,
    /// Keep evolving until the envelope is below this as well as below `δ`.
    pub floor: Option<f64>,
}

impl Default for MixOptions {
    fn default() -> Self {
        Self { starts: 32, witness: true, horizon: None, floor: None }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct WitnessCheck {
    pub word_len: usize,
    pub n: i64,
    pub n1: i64,
    /// `N − N_1`; the check is vacuous when this is not positive.
    pub step: i64,
    pub tv: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MixMeasurement {
    pub measurement: TimeMeasurement,
    /// Worst-case TV over the family after `n` steps.
    pub envelope: Vec<f64>,
    pub member_times: Vec<(String, usize)>,
    pub horizon: usize,
    pub witness: Option<WitnessCheck>,
}

impl MixMeasurement {
    /// Family-worst-case `t_mix` at another threshold covered by the evolution.
    pub fn t_at(&self, delta: f64) -> Option<usize> {
        first_below(&self.envelope, delta)
    }
}

fn default_eta(kernel: &dyn Kernel) -> f64 {
    let kind = BumpKind::for_kernel(kernel);
    match eigen_constants(kernel, kind) {
        Ok((a, gamma)) => (2.0 * a).powf(1.0 / gamma),
        Err(_) => 1.0,
    }
}

pub fn default_horizon(map: &BernoulliMap, kernel: &dyn Kernel) -> usize {
    let eps = kernel.epsilon();
    match n_mix(map, eps, default_eta(kernel)) {
        Ok(n) => (8 * n.max(2)) as usize,
        Err(_) => (8.0 / (eps * eps)).ceil() as usize,
    }
}

/// Start cells spread over the torus: `(i + ½)/n` in one dimension, a Kronecker
/// sequence otherwise.
pub fn start_cells(d: usize, m: usize, n: usize) -> Vec<Vec<usize>> {
    const ALPHA: [f64; 4] = [0.414_213_562_373_095_1, 0.732_050_807_568_877_2, 0.236_067_977_499_789_7, 0.645_751_311_064_590_6];
    (0..n)
        .map(|i| {
            (0..d)
                .map(|k| {
                    let x = if d == 1 { (i as f64 + 0.5) / n as f64 } else { ((i as f64 + 0.5) * ALPHA[k % 4]).fract() };
                    ((x * m as f64) as usize).min(m - 1)
                })
                .collect()
        })
        .collect()
}

/// Cylinder witness parameters `(N, N_1)` for threshold `δ`.
pub fn witness_lengths(map: &BernoulliMap, epsilon: f64, delta: f64) -> Result<(i64, i64)> {
    let lam = crate::bounds::lambda_p_delta(map, 1, 1.0 - delta)?;
    let d = map.dim() as f64;
    let ln_p = map.p_max().ln();
    Ok(((d * (epsilon * lam).ln() / ln_p).ceil() as i64, (((1.0 - delta) / 2.0).ln() / ln_p).ceil() as i64))
}

pub fn measure_tmix(map: &BernoulliMap, kernel: &dyn Kernel, delta: f64, m: usize, opts: &MixOptions) -> Result<MixMeasurement> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ must lie in (0,1), got {delta}")));
    }
    if opts.starts == 0 && !opts.witness {
        return Err(Error::Domain("initial family is empty".into()));
    }
    let eps = kernel.epsilon();
    let d = map.dim();
    let evo = Evolution::new(map, kernel, m)?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(map, kernel));
    let target = opts.floor.map_or(delta, |f| f.min(delta));

    let mut family: Vec<(String, GridDensity)> = start_cells(d, m, opts.starts)
        .into_iter()
        .map(|c| (format!("cell{c:?}"), GridDensity::point_mass(d, m, &c)))
        .collect();
    let mut witness_plan = None;
    if opts.witness && map.p_max() < 1.0 {
        let (n, n1) = witness_lengths(map, eps, delta)?;
        let s = Word::repeated(map.heaviest_branch(), n.max(0) as usize);
        if let Ok(ind) = indicator_density(map, &s, m) {
            family.push((format!("I_s|{}|", s.len()), ind));
            witness_plan = Some((s.len(), n, n1));
        }
    }

    let curves: Vec<Vec<f64>> = family
        .par_iter()
        .map(|(_, f0)| -> Result<Vec<f64>> {
            let mut f = f0.clone();
            let mut curve = vec![f.distances().tv];
            while curve.len() <= horizon {
                f = evo.step_t_star(&f)?;
                let tv = f.distances().tv;
                curve.push(tv);
                if tv <= target {
                    break;
                }
            }
            Ok(curve)
        })
        .collect::<Result<_>>()?;

    let len = curves.iter().map(Vec::len).max().unwrap_or(1);
    // TV is nonincreasing under T*, so a finished curve stays below its last value
    let envelope: Vec<f64> = (0..len)
        .map(|n| curves.iter().map(|c| c[n.min(c.len() - 1)]).fold(0.0, f64::max))
        .collect();
    let member_times = family
        .iter()
        .zip(&curves)
        .map(|((name, _), c)| (name.clone(), first_below(c, delta).unwrap_or(usize::MAX)))
        .collect();
    let t = first_below(&envelope, delta)
        .ok_or(Error::NonConvergence { horizon, residual: *envelope.last().unwrap_or(&1.0) })?;
    if let Some(floor) = opts.floor {
        if first_below(&envelope, floor).is_none() {
            return Err(Error::NonConvergence { horizon, residual: *envelope.last().unwrap_or(&1.0) });
        }
    }
    let witness = witness_plan.map(|(word_len, n, n1)| {
        let curve = curves.last().expect("witness is the last member");
        let step = n - n1;
        let tv = curve[(step.max(0) as usize).min(curve.len() - 1)];
        WitnessCheck { word_len, n, n1, step, tv, pass: step <= 0 || tv >= delta }
    });
    Ok(MixMeasurement {
        measurement: TimeMeasurement {
            epsilon: eps,
            delta,
            t,
            method: Method::DensityWorstCase,
            residuals: envelope[..=t].to_vec(),
        },
        envelope,
        member_times,
        horizon,
        witness,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct NormEstimate {
    pub n: usize,
    pub value: f64,
    pub rounds: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct DisOptions {
    pub seeds: Vec<u64>,
    pub tol: f64,
    pub max_rounds: usize,
    pub horizon: Option<usize>,
    /// Level of the two-valued witness; `min |s|` over the partition at scale `ε Λ_{2,1−δ}` when absent.
    pub witness_level: Option<usize>,
    /// Stop iterating at step `n` once an estimate exceeds `δ`. Every estimate is a lower
    /// bound on `‖T*^n‖`, so this does not change `t_dis`, only the recorded norms.
    pub stop_above_delta: bool,
}

impl Default for DisOptions {
    fn default() -> Self {
        Self { seeds: vec![1, 2, 3], tol: 1e-6, max_rounds: 100, horizon: None, witness_level: None, stop_above_delta: true }
    }
}

fn random_mean_zero(d: usize, m: usize, seed: u64) -> GridDensity {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.pow(d as u32);
    let v = GridDensity::new(d, m, (0..n).map(|_| rng.random::<f64>() - 0.5).collect()).expect("sizes agree");
    let v = v.centered();
    let norm = v.norm_l2();
    v.scale(1.0 / norm)
}

/// `‖T*^n‖` on mean-zero fields by power iteration on `T^n T*^n`, best of several seeds.
pub fn operator_norm(evo: &Evolution, n: usize, opts: &DisOptions) -> Result<NormEstimate> {
    norm_estimate(evo, n, opts, f64::INFINITY)
}

/// As [`operator_norm`], returning as soon as some estimate exceeds `stop`.
fn norm_estimate(evo: &Evolution, n: usize, opts: &DisOptions, stop: f64) -> Result<NormEstimate> {
    let (d, m) = (evo.dim(), evo.size());
    let run = |seed: u64| -> Result<NormEstimate> {
        let mut v = random_mean_zero(d, m, seed);
        let mut prev = 0.0;
        let mut value = 0.0;
        for round in 1..=opts.max_rounds {
            let w = evo.t_star_power(&v, n)?;
            let u = evo.t_power(&w, n)?.centered();
            let un = u.norm_l2();
            // ‖T^n T*^n v‖ ≤ ‖T*^n‖² for unit v
            value = un.sqrt().max(w.norm_l2());
            if un == 0.0 {
                return Ok(NormEstimate { n, value: 0.0, rounds: round, converged: true });
            }
            if (value - prev).abs() <= opts.tol * value {
                return Ok(NormEstimate { n, value, rounds: round, converged: true });
            }
            if value > stop {
                return Ok(NormEstimate { n, value, rounds: round, converged: false });
            }
            prev = value;
            v = u.scale(1.0 / un);
        }
        Ok(NormEstimate { n, value, rounds: opts.max_rounds, converged: false })
    };
    let (&first, rest) = opts.seeds.split_first().ok_or_else(|| Error::Domain("no power-iteration seeds".into()))?;
    let head = run(first)?;
    // the first seed alone settles the step when it is already above the threshold
    if head.value > stop {
        return Ok(head);
    }
    let mut runs = vec![head];
    runs.extend(rest.par_iter().map(|&s| run(s)).collect::<Result<Vec<_>>>()?);
    let best = runs
        .iter()
        .max_by(|a, b| a.value.total_cmp(&b.value))
        .expect("at least one seed")
        .clone();
    Ok(NormEstimate { converged: runs.iter().all(|r| r.converged), ..best })
}

#[derive(Clone, Debug, Serialize)]
pub struct DisMeasurement {
    pub measurement: TimeMeasurement,
    pub norms: Vec<NormEstimate>,
    pub witness_level: usize,
    /// `‖T*^n f_0‖ / ‖f_0‖` for the two-valued witness.
    pub witness_curve: Vec<f64>,
    pub witness_time: Option<usize>,
    /// `‖T*^N f_0‖ ≥ δ ‖f_0‖` at `N = witness_level`, which gives `t_dis(δ) ≥ N`.
    pub witness_bound_ok: bool,
}

/// Mean-zero witness equal to `1` where `φ^level(x) ∈ E_1` and `−p_1/p_2` where `φ^level(x) ∈ E_2`.
pub fn dissipation_witness(map: &BernoulliMap, level: usize, m: usize) -> Result<GridDensity> {
    if map.branch_count() < 2 {
        return Err(Error::Domain("the witness needs at least two branches".into()));
    }
    let d = map.dim();
    let finest = map.p_min().powf((level + 1) as f64 / d as f64);
    if finest * (m as f64) < 1.0 {
        return Err(Error::Resolution(format!("level {level} cylinders are finer than 1/{m}")));
    }
    let w = map.weights();
    let low = -w[0] / w[1];
    let g = GridDensity::zeros(d, m);
    let values = (0..g.cell_count())
        .map(|flat| {
            let mut x = g.cell_center(flat);
            for _ in 0..level {
                x = map.apply(&x);
            }
            match map.branch_of(&x) {
                0 => 1.0,
                1 => low,
                _ => 0.0,
            }
        })
        .collect();
    GridDensity::new(d, m, values)
}

/// `N = min |s|` over the partition at scale `ε Λ_{2,1−δ}`, capped by the grid resolution.
fn default_witness_level(map: &BernoulliMap, eps: f64, delta: f64, m: usize) -> Result<usize> {
    let lam = crate::bounds::lambda_p_delta(map, 2, 1.0 - delta)?;
    let shortest = map.partition(eps * lam)?.iter().map(|c| c.word.len()).min().unwrap_or(0);
    let resolved = ((m as f64).ln() * map.dim() as f64 / -map.p_min().ln()).floor() as usize;
    Ok(shortest.min(resolved.saturating_sub(1)))
}

pub fn measure_tdis(map: &BernoulliMap, kernel: &dyn Kernel, delta: f64, m: usize, opts: &DisOptions) -> Result<DisMeasurement> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ must lie in (0,1), got {delta}")));
    }
    let eps = kernel.epsilon();
    let evo = Evolution::new(map, kernel, m)?;
    let horizon = opts.horizon.unwrap_or_else(|| default_horizon(map, kernel));
    let mut norms = Vec::new();
    let mut residuals = vec![1.0];
    let mut t = None;
    for n in 1..=horizon {
        let stop = if opts.stop_above_delta { delta } else { f64::INFINITY };
        let est = norm_estimate(&evo, n, opts, stop)?;
        let value = est.value;
        // an estimate above δ is a certified lower bound, so only an unconverged value at or below δ is ambiguous
        if !est.converged && value <= delta && (value - delta).abs() <= 1e-3 * delta {
            return Err(Error::PowerIterationStall { n, lo: value, hi: 1.0 });
        }
        norms.push(est);
        residuals.push(value);
        if value <= delta {
            t = Some(n);
            break;
        }
    }
    let t = t.ok_or(Error::NonConvergence { horizon, residual: *residuals.last().unwrap_or(&1.0) })?;

    let level = match opts.witness_level {
        Some(l) => l,
        None if map.branch_count() >= 2 => default_witness_level(map, eps, delta, m)?,
        None => 0,
    };
    let (witness_curve, witness_time) = if map.branch_count() >= 2 {
        let f0 = dissipation_witness(map, level, m)?;
        let base = f0.norm_l2();
        let mut f = f0;
        let mut curve = vec![1.0];
        for _ in 0..horizon {
            f = evo.step_t_star(&f)?;
            let r = f.norm_l2() / base;
            curve.push(r);
            if r <= delta {
                break;
            }
        }
        let time = first_below(&curve, delta);
        (curve, time)
    } else {
        (Vec::new(), None)
    };
    Ok(DisMeasurement {
        measurement: TimeMeasurement { epsilon: eps, delta, t, method: Method::PowerIteration, residuals },
        norms,
        witness_level: level,
        witness_bound_ok: witness_curve.is_empty() || witness_curve.get(level).is_some_and(|&r| r >= delta),
        witness_curve,
        witness_time,
    })
}

#[derive(Clone, Debug)]
pub enum InitialLaw {
    Uniform,
    Point(Vec<f64>),
    /// Uniform on one cell of an `m^d` grid.
    Cell { m: usize, cell: Vec<usize> },
}

impl InitialLaw {
    fn sample(&self, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            InitialLaw::Uniform => (0..d).map(|_| rng.random::<f64>()).collect(),
            InitialLaw::Point(x) => x.clone(),
            InitialLaw::Cell { m, cell } => cell.iter().map(|&c| (c as f64 + rng.random::<f64>()) / *m as f64).collect(),
        }
    }
}

const CHUNK: usize = 4096;

fn bin_of(x: &[f64], bins: usize) -> usize {
    x.iter().fold(0, |acc, &v| acc * bins + ((v * bins as f64) as usize).min(bins - 1))
}

/// Histogram densities of `n_particles` independent chains at steps `0..=n_steps`,
/// binned on a `bins^d` grid. Deterministic per seed.
pub fn simulate_ensemble(
    map: &BernoulliMap,
    kernel: &dyn Kernel,
    init: &InitialLaw,
    n_steps: usize,
    n_particles: usize,
    bins: usize,
    seed: u64,
) -> Result<Vec<GridDensity>> {
    if n_particles == 0 || bins == 0 {
        return Err(Error::Domain("need at least one particle and one bin".into()));
    }
    let d = map.dim();
    let cells = bins.pow(d as u32);
    let chunks = n_particles.div_ceil(CHUNK);
    let counts: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(n_particles - c * CHUNK);
            let mut xs: Vec<Vec<f64>> = (0..count).map(|_| init.sample(d, &mut rng)).collect();
            let mut hist = vec![0u64; (n_steps + 1) * cells];
            for x in &xs {
                hist[bin_of(x, bins)] += 1;
            }
            for step in 1..=n_steps {
                for x in xs.iter_mut() {
                    let y = map.apply(x);
                    let z = kernel.sample(&mut rng);
                    *x = y.iter().zip(&z).map(|(a, b)| wrap_unit(a + b)).collect();
                    hist[step * cells + bin_of(x, bins)] += 1;
                }
            }
            hist
        })
        .collect();
    let scale = cells as f64 / n_particles as f64;
    (0..=n_steps)
        .map(|step| {
            let values = (0..cells)
                .map(|j| counts.iter().map(|h| h[step * cells + j]).sum::<u64>() as f64 * scale)
                .collect();
            GridDensity::new(d, bins, values)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct LeakageStep {
    pub n: usize,
    /// `‖T*^n f₀ − U*^n f₀‖_{L^p}`.
    pub measured: f64,
    /// `ε^{1/p} C_1^{1/p'} Σ_{j≤n} H(σ^j S)^{1/p} ‖f₀‖_{L^p}`.
    pub bound: f64,
}

/// Leakage of `f₀ = Σ c(s) 1_{C_s}` out of the cylinders of `S` under the noise, against
/// its perimeter bound, for `n = 1..=steps`.
pub fn pcmix_leakage(
    map: &BernoulliMap,
    kernel: &dyn Kernel,
    partition: &[CylinderSet],
    coeffs: &[f64],
    m: usize,
    steps: usize,
    p: u32,
) -> Result<Vec<LeakageStep>> {
    if coeffs.len() != partition.len() {
        return Err(Error::SizeMismatch(coeffs.len(), partition.len()));
    }
    let d = map.dim();
    let mut f0 = GridDensity::zeros(d, m);
    for (cyl, &c) in partition.iter().zip(coeffs) {
        let ind = indicator_density(map, &cyl.word, m)?.scale(c * cyl.volume().value());
        f0 = f0.add(&ind)?;
    }
    let pf = p as f64;
    let c1_factor = if p == 1 { 1.0 } else { crate::bounds::c1(map).powf(1.0 - 1.0 / pf) };
    let base = c1_factor * kernel.epsilon().powf(1.0 / pf) * f0.norm_lp(pf);
    let evo = Evolution::new(map, kernel, m)?;
    let mut t = f0.clone();
    let mut u = f0;
    let mut family = partition.to_vec();
    let mut h_sum = 0.0;
    let mut out = Vec::with_capacity(steps);
    for n in 1..=steps {
        t = evo.step_t_star(&t)?;
        u = evo.push(&u)?;
        family = shift_partition(map, &family)?;
        h_sum += perimeter_volume_h(&family).powf(1.0 / pf);
        out.push(LeakageStep { n, measured: t.sub(&u)?.norm_lp(pf), bound: base * h_sum });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub max_residual: f64,
    pub points: usize,
}

/// Least squares of `t` against `log₂(1/ε)`; needs ≥ 5 points over ≥ 4 octaves.
pub fn fit_points(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points, need at least 5", points.len())));
    }
    let xs: Vec<f64> = points.iter().map(|(e, _)| -e.log2()).collect();
    let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 4.0 - 1e-12 {
        return Err(Error::InsufficientData(format!("ε spans {:.2} octaves, need 4", hi - lo)));
    }
    let (slope, intercept) = least_squares(&xs, &points.iter().map(|p| p.1).collect::<Vec<_>>());
    let res: Vec<f64> = xs.iter().zip(points).map(|(x, (_, t))| t - (slope * x + intercept)).collect();
    Ok(ScalingFit {
        slope,
        intercept,
        residual_rms: (res.iter().map(|r| r * r).sum::<f64>() / res.len() as f64).sqrt(),
        max_residual: res.iter().map(|r| r.abs()).fold(0.0, f64::max),
        points: points.len(),
    })
}

pub fn fit_scaling(measurements: &[TimeMeasurement]) -> Result<ScalingFit> {
    fit_points(&measurements.iter().map(|m| (m.epsilon, m.t as f64)).collect::<Vec<_>>())
}

/// Ordinary least squares `y ≈ a x + b`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let a = sxy / sxx;
    (a, my - a * mx)
}
