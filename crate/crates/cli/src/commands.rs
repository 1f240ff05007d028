use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Context;
use bernoulli_mix::bounds::{lambda_p_delta, relate_tmix_tdis, theoretical_time_bounds, uniform_base, BoundReport, DualityPoint};
use bernoulli_mix::bump::{eigen_constants, measure_eigen_ratios, BumpKind};
use bernoulli_mix::density::{Evolution, GridDensity};
use bernoulli_mix::kernels::{kernel_stats, Kernel, KernelKind};
use bernoulli_mix::maps::validate_map;
use bernoulli_mix::metrics::{
    fit_points, measure_tdis, measure_tmix, pcmix_leakage, simulate_ensemble, DisOptions, InitialLaw, MixOptions,
};
use bernoulli_mix::spectral::{decay_check, decay_csv};
use bernoulli_mix::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Resolved};
use crate::manifest::{Recorder, SWEEP_HEADER};

pub const EIGEN_TOL: f64 = 1e-3;
/// Grid allowance for the leakage norm, relative to `‖f₀‖_1`.
pub const PCMIX_GRID_TOL: f64 = 1e-3;
/// Slope bands per octave of `ε`, as multiples of the leading-order prediction.
pub const MIX_SLOPE_BAND: (f64, f64) = (0.8, 1.3);
pub const DIS_SLOPE_BAND: (f64, f64) = (0.8, 1.2);
pub const MC_TOL: f64 = 0.05;
pub const DUALITY_SLACK_STEPS: usize = 1;
pub const SPECTRAL_HORIZON: usize = 64;
/// Grid cells per `ε` below which a measurement is not attempted.
pub const MIN_CELLS_PER_EPSILON: f64 = 2.0;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    pub t_mix: Option<usize>,
    pub t_dis: Option<usize>,
    pub method: String,
    pub slope_fit_running: Option<f64>,
    pub theory_lower: Option<f64>,
    pub theory_upper: Option<f64>,
    pub wall_ms: u128,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub kind: String,
    pub map: String,
    pub d: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub grid: usize,
    pub rows: Vec<SweepRow>,
    /// Leading-order slope per octave: `d ln 2 / |ln p|` for `p_max` and `p_min`.
    pub slope_fast: f64,
    pub slope_slow: f64,
    pub fits: Vec<(f64, Option<f64>)>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.epsilon,
            r.delta,
            opt(r.t_mix),
            opt(r.t_dis),
            r.method,
            opt(r.slope_fit_running.map(|x| format!("{x:.6}"))),
            opt(r.theory_lower),
            opt(r.theory_upper),
            r.wall_ms
        );
    }
    s
}

fn ms(t0: Instant) -> u128 {
    t0.elapsed().as_millis()
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Reference times, when the map and kernel admit them.
fn theory(res: &Resolved, kernel: &dyn Kernel, delta: f64) -> Option<BoundReport> {
    let (a, gamma) = eigen_constants(kernel, BumpKind::for_kernel(kernel)).ok()?;
    theoretical_time_bounds(&res.map, kernel, a, gamma, kernel.epsilon(), delta).ok()
}

fn dis_options(seed: u64) -> DisOptions {
    DisOptions { seeds: vec![seed, seed.wrapping_add(1), seed.wrapping_add(2)], ..DisOptions::default() }
}

fn slope_refs(res: &Resolved) -> (f64, f64) {
    let d = res.map.dim() as f64;
    (d * LN_2 / -res.map.p_max().ln(), d * LN_2 / -res.map.p_min().ln())
}

fn running_fits(rows: &mut [SweepRow], pick: impl Fn(&SweepRow) -> Option<usize>) {
    let mut pts = Vec::new();
    for r in rows.iter_mut() {
        if let Some(t) = pick(r) {
            pts.push((r.epsilon, t as f64));
        }
        r.slope_fit_running = fit_points(&pts).ok().map(|f| f.slope);
    }
}

/// `ε` values the `m`-cell grid resolves; the rest are skipped with a warning.
fn resolved(res: &Resolved, m: usize, rec: &mut Recorder) -> Vec<f64> {
    let (keep, skip): (Vec<f64>, Vec<f64>) = res.epsilons.iter().partition(|&&e| e * m as f64 >= MIN_CELLS_PER_EPSILON);
    if !skip.is_empty() {
        rec.warn(format!(
            "skipped ε = {skip:?}: a grid of {m} cells per axis needs ε ≥ {} (raise grid.max_cells or pass --grid-exp)",
            MIN_CELLS_PER_EPSILON / m as f64
        ));
    }
    keep
}

fn pairs(res: &Resolved, epsilons: &[f64]) -> Vec<(f64, f64)> {
    res.config.deltas.iter().flat_map(|&d| epsilons.iter().map(move |&e| (e, d))).collect()
}

pub fn sweep_mix(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let m = res.grid_size()?;
    let (fast, slow) = slope_refs(res);
    let eps = resolved(res, m, rec);
    let results: Vec<anyhow::Result<(SweepRow, Option<bool>)>> = pairs(res, &eps)
        .par_iter()
        .map(|&(eps, delta)| {
            let kernel = res.kernel(eps)?;
            let t0 = Instant::now();
            let r = measure_tmix(&res.map, kernel.as_ref(), delta, m, &MixOptions::default())
                .with_context(|| format!("t_mix at ε = {eps}, δ = {delta}"))?;
            let wall_ms = ms(t0);
            let th = theory(res, kernel.as_ref(), delta);
            Ok((
                SweepRow {
                    epsilon: eps,
                    delta,
                    t_mix: Some(r.measurement.t),
                    t_dis: None,
                    method: r.measurement.method.as_str().to_string(),
                    slope_fit_running: None,
                    theory_lower: th.as_ref().map(|b| b.times.tmix_lower as f64),
                    theory_upper: th.as_ref().and_then(|b| b.times.appendix_tmix).map(|t| t as f64),
                    wall_ms,
                },
                r.witness.as_ref().map(|w| w.pass),
            ))
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        let (row, witness) = r?;
        if let Some(ok) = witness {
            rec.check(
                format!("cylinder witness ε={} δ={}", row.epsilon, row.delta),
                ok,
                "TV of the witness stays at or above δ after N − N₁ steps",
            );
        }
        rows.push(row);
    }
    finish_sweep(res, rec, "mix", rows, m, fast, slow, |r| r.t_mix)
}

pub fn sweep_dis(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let m = res.grid_size()?;
    let (fast, slow) = slope_refs(res);
    let eps = resolved(res, m, rec);
    let results: Vec<anyhow::Result<(SweepRow, (usize, bool, Option<usize>))>> = pairs(res, &eps)
        .par_iter()
        .map(|&(eps, delta)| {
            let kernel = res.kernel(eps)?;
            let t0 = Instant::now();
            let r = measure_tdis(&res.map, kernel.as_ref(), delta, m, &dis_options(res.seed))
                .with_context(|| format!("t_dis at ε = {eps}, δ = {delta}"))?;
            let wall_ms = ms(t0);
            let th = theory(res, kernel.as_ref(), delta);
            Ok((
                SweepRow {
                    epsilon: eps,
                    delta,
                    t_mix: None,
                    t_dis: Some(r.measurement.t),
                    method: r.measurement.method.as_str().to_string(),
                    slope_fit_running: None,
                    theory_lower: th.as_ref().map(|b| b.times.tdis_lower as f64),
                    theory_upper: th.as_ref().and_then(|b| b.times.tdis_upper).map(|t| t as f64),
                    wall_ms,
                },
                (r.witness_level, r.witness_bound_ok, r.witness_time),
            ))
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        let (row, (level, bound_ok, w)) = r?;
        let t = row.t_dis.unwrap_or(0);
        let consistent = w.is_none_or(|w| w <= t);
        rec.check(
            format!("two-level witness ε={} δ={}", row.epsilon, row.delta),
            bound_ok && consistent,
            format!("‖T*^N f₀‖ ≥ δ‖f₀‖ at N = {level}: {bound_ok}; witness decays at step {w:?}, operator norm at step {t}"),
        );
        rows.push(row);
    }
    finish_sweep(res, rec, "dis", rows, m, fast, slow, |r| r.t_dis)
}

#[allow(clippy::too_many_arguments)]
fn finish_sweep(
    res: &Resolved,
    rec: &mut Recorder,
    kind: &str,
    rows: Vec<SweepRow>,
    m: usize,
    fast: f64,
    slow: f64,
    pick: fn(&SweepRow) -> Option<usize>,
) -> anyhow::Result<()> {
    let mut all = Vec::new();
    let mut fits = Vec::new();
    for &delta in &res.config.deltas {
        let mut group: Vec<SweepRow> = rows.iter().filter(|r| r.delta == delta).cloned().collect();
        running_fits(&mut group, pick);
        let last = group.last().and_then(|r| r.slope_fit_running);
        fits.push((delta, last));
        for r in &group {
            let t = pick(r).unwrap_or(0) as f64;
            if let Some(lo) = r.theory_lower {
                rec.check(format!("{kind} lower bound ε={} δ={delta}", r.epsilon), t >= lo, format!("{t} ≥ {lo}"));
            }
            if let Some(hi) = r.theory_upper {
                rec.check(format!("{kind} upper bound ε={} δ={delta}", r.epsilon), t <= hi, format!("{t} ≤ {hi}"));
            }
        }
        match last {
            // only the leading order of the lower bound is known when the weights differ
            Some(slope) if kind == "mix" && res.map.p_min() != res.map.p_max() => {
                rec.warn(format!("t_mix slope {slope:.4} per octave at δ = {delta} (leading-order lower bound {fast:.4}); not asserted"))
            }
            Some(slope) => {
                let (lo, hi) = if kind == "mix" {
                    (fast * MIX_SLOPE_BAND.0, fast * MIX_SLOPE_BAND.1)
                } else {
                    (slow * DIS_SLOPE_BAND.0, fast * DIS_SLOPE_BAND.1)
                };
                rec.check(
                    format!("{kind} slope δ={delta}"),
                    slope >= lo && slope <= hi,
                    format!("{slope:.4} per octave in [{lo:.4}, {hi:.4}]"),
                );
            }
            None => rec.warn(format!("insufficient data for a {kind} slope fit at δ = {delta} (need 5 ε over 4 octaves)")),
        }
        all.extend(group);
    }
    let sweep = Sweep {
        kind: kind.to_string(),
        map: res.map.name.clone(),
        d: res.map.dim(),
        p_min: res.map.p_min(),
        p_max: res.map.p_max(),
        grid: m,
        rows: all,
        slope_fast: fast,
        slope_slow: slow,
        fits,
    };
    rec.csv(&format!("sweep_{kind}.csv"), &sweep_csv(&sweep.rows))?;
    rec.json(&format!("sweep_{kind}.json"), &sweep)?;
    Ok(())
}

pub fn validate(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let report = match validate_map(&res.map, res.config.validate_depth) {
        Ok(r) => r,
        Err(e @ (Error::Depth(_) | Error::Domain(_))) => return Err(config_err(e.to_string())),
        Err(e) => {
            // a structural assumption fails outright
            let text = format!("map {}: {e}\n", res.map.name);
            print!("{text}");
            rec.check("map assumptions", false, e.to_string());
            rec.text("validate.txt", &text)?;
            return Ok(());
        }
    };
    let weights: Vec<_> = res.map.branches().iter().map(|b| b.weight()).collect();
    let exact_min = weights.iter().min_by(|a, b| a.value().total_cmp(&b.value())).map(|w| w.to_string()).unwrap_or_default();
    let exact_max = weights.iter().max_by(|a, b| a.value().total_cmp(&b.value())).map(|w| w.to_string()).unwrap_or_default();
    let mut text = String::new();
    let _ = writeln!(text, "map {} (d = {}, {} branches)", report.name, report.d, report.branches);
    let _ = writeln!(text, "p_min = {exact_min} ({:.6})", report.p_min);
    let _ = writeln!(text, "p_max = {exact_max} ({:.6})", report.p_max);
    let _ = writeln!(text, "exact arithmetic: {}", report.exact);
    let _ = writeln!(text, "bijective branches: {}", report.bijective);
    let _ = writeln!(text, "boundary covered: {} ({} points)", report.boundary_covered, report.boundary_points_checked);
    let _ = writeln!(text, "cube cylinders to depth {}: {} ({} shapes)", report.depth, report.cubes, report.shapes_checked);
    print!("{text}");
    rec.check("bijective branches", report.bijective, "each branch maps its cell onto the unit cube");
    rec.check("boundary preimages", report.boundary_covered, "every boundary point has an interior preimage");
    rec.check("cube cylinders", report.cubes, format!("all cylinders to depth {} are cubes", report.depth));
    rec.json("validate.json", &report)?;
    rec.text("validate.txt", &text)?;
    Ok(())
}

pub fn verify_eigen(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let d = res.map.dim();
    let m = if res.config.grid.exp.is_some() { res.grid_size()? } else if d == 1 { 4096 } else { 512 };
    let kernels = res.epsilons.iter().map(|&e| res.kernel(e)).collect::<anyhow::Result<Vec<_>>>()?;
    let kind = BumpKind::for_kernel(kernels[0].as_ref());
    let cert = measure_eigen_ratios(&kernels, kind, m, EIGEN_TOL).map_err(|e| config_err(e.to_string()))?;
    for s in &cert.samples {
        rec.check(
            format!("eigen inequality ε={}", s.epsilon),
            s.pass,
            format!("min ratio {:.6} against 1 − aε^γ = {:.6}", s.worst_ratio, s.bound),
        );
    }
    rec.json("eigen.json", &cert)?;
    Ok(())
}

#[derive(Serialize)]
struct PcmixRow {
    epsilon: f64,
    delta: f64,
    cylinders: usize,
    depth: usize,
    worst_ratio: f64,
    violations: usize,
}

pub fn verify_pcmix(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let m = res.grid_size()?;
    let mut csv = String::from("epsilon,delta,trial,n,measured,bound\n");
    let mut summary = Vec::new();
    for (i, &eps) in resolved(res, m, rec).iter().enumerate() {
        let kernel = res.kernel(eps)?;
        for &delta in &res.config.deltas {
            let lam = lambda_p_delta(&res.map, 1, delta)?;
            let part = res.map.partition(eps * lam)?;
            let depth = part.iter().map(|c| c.word.len()).max().unwrap_or(0);
            let mut rng = ChaCha8Rng::seed_from_u64(res.seed);
            rng.set_stream(i as u64);
            let mut worst: f64 = 0.0;
            let mut violations = 0;
            for trial in 0..res.config.pcmix_trials {
                let coeffs: Vec<f64> = part.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                let norm: f64 = part.iter().zip(&coeffs).map(|(c, a)| a.abs() * c.volume().value()).sum();
                for step in pcmix_leakage(&res.map, kernel.as_ref(), &part, &coeffs, m, depth + 2, 1)? {
                    worst = worst.max(step.measured / step.bound);
                    if step.measured > step.bound + 2.0 * PCMIX_GRID_TOL * norm {
                        violations += 1;
                    }
                    let _ = writeln!(csv, "{eps},{delta},{trial},{},{},{}", step.n, step.measured, step.bound);
                }
            }
            rec.check(
                format!("leakage bound ε={eps} δ={delta}"),
                violations == 0,
                format!("{} cylinders, worst measured/bound {worst:.4}, violations {violations}", part.len()),
            );
            summary.push(PcmixRow { epsilon: eps, delta, cylinders: part.len(), depth, worst_ratio: worst, violations });
        }
    }
    rec.csv("pcmix.csv", &csv)?;
    rec.json("pcmix.json", &summary)?;
    Ok(())
}

pub fn verify_duality(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let m = res.grid_size()?;
    let mut reports = Vec::new();
    let mut csv = String::from("epsilon,delta,t_dis,t_mix_quarter,t_mix_prime,mix_from_dis,dis_le_mix,mix_le_dis\n");
    let eps = resolved(res, m, rec);
    for &delta in &res.config.deltas {
        let pts: Vec<anyhow::Result<(DualityPoint, f64)>> = eps
            .par_iter()
            .map(|&eps| {
                let kernel = res.kernel(eps)?;
                let bold_k = kernel_stats(kernel.as_ref(), 0.5, PI)?.bold_k;
                let opts = MixOptions { floor: Some(delta * delta / 4.0), ..MixOptions::default() };
                let mix = measure_tmix(&res.map, kernel.as_ref(), delta, m, &opts)?;
                let dis = measure_tdis(&res.map, kernel.as_ref(), delta, m, &dis_options(res.seed))?;
                let quarter = mix
                    .t_at(delta * delta / 4.0)
                    .ok_or_else(|| anyhow::anyhow!("t_mix(δ²/4) not reached within {} steps at ε = {eps}", mix.horizon))?;
                Ok((DualityPoint { epsilon: eps, t_dis: dis.measurement.t, t_mix_quarter: quarter, t_mix_prime: mix.measurement.t }, bold_k))
            })
            .collect();
        let mut points = Vec::new();
        let mut bold_k: f64 = 0.0;
        for p in pts {
            let (pt, k) = p?;
            bold_k = bold_k.max(k);
            points.push(pt);
        }
        let rep = relate_tmix_tdis(&points, delta, delta, bold_k, res.map.dim(), DUALITY_SLACK_STEPS);
        for r in &rep.rows {
            let _ = writeln!(
                csv,
                "{},{delta},{},{},{},{:.6},{},{}",
                r.epsilon, r.t_dis, r.t_mix_quarter, r.t_mix_prime, r.mix_from_dis, r.dis_le_mix, r.mix_le_dis
            );
        }
        rec.check(
            format!("duality δ={delta}"),
            rep.violations == 0,
            format!("{} points, {} violations", rep.rows.len(), rep.violations),
        );
        reports.push(rep);
    }
    rec.csv("duality.csv", &csv)?;
    rec.json("duality.json", &reports)?;
    Ok(())
}

#[derive(Serialize)]
struct SpectralRow {
    epsilon: f64,
    delta: f64,
    t_dis: Option<usize>,
    t_dis_alt: Option<usize>,
    grid_t_dis: Option<usize>,
    corollary_tdis: f64,
    pass: bool,
}

pub fn spectral(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let base = uniform_base(&res.map).ok_or_else(|| config_err(format!("map {} is not x -> N x", res.map.name)))?;
    if res.config.kernel.kind != KernelKind::Gaussian || res.config.kernel.covariance.is_some() {
        return Err(config_err("the spectral backend needs the standard Gaussian kernel"));
    }
    let d = res.map.dim();
    let m = res.grid_size()?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for &eps in &res.epsilons {
        for &delta in &res.config.deltas {
            let rep = decay_check(base, d, eps, delta, SPECTRAL_HORIZON)?;
            rec.check(
                format!("spectral envelope ε={eps} δ={delta}"),
                rep.pass,
                format!("t_dis {:?} against {:.3}", rep.t_dis, rep.corollary_tdis),
            );
            let grid_t = if d == 1 && eps * m as f64 >= MIN_CELLS_PER_EPSILON {
                let kernel = res.kernel(eps)?;
                let t = measure_tdis(&res.map, kernel.as_ref(), delta, m, &dis_options(res.seed))?.measurement.t;
                rec.check(
                    format!("spectral vs grid ε={eps} δ={delta}"),
                    rep.t_dis == Some(t),
                    format!("spectral {:?}, grid {t} (N−1 denominator predicts {:?})", rep.t_dis, rep.t_dis_alt),
                );
                Some(t)
            } else {
                None
            };
            rec.csv(&format!("spectral_eps{eps}_delta{delta}.csv"), &decay_csv(&rep))?;
            rows.push(SpectralRow {
                epsilon: eps,
                delta,
                t_dis: rep.t_dis,
                t_dis_alt: rep.t_dis_alt,
                grid_t_dis: grid_t,
                corollary_tdis: rep.corollary_tdis,
                pass: rep.pass,
            });
            reports.push(rep);
        }
    }
    rec.json("spectral.json", &rows)?;
    rec.json("spectral_detail.json", &reports)?;
    Ok(())
}

pub fn mc_crosscheck(res: &Resolved, rec: &mut Recorder) -> anyhow::Result<()> {
    let m = res.grid_size()?;
    let d = res.map.dim();
    let base = res.base() as usize;
    let mc = &res.config.mc;
    let mut bins = 1;
    while m % (bins * base) == 0 && (bins * base).checked_pow(d as u32).is_some_and(|c| c <= mc.max_bins) {
        bins *= base;
    }
    if bins == 1 {
        return Err(config_err(format!("no histogram size divides the {m}-cell grid")));
    }
    let start: Vec<usize> = vec![((mc.start.rem_euclid(1.0) * m as f64) as usize).min(m - 1); d];
    let mut csv = String::from("epsilon,n,tv_density,tv_monte_carlo\n");
    for eps in resolved(res, m, rec) {
        let kernel = res.kernel(eps)?;
        let evo = Evolution::new(&res.map, kernel.as_ref(), m)?;
        let mut f = GridDensity::point_mass(d, m, &start);
        let mut de = vec![f.coarsen(m / bins)?.distances().tv];
        for _ in 0..mc.steps {
            f = evo.step_t_star(&f)?;
            de.push(f.coarsen(m / bins)?.distances().tv);
        }
        let init = InitialLaw::Cell { m, cell: start.clone() };
        let hist = simulate_ensemble(&res.map, kernel.as_ref(), &init, mc.steps, mc.particles, bins, res.seed)?;
        let mut gap: f64 = 0.0;
        for (n, (h, t)) in hist.iter().zip(&de).enumerate() {
            let tv = h.distances().tv;
            gap = gap.max((tv - t).abs());
            let _ = writeln!(csv, "{eps},{n},{t},{tv}");
        }
        rec.check(
            format!("Monte Carlo ε={eps}"),
            gap <= MC_TOL,
            format!("sup TV gap {gap:.4} over {} steps, {} particles, {bins}^{d} bins", mc.steps, mc.particles),
        );
    }
    rec.csv("mc.csv", &csv)?;
    Ok(())
}
