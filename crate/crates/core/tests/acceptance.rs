//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

use std::f64::consts::PI;
use std::time::Instant;

use bernoulli_mix::bounds::{relate_tmix_tdis, DualityPoint};
use bernoulli_mix::bump::{measure_eigen_ratios, BumpKind};
use bernoulli_mix::density::{indicator_density, Evolution, GridDensity, TransferPlan};
use bernoulli_mix::kernels::{kernel_stats, BallUniform, Kernel, PeriodizedGaussian, TensorKernel, TensorProfile};
use bernoulli_mix::maps::{map_preset, BernoulliMap, Word};
use bernoulli_mix::metrics::{
    fit_points, least_squares, measure_tdis, measure_tmix, pcmix_leakage, simulate_ensemble, DisOptions, InitialLaw, MixOptions,
};
use bernoulli_mix::spectral::{decay_check, geometric_weight, iterate_spectrum, SpectralField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const EIGEN_TOL: f64 = 1e-3;
/// Discretization allowance for the leakage norm on a 2^12 grid, relative to ‖f₀‖₁.
const PCMIX_GRID_TOL: f64 = 1e-3;
const MIX_SLOPE: (f64, f64) = (0.8, 1.3);
const DIS_SLOPE: (f64, f64) = (0.8, 1.2);
const SANDWICH_SLACK: f64 = 0.15;
const SPECTRAL_TOL: f64 = 1e-12;
const MC_TOL: f64 = 0.05;
const DUALITY_SLACK_STEPS: usize = 1;

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian(d: usize, eps: f64) -> PeriodizedGaussian {
    PeriodizedGaussian::standard(d, eps).expect("valid ε")
}

fn all_words(branches: usize, max_len: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut layer = vec![Vec::<usize>::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| (0..branches).map(move |i| [w.as_slice(), &[i]].concat()))
            .collect();
        out.extend(layer.iter().cloned().map(Word::new));
    }
    out
}

fn criterion_1() -> Outcome {
    let mut checked = 0;
    let mut bad = Vec::new();
    for (name, m) in [("doubling", 64usize), ("intro3", 729)] {
        let map = map_preset(name).unwrap();
        let plan = TransferPlan::new(&map, m).unwrap();
        for s in all_words(map.branch_count(), 6) {
            let mut f = indicator_density(&map, &s, m).unwrap();
            let mut t = s.clone();
            for _ in 0..s.len() {
                f = plan.push(&f).unwrap();
                t = t.shift();
                checked += 1;
                if f != indicator_density(&map, &t, m).unwrap() {
                    bad.push(format!("{name}:{s}->{t}"));
                }
            }
        }
    }
    Outcome { pass: bad.is_empty(), detail: format!("{checked} pushforwards compared bitwise, mismatches {bad:?}") }
}

fn criterion_2() -> Outcome {
    let mut lines = Vec::new();
    let mut pass = true;
    let eps = [0.05, 0.02, 0.01];
    for (d, m) in [(1usize, 4096usize), (2, 512)] {
        let ks: Vec<Box<dyn Kernel>> = eps.iter().map(|&e| Box::new(gaussian(d, e)) as Box<dyn Kernel>).collect();
        let cert = measure_eigen_ratios(&ks, BumpKind::SineProduct, m, EIGEN_TOL).unwrap();
        pass &= (cert.a - PI * PI * d as f64 / 2.0).abs() < 1e-12 && cert.pass();
        for s in &cert.samples {
            lines.push(format!("sine d={d} ε={} min {:.6} ≥ {:.6}", s.epsilon, s.worst_ratio, s.bound));
        }
    }
    let ks: Vec<Box<dyn Kernel>> =
        eps.iter().map(|&e| Box::new(TensorKernel::new(TensorProfile::Uniform, 1, e).unwrap()) as Box<dyn Kernel>).collect();
    let cert = measure_eigen_ratios(&ks, BumpKind::TentProduct, 4096, EIGEN_TOL).unwrap();
    pass &= cert.a == 1.0 && cert.gamma == 1.0 && cert.pass();
    for s in &cert.samples {
        lines.push(format!("tent ε={} min {:.6} ≥ {:.6}", s.epsilon, s.worst_ratio, s.bound));
    }
    Outcome { pass, detail: lines.join("; ") }
}

fn criterion_3() -> Outcome {
    let map = map_preset("doubling").unwrap();
    let eps = 2f64.powi(-8);
    let kernel = BallUniform::new(1, eps).unwrap();
    let lam = bernoulli_mix::bounds::lambda_p_delta(&map, 1, 0.5).unwrap();
    let part = map.partition(eps * lam).unwrap();
    let depth = part.iter().map(|c| c.word.len()).max().unwrap();
    let m = 1 << 12;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let coeffs: Vec<f64> = part.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm: f64 = part.iter().zip(&coeffs).map(|(c, a)| a.abs() * c.volume().value()).sum();
        for step in pcmix_leakage(&map, &kernel, &part, &coeffs, m, depth + 2, 1).unwrap() {
            worst = worst.max(step.measured / step.bound);
            if step.measured > step.bound + 2.0 * PCMIX_GRID_TOL * norm {
                violations += 1;
            }
        }
    }
    Outcome {
        pass: violations == 0,
        detail: format!("|S| = {}, depth {depth}, violations {violations}, worst measured/bound {worst:.4}", part.len()),
    }
}

fn criterion_4() -> Outcome {
    let map = map_preset("doubling").unwrap();
    let m = 1 << 14;
    let mut pts = Vec::new();
    let mut witness_ok = true;
    let mut notes = Vec::new();
    for k in 5..=12 {
        let eps = 2f64.powi(-k);
        let r = measure_tmix(&map, &gaussian(1, eps), 0.5, m, &MixOptions::default()).unwrap();
        if let Some(w) = &r.witness {
            witness_ok &= w.pass;
            notes.push(format!("2^-{k}: t={} witness step {} tv {:.3}", r.measurement.t, w.step, w.tv));
        } else {
            notes.push(format!("2^-{k}: t={}", r.measurement.t));
        }
        pts.push((eps, r.measurement.t as f64));
    }
    let fit = fit_points(&pts).unwrap();
    let monotone = pts.windows(2).all(|w| w[1].1 >= w[0].1);
    Outcome {
        pass: (MIX_SLOPE.0..=MIX_SLOPE.1).contains(&fit.slope) && monotone && witness_ok,
        detail: format!("slope {:.3}, monotone {monotone}, witness {witness_ok}; {}", fit.slope, notes.join(", ")),
    }
}

fn dis_times(map: &BernoulliMap, m: usize, ks: std::ops::RangeInclusive<i32>) -> Vec<(f64, usize)> {
    ks.map(|k| {
        let eps = 2f64.powi(-k);
        let r = measure_tdis(map, &gaussian(1, eps), 0.5, m, &DisOptions::default()).unwrap();
        (eps, r.measurement.t)
    })
    .collect()
}

fn criterion_5() -> Outcome {
    let dbl = map_preset("doubling").unwrap();
    let dt = dis_times(&dbl, 1 << 13, 5..=11);
    let fit = fit_points(&dt.iter().map(|&(e, t)| (e, t as f64)).collect::<Vec<_>>()).unwrap();
    let dbl_ok = (DIS_SLOPE.0..=DIS_SLOPE.1).contains(&fit.slope);

    let i3 = map_preset("intro3").unwrap();
    let it = dis_times(&i3, 3usize.pow(9), 5..=11);
    let xs: Vec<f64> = it.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = it.iter().map(|&(_, t)| t as f64).collect();
    let (slope, _) = least_squares(&xs, &ys);
    let lo = 1.0 / -i3.p_min().ln() * (1.0 - SANDWICH_SLACK);
    let hi = 1.0 / -i3.p_max().ln() * (1.0 + SANDWICH_SLACK);
    let i3_ok = slope >= lo && slope <= hi;
    Outcome {
        pass: dbl_ok && i3_ok,
        detail: format!(
            "doubling slope {:.3} {:?}; intro3 slope {:.3} in [{lo:.3}, {hi:.3}] {:?}",
            fit.slope,
            dt.iter().map(|p| p.1).collect::<Vec<_>>(),
            slope,
            ys
        ),
    }
}

fn criterion_6() -> Outcome {
    let delta = 0.5;
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, m) in [("doubling", 1usize << 13), ("intro3", 3usize.pow(9))] {
        let map = map_preset(name).unwrap();
        let mut pts = Vec::new();
        let mut bold_k: f64 = 0.0;
        for k in 5..=10 {
            let eps = 2f64.powi(-k);
            let g = gaussian(1, eps);
            bold_k = bold_k.max(kernel_stats(&g, 0.5, PI).unwrap().bold_k);
            let opts = MixOptions { floor: Some(delta * delta / 4.0), ..MixOptions::default() };
            let mix = measure_tmix(&map, &g, delta, m, &opts).unwrap();
            let dis = measure_tdis(&map, &g, delta, m, &DisOptions::default()).unwrap();
            pts.push(DualityPoint {
                epsilon: eps,
                t_dis: dis.measurement.t,
                t_mix_quarter: mix.t_at(delta * delta / 4.0).unwrap(),
                t_mix_prime: mix.measurement.t,
            });
        }
        let rep = relate_tmix_tdis(&pts, delta, delta, bold_k, 1, DUALITY_SLACK_STEPS);
        pass &= rep.violations == 0;
        let rows: Vec<String> = rep
            .rows
            .iter()
            .map(|r| format!("{}≤{}+1, {}≤{:.1}", r.t_dis, r.t_mix_quarter, r.t_mix_prime, r.mix_from_dis))
            .collect();
        notes.push(format!("{name} violations {}: {}", rep.violations, rows.join(" | ")));
    }
    Outcome { pass, detail: notes.join("; ") }
}

fn criterion_7() -> Outcome {
    let map = map_preset("doubling").unwrap();
    let m = 1 << 12;
    let mut pass = true;
    let mut notes = Vec::new();
    for k in [6, 8, 10] {
        let eps = 2f64.powi(-k);
        let grid = measure_tdis(&map, &gaussian(1, eps), 0.5, m, &DisOptions::default()).unwrap().measurement.t;
        let rep = decay_check(2, 1, eps, 0.5, 24).unwrap();
        let same = rep.t_dis == Some(grid);
        let doubling = rep.rows.iter().all(|r| r.doubling_ok);
        pass &= same && doubling;
        notes.push(format!(
            "2^-{k}: grid {grid} spectral {:?} (N-1 denominator {:?}), doubling signature {doubling}",
            rep.t_dis, rep.t_dis_alt
        ));
    }

    // support divisibility and geometric-sum exponents
    let eps = 2f64.powi(-8);
    let coeffs: Vec<(Vec<i64>, Complex64)> = (-7i64..=7).filter(|&k| k != 0).map(|k| (vec![k], Complex64::new(1.0 / k as f64, 0.0))).collect();
    let field = SpectralField::new(2, 1, eps, 1 << 40, coeffs).unwrap();
    let mut max_err: f64 = 0.0;
    let mut divisible = true;
    let mut weights = true;
    for n in 1..=12 {
        let it = iterate_spectrum(&field, n).unwrap();
        divisible &= it.support_divisible(n);
        for mode in &it.modes {
            let k0 = mode.origin[0] as f64;
            // Σ_{j<n} 4^j k0² = k0² (4^n − 1)/3
            let oracle = 2.0 * PI * PI * eps * eps * k0 * k0 * (4f64.powi(n as i32) - 1.0) / 3.0;
            weights &= mode.weight == geometric_weight(2, &mode.origin, n);
            max_err = max_err.max((it.exponent(mode) - oracle).abs() / oracle);
        }
    }
    pass &= divisible && weights && max_err <= SPECTRAL_TOL;
    notes.push(format!("support divisible {divisible}, weights {weights}, exponent rel err {max_err:.2e}"));
    Outcome { pass, detail: notes.join(", ") }
}

fn criterion_8() -> Outcome {
    let map = map_preset("doubling").unwrap();
    let eps = 2f64.powi(-8);
    let kernel = gaussian(1, eps);
    let (m, bins, steps) = (4096usize, 256usize, 20usize);
    let start = 1234usize;
    let evo = Evolution::new(&map, &kernel, m).unwrap();
    let mut f = GridDensity::point_mass(1, m, &[start]);
    let mut de = vec![f.coarsen(m / bins).unwrap().distances().tv];
    for _ in 0..steps {
        f = evo.step_t_star(&f).unwrap();
        de.push(f.coarsen(m / bins).unwrap().distances().tv);
    }
    let init = InitialLaw::Cell { m, cell: vec![start] };
    let mc = simulate_ensemble(&map, &kernel, &init, steps, 100_000, bins, 11).unwrap();
    let again = simulate_ensemble(&map, &kernel, &init, steps, 100_000, bins, 11).unwrap();
    let deterministic = mc == again;
    let gap = mc.iter().zip(&de).map(|(h, t)| (h.distances().tv - t).abs()).fold(0.0, f64::max);
    Outcome { pass: gap <= MC_TOL && deterministic, detail: format!("sup gap {gap:.4}, deterministic {deterministic}") }
}

fn criterion_9() -> Outcome {
    let map = map_preset("identity").unwrap();
    let m = 256;
    let mut pts = Vec::new();
    for k in 3..=6 {
        let eps = 2f64.powi(-k);
        let opts = MixOptions { starts: 1, witness: false, ..MixOptions::default() };
        let t = measure_tmix(&map, &gaussian(1, eps), 0.5, m, &opts).unwrap().measurement.t;
        pts.push((eps, t));
    }
    let xs: Vec<f64> = pts.iter().map(|(e, _)| -e.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|&(_, t)| (t as f64).ln()).collect();
    let (slope, _) = least_squares(&xs, &ys);
    Outcome {
        pass: slope > 1.0,
        detail: format!("log-log slope {slope:.3}, t = {:?}", pts.iter().map(|p| p.1).collect::<Vec<_>>()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("shift identity", criterion_1),
        ("eigen-inequality certificate", criterion_2),
        ("piecewise-constant leakage bound", criterion_3),
        ("mixing-time scaling", criterion_4),
        ("dissipation sandwich", criterion_5),
        ("duality inequalities", criterion_6),
        ("uniform-map spectral exactness", criterion_7),
        ("Monte Carlo cross-check", criterion_8),
        ("identity-map baseline", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let t0 = Instant::now();
        let out = run();
        let secs = t0.elapsed().as_secs_f64();
        if !out.pass {
            failed += 1;
        }
        println!("{} [{id}] {name} ({secs:.1} s): {}", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
