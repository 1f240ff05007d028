//! Explicit constants and reference time bounds for a map, kernel, noise scale and threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{lattice_tail, Kernel, KernelKind};
use crate::maps::{perimeter_volume_h, shift_partition, BernoulliMap, CylinderSet, SignedPermutation};

fn check_map(map: &BernoulliMap) -> Result<()> {
    if !(map.p_max() < 1.0) {
        return Err(Error::Domain("p_max = 1: the map does not expand".into()));
    }
    if !(map.p_min() > 0.0) {
        return Err(Error::Domain("p_min = 0".into()));
    }
    Ok(())
}

fn check_p(p: u32) -> Result<()> {
    if p == 1 || p == 2 {
        Ok(())
    } else {
        Err(Error::Domain(format!("norm index p must be 1 or 2, got {p}")))
    }
}

/// `C_1 = 2d (2 + p_min^{-1/d})^{d-1}`.
pub fn c1(map: &BernoulliMap) -> f64 {
    let d = map.dim() as f64;
    2.0 * d * (2.0 + map.p_min().powf(-1.0 / d)).powf(d - 1.0)
}

/// `Λ_{p,δ} = 2d C_1^{p-1} / (δ^p p_min^{1/d} (1 − p_max^{1/(pd)})^p)`.
pub fn lambda_p_delta(map: &BernoulliMap, p: u32, delta: f64) -> Result<f64> {
    check_map(map)?;
    check_p(p)?;
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("δ must be positive, got {delta}")));
    }
    let d = map.dim() as f64;
    let pf = p as f64;
    let gap = 1.0 - map.p_max().powf(1.0 / (pf * d));
    Ok(2.0 * d * c1(map).powf(pf - 1.0) / (delta.powf(pf) * map.p_min().powf(1.0 / d) * gap.powf(pf)))
}

/// `B_{p,δ} = δ / (4 Λ_{p,δ/4} √d)`.
pub fn b_p_delta(map: &BernoulliMap, p: u32, delta: f64) -> Result<f64> {
    Ok(delta / (4.0 * lambda_p_delta(map, p, delta / 4.0)? * (map.dim() as f64).sqrt()))
}

/// `N = ⌈d ln(ε η) / ln p_max⌉`.
pub fn n_mix(map: &BernoulliMap, epsilon: f64, eta: f64) -> Result<i64> {
    check_map(map)?;
    Ok((map.dim() as f64 * (epsilon * eta).ln() / map.p_max().ln()).ceil() as i64)
}

#[derive(Clone, Debug, Serialize)]
pub struct StructuralConstants {
    pub d: usize,
    pub p: u32,
    pub delta: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub c1: f64,
    pub lambda: f64,
    pub b: f64,
    pub a: f64,
    pub gamma: f64,
    pub eta: f64,
}

pub fn structural_constants(map: &BernoulliMap, p: u32, delta: f64, a: f64, gamma: f64) -> Result<StructuralConstants> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("δ must lie in (0,1), got {delta}")));
    }
    if !(a > 0.0 && gamma > 0.0) {
        return Err(Error::Domain(format!("a and γ must be positive, got a={a}, γ={gamma}")));
    }
    Ok(StructuralConstants {
        d: map.dim(),
        p,
        delta,
        p_min: map.p_min(),
        p_max: map.p_max(),
        c1: c1(map),
        lambda: lambda_p_delta(map, p, delta)?,
        b: b_p_delta(map, p, delta)?,
        a,
        gamma,
        eta: (2.0 * a).powf(1.0 / gamma),
    })
}

/// Reference times. `*_leading` entries are the `|ln ε|` terms alone; the rest carry
/// every explicit constant from the proofs.
#[derive(Clone, Debug, Serialize)]
pub struct TimeBounds {
    pub epsilon: f64,
    pub delta: f64,
    pub n_mix: i64,
    /// `d ln ε / ln p_max`.
    pub tmix_leading: f64,
    /// `N` and `N_1` of the cylinder witness; `t_mix(δ) ≥ N − N_1`.
    pub witness_n: i64,
    pub witness_n1: i64,
    pub tmix_lower: i64,
    /// `d ln ε / ln p_min` and `d ln ε / ln p_max`.
    pub tdis_lower_leading: f64,
    pub tdis_upper_leading: f64,
    /// `min |s|` over `S` at scale `ε Λ_{2,1−δ}`.
    pub tdis_lower: usize,
    pub n_dis: i64,
    /// `sup_{|k| ≥ B/(2πε)} |K̂_ε(k)|`.
    pub rho: f64,
    pub n1_dis: Option<i64>,
    pub tdis_upper: Option<i64>,
    /// Exact bounds for `x -> N x` with the standard Gaussian.
    pub appendix_tmix: Option<usize>,
    pub appendix_tdis: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub map: String,
    pub kernel: String,
    pub mix: StructuralConstants,
    pub dis: StructuralConstants,
    pub times: TimeBounds,
}

/// `N` when the map is `x -> N x mod 1`.
pub fn uniform_base(map: &BernoulliMap) -> Option<u64> {
    let d = map.dim();
    let count = map.branch_count();
    let n = (count as f64).powf(1.0 / d as f64).round() as u64;
    let equal = map.weights().iter().all(|&w| (w - map.p_max()).abs() < 1e-15);
    let straight = map.branches().iter().all(|b| b.d_mat == SignedPermutation::identity(d));
    (n >= 2 && n.pow(d as u32) as usize == count && equal && straight).then_some(n)
}

fn is_standard_gaussian(kernel: &dyn Kernel) -> bool {
    kernel.kind() == KernelKind::Gaussian
        && kernel.signed_permutation_invariant()
        && kernel.axis_abs_moments().is_some_and(|m| (m[0] - (2.0 / PI).sqrt()).abs() < 1e-14)
}

/// `2π²ε²(N^{2n} − 1)/(N² − 1)`: damping exponent of a unit mode after `n` steps of `x -> N x`.
pub fn unit_mode_exponent(base: u64, epsilon: f64, n: usize) -> f64 {
    let nf = base as f64;
    2.0 * PI * PI * epsilon * epsilon * (nf.powi(2 * n as i32) - 1.0) / (nf * nf - 1.0)
}

/// `‖K_ε‖_{L²}` for the standard Gaussian from its Fourier series.
pub fn gaussian_l2_norm(d: usize, epsilon: f64) -> f64 {
    let mut s = 1.0;
    let mut k = 1.0f64;
    loop {
        let t = (-4.0 * PI * PI * epsilon * epsilon * k * k).exp();
        s += 2.0 * t;
        if t < 1e-18 * s {
            break;
        }
        k += 1.0;
    }
    s.sqrt().powi(d as i32)
}

fn appendix_times(map: &BernoulliMap, kernel: &dyn Kernel, epsilon: f64, delta: f64) -> (Option<usize>, Option<usize>) {
    let Some(base) = uniform_base(map) else { return (None, None) };
    if !is_standard_gaussian(kernel) {
        return (None, None);
    }
    let target = -delta.ln();
    let tdis = (1..200).find(|&n| unit_mode_exponent(base, epsilon, n) >= target);
    let norm = gaussian_l2_norm(map.dim(), epsilon);
    let tmix = (0..200).find(|&n| norm * (-unit_mode_exponent(base, epsilon, n)).exp() <= delta).map(|n| n + 1);
    (tmix, tdis)
}

pub fn theoretical_time_bounds(
    map: &BernoulliMap,
    kernel: &dyn Kernel,
    a: f64,
    gamma: f64,
    epsilon: f64,
    delta: f64,
) -> Result<BoundReport> {
    if !(epsilon > 0.0) {
        return Err(Error::Domain(format!("ε must be positive, got {epsilon}")));
    }
    let mix = structural_constants(map, 1, delta, a, gamma)?;
    let dis = structural_constants(map, 2, delta, a, gamma)?;
    let d = map.dim() as f64;
    let ln_pmax = map.p_max().ln();
    let ln_pmin = map.p_min().ln();

    // cylinder witness: S at scale ε Λ_{1,1−δ}, word of length N on the heaviest branch
    let witness_n = (d * (epsilon * lambda_p_delta(map, 1, 1.0 - delta)?).ln() / ln_pmax).ceil() as i64;
    let witness_n1 = (((1.0 - delta) / 2.0).ln() / ln_pmax).ceil() as i64;

    let lower_scale = epsilon * lambda_p_delta(map, 2, 1.0 - delta)?;
    let tdis_lower = map.partition(lower_scale)?.iter().map(|c| c.word.len()).min().unwrap_or(0);

    let n_dis = ((d * (epsilon * lambda_p_delta(map, 2, delta / 4.0)?).ln() / ln_pmax).ceil() as i64).max(0);
    let rho = lattice_tail(kernel, dis.b / (2.0 * PI))?;
    let n1_dis = (rho < 1.0 && delta * delta <= 2.0 * rho * rho / (1.0 - rho * rho)).then(|| {
        let q = 1.0 - delta * delta * (1.0 - rho * rho) / (4.0 * rho * rho);
        // the recursion contracts the squared norm by q per step
        (2.0 * delta.ln() / q.ln()).ceil() as i64
    });
    let (appendix_tmix, appendix_tdis) = appendix_times(map, kernel, epsilon, delta);
    let times = TimeBounds {
        epsilon,
        delta,
        n_mix: n_mix(map, epsilon, mix.eta)?,
        tmix_leading: d * epsilon.ln() / ln_pmax,
        witness_n,
        witness_n1,
        tmix_lower: (witness_n - witness_n1).max(0),
        tdis_lower_leading: d * epsilon.ln() / ln_pmin,
        tdis_upper_leading: d * epsilon.ln() / ln_pmax,
        tdis_lower,
        n_dis,
        rho,
        n1_dis,
        tdis_upper: n1_dis.map(|n1| n_dis + n1 + 1),
        appendix_tmix,
        appendix_tdis,
    };
    Ok(BoundReport { map: map.name.clone(), kernel: kernel.kind().as_str().to_string(), mix, dis, times })
}

/// Both sides of `Σ_{n≥1} H(σ^n S)^{1/p} ≤ H(S)^{1/p} / (1 − p_max^{1/(pd)})`, with the
/// left side summed over exact shifted families until they collapse to `{𝟎}`.
pub fn h_summable(map: &BernoulliMap, partition: &[CylinderSet], p: u32) -> Result<(f64, f64)> {
    check_map(map)?;
    check_p(p)?;
    let pf = p as f64;
    let d = map.dim() as f64;
    let rhs = perimeter_volume_h(partition).powf(1.0 / pf) / (1.0 - map.p_max().powf(1.0 / (pf * d)));
    let mut lhs = 0.0;
    let mut family = shift_partition(map, partition)?;
    while family.iter().any(|c| !c.word.is_empty()) {
        lhs += perimeter_volume_h(&family).powf(1.0 / pf);
        family = shift_partition(map, &family)?;
    }
    Ok((lhs, rhs))
}

/// Measured times at one `ε` for the duality inequalities.
#[derive(Clone, Debug, Serialize)]
pub struct DualityPoint {
    pub epsilon: f64,
    /// `t_dis(δ)`.
    pub t_dis: usize,
    /// `t_mix(δ²/4)`.
    pub t_mix_quarter: usize,
    /// `t_mix(δ')`.
    pub t_mix_prime: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityRow {
    pub epsilon: f64,
    pub t_dis: usize,
    pub t_mix_quarter: usize,
    pub dis_le_mix: bool,
    pub t_mix_prime: usize,
    pub mix_from_dis: f64,
    pub mix_le_dis: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DualityReport {
    pub delta: f64,
    pub delta_prime: f64,
    pub bold_k: f64,
    pub slack_steps: usize,
    pub rows: Vec<DualityRow>,
    pub violations: usize,
}

/// Checks `t_dis(δ) ≤ t_mix(δ²/4) + slack` and `t_mix(δ') ≤ 2 + log_δ(δ' ε^{d/2}/𝑲) t_dis(δ)`
/// at every point. Report only.
pub fn relate_tmix_tdis(points: &[DualityPoint], delta: f64, delta_prime: f64, bold_k: f64, d: usize, slack_steps: usize) -> DualityReport {
    let rows: Vec<DualityRow> = points
        .iter()
        .map(|pt| {
            let x = delta_prime * pt.epsilon.powf(d as f64 / 2.0) / bold_k;
            let mix_from_dis = 2.0 + x.ln() / delta.ln() * pt.t_dis as f64;
            DualityRow {
                epsilon: pt.epsilon,
                t_dis: pt.t_dis,
                t_mix_quarter: pt.t_mix_quarter,
                dis_le_mix: pt.t_dis <= pt.t_mix_quarter + slack_steps,
                t_mix_prime: pt.t_mix_prime,
                mix_from_dis,
                mix_le_dis: pt.t_mix_prime as f64 <= mix_from_dis,
            }
        })
        .collect();
    let violations = rows.iter().map(|r| usize::from(!r.dis_le_mix) + usize::from(!r.mix_le_dis)).sum();
    DualityReport { delta, delta_prime, bold_k, slack_steps, rows, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::PeriodizedGaussian;
    use crate::maps::map_preset;

    #[test]
    fn doubling_constants() {
        let map = map_preset("doubling").unwrap();
        assert_eq!(c1(&map), 2.0);
        assert!((lambda_p_delta(&map, 1, 0.5).unwrap() - 16.0).abs() < 1e-12);
        assert_eq!(n_mix(&map, 2f64.powi(-10), PI).unwrap(), 9);
        let s = structural_constants(&map, 1, 0.5, PI * PI / 2.0, 2.0).unwrap();
        assert!((s.eta - PI).abs() < 1e-12);
    }

    #[test]
    fn quad2d_c1() {
        let map = map_preset("quad2d").unwrap();
        // p_min = 1/4 in d = 2: 4 (2 + 2)
        assert!((c1(&map) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn identity_is_rejected() {
        let map = map_preset("identity").unwrap();
        assert!(matches!(lambda_p_delta(&map, 1, 0.5), Err(Error::Domain(_))));
        assert!(lambda_p_delta(&map_preset("doubling").unwrap(), 3, 0.5).is_err());
    }

    #[test]
    fn lambda_and_b_monotone() {
        let map = map_preset("intro3").unwrap();
        let ds = [0.1, 0.2, 0.4, 0.8];
        for w in ds.windows(2) {
            assert!(lambda_p_delta(&map, 2, w[0]).unwrap() > lambda_p_delta(&map, 2, w[1]).unwrap());
            assert!(b_p_delta(&map, 2, w[0]).unwrap() < b_p_delta(&map, 2, w[1]).unwrap());
        }
    }

    #[test]
    fn leading_slopes() {
        let g = PeriodizedGaussian::standard(1, 2f64.powi(-8)).unwrap();
        let dbl = theoretical_time_bounds(&map_preset("doubling").unwrap(), &g, PI * PI / 2.0, 2.0, 2f64.powi(-8), 0.5).unwrap();
        assert!((dbl.times.tmix_leading - 8.0).abs() < 1e-12);
        assert_eq!(dbl.times.tdis_lower_leading, dbl.times.tdis_upper_leading);
        assert_eq!(dbl.times.witness_n1, 2);
        let i3 = theoretical_time_bounds(&map_preset("intro3").unwrap(), &g, PI * PI / 2.0, 2.0, 2f64.powi(-8), 0.5).unwrap();
        assert!(i3.times.tdis_lower_leading < i3.times.tdis_upper_leading);
    }

    #[test]
    fn appendix_dissipation_for_doubling() {
        let map = map_preset("doubling").unwrap();
        assert_eq!(uniform_base(&map), Some(2));
        assert_eq!(uniform_base(&map_preset("intro3").unwrap()), None);
        let eps = 2f64.powi(-8);
        let g = PeriodizedGaussian::standard(1, eps).unwrap();
        let r = theoretical_time_bounds(&map, &g, PI * PI / 2.0, 2.0, eps, 0.5).unwrap();
        let t = r.times.appendix_tdis.unwrap() as i64;
        assert!((t - 8).abs() <= 2);
        // direct oracle: smallest n with Σ_{j<n} 4^j ≥ ln 2 / (2π²ε²)
        let need = 2f64.ln() / (2.0 * PI * PI * eps * eps);
        let mut acc = 0.0;
        let mut n = 0;
        while acc < need {
            acc += 4f64.powi(n);
            n += 1;
        }
        assert_eq!(t, n as i64);
    }

    #[test]
    fn gaussian_norm_matches_continuum_limit() {
        let eps: f64 = 1e-3;
        let k = eps.sqrt() * gaussian_l2_norm(1, eps);
        assert!((k - (4.0 * PI).powf(-0.25)).abs() < 1e-9);
    }

    #[test]
    fn h_summable_holds_on_partitions() {
        for name in ["doubling", "intro3", "quad2d"] {
            let map = map_preset(name).unwrap();
            let part = map.partition(0.01).unwrap();
            for p in [1, 2] {
                let (lhs, rhs) = h_summable(&map, &part, p).unwrap();
                assert!(lhs > 0.0 && lhs <= rhs * (1.0 + 1e-12), "{name} p={p}: {lhs} > {rhs}");
            }
        }
    }

    #[test]
    fn duality_report_counts() {
        let pts = [
            DualityPoint { epsilon: 0.01, t_dis: 7, t_mix_quarter: 8, t_mix_prime: 7 },
            DualityPoint { epsilon: 0.01, t_dis: 10, t_mix_quarter: 8, t_mix_prime: 7 },
        ];
        let r = relate_tmix_tdis(&pts, 0.5, 0.5, 0.5311, 1, 1);
        assert_eq!(r.violations, 1);
        assert!(!r.rows[1].dis_le_mix);
        // log_{1/2}(0.5 · 0.1 / 0.5311) ≈ 3.41
        assert!((r.rows[0].mix_from_dis - (2.0 + 7.0 * (0.05f64 / 0.5311).ln() / 0.5f64.ln())).abs() < 1e-12);
    }
}
