use bernoulli_mix::bounds::{b_p_delta, lambda_p_delta};
use bernoulli_mix::density::{indicator_density, Evolution, GridDensity, TransferPlan};
use bernoulli_mix::kernels::PeriodizedGaussian;
use bernoulli_mix::maps::{map_preset, Word};
use bernoulli_mix::metrics::fit_points;
use proptest::prelude::*;

fn density(values: Vec<f64>) -> GridDensity {
    let m = values.len();
    let mean = values.iter().sum::<f64>() / m as f64;
    GridDensity::new(1, m, values.iter().map(|v| v / mean).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tv_is_nonincreasing(values in prop::collection::vec(0.0f64..1.0, 81), k in 3i32..7, intro in any::<bool>()) {
        prop_assume!(values.iter().sum::<f64>() > 1e-3);
        let (name, m) = if intro { ("intro3", 81) } else { ("doubling", 64) };
        let map = map_preset(name).unwrap();
        let g = PeriodizedGaussian::standard(1, 2f64.powi(-k)).unwrap();
        let evo = Evolution::new(&map, &g, m).unwrap();
        let mut f = density(values[..m].to_vec());
        let mut prev = f.distances().tv;
        for _ in 0..6 {
            f = evo.step_t_star(&f).unwrap();
            prop_assert!((f.mean() - 1.0).abs() < 1e-12);
            let tv = f.distances().tv;
            prop_assert!(tv <= prev + 1e-12);
            prev = tv;
        }
    }

    #[test]
    fn shift_law_on_aligned_grids(word in prop::collection::vec(0usize..2, 0..7), intro in any::<bool>()) {
        let (name, m) = if intro { ("intro3", 729) } else { ("doubling", 128) };
        let map = map_preset(name).unwrap();
        let s = Word::new(word);
        let pushed = TransferPlan::new(&map, m).unwrap().push(&indicator_density(&map, &s, m).unwrap()).unwrap();
        prop_assert_eq!(pushed, indicator_density(&map, &s.shift(), m).unwrap());
    }

    #[test]
    fn lambda_and_b_are_monotone_in_delta(a in 0.01f64..0.98, b in 0.01f64..0.98, p in 1u32..3) {
        prop_assume!((a - b).abs() > 1e-6);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for name in ["doubling", "intro3", "quad2d"] {
            let map = map_preset(name).unwrap();
            prop_assert!(lambda_p_delta(&map, p, lo).unwrap() > lambda_p_delta(&map, p, hi).unwrap());
            prop_assert!(b_p_delta(&map, p, lo).unwrap() < b_p_delta(&map, p, hi).unwrap());
        }
    }

    #[test]
    fn fit_recovers_linear_laws(slope in 0.1f64..3.0, intercept in -5.0f64..5.0) {
        let pts: Vec<(f64, f64)> = (3..=9).map(|k| (2f64.powi(-k), slope * k as f64 + intercept)).collect();
        let fit = fit_points(&pts).unwrap();
        prop_assert!((fit.slope - slope).abs() < 1e-9);
        prop_assert!((fit.intercept - intercept).abs() < 1e-8);
        prop_assert!(fit.max_residual < 1e-8);
    }
}
