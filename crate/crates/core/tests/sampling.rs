use fourier_interp::quad::GaussLegendre;
use statrs::function::erf::erf;
use fourier_interp::rng;
use fourier_interp::sampling::{build_dist, draw_weighted, weighted_norm_sq, TimeDistribution};
use fourier_interp::{Complex64, Error};
use proptest::prelude::*;

#[test]
fn normalization_and_density_examples() {
    let k = std::f64::consts::E.powi(2);
    let d = build_dist(k, 1.0, None).unwrap();
    assert!((d.c - 1.0 / 6.0).abs() < 1e-12);
    assert!((d.density(0.0) - d.c).abs() < 1e-12);
    assert!((d.density(1.0 - 1.0 / (2.0 * k)) - d.c * k).abs() < 1e-9);
    assert!((d.density(-(1.0 - 1.0 / (2.0 * k))) - d.c * k).abs() < 1e-9);
    let t = 2.5;
    let d = build_dist(4.0, t, None).unwrap();
    assert!((d.density(0.0) - d.c / t).abs() < 1e-12);
    let total: f64 = {
        let n = 200_000;
        let h = 2.0 * t / n as f64;
        (0..n).map(|i| d.density(-t + (i as f64 + 0.5) * h) * h).sum()
    };
    assert!((total - 1.0).abs() < 1e-4, "{total}");
    assert!((d.cdf(t) - 1.0).abs() < 1e-12);
}

#[test]
fn restriction_must_contain_the_bulk() {
    assert!(matches!(build_dist(4.0, 1.0, Some((-0.5, 0.9))), Err(Error::InvalidInput(_))));
    let d = build_dist(4.0, 1.0, Some((-0.8, 0.9))).unwrap();
    assert!((d.cdf(0.9) - 1.0).abs() < 1e-12);
    assert_eq!(d.density(0.95), 0.0);
    assert!(build_dist(1.0, 1.0, None).is_err());
}

#[test]
fn single_draw_weight() {
    let d = TimeDistribution::on_window(3.0, 2.0, None).unwrap();
    let set = draw_weighted(&d, 1, &mut rng::stream(1)).unwrap();
    assert_eq!(set.len(), 1);
    let t = set.times[0];
    assert!((0.0..=2.0).contains(&t));
    assert!((set.weights[0] - 1.0 / (2.0 * d.density(t))).abs() < 1e-12);
    assert!(draw_weighted(&d, 0, &mut rng::stream(1)).is_err());
}

#[test]
fn empirical_cdf_matches() {
    for (k, restrict) in [(2.0, None), (8.0, None), (8.0, Some((0.2, 0.7)))] {
        let d = TimeDistribution::on_window(k, 1.0, restrict).unwrap();
        let n = 100_000;
        let mut r = rng::stream(7);
        let mut xs: Vec<f64> = (0..n).map(|_| d.sample(&mut r)).collect();
        xs.sort_by(f64::total_cmp);
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let c = d.cdf(x);
                ((i + 1) as f64 / n as f64 - c).abs().max((c - i as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "k={k} {restrict:?}: KS {ks}");
    }
}

fn sum_of_weights_hits(k: usize, trials: u64, seed: u64) -> (usize, usize) {
    let kf = k as f64;
    let s = (10.0 * kf * kf.log2()).ceil() as usize;
    let d = TimeDistribution::on_window(kf, 1.0, None).unwrap();
    let good = (0..trials)
        .filter(|&i| {
            let set = draw_weighted(&d, s, &mut rng::child(seed, i)).unwrap();
            (set.weights.iter().sum::<f64>() - 1.0).abs() <= 0.05
        })
        .count();
    (good, s)
}

#[test]
#[ignore = "weight variance puts Σw outside ±0.05 in about a third of trials at this s"]
fn constant_function_energy_is_recovered() {
    for k in [2usize, 4, 8] {
        let (good, _) = sum_of_weights_hits(k, 100, 11);
        assert!(good >= 95, "k={k}: {good}/100");
    }
}

#[test]
fn sum_of_weights_spread_matches_weight_variance() {
    for k in [2usize, 4, 8] {
        let d = TimeDistribution::on_window(k as f64, 1.0, None).unwrap();
        let (a, b) = (d.support.0 + d.offset, d.support.1 + d.offset);
        // single-draw weight is 1/D(t) on a unit window
        let second = GaussLegendre::order16().composite(|t| 1.0 / d.density(t), a, b, 4000);
        let (good, s) = sum_of_weights_hits(k, 400, 12);
        let sd = ((second - 1.0) / s as f64).sqrt();
        let predicted = erf(0.05 / (sd * std::f64::consts::SQRT_2));
        let rate = good as f64 / 400.0;
        assert!((rate - predicted).abs() <= 0.08, "k={k}: rate {rate} predicted {predicted}");
    }
}

#[test]
fn single_sample_estimates_are_unbiased() {
    let d = TimeDistribution::on_window(2.0, 1.0, None).unwrap();
    type Case = (fn(f64) -> Complex64, f64);
    let funcs: [Case; 3] = [
        (|_| Complex64::new(1.0, 0.0), 1.0),
        (|t| Complex64::new(t, 0.0), 1.0 / 3.0),
        (|t| Complex64::new((3.0 * t).cos(), t * t), 0.5 + (6.0f64).sin() / 12.0 + 0.2),
    ];
    for (idx, (f, exact)) in funcs.iter().enumerate() {
        let mut r = rng::stream(100 + idx as u64);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| draw_weighted(&d, 1, &mut r).unwrap().norm_sq_of(f)).sum::<f64>() / n as f64;
        assert!((mean - exact).abs() <= 0.02 * exact, "f{idx}: {mean} vs {exact}");
    }
}

#[test]
fn weighted_norm_examples() {
    let z = Complex64::new(0.0, 0.0);
    assert_eq!(weighted_norm_sq(&[z, z], &[1.0, 2.0]).unwrap(), 0.0);
    let v = Complex64::new(3.0, 4.0);
    assert_eq!(weighted_norm_sq(&[v], &[0.5]).unwrap(), 12.5);
    assert!(matches!(weighted_norm_sq(&[v], &[0.5, 1.0]), Err(Error::InvalidInput(_))));
}

proptest! {
    #[test]
    fn quantile_inverts_cdf(k in 2.0..64.0f64, q in 0.0..1.0f64, half in 0.1..10.0f64) {
        let d = build_dist(k, half, None).unwrap();
        let t = d.quantile(q);
        prop_assert!(t >= -half && t <= half);
        prop_assert!((d.cdf(t) - q).abs() <= 1e-9);
    }

    #[test]
    fn cdf_is_monotone(k in 2.0..64.0f64, a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let d = build_dist(k, 1.0, None).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(d.cdf(lo) <= d.cdf(hi) + 1e-15);
        prop_assert!(d.density(lo) > 0.0);
    }

    #[test]
    fn weights_follow_the_density(k in 2.0..32.0f64, s in 1usize..50, seed in any::<u64>()) {
        let d = TimeDistribution::on_window(k, 1.0, None).unwrap();
        let set = draw_weighted(&d, s, &mut rng::stream(seed)).unwrap();
        for (t, w) in set.times.iter().zip(&set.weights) {
            prop_assert!(*w > 0.0);
            prop_assert!((w * s as f64 * d.density(*t) - 1.0).abs() < 1e-9);
        }
    }
}
