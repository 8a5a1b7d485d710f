use super::*;
use crate::quad;
use crate::rng::stream;

fn grid01(n: usize) -> impl Iterator<Item = f64> {
    (1..=n).map(move |i| i as f64 / (n as f64 + 1.0))
}

#[test]
fn exponential_pdf_near_origin_equals_rate() {
    let v = Family::Exponential.pdf(&[1.0], 1e-12);
    assert!((v - 1.0).abs() < 1e-9, "got {v}");
}

#[test]
fn weibull_pdf_at_scale() {
    // (shape/scale) * exp(-1) at x = scale.
    let v = Family::Weibull.pdf(&[5.0, 2.0], 5.0);
    let exact = 0.4 * (-1.0_f64).exp();
    assert!((v - exact).abs() < 1e-12, "got {v}, want {exact}");
}

#[test]
fn gamma_pdf_integrates_to_one() {
    // Fitted telecom sales-lag parameters.
    let p = [2.264, 1.714];
    let mass = quad::integrate(|x| Family::Gamma.pdf(&p, x), 0.0, 200.0, 1e-10).unwrap();
    assert!((mass - 1.0).abs() < 1e-6, "got {mass}");
}

#[test]
fn pdf_zero_outside_support() {
    for fam in [Family::Exponential, Family::Weibull, Family::Lognormal, Family::Gamma] {
        let p: Vec<f64> = match fam.param_count() {
            1 => vec![1.0],
            _ => vec![1.0, 1.0],
        };
        assert_eq!(fam.pdf(&p, 0.0), 0.0);
        assert_eq!(fam.pdf(&p, -3.0), 0.0);
        assert_eq!(fam.cdf(&p, 0.0), 0.0);
        assert_eq!(fam.cdf(&p, -1.0), 0.0);
    }
}

#[test]
fn weibull_cdf_at_scale_is_one_minus_inv_e() {
    let exact = 1.0 - (-1.0_f64).exp();
    for &(scale, shape) in &[(5.0, 2.0), (0.3, 0.7), (42.0, 1.0)] {
        let v = Family::Weibull.cdf(&[scale, shape], scale);
        assert!((v - exact).abs() < 1e-14);
    }
}

#[test]
fn lognormal_median_is_exp_mu() {
    assert!((Family::Lognormal.cdf(&[0.0, 1.0], 1.0) - 0.5).abs() < 1e-14);
    assert!((Family::Lognormal.cdf(&[2.0, 0.7], 2.0_f64.exp()) - 0.5).abs() < 1e-12);
}

#[test]
fn gamma_cdf_matches_pdf_integral() {
    let p = [3.0, 2.0];
    let direct = Family::Gamma.cdf(&p, 4.0);
    let integral = quad::integrate(|x| Family::Gamma.pdf(&p, x), 0.0, 4.0, 1e-12).unwrap();
    assert!((direct - integral).abs() < 1e-8, "{direct} vs {integral}");
}

#[test]
fn exponential_quantile_at_mean_level() {
    let u = 1.0 - (-1.0_f64).exp();
    let v = Family::Exponential.quantile(&[0.2], u).unwrap();
    assert!((v - 5.0).abs() < 1e-12);
}

#[test]
fn weibull_median_closed_form() {
    let v = Family::Weibull.quantile(&[4.0, 1.5], 0.5).unwrap();
    let exact = 4.0 * 2.0_f64.ln().powf(2.0 / 3.0);
    assert!((v - exact).abs() < 1e-12, "got {v}, want {exact}");
}

#[test]
fn quantile_rejects_levels_outside_unit_interval() {
    for u in [0.0, 1.0, -0.2, 1.7] {
        assert!(Family::Exponential.quantile(&[1.0], u).is_err());
    }
}

#[test]
fn quantile_cdf_round_trip_all_families() {
    let cases: Vec<(Family, Vec<f64>)> = vec![
        (Family::Exponential, vec![0.2]),
        (Family::Exponential, vec![7.3]),
        (Family::Weibull, vec![5.0, 2.0]),
        (Family::Weibull, vec![0.8, 0.6]),
        (Family::Lognormal, vec![1.0, 1.0]),
        (Family::Lognormal, vec![-2.0, 0.3]),
        (Family::Gamma, vec![2.264, 1.714]),
        (Family::Gamma, vec![0.4, 12.0]),
    ];
    for (fam, p) in cases {
        for u in grid01(99) {
            let x = fam.quantile(&p, u).unwrap();
            let back = fam.cdf(&p, x);
            assert!(
                (back - u).abs() < 1e-8,
                "{fam} {p:?}: u={u}, cdf(quantile(u))={back}"
            );
        }
    }
}

#[test]
fn gamma_quantile_bisection_cross_check() {
    // Independent root-bracketing oracle on the CDF.
    let p = [2.264, 1.714];
    for u in grid01(99) {
        let (mut lo, mut hi) = (1e-12, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if Family::Gamma.cdf(&p, mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = Family::Gamma.quantile(&p, u).unwrap();
        assert!((q - lo).abs() <= 1e-6 * (1.0 + lo), "u={u}: {q} vs {lo}");
    }
}

#[test]
fn pdf_normalization_over_effective_support() {
    let cases: Vec<(Family, Vec<f64>)> = vec![
        (Family::Exponential, vec![0.5]),
        (Family::Weibull, vec![5.0, 2.0]),
        (Family::Weibull, vec![4.0, 1.5]),
        (Family::Lognormal, vec![1.0, 0.8]),
        (Family::Gamma, vec![2.779, 0.080]),
    ];
    for (fam, p) in cases {
        let hi = fam.quantile(&p, 0.99999).unwrap();
        let mass = quad::integrate(|x| fam.pdf(&p, x), 0.0, hi, 1e-9).unwrap();
        assert!(
            mass >= 1.0 - 1e-4 && mass <= 1.0 + 1e-9,
            "{fam} {p:?}: mass {mass}"
        );
    }
}

#[test]
fn sample_mean_matches_law_of_large_numbers() {
    let mut rng = stream(11, 0, 0, 0);
    let n = 100_000;
    let mean = (0..n)
        .map(|_| Family::Exponential.sample(&[0.5], &mut rng))
        .sum::<f64>()
        / n as f64;
    assert!((mean - 2.0).abs() < 0.02, "mean {mean}");
}

fn ks_statistic(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = (f - i as f64 / n).abs();
            let hi = ((i + 1) as f64 / n - f).abs();
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

#[test]
fn weibull_draws_pass_ks_against_cdf() {
    let p = [5.0, 2.0];
    let mut rng = stream(12, 0, 0, 0);
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| Family::Weibull.sample(&p, &mut rng))
        .collect();
    draws.sort_by(f64::total_cmp);
    let d = ks_statistic(&draws, |x| Family::Weibull.cdf(&p, x));
    // Asymptotic 1% critical value.
    let crit = 1.628 / (draws.len() as f64).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn gamma_draws_pass_ks_against_cdf() {
    let p = [2.264, 1.714];
    let mut rng = stream(13, 0, 0, 0);
    let mut draws: Vec<f64> = (0..100_000)
        .map(|_| Family::Gamma.sample(&p, &mut rng))
        .collect();
    draws.sort_by(f64::total_cmp);
    let d = ks_statistic(&draws, |x| Family::Gamma.cdf(&p, x));
    let crit = 1.628 / (draws.len() as f64).sqrt();
    assert!(d < crit, "KS {d} >= {crit}");
}

#[test]
fn sampling_is_deterministic_per_seed() {
    for fam in [Family::Exponential, Family::Weibull, Family::Lognormal, Family::Gamma] {
        let p: Vec<f64> = match fam.param_count() {
            1 => vec![0.7],
            _ => vec![2.0, 1.3],
        };
        let a: Vec<f64> = {
            let mut rng = stream(99, 1, 2, 3);
            (0..32).map(|_| fam.sample(&p, &mut rng)).collect()
        };
        let b: Vec<f64> = {
            let mut rng = stream(99, 1, 2, 3);
            (0..32).map(|_| fam.sample(&p, &mut rng)).collect()
        };
        assert_eq!(a, b, "{fam} stream not reproducible");
    }
}

#[test]
fn exponential_fit_is_reciprocal_mean() {
    let fit = Family::Exponential.fit(&[1.0, 2.0, 3.0]).unwrap();
    assert!((fit.values[0] - 0.5).abs() < 1e-15);
}

#[test]
fn lognormal_fit_closed_form() {
    let e = std::f64::consts::E;
    let fit = Family::Lognormal.fit(&[e, e, e.powi(3)]).unwrap();
    assert!((fit.values[0] - 5.0 / 3.0).abs() < 1e-12);
    assert!((fit.values[1] - (8.0_f64 / 9.0).sqrt()).abs() < 1e-12);
}

#[test]
fn degenerate_two_parameter_fits_error() {
    for fam in [Family::Weibull, Family::Lognormal, Family::Gamma] {
        let err = fam.fit(&[2.5, 2.5, 2.5]).unwrap_err();
        assert!(matches!(err, Error::FitDegenerate(_)), "{fam}: {err}");
    }
}

#[test]
fn fit_rejects_invalid_data() {
    assert!(Family::Exponential.fit(&[]).is_err());
    assert!(Family::Weibull.fit(&[1.0, 0.0]).is_err());
    assert!(Family::Gamma.fit(&[1.0, -2.0]).is_err());
}

fn complete_log_lik(fam: Family, p: &[f64], data: &[f64]) -> f64 {
    data.iter().map(|&x| fam.log_pdf(p, x)).sum()
}

#[test]
fn weibull_fit_beats_grid_refinement_oracle() {
    let truth = [5.0, 2.0];
    let mut rng = stream(21, 0, 0, 0);
    let data: Vec<f64> = (0..10_000)
        .map(|_| Family::Weibull.sample(&truth, &mut rng))
        .collect();
    let fit = Family::Weibull.fit(&data).unwrap();
    let ll_fit = complete_log_lik(Family::Weibull, fit.as_slice(), &data);

    // Three-stage shrinking grid search around the truth.
    let mut center = truth;
    let mut half_width = [2.0, 1.0];
    let mut best = (f64::NEG_INFINITY, center);
    for _ in 0..3 {
        for i in 0..=20 {
            for j in 0..=20 {
                let scale = center[0] - half_width[0] + i as f64 * half_width[0] / 10.0;
                let shape = center[1] - half_width[1] + j as f64 * half_width[1] / 10.0;
                if scale <= 0.0 || shape <= 0.0 {
                    continue;
                }
                let ll = complete_log_lik(Family::Weibull, &[scale, shape], &data);
                if ll > best.0 {
                    best = (ll, [scale, shape]);
                }
            }
        }
        center = best.1;
        half_width = [half_width[0] / 10.0, half_width[1] / 10.0];
    }
    assert!(
        ll_fit >= best.0 - 1e-4,
        "fit loglik {ll_fit} below grid optimum {}",
        best.0
    );
}

#[test]
fn mle_stationarity_finite_difference_gradient() {
    let mut rng = stream(22, 0, 0, 0);
    let cases: Vec<(Family, Vec<f64>)> = vec![
        (Family::Exponential, vec![0.7]),
        (Family::Weibull, vec![5.0, 2.0]),
        (Family::Lognormal, vec![1.0, 0.8]),
        (Family::Gamma, vec![2.3, 1.7]),
    ];
    for (fam, truth) in cases {
        let data: Vec<f64> = (0..5000).map(|_| fam.sample(&truth, &mut rng)).collect();
        let fit = fam.fit(&data).unwrap();
        let ll0 = complete_log_lik(fam, fit.as_slice(), &data);
        for j in 0..fit.len() {
            let h = 1e-6 * fit.values[j].abs().max(1.0);
            let mut plus = fit.values.clone();
            plus[j] += h;
            let mut minus = fit.values.clone();
            minus[j] -= h;
            let grad = (complete_log_lik(fam, &plus, &data)
                - complete_log_lik(fam, &minus, &data))
                / (2.0 * h);
            let rel = grad.abs() * fit.values[j].abs().max(1.0) / ll0.abs().max(1.0);
            assert!(rel < 1e-4, "{fam} param {j}: relative gradient {rel}");
        }
    }
}

#[test]
fn joint_logpdf_independent_sum() {
    let m = JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Exponential,
        },
        ParamSet::new(vec![1.0, 1.0]),
    )
    .unwrap();
    assert!((m.log_pdf(&[1.0, 1.0]).unwrap() + 2.0).abs() < 1e-14);
}

#[test]
fn joint_logpdf_rejects_bad_points() {
    let m = JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Exponential,
        },
        ParamSet::new(vec![1.0, 1.0]),
    )
    .unwrap();
    assert!(m.log_pdf(&[1.0]).is_err());
    assert!(m.log_pdf(&[1.0, -1.0]).is_err());
}

#[test]
fn bivariate_with_zero_covariance_is_product_of_lognormals() {
    let m = JointModel::new(
        Structure::BivariateLognormal,
        ParamSet::new(vec![0.5, 1.5, 1.2, 0.8, 0.0]),
    )
    .unwrap();
    for &(x, t) in &[(0.5, 0.5), (1.0, 2.0), (3.0, 0.2), (10.0, 10.0)] {
        let joint = m.log_pdf(&[x, t]).unwrap();
        let split = Family::Lognormal.log_pdf(&[0.5, 1.2_f64.sqrt()], x)
            + Family::Lognormal.log_pdf(&[1.5, 0.8_f64.sqrt()], t);
        assert!((joint - split).abs() < 1e-12, "({x},{t}): {joint} vs {split}");
    }
}

#[test]
fn bivariate_logpdf_matches_correlation_form() {
    // Independent transcription using the correlation parameterization.
    let p = [1.0, 1.0, 1.0, 1.0, 0.3];
    let m = JointModel::new(Structure::BivariateLognormal, ParamSet::new(p.to_vec())).unwrap();
    let e = std::f64::consts::E;
    let (x, t) = (e, e);
    let rho = p[4] / (p[2] * p[3]).sqrt();
    let z1 = (x.ln() - p[0]) / p[2].sqrt();
    let z2 = (t.ln() - p[1]) / p[3].sqrt();
    let expected = -(2.0 * std::f64::consts::PI * (p[2] * p[3] * (1.0 - rho * rho)).sqrt()).ln()
        - (z1 * z1 - 2.0 * rho * z1 * z2 + z2 * z2) / (2.0 * (1.0 - rho * rho))
        - x.ln()
        - t.ln();
    let got = m.log_pdf(&[x, t]).unwrap();
    assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
}

#[test]
fn bivariate_sample_recovers_log_correlation() {
    let m = JointModel::new(
        Structure::BivariateLognormal,
        ParamSet::new(vec![1.0, 1.0, 1.0, 1.0, 0.3]),
    )
    .unwrap();
    let mut rng = stream(31, 0, 0, 0);
    let n = 100_000;
    let logs: Vec<(f64, f64)> = (0..n)
        .map(|_| {
            let (x, t) = m.sample_pair(&mut rng).unwrap();
            (x.ln(), t.ln())
        })
        .collect();
    let corr = log_corr(&logs);
    assert!((corr - 0.3).abs() < 0.01, "corr {corr}");
}

#[test]
fn independent_sample_has_zero_correlation() {
    let m = JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Weibull,
        },
        ParamSet::new(vec![0.7, 5.0, 2.0]),
    )
    .unwrap();
    let mut rng = stream(32, 0, 0, 0);
    let pairs: Vec<(f64, f64)> = (0..100_000)
        .map(|_| m.sample_pair(&mut rng).unwrap())
        .collect();
    let corr = log_corr(&pairs);
    assert!(corr.abs() < 0.01, "corr {corr}");
}

#[test]
fn joint_sample_marginal_passes_ks() {
    let m = JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Weibull,
        },
        ParamSet::new(vec![0.7, 5.0, 2.0]),
    )
    .unwrap();
    let mut rng = stream(33, 0, 0, 0);
    let mut xs: Vec<f64> = (0..100_000)
        .map(|_| m.sample_pair(&mut rng).unwrap().0)
        .collect();
    xs.sort_by(f64::total_cmp);
    let d = ks_statistic(&xs, |x| Family::Exponential.cdf(&[0.7], x));
    assert!(d < 1.628 / (xs.len() as f64).sqrt(), "KS {d}");
}

fn log_corr(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let m1 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let m2 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut v1, mut v2, mut c) = (0.0, 0.0, 0.0);
    for &(a, b) in pairs {
        v1 += (a - m1) * (a - m1);
        v2 += (b - m2) * (b - m2);
        c += (a - m1) * (b - m2);
    }
    c / (v1 * v2).sqrt()
}

#[test]
fn bivariate_fit_recovers_truth_from_large_sample() {
    let truth = vec![1.0, 1.0, 1.0, 1.0, 0.3];
    let m = JointModel::new(Structure::BivariateLognormal, ParamSet::new(truth.clone())).unwrap();
    let mut rng = stream(34, 0, 0, 0);
    let pairs: Vec<(f64, f64)> = (0..100_000)
        .map(|_| m.sample_pair(&mut rng).unwrap())
        .collect();
    let fit = Structure::BivariateLognormal.fit_pairs(&pairs).unwrap();
    for (got, want) in fit.values.iter().zip(&truth) {
        assert!(
            (got - want).abs() <= 0.02 * want.abs().max(0.1),
            "{got} vs {want}"
        );
    }
}

#[test]
fn bivariate_fit_degenerate_on_identical_points() {
    let err = Structure::BivariateLognormal
        .fit_pairs(&[(2.0, 3.0), (2.0, 3.0)])
        .unwrap_err();
    assert!(matches!(err, Error::FitDegenerate(_)));
}

#[test]
fn independent_fit_equals_componentwise() {
    let s = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let m = JointModel::new(s, ParamSet::new(vec![0.7, 5.0, 2.0])).unwrap();
    let mut rng = stream(35, 0, 0, 0);
    let pairs: Vec<(f64, f64)> = (0..500).map(|_| m.sample_pair(&mut rng).unwrap()).collect();
    let joint = s.fit_pairs(&pairs).unwrap();
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ts: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let fx = Family::Exponential.fit(&xs).unwrap();
    let ft = Family::Weibull.fit(&ts).unwrap();
    assert_eq!(joint.values[0], fx.values[0]);
    assert_eq!(joint.values[1..], ft.values[..]);
}

#[test]
fn invalid_params_are_rejected() {
    assert!(Family::Exponential.validate(&[0.0]).is_err());
    assert!(Family::Weibull.validate(&[1.0]).is_err());
    assert!(Family::Lognormal.validate(&[0.0, -1.0]).is_err());
    assert!(Structure::BivariateLognormal
        .validate(&[0.0, 0.0, 1.0, 1.0, 1.5])
        .is_err());
    assert!(Structure::BivariateLognormal
        .validate(&[0.0, 0.0, 1.0, 1.0, 0.5])
        .is_ok());
}

#[test]
fn structure_param_names_are_namespaced() {
    let s = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    assert_eq!(s.param_names(), vec!["x.rate", "t.scale", "t.shape"]);
    assert_eq!(
        Structure::BivariateLognormal.param_names(),
        vec!["mu1", "mu2", "sigma11", "sigma22", "sigma12"]
    );
}
