use super::*;
use crate::data::{FieldDataset, Scheme, UnitRecord};
use crate::distributions::Family;
use crate::rng::stream;
use crate::sem;

fn exp_exp(rate_x: f64, rate_t: f64) -> JointModel {
    JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Exponential,
        },
        ParamSet::new(vec![rate_x, rate_t]),
    )
    .unwrap()
}

fn exp_weibull(rate: f64, scale: f64, shape: f64) -> JointModel {
    JointModel::new(
        Structure::IndependentXt {
            fam_x: Family::Exponential,
            fam_t: Family::Weibull,
        },
        ParamSet::new(vec![rate, scale, shape]),
    )
    .unwrap()
}

#[test]
fn zero_warranty_means_nothing_observed() {
    let m = exp_exp(0.3, 0.9);
    assert_eq!(missing_prob(&m, 6.0, 0.0).unwrap(), 0.0);
}

#[test]
fn exp_exp_convolution_closed_form() {
    // With no warranty limit the region is {X + T < c}; for independent
    // exponentials with distinct rates a and b the convolution CDF is
    // 1 - (a exp(-b c) - b exp(-a c)) / (a - b).
    let (a, b, c) = (0.3, 0.9, 4.0);
    let m = exp_exp(a, b);
    let got = missing_prob(&m, c, f64::INFINITY).unwrap();
    let exact = 1.0 - (a * (-b * c).exp() - b * (-a * c).exp()) / (a - b);
    assert!((got - exact).abs() < 1e-9, "{got} vs {exact}");
}

#[test]
fn missing_prob_matches_monte_carlo() {
    let m = exp_weibull(0.7, 5.0, 2.0);
    let (censor, tau) = (6.0, 5.0);
    let p = missing_prob(&m, censor, tau).unwrap();
    let mut rng = stream(61, 0, 0, 0);
    let n = 4_000_000u64;
    let mut hits = 0u64;
    for _ in 0..n {
        let (x, t) = m.sample_pair(&mut rng).unwrap();
        if x + t < censor && t < tau {
            hits += 1;
        }
    }
    let fraction = hits as f64 / n as f64;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!(
        (fraction - p).abs() < 3.0 * sd,
        "MC {fraction} vs quadrature {p} (3sd = {})",
        3.0 * sd
    );
}

#[test]
fn bivariate_missing_prob_matches_conditional_reduction() {
    // Oracle: integrate f_T(t) * Phi((ln(c-t) - mu_c(t)) / sigma_c) with a
    // plain Simpson rule, using the conditional normal of ln X given ln T.
    let p = [1.0, 1.0, 1.0, 1.0, 0.3];
    let m = JointModel::new(Structure::BivariateLognormal, ParamSet::new(p.to_vec())).unwrap();
    let (censor, tau) = (6.0, 4.0);
    let got = missing_prob(&m, censor, tau).unwrap();

    let sigma_c = (p[2] - p[4] * p[4] / p[3]).sqrt();
    let integrand = |t: f64| {
        if t <= 0.0 || t >= censor {
            return 0.0;
        }
        let ft = Family::Lognormal.pdf(&[p[1], p[3].sqrt()], t);
        let mu_c = p[0] + p[4] / p[3] * (t.ln() - p[1]);
        ft * crate::distributions::normal_cdf(((censor - t).ln() - mu_c) / sigma_c)
    };
    let n = 20_000;
    let h = tau / n as f64;
    let mut simpson = integrand(0.0) + integrand(tau);
    for i in 1..n {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        simpson += w * integrand(i as f64 * h);
    }
    simpson *= h / 3.0;
    assert!((got - simpson).abs() < 1e-6, "{got} vs {simpson}");
}

#[test]
fn independent_one_dimensional_reduction_matches_2d_quadrature() {
    let m = exp_weibull(0.7, 5.0, 2.0);
    let (censor, tau) = (6.0, 5.0);
    let reduced = missing_prob(&m, censor, tau).unwrap();
    let full = crate::quad::integrate_2d(
        |x, t| m.log_pdf(&[x, t]).map(f64::exp).unwrap_or(0.0),
        0.0,
        tau.min(censor),
        |t| censor - t,
        1e-9,
    )
    .unwrap();
    assert!((reduced - full).abs() < 1e-6, "{reduced} vs {full}");
}

#[test]
fn missing_prob_monotone_in_censor_and_warranty() {
    let m = exp_weibull(0.7, 5.0, 2.0);
    let mut last = 0.0;
    for censor in [1.0, 2.0, 4.0, 6.0, 10.0, 20.0] {
        let p = missing_prob(&m, censor, 5.0).unwrap();
        assert!(p >= last - 1e-12, "not monotone in censor at {censor}");
        last = p;
    }
    last = 0.0;
    for tau in [0.5, 1.0, 2.0, 4.0, 8.0, f64::INFINITY] {
        let p = missing_prob(&m, 6.0, tau).unwrap();
        assert!(p >= last - 1e-12, "not monotone in tau at {tau}");
        last = p;
    }
}

#[test]
fn infinite_censor_reduces_to_warranty_probability() {
    let m = exp_weibull(0.7, 5.0, 2.0);
    let p = missing_prob(&m, f64::INFINITY, 5.0).unwrap();
    let exact = Family::Weibull.cdf(&[5.0, 2.0], 5.0);
    assert!((p - exact).abs() < 1e-12);
    assert_eq!(missing_prob(&m, f64::INFINITY, f64::INFINITY).unwrap(), 1.0);
}

fn claims_only_dataset() -> FieldDataset {
    FieldDataset {
        tau: 10.0,
        scheme: Scheme::PairXt,
        records: (1..=30)
            .map(|i| UnitRecord::Claim {
                x: 0.1 + 0.2 * i as f64,
                t: 0.3 + 0.13 * i as f64,
                censor: f64::INFINITY,
            })
            .collect(),
        aux: vec![],
    }
}

#[test]
fn claims_only_loglik_equals_pseudo_q_exactly() {
    let d = claims_only_dataset();
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let theta = ParamSet::new(vec![0.6, 4.0, 1.8]);
    let model = JointModel::new(structure, theta.clone()).unwrap();
    let completed = sem::s_step(&d, &model, 1, 1, 10).unwrap();
    let q = sem::pseudo_q(&theta, &completed, &structure).unwrap();
    let ll = direct_loglik(&theta, &d, &structure).unwrap();
    assert_eq!(ll, q);
}

#[test]
fn far_horizon_unreturned_unit_contributes_nothing() {
    let d = FieldDataset {
        tau: 5.0,
        scheme: Scheme::PairXt,
        records: vec![UnitRecord::Unreturned { censor: 6.0 }],
        aux: vec![],
    };
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Exponential,
    };
    // Mean sales lag of 10^6 months: survival factor is essentially 1.
    let ll = direct_loglik(&ParamSet::new(vec![1e-6, 1e-6]), &d, &structure).unwrap();
    assert!(ll.abs() < 1e-4, "loglik {ll}");
}

#[test]
fn direct_loglik_matches_independent_transcription() {
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let theta = ParamSet::new(vec![0.8, 3.0, 1.4]);
    let mut records = vec![];
    let mut rng = stream(62, 0, 0, 0);
    let model = JointModel::new(structure, theta.clone()).unwrap();
    for _ in 0..40 {
        let (x, t) = model.sample_pair(&mut rng).unwrap();
        if x + t < 8.0 && t < 6.0 {
            records.push(UnitRecord::Claim { x, t, censor: 8.0 });
        } else {
            records.push(UnitRecord::Unreturned { censor: 8.0 });
        }
    }
    let d = FieldDataset { tau: 6.0, scheme: Scheme::PairXt, records, aux: vec![] };
    let ll = direct_loglik(&theta, &d, &structure).unwrap();

    // Plain transcription: per-record terms, no censor grouping.
    let mut expected = 0.0;
    for rec in &d.records {
        match rec {
            UnitRecord::Claim { x, t, .. } => {
                expected += Family::Exponential.log_pdf(&[0.8], *x)
                    + Family::Weibull.log_pdf(&[3.0, 1.4], *t);
            }
            UnitRecord::Unreturned { censor } => {
                let p = missing_prob(&model, *censor, d.tau).unwrap();
                expected += (1.0 - p).ln();
            }
            _ => unreachable!(),
        }
    }
    assert!((ll - expected).abs() < 1e-10, "{ll} vs {expected}");
}

#[test]
fn direct_fit_is_an_ascent_from_perturbed_truth() {
    let truth = ParamSet::new(vec![0.7, 5.0, 2.0]);
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let d = crate::sim::generate_batch(
        &JointModel::new(structure, truth.clone()).unwrap(),
        400,
        20.0,
        20.0,
        63,
    )
    .unwrap();
    let init = ParamSet::new(vec![0.75, 4.6, 2.2]);
    let ll_init = direct_loglik(&init, &d, &structure).unwrap();
    let report = direct_fit(&d, &structure, &init);
    assert!(report.loglik >= ll_init, "{} < {}", report.loglik, ll_init);
    assert!(report.estimate.is_some());
}

#[test]
fn direct_fit_agrees_with_sem_at_low_missing_rate() {
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let truth = JointModel::new(structure, ParamSet::new(vec![0.7, 5.0, 2.0])).unwrap();
    let d = crate::sim::generate_batch(&truth, 500, 20.0, 20.0, 64).unwrap();
    assert!(d.missing_rate() < 0.1, "missing rate {}", d.missing_rate());

    let sem_est = sem::run_sem(&d, structure, &sem::SemConfig::new(65)).unwrap();
    let init = sem::auto_init(&d, &structure).unwrap();
    let report = direct_fit(&d, &structure, &init);
    assert!(report.converged, "direct fit failed: {}", report.message);
    let direct = report.estimate.unwrap();
    for (a, b) in direct.as_slice().iter().zip(sem_est.estimate.as_slice()) {
        assert!(
            (a - b).abs() <= 0.05 * b.abs(),
            "direct {a} vs SEM {b}"
        );
    }
}

#[test]
fn aic_arithmetic_matches_reference_rows() {
    assert!((aic(4, -584.2) - 1176.4).abs() < 1e-9);
    assert!((aic(3, -586.5) - 1179.0).abs() < 1e-9);
    assert_eq!(aic(0, 0.0), 0.0);
}

#[test]
fn model_aic_uses_the_direct_likelihood() {
    let d = claims_only_dataset();
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Weibull,
    };
    let theta = ParamSet::new(vec![0.6, 4.0, 1.8]);
    let (ll, a) = model_aic(&theta, &d, &structure).unwrap();
    assert_eq!(a, aic(3, ll));
}

#[test]
fn triple_scheme_is_rejected() {
    let d = FieldDataset {
        tau: f64::INFINITY,
        scheme: Scheme::TripleXyt,
        records: vec![UnitRecord::SumClaim { lo: 1.0, hi: 2.0 }],
        aux: vec![],
    };
    let structure = Structure::IndependentXt {
        fam_x: Family::Exponential,
        fam_t: Family::Exponential,
    };
    assert!(direct_loglik(&ParamSet::new(vec![1.0, 1.0]), &d, &structure).is_err());
}
