//! Distributional checks of the samplers and the verification harness against
//! closed-form oracles. Seeds are fixed; thresholds are 1% critical values
//! unless stated.

use ppratio::limit_laws::{self, LaplaceProbe};
use ppratio::par::map_trials;
use ppratio::quad::QuadSpec;
use ppratio::samplers::{
    sample_gamma_arrivals, sample_negbin_process, sample_ordered_points, sample_ratio_configuration, NbMethod,
    DEFAULT_CAP,
};
use ppratio::verify::{
    self, ks_critical, ks_distance, ks_two_sample, EmpiricalDistribution, MonteCarlo, PointMassConfig, SweepTarget,
};
use ppratio::{Execution, InverseSpec, RngStream, TailModel};

const MILLION: u64 = 1_000_000;

fn emp(v: Vec<f64>) -> EmpiricalDistribution {
    EmpiricalDistribution::new(v).unwrap()
}

#[test]
fn arrival_means() {
    let g1 = map_trials(Execution::Parallel, MILLION, |i| sample_gamma_arrivals(1, RngStream::new(1, i)).unwrap()[0]);
    let mean1 = g1.iter().sum::<f64>() / g1.len() as f64;
    assert!((mean1 - 1.0).abs() < 0.01, "{mean1}");
    let g5 = map_trials(Execution::Parallel, MILLION, |i| sample_gamma_arrivals(5, RngStream::new(2, i)).unwrap()[4]);
    let mean5 = g5.iter().sum::<f64>() / g5.len() as f64;
    assert!((mean5 - 5.0).abs() < 0.02, "{mean5}");
}

#[test]
fn first_over_second_arrival_is_uniform() {
    let u = verify::gamma_ratio_sample(&MonteCarlo::new(MILLION, 3)).unwrap();
    let d = ks_distance(&emp(u), |x| x.clamp(0.0, 1.0));
    assert!(d < 0.002, "{d}");
}

#[test]
fn scaled_tail_at_first_point_is_exponential() {
    let m = TailModel::pareto(2.0).unwrap();
    let inv = InverseSpec::default();
    let v = map_trials(Execution::Parallel, MILLION, |i| {
        let s = sample_ordered_points(&m, 1.0, 1, RngStream::new(4, i), &inv).unwrap();
        m.tail(s.points[0]).unwrap()
    });
    let d = ks_distance(&emp(v), |x| if x <= 0.0 { 0.0 } else { -(-x).exp_m1() });
    assert!(d < 0.002, "{d}");
}

#[test]
fn points_non_increasing_for_every_model() {
    let inv = InverseSpec::default();
    for m in [
        TailModel::pareto(0.7).unwrap(),
        TailModel::pareto_log(1.0, 2.0).unwrap(),
        TailModel::pareto_perturbed(2.0, 3.0, 0.5).unwrap(),
        TailModel::RapidZero,
        TailModel::SlowZero,
    ] {
        let bad = map_trials(Execution::Parallel, 100_000, |i| {
            let s = sample_ordered_points(&m, 1e-2, 6, RngStream::new(5, i), &inv).unwrap();
            s.log_points.windows(2).any(|w| w[1] > w[0]) || s.points.windows(2).any(|w| w[1] > w[0])
        });
        assert!(!bad.iter().any(|&b| b), "{m:?}");
    }
}

#[test]
fn unit_pareto_w_is_uniform() {
    let m = TailModel::pareto(1.0).unwrap();
    let inv = InverseSpec::default();
    let w = map_trials(Execution::Parallel, MILLION, |i| {
        sample_ratio_configuration(&m, 0.3, 1, 1, 0.5, RngStream::new(6, i), DEFAULT_CAP, &inv)
            .unwrap()
            .w_rn
            .unwrap()
    });
    let d = ks_distance(&emp(w), |x| x.clamp(0.0, 1.0));
    assert!(d < 0.002, "{d}");
}

#[test]
fn mean_below_count_matches_mixed_poisson_mean() {
    let m = TailModel::pareto(1.0).unwrap();
    let inv = InverseSpec::default();
    let counts = map_trials(Execution::Parallel, 200_000, |i| {
        sample_ratio_configuration(&m, 1.0, 0, 1, 0.5, RngStream::new(7, i), DEFAULT_CAP, &inv)
            .unwrap()
            .below
            .len() as f64
    });
    let mean = counts.iter().sum::<f64>() / counts.len() as f64;
    // E[Γ_1] (0.5^{-1} - 1) = 1; count variance 3, so se ≈ 0.004
    assert!((mean - 1.0).abs() < 0.015, "{mean}");
}

#[test]
fn pareto_w_is_t_free() {
    let m = TailModel::pareto(1.5).unwrap();
    let inv = InverseSpec::default();
    let draw = |t: f64, seed: u64| {
        emp(map_trials(Execution::Parallel, 100_000, |i| {
            sample_ratio_configuration(&m, t, 2, 2, 0.1, RngStream::new(seed, i), DEFAULT_CAP, &inv)
                .unwrap()
                .w_rn
                .unwrap()
        }))
    };
    let d = ks_two_sample(&draw(1.0, 8), &draw(1e-6, 9));
    assert!(d < verify::ks_critical_two_sample(100_000, 100_000), "{d}");
}

#[test]
fn nb_void_and_geometric_counts() {
    for method in [NbMethod::LimitRatios, NbMethod::MixedPoisson] {
        let counts = map_trials(Execution::Parallel, MILLION, |i| {
            sample_negbin_process(2, 1.0, 0.5, method, RngStream::new(10, i)).unwrap().count_above(0.5)
        });
        let void = counts.iter().filter(|&&c| c == 0).count() as f64 / counts.len() as f64;
        assert!((void - 0.25).abs() < 0.005, "{method:?} {void}");

        let geo = map_trials(Execution::Parallel, 200_000, |i| {
            sample_negbin_process(1, 1.0, 0.5, method, RngStream::new(11, i)).unwrap().count_above(0.5)
        });
        for k in 0..6 {
            let p = geo.iter().filter(|&&c| c == k).count() as f64 / geo.len() as f64;
            let want = 0.5f64.powi(k as i32 + 1);
            let se = (want * (1.0 - want) / geo.len() as f64).sqrt();
            assert!((p - want).abs() < 4.0 * se, "{method:?} k={k}: {p} vs {want}");
        }
    }
}

#[test]
fn nb_methods_agree_on_counts() {
    let count = |method, seed| {
        emp(map_trials(Execution::Parallel, MILLION, |i| {
            sample_negbin_process(3, 2.0, 0.3, method, RngStream::new(seed, i)).unwrap().points.len() as f64
        }))
    };
    let d = ks_two_sample(&count(NbMethod::LimitRatios, 12), &count(NbMethod::MixedPoisson, 13));
    assert!(d < 0.004, "{d}");
}

#[test]
fn nb_functional_examples() {
    let q = QuadSpec::default();
    let mc = MonteCarlo::new(200_000, 14);
    // geometric count law for n = 1, α = 1, a = 0.5
    let probe = LaplaceProbe::step(1.0, 0.5, 1.0).unwrap();
    let rep = verify::nb_functional_check(1, 1.0, &probe, 0.1, NbMethod::MixedPoisson, &mc, &q).unwrap();
    let pmf = rep.statistics.iter().find(|s| s.label == "interval_count_pmf").unwrap();
    assert!(pmf.p_value > 0.001, "{pmf:?}");
    // f ≡ 0 gives exactly one
    let zero = LaplaceProbe::step(0.0, 0.5, 1.0).unwrap();
    let rep = verify::nb_functional_check(2, 1.0, &zero, 0.1, NbMethod::LimitRatios, &mc, &q).unwrap();
    let lap = rep.statistics.iter().find(|s| s.label == "laplace_functional").unwrap();
    assert_eq!(lap.value, Some(1.0));
    assert!(verify::nb_functional_check(2, 1.0, &probe, 0.6, NbMethod::LimitRatios, &mc, &q).is_err());
}

#[test]
fn laplace_example_within_half_percent() {
    let q = QuadSpec::default();
    let probe = LaplaceProbe::step(1.0, 0.5, 1.0).unwrap();
    let rep =
        verify::nb_functional_check(2, 1.0, &probe, 1e-3, NbMethod::LimitRatios, &MonteCarlo::new(MILLION, 15), &q)
            .unwrap();
    let lap = rep.statistics.iter().find(|s| s.label == "laplace_functional").unwrap();
    let target = lap.target.unwrap();
    assert!((target - 0.612_699_836_780_282f64.powi(2)).abs() < 1e-12);
    assert!((lap.value.unwrap() - target).abs() / target < 0.005, "{lap:?}");
}

#[test]
fn product_of_successive_ratios_matches_w_law() {
    let (alpha, r, n) = (1.5, 2usize, 3usize);
    let mc = MonteCarlo::new(MILLION, 16);
    let prod = map_trials(Execution::Parallel, mc.trials, |i| {
        let mut g = RngStream::new(mc.seed, i).generator();
        (0..n).map(|j| g.uniform_open0().powf(1.0 / ((r + j) as f64 * alpha))).product::<f64>()
    });
    let d = ks_distance(&emp(prod), |w| limit_laws::w_cdf(alpha, r as u32, n as u32, w));
    assert!(d < 0.003, "{d}");
}

#[test]
fn ks_null_calibration() {
    // 100 seeds of an exact-law sweep; 1% level allows at most 3 exceedances
    let m = TailModel::pareto(1.0).unwrap();
    let exceed = (0..100)
        .filter(|&seed| {
            let rep =
                verify::convergence_sweep(&m, 1, 2, &[0.5], SweepTarget::WLaw, &MonteCarlo::new(10_000, 1_000 + seed))
                    .unwrap();
            !rep.pass
        })
        .count();
    assert!(exceed <= 3, "{exceed}");
}

#[test]
fn sweep_targets_on_exact_models() {
    let mc = MonteCarlo::new(100_000, 17);
    let m = TailModel::pareto(1.5).unwrap();
    let rep = verify::convergence_sweep(&m, 2, 3, &[1.0, 1e-3, 1e-6], SweepTarget::WLaw, &mc).unwrap();
    assert!(rep.statistics.iter().all(|s| s.pass) && !rep.heuristic_threshold, "{}", rep.to_json());
    let m = TailModel::pareto(2.0).unwrap();
    let rep = verify::convergence_sweep(&m, 0, 1, &[0.1], SweepTarget::GammaNc, &mc).unwrap();
    assert!(rep.pass && rep.statistics[0].ks < ks_critical(100_000), "{}", rep.to_json());
    let rep = verify::convergence_sweep(&m, 2, 1, &[0.1], SweepTarget::RatioTailN1, &mc).unwrap();
    assert!(rep.pass, "{}", rep.to_json());
    let rep = verify::convergence_sweep(&m, 1, 3, &[0.1], SweepTarget::SuccessiveRatios, &mc).unwrap();
    assert_eq!(rep.statistics.len(), 4);
    assert!(rep.pass, "{}", rep.to_json());
}

#[test]
fn perturbed_sweep_flags_heuristic_threshold() {
    let m = TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap();
    let rep = verify::convergence_sweep(&m, 1, 1, &[1e-1, 1e-4], SweepTarget::WLaw, &MonteCarlo::new(20_000, 18))
        .unwrap();
    assert!(rep.heuristic_threshold && !rep.notes.is_empty());
    assert_eq!(rep.threshold, 0.01);
    let ks = verify::sweep_ks_series(&rep);
    assert!(ks[0] > ks[1], "{ks:?}");
}

#[test]
fn point_mass_verdicts() {
    let mc = MonteCarlo::new(10_000, 19);
    let pm = PointMassConfig::default();
    let rapid = verify::independence_check(&TailModel::RapidZero, 1e-12, 1, 2, &mc, &pm).unwrap();
    assert_eq!(rapid.verdict.as_deref(), Some("point_mass_at_one"));
    assert!(rapid.pass, "{}", rapid.to_json());
    let slow = verify::independence_check(&TailModel::SlowZero, 1e-4, 1, 2, &mc, &pm).unwrap();
    assert_eq!(slow.verdict.as_deref(), Some("point_mass_at_zero"));
    assert!(slow.pass, "{}", slow.to_json());
}

#[test]
fn independence_coarsens_grid_for_small_samples() {
    let m = TailModel::pareto(1.0).unwrap();
    let rep = verify::independence_check(&m, 1.0, 1, 2, &MonteCarlo::new(200, 20), &PointMassConfig::default()).unwrap();
    assert!(rep.parameters["grid"].as_u64().unwrap() < 10);
    assert!(verify::independence_check(&m, 1.0, 1, 1, &MonteCarlo::new(200, 20), &PointMassConfig::default()).is_err());
}

#[test]
fn identity_examples() {
    let mc = MonteCarlo::new(MILLION, 21);
    let rep = verify::identity_checks(1.0, 1, 2, &mc, &verify::ConditioningBin::default()).unwrap();
    let get = |label: &str| rep.statistics.iter().find(|s| s.label == label).unwrap().ks;
    assert!(get("product_of_betas") < 0.003);
    assert!(get("sum_of_pareto") < 0.003);
    assert!(get("conditional_order_stat_1") < 0.01);
    assert!(rep.parameters["conditioned_trials"].as_u64().unwrap() > 90_000);
}

#[test]
fn estimator_examples() {
    let mc = MonteCarlo::new(MILLION, 22);
    for (alpha, r) in [(2.0, 1), (0.5, 3)] {
        let est = verify::estimate_alpha_mc(&TailModel::pareto(alpha).unwrap(), 1.0, r, &mc).unwrap();
        assert!((est.alpha_hat - alpha).abs() < 3.0 * est.stderr, "{est:?}");
    }
}

#[test]
fn classifier_examples() {
    let mc = MonteCarlo::new(2_000, 23);
    let cfg = verify::ClassifierConfig::default();
    let p = verify::classify_tail(&TailModel::pareto(1.0).unwrap(), 1e-4, 8, &mc, &cfg).unwrap();
    match p.verdict {
        verify::TailVerdict::RegularlyVarying { alpha_hat } => assert!((alpha_hat - 1.0).abs() < 0.1),
        other => panic!("{other:?}"),
    }
    let r = verify::classify_tail(&TailModel::RapidZero, 1e-4, 8, &mc, &cfg).unwrap();
    assert_eq!(r.verdict, verify::TailVerdict::RapidlyVarying);
    let s = verify::classify_tail(&TailModel::SlowZero, 1e-4, 8, &mc, &cfg).unwrap();
    assert_eq!(s.verdict, verify::TailVerdict::SlowlyVarying);
    // RapidZero at moderate t looks like an interior law of large index, not a point mass
    let near = verify::classify_tail(&TailModel::RapidZero, 1e-4, 1, &mc, &cfg);
    assert!(!matches!(near, Ok(c) if c.verdict == verify::TailVerdict::RapidlyVarying));
}

#[test]
fn conditional_proxies_on_exact_model() {
    let m = TailModel::pareto(1.0).unwrap();
    let mc = MonteCarlo::new(200_000, 24);
    let z = verify::z_insensitivity_check(&m, 0.01, 1, 2, 4, &mc).unwrap();
    assert!(z.pass, "{}", z.to_json());
    let g = verify::conditional_gamma_check(&m, 0.01, 1, 2, 4, &mc).unwrap();
    assert!(g.pass, "{}", g.to_json());
}

#[test]
fn sequential_and_parallel_reports_match() {
    let m = TailModel::pareto_log(1.0, 2.0).unwrap();
    let mc = MonteCarlo::new(20_000, 25);
    let a = verify::convergence_sweep(&m, 1, 2, &[0.1, 0.01], SweepTarget::WLaw, &mc.with_exec(Execution::Sequential))
        .unwrap();
    let b = verify::convergence_sweep(&m, 1, 2, &[0.1, 0.01], SweepTarget::WLaw, &mc.with_exec(Execution::Parallel))
        .unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn median_ks_over_seeds_decreases_along_grid() {
    let m = TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap();
    let grid = [1e-1, 1e-2, 1e-3, 1e-4];
    let series: Vec<Vec<f64>> = (0..9)
        .map(|seed| {
            let rep = verify::convergence_sweep(&m, 1, 1, &grid, SweepTarget::WLaw, &MonteCarlo::new(10_000, 2_000 + seed))
                .unwrap();
            verify::sweep_ks_series(&rep)
        })
        .collect();
    let medians: Vec<f64> = (0..grid.len())
        .map(|j| {
            let mut col: Vec<f64> = series.iter().map(|s| s[j]).collect();
            col.sort_by(f64::total_cmp);
            col[col.len() / 2]
        })
        .collect();
    let inversions = medians.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{medians:?}");
    assert!(medians[0] > 2.0 * medians[grid.len() - 1], "{medians:?}");
}
