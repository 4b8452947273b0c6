use proptest::prelude::*;

use ppratio::io;
use ppratio::limit_laws::{self, LawSpec};
use ppratio::samplers::{sample_negbin_process, sample_ratio_configuration, NbMethod, DEFAULT_CAP};
use ppratio::verify::{ks_distance, EmpiricalDistribution};
use ppratio::{InverseSpec, RngStream, TailModel};

fn regular_model() -> impl Strategy<Value = TailModel> {
    prop_oneof![
        (0.2f64..4.0).prop_map(|a| TailModel::pareto(a).unwrap()),
        (0.2f64..4.0, -2.0f64..3.0)
            .prop_filter_map("non-monotone tail", |(a, b)| TailModel::pareto_log(a, b).ok()),
        (0.2f64..4.0, 0.1f64..3.0, 0.1f64..2.0)
            .prop_filter_map("non-monotone tail", |(a, c, g)| TailModel::pareto_perturbed(a, c, g).ok()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn inverse_tail_round_trips(model in regular_model(), log_y in -20.0f64..20.0) {
        let y = log_y.exp();
        let lx = model.log_inverse_tail(y, &InverseSpec::default()).unwrap();
        let back = model.tail_at_log(lx);
        prop_assert!((back / y - 1.0).abs() < 1e-8, "{back} vs {y}");
    }

    #[test]
    fn configuration_shape(model in regular_model(), seed in any::<u64>(), r in 1usize..4, n in 1usize..5,
                           log_t in -12.0f64..0.0, eps in 0.05f64..0.9) {
        let c = sample_ratio_configuration(&model, log_t.exp(), r, n, eps, RngStream::new(seed, 0), DEFAULT_CAP,
                                           &InverseSpec::default()).unwrap();
        prop_assert_eq!(c.above.len(), n - 1);
        prop_assert!(c.above.iter().all(|&x| x >= 1.0));
        prop_assert!(c.above.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(c.below.iter().all(|&x| x > eps && x <= 1.0));
        prop_assert!(c.below.windows(2).all(|w| w[0] >= w[1]));
        let w = c.w_rn.unwrap();
        prop_assert!(w > 0.0 && w <= 1.0);
    }

    #[test]
    fn same_stream_same_draw(seed in any::<u64>(), trial in any::<u64>()) {
        let m = TailModel::pareto_log(1.0, 1.0).unwrap();
        let inv = InverseSpec::default();
        let a = sample_ratio_configuration(&m, 1e-3, 1, 2, 0.1, RngStream::new(seed, trial), DEFAULT_CAP, &inv).unwrap();
        let b = sample_ratio_configuration(&m, 1e-3, 1, 2, 0.1, RngStream::new(seed, trial), DEFAULT_CAP, &inv).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn nb_points_in_window(seed in any::<u64>(), n in 1usize..5, alpha in 0.2f64..4.0, eps in 0.05f64..0.9,
                           mixed in any::<bool>()) {
        let method = if mixed { NbMethod::MixedPoisson } else { NbMethod::LimitRatios };
        let s = sample_negbin_process(n, alpha, eps, method, RngStream::new(seed, 1)).unwrap();
        prop_assert!(s.points.iter().all(|&p| p > eps && p <= 1.0));
        prop_assert!(s.points.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn w_cdf_monotone_and_bounded(alpha in 0.2f64..4.0, r in 1u32..6, n in 1u32..6, a in 0.01f64..0.99,
                                  b in 0.01f64..0.99) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let (fl, fh) = (limit_laws::w_cdf(alpha, r, n, lo), limit_laws::w_cdf(alpha, r, n, hi));
        prop_assert!((0.0..=1.0).contains(&fl) && (0.0..=1.0).contains(&fh));
        prop_assert!(fl <= fh + 1e-14);
        let d = limit_laws::w_law(&LawSpec::w(alpha, r, n), lo).unwrap();
        prop_assert!(d.density >= 0.0);
    }

    #[test]
    fn ks_distance_bounded(v in prop::collection::vec(0.0f64..1.0, 1..200)) {
        let d = ks_distance(&EmpiricalDistribution::new(v).unwrap(), |x| x.clamp(0.0, 1.0));
        prop_assert!((0.0..=1.0).contains(&d));
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>()) {
        let s = io::fmt_f64(x);
        let back: f64 = s.parse().unwrap();
        prop_assert!(back == x || (back.is_nan() && x.is_nan()), "{s}");
    }
}
