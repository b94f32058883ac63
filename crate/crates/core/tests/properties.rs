use condstick_core::samplers::{sample_R_sequence, RngState};
use condstick_core::specfun::kernel::{
    block_pmf_conditional, gen_stirling_log, n_conditional_pmf, n_marginal_pmf, pd_block_pmf,
};
use condstick_core::stickbreak::{weights_to_masses, LawSpec, Pipeline, StickSampler};
use condstick_core::Alpha;
use proptest::prelude::*;

fn alpha() -> impl Strategy<Value = f64> {
    0.05f64..0.95
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn masses_and_remainder_sum_to_one(w in prop::collection::vec(0.001f64..0.999, 1..40)) {
        let (p, rem) = weights_to_masses(&w).unwrap();
        prop_assert!(p.iter().all(|x| *x > 0.0));
        prop_assert!((p.iter().sum::<f64>() + rem - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_weights_give_geometric_masses(w in 0.01f64..0.99, n in 1usize..30) {
        let (p, rem) = weights_to_masses(&vec![w; n]).unwrap();
        for (k, pk) in p.iter().enumerate() {
            let expect = (1.0 - w) * w.powi(k as i32);
            prop_assert!((pk - expect).abs() <= 1e-14 * expect.max(1e-300) + 1e-300);
        }
        prop_assert!((rem - w.powi(n as i32)).abs() <= 1e-13 * rem);
    }

    #[test]
    fn stirling_numbers_are_positive_and_finite(a in alpha(), m in 1usize..120) {
        let al = Alpha::new(a).unwrap();
        for k in 1..=m {
            prop_assert!(gen_stirling_log(m, k, al).unwrap().is_finite());
        }
    }

    #[test]
    fn pmf_tables_sum_to_one(a in alpha(), m in 1usize..80, lambda in 0.05f64..60.0, r in 0.01f64..0.99) {
        let al = Alpha::new(a).unwrap();
        for t in [
            pd_block_pmf(m, al).unwrap(),
            block_pmf_conditional(m, lambda, al).unwrap(),
            n_marginal_pmf(m, lambda, al).unwrap(),
            n_conditional_pmf(m, r, al).unwrap(),
        ] {
            prop_assert_eq!(t.len(), m);
            prop_assert!((t.total() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_fractions_decrease_the_clock(a in alpha(), lambda in 1e-6f64..100.0, seed in any::<u64>()) {
        let al = Alpha::new(a).unwrap();
        let s = sample_R_sequence(12, lambda, al, &mut RngState::new(seed, 0));
        let x = lambda.powf(a);
        let mut prev = 0.0;
        for k in 0..12 {
            prop_assert!(s.r[k] > 0.0 && s.r[k] < 1.0);
            prop_assert!((s.r[k] + s.one_minus_r[k] - 1.0).abs() < 4.0 * f64::EPSILON);
            prop_assert!(s.gtilde[k] > prev);
            let ratio = ((prev + x) / (s.gtilde[k] + x)).powf(1.0 / a);
            prop_assert!((s.r[k] / ratio - 1.0).abs() < 1e-12);
            prev = s.gtilde[k];
        }
    }

    #[test]
    fn stick_draws_keep_their_invariants(
        a in alpha(),
        m in 0usize..6,
        lambda in 0.01f64..50.0,
        pipeline in prop::sample::select(vec![Pipeline::M0, Pipeline::M1, Pipeline::General, Pipeline::Half]),
        seed in any::<u64>(),
    ) {
        let (a, m) = match pipeline {
            Pipeline::M0 => (a, 0),
            Pipeline::M1 => (a, 1),
            Pipeline::General => (a, m.max(1)),
            _ => (0.5, m),
        };
        let law = LawSpec::fixed(Alpha::new(a).unwrap(), m, lambda).unwrap();
        let s = StickSampler::new(law, pipeline).unwrap();
        let d = s.draw(10, &mut RngState::new(seed, 3)).unwrap();
        prop_assert_eq!(d.len(), 10);
        prop_assert!((d.ptilde.iter().sum::<f64>() + d.remainder - 1.0).abs() < 1e-12);
        for k in 0..10 {
            prop_assert!(d.one_minus_w[k] > 0.0);
            prop_assert!(d.w[k] <= 1.0);
            if pipeline != Pipeline::Half {
                prop_assert!(d.w_minus_r[k] > 0.0);
                prop_assert!(d.w[k] >= d.r[k]);
            }
        }
    }

    #[test]
    fn draws_replay_and_extend(a in alpha(), theta in 0.1f64..3.0, m in 0usize..5, seed in any::<u64>()) {
        let law = LawSpec::gem(Alpha::new(a).unwrap(), theta, m).unwrap();
        let s = StickSampler::new(law, Pipeline::Gem).unwrap();
        let short = s.draw(4, &mut RngState::new(seed, 1)).unwrap();
        let again = s.draw(4, &mut RngState::new(seed, 1)).unwrap();
        let long = s.draw(9, &mut RngState::new(seed, 1)).unwrap();
        prop_assert_eq!(&short, &again);
        prop_assert_eq!(&short.w[..], &long.w[..4]);
        prop_assert_eq!(&short.ptilde[..], &long.ptilde[..4]);
    }
}
