use nalgebra::DMatrix;
use proptest::prelude::*;

use mixlfsm::estimators::{default_f1, default_f2, Method, ParamVector};
use mixlfsm::lab::asymcov::psd_projection;
use mixlfsm::lfsm::{b_from_btilde, btilde_from_b, k_order_increments, Component, ModelParams, Path, SamplingScheme, Simulator};
use mixlfsm::spectral::{model_expectation, FourierTable, Rescale, SpectralComponent};
use mixlfsm::stable::{empirical_char_fn, sample_sym_stable, RngHandle};

fn component() -> impl Strategy<Value = Component> {
    (0.2f64..3.0, 0.05f64..0.95, 0.4f64..2.0).prop_map(|(b, h, beta)| Component::new(b, h, beta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn increments_annihilate_low_degree_polynomials(
        k in 1usize..5,
        coef in prop::collection::vec(-10.0f64..10.0, 5),
        gamma in 1usize..6,
    ) {
        let delta = 0.02;
        let values: Vec<f64> = (1..=120)
            .map(|l| {
                let t = l as f64 * delta;
                coef[..k].iter().rev().fold(0.0, |acc, c| acc * t + c)
            })
            .collect();
        let scale = values.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let panel = k_order_increments(&Path { delta, values }, k, &[gamma]).unwrap();
        for v in &panel.columns[0] {
            prop_assert!(v.abs() / scale < 1e-10);
        }
    }

    #[test]
    fn paths_are_linear_in_the_scale(c in component(), factor in 0.1f64..10.0, seed in 0u64..1000) {
        let scheme = SamplingScheme::new(64, 1.0 / 64.0, 2, vec![1, 2]).unwrap();
        let a = Simulator::new(&ModelParams::single(c.b, c.hurst, c.beta).unwrap(), &scheme)
            .unwrap()
            .simulate(&RngHandle::new(seed, 0))
            .unwrap();
        let b = Simulator::new(&ModelParams::single(c.b * factor, c.hurst, c.beta).unwrap(), &scheme)
            .unwrap()
            .simulate(&RngHandle::new(seed, 0))
            .unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            prop_assert!((x * factor - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn transformed_scales_round_trip(comps in prop::collection::vec(component(), 1..4), k in 1usize..4) {
        let m = ModelParams { components: comps };
        let bt = btilde_from_b(&m, k).unwrap();
        prop_assert!(bt.iter().all(|x| *x > 0.0 && x.is_finite()));
        let back = b_from_btilde(&bt, &m, k).unwrap();
        for (c, b) in m.components.iter().zip(back) {
            prop_assert!((c.b - b).abs() <= 1e-9 * c.b);
        }
    }

    #[test]
    fn psd_projection_is_symmetric_and_nonnegative(entries in prop::collection::vec(-5.0f64..5.0, 16)) {
        let a = DMatrix::from_row_slice(4, 4, &entries);
        let sym = (&a + a.transpose()) * 0.5;
        let (p, min_before) = psd_projection(&sym);
        prop_assert!((&p - p.transpose()).amax() < 1e-12);
        let eig = p.clone().symmetric_eigen().eigenvalues;
        prop_assert!(eig.iter().all(|e| *e >= -1e-10));
        let sym_eig = sym.clone().symmetric_eigen().eigenvalues;
        prop_assert!((sym_eig.min() - min_before).abs() < 1e-9);
        if min_before >= 0.0 {
            prop_assert!((&p - &sym).amax() < 1e-9);
        }
    }

    #[test]
    fn empirical_char_fn_is_bounded(beta in 0.3f64..2.0, lambda in -5.0f64..5.0, seed in 0u64..1000) {
        let s = sample_sym_stable(beta, 1.0, 500, &RngHandle::new(seed, 3)).unwrap();
        prop_assert!(s.iter().all(|x| x.is_finite()));
        let e = empirical_char_fn(&s, lambda).unwrap();
        prop_assert!((-1.0..=1.0).contains(&e));
        prop_assert_eq!(e, empirical_char_fn(&s, -lambda).unwrap());
    }

    #[test]
    fn stable_streams_are_reproducible(beta in 0.3f64..2.0, seed in 0u64..u64::MAX, stream in 0u64..64) {
        let h = RngHandle::new(seed, stream);
        prop_assert_eq!(sample_sym_stable(beta, 1.0, 32, &h).unwrap(), sample_sym_stable(beta, 1.0, 32, &h).unwrap());
    }

    #[test]
    fn model_expectations_stay_in_the_range_of_f(
        scale in 0.1f64..5.0,
        h in 0.1f64..0.9,
        beta in 0.5f64..2.0,
        lambda in 0.05f64..4.0,
        gamma in 1usize..8,
    ) {
        let comps = [SpectralComponent::new(scale, h, beta)];
        for f in [default_f1(), default_f2()] {
            let t = FourierTable::cached(&f).unwrap();
            let e = model_expectation(&t, &comps, lambda, gamma as f64, 1e-3, Rescale::Adaptive { w: 1.0, dominant: 0 }).unwrap();
            prop_assert!((-1e-6..=1.0 + 1e-6).contains(&e), "{e}");
        }
    }

    #[test]
    fn projection_lands_in_the_domain(coords in prop::collection::vec(-3.0f64..6.0, 6)) {
        let mut p = ParamVector::raw(Method::Adaptive, coords);
        p.project();
        prop_assert!(p.validate().is_ok(), "{:?}", p.coords);
    }
}
