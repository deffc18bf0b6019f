use dbmc::dynamics::{Protocol, WeightModel};
use dbmc::fixtures;
use dbmc::graph::stationary_profile;
use dbmc::sim::{integrate, InitialPolicy, SimConfig};
use dbmc::small_gain::{decay_implication_check, GainMatrix};
use proptest::prelude::*;

fn nine_node_matrix() -> GainMatrix {
    let g = fixtures::nine_node();
    GainMatrix::build(&g, &stationary_profile(&g), 1.2).unwrap()
}

proptest! {
    #[test]
    fn gamma_oplus_monotone(s in proptest::collection::vec(0.0f64..10.0, 9), bump in proptest::collection::vec(0.0f64..3.0, 9)) {
        let m = nine_node_matrix();
        let t: Vec<f64> = s.iter().zip(&bump).map(|(a, b)| a + b).collect();
        let (a, b) = (m.gamma_oplus(&s).unwrap(), m.gamma_oplus(&t).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn gamma_oplus_homogeneous(s in proptest::collection::vec(0.0f64..10.0, 9), c in 0.0f64..20.0) {
        let m = nine_node_matrix();
        let scaled: Vec<f64> = s.iter().map(|v| c * v).collect();
        let lhs = m.gamma_oplus(&scaled).unwrap();
        let rhs: Vec<f64> = m.gamma_oplus(&s).unwrap().iter().map(|v| c * v).collect();
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn trajectory_implication_zero_input() {
    let g = fixtures::nine_node();
    let p = stationary_profile(&g);
    let cfg = SimConfig::new(
        Protocol::Perturbed { eta: 1.2, weights: WeightModel::Nominal },
        15.0,
        InitialPolicy::Overestimate { lo: 0.0, hi: 10.0, seed: 11 },
    );
    let tr = integrate(&cfg, &g, &p).unwrap();
    let r = decay_implication_check(&tr, &g, 1.2, &WeightModel::Nominal);
    assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(5)]);
    assert!(r.fired > 0);
    assert_eq!(r.source_error, 0.0);
}

#[test]
fn trajectory_implication_stationary_start_never_fires() {
    let g = fixtures::nine_node();
    let p = stationary_profile(&g);
    let cfg = SimConfig::new(
        Protocol::Perturbed { eta: 1.2, weights: WeightModel::Nominal },
        2.0,
        InitialPolicy::Explicit { values: p.distances.clone() },
    );
    let tr = integrate(&cfg, &g, &p).unwrap();
    let r = decay_implication_check(&tr, &g, 1.2, &WeightModel::Nominal);
    assert_eq!(r.fired, 0);
    assert!(r.passed());
}

#[test]
fn trajectory_implication_under_band() {
    let g = fixtures::nine_node();
    let p = stationary_profile(&g);
    let weights = WeightModel::band(&g, 0.9, 1.1, 2).unwrap();
    let cfg = SimConfig::new(
        Protocol::Perturbed { eta: 1.2, weights: weights.clone() },
        10.0,
        InitialPolicy::Overestimate { lo: 0.0, hi: 10.0, seed: 4 },
    );
    let tr = integrate(&cfg, &g, &p).unwrap();
    let r = decay_implication_check(&tr, &g, 1.2, &weights);
    assert!((r.input_sup - 0.2).abs() < 1e-12);
    assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(5)]);
    assert!(r.fired > 0);
}
