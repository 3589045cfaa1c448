use kenn_core::fuzzy::{
    argmax, boost_hard, boost_soft, collision_mc, godel, logit, lp_norm, preactivation_boost,
    sigmoid,
};
use proptest::collection::vec;
use proptest::prelude::*;

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

proptest! {
    #[test]
    fn hard_boost_never_lowers_the_conorm(t in vec(0.0f64..=1.0, 1..8), frac in 0.0f64..=1.0) {
        let g = godel(&t).unwrap();
        let f = frac * (1.0 - g);
        let d = boost_hard(f, &t).unwrap();
        let boosted: Vec<f64> = t.iter().zip(&d).map(|(a, b)| (a + b).min(1.0)).collect();
        prop_assert!(godel(&boosted).unwrap() >= g);
    }

    #[test]
    fn soft_boost_on_preactivations_never_lowers_the_conorm(
        t in vec(0.001f64..0.999, 1..8), w in 0.0f64..20.0,
    ) {
        let v: Vec<f64> = t.iter().map(|&x| logit(x)).collect();
        let d = boost_soft(w, &v);
        let boosted: Vec<f64> = v.iter().zip(&d).map(|(a, b)| sigmoid(a + b)).collect();
        let before: Vec<f64> = v.iter().map(|&a| sigmoid(a)).collect();
        prop_assert!(godel(&boosted).unwrap() >= godel(&before).unwrap());
    }

    #[test]
    fn soft_boost_is_positive_and_sums_to_the_weight(v in vec(-30.0f64..30.0, 1..8), w in 0.01f64..50.0) {
        let d = boost_soft(w, &v);
        prop_assert!(d.iter().all(|&x| x > 0.0));
        prop_assert!((d.iter().sum::<f64>() - w).abs() <= 1e-12 * w);
    }

    #[test]
    fn hard_boost_is_one_spike(t in vec(0.0f64..=1.0, 1..8), frac in 0.0f64..=1.0, p in 1.0f64..8.0) {
        let f = frac * (1.0 - godel(&t).unwrap());
        let d = boost_hard(f, &t).unwrap();
        prop_assert_eq!(d.iter().filter(|&&x| x != 0.0).count(), usize::from(f != 0.0));
        prop_assert!((lp_norm(&d, p) - f).abs() <= 1e-12);
        prop_assert!((lp_norm(&d, 1.0) - f).abs() <= 1e-12);
    }

    #[test]
    fn preactivation_boost_is_a_valid_boost(v in vec(-10.0f64..10.0, 1..8), w in 0.0f64..30.0) {
        let d = preactivation_boost(w, &v);
        let top = argmax(&v);
        for i in 0..v.len() {
            let change = sigmoid(v[i] + d[i]) - sigmoid(v[i]);
            prop_assert!(change >= 0.0 && change <= 1.0 - sigmoid(v[i]));
            if i != top {
                prop_assert_eq!(change, 0.0);
            }
        }
    }
}

#[test]
fn collisions_converge_to_the_beta_integral() {
    let samples = 200_000;
    for (k, (n, m)) in [(2, 2), (2, 3), (3, 3), (2, 5), (4, 4)]
        .into_iter()
        .enumerate()
    {
        let exact = factorial(n - 1) * factorial(m - 1) / factorial(n + m - 1);
        let est = collision_mc(n, m, samples, k as u64).unwrap();
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        assert!(
            (est - exact).abs() < 3.0 * se,
            "({n},{m}): {est} vs {exact}"
        );
    }
}
