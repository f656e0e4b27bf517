//! Evaluation metrics: expertise distance, preference similarity, policy
//! regret, and Pearson correlation with permutation p-values.

use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{ExpertiseLevel, RewardWeights, TabularMdp};
use crate::seeds::rng_from;
use crate::solver::{soft_value_iteration, SolverConfig};

/// The three per-instance metrics plus where they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub expertise_distance: f64,
    pub preference_similarity: f64,
    pub policy_regret: f64,
    pub environment_id: String,
    pub condition: String,
    pub episodes_seen: usize,
}

impl MetricsReport {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("expertise_distance", self.expertise_distance),
            ("preference_similarity", self.preference_similarity),
            ("policy_regret", self.policy_regret),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::Numeric(format!("{name} is not finite: {v}")));
            }
        }
        if self.expertise_distance < 0.0 || self.policy_regret < 0.0 {
            return Err(Error::Numeric(
                "distances and regret cannot be negative".into(),
            ));
        }
        Ok(())
    }
}

/// Absolute distance between true and estimated temperature.
pub fn expertise_distance(beta_star: f64, beta_hat: f64) -> f64 {
    (beta_star - beta_hat).abs()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity between the true and estimated preference vectors:
/// 1 for identical directions, 0 for orthogonal ones.
pub fn preference_similarity(theta_star: &[f64], theta_hat: &[f64]) -> Result<f64> {
    if theta_star.len() != theta_hat.len() {
        return Err(Error::Config(format!(
            "similarity needs equal dimensions, got {} and {}",
            theta_star.len(),
            theta_hat.len()
        )));
    }
    let (na, nb) = (l2(theta_star), l2(theta_hat));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain(
            "cosine similarity is undefined for a zero vector".into(),
        ));
    }
    Ok(dot(theta_star, theta_hat) / (na * nb))
}

/// Nonstandard similarity variant using squared norms and a complement:
/// `1 - dot / (|a|^2 |b|^2)`. Kept for auditing against implementations
/// that normalize this way; it is *not* a cosine and does not equal 1 on
/// identical inputs in general.
pub fn preference_similarity_squared_norms(
    theta_star: &[f64],
    theta_hat: &[f64],
) -> Result<f64> {
    let (na, nb) = (l2(theta_star), l2(theta_hat));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain(
            "similarity is undefined for a zero vector".into(),
        ));
    }
    Ok(1.0 - dot(theta_star, theta_hat) / (na * na * nb * nb))
}

/// Normalized mean absolute gap between the soft value functions under the
/// true and the estimated preferences, both solved at the *true*
/// temperature. The normalizer is the largest absolute true value, so
/// regret is comparable across expertise levels even when values are
/// everywhere negative.
pub fn policy_regret(
    mdp: &Arc<TabularMdp>,
    theta_star: &RewardWeights,
    beta_star: ExpertiseLevel,
    theta_hat: &RewardWeights,
    solver: &SolverConfig,
) -> Result<f64> {
    let sol_star = soft_value_iteration(mdp, theta_star, beta_star, solver)?;
    let sol_hat = soft_value_iteration(mdp, theta_hat, beta_star, solver)?;
    let v_star = sol_star.values();
    let v_hat = sol_hat.values();
    let normalizer = v_star.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap: f64 = v_star
        .iter()
        .zip(v_hat)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / v_star.len() as f64;
    if normalizer == 0.0 {
        if gap == 0.0 {
            return Ok(0.0);
        }
        return Err(Error::Numeric(
            "regret normalizer is zero but the value functions differ".into(),
        ));
    }
    Ok(gap / normalizer)
}

/// Sample Pearson correlation with a two-sided seeded permutation p-value
/// (+1/+1 smoothed).
pub fn pearson(xs: &[f64], ys: &[f64], permutations: usize, seed: u64) -> Result<(f64, f64)> {
    let rho = pearson_rho(xs, ys)?;
    let mut rng = rng_from(seed, &[]);
    let mut shuffled = ys.to_vec();
    let mut at_least_as_extreme = 0usize;
    for _ in 0..permutations {
        shuffled.shuffle(&mut rng);
        let r = pearson_rho(xs, &shuffled)?;
        if r.abs() >= rho.abs() {
            at_least_as_extreme += 1;
        }
    }
    let p = (at_least_as_extreme + 1) as f64 / (permutations + 1) as f64;
    Ok((rho, p))
}

/// The correlation coefficient alone.
pub fn pearson_rho(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Domain(format!(
            "correlation needs two equal sequences of at least 3 values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Domain(
            "correlation is undefined for a constant sequence".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{two_state_chain, FeatureVector, TabularMdp};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn expertise_distance_closed_forms() {
        assert_eq!(expertise_distance(1.0, 1.0), 0.0);
        assert!((expertise_distance(0.01, 10.0) - 9.99).abs() < 1e-12);
        // Widest gaps inside each expertise band of the default B.
        assert!((expertise_distance(0.09, 0.01) - 0.08).abs() < 1e-12);
        assert!((expertise_distance(1.0, 0.5) - 0.5).abs() < 1e-12);
        assert!((expertise_distance(10.0, 5.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn cosine_similarity_closed_forms() {
        assert!((preference_similarity(&[0.2, 0.8], &[0.2, 0.8]).unwrap() - 1.0).abs() < 1e-12);
        assert!(preference_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap().abs() < 1e-12);
        assert!((preference_similarity(&[0.6, 0.8], &[1.0, 0.0]).unwrap() - 0.6).abs() < 1e-12);
        assert!(preference_similarity(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(preference_similarity(&[1.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn squared_norm_variant_differs_from_cosine() {
        // On unit vectors the variant is 1 - cosine; elsewhere it is not a
        // similarity at all (identical inputs need not map to 1).
        let v = [0.3, 0.4]; // norm 0.5, so squared-norm scaling blows up
        let variant = preference_similarity_squared_norms(&v, &v).unwrap();
        assert!((variant - (1.0 - 0.25 / 0.0625)).abs() < 1e-12, "{variant}");
        let cosine = preference_similarity(&v, &v).unwrap();
        assert!((cosine - 1.0).abs() < 1e-12);
        assert!((variant - cosine).abs() > 0.1);
    }

    proptest! {
        #[test]
        fn cosine_is_scale_invariant(
            scale in 1e-3_f64..1e3,
            a in proptest::collection::vec(0.01_f64..1.0, 3),
            b in proptest::collection::vec(0.01_f64..1.0, 3),
        ) {
            let scaled: Vec<f64> = a.iter().map(|x| x * scale).collect();
            let lhs = preference_similarity(&scaled, &b).unwrap();
            let rhs = preference_similarity(&a, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn pearson_of_a_linear_map_is_the_slope_sign(
            a in prop_oneof![-5.0_f64..-0.1, 0.1_f64..5.0],
            b in -10.0_f64..10.0,
        ) {
            let xs: Vec<f64> = (0..20).map(|i| i as f64 / 3.0).collect();
            let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let rho = pearson_rho(&xs, &ys).unwrap();
            prop_assert!((rho - a.signum()).abs() < 1e-9);
        }
    }

    #[test]
    fn regret_is_zero_on_the_truth_and_positive_on_a_rescaling() {
        let mdp = Arc::new(two_state_chain(0.95));
        let solver = SolverConfig::default();
        let theta = RewardWeights::new(vec![1.0]).unwrap();
        let beta = ExpertiseLevel::new(0.5).unwrap();
        let same = policy_regret(&mdp, &theta, beta, &theta, &solver).unwrap();
        assert_eq!(same, 0.0);

        // Soft values are not scale-invariant in theta: doubling the reward
        // does not double the log-sum-exp, so the regret must be positive.
        let doubled = RewardWeights::new(vec![2.0]).unwrap();
        let scaled = policy_regret(&mdp, &theta, beta, &doubled, &solver).unwrap();
        assert!(scaled > 0.0, "regret of a rescaled theta was {scaled}");
    }

    #[test]
    fn regret_matches_a_direct_recomputation() {
        // Five-state chain: state i steps to i+1 (pay feature 0) or loops
        // (pay feature 1); state 4 is terminal.
        let step = FeatureVector(vec![1.0, 0.0]);
        let stay = FeatureVector(vec![0.0, 1.0]);
        let zero = FeatureVector::zeros(2);
        let mdp = Arc::new(
            TabularMdp::new(
                vec![vec![0, 1]; 5],
                vec![
                    vec![1, 0],
                    vec![2, 1],
                    vec![3, 2],
                    vec![4, 3],
                    vec![4, 4],
                ],
                vec![
                    vec![step.clone(), stay.clone()],
                    vec![step.clone(), stay.clone()],
                    vec![step.clone(), stay.clone()],
                    vec![step, stay],
                    vec![zero.clone(), zero],
                ],
                vec![false, false, false, false, true],
                0.9,
            )
            .unwrap(),
        );
        let solver = SolverConfig::default();
        let theta_star = RewardWeights::new(vec![0.8, 0.2]).unwrap();
        let theta_hat = RewardWeights::new(vec![0.3, 0.7]).unwrap();
        let beta = ExpertiseLevel::new(0.7).unwrap();

        let reported =
            policy_regret(&mdp, &theta_star, beta, &theta_hat, &solver).unwrap();

        let v_star = soft_value_iteration(&mdp, &theta_star, beta, &solver).unwrap();
        let v_hat = soft_value_iteration(&mdp, &theta_hat, beta, &solver).unwrap();
        let mut norm = 0.0f64;
        let mut total = 0.0;
        for s in 0..5 {
            norm = norm.max(v_star.value(s).abs());
            total += (v_star.value(s) - v_hat.value(s)).abs();
        }
        let by_hand = total / 5.0 / norm;
        assert!((reported - by_hand).abs() < 1e-12, "{reported} vs {by_hand}");
        assert!(reported > 0.0);
    }

    #[test]
    fn zero_normalizer_is_ok_only_when_values_agree() {
        // In near-greedy mode a zero preference vector has identically zero
        // values; a non-zero estimate then has no comparable scale.
        let mdp = Arc::new(two_state_chain(0.95));
        let solver = SolverConfig::default();
        let zero = RewardWeights::new(vec![0.0]).unwrap();
        let one = RewardWeights::new(vec![1.0]).unwrap();
        let hard = ExpertiseLevel::new(1e-8).unwrap();
        assert_eq!(policy_regret(&mdp, &zero, hard, &zero, &solver).unwrap(), 0.0);
        let err = policy_regret(&mdp, &zero, hard, &one, &solver).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)), "{err}");
    }

    #[test]
    fn pearson_closed_forms() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 3.0).collect();
        let (rho, p) = pearson(&xs, &ys, 200, 1).unwrap();
        assert!((rho - 1.0).abs() < 1e-9);
        assert!(p < 0.01);

        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        let (rho, _) = pearson(&xs, &neg, 0, 1).unwrap();
        assert!((rho + 1.0).abs() < 1e-9);

        assert!(pearson_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson_rho(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn permutation_p_values_are_calibrated_on_independent_data() {
        let mut calibrated = 0;
        for seed in 0..20u64 {
            let mut rng = rng_from(1000 + seed, &[]);
            let xs: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
            let ys: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
            let (_, p) = pearson(&xs, &ys, 2000, seed).unwrap();
            if p > 0.05 {
                calibrated += 1;
            }
        }
        assert!(calibrated >= 17, "only {calibrated}/20 independent trials had p > 0.05");
    }

    #[test]
    fn report_validation_rejects_non_finite_fields() {
        let good = MetricsReport {
            expertise_distance: 0.4,
            preference_similarity: 0.9,
            policy_regret: 0.02,
            environment_id: "env-0".into(),
            condition: "full_set".into(),
            episodes_seen: 20,
        };
        good.validate().unwrap();
        let bad = MetricsReport { policy_regret: f64::NAN, ..good.clone() };
        assert!(bad.validate().is_err());
        let negative = MetricsReport { expertise_distance: -0.1, ..good };
        assert!(negative.validate().is_err());
    }
}
