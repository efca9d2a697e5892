//! Exploration constants `(L, D)` that make Alg1 pick the offline-optimal plan
//! in exploitation frames with high probability.

use serde::Serialize;
use thiserror::Error;

use crate::model::SystemParams;
use crate::offline::{solve, TIE_TOL};

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum ConstantsError {
    #[error("channels {first} and {second} have the same idle probability; the ranking gap is zero")]
    DegenerateGap { first: usize, second: usize },
    #[error(
        "reward and transmission cost supports must have positive lower bounds (reward {reward_lower}, tx {tx_lower})"
    )]
    ZeroSupportLowerBound { reward_lower: f64, tx_lower: f64 },
    #[error("b0/2 - p0 - E_{slot} = {value} is not positive; supply L and D manually")]
    NegativeDenominator { slot: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationConstants {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma: f64,
    /// `A_i` (upper-threshold sensitivity), slots `1..=K`.
    pub a_coeffs: Vec<f64>,
    /// `B_i` (lower-threshold sensitivity); `None` where the slot's lower
    /// threshold coincides with its idle probability and the term is unused.
    pub b_coeffs: Vec<Option<f64>>,
    /// Continuation-value error multipliers `e_i`.
    pub e_coeffs: Vec<f64>,
    pub recommended_l: f64,
    pub recommended_d: f64,
}

/// `e_i = ((3 + 2 b0)(2^K - 2^i) + 2^K (b0 + 2)) / 2^i` for `i = 1..=K`.
pub fn error_multipliers(b0: f64, k: usize) -> Vec<f64> {
    let two_k = 2f64.powi(k as i32);
    (1..=k)
        .map(|i| {
            let two_i = 2f64.powi(i as i32);
            ((3.0 + 2.0 * b0) * (two_k - two_i) + two_k * (b0 + 2.0)) / two_i
        })
        .collect()
}

/// Computes the recommended exploration constants for `params`.
pub fn recommended_ld(params: &SystemParams) -> Result<ExplorationConstants, ConstantsError> {
    let thetas = params.thetas();
    let k = thetas.len();
    for i in 1..k {
        if thetas[i - 1] - thetas[i] <= 0.0 {
            return Err(ConstantsError::DegenerateGap {
                first: i - 1,
                second: i,
            });
        }
    }
    let b_low = params.reward().lower;
    let p_low = params.tx_cost().lower;
    if b_low <= 0.0 || p_low <= 0.0 {
        return Err(ConstantsError::ZeroSupportLowerBound {
            reward_lower: b_low,
            tx_lower: p_low,
        });
    }

    let m = params.means();
    let (b0, c0, p0) = (m.reward, m.sense, m.tx);
    let policy = solve(params);
    let e_coeffs = error_multipliers(b0, k);

    let gamma1 = thetas
        .windows(2)
        .map(|w| (w[0] - w[1]) / 2.0)
        .fold(f64::INFINITY, f64::min);

    let ratio_term = (p0 + b0) / (b0 * b_low);
    let mut a_coeffs = Vec::with_capacity(k);
    let mut b_coeffs = Vec::with_capacity(k);
    let mut gamma2 = f64::INFINITY;
    for slot in 0..k {
        let e_i = e_coeffs[slot];
        let cont = policy.e_values[slot + 1];
        let a_i = ratio_term + (c0 + p0 + c0 * e_i + b0 - p0) / (p0 * p_low);
        a_coeffs.push(a_i);

        let theta = thetas[slot];
        let upper_gap = (policy.uppers[slot] - theta).abs();
        if upper_gap > TIE_TOL {
            gamma2 = gamma2.min(upper_gap / (a_i + 1.0));
        }
        let lower_gap = (policy.lowers[slot] - theta).abs();
        if lower_gap > TIE_TOL {
            let denom = 0.5 * b0 - p0 - cont;
            if denom <= 0.0 {
                return Err(ConstantsError::NegativeDenominator {
                    slot: slot + 1,
                    value: denom,
                });
            }
            let b_i = ratio_term + (2.0 + e_i) * ((c0 - cont).abs() + (b0 - p0 - cont).abs()) / (denom * denom);
            gamma2 = gamma2.min(lower_gap / (b_i + 1.0));
            b_coeffs.push(Some(b_i));
        } else {
            b_coeffs.push(None);
        }
    }
    let e1 = e_coeffs[0];
    gamma2 = gamma2.min((b0 - p0 - policy.e_values[1]) / e1).min(b0 / (2.0 + e1));
    let gamma = gamma1.min(gamma2);

    let kf = k as f64;
    let theta_k = thetas[k - 1];
    let g2 = gamma * gamma;
    let db2 = params.reward().width.powi(2);
    let dc2 = params.sense_cost().width.powi(2);
    let dp2 = params.tx_cost().width.powi(2);
    let ln2 = std::f64::consts::LN_2;

    let recommended_l = [
        1.0 / g2,
        2.0 * db2 / (theta_k * g2),
        2.0 * dc2 / (kf * g2),
        2.0 * dp2 / (theta_k * g2),
        4.0 * kf / (theta_k * theta_k),
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);
    let recommended_d = [
        (2.0 * kf).ln() / (2.0 * g2),
        db2 * ln2 / (theta_k * g2),
        dc2 / (kf * g2),
        dp2 * ln2 / (theta_k * g2),
        1.0,
    ]
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max);

    Ok(ExplorationConstants {
        gamma1,
        gamma2,
        gamma,
        a_coeffs,
        b_coeffs,
        e_coeffs,
        recommended_l,
        recommended_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BoundedUniform;

    fn params(thetas: &[f64], b0: f64, c0: f64, p0: f64, lower_frac: f64) -> SystemParams {
        let dist = |mean: f64| BoundedUniform::from_mean(mean, 2.0 * (1.0 - lower_frac) * mean);
        SystemParams::new(thetas.to_vec(), dist(b0), dist(c0), dist(p0)).unwrap()
    }

    #[test]
    fn multipliers_positive_and_decreasing() {
        let e = error_multipliers(1.0, 6);
        assert!(e.iter().all(|&x| x > 0.0));
        assert!(e.windows(2).all(|w| w[0] > w[1]));
        // e_K = b0 + 2
        assert!((e[5] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn tied_thetas_have_no_gap() {
        let p = params(&[0.5, 0.5, 0.2], 1.0, 0.1, 0.1, 0.95);
        assert!(matches!(recommended_ld(&p), Err(ConstantsError::DegenerateGap { .. })));
    }

    #[test]
    fn zero_support_lower_bound() {
        let p = SystemParams::new(
            vec![0.8, 0.3],
            BoundedUniform::new(0.0, 2.0),
            BoundedUniform::constant(0.1),
            BoundedUniform::constant(0.1),
        )
        .unwrap();
        assert!(matches!(
            recommended_ld(&p),
            Err(ConstantsError::ZeroSupportLowerBound { .. })
        ));
    }

    #[test]
    fn reference_instance_reports_negative_denominator() {
        let p = SystemParams::new(
            vec![0.6, 0.5, 0.4, 0.3, 0.2, 0.1],
            BoundedUniform::from_mean(1.0, 0.1),
            BoundedUniform::from_mean(0.2, 0.1),
            BoundedUniform::from_mean(0.5, 0.1),
        )
        .unwrap();
        assert!(matches!(
            recommended_ld(&p),
            Err(ConstantsError::NegativeDenominator { .. })
        ));
    }

    #[test]
    fn two_channel_instance_is_finite() {
        let p = params(&[0.8, 0.3], 1.0, 0.1, 0.1, 0.95);
        let c = recommended_ld(&p).unwrap();
        assert!(c.recommended_l.is_finite() && c.recommended_d.is_finite());
        assert_eq!(c.gamma, c.gamma1.min(c.gamma2));
        assert!(c.recommended_l >= 8.0 / 0.09);
        assert!(c.recommended_d >= 1.0);
    }
}
