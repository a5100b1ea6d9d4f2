//! Closed-form sample-complexity limits for strong recovery.
//!
//! The threshold number of XOR queries is
//!
//! ```text
//! n* = m ln m / sum_d sum_k (d Phi_d / w) (sqrt(1 - eps_kd) - sqrt(eps_kd))^2
//! ```
//!
//! and recovery is possible above `(1 + eta) n*` and impossible below
//! `(1 - eta) n*`. Natural logarithms throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DegreeDistribution, ReliabilityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Sufficient query count, `(1 + eta) n*`.
    #[default]
    Upper,
    /// Necessary query count, `(1 - eta) n*`.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitReport {
    pub n_star: f64,
    pub denominator: f64,
    pub eta: f64,
    pub side: Side,
}

/// `(sqrt(1 - eps) - sqrt(eps))^2`, the per-answer information of a binary
/// symmetric channel in this bound.
pub fn channel_quality(eps: f64) -> f64 {
    let s = (1.0 - eps).sqrt() - eps.sqrt();
    s * s
}

/// The denominator of `n*`: average degree-weighted channel quality.
pub fn efficiency(phi: &DegreeDistribution, r: &ReliabilityMatrix) -> Result<f64> {
    let w = r.w();
    let mut total = 0.0;
    for d in 1..=phi.max_degree() {
        let p = phi.prob(d);
        if p == 0.0 {
            continue;
        }
        for k in 0..w {
            let eps = r.get(k, d).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "no error probability for worker {} at degree {d}",
                    k + 1
                ))
            })?;
            if !(0.0..=0.5).contains(&eps) {
                return Err(Error::InvalidConfig(format!(
                    "error probability {eps} outside [0, 0.5]"
                )));
            }
            total += d as f64 * p / w as f64 * channel_quality(eps);
        }
    }
    Ok(total)
}

/// Threshold query count; requires some odd degree in the support of `phi`.
pub fn xor_limit(
    m: usize,
    phi: &DegreeDistribution,
    r: &ReliabilityMatrix,
    eta: f64,
    side: Side,
) -> Result<LimitReport> {
    if !phi.has_odd_support() {
        return Err(Error::HypothesisViolation(
            "the degree distribution puts no mass on odd degrees".into(),
        ));
    }
    xor_limit_any_support(m, phi, r, eta, side)
}

/// [`xor_limit`] without the odd-degree check. With only even degrees the
/// labels are identifiable only up to a global sign flip, so the result is a
/// reference value rather than a recovery guarantee.
pub fn xor_limit_any_support(
    m: usize,
    phi: &DegreeDistribution,
    r: &ReliabilityMatrix,
    eta: f64,
    side: Side,
) -> Result<LimitReport> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be positive".into()));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidConfig(format!("eta {eta} outside [0, 1)")));
    }
    let denominator = efficiency(phi, r)?;
    if denominator <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let factor = match side {
        Side::Upper => 1.0 + eta,
        Side::Lower => 1.0 - eta,
    };
    let m = m as f64;
    Ok(LimitReport {
        n_star: factor * m * m.ln() / denominator,
        denominator,
        eta,
        side,
    })
}

/// Degree `d` in `1..=max_degree` maximizing `sum_k d * quality(eps_kd)`;
/// the smallest such degree on exact ties.
pub fn optimal_degree(r: &ReliabilityMatrix, max_degree: usize) -> Result<usize> {
    if max_degree == 0 || max_degree > r.max_degree() {
        return Err(Error::InvalidConfig(format!(
            "degree range 1..={max_degree} not covered by the reliability matrix"
        )));
    }
    let objective = |d: usize| -> f64 {
        (0..r.w())
            .map(|k| d as f64 * channel_quality(r.get(k, d).expect("in range")))
            .sum()
    };
    let mut best = (1, objective(1));
    for d in 2..=max_degree {
        let v = objective(d);
        if v > best.1 {
            best = (d, v);
        }
    }
    Ok(best.0)
}

/// Required number of homogeneity ("all in the same class?") queries of
/// fixed degree `d` and error `eps`: `2^(d-2) / d * m ln m / quality(eps)`.
pub fn homogeneous_limit(m: usize, d: usize, eps: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidInput("degree must be at least 1".into()));
    }
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::InvalidInput(format!(
            "error probability {eps} outside (0, 0.5)"
        )));
    }
    let m = m as f64;
    Ok(2f64.powi(d as i32 - 2) / d as f64 * m * m.ln() / channel_quality(eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseSpec;

    fn single(eps: f64, max_degree: usize) -> ReliabilityMatrix {
        ReliabilityMatrix::new(vec![vec![eps; max_degree]], 0.01).unwrap()
    }

    #[test]
    fn single_worker_repetition_limit() {
        let phi = DegreeDistribution::point_mass(1).unwrap();
        let report = xor_limit(1000, &phi, &single(0.1, 1), 0.0, Side::Upper).unwrap();
        assert!((report.denominator - 0.4).abs() < 1e-12);
        let expected = 1000.0 * 1000f64.ln() / 0.4;
        assert!((report.n_star - expected).abs() < 1e-9);
        assert!((report.n_star - 17269.4).abs() < 0.05);
    }

    #[test]
    fn two_worker_average() {
        let phi = DegreeDistribution::point_mass(1).unwrap();
        let r = ReliabilityMatrix::new(vec![vec![0.1], vec![0.2]], 0.01).unwrap();
        let report = xor_limit(100, &phi, &r, 0.0, Side::Upper).unwrap();
        assert!((report.denominator - 0.3).abs() < 1e-12);
    }

    #[test]
    fn eta_sides() {
        let phi = DegreeDistribution::point_mass(1).unwrap();
        let r = single(0.1, 1);
        let base = xor_limit(500, &phi, &r, 0.0, Side::Upper).unwrap().n_star;
        let up = xor_limit(500, &phi, &r, 0.1, Side::Upper).unwrap().n_star;
        let low = xor_limit(500, &phi, &r, 0.1, Side::Lower).unwrap().n_star;
        assert!((up / base - 1.1).abs() < 1e-12);
        assert!((low / base - 0.9).abs() < 1e-12);
    }

    #[test]
    fn degree_efficiency_halves_the_limit() {
        let r = single(0.15, 6);
        let n3 = xor_limit_any_support(
            1000,
            &DegreeDistribution::point_mass(3).unwrap(),
            &r,
            0.0,
            Side::Upper,
        )
        .unwrap()
        .n_star;
        let n6 = xor_limit_any_support(
            1000,
            &DegreeDistribution::point_mass(6).unwrap(),
            &r,
            0.0,
            Side::Upper,
        )
        .unwrap()
        .n_star;
        assert!((n6 / n3 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let r = single(0.1, 2);
        let even = DegreeDistribution::point_mass(2).unwrap();
        assert!(matches!(
            xor_limit(100, &even, &r, 0.0, Side::Upper),
            Err(Error::HypothesisViolation(_))
        ));
        let useless = ReliabilityMatrix::new_estimated(vec![vec![0.5]], 0.01).unwrap();
        let phi1 = DegreeDistribution::point_mass(1).unwrap();
        assert!(matches!(
            xor_limit(100, &phi1, &useless, 0.0, Side::Upper),
            Err(Error::ZeroDenominator)
        ));
        assert!(xor_limit(
            100,
            &DegreeDistribution::point_mass(3).unwrap(),
            &r,
            0.0,
            Side::Upper
        )
        .is_err());
    }

    #[test]
    fn m_log_m_scaling() {
        let phi = DegreeDistribution::uniform(1, 3).unwrap();
        let r = single(0.2, 3);
        let a = xor_limit(1000, &phi, &r, 0.0, Side::Upper).unwrap().n_star;
        let b = xor_limit(2000, &phi, &r, 0.0, Side::Upper).unwrap().n_star;
        let expected = 2.0 * 2000f64.ln() / 1000f64.ln();
        assert!((b / a - expected).abs() < 1e-12);
    }

    #[test]
    fn denominator_decreases_in_each_epsilon() {
        let phi = DegreeDistribution::uniform(1, 2).unwrap();
        let points = [
            [0.05, 0.3],
            [0.1, 0.2],
            [0.2, 0.45],
            [0.33, 0.01],
            [0.4, 0.4],
        ];
        let h = 1e-6;
        for p in points {
            let base = ReliabilityMatrix::new(vec![vec![p[0], p[1]]], 0.001).unwrap();
            for idx in 0..2 {
                let mut bumped = p;
                bumped[idx] += h;
                let r2 = ReliabilityMatrix::new(vec![bumped.to_vec()], 0.001).unwrap();
                let diff = efficiency(&phi, &r2).unwrap() - efficiency(&phi, &base).unwrap();
                assert!(diff < 0.0, "point {p:?} index {idx}");
            }
        }
    }

    #[test]
    fn optimal_degree_examples() {
        let indep = NoiseSpec::DegreeIndependent {
            rates: vec![0.1, 0.3],
        }
        .build(2, 6, 0.01)
        .unwrap();
        assert_eq!(optimal_degree(&indep, 6).unwrap(), 6);

        let coin = NoiseSpec::DCoinFlip { rates: vec![0.1] }
            .build(3, 6, 0.01)
            .unwrap();
        assert_eq!(optimal_degree(&coin, 6).unwrap(), 2);

        let explicit = ReliabilityMatrix::new(vec![vec![0.49, 0.01]], 0.01).unwrap();
        assert_eq!(optimal_degree(&explicit, 2).unwrap(), 2);
        assert!(optimal_degree(&explicit, 3).is_err());
    }

    #[test]
    fn coin_flip_objective_values() {
        let values: Vec<f64> = (1..=4)
            .map(|d| d as f64 * channel_quality(crate::noise::coin_flip_epsilon(0.1, d)))
            .collect();
        for (v, expected) in values.iter().zip([0.400, 0.463, 0.423, 0.351]) {
            assert!((v - expected).abs() < 1e-3, "{v} vs {expected}");
        }
    }

    #[test]
    fn homogeneous_examples() {
        let v = homogeneous_limit(1000, 1, 0.1).unwrap();
        assert!((v - 8634.7).abs() < 0.05);
        let phi2 = DegreeDistribution::point_mass(2).unwrap();
        let xor2 = xor_limit_any_support(1000, &phi2, &single(0.1, 2), 0.0, Side::Upper)
            .unwrap()
            .n_star;
        assert!((homogeneous_limit(1000, 2, 0.1).unwrap() / xor2 - 1.0).abs() < 1e-12);
        assert!(homogeneous_limit(1000, 3, 0.5).is_err());
    }
}
