//! Conjugations of a positive kernel.
//!
//! [`tilt_submarkov`] divides by a positive weight function and a constant,
//! `Q f = P(f ψ₁) / (c ψ₁)`, which is sub-Markov as soon as `P ψ₁ ≤ c ψ₁`.
//! [`h_transform`] conjugates by a nonnegative eigenfunction,
//! `R g = P(η g) / (θ₀ η)` on the set where `η` is positive, which is
//! stochastic when `(θ₀, η)` is an exact eigenpair.

use std::sync::Arc;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semigroup::{
    weighted_norm, OperatorLayout, StateSpace, SubsetMask, TransferOperator, WeightedFunction,
};

/// Slack on row masses when flagging a tilt as sub-Markov.
pub const SUBMARKOV_SLACK: f64 = 1e-12;

/// Relative threshold defining the positivity set of an eigenfunction.
pub const SUPPORT_EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct TiltRecord {
    pub base: TransferOperator,
    pub psi1: WeightedFunction,
    pub c: f64,
    pub tilted: TransferOperator,
    /// `P ψ₁(i) / (c ψ₁(i))`.
    pub row_masses: Vec<f64>,
    pub max_row_mass: f64,
    pub sub_markov: bool,
}

impl TiltRecord {
    /// Eigenvalue of the tilted kernel matching `θ₀` for the base kernel.
    pub fn theta_q(&self, theta0: f64) -> f64 {
        theta0 / self.c
    }

    /// `η / ψ₁`, the eigenfunction of the tilted kernel.
    pub fn eta_q(&self, eta: &WeightedFunction) -> Result<WeightedFunction> {
        eta.div(&self.psi1)
    }

    /// `ψ₂ / ψ₁`.
    pub fn phi2(&self, psi2: &WeightedFunction) -> Result<WeightedFunction> {
        psi2.div(&self.psi1)
    }
}

/// Smallest `c` with `P ψ₁ ≤ c ψ₁`.
pub fn default_normalizer(p: &TransferOperator, psi1: &WeightedFunction) -> Result<f64> {
    weighted_norm(&p.apply(psi1)?, psi1)
}

/// `Q(i, j) = P(i, j) ψ₁(j) / (c ψ₁(i))`; `c` defaults to
/// [`default_normalizer`].
pub fn tilt_submarkov(
    p: &TransferOperator,
    psi1: &WeightedFunction,
    c: Option<f64>,
) -> Result<TiltRecord> {
    psi1.require_positive("psi1")?;
    let c = match c {
        Some(c) => c,
        None => default_normalizer(p, psi1)?,
    };
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::NonPositive {
            what: "tilt normalizer c",
            index: 0,
            value: c,
        });
    }
    let n = p.len();
    let psi = psi1.values();
    let k = p.kernel();
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        let denom = c * psi[i];
        for j in 0..n {
            q[[i, j]] = k[[i, j]] * psi[j] / denom;
        }
    }
    let p_psi = p.apply(psi1)?;
    let row_masses: Vec<f64> = (0..n).map(|i| p_psi.get(i) / (c * psi[i])).collect();
    let max_row_mass = row_masses.iter().copied().fold(0.0, f64::max);
    let tilted = TransferOperator::new(p.space().clone(), q, p.step())?;
    Ok(TiltRecord {
        base: p.clone(),
        psi1: psi1.clone(),
        c,
        tilted,
        row_masses,
        max_row_mass,
        sub_markov: max_row_mass <= 1.0 + SUBMARKOV_SLACK,
    })
}

#[derive(Debug, Clone)]
pub struct HTransformRecord {
    pub base: TransferOperator,
    pub eta: WeightedFunction,
    pub theta0: f64,
    /// Threshold below which `η / ψ₁` counts as zero.
    pub epsilon: f64,
    /// `E' = {η > ε ψ₁}` as a subset of the base space.
    pub support: SubsetMask,
    /// Base-space index of each state of the transformed operator.
    pub support_index: Vec<usize>,
    /// The h-transform, on the restricted space `E'`.
    pub transformed: TransferOperator,
}

impl HTransformRecord {
    pub fn support_space(&self) -> &Arc<StateSpace> {
        self.transformed.space()
    }

    /// Largest `|row mass − 1|`.
    pub fn max_row_defect(&self) -> f64 {
        self.transformed
            .row_masses()
            .iter()
            .map(|m| (m - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Restriction of a base-space function to `E'`.
    pub fn restrict(&self, f: &WeightedFunction) -> Result<WeightedFunction> {
        let vals: Vec<f64> = self.support_index.iter().map(|&i| f.get(i)).collect();
        WeightedFunction::new(self.support_space().clone(), vals)
    }

    /// Extension by zero of an `E'` function to the base space.
    pub fn extend(&self, g: &WeightedFunction) -> Result<WeightedFunction> {
        let mut vals = vec![0.0; self.base.len()];
        for (a, &i) in self.support_index.iter().enumerate() {
            vals[i] = g.get(a);
        }
        WeightedFunction::new(self.base.space().clone(), vals)
    }
}

/// `R(i, j) = P(i, j) η(j) / (θ₀ η(i))` for `i, j ∈ E'`.
///
/// `E'` collects the states with `η > ε ψ₁` where
/// `ε = 1e-12 · ‖η‖_{ψ₁}`; without `psi1` the weight is taken constant.
/// Rows outside `E'` are dropped, not zero-filled.
pub fn h_transform(
    p: &TransferOperator,
    eta: &WeightedFunction,
    theta0: f64,
    psi1: Option<&WeightedFunction>,
) -> Result<HTransformRecord> {
    if !(theta0 > 0.0 && theta0.is_finite()) {
        return Err(Error::NonPositive {
            what: "theta0",
            index: 0,
            value: theta0,
        });
    }
    eta.require_nonnegative("eta")?;
    let unit;
    let psi1 = match psi1 {
        Some(w) => w,
        None => {
            unit = WeightedFunction::constant(p.space().clone(), 1.0);
            &unit
        }
    };
    let epsilon = SUPPORT_EPS * weighted_norm(eta, psi1)?;
    let member: Vec<bool> = (0..p.len())
        .map(|i| eta.get(i) > epsilon * psi1.get(i))
        .collect();
    if !member.iter().any(|&m| m) || epsilon == 0.0 {
        return Err(Error::Analysis(
            "eta is identically below the support threshold".into(),
        ));
    }
    let support = SubsetMask::new(p.space().clone(), member.clone())?;
    let support_index = support.indices();
    let restricted = p.restrict(&member, "|support")?;
    let m = support_index.len();
    let k = p.kernel();
    let mut r = Array2::zeros((m, m));
    for (a, &i) in support_index.iter().enumerate() {
        let denom = theta0 * eta.get(i);
        for (b, &j) in support_index.iter().enumerate() {
            r[[a, b]] = k[[i, j]] * eta.get(j) / denom;
        }
    }
    let transformed = TransferOperator::new(restricted.space().clone(), r, p.step())?;
    Ok(HTransformRecord {
        base: p.clone(),
        eta: eta.clone(),
        theta0,
        epsilon,
        support,
        support_index,
        transformed,
    })
}

#[derive(Serialize)]
struct TiltLayout<'a> {
    #[serde(flatten)]
    operator: OperatorLayout,
    c: f64,
    max_row_mass: f64,
    sub_markov: bool,
    psi1: &'a WeightedFunction,
}

impl Serialize for TiltRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TiltLayout {
            operator: OperatorLayout::from(&self.tilted),
            c: self.c,
            max_row_mass: self.max_row_mass,
            sub_markov: self.sub_markov,
            psi1: &self.psi1,
        }
        .serialize(s)
    }
}

#[derive(Serialize)]
struct HTransformLayout<'a> {
    #[serde(flatten)]
    operator: OperatorLayout,
    theta0: f64,
    support: &'a [usize],
    epsilon: f64,
}

impl Serialize for HTransformRecord {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HTransformLayout {
            operator: OperatorLayout::from(&self.transformed),
            theta0: self.theta0,
            support: &self.support_index,
            epsilon: self.epsilon,
        }
        .serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::StepLabel;
    use approx::assert_abs_diff_eq;

    fn op(rows: &[Vec<f64>]) -> TransferOperator {
        let space = StateSpace::counting(rows.len()).unwrap();
        TransferOperator::from_rows(space, rows, StepLabel::Steps(1)).unwrap()
    }

    fn func(p: &TransferOperator, v: &[f64]) -> WeightedFunction {
        WeightedFunction::new(p.space().clone(), v.to_vec()).unwrap()
    }

    #[test]
    fn tilt_two_state_exact_eigenfunction() {
        let p = op(&[vec![0.5, 0.2], vec![0.1, 0.6]]);
        let t = tilt_submarkov(&p, &func(&p, &[1.0, 1.0]), Some(0.7)).unwrap();
        let expected = [[5.0 / 7.0, 2.0 / 7.0], [1.0 / 7.0, 6.0 / 7.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(t.tilted.get(i, j), expected[i][j], epsilon = 1e-15);
            }
            assert_abs_diff_eq!(t.row_masses[i], 1.0, epsilon = 1e-15);
        }
        assert!(t.sub_markov);
    }

    #[test]
    fn tilt_with_doubled_normalizer_halves_masses() {
        let p = op(&[
            vec![0.3, 1.2, 0.0],
            vec![0.4, 0.1, 2.0],
            vec![0.0, 0.5, 0.5],
        ]);
        let psi = func(&p, &[1.0, 2.5, 0.7]);
        let c = 2.0 * default_normalizer(&p, &psi).unwrap();
        let t = tilt_submarkov(&p, &psi, Some(c)).unwrap();
        assert!(t.sub_markov);
        assert!(t.max_row_mass <= 0.5 + 1e-15);
    }

    #[test]
    fn tilt_rejects_bad_inputs() {
        let p = op(&[vec![0.5, 0.2], vec![0.1, 0.6]]);
        assert!(tilt_submarkov(&p, &func(&p, &[1.0, 0.0]), None).is_err());
        assert!(tilt_submarkov(&p, &func(&p, &[1.0, 1.0]), Some(0.0)).is_err());
        assert!(tilt_submarkov(&p, &func(&p, &[1.0, 1.0]), Some(-1.0)).is_err());
    }

    #[test]
    fn h_transform_two_state() {
        let p = op(&[vec![0.5, 0.2], vec![0.1, 0.6]]);
        let h = h_transform(&p, &func(&p, &[1.0, 1.0]), 0.7, None).unwrap();
        assert_abs_diff_eq!(h.transformed.get(0, 0), 5.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.transformed.get(0, 1), 2.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.transformed.get(1, 0), 1.0 / 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h.transformed.get(1, 1), 6.0 / 7.0, epsilon = 1e-15);
        assert!(h.max_row_defect() < 1e-15);
    }

    #[test]
    fn h_transform_degenerate_support() {
        let p = op(&[vec![2.0, 0.0], vec![0.0, 1.0]]);
        let h = h_transform(&p, &func(&p, &[1.0, 0.0]), 2.0, None).unwrap();
        assert_eq!(h.support_index, vec![0]);
        assert_eq!(h.transformed.len(), 1);
        assert_eq!(h.transformed.get(0, 0), 1.0);
    }

    #[test]
    fn h_transform_errors() {
        let p = op(&[vec![0.5, 0.2], vec![0.1, 0.6]]);
        assert!(h_transform(&p, &func(&p, &[0.0, 0.0]), 0.7, None).is_err());
        assert!(h_transform(&p, &func(&p, &[1.0, 1.0]), 0.0, None).is_err());
        assert!(h_transform(&p, &func(&p, &[1.0, -1.0]), 0.7, None).is_err());
    }

    #[test]
    fn records_serialize_with_operator_layout() {
        let p = op(&[vec![0.5, 0.2], vec![0.1, 0.6]]);
        let t = tilt_submarkov(&p, &func(&p, &[1.0, 1.0]), None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&t).unwrap();
        assert!(v.get("kernel").is_some() && v.get("c").is_some());
        let h = h_transform(&p, &func(&p, &[1.0, 1.0]), 0.7, None).unwrap();
        let v: serde_json::Value = serde_json::to_value(&h).unwrap();
        assert_eq!(v["support"], serde_json::json!([0, 1]));
        assert_eq!(v["theta0"], serde_json::json!(0.7));
    }
}
