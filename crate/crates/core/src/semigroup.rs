//! Finite representation of a positive semigroup.
//!
//! A [`StateSpace`] is a finite point set with positive reference weights.
//! Functions live on it as [`WeightedFunction`]s, nonnegative measures as
//! [`Measure`]s (a density against the reference weights), and one-step
//! operators as dense [`TransferOperator`] kernels whose entry `(i, j)` is
//! the transition density from `i` to `j` already multiplied by the
//! reference weight of `j`. With that convention `P f` is a plain weighted
//! sum and `μ P` acts on point masses `density * weight`.

use std::ops::Add;
use std::sync::Arc;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discretization of the continuum state set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateSpace {
    points: Vec<Vec<f64>>,
    ref_weights: Vec<f64>,
    domain_tag: String,
}

impl StateSpace {
    pub fn new(
        points: Vec<Vec<f64>>,
        ref_weights: Vec<f64>,
        domain_tag: impl Into<String>,
    ) -> Result<Arc<Self>> {
        if points.is_empty() {
            return Err(Error::InvalidSpace(
                "state space must have at least one point".into(),
            ));
        }
        if points.len() != ref_weights.len() {
            return Err(Error::Length {
                expected: points.len(),
                got: ref_weights.len(),
            });
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::InvalidSpace(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
        }
        for (i, &w) in ref_weights.iter().enumerate() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::NonPositive {
                    what: "reference weight",
                    index: i,
                    value: w,
                });
            }
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]));
        for pair in order.windows(2) {
            if points[pair[0]] == points[pair[1]] {
                return Err(Error::InvalidSpace(format!(
                    "points {} and {} coincide",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Arc::new(Self {
            points,
            ref_weights,
            domain_tag: domain_tag.into(),
        }))
    }

    /// `n` states at coordinates `0, 1, ..., n-1` with unit weights.
    pub fn counting(n: usize) -> Result<Arc<Self>> {
        Self::new(
            (0..n).map(|i| vec![i as f64]).collect(),
            vec![1.0; n],
            "counting",
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn ref_weights(&self) -> &[f64] {
        &self.ref_weights
    }

    pub fn domain_tag(&self) -> &str {
        &self.domain_tag
    }

    /// Sub-space made of the states where `keep` is true, in index order.
    pub fn restrict(&self, keep: &[bool], tag: &str) -> Result<Arc<Self>> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        Self::new(
            idx.iter().map(|&i| self.points[i].clone()).collect(),
            idx.iter().map(|&i| self.ref_weights[i]).collect(),
            format!("{}{}", self.domain_tag, tag),
        )
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    std::cmp::Ordering::Equal
}

pub(crate) fn same_space(a: &Arc<StateSpace>, b: &Arc<StateSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn ensure_same(a: &Arc<StateSpace>, b: &Arc<StateSpace>, op: &'static str) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(op))
    }
}

fn first_non_finite(v: &Array1<f64>) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Number of elementary steps, or elapsed time for continuous-time skeletons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepLabel {
    Steps(u64),
    Time(f64),
}

impl StepLabel {
    pub fn as_f64(self) -> f64 {
        match self {
            StepLabel::Steps(n) => n as f64,
            StepLabel::Time(t) => t,
        }
    }
}

impl Add for StepLabel {
    type Output = Result<StepLabel>;

    fn add(self, rhs: StepLabel) -> Result<StepLabel> {
        use StepLabel::*;
        match (self, rhs) {
            (Steps(a), Steps(b)) => Ok(Steps(a + b)),
            (Time(a), Time(b)) => Ok(Time(a + b)),
            (Steps(0), x) | (x, Steps(0)) => Ok(x),
            _ => Err(Error::InvalidArgument(
                "cannot compose a step-counted operator with a timed one".into(),
            )),
        }
    }
}

/// Real function on a state space.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedFunction {
    space: Arc<StateSpace>,
    values: Array1<f64>,
}

impl WeightedFunction {
    pub fn new(space: Arc<StateSpace>, values: impl Into<Array1<f64>>) -> Result<Self> {
        let values = values.into();
        if values.len() != space.len() {
            return Err(Error::Length {
                expected: space.len(),
                got: values.len(),
            });
        }
        Ok(Self { space, values })
    }

    pub fn constant(space: Arc<StateSpace>, c: f64) -> Self {
        let values = Array1::from_elem(space.len(), c);
        Self { space, values }
    }

    pub fn from_fn(space: Arc<StateSpace>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = space.points().iter().map(|p| f(p)).collect();
        Self { space, values }
    }

    pub fn indicator(mask: &SubsetMask) -> Self {
        let values = mask
            .member
            .iter()
            .map(|&m| if m { 1.0 } else { 0.0 })
            .collect();
        Self {
            space: mask.space.clone(),
            values,
        }
    }

    pub(crate) fn from_array(space: Arc<StateSpace>, values: Array1<f64>) -> Self {
        debug_assert_eq!(space.len(), values.len());
        Self { space, values }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.values.to_vec()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            space: self.space.clone(),
            values: self.values.mapv(f),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.space, &other.space, "pointwise product")?;
        Ok(Self {
            space: self.space.clone(),
            values: &self.values * &other.values,
        })
    }

    /// Pointwise quotient.
    pub fn div(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.space, &other.space, "pointwise quotient")?;
        Ok(Self {
            space: self.space.clone(),
            values: &self.values / &other.values,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        ensure_same(&self.space, &other.space, "difference")?;
        Ok(Self {
            space: self.space.clone(),
            values: &self.values - &other.values,
        })
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub(crate) fn require_positive(&self, what: &'static str) -> Result<()> {
        match self
            .values
            .iter()
            .position(|&v| !(v > 0.0 && v.is_finite()))
        {
            Some(index) => Err(Error::NonPositive {
                what,
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub(crate) fn require_nonnegative(&self, what: &'static str) -> Result<()> {
        match self
            .values
            .iter()
            .position(|&v| !(v >= 0.0 && v.is_finite()))
        {
            Some(index) => Err(Error::Negative {
                what,
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }
}

/// `max_x |f(x)| / ψ₁(x)`.
pub fn weighted_norm(f: &WeightedFunction, psi1: &WeightedFunction) -> Result<f64> {
    ensure_same(&f.space, &psi1.space, "weighted_norm")?;
    psi1.require_positive("psi1")?;
    Ok(f.values
        .iter()
        .zip(psi1.values.iter())
        .map(|(v, w)| v.abs() / w)
        .fold(0.0, f64::max))
}

/// Nonnegative measure given by its density against the reference weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    space: Arc<StateSpace>,
    density: Array1<f64>,
}

impl Measure {
    pub fn new(space: Arc<StateSpace>, density: impl Into<Array1<f64>>) -> Result<Self> {
        let density = density.into();
        if density.len() != space.len() {
            return Err(Error::Length {
                expected: space.len(),
                got: density.len(),
            });
        }
        if let Some(index) = density.iter().position(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::Negative {
                what: "measure density",
                index,
                value: density[index],
            });
        }
        Ok(Self { space, density })
    }

    /// Measure with the given point masses `μ({x_i})`.
    pub fn from_masses(space: Arc<StateSpace>, masses: impl Into<Array1<f64>>) -> Result<Self> {
        let masses = masses.into();
        if masses.len() != space.len() {
            return Err(Error::Length {
                expected: space.len(),
                got: masses.len(),
            });
        }
        let w = Array1::from(space.ref_weights().to_vec());
        Self::new(space, masses / w)
    }

    /// Unit point mass at state `i`.
    pub fn point_mass(space: Arc<StateSpace>, i: usize) -> Result<Self> {
        if i >= space.len() {
            return Err(Error::InvalidArgument(format!(
                "state {i} out of range for a space of size {}",
                space.len()
            )));
        }
        let mut density = Array1::zeros(space.len());
        density[i] = 1.0 / space.ref_weights()[i];
        Ok(Self { space, density })
    }

    /// Probability measure proportional to the reference weights.
    pub fn uniform(space: Arc<StateSpace>) -> Self {
        let total: f64 = space.ref_weights().iter().sum();
        let density = Array1::from_elem(space.len(), 1.0 / total);
        Self { space, density }
    }

    pub(crate) fn from_masses_unchecked(space: Arc<StateSpace>, masses: Array1<f64>) -> Self {
        let w = Array1::from(space.ref_weights().to_vec());
        Self {
            space,
            density: masses / w,
        }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn density(&self) -> &Array1<f64> {
        &self.density
    }

    pub fn masses(&self) -> Array1<f64> {
        &self.density * &Array1::from(self.space.ref_weights().to_vec())
    }

    /// `μ(f) = Σ density · weight · f`.
    pub fn integrate(&self, f: &WeightedFunction) -> Result<f64> {
        ensure_same(&self.space, &f.space, "measure integration")?;
        Ok(self
            .density
            .iter()
            .zip(self.space.ref_weights())
            .zip(f.values.iter())
            .map(|((d, w), v)| d * w * v)
            .sum())
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            space: self.space.clone(),
            density: self.density.mapv(|d| d * c),
        }
    }
}

/// Membership mask of a subset of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMask {
    space: Arc<StateSpace>,
    member: Vec<bool>,
}

impl SubsetMask {
    pub fn new(space: Arc<StateSpace>, member: Vec<bool>) -> Result<Self> {
        if member.len() != space.len() {
            return Err(Error::Length {
                expected: space.len(),
                got: member.len(),
            });
        }
        Ok(Self { space, member })
    }

    pub fn full(space: Arc<StateSpace>) -> Self {
        let member = vec![true; space.len()];
        Self { space, member }
    }

    pub fn from_indices(space: Arc<StateSpace>, indices: &[usize]) -> Result<Self> {
        let mut member = vec![false; space.len()];
        for &i in indices {
            if i >= space.len() {
                return Err(Error::InvalidArgument(format!("state {i} out of range")));
            }
            member[i] = true;
        }
        Ok(Self { space, member })
    }

    pub fn from_fn(space: Arc<StateSpace>, f: impl Fn(usize, &[f64]) -> bool) -> Self {
        let member = space
            .points()
            .iter()
            .enumerate()
            .map(|(i, p)| f(i, p))
            .collect();
        Self { space, member }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn member(&self) -> &[bool] {
        &self.member
    }

    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&i| self.member[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn is_full(&self) -> bool {
        self.member.iter().all(|&m| m)
    }

    pub fn complement(&self) -> Self {
        Self {
            space: self.space.clone(),
            member: self.member.iter().map(|&m| !m).collect(),
        }
    }
}

/// Nonnegative dense kernel on a state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "OperatorLayout", try_from = "OperatorLayout")]
pub struct TransferOperator {
    space: Arc<StateSpace>,
    kernel: Array2<f64>,
    step: StepLabel,
}

impl TransferOperator {
    pub fn new(space: Arc<StateSpace>, kernel: Array2<f64>, step: StepLabel) -> Result<Self> {
        let n = space.len();
        if kernel.dim() != (n, n) {
            return Err(Error::InvalidArgument(format!(
                "kernel has shape {:?}, expected ({n}, {n})",
                kernel.dim()
            )));
        }
        for ((i, j), &v) in kernel.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i * n + j });
            }
            if v < 0.0 {
                return Err(Error::Negative {
                    what: "kernel",
                    index: i * n + j,
                    value: v,
                });
            }
        }
        Ok(Self {
            space,
            kernel,
            step,
        })
    }

    pub fn from_rows(space: Arc<StateSpace>, rows: &[Vec<f64>], step: StepLabel) -> Result<Self> {
        let n = space.len();
        if rows.len() != n {
            return Err(Error::Length {
                expected: n,
                got: rows.len(),
            });
        }
        let mut kernel = Array2::zeros((n, n));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "kernel row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                kernel[[i, j]] = v;
            }
        }
        Self::new(space, kernel, step)
    }

    pub fn identity(space: Arc<StateSpace>) -> Self {
        let kernel = Array2::eye(space.len());
        Self {
            space,
            kernel,
            step: StepLabel::Steps(0),
        }
    }

    pub fn space(&self) -> &Arc<StateSpace> {
        &self.space
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.kernel[[i, j]]
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn step(&self) -> StepLabel {
        self.step
    }

    pub fn row_masses(&self) -> Vec<f64> {
        self.kernel.sum_axis(Axis(1)).to_vec()
    }

    /// `c P`, keeping the step label.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.space.clone(), self.kernel.mapv(|v| v * c), self.step)
    }

    /// `(P f)(i) = Σ_j kernel(i, j) f(j)`.
    pub fn apply(&self, f: &WeightedFunction) -> Result<WeightedFunction> {
        ensure_same(&self.space, &f.space, "apply")?;
        let out = self.kernel.dot(&f.values);
        if let Some(index) = first_non_finite(&out) {
            return Err(Error::NonFinite { index });
        }
        Ok(WeightedFunction::from_array(self.space.clone(), out))
    }

    /// Left action on measures: `(μP)(f) = μ(P f)`.
    pub fn dual_apply(&self, mu: &Measure) -> Result<Measure> {
        ensure_same(&self.space, &mu.space, "dual_apply")?;
        let masses = mu.masses().dot(&self.kernel);
        if let Some(index) = first_non_finite(&masses) {
            return Err(Error::NonFinite { index });
        }
        Ok(Measure::from_masses_unchecked(self.space.clone(), masses))
    }

    /// Kernel product, so that `compose(P, Q) f = P (Q f)`; step labels add.
    pub fn compose(&self, other: &TransferOperator) -> Result<TransferOperator> {
        ensure_same(&self.space, &other.space, "compose")?;
        let kernel = self.kernel.dot(&other.kernel);
        if let Some(index) = kernel.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(TransferOperator {
            space: self.space.clone(),
            kernel,
            step: (self.step + other.step)?,
        })
    }

    /// `P^n` as a materialized operator (binary powering).
    pub fn power(&self, n: u64) -> Result<TransferOperator> {
        let mut result = TransferOperator::identity(self.space.clone());
        let mut base = self.clone();
        let mut k = n;
        while k > 0 {
            if k & 1 == 1 {
                result = result.compose(&base)?;
            }
            k >>= 1;
            if k > 0 {
                base = base.compose(&base)?;
            }
        }
        Ok(result)
    }

    /// `P_n f` by `n` successive applications, without materializing `P_n`.
    ///
    /// Intermediate vectors are rescaled when they drift toward the ends of
    /// the floating-point range; the scale is restored at the end.
    pub fn iterate(&self, n: usize, f: &WeightedFunction) -> Result<WeightedFunction> {
        ensure_same(&self.space, &f.space, "iterate")?;
        let mut v = f.values.clone();
        let mut log_scale = 0.0_f64;
        for _ in 0..n {
            v = self.kernel.dot(&v);
            let m = v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
            if !m.is_finite() {
                let index = first_non_finite(&v).unwrap_or(0);
                return Err(Error::NonFinite { index });
            }
            if m == 0.0 {
                break;
            }
            if !(1e-150..=1e150).contains(&m) {
                v.mapv_inplace(|x| x / m);
                log_scale += m.ln();
            }
        }
        if log_scale != 0.0 {
            let s = log_scale.exp();
            v.mapv_inplace(|x| x * s);
        }
        if let Some(index) = first_non_finite(&v) {
            return Err(Error::NonFinite { index });
        }
        Ok(WeightedFunction::from_array(self.space.clone(), v))
    }

    /// Kernel restricted to rows and columns in `keep`, on the restricted space.
    pub(crate) fn restrict(&self, keep: &[bool], tag: &str) -> Result<TransferOperator> {
        let space = self.space.restrict(keep, tag)?;
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep[i]).collect();
        let m = idx.len();
        let mut kernel = Array2::zeros((m, m));
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                kernel[[a, b]] = self.kernel[[i, j]];
            }
        }
        Ok(TransferOperator {
            space,
            kernel,
            step: self.step,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// JSON layout shared by operators and the transform records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OperatorLayout {
    pub points: Vec<Vec<f64>>,
    pub ref_weights: Vec<f64>,
    pub kernel: Vec<Vec<f64>>,
    pub step_label: StepLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_tag: Option<String>,
}

impl From<TransferOperator> for OperatorLayout {
    fn from(op: TransferOperator) -> Self {
        OperatorLayout::from(&op)
    }
}

impl From<&TransferOperator> for OperatorLayout {
    fn from(op: &TransferOperator) -> Self {
        let tag = op.space.domain_tag();
        OperatorLayout {
            points: op.space.points().to_vec(),
            ref_weights: op.space.ref_weights().to_vec(),
            kernel: op.kernel.outer_iter().map(|r| r.to_vec()).collect(),
            step_label: op.step,
            domain_tag: (!tag.is_empty()).then(|| tag.to_string()),
        }
    }
}

impl TryFrom<OperatorLayout> for TransferOperator {
    type Error = Error;

    fn try_from(layout: OperatorLayout) -> Result<Self> {
        let space = StateSpace::new(
            layout.points,
            layout.ref_weights,
            layout.domain_tag.unwrap_or_default(),
        )
        .map_err(|e| Error::Config(format!("points/ref_weights: {e}")))?;
        TransferOperator::from_rows(space, &layout.kernel, layout.step_label)
            .map_err(|e| Error::Config(format!("kernel: {e}")))
    }
}

impl Serialize for WeightedFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.values.to_vec().serialize(s)
    }
}

impl Serialize for Measure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Measure", 2)?;
        st.serialize_field("density", &self.density.to_vec())?;
        st.serialize_field("masses", &self.masses().to_vec())?;
        st.end()
    }
}

impl Serialize for SubsetMask {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.indices().serialize(s)
    }
}
