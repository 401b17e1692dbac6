//! Gaussian-perturbed dynamical system `X_{n+1} = F(X_n) + ξ_n` with
//! penalty `G` and killing outside a box `E`.
//!
//! The one-step kernel charges each grid cell `A` with
//! `G(center of A) · P(F(x) + ξ ∈ A)`, the Gaussian cell probability being
//! exact (normal CDF differences). Where `E` extends past the grid the box
//! is truncated; the probability escaping through a truncated face is the
//! leak, and a grid leaking more than 1% from some row is rejected.

use libm::erfc;
use serde::Serialize;

use super::catalog::{norm, FnSpec};
use super::grid::{multi_index, Axis, Grid};
use super::quadrature::gauss_hermite;
use crate::condition_g::{self, GOptions, GReport, Psi2Series};
use crate::error::{Error, Result};
use crate::semigroup::{StepLabel, SubsetMask, TransferOperator, WeightedFunction};

/// Largest tolerated probability of leaving the grid through a truncated face.
pub const MAX_LEAK: f64 = 0.01;
/// Nodes per dimension of the Gauss–Hermite reference computation.
pub const GH_NODES: usize = 32;

#[derive(Debug, Clone, Serialize)]
pub struct PdsModel {
    pub dim: usize,
    #[serde(rename = "F")]
    pub f: FnSpec,
    #[serde(rename = "G")]
    pub g: FnSpec,
    pub noise_sd: f64,
    /// Per-coordinate bounds of `E` (may be infinite).
    pub e_lo: f64,
    pub e_hi: f64,
    /// Cells per dimension.
    pub grid_n: usize,
    /// Half-width of the truncation box `[-L, L]^d`.
    pub grid_l: f64,
    pub p: f64,
    pub a: f64,
}

impl Default for PdsModel {
    fn default() -> Self {
        Self {
            dim: 1,
            f: FnSpec::Linear(0.25),
            g: FnSpec::Const(1.0),
            noise_sd: 1.0,
            e_lo: f64::NEG_INFINITY,
            e_hi: f64::INFINITY,
            grid_n: 400,
            grid_l: 8.0,
            p: 2.0,
            a: 2.0,
        }
    }
}

impl PdsModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return bad(format!("noise.sd must be positive, got {}", self.noise_sd));
        }
        if !(self.p > 1.0) {
            return bad(format!("model.p must exceed 1, got {}", self.p));
        }
        if !(self.a > 0.0 && 1.0 / self.a < self.p - 1.0) {
            return bad(format!(
                "model.a must satisfy 1/a < p - 1 (a = {}, p = {})",
                self.a, self.p
            ));
        }
        if !(1..=2).contains(&self.dim) {
            return bad(format!("model.dim must be 1 or 2, got {}", self.dim));
        }
        if !(self.grid_l > 0.0 && self.grid_l.is_finite()) {
            return bad(format!("grid.L must be positive, got {}", self.grid_l));
        }
        if !(self.e_lo < self.e_hi) || self.e_lo >= self.grid_l || self.e_hi <= -self.grid_l {
            return bad(format!(
                "domain [{}, {}] does not meet the grid box [-{L}, {L}]",
                self.e_lo,
                self.e_hi,
                L = self.grid_l
            ));
        }
        if self.grid_n < 2 {
            return bad(format!("grid.n must be at least 2, got {}", self.grid_n));
        }
        Ok(())
    }

    fn box_lo(&self) -> f64 {
        self.e_lo.max(-self.grid_l)
    }

    fn box_hi(&self) -> f64 {
        self.e_hi.min(self.grid_l)
    }

    fn truncated_lo(&self) -> bool {
        self.e_lo < -self.grid_l
    }

    fn truncated_hi(&self) -> bool {
        self.e_hi > self.grid_l
    }

    pub fn in_e(&self, y: &[f64]) -> bool {
        y.iter().all(|&v| v >= self.e_lo && v <= self.e_hi)
    }

    /// `ψ₁(x) = e^{a|x|}`.
    pub fn psi1_at(&self, x: &[f64]) -> f64 {
        (self.a * norm(x)).exp()
    }

    pub fn step_map(&self, x: &[f64]) -> Vec<f64> {
        self.f.eval_vec(x)
    }

    pub fn penalty(&self, y: &[f64]) -> f64 {
        self.g.eval_norm(y)
    }

    pub fn grid(&self) -> Result<Grid> {
        let axis = Axis::cells(self.box_lo(), self.box_hi(), self.grid_n)?;
        Grid::new(vec![axis; self.dim], "pds")
    }
}

/// `P(Z ∈ [a, b])` for a standard normal `Z`, computed on the tail side
/// that keeps precision.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        1.0 - 0.5 * (erfc(-a * s) + erfc(b * s))
    }
}

#[derive(Debug, Clone)]
pub struct PdsKernel {
    pub model: PdsModel,
    pub grid: Grid,
    pub op: TransferOperator,
    pub psi1: WeightedFunction,
    /// Largest probability of leaving through a truncated face, and its row.
    pub leak_max: f64,
    pub leak_argmax: usize,
    /// Largest `E[ψ₁(Y) ; Y past a truncated face] / ψ₁(x)`.
    pub psi1_leak_max: f64,
    /// `1 − P(F(x) + ξ ∈ grid box)` per row.
    pub row_deficiency: Vec<f64>,
    /// Largest relative gap between `P ψ₁` on the grid and a Gauss–Hermite
    /// evaluation of the untruncated `P₁ ψ₁`.
    pub gh_discrepancy: f64,
}

#[derive(Serialize)]
pub struct PdsKernelSummary {
    pub states: usize,
    pub cell_width: f64,
    pub leak_max: f64,
    pub psi1_leak_max: f64,
    pub max_row_deficiency: f64,
    pub gh_discrepancy: f64,
}

impl PdsKernel {
    pub fn summary(&self) -> PdsKernelSummary {
        PdsKernelSummary {
            states: self.op.len(),
            cell_width: self.grid.axes[0].h,
            leak_max: self.leak_max,
            psi1_leak_max: self.psi1_leak_max,
            max_row_deficiency: self.row_deficiency.iter().copied().fold(0.0, f64::max),
            gh_discrepancy: self.gh_discrepancy,
        }
    }
}

/// Per-axis cell probabilities for a Gaussian centered at `m`, plus the
/// escape probability through truncated faces.
fn axis_masses(model: &PdsModel, axis: &Axis, m: f64, pad: usize) -> (Vec<f64>, f64, f64) {
    let sd = model.noise_sd;
    let n = axis.len() as isize;
    let pad = pad as isize;
    let masses: Vec<f64> = (-pad..n + pad)
        .map(|k| {
            let a = axis.lo + k as f64 * axis.h;
            normal_mass((a - m) / sd, (a + axis.h - m) / sd)
        })
        .collect();
    let inside: f64 = masses[pad as usize..(pad + n) as usize].iter().sum();
    let mut leak = 0.0;
    if model.truncated_lo() {
        leak += normal_mass(f64::NEG_INFINITY, (axis.lo - m) / sd);
    }
    if model.truncated_hi() {
        leak += normal_mass((axis.hi - m) / sd, f64::INFINITY);
    }
    (masses, leak, 1.0 - inside)
}

pub fn build_pds_kernel(model: &PdsModel) -> Result<PdsKernel> {
    model.validate()?;
    let grid = model.grid()?;
    let axis = grid.axes[0].clone();
    let n_axis = axis.len();
    let dims = grid.dims();
    let total = grid.len();
    let pad = ((8.0 * model.noise_sd / axis.h).ceil() as usize).max(1);
    let pad_lo = if model.truncated_lo() { pad } else { 0 };
    let pad_hi = if model.truncated_hi() { pad } else { 0 };
    let padded_n = n_axis + 2 * pad;

    // Quantities per padded axis cell.
    let center = |k: usize| axis.lo + (k as f64 - pad as f64 + 0.5) * axis.h;
    let in_padded = |k: usize| k + pad_lo >= pad && k < pad + n_axis + pad_hi;

    let space = grid.space.clone();
    let g_at: Vec<f64> = (0..total).map(|j| model.penalty(space.point(j))).collect();
    if let Some(j) = g_at.iter().position(|&g| !(g > 0.0 && g.is_finite())) {
        return Err(Error::Config(format!(
            "penalty G must be positive and finite on E (value {} at state {j})",
            g_at[j]
        )));
    }

    let mut kernel = ndarray::Array2::<f64>::zeros((total, total));
    let mut leak_max = 0.0_f64;
    let mut leak_argmax = 0;
    let mut psi1_leak_max = 0.0_f64;
    let mut row_deficiency = Vec::with_capacity(total);
    let psi1_vals: Vec<f64> = (0..total).map(|i| model.psi1_at(space.point(i))).collect();

    for i in 0..total {
        let x = space.point(i);
        let fx = model.step_map(x);
        let per_axis: Vec<(Vec<f64>, f64, f64)> = fx
            .iter()
            .map(|&m| axis_masses(model, &axis, m, pad))
            .collect();
        let leak = 1.0 - per_axis.iter().map(|a| 1.0 - a.1).product::<f64>();
        if leak > leak_max {
            leak_max = leak;
            leak_argmax = i;
        }
        row_deficiency.push(1.0 - per_axis.iter().map(|a| 1.0 - a.2).product::<f64>());
        let mut row = kernel.row_mut(i);
        for j in 0..total {
            let mi = multi_index(j, &dims);
            let q: f64 = mi
                .iter()
                .zip(&per_axis)
                .map(|(&k, a)| a.0[k + pad])
                .product();
            row[j] = g_at[j] * q;
        }
        // ψ₁-weighted mass on virtual cells past truncated faces.
        if pad_lo + pad_hi > 0 {
            let mut outside = 0.0;
            let padded_dims = vec![padded_n; model.dim];
            for flat in 0..padded_n.pow(model.dim as u32) {
                let idx = multi_index(flat, &padded_dims);
                let interior = idx.iter().all(|&k| k >= pad && k < pad + n_axis);
                if interior || !idx.iter().all(|&k| in_padded(k)) {
                    continue;
                }
                let y: Vec<f64> = idx.iter().map(|&k| center(k)).collect();
                let q: f64 = idx.iter().zip(&per_axis).map(|(&k, a)| a.0[k]).product();
                outside += model.penalty(&y) * model.psi1_at(&y) * q;
            }
            psi1_leak_max = psi1_leak_max.max(outside / psi1_vals[i]);
        }
    }
    if leak_max > MAX_LEAK {
        return Err(Error::GridTooNarrow {
            leak: leak_max,
            index: leak_argmax,
        });
    }
    let op = TransferOperator::new(space.clone(), kernel, StepLabel::Steps(1))?;
    let psi1 = WeightedFunction::new(space.clone(), psi1_vals)?;
    let gh_discrepancy = gh_check(model, &op, &psi1)?;
    Ok(PdsKernel {
        model: model.clone(),
        grid,
        op,
        psi1,
        leak_max,
        leak_argmax,
        psi1_leak_max,
        row_deficiency,
        gh_discrepancy,
    })
}

/// `E[G(F(x)+ξ) 1_E(F(x)+ξ) ψ₁(F(x)+ξ)]` by tensor Gauss–Hermite.
pub fn reference_p_psi1(model: &PdsModel, x: &[f64]) -> f64 {
    let (nodes, weights) = gauss_hermite(GH_NODES);
    let s = std::f64::consts::SQRT_2 * model.noise_sd;
    let fx = model.step_map(x);
    let norm_w = std::f64::consts::PI.sqrt().powi(model.dim as i32);
    let mut total = 0.0;
    let n = nodes.len();
    for flat in 0..n.pow(model.dim as u32) {
        let mi = multi_index(flat, &vec![n; model.dim]);
        let y: Vec<f64> = mi.iter().zip(&fx).map(|(&k, m)| m + s * nodes[k]).collect();
        if !model.in_e(&y) {
            continue;
        }
        let w: f64 = mi.iter().map(|&k| weights[k]).product();
        total += w * model.penalty(&y) * model.psi1_at(&y);
    }
    total / norm_w
}

fn gh_check(model: &PdsModel, op: &TransferOperator, psi1: &WeightedFunction) -> Result<f64> {
    let p_psi = op.apply(psi1)?;
    let space = op.space();
    let stride = (op.len() / 64).max(1);
    let mut worst = 0.0_f64;
    for i in (0..op.len()).step_by(stride) {
        let r = reference_p_psi1(model, space.point(i));
        if r > 0.0 {
            worst = worst.max((p_psi.get(i) - r).abs() / r);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize)]
pub struct PdsVerification {
    /// `inf_{B(0,1)} P 1_{B(0,1)} / 2`.
    pub theta2: f64,
    /// Sublevel `ψ₁ ≤ radius` chosen as `K`.
    pub psi1_level: f64,
    pub k: SubsetMask,
    pub n0: usize,
    pub psi2: WeightedFunction,
    pub report: GReport,
}

/// Condition (G) for the discretized model along the lines of the
/// argument for this model: `θ₂` from the unit ball, `K` the smallest
/// `ψ₁`-sublevel set with `θ₁ ≤ 0.9 θ₂`, `ψ₂` the truncated resolvent
/// series on `K`.
pub fn verify_condition_g(kernel: &PdsKernel, opts: GOptions) -> Result<PdsVerification> {
    let p = &kernel.op;
    let space = p.space().clone();
    let ball = SubsetMask::from_fn(space.clone(), |_, x| norm(x) <= 1.0);
    if ball.is_empty() {
        return Err(Error::Analysis("no grid point in the unit ball".into()));
    }
    let reach = p.apply(&WeightedFunction::indicator(&ball))?;
    let theta2 = ball
        .indices()
        .into_iter()
        .map(|i| reach.get(i))
        .fold(f64::INFINITY, f64::min)
        / 2.0;
    if !(theta2 > 0.0) {
        return Err(Error::Analysis(
            "unit ball is not charged in one step".into(),
        ));
    }
    let mut levels = kernel.psi1.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (psi1_level, k) = condition_g::select_sublevel_set(p, &kernel.psi1, theta2, &levels)?
        .ok_or_else(|| {
            Error::Analysis(format!(
                "no psi1 sublevel set brings theta1 below 0.9 theta2 = {:.6e}",
                0.9 * theta2
            ))
        })?;
    let series = condition_g::auto_psi2(p, &k, theta2, &kernel.psi1, 1000)?;
    let Psi2Series { psi2, n0, .. } = series;
    let report = condition_g::verify(p, &k, &kernel.psi1, &psi2, opts)?;
    Ok(PdsVerification {
        theta2,
        psi1_level,
        k,
        n0,
        psi2,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn normal_mass_tails() {
        assert_abs_diff_eq!(
            normal_mass(f64::NEG_INFINITY, f64::INFINITY),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(normal_mass(0.0, f64::INFINITY), 0.5, epsilon = 1e-15);
        let far = normal_mass(10.0, 11.0);
        assert!(far > 0.0 && far < 1e-22);
        assert_abs_diff_eq!(
            normal_mass(-1.0, 1.0),
            0.682_689_492_137_085_9,
            epsilon = 1e-14
        );
    }

    #[test]
    fn conservative_walk_keeps_mass() {
        let m = PdsModel {
            f: FnSpec::Const(0.0),
            grid_n: 200,
            grid_l: 10.0,
            ..PdsModel::default()
        };
        let k = build_pds_kernel(&m).unwrap();
        let one = WeightedFunction::constant(k.op.space().clone(), 1.0);
        let p1 = k.op.apply(&one).unwrap();
        for i in 0..p1.len() {
            assert!((p1.get(i) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let m = PdsModel {
            f: FnSpec::Linear(1.0),
            grid_n: 50,
            grid_l: 1.0,
            ..PdsModel::default()
        };
        assert!(matches!(
            build_pds_kernel(&m),
            Err(Error::GridTooNarrow { .. })
        ));
    }

    #[test]
    fn bounded_domain_kills() {
        let m = PdsModel {
            e_lo: 0.0,
            e_hi: 2.0,
            grid_n: 40,
            ..PdsModel::default()
        };
        let k = build_pds_kernel(&m).unwrap();
        assert_eq!(k.leak_max, 0.0);
        assert!(k.row_deficiency.iter().all(|&d| d > 0.1));
    }

    #[test]
    fn invalid_models() {
        let m = PdsModel {
            a: 0.5,
            ..PdsModel::default()
        };
        assert!(m.validate().is_err());
        let m = PdsModel {
            noise_sd: 0.0,
            ..PdsModel::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn small_model_verifies() {
        let m = PdsModel {
            grid_n: 120,
            ..PdsModel::default()
        };
        let k = build_pds_kernel(&m).unwrap();
        assert!(k.psi1_leak_max < 1e-6);
        let v = verify_condition_g(&k, GOptions::default()).unwrap();
        assert!(v.report.overall, "{}", v.report.render_table());
        assert!(v.report.g4.n4.iter().all(|&n| n == Some(1)));
    }
}
