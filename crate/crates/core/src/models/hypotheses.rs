//! Growth diagnostics for the model hypotheses.
//!
//! Points of the grid are grouped in shells of equal width by `|x|`; the
//! growth quantity is reduced over each shell (minimum for the dynamical
//! system, maximum for the diffusion) and the sequence of shell values is
//! inspected for monotone divergence. These are sufficient conditions, so a
//! failure is reported as a warning only.

use serde::Serialize;

use super::catalog::norm;
use super::diffusion::DiffusionModel;
use super::grid::Grid;
use super::pds::PdsModel;
use crate::error::Result;

pub const SHELLS: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct Shell {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Reduced growth quantity over the shell.
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub quantity: String,
    pub shells: Vec<Shell>,
    /// Shell values move strictly in the required direction.
    pub diverges: bool,
    /// Smallest `C` with `G ≤ C e^{|x|}` on the grid.
    pub g_exp_bound: Option<f64>,
    /// `G` stays bounded away from 0 on every shell.
    pub inv_g_bounded: Option<bool>,
    pub warnings: Vec<String>,
}

/// Reduces `q` over `|x|`-shells of the grid; empty shells are skipped.
fn shells(grid: &Grid, q: impl Fn(&[f64]) -> f64, take_min: bool) -> Vec<Shell> {
    let radii: Vec<f64> = (0..grid.len()).map(|i| norm(grid.space.point(i))).collect();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let w = r_max / SHELLS as f64;
    let mut out = Vec::new();
    for k in 0..SHELLS {
        let (lo, hi) = (k as f64 * w, (k + 1) as f64 * w);
        let vals = radii
            .iter()
            .enumerate()
            .filter(|(_, &r)| r >= lo && (r < hi || (k + 1 == SHELLS && r <= hi)))
            .map(|(i, _)| q(grid.space.point(i)));
        let v = if take_min {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        };
        if v.is_finite() {
            out.push(Shell {
                r_lo: lo,
                r_hi: hi,
                value: v,
            });
        }
    }
    out
}

fn strictly(shells: &[Shell], increasing: bool) -> bool {
    shells.len() >= 2
        && shells.windows(2).all(|w| {
            if increasing {
                w[1].value > w[0].value
            } else {
                w[1].value < w[0].value
            }
        })
}

/// `|x| − p|F(x)|` should grow without bound; `G` should satisfy
/// `0 < G ≤ C e^{|x|}` locally uniformly.
pub fn check_pds_hypotheses(model: &PdsModel) -> Result<HypothesisReport> {
    let grid = model.grid()?;
    let sh = shells(
        &grid,
        |x| norm(x) - model.p * norm(&model.step_map(x)),
        true,
    );
    let diverges = strictly(&sh, true);
    let mut warnings = Vec::new();
    if !diverges {
        warnings.push(format!(
            "|x| - {}|F(x)| does not increase across the grid shells",
            model.p
        ));
    }
    let mut c: f64 = 0.0;
    for i in 0..grid.len() {
        let x = grid.space.point(i);
        c = c.max(model.penalty(x) / norm(x).exp());
    }
    let g_min = shells(&grid, |x| model.penalty(x), true);
    let inv_g_bounded = g_min.iter().all(|s| s.value > 0.0);
    if !inv_g_bounded {
        warnings.push("G vanishes on some shell; 1/G is not locally bounded".into());
    }
    Ok(HypothesisReport {
        quantity: format!("min over shell of |x| - {}|F(x)|", model.p),
        shells: sh,
        diverges,
        g_exp_bound: Some(c),
        inv_g_bounded: Some(inv_g_bounded),
        warnings,
    })
}

/// `r + Σ bᵢ` should decrease without bound.
pub fn check_diffusion_hypotheses(model: &DiffusionModel) -> Result<HypothesisReport> {
    let grid = model.grid()?;
    let sh = shells(
        &grid,
        |x| model.potential(x) + model.drift(x).iter().sum::<f64>(),
        false,
    );
    let diverges = strictly(&sh, false);
    let warnings = if diverges {
        Vec::new()
    } else {
        vec!["r + sum of b_i does not decrease across the grid shells".into()]
    };
    Ok(HypothesisReport {
        quantity: "max over shell of r + sum b_i".into(),
        shells: sh,
        diverges,
        g_exp_bound: None,
        inv_g_bounded: None,
        warnings,
    })
}
