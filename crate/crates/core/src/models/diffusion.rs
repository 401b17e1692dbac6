//! Killed diffusion `dX = dB + b(X) dt` on `(0, L]^d` with potential `r`.
//!
//! The generator `½Δ + b·∇ + r` is discretized by central differences on
//! the interior nodes of the box, with Dirichlet (killing) rows at every
//! face. Transition operators are obtained by uniformization, which keeps
//! every entry nonnegative.

use ndarray::Array2;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use super::catalog::FnSpec;
use super::grid::{multi_index, Axis, Grid};
use crate::error::{Error, Result};
use crate::semigroup::{StepLabel, TransferOperator, WeightedFunction};
use crate::spectral::{self, SkeletonAnalysis, SkeletonFamily, SkeletonOptions};
use crate::transforms::tilt_submarkov;

/// Relative Poisson tail dropped by uniformization.
pub const POISSON_TAIL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct DiffusionModel {
    pub dim: usize,
    pub b: FnSpec,
    pub r: FnSpec,
    /// Subintervals per dimension (`grid_n − 1` interior nodes).
    pub grid_n: usize,
    pub grid_l: f64,
    pub t0: f64,
    /// Grid steps per `t₀`.
    pub steps: usize,
    /// Family horizon in units of `t₀`.
    pub horizon: usize,
}

impl Default for DiffusionModel {
    fn default() -> Self {
        Self {
            dim: 1,
            b: FnSpec::Affine(1.0, -1.0),
            r: FnSpec::Const(0.0),
            grid_n: 400,
            grid_l: 12.0,
            t0: 1.0,
            steps: 8,
            horizon: 8,
        }
    }
}

impl DiffusionModel {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(1..=2).contains(&self.dim) {
            return bad(format!("model.dim must be 1 or 2, got {}", self.dim));
        }
        if !(self.grid_l > 0.0 && self.grid_l.is_finite()) {
            return bad(format!("grid.L must be positive, got {}", self.grid_l));
        }
        if self.grid_n < 2 {
            return bad(format!("grid.n must be at least 2, got {}", self.grid_n));
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            return bad(format!("skeleton.t0 must be positive, got {}", self.t0));
        }
        if self.steps == 0 || self.horizon == 0 {
            return bad("skeleton.steps and skeleton.horizon must be positive".into());
        }
        Ok(())
    }

    pub fn h(&self) -> f64 {
        self.grid_l / self.grid_n as f64
    }

    pub fn grid(&self) -> Result<Grid> {
        let axis = Axis::interior(self.grid_l, self.grid_n)?;
        Grid::new(vec![axis; self.dim], "diffusion")
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.b.eval_vec(x)
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.r.eval_norm(x)
    }

    /// `a = d/2 + max over the grid of (r + Σ bᵢ)`.
    pub fn girsanov_a(&self, grid: &Grid) -> f64 {
        let sup = (0..grid.len())
            .map(|i| {
                let x = grid.space.point(i);
                self.potential(x) + self.drift(x).iter().sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        self.dim as f64 / 2.0 + sup
    }
}

/// Sparse generator, one list of `(column, rate)` per row.
#[derive(Debug, Clone)]
pub struct Generator {
    pub grid: Grid,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub h: f64,
}

impl Generator {
    /// `½Δ + drift·∇ + potential` with killing at all faces.
    pub fn build(
        grid: &Grid,
        drift: impl Fn(&[f64]) -> Vec<f64>,
        potential: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let h = grid.axes[0].h;
        let dims = grid.dims();
        let d = grid.dim();
        let mut rows = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.space.point(i);
            let bx = drift(x);
            let mi = multi_index(i, &dims);
            let mut row = vec![(i, -(d as f64) / (h * h) + potential(x))];
            for c in 0..d {
                let up = 0.5 / (h * h) + bx[c] / (2.0 * h);
                let down = 0.5 / (h * h) - bx[c] / (2.0 * h);
                if up < 0.0 || down < 0.0 || !bx[c].is_finite() {
                    return Err(Error::PositivityViolated {
                        node: i,
                        h,
                        drift: bx[c].abs(),
                        suggested_h: 1.0 / bx[c].abs(),
                    });
                }
                if mi[c] + 1 < dims[c] {
                    let mut n = mi.clone();
                    n[c] += 1;
                    row.push((grid.index(&n), up));
                }
                if mi[c] > 0 {
                    let mut n = mi.clone();
                    n[c] -= 1;
                    row.push((grid.index(&n), down));
                }
            }
            rows.push(row);
        }
        Ok(Self {
            grid: grid.clone(),
            rows,
            h,
        })
    }

    /// Uniformization rate `max_i (−Q_ii)`.
    pub fn rate(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| -r[0].1)
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE)
    }

    /// `e^{tQ} = Σ_k Poisson(k; Λt) M^k` with `M = I + Q/Λ ≥ 0`.
    pub fn exp(&self, t: f64) -> Result<TransferOperator> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "time must be positive, got {t}"
            )));
        }
        let n = self.rows.len();
        let lam = self.rate();
        let m_rows: Vec<Vec<(usize, f64)>> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|&(j, v)| (j, if j == i { 1.0 + v / lam } else { v / lam }))
                    .collect()
            })
            .collect();
        let lt = lam * t;
        let k_max = (lt + 50.0 * lt.sqrt() + 100.0) as usize;
        let mut term = Array2::<f64>::eye(n);
        let mut out = Array2::<f64>::zeros((n, n));
        let mut cum = 0.0;
        for k in 0..=k_max {
            let w = (-lt + k as f64 * lt.ln() - ln_gamma(k as f64 + 1.0)).exp();
            if w > 0.0 {
                out.scaled_add(w, &term);
            }
            cum += w;
            if k as f64 >= lt && 1.0 - cum <= POISSON_TAIL {
                break;
            }
            let mut next = Array2::<f64>::zeros((n, n));
            for (i, row) in m_rows.iter().enumerate() {
                let mut dst = next.row_mut(i);
                for &(j, v) in row {
                    dst.scaled_add(v, &term.row(j));
                }
            }
            term = next;
        }
        TransferOperator::new(self.grid.space.clone(), out, StepLabel::Time(t))
    }
}

pub fn build_diffusion_generator(model: &DiffusionModel) -> Result<Generator> {
    model.validate()?;
    let grid = model.grid()?;
    Generator::build(&grid, |x| model.drift(x), |x| model.potential(x))
}

#[derive(Debug, Clone)]
pub struct DiffusionFamily {
    pub model: DiffusionModel,
    pub generator: Generator,
    pub family: SkeletonFamily,
    /// `ψ(x) = e^{Σ xᵢ}`.
    pub psi: WeightedFunction,
}

impl DiffusionFamily {
    pub fn p_t0(&self) -> &TransferOperator {
        &self.family.ops[self.model.steps - 1]
    }
}

/// Generator, `P_Δ` (`Δ = t₀ / steps`) and the family `P_{kΔ}` up to
/// `horizon · t₀`.
pub fn build_diffusion_family(model: &DiffusionModel) -> Result<DiffusionFamily> {
    let generator = build_diffusion_generator(model)?;
    let delta = model.t0 / model.steps as f64;
    let step = generator.exp(delta)?;
    let family = SkeletonFamily::from_step(step, delta, model.steps * model.horizon)?;
    let space = generator.grid.space.clone();
    let psi = WeightedFunction::from_fn(space, |x| x.iter().sum::<f64>().exp());
    Ok(DiffusionFamily {
        model: model.clone(),
        generator,
        family,
        psi,
    })
}

/// Skeleton analysis with `ψ₁ = e^{Σxᵢ}` and `ψ₂ = η` of `P_{t₀}`.
pub fn analyze_family(fam: &DiffusionFamily, opts: &SkeletonOptions) -> Result<SkeletonAnalysis> {
    let triple = spectral::power_iterate(
        fam.p_t0(),
        &fam.psi,
        opts.tol.unwrap_or(1e-12),
        opts.max_iter.unwrap_or(100_000),
    )?;
    spectral::skeleton_analysis(&fam.family, fam.model.t0, &fam.psi, &triple.eta, opts)
}

#[derive(Debug, Clone, Serialize)]
pub struct GirsanovCheck {
    pub h: f64,
    pub a: f64,
    /// `max_x Σ_y |Q(x, y) − Q̄(x, y)|` between the tilted operator and the
    /// directly discretized killed `X̄`-semigroup at `t₀`.
    pub discrepancy: f64,
    pub max_tilted_row_mass: f64,
    pub min_kappa: f64,
}

/// Compares `P_{t₀}(ψ ·)/(e^{a t₀} ψ)` with the semigroup of
/// `dX̄ = dB + (1 + b) dt` killed at rate `κ = a − r − d/2 − Σ bᵢ`.
pub fn girsanov_check(model: &DiffusionModel) -> Result<GirsanovCheck> {
    let gen = build_diffusion_generator(model)?;
    let grid = gen.grid.clone();
    let a = model.girsanov_a(&grid);
    let d = model.dim as f64;
    let kappa = |x: &[f64]| a - model.potential(x) - d / 2.0 - model.drift(x).iter().sum::<f64>();
    let min_kappa = (0..grid.len())
        .map(|i| kappa(grid.space.point(i)))
        .fold(f64::INFINITY, f64::min);
    let bar = Generator::build(
        &grid,
        |x| model.drift(x).iter().map(|b| 1.0 + b).collect(),
        |x| -kappa(x),
    )?;
    let p_t0 = gen.exp(model.t0)?;
    let psi = WeightedFunction::from_fn(grid.space.clone(), |x| x.iter().sum::<f64>().exp());
    let tilt = tilt_submarkov(&p_t0, &psi, Some((a * model.t0).exp()))?;
    let direct = bar.exp(model.t0)?;
    let discrepancy = (tilt.tilted.kernel() - direct.kernel())
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Ok(GirsanovCheck {
        h: gen.h,
        a,
        discrepancy,
        max_tilted_row_mass: tilt.max_row_mass,
        min_kappa,
    })
}
