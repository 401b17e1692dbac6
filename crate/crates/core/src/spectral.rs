//! Dominant spectral triple `(θ₀, η, ν_P)` and convergence profiles.
//!
//! Power iteration runs a right iterate from `ψ₁` and a left iterate from
//! the uniform measure side by side. The convergence measurements replay
//! `μ P_n` (or the whole `P_n`) and fit a geometric envelope to the error
//! sequence.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::semigroup::{weighted_norm, Measure, TransferOperator, WeightedFunction};

/// Errors below this fraction of the largest observed error are treated as
/// round-off and left out of rate fits.
pub const ROUNDOFF_FRACTION: f64 = 1e-13;
/// Absolute level below which a whole error sequence counts as exact.
pub const EXACT_LEVEL: f64 = 1e-12;
/// A fitted rate must be below `1 − RATE_MARGIN` to count as decay.
pub const RATE_MARGIN: f64 = 1e-9;
/// The envelope constant may exceed the least-squares constant by this factor.
pub const ENVELOPE_SLACK: f64 = 2.0;
/// Relative tolerance of the semigroup-law check on a skeleton family.
pub const FAMILY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralTriple {
    pub theta0: f64,
    /// Normalized by `ν_P(η) = 1`.
    pub eta: WeightedFunction,
    /// Normalized by `ν_P(ψ₁) = 1`.
    pub nu_p: Measure,
    /// `‖P η − θ₀ η‖_{ψ₁} / θ₀`.
    pub right_residual: f64,
    /// `Σ_j |(ν_P P)_j − θ₀ ν_P{j}| ψ₁(j) / θ₀`.
    pub left_residual: f64,
    pub iterations: usize,
}

fn psi_norm(v: &Array1<f64>, psi: &Array1<f64>) -> f64 {
    v.iter()
        .zip(psi.iter())
        .map(|(a, w)| a.abs() / w)
        .fold(0.0, f64::max)
}

/// Simultaneous right/left power iteration.
///
/// Both residuals are relative to `θ̂` and are evaluated on the current pair
/// before it is advanced, so the returned triple is the one whose residuals
/// are reported.
pub fn power_iterate(
    p: &TransferOperator,
    psi1: &WeightedFunction,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralTriple> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tol must be positive, got {tol}"
        )));
    }
    psi1.require_positive("psi1")?;
    if !crate::semigroup::same_space(p.space(), psi1.space()) {
        return Err(Error::SpaceMismatch("power_iterate"));
    }
    let psi = psi1.values();
    let k = p.kernel();
    let mut f = psi / psi_norm(psi, psi);
    let w = Array1::from(p.space().ref_weights().to_vec());
    let mut m = &w / w.dot(psi);
    let mut history = Vec::new();

    for it in 1..=max_iter {
        let g = k.dot(&f);
        let mk = m.dot(k);
        let g_norm = psi_norm(&g, psi);
        let mk_mass = mk.dot(psi);
        if g_norm == 0.0 || mk_mass == 0.0 {
            return Err(Error::ZeroOperator);
        }
        if !(g_norm.is_finite() && mk_mass.is_finite()) {
            return Err(Error::NonFinite { index: it });
        }
        let mf = m.dot(&f);
        let (right, left, theta) = if mf > 0.0 {
            let theta = m.dot(&g) / mf;
            let right = psi_norm(&(&g - &(&f * theta)), psi) / (theta * mf);
            let left = (&mk - &(&m * theta))
                .iter()
                .zip(psi.iter())
                .map(|(d, s)| d.abs() * s)
                .sum::<f64>()
                / theta;
            (right, left, theta)
        } else {
            (f64::INFINITY, f64::INFINITY, f64::NAN)
        };
        history.push((right, left));
        if right <= tol && left <= tol {
            let eta = f.mapv(|v| v / mf);
            return Ok(SpectralTriple {
                theta0: theta,
                eta: WeightedFunction::new(p.space().clone(), eta)?,
                nu_p: Measure::from_masses(p.space().clone(), m)?,
                right_residual: right,
                left_residual: left,
                iterations: it,
            });
        }
        f = g / g_norm;
        m = mk / mk_mass;
    }
    let (right, left) = history.last().copied().unwrap_or((f64::NAN, f64::NAN));
    Err(Error::NotConverged {
        iterations: max_iter,
        right,
        left,
        history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Eq1,
    Eq2,
    Eq3,
    Eq1Cont,
    Eq2Cont,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Eq1 => "eq1",
            Target::Eq2 => "eq2",
            Target::Eq3 => "eq3",
            Target::Eq1Cont => "eq1cont",
            Target::Eq2Cont => "eq2cont",
        }
    }
}

/// Measured error sequence with a fitted geometric envelope
/// `bound(n) = Ĉ · α̂ⁿ · scale`.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub target: Target,
    pub errors: Vec<f64>,
    pub bound: Vec<f64>,
    pub fitted_rate: f64,
    pub fitted_constant: f64,
    /// Constant of the least-squares line, before enveloping.
    pub ls_constant: f64,
    /// Problem-dependent factor of the bound (`μ(ψ₁)/μ(ψ₂)` for eq1, `μ(ψ₁)` for eq2).
    pub bound_scale: f64,
    pub burn_in: usize,
    /// Time between successive indices (1 for discrete targets).
    pub step: f64,
    /// `−ln α̂ / step`; the continuous-time rate for skeleton reports.
    pub decay_rate: f64,
    /// Errors past burn-in are nonincreasing (up to round-off).
    pub monotone_tail: bool,
    /// Errors at or below this level were excluded from the fit.
    pub noise_floor: f64,
    pub pass: bool,
}

impl ConvergenceReport {
    /// CSV with header `n,error,bound`, 17 significant digits, LF endings.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,error,bound\n");
        for (n, (e, b)) in self.errors.iter().zip(&self.bound).enumerate() {
            let _ = writeln!(s, "{n},{e:.16e},{b:.16e}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn file_name(&self) -> String {
        format!("convergence_{}.csv", self.target.name())
    }
}

/// Default burn-in `max(5, n_max / 5)`.
pub fn default_burn_in(n_max: usize) -> usize {
    (n_max / 5).max(5)
}

/// Multiple of the triple's relative residual below which measured errors
/// are indistinguishable from the inaccuracy of the limit.
pub const NOISE_FACTOR: f64 = 100.0;

/// Absolute error level explained by the residuals of `triple`, for errors
/// of size `typical` whose limit error is amplified up to `amplification`
/// times (θ₀⁻ⁿ scaling over `n` steps).
pub fn accuracy_floor(triple: &SpectralTriple, typical: f64, amplification: usize) -> f64 {
    NOISE_FACTOR
        * triple.right_residual.max(triple.left_residual)
        * typical
        * amplification.max(1) as f64
}

/// Smallest number of points above round-off a geometric fit may use.
pub const MIN_FIT_POINTS: usize = 4;

struct Fit {
    rate: f64,
    ls_constant: f64,
    constant: f64,
    pass: bool,
}

/// Least squares on `ln(e_n / scale)` over `n ≥ burn_in` (points above
/// `floor`), then the smallest constant enveloping every such point.
fn geometric_fit(errors: &[f64], burn_in: usize, scale: f64, floor: f64) -> Option<Fit> {
    let window: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .skip(burn_in)
        .filter(|(_, &e)| e > floor && e > 0.0)
        .map(|(n, &e)| (n as f64, (e / scale).ln()))
        .collect();
    if window.len() < 2 {
        return None;
    }
    let nf = window.len() as f64;
    let mx = window.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = window.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = window.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = window.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rate = slope.exp();
    let ls_constant = (my - slope * mx).exp();
    let constant = errors
        .iter()
        .enumerate()
        .skip(burn_in)
        .filter(|(_, &e)| e > floor)
        .map(|(n, &e)| e / (rate.powi(n as i32) * scale))
        .fold(0.0, f64::max)
        * (1.0 + 8.0 * f64::EPSILON);
    let pass = rate < 1.0 - RATE_MARGIN && constant <= ENVELOPE_SLACK * ls_constant;
    Some(Fit {
        rate,
        ls_constant,
        constant,
        pass,
    })
}

/// Fits `ln e_n ≈ ln Ĉ + n ln α̂` and envelopes the data past the burn-in.
///
/// The burn-in starts at `min_burn_in` and moves forward to the first index
/// from which the decay is geometric (envelope within `ENVELOPE_SLACK` of
/// the least-squares constant), keeping at least `MIN_FIT_POINTS` points
/// above the floor. If no such index exists the report fails at
/// `min_burn_in`. Errors below `noise_floor` (the accuracy of the limit
/// itself) or below round-off are excluded from the fit.
pub fn fit_report(
    target: Target,
    errors: Vec<f64>,
    min_burn_in: usize,
    bound_scale: f64,
    step: f64,
    noise_floor: f64,
) -> ConvergenceReport {
    let scale = if bound_scale > 0.0 && bound_scale.is_finite() {
        bound_scale
    } else {
        1.0
    };
    let max_err = errors.iter().copied().fold(0.0, f64::max);
    let floor = (ROUNDOFF_FRACTION * max_err).max(noise_floor.max(0.0));
    let above = |b: usize| {
        errors
            .iter()
            .skip(b)
            .filter(|&&e| e > floor && e > 0.0)
            .count()
    };

    let mut burn_in = min_burn_in;
    let tail_max = errors.iter().skip(burn_in).copied().fold(0.0, f64::max);
    let (rate, ls_constant, constant, pass) = if above(burn_in) < 2
        || tail_max <= EXACT_LEVEL.max(floor)
    {
        // Exact (or round-off level) convergence past burn-in.
        let c = tail_max / scale;
        (
            0.0,
            c,
            c,
            tail_max <= EXACT_LEVEL.max(floor) || above(burn_in) < 2,
        )
    } else {
        let first = geometric_fit(&errors, burn_in, scale, floor).expect("two points in window");
        let mut chosen = None;
        if !first.pass {
            let mut b = burn_in + 1;
            while above(b) >= MIN_FIT_POINTS {
                if let Some(f) = geometric_fit(&errors, b, scale, floor).filter(|f| f.pass) {
                    chosen = Some((b, f));
                    break;
                }
                b += 1;
            }
        }
        let fit = match chosen {
            Some((b, f)) => {
                burn_in = b;
                f
            }
            None => first,
        };
        (fit.rate, fit.ls_constant, fit.constant, fit.pass)
    };
    let monotone_tail = errors
        .iter()
        .skip(burn_in)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| *w[1] <= *w[0] * (1.0 + 1e-9) || *w[1] <= floor.max(EXACT_LEVEL));
    let bound = (0..errors.len())
        .map(|n| constant * rate.powi(n as i32) * scale)
        .collect();
    let decay_rate = if rate > 0.0 {
        -rate.ln() / step
    } else {
        f64::INFINITY
    };
    ConvergenceReport {
        target,
        errors,
        bound,
        fitted_rate: rate,
        fitted_constant: constant,
        ls_constant,
        bound_scale: scale,
        burn_in,
        step,
        decay_rate,
        monotone_tail,
        noise_floor: floor,
        pass,
    }
}

fn check_dominated(f: &WeightedFunction, psi1: &WeightedFunction) -> Result<()> {
    let r = weighted_norm(f, psi1)?;
    if r > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "|f| must be bounded by psi1 (sup |f|/psi1 = {r})"
        )));
    }
    Ok(())
}

/// Sequence `μ P_n f / μ P_n ψ₁` for `n = 0..=n_max` (ratio is scale free,
/// so `μ P_n` is renormalized at every step).
fn normalized_ratios(
    kernels: &[&Array2<f64>],
    mu: &Measure,
    f: &WeightedFunction,
    psi1: &WeightedFunction,
) -> Result<Vec<f64>> {
    let mut m = mu.masses();
    let mut out = Vec::with_capacity(kernels.len() + 1);
    let mut push = |m: &Array1<f64>| -> Result<()> {
        let d = m.dot(psi1.values());
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Analysis(format!(
                "mu P_n psi1 is {d}; ratio undefined"
            )));
        }
        out.push(m.dot(f.values()) / d);
        Ok(())
    };
    push(&m)?;
    for k in kernels {
        let next = m.dot(*k);
        let s = next.dot(psi1.values());
        m = if s > 0.0 && s.is_finite() {
            next / s
        } else {
            next
        };
        push(&m)?;
    }
    Ok(out)
}

/// Errors `|μ P_n f / μ P_n ψ₁ − ν_P(f)|`, bound shape `μ(ψ₁)/μ(ψ₂)`.
pub fn measure_eq1(
    p: &TransferOperator,
    triple: &SpectralTriple,
    psi1: &WeightedFunction,
    psi2: &WeightedFunction,
    mu: &Measure,
    f: &WeightedFunction,
    n_max: usize,
) -> Result<ConvergenceReport> {
    check_dominated(f, psi1)?;
    let mu_psi2 = mu.integrate(psi2)?;
    if !(mu_psi2 > 0.0) {
        return Err(Error::InvalidArgument("mu(psi2) must be positive".into()));
    }
    let target = triple.nu_p.integrate(f)?;
    let kernels = vec![p.kernel(); n_max];
    let ratios = normalized_ratios(&kernels, mu, f, psi1)?;
    let errors: Vec<f64> = ratios.iter().map(|r| (r - target).abs()).collect();
    let scale = mu.integrate(psi1)? / mu_psi2;
    let floor = accuracy_floor(triple, errors[0].max(target.abs()), 1);
    Ok(fit_report(
        Target::Eq1,
        errors,
        default_burn_in(n_max),
        scale,
        1.0,
        floor,
    ))
}

/// Errors `|θ₀^{-n} μ P_n f − μ(η) ν_P(f)|`, bound shape `μ(ψ₁)`.
pub fn measure_eq2(
    p: &TransferOperator,
    triple: &SpectralTriple,
    psi1: &WeightedFunction,
    mu: &Measure,
    f: &WeightedFunction,
    n_max: usize,
) -> Result<ConvergenceReport> {
    check_dominated(f, psi1)?;
    let limit = mu.integrate(&triple.eta)? * triple.nu_p.integrate(f)?;
    let kernels = vec![p.kernel(); n_max];
    let errors = theta_scaled_errors(&kernels, triple.theta0, mu, f, limit)?;
    let scale = mu.integrate(psi1)?;
    let floor = accuracy_floor(triple, errors[0].max(limit.abs()), n_max);
    Ok(fit_report(
        Target::Eq2,
        errors,
        default_burn_in(n_max),
        scale,
        1.0,
        floor,
    ))
}

fn theta_scaled_errors(
    kernels: &[&Array2<f64>],
    theta: f64,
    mu: &Measure,
    f: &WeightedFunction,
    limit: f64,
) -> Result<Vec<f64>> {
    let mut m = mu.masses();
    let mut errors = vec![(m.dot(f.values()) - limit).abs()];
    for k in kernels {
        m = m.dot(*k) / theta;
        if let Some(i) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        errors.push((m.dot(f.values()) - limit).abs());
    }
    Ok(errors)
}

/// `ζ_n = sup_{|f| ≤ ψ} max_x |θ₀^{-n} P_n f(x) − η(x) ν_P(f)| / ψ(x)`.
///
/// On a finite space the supremum over `f` is attained at `f = ±ψ` per
/// column sign, so `ζ_n = max_x Σ_j |D_n(x, j)| ψ(j) / ψ(x)` with
/// `D_n = θ₀^{-n} P_n − η ⊗ ν_P`; this is computed exactly.
pub fn measure_eq3(
    p: &TransferOperator,
    triple: &SpectralTriple,
    psi: &WeightedFunction,
    n_max: usize,
) -> Result<ConvergenceReport> {
    let zeta = zeta_profile(p, triple.theta0, &triple.eta, &triple.nu_p, psi, n_max)?;
    let floor = accuracy_floor(triple, zeta[0].max(1.0), n_max);
    Ok(fit_report(
        Target::Eq3,
        zeta,
        default_burn_in(n_max),
        1.0,
        1.0,
        floor,
    ))
}

/// Raw `ζ_n` for `n = 0..=n_max`.
pub fn zeta_profile(
    p: &TransferOperator,
    theta0: f64,
    eta: &WeightedFunction,
    nu_p: &Measure,
    psi: &WeightedFunction,
    n_max: usize,
) -> Result<Vec<f64>> {
    psi.require_positive("psi")?;
    if !(theta0 > 0.0) {
        return Err(Error::NonPositive {
            what: "theta0",
            index: 0,
            value: theta0,
        });
    }
    let n = p.len();
    let nu = nu_p.masses();
    let psi_v = psi.values();
    let eta_v = eta.values();
    let zeta_of = |a: &Array2<f64>| -> f64 {
        (0..n)
            .map(|x| {
                (0..n)
                    .map(|j| (a[[x, j]] - eta_v[x] * nu[j]).abs() * psi_v[j])
                    .sum::<f64>()
                    / psi_v[x]
            })
            .fold(0.0, f64::max)
    };
    let mut a = Array2::<f64>::eye(n);
    let mut out = vec![zeta_of(&a)];
    let k = p.kernel() / theta0;
    for step in 1..=n_max {
        a = a.dot(&k);
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: step });
        }
        out.push(zeta_of(&a));
    }
    Ok(out)
}

/// Operators `P_{kΔ}` for `k = 1..=len`.
#[derive(Debug, Clone)]
pub struct SkeletonFamily {
    pub delta: f64,
    pub ops: Vec<TransferOperator>,
}

impl SkeletonFamily {
    /// Family of exact powers `P_Δ^k`, `k = 1..=len`.
    pub fn from_step(step: TransferOperator, delta: f64, len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument(
                "family needs at least one time".into(),
            ));
        }
        let mut ops = vec![step.clone()];
        for _ in 1..len {
            let next = ops.last().expect("nonempty").compose(&step)?;
            ops.push(next);
        }
        Ok(Self { delta, ops })
    }

    pub fn times(&self) -> Vec<f64> {
        (1..=self.ops.len())
            .map(|k| k as f64 * self.delta)
            .collect()
    }

    /// Largest relative deviation from `P_{(k+1)Δ} = P_{kΔ} P_Δ`; errors out
    /// past [`FAMILY_TOL`] naming the pair.
    pub fn check_consistency(&self) -> Result<f64> {
        let mut worst = 0.0_f64;
        let base = &self.ops[0];
        for k in 1..self.ops.len() {
            let prod = self.ops[k - 1].kernel().dot(base.kernel());
            let target = self.ops[k].kernel();
            let scale = target
                .iter()
                .fold(0.0_f64, |a, v| a.max(v.abs()))
                .max(f64::MIN_POSITIVE);
            let diff = (&prod - target).iter().fold(0.0_f64, |a, v| a.max(v.abs())) / scale;
            if !(diff <= FAMILY_TOL) {
                return Err(Error::InconsistentFamily {
                    s: k as f64 * self.delta,
                    t: self.delta,
                    sum: (k + 1) as f64 * self.delta,
                    residual: diff,
                });
            }
            worst = worst.max(diff);
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SkeletonOptions {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    /// Initial law for the convergence reports (uniform by default).
    pub mu: Option<Measure>,
    /// Test function (default: `ψ₁` on the first half of the states).
    pub f: Option<WeightedFunction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkeletonAnalysis {
    pub t0: f64,
    pub delta: f64,
    pub lambda0: f64,
    pub triple: SpectralTriple,
    /// `sup_{t ≤ t₀} sup_E P_t ψ₁ / ψ₁` over the grid times (and `t = 0`).
    pub c_bar: f64,
    /// `inf_{t ≤ t₀} inf_{ψ₂>0} P_t ψ₂ / ψ₂` over the grid times (and `t = 0`).
    pub c_underline: f64,
    pub consistency_residual: f64,
    pub eq1cont: ConvergenceReport,
    pub eq2cont: ConvergenceReport,
    pub pass: bool,
}

/// Continuous-time conclusions from a `t₀`-skeleton: `λ₀ = ln θ₀ / t₀`,
/// the sandwich constants, and exponential fits at the grid times.
pub fn skeleton_analysis(
    family: &SkeletonFamily,
    t0: f64,
    psi1: &WeightedFunction,
    psi2: &WeightedFunction,
    opts: &SkeletonOptions,
) -> Result<SkeletonAnalysis> {
    let delta = family.delta;
    if !(delta > 0.0 && t0 > 0.0) {
        return Err(Error::InvalidArgument(
            "t0 and the grid step must be positive".into(),
        ));
    }
    let steps = (t0 / delta).round();
    if steps < 1.0 || (steps * delta - t0).abs() > 1e-9 * t0 || steps as usize > family.ops.len() {
        return Err(Error::InvalidArgument(format!(
            "t0 = {t0} is not a grid time of the family (step {delta}, {} times)",
            family.ops.len()
        )));
    }
    let t0_idx = steps as usize - 1;
    let consistency_residual = family.check_consistency()?;

    let p_t0 = &family.ops[t0_idx];
    let triple = power_iterate(
        p_t0,
        psi1,
        opts.tol.unwrap_or(1e-12),
        opts.max_iter.unwrap_or(100_000),
    )?;
    let lambda0 = triple.theta0.ln() / t0;

    let mut c_bar = 1.0_f64;
    let mut c_underline = 1.0_f64;
    for op in &family.ops[..=t0_idx] {
        let up = op.apply(psi1)?;
        c_bar = c_bar.max(weighted_norm(&up, psi1)?);
        let down = op.apply(psi2)?;
        for i in 0..psi2.len() {
            if psi2.get(i) > 0.0 {
                c_underline = c_underline.min(down.get(i) / psi2.get(i));
            }
        }
    }

    let space = p_t0.space().clone();
    let mu = opts
        .mu
        .clone()
        .unwrap_or_else(|| Measure::uniform(space.clone()));
    let f = match &opts.f {
        Some(f) => f.clone(),
        None => {
            let half = space.len().div_ceil(2);
            WeightedFunction::new(
                space.clone(),
                (0..space.len())
                    .map(|i| if i < half { psi1.get(i) } else { 0.0 })
                    .collect::<Vec<_>>(),
            )?
        }
    };
    check_dominated(&f, psi1)?;

    // Index n of the reports corresponds to time n·Δ.
    let kernels: Vec<&Array2<f64>> = family.ops.iter().map(|o| o.kernel()).collect();
    let burn_in = default_burn_in(kernels.len());
    let target = triple.nu_p.integrate(&f)?;
    let ratios = ratios_at_times(&kernels, &mu, &f, psi1)?;
    let e1: Vec<f64> = ratios.iter().map(|r| (r - target).abs()).collect();
    let mu_psi2 = mu.integrate(psi2)?;
    let scale1 = if mu_psi2 > 0.0 {
        mu.integrate(psi1)? / mu_psi2
    } else {
        f64::INFINITY
    };
    let floor1 = accuracy_floor(&triple, e1[0].max(target.abs()), 1);
    let eq1cont = fit_report(Target::Eq1Cont, e1, burn_in, scale1, delta, floor1);

    let limit = mu.integrate(&triple.eta)? * target;
    let m0 = mu.masses();
    let mut e2 = vec![(m0.dot(f.values()) - limit).abs()];
    for (k, kern) in kernels.iter().enumerate() {
        let t = (k + 1) as f64 * delta;
        let v = m0.dot(*kern).dot(f.values()) * (-lambda0 * t).exp();
        e2.push((v - limit).abs());
    }
    let floor2 = accuracy_floor(&triple, e2[0].max(limit.abs()), kernels.len());
    let eq2cont = fit_report(
        Target::Eq2Cont,
        e2,
        burn_in,
        mu.integrate(psi1)?,
        delta,
        floor2,
    );

    let pass = c_bar.is_finite()
        && c_underline > 0.0
        && eq1cont.decay_rate > 0.0
        && eq2cont.decay_rate > 0.0
        && eq1cont.pass
        && eq2cont.pass;
    Ok(SkeletonAnalysis {
        t0,
        delta,
        lambda0,
        triple,
        c_bar,
        c_underline,
        consistency_residual,
        eq1cont,
        eq2cont,
        pass,
    })
}

fn ratios_at_times(
    kernels: &[&Array2<f64>],
    mu: &Measure,
    f: &WeightedFunction,
    psi1: &WeightedFunction,
) -> Result<Vec<f64>> {
    let m0 = mu.masses();
    let mut out = vec![m0.dot(f.values()) / m0.dot(psi1.values())];
    for k in kernels {
        let m = m0.dot(*k);
        let d = m.dot(psi1.values());
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::Analysis(format!(
                "mu P_t psi1 is {d}; ratio undefined"
            )));
        }
        out.push(m.dot(f.values()) / d);
    }
    Ok(out)
}
