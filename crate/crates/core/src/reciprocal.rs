//! Condition (G) from a measured convergence profile.
//!
//! Given an eigenpair `(θ₀, η)` and the residuals `ζ_n` of
//! `θ₀^{-n} P_n → η ⊗ ν_P` in `L∞(ψ)`, the construction goes through the
//! h-transform `R`:
//!
//! 1. `V₀ = Σ_{k<m} λ^{-k} R_k(ψ/η)` on `E' = {η > 0}`;
//! 2. a sublevel set `K = {ψ/η ≤ d}` outside of which `R V₀ ≤ ρ V₀`;
//! 3. `ψ₁ = Σ_{k<m} (λθ₀)^{-k} P_k ψ` on the whole space;
//! 4. a minorizing measure from `ν_R R_{n″}` restricted to `K`;
//! 5. Condition (G) checked with `(ψ₁, ψ₂ = η)`.

use ndarray::Array1;
use serde::Serialize;

use crate::condition_g::{self, GOptions, GReport};
use crate::error::{Error, Result};
use crate::semigroup::{weighted_norm, Measure, SubsetMask, TransferOperator, WeightedFunction};
use crate::spectral::{zeta_profile, SpectralTriple};
use crate::transforms::{h_transform, HTransformRecord};

#[derive(Debug, Clone)]
pub struct ReciprocalInput {
    pub p: TransferOperator,
    pub psi: WeightedFunction,
    pub eta: WeightedFunction,
    pub theta0: f64,
    pub nu_p: Measure,
    /// `ζ_n` for `n = 0, 1, …`.
    pub zeta: Vec<f64>,
}

impl ReciprocalInput {
    /// Measures `ζ_n` up to `n_max` for a computed triple.
    pub fn from_triple(
        p: &TransferOperator,
        psi: &WeightedFunction,
        triple: &SpectralTriple,
        n_max: usize,
    ) -> Result<Self> {
        let zeta = zeta_profile(p, triple.theta0, &triple.eta, &triple.nu_p, psi, n_max)?;
        Ok(Self {
            p: p.clone(),
            psi: psi.clone(),
            eta: triple.eta.clone(),
            theta0: triple.theta0,
            nu_p: triple.nu_p.clone(),
            zeta,
        })
    }

    /// `‖P η − θ₀ η‖_ψ / (θ₀ ‖η‖_ψ)`.
    pub fn eigen_residual(&self) -> Result<f64> {
        let pe = self.p.apply(&self.eta)?;
        let diff = pe.sub(&self.eta.scale(self.theta0))?;
        Ok(weighted_norm(&diff, &self.psi)? / (self.theta0 * weighted_norm(&self.eta, &self.psi)?))
    }

    pub fn h_transform(&self) -> Result<HTransformRecord> {
        h_transform(&self.p, &self.eta, self.theta0, Some(&self.psi))
    }

    /// `ψ/η` on `E'`.
    pub fn level_function(&self, h: &HTransformRecord) -> Result<WeightedFunction> {
        h.restrict(&div_where_positive(&self.psi, &self.eta)?)
    }
}

/// `a / b` where `b > 0`, 0 elsewhere.
fn div_where_positive(a: &WeightedFunction, b: &WeightedFunction) -> Result<WeightedFunction> {
    let vals: Vec<f64> = (0..a.len())
        .map(|i| {
            if b.get(i) > 0.0 {
                a.get(i) / b.get(i)
            } else {
                0.0
            }
        })
        .collect();
    WeightedFunction::new(a.space().clone(), vals)
}

fn check_unit_interval(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{what} must lie in (0, 1), got {x}"
        )))
    }
}

/// `V₀ = Σ_{k=0}^{m-1} λ^{-k} R_k(ψ/η)` on `E'`.
pub fn build_v0(input: &ReciprocalInput, m: usize, lambda: f64) -> Result<WeightedFunction> {
    check_unit_interval(lambda, "lambda")?;
    if m < 1 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let h = input.h_transform()?;
    let g = input.level_function(&h)?;
    v0_series(&h.transformed, &g, m, lambda)
}

fn v0_series(
    r: &TransferOperator,
    g: &WeightedFunction,
    m: usize,
    lambda: f64,
) -> Result<WeightedFunction> {
    let mut term = g.values().clone();
    let mut sum = term.clone();
    for k in 1..m {
        term = r.kernel().dot(&term);
        sum = sum + &term * lambda.powi(-(k as i32));
    }
    WeightedFunction::new(g.space().clone(), sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct DriftResult {
    /// Subset of the space of `V₀`.
    pub k: SubsetMask,
    pub d: f64,
    pub c_r: f64,
    /// `R V₀`.
    pub r_v0: WeightedFunction,
    /// Smallest `n″ ≥ 1` with `ν_R R_{n″} 1_K > 0`.
    pub n_access: Option<usize>,
    /// `ν_R R_{n″} 1_K`.
    pub access_mass: f64,
    pub pass: bool,
    pub diagnostics: Vec<String>,
}

/// Smallest level `d` among the values of `level` such that `R V₀ ≤ ρ V₀`
/// off `K = {level ≤ d}`; `C_R = max_K (R V₀ − ρ V₀)₊`.
///
/// With `require_proper`, a `K` that has to be the whole space fails.
pub fn find_drift(
    v0: &WeightedFunction,
    r: &TransferOperator,
    rho: f64,
    level: &WeightedFunction,
    nu_r: &Measure,
    n_max: usize,
    require_proper: bool,
) -> Result<DriftResult> {
    check_unit_interval(rho, "rho")?;
    let r_v0 = r.apply(v0)?;
    let n = v0.len();
    let excess: Vec<f64> = (0..n).map(|i| r_v0.get(i) - rho * v0.get(i)).collect();
    let d = (0..n)
        .filter(|&i| excess[i] > 0.0)
        .map(|i| level.get(i))
        .fold(f64::NEG_INFINITY, f64::max);
    let d = if d.is_finite() {
        d
    } else {
        level.values().iter().copied().fold(f64::INFINITY, f64::min)
    };
    let k = SubsetMask::from_fn(v0.space().clone(), |i, _| level.get(i) <= d);
    let c_r = k
        .indices()
        .into_iter()
        .map(|i| excess[i])
        .fold(0.0, f64::max);

    let mut diagnostics = Vec::new();
    let ind = WeightedFunction::indicator(&k);
    let mut mass = nu_r.masses();
    let mut n_access = None;
    let mut access_mass = 0.0;
    for step in 1..=n_max.max(1) {
        mass = mass.dot(r.kernel());
        let a = mass.dot(ind.values());
        if a > 0.0 {
            n_access = Some(step);
            access_mass = a;
            break;
        }
    }
    if n_access.is_none() {
        diagnostics.push(format!("K not reached from nu_R within {n_max} steps"));
    }
    let proper_ok = !(require_proper && k.is_full());
    if !proper_ok {
        diagnostics.push(format!(
            "no level d leaves R V0 <= {rho} V0 on a nonempty complement; K is the whole space"
        ));
    }
    Ok(DriftResult {
        pass: !k.is_empty() && n_access.is_some() && proper_ok,
        k,
        d,
        c_r,
        r_v0,
        n_access,
        access_mass,
        diagnostics,
    })
}

/// Smallest `m` in the doubling sequence from `m0` (up to `m_max`) with
/// `ζ_m^{1/m} ≤ λ`.
pub fn admissible_m(zeta: &[f64], m0: usize, lambda: f64, m_max: usize) -> Option<usize> {
    let mut m = m0.max(1);
    while m <= m_max {
        if let Some(&z) = zeta.get(m) {
            if z.powf(1.0 / m as f64) <= lambda {
                return Some(m);
            }
        }
        m *= 2;
    }
    None
}

#[derive(Debug, Clone)]
pub struct Psi1Extension {
    pub psi1: WeightedFunction,
    pub m: usize,
}

/// `ψ₁ = Σ_{k=0}^{m-1} (λθ₀)^{-k} P_k ψ` on the whole space, with `m`
/// doubled until `ζ_m^{1/m} ≤ λ` (at most `m_max`).
pub fn extend_psi1(
    input: &ReciprocalInput,
    m: usize,
    lambda: f64,
    m_max: usize,
) -> Result<Psi1Extension> {
    check_unit_interval(lambda, "lambda")?;
    let m = admissible_m(&input.zeta, m, lambda, m_max).ok_or_else(|| {
        Error::Analysis(format!(
            "zeta_m^(1/m) <= {lambda} not reached for m <= {m_max} ({} residuals measured)",
            input.zeta.len()
        ))
    })?;
    let c = lambda * input.theta0;
    let mut term = input.psi.values().clone();
    let mut sum = term.clone();
    for k in 1..m {
        term = input.p.kernel().dot(&term) / c;
        if term.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: k });
        }
        sum += &term;
    }
    Ok(Psi1Extension {
        psi1: WeightedFunction::new(input.p.space().clone(), sum)?,
        m,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct CertifyOptions {
    pub m: usize,
    pub lambda: f64,
    pub rho: f64,
    pub m_max: usize,
    /// Largest accepted relative eigen-residual of the input pair.
    pub eigen_tol: f64,
    pub g3_horizon: usize,
    pub g4_horizon: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            m: 8,
            lambda: 0.9,
            rho: 0.95,
            m_max: 128,
            eigen_tol: 1e-6,
            g3_horizon: 100,
            g4_horizon: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ReciprocalCertificate {
    pub m: usize,
    pub lambda: f64,
    pub rho: f64,
    pub d: f64,
    /// `V₀` on `E'`; `support` lists the base index of each entry.
    pub v0: WeightedFunction,
    pub r_v0: WeightedFunction,
    pub support: Vec<usize>,
    pub psi1: WeightedFunction,
    /// Small set, on the base space.
    pub k: SubsetMask,
    /// Minorizing probability measure built from `ν_R R_{n″}` on `K`.
    pub nu: Measure,
    /// `ν_R R_{n″} 1_K`.
    pub a: f64,
    pub n_access: usize,
    pub c2: f64,
    pub c_r: f64,
    pub zeta: Vec<f64>,
    pub eigen_residual: f64,
    pub g_report: GReport,
    pub pass: bool,
}

impl ReciprocalCertificate {
    /// `R V₀ ≤ ρ V₀ + C_R 1_K` at every point of `E'`, evaluated as
    /// `R V₀ − ρ V₀ ≤ C_R 1_K`.
    pub fn lyapunov_holds(&self) -> bool {
        let in_k: Vec<bool> = self.support.iter().map(|&i| self.k.contains(i)).collect();
        (0..self.v0.len()).all(|a| {
            let bound = if in_k[a] { self.c_r } else { 0.0 };
            self.r_v0.get(a) - self.rho * self.v0.get(a) <= bound
        })
    }
}

/// Runs the full construction, backing off `(m, λ, ρ)` geometrically
/// (`m × 2`, `λ, ρ` halfway to 1) until Condition (G) verifies or
/// `m > m_max`.
pub fn certify(input: &ReciprocalInput, opts: CertifyOptions) -> Result<ReciprocalCertificate> {
    let residual = input.eigen_residual().map_err(Error::stage("validate"))?;
    if !(residual <= opts.eigen_tol) {
        return Err(Error::Stage {
            stage: "validate",
            source: Box::new(Error::Analysis(format!(
                "eta is not an eigenfunction: relative residual {residual:.3e} exceeds {:.1e}",
                opts.eigen_tol
            ))),
        });
    }
    let h = input.h_transform().map_err(Error::stage("h_transform"))?;
    let r = &h.transformed;
    let level = input
        .level_function(&h)
        .map_err(Error::stage("h_transform"))?;
    let nu_r = {
        let nu = input.nu_p.masses();
        let masses: Array1<f64> = h
            .support_index
            .iter()
            .map(|&i| nu[i] * input.eta.get(i))
            .collect();
        let total = masses.sum();
        if !(total > 0.0) {
            return Err(Error::Stage {
                stage: "h_transform",
                source: Box::new(Error::Analysis("nu_P(eta) vanishes on the support".into())),
            });
        }
        Measure::from_masses(h.support_space().clone(), masses / total)
            .map_err(Error::stage("h_transform"))?
    };
    let n_states = input.p.len();

    let (mut m, mut lambda, mut rho) = (opts.m, opts.lambda, opts.rho);
    let mut last_err: Option<Error> = None;
    let mut last_cert: Option<ReciprocalCertificate> = None;
    while m <= opts.m_max {
        let attempt = (|| -> Result<ReciprocalCertificate> {
            if admissible_m(&input.zeta, m, lambda, m).is_none() {
                return Err(Error::Stage {
                    stage: "extend_psi1",
                    source: Box::new(Error::Analysis(format!(
                        "zeta_{m}^(1/{m}) exceeds lambda = {lambda}"
                    ))),
                });
            }
            let v0 = v0_series(r, &level, m, lambda).map_err(Error::stage("build_v0"))?;
            let drift = find_drift(&v0, r, rho, &level, &nu_r, n_states, false)
                .map_err(Error::stage("find_drift"))?;
            if !drift.pass {
                return Err(Error::Stage {
                    stage: "find_drift",
                    source: Box::new(Error::Analysis(drift.diagnostics.join("; "))),
                });
            }
            let ext = extend_psi1(input, m, lambda, m).map_err(Error::stage("extend_psi1"))?;
            let k_base = SubsetMask::from_fn(input.p.space().clone(), |i, _| {
                h.support_index
                    .iter()
                    .position(|&s| s == i)
                    .is_some_and(|a| drift.k.contains(a))
            });
            let n_access = drift.n_access.expect("pass implies access");
            let nu = minorizing_measure(input, &h, r, &nu_r, &drift.k, n_access)
                .map_err(Error::stage("minorize"))?;

            let g1 = condition_g::search_g1(&input.p, &k_base, &ext.psi1, n_states)
                .map_err(Error::stage("verify"))?;
            let g2 = condition_g::check_g2(&input.p, &k_base, &ext.psi1, &input.eta)
                .map_err(Error::stage("verify"))?;
            let gopts = GOptions {
                n1: g1.n1,
                g3_horizon: opts.g3_horizon,
                g4_horizon: opts.g4_horizon,
            };
            let g3 = condition_g::check_g3(&input.p, &k_base, &ext.psi1, gopts.g3_horizon)
                .map_err(Error::stage("verify"))?;
            let g4 = condition_g::check_g4(&input.p, &k_base, &ext.psi1, gopts.g4_horizon)
                .map_err(Error::stage("verify"))?;
            let c2 = g2.c2;
            let g_report = GReport::assemble(g1, g2, g3, g4);
            Ok(ReciprocalCertificate {
                m: ext.m,
                lambda,
                rho,
                d: drift.d,
                v0,
                r_v0: drift.r_v0,
                support: h.support_index.clone(),
                psi1: ext.psi1,
                k: k_base,
                nu: nu.0,
                a: nu.1,
                n_access,
                c2,
                c_r: drift.c_r,
                zeta: input.zeta.clone(),
                eigen_residual: residual,
                pass: g_report.overall,
                g_report,
            })
        })();
        match attempt {
            Ok(cert) if cert.pass => return Ok(cert),
            Ok(cert) => last_cert = Some(cert),
            Err(e) => last_err = Some(e),
        }
        m *= 2;
        lambda = 0.5 * (lambda + 1.0);
        rho = 0.5 * (rho + 1.0);
    }
    match (last_cert, last_err) {
        (Some(cert), _) => Ok(cert),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::InvalidArgument(format!(
            "initial m = {} exceeds m_max = {}",
            opts.m, opts.m_max
        ))),
    }
}

/// Probability measure proportional to `1_K (ψ/η) · ν_R R_{n″}`, carried
/// back to the base space; also returns `a = ν_R R_{n″} 1_K`.
fn minorizing_measure(
    input: &ReciprocalInput,
    h: &HTransformRecord,
    r: &TransferOperator,
    nu_r: &Measure,
    k: &SubsetMask,
    n_access: usize,
) -> Result<(Measure, f64)> {
    let mut mass = nu_r.masses();
    for _ in 0..n_access {
        mass = mass.dot(r.kernel());
    }
    let a: f64 = k.indices().into_iter().map(|i| mass[i]).sum();
    let mut out = Array1::zeros(input.p.len());
    for (idx, &i) in h.support_index.iter().enumerate() {
        if k.contains(idx) {
            out[i] = mass[idx] * input.psi.get(i) / input.eta.get(i) / a;
        }
    }
    let total = out.sum();
    if !(total > 0.0) {
        return Err(Error::Analysis("minorizing measure vanishes on K".into()));
    }
    Measure::from_masses(input.p.space().clone(), out / total).map(|m| (m, a))
}
