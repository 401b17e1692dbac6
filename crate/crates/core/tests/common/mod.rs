//! Shared test support: a dense eigendecomposition oracle and seeded
//! generators for random kernels and Condition (G) corpora.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpos::condition_g::{self, GOptions, GReport};
use rpos::{StateSpace, StepLabel, SubsetMask, TransferOperator, WeightedFunction};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn op_from_rows(rows: &[Vec<f64>]) -> TransferOperator {
    let space = StateSpace::counting(rows.len()).unwrap();
    TransferOperator::from_rows(space, rows, StepLabel::Steps(1)).unwrap()
}

pub fn func(p: &TransferOperator, v: &[f64]) -> WeightedFunction {
    WeightedFunction::new(p.space().clone(), v.to_vec()).unwrap()
}

pub fn ones(p: &TransferOperator) -> WeightedFunction {
    WeightedFunction::constant(p.space().clone(), 1.0)
}

/// Perron data from a dense eigendecomposition, normalized like the solver:
/// `ν(ψ₁) = 1`, `ν(η) = 1`.
#[derive(Debug, Clone)]
pub struct Oracle {
    pub lambda: f64,
    /// `|λ₂| / λ₁`.
    pub gap_ratio: f64,
    pub eta: Vec<f64>,
    pub nu: Vec<f64>,
}

fn null_vector(a: &DMatrix<f64>) -> DVector<f64> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v = v_t.row(k).transpose();
    // Perron vectors are one-signed.
    if v.sum() < 0.0 {
        -v
    } else {
        v
    }
}

/// Dense oracle for the kernel matrix of `p` (entries include reference
/// weights, so left vectors are masses).
pub fn oracle(p: &TransferOperator, psi1: &[f64]) -> Oracle {
    let n = p.len();
    let k = DMatrix::from_fn(n, n, |i, j| p.get(i, j));
    let mut ev: Vec<f64> = k.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    let lambda = k
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.im.abs() < 1e-9 * ev[0].max(1e-300))
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap_ratio = if n > 1 { ev[1] / ev[0] } else { 0.0 };
    let eye = DMatrix::<f64>::identity(n, n);
    let right = null_vector(&(&k - &eye * lambda));
    let left = null_vector(&(k.transpose() - &eye * lambda));
    let nu_psi: f64 = left.iter().zip(psi1).map(|(a, b)| a * b).sum();
    let nu: Vec<f64> = left.iter().map(|v| v / nu_psi).collect();
    let nu_eta: f64 = nu.iter().zip(right.iter()).map(|(a, b)| a * b).sum();
    let eta: Vec<f64> = right.iter().map(|v| v / nu_eta).collect();
    Oracle {
        lambda,
        gap_ratio,
        eta,
        nu,
    }
}

/// `sup |a − b| / ψ`.
pub fn psi_dist(a: &[f64], b: &[f64], psi: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(psi)
        .map(|((x, y), w)| (x - y).abs() / w)
        .fold(0.0, f64::max)
}

/// Entrywise positive kernel with random row scales and a positive weight.
pub fn random_positive(rng: &mut ChaCha8Rng, n: usize) -> (TransferOperator, WeightedFunction) {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let s = rng.gen_range(0.2..2.0);
            (0..n).map(|_| s * rng.gen_range(0.01..1.0)).collect()
        })
        .collect();
    let p = op_from_rows(&rows);
    let psi: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0_f64..1.5).exp()).collect();
    let psi1 = func(&p, &psi);
    (p, psi1)
}

/// Random positive kernel with `|λ₂|/λ₁ ≤ max_gap`, by rejection.
pub fn random_gapped(
    rng: &mut ChaCha8Rng,
    n: usize,
    max_gap: f64,
) -> (TransferOperator, WeightedFunction, Oracle) {
    loop {
        let (p, psi1) = random_positive(rng, n);
        let o = oracle(&p, psi1.values().as_slice().unwrap());
        if o.gap_ratio <= max_gap {
            return (p, psi1, o);
        }
    }
}

/// Nonnegative kernel whose sparsity pattern is banded, block-reducible or
/// dense, so that Condition (G) items can fail as well as pass.
pub fn random_structured(rng: &mut ChaCha8Rng, n: usize) -> TransferOperator {
    let kind = rng.gen_range(0..4);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let on = match kind {
                        0 => true,
                        1 => i.abs_diff(j) <= 1,
                        2 => i.abs_diff(j) <= 2 && (i + j) % 2 == 1,
                        _ => (i < n / 2) == (j < n / 2),
                    };
                    if on {
                        rng.gen_range(0.05..1.0)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    op_from_rows(&rows)
}

/// One Condition (G) instance: operator, weights and small set.
#[derive(Debug, Clone)]
pub struct GInstance {
    pub p: TransferOperator,
    pub psi1: WeightedFunction,
    pub psi2: WeightedFunction,
    pub k: SubsetMask,
}

impl GInstance {
    pub fn verify(&self, opts: GOptions) -> GReport {
        condition_g::verify(&self.p, &self.k, &self.psi1, &self.psi2, opts).unwrap()
    }
}

/// Instances on which (G2) passes: `ψ₁` an increasing weight, `ψ₂ = 1`,
/// `K` the full space or a random initial segment.
pub fn g2_corpus(seed: u64, size: usize) -> Vec<GInstance> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < size {
        let n = r.gen_range(4..12);
        let p = random_structured(&mut r, n);
        let psi1 = WeightedFunction::from_fn(p.space().clone(), |x| (0.2 * x[0]).exp());
        let psi2 = ones(&p);
        let k = if r.gen_bool(0.5) {
            SubsetMask::full(p.space().clone())
        } else {
            let m = r.gen_range(1..=n);
            SubsetMask::from_fn(p.space().clone(), |i, _| i < m)
        };
        let g2 = condition_g::check_g2(&p, &k, &psi1, &psi2).unwrap();
        if g2.pass {
            out.push(GInstance { p, psi1, psi2, k });
        }
    }
    out
}

/// Random positive kernels (all of which satisfy Condition (G) with
/// `K = E`), with spectral gap ratio at most `max_gap`.
pub fn positive_corpus(
    seed: u64,
    size: usize,
    max_gap: f64,
) -> Vec<(TransferOperator, WeightedFunction)> {
    let mut r = rng(seed);
    (0..size)
        .map(|_| {
            let n = r.gen_range(3..10);
            let (p, psi1, _) = random_gapped(&mut r, n, max_gap);
            (p, psi1)
        })
        .collect()
}
