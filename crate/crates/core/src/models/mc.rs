//! Feynman–Kac Monte Carlo estimators.
//!
//! Trajectory `i` draws from its own ChaCha8 stream (`seed`, stream `i`),
//! and per-trajectory results are reduced by a fixed pairwise tree, so the
//! estimate does not depend on how trajectories are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::diffusion::DiffusionModel;
use super::pds::PdsModel;
use crate::error::{Error, Result};
use crate::semigroup::Measure;

pub const MIN_TRAJECTORIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_traj: usize,
    pub n_killed: usize,
    pub seed: u64,
    /// Euler step for diffusions.
    pub step: Option<f64>,
    /// Every trajectory was killed; the estimate is 0 with no spread.
    pub all_killed: bool,
}

pub fn trajectory_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Sum by recursive halving.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn summarize(samples: &[f64], killed: usize, seed: u64, step: Option<f64>) -> McEstimate {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    let dev: Vec<f64> = samples.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n as f64 - 1.0);
    McEstimate {
        value: mean,
        std_error: (var / n as f64).sqrt(),
        n_traj: n,
        n_killed: killed,
        seed,
        step,
        all_killed: killed == n,
    }
}

/// Runs `job(i)` for every trajectory index, in parallel, returning results
/// in index order.
fn run_indexed<T: Send>(n: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism()
        .map_or(1, |t| t.get())
        .min(n.max(1));
    let chunk = n.div_ceil(threads);
    let job = &job;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    (t * chunk..((t + 1) * chunk).min(n))
                        .map(job)
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("trajectory worker panicked"))
            .collect()
    })
}

fn check_traj(n_traj: usize) -> Result<()> {
    if n_traj < MIN_TRAJECTORIES {
        return Err(Error::InvalidArgument(format!(
            "at least {MIN_TRAJECTORIES} trajectories are required, got {n_traj}"
        )));
    }
    Ok(())
}

/// `E_x[Π_{k≤n} G(X_k) 1_E(X_k) f(X_n)]` with exact Gaussian steps.
pub fn mc_pds(
    model: &PdsModel,
    x0: &[f64],
    n_steps: usize,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_traj: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_traj(n_traj)?;
    model.validate()?;
    if x0.len() != model.dim {
        return Err(Error::Length {
            expected: model.dim,
            got: x0.len(),
        });
    }
    let results = run_indexed(n_traj, |i| {
        let mut rng = trajectory_rng(seed, i);
        let mut x = x0.to_vec();
        let mut w = 1.0;
        for _ in 0..n_steps {
            let mut y = model.step_map(&x);
            for v in &mut y {
                let z: f64 = rng.sample(StandardNormal);
                *v += model.noise_sd * z;
            }
            if !model.in_e(&y) {
                return (0.0, true);
            }
            w *= model.penalty(&y);
            x = y;
        }
        (w * f(&x), false)
    });
    let samples: Vec<f64> = results.iter().map(|r| r.0).collect();
    let killed = results.iter().filter(|r| r.1).count();
    Ok(summarize(&samples, killed, seed, None))
}

/// Treatment of exits between Euler steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryRule {
    /// Kill only when a step endpoint leaves the box.
    Endpoint,
    /// Also weight each step by the probability that the Brownian bridge
    /// between the endpoints stays inside (per face).
    Bridge,
}

/// Initial law of diffusion trajectories.
#[derive(Debug, Clone)]
pub enum Start {
    Point(Vec<f64>),
    /// Pick a grid node with the given masses, then jitter uniformly over its cell.
    Cells {
        points: Vec<Vec<f64>>,
        cumulative: Vec<f64>,
        h: f64,
    },
}

impl Start {
    pub fn from_measure(mu: &Measure, h: f64) -> Result<Self> {
        let masses = mu.masses();
        let total = masses.sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument("initial measure has no mass".into()));
        }
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m / total;
                acc
            })
            .collect();
        Ok(Start::Cells {
            points: mu.space().points().to_vec(),
            cumulative,
            h,
        })
    }

    fn sample(&self, rng: &mut ChaCha8Rng, l: f64) -> Vec<f64> {
        match self {
            Start::Point(x) => x.clone(),
            Start::Cells {
                points,
                cumulative,
                h,
            } => {
                let u: f64 = rng.gen();
                let k = cumulative.partition_point(|&c| c < u).min(points.len() - 1);
                points[k]
                    .iter()
                    .map(|&c| {
                        let j: f64 = rng.gen::<f64>() - 0.5;
                        (c + j * h).clamp(f64::MIN_POSITIVE, l * (1.0 - f64::EPSILON))
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EulerSettings {
    pub dt: f64,
    pub rule: BoundaryRule,
}

impl Default for EulerSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            rule: BoundaryRule::Bridge,
        }
    }
}

/// Probability that a Brownian bridge over a step of length `dt` from `u`
/// to `v` (distances to a face, both positive) does not touch the face.
fn bridge_survival(u: f64, v: f64, dt: f64) -> f64 {
    let e = 2.0 * u * v / dt;
    if e > 40.0 {
        1.0
    } else {
        1.0 - (-e).exp()
    }
}

/// Weights `e^{∫ r} 1_{no exit}` of one trajectory at each record step.
fn diffusion_path(
    model: &DiffusionModel,
    start: &Start,
    record: &[usize],
    settings: EulerSettings,
    rng: &mut ChaCha8Rng,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Vec<f64> {
    let l = model.grid_l;
    let d = model.dim;
    let dt = settings.dt;
    let sq = dt.sqrt();
    let bridge = settings.rule == BoundaryRule::Bridge;
    let mut x = [0.0_f64; 2];
    x[..d].copy_from_slice(&start.sample(rng, l));
    let mut y = [0.0_f64; 2];
    let mut w = 1.0_f64;
    let mut log_w = 0.0_f64;
    let mut out = vec![0.0; record.len()];
    let mut next = 0;
    let last = *record.last().unwrap_or(&0);
    for step in 1..=last {
        log_w += model.r.eval(super::catalog::norm(&x[..d])) * dt;
        for c in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            y[c] = x[c] + model.b.eval(x[c]) * dt + sq * z;
            if y[c] <= 0.0 || y[c] >= l {
                return out;
            }
            if bridge {
                w *= bridge_survival(x[c], y[c], dt) * bridge_survival(l - x[c], l - y[c], dt);
            }
        }
        x = y;
        while next < record.len() && record[next] == step {
            out[next] = w * log_w.exp() * f(&x[..d]);
            next += 1;
        }
    }
    out
}

fn record_steps(times: &[f64], dt: f64) -> Result<Vec<usize>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Euler step must be positive, got {dt}"
        )));
    }
    let steps: Vec<usize> = times.iter().map(|t| (t / dt).round() as usize).collect();
    if times.iter().any(|&t| !(t > 0.0)) || steps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument(
            "record times must be positive and increasing".into(),
        ));
    }
    Ok(steps)
}

/// Per-trajectory weighted values at each record time.
fn diffusion_samples(
    model: &DiffusionModel,
    start: &Start,
    times: &[f64],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_traj: usize,
    seed: u64,
    settings: EulerSettings,
) -> Result<Vec<Vec<f64>>> {
    check_traj(n_traj)?;
    model.validate()?;
    let record = record_steps(times, settings.dt)?;
    Ok(run_indexed(n_traj, |i| {
        let mut rng = trajectory_rng(seed, i);
        diffusion_path(model, start, &record, settings, &mut rng, f)
    }))
}

/// `E[e^{∫₀ᵗ r(X)} f(X_t) 1_{no exit}]` at each of `times` by Euler–Maruyama.
pub fn mc_diffusion(
    model: &DiffusionModel,
    start: &Start,
    times: &[f64],
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_traj: usize,
    seed: u64,
    settings: EulerSettings,
) -> Result<Vec<McEstimate>> {
    let samples = diffusion_samples(model, start, times, f, n_traj, seed, settings)?;
    Ok((0..times.len())
        .map(|k| {
            let col: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let killed = col.iter().filter(|&&v| v == 0.0).count();
            summarize(&col, killed, seed, Some(settings.dt))
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEstimate {
    pub times: Vec<f64>,
    pub log_mass: Vec<f64>,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub batch_slopes: Vec<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
}

impl SlopeEstimate {
    pub fn contains(&self, v: f64) -> bool {
        self.ci_low <= v && v <= self.ci_high
    }
}

fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of `t ↦ ln E[surviving weight at t]`, with a 95%
/// Student-t interval from `batches` contiguous batches of trajectories.
#[allow(clippy::too_many_arguments)]
pub fn mc_log_mass_slope(
    model: &DiffusionModel,
    start: &Start,
    times: &[f64],
    n_traj: usize,
    seed: u64,
    settings: EulerSettings,
    batches: usize,
) -> Result<SlopeEstimate> {
    if times.len() < 2 || batches < 2 || n_traj / batches < 2 {
        return Err(Error::InvalidArgument(
            "slope needs two times, two batches and enough trajectories per batch".into(),
        ));
    }
    let one = |_: &[f64]| 1.0;
    let samples = diffusion_samples(model, start, times, &one, n_traj, seed, settings)?;
    let log_mass_of = |rows: &[Vec<f64>]| -> Result<Vec<f64>> {
        (0..times.len())
            .map(|k| {
                let col: Vec<f64> = rows.iter().map(|s| s[k]).collect();
                let m = pairwise_sum(&col) / col.len() as f64;
                if m > 0.0 {
                    Ok(m.ln())
                } else {
                    Err(Error::Analysis(format!(
                        "all trajectories killed by t = {}",
                        times[k]
                    )))
                }
            })
            .collect()
    };
    let log_mass = log_mass_of(&samples)?;
    let slope = ls_slope(times, &log_mass);
    let size = n_traj / batches;
    let batch_slopes: Vec<f64> = (0..batches)
        .map(|b| {
            let end = if b + 1 == batches {
                n_traj
            } else {
                (b + 1) * size
            };
            log_mass_of(&samples[b * size..end]).map(|lm| ls_slope(times, &lm))
        })
        .collect::<Result<_>>()?;
    let bm = batch_slopes.iter().sum::<f64>() / batches as f64;
    let var = batch_slopes.iter().map(|s| (s - bm).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, batches as f64 - 1.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let half = t.inverse_cdf(0.975) * (var / batches as f64).sqrt();
    Ok(SlopeEstimate {
        times: times.to_vec(),
        log_mass,
        slope,
        ci_low: slope - half,
        ci_high: slope + half,
        batch_slopes,
        n_traj,
        seed,
        dt: settings.dt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::catalog::FnSpec;

    #[test]
    fn conservative_walk_is_exact() {
        let m = PdsModel::default();
        let e = mc_pds(&m, &[0.5], 5, &|_| 1.0, 1000, 7).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n_killed, 0);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = PdsModel::default();
        let f = |x: &[f64]| x[0].abs();
        let a = mc_pds(&m, &[1.0], 3, &f, 500, 42).unwrap();
        let b = mc_pds(&m, &[1.0], 3, &f, 500, 42).unwrap();
        assert_eq!(a, b);
        let c = mc_pds(&m, &[1.0], 3, &f, 500, 43).unwrap();
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn killing_flags() {
        let m = PdsModel {
            e_lo: 50.0,
            e_hi: 60.0,
            grid_l: 100.0,
            ..PdsModel::default()
        };
        let e = mc_pds(&m, &[0.0], 1, &|_| 1.0, 200, 1).unwrap();
        assert!(e.all_killed);
        assert_eq!((e.value, e.std_error, e.n_killed), (0.0, 0.0, 200));
        assert!(mc_pds(&m, &[0.0], 1, &|_| 1.0, 10, 1).is_err());
    }

    #[test]
    fn pairwise_matches_plain_sum_on_integers() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn diffusion_survival_decreases() {
        let m = DiffusionModel {
            b: FnSpec::Const(0.0),
            grid_l: 4.0,
            ..DiffusionModel::default()
        };
        let est = mc_diffusion(
            &m,
            &Start::Point(vec![2.0]),
            &[0.5, 1.0],
            &|_| 1.0,
            2000,
            3,
            EulerSettings {
                dt: 1e-2,
                rule: BoundaryRule::Bridge,
            },
        )
        .unwrap();
        assert!(est[0].value > est[1].value);
        assert!(est[1].value > 0.5);
    }

    #[test]
    fn bridge_factor() {
        assert_eq!(bridge_survival(10.0, 10.0, 1e-3), 1.0);
        let s = bridge_survival(0.01, 0.01, 1e-3);
        assert!((s - (1.0 - (-0.2_f64).exp())).abs() < 1e-15);
    }
}
