//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no libtest harness) so every criterion is
//! reported even when an earlier one fails. Exits non-zero on any failure.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::Rng;
use rpos::cli::{self, Command, RunConfig};
use rpos::condition_g::{self, GOptions};
use rpos::models::{
    analyze_family, build_diffusion_family, build_pds_kernel, girsanov_check, mc_log_mass_slope,
    mc_pds, verify_condition_g, DiffusionModel, EulerSettings, PdsModel, Start,
};
use rpos::reciprocal::{certify, CertifyOptions, ReciprocalInput};
use rpos::spectral::{measure_eq1, measure_eq2, power_iterate, SkeletonOptions};
use rpos::transforms::{h_transform, tilt_submarkov};
use rpos::{Measure, SubsetMask};

use common::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn criterion_1() -> Outcome {
    let mut r = rng(1);
    let mut solver_time = Duration::ZERO;
    let (mut worst_theta, mut worst_eta) = (0.0_f64, 0.0_f64);
    let clock = Instant::now();
    for case in 0..200 {
        let n = r.gen_range(5..=30);
        let (p, psi1, o) = random_gapped(&mut r, n, 0.95);
        let t0 = Instant::now();
        let t = power_iterate(&p, &psi1, 1e-14, 100_000).map_err(e2s)?;
        solver_time += t0.elapsed();
        let rel = (t.theta0 - o.lambda).abs() / o.lambda;
        let psi = psi1.to_vec();
        let d = psi_dist(&t.eta.to_vec(), &o.eta, &psi);
        worst_theta = worst_theta.max(rel);
        worst_eta = worst_eta.max(d);
        ensure(rel <= 1e-10, || {
            format!("case {case} (n = {n}): theta0 relative error {rel:e}")
        })?;
        ensure(d <= 1e-8, || {
            format!("case {case} (n = {n}): eta psi1-distance {d:e}")
        })?;
    }
    let total = clock.elapsed();
    ensure(total < Duration::from_secs(5), || {
        format!("took {total:.2?}")
    })?;
    Ok(format!(
        "max rel theta0 err {worst_theta:.1e}, max eta err {worst_eta:.1e}, solver {solver_time:.2?}, total {total:.2?}"
    ))
}

fn two_state() -> rpos::TransferOperator {
    op_from_rows(&[vec![0.5, 0.2], vec![0.1, 0.6]])
}

fn criterion_2() -> Outcome {
    let p = two_state();
    let t = power_iterate(&p, &ones(&p), 1e-14, 10_000).map_err(e2s)?;
    let nu = t.nu_p.masses();
    let errs = [
        (t.theta0 - 0.7).abs(),
        (t.eta.get(0) - 1.0).abs(),
        (t.eta.get(1) - 1.0).abs(),
        (nu[0] - 1.0 / 3.0).abs(),
        (nu[1] - 2.0 / 3.0).abs(),
    ];
    let worst = errs.iter().copied().fold(0.0, f64::max);
    ensure(worst <= 1e-12, || {
        format!("max deviation {worst:e} ({errs:?})")
    })?;
    Ok(format!("max deviation {worst:.1e}"))
}

fn criterion_3() -> Outcome {
    let p = two_state();
    let psi = ones(&p);
    let t = power_iterate(&p, &psi, 1e-14, 10_000).map_err(e2s)?;
    let mu = Measure::point_mass(p.space().clone(), 0).map_err(e2s)?;
    let f = func(&p, &[1.0, 0.0]);
    let eq1 = measure_eq1(&p, &t, &psi, &psi, &mu, &f, 40).map_err(e2s)?;
    let eq2 = measure_eq2(&p, &t, &psi, &mu, &f, 40).map_err(e2s)?;
    let target = 4.0 / 7.0;
    for r in [&eq1, &eq2] {
        let dev = (r.fitted_rate - target).abs() / target;
        ensure(dev <= 0.05, || {
            format!(
                "{} rate {} deviates {dev:.3} from 4/7",
                r.target.name(),
                r.fitted_rate
            )
        })?;
        for n in r.burn_in..r.errors.len() {
            ensure(r.errors[n] <= r.bound[n], || {
                format!(
                    "{}: error {:e} above bound {:e} at n = {n}",
                    r.target.name(),
                    r.errors[n],
                    r.bound[n]
                )
            })?;
        }
    }
    ensure(eq1.pass && eq2.pass, || "fit reports did not pass".into())?;
    Ok(format!(
        "alpha = {:.6}, beta = {:.6}, bound holds for n >= {} / {}",
        eq1.fitted_rate, eq2.fitted_rate, eq1.burn_in, eq2.burn_in
    ))
}

fn criterion_4() -> Outcome {
    let p = op_from_rows(&[vec![0.6, 0.4], vec![0.3, 0.7]]);
    let one = ones(&p);
    let full = SubsetMask::full(p.space().clone());
    let rep = condition_g::verify(&p, &full, &one, &one, GOptions::default()).map_err(e2s)?;
    let nu = rep.g1.nu.masses();
    ensure((rep.g1.c1 - 0.7).abs() <= 1e-12, || {
        format!("c1 = {}", rep.g1.c1)
    })?;
    ensure(
        (nu[0] - 3.0 / 7.0).abs() <= 1e-12 && (nu[1] - 4.0 / 7.0).abs() <= 1e-12,
        || format!("nu = {nu:?}"),
    )?;
    ensure((rep.g2.theta2 - 1.0).abs() <= 1e-12, || {
        format!("theta2 = {}", rep.g2.theta2)
    })?;
    ensure(rep.overall, || "mixing chain did not pass".into())?;

    let id = op_from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let one = ones(&id);
    let full = SubsetMask::full(id.space().clone());
    let rep = condition_g::verify(&id, &full, &one, &one, GOptions::default()).map_err(e2s)?;
    ensure(!rep.g1.pass, || "identity passed G1".into())?;

    let cyc = op_from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
    let one = ones(&cyc);
    for idx in [0, 1] {
        let k = SubsetMask::from_indices(cyc.space().clone(), &[idx]).map_err(e2s)?;
        let rep = condition_g::verify(&cyc, &k, &one, &one, GOptions::default()).map_err(e2s)?;
        ensure(!rep.g4.pass, || {
            format!("2-cycle with K = {{{idx}}} passed G4")
        })?;
    }
    Ok("c1 = 0.7, nu = (3/7, 4/7), theta2 = 1; identity fails G1; 2-cycle fails G4".into())
}

fn criterion_5() -> Outcome {
    let mut r = rng(5);
    let (mut worst_tilt, mut worst_h) = (0.0_f64, 0.0_f64);
    for case in 0..1000 {
        let n = r.gen_range(2..=30);
        let (p, psi1) = random_positive(&mut r, n);
        let tilt = tilt_submarkov(&p, &psi1, None).map_err(e2s)?;
        worst_tilt = worst_tilt.max(tilt.max_row_mass);
        ensure(tilt.max_row_mass <= 1.0 + 1e-12, || {
            format!("case {case}: tilt row mass {}", tilt.max_row_mass)
        })?;
        let o = oracle(&p, psi1.values().as_slice().unwrap());
        let eta = func(&p, &o.eta);
        let h = h_transform(&p, &eta, o.lambda, Some(&psi1)).map_err(e2s)?;
        worst_h = worst_h.max(h.max_row_defect());
        ensure(h.max_row_defect() <= 1e-10, || {
            format!(
                "case {case}: h-transform row defect {:e}",
                h.max_row_defect()
            )
        })?;
    }
    Ok(format!(
        "max tilt row mass - 1 = {:.1e}, max h-transform defect {worst_h:.1e}",
        worst_tilt - 1.0
    ))
}

fn criterion_6() -> Outcome {
    let corpus = g2_corpus(6, 50);
    let (mut g1_pass, mut g3_pass) = (0, 0);
    for (i, inst) in corpus.iter().enumerate() {
        let a = condition_g::check_g1(&inst.p, &inst.k, &inst.psi1, 1).map_err(e2s)?;
        let b = condition_g::check_g1(&inst.p, &inst.k, &inst.psi2, 1).map_err(e2s)?;
        ensure(a.pass == b.pass, || {
            format!("instance {i}: G1 {} vs {}", a.pass, b.pass)
        })?;
        g1_pass += usize::from(a.pass);
        let a = condition_g::check_g3(&inst.p, &inst.k, &inst.psi1, 100).map_err(e2s)?;
        let b = condition_g::check_g3(&inst.p, &inst.k, &inst.psi2, 100).map_err(e2s)?;
        ensure(a.pass == b.pass, || {
            format!("instance {i}: G3 {} vs {}", a.pass, b.pass)
        })?;
        g3_pass += usize::from(a.pass);
    }
    Ok(format!(
        "50 instances; decisions agree (G1 pass {g1_pass}, G3 pass {g3_pass})"
    ))
}

fn criterion_7() -> Outcome {
    let mut r = rng(7);
    let corpus = g2_corpus(70, 60);
    let mut certified = 0;
    let mut controls = 0;
    for (i, inst) in corpus.iter().enumerate() {
        if !inst.verify(GOptions::default()).overall {
            continue;
        }
        let t = power_iterate(&inst.p, &inst.psi1, 1e-14, 100_000).map_err(e2s)?;
        let input = ReciprocalInput::from_triple(&inst.p, &inst.psi1, &t, 128).map_err(e2s)?;
        let cert = certify(&input, CertifyOptions::default())
            .map_err(|e| format!("instance {i}: certify failed: {e}"))?;
        ensure(cert.pass, || {
            format!("instance {i}: certificate did not pass")
        })?;
        ensure(cert.lyapunov_holds(), || {
            format!("instance {i}: Lyapunov inequality violated")
        })?;
        certified += 1;

        let mut bad = input.clone();
        let noise: Vec<f64> = (0..inst.p.len())
            .map(|_| 1.0 + r.gen_range(-0.05..0.05))
            .collect();
        bad.eta = bad.eta.mul(&func(&inst.p, &noise)).map_err(e2s)?;
        let residual = bad.eigen_residual().map_err(e2s)?;
        if residual <= 1e-3 {
            continue;
        }
        controls += 1;
        if let Ok(c) = certify(&bad, CertifyOptions::default()) {
            ensure(!c.pass, || format!("instance {i}: perturbed eta certified"))?;
        }
    }
    ensure(certified > 0, || {
        "no corpus instance passed Condition (G)".into()
    })?;
    Ok(format!(
        "{certified} instances certified, {controls} negative controls rejected"
    ))
}

fn criterion_8() -> Outcome {
    let clock = Instant::now();
    let model = PdsModel::default();
    let kernel = build_pds_kernel(&model).map_err(e2s)?;
    let ver = verify_condition_g(&kernel, GOptions::default()).map_err(e2s)?;
    ensure(ver.report.overall, || {
        format!("G verifier failed:\n{}", ver.report.render_table())
    })?;

    let coarse = build_pds_kernel(&PdsModel {
        grid_n: 200,
        ..model.clone()
    })
    .map_err(e2s)?;
    let t400 = power_iterate(&kernel.op, &kernel.psi1, 1e-12, 100_000).map_err(e2s)?;
    let t200 = power_iterate(&coarse.op, &coarse.psi1, 1e-12, 100_000).map_err(e2s)?;
    let change = (t400.theta0 - t200.theta0).abs() / t400.theta0;
    ensure(change < 0.01, || format!("theta0 changed by {change:e}"))?;

    let mut r = rng(8);
    let space = kernel.op.space();
    let sd = model.noise_sd;
    let mut worst_z = 0.0_f64;
    for cell in 0..20 {
        let i = r.gen_range(0..kernel.op.len());
        let fx = model.step_map(space.point(i))[0];
        let near: Vec<usize> = (0..kernel.op.len())
            .filter(|&j| (space.point(j)[0] - fx).abs() <= 2.0 * sd)
            .collect();
        let j = near[r.gen_range(0..near.len())];
        let h = kernel.grid.axes[0].h;
        let (lo, hi) = (space.point(j)[0] - h / 2.0, space.point(j)[0] + h / 2.0);
        let ind = move |y: &[f64]| if y[0] >= lo && y[0] < hi { 1.0 } else { 0.0 };
        let est = mc_pds(&model, space.point(i), 1, &ind, 1_000_000, 800 + cell).map_err(e2s)?;
        let z = (est.value - kernel.op.get(i, j)).abs() / est.std_error;
        worst_z = worst_z.max(z);
        ensure(z <= 3.0, || {
            format!(
                "cell ({i}, {j}): kernel {:e}, MC {:e} ± {:e}",
                kernel.op.get(i, j),
                est.value,
                est.std_error
            )
        })?;
    }
    let elapsed = clock.elapsed();
    ensure(elapsed < Duration::from_secs(60), || {
        format!("took {elapsed:.2?}")
    })?;
    Ok(format!(
        "G passes, theta0 change {change:.1e}, max |z| {worst_z:.2} over 20 cells, {elapsed:.2?}"
    ))
}

fn criterion_9() -> Outcome {
    let clock = Instant::now();
    let model = DiffusionModel::default();
    let fam = build_diffusion_family(&model).map_err(e2s)?;
    let an = analyze_family(&fam, &SkeletonOptions::default()).map_err(e2s)?;
    ensure(an.c_bar.is_finite(), || format!("c_bar = {}", an.c_bar))?;
    ensure(an.c_underline > 0.0, || {
        format!("c_underline = {}", an.c_underline)
    })?;
    let fine = DiffusionModel {
        steps: 2 * model.steps,
        horizon: model.horizon,
        ..model.clone()
    };
    let an_fine = analyze_family(
        &build_diffusion_family(&fine).map_err(e2s)?,
        &SkeletonOptions::default(),
    )
    .map_err(e2s)?;
    let drift = ((an_fine.lambda0 - an.lambda0) / an.lambda0).abs();
    ensure(drift <= 1e-3, || {
        format!("lambda0 moved by {drift:e} under time-grid halving")
    })?;

    let start = Start::from_measure(&an.triple.nu_p, model.h()).map_err(e2s)?;
    let slope = mc_log_mass_slope(
        &model,
        &start,
        &[1.0, 2.0, 3.0, 4.0],
        100_000,
        9,
        EulerSettings::default(),
        20,
    )
    .map_err(e2s)?;
    ensure(slope.contains(an.lambda0), || {
        format!(
            "lambda0 = {} outside MC interval [{}, {}]",
            an.lambda0, slope.ci_low, slope.ci_high
        )
    })?;

    let coarse = girsanov_check(&DiffusionModel {
        grid_n: 200,
        ..model.clone()
    })
    .map_err(e2s)?;
    let finer = girsanov_check(&model).map_err(e2s)?;
    ensure(finer.discrepancy < coarse.discrepancy, || {
        format!(
            "Girsanov discrepancy {} (h = {}) vs {} (h = {})",
            coarse.discrepancy, coarse.h, finer.discrepancy, finer.h
        )
    })?;
    let elapsed = clock.elapsed();
    ensure(elapsed < Duration::from_secs(120), || {
        format!("took {elapsed:.2?}")
    })?;
    Ok(format!(
        "lambda0 = {:.6}, c_bar = {:.3}, c_underline = {:.3}, halving drift {drift:.1e}, \
         MC [{:.5}, {:.5}], Girsanov {:.1e} -> {:.1e}, {elapsed:.2?}",
        an.lambda0,
        an.c_bar,
        an.c_underline,
        slope.ci_low,
        slope.ci_high,
        coarse.discrepancy,
        finer.discrepancy
    ))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs")
}

fn payload_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run-metadata.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_10() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let mut compared = 0;
    for (command, config) in [
        (Command::Spectral, "two_state.json"),
        (Command::ModelRun, "pds.cfg"),
    ] {
        let mut runs = Vec::new();
        for k in 0..2 {
            let out = tmp.path().join(format!("{}-{k}", command.name()));
            let cfg = RunConfig {
                command,
                config: configs().join(config),
                out: out.clone(),
                tol: cli::DEFAULT_TOL,
                n_max: 30,
                seed: Some(42),
                quiet: true,
            };
            let code = cli::run(&cfg);
            ensure(code == 0, || {
                format!("{} exited with {code}", command.name())
            })?;
            runs.push(payload_files(&out));
        }
        ensure(runs[0] == runs[1], || {
            format!("{} outputs differ between runs", command.name())
        })?;
        compared += runs[0].len();
    }
    Ok(format!(
        "{compared} payload files byte-identical across repeated runs"
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        (
            "power iteration matches the dense eigendecomposition oracle",
            criterion_1,
        ),
        ("closed-form two-state triple", criterion_2),
        (
            "geometric decay of the normalized and unnormalized iterates",
            criterion_3,
        ),
        (
            "Condition (G) verifier on mixing, identity and periodic chains",
            criterion_4,
        ),
        ("tilt and h-transform contracts", criterion_5),
        ("psi1/psi2 interchangeability in G1 and G3", criterion_6),
        (
            "spectral triple to reciprocal certificate round trip",
            criterion_7,
        ),
        ("Gaussian-perturbed dynamical system", criterion_8),
        (
            "killed diffusion skeleton, Monte Carlo and Girsanov checks",
            criterion_9,
        ),
        ("reproducible CLI outputs", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let clock = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!(
                "PASS criterion {}: {name} ({detail}) [{:.2?}]",
                i + 1,
                clock.elapsed()
            ),
            Err(reason) => {
                failed += 1;
                println!(
                    "FAIL criterion {}: {name}: {reason} [{:.2?}]",
                    i + 1,
                    clock.elapsed()
                );
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
