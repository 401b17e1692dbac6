//! Model-level checks: Monte Carlo against the grid kernel, determinism,
//! grid convergence and the structural facts of the two model families.

use rpos::condition_g::{self, GOptions};
use rpos::models::{
    build_pds_kernel, check_diffusion_hypotheses, check_pds_hypotheses, girsanov_check,
    mc_diffusion, mc_pds, verify_condition_g, DiffusionModel, EulerSettings, FnSpec, PdsModel,
    Start,
};
use rpos::spectral::power_iterate;

fn small_pds() -> PdsModel {
    PdsModel {
        grid_n: 200,
        ..PdsModel::default()
    }
}

#[test]
fn mc_matches_grid_iterates() {
    let model = PdsModel {
        g: FnSpec::Affine(0.8, -0.05),
        ..small_pds()
    };
    let kernel = build_pds_kernel(&model).unwrap();
    let space = kernel.op.space().clone();
    let x = (0..space.len())
        .min_by(|&a, &b| space.point(a)[0].abs().total_cmp(&space.point(b)[0].abs()))
        .unwrap();
    let psi1 = |y: &[f64]| model.psi1_at(y);
    let mut grid = kernel.psi1.clone();
    for n in 1..=6 {
        grid = kernel.op.apply(&grid).unwrap();
        let est = mc_pds(&model, space.point(x), n, &psi1, 200_000, 40 + n as u64).unwrap();
        let z = (est.value - grid.get(x)).abs() / est.std_error;
        // The grid kernel is a cell discretization; allow its O(h) bias on top of 3 SE.
        let bias = 5e-3 * grid.get(x);
        assert!(
            (est.value - grid.get(x)).abs() <= 3.0 * est.std_error + bias,
            "n = {n}: grid {}, MC {} ± {} (z = {z:.2})",
            grid.get(x),
            est.value,
            est.std_error
        );
    }
}

#[test]
fn mc_is_deterministic() {
    let model = small_pds();
    let f = |y: &[f64]| y[0].abs();
    let a = mc_pds(&model, &[0.5], 4, &f, 5000, 17).unwrap();
    let b = mc_pds(&model, &[0.5], 4, &f, 5000, 17).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    let c = mc_pds(&model, &[0.5], 4, &f, 5000, 18).unwrap();
    assert_ne!(a.value.to_bits(), c.value.to_bits());

    let diff = DiffusionModel::default();
    let settings = EulerSettings {
        dt: 1e-2,
        ..EulerSettings::default()
    };
    let start = Start::Point(vec![1.0]);
    let one = |_: &[f64]| 1.0;
    let a = mc_diffusion(&diff, &start, &[0.5, 1.0], &one, 2000, 5, settings).unwrap();
    let b = mc_diffusion(&diff, &start, &[0.5, 1.0], &one, 2000, 5, settings).unwrap();
    assert_eq!(a, b);
    for e in &a {
        assert!(e.std_error >= 0.0 && e.n_killed <= e.n_traj);
    }
}

#[test]
fn pds_grid_refinement_is_stable() {
    let coarse = build_pds_kernel(&small_pds()).unwrap();
    let fine = build_pds_kernel(&PdsModel::default()).unwrap();
    let a = power_iterate(&coarse.op, &coarse.psi1, 1e-12, 100_000).unwrap();
    let b = power_iterate(&fine.op, &fine.psi1, 1e-12, 100_000).unwrap();
    assert!((a.theta0 - b.theta0).abs() < 0.01 * b.theta0);
}

#[test]
fn positive_pds_kernel_has_unit_aperiodicity_and_one_step_minorization() {
    let kernel = build_pds_kernel(&small_pds()).unwrap();
    let ver = verify_condition_g(&kernel, GOptions::default()).unwrap();
    assert!(ver.report.overall, "{}", ver.report.render_table());
    assert!(ver.report.g4.n4.iter().all(|&n| n == Some(1)));
    let g1 = condition_g::check_g1(&kernel.op, &ver.k, &kernel.psi1, 1).unwrap();
    assert!(g1.pass && g1.n1 == 1);
}

#[test]
fn hypothesis_diagnostics_separate_contracting_and_expanding_maps() {
    let good = check_pds_hypotheses(&small_pds()).unwrap();
    assert!(good.diverges);
    let bad = check_pds_hypotheses(&PdsModel {
        f: FnSpec::Linear(2.0),
        ..small_pds()
    })
    .unwrap();
    assert!(!bad.diverges);
    let diff = check_diffusion_hypotheses(&DiffusionModel::default()).unwrap();
    assert!(diff.diverges);
}

#[test]
fn diffusion_tilt_is_sub_markov() {
    for grid_n in [200, 400] {
        let model = DiffusionModel {
            grid_n,
            ..DiffusionModel::default()
        };
        let g = girsanov_check(&model).unwrap();
        assert!(g.min_kappa >= 0.0);
        assert!(
            g.max_tilted_row_mass <= 1.0 + g.h * g.h,
            "grid {grid_n}: {}",
            g.max_tilted_row_mass
        );
    }
}
