//! Killed diffusion `dX = dB + (1 − X) dt` on `(0, 12)`: skeleton analysis,
//! stability of `λ₀` under time-grid halving, Girsanov cross-check and a
//! Monte Carlo estimate of the decay rate of the surviving mass.

use std::time::Instant;

use rpos::models::{
    analyze_family, build_diffusion_family, girsanov_check, mc_log_mass_slope, DiffusionModel,
    EulerSettings, Start,
};
use rpos::spectral::SkeletonOptions;

fn main() -> rpos::Result<()> {
    let clock = Instant::now();
    let model = DiffusionModel::default();
    let fam = build_diffusion_family(&model)?;
    let an = analyze_family(&fam, &SkeletonOptions::default())?;
    println!(
        "lambda0 = {:.10}  c_bar = {:.4e}  c_underline = {:.4e}  pass = {}",
        an.lambda0, an.c_bar, an.c_underline, an.pass
    );
    let fine = DiffusionModel {
        steps: 2 * model.steps,
        ..model.clone()
    };
    let an_fine = analyze_family(&build_diffusion_family(&fine)?, &SkeletonOptions::default())?;
    println!(
        "lambda0 with halved time step = {:.10} (relative change {:.2e})",
        an_fine.lambda0,
        ((an_fine.lambda0 - an.lambda0) / an.lambda0).abs()
    );
    for n in [200, 400] {
        let g = girsanov_check(&DiffusionModel {
            grid_n: n,
            ..model.clone()
        })?;
        println!(
            "girsanov h = {:.4}  discrepancy = {:.4e}",
            g.h, g.discrepancy
        );
    }
    let start = Start::from_measure(&an.triple.nu_p, model.h())?;
    let slope = mc_log_mass_slope(
        &model,
        &start,
        &[1.0, 2.0, 3.0, 4.0],
        100_000,
        1,
        EulerSettings::default(),
        20,
    )?;
    println!(
        "MC slope = {:.5}  95% CI [{:.5}, {:.5}]  contains lambda0: {}",
        slope.slope,
        slope.ci_low,
        slope.ci_high,
        slope.contains(an.lambda0)
    );
    println!("elapsed {:.1?}", clock.elapsed());
    Ok(())
}
