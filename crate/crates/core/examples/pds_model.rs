//! `X_{n+1} = X_n / 4 + ξ_n` on a 400-cell grid: growth diagnostics,
//! Condition (G), grid convergence of θ₀, and one-step kernel entries
//! against Monte Carlo.

use rpos::condition_g::GOptions;
use rpos::models::{build_pds_kernel, check_pds_hypotheses, mc_pds, verify_condition_g, PdsModel};
use rpos::spectral::power_iterate;

fn main() -> rpos::Result<()> {
    let model = PdsModel::default();
    let hyp = check_pds_hypotheses(&model)?;
    println!(
        "growth diverges: {}, warnings: {:?}",
        hyp.diverges, hyp.warnings
    );

    let kernel = build_pds_kernel(&model)?;
    println!("{}", serde_json::to_string_pretty(&kernel.summary())?);
    let ver = verify_condition_g(&kernel, GOptions::default())?;
    println!(
        "K = psi1 sublevel {:.4} ({} cells)",
        ver.psi1_level,
        ver.k.count()
    );
    println!("{}", ver.report.render_table());

    let mut thetas = Vec::new();
    for n in [200, 400] {
        let k = build_pds_kernel(&PdsModel {
            grid_n: n,
            ..model.clone()
        })?;
        thetas.push(power_iterate(&k.op, &k.psi1, 1e-12, 10_000)?.theta0);
    }
    println!(
        "theta0: {:.12} (200 cells), {:.12} (400 cells)",
        thetas[0], thetas[1]
    );

    let space = kernel.op.space();
    let (i, j) = (200, 190);
    let (lo, hi) = (space.point(j)[0] - 0.02, space.point(j)[0] + 0.02);
    let est = mc_pds(
        &model,
        space.point(i),
        1,
        &|y| f64::from(u8::from(y[0] >= lo && y[0] < hi)),
        1_000_000,
        5,
    )?;
    println!(
        "P(x_{i}, cell {j}) = {:.6e}, Monte Carlo {:.6e} ± {:.1e}",
        kernel.op.get(i, j),
        est.value,
        est.std_error
    );
    Ok(())
}
