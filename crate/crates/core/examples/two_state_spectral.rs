//! Perron triple of a 2×2 killed chain and the geometric convergence of
//! its normalized and unnormalized iterates.

use rpos::spectral::{measure_eq1, measure_eq2, measure_eq3, power_iterate};
use rpos::{Measure, StateSpace, StepLabel, TransferOperator, WeightedFunction};

fn main() -> rpos::Result<()> {
    let space = StateSpace::counting(2)?;
    let p = TransferOperator::from_rows(
        space.clone(),
        &[vec![0.5, 0.2], vec![0.1, 0.6]],
        StepLabel::Steps(1),
    )?;
    let psi1 = WeightedFunction::constant(space.clone(), 1.0);
    let t = power_iterate(&p, &psi1, 1e-14, 10_000)?;
    println!("theta0 = {:.15}", t.theta0);
    println!("eta    = {:?}", t.eta.to_vec());
    println!("nu_P   = {:?}", t.nu_p.masses().to_vec());
    println!(
        "residuals: right {:.2e}, left {:.2e}",
        t.right_residual, t.left_residual
    );

    let mu = Measure::point_mass(space.clone(), 0)?;
    let f = WeightedFunction::new(space.clone(), vec![1.0, 0.0])?;
    let eq1 = measure_eq1(&p, &t, &psi1, &psi1, &mu, &f, 40)?;
    let eq2 = measure_eq2(&p, &t, &psi1, &mu, &f, 40)?;
    let eq3 = measure_eq3(&p, &t, &psi1, 40)?;
    for r in [&eq1, &eq2, &eq3] {
        println!(
            "{:<4} fitted rate {:.6} (second eigenvalue ratio 4/7 = {:.6}), pass = {}",
            r.target.name(),
            r.fitted_rate,
            4.0 / 7.0,
            r.pass
        );
    }
    print!(
        "{}",
        eq1.to_csv().lines().take(6).collect::<Vec<_>>().join("\n")
    );
    println!("\n...");
    Ok(())
}
