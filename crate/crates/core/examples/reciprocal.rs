//! From a computed Perron triple to a Lyapunov/minorization certificate for
//! the h-transformed chain, and the failure of a fabricated eigenfunction.

use rpos::reciprocal::{certify, CertifyOptions, ReciprocalInput};
use rpos::spectral::power_iterate;
use rpos::{StateSpace, StepLabel, TransferOperator, WeightedFunction};

fn main() -> rpos::Result<()> {
    let rows = vec![
        vec![0.30, 0.20, 0.05, 0.00],
        vec![0.10, 0.30, 0.20, 0.05],
        vec![0.00, 0.15, 0.30, 0.20],
        vec![0.00, 0.05, 0.25, 0.40],
    ];
    let space = StateSpace::counting(rows.len())?;
    let p = TransferOperator::from_rows(space.clone(), &rows, StepLabel::Steps(1))?;
    let psi = WeightedFunction::constant(space.clone(), 1.0);
    let t = power_iterate(&p, &psi, 1e-14, 10_000)?;
    let input = ReciprocalInput::from_triple(&p, &psi, &t, 60)?;
    let cert = certify(&input, CertifyOptions::default())?;
    println!(
        "m = {}, lambda = {}, rho = {}, d = {:.4}, C_R = {:.4e}, n'' = {}",
        cert.m, cert.lambda, cert.rho, cert.d, cert.c_r, cert.n_access
    );
    println!(
        "Lyapunov inequality holds pointwise: {}",
        cert.lyapunov_holds()
    );
    println!("{}", cert.g_report.render_table());

    let mut bad = input.clone();
    bad.eta = bad
        .eta
        .map(|v| v * 1.01)
        .mul(&WeightedFunction::new(space, vec![1.0, 1.05, 0.95, 1.0])?)?;
    match certify(&bad, CertifyOptions::default()) {
        Ok(c) => println!("perturbed eta: pass = {}", c.pass),
        Err(e) => println!("perturbed eta rejected: {e}"),
    }
    Ok(())
}
