//! Sub-Markov tilt by a weight function and Doob h-transform by the Perron
//! eigenfunction of a random positive kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rpos::spectral::power_iterate;
use rpos::transforms::{h_transform, tilt_submarkov};
use rpos::{StateSpace, StepLabel, TransferOperator, WeightedFunction};

fn main() -> rpos::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 8;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..n).map(|_| rng.gen_range(0.01..1.0)).collect())
        .collect();
    let space = StateSpace::counting(n)?;
    let p = TransferOperator::from_rows(space.clone(), &rows, StepLabel::Steps(1))?;
    let psi1 = WeightedFunction::from_fn(space.clone(), |x| (0.3 * x[0]).exp());

    let tilt = tilt_submarkov(&p, &psi1, None)?;
    println!(
        "tilt: c = {:.6}, max row mass = {:.15}, sub-Markov = {}",
        tilt.c, tilt.max_row_mass, tilt.sub_markov
    );

    let t = power_iterate(&p, &psi1, 1e-14, 10_000)?;
    let h = h_transform(&p, &t.eta, t.theta0, Some(&psi1))?;
    println!(
        "h-transform: theta0 = {:.12}, support {} of {} states, max |row mass - 1| = {:.2e}",
        t.theta0,
        h.support.count(),
        n,
        h.max_row_defect()
    );
    println!(
        "tilted eigenvalue theta0 / c = {:.12}",
        tilt.theta_q(t.theta0)
    );
    Ok(())
}
