//! Condition (G) on three small operators: a mixing chain that passes, the
//! identity (no minorization) and a periodic permutation (no aperiodic
//! return to the small set).

use rpos::condition_g::{verify, GOptions};
use rpos::{StateSpace, StepLabel, SubsetMask, TransferOperator, WeightedFunction};

fn op(rows: &[Vec<f64>]) -> rpos::Result<TransferOperator> {
    TransferOperator::from_rows(StateSpace::counting(rows.len())?, rows, StepLabel::Steps(1))
}

fn main() -> rpos::Result<()> {
    let cases = [
        ("mixing", op(&[vec![0.6, 0.4], vec![0.3, 0.7]])?, None),
        ("identity", op(&[vec![1.0, 0.0], vec![0.0, 1.0]])?, None),
        (
            "2-cycle",
            op(&[vec![0.0, 1.0], vec![1.0, 0.0]])?,
            Some(vec![0]),
        ),
    ];
    for (name, p, k) in cases {
        let space = p.space().clone();
        let k = match k {
            Some(idx) => SubsetMask::from_indices(space.clone(), &idx)?,
            None => SubsetMask::full(space.clone()),
        };
        let one = WeightedFunction::constant(space, 1.0);
        let report = verify(&p, &k, &one, &one, GOptions::default())?;
        println!("== {name}\n{}", report.render_table());
        if name == "mixing" {
            println!(
                "c1 = {}, nu = {:?}",
                report.g1.c1,
                report.g1.nu.masses().to_vec()
            );
        }
    }
    Ok(())
}
