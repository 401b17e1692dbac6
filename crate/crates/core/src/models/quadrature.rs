//! Gauss–Hermite quadrature (Golub–Welsch).

use nalgebra::DMatrix;

/// Nodes and weights for `∫ f(x) e^{-x²} dx ≈ Σ w_i f(x_i)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mu0 = std::f64::consts::PI.sqrt();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `E[f(σ Z)]` for a standard normal `Z`, with `n` nodes.
pub fn gaussian_expectation(f: impl Fn(f64) -> f64, sigma: f64, n: usize) -> f64 {
    let (x, w) = gauss_hermite(n);
    let s = std::f64::consts::SQRT_2 * sigma;
    x.iter().zip(&w).map(|(xi, wi)| wi * f(s * xi)).sum::<f64>() / std::f64::consts::PI.sqrt()
}
