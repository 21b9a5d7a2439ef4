//! The distance/divergence toolbox: exact 1D quantile transport, optimal
//! 2D assignment, histogram relative entropy, Fisher information, and the
//! Gaussian closed forms they are checked against.

use effdyn::fpgrid::{Grid1, GridDensity1};
use effdyn::linalg::Mat;
use effdyn::metrics::{
    ensemble_relative_entropy, fisher_information_1d, gaussian_divergences,
    relative_entropy_1d, wasserstein2_1d_grid, wasserstein2_1d_samples, wasserstein2_2d_samples,
};
use effdyn::rng::StreamRng;

fn main() -> effdyn::Result<()> {
    let g = Grid1::new(-9.0, 10.0, 1024);
    let a = GridDensity1::gaussian(g.clone(), 1.0, 1.0);
    let b = GridDensity1::gaussian(g, 0.0, 1.0);
    println!(
        "grid H  = {:.6} (closed form 0.5)",
        relative_entropy_1d(&a, &b)?.expect_finite()
    );
    println!("grid W2 = {:.6} (closed form 1.0)", wasserstein2_1d_grid(&a, &b));
    let g2 = Grid1::new(-9.0, 10.0, 1024);
    let za = GridDensity1::gaussian(g2.clone(), 0.8, 1.3);
    let nb = GridDensity1::gaussian(g2, 0.0, 1.3);
    println!(
        "grid I  = {:.6} (closed form {:.6})",
        fisher_information_1d(&za, &nb, None)?,
        0.8 * 0.8 / (1.3 * 1.3)
    );

    let mut rng = StreamRng::from_parts(5, 1);
    let xs: Vec<f64> = (0..50_000).map(|_| rng.normal() + 1.0).collect();
    let ys: Vec<f64> = (0..50_000).map(|_| rng.normal()).collect();
    let (h, spec) = ensemble_relative_entropy(&xs, &ys);
    println!("ensemble H = {h:.4} on {} bins (closed form 0.5)", spec.grid.n);
    println!("ensemble W2 = {:.4} (closed form 1.0)", wasserstein2_1d_samples(&xs, &ys));

    let pa: Vec<[f64; 2]> = (0..256).map(|_| [rng.normal(), rng.normal()]).collect();
    let pb: Vec<[f64; 2]> = (0..256).map(|_| [rng.normal() + 1.0, rng.normal()]).collect();
    println!("2D assignment W2 = {:.4}", wasserstein2_2d_samples(&pa, &pb)?);

    let (h, w) = gaussian_divergences(
        &[0.0, 0.0],
        &Mat::diag(&[1.0, 4.0]),
        &[0.0, 0.0],
        &Mat::diag(&[4.0, 1.0]),
    )?;
    println!("Gaussian pair: H = {h:.4}, W2^2 = {:.4} (closed form 2)", w * w);
    Ok(())
}
