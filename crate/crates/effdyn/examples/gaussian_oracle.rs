//! Exact Gaussian moment propagation through the Lyapunov ODE, the
//! stationary covariance from the Lyapunov equation, and the per-time
//! divergences between the coarse-grained and effective Langevin laws.

use effdyn::gaussref::{
    langevin_reference_suite, propagate_moments, stationary_covariance, LangevinScenario,
    LinearSde,
};
use effdyn::linalg::Mat;
use effdyn::model::CatalogPotential;

fn main() -> effdyn::Result<()> {
    // Scalar Ornstein-Uhlenbeck: S(t) = 1 - e^{-2t}.
    let sys = LinearSde::new(Mat::from_vec(1, 1, vec![1.0]), Mat::from_vec(1, 1, vec![2.0]))?;
    let out = propagate_moments(&sys, &[0.0], &Mat::zeros(1, 1), &[0.5, 1.0, 2.0])?;
    for (t, (_, s)) in [0.5_f64, 1.0, 2.0].iter().zip(&out) {
        println!("OU variance at t = {t}: {:.6} (exact {:.6})", s[(0, 0)], 1.0 - (-2.0 * t).exp());
    }
    println!("OU stationary variance: {:.6}", stationary_covariance(&sys)?[(0, 0)]);

    // Full Langevin of the coupled quadratic vs its effective approximation.
    let scen = LangevinScenario {
        entry: CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 },
        gamma: 1.0,
        beta: 1.0,
        mean0: vec![1.0, -0.05, 0.0, 0.0],
        cov0: {
            let h = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 }
                .quadratic_hessian()
                .unwrap();
            let mut s = Mat::zeros(4, 4);
            let hinv = effdyn::linalg::inverse(&h).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    s[(i, j)] = hinv[(i, j)];
                }
                s[(2 + i, 2 + i)] = 1.0;
            }
            s
        },
    };
    let t_grid: Vec<f64> = (1..=5).map(|i| 0.2 * i as f64).collect();
    let series = langevin_reference_suite(&scen, &t_grid)?;
    println!("\ncoarse-grained vs effective Langevin law (c = 0.5, eps = 0.1):");
    println!("{:>6} {:>14} {:>14}", "t", "H", "W2");
    for (t, (h, w)) in t_grid.iter().zip(&series) {
        println!("{:>6.2} {:>14.6e} {:>14.6e}", t, h, w);
    }
    Ok(())
}
