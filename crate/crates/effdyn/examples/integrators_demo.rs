//! The SDE steppers side by side: Euler-Maruyama for the overdamped system,
//! BAOAB for Langevin with its exact friction-noise substep, and the
//! effective stepper with the symmetric PSD square root of the mobility.

use effdyn::closure::ScalarClosure;
use effdyn::integrators::{
    step_effective, step_langevin_baoab, step_overdamped_em, SdeConfig,
};
use effdyn::model::Potential;
use effdyn::rng::StreamRng;

fn main() -> effdyn::Result<()> {
    let pot = Potential::from_expr("q1^2/2", 1)?;
    let cfg = SdeConfig::new(0.01, 50.0, 1.0, 1.0)?;
    cfg.check_stiffness(1.0)?;
    let mut rng = StreamRng::from_parts(1, 1);

    // Long overdamped run: stationary variance near 1/(1 - h/2).
    let mut q = vec![0.0];
    let mut acc = 0.0;
    let n = 400_000;
    for i in 0..n + 10_000 {
        step_overdamped_em(&mut q, &pot, &cfg, &[rng.normal()])?;
        if i >= 10_000 {
            acc += q[0] * q[0];
        }
    }
    println!(
        "overdamped stationary variance: {:.4} (Euler-Maruyama fixed point {:.4})",
        acc / n as f64,
        1.0 / (1.0 - cfg.h / 2.0)
    );

    // Langevin: the (q, p) covariance relaxes to the identity.
    let mut q = vec![0.0];
    let mut p = vec![0.0];
    let (mut sq, mut sp) = (0.0, 0.0);
    for i in 0..n + 10_000 {
        let noise = [rng.normal()];
        step_langevin_baoab(&mut q, &mut p, &pot, &cfg, &noise)?;
        if i >= 10_000 {
            sq += q[0] * q[0];
            sp += p[0] * p[0];
        }
    }
    println!(
        "Langevin stationary (var q, var p): ({:.4}, {:.4}) vs Gibbs (1, 1)",
        sq / n as f64,
        sp / n as f64
    );

    // Effective dynamics with b(z) = 0.975 z: variance 1/0.975.
    let closure = ScalarClosure::new(|z| 0.975 * z, |_| 1.0);
    let mut z = vec![0.0];
    let mut sz = 0.0;
    for i in 0..n + 10_000 {
        let noise = [rng.normal()];
        step_effective(&mut z, &closure, &cfg, &noise)?;
        if i >= 10_000 {
            sz += z[0] * z[0];
        }
    }
    println!(
        "effective stationary variance: {:.4} (exact {:.4})",
        sz / n as f64,
        1.0 / 0.975
    );
    Ok(())
}
