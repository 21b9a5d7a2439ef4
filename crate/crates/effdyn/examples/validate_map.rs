//! Validate a potential and a coarse-graining map against the structural
//! assumptions: derivative callbacks vs finite differences, uniform
//! ellipticity of the metric, decay of the second derivative, and the
//! affine-at-infinity diagnostic.

use effdyn::linalg::Mat;
use effdyn::model::{
    check_affine_at_infinity, validate_map, validate_potential, CatalogPotential, CoarseMap,
};

fn main() -> effdyn::Result<()> {
    let entry = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 };
    let pot = entry.build();
    let domain = [(-6.0, 6.0), (-2.0, 2.0)];
    validate_potential(&pot, &domain, 200)?;
    println!("potential derivatives agree with finite differences");

    let map = CoarseMap::coordinate(2, 1);
    let rep = validate_map(&map, &domain, 2.0, 200)?;
    println!(
        "coordinate map: min metric eigenvalue {:.3}, D2xi decay exponent {:.2}",
        rep.min_metric_eigenvalue, rep.hess_decay_exponent
    );

    // A map that flattens out at infinity passes the diagnostic; one with a
    // growing Jacobian fails it.
    let tanh_map = CoarseMap::new(
        2,
        1,
        |q| vec![q[0] + q[1].tanh()],
        |q| {
            let s = 1.0 / q[1].cosh();
            Mat::from_rows(&[&[1.0, s * s]])
        },
        |q| {
            let t = q[1].tanh();
            let s = 1.0 / q[1].cosh();
            let mut h = Mat::zeros(2, 2);
            h[(1, 1)] = -2.0 * s * s * t;
            vec![h]
        },
    );
    let aff = check_affine_at_infinity(&tanh_map, &[2.0, 8.0, 32.0, 128.0]);
    println!(
        "tanh map: T_est = [{:.3}, {:.3}], C_xi = {:.2}, pass = {}",
        aff.t_est[(0, 0)],
        aff.t_est[(0, 1)],
        aff.c_xi_est,
        aff.pass
    );

    let quad_map = CoarseMap::new(
        2,
        1,
        |q| vec![q[0] + 0.1 * q[1] * q[1]],
        |q| Mat::from_rows(&[&[1.0, 0.2 * q[1]]]),
        |_q| {
            let mut h = Mat::zeros(2, 2);
            h[(1, 1)] = 0.2;
            vec![h]
        },
    );
    let aff = check_affine_at_infinity(&quad_map, &[2.0, 8.0, 32.0]);
    println!("quadratic map: pass = {} (expected false)", aff.pass);
    Ok(())
}
