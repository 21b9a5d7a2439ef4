//! Analytic Gaussian reference for linear-drift systems.
//!
//! For dX = -M X dt + Sigma dW with Q = Sigma Sigma^T, a Gaussian law stays
//! Gaussian with
//!     dm/dt = -M m,      dS/dt = -M S - S M^T + Q.
//! Full Langevin, coarse-grained and effective dynamics of the quadratic
//! catalog are all of this form, so their laws (and every divergence between
//! them) are available in closed form. This is the designated source of
//! Langevin left-hand sides in the acceptance suite: it replaces infeasible
//! 2d-dimensional kinetic grid solves.

use crate::closure::ScalarTimeClosure;
use crate::linalg::{self, Mat};
use crate::metrics;
use crate::model::CatalogPotential;
use crate::{Error, Result};

/// Linear SDE dX = -M X dt + Sigma dW with noise covariance rate
/// Q = Sigma Sigma^T (both constant in time).
#[derive(Debug, Clone)]
pub struct LinearSde {
    pub m: Mat,
    pub q: Mat,
}

impl LinearSde {
    pub fn new(m: Mat, q: Mat) -> Result<Self> {
        let (vals, _) = linalg::sym_eig(&q);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::NotPsd { min_eig: min });
        }
        Ok(LinearSde { m, q })
    }

    /// Overdamped Langevin with quadratic potential: M = Hess V,
    /// Q = (2/beta) Id.
    pub fn overdamped(hessian: &Mat, beta: f64) -> Self {
        let d = hessian.rows();
        LinearSde { m: hessian.clone(), q: Mat::identity(d).scale(2.0 / beta) }
    }

    /// Full Langevin with quadratic potential, state (q, p):
    /// dq = p dt, dp = -H q dt - gamma p dt + sqrt(2 gamma / beta) dW.
    pub fn langevin(hessian: &Mat, gamma: f64, beta: f64) -> Self {
        let d = hessian.rows();
        let mut m = Mat::zeros(2 * d, 2 * d);
        let mut q = Mat::zeros(2 * d, 2 * d);
        for i in 0..d {
            m[(i, d + i)] = -1.0;
            for j in 0..d {
                m[(d + i, j)] = hessian[(i, j)];
            }
            m[(d + i, d + i)] = gamma;
            q[(d + i, d + i)] = 2.0 * gamma / beta;
        }
        LinearSde { m, q }
    }

    /// Effective Langevin over (Z, V) with linear drift b(z, v) = Bz z + Bv v
    /// and constant mobility A:
    /// dZ = V dt, dV = -b dt - gamma V dt + sqrt(2 gamma / beta A) dW.
    pub fn effective_langevin(bz: &Mat, bv: &Mat, a: &Mat, gamma: f64, beta: f64) -> Self {
        let k = bz.rows();
        let mut m = Mat::zeros(2 * k, 2 * k);
        let mut q = Mat::zeros(2 * k, 2 * k);
        for i in 0..k {
            m[(i, k + i)] = -1.0;
            for j in 0..k {
                m[(k + i, j)] = bz[(i, j)];
                m[(k + i, k + j)] = bv[(i, j)];
                q[(k + i, k + j)] = 2.0 * gamma / beta * a[(i, j)];
            }
            m[(k + i, k + i)] += gamma;
        }
        LinearSde { m, q }
    }
}

/// Propagate (mean, covariance) through the linear SDE, reporting them at
/// each requested time. RK4 with step-doubling control on the covariance.
pub fn propagate_moments(
    sys: &LinearSde,
    m0: &[f64],
    s0: &Mat,
    t_grid: &[f64],
) -> Result<Vec<(Vec<f64>, Mat)>> {
    let d = m0.len();
    assert_eq!(sys.m.rows(), d);
    let deriv = |mean: &[f64], cov: &Mat| -> (Vec<f64>, Mat) {
        let dm = linalg::scale_vec(&sys.m.matvec(mean), -1.0);
        let ms = sys.m.matmul(cov);
        let ds = ms.scale(-1.0).sub(&ms.transpose()).add(&sys.q);
        (dm, ds)
    };
    let rk4 = |mean: &Vec<f64>, cov: &Mat, h: f64| -> (Vec<f64>, Mat) {
        let (k1m, k1s) = deriv(mean, cov);
        let m2: Vec<f64> = mean.iter().zip(&k1m).map(|(a, b)| a + 0.5 * h * b).collect();
        let s2 = cov.add(&k1s.scale(0.5 * h));
        let (k2m, k2s) = deriv(&m2, &s2);
        let m3: Vec<f64> = mean.iter().zip(&k2m).map(|(a, b)| a + 0.5 * h * b).collect();
        let s3 = cov.add(&k2s.scale(0.5 * h));
        let (k3m, k3s) = deriv(&m3, &s3);
        let m4: Vec<f64> = mean.iter().zip(&k3m).map(|(a, b)| a + h * b).collect();
        let s4 = cov.add(&k3s.scale(h));
        let (k4m, k4s) = deriv(&m4, &s4);
        let mean_new: Vec<f64> = (0..d)
            .map(|i| mean[i] + h / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]))
            .collect();
        let cov_new = cov.add(
            &k1s.add(&k2s.scale(2.0)).add(&k3s.scale(2.0)).add(&k4s).scale(h / 6.0),
        );
        (mean_new, cov_new)
    };

    let mut out = Vec::with_capacity(t_grid.len());
    let mut mean = m0.to_vec();
    let mut cov = s0.clone();
    let mut t = 0.0;
    let scale = 1.0 + sys.m.frobenius_norm();
    for &t_out in t_grid {
        if t_out < t - 1e-12 {
            return Err(Error::Numerical("oracle time grid must be increasing".into()));
        }
        while t < t_out - 1e-14 {
            let mut h = (t_out - t).min(0.05 / scale);
            // Step-doubling control: accept when one h-step matches two
            // h/2-steps to tight tolerance, else halve.
            loop {
                let (m_full, s_full) = rk4(&mean, &cov, h);
                let (m_half, s_half) = rk4(&mean, &cov, 0.5 * h);
                let (m_two, s_two) = rk4(&m_half, &s_half, 0.5 * h);
                let err = s_full.sub(&s_two).max_abs()
                    + m_full.iter().zip(&m_two).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if err < 1e-11 * (1.0 + cov.max_abs()) || h < 1e-9 {
                    mean = m_two;
                    cov = s_two;
                    cov.symmetrize();
                    t += h;
                    break;
                }
                h *= 0.5;
            }
            if !cov.max_abs().is_finite() || cov.max_abs() > 1e12 {
                return Err(Error::Divergent);
            }
        }
        t = t_out;
        out.push((mean.clone(), cov.clone()));
    }
    Ok(out)
}

/// Stationary covariance: the solution of M S + S M^T = Q, via the
/// Kronecker-vectorized linear system.
pub fn stationary_covariance(sys: &LinearSde) -> Result<Mat> {
    let d = sys.m.rows();
    let n = d * d;
    let mut lhs = Mat::zeros(n, n);
    let mut rhs = vec![0.0; n];
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            rhs[row] = sys.q[(i, j)];
            for l in 0..d {
                // (M S)_{ij} reads S_{lj}; (S M^T)_{ij} reads S_{il}.
                lhs[(row, l * d + j)] += sys.m[(i, l)];
                lhs[(row, i * d + l)] += sys.m[(j, l)];
            }
        }
    }
    let s_vec = linalg::solve(&lhs, &rhs).ok_or(Error::Divergent)?;
    let mut s = Mat::from_vec(d, d, s_vec);
    s.symmetrize();
    let (vals, _) = linalg::sym_eig(&s);
    if vals.iter().any(|&v| v < -1e-10) {
        return Err(Error::Divergent);
    }
    Ok(s)
}

/// Extract the marginal Gaussian on a subset of coordinates.
pub fn marginal_gaussian(mean: &[f64], cov: &Mat, idx: &[usize]) -> (Vec<f64>, Mat) {
    let k = idx.len();
    let m: Vec<f64> = idx.iter().map(|&i| mean[i]).collect();
    let mut s = Mat::zeros(k, k);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            s[(a, b)] = cov[(i, j)];
        }
    }
    (m, s)
}

/// A Langevin comparison scenario on a quadratic catalog entry with
/// Xi(q, p) = (q1, p1).
#[derive(Debug, Clone)]
pub struct LangevinScenario {
    pub entry: CatalogPotential,
    pub gamma: f64,
    pub beta: f64,
    /// Initial Gaussian data of the full system, state layout (q1, q2, p1, p2).
    pub mean0: Vec<f64>,
    pub cov0: Mat,
}

impl LangevinScenario {
    pub fn full_system(&self) -> LinearSde {
        let h = self.entry.quadratic_hessian().expect("quadratic catalog entry");
        LinearSde::langevin(&h, self.gamma, self.beta)
    }

    pub fn effective_system(&self) -> LinearSde {
        let eff = self.entry.analytic_effective(self.beta).expect("catalog entry");
        let slope = eff.drift(1.0);
        LinearSde::effective_langevin(
            &Mat::from_vec(1, 1, vec![slope]),
            &Mat::zeros(1, 1),
            &Mat::identity(1),
            self.gamma,
            self.beta,
        )
    }

    /// Gibbs mean and covariance of the full system (for the initial-entropy
    /// ledger H(rho_0 | mu)).
    pub fn gibbs_moments(&self) -> (Vec<f64>, Mat) {
        let h = self.entry.quadratic_hessian().unwrap();
        let d = h.rows();
        let hinv = linalg::inverse(&h).unwrap();
        let mut s = Mat::zeros(2 * d, 2 * d);
        for i in 0..d {
            for j in 0..d {
                s[(i, j)] = hinv[(i, j)] / self.beta;
            }
            s[(d + i, d + i)] = 1.0 / self.beta;
        }
        (vec![0.0; 2 * d], s)
    }

    /// Initial data of the coarse-grained and effective systems: the
    /// Xi-marginal (q1, p1) of the full initial Gaussian.
    pub fn coarse_initial(&self) -> (Vec<f64>, Mat) {
        marginal_gaussian(&self.mean0, &self.cov0, &[0, 2])
    }
}

/// Per-time (relative entropy, Wasserstein-2) between the exact
/// coarse-grained law (the (q1, p1)-marginal of the full propagation) and
/// the effective Gaussian law, both from the Lyapunov oracle.
pub fn langevin_reference_suite(
    scen: &LangevinScenario,
    t_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    let full = propagate_moments(&scen.full_system(), &scen.mean0, &scen.cov0, t_grid)?;
    let (m0c, s0c) = scen.coarse_initial();
    let eff = propagate_moments(&scen.effective_system(), &m0c, &s0c, t_grid)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for (f, e) in full.iter().zip(&eff) {
        let (mc, sc) = marginal_gaussian(&f.0, &f.1, &[0, 2]);
        let (h, w2) = metrics::gaussian_divergences(&mc, &sc, &e.0, &e.1)?;
        out.push((h, w2));
    }
    Ok(out)
}

/// Time-dependent coarse-grained drift of the overdamped coupled-quadratic
/// system under xi = q1, from the exact Gaussian law:
/// bhat(t, z) = z + c E[q2 | q1 = z] with the conditional mean of the
/// propagated Gaussian. Tabulated on a dense time grid and interpolated
/// linearly.
pub fn overdamped_hat_closure(
    entry: &CatalogPotential,
    beta: f64,
    mean0: &[f64],
    cov0: &Mat,
    t_end: f64,
    dt: f64,
) -> Result<ScalarTimeClosure> {
    let h = entry
        .quadratic_hessian()
        .ok_or_else(|| Error::Numerical("hat closure needs a quadratic entry".into()))?;
    let c = h[(0, 1)];
    let sys = LinearSde::overdamped(&h, beta);
    let n = (t_end / dt).ceil() as usize;
    let t_grid: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let moments = propagate_moments(&sys, mean0, cov0, &t_grid)?;
    let mut slopes = Vec::with_capacity(moments.len());
    let mut intercepts = Vec::with_capacity(moments.len());
    for (m, s) in &moments {
        let k = s[(0, 1)] / s[(0, 0)];
        slopes.push(1.0 + c * k);
        intercepts.push(c * (m[1] - k * m[0]));
    }
    let dt_grid = dt;
    let n_tab = slopes.len();
    Ok(ScalarTimeClosure::new(
        move |t: f64, z: f64| {
            let pos = (t / dt_grid).clamp(0.0, (n_tab - 1) as f64);
            let i = (pos.floor() as usize).min(n_tab - 2);
            let w = pos - i as f64;
            let slope = slopes[i] * (1.0 - w) + slopes[i + 1] * w;
            let icpt = intercepts[i] * (1.0 - w) + intercepts[i + 1] * w;
            icpt + slope * z
        },
        |_t, _z| 1.0,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_ou_variance() {
        // M = 1, Q = 2, S0 = 0: S(t) = 1 - e^{-2t}; S(1) = 0.8647.
        let sys = LinearSde::new(Mat::from_vec(1, 1, vec![1.0]), Mat::from_vec(1, 1, vec![2.0]))
            .unwrap();
        let out = propagate_moments(&sys, &[0.0], &Mat::zeros(1, 1), &[0.5, 1.0]).unwrap();
        for (t, (_, s)) in [0.5_f64, 1.0].iter().zip(&out) {
            let expect = 1.0 - (-2.0 * t).exp();
            assert!((s[(0, 0)] - expect).abs() < 1e-9, "S({t}) = {}", s[(0, 0)]);
        }
        assert!((out[1].1[(0, 0)] - 0.864_664_716_763_387_3).abs() < 1e-9);
        let stat = stationary_covariance(&sys).unwrap();
        assert!((stat[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn langevin_gibbs_stationary() {
        // V = q^2/2, gamma = beta = 1: stationary covariance Id_2.
        let sys = LinearSde::langevin(&Mat::identity(1), 1.0, 1.0);
        let s = stationary_covariance(&sys).unwrap();
        assert!((s[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((s[(1, 1)] - 1.0).abs() < 1e-12);
        assert!(s[(0, 1)].abs() < 1e-12);
        // And the propagation relaxes to it.
        let out = propagate_moments(&sys, &[1.0, 0.0], &Mat::identity(2).scale(0.3), &[45.0])
            .unwrap();
        assert!(out[0].1.sub(&s).max_abs() < 1e-8);
        assert!(linalg::norm(&out[0].0) < 1e-8);
    }

    #[test]
    fn gibbs_covariance_block_structure() {
        // Stationary Lyapunov solution = diag(H^{-1}/beta, Id/beta) for every
        // catalog quadratic.
        for (c, eps, beta, gamma) in [(0.5, 0.1, 1.0, 1.0), (0.25, 0.2, 2.0, 0.5)] {
            let entry = CatalogPotential::CoupledQuadratic { c, epsilon: eps };
            let h = entry.quadratic_hessian().unwrap();
            let sys = LinearSde::langevin(&h, gamma, beta);
            let s = stationary_covariance(&sys).unwrap();
            let hinv = linalg::inverse(&h).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((s[(i, j)] - hinv[(i, j)] / beta).abs() < 1e-10);
                    let expect = if i == j { 1.0 / beta } else { 0.0 };
                    assert!((s[(2 + i, 2 + j)] - expect).abs() < 1e-10);
                    assert!(s[(i, 2 + j)].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn separable_entry_has_exact_closure() {
        // c = 0: the two laws coincide, H = W2 = 0 for all t.
        let scen = LangevinScenario {
            entry: CatalogPotential::CoupledQuadratic { c: 0.0, epsilon: 0.1 },
            gamma: 1.0,
            beta: 1.0,
            mean0: vec![1.0, 0.0, 0.5, 0.0],
            cov0: Mat::diag(&[0.3, 0.1, 0.4, 0.2]),
        };
        let out = langevin_reference_suite(&scen, &[0.2, 0.6, 1.0]).unwrap();
        for (h, w) in out {
            assert!(h < 1e-9, "H = {h}");
            assert!(w < 1e-6, "W2 = {w}");
        }
    }

    #[test]
    fn coupling_error_monotone_in_c() {
        // H(t) decreases to 0 as the coupling c decreases, uniformly on the
        // grid.
        let t_grid: Vec<f64> = (1..=10).map(|i| 0.1 * i as f64).collect();
        let mut sup_prev = f64::INFINITY;
        for &c in &[0.5, 0.25, 0.1] {
            let scen = LangevinScenario {
                entry: CatalogPotential::CoupledQuadratic { c, epsilon: 0.1 },
                gamma: 1.0,
                beta: 1.0,
                mean0: vec![1.0, -0.05 * c, 0.0, 0.0],
                cov0: Mat::diag(&[0.25, 0.05, 0.5, 0.5]),
            };
            let out = langevin_reference_suite(&scen, &t_grid).unwrap();
            let sup = out.iter().map(|p| p.0).fold(0.0, f64::max);
            assert!(sup < sup_prev, "sup H not monotone in c");
            sup_prev = sup;
        }
        assert!(sup_prev < 0.01, "c = 0.1 already nearly exact: {sup_prev}");
    }

    #[test]
    fn divergent_system_detected() {
        let sys = LinearSde::new(
            Mat::from_vec(1, 1, vec![-1.0]),
            Mat::from_vec(1, 1, vec![2.0]),
        )
        .unwrap();
        let err = propagate_moments(&sys, &[1.0], &Mat::identity(1), &[40.0]);
        assert!(matches!(err, Err(Error::Divergent)));
    }
}
