//! Built-in parametric potentials. Catalog entries carry enough structure
//! for closed-form effective coefficients and functional-inequality
//! constants, which the test oracles and analytic pipelines rely on.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Potential, ScaleSplit};
use crate::linalg::Mat;
use crate::{Error, Result};

/// A named potential family with parameters.
///
/// All two-dimensional entries pair with the coordinate map xi = q1; the
/// second coordinate is the fast one.
#[derive(Debug, Clone, PartialEq)]
pub enum CatalogPotential {
    /// V = 1/2 q^T H q for a symmetric positive definite H.
    Quadratic { hessian: Mat },
    /// V = q1^2/2 + q2^2/(2 eps) + c q1 q2.
    CoupledQuadratic { c: f64, epsilon: f64 },
    /// V = a (q1^2 - 1)^2 + q2^2/(2 eps); separable, double well in the slow
    /// coordinate.
    DoubleWellFast { a: f64, epsilon: f64 },
    /// User expression over q1..qd.
    Expr { src: String, dim: usize },
}

impl CatalogPotential {
    /// Look up an entry by name and parameter map (the experiment-config
    /// addressing scheme).
    pub fn from_config(name: &str, params: &BTreeMap<String, String>) -> Result<Self> {
        let get = |key: &str| -> Result<f64> {
            params
                .get(key)
                .ok_or_else(|| Error::Config {
                    path: format!("physics.{key}"),
                    message: "missing parameter".into(),
                })?
                .parse::<f64>()
                .map_err(|_| Error::Config {
                    path: format!("physics.{key}"),
                    message: "not a number".into(),
                })
        };
        match name {
            "coupled_quadratic" => Ok(CatalogPotential::CoupledQuadratic {
                c: get("c")?,
                epsilon: get("epsilon")?,
            }),
            "double_well_fast" => Ok(CatalogPotential::DoubleWellFast {
                a: get("a")?,
                epsilon: get("epsilon")?,
            }),
            "quadratic" => {
                let h11 = get("h11")?;
                let h12 = get("h12")?;
                let h22 = get("h22")?;
                Ok(CatalogPotential::Quadratic {
                    hessian: Mat::from_rows(&[&[h11, h12], &[h12, h22]]),
                })
            }
            "expr" => {
                let src = params.get("src").ok_or_else(|| Error::Config {
                    path: "physics.src".into(),
                    message: "missing expression".into(),
                })?;
                let dim = get("dim")? as usize;
                Ok(CatalogPotential::Expr { src: src.clone(), dim })
            }
            other => Err(Error::Config {
                path: "physics.potential".into(),
                message: format!("unknown catalog entry '{other}'"),
            }),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CatalogPotential::Quadratic { hessian } => hessian.rows(),
            CatalogPotential::CoupledQuadratic { .. } => 2,
            CatalogPotential::DoubleWellFast { .. } => 2,
            CatalogPotential::Expr { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Potential {
        match self {
            CatalogPotential::Quadratic { hessian } => {
                let h = hessian.clone();
                let h1 = hessian.clone();
                let h2 = hessian.clone();
                let d = h.rows();
                Potential::new(
                    d,
                    move |q| 0.5 * crate::linalg::dot(q, &h.matvec(q)),
                    move |q| h1.matvec(q),
                    move |_q| h2.clone(),
                )
            }
            CatalogPotential::CoupledQuadratic { c, epsilon } => {
                let (c, eps) = (*c, *epsilon);
                let pot = Potential::new(
                    2,
                    move |q| 0.5 * q[0] * q[0] + 0.5 * q[1] * q[1] / eps + c * q[0] * q[1],
                    move |q| vec![q[0] + c * q[1], q[1] / eps + c * q[0]],
                    move |_q| Mat::from_rows(&[&[1.0, c], &[c, 1.0 / eps]]),
                );
                pot.with_scale_split(ScaleSplit {
                    epsilon: eps,
                    v0: Arc::new(|q: &[f64]| 0.5 * q[1] * q[1]),
                    v1: Arc::new(move |q: &[f64]| 0.5 * q[0] * q[0] + c * q[0] * q[1]),
                    grad_v0: Arc::new(|q: &[f64]| vec![0.0, q[1]]),
                    delta: 1.0,
                })
                .with_growth_certificate(2.0_f64.max(1.0 / eps) + c.abs())
            }
            CatalogPotential::DoubleWellFast { a, epsilon } => {
                let (a, eps) = (*a, *epsilon);
                let pot = Potential::new(
                    2,
                    move |q| {
                        let w = q[0] * q[0] - 1.0;
                        a * w * w + 0.5 * q[1] * q[1] / eps
                    },
                    move |q| vec![4.0 * a * q[0] * (q[0] * q[0] - 1.0), q[1] / eps],
                    move |q| {
                        Mat::from_rows(&[
                            &[4.0 * a * (3.0 * q[0] * q[0] - 1.0), 0.0],
                            &[0.0, 1.0 / eps],
                        ])
                    },
                );
                pot.with_scale_split(ScaleSplit {
                    epsilon: eps,
                    v0: Arc::new(|q: &[f64]| 0.5 * q[1] * q[1]),
                    v1: Arc::new(move |q: &[f64]| {
                        let w = q[0] * q[0] - 1.0;
                        a * w * w
                    }),
                    grad_v0: Arc::new(|q: &[f64]| vec![0.0, q[1]]),
                    delta: 1.0,
                })
            }
            CatalogPotential::Expr { src, dim } => {
                Potential::from_expr(src, *dim).expect("catalog expression must parse")
            }
        }
    }

    /// Full-space Hessian when the entry is a quadratic form (the Gaussian
    /// oracle needs it).
    pub fn quadratic_hessian(&self) -> Option<Mat> {
        match self {
            CatalogPotential::Quadratic { hessian } => Some(hessian.clone()),
            CatalogPotential::CoupledQuadratic { c, epsilon } => {
                Some(Mat::from_rows(&[&[1.0, *c], &[*c, 1.0 / epsilon]]))
            }
            _ => None,
        }
    }

    /// Hessian of the full potential along the fiber of xi = q1 (the fast
    /// block), constant for all catalog entries.
    pub fn fiber_hessian(&self) -> Option<f64> {
        match self {
            CatalogPotential::Quadratic { hessian } => Some(hessian[(1, 1)]),
            CatalogPotential::CoupledQuadratic { epsilon, .. } => Some(1.0 / epsilon),
            CatalogPotential::DoubleWellFast { epsilon, .. } => Some(1.0 / epsilon),
            CatalogPotential::Expr { .. } => None,
        }
    }

    /// Cross term d^2 V / dq1 dq2, which controls the fiber variation of the
    /// local mean force under the coordinate map.
    pub fn coupling(&self) -> Option<f64> {
        match self {
            CatalogPotential::Quadratic { hessian } => Some(hessian[(0, 1)]),
            CatalogPotential::CoupledQuadratic { c, .. } => Some(*c),
            CatalogPotential::DoubleWellFast { .. } => Some(0.0),
            CatalogPotential::Expr { .. } => None,
        }
    }

    /// Closed-form effective dynamics under xi = q1, when available.
    pub fn analytic_effective(&self, beta: f64) -> Option<AnalyticEffective> {
        match self {
            CatalogPotential::Expr { .. } => None,
            _ => Some(AnalyticEffective { entry: self.clone(), beta }),
        }
    }
}

/// Closed-form effective coefficients and marginal data for a catalog entry
/// under the coordinate map xi = q1. The coarse diffusion is identically 1.
#[derive(Debug, Clone)]
pub struct AnalyticEffective {
    pub entry: CatalogPotential,
    pub beta: f64,
}

impl AnalyticEffective {
    /// Effective drift b(z) = E[dV/dq1 | q1 = z] under the Gibbs conditional.
    pub fn drift(&self, z: f64) -> f64 {
        match &self.entry {
            CatalogPotential::Quadratic { hessian } => {
                (hessian[(0, 0)] - hessian[(0, 1)] * hessian[(0, 1)] / hessian[(1, 1)]) * z
            }
            CatalogPotential::CoupledQuadratic { c, epsilon } => (1.0 - c * c * epsilon) * z,
            CatalogPotential::DoubleWellFast { a, .. } => 4.0 * a * z * (z * z - 1.0),
            CatalogPotential::Expr { .. } => unreachable!(),
        }
    }

    /// A(z) = E[Dxi Dxi^T | z] = 1 for the coordinate map.
    pub fn diffusion(&self) -> f64 {
        1.0
    }

    /// d/dz log mu_hat(z). By the gradient-flow identity this is -beta b(z)
    /// for unit diffusion.
    pub fn log_mu_hat_grad(&self, z: f64) -> f64 {
        -self.beta * self.drift(z)
    }

    pub fn log_mu_hat_unnormalized(&self, z: f64) -> f64 {
        match &self.entry {
            CatalogPotential::Quadratic { .. } | CatalogPotential::CoupledQuadratic { .. } => {
                let slope = self.drift(1.0);
                -0.5 * self.beta * slope * z * z
            }
            CatalogPotential::DoubleWellFast { a, .. } => {
                let w = z * z - 1.0;
                -self.beta * a * w * w
            }
            CatalogPotential::Expr { .. } => unreachable!(),
        }
    }

    /// Variance of mu_hat when the marginal is Gaussian.
    pub fn mu_hat_variance(&self) -> Option<f64> {
        match &self.entry {
            CatalogPotential::Quadratic { .. } | CatalogPotential::CoupledQuadratic { .. } => {
                let slope = self.drift(1.0);
                Some(1.0 / (self.beta * slope))
            }
            _ => None,
        }
    }

    /// Gaussian conditional of q2 given q1 = z: (mean, variance).
    pub fn fiber_gaussian(&self, z: f64) -> Option<(f64, f64)> {
        match &self.entry {
            CatalogPotential::Quadratic { hessian } => {
                Some((-hessian[(0, 1)] / hessian[(1, 1)] * z, 1.0 / (self.beta * hessian[(1, 1)])))
            }
            CatalogPotential::CoupledQuadratic { c, epsilon } => {
                Some((-c * epsilon * z, epsilon / self.beta))
            }
            CatalogPotential::DoubleWellFast { epsilon, .. } => {
                Some((0.0, epsilon / self.beta))
            }
            CatalogPotential::Expr { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coupled_quadratic_scale_split_is_orthogonal() {
        // Dxi grad V0 = 0 for the coordinate map: grad V0 has no q1 component.
        let pot = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 }.build();
        let split = pot.scale_split.as_ref().unwrap();
        for q in [[0.3, -0.8], [1.5, 2.0]] {
            let g0 = (split.grad_v0)(&q);
            assert_eq!(g0[0], 0.0);
            let direct = pot.value(&q);
            let recomposed = (split.v0)(&q) / split.epsilon + (split.v1)(&q);
            assert!((direct - recomposed).abs() < 1e-14);
        }
    }

    #[test]
    fn analytic_drift_matches_conditional_expectation() {
        // b(z) = (1 - c^2 eps) z; at c = 0.5, eps = 0.1, z = 1: 0.975.
        let eff = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 }
            .analytic_effective(1.0)
            .unwrap();
        assert!((eff.drift(1.0) - 0.975).abs() < 1e-15);
        let (mean, var) = eff.fiber_gaussian(1.0).unwrap();
        assert!((mean + 0.05).abs() < 1e-15);
        assert!((var - 0.1).abs() < 1e-15);
        assert!((eff.mu_hat_variance().unwrap() - 1.0 / 0.975).abs() < 1e-12);
    }

    #[test]
    fn from_config_round_trip() {
        let mut params = BTreeMap::new();
        params.insert("c".to_string(), "0.25".to_string());
        params.insert("epsilon".to_string(), "0.2".to_string());
        let entry = CatalogPotential::from_config("coupled_quadratic", &params).unwrap();
        assert_eq!(entry, CatalogPotential::CoupledQuadratic { c: 0.25, epsilon: 0.2 });
        let err = CatalogPotential::from_config("coupled_quadratic", &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
    }
}
