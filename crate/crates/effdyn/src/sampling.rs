//! Reproducible sampling from Gibbs measures, their coarse marginals, and
//! conditional measures on level sets.
//!
//! The workhorse is a Metropolis-adjusted Langevin chain with dual-averaging
//! step-size adaptation. Conditional sampling runs the same chain inside an
//! orthonormal parametrization of the fiber when the map is affine (exact),
//! and falls back to filtering unconditional samples into a thin bin
//! otherwise (biased at order bin_width, recorded in the result).

use crate::linalg::{self, Mat};
use crate::model::{CoarseMap, GibbsMeasure, PhaseMap};
use crate::rng::{SeedLineage, StreamRng};
use crate::{Error, Result};

/// N weighted particles in configuration (or phase) space.
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub dim: usize,
    /// Flat n x dim storage.
    pub points: Vec<f64>,
    /// Present exactly for phase-space ensembles.
    pub momenta: Option<Vec<f64>>,
    pub time: f64,
    pub lineage: SeedLineage,
}

impl Ensemble {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn momentum(&self, i: usize) -> Option<&[f64]> {
        self.momenta.as_ref().map(|m| &m[i * self.dim..(i + 1) * self.dim])
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.len() as f64;
        let mut m = vec![0.0; self.dim];
        for i in 0..self.len() {
            for (mj, xj) in m.iter_mut().zip(self.point(i)) {
                *mj += xj / n;
            }
        }
        m
    }

    pub fn covariance(&self) -> Mat {
        let n = self.len() as f64;
        let mean = self.mean();
        let mut c = Mat::zeros(self.dim, self.dim);
        for i in 0..self.len() {
            let p = self.point(i);
            for a in 0..self.dim {
                for b in 0..self.dim {
                    c[(a, b)] += (p[a] - mean[a]) * (p[b] - mean[b]) / n;
                }
            }
        }
        c
    }

    /// One row per particle, columns q1..qd[,p1..pd].
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let mut header: Vec<String> = (1..=self.dim).map(|i| format!("q{i}")).collect();
        if self.momenta.is_some() {
            header.extend((1..=self.dim).map(|i| format!("p{i}")));
        }
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|x| format!("{x:.17e}")).collect();
            if let Some(p) = self.momentum(i) {
                row.extend(p.iter().map(|x| format!("{x:.17e}")));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// JSON sidecar carrying the seed lineage and chain diagnostics.
    pub fn write_sidecar_json(
        &self,
        diag: Option<&ChainDiagnostics>,
        w: &mut impl std::io::Write,
    ) -> std::io::Result<()> {
        write!(
            w,
            "{{\"n\": {}, \"dim\": {}, \"time\": {:.17e}, \"seed\": {}, \"stream\": {}",
            self.len(),
            self.dim,
            self.time,
            self.lineage.seed,
            self.lineage.stream
        )?;
        if let Some(d) = diag {
            write!(
                w,
                ", \"acceptance\": {:.6}, \"adapted_step\": {:.8e}",
                d.acceptance, d.adapted_step
            )?;
        }
        writeln!(w, "}}")
    }
}

/// MALA chain configuration.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    /// Initial step size (adapted during burn-in).
    pub step: f64,
    pub burn_in: usize,
    pub thin: usize,
    pub target_accept: f64,
    /// Bin width override for binned conditional sampling; the default is
    /// 0.05 x the observed coarse range.
    pub bin_width: Option<f64>,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { step: 0.1, burn_in: 10_000, thin: 1, target_accept: 0.57, bin_width: None }
    }
}

#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    pub acceptance: f64,
    pub adapted_step: f64,
}

/// Metropolis-adjusted Langevin chain for log-density `logp` with gradient
/// `grad_logp`. Returns `n` thinned post-burn-in states and diagnostics.
fn mala_chain(
    dim: usize,
    logp: &dyn Fn(&[f64]) -> f64,
    grad_logp: &dyn Fn(&[f64]) -> Vec<f64>,
    x0: Vec<f64>,
    n: usize,
    cfg: &ChainConfig,
    rng: &mut StreamRng,
) -> Result<(Vec<f64>, ChainDiagnostics)> {
    let mut x = x0;
    let mut lp = logp(&x);
    let mut gl = grad_logp(&x);

    // Dual averaging (Nesterov-style) on log step size during burn-in.
    let mut log_step = cfg.step.ln();
    let mu = (10.0 * cfg.step).ln();
    let mut h_bar = 0.0;
    let mut log_step_bar = log_step;
    let (gamma, t0, kappa) = (0.05, 10.0, 0.75);

    let mut out = Vec::with_capacity(n * dim);
    let mut accepted = 0usize;
    let mut proposals = 0usize;
    let total = cfg.burn_in + n * cfg.thin;
    for iter in 0..total {
        let adapting = iter < cfg.burn_in;
        let h = if adapting { log_step.exp() } else { log_step_bar.exp() };
        // Proposal y = x + h grad log p + sqrt(2h) xi.
        let mut y = vec![0.0; dim];
        for i in 0..dim {
            y[i] = x[i] + h * gl[i] + (2.0 * h).sqrt() * rng.normal();
        }
        let lp_y = logp(&y);
        let gl_y = grad_logp(&y);
        let mut fwd = 0.0;
        let mut bwd = 0.0;
        for i in 0..dim {
            let df = y[i] - x[i] - h * gl[i];
            fwd += df * df;
            let db = x[i] - y[i] - h * gl_y[i];
            bwd += db * db;
        }
        let log_alpha = (lp_y - lp + (fwd - bwd) / (4.0 * h)).min(0.0);
        let accept = log_alpha >= 0.0 || rng.uniform().ln() < log_alpha;
        if accept {
            x = y;
            lp = lp_y;
            gl = gl_y;
        }
        if adapting {
            let m = (iter + 1) as f64;
            let alpha = log_alpha.exp().min(1.0);
            h_bar = (1.0 - 1.0 / (m + t0)) * h_bar + (cfg.target_accept - alpha) / (m + t0);
            log_step = mu - m.sqrt() / gamma * h_bar;
            let eta = m.powf(-kappa);
            log_step_bar = eta * log_step + (1.0 - eta) * log_step_bar;
        } else {
            proposals += 1;
            if accept {
                accepted += 1;
            }
            if (iter - cfg.burn_in) % cfg.thin == cfg.thin - 1 {
                out.extend_from_slice(&x);
            }
        }
    }
    let acceptance = if proposals > 0 { accepted as f64 / proposals as f64 } else { 1.0 };
    if !(0.1..=0.9).contains(&acceptance) {
        return Err(Error::ChainTuning { rate: acceptance });
    }
    Ok((out, ChainDiagnostics { acceptance, adapted_step: log_step_bar.exp() }))
}

/// Draw n samples from the Gibbs measure by MALA. Deterministic for a fixed
/// lineage.
pub fn sample_gibbs(
    m: &GibbsMeasure,
    n: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<(Ensemble, ChainDiagnostics)> {
    assert!(n >= 1);
    let beta = m.beta;
    let pot = m.potential.clone();
    let pot2 = m.potential.clone();
    let logp = move |q: &[f64]| -beta * pot.value(q);
    let grad = move |q: &[f64]| linalg::scale_vec(&pot2.gradient(q), -beta);
    let x0: Vec<f64> = m.domain.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let mut rng = StreamRng::new(lineage);
    let (points, diag) = mala_chain(m.potential.dim, &logp, &grad, x0, n, cfg, &mut rng)?;
    Ok((
        Ensemble { dim: m.potential.dim, points, momenta: None, time: 0.0, lineage },
        diag,
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub enum CondMethod {
    ExactFiber,
    Binned { bin_width: f64 },
}

/// Samples on (or near) the fiber {xi = z}.
#[derive(Debug, Clone)]
pub struct ConditionalSample {
    pub z: Vec<f64>,
    pub dim: usize,
    /// Flat n x dim storage (n x 2 dim for phase-space samples).
    pub points: Vec<f64>,
    pub method: CondMethod,
    pub lineage: SeedLineage,
}

impl ConditionalSample {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }
}

/// Sample the conditional Gibbs measure on the fiber {xi = z}.
///
/// Affine maps run the chain in an orthonormal basis of ker T anchored at
/// the minimum-norm solution of T q + tau = z, so every sample satisfies
/// xi(q) = z to machine precision. Non-affine maps filter unconditional
/// samples into a bin of width `bin_width` around z.
pub fn sample_conditional(
    m: &GibbsMeasure,
    map: &CoarseMap,
    z: &[f64],
    n: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<ConditionalSample> {
    assert_eq!(z.len(), map.k);
    if map.affine.is_some() {
        let (points, _diag) = fiber_chain(m, map, z, n, cfg, lineage)?;
        Ok(ConditionalSample {
            z: z.to_vec(),
            dim: map.d,
            points,
            method: CondMethod::ExactFiber,
            lineage,
        })
    } else {
        // Oversample the Gibbs measure and keep what lands in the bin.
        let n_gibbs = (n * 50).max(20_000);
        let (ens, _diag) = sample_gibbs(m, n_gibbs, cfg, lineage)?;
        let xi_vals: Vec<Vec<f64>> = (0..ens.len()).map(|i| map.xi(ens.point(i))).collect();
        let bin_width = cfg.bin_width.unwrap_or_else(|| {
            let mut lo = vec![f64::INFINITY; map.k];
            let mut hi = vec![f64::NEG_INFINITY; map.k];
            for xv in &xi_vals {
                for c in 0..map.k {
                    lo[c] = lo[c].min(xv[c]);
                    hi[c] = hi[c].max(xv[c]);
                }
            }
            let range = (0..map.k).map(|c| hi[c] - lo[c]).fold(0.0_f64, f64::max);
            0.05 * range
        });
        let mut points = Vec::new();
        let mut kept = 0usize;
        for (i, xv) in xi_vals.iter().enumerate() {
            let dist = linalg::norm(&linalg::sub_vec(xv, z));
            if dist <= bin_width / 2.0 {
                points.extend_from_slice(ens.point(i));
                kept += 1;
                if kept == n {
                    break;
                }
            }
        }
        if kept < 100 {
            return Err(Error::InsufficientOccupancy { got: kept, need: 100 });
        }
        Ok(ConditionalSample {
            z: z.to_vec(),
            dim: map.d,
            points,
            method: CondMethod::Binned { bin_width },
            lineage,
        })
    }
}

/// MALA on the fiber parametrized by an orthonormal kernel basis.
fn fiber_chain(
    m: &GibbsMeasure,
    map: &CoarseMap,
    z: &[f64],
    n: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<(Vec<f64>, ChainDiagnostics)> {
    let anchor = map.fiber_anchor(z).expect("affine map");
    let kernel = map.kernel_basis().expect("affine map");
    fiber_chain_with_basis(m, &anchor, &kernel, n, cfg, lineage)
}

fn embed_fiber(y: &[f64], anchor: &[f64], kernel: &Mat) -> Vec<f64> {
    let mut q = anchor.to_vec();
    for j in 0..kernel.cols() {
        for i in 0..kernel.rows() {
            q[i] += kernel[(i, j)] * y[j];
        }
    }
    q
}

/// The same chain with a caller-supplied fiber basis (used to check basis
/// invariance).
pub fn fiber_chain_with_basis(
    m: &GibbsMeasure,
    anchor: &[f64],
    kernel: &Mat,
    n: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<(Vec<f64>, ChainDiagnostics)> {
    let d = m.potential.dim;
    let fiber_dim = kernel.cols();
    let beta = m.beta;

    let pot = m.potential.clone();
    let anchor_lp = anchor.to_vec();
    let kernel_lp = kernel.clone();
    let logp = move |y: &[f64]| -beta * pot.value(&embed_fiber(y, &anchor_lp, &kernel_lp));

    let pot2 = m.potential.clone();
    let anchor_gl = anchor.to_vec();
    let kernel_gl = kernel.clone();
    let grad = move |y: &[f64]| {
        let q = embed_fiber(y, &anchor_gl, &kernel_gl);
        let g = pot2.gradient(&q);
        (0..fiber_dim)
            .map(|j| {
                let mut s = 0.0;
                for i in 0..kernel_gl.rows() {
                    s += kernel_gl[(i, j)] * g[i];
                }
                -beta * s
            })
            .collect()
    };

    let mut rng = StreamRng::new(lineage);
    let (ys, diag) = mala_chain(fiber_dim, &logp, &grad, vec![0.0; fiber_dim], n, cfg, &mut rng)?;
    let mut points = Vec::with_capacity(n * d);
    for chunk in ys.chunks(fiber_dim) {
        points.extend_from_slice(&embed_fiber(chunk, anchor, kernel));
    }
    Ok((points, diag))
}

/// Sample the phase-space conditional measure on the level set of
/// Xi(q, p) = (z, v). The position fiber runs a MALA chain; the momentum
/// fiber is an exact Gaussian draw.
pub fn sample_phase_conditional(
    m: &GibbsMeasure,
    phase_map: &PhaseMap,
    z: &[f64],
    v: &[f64],
    n: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<ConditionalSample> {
    let map = &phase_map.base;
    let d = map.d;
    let q_fiber = sample_conditional(m, map, z, n, cfg, lineage)?;
    let kernel = map.kernel_basis().expect("affine map");
    // Momentum anchor: minimum-norm solution of T p = v.
    let aff = map.affine.as_ref().unwrap();
    let g = aff.t.matmul(&aff.t.transpose());
    let y = linalg::solve(&g, v).expect("full-rank map");
    let p_anchor = aff.t.transpose().matvec(&y);
    let sigma = (1.0 / m.beta).sqrt();
    let mut rng = StreamRng::new(lineage.substream(7));
    let mut points = Vec::with_capacity(n * 2 * d);
    for i in 0..n {
        points.extend_from_slice(q_fiber.point(i));
        let mut p = p_anchor.clone();
        for j in 0..kernel.cols() {
            let xi = rng.normal() * sigma;
            for r in 0..d {
                p[r] += kernel[(r, j)] * xi;
            }
        }
        points.extend_from_slice(&p);
    }
    Ok(ConditionalSample {
        z: z.iter().chain(v.iter()).cloned().collect(),
        dim: 2 * d,
        points,
        method: q_fiber.method.clone(),
        lineage,
    })
}
