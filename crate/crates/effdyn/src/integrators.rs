//! Time stepping for the five SDE systems: full overdamped, full Langevin,
//! effective dynamics in both regimes, coarse-grained-by-closure, and the
//! synchronously coupled pair whose mean squared separation upper-bounds the
//! Wasserstein-2 distance.

use crate::closure::{CoarseClosure, TimeClosure};
use crate::linalg::{self, Mat};
use crate::model::Potential;
use crate::rng::{SeedLineage, StreamRng};
use crate::{Error, Result};

/// Coordinate magnitude beyond which a trajectory is declared blown up.
pub const BLOWUP_LIMIT: f64 = 1e8;

/// Drift b(z, v) of the effective Langevin system.
pub type PhaseDrift<'a> = &'a dyn Fn(&[f64], &[f64]) -> Vec<f64>;

#[derive(Debug, Clone)]
pub struct SdeConfig {
    pub h: f64,
    pub t_end: f64,
    pub beta: f64,
    /// Langevin friction (mass is 1 throughout).
    pub gamma: f64,
}

impl SdeConfig {
    pub fn new(h: f64, t_end: f64, beta: f64, gamma: f64) -> Result<Self> {
        if h <= 0.0 || h > t_end {
            return Err(Error::Numerical("need 0 < h <= t_end".into()));
        }
        if beta <= 0.0 || gamma <= 0.0 {
            return Err(Error::Numerical("beta and gamma must be positive".into()));
        }
        Ok(SdeConfig { h, t_end, beta, gamma })
    }

    /// Stability guard h * L <= 0.5 for an estimated drift Lipschitz
    /// constant L.
    pub fn check_stiffness(&self, drift_lipschitz: f64) -> Result<()> {
        if self.h * drift_lipschitz > 0.5 {
            return Err(Error::CflViolation { dt: self.h, max_dt: 0.5 / drift_lipschitz });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.h).round().max(1.0) as usize
    }
}

fn check_finite(x: &[f64], t: f64) -> Result<()> {
    for &v in x {
        if !v.is_finite() || v.abs() > BLOWUP_LIMIT {
            return Err(Error::BlowUp { t, limit: BLOWUP_LIMIT });
        }
    }
    Ok(())
}

/// One Euler-Maruyama step of dX = -grad V dt + sqrt(2/beta) dW.
pub fn step_overdamped_em(
    q: &mut [f64],
    pot: &Potential,
    cfg: &SdeConfig,
    noise: &[f64],
) -> Result<()> {
    let g = pot.gradient(q);
    let amp = (2.0 * cfg.h / cfg.beta).sqrt();
    for i in 0..q.len() {
        q[i] += -g[i] * cfg.h + amp * noise[i];
    }
    check_finite(q, cfg.h)
}

/// One BAOAB step of the Langevin equation with exact Ornstein-Uhlenbeck
/// friction-noise substep.
pub fn step_langevin_baoab(
    q: &mut [f64],
    p: &mut [f64],
    pot: &Potential,
    cfg: &SdeConfig,
    noise: &[f64],
) -> Result<()> {
    let h = cfg.h;
    let half = 0.5 * h;
    let g = pot.gradient(q);
    for i in 0..p.len() {
        p[i] -= half * g[i];
    }
    for i in 0..q.len() {
        q[i] += half * p[i];
    }
    let decay = (-cfg.gamma * h).exp();
    let amp = ((1.0 - decay * decay) / cfg.beta).sqrt();
    for i in 0..p.len() {
        p[i] = decay * p[i] + amp * noise[i];
    }
    for i in 0..q.len() {
        q[i] += half * p[i];
    }
    let g = pot.gradient(q);
    for i in 0..p.len() {
        p[i] -= half * g[i];
    }
    check_finite(q, h)?;
    check_finite(p, h)
}

/// One Euler-Maruyama step of the effective dynamics
/// dZ = -b(Z) dt + sqrt(2/beta) A(Z)^{1/2} dW, with the symmetric PSD
/// square root of the interpolated mobility.
pub fn step_effective(
    z: &mut [f64],
    closure: &dyn CoarseClosure,
    cfg: &SdeConfig,
    noise: &[f64],
) -> Result<()> {
    let b = closure.drift(z)?;
    let a = closure.diffusion(z)?;
    let root = linalg::sqrt_psd(&a, 0.0);
    let kick = root.matvec(noise);
    let amp = (2.0 * cfg.h / cfg.beta).sqrt();
    for i in 0..z.len() {
        z[i] += -b[i] * cfg.h + amp * kick[i];
    }
    check_finite(z, cfg.h)
}

/// One BAOAB step of the effective Langevin dynamics
/// dZ = V dt, dV = -b(Z, V) dt - gamma V dt + sqrt(2 gamma / beta) A^{1/2} dW
/// with constant A = T T^T.
pub fn step_effective_langevin(
    z: &mut [f64],
    v: &mut [f64],
    drift: PhaseDrift,
    a_root: &Mat,
    cfg: &SdeConfig,
    noise: &[f64],
) -> Result<()> {
    let h = cfg.h;
    let half = 0.5 * h;
    let b = drift(z, v);
    for i in 0..v.len() {
        v[i] -= half * b[i];
    }
    for i in 0..z.len() {
        z[i] += half * v[i];
    }
    let decay = (-cfg.gamma * h).exp();
    let amp = ((1.0 - decay * decay) / cfg.beta).sqrt();
    let kick = a_root.matvec(noise);
    for i in 0..v.len() {
        v[i] = decay * v[i] + amp * kick[i];
    }
    for i in 0..z.len() {
        z[i] += half * v[i];
    }
    let b = drift(z, v);
    for i in 0..v.len() {
        v[i] -= half * b[i];
    }
    check_finite(z, h)?;
    check_finite(v, h)
}

/// Mean squared separation of the synchronously coupled pair, per output
/// time, with standard errors and the fraction of aborted trajectories.
#[derive(Debug, Clone)]
pub struct PairSeparation {
    pub times: Vec<f64>,
    pub mean_sq: Vec<f64>,
    pub stderr: Vec<f64>,
    pub aborted_fraction: f64,
}

impl PairSeparation {
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "t,mean_sq_separation,stderr")?;
        for i in 0..self.times.len() {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", self.times[i], self.mean_sq[i], self.stderr[i])?;
        }
        Ok(())
    }
}

/// Per-trajectory initial data of the coupled pair.
pub enum PairInit {
    /// Every trajectory starts at the same two points.
    Fixed(Vec<f64>, Vec<f64>),
    /// Both components start at one shared Gaussian draw (the identity
    /// coupling of matched initial data).
    SharedGaussian { mean: Vec<f64>, cov_root: Mat },
}

impl PairInit {
    fn draw(&self, rng: &mut StreamRng) -> (Vec<f64>, Vec<f64>) {
        match self {
            PairInit::Fixed(a, b) => (a.clone(), b.clone()),
            PairInit::SharedGaussian { mean, cov_root } => {
                let z: Vec<f64> = (0..mean.len()).map(|_| rng.normal()).collect();
                let kick = cov_root.matvec(&z);
                let pt: Vec<f64> = mean.iter().zip(&kick).map(|(m, k)| m + k).collect();
                (pt.clone(), pt)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            PairInit::Fixed(a, _) => a.len(),
            PairInit::SharedGaussian { mean, .. } => mean.len(),
        }
    }
}

/// Drive the coarse-grained closure and the effective closure with the same
/// noise realization per step (the basic coupling) and record E|Z1 - Z2|^2
/// on the output grid. The result upper-bounds W2^2 of the two laws.
pub fn simulate_coupled_pair(
    init: &PairInit,
    closure_hat: &dyn TimeClosure,
    closure_eff: &dyn CoarseClosure,
    cfg: &SdeConfig,
    n_traj: usize,
    output_times: &[f64],
    lineage: SeedLineage,
) -> Result<PairSeparation> {
    let k = init.dim();
    let n_out = output_times.len();
    let mut sums = vec![0.0; n_out];
    let mut sums_sq = vec![0.0; n_out];
    let mut aborted = 0usize;
    let amp = (2.0 * cfg.h / cfg.beta).sqrt();
    for traj in 0..n_traj {
        let mut rng = StreamRng::new(
            lineage.substream(crate::rng::streams::COUPLED_PAIR + traj as u64),
        );
        let (mut z1, mut z2) = init.draw(&mut rng);
        let mut t = 0.0;
        let mut out_idx = 0usize;
        let mut ok = true;
        let mut record = |z1: &[f64], z2: &[f64], out_idx: &mut usize, t: f64, ok: bool| {
            while *out_idx < n_out && output_times[*out_idx] <= t + 1e-12 {
                if ok {
                    let d2: f64 =
                        z1.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum();
                    sums[*out_idx] += d2;
                    sums_sq[*out_idx] += d2 * d2;
                }
                *out_idx += 1;
            }
        };
        record(&z1, &z2, &mut out_idx, t, ok);
        let steps = cfg.n_steps();
        for _ in 0..steps {
            let noise: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
            if ok {
                let step_result = (|| -> Result<()> {
                    let b1 = closure_hat.drift(t, &z1)?;
                    let a1 = closure_hat.diffusion(t, &z1)?;
                    let r1 = linalg::sqrt_psd(&a1, 0.0);
                    let k1 = r1.matvec(&noise);
                    let b2 = closure_eff.drift(&z2)?;
                    let a2 = closure_eff.diffusion(&z2)?;
                    let r2 = linalg::sqrt_psd(&a2, 0.0);
                    let k2 = r2.matvec(&noise);
                    for i in 0..k {
                        z1[i] += -b1[i] * cfg.h + amp * k1[i];
                        z2[i] += -b2[i] * cfg.h + amp * k2[i];
                    }
                    check_finite(&z1, t)?;
                    check_finite(&z2, t)
                })();
                if step_result.is_err() {
                    ok = false;
                    aborted += 1;
                }
            }
            t += cfg.h;
            record(&z1, &z2, &mut out_idx, t, ok);
        }
    }
    let n_eff = (n_traj - aborted).max(1) as f64;
    let mean_sq: Vec<f64> = sums.iter().map(|s| s / n_eff).collect();
    let stderr: Vec<f64> = sums_sq
        .iter()
        .zip(&mean_sq)
        .map(|(ssq, m)| ((ssq / n_eff - m * m).max(0.0) / n_eff).sqrt())
        .collect();
    Ok(PairSeparation {
        times: output_times.to_vec(),
        mean_sq,
        stderr,
        aborted_fraction: aborted as f64 / n_traj as f64,
    })
}

/// Per-time mean and covariance of an ensemble of trajectories.
#[derive(Debug, Clone)]
pub struct MomentTrack {
    pub times: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub cov: Vec<Mat>,
    pub aborted_fraction: f64,
}

impl MomentTrack {
    /// Trajectory summary rows: time, mean and variance per component.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let d = self.mean[0].len();
        let mut header = vec!["t".to_string()];
        header.extend((1..=d).map(|i| format!("mean{i}")));
        header.extend((1..=d).map(|i| format!("var{i}")));
        writeln!(w, "{}", header.join(","))?;
        for i in 0..self.times.len() {
            let mut row = vec![format!("{:.17e}", self.times[i])];
            row.extend(self.mean[i].iter().map(|x| format!("{x:.17e}")));
            row.extend((0..d).map(|j| format!("{:.17e}", self.cov[i][(j, j)])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Integrate an ensemble of full Langevin trajectories from Gaussian initial
/// data and track moments at the output times.
#[allow(clippy::too_many_arguments)]
pub fn langevin_ensemble_moments(
    pot: &Potential,
    cfg: &SdeConfig,
    mean0: &[f64],
    cov0: &Mat,
    n_traj: usize,
    output_times: &[f64],
    lineage: SeedLineage,
) -> Result<MomentTrack> {
    let d = pot.dim;
    let root0 = linalg::sqrt_psd(cov0, 0.0);
    ensemble_moments_impl(2 * d, n_traj, output_times, cfg, lineage, |state, rng| {
        // Initial draw: state = (q, p) from N(mean0, cov0) in 2d dims.
        let z: Vec<f64> = (0..2 * d).map(|_| rng.normal()).collect();
        let kick = root0.matvec(&z);
        for i in 0..2 * d {
            state[i] = mean0[i] + kick[i];
        }
    }, |state, rng, cfg| {
        let (q, p) = state.split_at_mut(d);
        let noise: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        step_langevin_baoab(q, p, pot, cfg, &noise)
    })
}

/// Integrate an ensemble of effective Langevin trajectories (constant A).
#[allow(clippy::too_many_arguments)]
pub fn effective_langevin_ensemble_moments(
    drift: PhaseDrift,
    a: &Mat,
    k: usize,
    cfg: &SdeConfig,
    mean0: &[f64],
    cov0: &Mat,
    n_traj: usize,
    output_times: &[f64],
    lineage: SeedLineage,
) -> Result<MomentTrack> {
    let root0 = linalg::sqrt_psd(cov0, 0.0);
    let a_root = linalg::sqrt_psd(a, 0.0);
    ensemble_moments_impl(2 * k, n_traj, output_times, cfg, lineage, |state, rng| {
        let z: Vec<f64> = (0..2 * k).map(|_| rng.normal()).collect();
        let kick = root0.matvec(&z);
        for i in 0..2 * k {
            state[i] = mean0[i] + kick[i];
        }
    }, |state, rng, cfg| {
        let (z, v) = state.split_at_mut(k);
        let noise: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
        step_effective_langevin(z, v, drift, &a_root, cfg, &noise)
    })
}

fn ensemble_moments_impl(
    dim: usize,
    n_traj: usize,
    output_times: &[f64],
    cfg: &SdeConfig,
    lineage: SeedLineage,
    init: impl Fn(&mut [f64], &mut StreamRng),
    step: impl Fn(&mut [f64], &mut StreamRng, &SdeConfig) -> Result<()>,
) -> Result<MomentTrack> {
    let n_out = output_times.len();
    let mut sums = vec![vec![0.0; dim]; n_out];
    let mut prods = vec![Mat::zeros(dim, dim); n_out];
    let mut aborted = 0usize;
    for traj in 0..n_traj {
        let mut rng = StreamRng::new(
            lineage.substream(crate::rng::streams::TRAJECTORY_BASE + traj as u64),
        );
        let mut state = vec![0.0; dim];
        init(&mut state, &mut rng);
        let mut t = 0.0;
        let mut out_idx = 0usize;
        let mut ok = true;
        let mut record = |state: &[f64], out_idx: &mut usize, t: f64, ok: bool| {
            while *out_idx < n_out && output_times[*out_idx] <= t + 1e-12 {
                if ok {
                    for i in 0..dim {
                        sums[*out_idx][i] += state[i];
                        for j in 0..dim {
                            prods[*out_idx][(i, j)] += state[i] * state[j];
                        }
                    }
                }
                *out_idx += 1;
            }
        };
        record(&state, &mut out_idx, t, ok);
        for _ in 0..cfg.n_steps() {
            if ok && step(&mut state, &mut rng, cfg).is_err() {
                ok = false;
                aborted += 1;
            }
            t += cfg.h;
            record(&state, &mut out_idx, t, ok);
        }
    }
    let n_eff = (n_traj - aborted).max(1) as f64;
    let mut means = Vec::with_capacity(n_out);
    let mut covs = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let mean: Vec<f64> = sums[i].iter().map(|s| s / n_eff).collect();
        let mut cov = Mat::zeros(dim, dim);
        for a in 0..dim {
            for b in 0..dim {
                cov[(a, b)] = prods[i][(a, b)] / n_eff - mean[a] * mean[b];
            }
        }
        means.push(mean);
        covs.push(cov);
    }
    Ok(MomentTrack {
        times: output_times.to_vec(),
        mean: means,
        cov: covs,
        aborted_fraction: aborted as f64 / n_traj as f64,
    })
}
