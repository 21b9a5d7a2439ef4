//! Potentials, Gibbs measures and coarse-graining maps with exact
//! derivatives, plus the validators that check them against the structural
//! assumptions the error bounds rely on.

pub mod catalog;
pub mod expr;

use std::sync::Arc;

use crate::linalg::{self, Mat};
use crate::rng::StreamRng;
use crate::{Error, Result};

pub use catalog::{AnalyticEffective, CatalogPotential};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> Mat + Send + Sync>;
type TensorFn = Arc<dyn Fn(&[f64]) -> Vec<Mat> + Send + Sync>;

/// Reciprocal-condition-number threshold below which G = Dxi Dxi^T is
/// treated as degenerate.
pub const DEGENERATE_G_RCOND: f64 = 1e-10;

/// Scale-separation metadata: V = V0/epsilon + V1.
#[derive(Clone)]
pub struct ScaleSplit {
    pub epsilon: f64,
    pub v0: ScalarFn,
    pub v1: ScalarFn,
    pub grad_v0: VectorFn,
    /// Uniform convexity constant of V0 along the fibers.
    pub delta: f64,
}

/// A scalar potential with exact gradient and Hessian callbacks.
#[derive(Clone)]
pub struct Potential {
    pub dim: usize,
    eval: ScalarFn,
    grad: VectorFn,
    hess: MatrixFn,
    pub scale_split: Option<ScaleSplit>,
    /// User-declared growth constant C with |V| <= C(1+|q|^2),
    /// |grad V| <= C(1+|q|), |D^2 V| <= C.
    pub growth_certificate: Option<f64>,
}

impl Potential {
    pub fn new(
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> Mat + Send + Sync + 'static,
    ) -> Self {
        Potential {
            dim,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            hess: Arc::new(hess),
            scale_split: None,
            growth_certificate: None,
        }
    }

    /// Build a potential from the expression grammar; derivatives are exact
    /// via forward-mode duals.
    pub fn from_expr(src: &str, dim: usize) -> Result<Self> {
        let ast = expr::parse(src, dim)?;
        let a1 = ast.clone();
        let a2 = ast.clone();
        Ok(Potential::new(
            dim,
            move |q| ast.value(q),
            move |q| a1.gradient(q),
            move |q| a2.hessian(q),
        ))
    }

    pub fn with_scale_split(mut self, split: ScaleSplit) -> Self {
        self.scale_split = Some(split);
        self
    }

    pub fn with_growth_certificate(mut self, c: f64) -> Self {
        self.growth_certificate = Some(c);
        self
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.eval)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (self.grad)(q)
    }

    pub fn hessian(&self, q: &[f64]) -> Mat {
        (self.hess)(q)
    }
}

/// Affine specialization xi(q) = T q + tau.
#[derive(Clone, Debug)]
pub struct AffineMap {
    pub t: Mat,
    pub tau: Vec<f64>,
}

/// A coarse-graining map xi: R^d -> R^k with exact derivative callbacks.
#[derive(Clone)]
pub struct CoarseMap {
    pub d: usize,
    pub k: usize,
    xi: VectorFn,
    jac: MatrixFn,
    hess: TensorFn,
    lap: VectorFn,
    pub affine: Option<AffineMap>,
}

impl CoarseMap {
    pub fn new(
        d: usize,
        k: usize,
        xi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jac: impl Fn(&[f64]) -> Mat + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> Vec<Mat> + Send + Sync + 'static,
    ) -> Self {
        assert!(k < d, "coarse dimension must be smaller than full dimension");
        let hess_for_lap = Arc::new(hess);
        let hess2 = hess_for_lap.clone();
        let lap = move |q: &[f64]| -> Vec<f64> {
            hess2(q).iter().map(|h| h.trace()).collect()
        };
        CoarseMap {
            d,
            k,
            xi: Arc::new(xi),
            jac: Arc::new(jac),
            hess: hess_for_lap,
            lap: Arc::new(lap),
            affine: None,
        }
    }

    /// xi(q) = T q + tau with T of full row rank.
    pub fn affine(t: Mat, tau: Vec<f64>) -> Self {
        let k = t.rows();
        let d = t.cols();
        assert_eq!(tau.len(), k);
        let g = t.matmul(&t.transpose());
        assert!(
            linalg::rcond_sym(&g) > DEGENERATE_G_RCOND,
            "affine map matrix must have full row rank"
        );
        let t1 = t.clone();
        let tau1 = tau.clone();
        let t2 = t.clone();
        let mut map = CoarseMap::new(
            d,
            k,
            move |q| {
                let mut z = t1.matvec(q);
                for (zi, ti) in z.iter_mut().zip(&tau1) {
                    *zi += ti;
                }
                z
            },
            move |_q| t2.clone(),
            move |_q| vec![Mat::zeros(d, d); k],
        );
        map.affine = Some(AffineMap { t, tau });
        map
    }

    /// The coordinate projection onto the first k components.
    pub fn coordinate(d: usize, k: usize) -> Self {
        let mut t = Mat::zeros(k, d);
        for i in 0..k {
            t[(i, i)] = 1.0;
        }
        CoarseMap::affine(t, vec![0.0; k])
    }

    pub fn xi(&self, q: &[f64]) -> Vec<f64> {
        (self.xi)(q)
    }

    pub fn jacobian(&self, q: &[f64]) -> Mat {
        (self.jac)(q)
    }

    pub fn hessian(&self, q: &[f64]) -> Vec<Mat> {
        (self.hess)(q)
    }

    pub fn laplacian(&self, q: &[f64]) -> Vec<f64> {
        (self.lap)(q)
    }

    /// Metric tensor G = Dxi Dxi^T.
    pub fn metric(&self, q: &[f64]) -> Mat {
        let j = self.jacobian(q);
        j.matmul(&j.transpose())
    }

    /// Jacobian determinant sqrt(det G).
    pub fn jac_det(&self, q: &[f64]) -> f64 {
        linalg::det(&self.metric(q)).max(0.0).sqrt()
    }

    /// An orthonormal basis of ker T for affine maps, as columns of a
    /// d x (d-k) matrix. Fibers are q* + (ker T) so this parametrizes them.
    pub fn kernel_basis(&self) -> Option<Mat> {
        let aff = self.affine.as_ref()?;
        Some(kernel_basis_of(&aff.t))
    }

    /// A particular solution of T q + tau = z (minimum norm).
    pub fn fiber_anchor(&self, z: &[f64]) -> Option<Vec<f64>> {
        let aff = self.affine.as_ref()?;
        let g = aff.t.matmul(&aff.t.transpose());
        let rhs: Vec<f64> = z.iter().zip(&aff.tau).map(|(zi, ti)| zi - ti).collect();
        let y = linalg::solve(&g, &rhs)?;
        Some(aff.t.transpose().matvec(&y))
    }
}

/// Orthonormal basis of the null space of a full-row-rank k x d matrix,
/// by Gram-Schmidt against the row space.
pub fn kernel_basis_of(t: &Mat) -> Mat {
    let k = t.rows();
    let d = t.cols();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    // Orthonormalize the rows first.
    for i in 0..k {
        let mut v: Vec<f64> = t.row(i).to_vec();
        for b in &basis {
            let c = linalg::dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = linalg::norm(&v);
        assert!(n > 1e-12, "rank-deficient map matrix");
        basis.push(v.iter().map(|x| x / n).collect());
    }
    // Extend with axis vectors to a full basis; the tail spans ker T.
    let mut kernel: Vec<Vec<f64>> = Vec::new();
    for axis in 0..d {
        if basis.len() + kernel.len() == d {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for b in basis.iter().chain(kernel.iter()) {
            let c = linalg::dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= c * bi;
            }
        }
        let n = linalg::norm(&v);
        if n > 1e-8 {
            kernel.push(v.iter().map(|x| x / n).collect());
        }
    }
    assert_eq!(kernel.len(), d - k);
    let mut out = Mat::zeros(d, d - k);
    for (j, col) in kernel.iter().enumerate() {
        for i in 0..d {
            out[(i, j)] = col[i];
        }
    }
    out
}

/// Gibbs measure Z^{-1} exp(-beta V) on a declared box.
#[derive(Clone)]
pub struct GibbsMeasure {
    pub potential: Potential,
    pub beta: f64,
    /// Declared domain, one (lo, hi) per dimension.
    pub domain: Vec<(f64, f64)>,
}

impl GibbsMeasure {
    pub fn new(potential: Potential, beta: f64, domain: Vec<(f64, f64)>) -> Self {
        assert!(beta > 0.0, "inverse temperature must be positive");
        assert_eq!(domain.len(), potential.dim);
        GibbsMeasure { potential, beta, domain }
    }

    pub fn log_density_unnormalized(&self, q: &[f64]) -> f64 {
        -self.beta * self.potential.value(q)
    }

    /// log Z by midpoint quadrature over the declared box, refined until two
    /// successive resolutions agree. Also serves as the integrability check:
    /// an error is returned when refinement fails to settle.
    pub fn log_z(&self) -> Result<f64> {
        let dim = self.potential.dim;
        if dim > 2 {
            return Err(Error::Numerical("quadrature normalization capped at d <= 2".into()));
        }
        let mut prev = f64::NAN;
        for level in [64usize, 128, 256, 512] {
            let v = self.quad_z(level);
            if prev.is_finite() && (v - prev).abs() <= 1e-8 * prev.abs() {
                return Ok(v.ln());
            }
            prev = v;
        }
        let last = prev;
        let second = self.quad_z(1024);
        if (second - last).abs() <= 1e-6 * last.abs() {
            Ok(second.ln())
        } else {
            Err(Error::Numerical("Gibbs normalization quadrature did not converge".into()))
        }
    }

    fn quad_z(&self, n: usize) -> f64 {
        let dim = self.potential.dim;
        match dim {
            1 => {
                let (lo, hi) = self.domain[0];
                let h = (hi - lo) / n as f64;
                (0..n)
                    .map(|i| {
                        let q = [lo + (i as f64 + 0.5) * h];
                        (-self.beta * self.potential.value(&q)).exp() * h
                    })
                    .sum()
            }
            2 => {
                let (lo0, hi0) = self.domain[0];
                let (lo1, hi1) = self.domain[1];
                let h0 = (hi0 - lo0) / n as f64;
                let h1 = (hi1 - lo1) / n as f64;
                let mut s = 0.0;
                for i in 0..n {
                    let x = lo0 + (i as f64 + 0.5) * h0;
                    for j in 0..n {
                        let y = lo1 + (j as f64 + 0.5) * h1;
                        s += (-self.beta * self.potential.value(&[x, y])).exp();
                    }
                }
                s * h0 * h1
            }
            _ => unreachable!(),
        }
    }
}

/// Phase-space coarse-graining (q, p) -> (xi(q), Dxi(q) p), restricted to
/// affine base maps.
#[derive(Clone)]
pub struct PhaseMap {
    pub base: CoarseMap,
}

impl PhaseMap {
    pub fn new(base: CoarseMap) -> Result<Self> {
        if base.affine.is_none() {
            return Err(Error::NonAffinePhaseMap);
        }
        Ok(PhaseMap { base })
    }

    pub fn map(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let aff = self.base.affine.as_ref().expect("checked at construction");
        let z = self.base.xi(q);
        let v = aff.t.matvec(p);
        (z, v)
    }

    /// T T^T, the constant phase-space diffusion seed.
    pub fn ttt(&self) -> Mat {
        let t = &self.base.affine.as_ref().unwrap().t;
        t.matmul(&t.transpose())
    }
}

// --- operations --------------------------------------------------------------

/// The local mean force F = G^{-1} Dxi grad V - beta^{-1} div(G^{-1} Dxi).
///
/// The divergence term is assembled exactly from the map's second
/// derivatives; it vanishes identically for affine maps.
pub fn local_mean_force(
    pot: &Potential,
    map: &CoarseMap,
    beta: f64,
    q: &[f64],
) -> Result<Vec<f64>> {
    let jac = map.jacobian(q);
    let g = jac.matmul(&jac.transpose());
    let rc = linalg::rcond_sym(&g);
    if rc < DEGENERATE_G_RCOND {
        return Err(Error::DegenerateMap { rcond: rc, threshold: DEGENERATE_G_RCOND });
    }
    let g_inv = linalg::inverse(&g).ok_or(Error::DegenerateMap {
        rcond: rc,
        threshold: DEGENERATE_G_RCOND,
    })?;
    let grad_v = pot.gradient(q);
    let mut f = g_inv.matmul(&jac).matvec(&grad_v);

    if map.affine.is_none() {
        let div = div_ginv_jac(map, q, &jac, &g_inv);
        for (fi, di) in f.iter_mut().zip(&div) {
            *fi -= di / beta;
        }
    }
    Ok(f)
}

/// div(G^{-1} Dxi) in R^k, assembled from exact second derivatives:
/// d_j (G^{-1} Dxi) = -G^{-1} (d_j G) G^{-1} Dxi + G^{-1} d_j Dxi.
fn div_ginv_jac(map: &CoarseMap, q: &[f64], jac: &Mat, g_inv: &Mat) -> Vec<f64> {
    let d = map.d;
    let k = map.k;
    let hess = map.hessian(q); // hess[i] is the d x d Hessian of xi_i
    let mut out = vec![0.0; k];
    for j in 0..d {
        // dj_jac[(i, l)] = d_j d_l xi_i
        let mut dj_jac = Mat::zeros(k, d);
        for i in 0..k {
            for l in 0..d {
                dj_jac[(i, l)] = hess[i][(l, j)];
            }
        }
        let dj_g = {
            let a = dj_jac.matmul(&jac.transpose());
            let b = jac.matmul(&dj_jac.transpose());
            a.add(&b)
        };
        let term = g_inv
            .matmul(&dj_g)
            .matmul(g_inv)
            .matmul(jac)
            .scale(-1.0)
            .add(&g_inv.matmul(&dj_jac));
        for i in 0..k {
            out[i] += term[(i, j)];
        }
    }
    out
}

/// Diagnostic report of the affine-at-infinity check.
#[derive(Debug, Clone)]
pub struct AffinityReport {
    pub t_est: Mat,
    pub c_xi_est: f64,
    pub pass: bool,
    /// max |Dxi - T_est|_F over the sample directions, one entry per radius.
    pub residuals: Vec<f64>,
}

/// Estimate the limit matrix of Dxi at infinity and check that the deviation
/// from it does not grow with radius.
///
/// Directions are deterministic: all +-axis directions plus a fixed set of
/// pseudo-random ones, so reruns agree exactly.
pub fn check_affine_at_infinity(map: &CoarseMap, box_radii: &[f64]) -> AffinityReport {
    assert!(
        box_radii.windows(2).all(|w| w[0] < w[1]),
        "radii must be strictly increasing"
    );
    let d = map.d;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for axis in 0..d {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; d];
            v[axis] = sign;
            dirs.push(v);
        }
    }
    let mut rng = StreamRng::from_parts(0x5eed, crate::rng::streams::VALIDATION);
    for _ in 0..16 {
        dirs.push(rng.unit_vector(d));
    }

    // Entrywise median of Dxi over the largest radius estimates T.
    let r_max = *box_radii.last().unwrap();
    let jacs: Vec<Mat> = dirs
        .iter()
        .map(|u| map.jacobian(&linalg::scale_vec(u, r_max)))
        .collect();
    let k = map.k;
    let mut t_est = Mat::zeros(k, d);
    for i in 0..k {
        for j in 0..d {
            let mut vals: Vec<f64> = jacs.iter().map(|m| m[(i, j)]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = vals.len();
            t_est[(i, j)] = if n % 2 == 1 {
                vals[n / 2]
            } else {
                0.5 * (vals[n / 2 - 1] + vals[n / 2])
            };
        }
    }

    let mut residuals = Vec::with_capacity(box_radii.len());
    let mut c_xi_est = 0.0_f64;
    for &r in box_radii {
        let mut worst = 0.0_f64;
        for u in &dirs {
            let q = linalg::scale_vec(u, r);
            let dev = map.jacobian(&q).sub(&t_est).frobenius_norm();
            worst = worst.max(dev);
            c_xi_est = c_xi_est.max(dev * (1.0 + r));
        }
        residuals.push(worst);
    }
    let pass = residuals
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    AffinityReport { t_est, c_xi_est, pass, residuals }
}

/// Truncate a relative density f against the reference masses mu:
/// Z_M^{-1} min(max(f, 1/M), M), renormalized so that sum(mu * f) = 1.
pub fn truncate_density(f: &[f64], mu_mass: &[f64], m: f64) -> Result<Vec<f64>> {
    if m <= 1.0 {
        return Err(Error::BadTruncationLevel(m));
    }
    assert_eq!(f.len(), mu_mass.len());
    let clamped: Vec<f64> = f.iter().map(|&x| x.max(1.0 / m).min(m)).collect();
    let z: f64 = clamped.iter().zip(mu_mass).map(|(c, w)| c * w).sum();
    Ok(clamped.iter().map(|c| c / z).collect())
}

// --- validators ----------------------------------------------------------------

/// Relative-error agreement between exact derivative callbacks and centered
/// finite differences at sampled points of the box.
pub fn validate_potential(pot: &Potential, domain: &[(f64, f64)], n_samples: usize) -> Result<()> {
    let mut rng = StreamRng::from_parts(0x7a11, crate::rng::streams::VALIDATION);
    let d = pot.dim;
    for _ in 0..n_samples {
        let q: Vec<f64> = domain.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect();
        let g = pot.gradient(&q);
        let scale = 1.0 + linalg::norm(&g);
        for i in 0..d {
            let h = 1e-5 * (1.0 + q[i].abs());
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let fd = (pot.value(&qp) - pot.value(&qm)) / (2.0 * h);
            if (fd - g[i]).abs() > 1e-6 * scale.max(fd.abs()) {
                return Err(Error::Validation(format!(
                    "gradient component {i} disagrees with finite differences at {q:?}: {} vs {}",
                    g[i], fd
                )));
            }
        }
        let hs = pot.hessian(&q);
        let hscale = 1.0 + hs.max_abs();
        for i in 0..d {
            let h = 1e-5 * (1.0 + q[i].abs());
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let gp = pot.gradient(&qp);
            let gm = pot.gradient(&qm);
            for j in 0..d {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                if (fd - hs[(j, i)]).abs() > 1e-6 * hscale {
                    return Err(Error::Validation(format!(
                        "hessian entry ({j},{i}) disagrees with finite differences at {q:?}"
                    )));
                }
            }
        }
        if let Some(split) = &pot.scale_split {
            let lhs = pot.value(&q);
            let rhs = (split.v0)(&q) / split.epsilon + (split.v1)(&q);
            if (lhs - rhs).abs() > 1e-12 * (1.0 + lhs.abs()) {
                return Err(Error::Validation(format!(
                    "scale split V0/eps + V1 does not reproduce V at {q:?}"
                )));
            }
        }
    }
    // Growth certificates are checked on a much larger box (radius 1e3):
    // the declared constants assert global behaviour, not just the working
    // domain.
    if let Some(c) = pot.growth_certificate {
        let mut rng = StreamRng::from_parts(0x9c04, crate::rng::streams::VALIDATION);
        for _ in 0..n_samples {
            let q: Vec<f64> = (0..d).map(|_| rng.uniform_in(-1e3, 1e3)).collect();
            let q2 = linalg::dot(&q, &q);
            let g = pot.gradient(&q);
            if pot.value(&q).abs() > c * (1.0 + q2)
                || linalg::norm(&g) > c * (1.0 + q2.sqrt())
                || pot.hessian(&q).op_norm() > c
            {
                return Err(Error::Validation(format!(
                    "growth certificate C = {c} violated at radius {:.1}",
                    q2.sqrt()
                )));
            }
        }
    }
    Ok(())
}

/// Map validation report: ellipticity, derivative agreement, decay of the
/// second derivative.
#[derive(Debug, Clone)]
pub struct MapReport {
    pub min_metric_eigenvalue: f64,
    /// Fitted exponent p in |D^2 xi| ~ (1+|q|)^{-p} over the sampled box
    /// (0 for affine maps, where D^2 xi vanishes identically).
    pub hess_decay_exponent: f64,
    pub c3_constant: f64,
}

pub fn validate_map(
    map: &CoarseMap,
    domain: &[(f64, f64)],
    ellipticity_c: f64,
    n_samples: usize,
) -> Result<MapReport> {
    let mut rng = StreamRng::from_parts(0x7a12, crate::rng::streams::VALIDATION);
    let mut min_eig = f64::INFINITY;
    let mut decay_pts: Vec<(f64, f64)> = Vec::new();
    let mut c3 = 0.0_f64;
    for _ in 0..n_samples {
        let q: Vec<f64> = domain.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect();
        let jac = map.jacobian(&q);
        let g = jac.matmul(&jac.transpose());
        let (vals, _) = linalg::sym_eig(&g);
        let lam = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        min_eig = min_eig.min(lam);
        if lam < 1.0 / ellipticity_c {
            return Err(Error::Validation(format!(
                "metric eigenvalue {lam:.3e} below declared 1/C = {:.3e} at {q:?}",
                1.0 / ellipticity_c
            )));
        }
        if let Some(aff) = &map.affine {
            let z = map.xi(&q);
            let mut expect = aff.t.matvec(&q);
            for (e, t) in expect.iter_mut().zip(&aff.tau) {
                *e += t;
            }
            for (a, b) in z.iter().zip(&expect) {
                if (a - b).abs() > 1e-12 * (1.0 + b.abs()) {
                    return Err(Error::Validation("affine map does not equal T q + tau".into()));
                }
            }
        }
        // Jacobian against finite differences of xi.
        for i in 0..map.d {
            let h = 1e-5 * (1.0 + q[i].abs());
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let xp = map.xi(&qp);
            let xm = map.xi(&qm);
            for r in 0..map.k {
                let fd = (xp[r] - xm[r]) / (2.0 * h);
                if (fd - jac[(r, i)]).abs() > 1e-6 * (1.0 + fd.abs()) {
                    return Err(Error::Validation(format!(
                        "jacobian entry ({r},{i}) disagrees with finite differences"
                    )));
                }
            }
        }
        let hmag: f64 = map
            .hessian(&q)
            .iter()
            .map(|m| m.frobenius_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        let r = linalg::norm(&q);
        c3 = c3.max(hmag * (1.0 + r * r));
        if hmag > 1e-14 {
            decay_pts.push(((1.0 + r).ln(), hmag.ln()));
        }
    }
    // Least-squares slope of log |D^2 xi| against log(1+|q|).
    let hess_decay_exponent = if decay_pts.len() > 2 {
        let n = decay_pts.len() as f64;
        let sx: f64 = decay_pts.iter().map(|p| p.0).sum();
        let sy: f64 = decay_pts.iter().map(|p| p.1).sum();
        let sxx: f64 = decay_pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = decay_pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        if denom.abs() > 1e-12 {
            -(n * sxy - sx * sy) / denom
        } else {
            0.0
        }
    } else {
        0.0
    };
    Ok(MapReport { min_metric_eigenvalue: min_eig, hess_decay_exponent, c3_constant: c3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupled_quadratic(c: f64, eps: f64) -> Potential {
        catalog::CatalogPotential::CoupledQuadratic { c, epsilon: eps }.build()
    }

    #[test]
    fn local_mean_force_coupled_quadratic() {
        // V = q1^2/2 + q2^2/(2 eps) + c q1 q2, xi = q1: F = z + c y, with the
        // divergence term exactly zero.
        let pot = coupled_quadratic(0.5, 0.1);
        let map = CoarseMap::coordinate(2, 1);
        for (z, y) in [(0.3, -1.2), (1.0, 0.4), (-0.7, 2.0)] {
            let f = local_mean_force(&pot, &map, 1.0, &[z, y]).unwrap();
            assert!((f[0] - (z + 0.5 * y)).abs() < 1e-13);
        }
    }

    #[test]
    fn local_mean_force_affine_reduces_to_projected_gradient() {
        let t = Mat::from_rows(&[&[3.0, 4.0]]);
        let map = CoarseMap::affine(t, vec![0.5]);
        let pot = coupled_quadratic(0.25, 0.2);
        let q = [0.4, -0.9];
        let f = local_mean_force(&pot, &map, 2.0, &q).unwrap();
        let jac = map.jacobian(&q);
        let g = jac.matmul(&jac.transpose());
        let expect = linalg::inverse(&g).unwrap().matmul(&jac).matvec(&pot.gradient(&q));
        assert!((f[0] - expect[0]).abs() < 1e-13);
    }

    #[test]
    fn local_mean_force_scale_separation_independent_of_eps() {
        let map = CoarseMap::coordinate(2, 1);
        let q = [0.8, -0.3];
        let f1 = local_mean_force(&coupled_quadratic(0.5, 0.2), &map, 1.0, &q).unwrap();
        let f2 = local_mean_force(&coupled_quadratic(0.5, 0.05), &map, 1.0, &q).unwrap();
        assert!((f1[0] - f2[0]).abs() < 1e-14);
    }

    #[test]
    fn local_mean_force_nonlinear_divergence_term() {
        // xi(q) = q1 + a q2^2 in d = 2. Hand-computed:
        // G = 1 + 4 a^2 q2^2, div(G^{-1} Dxi) = d/dq2 (2 a q2 / G)
        //   = 2a/G - 16 a^3 q2^2 / G^2.
        let a = 0.3;
        let map = CoarseMap::new(
            2,
            1,
            move |q| vec![q[0] + a * q[1] * q[1]],
            move |q| Mat::from_rows(&[&[1.0, 2.0 * a * q[1]]]),
            move |_q| {
                let mut h = Mat::zeros(2, 2);
                h[(1, 1)] = 2.0 * a;
                vec![h]
            },
        );
        let pot = Potential::from_expr("q1^2/2 + q2^2/2", 2).unwrap();
        let beta = 2.0;
        let q = [0.5, 0.7];
        let f = local_mean_force(&pot, &map, beta, &q).unwrap();
        let g = 1.0 + 4.0 * a * a * q[1] * q[1];
        let proj = (q[0] + 2.0 * a * q[1] * q[1]) / g;
        let div = 2.0 * a / g - 16.0 * a.powi(3) * q[1] * q[1] / (g * g);
        assert!((f[0] - (proj - div / beta)).abs() < 1e-12, "{} vs {}", f[0], proj - div / beta);

        // Independent check: div(G^{-1} Dxi) by centered finite differences.
        let entry = |p: &[f64], j: usize| {
            let jac = map.jacobian(p);
            let gm = jac.matmul(&jac.transpose());
            linalg::inverse(&gm).unwrap().matmul(&jac)[(0, j)]
        };
        let h = 1e-6;
        let mut div_fd = 0.0;
        for j in 0..2 {
            let mut qp = q.to_vec();
            let mut qm = q.to_vec();
            qp[j] += h;
            qm[j] -= h;
            div_fd += (entry(&qp, j) - entry(&qm, j)) / (2.0 * h);
        }
        assert!((div - div_fd).abs() < 1e-7, "analytic {div} vs fd {div_fd}");
    }

    #[test]
    fn degenerate_metric_rejected() {
        let map = CoarseMap::new(
            2,
            1,
            |q| vec![q[0] * q[0] / 2.0],
            |q| Mat::from_rows(&[&[q[0], 0.0]]),
            |_q| {
                let mut h = Mat::zeros(2, 2);
                h[(0, 0)] = 1.0;
                vec![h]
            },
        );
        let pot = Potential::from_expr("q1^2/2 + q2^2/2", 2).unwrap();
        let err = local_mean_force(&pot, &map, 1.0, &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::DegenerateMap { .. }));
    }

    #[test]
    fn affine_at_infinity_exact_affine() {
        let map = CoarseMap::affine(Mat::from_rows(&[&[1.0, 2.0]]), vec![0.3]);
        let rep = check_affine_at_infinity(&map, &[1.0, 10.0, 100.0]);
        assert!(rep.pass);
        assert!(rep.c_xi_est < 1e-12);
        assert!((rep.t_est[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((rep.t_est[(0, 1)] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn affine_at_infinity_tanh_passes() {
        let map = CoarseMap::new(
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
        let rep = check_affine_at_infinity(&map, &[2.0, 8.0, 32.0, 128.0]);
        assert!(rep.pass, "residuals {:?}", rep.residuals);
        assert!((rep.t_est[(0, 0)] - 1.0).abs() < 1e-9);
        assert!(rep.t_est[(0, 1)].abs() < 1e-3, "t_est {:?}", rep.t_est);
        assert!(rep.c_xi_est.is_finite());
    }

    #[test]
    fn affine_at_infinity_quadratic_fails() {
        let map = CoarseMap::new(
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
        let rep = check_affine_at_infinity(&map, &[2.0, 8.0, 32.0]);
        assert!(!rep.pass, "residuals {:?}", rep.residuals);
    }

    #[test]
    fn truncate_density_cases() {
        // Already bounded: untouched.
        let f = vec![1.0; 4];
        let mu = vec![0.25; 4];
        let out = truncate_density(&f, &mu, 10.0).unwrap();
        assert!(out.iter().all(|&x| (x - 1.0).abs() < 1e-15));

        // Two-valued {0, 2} on equal-mass halves, M = 4: Z_M = 9/8.
        let f = vec![0.0, 0.0, 2.0, 2.0];
        let out = truncate_density(&f, &mu, 4.0).unwrap();
        let z = 9.0 / 8.0;
        assert!((out[0] - 0.25 / z).abs() < 1e-15);
        assert!((out[2] - 2.0 / z).abs() < 1e-15);
        let mass: f64 = out.iter().zip(&mu).map(|(a, b)| a * b).sum();
        assert!((mass - 1.0).abs() < 1e-15);

        // Large M leaves a bounded density alone.
        let f = vec![0.5, 1.5, 1.0, 1.0];
        let out = truncate_density(&f, &mu, 1e12).unwrap();
        for (a, b) in out.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }

        assert!(matches!(truncate_density(&f, &mu, 1.0), Err(Error::BadTruncationLevel(_))));
    }

    #[test]
    fn phase_map_rejects_nonlinear_base() {
        let nl = CoarseMap::new(
            2,
            1,
            |q| vec![q[0] + q[1] * q[1]],
            |q| Mat::from_rows(&[&[1.0, 2.0 * q[1]]]),
            |_q| {
                let mut h = Mat::zeros(2, 2);
                h[(1, 1)] = 2.0;
                vec![h]
            },
        );
        assert!(matches!(PhaseMap::new(nl), Err(Error::NonAffinePhaseMap)));
        let ok = PhaseMap::new(CoarseMap::coordinate(2, 1)).unwrap();
        let (z, v) = ok.map(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(z, vec![1.0]);
        assert_eq!(v, vec![3.0]);
    }

    #[test]
    fn validators_accept_catalog() {
        let pot = coupled_quadratic(0.5, 0.1);
        validate_potential(&pot, &[(-3.0, 3.0), (-1.0, 1.0)], 40).unwrap();
        let map = CoarseMap::coordinate(2, 1);
        let rep = validate_map(&map, &[(-3.0, 3.0), (-1.0, 1.0)], 2.0, 40).unwrap();
        assert!(rep.min_metric_eigenvalue >= 1.0 - 1e-12);
        assert_eq!(rep.hess_decay_exponent, 0.0);
    }

    #[test]
    fn gibbs_log_z_matches_gaussian() {
        let pot = Potential::from_expr("q1^2/2", 1).unwrap();
        let m = GibbsMeasure::new(pot, 1.0, vec![(-12.0, 12.0)]);
        let log_z = m.log_z().unwrap();
        assert!((log_z - (std::f64::consts::TAU).sqrt().ln()).abs() < 1e-7);
    }
}
