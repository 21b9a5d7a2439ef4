//! Divergences and distances between laws: relative entropy, Wasserstein-2,
//! relative Fisher information (plain and mobility-weighted), and the
//! Gaussian closed forms used as oracles.

use crate::fpgrid::{Grid1, GridDensity1, GridDensity2};
use crate::linalg::{self, Mat};
use crate::rng::StreamRng;
use crate::{Error, Result};

/// Relative entropy is +infinity when absolute continuity fails; sweeps
/// record that as data rather than an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelEnt {
    Finite(f64),
    Infinite,
}

impl RelEnt {
    pub fn value(&self) -> f64 {
        match self {
            RelEnt::Finite(v) => *v,
            RelEnt::Infinite => f64::INFINITY,
        }
    }

    pub fn expect_finite(&self) -> f64 {
        match self {
            RelEnt::Finite(v) => *v,
            RelEnt::Infinite => panic!("relative entropy is infinite"),
        }
    }
}

/// Sum of zeta log(zeta/nu) over cells, with the 0 log 0 = 0 convention.
pub fn relative_entropy_masses(zeta: &[f64], nu: &[f64]) -> RelEnt {
    debug_assert_eq!(zeta.len(), nu.len());
    let mut h = 0.0;
    for (&z, &n) in zeta.iter().zip(nu) {
        if z <= 0.0 {
            continue;
        }
        if n <= 0.0 {
            return RelEnt::Infinite;
        }
        h += z * (z / n).ln();
    }
    RelEnt::Finite(h.max(0.0))
}

pub fn relative_entropy_1d(zeta: &GridDensity1, nu: &GridDensity1) -> Result<RelEnt> {
    if zeta.grid != nu.grid {
        return Err(Error::GridMismatch);
    }
    Ok(relative_entropy_masses(&zeta.mass, &nu.mass))
}

pub fn relative_entropy_2d(zeta: &GridDensity2, nu: &GridDensity2) -> Result<RelEnt> {
    if zeta.grid != nu.grid {
        return Err(Error::GridMismatch);
    }
    Ok(relative_entropy_masses(&zeta.mass, &nu.mass))
}

/// Exact 1D Wasserstein-2 distance between two atomic measures, by merging
/// the quantile functions. Positions need not be sorted.
pub fn wasserstein2_atoms(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut a: Vec<(f64, f64)> = a.iter().filter(|p| p.1 > 0.0).cloned().collect();
    let mut b: Vec<(f64, f64)> = b.iter().filter(|p| p.1 > 0.0).cloned().collect();
    a.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    b.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let wa: f64 = a.iter().map(|p| p.1).sum();
    let wb: f64 = b.iter().map(|p| p.1).sum();
    let (mut i, mut j) = (0usize, 0usize);
    let (mut ua, mut ub) = (0.0f64, 0.0f64);
    let mut acc = 0.0;
    let mut u = 0.0;
    while i < a.len() && j < b.len() {
        let next_a = ua + a[i].1 / wa;
        let next_b = ub + b[j].1 / wb;
        let next = next_a.min(next_b);
        let du = (next - u).max(0.0);
        let d = a[i].0 - b[j].0;
        acc += du * d * d;
        u = next;
        if next_a <= next_b + 1e-15 {
            ua = next_a;
            i += 1;
        }
        if next_b <= next_a + 1e-15 {
            ub = next_b;
            j += 1;
        }
    }
    acc.max(0.0).sqrt()
}

/// Exact 1D Wasserstein-2 between grid densities (atoms at cell centers).
pub fn wasserstein2_1d_grid(zeta: &GridDensity1, nu: &GridDensity1) -> f64 {
    let a: Vec<(f64, f64)> =
        (0..zeta.grid.n).map(|i| (zeta.grid.center(i), zeta.mass[i])).collect();
    let b: Vec<(f64, f64)> = (0..nu.grid.n).map(|i| (nu.grid.center(i), nu.mass[i])).collect();
    wasserstein2_atoms(&a, &b)
}

/// Exact 1D Wasserstein-2 between sample sets (equal weights).
pub fn wasserstein2_1d_samples(xs: &[f64], ys: &[f64]) -> f64 {
    let a: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0)).collect();
    let b: Vec<(f64, f64)> = ys.iter().map(|&y| (y, 1.0)).collect();
    wasserstein2_atoms(&a, &b)
}

/// Exact Wasserstein-2 between equal-size point clouds in R^2 by optimal
/// assignment (Hungarian algorithm on squared distances). Capped at 512
/// points; larger inputs should use [`sliced_wasserstein2`].
pub fn wasserstein2_2d_samples(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::WassersteinShape("equal sample sizes required for exact assignment"));
    }
    if a.len() > 512 {
        return Err(Error::WassersteinShape("exact 2D assignment capped at 512 points"));
    }
    let n = a.len();
    let mut cost = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let dx = a[i][0] - b[j][0];
            let dy = a[i][1] - b[j][1];
            cost[i * n + j] = dx * dx + dy * dy;
        }
    }
    let total = assignment_cost(&cost, n);
    Ok((total / n as f64).sqrt())
}

/// Minimum-cost perfect assignment (Jonker-Volgenant style shortest
/// augmenting paths), returning the total cost.
fn assignment_cost(cost: &[f64], n: usize) -> f64 {
    // Potentials and matching; 1-based sentinel row 0.
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1]; // column -> row match (0 = free)
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=n {
        total += cost[(p[j] - 1) * n + (j - 1)];
    }
    total
}

/// Sliced Wasserstein-2 between point clouds in R^d: average of squared 1D
/// distances over random projection directions. Returns (distance, slices).
pub fn sliced_wasserstein2(
    a: &[Vec<f64>],
    b: &[Vec<f64>],
    n_slices: usize,
    rng: &mut StreamRng,
) -> (f64, usize) {
    let d = a[0].len();
    let mut acc = 0.0;
    for _ in 0..n_slices {
        let dir = rng.unit_vector(d);
        let xs: Vec<f64> = a.iter().map(|p| linalg::dot(p, &dir)).collect();
        let ys: Vec<f64> = b.iter().map(|p| linalg::dot(p, &dir)).collect();
        let w = wasserstein2_1d_samples(&xs, &ys);
        acc += w * w;
    }
    // E[(e.x)^2] = |x|^2 / d for a random unit vector e, hence the d factor.
    let w = ((acc / n_slices as f64) * d as f64).sqrt();
    (w, n_slices)
}

/// Relative Fisher information on a 1D grid with an optional scalar mobility
/// weight A(z): sum zeta |d/dz log(zeta/nu)|^2_A with centered differences
/// over interior cells where both densities are positive.
pub fn fisher_information_1d(
    zeta: &GridDensity1,
    nu: &GridDensity1,
    weight: Option<&dyn Fn(f64) -> f64>,
) -> Result<f64> {
    if zeta.grid != nu.grid {
        return Err(Error::GridMismatch);
    }
    let g = &zeta.grid;
    let mut total = 0.0;
    for i in 1..g.n - 1 {
        let ok = zeta.mass[i - 1] > 0.0
            && zeta.mass[i + 1] > 0.0
            && nu.mass[i - 1] > 0.0
            && nu.mass[i + 1] > 0.0;
        if !ok || zeta.mass[i] <= 0.0 {
            continue;
        }
        let ratio_p = zeta.mass[i + 1] / nu.mass[i + 1];
        let ratio_m = zeta.mass[i - 1] / nu.mass[i - 1];
        let grad = (ratio_p.ln() - ratio_m.ln()) / (2.0 * g.h);
        let a = weight.map_or(1.0, |f| f(g.center(i)));
        total += zeta.mass[i] * a * grad * grad;
    }
    Ok(total)
}

/// Relative Fisher information on a 2D grid (identity weight).
pub fn fisher_information_2d(zeta: &GridDensity2, nu: &GridDensity2) -> Result<f64> {
    if zeta.grid != nu.grid {
        return Err(Error::GridMismatch);
    }
    let g = &zeta.grid;
    let (nx, ny) = (g.x.n, g.y.n);
    let lr = |zm: f64, nm: f64| (zm / nm).ln();
    let mut total = 0.0;
    for ix in 1..nx - 1 {
        for iy in 1..ny - 1 {
            let c = g.idx(ix, iy);
            if zeta.mass[c] <= 0.0 {
                continue;
            }
            let xs = [g.idx(ix - 1, iy), g.idx(ix + 1, iy)];
            let ysn = [g.idx(ix, iy - 1), g.idx(ix, iy + 1)];
            let all_pos = xs
                .iter()
                .chain(ysn.iter())
                .all(|&j| zeta.mass[j] > 0.0 && nu.mass[j] > 0.0);
            if !all_pos {
                continue;
            }
            let gx = (lr(zeta.mass[xs[1]], nu.mass[xs[1]]) - lr(zeta.mass[xs[0]], nu.mass[xs[0]]))
                / (2.0 * g.x.h);
            let gy = (lr(zeta.mass[ysn[1]], nu.mass[ysn[1]])
                - lr(zeta.mass[ysn[0]], nu.mass[ysn[0]]))
                / (2.0 * g.y.h);
            total += zeta.mass[c] * (gx * gx + gy * gy);
        }
    }
    Ok(total)
}

/// Closed-form relative entropy and Wasserstein-2 distance between
/// Gaussians. Returns (H(N1 | N2), W2(N1, N2)).
pub fn gaussian_divergences(
    m1: &[f64],
    s1: &Mat,
    m2: &[f64],
    s2: &Mat,
) -> Result<(f64, f64)> {
    let d = m1.len();
    for s in [s1, s2] {
        let (vals, _) = linalg::sym_eig(s);
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            return Err(Error::NotPsd { min_eig: min });
        }
    }
    let s2_inv = linalg::inverse(s2).ok_or(Error::NotPsd { min_eig: 0.0 })?;
    let diff = linalg::sub_vec(m2, m1);
    let mahal = linalg::dot(&diff, &s2_inv.matvec(&diff));
    let h = 0.5
        * (s2_inv.matmul(s1).trace() - d as f64
            + mahal
            + (linalg::det(s2) / linalg::det(s1)).ln());

    let s2_half = linalg::sqrt_psd(s2, 0.0);
    let inner = s2_half.matmul(s1).matmul(&s2_half);
    let cross = linalg::sqrt_psd(&inner, 0.0);
    let w2sq = linalg::dot(&diff, &diff) + s1.trace() + s2.trace() - 2.0 * cross.trace();
    Ok((h.max(0.0), w2sq.max(0.0).sqrt()))
}

/// Closed-form relative Fisher information I(N1 | N2) (identity weight).
pub fn gaussian_fisher(m1: &[f64], s1: &Mat, m2: &[f64], s2: &Mat) -> f64 {
    let s1_inv = linalg::inverse(s1).unwrap();
    let s2_inv = linalg::inverse(s2).unwrap();
    let diff = linalg::sub_vec(m1, m2);
    let v = s2_inv.matvec(&diff);
    let gap = s2_inv.sub(&s1_inv);
    // E |(S2^{-1} - S1^{-1}) x + S2^{-1}(m1 - m2)|^2 under x ~ N(0, S1).
    linalg::dot(&v, &v) + gap.matmul(s1).matmul(&gap).trace()
}

/// Freedman-Diaconis bin width over the pooled samples, returning a grid
/// that spans both sample sets.
pub fn freedman_diaconis_grid(samples: &[&[f64]]) -> Grid1 {
    let mut pool: Vec<f64> = samples.iter().flat_map(|s| s.iter().cloned()).collect();
    pool.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pool.len();
    let q1 = pool[n / 4];
    let q3 = pool[3 * n / 4];
    let iqr = (q3 - q1).max(1e-12);
    let width = 2.0 * iqr / (n as f64).cbrt();
    let lo = pool[0] - width;
    let hi = pool[n - 1] + width;
    let bins = (((hi - lo) / width).ceil() as usize).clamp(8, 4096);
    Grid1::new(lo, hi, bins)
}

/// Histogram samples onto a grid as probability masses (out-of-range samples
/// are dropped; the caller sees that in the total mass).
pub fn histogram(samples: &[f64], grid: &Grid1) -> GridDensity1 {
    let mut mass = vec![0.0; grid.n];
    let w = 1.0 / samples.len() as f64;
    for &x in samples {
        if let Some(i) = grid.index_of(x) {
            mass[i] += w;
        }
    }
    GridDensity1 { grid: grid.clone(), mass, time: 0.0 }
}

/// Bin specification used by the ensemble relative-entropy estimator, so
/// the (auditable) discretization bias is on record.
#[derive(Debug, Clone)]
pub struct BinSpec {
    pub grid: Grid1,
    pub pseudocount: f64,
}

/// Relative entropy between two sample sets through a shared
/// Freedman-Diaconis histogram. A half-count per bin is added to both
/// histograms; without it a single zeta sample beyond the range of nu flips
/// the plug-in estimate to +infinity, which for two overlapping samples is
/// a tail artifact rather than an absolute-continuity failure.
pub fn ensemble_relative_entropy(xs: &[f64], ys: &[f64]) -> (f64, BinSpec) {
    let grid = freedman_diaconis_grid(&[xs, ys]);
    let pseudocount = 0.5;
    let smooth = |samples: &[f64]| {
        let mut mass = vec![pseudocount; grid.n];
        for &x in samples {
            if let Some(i) = grid.index_of(x) {
                mass[i] += 1.0;
            }
        }
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        mass
    };
    let hx = smooth(xs);
    let hy = smooth(ys);
    let h = relative_entropy_masses(&hx, &hy).expect_finite();
    (h, BinSpec { grid, pseudocount })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_entropy_examples() {
        // Identical: 0.
        assert_eq!(relative_entropy_masses(&[0.5, 0.5], &[0.5, 0.5]), RelEnt::Finite(0.0));
        // Two cells (1/2, 1/2) vs (1/4, 3/4): 0.5 ln 2 + 0.5 ln(2/3).
        let h = relative_entropy_masses(&[0.5, 0.5], &[0.25, 0.75]).expect_finite();
        let expect = 0.5 * 2.0_f64.ln() + 0.5 * (2.0 / 3.0_f64).ln();
        assert!((h - expect).abs() < 1e-12);
        assert!((h - 0.1438).abs() < 5e-4);
        // Mass where nu vanishes: infinite tag, not an error.
        assert_eq!(relative_entropy_masses(&[0.5, 0.5], &[1.0, 0.0]), RelEnt::Infinite);
    }

    #[test]
    fn wasserstein_examples() {
        // Two Diracs distance 1.
        assert!((wasserstein2_atoms(&[(0.0, 1.0)], &[(1.0, 1.0)]) - 1.0).abs() < 1e-12);
        // {0, 2} vs {1, 3}: quantile pairing gives W2 = 1.
        let w = wasserstein2_1d_samples(&[0.0, 2.0], &[1.0, 3.0]);
        assert!((w - 1.0).abs() < 1e-12);
        // N(0,1) vs N(1,1) on grids.
        let g = Grid1::new(-9.0, 10.0, 1024);
        let a = GridDensity1::gaussian(g.clone(), 0.0, 1.0);
        let b = GridDensity1::gaussian(g, 1.0, 1.0);
        let w = wasserstein2_1d_grid(&a, &b);
        assert!((w - 1.0).abs() < 1e-3, "w = {w}");
    }

    #[test]
    fn wasserstein_metric_properties() {
        let mut rng = StreamRng::from_parts(17, 1);
        for _ in 0..50 {
            let xs: Vec<f64> = (0..20).map(|_| rng.normal()).collect();
            let ys: Vec<f64> = (0..20).map(|_| rng.normal() + 0.5).collect();
            let zs: Vec<f64> = (0..20).map(|_| 2.0 * rng.normal() - 0.3).collect();
            let dxy = wasserstein2_1d_samples(&xs, &ys);
            let dyx = wasserstein2_1d_samples(&ys, &xs);
            assert!((dxy - dyx).abs() < 1e-12);
            let dxz = wasserstein2_1d_samples(&xs, &zs);
            let dzy = wasserstein2_1d_samples(&zs, &ys);
            assert!(dxy <= dxz + dzy + 1e-6, "triangle violated");
        }
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let mut rng = StreamRng::from_parts(23, 2);
        for _ in 0..20 {
            let n = 5;
            let a: Vec<[f64; 2]> = (0..n).map(|_| [rng.normal(), rng.normal()]).collect();
            let b: Vec<[f64; 2]> = (0..n).map(|_| [rng.normal(), rng.normal()]).collect();
            let w = wasserstein2_2d_samples(&a, &b).unwrap();
            // Brute force over permutations of 5.
            let mut best = f64::INFINITY;
            let mut perm: Vec<usize> = (0..n).collect();
            permute(&mut perm, 0, &mut |p| {
                let c: f64 = (0..n)
                    .map(|i| {
                        let dx = a[i][0] - b[p[i]][0];
                        let dy = a[i][1] - b[p[i]][1];
                        dx * dx + dy * dy
                    })
                    .sum();
                if c < best {
                    best = c;
                }
            });
            assert!((w - (best / n as f64).sqrt()).abs() < 1e-10);
        }
    }

    fn permute(p: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == p.len() {
            f(p);
            return;
        }
        for i in k..p.len() {
            p.swap(k, i);
            permute(p, k + 1, f);
            p.swap(k, i);
        }
    }

    #[test]
    fn sliced_wasserstein_tracks_exact() {
        // Isotropic shifted clouds: sliced W2 with the dimension factor is
        // consistent with the exact assignment value.
        let mut rng = StreamRng::from_parts(29, 4);
        let a: Vec<Vec<f64>> = (0..400).map(|_| vec![rng.normal(), rng.normal()]).collect();
        let b: Vec<Vec<f64>> =
            (0..400).map(|_| vec![rng.normal() + 1.0, rng.normal()]).collect();
        let a2: Vec<[f64; 2]> = a.iter().map(|p| [p[0], p[1]]).collect();
        let b2: Vec<[f64; 2]> = b.iter().map(|p| [p[0], p[1]]).collect();
        let exact = wasserstein2_2d_samples(&a2, &b2).unwrap();
        let (sliced, n) = sliced_wasserstein2(&a, &b, 64, &mut rng);
        assert_eq!(n, 64);
        assert!(
            (sliced - exact).abs() < 0.25 * exact,
            "sliced {sliced} vs exact {exact}"
        );
        // Oversize input for the exact mode is a structured error.
        let big: Vec<[f64; 2]> = (0..600).map(|_| [rng.normal(), rng.normal()]).collect();
        assert!(matches!(
            wasserstein2_2d_samples(&big, &big),
            Err(Error::WassersteinShape(_))
        ));
    }

    #[test]
    fn gaussian_divergence_examples() {
        let id1 = Mat::identity(1);
        let (h, w) = gaussian_divergences(&[0.0], &id1, &[0.0], &id1).unwrap();
        assert!(h.abs() < 1e-12 && w.abs() < 1e-7);
        let (h, w) = gaussian_divergences(&[1.0], &id1, &[0.0], &id1).unwrap();
        assert!((h - 0.5).abs() < 1e-12);
        assert!((w - 1.0).abs() < 1e-9);
        // Commuting covariances diag(1,4) vs diag(4,1): W2^2 = 2.
        let s1 = Mat::diag(&[1.0, 4.0]);
        let s2 = Mat::diag(&[4.0, 1.0]);
        let (_, w) = gaussian_divergences(&[0.0, 0.0], &s1, &[0.0, 0.0], &s2).unwrap();
        assert!((w * w - 2.0).abs() < 1e-9, "w2sq = {}", w * w);
        // Non-PSD rejection.
        let bad = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]);
        assert!(matches!(
            gaussian_divergences(&[0.0, 0.0], &bad, &[0.0, 0.0], &s1),
            Err(Error::NotPsd { .. })
        ));
    }

    #[test]
    fn fisher_information_gaussian_oracle() {
        // zeta = N(m, s^2), nu = N(0, s^2): I = m^2 / s^4.
        let g = Grid1::new(-10.0, 10.5, 1024);
        let zeta = GridDensity1::gaussian(g.clone(), 0.8, 1.3);
        let nu = GridDensity1::gaussian(g, 0.0, 1.3);
        let i = fisher_information_1d(&zeta, &nu, None).unwrap();
        let expect = 0.8 * 0.8 / (1.3 * 1.3);
        assert!((i - expect).abs() < 0.02 * expect, "I = {i}, expect {expect}");
        // Identity case.
        let g2 = Grid1::new(-10.0, 10.5, 1024);
        let z2 = GridDensity1::gaussian(g2.clone(), 0.0, 1.0);
        let n2 = GridDensity1::gaussian(g2, 0.0, 1.0);
        assert!(fisher_information_1d(&z2, &n2, None).unwrap() < 1e-20);
        // Scalar weight scales linearly.
        let g3 = Grid1::new(-10.0, 10.5, 1024);
        let z3 = GridDensity1::gaussian(g3.clone(), 0.8, 1.3);
        let n3 = GridDensity1::gaussian(g3, 0.0, 1.3);
        let iw = fisher_information_1d(&z3, &n3, Some(&|_z| 2.5)).unwrap();
        let base = fisher_information_1d(&z3, &n3, None).unwrap();
        assert!((iw - 2.5 * base).abs() < 1e-12 * iw);
    }

    #[test]
    fn gaussian_fisher_closed_form_scalar() {
        let s1 = Mat::diag(&[1.3 * 1.3]);
        let i = gaussian_fisher(&[0.8], &s1, &[0.0], &s1);
        assert!((i - 0.8 * 0.8 / 1.3_f64.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn talagrand_and_lsi_witnesses_on_random_gaussians() {
        // W2^2 <= (2/a_TI) H with a_TI = 1/lambda_max(S_nu), and
        // H <= I/(2 a_LSI) with a_LSI = 1/lambda_max(S_nu).
        let mut rng = StreamRng::from_parts(41, 3);
        for _ in 0..100 {
            let d = 2;
            let mk_cov = |rng: &mut StreamRng| {
                let a = rng.normal();
                let b = rng.normal();
                let c = rng.normal();
                // Diagonal dominance keeps it PD.
                Mat::from_rows(&[&[1.0 + a * a, a * b], &[a * b, 1.0 + b * b + c * c]])
            };
            let s1 = mk_cov(&mut rng);
            let s2 = mk_cov(&mut rng);
            let m1 = vec![rng.normal(), rng.normal()];
            let m2 = vec![rng.normal(), rng.normal()];
            let (h, w) = gaussian_divergences(&m1, &s1, &m2, &s2).unwrap();
            let (vals, _) = linalg::sym_eig(&s2);
            let lam_max = vals.iter().cloned().fold(0.0, f64::max);
            let a_ti = 1.0 / lam_max;
            assert!(w * w <= 2.0 / a_ti * h + 1e-9, "Talagrand witness failed");
            let i = gaussian_fisher(&m1, &s1, &m2, &s2);
            let a_lsi = 1.0 / lam_max;
            assert!(h <= i / (2.0 * a_lsi) + 1e-9, "LSI witness failed");
            let _ = d;
        }
    }

    #[test]
    fn ensemble_entropy_against_closed_form() {
        let mut rng = StreamRng::from_parts(51, 4);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal() + 1.0).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let (h, _spec) = ensemble_relative_entropy(&xs, &ys);
        assert!((h - 0.5).abs() < 0.02, "H = {h}");
        let w = wasserstein2_1d_samples(&xs, &ys);
        assert!((w - 1.0).abs() < 0.02, "W = {w}");
    }
}
