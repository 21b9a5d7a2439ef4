//! Closures of the coarse-grained dynamics: effective coefficients against
//! the Gibbs conditional, time-stamped coarse-grained coefficients against an
//! evolving state, marginal (push-forward) densities, and the level-set
//! derivative identity used to cross-check them.

use std::sync::Arc;

use crate::fpgrid::{Grid1, GridDensity1, GridDensity2};
use crate::linalg::{self, Mat};
use crate::model::{AnalyticEffective, CoarseMap, GibbsMeasure, Potential};
use crate::rng::SeedLineage;
use crate::sampling::{sample_conditional, ChainConfig, Ensemble};
use crate::{Error, Result};

/// Time-independent coarse drift/diffusion pair b(z), A(z).
pub trait CoarseClosure: Send + Sync {
    fn k(&self) -> usize;
    fn drift(&self, z: &[f64]) -> Result<Vec<f64>>;
    fn diffusion(&self, z: &[f64]) -> Result<Mat>;
}

/// Time-dependent coarse drift/diffusion pair b(t, z), A(t, z).
pub trait TimeClosure: Send + Sync {
    fn k(&self) -> usize;
    fn drift(&self, t: f64, z: &[f64]) -> Result<Vec<f64>>;
    fn diffusion(&self, t: f64, z: &[f64]) -> Result<Mat>;
}

impl<C: CoarseClosure> TimeClosure for C {
    fn k(&self) -> usize {
        CoarseClosure::k(self)
    }
    fn drift(&self, _t: f64, z: &[f64]) -> Result<Vec<f64>> {
        CoarseClosure::drift(self, z)
    }
    fn diffusion(&self, _t: f64, z: &[f64]) -> Result<Mat> {
        CoarseClosure::diffusion(self, z)
    }
}

/// Scalar (k = 1) closure from plain functions.
#[derive(Clone)]
pub struct ScalarClosure {
    b: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    a: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarClosure {
    pub fn new(
        b: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarClosure { b: Arc::new(b), a: Arc::new(a) }
    }

    /// Closed-form effective closure of a catalog entry under xi = q1.
    pub fn from_catalog(eff: &AnalyticEffective) -> Self {
        let e = eff.clone();
        let a = eff.diffusion();
        ScalarClosure::new(move |z| e.drift(z), move |_z| a)
    }
}

impl CoarseClosure for ScalarClosure {
    fn k(&self) -> usize {
        1
    }
    fn drift(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(self.b)(z[0])])
    }
    fn diffusion(&self, z: &[f64]) -> Result<Mat> {
        Ok(Mat::from_vec(1, 1, vec![(self.a)(z[0])]))
    }
}

/// Scalar time-dependent closure from plain functions.
#[derive(Clone)]
pub struct ScalarTimeClosure {
    b: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    a: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl ScalarTimeClosure {
    pub fn new(
        b: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        a: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarTimeClosure { b: Arc::new(b), a: Arc::new(a) }
    }
}

impl TimeClosure for ScalarTimeClosure {
    fn k(&self) -> usize {
        1
    }
    fn drift(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![(self.b)(t, z[0])])
    }
    fn diffusion(&self, t: f64, z: &[f64]) -> Result<Mat> {
        Ok(Mat::from_vec(1, 1, vec![(self.a)(t, z[0])]))
    }
}

/// Coarse coefficients tabulated per cell of a rectangular grid over the
/// coarse space (one axis for overdamped closures, two for phase space).
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub axes: Vec<Grid1>,
    /// Output dimension k of the drift.
    pub k: usize,
    pub b: Vec<Vec<f64>>,
    pub a: Vec<Mat>,
    pub counts: Vec<usize>,
    pub stderr_b: Vec<Vec<f64>>,
    pub time: Option<f64>,
}

impl CoefficientField {
    pub fn cells(&self) -> usize {
        self.axes.iter().map(|g| g.n).product()
    }

    pub fn occupied(&self, cell: usize) -> bool {
        self.counts[cell] > 0
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].center(cell)],
            2 => {
                let n1 = self.axes[1].n;
                vec![self.axes[0].center(cell / n1), self.axes[1].center(cell % n1)]
            }
            _ => unreachable!(),
        }
    }

    /// Fraction of tabulated cells that carry data.
    pub fn coverage(&self) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 / self.cells() as f64
    }

    /// Piecewise-linear interpolation of the drift between occupied cell
    /// centers along the first axis (k = 1 fields).
    fn interp_1d(&self, values: &dyn Fn(usize) -> f64, z: f64) -> Result<f64> {
        let g = &self.axes[0];
        if z < g.lo || z > g.hi() {
            return Err(Error::Extrapolation { point: vec![z] });
        }
        // Occupied neighbours bracketing z.
        let occ: Vec<usize> = (0..g.n).filter(|&i| self.occupied(i)).collect();
        if occ.is_empty() {
            return Err(Error::EmptyCell { point: vec![z] });
        }
        let first = occ[0];
        let last = *occ.last().unwrap();
        if z <= g.center(first) {
            if z < g.center(first) - g.h {
                return Err(Error::EmptyCell { point: vec![z] });
            }
            return Ok(values(first));
        }
        if z >= g.center(last) {
            if z > g.center(last) + g.h {
                return Err(Error::EmptyCell { point: vec![z] });
            }
            return Ok(values(last));
        }
        let hi_pos = occ.partition_point(|&i| g.center(i) < z);
        let i1 = occ[hi_pos];
        let i0 = occ[hi_pos - 1];
        let (z0, z1) = (g.center(i0), g.center(i1));
        let t = (z - z0) / (z1 - z0);
        Ok(values(i0) * (1.0 - t) + values(i1) * t)
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        let axis_names = if self.axes.len() == 1 { vec!["z"] } else { vec!["z", "v"] };
        write!(w, "{}", axis_names.join(","))?;
        for i in 0..self.k {
            write!(w, ",b{}", i + 1)?;
        }
        for i in 0..self.k {
            for j in 0..self.k {
                write!(w, ",a{}{}", i + 1, j + 1)?;
            }
        }
        write!(w, ",count")?;
        for i in 0..self.k {
            write!(w, ",stderr_b{}", i + 1)?;
        }
        writeln!(w)?;
        for cell in 0..self.cells() {
            let c = self.cell_center(cell);
            let coords: Vec<String> = c.iter().map(|x| format!("{x:.17e}")).collect();
            write!(w, "{}", coords.join(","))?;
            for i in 0..self.k {
                write!(w, ",{:.17e}", self.b[cell][i])?;
            }
            for i in 0..self.k {
                for j in 0..self.k {
                    write!(w, ",{:.17e}", self.a[cell][(i, j)])?;
                }
            }
            write!(w, ",{}", self.counts[cell])?;
            for i in 0..self.k {
                write!(w, ",{:.17e}", self.stderr_b[cell][i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Finite-difference estimate of sup |d b / d z| over occupied cells.
    pub fn drift_lipschitz_estimate(&self) -> f64 {
        assert_eq!(self.axes.len(), 1);
        let g = &self.axes[0];
        let mut sup = 0.0_f64;
        let occ: Vec<usize> = (0..g.n).filter(|&i| self.occupied(i)).collect();
        for w in occ.windows(2) {
            let dz = g.center(w[1]) - g.center(w[0]);
            for comp in 0..self.k {
                sup = sup.max(((self.b[w[1]][comp] - self.b[w[0]][comp]) / dz).abs());
            }
        }
        sup
    }
}

impl CoarseClosure for CoefficientField {
    fn k(&self) -> usize {
        self.k
    }
    fn drift(&self, z: &[f64]) -> Result<Vec<f64>> {
        match self.axes.len() {
            1 => {
                let mut out = Vec::with_capacity(self.k);
                for comp in 0..self.k {
                    out.push(self.interp_1d(&|cell| self.b[cell][comp], z[0])?);
                }
                Ok(out)
            }
            2 => {
                // Nearest-occupied-cell lookup for phase-space fields.
                let i0 = self.axes[0]
                    .index_of(z[0])
                    .ok_or(Error::Extrapolation { point: z.to_vec() })?;
                let i1 = self.axes[1]
                    .index_of(z[1])
                    .ok_or(Error::Extrapolation { point: z.to_vec() })?;
                let cell = i0 * self.axes[1].n + i1;
                if !self.occupied(cell) {
                    return Err(Error::EmptyCell { point: z.to_vec() });
                }
                Ok(self.b[cell].clone())
            }
            _ => unreachable!(),
        }
    }
    fn diffusion(&self, z: &[f64]) -> Result<Mat> {
        let mut a = match self.axes.len() {
            1 => {
                let mut a = Mat::zeros(self.k, self.k);
                for i in 0..self.k {
                    for j in 0..self.k {
                        a[(i, j)] = self.interp_1d(&|cell| self.a[cell][(i, j)], z[0])?;
                    }
                }
                a
            }
            2 => {
                let i0 = self.axes[0]
                    .index_of(z[0])
                    .ok_or(Error::Extrapolation { point: z.to_vec() })?;
                let i1 = self.axes[1]
                    .index_of(z[1])
                    .ok_or(Error::Extrapolation { point: z.to_vec() })?;
                let cell = i0 * self.axes[1].n + i1;
                if !self.occupied(cell) {
                    return Err(Error::EmptyCell { point: z.to_vec() });
                }
                self.a[cell].clone()
            }
            _ => unreachable!(),
        };
        // Interpolation can lose symmetry/definiteness in the last digits.
        a.symmetrize();
        Ok(linalg::sym_func(&a, |lam| lam.max(1e-12)))
    }
}

/// A sequence of time-stamped fields, linearly interpolated in time.
pub struct TimeSeriesClosure {
    pub times: Vec<f64>,
    pub fields: Vec<CoefficientField>,
}

impl TimeSeriesClosure {
    pub fn new(fields: Vec<CoefficientField>) -> Self {
        let times: Vec<f64> = fields
            .iter()
            .map(|f| f.time.expect("time-series fields must be time-stamped"))
            .collect();
        assert!(times.windows(2).all(|w| w[0] < w[1]), "fields must be time-ordered");
        TimeSeriesClosure { times, fields }
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        if t <= self.times[0] {
            return (0, 0, 0.0);
        }
        if t >= *self.times.last().unwrap() {
            let n = self.times.len() - 1;
            return (n, n, 0.0);
        }
        let hi = self.times.partition_point(|&s| s < t).min(self.times.len() - 1);
        let lo = hi - 1;
        let w = (t - self.times[lo]) / (self.times[hi] - self.times[lo]);
        (lo, hi, w)
    }
}

impl TimeClosure for TimeSeriesClosure {
    fn k(&self) -> usize {
        self.fields[0].k
    }
    fn drift(&self, t: f64, z: &[f64]) -> Result<Vec<f64>> {
        let (lo, hi, w) = self.bracket(t);
        let a = CoarseClosure::drift(&self.fields[lo], z)?;
        if lo == hi {
            return Ok(a);
        }
        let b = CoarseClosure::drift(&self.fields[hi], z)?;
        Ok(a.iter().zip(&b).map(|(x, y)| x * (1.0 - w) + y * w).collect())
    }
    fn diffusion(&self, t: f64, z: &[f64]) -> Result<Mat> {
        let (lo, hi, w) = self.bracket(t);
        let a = CoarseClosure::diffusion(&self.fields[lo], z)?;
        if lo == hi {
            return Ok(a);
        }
        let b = CoarseClosure::diffusion(&self.fields[hi], z)?;
        Ok(a.scale(1.0 - w).add(&b.scale(w)))
    }
}

/// The coarse-grained integrand of the drift closure,
/// f(q) = Dxi grad V - beta^{-1} Lap xi.
pub fn drift_integrand(pot: &Potential, map: &CoarseMap, beta: f64, q: &[f64]) -> Vec<f64> {
    let mut f = map.jacobian(q).matvec(&pot.gradient(q));
    if map.affine.is_none() {
        let lap = map.laplacian(q);
        for (fi, li) in f.iter_mut().zip(&lap) {
            *fi -= li / beta;
        }
    }
    f
}

/// Effective coefficients b(z) = E[f | xi = z], A(z) = E[G | xi = z] against
/// the conditional Gibbs measure, one conditional chain per grid cell.
pub fn effective_coefficients(
    m: &GibbsMeasure,
    map: &CoarseMap,
    grid: &Grid1,
    n_per_cell: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<CoefficientField> {
    let k = map.k;
    let cells = grid.n;
    let mut b = vec![vec![0.0; k]; cells];
    let mut a = vec![Mat::zeros(k, k); cells];
    let mut counts = vec![0usize; cells];
    let mut stderr = vec![vec![0.0; k]; cells];
    for cell in 0..cells {
        let z = vec![grid.center(cell)];
        let cond = sample_conditional(
            m,
            map,
            &z,
            n_per_cell,
            cfg,
            lineage.substream(crate::rng::streams::EFFECTIVE_COEFF + cell as u64),
        )?;
        let n = cond.len();
        let mut sum = vec![0.0; k];
        let mut sumsq = vec![0.0; k];
        let mut asum = Mat::zeros(k, k);
        for i in 0..n {
            let q = cond.point(i);
            let f = drift_integrand(&m.potential, map, m.beta, q);
            for c in 0..k {
                sum[c] += f[c];
                sumsq[c] += f[c] * f[c];
            }
            asum = asum.add(&map.metric(q));
        }
        for c in 0..k {
            b[cell][c] = sum[c] / n as f64;
            let var = (sumsq[c] / n as f64 - b[cell][c] * b[cell][c]).max(0.0);
            stderr[cell][c] = (var / n as f64).sqrt();
        }
        a[cell] = asum.scale(1.0 / n as f64);
        counts[cell] = n;
    }
    Ok(CoefficientField { axes: vec![grid.clone()], k, b, a, counts, stderr_b: stderr, time: None })
}

/// Langevin-mode effective coefficients on a (z, v) grid: the drift is the
/// conditional average of Dxi grad V (no Laplacian term, maps are affine)
/// and the diffusion is exactly T T^T in every cell.
pub fn effective_coefficients_langevin(
    m: &GibbsMeasure,
    phase_map: &crate::model::PhaseMap,
    grid_z: &Grid1,
    grid_v: &Grid1,
    n_per_cell: usize,
    cfg: &ChainConfig,
    lineage: SeedLineage,
) -> Result<CoefficientField> {
    let map = &phase_map.base;
    let k = map.k;
    let ttt = phase_map.ttt();
    let cells = grid_z.n * grid_v.n;
    let mut b = vec![vec![0.0; k]; cells];
    let mut a = vec![ttt.clone(); cells];
    let mut counts = vec![0usize; cells];
    let mut stderr = vec![vec![0.0; k]; cells];
    for iz in 0..grid_z.n {
        // The spatial conditional does not depend on v; sample the q-fiber
        // once per z and reuse it across the momentum axis.
        let z = vec![grid_z.center(iz)];
        let cond = sample_conditional(
            m,
            map,
            &z,
            n_per_cell,
            cfg,
            lineage.substream(crate::rng::streams::EFFECTIVE_COEFF + iz as u64),
        )?;
        let n = cond.len();
        let mut sum = vec![0.0; k];
        let mut sumsq = vec![0.0; k];
        for i in 0..n {
            let q = cond.point(i);
            let f = map.jacobian(q).matvec(&m.potential.gradient(q));
            for c in 0..k {
                sum[c] += f[c];
                sumsq[c] += f[c] * f[c];
            }
        }
        for iv in 0..grid_v.n {
            let cell = iz * grid_v.n + iv;
            for c in 0..k {
                b[cell][c] = sum[c] / n as f64;
                let var = (sumsq[c] / n as f64 - b[cell][c] * b[cell][c]).max(0.0);
                stderr[cell][c] = (var / n as f64).sqrt();
            }
            a[cell] = ttt.clone();
            counts[cell] = n;
        }
    }
    Ok(CoefficientField {
        axes: vec![grid_z.clone(), grid_v.clone()],
        k,
        b,
        a,
        counts,
        stderr_b: stderr,
        time: None,
    })
}

/// Coarse-grained coefficients from a weighted particle state, by binning
/// the xi-values onto the coarse grid.
pub fn cg_coefficients_ensemble(
    state: &Ensemble,
    pot: &Potential,
    map: &CoarseMap,
    beta: f64,
    grid: &Grid1,
) -> CoefficientField {
    assert_eq!(map.k, 1, "ensemble binning is implemented for k = 1");
    let k = map.k;
    let cells = grid.n;
    let mut sum = vec![vec![0.0; k]; cells];
    let mut sumsq = vec![vec![0.0; k]; cells];
    let mut asum = vec![Mat::zeros(k, k); cells];
    let mut counts = vec![0usize; cells];
    for i in 0..state.len() {
        let q = state.point(i);
        let z = map.xi(q)[0];
        let Some(cell) = grid.index_of(z) else { continue };
        let f = drift_integrand(pot, map, beta, q);
        for c in 0..k {
            sum[cell][c] += f[c];
            sumsq[cell][c] += f[c] * f[c];
        }
        asum[cell] = asum[cell].add(&map.metric(q));
        counts[cell] += 1;
    }
    let mut b = vec![vec![0.0; k]; cells];
    let mut a = vec![Mat::identity(k); cells];
    let mut stderr = vec![vec![0.0; k]; cells];
    for cell in 0..cells {
        if counts[cell] == 0 {
            continue;
        }
        let n = counts[cell] as f64;
        for c in 0..k {
            b[cell][c] = sum[cell][c] / n;
            let var = (sumsq[cell][c] / n - b[cell][c] * b[cell][c]).max(0.0);
            stderr[cell][c] = (var / n).sqrt();
        }
        a[cell] = asum[cell].scale(1.0 / n);
    }
    CoefficientField {
        axes: vec![grid.clone()],
        k,
        b,
        a,
        counts,
        stderr_b: stderr,
        time: Some(state.time),
    }
}

/// Whether the map is the projection onto the first coordinate and the
/// coarse grid coincides with the state's x-axis, in which case fiber
/// averages are exact column sums.
fn is_aligned_coordinate(map: &CoarseMap, state_grid_x: &Grid1, coarse: &Grid1) -> bool {
    let Some(aff) = &map.affine else { return false };
    if map.k != 1 || map.d != 2 {
        return false;
    }
    aff.t[(0, 0)] == 1.0 && aff.t[(0, 1)] == 0.0 && aff.tau[0] == 0.0 && state_grid_x == coarse
}

/// Coarse-grained coefficients from a 2D grid state by fiber quadrature.
/// Coordinate maps on the state's own x-grid are exact; other affine maps
/// use Gauss-Legendre quadrature along each fiber with piecewise-constant
/// density lookup.
pub fn cg_coefficients_grid(
    state: &GridDensity2,
    pot: &Potential,
    map: &CoarseMap,
    beta: f64,
    grid: &Grid1,
) -> Result<CoefficientField> {
    assert_eq!(map.k, 1);
    let cells = grid.n;
    let mut b = vec![vec![0.0; 1]; cells];
    let mut a = vec![Mat::identity(1); cells];
    let mut counts = vec![0usize; cells];
    let stderr = vec![vec![0.0; 1]; cells];

    if is_aligned_coordinate(map, &state.grid.x, grid) {
        let ny = state.grid.y.n;
        for ix in 0..cells {
            let mut w_tot = 0.0;
            let mut f_acc = 0.0;
            let mut g_acc = 0.0;
            for iy in 0..ny {
                let w = state.mass[state.grid.idx(ix, iy)];
                if w == 0.0 {
                    continue;
                }
                let q = [state.grid.x.center(ix), state.grid.y.center(iy)];
                let f = drift_integrand(pot, map, beta, &q);
                f_acc += w * f[0];
                g_acc += w * map.metric(&q)[(0, 0)];
                w_tot += w;
            }
            if w_tot > 1e-300 {
                b[ix][0] = f_acc / w_tot;
                a[ix] = Mat::from_vec(1, 1, vec![g_acc / w_tot]);
                counts[ix] = ny;
            }
        }
    } else {
        if map.affine.is_none() {
            return Err(Error::Numerical(
                "grid-state coarse coefficients need an affine map".into(),
            ));
        }
        let (nodes, weights) = gauss_legendre(64);
        let kernel = map.kernel_basis().unwrap();
        let dir = [kernel[(0, 0)], kernel[(1, 0)]];
        for cell in 0..cells {
            let z = [grid.center(cell)];
            let anchor = map.fiber_anchor(&z).unwrap();
            let Some((s0, s1)) = segment_in_box(&anchor, &dir, &state.grid) else { continue };
            let mut w_tot = 0.0;
            let mut f_acc = 0.0;
            let mut g_acc = 0.0;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let s = 0.5 * (s0 + s1) + 0.5 * (s1 - s0) * x;
                let q = [anchor[0] + s * dir[0], anchor[1] + s * dir[1]];
                let (Some(ix), Some(iy)) =
                    (state.grid.x.index_of(q[0]), state.grid.y.index_of(q[1]))
                else {
                    continue;
                };
                let dens = state.mass[state.grid.idx(ix, iy)];
                if dens == 0.0 {
                    continue;
                }
                let f = drift_integrand(pot, map, beta, &q);
                f_acc += w * dens * f[0];
                g_acc += w * dens * map.metric(&q)[(0, 0)];
                w_tot += w * dens;
            }
            if w_tot > 1e-300 {
                b[cell][0] = f_acc / w_tot;
                a[cell] = Mat::from_vec(1, 1, vec![g_acc / w_tot]);
                counts[cell] = 64;
            }
        }
    }
    Ok(CoefficientField {
        axes: vec![grid.clone()],
        k: 1,
        b,
        a,
        counts,
        stderr_b: stderr,
        time: Some(state.time),
    })
}

/// Parameter range for which anchor + s * dir stays inside the grid box.
fn segment_in_box(anchor: &[f64], dir: &[f64; 2], grid: &crate::fpgrid::Grid2) -> Option<(f64, f64)> {
    let mut s0 = f64::NEG_INFINITY;
    let mut s1 = f64::INFINITY;
    let bounds = [(grid.x.lo, grid.x.hi()), (grid.y.lo, grid.y.hi())];
    for i in 0..2 {
        if dir[i].abs() < 1e-14 {
            if anchor[i] < bounds[i].0 || anchor[i] > bounds[i].1 {
                return None;
            }
            continue;
        }
        let a = (bounds[i].0 - anchor[i]) / dir[i];
        let b = (bounds[i].1 - anchor[i]) / dir[i];
        s0 = s0.max(a.min(b));
        s1 = s1.min(a.max(b));
    }
    if s0 < s1 {
        Some((s0, s1))
    } else {
        None
    }
}

/// Push-forward of a 2D grid density under an affine scalar map. The mass of
/// each rectangular cell is split across the coarse bins by exact
/// band-overlap areas, so total mass is preserved to round-off.
pub fn marginal_of_grid2(
    rho: &GridDensity2,
    map: &CoarseMap,
    coarse: &Grid1,
) -> Result<GridDensity1> {
    let Some(aff) = &map.affine else {
        return Err(Error::Numerical("grid marginals need an affine map".into()));
    };
    assert_eq!(map.k, 1);
    let mut mass = vec![0.0; coarse.n];

    if is_aligned_coordinate(map, &rho.grid.x, coarse) {
        for ix in 0..rho.grid.x.n {
            let mut s = 0.0;
            for iy in 0..rho.grid.y.n {
                s += rho.mass[rho.grid.idx(ix, iy)];
            }
            mass[ix] = s;
        }
        return Ok(GridDensity1 { grid: coarse.clone(), mass, time: rho.time });
    }

    let t = [aff.t[(0, 0)], aff.t[(0, 1)]];
    let tau = aff.tau[0];
    for ix in 0..rho.grid.x.n {
        for iy in 0..rho.grid.y.n {
            let m = rho.mass[rho.grid.idx(ix, iy)];
            if m == 0.0 {
                continue;
            }
            let x0 = rho.grid.x.lo + ix as f64 * rho.grid.x.h;
            let x1 = x0 + rho.grid.x.h;
            let y0 = rho.grid.y.lo + iy as f64 * rho.grid.y.h;
            let y1 = y0 + rho.grid.y.h;
            let corners = [
                t[0] * x0 + t[1] * y0 + tau,
                t[0] * x1 + t[1] * y0 + tau,
                t[0] * x0 + t[1] * y1 + tau,
                t[0] * x1 + t[1] * y1 + tau,
            ];
            let smin = corners.iter().cloned().fold(f64::INFINITY, f64::min);
            let smax = corners.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let area = rho.grid.x.h * rho.grid.y.h;
            // Coarse bins touched by this cell.
            let b0 = ((smin - coarse.lo) / coarse.h).floor() as i64;
            let b1 = ((smax - coarse.lo) / coarse.h).ceil() as i64;
            let mut below_prev =
                halfplane_area(x0, x1, y0, y1, t, coarse.lo + b0 as f64 * coarse.h - tau) / area;
            for bin in b0..b1 + 1 {
                let cut = coarse.lo + (bin + 1) as f64 * coarse.h;
                let below = halfplane_area(x0, x1, y0, y1, t, cut - tau) / area;
                let frac = (below - below_prev).max(0.0);
                below_prev = below;
                if bin >= 0 && (bin as usize) < coarse.n {
                    mass[bin as usize] += m * frac;
                }
            }
        }
    }
    Ok(GridDensity1 { grid: coarse.clone(), mass, time: rho.time })
}

/// Area of { q in rect : t . q < c }.
fn halfplane_area(x0: f64, x1: f64, y0: f64, y1: f64, t: [f64; 2], c: f64) -> f64 {
    // Clip the rectangle against the halfplane (Sutherland-Hodgman).
    let mut poly = vec![(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let inside = |p: (f64, f64)| t[0] * p.0 + t[1] * p.1 <= c;
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(6);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ia, ib) = (inside(a), inside(b));
        if ia {
            out.push(a);
        }
        if ia != ib {
            let da = t[0] * a.0 + t[1] * a.1 - c;
            let db = t[0] * b.0 + t[1] * b.1 - c;
            let s = da / (da - db);
            out.push((a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1)));
        }
    }
    poly = out;
    if poly.len() < 3 {
        return 0.0;
    }
    let mut area = 0.0;
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        area += a.0 * b.1 - b.0 * a.1;
    }
    0.5 * area.abs()
}

/// Marginal density of a smooth function under an affine scalar map, by
/// Gauss-Legendre quadrature along each fiber segment inside the box.
/// Returns the coarse masses and the captured mass fraction (< 1 when the
/// fiber integral leaks outside the box).
pub fn marginal_of_fn(
    psi: &dyn Fn(&[f64]) -> f64,
    map: &CoarseMap,
    domain: &[(f64, f64)],
    coarse: &Grid1,
) -> Result<(GridDensity1, f64)> {
    if map.affine.is_none() || map.d != 2 || map.k != 1 {
        return Err(Error::Numerical(
            "function marginals are implemented for affine maps with d = 2, k = 1".into(),
        ));
    }
    let grid2 = crate::fpgrid::Grid2 {
        x: Grid1::new(domain[0].0, domain[0].1, 1),
        y: Grid1::new(domain[1].0, domain[1].1, 1),
    };
    let kernel = map.kernel_basis().unwrap();
    let dir = [kernel[(0, 0)], kernel[(1, 0)]];
    let jac = map.jac_det(&[0.0, 0.0]);
    let (nodes, weights) = gauss_legendre(64);
    let mut mass = vec![0.0; coarse.n];
    for cell in 0..coarse.n {
        let z = [coarse.center(cell)];
        let anchor = map.fiber_anchor(&z).unwrap();
        let Some((s0, s1)) = segment_in_box(&anchor, &dir, &grid2) else { continue };
        // Split long fibers into panels so the 64-point rule stays sharp.
        let len = s1 - s0;
        let panels = ((len / 8.0).ceil() as usize).max(1);
        let mut integral = 0.0;
        for p in 0..panels {
            let a = s0 + len * p as f64 / panels as f64;
            let b = s0 + len * (p + 1) as f64 / panels as f64;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let q = [anchor[0] + s * dir[0], anchor[1] + s * dir[1]];
                integral += w * psi(&q) * 0.5 * (b - a);
            }
        }
        mass[cell] = integral / jac * coarse.h;
    }
    let captured: f64 = mass.iter().sum();
    Ok((GridDensity1 { grid: coarse.clone(), mass, time: 0.0 }, captured))
}

/// A scalar field with an exact gradient, for the level-set identity check.
pub struct ScalarField<'a> {
    pub eval: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    pub grad: &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync),
}

/// Compare the centered finite difference of the marginal density against
/// the fiber integral of div(psi G^{-1} Dxi) / Jac xi. Returns the maximum
/// deviation over interior cells, relative to the sup of the fiber-integral
/// side; cells with negligible marginal mass are excluded.
pub fn levelset_gradient_check(
    psi: &ScalarField,
    map: &CoarseMap,
    domain: &[(f64, f64)],
    coarse: &Grid1,
) -> Result<f64> {
    let (marginal, _) = marginal_of_fn(psi.eval, map, domain, coarse)?;
    let aff = map.affine.as_ref().unwrap();
    let t = &aff.t;
    let g = t.matmul(&t.transpose());
    let g_inv = linalg::inverse(&g).unwrap();
    let ginv_t = g_inv.matmul(t);
    let jac = map.jac_det(&[0.0, 0.0]);
    let grid2 = crate::fpgrid::Grid2 {
        x: Grid1::new(domain[0].0, domain[0].1, 1),
        y: Grid1::new(domain[1].0, domain[1].1, 1),
    };
    let kernel = map.kernel_basis().unwrap();
    let dir = [kernel[(0, 0)], kernel[(1, 0)]];
    let (nodes, weights) = gauss_legendre(64);

    // Fiber integral of (G^{-1} Dxi) grad psi / Jac (the divergence reduces
    // to this for affine maps).
    let mut rhs = vec![0.0; coarse.n];
    for cell in 0..coarse.n {
        let z = [coarse.center(cell)];
        let anchor = map.fiber_anchor(&z).unwrap();
        let Some((s0, s1)) = segment_in_box(&anchor, &dir, &grid2) else { continue };
        let len = s1 - s0;
        let panels = ((len / 8.0).ceil() as usize).max(1);
        let mut acc = 0.0;
        for p in 0..panels {
            let a = s0 + len * p as f64 / panels as f64;
            let b = s0 + len * (p + 1) as f64 / panels as f64;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let s = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let q = [anchor[0] + s * dir[0], anchor[1] + s * dir[1]];
                let gp = (psi.grad)(&q);
                acc += w * ginv_t.matvec(&gp)[0] * 0.5 * (b - a);
            }
        }
        rhs[cell] = acc / jac;
    }

    let dz = coarse.h;
    let max_mass = marginal.mass.iter().cloned().fold(0.0, f64::max);
    let scale = rhs.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    let mut worst = 0.0_f64;
    for cell in 1..coarse.n - 1 {
        if marginal.mass[cell] < 1e-8 * max_mass {
            continue;
        }
        let lhs = (marginal.mass[cell + 1] - marginal.mass[cell - 1]) / (2.0 * dz * dz);
        // marginal.mass = density * dz, hence the extra dz above.
        worst = worst.max((lhs - rhs[cell]).abs() / scale);
    }
    Ok(worst)
}

/// Sup-norm residual of the gradient-flow identity
/// div_z A + beta b + A d/dz log mu_hat = 0 over interior occupied cells,
/// with finite differences for div_z A and the log-marginal.
pub fn gradient_flow_residual(
    field: &CoefficientField,
    mu_hat: &GridDensity1,
    beta: f64,
) -> Result<f64> {
    assert_eq!(field.axes.len(), 1);
    if field.axes[0] != mu_hat.grid {
        return Err(Error::GridMismatch);
    }
    let g = &field.axes[0];
    let h = g.h;
    let max_mass = mu_hat.mass.iter().cloned().fold(0.0, f64::max);
    let mut worst = 0.0_f64;
    for i in 1..g.n - 1 {
        if !(field.occupied(i - 1) && field.occupied(i) && field.occupied(i + 1)) {
            continue;
        }
        if mu_hat.mass[i - 1] < 1e-6 * max_mass || mu_hat.mass[i + 1] < 1e-6 * max_mass {
            continue;
        }
        let div_a = (field.a[i + 1][(0, 0)] - field.a[i - 1][(0, 0)]) / (2.0 * h);
        let dlog_mu = (mu_hat.mass[i + 1].ln() - mu_hat.mass[i - 1].ln()) / (2.0 * h);
        let res = div_a + beta * field.b[i][0] + field.a[i][(0, 0)] * dlog_mu;
        worst = worst.max(res.abs());
    }
    Ok(worst)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            let dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                x[i] = -z;
                x[n - 1 - i] = z;
                let wi = 2.0 / ((1.0 - z * z) * dp * dp);
                w[i] = wi;
                w[n - 1 - i] = wi;
                break;
            }
        }
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fpgrid::Grid2;
    use crate::model::CatalogPotential;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(64);
        let s: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi * xi).sum();
        assert!((s - 2.0 / 3.0).abs() < 1e-13);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn marginal_product_density_is_exact() {
        // psi = f(q1) g(q2) with integral of g = 1 under xi = q1: marginal = f.
        let grid = Grid2 { x: Grid1::new(-6.0, 6.0, 64), y: Grid1::new(-4.0, 4.0, 48) };
        let rho = GridDensity2::from_fn(grid.clone(), |x, y| {
            (-0.5 * (x - 1.0) * (x - 1.0)).exp() * (-2.0 * y * y).exp()
        });
        let map = CoarseMap::coordinate(2, 1);
        let marg = marginal_of_grid2(&rho, &map, &grid.x).unwrap();
        // Compare to the directly discretized f.
        let f = GridDensity1::from_fn(grid.x.clone(), |x| (-0.5 * (x - 1.0) * (x - 1.0)).exp());
        let l1: f64 = marg.mass.iter().zip(&f.mass).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 2e-4, "L1 {l1}");
        assert!((marg.mass_total() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn marginal_rotated_gaussian_is_standard_normal() {
        // Standard Gaussian psi, xi = (q1 + q2)/sqrt(2): marginal is N(0,1).
        let s = 1.0 / 2.0_f64.sqrt();
        let map = CoarseMap::affine(Mat::from_rows(&[&[s, s]]), vec![0.0]);
        let coarse = Grid1::new(-8.0, 8.0, 256);
        let tau = std::f64::consts::TAU;
        let psi = move |q: &[f64]| (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() / tau;
        let (marg, captured) =
            marginal_of_fn(&psi, &map, &[(-9.0, 9.0), (-9.0, 9.0)], &coarse).unwrap();
        assert!((captured - 1.0).abs() < 1e-9, "captured {captured}");
        let exact = GridDensity1::from_fn(coarse, |z| (-0.5 * z * z).exp());
        let l1: f64 = marg.mass.iter().zip(&exact.mass).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 1e-3, "L1 {l1}");
    }

    #[test]
    fn grid_marginal_rotated_map_conserves_mass() {
        let grid = Grid2 { x: Grid1::new(-6.0, 6.0, 96), y: Grid1::new(-6.0, 6.0, 96) };
        let rho = GridDensity2::from_fn(grid, |x, y| (-(x * x + y * y) / 2.0).exp());
        let s = 1.0 / 2.0_f64.sqrt();
        let map = CoarseMap::affine(Mat::from_rows(&[&[s, s]]), vec![0.0]);
        let coarse = Grid1::new(-9.0, 9.0, 128);
        let marg = marginal_of_grid2(&rho, &map, &coarse).unwrap();
        assert!((marg.mass_total() - 1.0).abs() < 1e-10, "mass {}", marg.mass_total());
        let exact = GridDensity1::from_fn(coarse, |z| (-0.5 * z * z).exp());
        let l1: f64 = marg.mass.iter().zip(&exact.mass).map(|(a, b)| (a - b).abs()).sum();
        assert!(l1 < 5e-3, "L1 {l1}");
    }

    #[test]
    fn levelset_identity_coordinate_and_rotated() {
        let tau = std::f64::consts::TAU;
        let eval = move |q: &[f64]| (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() / tau;
        let grad = move |q: &[f64]| {
            let v = (-(q[0] * q[0] + q[1] * q[1]) / 2.0).exp() / tau;
            vec![-q[0] * v, -q[1] * v]
        };
        let field = ScalarField { eval: &eval, grad: &grad };
        let coarse = Grid1::new(-6.0, 6.0, 256);
        let dom = [(-8.0, 8.0), (-8.0, 8.0)];

        let coord = CoarseMap::coordinate(2, 1);
        let err = levelset_gradient_check(&field, &coord, &dom, &coarse).unwrap();
        assert!(err < 1e-2, "coordinate map error {err}");

        let s = 1.0 / 2.0_f64.sqrt();
        let rot = CoarseMap::affine(Mat::from_rows(&[&[s, s]]), vec![0.0]);
        let err = levelset_gradient_check(&field, &rot, &dom, &coarse).unwrap();
        assert!(err < 1e-2, "rotated map error {err}");
    }

    #[test]
    fn cg_from_gibbs_grid_matches_analytic_effective() {
        let entry = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 };
        let pot = entry.build();
        let beta = 1.0;
        let grid = Grid2 { x: Grid1::new(-8.0, 8.0, 96), y: Grid1::new(-2.6, 2.6, 96) };
        let mu = GridDensity2::gibbs(&pot, beta, grid.clone());
        let map = CoarseMap::coordinate(2, 1);
        let field = cg_coefficients_grid(&mu, &pot, &map, beta, &grid.x).unwrap();
        let eff = entry.analytic_effective(beta).unwrap();
        for i in 0..grid.x.n {
            let z = grid.x.center(i);
            if z.abs() > 3.0 {
                continue;
            }
            assert!(
                (field.b[i][0] - eff.drift(z)).abs() < 2e-3 * (1.0 + z.abs()),
                "b({z}) = {} vs {}",
                field.b[i][0],
                eff.drift(z)
            );
            assert!((field.a[i][(0, 0)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_flow_identity_analytic_field() {
        let entry = CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 };
        let beta = 1.0;
        let eff = entry.analytic_effective(beta).unwrap();
        let grid = Grid1::new(-6.0, 6.0, 128);
        let n = grid.n;
        let field = CoefficientField {
            axes: vec![grid.clone()],
            k: 1,
            b: grid.centers().iter().map(|&z| vec![eff.drift(z)]).collect(),
            a: vec![Mat::identity(1); n],
            counts: vec![1; n],
            stderr_b: vec![vec![0.0]; n],
            time: None,
        };
        let var = eff.mu_hat_variance().unwrap();
        let mu_hat = GridDensity1::from_centers(grid, |z| (-0.5 * z * z / var).exp());
        let res = gradient_flow_residual(&field, &mu_hat, beta).unwrap();
        assert!(res < 1e-2, "residual {res}");
    }

    #[test]
    fn effective_coefficients_mcmc_matches_oracle() {
        // Coupled quadratic (c = 0.5, eps = 0.1, beta = 1): b(1) = 0.975
        // within 2 standard errors; A = 1 exactly. Separable (c = 0):
        // b(z) = V1'(z) = z, with the Laplacian term identically absent for
        // the affine map.
        use crate::sampling::ChainConfig;
        let map = CoarseMap::coordinate(2, 1);
        let grid = Grid1::new(0.5, 1.5, 2); // centers 0.75, 1.25
        let cfg = ChainConfig { burn_in: 3_000, ..Default::default() };
        for (c, check) in [(0.5, true), (0.0, true)] {
            let entry = crate::model::CatalogPotential::CoupledQuadratic { c, epsilon: 0.1 };
            let m = GibbsMeasure::new(entry.build(), 1.0, vec![(-6.0, 6.0), (-2.0, 2.0)]);
            let field = effective_coefficients(
                &m,
                &map,
                &grid,
                8_000,
                &cfg,
                crate::rng::SeedLineage::new(77, 0),
            )
            .unwrap();
            let eff = entry.analytic_effective(1.0).unwrap();
            for cell in 0..grid.n {
                let z = grid.center(cell);
                let expect = eff.drift(z);
                let se = field.stderr_b[cell][0].max(1e-6);
                assert!(
                    (field.b[cell][0] - expect).abs() <= 2.5 * se,
                    "c {c}: b({z}) = {} vs {expect} (se {se})",
                    field.b[cell][0]
                );
                assert!((field.a[cell][(0, 0)] - 1.0).abs() < 1e-12, "A is exactly 1");
            }
            let _ = check;
        }
    }

    #[test]
    fn effective_coefficients_langevin_mode() {
        // Phase-space coefficients of the coupled quadratic: the drift is
        // independent of v and matches the configuration-space closure, the
        // diffusion is exactly T T^T in every cell.
        use crate::model::PhaseMap;
        use crate::sampling::ChainConfig;
        let entry = crate::model::CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 };
        let m = GibbsMeasure::new(entry.build(), 1.0, vec![(-6.0, 6.0), (-2.0, 2.0)]);
        let pm = PhaseMap::new(CoarseMap::coordinate(2, 1)).unwrap();
        let gz = Grid1::new(0.0, 2.0, 2);
        let gv = Grid1::new(-1.0, 1.0, 2);
        let cfg = ChainConfig { burn_in: 3_000, ..Default::default() };
        let field = effective_coefficients_langevin(
            &m,
            &pm,
            &gz,
            &gv,
            6_000,
            &cfg,
            crate::rng::SeedLineage::new(79, 0),
        )
        .unwrap();
        let eff = entry.analytic_effective(1.0).unwrap();
        for iz in 0..gz.n {
            let z = gz.center(iz);
            for iv in 0..gv.n {
                let cell = iz * gv.n + iv;
                let se = field.stderr_b[cell][0].max(1e-6);
                assert!(
                    (field.b[cell][0] - eff.drift(z)).abs() <= 3.0 * se,
                    "b({z}, v) = {} vs {}",
                    field.b[cell][0],
                    eff.drift(z)
                );
                assert!((field.a[cell][(0, 0)] - 1.0).abs() < 1e-15, "A = T T^T exactly");
            }
        }
    }

    #[test]
    fn cg_ensemble_matches_effective_at_stationarity() {
        // A Gibbs ensemble's coarse-grained coefficients equal the effective
        // ones cellwise within combined error bars, and the
        // finite-difference drift Lipschitz estimate stays bounded.
        use crate::sampling::{sample_gibbs, ChainConfig};
        let entry = crate::model::CatalogPotential::CoupledQuadratic { c: 0.5, epsilon: 0.1 };
        let pot = entry.build();
        let m = GibbsMeasure::new(pot.clone(), 1.0, vec![(-6.0, 6.0), (-2.0, 2.0)]);
        let cfg = ChainConfig { burn_in: 5_000, ..Default::default() };
        let (ens, _) =
            sample_gibbs(&m, 120_000, &cfg, crate::rng::SeedLineage::new(78, 0)).unwrap();
        let map = CoarseMap::coordinate(2, 1);
        let grid = Grid1::new(-3.0, 3.0, 12);
        let field = cg_coefficients_ensemble(&ens, &pot, &map, 1.0, &grid);
        let eff = entry.analytic_effective(1.0).unwrap();
        let mut checked = 0;
        for cell in 0..grid.n {
            if field.counts[cell] < 500 {
                continue;
            }
            let z = grid.center(cell);
            // Binning averages b over the cell; compare against the
            // cell-averaged analytic drift (linear, so the center value).
            let expect = eff.drift(z);
            let se = field.stderr_b[cell][0];
            // The bin-center offset adds up to h/2 x slope of b of bias.
            let bias = 0.5 * grid.h * 0.975;
            assert!(
                (field.b[cell][0] - expect).abs() <= 3.0 * se + bias,
                "b({z}) = {} vs {expect} (se {se})",
                field.b[cell][0]
            );
            checked += 1;
        }
        assert!(checked >= 6, "too few occupied cells ({checked})");
        let lip = field.drift_lipschitz_estimate();
        assert!(lip.is_finite() && lip < 5.0, "drift Lipschitz estimate {lip}");
    }

    #[test]
    fn levelset_identity_bump_in_z_only() {
        // psi depending on q1 alone: both sides equal the bump derivative
        // times the fiber length; cells where the marginal vanishes are
        // excluded by the division guard.
        let eval = move |q: &[f64]| {
            let x = q[0];
            if x.abs() < 1.0 {
                let w = 1.0 - x * x;
                (-1.0 / w).exp()
            } else {
                0.0
            }
        };
        let grad = move |q: &[f64]| {
            let x = q[0];
            if x.abs() < 1.0 {
                let w = 1.0 - x * x;
                vec![(-1.0 / w).exp() * (-2.0 * x / (w * w)), 0.0]
            } else {
                vec![0.0, 0.0]
            }
        };
        let field = ScalarField { eval: &eval, grad: &grad };
        let coarse = Grid1::new(-1.5, 1.5, 256);
        let map = CoarseMap::coordinate(2, 1);
        let err = levelset_gradient_check(&field, &map, &[(-2.0, 2.0), (-2.0, 2.0)], &coarse)
            .unwrap();
        assert!(err < 1e-2, "bump error {err}");
    }

    #[test]
    fn time_series_closure_interpolates() {
        let grid = Grid1::new(-1.0, 1.0, 4);
        let mk = |t: f64, v: f64| CoefficientField {
            axes: vec![grid.clone()],
            k: 1,
            b: vec![vec![v]; 4],
            a: vec![Mat::identity(1); 4],
            counts: vec![1; 4],
            stderr_b: vec![vec![0.0]; 4],
            time: Some(t),
        };
        let ts = TimeSeriesClosure::new(vec![mk(0.0, 1.0), mk(1.0, 3.0)]);
        let b = ts.drift(0.5, &[0.0]).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12);
        let b = ts.drift(2.0, &[0.0]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn field_extrapolation_and_empty_cells() {
        let grid = Grid1::new(-1.0, 1.0, 4);
        let field = CoefficientField {
            axes: vec![grid],
            k: 1,
            b: vec![vec![1.0], vec![2.0], vec![0.0], vec![4.0]],
            a: vec![Mat::identity(1); 4],
            counts: vec![1, 1, 0, 1],
            stderr_b: vec![vec![0.0]; 4],
            time: None,
        };
        assert!(matches!(
            CoarseClosure::drift(&field, &[5.0]),
            Err(Error::Extrapolation { .. })
        ));
        // Interpolation across the empty cell uses the occupied neighbours.
        let b = CoarseClosure::drift(&field, &[0.25]).unwrap();
        assert!((b[0] - 3.0).abs() < 1e-12, "b {}", b[0]);
    }
}
