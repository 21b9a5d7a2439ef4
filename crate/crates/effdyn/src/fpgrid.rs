//! Finite-volume Fokker-Planck solvers on rectangular grids.
//!
//! Fluxes use exponential fitting (Scharfetter-Gummel / Chang-Cooper): the
//! interface flux is (D/h^2) [B(-w) m_R - B(w) m_L] with B(x) = x/(e^x - 1)
//! and w the dimensionless potential drop across the face. Consequences,
//! all exact by construction:
//!   - the cell-center Gibbs vector is a stationary state,
//!   - each explicit step is a stochastic matrix, so mass is conserved,
//!     positivity is preserved, and H(rho_t | mu) cannot increase,
//!
//! provided dt stays below the stochasticity bound (enforced here).

use crate::closure::TimeClosure;
use crate::linalg;
use crate::model::Potential;
use crate::{Error, Result};

/// Uniform cell grid on an interval, cells centered at lo + (i + 1/2) h.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1 {
    pub lo: f64,
    pub h: f64,
    pub n: usize,
}

impl Grid1 {
    pub fn new(lo: f64, hi: f64, n: usize) -> Self {
        assert!(hi > lo && n > 0);
        Grid1 { lo, h: (hi - lo) / n as f64, n }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.h * self.n as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing x, or None outside the grid.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi() {
            return None;
        }
        let i = ((x - self.lo) / self.h) as usize;
        Some(i.min(self.n - 1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    pub x: Grid1,
    pub y: Grid1,
}

impl Grid2 {
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        ix * self.y.n + iy
    }

    pub fn cells(&self) -> usize {
        self.x.n * self.y.n
    }

    pub fn center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.x.center(ix), self.y.center(iy)]
    }
}

/// Probability masses on a 1D grid (values sum to 1).
#[derive(Debug, Clone)]
pub struct GridDensity1 {
    pub grid: Grid1,
    pub mass: Vec<f64>,
    pub time: f64,
}

impl GridDensity1 {
    /// Build from a density function by 3-point Gauss quadrature per cell,
    /// then normalize.
    pub fn from_fn(grid: Grid1, f: impl Fn(f64) -> f64) -> Self {
        let gl = [
            (-0.7745966692414834, 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            (0.7745966692414834, 5.0 / 9.0),
        ];
        let mut mass = vec![0.0; grid.n];
        for i in 0..grid.n {
            let c = grid.center(i);
            let mut s = 0.0;
            for (x, w) in gl {
                s += w * f(c + 0.5 * grid.h * x);
            }
            mass[i] = s * 0.5 * grid.h;
        }
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        GridDensity1 { grid, mass, time: 0.0 }
    }

    /// Build proportional to cell-center values (the solver's own notion of
    /// a discrete density; its Gibbs vector is exactly stationary).
    pub fn from_centers(grid: Grid1, f: impl Fn(f64) -> f64) -> Self {
        let mut mass: Vec<f64> = (0..grid.n).map(|i| f(grid.center(i))).collect();
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        GridDensity1 { grid, mass, time: 0.0 }
    }

    pub fn gaussian(grid: Grid1, mean: f64, var: f64) -> Self {
        GridDensity1::from_fn(grid, |x| (-(x - mean) * (x - mean) / (2.0 * var)).exp())
    }

    pub fn mass_total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        (0..self.grid.n).map(|i| self.mass[i] * self.grid.center(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        (0..self.grid.n)
            .map(|i| {
                let d = self.grid.center(i) - m;
                self.mass[i] * d * d
            })
            .sum()
    }

    pub fn second_moment(&self) -> f64 {
        (0..self.grid.n)
            .map(|i| {
                let c = self.grid.center(i);
                self.mass[i] * c * c
            })
            .sum()
    }

    pub fn write_csv(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "z,mass")?;
        for i in 0..self.grid.n {
            writeln!(w, "{:.17e},{:.17e}", self.grid.center(i), self.mass[i])?;
        }
        Ok(())
    }
}

/// Probability masses on a 2D grid (row-major over (ix, iy), sum 1).
#[derive(Debug, Clone)]
pub struct GridDensity2 {
    pub grid: Grid2,
    pub mass: Vec<f64>,
    pub time: f64,
}

impl GridDensity2 {
    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        let gl = [
            (-0.7745966692414834, 5.0 / 9.0),
            (0.0, 8.0 / 9.0),
            (0.7745966692414834, 5.0 / 9.0),
        ];
        let mut mass = vec![0.0; grid.cells()];
        for ix in 0..grid.x.n {
            for iy in 0..grid.y.n {
                let [cx, cy] = grid.center(ix, iy);
                let mut s = 0.0;
                for (ax, wx) in gl {
                    for (ay, wy) in gl {
                        s += wx * wy * f(cx + 0.5 * grid.x.h * ax, cy + 0.5 * grid.y.h * ay);
                    }
                }
                mass[grid.idx(ix, iy)] = s * 0.25 * grid.x.h * grid.y.h;
            }
        }
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        GridDensity2 { grid, mass, time: 0.0 }
    }

    pub fn from_centers(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut mass = vec![0.0; grid.cells()];
        for ix in 0..grid.x.n {
            for iy in 0..grid.y.n {
                let [cx, cy] = grid.center(ix, iy);
                mass[grid.idx(ix, iy)] = f(cx, cy);
            }
        }
        let total: f64 = mass.iter().sum();
        for m in &mut mass {
            *m /= total;
        }
        GridDensity2 { grid, mass, time: 0.0 }
    }

    /// Discrete Gibbs state exp(-beta V) at cell centers, normalized. This is
    /// the exact stationary vector of the solver on the same grid.
    pub fn gibbs(pot: &Potential, beta: f64, grid: Grid2) -> Self {
        let mut vmin = f64::INFINITY;
        for ix in 0..grid.x.n {
            for iy in 0..grid.y.n {
                let [cx, cy] = grid.center(ix, iy);
                vmin = vmin.min(pot.value(&[cx, cy]));
            }
        }
        GridDensity2::from_centers(grid, |x, y| (-beta * (pot.value(&[x, y]) - vmin)).exp())
    }

    pub fn mass_total(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn mean(&self) -> [f64; 2] {
        let mut m = [0.0, 0.0];
        for ix in 0..self.grid.x.n {
            for iy in 0..self.grid.y.n {
                let w = self.mass[self.grid.idx(ix, iy)];
                m[0] += w * self.grid.x.center(ix);
                m[1] += w * self.grid.y.center(iy);
            }
        }
        m
    }

    pub fn covariance(&self) -> linalg::Mat {
        let m = self.mean();
        let mut c = linalg::Mat::zeros(2, 2);
        for ix in 0..self.grid.x.n {
            for iy in 0..self.grid.y.n {
                let w = self.mass[self.grid.idx(ix, iy)];
                let dx = self.grid.x.center(ix) - m[0];
                let dy = self.grid.y.center(iy) - m[1];
                c[(0, 0)] += w * dx * dx;
                c[(0, 1)] += w * dx * dy;
                c[(1, 1)] += w * dy * dy;
            }
        }
        c[(1, 0)] = c[(0, 1)];
        c
    }

    pub fn second_moment(&self) -> f64 {
        let mut s = 0.0;
        for ix in 0..self.grid.x.n {
            for iy in 0..self.grid.y.n {
                let cx = self.grid.x.center(ix);
                let cy = self.grid.y.center(iy);
                s += self.mass[self.grid.idx(ix, iy)] * (cx * cx + cy * cy);
            }
        }
        s
    }

    /// Mass sitting in the outermost ring of cells.
    pub fn boundary_mass(&self) -> f64 {
        let (nx, ny) = (self.grid.x.n, self.grid.y.n);
        let mut s = 0.0;
        for ix in 0..nx {
            for iy in 0..ny {
                if ix == 0 || iy == 0 || ix == nx - 1 || iy == ny - 1 {
                    s += self.mass[self.grid.idx(ix, iy)];
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory1 {
    pub times: Vec<f64>,
    pub states: Vec<GridDensity1>,
}

#[derive(Debug, Clone)]
pub struct Trajectory2 {
    pub times: Vec<f64>,
    pub states: Vec<GridDensity2>,
    /// The explicit step the solver actually used.
    pub dt: f64,
}

/// Bernoulli function B(x) = x / (e^x - 1), the exponential-fitting kernel.
#[inline]
pub fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x + x * x / 12.0
    } else if x > 500.0 {
        0.0
    } else if x < -500.0 {
        -x
    } else {
        x / (x.exp() - 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Explicit time step; None picks the largest stable step.
    pub dt: Option<f64>,
    /// Dimension-split implicit stepping (for stiff scale separation).
    pub semi_implicit: bool,
    /// Boundary-ring mass fraction above which the box is declared too small.
    pub leak_threshold: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { dt: None, semi_implicit: false, leak_threshold: 1e-8 }
    }
}

/// Face rates for one direction: flux across face f (between cells f and
/// f+1) is gain_right[f] * m_{f+1} - gain_left[f] * m_f, in mass units.
struct FaceRates {
    from_right: Vec<f64>,
    from_left: Vec<f64>,
}

fn face_rates_1d(diff_over_h2: impl Fn(usize) -> f64, w: impl Fn(usize) -> f64, n: usize) -> FaceRates {
    let mut from_right = vec![0.0; n.saturating_sub(1)];
    let mut from_left = vec![0.0; n.saturating_sub(1)];
    for f in 0..n.saturating_sub(1) {
        let d = diff_over_h2(f);
        let wf = w(f);
        from_right[f] = d * bernoulli(-wf);
        from_left[f] = d * bernoulli(wf);
    }
    FaceRates { from_right, from_left }
}

/// Largest dt keeping I + dt Q a stochastic matrix, with safety margin.
fn stable_dt(out_rate_max: f64) -> f64 {
    0.95 / out_rate_max
}

/// Solve the full overdamped Fokker-Planck equation
/// d_t rho = div(rho grad V) + beta^{-1} Lap rho on a 2D no-flux box,
/// recording snapshots at `output_times` (which must start at the initial
/// time of `rho0` and be increasing).
pub fn solve_full_overdamped_2d(
    pot: &Potential,
    beta: f64,
    rho0: &GridDensity2,
    output_times: &[f64],
    opts: &SolveOptions,
) -> Result<Trajectory2> {
    let grid = rho0.grid.clone();
    let (nx, ny) = (grid.x.n, grid.y.n);
    let d_coeff = 1.0 / beta;

    // Potential at cell centers.
    let mut v = vec![0.0; grid.cells()];
    for ix in 0..nx {
        for iy in 0..ny {
            let [cx, cy] = grid.center(ix, iy);
            v[grid.idx(ix, iy)] = pot.value(&[cx, cy]);
        }
    }

    // Static face rates per direction.
    let hx2 = grid.x.h * grid.x.h;
    let hy2 = grid.y.h * grid.y.h;
    let mut xr = vec![0.0; (nx - 1) * ny];
    let mut xl = vec![0.0; (nx - 1) * ny];
    for ix in 0..nx - 1 {
        for iy in 0..ny {
            let w = beta * (v[grid.idx(ix + 1, iy)] - v[grid.idx(ix, iy)]);
            xr[ix * ny + iy] = d_coeff / hx2 * bernoulli(-w);
            xl[ix * ny + iy] = d_coeff / hx2 * bernoulli(w);
        }
    }
    let mut yr = vec![0.0; nx * (ny - 1)];
    let mut yl = vec![0.0; nx * (ny - 1)];
    for ix in 0..nx {
        for iy in 0..ny - 1 {
            let w = beta * (v[grid.idx(ix, iy + 1)] - v[grid.idx(ix, iy)]);
            yr[ix * (ny - 1) + iy] = d_coeff / hy2 * bernoulli(-w);
            yl[ix * (ny - 1) + iy] = d_coeff / hy2 * bernoulli(w);
        }
    }

    // Total outflow rate per cell bounds the stable step.
    let mut out_rate_max = 0.0_f64;
    {
        let mut out = vec![0.0; grid.cells()];
        for ix in 0..nx - 1 {
            for iy in 0..ny {
                out[grid.idx(ix, iy)] += xl[ix * ny + iy];
                out[grid.idx(ix + 1, iy)] += xr[ix * ny + iy];
            }
        }
        for ix in 0..nx {
            for iy in 0..ny - 1 {
                out[grid.idx(ix, iy)] += yl[ix * (ny - 1) + iy];
                out[grid.idx(ix, iy + 1)] += yr[ix * (ny - 1) + iy];
            }
        }
        for r in out {
            out_rate_max = out_rate_max.max(r);
        }
    }
    let dt_cap = (0.4 * grid.x.h.min(grid.y.h).powi(2) * beta).min(stable_dt(out_rate_max));
    let dt = match opts.dt {
        Some(dt) => {
            if !opts.semi_implicit && dt > stable_dt(out_rate_max) {
                return Err(Error::CflViolation { dt, max_dt: stable_dt(out_rate_max) });
            }
            dt
        }
        None => dt_cap,
    };

    let mut m = rho0.mass.clone();
    let mut t = rho0.time;
    let mut traj = Trajectory2 { times: Vec::new(), states: Vec::new(), dt };
    let mut flux = vec![0.0; grid.cells()];

    for &t_out in output_times {
        if t_out < t - 1e-12 {
            return Err(Error::Numerical("output times must be increasing".into()));
        }
        while t < t_out - 1e-12 {
            let step = dt.min(t_out - t);
            if opts.semi_implicit {
                implicit_sweep_x(&grid, &mut m, &xr, &xl, step);
                implicit_sweep_y(&grid, &mut m, &yr, &yl, step);
            } else {
                flux.iter_mut().for_each(|f| *f = 0.0);
                for ix in 0..nx - 1 {
                    for iy in 0..ny {
                        let f = xr[ix * ny + iy] * m[grid.idx(ix + 1, iy)]
                            - xl[ix * ny + iy] * m[grid.idx(ix, iy)];
                        flux[grid.idx(ix, iy)] += f;
                        flux[grid.idx(ix + 1, iy)] -= f;
                    }
                }
                for ix in 0..nx {
                    for iy in 0..ny - 1 {
                        let f = yr[ix * (ny - 1) + iy] * m[grid.idx(ix, iy + 1)]
                            - yl[ix * (ny - 1) + iy] * m[grid.idx(ix, iy)];
                        flux[grid.idx(ix, iy)] += f;
                        flux[grid.idx(ix, iy + 1)] -= f;
                    }
                }
                for (mi, fi) in m.iter_mut().zip(&flux) {
                    *mi += step * fi;
                }
            }
            t += step;
        }
        t = t_out;
        let state = GridDensity2 { grid: grid.clone(), mass: m.clone(), time: t };
        let leak = state.boundary_mass();
        if leak > opts.leak_threshold {
            return Err(Error::BoxTooSmall { leak, threshold: opts.leak_threshold });
        }
        traj.times.push(t);
        traj.states.push(state);
    }
    Ok(traj)
}

fn implicit_sweep_x(grid: &Grid2, m: &mut [f64], xr: &[f64], xl: &[f64], dt: f64) {
    let (nx, ny) = (grid.x.n, grid.y.n);
    let mut lower = vec![0.0; nx];
    let mut diag = vec![0.0; nx];
    let mut upper = vec![0.0; nx];
    let mut rhs = vec![0.0; nx];
    for iy in 0..ny {
        for ix in 0..nx {
            let mut d = 1.0;
            if ix > 0 {
                d += dt * xr[(ix - 1) * ny + iy];
                lower[ix] = -dt * xl[(ix - 1) * ny + iy];
            } else {
                lower[ix] = 0.0;
            }
            if ix < nx - 1 {
                d += dt * xl[ix * ny + iy];
                upper[ix] = -dt * xr[ix * ny + iy];
            } else {
                upper[ix] = 0.0;
            }
            diag[ix] = d;
            rhs[ix] = m[grid.idx(ix, iy)];
        }
        thomas(&lower, &mut diag, &upper, &mut rhs);
        for ix in 0..nx {
            m[grid.idx(ix, iy)] = rhs[ix];
        }
    }
}

fn implicit_sweep_y(grid: &Grid2, m: &mut [f64], yr: &[f64], yl: &[f64], dt: f64) {
    let (nx, ny) = (grid.x.n, grid.y.n);
    let mut lower = vec![0.0; ny];
    let mut diag = vec![0.0; ny];
    let mut upper = vec![0.0; ny];
    let mut rhs = vec![0.0; ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let mut d = 1.0;
            if iy > 0 {
                d += dt * yr[ix * (ny - 1) + iy - 1];
                lower[iy] = -dt * yl[ix * (ny - 1) + iy - 1];
            } else {
                lower[iy] = 0.0;
            }
            if iy < ny - 1 {
                d += dt * yl[ix * (ny - 1) + iy];
                upper[iy] = -dt * yr[ix * (ny - 1) + iy];
            } else {
                upper[iy] = 0.0;
            }
            diag[iy] = d;
            rhs[iy] = m[grid.idx(ix, iy)];
        }
        thomas(&lower, &mut diag, &upper, &mut rhs);
        for iy in 0..ny {
            m[grid.idx(ix, iy)] = rhs[iy];
        }
    }
}

/// Tridiagonal solve; diag and rhs are consumed as scratch.
fn thomas(lower: &[f64], diag: &mut [f64], upper: &[f64], rhs: &mut [f64]) {
    let n = diag.len();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    rhs[n - 1] /= diag[n - 1];
    for i in (0..n - 1).rev() {
        rhs[i] = (rhs[i] - upper[i] * rhs[i + 1]) / diag[i];
    }
}

/// 1D full overdamped solve (same scheme).
pub fn solve_full_overdamped_1d(
    pot: &Potential,
    beta: f64,
    rho0: &GridDensity1,
    output_times: &[f64],
    opts: &SolveOptions,
) -> Result<Trajectory1> {
    let grid = rho0.grid.clone();
    let n = grid.n;
    let d_over_h2 = 1.0 / (beta * grid.h * grid.h);
    let v: Vec<f64> = grid.centers().iter().map(|&x| pot.value(&[x])).collect();
    let rates = face_rates_1d(
        |_f| d_over_h2,
        |f| beta * (v[f + 1] - v[f]),
        n,
    );
    step_explicit_1d(&grid, rho0, output_times, opts, move |_t| rates_ref(&rates))
}

fn rates_ref(r: &FaceRates) -> (Vec<f64>, Vec<f64>) {
    (r.from_right.clone(), r.from_left.clone())
}

/// Solve the coarse-grained / effective equation
/// d_t rho = beta^{-1} d_zz (A rho) + d_z (rho b)
/// for a (possibly time-dependent) closure. The total flux
/// beta^{-1} d_z (A rho) + b rho is discretized in divergence form with the
/// drift u = b + beta^{-1} d_z A absorbed into the exponential fitting.
pub fn solve_coarse(
    closure: &dyn TimeClosure,
    beta: f64,
    rho0: &GridDensity1,
    output_times: &[f64],
    opts: &SolveOptions,
) -> Result<Trajectory1> {
    let grid = rho0.grid.clone();
    let n = grid.n;
    let h = grid.h;
    let centers = grid.centers();
    let a_at = |t: f64, z: f64| -> Result<f64> {
        let a = closure.diffusion(t, &[z])?;
        Ok(a[(0, 0)].max(1e-12))
    };
    let build = move |t: f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let a_c: Vec<f64> = centers
            .iter()
            .map(|&z| a_at(t, z))
            .collect::<Result<Vec<f64>>>()?;
        let mut from_right = vec![0.0; n - 1];
        let mut from_left = vec![0.0; n - 1];
        for f in 0..n - 1 {
            let zf = 0.5 * (centers[f] + centers[f + 1]);
            let a_face = 0.5 * (a_c[f] + a_c[f + 1]);
            let d = a_face / beta;
            let b = closure.drift(t, &[zf])?[0];
            let da = (a_c[f + 1] - a_c[f]) / h;
            let u = b + da / beta;
            let w = u * h / d;
            from_right[f] = d / (h * h) * bernoulli(-w);
            from_left[f] = d / (h * h) * bernoulli(w);
        }
        Ok((from_right, from_left))
    };
    step_explicit_1d_fallible(&grid, rho0, output_times, opts, build)
}

fn step_explicit_1d(
    grid: &Grid1,
    rho0: &GridDensity1,
    output_times: &[f64],
    opts: &SolveOptions,
    rates: impl Fn(f64) -> (Vec<f64>, Vec<f64>),
) -> Result<Trajectory1> {
    step_explicit_1d_fallible(grid, rho0, output_times, opts, move |t| Ok(rates(t)))
}

fn step_explicit_1d_fallible(
    grid: &Grid1,
    rho0: &GridDensity1,
    output_times: &[f64],
    opts: &SolveOptions,
    rates: impl Fn(f64) -> Result<(Vec<f64>, Vec<f64>)>,
) -> Result<Trajectory1> {
    let n = grid.n;
    let mut m = rho0.mass.clone();
    let mut t = rho0.time;
    let mut traj = Trajectory1 { times: Vec::new(), states: Vec::new() };

    // Stability from the initial rates: a cell's outflow rate is
    // from_left of its right face plus from_right of its left face.
    // Time-dependent closures stay within the same magnitude at desk scale.
    let (r0, l0) = rates(t)?;
    let mut per_cell = vec![0.0; n];
    for f in 0..n - 1 {
        per_cell[f] += l0[f];
        per_cell[f + 1] += r0[f];
    }
    let out_max = per_cell.iter().cloned().fold(0.0, f64::max);
    let dt = match opts.dt {
        Some(dt) => {
            if dt > stable_dt(out_max) {
                return Err(Error::CflViolation { dt, max_dt: stable_dt(out_max) });
            }
            dt
        }
        None => stable_dt(out_max),
    };

    for &t_out in output_times {
        if t_out < t - 1e-12 {
            return Err(Error::Numerical("output times must be increasing".into()));
        }
        while t < t_out - 1e-12 {
            let step = dt.min(t_out - t);
            let (fr, fl) = rates(t)?;
            let mut new_m = m.clone();
            for f in 0..n - 1 {
                let flux = fr[f] * m[f + 1] - fl[f] * m[f];
                new_m[f] += step * flux;
                new_m[f + 1] -= step * flux;
            }
            m = new_m;
            t += step;
        }
        t = t_out;
        let state = GridDensity1 { grid: grid.clone(), mass: m.clone(), time: t };
        let leak = state.mass[0] + state.mass[n - 1];
        if leak > opts.leak_threshold {
            return Err(Error::BoxTooSmall { leak, threshold: opts.leak_threshold });
        }
        traj.times.push(t);
        traj.states.push(state);
    }
    Ok(traj)
}

/// Box sized to roughly eight Gibbs standard deviations per coordinate:
/// expand from the potential minimum until beta (V - Vmin) >= 32.
pub fn suggested_box(pot: &Potential, beta: f64) -> Vec<(f64, f64)> {
    let d = pot.dim;
    // Crude multi-start descent for the minimum.
    let mut best = vec![0.0; d];
    let mut best_v = pot.value(&best);
    let seeds: Vec<Vec<f64>> = match d {
        1 => vec![vec![-1.0], vec![0.0], vec![1.0]],
        2 => vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ],
        _ => vec![vec![0.0; d]],
    };
    for seed in seeds {
        let mut q = seed;
        for _ in 0..200 {
            let g = pot.gradient(&q);
            let gn = linalg::norm(&g);
            if gn < 1e-10 {
                break;
            }
            let step = 0.1 / (1.0 + gn);
            for (qi, gi) in q.iter_mut().zip(&g) {
                *qi -= step * gi;
            }
        }
        let v = pot.value(&q);
        if v < best_v {
            best_v = v;
            best = q;
        }
    }
    let target = 32.0 / beta;
    (0..d)
        .map(|i| {
            let mut r = 1e-3;
            loop {
                let mut qp = best.clone();
                qp[i] += r;
                let mut qm = best.clone();
                qm[i] -= r;
                let dv = (pot.value(&qp) - best_v).min(pot.value(&qm) - best_v);
                if dv >= target || r > 1e6 {
                    break;
                }
                r *= 1.25;
            }
            (best[i] - r, best[i] + r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CatalogPotential;

    fn quad_pot_1d() -> Potential {
        Potential::from_expr("q1^2/2", 1).unwrap()
    }

    #[test]
    fn bernoulli_basics() {
        assert!((bernoulli(0.0) - 1.0).abs() < 1e-12);
        assert!((bernoulli(1e-9) - 1.0).abs() < 1e-8);
        // B(-x) = e^x B(x)
        for x in [0.3, 1.7, 5.0] {
            assert!((bernoulli(-x) - x.exp() * bernoulli(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_gibbs_is_stationary_1d() {
        let pot = quad_pot_1d();
        let grid = Grid1::new(-8.0, 8.0, 128);
        let mu = GridDensity1::from_centers(grid.clone(), |x| (-0.5 * x * x).exp());
        let traj =
            solve_full_overdamped_1d(&pot, 1.0, &mu, &[0.5], &SolveOptions::default()).unwrap();
        for (a, b) in traj.states[0].mass.iter().zip(&mu.mass) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn ou_moments_1d() {
        // V = q^2/2, beta = 1, rho0 = N(1, 0.25): mean e^{-t},
        // var 1 + (0.25-1) e^{-2t}, within 1% at t = 1 on 512 cells.
        let pot = quad_pot_1d();
        let grid = Grid1::new(-8.0, 8.0, 512);
        let rho0 = GridDensity1::gaussian(grid, 1.0, 0.25);
        let traj =
            solve_full_overdamped_1d(&pot, 1.0, &rho0, &[1.0], &SolveOptions::default()).unwrap();
        let s = &traj.states[0];
        let mean_exact = (-1.0_f64).exp();
        let var_exact = 1.0 + (0.25 - 1.0) * (-2.0_f64).exp();
        assert!((s.mean() - mean_exact).abs() < 0.01 * mean_exact);
        assert!((s.variance() - var_exact).abs() < 0.01 * var_exact);
        assert!((s.mass_total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_stationary_2d_and_mass_conserved() {
        let pot = CatalogPotential::CoupledQuadratic { c: 0.25, epsilon: 0.1 }.build();
        let grid = Grid2 {
            x: Grid1::new(-8.0, 8.0, 48),
            y: Grid1::new(-2.6, 2.6, 48),
        };
        let mu = GridDensity2::gibbs(&pot, 1.0, grid);
        let traj =
            solve_full_overdamped_2d(&pot, 1.0, &mu, &[0.2], &SolveOptions::default()).unwrap();
        for (a, b) in traj.states[0].mass.iter().zip(&mu.mass) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((traj.states[0].mass_total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semi_implicit_matches_explicit() {
        let pot = CatalogPotential::CoupledQuadratic { c: 0.25, epsilon: 0.1 }.build();
        let grid = Grid2 {
            x: Grid1::new(-8.0, 8.0, 32),
            y: Grid1::new(-2.6, 2.6, 32),
        };
        let rho0 = GridDensity2::from_fn(grid, |x, y| {
            (-((x - 1.0) * (x - 1.0) + y * y * 8.0) / 0.5).exp()
        });
        let expl =
            solve_full_overdamped_2d(&pot, 1.0, &rho0, &[0.3], &SolveOptions::default()).unwrap();
        let opts = SolveOptions { semi_implicit: true, dt: Some(2e-4), ..Default::default() };
        let impl_ = solve_full_overdamped_2d(&pot, 1.0, &rho0, &[0.3], &opts).unwrap();
        let l1: f64 = expl.states[0]
            .mass
            .iter()
            .zip(&impl_.states[0].mass)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 < 5e-3, "L1 gap explicit vs semi-implicit {l1}");
    }

    #[test]
    fn cfl_violation_detected() {
        let pot = quad_pot_1d();
        let grid = Grid1::new(-8.0, 8.0, 128);
        let rho0 = GridDensity1::gaussian(grid, 0.0, 1.0);
        let opts = SolveOptions { dt: Some(1.0), ..Default::default() };
        let err = solve_full_overdamped_1d(&pot, 1.0, &rho0, &[0.5], &opts).unwrap_err();
        assert!(matches!(err, Error::CflViolation { .. }));
    }

    #[test]
    fn box_too_small_detected() {
        let pot = quad_pot_1d();
        let grid = Grid1::new(-2.0, 2.0, 64);
        let rho0 = GridDensity1::gaussian(grid, 0.0, 1.0);
        let err = solve_full_overdamped_1d(&pot, 1.0, &rho0, &[1.0], &SolveOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::BoxTooSmall { .. }));
    }

    #[test]
    fn heat_kernel_variance_growth() {
        // Zero drift, A = 1: variance grows as 2 t / beta.
        use crate::closure::ScalarClosure;
        let closure = ScalarClosure::new(|_z| 0.0, |_z| 1.0);
        let grid = Grid1::new(-14.0, 14.0, 512);
        let rho0 = GridDensity1::gaussian(grid, 0.0, 0.5);
        let beta = 1.0;
        let traj = solve_coarse(&closure, beta, &rho0, &[1.0], &SolveOptions::default()).unwrap();
        let v = traj.states[0].variance();
        let expect = 0.5 + 2.0 / beta;
        assert!((v - expect).abs() < 0.01 * expect, "{v} vs {expect}");
    }

    #[test]
    fn effective_gaussian_stationary() {
        // b(z) = z, A = 1, beta = 1: mu_hat = N(0,1) stationary to 1e-10.
        use crate::closure::ScalarClosure;
        let closure = ScalarClosure::new(|z| z, |_z| 1.0);
        let grid = Grid1::new(-8.0, 8.0, 256);
        let mu = GridDensity1::from_centers(grid, |z| (-0.5 * z * z).exp());
        let traj = solve_coarse(&closure, 1.0, &mu, &[1.0], &SolveOptions::default()).unwrap();
        for (a, b) in traj.states[0].mass.iter().zip(&mu.mass) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn suggested_box_covers_gaussian() {
        let pot = quad_pot_1d();
        let b = suggested_box(&pot, 1.0);
        assert!(b[0].0 < -7.5 && b[0].1 > 7.5);
        assert!(b[0].0 > -10.0 && b[0].1 < 10.0);
    }
}
