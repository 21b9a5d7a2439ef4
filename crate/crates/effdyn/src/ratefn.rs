//! The large-deviation rate functional on coarse trajectories and the
//! assembly of every error bound into a falsifiable report.
//!
//! The rate functional of a trajectory (rho_t) relative to the effective
//! closure (b, A) is
//!     I = (beta/4) int_0^T int |h_t|^2_{A^{-1}} d rho_t dt,
//! with the mismatch field
//!     h_t = (b + beta^{-1} d_z A) - (bhat + beta^{-1} d_z Ahat)
//!           + beta^{-1} (A - Ahat) d_z log rho_t.
//! I vanishes exactly when the trajectory solves the effective equation; it
//! controls the relative entropy through H_t <= H_0 + I.

use crate::closure::{CoarseClosure, TimeClosure};
use crate::fpgrid::{GridDensity1, GridDensity2, Trajectory1, Trajectory2};
use crate::funcineq::ConstantsReport;
use crate::metrics;
use crate::model::{CoarseMap, Potential};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremId {
    RelEntOverdamped,
    WasserOverdamped,
    RelEntLangevin,
    WasserLangevin,
    EntropyRate,
}

impl TheoremId {
    pub fn as_str(&self) -> &'static str {
        match self {
            TheoremId::RelEntOverdamped => "relent-od",
            TheoremId::WasserOverdamped => "wasser-od",
            TheoremId::RelEntLangevin => "relent-lan",
            TheoremId::WasserLangevin => "wasser-lan",
            TheoremId::EntropyRate => "entropy-rate",
        }
    }

    pub fn parse(s: &str) -> Option<TheoremId> {
        match s {
            "relent-od" => Some(TheoremId::RelEntOverdamped),
            "wasser-od" => Some(TheoremId::WasserOverdamped),
            "relent-lan" => Some(TheoremId::RelEntLangevin),
            "wasser-lan" => Some(TheoremId::WasserLangevin),
            "entropy-rate" => Some(TheoremId::EntropyRate),
            _ => None,
        }
    }
}

/// Assembled inequality: left side, right side, constants, margin, verdict.
#[derive(Debug, Clone)]
pub struct BoundReport {
    pub theorem: TheoremId,
    pub scenario: String,
    pub epsilon: Option<f64>,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub constants: Vec<ConstantsReport>,
    pub tolerance: f64,
    /// Mass fraction of occupied cells behind sup-type constants.
    pub coverage_mass: f64,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn margins(&self) -> Vec<f64> {
        self.rhs.iter().zip(&self.lhs).map(|(r, l)| r - l).collect()
    }

    /// Pass iff the margin is at least -tolerance everywhere.
    pub fn verdict(&self) -> bool {
        self.margins().iter().all(|&m| m >= -self.tolerance)
    }

    pub fn worst_margin(&self) -> f64 {
        self.margins().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn write_json(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "{{")?;
        writeln!(w, "  \"theorem\": \"{}\",", self.theorem.as_str())?;
        writeln!(w, "  \"scenario\": \"{}\",", self.scenario)?;
        match self.epsilon {
            Some(e) => writeln!(w, "  \"epsilon\": {e:.17e},")?,
            None => writeln!(w, "  \"epsilon\": null,")?,
        }
        writeln!(w, "  \"tolerance\": {:.17e},", self.tolerance)?;
        writeln!(w, "  \"coverage_mass\": {:.17e},", self.coverage_mass)?;
        writeln!(w, "  \"verdict\": \"{}\",", if self.verdict() { "pass" } else { "fail" })?;
        writeln!(w, "  \"worst_margin\": {:.17e},", self.worst_margin())?;
        let fmt_vec = |v: &[f64]| -> String {
            let items: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            format!("[{}]", items.join(", "))
        };
        writeln!(w, "  \"times\": {},", fmt_vec(&self.times))?;
        writeln!(w, "  \"lhs\": {},", fmt_vec(&self.lhs))?;
        writeln!(w, "  \"rhs\": {},", fmt_vec(&self.rhs))?;
        writeln!(w, "  \"margin\": {},", fmt_vec(&self.margins()))?;
        write!(w, "  \"constants\": [")?;
        for (i, c) in self.constants.iter().enumerate() {
            if i > 0 {
                write!(w, ", ")?;
            }
            c.write_json(w)?;
        }
        writeln!(w, "],")?;
        let notes: Vec<String> = self.notes.iter().map(|n| format!("\"{n}\"")).collect();
        writeln!(w, "  \"notes\": [{}]", notes.join(", "))?;
        writeln!(w, "}}")
    }

    /// One flat CSV row per output time.
    pub fn write_csv_rows(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{},{},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                self.theorem.as_str(),
                self.scenario,
                self.epsilon.map_or("".to_string(), |e| format!("{e:.6e}")),
                self.times[i],
                self.lhs[i],
                self.rhs[i],
                self.rhs[i] - self.lhs[i],
                if self.verdict() { "pass" } else { "fail" }
            )?;
        }
        Ok(())
    }

    pub const CSV_HEADER: &'static str = "theorem,scenario,epsilon,t,lhs,rhs,margin,verdict";
}

/// Rate-functional evaluation: total, running value per output time, and the
/// mass excluded by the positivity guard.
#[derive(Debug, Clone)]
pub struct RateEval {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
    pub total: f64,
    pub excluded_mass: f64,
    /// The h field per output time (per interior cell), for diagnostics.
    pub h_fields: Vec<Vec<f64>>,
}

/// Evaluate the rate functional of a coarse trajectory against the effective
/// closure, using the closure-difference form of the mismatch field. The
/// trajectory's own coarse-grained coefficients enter through `hat`.
///
/// The r field of the trajectory constraint and the h field here are one and
/// the same object (notation in the sources drifts); reports carry a note to
/// that effect.
pub fn rate_functional(
    traj: &Trajectory1,
    hat: &dyn TimeClosure,
    eff: &dyn CoarseClosure,
    beta: f64,
) -> Result<RateEval> {
    let n_t = traj.times.len();
    let mut integrand = vec![0.0; n_t];
    let mut h_fields = Vec::with_capacity(n_t);
    let mut excluded = 0.0_f64;
    for (ti, state) in traj.states.iter().enumerate() {
        let t = traj.times[ti];
        let g = &state.grid;
        let mut acc = 0.0;
        let mut excl = 0.0;
        let mut h_field = vec![0.0; g.n];
        for i in 1..g.n - 1 {
            let m = state.mass[i];
            if m <= 0.0 {
                continue;
            }
            if state.mass[i - 1] <= 0.0 || state.mass[i + 1] <= 0.0 {
                excl += m;
                continue;
            }
            let z = g.center(i);
            let dz = g.h;
            let b = eff.drift(&[z])?[0];
            let a = eff.diffusion(&[z])?[(0, 0)];
            let a_p = eff.diffusion(&[z + dz])?[(0, 0)];
            let a_m = eff.diffusion(&[z - dz])?[(0, 0)];
            let da = (a_p - a_m) / (2.0 * dz);
            let bh = hat.drift(t, &[z])?[0];
            let ah = hat.diffusion(t, &[z])?[(0, 0)];
            let ah_p = hat.diffusion(t, &[z + dz])?[(0, 0)];
            let ah_m = hat.diffusion(t, &[z - dz])?[(0, 0)];
            let dah = (ah_p - ah_m) / (2.0 * dz);
            let dlog = (state.mass[i + 1].ln() - state.mass[i - 1].ln()) / (2.0 * dz);
            let h = (b + da / beta) - (bh + dah / beta) + (a - ah) * dlog / beta;
            h_field[i] = h;
            acc += m * h * h / a.max(1e-12);
        }
        integrand[ti] = beta / 4.0 * acc;
        excluded = excluded.max(excl);
        h_fields.push(h_field);
    }
    let mut cumulative = vec![0.0; n_t];
    for i in 1..n_t {
        let dt = traj.times[i] - traj.times[i - 1];
        cumulative[i] = cumulative[i - 1] + 0.5 * dt * (integrand[i] + integrand[i - 1]);
    }
    Ok(RateEval {
        times: traj.times.clone(),
        total: *cumulative.last().unwrap_or(&0.0),
        cumulative,
        excluded_mass: excluded,
        h_fields,
    })
}

/// The conditional-expectation form of the mismatch field, evaluated from
/// the full 2D state:
///     h(z) = beta^{-1} E_rho[(A - G) G^{-1} Dxi grad log(rho/mu)]
///            - A ( E_rho[F] - E_mu[F] ),
/// with column-wise fiber averages for the coordinate map. Returns the same
/// shape as [`rate_functional`] so the two routes can be compared.
pub fn rate_functional_fiber(
    traj2: &Trajectory2,
    mu2: &GridDensity2,
    pot: &Potential,
    map: &CoarseMap,
    eff: &dyn CoarseClosure,
    beta: f64,
) -> Result<RateEval> {
    if map.affine.is_none() || map.k != 1 {
        return Err(Error::Numerical(
            "the fiber form is implemented for affine scalar maps".into(),
        ));
    }
    let n_t = traj2.times.len();
    let grid = &traj2.states[0].grid;
    let (nx, ny) = (grid.x.n, grid.y.n);

    // E_mu[F] per column (time-independent).
    let mut mu_col_mass = vec![0.0; nx];
    let mut mu_f = vec![0.0; nx];
    for ix in 0..nx {
        let mut acc = 0.0;
        let mut w = 0.0;
        for iy in 0..ny {
            let mass = mu2.mass[grid.idx(ix, iy)];
            if mass == 0.0 {
                continue;
            }
            let q = [grid.x.center(ix), grid.y.center(iy)];
            let f = crate::model::local_mean_force(pot, map, beta, &q)?;
            acc += mass * f[0];
            w += mass;
        }
        mu_col_mass[ix] = w;
        if w > 0.0 {
            mu_f[ix] = acc / w;
        }
    }

    let mut integrand = vec![0.0; n_t];
    let mut h_fields = Vec::with_capacity(n_t);
    let mut excluded = 0.0_f64;
    for (ti, state) in traj2.states.iter().enumerate() {
        let mut acc_t = 0.0;
        let mut excl = 0.0;
        let mut h_field = vec![0.0; nx];
        for ix in 1..nx - 1 {
            // Fiber averages of F and of (A - G) G^{-1} Dxi grad log(rho/mu).
            let mut w = 0.0;
            let mut f_acc = 0.0;
            let mut grad_acc = 0.0;
            let z = grid.x.center(ix);
            let a = eff.diffusion(&[z])?[(0, 0)];
            for iy in 0..ny {
                let mass = state.mass[grid.idx(ix, iy)];
                if mass == 0.0 {
                    continue;
                }
                let q = [grid.x.center(ix), grid.y.center(iy)];
                let f = crate::model::local_mean_force(pot, map, beta, &q)?;
                f_acc += mass * f[0];
                // Dxi grad log(rho/mu) reduces to the x-derivative for the
                // coordinate map; the prefactor (A - G) G^{-1} uses G = 1.
                let il = grid.idx(ix - 1, iy);
                let ir = grid.idx(ix + 1, iy);
                if state.mass[il] > 0.0
                    && state.mass[ir] > 0.0
                    && mu2.mass[il] > 0.0
                    && mu2.mass[ir] > 0.0
                {
                    let g = map.metric(&q)[(0, 0)];
                    let lr = |i: usize| (state.mass[i] / mu2.mass[i]).ln();
                    let d = (lr(ir) - lr(il)) / (2.0 * grid.x.h);
                    grad_acc += mass * (a - g) / g * d;
                }
                w += mass;
            }
            if w <= 0.0 {
                continue;
            }
            let col_ok = w > 0.0 && mu_col_mass[ix] > 0.0;
            if !col_ok {
                excl += w;
                continue;
            }
            let h = grad_acc / w / beta - a * (f_acc / w - mu_f[ix]);
            h_field[ix] = h;
            acc_t += w * h * h / a.max(1e-12);
        }
        integrand[ti] = beta / 4.0 * acc_t;
        excluded = excluded.max(excl);
        h_fields.push(h_field);
    }
    let mut cumulative = vec![0.0; n_t];
    for i in 1..n_t {
        let dt = traj2.times[i] - traj2.times[i - 1];
        cumulative[i] = cumulative[i - 1] + 0.5 * dt * (integrand[i] + integrand[i - 1]);
    }
    Ok(RateEval {
        times: traj2.times.clone(),
        total: *cumulative.last().unwrap_or(&0.0),
        cumulative,
        excluded_mass: excluded,
        h_fields,
    })
}

/// Check the entropy-rate inequality H(rho_t | eta_t) <= H_0 + I along a
/// pair of trajectories on a common grid. With `tau` given, the Fisher
/// strengthening
///   H_t + (1 - tau) beta^{-1} int_0^t I_A(rho_s | eta_s) ds
///     <= H_0 + (1/tau) I
/// is asserted instead.
pub fn verify_entropy_rate_inequality(
    traj_hat: &Trajectory1,
    traj_eff: &Trajectory1,
    hat: &dyn TimeClosure,
    eff: &dyn CoarseClosure,
    beta: f64,
    tau: Option<f64>,
    tolerance: f64,
) -> Result<BoundReport> {
    if traj_hat.times != traj_eff.times {
        return Err(Error::GridMismatch);
    }
    let rate = rate_functional(traj_hat, hat, eff, beta)?;
    let n_t = traj_hat.times.len();
    let h0 = metrics::relative_entropy_1d(&traj_hat.states[0], &traj_eff.states[0])?.value();
    let mut lhs = Vec::with_capacity(n_t);
    let mut rhs = Vec::with_capacity(n_t);
    let mut fisher_cum = 0.0;
    let mut fisher_prev = 0.0;
    for i in 0..n_t {
        let h =
            metrics::relative_entropy_1d(&traj_hat.states[i], &traj_eff.states[i])?.value();
        match tau {
            None => {
                lhs.push(h);
                rhs.push(h0 + rate.cumulative[i]);
            }
            Some(tau) => {
                let a_weight = |z: f64| eff.diffusion(&[z]).map(|a| a[(0, 0)]).unwrap_or(1.0);
                let fisher = metrics::fisher_information_1d(
                    &traj_hat.states[i],
                    &traj_eff.states[i],
                    Some(&a_weight),
                )?;
                if i > 0 {
                    let dt = traj_hat.times[i] - traj_hat.times[i - 1];
                    fisher_cum += 0.5 * dt * (fisher + fisher_prev);
                }
                fisher_prev = fisher;
                lhs.push(h + (1.0 - tau) / beta * fisher_cum);
                rhs.push(h0 + rate.cumulative[i] / tau);
            }
        }
    }
    let mut notes = vec![
        "the trajectory-constraint field r and the mismatch field h are the same object"
            .to_string(),
    ];
    if let Some(tau) = tau {
        notes.push(format!("Fisher-strengthened form at tau = {tau}"));
    }
    notes.push(format!("excluded mass fraction {:.3e}", rate.excluded_mass));
    Ok(BoundReport {
        theorem: TheoremId::EntropyRate,
        scenario: String::new(),
        epsilon: None,
        times: traj_hat.times.clone(),
        lhs,
        rhs,
        constants: vec![],
        tolerance,
        coverage_mass: 1.0 - rate.excluded_mass,
        notes,
    })
}

/// Everything a theorem needs besides its constants.
#[derive(Debug, Clone)]
pub struct BoundInputs<'a> {
    pub scenario: String,
    pub epsilon: Option<f64>,
    pub times: &'a [f64],
    /// Measured distance per time: relative entropy, or squared W2.
    pub lhs: &'a [f64],
    /// H(rho_hat_0 | eta_0), or W2^2 of the initial data.
    pub initial_gap: f64,
    /// Overdamped: H(rho_0|mu) - H(rho_t|mu) per time. Langevin: the
    /// constant H(rho_0|mu) in every slot.
    pub entropy_ledger: &'a [f64],
    pub beta: f64,
    pub gamma: f64,
    /// Langevin kinetic regularization; None selects the limit form.
    pub alpha_reg: Option<f64>,
    pub tolerance: f64,
    pub coverage_mass: f64,
}

/// Constants feeding a bound; unused slots may stay None.
#[derive(Debug, Clone, Default)]
pub struct BoundConstants {
    pub kappa: Option<ConstantsReport>,
    pub lambda: Option<ConstantsReport>,
    pub alpha_ti: Option<ConstantsReport>,
    pub alpha_lsi: Option<ConstantsReport>,
    pub ctilde: Option<ConstantsReport>,
}

/// Assemble a theorem's right-hand side from its constants and compare with
/// the measured left-hand side.
pub fn assemble_bound(
    theorem: TheoremId,
    inputs: &BoundInputs,
    constants: &BoundConstants,
) -> Result<BoundReport> {
    let n = inputs.times.len();
    assert_eq!(inputs.lhs.len(), n);
    assert_eq!(inputs.entropy_ledger.len(), n);
    let need = |c: &Option<ConstantsReport>, name: &'static str| -> Result<ConstantsReport> {
        c.clone().ok_or(Error::IncompleteReport(name))
    };
    let mut used: Vec<ConstantsReport> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    let rhs: Vec<f64> = match theorem {
        TheoremId::RelEntOverdamped => {
            let kappa = need(&constants.kappa, "kappa_relent")?;
            let lambda = need(&constants.lambda, "lambda_relent")?;
            let ti = need(&constants.alpha_ti, "alpha_ti")?;
            let lsi = need(&constants.alpha_lsi, "alpha_lsi")?;
            let pre = 0.25
                * (lambda.value * lambda.value
                    + kappa.value * kappa.value * inputs.beta * inputs.beta
                        / (ti.value * lsi.value));
            used.extend([kappa, lambda, ti, lsi]);
            inputs
                .entropy_ledger
                .iter()
                .map(|led| inputs.initial_gap + pre * led)
                .collect()
        }
        TheoremId::WasserOverdamped => {
            let kappa = need(&constants.kappa, "kappa_wasser")?;
            let lambda = need(&constants.lambda, "lambda_wasser")?;
            let ti = need(&constants.alpha_ti, "alpha_ti")?;
            let lsi = need(&constants.alpha_lsi, "alpha_lsi")?;
            let ct = need(&constants.ctilde, "ctilde_wasser")?;
            let pre = (4.0 * lambda.value * lambda.value
                + inputs.beta * kappa.value * kappa.value)
                / (ti.value * lsi.value);
            let ctv = ct.value;
            used.extend([kappa, lambda, ti, lsi, ct]);
            inputs
                .times
                .iter()
                .zip(inputs.entropy_ledger)
                .map(|(&t, led)| (ctv * t).exp() * (inputs.initial_gap + pre * led))
                .collect()
        }
        TheoremId::RelEntLangevin => {
            let kappa = need(&constants.kappa, "kappa")?;
            let ti = need(&constants.alpha_ti, "alpha_ti")?;
            let k2 = kappa.value * kappa.value;
            let factor = match inputs.alpha_reg {
                None => {
                    notes.push("kinetic-regularization limit form".into());
                    k2 * inputs.beta / (inputs.gamma * ti.value)
                }
                Some(a) => {
                    notes.push(format!("regularized form at alpha = {a}"));
                    k2 / (2.0 * ti.value) * (a + inputs.beta / inputs.gamma)
                }
            };
            used.extend([kappa, ti]);
            inputs
                .times
                .iter()
                .zip(inputs.entropy_ledger)
                .map(|(&t, led)| inputs.initial_gap + factor * t * led)
                .collect()
        }
        TheoremId::WasserLangevin => {
            let kappa = need(&constants.kappa, "kappa")?;
            let ti = need(&constants.alpha_ti, "alpha_ti")?;
            let ct = need(&constants.ctilde, "ctilde_langevin")?;
            let k2 = kappa.value * kappa.value;
            let factor = match inputs.alpha_reg {
                None => {
                    notes.push("kinetic-regularization limit form".into());
                    2.0 * k2 / ti.value
                }
                Some(a) => {
                    notes.push(format!("regularized form at alpha = {a}"));
                    2.0 * (a + 1.0) * k2 / ti.value
                }
            };
            let ctv = ct.value;
            used.extend([kappa, ti, ct]);
            inputs
                .times
                .iter()
                .zip(inputs.entropy_ledger)
                .map(|(&t, led)| (ctv * t).exp() * (inputs.initial_gap + factor * t * led))
                .collect()
        }
        TheoremId::EntropyRate => {
            return Err(Error::Numerical(
                "the entropy-rate inequality has its own verifier".into(),
            ))
        }
    };
    Ok(BoundReport {
        theorem,
        scenario: inputs.scenario.clone(),
        epsilon: inputs.epsilon,
        times: inputs.times.to_vec(),
        lhs: inputs.lhs.to_vec(),
        rhs,
        constants: used,
        tolerance: inputs.tolerance,
        coverage_mass: inputs.coverage_mass,
        notes,
    })
}

/// Entropy ledger H(rho_0 | mu) - H(rho_t | mu) along a 2D trajectory.
pub fn entropy_ledger_2d(traj: &Trajectory2, mu: &GridDensity2) -> Result<Vec<f64>> {
    let h0 = metrics::relative_entropy_2d(&traj.states[0], mu)?.value();
    traj.states
        .iter()
        .map(|s| Ok(h0 - metrics::relative_entropy_2d(s, mu)?.value()))
        .collect()
}

/// Relative error of the ledger identity
/// H(rho_0|mu) - H(rho_t|mu) = beta^{-1} int_0^t I(rho_s|mu) ds at the final
/// time.
pub fn ledger_identity_residual(
    traj: &Trajectory2,
    mu: &GridDensity2,
    beta: f64,
) -> Result<f64> {
    let ledger = entropy_ledger_2d(traj, mu)?;
    let mut fisher_int = 0.0;
    let mut prev = metrics::fisher_information_2d(&traj.states[0], mu)?;
    for i in 1..traj.times.len() {
        let cur = metrics::fisher_information_2d(&traj.states[i], mu)?;
        let dt = traj.times[i] - traj.times[i - 1];
        fisher_int += 0.5 * dt * (cur + prev);
        prev = cur;
    }
    let expect = ledger.last().unwrap();
    Ok((fisher_int / beta - expect).abs() / expect.abs().max(1e-300))
}

/// Entropy ledger for 1D trajectories (used by the 1D full solver).
pub fn entropy_ledger_1d(traj: &Trajectory1, mu: &GridDensity1) -> Result<Vec<f64>> {
    let h0 = metrics::relative_entropy_1d(&traj.states[0], mu)?.value();
    traj.states
        .iter()
        .map(|s| Ok(h0 - metrics::relative_entropy_1d(s, mu)?.value()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{ScalarClosure, ScalarTimeClosure};
    use crate::fpgrid::{solve_coarse, Grid1, SolveOptions};

    fn ou_trajectory(slope: f64, t_out: &[f64]) -> Trajectory1 {
        let closure = ScalarClosure::new(move |z| slope * z, |_| 1.0);
        let grid = Grid1::new(-8.0, 8.0, 128);
        let rho0 = GridDensity1::gaussian(grid, 1.0, 0.25);
        solve_coarse(&closure, 1.0, &rho0, t_out, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn rate_vanishes_on_effective_trajectory() {
        let t_out: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let traj = ou_trajectory(1.0, &t_out);
        let eff = ScalarClosure::new(|z| z, |_| 1.0);
        let hat = ScalarClosure::new(|z| z, |_| 1.0);
        let rate = rate_functional(&traj, &hat, &eff, 1.0).unwrap();
        assert!(rate.total < 1e-6, "I = {}", rate.total);
        assert!(rate.cumulative.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn rate_reduces_to_drift_gap_for_constant_mobility() {
        // With Ahat = A the field is exactly b - bhat; for constant drift
        // offsets the rate is (beta/4) delta^2 T.
        let t_out: Vec<f64> = (0..=20).map(|i| 0.05 * i as f64).collect();
        let traj = ou_trajectory(1.0, &t_out);
        let delta = 0.2;
        let eff = ScalarClosure::new(|z| z, |_| 1.0);
        let hat = ScalarTimeClosure::new(move |_t, z| z + delta, |_t, _z| 1.0);
        let rate = rate_functional(&traj, &hat, &eff, 1.0).unwrap();
        let expect = 0.25 * delta * delta * 1.0;
        assert!((rate.total - expect).abs() < 1e-3 * expect, "{} vs {expect}", rate.total);
    }

    #[test]
    fn entropy_rate_trivial_case() {
        let t_out: Vec<f64> = (0..=10).map(|i| 0.1 * i as f64).collect();
        let traj = ou_trajectory(1.0, &t_out);
        let eff = ScalarClosure::new(|z| z, |_| 1.0);
        let rep =
            verify_entropy_rate_inequality(&traj, &traj, &eff, &eff, 1.0, None, 1e-9).unwrap();
        assert!(rep.verdict());
        assert!(rep.lhs.iter().all(|&l| l.abs() < 1e-12));
        // tau-strengthened form also holds trivially.
        let rep =
            verify_entropy_rate_inequality(&traj, &traj, &eff, &eff, 1.0, Some(0.5), 1e-9)
                .unwrap();
        assert!(rep.verdict());
    }

    #[test]
    fn assemble_overdamped_relent_formula() {
        let times = [0.0, 0.5, 1.0];
        let lhs = [0.0, 1e-4, 2e-4];
        let ledger = [0.0, 0.3, 0.5];
        let inputs = BoundInputs {
            scenario: "test".into(),
            epsilon: Some(0.1),
            times: &times,
            lhs: &lhs,
            initial_gap: 0.0,
            entropy_ledger: &ledger,
            beta: 1.0,
            gamma: 1.0,
            alpha_reg: None,
            tolerance: 1e-9,
            coverage_mass: 1.0,
        };
        let constants = BoundConstants {
            kappa: Some(ConstantsReport::analytic("kappa", 0.5, "catalog")),
            lambda: Some(ConstantsReport::analytic("lambda", 0.0, "affine")),
            alpha_ti: Some(ConstantsReport::analytic("ti", 10.0, "gaussian")),
            alpha_lsi: Some(ConstantsReport::analytic("lsi", 10.0, "gaussian")),
            ..Default::default()
        };
        let rep = assemble_bound(TheoremId::RelEntOverdamped, &inputs, &constants).unwrap();
        // prefactor = (1/4)(0 + 0.25/100) = 6.25e-4.
        assert!((rep.rhs[1] - 6.25e-4 * 0.3).abs() < 1e-15);
        assert!(rep.verdict());

        // Missing constant is a structured error.
        let err = assemble_bound(
            TheoremId::RelEntOverdamped,
            &inputs,
            &BoundConstants::default(),
        );
        assert!(matches!(err, Err(Error::IncompleteReport(_))));
    }

    #[test]
    fn assemble_langevin_limit_forms() {
        let times = [0.0, 1.0];
        let lhs = [0.0, 0.01];
        let h0 = [0.7, 0.7];
        let inputs = BoundInputs {
            scenario: "lan".into(),
            epsilon: Some(0.1),
            times: &times,
            lhs: &lhs,
            initial_gap: 0.0,
            entropy_ledger: &h0,
            beta: 1.0,
            gamma: 1.0,
            alpha_reg: None,
            tolerance: 1e-9,
            coverage_mass: 1.0,
        };
        let constants = BoundConstants {
            kappa: Some(ConstantsReport::analytic("kappa", 0.5, "catalog")),
            alpha_ti: Some(ConstantsReport::analytic("ti", 1.0, "phase gaussian")),
            ctilde: Some(ConstantsReport::analytic("ct", 4.0, "formula")),
            ..Default::default()
        };
        let rep = assemble_bound(TheoremId::RelEntLangevin, &inputs, &constants).unwrap();
        // factor = kappa^2 beta / (gamma alpha_ti) = 0.25; rhs(1) = 0.25 * 0.7.
        assert!((rep.rhs[1] - 0.175).abs() < 1e-15);
        let rep = assemble_bound(TheoremId::WasserLangevin, &inputs, &constants).unwrap();
        // factor = 2 kappa^2 / alpha_ti = 0.5; rhs(1) = e^4 (0 + 0.5*1*0.7).
        assert!((rep.rhs[1] - (4.0_f64).exp() * 0.35).abs() < 1e-10);
        // Regularized alpha > 0 grows the relative-entropy factor.
        let mut inputs2 = inputs.clone();
        inputs2.alpha_reg = Some(0.5);
        let rep2 = assemble_bound(TheoremId::RelEntLangevin, &inputs2, &constants).unwrap();
        // factor = kappa^2/(2 ti) (alpha + beta/gamma) = 0.125 * 1.5.
        assert!((rep2.rhs[1] - 0.125 * 1.5 * 0.7).abs() < 1e-15);
    }

    #[test]
    fn falsifiability_knobs() {
        // A passing report must flip to fail when the constants are corrupted
        // enough to push the RHS below the measured LHS.
        let times = [0.0, 1.0];
        let lhs = [0.0, 2e-4];
        let ledger = [0.0, 0.5];
        let inputs = BoundInputs {
            scenario: "falsify".into(),
            epsilon: Some(0.1),
            times: &times,
            lhs: &lhs,
            initial_gap: 0.0,
            entropy_ledger: &ledger,
            beta: 1.0,
            gamma: 1.0,
            alpha_reg: None,
            tolerance: 0.0,
            coverage_mass: 1.0,
        };
        let mk = |ti: f64, lsi: f64| BoundConstants {
            kappa: Some(ConstantsReport::analytic("kappa", 0.5, "catalog")),
            lambda: Some(ConstantsReport::analytic("lambda", 0.0, "affine")),
            alpha_ti: Some(ConstantsReport::analytic("ti", ti, "gaussian")),
            alpha_lsi: Some(ConstantsReport::analytic("lsi", lsi, "gaussian")),
            ..Default::default()
        };
        let rep = assemble_bound(TheoremId::RelEntOverdamped, &inputs, &mk(10.0, 10.0)).unwrap();
        assert!(rep.verdict());
        // Halving alpha_TI doubles the RHS: still a pass.
        let rep = assemble_bound(TheoremId::RelEntOverdamped, &inputs, &mk(5.0, 10.0)).unwrap();
        assert!(rep.verdict());
        // Inflating alpha_TI alpha_LSI by 100x shrinks the RHS below the LHS.
        let rep = assemble_bound(TheoremId::RelEntOverdamped, &inputs, &mk(100.0, 100.0)).unwrap();
        assert!(!rep.verdict(), "corrupted constants must flip the verdict");
    }
}
