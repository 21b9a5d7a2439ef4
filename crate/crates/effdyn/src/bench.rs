//! Experiment harness: config parsing, scenario pipelines, epsilon sweeps,
//! artifact persistence, and the batch CLI.
//!
//! A scenario names a catalog potential, a map, physical parameters, grids,
//! a horizon and a theorem list. Running it executes
//! solve -> closure -> constants -> bounds and writes bound reports (JSON),
//! trajectory tables (CSV) and a manifest carrying the config hash; a rerun
//! with the same config and seed is byte-identical.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::closure::{
    cg_coefficients_grid, marginal_of_grid2, ScalarClosure, TimeSeriesClosure,
};
use crate::fpgrid::{
    solve_coarse, solve_full_overdamped_2d, Grid1, Grid2, GridDensity2,
    SolveOptions, Trajectory1, Trajectory2,
};
use crate::funcineq::{self, ConstantsReport};
use crate::gaussref::{self, LangevinScenario};
use crate::linalg::Mat;
use crate::metrics;
use crate::model::{CatalogPotential, CoarseMap};
use crate::ratefn::{
    assemble_bound, entropy_ledger_2d, verify_entropy_rate_inequality, BoundConstants,
    BoundInputs, BoundReport, TheoremId,
};
use crate::{Error, Result};

// --- config -------------------------------------------------------------------

/// Sectioned key-value config: `[section]` headers, `key = value` lines,
/// `#` comments. Addressed by "section.key" paths.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config {
                    path: format!("line {}", lineno + 1),
                    message: "expected 'key = value'".into(),
                });
            };
            let path = if section.is_empty() {
                key.trim().to_string()
            } else {
                format!("{}.{}", section, key.trim())
            };
            entries.insert(path, value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: format!("cannot read config: {e}"),
        })?;
        Config::parse(&text)
    }

    pub fn set(&mut self, path: &str, value: &str) {
        self.entries.insert(path.to_string(), value.to_string());
    }

    pub fn get(&self, path: &str) -> Result<&str> {
        self.entries.get(path).map(|s| s.as_str()).ok_or_else(|| Error::Config {
            path: path.to_string(),
            message: "missing required field".into(),
        })
    }

    pub fn get_or(&self, path: &str, default: &str) -> String {
        self.entries.get(path).cloned().unwrap_or_else(|| default.to_string())
    }

    pub fn get_f64(&self, path: &str) -> Result<f64> {
        self.get(path)?.parse().map_err(|_| Error::Config {
            path: path.to_string(),
            message: "expected a number".into(),
        })
    }

    pub fn get_f64_or(&self, path: &str, default: f64) -> Result<f64> {
        match self.entries.get(path) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Config {
                path: path.to_string(),
                message: "expected a number".into(),
            }),
        }
    }

    pub fn get_usize_or(&self, path: &str, default: usize) -> Result<usize> {
        match self.entries.get(path) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Error::Config {
                path: path.to_string(),
                message: "expected an integer".into(),
            }),
        }
    }

    /// Keys under a section, stripped of the prefix.
    pub fn section(&self, name: &str) -> BTreeMap<String, String> {
        let prefix = format!("{name}.");
        self.entries
            .iter()
            .filter_map(|(k, v)| k.strip_prefix(&prefix).map(|s| (s.to_string(), v.clone())))
            .collect()
    }

    /// Canonical sorted listing; its hash goes into the manifest.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

// --- scenario -----------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dynamics {
    Overdamped,
    Langevin,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub dynamics: Dynamics,
    pub entry: CatalogPotential,
    pub beta: f64,
    pub gamma: f64,
    pub cells_full: usize,
    pub cells_coarse: usize,
    pub box_sigmas: f64,
    pub t_end: f64,
    pub n_outputs: usize,
    pub shift: f64,
    pub theorems: Vec<TheoremId>,
    pub tolerance: f64,
    pub seed: u64,
    pub semi_implicit: bool,
    pub name: String,
}

impl Scenario {
    pub fn from_config(cfg: &Config) -> Result<Scenario> {
        let dynamics = match cfg.get_or("physics.dynamics", "overdamped").as_str() {
            "overdamped" => Dynamics::Overdamped,
            "langevin" => Dynamics::Langevin,
            other => {
                return Err(Error::Config {
                    path: "physics.dynamics".into(),
                    message: format!("unknown dynamics '{other}'"),
                })
            }
        };
        let beta = cfg.get_f64("physics.beta")?;
        if beta <= 0.0 {
            return Err(Error::Config {
                path: "physics.beta".into(),
                message: "inverse temperature must be positive".into(),
            });
        }
        let gamma = cfg.get_f64_or("physics.gamma", 1.0)?;
        let potential = cfg.get("physics.potential")?.to_string();
        let entry = CatalogPotential::from_config(&potential, &cfg.section("physics"))?;
        let t_end = cfg.get_f64("time.t_end")?;
        let theorems_raw = cfg.get_or(
            "theorems.list",
            match dynamics {
                Dynamics::Overdamped => "relent-od,wasser-od",
                Dynamics::Langevin => "relent-lan,wasser-lan",
            },
        );
        let mut theorems = Vec::new();
        for item in theorems_raw.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            theorems.push(TheoremId::parse(item).ok_or_else(|| Error::Config {
                path: "theorems.list".into(),
                message: format!("unknown theorem '{item}'"),
            })?);
        }
        let eps = entry_epsilon(&entry);
        let name = format!(
            "{}-{}{}",
            potential,
            match dynamics {
                Dynamics::Overdamped => "od",
                Dynamics::Langevin => "lan",
            },
            eps.map_or(String::new(), |e| format!("-eps{e}")),
        );
        Ok(Scenario {
            dynamics,
            entry,
            beta,
            gamma,
            cells_full: cfg.get_usize_or("grid.cells_full", 128)?,
            cells_coarse: cfg.get_usize_or("grid.cells_coarse", 128)?,
            box_sigmas: cfg.get_f64_or("grid.box_sigma", 8.0)?,
            t_end,
            n_outputs: cfg.get_usize_or("time.outputs", 11)?,
            shift: cfg.get_f64_or("init.shift", 1.0)?,
            theorems,
            tolerance: cfg.get_f64_or("output.tolerance", 1e-3)?,
            seed: 0,
            semi_implicit: cfg.get_or("grid.semi_implicit", "false") == "true",
            name,
        })
    }

    pub fn with_epsilon(&self, eps: f64) -> Scenario {
        let mut out = self.clone();
        out.entry = match &self.entry {
            CatalogPotential::CoupledQuadratic { c, .. } => {
                CatalogPotential::CoupledQuadratic { c: *c, epsilon: eps }
            }
            CatalogPotential::DoubleWellFast { a, .. } => {
                CatalogPotential::DoubleWellFast { a: *a, epsilon: eps }
            }
            other => other.clone(),
        };
        out.name = self
            .name
            .split("-eps")
            .next()
            .unwrap_or(&self.name)
            .to_string()
            + &format!("-eps{eps}");
        out
    }

    pub fn output_times(&self) -> Vec<f64> {
        let n = self.n_outputs.max(2);
        (0..n).map(|i| self.t_end * i as f64 / (n - 1) as f64).collect()
    }
}

fn entry_epsilon(entry: &CatalogPotential) -> Option<f64> {
    match entry {
        CatalogPotential::CoupledQuadratic { epsilon, .. } => Some(*epsilon),
        CatalogPotential::DoubleWellFast { epsilon, .. } => Some(*epsilon),
        _ => None,
    }
}

/// Everything the overdamped grid pipeline produces.
pub struct OverdampedRun {
    pub times: Vec<f64>,
    pub traj_full: Trajectory2,
    pub mu2: GridDensity2,
    pub marginals: Trajectory1,
    pub traj_coarse: Trajectory1,
    pub traj_eff: Trajectory1,
    pub hat_closure: TimeSeriesClosure,
    pub eff_closure: ScalarClosure,
    pub entropy_ledger: Vec<f64>,
    pub lhs_relent: Vec<f64>,
    pub lhs_w2sq: Vec<f64>,
}

/// Grids sized to `box_sigmas` Gibbs standard deviations per coordinate.
pub fn overdamped_grids(scen: &Scenario) -> Result<Grid2> {
    let eff = scen
        .entry
        .analytic_effective(scen.beta)
        .ok_or(Error::IncompleteReport("analytic closure for grid sizing"))?;
    let sigma_z = eff.mu_hat_variance().map(|v| v.sqrt()).unwrap_or(1.0);
    let (_, fiber_var) = eff.fiber_gaussian(0.0).ok_or(Error::IncompleteReport(
        "fiber Gaussian for grid sizing",
    ))?;
    let half_x = scen.box_sigmas * sigma_z;
    let half_y = scen.box_sigmas * fiber_var.sqrt();
    Ok(Grid2 {
        x: Grid1::new(-half_x, half_x, scen.cells_full),
        y: Grid1::new(-half_y, half_y, scen.cells_full),
    })
}

/// Fiber-equilibrated initial data: the coarse marginal is a Gaussian with
/// the stationary marginal's variance, mean shifted by `shift` standard
/// deviations, and the conditional on every fiber is already the Gibbs one.
/// Consequences: H(rho_0 | mu) = shift^2 / 2 exactly, and the entropy ledger
/// is epsilon-independent across sweeps.
pub fn equilibrated_initial(scen: &Scenario, grid: &Grid2) -> Result<GridDensity2> {
    let eff = scen
        .entry
        .analytic_effective(scen.beta)
        .ok_or(Error::IncompleteReport("analytic closure for initial data"))?;
    let var_z = eff
        .mu_hat_variance()
        .ok_or(Error::IncompleteReport("Gaussian marginal for initial data"))?;
    let mean_z = scen.shift * var_z.sqrt();
    let rho = GridDensity2::from_centers(grid.clone(), |x, y| {
        let (fm, fv) = eff.fiber_gaussian(x).expect("quadratic catalog entry");
        let logp = -0.5 * (x - mean_z) * (x - mean_z) / var_z - 0.5 * (y - fm) * (y - fm) / fv;
        logp.exp()
    });
    Ok(rho)
}

/// The full overdamped pipeline: 2D solve, marginal extraction, coarse solve
/// with the extracted time-dependent closure, effective solve, divergences.
pub fn run_overdamped_pipeline(scen: &Scenario) -> Result<OverdampedRun> {
    let pot = scen.entry.build();
    let eff_analytic = scen
        .entry
        .analytic_effective(scen.beta)
        .ok_or(Error::IncompleteReport("analytic effective closure"))?;
    let grid = overdamped_grids(scen)?;
    let mu2 = GridDensity2::gibbs(&pot, scen.beta, grid.clone());
    let rho0 = equilibrated_initial(scen, &grid)?;
    let times = scen.output_times();
    let opts = SolveOptions { semi_implicit: scen.semi_implicit, ..Default::default() };
    let traj_full = solve_full_overdamped_2d(&pot, scen.beta, &rho0, &times, &opts)?;

    let map = CoarseMap::coordinate(2, 1);
    let coarse_grid = grid.x.clone();
    let mut marg_states = Vec::with_capacity(times.len());
    let mut fields = Vec::with_capacity(times.len());
    for state in &traj_full.states {
        marg_states.push(marginal_of_grid2(state, &map, &coarse_grid)?);
        fields.push(cg_coefficients_grid(state, &pot, &map, scen.beta, &coarse_grid)?);
    }
    let marginals = Trajectory1 { times: times.clone(), states: marg_states };
    let hat_closure = TimeSeriesClosure::new(fields);

    // Run the 1D solves on the 2D solver's own time step, so the coarse and
    // effective laws see the identical time discretization (for separable
    // potentials all three trajectories then agree to round-off).
    let opts_1d = SolveOptions {
        dt: Some(traj_full.dt),
        semi_implicit: false,
        ..Default::default()
    };
    let rho_hat0 = marginals.states[0].clone();
    let traj_coarse = solve_coarse(&hat_closure, scen.beta, &rho_hat0, &times, &opts_1d)?;
    let eff_closure = ScalarClosure::from_catalog(&eff_analytic);
    let traj_eff = solve_coarse(&eff_closure, scen.beta, &rho_hat0, &times, &opts_1d)?;

    let entropy_ledger = entropy_ledger_2d(&traj_full, &mu2)?;
    let mut lhs_relent = Vec::with_capacity(times.len());
    let mut lhs_w2sq = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let h = metrics::relative_entropy_1d(&marginals.states[i], &traj_eff.states[i])?.value();
        lhs_relent.push(h);
        let w = metrics::wasserstein2_1d_grid(&marginals.states[i], &traj_eff.states[i]);
        lhs_w2sq.push(w * w);
    }
    Ok(OverdampedRun {
        times,
        traj_full,
        mu2,
        marginals,
        traj_coarse,
        traj_eff,
        hat_closure,
        eff_closure,
        entropy_ledger,
        lhs_relent,
        lhs_w2sq,
    })
}

/// Analytic constants of an overdamped catalog scenario.
pub fn overdamped_constants(scen: &Scenario) -> Result<BoundConstants> {
    let kappa = funcineq::kappa_analytic(&scen.entry)
        .ok_or(Error::IncompleteReport("analytic kappa"))?;
    let h_fiber = scen
        .entry
        .fiber_hessian()
        .ok_or(Error::IncompleteReport("fiber Hessian"))?;
    let alpha = scen.beta * h_fiber;
    let eff = ScalarClosure::from_catalog(&scen.entry.analytic_effective(scen.beta).unwrap());
    let grid = overdamped_grids(scen)?.x;
    let ctilde = funcineq::ctilde_overdamped_analytic(&eff, &grid, scen.beta);
    Ok(BoundConstants {
        kappa: Some(kappa),
        lambda: Some(ConstantsReport::analytic(
            "lambda",
            0.0,
            "affine coordinate map",
        )),
        alpha_ti: Some(ConstantsReport::analytic("alpha_ti", alpha, "Gaussian fiber")),
        alpha_lsi: Some(ConstantsReport::analytic("alpha_lsi", alpha, "Gaussian fiber")),
        ctilde: Some(ctilde),
    })
}

/// Assembled reports of an overdamped scenario for the requested theorems.
pub fn overdamped_reports(scen: &Scenario, run: &OverdampedRun) -> Result<Vec<BoundReport>> {
    let constants = overdamped_constants(scen)?;
    let mut reports = Vec::new();
    for theorem in &scen.theorems {
        let lhs = match theorem {
            TheoremId::RelEntOverdamped => &run.lhs_relent,
            TheoremId::WasserOverdamped => &run.lhs_w2sq,
            TheoremId::EntropyRate => {
                let mut rep = verify_entropy_rate_inequality(
                    &run.marginals,
                    &run.traj_eff,
                    &run.hat_closure,
                    &run.eff_closure,
                    scen.beta,
                    None,
                    scen.tolerance,
                )?;
                rep.scenario = scen.name.clone();
                rep.epsilon = entry_epsilon(&scen.entry);
                reports.push(rep);
                continue;
            }
            other => {
                return Err(Error::Numerical(format!(
                    "theorem {} does not apply to the overdamped pipeline",
                    other.as_str()
                )))
            }
        };
        let inputs = BoundInputs {
            scenario: scen.name.clone(),
            epsilon: entry_epsilon(&scen.entry),
            times: &run.times,
            lhs,
            initial_gap: 0.0,
            entropy_ledger: &run.entropy_ledger,
            beta: scen.beta,
            gamma: scen.gamma,
            alpha_reg: None,
            tolerance: scen.tolerance,
            coverage_mass: 1.0,
        };
        reports.push(assemble_bound(*theorem, &inputs, &constants)?);
    }
    Ok(reports)
}

/// The Langevin pipeline: Gaussian-oracle left-hand sides and analytic
/// constants.
pub struct LangevinRun {
    pub times: Vec<f64>,
    pub scenario: LangevinScenario,
    pub lhs_relent: Vec<f64>,
    pub lhs_w2sq: Vec<f64>,
    pub h0: f64,
}

pub fn langevin_scenario(scen: &Scenario) -> Result<LangevinScenario> {
    let eff = scen
        .entry
        .analytic_effective(scen.beta)
        .ok_or(Error::IncompleteReport("analytic closure"))?;
    let (gm, gs) = {
        let tmp = LangevinScenario {
            entry: scen.entry.clone(),
            gamma: scen.gamma,
            beta: scen.beta,
            mean0: vec![0.0; 4],
            cov0: Mat::identity(4),
        };
        tmp.gibbs_moments()
    };
    // Shifted Gibbs: mean displaced along the slow coordinate with the fiber
    // conditional kept at equilibrium.
    let sigma_z = gs[(0, 0)].sqrt();
    let shift = scen.shift * sigma_z;
    let (fm, _) = eff.fiber_gaussian(shift).unwrap();
    let mean0 = vec![shift, fm, 0.0, 0.0];
    let _ = gm;
    Ok(LangevinScenario {
        entry: scen.entry.clone(),
        gamma: scen.gamma,
        beta: scen.beta,
        mean0,
        cov0: gs,
    })
}

pub fn run_langevin_pipeline(scen: &Scenario) -> Result<LangevinRun> {
    let scenario = langevin_scenario(scen)?;
    let times = scen.output_times();
    let series = gaussref::langevin_reference_suite(&scenario, &times)?;
    let (gm, gs) = scenario.gibbs_moments();
    let (h0, _) = metrics::gaussian_divergences(&scenario.mean0, &scenario.cov0, &gm, &gs)?;
    Ok(LangevinRun {
        times,
        scenario,
        lhs_relent: series.iter().map(|p| p.0).collect(),
        lhs_w2sq: series.iter().map(|p| p.1 * p.1).collect(),
        h0,
    })
}

pub fn langevin_reports(scen: &Scenario, run: &LangevinRun) -> Result<Vec<BoundReport>> {
    let kappa = funcineq::kappa_analytic(&scen.entry)
        .ok_or(Error::IncompleteReport("analytic kappa"))?;
    let (alpha_full, alpha_pos) = funcineq::alpha_ti_phase(&scen.entry, scen.beta)?;
    let slope = scen.entry.analytic_effective(scen.beta).unwrap().drift(1.0);
    let ctilde = funcineq::ctilde_langevin(slope.abs(), scen.gamma, 0.0);
    let constants = BoundConstants {
        kappa: Some(kappa),
        alpha_ti: Some(alpha_full),
        ctilde: Some(ctilde),
        ..Default::default()
    };
    let ledger = vec![run.h0; run.times.len()];
    let mut reports = Vec::new();
    for theorem in &scen.theorems {
        let lhs = match theorem {
            TheoremId::RelEntLangevin => &run.lhs_relent,
            TheoremId::WasserLangevin => &run.lhs_w2sq,
            other => {
                return Err(Error::Numerical(format!(
                    "theorem {} does not apply to the Langevin pipeline",
                    other.as_str()
                )))
            }
        };
        let inputs = BoundInputs {
            scenario: scen.name.clone(),
            epsilon: entry_epsilon(&scen.entry),
            times: &run.times,
            lhs,
            initial_gap: 0.0,
            entropy_ledger: &ledger,
            beta: scen.beta,
            gamma: scen.gamma,
            alpha_reg: None,
            tolerance: scen.tolerance,
            coverage_mass: 1.0,
        };
        let mut rep = assemble_bound(*theorem, &inputs, &constants)?;
        rep.notes.push(format!(
            "alpha_ti uses the full phase-space conditional ({:.6}); position-only value {:.6} reported alongside",
            inputs_alpha(&constants), alpha_pos.value
        ));
        rep.constants.push(alpha_pos.clone());
        reports.push(rep);
    }
    Ok(reports)
}

fn inputs_alpha(c: &BoundConstants) -> f64 {
    c.alpha_ti.as_ref().map(|a| a.value).unwrap_or(f64::NAN)
}

// --- artifacts ------------------------------------------------------------------

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub reports: Vec<BoundReport>,
}

fn write_file(path: &Path, body: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, cfg: &Config, seed: u64) -> Result<()> {
    let canonical = cfg.canonical();
    let hash = fnv1a(canonical.as_bytes());
    write_file(&dir.join("manifest.json"), |w| {
        writeln!(w, "{{")?;
        writeln!(w, "  \"config_hash\": \"{hash:016x}\",")?;
        writeln!(w, "  \"seed\": {seed},")?;
        let mut lines: Vec<String> = Vec::new();
        for line in canonical.lines() {
            lines.push(format!("\"{}\"", line.replace('"', "'")));
        }
        writeln!(w, "  \"config\": [{}]", lines.join(", "))?;
        writeln!(w, "}}")
    })
}

/// Execute a scenario end to end and persist the artifacts.
pub fn run_scenario(cfg: &Config, seed: u64, out_dir: &Path) -> Result<RunArtifacts> {
    let mut scen = Scenario::from_config(cfg)?;
    scen.seed = seed;
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, cfg, seed)?;

    let reports = match scen.dynamics {
        Dynamics::Overdamped => {
            let run = run_overdamped_pipeline(&scen)?;
            write_file(&out_dir.join("coarse_trajectories.csv"), |w| {
                writeln!(w, "t,z,rho_hat,coarse_solve,eta")?;
                for (i, t) in run.times.iter().enumerate() {
                    let g = &run.marginals.states[i].grid;
                    for cell in 0..g.n {
                        writeln!(
                            w,
                            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                            t,
                            g.center(cell),
                            run.marginals.states[i].mass[cell],
                            run.traj_coarse.states[i].mass[cell],
                            run.traj_eff.states[i].mass[cell]
                        )?;
                    }
                }
                Ok(())
            })?;
            overdamped_reports(&scen, &run)?
        }
        Dynamics::Langevin => {
            let run = run_langevin_pipeline(&scen)?;
            write_file(&out_dir.join("oracle_divergences.csv"), |w| {
                writeln!(w, "t,relent,w2")?;
                for i in 0..run.times.len() {
                    writeln!(
                        w,
                        "{:.17e},{:.17e},{:.17e}",
                        run.times[i],
                        run.lhs_relent[i],
                        run.lhs_w2sq[i].sqrt()
                    )?;
                }
                Ok(())
            })?;
            langevin_reports(&scen, &run)?
        }
    };

    write_file(&out_dir.join("bounds.csv"), |w| {
        writeln!(w, "{}", BoundReport::CSV_HEADER)?;
        for rep in &reports {
            rep.write_csv_rows(w)?;
        }
        Ok(())
    })?;
    for rep in &reports {
        write_file(
            &out_dir.join(format!("bound_{}.json", rep.theorem.as_str())),
            |w| rep.write_json(w),
        )?;
    }
    Ok(RunArtifacts { dir: out_dir.to_path_buf(), reports })
}

// --- sweep ----------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sup_relent: f64,
    pub sup_w2sq: f64,
    pub rhs_relent_end: f64,
    pub rhs_w2sq_end: f64,
    pub kappa: f64,
    pub alpha_ti: f64,
    pub verdicts: bool,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub slope_rhs: (f64, f64),
    pub slope_lhs: (f64, f64),
}

/// Least-squares slope of ln y against ln x, with its standard error.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let resid: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let fit = my + slope * (x - mx);
            (y - fit) * (y - fit)
        })
        .sum();
    let dof = (n - 2.0).max(1.0);
    let se = (resid / dof / sxx).sqrt();
    (slope, se)
}

/// Run a scenario per epsilon (strictly decreasing, at least 3 values) and
/// tabulate sup-norms, right-hand sides, constants and log-log slope fits.
/// Member jobs run on a bounded worker pool with epsilon-indexed streams, so
/// the table does not depend on scheduling. A member failure aborts the
/// sweep with the completed rows preserved in the output directory.
pub fn sweep_epsilon(cfg: &Config, seed: u64, out_dir: &Path, jobs: usize) -> Result<SweepTable> {
    let base = Scenario::from_config(cfg)?;
    let eps_raw = cfg.get("sweep.epsilons")?;
    let eps_list: Vec<f64> = eps_raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config {
            path: "sweep.epsilons".into(),
            message: "expected a comma-separated list of numbers".into(),
        })?;
    if eps_list.len() < 3 || !eps_list.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Config {
            path: "sweep.epsilons".into(),
            message: "need at least 3 strictly decreasing values".into(),
        });
    }
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, cfg, seed)?;

    let n_jobs = jobs.max(1).min(eps_list.len());
    let mut results: Vec<Option<Result<SweepRow>>> = (0..eps_list.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for worker in 0..n_jobs {
            let eps_list = &eps_list;
            let base = &base;
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                for (i, &eps) in eps_list.iter().enumerate() {
                    if i % n_jobs != worker {
                        continue;
                    }
                    let mut scen = base.with_epsilon(eps);
                    scen.seed = seed.wrapping_add(i as u64);
                    mine.push((i, sweep_member(&scen)));
                }
                mine
            }));
        }
        for h in handles {
            for (i, r) in h.join().expect("sweep worker panicked") {
                results[i] = Some(r);
            }
        }
    });

    let mut rows = Vec::new();
    let mut failure: Option<Error> = None;
    for r in results.into_iter().flatten() {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    // Persist whatever completed, even on failure.
    write_file(&out_dir.join("sweep.csv"), |w| {
        writeln!(
            w,
            "epsilon,sup_relent,sup_w2sq,rhs_relent_end,rhs_w2sq_end,kappa,alpha_ti,verdict"
        )?;
        for row in &rows {
            writeln!(
                w,
                "{:.6e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                row.epsilon,
                row.sup_relent,
                row.sup_w2sq,
                row.rhs_relent_end,
                row.rhs_w2sq_end,
                row.kappa,
                row.alpha_ti,
                if row.verdicts { "pass" } else { "fail" }
            )?;
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let rhs: Vec<f64> = rows.iter().map(|r| r.rhs_w2sq_end).collect();
    let lhs: Vec<f64> = rows.iter().map(|r| r.sup_relent.max(1e-300)).collect();
    let slope_rhs = loglog_slope(&eps, &rhs);
    let slope_lhs = loglog_slope(&eps, &lhs);
    write_file(&out_dir.join("sweep_fit.json"), |w| {
        writeln!(
            w,
            "{{\"slope_rhs\": {:.8}, \"slope_rhs_se\": {:.3e}, \"slope_lhs\": {:.8}, \"slope_lhs_se\": {:.3e}}}",
            slope_rhs.0, slope_rhs.1, slope_lhs.0, slope_lhs.1
        )
    })?;
    Ok(SweepTable { rows, slope_rhs, slope_lhs })
}

fn sweep_member(scen: &Scenario) -> Result<SweepRow> {
    let run = run_overdamped_pipeline(scen)?;
    let mut scen_all = scen.clone();
    scen_all.theorems = vec![TheoremId::RelEntOverdamped, TheoremId::WasserOverdamped];
    let reports = overdamped_reports(&scen_all, &run)?;
    let relent = &reports[0];
    let wasser = &reports[1];
    Ok(SweepRow {
        epsilon: entry_epsilon(&scen.entry).unwrap_or(f64::NAN),
        sup_relent: run.lhs_relent.iter().cloned().fold(0.0, f64::max),
        sup_w2sq: run.lhs_w2sq.iter().cloned().fold(0.0, f64::max),
        rhs_relent_end: *relent.rhs.last().unwrap(),
        rhs_w2sq_end: *wasser.rhs.last().unwrap(),
        kappa: relent.constants[0].value,
        alpha_ti: relent.constants[2].value,
        verdicts: relent.verdict() && wasser.verdict(),
    })
}

// --- CLI ------------------------------------------------------------------------

pub const EXIT_PASS: i32 = 0;
pub const EXIT_BOUND_VIOLATION: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

struct CliArgs {
    command: String,
    config: Option<PathBuf>,
    seed: u64,
    out: PathBuf,
    jobs: usize,
    tolerance: Option<f64>,
}

fn parse_cli(args: &[String]) -> std::result::Result<CliArgs, String> {
    if args.is_empty() {
        return Err("usage: effdyn <simulate|closure|constants|bounds|sweep|validate-map|oracle> --config PATH [--seed U64] [--out DIR] [--jobs N] [--tolerance REAL]".into());
    }
    let mut out = CliArgs {
        command: args[0].clone(),
        config: None,
        seed: 0,
        out: PathBuf::from("out"),
        jobs: 1,
        tolerance: None,
    };
    let mut i = 1;
    while i < args.len() {
        let flag = &args[i];
        let value = args.get(i + 1).ok_or_else(|| format!("missing value for {flag}"))?;
        match flag.as_str() {
            "--config" => out.config = Some(PathBuf::from(value)),
            "--seed" => out.seed = value.parse().map_err(|_| "bad --seed".to_string())?,
            "--out" => out.out = PathBuf::from(value),
            "--jobs" => out.jobs = value.parse().map_err(|_| "bad --jobs".to_string())?,
            "--tolerance" => {
                out.tolerance = Some(value.parse().map_err(|_| "bad --tolerance".to_string())?)
            }
            other => return Err(format!("unknown flag {other}")),
        }
        i += 2;
    }
    Ok(out)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. } => EXIT_CONFIG_ERROR,
        _ => EXIT_NUMERICAL,
    }
}

/// The batch entry point; returns the process exit code.
pub fn run_cli(args: &[String]) -> i32 {
    let cli = match parse_cli(args) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("{msg}");
            return EXIT_CONFIG_ERROR;
        }
    };
    let Some(config_path) = cli.config.clone() else {
        eprintln!("--config is required");
        return EXIT_CONFIG_ERROR;
    };
    let mut cfg = match Config::load(&config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_CONFIG_ERROR;
        }
    };
    if let Some(tol) = cli.tolerance {
        cfg.set("output.tolerance", &format!("{tol}"));
    }
    match dispatch(&cli, &cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(cli: &CliArgs, cfg: &Config) -> Result<i32> {
    match cli.command.as_str() {
        "bounds" => {
            let artifacts = run_scenario(cfg, cli.seed, &cli.out)?;
            let mut all_pass = true;
            for rep in &artifacts.reports {
                let pass = rep.verdict();
                all_pass &= pass;
                println!(
                    "{} {}: worst margin {:+.3e} -> {}",
                    rep.theorem.as_str(),
                    rep.scenario,
                    rep.worst_margin(),
                    if pass { "pass" } else { "FAIL" }
                );
            }
            Ok(if all_pass { EXIT_PASS } else { EXIT_BOUND_VIOLATION })
        }
        "sweep" => {
            let table = sweep_epsilon(cfg, cli.seed, &cli.out, cli.jobs)?;
            println!(
                "sweep: RHS slope {:.4} +- {:.4}, LHS slope {:.4} +- {:.4}",
                table.slope_rhs.0, table.slope_rhs.1, table.slope_lhs.0, table.slope_lhs.1
            );
            let all_pass = table.rows.iter().all(|r| r.verdicts);
            Ok(if all_pass { EXIT_PASS } else { EXIT_BOUND_VIOLATION })
        }
        "simulate" => {
            let scen = Scenario::from_config(cfg)?;
            std::fs::create_dir_all(&cli.out)?;
            write_manifest(&cli.out, cfg, cli.seed)?;
            simulate_command(&scen, cli.seed, &cli.out)?;
            Ok(EXIT_PASS)
        }
        "closure" => {
            let scen = Scenario::from_config(cfg)?;
            std::fs::create_dir_all(&cli.out)?;
            write_manifest(&cli.out, cfg, cli.seed)?;
            closure_command(&scen, cli.seed, &cli.out)?;
            Ok(EXIT_PASS)
        }
        "constants" => {
            let scen = Scenario::from_config(cfg)?;
            std::fs::create_dir_all(&cli.out)?;
            write_manifest(&cli.out, cfg, cli.seed)?;
            constants_command(&scen, &cli.out)?;
            Ok(EXIT_PASS)
        }
        "validate-map" => {
            let scen = Scenario::from_config(cfg)?;
            std::fs::create_dir_all(&cli.out)?;
            validate_command(&scen, &cli.out)?;
            Ok(EXIT_PASS)
        }
        "oracle" => {
            let scen = Scenario::from_config(cfg)?;
            std::fs::create_dir_all(&cli.out)?;
            write_manifest(&cli.out, cfg, cli.seed)?;
            oracle_command(&scen, &cli.out)?;
            Ok(EXIT_PASS)
        }
        other => Err(Error::Config {
            path: "subcommand".into(),
            message: format!("unknown subcommand '{other}'"),
        }),
    }
}

fn simulate_command(scen: &Scenario, seed: u64, out: &Path) -> Result<()> {
    use crate::integrators::{langevin_ensemble_moments, SdeConfig};
    use crate::rng::SeedLineage;
    match scen.dynamics {
        Dynamics::Langevin => {
            let lan = langevin_scenario(scen)?;
            let cfg = SdeConfig::new(0.01, scen.t_end, scen.beta, scen.gamma)?;
            let pot = scen.entry.build();
            let track = langevin_ensemble_moments(
                &pot,
                &cfg,
                &reorder_qp(&lan.mean0),
                &reorder_cov(&lan.cov0),
                10_000,
                &scen.output_times(),
                SeedLineage::new(seed, crate::rng::streams::TRAJECTORY_BASE),
            )?;
            write_file(&out.join("trajectory_summary.csv"), |w| track.write_csv(w))?;
        }
        Dynamics::Overdamped => {
            // Overdamped ensemble summary from Gibbs-equilibrated data.
            let m = gibbs_measure(scen)?;
            let chain = crate::sampling::ChainConfig::default();
            let (ens, diag) = crate::sampling::sample_gibbs(
                &m,
                10_000,
                &chain,
                SeedLineage::new(seed, crate::rng::streams::GIBBS_CHAIN),
            )?;
            write_file(&out.join("ensemble.csv"), |w| ens.write_csv(w))?;
            write_file(&out.join("ensemble.json"), |w| ens.write_sidecar_json(Some(&diag), w))?;
        }
    }
    Ok(())
}

/// The gaussref scenario stores state as (q1, q2, p1, p2); the integrator
/// works with (q, p) blocks in the same order, so no reordering is needed
/// beyond this explicit marker.
fn reorder_qp(mean: &[f64]) -> Vec<f64> {
    mean.to_vec()
}

fn reorder_cov(cov: &Mat) -> Mat {
    cov.clone()
}

fn gibbs_measure(scen: &Scenario) -> Result<crate::model::GibbsMeasure> {
    let pot = scen.entry.build();
    let domain = match scen.entry.analytic_effective(scen.beta) {
        Some(eff) => {
            let sz = eff.mu_hat_variance().map(|v| v.sqrt()).unwrap_or(1.5);
            let (_, fv) = eff.fiber_gaussian(0.0).unwrap_or((0.0, 1.0));
            vec![
                (-scen.box_sigmas * sz, scen.box_sigmas * sz),
                (-scen.box_sigmas * fv.sqrt(), scen.box_sigmas * fv.sqrt()),
            ]
        }
        None => crate::fpgrid::suggested_box(&pot, scen.beta),
    };
    Ok(crate::model::GibbsMeasure::new(pot, scen.beta, domain))
}

fn closure_command(scen: &Scenario, seed: u64, out: &Path) -> Result<()> {
    use crate::rng::SeedLineage;
    let m = gibbs_measure(scen)?;
    let map = CoarseMap::coordinate(2, 1);
    let grid = Grid1::new(m.domain[0].0 / 2.0, m.domain[0].1 / 2.0, scen.cells_coarse.min(32));
    let chain = crate::sampling::ChainConfig { burn_in: 2_000, ..Default::default() };
    let field = crate::closure::effective_coefficients(
        &m,
        &map,
        &grid,
        2_000,
        &chain,
        SeedLineage::new(seed, crate::rng::streams::EFFECTIVE_COEFF),
    )?;
    write_file(&out.join("coefficients.csv"), |w| field.write_csv(w))?;
    Ok(())
}

fn constants_command(scen: &Scenario, out: &Path) -> Result<()> {
    let constants = overdamped_constants(scen)?;
    write_file(&out.join("constants.json"), |w| {
        writeln!(w, "[")?;
        let mut first = true;
        for c in [
            constants.kappa.as_ref(),
            constants.lambda.as_ref(),
            constants.alpha_ti.as_ref(),
            constants.alpha_lsi.as_ref(),
            constants.ctilde.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !first {
                writeln!(w, ",")?;
            }
            first = false;
            write!(w, "  ")?;
            c.write_json(w)?;
        }
        writeln!(w)?;
        writeln!(w, "]")
    })?;
    Ok(())
}

fn validate_command(scen: &Scenario, out: &Path) -> Result<()> {
    let pot = scen.entry.build();
    let m = gibbs_measure(scen)?;
    crate::model::validate_potential(&pot, &m.domain, 200)?;
    let map = CoarseMap::coordinate(pot.dim, 1);
    let rep = crate::model::validate_map(&map, &m.domain, 2.0, 200)?;
    let aff = crate::model::check_affine_at_infinity(&map, &[1.0, 10.0, 100.0, 1000.0]);
    // Scale separation: Dxi grad V0 = 0 at sampled points.
    if let Some(split) = &pot.scale_split {
        let mut rng = crate::rng::StreamRng::from_parts(scen.seed, crate::rng::streams::VALIDATION);
        for _ in 0..100 {
            let q: Vec<f64> =
                m.domain.iter().map(|&(lo, hi)| rng.uniform_in(lo, hi)).collect();
            let g0 = (split.grad_v0)(&q);
            let proj = map.jacobian(&q).matvec(&g0);
            if crate::linalg::norm(&proj) > 1e-10 {
                return Err(Error::Validation(
                    "Dxi grad V0 does not vanish: map does not resolve the scale split".into(),
                ));
            }
        }
    }
    write_file(&out.join("validate.json"), |w| {
        writeln!(w, "{{")?;
        writeln!(w, "  \"min_metric_eigenvalue\": {:.17e},", rep.min_metric_eigenvalue)?;
        writeln!(w, "  \"hess_decay_exponent\": {:.6},", rep.hess_decay_exponent)?;
        writeln!(w, "  \"c3_constant\": {:.6e},", rep.c3_constant)?;
        writeln!(w, "  \"affine_at_infinity\": {},", aff.pass)?;
        writeln!(w, "  \"c_xi_estimate\": {:.6e}", aff.c_xi_est)?;
        writeln!(w, "}}")
    })?;
    Ok(())
}

fn oracle_command(scen: &Scenario, out: &Path) -> Result<()> {
    let lan = langevin_scenario(scen)?;
    let times = scen.output_times();
    let series = gaussref::langevin_reference_suite(&lan, &times)?;
    write_file(&out.join("oracle.csv"), |w| {
        writeln!(w, "t,relent,w2")?;
        for (t, (h, w2)) in times.iter().zip(&series) {
            writeln!(w, "{:.17e},{:.17e},{:.17e}", t, h, w2)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> Config {
        Config::parse(
            "[physics]\n\
             dynamics = overdamped\n\
             potential = coupled_quadratic\n\
             c = 0.25\n\
             epsilon = 0.1\n\
             beta = 1.0\n\
             [grid]\n\
             cells_full = 48\n\
             cells_coarse = 48\n\
             [time]\n\
             t_end = 0.4\n\
             outputs = 5\n",
        )
        .unwrap()
    }

    #[test]
    fn config_missing_field_has_path() {
        let cfg = Config::parse("[physics]\npotential = coupled_quadratic\nc = 0.5\nepsilon = 0.1\n[time]\nt_end = 1.0\n").unwrap();
        let err = Scenario::from_config(&cfg).unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "physics.beta"),
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn config_canonical_is_stable() {
        let a = Config::parse("[b]\ny = 2\n[a]\nx = 1\n").unwrap();
        let b = Config::parse("[a]\nx = 1\n[b]\ny = 2\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(fnv1a(a.canonical().as_bytes()), fnv1a(b.canonical().as_bytes()));
    }

    #[test]
    fn overdamped_pipeline_small_grid() {
        let cfg = base_config();
        let mut scen = Scenario::from_config(&cfg).unwrap();
        scen.theorems = vec![TheoremId::RelEntOverdamped, TheoremId::WasserOverdamped];
        let run = run_overdamped_pipeline(&scen).unwrap();
        // Gyongy consistency at coarse tolerance on this small grid.
        let last = run.times.len() - 1;
        let l1: f64 = run.marginals.states[last]
            .mass
            .iter()
            .zip(&run.traj_coarse.states[last].mass)
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 < 0.02, "marginal vs coarse solve L1 {l1}");
        let reports = overdamped_reports(&scen, &run).unwrap();
        for rep in &reports {
            assert!(rep.verdict(), "{} failed: worst {}", rep.theorem.as_str(), rep.worst_margin());
        }
    }

    #[test]
    fn scenario_rerun_is_byte_identical() {
        let cfg = base_config();
        let dir1 = std::env::temp_dir().join("effdyn_test_det1");
        let dir2 = std::env::temp_dir().join("effdyn_test_det2");
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
        run_scenario(&cfg, 7, &dir1).unwrap();
        run_scenario(&cfg, 7, &dir2).unwrap();
        for name in ["bounds.csv", "coarse_trajectories.csv", "manifest.json"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between reruns");
        }
        let _ = std::fs::remove_dir_all(&dir1);
        let _ = std::fs::remove_dir_all(&dir2);
    }

    #[test]
    fn langevin_pipeline_reports_pass() {
        let cfg = Config::parse(
            "[physics]\n\
             dynamics = langevin\n\
             potential = coupled_quadratic\n\
             c = 0.5\n\
             epsilon = 0.1\n\
             beta = 1.0\n\
             gamma = 1.0\n\
             [time]\n\
             t_end = 1.0\n\
             outputs = 6\n",
        )
        .unwrap();
        let scen = Scenario::from_config(&cfg).unwrap();
        let run = run_langevin_pipeline(&scen).unwrap();
        let reports = langevin_reports(&scen, &run).unwrap();
        assert_eq!(reports.len(), 2);
        for rep in &reports {
            assert!(rep.verdict(), "{} worst {}", rep.theorem.as_str(), rep.worst_margin());
        }
    }

    #[test]
    fn loglog_slope_exact_powers() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        let (slope, se) = loglog_slope(&xs, &ys);
        assert!((slope - 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
    }
}
