//! Langevin bound verification through the Gaussian oracle: the exact
//! coarse-grained law is the (q1, p1)-marginal of the 4D moment propagation,
//! the effective law solves the 2D effective system, and the assembled
//! bounds use the analytic phase-space constants.

use effdyn::bench::{langevin_reports, run_langevin_pipeline, Dynamics, Scenario};
use effdyn::model::CatalogPotential;
use effdyn::ratefn::TheoremId;

fn main() -> effdyn::Result<()> {
    for c in [0.25, 0.5] {
        let scen = Scenario {
            dynamics: Dynamics::Langevin,
            entry: CatalogPotential::CoupledQuadratic { c, epsilon: 0.1 },
            beta: 1.0,
            gamma: 1.0,
            cells_full: 0,
            cells_coarse: 0,
            box_sigmas: 8.0,
            t_end: 1.0,
            n_outputs: 11,
            shift: 1.0,
            theorems: vec![TheoremId::RelEntLangevin, TheoremId::WasserLangevin],
            tolerance: 1e-3,
            seed: 0,
            semi_implicit: false,
            name: format!("coupled_quadratic-lan-c{c}"),
        };
        let run = run_langevin_pipeline(&scen)?;
        println!("c = {c}: H(rho_0 | mu) = {:.5}", run.h0);
        for rep in langevin_reports(&scen, &run)? {
            println!(
                "  {}: verdict {}, end lhs {:.4e}, end rhs {:.4e}",
                rep.theorem.as_str(),
                if rep.verdict() { "pass" } else { "FAIL" },
                rep.lhs.last().unwrap(),
                rep.rhs.last().unwrap()
            );
            for note in &rep.notes {
                println!("    note: {note}");
            }
        }
    }
    Ok(())
}
