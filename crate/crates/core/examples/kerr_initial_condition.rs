//! Construct the Kerr anti-parallel tube vorticity and report its
//! conserved quantities at t = 0.

use cm_euler3d::diagnostics::conserved_quantities;
use cm_euler3d::flowmap::{identity_map, SubmapStack};
use cm_euler3d::scenarios::{Scenario, ScenarioKind};
use cm_euler3d::GridSpec;

fn main() -> cm_euler3d::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(64);
    let scenario = Scenario::standard(ScenarioKind::Kerr)?;
    let grid = GridSpec::periodic_box([n; 3])?;
    let (q, _) = conserved_quantities(&SubmapStack::new(), &identity_map(grid), &|x| scenario.w0.eval(x), grid)?;
    println!("Kerr tubes on {n}³");
    println!("enstrophy {:.4}  energy {:.4}  helicity {:.1e}", q.enstrophy, q.energy, q.helicity);
    println!("max |w| {:.4}  max |u| {:.4}", q.max_w, q.max_u);
    Ok(())
}
