//! Sample a plane of |w| from an evolved state and refine the location of
//! the vorticity maximum.

use cm_euler3d::config::RunConfig;
use cm_euler3d::convergence::evolve;
use cm_euler3d::diagnostics::{refine_max, SliceQuantity, SliceRequest};
use cm_euler3d::driver::{quantity_eval, state_slice};
use cm_euler3d::scenarios::{Scenario, ScenarioKind};
use cm_euler3d::GridSpec;

fn main() -> cm_euler3d::Result<()> {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::TaylorGreen);
    cfg.map_dims = [16; 3];
    cfg.sample_dims = [16; 3];
    cfg.dt = 0.5;
    cfg.t_final = 1.0;
    cfg.trunc_radius = 16.0 / 3.0;
    let w0 = Scenario::standard(ScenarioKind::TaylorGreen)?.w0;
    let state = evolve(&cfg, &w0)?;

    let req = SliceRequest {
        axis: 2,
        offset: 0.0,
        center: [0.0, 0.0],
        half_widths: [3.0, 3.0],
        resolution: [48, 48],
        quantity: SliceQuantity::VorticityMagnitude,
    };
    let slice = state_slice(&state, &w0, &req)?;
    println!("|w| on z = 0: min {:.4}, max {:.4}", slice.min, slice.max);
    slice.save(&std::env::temp_dir(), "tg_wmag_z0")?;

    let f = quantity_eval(&state, &w0, SliceQuantity::VorticityMagnitude);
    let (x, v) = refine_max(&f, &GridSpec::periodic_box([16; 3])?, 3)?;
    println!("refined max |w| = {v:.6} at {x:.4?}");
    Ok(())
}
