//! Run a short Taylor-Green simulation, then resample the saved stack on
//! a finer grid than the one it was computed on.

use cm_euler3d::config::RunConfig;
use cm_euler3d::driver::{resample, run, ResampleQuantity};
use cm_euler3d::scenarios::ScenarioKind;

fn main() -> cm_euler3d::Result<()> {
    let mut cfg = RunConfig::for_scenario(ScenarioKind::TaylorGreen);
    cfg.map_dims = [16; 3];
    cfg.sample_dims = [16; 3];
    cfg.diag_dims = [32; 3];
    cfg.dt = 0.5;
    cfg.t_final = 1.0;
    cfg.trunc_radius = 16.0 / 3.0;
    cfg.output_dir = std::env::temp_dir().join("cm_euler3d_resample");
    let summary = run(&cfg)?;

    let out = cfg.output_dir.join("fine");
    let report = resample(&summary.stack_dir, 48, ResampleQuantity::Vorticity, &out, false)?;
    println!("t = {}, resampled on {}", report.t, report.grid);
    if let Some(q) = report.conserved {
        println!("enstrophy {:.6}", q.enstrophy);
    }
    for (k, s) in report.spectrum.iter().enumerate().take(10) {
        println!("k = {k:<3} S = {s:.4e}");
    }
    Ok(())
}
