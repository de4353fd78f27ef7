//! Grid convergence of the ABC flow against its exact stationary
//! vorticity, on small levels.

use cm_euler3d::convergence::abc_convergence;

fn main() -> cm_euler3d::Result<()> {
    let report = abc_convergence(&[12, 16, 24], 1.0)?;
    println!("{report}");
    Ok(())
}
