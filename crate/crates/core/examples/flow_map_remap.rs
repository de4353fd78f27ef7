//! Build a backward map step by step under a frozen ABC velocity, archive
//! it once the volume error crosses a tolerance, and evaluate the
//! composed map.

use cm_euler3d::epsdiff::DEFAULT_EPS;
use cm_euler3d::flowmap::{compose_update, eval_composed, identity_map, maybe_remap, one_step_map, RemapPolicy, SubmapStack};
use cm_euler3d::fluid::{VelocityFrame, VelocityInterpolant};
use cm_euler3d::{GridSpec, JetVectorField, Mask};

fn main() -> cm_euler3d::Result<()> {
    let grid = GridSpec::cubic(16)?;
    let u = JetVectorField::from_fn(grid, |x| {
        let mut j = [[0.0; 8]; 3];
        for i in 0..3 {
            let (a, b) = ((i + 2) % 3, (i + 1) % 3);
            j[i][0] = x[a].sin() + x[b].cos();
            j[i][Mask::GRADIENT[a].slot()] = x[a].cos();
            j[i][Mask::GRADIENT[b].slot()] = -x[b].sin();
        }
        j
    });
    let dt = 0.25;
    let policy = RemapPolicy::new(2.5e-3)?;
    let mut stack = SubmapStack::new();
    let mut current = identity_map(grid);
    for n in 0..8 {
        let t = n as f64 * dt;
        let frame = VelocityFrame { t, u_jets: u.clone(), dudt_jets: JetVectorField::zeros(grid) };
        let vel = VelocityInterpolant::bootstrap(frame, dt)?;
        let step = one_step_map(&vel, t, dt, grid, DEFAULT_EPS)?;
        current = compose_update(&current, &step, n + 1, t + dt, DEFAULT_EPS)?;
        let err = current.det_error();
        let remapped = maybe_remap(&mut stack, &mut current, &policy)?;
        println!("step {}  det error {err:.2e}{}", n + 1, if remapped { "  remap" } else { "" });
    }
    let x = [0.5, 1.0, -0.3];
    println!("{} submaps; X(t=2) {x:?} -> {:.6?}", stack.len(), eval_composed(&stack, &current, x));
    Ok(())
}
