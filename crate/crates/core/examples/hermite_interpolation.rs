//! Tricubic Hermite interpolation of a smooth periodic function and its
//! fourth-order convergence under grid refinement.

use cm_euler3d::{GridSpec, JetScalarField, Mask};

fn main() -> cm_euler3d::Result<()> {
    let f = |x: [f64; 3]| x[0].sin() * (2.0 * x[1]).cos() * x[2].sin();
    let jets = |x: [f64; 3]| {
        let fx = [x[0].sin(), x[0].cos()];
        let fy = [(2.0 * x[1]).cos(), -2.0 * (2.0 * x[1]).sin()];
        let fz = [x[2].sin(), x[2].cos()];
        let mut j = [0.0; 8];
        for m in Mask::ALL {
            j[m.slot()] = fx[m.0[0] as usize] * fy[m.0[1] as usize] * fz[m.0[2] as usize];
        }
        j
    };
    let probe = [0.37, -1.91, 2.58];
    println!("N    |error| at {probe:?}");
    for n in [8, 16, 32, 64] {
        let field = JetScalarField::from_fn(GridSpec::cubic(n)?, jets);
        println!("{n:<4} {:.3e}", (field.value(probe) - f(probe)).abs());
    }
    let field = JetScalarField::from_fn(GridSpec::cubic(32)?, jets);
    let (v, g) = field.value_grad(probe);
    println!("value {v:.6}, gradient {g:.6?}");
    Ok(())
}
