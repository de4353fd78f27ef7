//! Hermite jets of a map from point evaluations only, using the
//! ε-difference stencil.

use cm_euler3d::epsdiff::{eps_diff_displacement, DEFAULT_EPS};
use cm_euler3d::{GridSpec, Mask};

fn main() -> cm_euler3d::Result<()> {
    let grid = GridSpec::cubic(16)?;
    let d = |x: [f64; 3]| [0.2 * x[1].sin() * x[2].cos(), 0.1 * x[0].cos(), 0.3 * x[0].sin() * x[1].sin()];
    let jets = eps_diff_displacement(d, grid, DEFAULT_EPS)?;

    let idx = grid.index(3, 5, 7);
    let x = grid.node_at(idx);
    let got = jets.node_jets(idx);
    let exact_yz = -0.2 * x[1].cos() * x[2].sin();
    println!("node {x:.4?}");
    println!("∂²d₀/∂y∂z  ε-difference {:.12}  exact {exact_yz:.12}", got[0][Mask::YZ.slot()]);
    println!("∂d₂/∂x      ε-difference {:.12}  exact {:.12}", got[2][Mask::X.slot()], 0.3 * x[0].cos() * x[1].sin());
    Ok(())
}
