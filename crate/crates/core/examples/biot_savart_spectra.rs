//! Spectral Biot-Savart on the Taylor-Green vorticity, with the energy
//! and enstrophy shell spectra.

use cm_euler3d::scenarios::taylor_green_w0;
use cm_euler3d::spectral::SpectralVectorField;
use cm_euler3d::GridSpec;

fn main() -> cm_euler3d::Result<()> {
    let grid = GridSpec::periodic_box([32; 3])?;
    let samples: Vec<[f64; 3]> = grid.nodes().map(taylor_green_w0).collect();
    let phys: [Vec<f64>; 3] = std::array::from_fn(|c| samples.iter().map(|w| w[c]).collect());
    let w = SpectralVectorField::forward(grid, &phys)?;
    let u = w.biot_savart();

    let div = u.divergence().iter().map(|v| v.norm()).fold(0.0, f64::max);
    println!("max |div u| = {div:.2e}");
    let (es, ks) = (w.isotropic_spectrum(), u.isotropic_spectrum());
    println!("shell  enstrophy     energy");
    for k in 0..6 {
        println!("{k:<6} {:<13.6e} {:.6e}", es[k], ks[k]);
    }
    Ok(())
}
