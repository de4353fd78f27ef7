//! The ε-difference scheme: jets of a map known only through point
//! evaluations, from centered differences at offsets scaled by ε.
//!
//! Each mixed partial `∂ᵃ` uses the 4th-order five-point stencil
//! `(1, −8, 0, 8, −1) / 12ε` along every active axis, tensorized, so all
//! eight jets at a node come from the 125 points `x + ε·{−2..2}³`.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::jet::JetVectorField;
use crate::Vec3;

/// Default stencil scale.
pub const DEFAULT_EPS: f64 = 2.5e-3;

const OFFSETS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
const WEIGHTS: [f64; 5] = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// All eight jets at `x` of a vector function `f`, in storage order per
/// component.
pub fn node_jets<F>(f: &F, x: Vec3, eps: f64) -> [[f64; 8]; 3]
where
    F: Fn(Vec3) -> Vec3,
{
    let mut vals = [[[[0.0; 3]; 5]; 5]; 5];
    for (i, oi) in OFFSETS.iter().enumerate() {
        for (j, oj) in OFFSETS.iter().enumerate() {
            for (k, ok) in OFFSETS.iter().enumerate() {
                vals[i][j][k] = f([x[0] + oi * eps, x[1] + oj * eps, x[2] + ok * eps]);
            }
        }
    }
    let inv = 1.0 / eps;
    // contract z: [i][j][az]
    let mut gz = [[[[0.0; 3]; 2]; 5]; 5];
    for i in 0..5 {
        for j in 0..5 {
            gz[i][j][0] = vals[i][j][2];
            let mut d = [0.0; 3];
            for k in [0, 1, 3, 4] {
                for c in 0..3 {
                    d[c] += WEIGHTS[k] * vals[i][j][k][c];
                }
            }
            gz[i][j][1] = d.map(|v| v * inv);
        }
    }
    // contract y: [i][ay][az]
    let mut gy = [[[[0.0; 3]; 2]; 2]; 5];
    for i in 0..5 {
        for az in 0..2 {
            gy[i][0][az] = gz[i][2][az];
            let mut d = [0.0; 3];
            for j in [0, 1, 3, 4] {
                for c in 0..3 {
                    d[c] += WEIGHTS[j] * gz[i][j][az][c];
                }
            }
            gy[i][1][az] = d.map(|v| v * inv);
        }
    }
    // contract x and scatter by mask bits into storage order
    const SLOT_OF_BITS: [usize; 8] = [0, 1, 2, 4, 3, 5, 6, 7];
    let mut out = [[0.0; 8]; 3];
    for ay in 0..2 {
        for az in 0..2 {
            let v0 = gy[2][ay][az];
            let mut d = [0.0; 3];
            for i in [0, 1, 3, 4] {
                for c in 0..3 {
                    d[c] += WEIGHTS[i] * gy[i][ay][az][c];
                }
            }
            for (ax, v) in [(0, v0), (1, d.map(|v| v * inv))] {
                let slot = SLOT_OF_BITS[ax | ay << 1 | az << 2];
                for c in 0..3 {
                    out[c][slot] = v[c];
                }
            }
        }
    }
    out
}

/// Jets of a periodic vector function at every node of `grid`.
pub fn eps_diff_field<F>(f: F, grid: GridSpec, eps: f64) -> Result<JetVectorField>
where
    F: Fn(Vec3) -> Vec3 + Sync,
{
    check_eps(eps)?;
    let field = JetVectorField::from_fn(grid, |x| node_jets(&f, x, eps));
    ensure_finite(&field)?;
    Ok(field)
}

/// Displacement jets `χ − x` of a map given by absolute positions.
///
/// The identity yields exactly zero displacement; prefer
/// [`eps_diff_displacement`] when the displacement can be evaluated
/// directly, which avoids cancellation against `x`.
pub fn eps_diff_jets<F>(map_eval: F, grid: GridSpec, eps: f64) -> Result<JetVectorField>
where
    F: Fn(Vec3) -> Vec3 + Sync,
{
    eps_diff_field(
        |y| {
            let m = map_eval(y);
            [m[0] - y[0], m[1] - y[1], m[2] - y[2]]
        },
        grid,
        eps,
    )
}

/// Displacement jets from a function returning `χ(y) − y` directly.
pub fn eps_diff_displacement<F>(disp_eval: F, grid: GridSpec, eps: f64) -> Result<JetVectorField>
where
    F: Fn(Vec3) -> Vec3 + Sync,
{
    eps_diff_field(disp_eval, grid, eps)
}

fn ensure_finite(field: &JetVectorField) -> Result<()> {
    let grid = field.grid();
    for c in 0..3 {
        if let Some(idx) = field
            .comp(c)
            .coeffs()
            .iter()
            .position(|j| j.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::NonFinite {
                what: "map jet",
                x: grid.node_at(idx),
            });
        }
    }
    Ok(())
}
