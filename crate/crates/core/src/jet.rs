//! Hermite jet fields: per-node storage of the value and all mixed first
//! partials, evaluated through the tricubic Hermite interpolant.
//!
//! Coefficients are raw derivatives `∂ᵃf(x_i)`; the `(Δxᵐ)^{aₘ}` factor of
//! the shape functions is applied at evaluation time, so stored jets do not
//! depend on the resolution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::{Mat3, Vec3};

/// A multi-index `a ∈ {0,1}³` selecting the mixed partial `∂ᵃ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mask(pub [u8; 3]);

// storage slot for bit pattern ax + 2 ay + 4 az
const SLOT_OF_BITS: [usize; 8] = [0, 1, 2, 4, 3, 5, 6, 7];

impl Mask {
    pub const VALUE: Mask = Mask([0, 0, 0]);
    pub const X: Mask = Mask([1, 0, 0]);
    pub const Y: Mask = Mask([0, 1, 0]);
    pub const Z: Mask = Mask([0, 0, 1]);
    pub const XY: Mask = Mask([1, 1, 0]);
    pub const XZ: Mask = Mask([1, 0, 1]);
    pub const YZ: Mask = Mask([0, 1, 1]);
    pub const XYZ: Mask = Mask([1, 1, 1]);

    /// All eight masks in storage order: value, x, y, z, xy, xz, yz, xyz.
    pub const ALL: [Mask; 8] = [
        Mask::VALUE,
        Mask::X,
        Mask::Y,
        Mask::Z,
        Mask::XY,
        Mask::XZ,
        Mask::YZ,
        Mask::XYZ,
    ];

    pub const GRADIENT: [Mask; 3] = [Mask::X, Mask::Y, Mask::Z];

    #[inline]
    pub fn bits(self) -> usize {
        self.0[0] as usize | (self.0[1] as usize) << 1 | (self.0[2] as usize) << 2
    }

    /// Position of this mask in a node's coefficient array.
    #[inline]
    pub fn slot(self) -> usize {
        SLOT_OF_BITS[self.bits()]
    }

    pub fn order(self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    #[inline]
    pub fn active(self, axis: usize) -> bool {
        self.0[axis] != 0
    }
}

/// Which 1D Hermite shape function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Interpolates the value: `q0(s) = (1 + 2|s|)(1 - |s|)²`.
    Q0,
    /// Interpolates the derivative: `q1(s) = s (1 - |s|)²`.
    Q1,
}

/// 1D Hermite cubic shape function or its first derivative on `|s| ≤ 1`.
pub fn basis_1d(s: f64, which: Basis, deriv: u8) -> f64 {
    let a = s.abs();
    let m = 1.0 - a;
    match (which, deriv) {
        (Basis::Q0, 0) => (1.0 + 2.0 * a) * m * m,
        (Basis::Q0, _) => -6.0 * s * m,
        (Basis::Q1, 0) => s * m * m,
        (Basis::Q1, _) => m * (1.0 - 3.0 * a),
    }
}

/// Per-axis weights `[corner][a]` for the value (`w`) and the derivative
/// (`d`) of the interpolant, including the `Δx^a` and `1/Δx` factors.
#[derive(Clone, Copy)]
struct AxisWeights {
    w: [[f64; 2]; 2],
    d: [[f64; 2]; 2],
}

#[inline(always)]
fn axis_weights(s: f64, h: f64) -> AxisWeights {
    let m = 1.0 - s;
    let inv_h = 1.0 / h;
    AxisWeights {
        w: [
            [(1.0 + 2.0 * s) * m * m, s * m * m * h],
            [(3.0 - 2.0 * s) * s * s, (s - 1.0) * s * s * h],
        ],
        d: [
            [-6.0 * s * m * inv_h, m * (1.0 - 3.0 * s)],
            [6.0 * s * m * inv_h, s * (3.0 * s - 2.0)],
        ],
    }
}

/// Cell lookup shared by every component evaluated at the same point.
#[derive(Clone, Copy)]
pub(crate) struct Stencil {
    corners: [usize; 8],
    wx: AxisWeights,
    wy: AxisWeights,
    wz: AxisWeights,
}

impl Stencil {
    #[inline(always)]
    pub(crate) fn new(grid: &GridSpec, x: Vec3) -> Stencil {
        let (c, s) = grid.locate(x);
        let h = grid.spacing();
        let [nx, ny, nz] = grid.dims;
        let i1 = if c[0] + 1 == nx { 0 } else { c[0] + 1 };
        let j1 = if c[1] + 1 == ny { 0 } else { c[1] + 1 };
        let k1 = if c[2] + 1 == nz { 0 } else { c[2] + 1 };
        let xs = [c[0], i1];
        let ys = [c[1] * nx, j1 * nx];
        let zs = [c[2] * nx * ny, k1 * nx * ny];
        let mut corners = [0usize; 8];
        for (b, corner) in corners.iter_mut().enumerate() {
            *corner = xs[b & 1] + ys[(b >> 1) & 1] + zs[(b >> 2) & 1];
        }
        Stencil {
            corners,
            wx: axis_weights(s[0], h[0]),
            wy: axis_weights(s[1], h[1]),
            wz: axis_weights(s[2], h[2]),
        }
    }

    /// Gather `c[corner bits][a bits]` from storage order.
    #[inline(always)]
    fn gather(&self, coeffs: &[[f64; 8]]) -> [[f64; 8]; 8] {
        let mut c = [[0.0; 8]; 8];
        for (b, &idx) in self.corners.iter().enumerate() {
            let j = &coeffs[idx];
            c[b] = [j[0], j[1], j[2], j[4], j[3], j[5], j[6], j[7]];
        }
        c
    }

    #[inline(always)]
    fn value(&self, coeffs: &[[f64; 8]]) -> f64 {
        let c = self.gather(coeffs);
        let (wx, wy, wz) = (&self.wx.w, &self.wy.w, &self.wz.w);
        let mut out = 0.0;
        for cx in 0..2 {
            for ax in 0..2 {
                let mut by = 0.0;
                for cy in 0..2 {
                    for ay in 0..2 {
                        let mut bz = 0.0;
                        for cz in 0..2 {
                            let row = &c[cx | cy << 1 | cz << 2];
                            bz += wz[cz][0] * row[ax | ay << 1] + wz[cz][1] * row[ax | ay << 1 | 4];
                        }
                        by += wy[cy][ay] * bz;
                    }
                }
                out += wx[cx][ax] * by;
            }
        }
        out
    }

    /// Value and gradient by sum factorization (z, then y, then x).
    #[inline(always)]
    fn value_grad(&self, coeffs: &[[f64; 8]]) -> (f64, Vec3) {
        let c = self.gather(coeffs);
        let (wx, wy, wz) = (&self.wx, &self.wy, &self.wz);
        let (mut v, mut gx, mut gy, mut gz) = (0.0, 0.0, 0.0, 0.0);
        for cx in 0..2 {
            for ax in 0..2 {
                let (mut b0, mut by, mut bz) = (0.0, 0.0, 0.0);
                for cy in 0..2 {
                    for ay in 0..2 {
                        let (mut a0, mut az) = (0.0, 0.0);
                        for cz in 0..2 {
                            let row = &c[cx | cy << 1 | cz << 2];
                            let f0 = row[ax | ay << 1];
                            let f1 = row[ax | ay << 1 | 4];
                            a0 += wz.w[cz][0] * f0 + wz.w[cz][1] * f1;
                            az += wz.d[cz][0] * f0 + wz.d[cz][1] * f1;
                        }
                        b0 += wy.w[cy][ay] * a0;
                        by += wy.d[cy][ay] * a0;
                        bz += wy.w[cy][ay] * az;
                    }
                }
                v += wx.w[cx][ax] * b0;
                gx += wx.d[cx][ax] * b0;
                gy += wx.w[cx][ax] * by;
                gz += wx.w[cx][ax] * bz;
            }
        }
        (v, [gx, gy, gz])
    }

    fn masked(&self, coeffs: &[[f64; 8]], mask: Mask) -> f64 {
        let c = self.gather(coeffs);
        let pick = |w: &AxisWeights, axis: usize| if mask.active(axis) { w.d } else { w.w };
        let (wx, wy, wz) = (pick(&self.wx, 0), pick(&self.wy, 1), pick(&self.wz, 2));
        let mut out = 0.0;
        for (b, row) in c.iter().enumerate() {
            let (cx, cy, cz) = (b & 1, (b >> 1) & 1, (b >> 2) & 1);
            for (a, &coef) in row.iter().enumerate() {
                let (ax, ay, az) = (a & 1, (a >> 1) & 1, (a >> 2) & 1);
                out += coef * wx[cx][ax] * wy[cy][ay] * wz[cz][az];
            }
        }
        out
    }
}

/// Periodic scalar field with one 8-entry jet per node.
#[derive(Debug, Clone, PartialEq)]
pub struct JetScalarField {
    grid: GridSpec,
    coeffs: Vec<[f64; 8]>,
}

impl JetScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        JetScalarField {
            grid,
            coeffs: vec![[0.0; 8]; grid.len()],
        }
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<[f64; 8]>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: coeffs.len(),
            });
        }
        Ok(JetScalarField { grid, coeffs })
    }

    /// Build jets from a function returning all eight partials at a node.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> [f64; 8] + Sync,
    {
        let coeffs = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.node_at(idx)))
            .collect();
        JetScalarField { grid, coeffs }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[[f64; 8]] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [[f64; 8]] {
        &mut self.coeffs
    }

    /// The stored partials as eight node arrays, storage order.
    pub fn samples(&self) -> [Vec<f64>; 8] {
        std::array::from_fn(|s| self.coeffs.iter().map(|c| c[s]).collect())
    }

    /// `∂ᵃ` of the tricubic Hermite interpolant at `x` (wrapped periodically).
    pub fn eval(&self, x: Vec3, mask: Mask) -> f64 {
        Stencil::new(&self.grid, x).masked(&self.coeffs, mask)
    }

    #[inline]
    pub fn value(&self, x: Vec3) -> f64 {
        Stencil::new(&self.grid, x).value(&self.coeffs)
    }

    #[inline]
    pub fn value_grad(&self, x: Vec3) -> (f64, Vec3) {
        Stencil::new(&self.grid, x).value_grad(&self.coeffs)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// The projection `ℋ_G`: jets from node samples of every mixed partial.
///
/// `samples[s]` holds the node values of the partial at storage slot `s`
/// (see [`Mask::ALL`]).
pub fn project(samples: &[Vec<f64>; 8], grid: GridSpec) -> Result<JetScalarField> {
    for s in samples {
        if s.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                got: s.len(),
            });
        }
    }
    let coeffs = (0..grid.len())
        .map(|idx| std::array::from_fn(|s| samples[s][idx]))
        .collect();
    Ok(JetScalarField { grid, coeffs })
}

/// Three jet components on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JetVectorField {
    comps: [JetScalarField; 3],
}

impl JetVectorField {
    pub fn new(comps: [JetScalarField; 3]) -> Result<Self> {
        if comps[1].grid != comps[0].grid || comps[2].grid != comps[0].grid {
            return Err(Error::Config(
                "vector field components must share one grid".into(),
            ));
        }
        Ok(JetVectorField { comps })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        JetVectorField {
            comps: std::array::from_fn(|_| JetScalarField::zeros(grid)),
        }
    }

    /// Build jets from a function returning `[component][slot]` at a node.
    pub fn from_fn<F>(grid: GridSpec, f: F) -> Self
    where
        F: Fn(Vec3) -> [[f64; 8]; 3] + Sync,
    {
        let jets: Vec<[[f64; 8]; 3]> = (0..grid.len())
            .into_par_iter()
            .map(|idx| f(grid.node_at(idx)))
            .collect();
        JetVectorField {
            comps: std::array::from_fn(|c| JetScalarField {
                grid,
                coeffs: jets.iter().map(|j| j[c]).collect(),
            }),
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.comps[0].grid
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &JetScalarField {
        &self.comps[c]
    }

    pub fn comps(&self) -> &[JetScalarField; 3] {
        &self.comps
    }

    pub fn comps_mut(&mut self) -> &mut [JetScalarField; 3] {
        &mut self.comps
    }

    pub fn into_comps(self) -> [JetScalarField; 3] {
        self.comps
    }

    /// Componentwise [`JetScalarField::eval`].
    pub fn eval(&self, x: Vec3, mask: Mask) -> Vec3 {
        let st = Stencil::new(self.grid(), x);
        std::array::from_fn(|c| st.masked(&self.comps[c].coeffs, mask))
    }

    #[inline]
    pub fn value(&self, x: Vec3) -> Vec3 {
        let st = Stencil::new(self.grid(), x);
        [
            st.value(&self.comps[0].coeffs),
            st.value(&self.comps[1].coeffs),
            st.value(&self.comps[2].coeffs),
        ]
    }

    /// Value and Jacobian `J[i][j] = ∂_j f_i`.
    #[inline]
    pub fn value_jacobian(&self, x: Vec3) -> (Vec3, Mat3) {
        let st = Stencil::new(self.grid(), x);
        let (v0, g0) = st.value_grad(&self.comps[0].coeffs);
        let (v1, g1) = st.value_grad(&self.comps[1].coeffs);
        let (v2, g2) = st.value_grad(&self.comps[2].coeffs);
        ([v0, v1, v2], [g0, g1, g2])
    }

    /// Node jets `[component][slot]`.
    #[inline]
    pub fn node_jets(&self, idx: usize) -> [[f64; 8]; 3] {
        [
            self.comps[0].coeffs[idx],
            self.comps[1].coeffs[idx],
            self.comps[2].coeffs[idx],
        ]
    }

    /// `Σ wᵢ Fᵢ` coefficient-wise; all fields must share a grid.
    pub fn linear_combination(terms: &[(f64, &JetVectorField)]) -> Result<JetVectorField> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Config("empty linear combination".into()))?;
        let grid = *first.1.grid();
        if terms.iter().any(|(_, f)| *f.grid() != grid) {
            return Err(Error::Config("linear combination of fields on different grids".into()));
        }
        let comps = std::array::from_fn(|c| {
            let coeffs = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let mut out = [0.0; 8];
                    for (w, f) in terms {
                        let src = &f.comps[c].coeffs[idx];
                        for s in 0..8 {
                            out[s] += w * src[s];
                        }
                    }
                    out
                })
                .collect();
            JetScalarField { grid, coeffs }
        });
        Ok(JetVectorField { comps })
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.comps
            .iter()
            .all(|c| c.coeffs.iter().all(|j| j.iter().all(|v| v.is_finite())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn basis_values() {
        assert_eq!(basis_1d(0.0, Basis::Q0, 0), 1.0);
        assert_eq!(basis_1d(0.0, Basis::Q1, 0), 0.0);
        assert_eq!(basis_1d(1.0, Basis::Q0, 0), 0.0);
        assert_eq!(basis_1d(-1.0, Basis::Q1, 0), 0.0);
        assert_eq!(basis_1d(0.5, Basis::Q0, 0), 0.5);
        assert_eq!(basis_1d(0.5, Basis::Q1, 0), 0.125);
        // derivative interpolation property
        assert_eq!(basis_1d(0.0, Basis::Q0, 1), 0.0);
        assert_eq!(basis_1d(0.0, Basis::Q1, 1), 1.0);
        assert_eq!(basis_1d(1.0, Basis::Q1, 1), 0.0);
        assert_eq!(basis_1d(-1.0, Basis::Q0, 1), 0.0);
    }

    #[test]
    fn basis_derivative_matches_finite_difference() {
        let h = 1e-6;
        for &s in &[-0.9, -0.4, -0.1, 0.2, 0.6, 0.95] {
            for which in [Basis::Q0, Basis::Q1] {
                let fd = (basis_1d(s + h, which, 0) - basis_1d(s - h, which, 0)) / (2.0 * h);
                assert!((fd - basis_1d(s, which, 1)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn axis_weights_agree_with_basis() {
        let h = 0.37;
        for &s in &[0.0, 0.25, 0.5, 0.8] {
            let w = axis_weights(s, h);
            assert!((w.w[0][0] - basis_1d(s, Basis::Q0, 0)).abs() < 1e-15);
            assert!((w.w[0][1] - h * basis_1d(s, Basis::Q1, 0)).abs() < 1e-15);
            assert!((w.w[1][0] - basis_1d(s - 1.0, Basis::Q0, 0)).abs() < 1e-15);
            assert!((w.w[1][1] - h * basis_1d(s - 1.0, Basis::Q1, 0)).abs() < 1e-15);
            assert!((w.d[0][0] - basis_1d(s, Basis::Q0, 1) / h).abs() < 1e-14);
            assert!((w.d[0][1] - basis_1d(s, Basis::Q1, 1)).abs() < 1e-15);
            assert!((w.d[1][0] - basis_1d(s - 1.0, Basis::Q0, 1) / h).abs() < 1e-14);
            assert!((w.d[1][1] - basis_1d(s - 1.0, Basis::Q1, 1)).abs() < 1e-15);
        }
    }

    fn sines(grid: GridSpec) -> JetScalarField {
        JetScalarField::from_fn(grid, |x| {
            let (s, c): (Vec<f64>, Vec<f64>) = x.iter().map(|v| (v.sin(), v.cos())).unzip();
            std::array::from_fn(|slot| {
                let m = Mask::ALL[slot];
                (0..3)
                    .map(|a| if m.active(a) { c[a] } else { s[a] })
                    .product()
            })
        })
    }

    #[test]
    fn node_reproduction_for_every_mask() {
        let g = GridSpec::periodic_box([6, 7, 8]).unwrap();
        let f = sines(g);
        for idx in [0, 17, 100, g.len() - 1] {
            let x = g.node_at(idx);
            for m in Mask::ALL {
                assert_eq!(f.eval(x, m), f.coeffs()[idx][m.slot()]);
            }
        }
    }

    #[test]
    fn fast_paths_match_masked_eval() {
        let g = GridSpec::periodic_box([8, 9, 10]).unwrap();
        let f = sines(g);
        let x = [0.3, -1.7, 2.9];
        let (v, grad) = f.value_grad(x);
        assert!((v - f.eval(x, Mask::VALUE)).abs() < 1e-14);
        assert!((f.value(x) - v).abs() < 1e-14);
        for a in 0..3 {
            assert!((grad[a] - f.eval(x, Mask::GRADIENT[a])).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_reproduced_and_derivatives_vanish() {
        let g = GridSpec::cubic(8).unwrap();
        let f = JetScalarField::from_fn(g, |_| [2.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for x in [[0.1, 0.2, 0.3], [-5.0, 4.4, 1.0], [100.0, -33.3, 7.7]] {
            assert!((f.eval(x, Mask::VALUE) - 2.5).abs() < 1e-14);
            for m in &Mask::ALL[1..] {
                assert!(f.eval(x, *m).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn trilinear_reproduced() {
        // f = 1 + 2x - y + 0.5 z + 0.3 xy - 0.2 xz + 0.7 yz + 0.1 xyz (locally)
        let g = GridSpec::new([8, 8, 8], [8.0, 8.0, 8.0], [0.0; 3]).unwrap();
        let f = JetScalarField::from_fn(g, |p| {
            let [x, y, z] = p;
            [
                1.0 + 2.0 * x - y + 0.5 * z + 0.3 * x * y - 0.2 * x * z + 0.7 * y * z + 0.1 * x * y * z,
                2.0 + 0.3 * y - 0.2 * z + 0.1 * y * z,
                -1.0 + 0.3 * x + 0.7 * z + 0.1 * x * z,
                0.5 - 0.2 * x + 0.7 * y + 0.1 * x * y,
                0.3 + 0.1 * z,
                -0.2 + 0.1 * y,
                0.7 + 0.1 * x,
                0.1,
            ]
        });
        // interior of one cell, away from the periodic seam
        let p = [2.3, 4.6, 5.1];
        let [x, y, z] = p;
        let exact = 1.0 + 2.0 * x - y + 0.5 * z + 0.3 * x * y - 0.2 * x * z + 0.7 * y * z + 0.1 * x * y * z;
        assert!((f.eval(p, Mask::VALUE) - exact).abs() < 1e-12);
        assert!((f.eval(p, Mask::XY) - (0.3 + 0.1 * z)).abs() < 1e-12);
        assert!((f.eval(p, Mask::XYZ) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn linear_vector_field_jacobian() {
        let a = [[0.5, -1.0, 0.25], [2.0, 0.1, -0.3], [0.0, 0.7, 1.2]];
        let g = GridSpec::new([6, 6, 6], [12.0, 12.0, 12.0], [0.0; 3]).unwrap();
        let f = JetVectorField::from_fn(g, |x| {
            std::array::from_fn(|i| {
                let mut j = [0.0; 8];
                j[0] = a[i][0] * x[0] + a[i][1] * x[1] + a[i][2] * x[2];
                j[1] = a[i][0];
                j[2] = a[i][1];
                j[3] = a[i][2];
                j
            })
        });
        let (_, jac) = f.value_jacobian([3.3, 4.1, 7.9]);
        for i in 0..3 {
            for k in 0..3 {
                assert!((jac[i][k] - a[i][k]).abs() < 1e-12);
            }
        }
        let c = JetVectorField::from_fn(g, |_| {
            let mut out = [[0.0; 8]; 3];
            out[0][0] = 1.0;
            out[1][0] = 2.0;
            out[2][0] = 3.0;
            out
        });
        let v = c.eval([1.1, 2.2, 3.3], Mask::VALUE);
        for (got, want) in v.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        assert_eq!(JetVectorField::zeros(g).value([0.4, 5.0, -2.0]), [0.0; 3]);
    }

    #[test]
    fn projection_is_idempotent_and_checks_shape() {
        let g = GridSpec::cubic(6).unwrap();
        let f = sines(g);
        let again = project(&f.samples(), g).unwrap();
        assert_eq!(again, f);
        let zero = project(&std::array::from_fn(|_| vec![0.0; g.len()]), g).unwrap();
        assert_eq!(zero, JetScalarField::zeros(g));
        let mut bad = f.samples();
        bad[3].pop();
        assert!(matches!(project(&bad, g), Err(Error::Shape { .. })));
    }

    #[test]
    fn cos_midpoint_error_is_fourth_order() {
        // f = cos(y): analytic jets, error at cell centers
        let err = |n: usize| {
            let g = GridSpec::cubic(n).unwrap();
            let f = JetScalarField::from_fn(g, |x| {
                let mut j = [0.0; 8];
                j[0] = x[1].cos();
                j[Mask::Y.slot()] = -x[1].sin();
                j
            });
            let h = g.spacing();
            (0..n)
                .map(|j| {
                    let p = g.node(1, j, 2);
                    let q = [p[0] + 0.5 * h[0], p[1] + 0.5 * h[1], p[2] + 0.5 * h[2]];
                    (f.value(q) - q[1].cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        let h = 4.0 * PI / 16.0;
        // fourth derivative of cos is bounded by 1; Hermite constant 1/384
        assert!(e1 <= h.powi(4) / 384.0 * 1.01);
        assert!((e1 / e2).log2() > 3.8);
    }

    proptest::proptest! {
        #[test]
        fn tricubic_products_reproduced(
            a in proptest::array::uniform4(-1.0..1.0f64),
            b in proptest::array::uniform4(-1.0..1.0f64),
            c in proptest::array::uniform4(-1.0..1.0f64),
            p in proptest::array::uniform3(0.5..6.9f64),
        ) {
            // p(x) q(y) r(z) with cubic factors is reproduced inside any cell off the seam
            let cubic = |k: [f64; 4], t: f64| [
                k[0] + t * (k[1] + t * (k[2] + t * k[3])),
                k[1] + t * (2.0 * k[2] + 3.0 * t * k[3]),
            ];
            let g = GridSpec::new([8, 8, 8], [8.0, 8.0, 8.0], [0.0; 3]).unwrap();
            let f = JetScalarField::from_fn(g, |x| {
                let (fx, fy, fz) = (cubic(a, x[0]), cubic(b, x[1]), cubic(c, x[2]));
                let mut j = [0.0; 8];
                for m in Mask::ALL {
                    j[m.slot()] = fx[m.0[0] as usize] * fy[m.0[1] as usize] * fz[m.0[2] as usize];
                }
                j
            });
            let exact = cubic(a, p[0])[0] * cubic(b, p[1])[0] * cubic(c, p[2])[0];
            proptest::prop_assert!((f.value(p) - exact).abs() <= 1e-11 * (1.0 + exact.abs()));
        }
    }
}
