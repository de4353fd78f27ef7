//! Initial conditions: the analytic ABC and Taylor-Green fields and the
//! filtered, constructed vortex-tube configurations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::jet::JetVectorField;
use crate::spectral::SpectralVectorField;
use crate::Vec3;

/// `½(cos y + sin z, cos z + sin x, cos x + sin y)`, a steady Beltrami field.
pub fn abc_w0(x: Vec3) -> Vec3 {
    [
        0.5 * (x[1].cos() + x[2].sin()),
        0.5 * (x[2].cos() + x[0].sin()),
        0.5 * (x[0].cos() + x[1].sin()),
    ]
}

pub fn taylor_green_w0(x: Vec3) -> Vec3 {
    let (sx, cx) = (0.5 * x[0]).sin_cos();
    let (sy, cy) = (0.5 * x[1]).sin_cos();
    let (sz, cz) = x[2].sin_cos();
    [cx * sy * sz, sx * cy * sz, -sx * sy * cz]
}

/// The compact tube profile `exp(−r²/(1−r²) + r⁴(1 + r² + r⁴))` for
/// `r < 1`, exactly zero otherwise.
pub fn tube_profile(r: f64) -> f64 {
    if r >= 1.0 {
        return 0.0;
    }
    let r2 = r * r;
    let r4 = r2 * r2;
    (-r2 / (1.0 - r2) + r4 * (1.0 + r2 + r4)).exp()
}

/// Signed offset wrapped into one period `[−L/2, L/2)`.
fn wrap(d: f64, l: f64) -> f64 {
    (d + 0.5 * l).rem_euclid(l) - 0.5 * l
}

/// Parameters of the perturbed antiparallel tubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KerrParams {
    pub radius: f64,
    pub dy1: f64,
    pub dy2: f64,
    pub dx: f64,
    pub dz: f64,
    pub x0: f64,
    pub z0: f64,
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub amplitude: f64,
}

impl Default for KerrParams {
    fn default() -> Self {
        KerrParams {
            radius: 0.75,
            dy1: 0.5,
            dy2: 0.4,
            dx: -1.6,
            dz: 0.0,
            x0: 0.0,
            z0: 1.57,
            lx: 4.0 * PI,
            ly: 4.0 * PI,
            lz: 2.0 * PI,
            amplitude: 8.0,
        }
    }
}

impl KerrParams {
    /// The shear profile `s(y)` and its derivative.
    pub fn shear(&self, y: f64) -> (f64, f64) {
        let ly = self.ly;
        let (sa, ca) = (PI * y / ly).sin_cos();
        let a = y + ly * self.dy2 * sa;
        let da = 1.0 + PI * self.dy2 * ca;
        let (sb, cb) = (PI * a / ly).sin_cos();
        (a + ly * self.dy1 * sb, da * (1.0 + PI * self.dy1 * cb))
    }

    /// Unfiltered `(T⁻¹)^*φ` for the tube pair antisymmetric across z = 0.
    pub fn pulled_back_tubes(&self, x: Vec3) -> Vec3 {
        let (s, ds) = self.shear(x[1]);
        let (sxs, cxs) = (PI * s / self.lx).sin_cos();
        let (szs, czs) = (PI * s / self.lz).sin_cos();
        let xi = x[0] - self.dx * cxs;
        let zi = x[2] - self.dz * czs;
        let period = 4.0 * PI;
        let prof = |z0: f64| {
            let dx = wrap(xi - self.x0, period);
            let dz = wrap(zi - z0, period);
            tube_profile((dx * dx + dz * dz).sqrt() / self.radius)
        };
        // φ₊(x, y, z) − φ₊(x, y, −z) has y-component prof(z0) − prof(−z0)
        let phi = prof(self.z0) - prof(-self.z0);
        let gx = -self.dx * sxs * (PI / self.lx) * ds;
        let gz = -self.dz * szs * (PI / self.lz) * ds;
        [gx * phi, phi, gz * phi]
    }
}

/// Parameters of the perpendicular tubes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpendicularParams {
    pub radius: f64,
    pub x0: f64,
    pub z0: f64,
    /// Shear `x ↦ x − a sin(k y)`.
    pub shear_amp: f64,
    pub shear_freq: f64,
    /// Height offset of the reflected tube.
    pub offset: f64,
    pub amplitude: f64,
}

impl Default for PerpendicularParams {
    fn default() -> Self {
        PerpendicularParams {
            radius: 0.5,
            x0: 0.0,
            z0: -1.0,
            shear_amp: 0.5,
            shear_freq: 0.5,
            offset: 2.0,
            amplitude: 24.0,
        }
    }
}

impl PerpendicularParams {
    /// `(T⁻¹)^*φ₊`: a sheared tube along y.
    fn sheared_tube(&self, x: Vec3) -> Vec3 {
        let period = 4.0 * PI;
        let (s, c) = (self.shear_freq * x[1]).sin_cos();
        let dx = wrap(x[0] + self.shear_amp * s - self.x0, period);
        let dz = wrap(x[2] - self.z0, period);
        let f = tube_profile((dx * dx + dz * dz).sqrt() / self.radius);
        [-self.shear_amp * self.shear_freq * c * f, f, 0.0]
    }

    /// Unfiltered `(T⁻¹)^*φ₊ + (R⁻¹)^*(T⁻¹)^*φ₊` with `R: (x,y,z) ↦ (y,x,z+h)`.
    pub fn pulled_back_tubes(&self, x: Vec3) -> Vec3 {
        let a = self.sheared_tube(x);
        let b = self.sheared_tube([x[1], x[0], x[2] - self.offset]);
        [a[0] + b[1], a[1] + b[0], a[2] + b[2]]
    }
}

/// Filter, scale, project onto solenoidal fields and take spectral jets of
/// an unfiltered field sampled on an `n³` construction grid.
pub fn construct_filtered<F>(n: usize, amplitude: f64, phi: F) -> Result<JetVectorField>
where
    F: Fn(Vec3) -> Vec3 + Sync,
{
    let grid = GridSpec::periodic_box([n, n, n])?;
    let samples: Vec<Vec3> = (0..grid.len()).into_par_iter().map(|i| phi(grid.node_at(i))).collect();
    let phys: [Vec<f64>; 3] = std::array::from_fn(|c| samples.iter().map(|v| v[c]).collect());
    drop(samples);
    let hat = SpectralVectorField::forward(grid, &phys)?;
    drop(phys);
    Ok(hat.quartic_filter().scale(amplitude).leray_project().spectral_jets())
}

/// Kerr's perturbed antiparallel tubes, `w₀ = 8 K * (T⁻¹)^*φ`.
pub fn kerr_w0(n: usize, params: &KerrParams) -> Result<JetVectorField> {
    construct_filtered(n, params.amplitude, |x| params.pulled_back_tubes(x))
}

/// Perpendicular tubes, `w₀ = 24 K * φ`.
pub fn perpendicular_w0(n: usize, params: &PerpendicularParams) -> Result<JetVectorField> {
    construct_filtered(n, params.amplitude, |x| params.pulled_back_tubes(x))
}

/// Initial vorticity, analytic or interpolated from construction jets.
#[derive(Debug, Clone)]
pub enum InitialVorticity {
    Analytic(fn(Vec3) -> Vec3),
    Gridded(JetVectorField),
}

impl InitialVorticity {
    #[inline]
    pub fn eval(&self, x: Vec3) -> Vec3 {
        match self {
            InitialVorticity::Analytic(f) => f(x),
            InitialVorticity::Gridded(j) => j.value(x),
        }
    }

    /// `|w₀(x)|`, the passive tracer's initial condition.
    pub fn magnitude(&self, x: Vec3) -> f64 {
        let w = self.eval(x);
        (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Abc,
    TaylorGreen,
    Kerr,
    Perpendicular,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Abc => "abc",
            ScenarioKind::TaylorGreen => "taylor_green",
            ScenarioKind::Kerr => "kerr",
            ScenarioKind::Perpendicular => "perpendicular",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "abc" => Ok(ScenarioKind::Abc),
            "taylor_green" => Ok(ScenarioKind::TaylorGreen),
            "kerr" => Ok(ScenarioKind::Kerr),
            "perpendicular" => Ok(ScenarioKind::Perpendicular),
            other => Err(Error::Config(format!(
                "unknown scenario '{other}' (expected abc, taylor_green, kerr or perpendicular)"
            ))),
        }
    }
}

/// Default grids and step for a scenario, as used in the reference runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunDefaults {
    pub map_dims: [usize; 3],
    pub sample_dims: [usize; 3],
    pub dt: f64,
    pub t_final: f64,
    pub trunc_radius: f64,
    pub det_tol: f64,
    pub mollified: bool,
}

impl ScenarioKind {
    pub fn defaults(self) -> RunDefaults {
        match self {
            ScenarioKind::Abc | ScenarioKind::TaylorGreen => RunDefaults {
                map_dims: [32; 3],
                sample_dims: [32; 3],
                dt: 24.0 / 32.0,
                t_final: 2.0,
                trunc_radius: 32.0 / 3.0,
                det_tol: 1e-3,
                mollified: false,
            },
            ScenarioKind::Kerr => RunDefaults {
                map_dims: [64, 48, 32],
                sample_dims: [96, 72, 48],
                dt: 1.0 / 50.0,
                t_final: 17.0,
                trunc_radius: 32.0,
                det_tol: 1e-3,
                mollified: false,
            },
            ScenarioKind::Perpendicular => RunDefaults {
                map_dims: [48; 3],
                sample_dims: [48; 3],
                dt: 1.0 / 50.0,
                t_final: 9.0,
                trunc_radius: 32.0,
                det_tol: 1e-3,
                mollified: true,
            },
        }
    }
}

/// A ready-to-run initial condition on the `[−2π, 2π]³` torus.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub w0: InitialVorticity,
    /// Exact vorticity `w(x, t)` when known.
    pub exact: Option<fn(Vec3, f64) -> Vec3>,
    pub defaults: RunDefaults,
}

fn abc_exact(x: Vec3, _t: f64) -> Vec3 {
    abc_w0(x)
}

impl Scenario {
    /// Build a scenario; constructed ones are sampled on an `n³` grid.
    pub fn build(kind: ScenarioKind, construction_n: usize, kerr: &KerrParams, perp: &PerpendicularParams) -> Result<Self> {
        let (w0, exact): (_, Option<fn(Vec3, f64) -> Vec3>) = match kind {
            ScenarioKind::Abc => (InitialVorticity::Analytic(abc_w0), Some(abc_exact)),
            ScenarioKind::TaylorGreen => (InitialVorticity::Analytic(taylor_green_w0), None),
            ScenarioKind::Kerr => (InitialVorticity::Gridded(kerr_w0(construction_n, kerr)?), None),
            ScenarioKind::Perpendicular => (InitialVorticity::Gridded(perpendicular_w0(construction_n, perp)?), None),
        };
        Ok(Scenario {
            kind,
            w0,
            exact,
            defaults: kind.defaults(),
        })
    }

    /// Reference tube parameters and the 128³ construction grid.
    pub fn standard(kind: ScenarioKind) -> Result<Self> {
        Self::build(kind, 128, &KerrParams::default(), &PerpendicularParams::default())
    }

    pub fn domain(dims: [usize; 3]) -> Result<GridSpec> {
        GridSpec::periodic_box(dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralVectorField;
    use proptest::prelude::*;

    #[test]
    fn abc_origin() {
        assert_eq!(abc_w0([0.0; 3]), [0.5, 0.5, 0.5]);
    }

    #[test]
    fn taylor_green_points() {
        let w = taylor_green_w0([PI, PI, PI / 2.0]);
        assert!(w.iter().all(|v| v.abs() < 1e-15));
        let w = taylor_green_w0([PI, PI, 0.0]);
        assert!(w[0].abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] + 1.0).abs() < 1e-15);
        let (x, y) = (0.7, -1.9);
        let w = taylor_green_w0([x, y, 0.0]);
        assert!((w[2] + (0.5 * x).sin() * (0.5 * y).sin()).abs() < 1e-15);
    }

    fn divergence<F: Fn(Vec3) -> Vec3>(f: F, x: Vec3) -> f64 {
        let h = 1e-5;
        (0..3)
            .map(|a| {
                let mut p = x;
                let mut m = x;
                p[a] += h;
                m[a] -= h;
                (f(p)[a] - f(m)[a]) / (2.0 * h)
            })
            .sum()
    }

    proptest! {
        #[test]
        fn analytic_fields_are_solenoidal(x in -6.0..6.0f64, y in -6.0..6.0f64, z in -6.0..6.0f64) {
            prop_assert!(divergence(abc_w0, [x, y, z]).abs() < 1e-9);
            prop_assert!(divergence(taylor_green_w0, [x, y, z]).abs() < 1e-9);
        }

        #[test]
        fn kerr_tubes_antisymmetric(x in -6.0..6.0f64, y in -6.0..6.0f64, z in -6.0..6.0f64) {
            let p = KerrParams::default();
            let a = p.pulled_back_tubes([x, y, z]);
            let b = p.pulled_back_tubes([x, y, -z]);
            for c in 0..3 {
                prop_assert!((a[c] + b[c]).abs() < 1e-14);
            }
        }

        #[test]
        fn profile_compactly_supported(r in 1.0..10.0f64) {
            prop_assert_eq!(tube_profile(r), 0.0);
        }
    }

    #[test]
    fn profile_values() {
        assert_eq!(tube_profile(0.0), 1.0);
        assert!(tube_profile(0.999) < 1e-100);
        assert!(tube_profile(0.5) > 0.0);
    }

    #[test]
    fn shear_derivative() {
        let p = KerrParams::default();
        for y in [-5.0, -1.0, 0.3, 2.0, 6.0] {
            let h = 1e-6;
            let fd = (p.shear(y + h).0 - p.shear(y - h).0) / (2.0 * h);
            assert!((fd - p.shear(y).1).abs() < 1e-7);
        }
    }

    #[test]
    fn constructed_fields_are_solenoidal_and_filtered() {
        for jets in [
            kerr_w0(32, &KerrParams::default()).unwrap(),
            perpendicular_w0(32, &PerpendicularParams::default()).unwrap(),
        ] {
            let g = *jets.grid();
            let nodes: [Vec<f64>; 3] = std::array::from_fn(|c| jets.comp(c).coeffs().iter().map(|j| j[0]).collect());
            let hat = SpectralVectorField::forward(g, &nodes).unwrap();
            let div = hat.divergence();
            let scale = (0..3).flat_map(|c| hat.comp(c).iter()).map(|v| v.norm()).fold(0.0, f64::max);
            assert!(div.iter().all(|d| d.norm() <= 1e-10 * scale));
            // filtered enstrophy below the unfiltered (scaled) one
            let z: f64 = nodes.iter().flatten().map(|v| v * v).sum();
            assert!(z > 0.0);
        }
    }

    #[test]
    fn filter_never_increases_enstrophy() {
        let p = KerrParams::default();
        let g = GridSpec::periodic_box([32; 3]).unwrap();
        let samples: Vec<Vec3> = g.nodes().map(|x| p.pulled_back_tubes(x)).collect();
        let phys: [Vec<f64>; 3] = std::array::from_fn(|c| samples.iter().map(|v| v[c]).collect());
        let raw = SpectralVectorField::forward(g, &phys).unwrap();
        let filt = raw.quartic_filter();
        let e = |f: &SpectralVectorField| f.isotropic_spectrum().iter().sum::<f64>();
        assert!(e(&filt) <= e(&raw));
    }

    #[test]
    fn scenario_keys() {
        for k in [ScenarioKind::Abc, ScenarioKind::TaylorGreen, ScenarioKind::Kerr, ScenarioKind::Perpendicular] {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
        assert!(matches!("vortex".parse::<ScenarioKind>(), Err(Error::Config(_))));
        let s = Scenario::standard(ScenarioKind::Abc).unwrap();
        assert_eq!(s.w0.eval([0.0; 3]), [0.5; 3]);
        assert_eq!((s.exact.unwrap())([0.1, 0.2, 0.3], 5.0), abc_w0([0.1, 0.2, 0.3]));
    }
}
