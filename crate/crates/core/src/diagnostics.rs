//! Conserved quantities, refined maxima, passive tracers and plane slices.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flowmap::{pullback_scalar, DisplacementMap, SubmapStack};
use crate::fluid::{sample_vorticity, SamplingConfig};
use crate::grid::GridSpec;
use crate::io;
use crate::spectral::{isotropic_spectrum_of, Fft3, Wavenumbers};
use crate::Vec3;

/// Summation chunk; fixed so reductions do not depend on the thread count.
const CHUNK: usize = 1 << 14;

/// `Σ f(i)` over `0..n` in fixed chunks.
pub fn chunked_sum<F: Fn(usize) -> f64 + Sync + Send>(n: usize, f: F) -> f64 {
    let partials: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    partials.iter().sum()
}

fn par_max<F: Fn(usize) -> f64 + Sync + Send>(n: usize, f: F) -> f64 {
    (0..n).into_par_iter().map(f).reduce(|| 0.0, f64::max)
}

/// Grid integrals of the vorticity and its Biot-Savart velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Conserved {
    /// `‖w‖²_{L²}`.
    pub enstrophy: f64,
    /// `‖u‖²_{L²}`.
    pub energy: f64,
    /// `(u, w)_{L²}`.
    pub helicity: f64,
    pub max_w: f64,
    pub max_u: f64,
}

/// Isotropic shell spectra of `w` and `u`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Spectra {
    pub enstrophy: Vec<f64>,
    pub energy: Vec<f64>,
}

/// Integrals of a node-sampled vorticity field, with equal-weight
/// quadrature and the velocity from an untruncated Biot-Savart solve.
///
/// Works one component at a time to bound memory on large grids.
pub fn conserved_from_samples(grid: &GridSpec, w: [Vec<f64>; 3]) -> Result<(Conserved, Spectra)> {
    let n = grid.len();
    for c in &w {
        if c.len() != n {
            return Err(Error::Shape {
                expected: n,
                got: c.len(),
            });
        }
    }
    let dv = grid.cell_volume();
    let vol = dv * n as f64;
    let enstrophy = dv * chunked_sum(n, |i| w[0][i] * w[0][i] + w[1][i] * w[1][i] + w[2][i] * w[2][i]);
    let max_w = par_max(n, |i| w[0][i] * w[0][i] + w[1][i] * w[1][i] + w[2][i] * w[2][i]).sqrt();

    let fft = Fft3::cached(grid.dims);
    let mut w_hat: Vec<Vec<Complex64>> = Vec::with_capacity(3);
    for comp in w {
        w_hat.push(fft.forward_real(&comp));
    }
    let enstrophy_spectrum = isotropic_spectrum_of(grid, &w_hat.iter().map(|c| c.as_slice()).collect::<Vec<_>>());
    let mut energy_spectrum: Vec<f64> = Vec::new();

    let wn = Wavenumbers::new(grid);
    let mut u_sq = vec![0.0; n];
    let (mut energy, mut helicity) = (0.0, 0.0);
    for c in 0..3 {
        let (a, b) = ((c + 1) % 3, (c + 2) % 3);
        // û_c = i(k_a ŵ_b − k_b ŵ_a)/|k|²
        let mut u_hat: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|idx| {
                let k = wn.k_at(grid.unflatten(idx));
                let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
                if k2 == 0.0 {
                    return Complex64::default();
                }
                Complex64::i() * (k[a] * w_hat[b][idx] - k[b] * w_hat[a][idx]) / k2
            })
            .collect();
        energy += vol * chunked_sum(n, |i| u_hat[i].norm_sqr());
        helicity += vol * chunked_sum(n, |i| (u_hat[i] * w_hat[c][i].conj()).re);
        let shells = isotropic_spectrum_of(grid, &[&u_hat]);
        if energy_spectrum.is_empty() {
            energy_spectrum = shells;
        } else {
            energy_spectrum.iter_mut().zip(shells).for_each(|(a, b)| *a += b);
        }
        fft.inverse(&mut u_hat);
        u_sq.par_iter_mut().zip(u_hat.par_iter()).for_each(|(s, v)| *s += v.re * v.re);
    }
    let max_u = par_max(n, |i| u_sq[i]).sqrt();
    Ok((
        Conserved {
            enstrophy,
            energy,
            helicity,
            max_w,
            max_u,
        },
        Spectra {
            enstrophy: enstrophy_spectrum,
            energy: energy_spectrum,
        },
    ))
}

/// Sample `w` by pullback on `grid` and integrate it.
pub fn conserved_quantities<F>(
    stack: &SubmapStack,
    tail: &DisplacementMap,
    w0: &F,
    grid: GridSpec,
) -> Result<(Conserved, Spectra)>
where
    F: Fn(Vec3) -> Vec3 + Sync + ?Sized,
{
    let w = sample_vorticity(stack, tail, w0, grid, &SamplingConfig::default())?;
    conserved_from_samples(&grid, w)
}

/// One line of `diagnostics.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub enstrophy: f64,
    /// `‖u‖²/‖u₀‖² − 1`.
    pub energy_rel_err: f64,
    /// `H − H₀`.
    pub helicity_drift: f64,
    pub max_w: f64,
    pub max_u: f64,
    pub n_maps: usize,
    pub wall_s: f64,
}

impl DiagnosticsRow {
    pub const CSV_HEADER: &'static str = "t,enstrophy,energy_rel_err,helicity_drift,max_w,max_u,n_maps,wall_s";

    pub fn new(t: f64, q: &Conserved, q0: &Conserved, n_maps: usize, wall_s: f64) -> Self {
        let energy_rel_err = if q0.energy == 0.0 { 0.0 } else { q.energy / q0.energy - 1.0 };
        DiagnosticsRow {
            t,
            enstrophy: q.enstrophy,
            energy_rel_err,
            helicity_drift: q.helicity - q0.helicity,
            max_w: q.max_w,
            max_u: q.max_u,
            n_maps,
            wall_s,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{:.3}",
            self.t, self.enstrophy, self.energy_rel_err, self.helicity_drift, self.max_w, self.max_u, self.n_maps, self.wall_s
        )
    }

    pub fn parse_csv(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad diagnostics row: {line}"),
        };
        if f.len() != 8 {
            return Err(bad());
        }
        let r = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        Ok(DiagnosticsRow {
            t: r(0)?,
            enstrophy: r(1)?,
            energy_rel_err: r(2)?,
            helicity_drift: r(3)?,
            max_w: r(4)?,
            max_u: r(5)?,
            n_maps: f[6].parse().map_err(|_| bad())?,
            wall_s: r(7)?,
        })
    }
}

/// Read every row of a diagnostics CSV.
pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(DiagnosticsRow::parse_csv)
        .collect()
}

/// Locate the maximum of `f` on the nodes of `grid`, then repeatedly
/// resample an `n³` box three coarse cells wide around the current best.
///
/// The returned value never decreases across iterations.
pub fn refine_max<F>(f: &F, grid: &GridSpec, iterations: usize) -> Result<(Vec3, f64)>
where
    F: Fn(Vec3) -> f64 + Sync + ?Sized,
{
    if iterations == 0 {
        return Err(Error::Config("refine_max needs at least one iteration".into()));
    }
    let argmax = |pts: &(dyn Fn(usize) -> Vec3 + Sync), len: usize| {
        (0..len)
            .into_par_iter()
            .map(|i| {
                let x = pts(i);
                (f(x), i, x)
            })
            // ties broken by the lowest index for determinism
            .reduce(
                || (f64::NEG_INFINITY, usize::MAX, [0.0; 3]),
                |a, b| if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a },
            )
    };
    let (mut best, _, mut at) = argmax(&|i| grid.node_at(i), grid.len());
    let mut h = grid.spacing();
    let dims = grid.dims;
    for _ in 0..iterations {
        let center = at;
        let width = h.map(|v| 3.0 * v);
        let step: Vec3 = std::array::from_fn(|a| width[a] / (dims[a].max(2) - 1) as f64);
        let pts = |i: usize| {
            let q = [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])];
            std::array::from_fn(|a| center[a] - 0.5 * width[a] + q[a] as f64 * step[a])
        };
        let (v, _, x) = argmax(&pts, grid.len());
        if v > best {
            best = v;
            at = x;
        }
        h = step;
    }
    Ok((at, best))
}

/// The passive scalar `φ(x) = φ₀(X_B(x))`.
pub fn tracer_field<'a, F>(stack: &'a SubmapStack, tail: &'a DisplacementMap, phi0: &'a F) -> impl Fn(Vec3) -> f64 + Sync + 'a
where
    F: Fn(Vec3) -> f64 + Sync + ?Sized,
{
    move |x| pullback_scalar(stack, tail, phi0, x)
}

/// What a slice samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceQuantity {
    VorticityMagnitude,
    Tracer,
    /// One vorticity component.
    Component(usize),
}

impl std::str::FromStr for SliceQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "w" | "|w|" => Ok(SliceQuantity::VorticityMagnitude),
            "tracer" => Ok(SliceQuantity::Tracer),
            "wx" => Ok(SliceQuantity::Component(0)),
            "wy" => Ok(SliceQuantity::Component(1)),
            "wz" => Ok(SliceQuantity::Component(2)),
            other => Err(Error::Config(format!("unknown slice quantity '{other}' (w, tracer, wx, wy, wz)"))),
        }
    }
}

impl std::fmt::Display for SliceQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SliceQuantity::VorticityMagnitude => f.write_str("w"),
            SliceQuantity::Tracer => f.write_str("tracer"),
            SliceQuantity::Component(c) => write!(f, "w{}", ["x", "y", "z"][*c]),
        }
    }
}

/// A rectangular window on a coordinate plane.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRequest {
    /// Normal axis of the plane and its coordinate.
    pub axis: usize,
    pub offset: f64,
    /// Window center and half-widths in the two in-plane axes, in
    /// increasing axis order.
    pub center: [f64; 2],
    pub half_widths: [f64; 2],
    pub resolution: [usize; 2],
    pub quantity: SliceQuantity,
}

impl SliceRequest {
    /// In-plane axes in increasing order.
    pub fn plane_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    pub fn validate(&self, domain: &GridSpec) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.axis > 2 {
            return bad(format!("slice axis must be 0, 1 or 2, got {}", self.axis));
        }
        if self.resolution.contains(&0) {
            return bad("slice resolution must be ≥ 1 per axis".into());
        }
        if let SliceQuantity::Component(c) = self.quantity {
            if c > 2 {
                return bad(format!("component {c} out of range"));
            }
        }
        for (a, &h) in self.plane_axes().iter().zip(&self.half_widths) {
            if !(h > 0.0) || 2.0 * h > domain.lengths[*a] * (1.0 + 1e-12) {
                return bad(format!("slice half-width {h} must lie in (0, L/2] on axis {a}"));
            }
        }
        Ok(())
    }

    /// Physical point of pixel `(i, j)`; pixels span the closed window.
    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        let [a, b] = self.plane_axes();
        let coord = |m: usize, q: usize| {
            let r = self.resolution[m];
            if r == 1 {
                self.center[m]
            } else {
                self.center[m] - self.half_widths[m] + 2.0 * self.half_widths[m] * q as f64 / (r - 1) as f64
            }
        };
        let mut x = [0.0; 3];
        x[self.axis] = self.offset;
        x[a] = coord(0, i);
        x[b] = coord(1, j);
        x
    }
}

/// Sampled slice, first in-plane axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub request: SliceRequest,
    pub data: Vec<f64>,
    pub min: f64,
    pub max: f64,
}

/// Evaluate a scalar on the request window.
pub fn slice_sample<F>(request: &SliceRequest, f: &F) -> Result<Slice>
where
    F: Fn(Vec3) -> f64 + Sync + ?Sized,
{
    let [ri, rj] = request.resolution;
    let data: Vec<f64> = (0..ri * rj).into_par_iter().map(|p| f(request.point(p % ri, p / ri))).collect();
    if let Some(p) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "slice sample",
            x: request.point(p % ri, p / ri),
        });
    }
    let min = data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(Slice {
        request: request.clone(),
        data,
        min,
        max,
    })
}

impl Slice {
    /// Write `<stem>.f64` (little-endian) and a `<stem>.txt` sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        io::save_f64s(&dir.join(format!("{stem}.f64")), &self.data)?;
        let r = &self.request;
        let mut s = String::new();
        writeln!(s, "quantity {}", r.quantity).unwrap();
        writeln!(s, "axis {}", r.axis).unwrap();
        writeln!(s, "offset {:.17e}", r.offset).unwrap();
        writeln!(s, "dims {} {}", r.resolution[0], r.resolution[1]).unwrap();
        writeln!(s, "center {:.17e} {:.17e}", r.center[0], r.center[1]).unwrap();
        writeln!(s, "half_widths {:.17e} {:.17e}", r.half_widths[0], r.half_widths[1]).unwrap();
        writeln!(s, "range {:.17e} {:.17e}", self.min, self.max).unwrap();
        let path = dir.join(format!("{stem}.txt"));
        std::fs::write(&path, s).map_err(|e| Error::io(&path, e))
    }
}
