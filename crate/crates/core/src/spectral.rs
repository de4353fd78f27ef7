//! FFT vector calculus on the periodic sampling grid.
//!
//! Conventions: the forward transform divides by the point count so that
//! coefficients are mode amplitudes; physical wavenumbers are
//! `kᵐ = 2π ξᵐ / Lᵐ` with integer `ξ`. Derivatives zero the Nyquist mode
//! (its `ik` is not real-representable), while filters, truncation and
//! shell binning use the index magnitude `|ξ| = N/2` there.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::jet::{JetScalarField, JetVectorField, Mask};

/// Planned 3D complex transform built from 1D line transforms.
pub struct Fft3 {
    dims: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            dims,
            fwd: dims.map(|n| planner.plan_fft_forward(n)),
            inv: dims.map(|n| planner.plan_fft_inverse(n)),
        }
    }

    /// Shared plan for `dims`.
    pub fn cached(dims: [usize; 3]) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<HashMap<[usize; 3], Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(dims).or_insert_with(|| Arc::new(Fft3::new(dims))).clone()
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.dims;
        assert_eq!(data.len(), nx * ny * nz);
        // x: contiguous lines
        data.par_chunks_mut(nx * ny).for_each(|plane| {
            let mut scratch = vec![Complex64::default(); plans[0].get_inplace_scratch_len()];
            plans[0].process_with_scratch(plane, &mut scratch);
        });
        // y: per z-plane, gather columns
        data.par_chunks_mut(nx * ny).for_each(|plane| {
            let mut buf = vec![Complex64::default(); nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    buf[i * ny + j] = plane[j * nx + i];
                }
            }
            let mut scratch = vec![Complex64::default(); plans[1].get_inplace_scratch_len()];
            plans[1].process_with_scratch(&mut buf, &mut scratch);
            for j in 0..ny {
                for i in 0..nx {
                    plane[j * nx + i] = buf[i * ny + j];
                }
            }
        });
        // z: one y-slab at a time
        let mut buf = vec![Complex64::default(); nx * nz];
        for j in 0..ny {
            for k in 0..nz {
                let row = &data[(k * ny + j) * nx..(k * ny + j + 1) * nx];
                for i in 0..nx {
                    buf[i * nz + k] = row[i];
                }
            }
            buf.par_chunks_mut(nz).for_each_init(
                || vec![Complex64::default(); plans[2].get_inplace_scratch_len()],
                |scratch, line| plans[2].process_with_scratch(line, scratch),
            );
            for k in 0..nz {
                let row = &mut data[(k * ny + j) * nx..(k * ny + j + 1) * nx];
                for i in 0..nx {
                    row[i] = buf[i * nz + k];
                }
            }
        }
    }

    /// In-place forward transform, normalized by the point count.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.fwd);
        let s = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    /// In-place unnormalized inverse transform.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inv);
    }

    pub fn forward_real(&self, phys: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = phys.par_iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.inverse(&mut data);
        data.into_par_iter().map(|v| v.re).collect()
    }
}

/// Signed integer frequency of index `i` on an axis of `n` points; the
/// Nyquist index maps to `+n/2`.
#[inline]
pub fn freq_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Per-axis tables of integer frequencies and derivative wavenumbers.
#[derive(Debug, Clone)]
pub struct Wavenumbers {
    pub xi: [Vec<i64>; 3],
    /// `2πξ/L`, zero at the Nyquist index.
    pub k: [Vec<f64>; 3],
}

impl Wavenumbers {
    pub fn new(grid: &GridSpec) -> Self {
        let xi = std::array::from_fn(|m| {
            let n = grid.dims[m];
            (0..n).map(|i| freq_index(i, n)).collect::<Vec<_>>()
        });
        let k = std::array::from_fn(|m| {
            let n = grid.dims[m];
            (0..n)
                .map(|i| {
                    if n % 2 == 0 && i == n / 2 {
                        0.0
                    } else {
                        2.0 * std::f64::consts::PI * freq_index(i, n) as f64 / grid.lengths[m]
                    }
                })
                .collect::<Vec<_>>()
        });
        Wavenumbers { xi, k }
    }

    #[inline]
    pub fn xi_at(&self, ijk: [usize; 3]) -> [i64; 3] {
        [self.xi[0][ijk[0]], self.xi[1][ijk[1]], self.xi[2][ijk[2]]]
    }

    #[inline]
    pub fn k_at(&self, ijk: [usize; 3]) -> [f64; 3] {
        [self.k[0][ijk[0]], self.k[1][ijk[1]], self.k[2][ijk[2]]]
    }
}

/// Fourier coefficients of a real 3-vector field on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    grid: GridSpec,
    comps: [Vec<Complex64>; 3],
}

fn check_len(grid: &GridSpec, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::Shape {
            expected: grid.len(),
            got: n,
        });
    }
    Ok(())
}

impl SpectralVectorField {
    pub fn from_coeffs(grid: GridSpec, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        for c in &comps {
            check_len(&grid, c.len())?;
        }
        Ok(SpectralVectorField { grid, comps })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        SpectralVectorField {
            grid,
            comps: std::array::from_fn(|_| vec![Complex64::default(); grid.len()]),
        }
    }

    /// Forward transform of node samples.
    pub fn forward(grid: GridSpec, phys: &[Vec<f64>; 3]) -> Result<Self> {
        for c in phys {
            check_len(&grid, c.len())?;
        }
        let fft = Fft3::cached(grid.dims);
        Ok(SpectralVectorField {
            grid,
            comps: std::array::from_fn(|c| fft.forward_real(&phys[c])),
        })
    }

    /// Node samples (real part of the inverse transform).
    pub fn inverse(&self) -> [Vec<f64>; 3] {
        let fft = Fft3::cached(self.grid.dims);
        std::array::from_fn(|c| fft.inverse_real(&self.comps[c]))
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.comps
    }

    pub fn into_comps(self) -> [Vec<Complex64>; 3] {
        self.comps
    }

    /// Apply `f(ξ, k, [f̂₁, f̂₂, f̂₃]) -> new coefficients` mode by mode.
    fn map_modes<F>(&self, f: F) -> Self
    where
        F: Fn([i64; 3], [f64; 3], [Complex64; 3]) -> [Complex64; 3] + Sync,
    {
        let wn = Wavenumbers::new(&self.grid);
        let g = self.grid;
        let out: Vec<[Complex64; 3]> = (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let ijk = g.unflatten(idx);
                f(
                    wn.xi_at(ijk),
                    wn.k_at(ijk),
                    [self.comps[0][idx], self.comps[1][idx], self.comps[2][idx]],
                )
            })
            .collect();
        SpectralVectorField {
            grid: g,
            comps: std::array::from_fn(|c| out.iter().map(|v| v[c]).collect()),
        }
    }

    /// Velocity from vorticity: `û = (ik × ŵ)/|k|²`, zero mean.
    pub fn biot_savart(&self) -> Self {
        self.map_modes(|_, k, w| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                return [Complex64::default(); 3];
            }
            let c = cross_ik(k, w);
            c.map(|v| v / k2)
        })
    }

    /// `ik × f̂`.
    pub fn curl(&self) -> Self {
        self.map_modes(|_, k, f| cross_ik(k, f))
    }

    /// `ik · f̂` as scalar coefficients.
    pub fn divergence(&self) -> Vec<Complex64> {
        let wn = Wavenumbers::new(&self.grid);
        let g = self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|idx| {
                let k = wn.k_at(g.unflatten(idx));
                let i = Complex64::i();
                (0..3).map(|m| i * k[m] * self.comps[m][idx]).sum()
            })
            .collect()
    }

    /// Remove the longitudinal part: `f̂ − k (k·f̂)/|k|²`.
    pub fn leray_project(&self) -> Self {
        self.map_modes(|_, k, f| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                return f;
            }
            let kf = (f[0] * k[0] + f[1] * k[1] + f[2] * k[2]) / k2;
            [f[0] - kf * k[0], f[1] - kf * k[1], f[2] - kf * k[2]]
        })
    }

    /// Zero every mode with `|ξ| > radius`.
    pub fn truncate(&self, radius: f64) -> Self {
        let r2 = radius * radius;
        self.map_modes(|xi, _, f| {
            let n2 = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) as f64;
            if n2 > r2 {
                [Complex64::default(); 3]
            } else {
                f
            }
        })
    }

    /// Multiply each mode by `exp(−0.05 (ξ₁⁴ + ξ₂⁴ + ξ₃⁴))`.
    pub fn quartic_filter(&self) -> Self {
        self.map_modes(|xi, _, f| {
            let s = quartic_filter_factor(xi);
            f.map(|v| v * s)
        })
    }

    pub fn scale(&self, s: f64) -> Self {
        SpectralVectorField {
            grid: self.grid,
            comps: std::array::from_fn(|c| self.comps[c].par_iter().map(|v| v * s).collect()),
        }
    }

    /// Node samples of `∂ᵃ` of one component for each mask.
    pub fn component_derivatives(&self, c: usize, masks: &[Mask]) -> Vec<Vec<f64>> {
        derivative_samples(&self.grid, &self.comps[c], masks)
    }

    /// Hermite jets sampled from the Fourier series, all eight partials.
    pub fn spectral_jets(&self) -> JetVectorField {
        let comps = std::array::from_fn(|c| {
            let samples = self.component_derivatives(c, &Mask::ALL);
            let coeffs = (0..self.grid.len())
                .into_par_iter()
                .map(|idx| std::array::from_fn(|s| samples[s][idx]))
                .collect();
            JetScalarField::from_coeffs(self.grid, coeffs).expect("sizes match grid")
        });
        JetVectorField::new(comps).expect("components share grid")
    }

    /// Shell sums `S(k) = ½ Σ_{round(|ξ|) = k} Σ_c |f̂_c(ξ)|²`.
    pub fn isotropic_spectrum(&self) -> Vec<f64> {
        isotropic_spectrum_of(&self.grid, &self.comps.iter().map(|c| c.as_slice()).collect::<Vec<_>>())
    }
}

#[inline]
pub fn quartic_filter_factor(xi: [i64; 3]) -> f64 {
    let q: i64 = xi.iter().map(|v| v.pow(4)).sum();
    (-0.05 * q as f64).exp()
}

#[inline]
fn cross_ik(k: [f64; 3], f: [Complex64; 3]) -> [Complex64; 3] {
    let i = Complex64::i();
    [
        i * (k[1] * f[2] - k[2] * f[1]),
        i * (k[2] * f[0] - k[0] * f[2]),
        i * (k[0] * f[1] - k[1] * f[0]),
    ]
}

/// Inverse transforms of `(ik)ᵃ f̂` for each mask.
pub fn derivative_samples(grid: &GridSpec, coeffs: &[Complex64], masks: &[Mask]) -> Vec<Vec<f64>> {
    let wn = Wavenumbers::new(grid);
    let fft = Fft3::cached(grid.dims);
    masks
        .iter()
        .map(|&m| {
            let mut data: Vec<Complex64> = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let k = wn.k_at(grid.unflatten(idx));
                    let mut v = coeffs[idx];
                    for (a, &km) in k.iter().enumerate() {
                        if m.active(a) {
                            v *= Complex64::new(0.0, km);
                        }
                    }
                    v
                })
                .collect();
            fft.inverse(&mut data);
            data.into_par_iter().map(|v| v.re).collect()
        })
        .collect()
}

/// Shell spectrum of any number of coefficient arrays on `grid`.
pub fn isotropic_spectrum_of(grid: &GridSpec, comps: &[&[Complex64]]) -> Vec<f64> {
    let wn = Wavenumbers::new(grid);
    let shell = |idx: usize| {
        let xi = wn.xi_at(grid.unflatten(idx));
        let r = ((xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]) as f64).sqrt();
        (r + 0.5).floor() as usize
    };
    let kmax = {
        let h = grid.dims.map(|n| (n / 2) as f64);
        ((h[0] * h[0] + h[1] * h[1] + h[2] * h[2]).sqrt() + 0.5).floor() as usize
    };
    // fixed chunking keeps the summation order independent of thread count
    const CHUNK: usize = 1 << 14;
    let n = grid.len();
    let partials: Vec<Vec<f64>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|ci| {
            let mut s = vec![0.0; kmax + 1];
            for idx in ci * CHUNK..((ci + 1) * CHUNK).min(n) {
                let e: f64 = comps.iter().map(|c| c[idx].norm_sqr()).sum();
                s[shell(idx)] += 0.5 * e;
            }
            s
        })
        .collect();
    let mut out = vec![0.0; kmax + 1];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    out
}

/// Two-column text, `k  S(k)` per line.
pub fn write_spectrum(path: &Path, spectrum: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for (k, s) in spectrum.iter().enumerate() {
        writeln!(f, "{k}  {s:.16e}").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

pub fn read_spectrum(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Format {
                    path: path.into(),
                    msg: format!("bad spectrum line: {l}"),
                })
        })
        .collect()
}
