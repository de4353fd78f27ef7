//! Closing the loop: vorticity sampled by pullback, velocity and its time
//! derivative as jet fields, and the time-space Hermite velocity.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flowmap::{pullback_vorticity, DisplacementMap, SubmapStack};
use crate::grid::GridSpec;
use crate::jet::{JetScalarField, JetVectorField, Mask};
use crate::spectral::{derivative_samples, SpectralVectorField};
use crate::Vec3;

/// Velocity jets and their time derivative at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFrame {
    pub t: f64,
    pub u_jets: JetVectorField,
    pub dudt_jets: JetVectorField,
}

/// Hermite-in-time velocity over two consecutive frames, continued as a
/// polynomial past the newer one so it covers the next step.
///
/// With only one frame (the first step) it degenerates to the Taylor
/// extension `u⁰ + (t − t₀) ∂ₜu⁰`.
#[derive(Debug, Clone)]
pub struct VelocityInterpolant {
    prev: Option<VelocityFrame>,
    curr: VelocityFrame,
    dt: f64,
}

impl VelocityInterpolant {
    /// Single-frame interpolant valid on `[t₀, t₀ + dt]`.
    pub fn bootstrap(frame: VelocityFrame, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config(format!("dt must be > 0, got {dt}")));
        }
        Ok(VelocityInterpolant {
            prev: None,
            curr: frame,
            dt,
        })
    }

    pub fn new(prev: VelocityFrame, curr: VelocityFrame) -> Result<Self> {
        let dt = curr.t - prev.t;
        if !(dt > 0.0) {
            return Err(Error::Config(format!(
                "frames must be increasing in time, got {} then {}",
                prev.t, curr.t
            )));
        }
        if prev.u_jets.grid() != curr.u_jets.grid() {
            return Err(Error::Config("frames must share one grid".into()));
        }
        Ok(VelocityInterpolant {
            prev: Some(prev),
            curr,
            dt,
        })
    }

    /// Shift in a newer frame; the current one becomes the previous.
    pub fn advance(self, frame: VelocityFrame) -> Result<Self> {
        VelocityInterpolant::new(self.curr, frame)
    }

    pub fn prev(&self) -> Option<&VelocityFrame> {
        self.prev.as_ref()
    }

    pub fn curr(&self) -> &VelocityFrame {
        &self.curr
    }

    pub fn into_frames(self) -> (Option<VelocityFrame>, VelocityFrame) {
        (self.prev, self.curr)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Closed validity interval: `[t_{n−1}, t_n + Δt]`, or `[t₀, t₀ + Δt]`
    /// for a single frame.
    pub fn interval(&self) -> (f64, f64) {
        match &self.prev {
            Some(p) => (p.t, self.curr.t + self.dt),
            None => (self.curr.t, self.curr.t + self.dt),
        }
    }

    /// Coefficients of the fields combined at time `t`.
    pub fn weights(&self, t: f64) -> Result<Vec<(f64, &JetVectorField)>> {
        let (lo, hi) = self.interval();
        let slack = 1e-9 * self.dt;
        if !(t >= lo - slack && t <= hi + slack) {
            return Err(Error::TimeOutOfRange { t, lo, hi });
        }
        let c = &self.curr;
        Ok(match &self.prev {
            None => vec![(1.0, &c.u_jets), (t - c.t, &c.dudt_jets)],
            Some(p) => {
                let dt = self.dt;
                let s = (t - p.t) / dt;
                let r = (t - c.t) / dt;
                let (ms, pr) = (1.0 - s, 1.0 + r);
                vec![
                    ((1.0 + 2.0 * s) * ms * ms, &p.u_jets),
                    (dt * s * ms * ms, &p.dudt_jets),
                    ((1.0 - 2.0 * r) * pr * pr, &c.u_jets),
                    (dt * r * pr * pr, &c.dudt_jets),
                ]
            }
        })
    }

    /// The interpolant frozen at time `t` as a single jet field.
    pub fn frozen_at(&self, t: f64) -> Result<JetVectorField> {
        JetVectorField::linear_combination(&self.weights(t)?)
    }

    /// `ũ(x, t)`.
    pub fn time_eval(&self, x: Vec3, t: f64) -> Result<Vec3> {
        let mut out = [0.0; 3];
        for (w, f) in self.weights(t)? {
            let v = f.value(x);
            for c in 0..3 {
                out[c] += w * v[c];
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    Direct,
    MollifiedAdaptive,
}

/// Vorticity sampling settings; the mollified mode averages the pulled-back
/// vorticity against a `cos²` bump with per-cell adaptive quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingConfig {
    pub mode: SamplingMode,
    /// Mollifier half-width; `None` uses the smallest cell width.
    pub half_width: Option<f64>,
    /// Starting points per cell per dimension.
    pub min_samples: usize,
    /// Largest per-dimension count adaptivity may reach.
    pub max_samples: usize,
    /// Cap on the total number of quadrature points.
    pub cap: usize,
    /// Refinement thresholds on the per-cell range and mean line total
    /// variation of `|w|`, per sample interval, relative to `max |w|`.
    pub range_tol: f64,
    pub tv_tol: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            mode: SamplingMode::Direct,
            half_width: None,
            min_samples: 2,
            max_samples: 16,
            cap: 192 * 192 * 192,
            range_tol: 0.05,
            tv_tol: 0.05,
        }
    }
}

impl SamplingConfig {
    pub fn mollified() -> Self {
        SamplingConfig {
            mode: SamplingMode::MollifiedAdaptive,
            ..Default::default()
        }
    }

    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if let Some(h) = self.half_width {
            if !(h > 0.0) {
                return bad(format!("mollifier half-width must be > 0, got {h}"));
            }
            if h > grid.min_spacing() * (1.0 + 1e-12) {
                return bad(format!(
                    "mollifier half-width {h} exceeds the cell width {}",
                    grid.min_spacing()
                ));
            }
        }
        if self.min_samples < 2 {
            return bad("at least 2 samples per cell per dimension are required".into());
        }
        if self.max_samples < self.min_samples {
            return bad("max_samples must be ≥ min_samples".into());
        }
        if self.mode == SamplingMode::MollifiedAdaptive && self.cap < self.min_samples.pow(3) * grid.len() {
            return bad(format!(
                "sample cap {} is below the minimum {} for grid {grid}",
                self.cap,
                self.min_samples.pow(3) * grid.len()
            ));
        }
        if !(self.range_tol > 0.0 && self.tv_tol > 0.0) {
            return bad("adaptivity thresholds must be > 0".into());
        }
        Ok(())
    }
}

/// `cos²(πs/2h)/h` on `|s| < h`.
#[inline]
pub fn mollifier_1d(s: f64, h: f64) -> f64 {
    if s.abs() >= h {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * s / h).cos();
        c * c / h
    }
}

/// Vorticity on the nodes of `grid`, as three component arrays.
pub fn sample_vorticity<F>(
    stack: &SubmapStack,
    tail: &DisplacementMap,
    w0: &F,
    grid: GridSpec,
    cfg: &SamplingConfig,
) -> Result<[Vec<f64>; 3]>
where
    F: Fn(Vec3) -> Vec3 + Sync + ?Sized,
{
    cfg.validate(&grid)?;
    let pts: Vec<Vec3> = match cfg.mode {
        SamplingMode::Direct => (0..grid.len())
            .into_par_iter()
            .map(|idx| pullback_vorticity(stack, tail, w0, grid.node_at(idx)))
            .collect::<Result<_>>()?,
        SamplingMode::MollifiedAdaptive => mollified(&|x| pullback_vorticity(stack, tail, w0, x), grid, cfg)?,
    };
    Ok(std::array::from_fn(|c| pts.iter().map(|p| p[c]).collect()))
}

type CellSums = [[f64; 4]; 8];

fn cell_points(grid: &GridSpec, cell: [usize; 3], n: usize) -> impl Iterator<Item = ([f64; 3], Vec3)> + '_ {
    let h = grid.spacing();
    let base = grid.node(cell[0], cell[1], cell[2]);
    let inv = 1.0 / n as f64;
    (0..n * n * n).map(move |p| {
        let q = [p % n, (p / n) % n, p / (n * n)];
        // fractional position in the cell and the physical point
        let f = q.map(|v| (v as f64 + 0.5) * inv);
        (f, [base[0] + f[0] * h[0], base[1] + f[1] * h[1], base[2] + f[2] * h[2]])
    })
}

/// Range and mean line variation of `|w|` over an `n³` sample block.
fn cell_metrics(mags: &[f64], n: usize) -> (f64, f64) {
    let (lo, hi) = mags.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    let at = |i: usize, j: usize, k: usize| mags[i + n * (j + n * k)];
    let mut tv = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 1..n {
                tv += (at(c, a, b) - at(c - 1, a, b)).abs();
                tv += (at(a, c, b) - at(a, c - 1, b)).abs();
                tv += (at(a, b, c) - at(a, b, c - 1)).abs();
            }
        }
    }
    (hi - lo, tv / (3 * n * n) as f64)
}

fn sample_cell<E>(eval: &E, grid: &GridSpec, cell: [usize; 3], n: usize) -> Result<Vec<([f64; 3], Vec3)>>
where
    E: Fn(Vec3) -> Result<Vec3> + Sync + ?Sized,
{
    cell_points(grid, cell, n).map(|(f, y)| Ok((f, eval(y)?))).collect()
}

fn mollified<E>(eval: &E, grid: GridSpec, cfg: &SamplingConfig) -> Result<Vec<Vec3>>
where
    E: Fn(Vec3) -> Result<Vec3> + Sync + ?Sized,
{
    let counts = adaptive_counts(eval, &grid, cfg)?;
    mollify_with_counts(eval, grid, cfg, &counts)
}

/// Per-cell, per-dimension quadrature counts after adaptivity and the cap.
fn adaptive_counts<E>(eval: &E, grid: &GridSpec, cfg: &SamplingConfig) -> Result<Vec<usize>>
where
    E: Fn(Vec3) -> Result<Vec3> + Sync + ?Sized,
{
    let grid = *grid;
    let n0 = cfg.min_samples;
    let cells = grid.len();
    let norm = |v: &Vec3| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();

    // coarse pass: per-cell metrics and the global scale
    let coarse: Vec<(f64, f64, f64)> = (0..cells)
        .into_par_iter()
        .map(|idx| {
            let s = sample_cell(eval, &grid, grid.unflatten(idx), n0)?;
            let mags: Vec<f64> = s.iter().map(|(_, w)| norm(w)).collect();
            let (r, tv) = cell_metrics(&mags, n0);
            Ok((r, tv, mags.iter().cloned().fold(0.0, f64::max)))
        })
        .collect::<Result<_>>()?;
    let scale = coarse.iter().map(|c| c.2).fold(0.0, f64::max);

    // geometric growth per cell
    let refine = |r: f64, tv: f64, n: usize| {
        scale > 0.0 && n < cfg.max_samples && (r / n as f64 > cfg.range_tol * scale || tv / n as f64 > cfg.tv_tol * scale)
    };
    let mut counts: Vec<usize> = (0..cells)
        .into_par_iter()
        .map(|idx| {
            let (mut r, mut tv, _) = coarse[idx];
            let mut n = n0;
            while refine(r, tv, n) {
                n = (2 * n).min(cfg.max_samples);
                let s = sample_cell(eval, &grid, grid.unflatten(idx), n)?;
                let mags: Vec<f64> = s.iter().map(|(_, w)| norm(w)).collect();
                (r, tv) = cell_metrics(&mags, n);
            }
            Ok(n)
        })
        .collect::<Result<_>>()?;
    let total: usize = counts.iter().map(|n| n.pow(3)).sum();
    if total > cfg.cap {
        let f = (cfg.cap as f64 / total as f64).cbrt();
        for n in counts.iter_mut() {
            *n = ((*n as f64 * f).floor() as usize).max(n0);
        }
    }
    Ok(counts)
}

fn mollify_with_counts<E>(eval: &E, grid: GridSpec, cfg: &SamplingConfig, counts: &[usize]) -> Result<Vec<Vec3>>
where
    E: Fn(Vec3) -> Result<Vec3> + Sync + ?Sized,
{
    let cells = grid.len();

    // per-cell weighted sums toward each of the eight corners
    let h = cfg.half_width.unwrap_or_else(|| grid.min_spacing());
    let dx = grid.spacing();
    let sums: Vec<CellSums> = (0..cells)
        .into_par_iter()
        .map(|idx| {
            let n = counts[idx];
            let vol = grid.cell_volume() / (n * n * n) as f64;
            let mut acc = [[0.0; 4]; 8];
            for (f, w) in sample_cell(eval, &grid, grid.unflatten(idx), n)? {
                // 1D weights toward the lower (0) and upper (1) corner
                let m: [[f64; 2]; 3] =
                    std::array::from_fn(|a| [mollifier_1d(f[a] * dx[a], h), mollifier_1d((1.0 - f[a]) * dx[a], h)]);
                for (corner, slot) in acc.iter_mut().enumerate() {
                    let wt = vol * m[0][corner & 1] * m[1][(corner >> 1) & 1] * m[2][corner >> 2];
                    slot[0] += wt * w[0];
                    slot[1] += wt * w[1];
                    slot[2] += wt * w[2];
                    slot[3] += wt;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;

    let [nx, ny, nz] = grid.dims;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let [i, j, k] = grid.unflatten(idx);
            let mut acc = [0.0; 4];
            for corner in 0..8 {
                let (a, b, c) = (corner & 1, (corner >> 1) & 1, corner >> 2);
                let cell = grid.index((i + nx - a) % nx, (j + ny - b) % ny, (k + nz - c) % nz);
                for q in 0..4 {
                    acc[q] += sums[cell][corner][q];
                }
            }
            [acc[0] / acc[3], acc[1] / acc[3], acc[2] / acc[3]]
        })
        .collect())
}

/// Velocity jets and the truncated vorticity spectrum they came from.
#[derive(Debug, Clone)]
pub struct VelocitySolve {
    pub u_jets: JetVectorField,
    pub w_hat: SpectralVectorField,
}

/// `ℋ_V[ℱ⁻¹[−Δ⁻¹∇× ℱ[w]]]` with Fourier truncation at `radius`.
pub fn velocity_frame(grid: GridSpec, w_phys: &[Vec<f64>; 3], radius: f64) -> Result<VelocitySolve> {
    let w_hat = SpectralVectorField::forward(grid, w_phys)?.truncate(radius);
    let u_jets = w_hat.biot_savart().spectral_jets();
    Ok(VelocitySolve { u_jets, w_hat })
}

/// Jets of `∂ₜũ = −Δ⁻¹∇×[(w·∇)u − (u·∇)w]`, the bracket formed at nodes
/// from the truncated fields and truncated again.
pub fn velocity_time_derivative(solve: &VelocitySolve, radius: f64) -> Result<JetVectorField> {
    let grid = *solve.u_jets.grid();
    let masks = [Mask::VALUE, Mask::X, Mask::Y, Mask::Z];
    // w_c, ∂x w_c, ∂y w_c, ∂z w_c per component
    let w: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|c| derivative_samples(&grid, solve.w_hat.comp(c), &masks))
        .collect();
    let bracket: Vec<Vec3> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let uj = solve.u_jets.node_jets(idx);
            let u = [uj[0][0], uj[1][0], uj[2][0]];
            let wv = [w[0][0][idx], w[1][0][idx], w[2][0][idx]];
            std::array::from_fn(|i| {
                let mut b = 0.0;
                for j in 0..3 {
                    b += wv[j] * uj[i][Mask::GRADIENT[j].slot()] - u[j] * w[i][j + 1][idx];
                }
                b
            })
        })
        .collect();
    drop(w);
    let phys: [Vec<f64>; 3] = std::array::from_fn(|c| bracket.iter().map(|b| b[c]).collect());
    drop(bracket);
    Ok(SpectralVectorField::forward(grid, &phys)?
        .truncate(radius)
        .biot_savart()
        .spectral_jets())
}

/// Both halves of a frame from sampled vorticity.
pub fn build_frame(grid: GridSpec, w_phys: &[Vec<f64>; 3], radius: f64, t: f64) -> Result<VelocityFrame> {
    let solve = velocity_frame(grid, w_phys, radius)?;
    let dudt_jets = velocity_time_derivative(&solve, radius)?;
    Ok(VelocityFrame {
        t,
        u_jets: solve.u_jets,
        dudt_jets,
    })
}

/// Node values (slot 0) of a jet component.
pub fn node_values(f: &JetScalarField) -> Vec<f64> {
    f.coeffs().iter().map(|c| c[0]).collect()
}
