//! Backward characteristic maps: submaps stored as displacement jets, their
//! RK3 time update by Hermite composition, and pullback through a stack.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::epsdiff::eps_diff_displacement;
use crate::error::{Error, Result};
use crate::fluid::VelocityInterpolant;
use crate::grid::GridSpec;
use crate::io;
use crate::jet::{JetVectorField, Mask};
use crate::linalg::{self, IDENTITY};
use crate::{Mat3, Vec3};

/// A backward submap `χ: x ↦ x + d(x)` sending points at time `t_start`
/// to their positions at time `t_end ≤ t_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementMap {
    pub disp: JetVectorField,
    pub t_start: f64,
    pub t_end: f64,
    /// Step indices matching `t_start` and `t_end`.
    pub n_start: usize,
    pub n_end: usize,
}

impl DisplacementMap {
    pub fn grid(&self) -> &GridSpec {
        self.disp.grid()
    }

    #[inline]
    pub fn eval(&self, x: Vec3) -> Vec3 {
        linalg::add(x, self.disp.value(x))
    }

    /// Image point and Jacobian `∇χ = I + ∇d`.
    #[inline]
    pub fn eval_with_jacobian(&self, x: Vec3) -> (Vec3, Mat3) {
        let (d, mut j) = self.disp.value_jacobian(x);
        for (i, row) in j.iter_mut().enumerate() {
            row[i] += 1.0;
        }
        (linalg::add(x, d), j)
    }

    /// `max |det ∇χ − 1|` over the nodes, from the stored jets.
    pub fn det_error(&self) -> f64 {
        det_error(self)
    }
}

/// Zero-displacement map at time 0.
pub fn identity_map(grid: GridSpec) -> DisplacementMap {
    identity_map_at(grid, 0, 0.0)
}

/// Zero-displacement map starting at step `n`, time `t`.
pub fn identity_map_at(grid: GridSpec, n: usize, t: f64) -> DisplacementMap {
    DisplacementMap {
        disp: JetVectorField::zeros(grid),
        t_start: t,
        t_end: t,
        n_start: n,
        n_end: n,
    }
}

pub fn det_error(map: &DisplacementMap) -> f64 {
    let d = &map.disp;
    (0..d.grid().len())
        .into_par_iter()
        .map(|idx| {
            let jets = d.node_jets(idx);
            let mut j = IDENTITY;
            for (i, row) in j.iter_mut().enumerate() {
                for (a, m) in Mask::GRADIENT.iter().enumerate() {
                    row[a] += jets[i][m.slot()];
                }
            }
            (linalg::det(&j) - 1.0).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// Remap criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemapPolicy {
    pub det_tol: f64,
}

impl Default for RemapPolicy {
    fn default() -> Self {
        RemapPolicy { det_tol: 1e-3 }
    }
}

impl RemapPolicy {
    pub fn new(det_tol: f64) -> Result<Self> {
        if !(det_tol > 0.0) {
            return Err(Error::Config(format!("det_tol must be > 0, got {det_tol}")));
        }
        Ok(RemapPolicy { det_tol })
    }
}

/// Submaps for `[T₁, 0], [T₂, T₁], …`, oldest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubmapStack {
    maps: Vec<DisplacementMap>,
}

/// One manifest record of an archived submap.
#[derive(Debug, Clone, PartialEq)]
pub struct RemapRecord {
    pub n_start: usize,
    pub n_end: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub det_error: f64,
}

impl SubmapStack {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn maps(&self) -> &[DisplacementMap] {
        &self.maps
    }

    /// Append a map; its interval must continue the last one.
    pub fn push(&mut self, map: DisplacementMap) -> Result<()> {
        let expected = self.maps.last().map_or(0, |m| m.n_start);
        if map.n_end != expected {
            return Err(Error::Config(format!(
                "submap starting at step {} does not continue the stack ending at step {expected}",
                map.n_end
            )));
        }
        self.maps.push(map);
        Ok(())
    }

    /// Remap times `T_i` as step indices.
    pub fn remap_steps(&self) -> Vec<usize> {
        self.maps.iter().map(|m| m.n_start).collect()
    }

    pub fn records(&self) -> Vec<RemapRecord> {
        self.maps
            .iter()
            .map(|m| RemapRecord {
                n_start: m.n_start,
                n_end: m.n_end,
                t_start: m.t_start,
                t_end: m.t_end,
                det_error: m.det_error(),
            })
            .collect()
    }
}

/// If the current map violates the volume tolerance, archive it and
/// restart from the identity. Returns whether a remap happened.
pub fn maybe_remap(stack: &mut SubmapStack, current: &mut DisplacementMap, policy: &RemapPolicy) -> Result<bool> {
    if current.det_error() < policy.det_tol {
        return Ok(false);
    }
    let fresh = identity_map_at(*current.grid(), current.n_start, current.t_start);
    let old = std::mem::replace(current, fresh);
    stack.push(old)?;
    Ok(true)
}

/// Label point `X_B(x)`: the tail first, then the stack newest to oldest.
pub fn eval_composed(stack: &SubmapStack, tail: &DisplacementMap, x: Vec3) -> Vec3 {
    let mut y = tail.eval(x);
    for m in stack.maps.iter().rev() {
        y = m.eval(y);
    }
    y
}

/// `w(x) = adj∇χ_tail · adj∇χ_m ⋯ adj∇χ_1 · w₀(X_B(x))`.
///
/// The determinant factor is omitted since the maps are volume preserving;
/// a non-positive determinant at any stage is reported as singular.
pub fn pullback_vorticity<F>(stack: &SubmapStack, tail: &DisplacementMap, w0: &F, x: Vec3) -> Result<Vec3>
where
    F: Fn(Vec3) -> Vec3 + ?Sized,
{
    let depth = stack.len() + 1;
    let mut adjs: Vec<Mat3> = Vec::with_capacity(depth);
    let mut y = x;
    for stage in 0..depth {
        let map = if stage == 0 { tail } else { &stack.maps[depth - 1 - stage] };
        let (next, j) = map.eval_with_jacobian(y);
        let det = linalg::det(&j);
        if !(det > 0.0) {
            return Err(Error::SingularMap { stage, x: y, det });
        }
        adjs.push(linalg::adjugate(&j));
        y = next;
    }
    let mut w = w0(y);
    for a in adjs.iter().rev() {
        w = linalg::matvec(a, w);
    }
    Ok(w)
}

/// `φ(x) = φ₀(X_B(x))`.
pub fn pullback_scalar<F>(stack: &SubmapStack, tail: &DisplacementMap, phi0: &F, x: Vec3) -> f64
where
    F: Fn(Vec3) -> f64 + ?Sized,
{
    phi0(eval_composed(stack, tail, x))
}

/// RK3 (Kutta) backward displacement over one step from stage velocities
/// at `t_{n+1}`, `t_{n+1} − Δt/2` and `t_n`.
#[inline]
pub fn rk3_backward(u1: &JetVectorField, u2: &JetVectorField, u3: &JetVectorField, dt: f64, x: Vec3) -> Vec3 {
    let k1 = u1.value(x);
    let k2 = u2.value([x[0] - 0.5 * dt * k1[0], x[1] - 0.5 * dt * k1[1], x[2] - 0.5 * dt * k1[2]]);
    let k3 = u3.value([
        x[0] + dt * (k1[0] - 2.0 * k2[0]),
        x[1] + dt * (k1[1] - 2.0 * k2[1]),
        x[2] + dt * (k1[2] - 2.0 * k2[2]),
    ]);
    let c = -dt / 6.0;
    [
        c * (k1[0] + 4.0 * k2[0] + k3[0]),
        c * (k1[1] + 4.0 * k2[1] + k3[1]),
        c * (k1[2] + 4.0 * k2[2] + k3[2]),
    ]
}

/// Displacement jets on `grid` of the one-step map `X̃_{[t_n+Δt, t_n]}`.
pub fn one_step_map(vel: &VelocityInterpolant, t_n: f64, dt: f64, grid: GridSpec, eps: f64) -> Result<JetVectorField> {
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be > 0, got {dt}")));
    }
    let stages = [t_n + dt, t_n + 0.5 * dt, t_n].map(|t| vel.frozen_at(t));
    let [u1, u2, u3] = match stages {
        [Ok(a), Ok(b), Ok(c)] => [a, b, c],
        [Err(e), _, _] | [_, Err(e), _] | [_, _, Err(e)] => return Err(e),
    };
    for u in [&u1, &u2, &u3] {
        if !u.is_finite() {
            let idx = (0..u.grid().len())
                .find(|&i| u.node_jets(i).iter().flatten().any(|v| !v.is_finite()))
                .unwrap_or(0);
            return Err(Error::NonFinite {
                what: "velocity",
                x: u.grid().node_at(idx),
            });
        }
    }
    eps_diff_displacement(|x| rk3_backward(&u1, &u2, &u3, dt, x), grid, eps)
}

/// `ℋ[χ ∘ X̃]`: new displacement jets by ε-differences of
/// `x ↦ s(x) + d_χ(x + s(x))`, labelled up to `(n_new, t_new)`.
pub fn compose_update(
    chi: &DisplacementMap,
    step: &JetVectorField,
    n_new: usize,
    t_new: f64,
    eps: f64,
) -> Result<DisplacementMap> {
    if step.grid() != chi.grid() {
        return Err(Error::Config("one-step map and current map must share the map grid".into()));
    }
    let disp = eps_diff_displacement(
        |x| {
            let s = step.value(x);
            let y = linalg::add(x, s);
            linalg::add(s, chi.disp.value(y))
        },
        *chi.grid(),
        eps,
    )?;
    Ok(DisplacementMap {
        disp,
        t_start: t_new,
        t_end: chi.t_end,
        n_start: n_new,
        n_end: chi.n_end,
    })
}

const MANIFEST: &str = "stack.txt";

fn map_file(dir: &Path, i: usize, c: usize) -> std::path::PathBuf {
    dir.join(format!("map_{i:04}_{}.cmjf", ["x", "y", "z"][c]))
}

/// Persist the stack and the current map: three CMJF dumps per map and a
/// manifest with one line per map (`index n_start n_end t_start t_end
/// det_error kind`), the last line being the current map.
pub fn save_stack(dir: &Path, stack: &SubmapStack, current: &DisplacementMap) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("# index n_start n_end t_start t_end det_error kind (det sampled at map nodes)\n");
    let all = stack.maps.iter().map(|m| (m, "archived")).chain([(current, "current")]);
    for (i, (m, kind)) in all.enumerate() {
        for c in 0..3 {
            io::save_field(&map_file(dir, i, c), m.disp.comp(c))?;
        }
        writeln!(
            manifest,
            "{i} {} {} {:.17e} {:.17e} {:.6e} {kind}",
            m.n_start,
            m.n_end,
            m.t_start,
            m.t_end,
            m.det_error()
        )
        .unwrap();
    }
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

/// Inverse of [`save_stack`].
pub fn load_stack(dir: &Path) -> Result<(SubmapStack, DisplacementMap)> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |msg: String| Error::Format {
        path: path.clone(),
        msg,
    };
    let mut maps = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields: {line}")));
        }
        let i: usize = f[0].parse().map_err(|_| bad(format!("bad index: {line}")))?;
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(format!("bad step: {line}")));
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad time: {line}")));
        let comps = [0, 1, 2].map(|c| io::load_field(&map_file(dir, i, c)));
        let [a, b, c] = comps;
        let disp = JetVectorField::new([a?, b?, c?])?;
        maps.push(DisplacementMap {
            disp,
            n_start: int(f[1])?,
            n_end: int(f[2])?,
            t_start: real(f[3])?,
            t_end: real(f[4])?,
        });
    }
    let current = maps.pop().ok_or_else(|| bad("empty stack manifest".into()))?;
    let mut stack = SubmapStack::new();
    for m in maps {
        stack.push(m)?;
    }
    Ok((stack, current))
}
