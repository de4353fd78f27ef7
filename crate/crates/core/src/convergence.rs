//! Grid-convergence studies on the ABC and Taylor-Green flows.
//!
//! Each level runs with `M = V = N³`, `Δt = 24/N` and truncation radius
//! `N/3` to `T = 2`, with remapping disabled so the map error is the
//! scheme error alone.

use std::time::Instant;

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::driver::{step, RunState};
use crate::error::{Error, Result};
use crate::flowmap::{eval_composed, DisplacementMap, SubmapStack};
use crate::grid::GridSpec;
use crate::linalg;
use crate::scenarios::{InitialVorticity, Scenario, ScenarioKind};
use crate::{Mat3, Vec3};

/// Errors of one resolution level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelResult {
    pub n: usize,
    /// `max |X_B − X_ref|` over the evaluation points, if a reference exists.
    pub map_err: Option<f64>,
    /// `max |∇X_B − ∇X_ref|` (entrywise).
    pub jac_err: Option<f64>,
    /// `max |w − w_ref|` (componentwise).
    pub vort_err: f64,
    pub wall_s: f64,
}

/// Observed orders from a least-squares fit over the levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub scenario: ScenarioKind,
    pub levels: Vec<LevelResult>,
    pub reference_n: Option<usize>,
    pub map_order: Option<f64>,
    pub jac_order: Option<f64>,
    pub vort_order: f64,
}

impl std::fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3e}"));
        writeln!(f, "# {} convergence{}", self.scenario, self.reference_n.map_or(String::new(), |n| format!(" against N={n}")))?;
        writeln!(f, "N,map_err,jac_err,vort_err,wall_s")?;
        for l in &self.levels {
            writeln!(f, "{},{},{},{:.3e},{:.1}", l.n, opt(l.map_err), opt(l.jac_err), l.vort_err, l.wall_s)?;
        }
        let ord = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
        write!(
            f,
            "order map {} jacobian {} vorticity {:.2}",
            ord(self.map_order),
            ord(self.jac_order),
            self.vort_order
        )
    }
}

/// The run configuration of one level.
pub fn level_config(kind: ScenarioKind, n: usize, t_final: f64) -> RunConfig {
    let mut c = RunConfig::for_scenario(kind);
    c.map_dims = [n; 3];
    c.sample_dims = [n; 3];
    c.diag_dims = [n; 3];
    c.dt = 24.0 / n as f64;
    c.t_final = t_final;
    c.trunc_radius = n as f64 / 3.0;
    c.det_tol = f64::INFINITY;
    c
}

/// Run the stepping loop alone, without any output.
pub fn evolve(cfg: &RunConfig, w0: &InitialVorticity) -> Result<RunState> {
    cfg.validate()?;
    let mut state = RunState::new(GridSpec::periodic_box(cfg.map_dims)?);
    for _ in 0..cfg.n_steps() {
        step(&mut state, cfg, w0)?;
    }
    Ok(state)
}

/// `X_B(x)` and `∇X_B(x)` through the whole stack.
pub fn composed_jacobian(stack: &SubmapStack, tail: &DisplacementMap, x: Vec3) -> (Vec3, Mat3) {
    let (mut y, mut j) = tail.eval_with_jacobian(x);
    for m in stack.maps().iter().rev() {
        let (z, jm) = m.eval_with_jacobian(y);
        j = linalg::matmul(&jm, &j);
        y = z;
    }
    (y, j)
}

/// `−d log e / d log N` by least squares.
pub fn observed_order(ns: &[usize], errs: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    -sxy / sxx
}

fn max_over<F: Fn(Vec3) -> Result<f64> + Sync>(grid: &GridSpec, f: F) -> Result<f64> {
    let v: Vec<f64> = (0..grid.len()).into_par_iter().map(|i| f(grid.node_at(i))).collect::<Result<_>>()?;
    Ok(v.into_iter().fold(0.0, f64::max))
}

fn max_abs3(v: Vec3) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn check_levels(levels: &[usize]) -> Result<()> {
    if levels.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two levels".into()));
    }
    if let Some(&n) = levels.iter().find(|&&n| n < 8) {
        return Err(Error::Config(format!("invariant dims ≥ 8 violated: level {n}")));
    }
    Ok(())
}

/// ABC flow against its exact stationary vorticity at the nodes of each
/// level's grid.
pub fn abc_convergence(levels: &[usize], t_final: f64) -> Result<ConvergenceReport> {
    check_levels(levels)?;
    let w0 = Scenario::standard(ScenarioKind::Abc)?.w0;
    let mut out = Vec::new();
    for &n in levels {
        let started = Instant::now();
        let cfg = level_config(ScenarioKind::Abc, n, t_final);
        let state = evolve(&cfg, &w0)?;
        let grid = GridSpec::periodic_box([n; 3])?;
        let vort_err = max_over(&grid, |x| {
            Ok(max_abs3(linalg::sub(state.vorticity(&w0, x)?, crate::scenarios::abc_w0(x))))
        })?;
        out.push(LevelResult {
            n,
            map_err: None,
            jac_err: None,
            vort_err,
            wall_s: started.elapsed().as_secs_f64(),
        });
    }
    let errs: Vec<f64> = out.iter().map(|l| l.vort_err).collect();
    Ok(ConvergenceReport {
        scenario: ScenarioKind::Abc,
        vort_order: observed_order(levels, &errs),
        levels: out,
        reference_n: None,
        map_order: None,
        jac_order: None,
    })
}

/// Self-convergence of any scenario against a finer reference run, with
/// errors measured at the nodes of the coarsest level's grid.
pub fn self_convergence(kind: ScenarioKind, levels: &[usize], reference_n: usize, t_final: f64) -> Result<ConvergenceReport> {
    check_levels(levels)?;
    if levels.iter().any(|&n| n >= reference_n) {
        return Err(Error::Config("the reference must be finer than every level".into()));
    }
    let w0 = Scenario::standard(kind)?.w0;
    let reference = evolve(&level_config(kind, reference_n, t_final), &w0)?;
    let eval = GridSpec::periodic_box([*levels.iter().min().unwrap(); 3])?;
    let map_grid = *reference.current.grid();
    let mut out = Vec::new();
    for &n in levels {
        let started = Instant::now();
        let state = evolve(&level_config(kind, n, t_final), &w0)?;
        let map_err = max_over(&eval, |x| {
            let a = eval_composed(&state.stack, &state.current, x);
            let b = eval_composed(&reference.stack, &reference.current, x);
            Ok(max_abs3(map_grid.periodic_delta(a, b)))
        })?;
        let jac_err = max_over(&eval, |x| {
            let (_, a) = composed_jacobian(&state.stack, &state.current, x);
            let (_, b) = composed_jacobian(&reference.stack, &reference.current, x);
            Ok((0..3).map(|i| max_abs3(linalg::sub(a[i], b[i]))).fold(0.0, f64::max))
        })?;
        let vort_err = max_over(&eval, |x| {
            Ok(max_abs3(linalg::sub(state.vorticity(&w0, x)?, reference.vorticity(&w0, x)?)))
        })?;
        out.push(LevelResult {
            n,
            map_err: Some(map_err),
            jac_err: Some(jac_err),
            vort_err,
            wall_s: started.elapsed().as_secs_f64(),
        });
    }
    let order = |f: fn(&LevelResult) -> f64| observed_order(levels, &out.iter().map(f).collect::<Vec<_>>());
    Ok(ConvergenceReport {
        scenario: kind,
        map_order: Some(order(|l| l.map_err.unwrap())),
        jac_order: Some(order(|l| l.jac_err.unwrap())),
        vort_order: order(|l| l.vort_err),
        levels: out,
        reference_n: Some(reference_n),
    })
}
