//! Orchestration: the time-step loop with remapping, scheduled diagnostics,
//! checkpoints and the run manifest.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{parse_config, RunConfig};
use crate::diagnostics::{
    conserved_from_samples, read_diagnostics, slice_sample, Conserved, DiagnosticsRow, SliceQuantity, SliceRequest,
};
use crate::error::{Error, Result};
use crate::flowmap::{
    compose_update, identity_map, load_stack, maybe_remap, one_step_map, pullback_scalar, pullback_vorticity,
    save_stack, DisplacementMap, RemapPolicy, SubmapStack,
};
use crate::fluid::{build_frame, sample_vorticity, SamplingConfig, VelocityFrame, VelocityInterpolant};
use crate::grid::GridSpec;
use crate::io;
use crate::jet::JetVectorField;
use crate::linalg;
use crate::scenarios::{InitialVorticity, Scenario};
use crate::spectral::write_spectrum;
use crate::Vec3;

/// Cap the global thread pool from `CM_THREADS`; returns the thread count.
pub fn init_threads_from_env() -> Result<usize> {
    if let Ok(v) = std::env::var("CM_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("CM_THREADS must be a positive integer, got '{v}'")))?;
        // a pool may already exist when embedded; keep it in that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// A remap: the step at which the current map was archived and its
/// volume error at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RemapEvent {
    pub n: usize,
    pub det_error: f64,
}

/// Loop state of the solver.
#[derive(Debug, Clone)]
pub struct RunState {
    /// Step counter; `t_n = n Δt`.
    pub n: usize,
    pub stack: SubmapStack,
    pub current: DisplacementMap,
    /// Velocity frames at `t_{n−1}` and `t_n`; `None` before the first step.
    pub velocity: Option<VelocityInterpolant>,
    pub remaps: Vec<RemapEvent>,
}

impl RunState {
    pub fn new(map_grid: GridSpec) -> Self {
        RunState {
            n: 0,
            stack: SubmapStack::new(),
            current: identity_map(map_grid),
            velocity: None,
            remaps: Vec::new(),
        }
    }

    pub fn t(&self, dt: f64) -> f64 {
        self.n as f64 * dt
    }

    /// Submaps in use, including the current one.
    pub fn n_maps(&self) -> usize {
        self.stack.len() + 1
    }

    /// `w(x, t_n)` by pullback.
    pub fn vorticity(&self, w0: &InitialVorticity, x: Vec3) -> Result<Vec3> {
        pullback_vorticity(&self.stack, &self.current, &|y| w0.eval(y), x)
    }
}

/// What one step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub remap: Option<RemapEvent>,
}

/// One pass of the inner loop: sample `w` on V, solve for the velocity
/// and its time derivative, advance the time interpolant, build the RK3
/// one-step map on M, compose it into the current map, advance `t`, then
/// remap if the volume error exceeds the tolerance.
pub fn step(state: &mut RunState, cfg: &RunConfig, w0: &InitialVorticity) -> Result<StepOutcome> {
    let map_grid = GridSpec::periodic_box(cfg.map_dims)?;
    let sample_grid = GridSpec::periodic_box(cfg.sample_dims)?;
    let policy = RemapPolicy::new(cfg.det_tol)?;
    let dt = cfg.dt;
    let t_n = state.t(dt);

    let w = sample_vorticity(&state.stack, &state.current, &|y| w0.eval(y), sample_grid, &cfg.sampling)?;
    let frame = build_frame(sample_grid, &w, cfg.trunc_radius, t_n)?;
    drop(w);
    let vel = match state.velocity.take() {
        None => VelocityInterpolant::bootstrap(frame, dt)?,
        Some(v) => v.advance(frame)?,
    };
    let one_step = one_step_map(&vel, t_n, dt, map_grid, cfg.eps)?;
    state.velocity = Some(vel);
    let n_new = state.n + 1;
    state.current = compose_update(&state.current, &one_step, n_new, n_new as f64 * dt, cfg.eps)?;
    state.n = n_new;

    let remapped = maybe_remap(&mut state.stack, &mut state.current, &policy)?;
    let remap = remapped.then(|| RemapEvent {
        n: n_new,
        det_error: state.stack.maps().last().map_or(0.0, |m| m.det_error()),
    });
    if let Some(r) = remap {
        state.remaps.push(r);
    }
    Ok(StepOutcome { remap })
}

const STATE_FILE: &str = "state.txt";
const CONFIG_FILE: &str = "config.ini";

fn frame_file(dir: &Path, kind: &str, c: usize) -> PathBuf {
    dir.join(format!("frame_{kind}_{}.cmjf", ["x", "y", "z"][c]))
}

/// Persist everything needed to continue a run, plus the config.
pub fn save_checkpoint(dir: &Path, state: &RunState, q0: &Conserved, cfg: &RunConfig) -> Result<()> {
    save_stack(dir, &state.stack, &state.current)?;
    let mut s = format!("n {}\n", state.n);
    match &state.velocity {
        Some(v) => {
            let f = v.curr();
            for c in 0..3 {
                io::save_field(&frame_file(dir, "u", c), f.u_jets.comp(c))?;
                io::save_field(&frame_file(dir, "dudt", c), f.dudt_jets.comp(c))?;
            }
            writeln!(s, "frame_t {:?}", f.t).unwrap();
        }
        None => s.push_str("frame_t none\n"),
    }
    writeln!(
        s,
        "q0 {:?} {:?} {:?} {:?} {:?}",
        q0.enstrophy, q0.energy, q0.helicity, q0.max_w, q0.max_u
    )
    .unwrap();
    for r in &state.remaps {
        writeln!(s, "remap {} {:?}", r.n, r.det_error).unwrap();
    }
    let path = dir.join(STATE_FILE);
    fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    let path = dir.join(CONFIG_FILE);
    fs::write(&path, cfg.to_ini()).map_err(|e| Error::io(&path, e))
}

/// A loaded checkpoint.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub state: RunState,
    pub q0: Conserved,
    pub config: RunConfig,
}

/// Inverse of [`save_checkpoint`]; the velocity is restored as a
/// single-frame interpolant whose next advance matches the original run.
pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let path = dir.join(STATE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let bad = |msg: String| Error::Format {
        path: path.clone(),
        msg,
    };
    let config = {
        let p = dir.join(CONFIG_FILE);
        parse_config(&fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?)?
    };
    let (stack, current) = load_stack(dir)?;
    let mut n = None;
    let mut frame_t = None;
    let mut q0 = None;
    let mut remaps = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let real = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number in: {line}")));
        match (f[0], f.len()) {
            ("n", 2) => n = Some(f[1].parse::<usize>().map_err(|_| bad(format!("bad step: {line}")))?),
            ("frame_t", 2) => frame_t = if f[1] == "none" { Some(None) } else { Some(Some(real(f[1])?)) },
            ("q0", 6) => {
                q0 = Some(Conserved {
                    enstrophy: real(f[1])?,
                    energy: real(f[2])?,
                    helicity: real(f[3])?,
                    max_w: real(f[4])?,
                    max_u: real(f[5])?,
                })
            }
            ("remap", 3) => remaps.push(RemapEvent {
                n: f[1].parse().map_err(|_| bad(format!("bad step: {line}")))?,
                det_error: real(f[2])?,
            }),
            _ => return Err(bad(format!("unrecognized line: {line}"))),
        }
    }
    let n = n.ok_or_else(|| bad("missing step counter".into()))?;
    let frame_t = frame_t.ok_or_else(|| bad("missing frame time".into()))?;
    let q0 = q0.ok_or_else(|| bad("missing initial quantities".into()))?;
    if current.n_start != n {
        return Err(bad(format!("current map ends at step {} but state is at step {n}", current.n_start)));
    }
    let velocity = match frame_t {
        None => None,
        Some(t) => {
            let load = |kind: &str| -> Result<JetVectorField> {
                let [a, b, c] = [0, 1, 2].map(|c| io::load_field(&frame_file(dir, kind, c)));
                JetVectorField::new([a?, b?, c?])
            };
            let frame = VelocityFrame {
                t,
                u_jets: load("u")?,
                dudt_jets: load("dudt")?,
            };
            Some(VelocityInterpolant::bootstrap(frame, config.dt)?)
        }
    };
    Ok(Checkpoint {
        state: RunState {
            n,
            stack,
            current,
            velocity,
            remaps,
        },
        q0,
        config,
    })
}

/// Scalar evaluator for a slice quantity.
pub fn quantity_eval<'a>(
    state: &'a RunState,
    w0: &'a InitialVorticity,
    q: SliceQuantity,
) -> impl Fn(Vec3) -> f64 + Sync + 'a {
    move |x| match q {
        SliceQuantity::Tracer => pullback_scalar(&state.stack, &state.current, &|y| w0.magnitude(y), x),
        SliceQuantity::VorticityMagnitude => state.vorticity(w0, x).map_or(f64::NAN, linalg::norm),
        SliceQuantity::Component(c) => state.vorticity(w0, x).map_or(f64::NAN, |w| w[c]),
    }
}

/// Sample a slice of the current state.
pub fn state_slice(state: &RunState, w0: &InitialVorticity, req: &SliceRequest) -> Result<crate::diagnostics::Slice> {
    slice_sample(req, &quantity_eval(state, w0, req.quantity))
}

/// Artifacts and rows of a finished run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub rows: Vec<DiagnosticsRow>,
    pub remaps: Vec<RemapEvent>,
    pub n_steps: usize,
    pub output_dir: PathBuf,
    pub stack_dir: PathBuf,
}

/// Output locations under the run directory.
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn diagnostics(&self) -> PathBuf {
        self.root.join("diagnostics.csv")
    }
    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.txt")
    }
    pub fn stack(&self) -> PathBuf {
        self.root.join("stack")
    }
    pub fn spectra(&self) -> PathBuf {
        self.root.join("spectra")
    }
    pub fn slices(&self) -> PathBuf {
        self.root.join("slices")
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    w0: InitialVorticity,
    out: OutputLayout,
    csv: File,
    rows: Vec<DiagnosticsRow>,
    q0: Option<Conserved>,
    started: Instant,
}

impl Runner<'_> {
    fn emit(&mut self, state: &RunState) -> Result<()> {
        let cfg = self.cfg;
        let diag = GridSpec::periodic_box(cfg.diag_dims)?;
        let w = sample_vorticity(&state.stack, &state.current, &|y| self.w0.eval(y), diag, &SamplingConfig::default())?;
        let (q, spectra) = conserved_from_samples(&diag, w)?;
        let q0 = *self.q0.get_or_insert(q);
        let row = DiagnosticsRow::new(state.t(cfg.dt), &q, &q0, state.n_maps(), self.started.elapsed().as_secs_f64());
        let path = self.out.diagnostics();
        writeln!(self.csv, "{}", row.to_csv()).and_then(|_| self.csv.flush()).map_err(|e| Error::io(&path, e))?;
        self.rows.push(row);
        if cfg.write_spectra {
            write_spectrum(&self.out.spectra().join(format!("enstrophy_n{:06}.txt", state.n)), &spectra.enstrophy)?;
            write_spectrum(&self.out.spectra().join(format!("energy_n{:06}.txt", state.n)), &spectra.energy)?;
        }
        for (i, req) in cfg.slices.iter().enumerate() {
            state_slice(state, &self.w0, req)?.save(&self.out.slices(), &format!("slice{i}_n{:06}", state.n))?;
        }
        if cfg.checkpoint {
            save_checkpoint(&self.out.stack(), state, &q0, cfg)?;
        }
        Ok(())
    }
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn manifest_text(cfg: &RunConfig, state: &RunState, n_steps: usize, status: &str) -> String {
    let mut s = String::new();
    writeln!(s, "# cm-euler3d run manifest").unwrap();
    writeln!(s, "version {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "threads {}", rayon::current_num_threads()).unwrap();
    writeln!(s, "steps {n_steps}").unwrap();
    writeln!(s, "status {status}").unwrap();
    writeln!(s, "remap_det_sampling nodes").unwrap();
    writeln!(s, "mollifier cos2 normalized by discrete weight sum").unwrap();
    writeln!(s, "remaps {}", state.remaps.len()).unwrap();
    for r in &state.remaps {
        writeln!(s, "remap step {} det_error {:.6e}", r.n, r.det_error).unwrap();
    }
    writeln!(s, "[config]").unwrap();
    s.push_str(&cfg.to_ini());
    s
}

/// Run a configuration from `t = 0`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let scenario = Scenario::build(cfg.scenario, cfg.construction_n, &cfg.kerr, &cfg.perpendicular)?;
    run_from(cfg, scenario.w0, None)
}

/// Continue from a checkpoint directory; rows after the checkpoint are
/// recomputed and appended to the output's diagnostics.
pub fn resume(cfg: &RunConfig, checkpoint_dir: &Path) -> Result<RunSummary> {
    let ck = load_checkpoint(checkpoint_dir)?;
    let scenario = Scenario::build(cfg.scenario, cfg.construction_n, &cfg.kerr, &cfg.perpendicular)?;
    run_from(cfg, scenario.w0, Some(ck))
}

/// Run with a prepared initial vorticity, optionally from a checkpoint.
pub fn run_from(cfg: &RunConfig, w0: InitialVorticity, checkpoint: Option<Checkpoint>) -> Result<RunSummary> {
    cfg.validate()?;
    let out = OutputLayout {
        root: cfg.output_dir.clone(),
    };
    for d in [out.root.clone(), out.spectra(), out.slices(), out.stack()] {
        create_dir(&d)?;
    }
    let map_grid = GridSpec::periodic_box(cfg.map_dims)?;
    let (mut state, q0) = match checkpoint {
        Some(ck) => {
            if ck.state.current.grid() != &map_grid {
                return Err(Error::Config("checkpoint map grid differs from the configured map grid".into()));
            }
            (ck.state, Some(ck.q0))
        }
        None => (RunState::new(map_grid), None),
    };
    let n_steps = cfg.n_steps();
    let resumed = q0.is_some();

    // keep rows up to the resume point, drop anything later
    let csv_path = out.diagnostics();
    let mut kept = Vec::new();
    if resumed && csv_path.exists() {
        let t_resume = state.t(cfg.dt);
        kept = read_diagnostics(&csv_path)?
            .into_iter()
            .filter(|r| r.t <= t_resume + 1e-9 * cfg.dt)
            .collect();
    }
    let mut csv = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut header = format!("{}\n", DiagnosticsRow::CSV_HEADER);
    for r in &kept {
        header.push_str(&r.to_csv());
        header.push('\n');
    }
    csv.write_all(header.as_bytes()).map_err(|e| Error::io(&csv_path, e))?;
    let write_manifest = |state: &RunState, status: &str| -> Result<()> {
        let p = out.manifest();
        fs::write(&p, manifest_text(cfg, state, n_steps, status)).map_err(|e| Error::io(&p, e))
    };
    write_manifest(&state, "running")?;

    let mut runner = Runner {
        cfg,
        w0,
        out: OutputLayout {
            root: cfg.output_dir.clone(),
        },
        csv,
        rows: kept,
        q0,
        started: Instant::now(),
    };
    let result = (|| -> Result<()> {
        if !resumed {
            runner.emit(&state)?;
        }
        let cadence = cfg.cadence_steps();
        while state.n < n_steps {
            step(&mut state, cfg, &runner.w0)?;
            if state.n % cadence == 0 || state.n == n_steps {
                runner.emit(&state)?;
            }
        }
        let q0 = runner.q0.unwrap_or_default();
        save_checkpoint(&runner.out.stack(), &state, &q0, cfg)?;
        for &n in &cfg.oversample {
            let grid = GridSpec::periodic_box([n; 3])?;
            let w = sample_vorticity(&state.stack, &state.current, &|y| runner.w0.eval(y), grid, &SamplingConfig::default())?;
            let (_, spectra) = conserved_from_samples(&grid, w)?;
            write_spectrum(&runner.out.spectra().join(format!("enstrophy_final_{n}.txt")), &spectra.enstrophy)?;
        }
        Ok(())
    })();
    match result {
        Ok(()) => {
            write_manifest(&state, "complete")?;
            Ok(RunSummary {
                rows: runner.rows,
                remaps: state.remaps.clone(),
                n_steps,
                output_dir: out.root.clone(),
                stack_dir: out.stack(),
            })
        }
        Err(e) => {
            let _ = write_manifest(&state, &format!("aborted at step {}: {e}", state.n));
            Err(e)
        }
    }
}

/// Which field `resample` evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleQuantity {
    Vorticity,
    Tracer,
    Velocity,
}

impl std::str::FromStr for ResampleQuantity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w" => Ok(ResampleQuantity::Vorticity),
            "tracer" => Ok(ResampleQuantity::Tracer),
            "u" => Ok(ResampleQuantity::Velocity),
            _ => Err(Error::Config(format!("unknown quantity '{s}' (w, tracer or u)"))),
        }
    }
}

impl std::fmt::Display for ResampleQuantity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResampleQuantity::Vorticity => "w",
            ResampleQuantity::Tracer => "tracer",
            ResampleQuantity::Velocity => "u",
        })
    }
}

/// Result of resampling a persisted stack.
#[derive(Debug, Clone)]
pub struct ResampleReport {
    pub grid: GridSpec,
    pub t: f64,
    /// Shell spectrum of the quantity: enstrophy for `w`, energy for `u`,
    /// `½|φ̂|²` for the tracer.
    pub spectrum: Vec<f64>,
    pub conserved: Option<Conserved>,
    pub spectrum_path: PathBuf,
}

/// Evaluate a persisted run on an arbitrary cubic grid and write the
/// quantity's spectrum to `out_dir` (and the samples when asked).
pub fn resample(stack_dir: &Path, n: usize, quantity: ResampleQuantity, out_dir: &Path, save_samples: bool) -> Result<ResampleReport> {
    if n < 8 {
        return Err(Error::Config(format!("invariant dims ≥ 8 violated: resample grid {n}")));
    }
    let ck = load_checkpoint(stack_dir)?;
    let cfg = &ck.config;
    let w0 = Scenario::build(cfg.scenario, cfg.construction_n, &cfg.kerr, &cfg.perpendicular)?.w0;
    let state = ck.state;
    let grid = GridSpec::periodic_box([n; 3])?;
    create_dir(out_dir)?;
    let spectrum_path = out_dir.join(format!("spectrum_{quantity}_{n}.txt"));
    let (spectrum, conserved) = match quantity {
        ResampleQuantity::Tracer => {
            let f = quantity_eval(&state, &w0, SliceQuantity::Tracer);
            let phi: Vec<f64> = {
                use rayon::prelude::*;
                (0..grid.len()).into_par_iter().map(|i| f(grid.node_at(i))).collect()
            };
            if save_samples {
                io::save_f64s(&out_dir.join(format!("tracer_{n}.f64")), &phi)?;
            }
            let hat = crate::spectral::Fft3::cached(grid.dims).forward_real(&phi);
            (crate::spectral::isotropic_spectrum_of(&grid, &[&hat]), None)
        }
        ResampleQuantity::Vorticity | ResampleQuantity::Velocity => {
            let w = sample_vorticity(&state.stack, &state.current, &|y| w0.eval(y), grid, &SamplingConfig::default())?;
            if save_samples && quantity == ResampleQuantity::Vorticity {
                for (c, comp) in w.iter().enumerate() {
                    io::save_f64s(&out_dir.join(format!("w{}_{n}.f64", ["x", "y", "z"][c])), comp)?;
                }
            }
            let (q, spectra) = conserved_from_samples(&grid, w)?;
            let s = if quantity == ResampleQuantity::Vorticity {
                spectra.enstrophy
            } else {
                spectra.energy
            };
            (s, Some(q))
        }
    };
    write_spectrum(&spectrum_path, &spectrum)?;
    Ok(ResampleReport {
        grid,
        t: state.t(cfg.dt),
        spectrum,
        conserved,
        spectrum_path,
    })
}
