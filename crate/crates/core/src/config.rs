//! Run configuration: an INI-style `key = value` file with sections.
//!
//! Keys before the first section header belong to `[run]`. Values may be
//! fractions (`1/50`) and grids may be written `64x48x32` or `64`. Every
//! key is optional; defaults follow the chosen scenario.
//!
//! ```text
//! scenario = kerr
//! [grids]
//! map = 64x48x32
//! sample = 96x72x48
//! [time]
//! dt = 1/50
//! t_final = 17
//! [solver]
//! trunc_radius = 32
//! det_tol = 1e-3
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::diagnostics::{SliceQuantity, SliceRequest};
use crate::epsdiff::DEFAULT_EPS;
use crate::error::{Error, Result};
use crate::fluid::{SamplingConfig, SamplingMode};
use crate::scenarios::{KerrParams, PerpendicularParams, ScenarioKind};

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Grid `M` of the characteristic map.
    pub map_dims: [usize; 3],
    /// Grid `V` for vorticity sampling and velocity.
    pub sample_dims: [usize; 3],
    /// Grid for diagnostics and spectra.
    pub diag_dims: [usize; 3],
    /// Construction grid of the gridded initial conditions.
    pub construction_n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub trunc_radius: f64,
    pub det_tol: f64,
    pub eps: f64,
    pub sampling: SamplingConfig,
    /// Time between diagnostics rows.
    pub cadence: f64,
    pub output_dir: PathBuf,
    pub write_spectra: bool,
    /// Persist the stack at every diagnostics row.
    pub checkpoint: bool,
    /// Extra cubic grids on which `|w|` spectra are written at the end.
    pub oversample: Vec<usize>,
    pub slices: Vec<SliceRequest>,
    pub kerr: KerrParams,
    pub perpendicular: PerpendicularParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::for_scenario(ScenarioKind::Abc)
    }
}

impl RunConfig {
    /// Scenario defaults for every field.
    pub fn for_scenario(kind: ScenarioKind) -> Self {
        let d = kind.defaults();
        let mut cfg = RunConfig {
            scenario: kind,
            map_dims: d.map_dims,
            sample_dims: d.sample_dims,
            diag_dims: [0; 3],
            construction_n: 128,
            dt: d.dt,
            t_final: d.t_final,
            trunc_radius: d.trunc_radius,
            det_tol: d.det_tol,
            eps: DEFAULT_EPS,
            sampling: if d.mollified {
                SamplingConfig::mollified()
            } else {
                SamplingConfig::default()
            },
            cadence: 1.0,
            output_dir: PathBuf::from("out"),
            write_spectra: true,
            checkpoint: true,
            oversample: Vec::new(),
            slices: Vec::new(),
            kerr: KerrParams::default(),
            perpendicular: PerpendicularParams::default(),
        };
        cfg.diag_dims = cfg.default_diag_dims();
        cfg
    }

    /// Twice the larger of the map and sampling grids, per axis.
    pub fn default_diag_dims(&self) -> [usize; 3] {
        std::array::from_fn(|a| 2 * self.map_dims[a].max(self.sample_dims[a]))
    }

    /// Number of steps to reach `t_final`.
    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    /// Steps between diagnostics rows.
    pub fn cadence_steps(&self) -> usize {
        ((self.cadence / self.dt).round() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("invariant dt > 0 violated: dt = {}", self.dt));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return bad(format!("invariant t_final ≥ 0 violated: t_final = {}", self.t_final));
        }
        if !(self.det_tol > 0.0) {
            return bad(format!("invariant det_tol > 0 violated: det_tol = {}", self.det_tol));
        }
        if !(self.eps > 0.0) {
            return bad(format!("invariant eps > 0 violated: eps = {}", self.eps));
        }
        if !(self.trunc_radius > 0.0) {
            return bad(format!("invariant trunc_radius > 0 violated: {}", self.trunc_radius));
        }
        if !(self.cadence > 0.0) {
            return bad(format!("invariant cadence > 0 violated: {}", self.cadence));
        }
        for (name, d) in [("map", self.map_dims), ("sample", self.sample_dims), ("diag", self.diag_dims)] {
            if d.iter().any(|&n| n < 8) {
                return bad(format!("invariant dims ≥ 8 violated: {name} grid {}x{}x{}", d[0], d[1], d[2]));
            }
        }
        if self.construction_n < 8 {
            return bad(format!("invariant construction grid ≥ 8 violated: {}", self.construction_n));
        }
        if let Some(&n) = self.oversample.iter().find(|&&n| n < 8) {
            return bad(format!("invariant oversample grid ≥ 8 violated: {n}"));
        }
        let v = crate::grid::GridSpec::periodic_box(self.sample_dims)?;
        self.sampling.validate(&v)?;
        let domain = crate::grid::GridSpec::periodic_box(self.map_dims)?;
        for s in &self.slices {
            s.validate(&domain)?;
        }
        Ok(())
    }

    /// The configuration as parseable text, for run manifests.
    pub fn to_ini(&self) -> String {
        let dims = |d: [usize; 3]| format!("{}x{}x{}", d[0], d[1], d[2]);
        let mut s = String::new();
        let mut w = |line: String| {
            s.push_str(&line);
            s.push('\n');
        };
        w(format!("scenario = {}", self.scenario));
        w("[grids]".into());
        w(format!("map = {}", dims(self.map_dims)));
        w(format!("sample = {}", dims(self.sample_dims)));
        w(format!("diag = {}", dims(self.diag_dims)));
        w(format!("construction = {}", self.construction_n));
        w("[time]".into());
        w(format!("dt = {:?}", self.dt));
        w(format!("t_final = {:?}", self.t_final));
        w("[solver]".into());
        w(format!("trunc_radius = {:?}", self.trunc_radius));
        w(format!("det_tol = {:?}", self.det_tol));
        w(format!("eps = {:?}", self.eps));
        let sc = &self.sampling;
        w("[sampling]".into());
        w(format!(
            "mode = {}",
            match sc.mode {
                SamplingMode::Direct => "direct",
                SamplingMode::MollifiedAdaptive => "mollified",
            }
        ));
        if let Some(h) = sc.half_width {
            w(format!("half_width = {h:?}"));
        }
        w(format!("min_samples = {}", sc.min_samples));
        w(format!("max_samples = {}", sc.max_samples));
        w(format!("cap = {}", sc.cap));
        w(format!("range_tol = {:?}", sc.range_tol));
        w(format!("tv_tol = {:?}", sc.tv_tol));
        w("[output]".into());
        w(format!("dir = {}", self.output_dir.display()));
        w(format!("cadence = {:?}", self.cadence));
        w(format!("spectra = {}", self.write_spectra));
        w(format!("checkpoint = {}", self.checkpoint));
        if !self.oversample.is_empty() {
            let list: Vec<String> = self.oversample.iter().map(|n| n.to_string()).collect();
            w(format!("oversample = {}", list.join(", ")));
        }
        let k = &self.kerr;
        w("[kerr]".into());
        for (name, v) in [
            ("radius", k.radius),
            ("dy1", k.dy1),
            ("dy2", k.dy2),
            ("dx", k.dx),
            ("dz", k.dz),
            ("x0", k.x0),
            ("z0", k.z0),
            ("lx", k.lx),
            ("ly", k.ly),
            ("lz", k.lz),
            ("amplitude", k.amplitude),
        ] {
            w(format!("{name} = {v:?}"));
        }
        let p = &self.perpendicular;
        w("[perpendicular]".into());
        for (name, v) in [
            ("radius", p.radius),
            ("x0", p.x0),
            ("z0", p.z0),
            ("shear_amp", p.shear_amp),
            ("shear_freq", p.shear_freq),
            ("offset", p.offset),
            ("amplitude", p.amplitude),
        ] {
            w(format!("{name} = {v:?}"));
        }
        for sl in &self.slices {
            w("[slice]".into());
            w(format!("axis = {}", sl.axis));
            w(format!("offset = {:?}", sl.offset));
            w(format!("center = {:?}, {:?}", sl.center[0], sl.center[1]));
            w(format!("half_widths = {:?}, {:?}", sl.half_widths[0], sl.half_widths[1]));
            w(format!("resolution = {}x{}", sl.resolution[0], sl.resolution[1]));
            w(format!("quantity = {}", sl.quantity));
        }
        s
    }
}

/// One `key = value` entry with its line number.
struct Entry {
    line: usize,
    key: String,
    value: String,
}

/// Sections in file order; `slice` may repeat.
fn tokenize(text: &str) -> Result<Vec<(String, Vec<Entry>)>> {
    // keys before any header belong to [run]
    let mut sections: Vec<(String, Vec<Entry>)> = vec![("run".into(), Vec::new())];
    let mut headers: Vec<String> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                msg: format!("unterminated section header: {s}"),
            })?;
            let name = name.trim().to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown section [{name}]"),
                });
            }
            if name != "slice" && headers.contains(&name) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate section [{name}]"),
                });
            }
            headers.push(name.clone());
            sections.push((name, Vec::new()));
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected key = value, got: {s}"),
        })?;
        sections.last_mut().unwrap().1.push(Entry {
            line,
            key: k.trim().to_string(),
            value: v.trim().to_string(),
        });
    }
    Ok(sections)
}

const SECTIONS: [&str; 9] = ["run", "grids", "time", "solver", "sampling", "output", "kerr", "perpendicular", "slice"];

fn parse_err(e: &Entry, what: &str) -> Error {
    Error::Parse {
        line: e.line,
        msg: format!("{}: expected {what}, got '{}'", e.key, e.value),
    }
}

/// A real number or a fraction `a/b`.
pub fn parse_real(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b) = (a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?);
            (b != 0.0).then_some(a / b)
        }
        None => s.trim().parse().ok(),
    }
}

/// `N` or `NxMxK`.
pub fn parse_dims(s: &str) -> Option<[usize; 3]> {
    let parts: Vec<usize> = s.split(['x', 'X', '×']).map(|p| p.trim().parse().ok()).collect::<Option<_>>()?;
    match parts.as_slice() {
        [n] => Some([*n; 3]),
        [a, b, c] => Some([*a, *b, *c]),
        _ => None,
    }
}

fn real(e: &Entry) -> Result<f64> {
    parse_real(&e.value).ok_or_else(|| parse_err(e, "a number or fraction"))
}

fn uint(e: &Entry) -> Result<usize> {
    e.value.parse().map_err(|_| parse_err(e, "a non-negative integer"))
}

fn boolean(e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(parse_err(e, "true or false")),
    }
}

fn pair(e: &Entry) -> Result<[f64; 2]> {
    let v: Vec<f64> = e.value.split(',').map(parse_real).collect::<Option<_>>().ok_or_else(|| parse_err(e, "two numbers"))?;
    match v.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(parse_err(e, "two comma-separated numbers")),
    }
}

fn unknown(section: &str, e: &Entry) -> Error {
    Error::Parse {
        line: e.line,
        msg: format!("unknown key '{}' in [{section}]", e.key),
    }
}

/// Parse and validate a configuration file.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let sections = tokenize(text)?;
    // the scenario picks the defaults, so find it first
    let mut kind = ScenarioKind::Abc;
    for e in sections.iter().filter(|(n, _)| n == "run").flat_map(|(_, es)| es) {
        if e.key == "scenario" {
            kind = e.value.parse().map_err(|err: Error| Error::Parse {
                line: e.line,
                msg: err.to_string(),
            })?;
        }
    }
    let mut cfg = RunConfig::for_scenario(kind);
    let mut diag_set = false;
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (section, entries) in &sections {
        let mut slice = SliceRequest {
            axis: 2,
            offset: 0.0,
            center: [0.0, 0.0],
            half_widths: [std::f64::consts::PI; 2],
            resolution: [512, 512],
            quantity: SliceQuantity::VorticityMagnitude,
        };
        for e in entries {
            if section != "slice" {
                if let Some(first) = seen.insert((section.clone(), e.key.clone()), e.line) {
                    return Err(Error::Parse {
                        line: e.line,
                        msg: format!("duplicate key '{}' (first set on line {first})", e.key),
                    });
                }
            }
            let sc = &mut cfg.sampling;
            match (section.as_str(), e.key.as_str()) {
                ("run", "scenario") => {}
                ("grids", "map") => cfg.map_dims = parse_dims(&e.value).ok_or_else(|| parse_err(e, "N or NxMxK"))?,
                ("grids", "sample") => cfg.sample_dims = parse_dims(&e.value).ok_or_else(|| parse_err(e, "N or NxMxK"))?,
                ("grids", "diag") => {
                    cfg.diag_dims = parse_dims(&e.value).ok_or_else(|| parse_err(e, "N or NxMxK"))?;
                    diag_set = true;
                }
                ("grids", "construction") => cfg.construction_n = uint(e)?,
                ("time", "dt") => cfg.dt = real(e)?,
                ("time", "t_final") => cfg.t_final = real(e)?,
                ("solver", "trunc_radius") => cfg.trunc_radius = real(e)?,
                ("solver", "det_tol") => cfg.det_tol = real(e)?,
                ("solver", "eps") => cfg.eps = real(e)?,
                ("sampling", "mode") => {
                    sc.mode = match e.value.as_str() {
                        "direct" => SamplingMode::Direct,
                        "mollified" => SamplingMode::MollifiedAdaptive,
                        _ => return Err(parse_err(e, "direct or mollified")),
                    }
                }
                ("sampling", "half_width") => sc.half_width = Some(real(e)?),
                ("sampling", "min_samples") => sc.min_samples = uint(e)?,
                ("sampling", "max_samples") => sc.max_samples = uint(e)?,
                ("sampling", "cap") => sc.cap = uint(e)?,
                ("sampling", "range_tol") => sc.range_tol = real(e)?,
                ("sampling", "tv_tol") => sc.tv_tol = real(e)?,
                ("output", "dir") => cfg.output_dir = PathBuf::from(&e.value),
                ("output", "cadence") => cfg.cadence = real(e)?,
                ("output", "spectra") => cfg.write_spectra = boolean(e)?,
                ("output", "checkpoint") => cfg.checkpoint = boolean(e)?,
                ("output", "oversample") => {
                    cfg.oversample = e
                        .value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(|s| s.trim().parse().ok())
                        .collect::<Option<_>>()
                        .ok_or_else(|| parse_err(e, "a comma-separated list of grid sizes"))?
                }
                ("kerr", key) => {
                    let k = &mut cfg.kerr;
                    let slot = match key {
                        "radius" => &mut k.radius,
                        "dy1" => &mut k.dy1,
                        "dy2" => &mut k.dy2,
                        "dx" => &mut k.dx,
                        "dz" => &mut k.dz,
                        "x0" => &mut k.x0,
                        "z0" => &mut k.z0,
                        "lx" => &mut k.lx,
                        "ly" => &mut k.ly,
                        "lz" => &mut k.lz,
                        "amplitude" => &mut k.amplitude,
                        _ => return Err(unknown(section, e)),
                    };
                    *slot = real(e)?;
                }
                ("perpendicular", key) => {
                    let p = &mut cfg.perpendicular;
                    let slot = match key {
                        "radius" => &mut p.radius,
                        "x0" => &mut p.x0,
                        "z0" => &mut p.z0,
                        "shear_amp" => &mut p.shear_amp,
                        "shear_freq" => &mut p.shear_freq,
                        "offset" => &mut p.offset,
                        "amplitude" => &mut p.amplitude,
                        _ => return Err(unknown(section, e)),
                    };
                    *slot = real(e)?;
                }
                ("slice", "axis") => slice.axis = uint(e)?,
                ("slice", "offset") => slice.offset = real(e)?,
                ("slice", "center") => slice.center = pair(e)?,
                ("slice", "half_widths") => slice.half_widths = pair(e)?,
                ("slice", "resolution") => {
                    let v: Vec<usize> = e
                        .value
                        .split(['x', 'X'])
                        .map(|p| p.trim().parse().ok())
                        .collect::<Option<_>>()
                        .ok_or_else(|| parse_err(e, "WxH"))?;
                    slice.resolution = match v.as_slice() {
                        [n] => [*n, *n],
                        [a, b] => [*a, *b],
                        _ => return Err(parse_err(e, "WxH")),
                    };
                }
                ("slice", "quantity") => {
                    slice.quantity = e.value.parse().map_err(|err: Error| Error::Parse {
                        line: e.line,
                        msg: err.to_string(),
                    })?
                }
                _ => return Err(unknown(section, e)),
            }
        }
        if section == "slice" {
            cfg.slices.push(slice);
        }
    }
    if !diag_set {
        cfg.diag_dims = cfg.default_diag_dims();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Read and parse a configuration file.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_is_abc_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.scenario, ScenarioKind::Abc);
        assert_eq!(c.diag_dims, [64; 3]);
        assert_eq!(parse_config("# only a comment\n\n").unwrap(), c);
    }

    #[test]
    fn full_kerr_block() {
        let text = "scenario = kerr\n[grids]\nmap = 64x48x32\nsample = 96x72x48\n[time]\ndt = 1/50\nt_final = 17\n[solver]\ntrunc_radius = 32\ndet_tol = 1e-3\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.scenario, ScenarioKind::Kerr);
        assert_eq!(c.map_dims, [64, 48, 32]);
        assert_eq!(c.sample_dims, [96, 72, 48]);
        assert_eq!(c.dt, 0.02);
        assert_eq!(c.t_final, 17.0);
        assert_eq!(c.trunc_radius, 32.0);
        assert_eq!(c.det_tol, 1e-3);
        assert_eq!(c.diag_dims, [192, 144, 96]);
        assert_eq!(c.n_steps(), 850);
        assert_eq!(c.cadence_steps(), 50);
    }

    #[test]
    fn explicit_run_header() {
        let c = parse_config("[run]\nscenario = taylor_green\n[time]\ndt = 1/4\n").unwrap();
        assert_eq!(c.scenario, ScenarioKind::TaylorGreen);
        assert!(parse_config("[run]\n[run]\n").is_err());
        let err = parse_config("scenario = abc\n[run]\nscenario = kerr\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn negative_dt_names_invariant() {
        let err = parse_config("[time]\ndt = -0.1\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("dt > 0")), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_bad_input_with_line_numbers() {
        let cases = [
            ("[time]\n\nfoo = 1\n", 3),
            ("[nosuch]\n", 1),
            ("[time]\ndt = abc\n", 2),
            ("scenario = vortex\n", 1),
            ("[grids]\nmap = 8x8\n", 2),
            ("[time\n", 1),
            ("just text\n", 1),
            ("[time]\ndt = 1\ndt = 2\n", 3),
            ("[time]\n[time]\n", 2),
        ];
        for (text, line) in cases {
            match parse_config(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn invariants() {
        for text in [
            "[grids]\nmap = 4\n",
            "[solver]\ndet_tol = 0\n",
            "[solver]\neps = -1\n",
            "[time]\nt_final = -1\n",
            "[output]\ncadence = 0\n",
        ] {
            assert!(matches!(parse_config(text), Err(Error::Config(_))), "{text}");
        }
        let c = parse_config("[time]\nt_final = 0\n").unwrap();
        assert_eq!(c.n_steps(), 0);
    }

    #[test]
    fn sections_and_slices() {
        let text = "scenario = perpendicular\n[sampling]\nmode = direct\n[output]\ndir = /tmp/x\noversample = 128, 256\nspectra = no\n\
                    [slice]\naxis = 1\nresolution = 64x32\nquantity = tracer\ncenter = 0.5, -1\nhalf_widths = 1, 1/2\n[slice]\nquantity = wz\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.sampling.mode, SamplingMode::Direct);
        assert_eq!(c.oversample, vec![128, 256]);
        assert!(!c.write_spectra);
        assert_eq!(c.slices.len(), 2);
        assert_eq!(c.slices[0].axis, 1);
        assert_eq!(c.slices[0].resolution, [64, 32]);
        assert_eq!(c.slices[0].half_widths, [1.0, 0.5]);
        assert_eq!(c.slices[1].quantity, SliceQuantity::Component(2));
        assert_eq!(c.output_dir, PathBuf::from("/tmp/x"));
        // perpendicular defaults to mollified sampling
        assert_eq!(parse_config("scenario = perpendicular").unwrap().sampling.mode, SamplingMode::MollifiedAdaptive);
    }

    #[test]
    fn values() {
        assert_eq!(parse_real("1/50"), Some(0.02));
        assert_eq!(parse_real("2.5e-3"), Some(2.5e-3));
        assert_eq!(parse_real("1/0"), None);
        assert_eq!(parse_dims("64x48x32"), Some([64, 48, 32]));
        assert_eq!(parse_dims("24"), Some([24; 3]));
        assert_eq!(parse_dims("8x8"), None);
    }

    proptest! {
        #[test]
        fn ini_round_trip(
            kind in 0usize..4,
            m in proptest::array::uniform3(8usize..40),
            dt in 0.001..1.0f64,
            tf in 0.0..20.0f64,
            tol in 1e-6..1e-1f64,
            slice in proptest::bool::ANY,
        ) {
            let kinds = [ScenarioKind::Abc, ScenarioKind::TaylorGreen, ScenarioKind::Kerr, ScenarioKind::Perpendicular];
            let mut c = RunConfig::for_scenario(kinds[kind]);
            c.map_dims = m;
            c.dt = dt;
            c.t_final = tf;
            c.det_tol = tol;
            c.oversample = vec![16, 32];
            if slice {
                c.slices.push(SliceRequest {
                    axis: 0,
                    offset: 0.25,
                    center: [0.1, -0.2],
                    half_widths: [1.5, 0.75],
                    resolution: [10, 12],
                    quantity: SliceQuantity::Tracer,
                });
            }
            let back = parse_config(&c.to_ini()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
