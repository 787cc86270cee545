use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::congestion::{CongestionModel, HeavisideKind};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mollifier::MollifierSpec;
use crate::nonlocal::ConvolutionMethod;
use crate::roe::CflMode;
use crate::scheme::{SchemeKind, SweepState};
use crate::velocity::{DiverterParams, Rect};

/// Gaussian bump of total `mass` and standard deviation `width`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
    pub width: f64,
}

impl Bump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let w2 = self.width * self.width;
        let r2 = (x - self.x).powi(2) + (y - self.y).powi(2);
        self.mass / (2.0 * std::f64::consts::PI * w2) * (-r2 / (2.0 * w2)).exp()
    }
}

/// Constant `value` on `[x1, x2] x [y1, y2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub value: f64,
}

impl Patch {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        if x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2 {
            self.value
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSpec {
    pub bumps: Vec<Bump>,
    pub patches: Vec<Patch>,
    pub file: Option<PathBuf>,
    /// Rescale so the peak equals `rho_max`: the pointwise peak of the
    /// generators, or the largest cell value of a file.
    pub normalize: bool,
    pub quad_order: usize,
}

impl Default for InitialSpec {
    fn default() -> Self {
        InitialSpec {
            bumps: Vec::new(),
            patches: Vec::new(),
            file: None,
            normalize: false,
            quad_order: 3,
        }
    }
}

impl InitialSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.bumps.iter().map(|b| b.eval(x, y)).sum::<f64>() + self.patches.iter().map(|p| p.eval(x, y)).sum::<f64>()
    }

    /// Pointwise maximum over `domain`, independent of any grid: a lattice
    /// scan at a quarter of the smallest feature size, then three rounds of
    /// local refinement.
    pub fn peak(&self, domain: Rect) -> f64 {
        let feature = self
            .bumps
            .iter()
            .map(|b| b.width)
            .chain(self.patches.iter().map(|p| (p.x2 - p.x1).min(p.y2 - p.y1)))
            .fold(f64::INFINITY, f64::min);
        if !feature.is_finite() {
            return 0.0;
        }
        let clamp = |x: f64, y: f64| (x.clamp(domain.x0, domain.x1), y.clamp(domain.y0, domain.y1));
        let mut h = feature / 4.0;
        let nx = ((domain.x1 - domain.x0) / h).ceil() as usize;
        let ny = ((domain.y1 - domain.y0) / h).ceil() as usize;
        let mut best = (f64::NEG_INFINITY, domain.x0, domain.y0);
        for j in 0..=ny {
            for i in 0..=nx {
                let (x, y) = clamp(domain.x0 + i as f64 * h, domain.y0 + j as f64 * h);
                let v = self.eval(x, y);
                if v > best.0 {
                    best = (v, x, y);
                }
            }
        }
        for _ in 0..3 {
            let (cx, cy) = (best.1, best.2);
            let step = h / 5.0;
            for b in -5..=5 {
                for a in -5..=5 {
                    let (x, y) = clamp(cx + a as f64 * step, cy + b as f64 * step);
                    let v = self.eval(x, y);
                    if v > best.0 {
                        best = (v, x, y);
                    }
                }
            }
            h = step;
        }
        best.0.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Uniform { v1: f64, v2: f64 },
    Diverter(DiverterParams),
    File { v1: PathBuf, v2: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsToggles {
    pub bounds: bool,
    pub entropy: bool,
    pub kappas: Vec<f64>,
    pub appendix: bool,
    pub snapshots: bool,
}

impl Default for DiagnosticsToggles {
    fn default() -> Self {
        DiagnosticsToggles {
            bounds: true,
            entropy: false,
            kappas: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            appendix: false,
            snapshots: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: Rect,
    pub dx: f64,
    pub dy: f64,
    pub scheme: SchemeKind,
    pub epsilon: f64,
    pub heaviside: HeavisideKind,
    pub rho_max: f64,
    pub sigma: f64,
    pub truncation_radius: Option<f64>,
    pub convolution: ConvolutionMethod,
    pub field: FieldSpec,
    pub norm_samples: usize,
    pub initial: InitialSpec,
    pub t_end: f64,
    pub output_every: f64,
    pub cfl_mode: CflMode,
    pub cfl_safety: f64,
    pub y_sweep: SweepState,
    pub lxf_alpha: Option<f64>,
    pub lxf_beta: Option<f64>,
    /// Abscissa bounding the upstream region of the outflow functional.
    pub x_d: Option<f64>,
    pub diagnostics: DiagnosticsToggles,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            domain: Rect { x0: 0.0, y0: 0.0, x1: 0.64, y1: 0.64 },
            dx: 0.01,
            dy: 0.01,
            scheme: SchemeKind::Roe,
            epsilon: 0.83,
            heaviside: HeavisideKind::Atan { slope: 50.0 },
            rho_max: 1.0,
            sigma: 1e4,
            truncation_radius: None,
            convolution: ConvolutionMethod::Separable,
            field: FieldSpec::Uniform { v1: 0.42, v2: 0.0 },
            norm_samples: 40_000,
            initial: InitialSpec::default(),
            t_end: 1.0,
            output_every: 0.05,
            cfl_mode: CflMode::Bv,
            cfl_safety: 1.0,
            y_sweep: SweepState::Previous,
            lxf_alpha: None,
            lxf_beta: None,
            x_d: None,
            diagnostics: DiagnosticsToggles::default(),
            out_dir: None,
        }
    }
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        location: format!("{origin}:{line}"),
        message: message.into(),
    }
}

fn numbers(origin: &str, line: usize, key: &str, value: &str, n: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = value
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(origin, line, format!("{key}: '{t}' is not a number"))))
        .collect::<Result<_>>()?;
    if v.len() != n {
        return Err(parse_err(origin, line, format!("{key} expects {n} numbers, got {}", v.len())));
    }
    if let Some(x) = v.iter().find(|x| !x.is_finite()) {
        return Err(parse_err(origin, line, format!("{key}: {x} is not finite")));
    }
    Ok(v)
}

fn boolean(origin: &str, line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(parse_err(origin, line, format!("{key} expects true or false, got '{value}'"))),
    }
}

#[derive(Default)]
struct FieldKeys {
    preset: Option<String>,
    v_t: Option<f64>,
    v2: Option<f64>,
    theta_deg: Option<f64>,
    diverter: Option<[f64; 4]>,
    blend_width: Option<f64>,
    file: Option<(PathBuf, PathBuf)>,
}

#[derive(Default)]
struct HeavisideKeys {
    kind: Option<String>,
    slope: Option<f64>,
    d_l: Option<f64>,
    d_r: Option<f64>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses `key = value` lines; relative paths are resolved against `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let mut c = RunConfig::default();
        let mut field = FieldKeys::default();
        let mut hs = HeavisideKeys::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let ln = k + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(a, b)| (a.trim(), b.trim()))
                .ok_or_else(|| parse_err(origin, ln, format!("expected 'key = value', got '{line}'")))?;
            if value.is_empty() {
                return Err(parse_err(origin, ln, format!("{key} has no value")));
            }
            let repeatable = key == "initial.bump" || key == "initial.patch";
            if !repeatable {
                if let Some(prev) = seen.insert(key.to_string(), ln) {
                    return Err(parse_err(origin, ln, format!("{key} already set on line {prev}")));
                }
            }
            let num = |n: usize| numbers(origin, ln, key, value, n);
            let one = || num(1).map(|v| v[0]);
            let path = |s: &str| {
                let p = PathBuf::from(s);
                if p.is_absolute() {
                    p
                } else {
                    base.join(p)
                }
            };
            match key {
                "domain" => {
                    let v = num(4)?;
                    c.domain = Rect { x0: v[0], y0: v[1], x1: v[2], y1: v[3] };
                }
                "grid.dx" => c.dx = one()?,
                "grid.dy" => c.dy = one()?,
                "scheme" => c.scheme = SchemeKind::parse(value)?,
                "epsilon" => c.epsilon = one()?,
                "rho_max" => c.rho_max = one()?,
                "heaviside.kind" => hs.kind = Some(value.to_string()),
                "heaviside.slope" => hs.slope = Some(one()?),
                "heaviside.d_l" => hs.d_l = Some(one()?),
                "heaviside.d_r" => hs.d_r = Some(one()?),
                "mollifier.sigma" => c.sigma = one()?,
                "mollifier.truncation_radius" => c.truncation_radius = Some(one()?),
                "convolution" => {
                    c.convolution = match value {
                        "direct" => ConvolutionMethod::Direct,
                        "separable" => ConvolutionMethod::Separable,
                        _ => return Err(parse_err(origin, ln, "convolution must be 'direct' or 'separable'")),
                    }
                }
                "field.preset" => field.preset = Some(value.to_string()),
                "field.v_T" => field.v_t = Some(one()?),
                "field.v2" => field.v2 = Some(one()?),
                "field.theta_deg" => field.theta_deg = Some(one()?),
                "field.diverter" => {
                    let v = num(4)?;
                    field.diverter = Some([v[0], v[1], v[2], v[3]]);
                }
                "field.blend_width" => field.blend_width = Some(one()?),
                "field.file" => {
                    let parts: Vec<&str> = value.split_whitespace().collect();
                    if parts.len() != 2 {
                        return Err(parse_err(origin, ln, "field.file expects two snapshot paths, v1 then v2"));
                    }
                    field.file = Some((path(parts[0]), path(parts[1])));
                }
                "field.samples" => c.norm_samples = one()? as usize,
                "initial.bump" => {
                    let v = num(4)?;
                    c.initial.bumps.push(Bump { x: v[0], y: v[1], mass: v[2], width: v[3] });
                }
                "initial.patch" => {
                    let v = num(5)?;
                    c.initial.patches.push(Patch { x1: v[0], y1: v[1], x2: v[2], y2: v[3], value: v[4] });
                }
                "initial.file" => c.initial.file = Some(path(value)),
                "initial.normalize" | "normalize" => c.initial.normalize = boolean(origin, ln, key, value)?,
                "initial.quad_order" => c.initial.quad_order = one()? as usize,
                "t_end" => c.t_end = one()?,
                "output_every" => c.output_every = one()?,
                "cfl_mode" => c.cfl_mode = CflMode::parse(value)?,
                "cfl_safety" => c.cfl_safety = one()?,
                "y_sweep_state" => c.y_sweep = SweepState::parse(value)?,
                "lxf.alpha" => c.lxf_alpha = Some(one()?),
                "lxf.beta" => c.lxf_beta = Some(one()?),
                "outflow.x_d" => c.x_d = Some(one()?),
                "diagnostics.bounds" => c.diagnostics.bounds = boolean(origin, ln, key, value)?,
                "diagnostics.entropy" => c.diagnostics.entropy = boolean(origin, ln, key, value)?,
                "diagnostics.kappas" => {
                    let n = value.split_whitespace().count();
                    c.diagnostics.kappas = num(n)?;
                }
                "diagnostics.appendix" => c.diagnostics.appendix = boolean(origin, ln, key, value)?,
                "diagnostics.snapshots" => c.diagnostics.snapshots = boolean(origin, ln, key, value)?,
                "output.dir" => c.out_dir = Some(path(value)),
                _ => return Err(parse_err(origin, ln, format!("unknown key '{key}'"))),
            }
        }
        c.heaviside = resolve_heaviside(hs)?;
        c.field = resolve_field(field)?;
        if !seen.contains_key("grid.dy") {
            c.dy = c.dx;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let Rect { x0, y0, x1, y1 } = self.domain;
        if !(x1 > x0 && y1 > y0) {
            return Err(Error::Config(format!("domain {x0} {y0} {x1} {y1} is empty")));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.output_every > 0.0) {
            return Err(Error::Config(format!("output_every must be positive, got {}", self.output_every)));
        }
        if !(1..=3).contains(&self.initial.quad_order) {
            return Err(Error::Config(format!("initial.quad_order must be 1, 2 or 3, got {}", self.initial.quad_order)));
        }
        if self.norm_samples < 10_000 {
            return Err(Error::Config(format!("field.samples must be at least 10000, got {}", self.norm_samples)));
        }
        for b in &self.initial.bumps {
            if !(b.mass >= 0.0 && b.width > 0.0) {
                return Err(Error::Config(format!("bump needs mass >= 0 and width > 0, got {} {}", b.mass, b.width)));
            }
        }
        for p in &self.initial.patches {
            if !(p.value >= 0.0 && p.x2 > p.x1 && p.y2 > p.y1) {
                return Err(Error::Config("patch needs x1 < x2, y1 < y2 and value >= 0".into()));
            }
        }
        if let Some(f) = &self.initial.file {
            if !(self.initial.bumps.is_empty() && self.initial.patches.is_empty()) {
                return Err(Error::Config("initial.file cannot be combined with bumps or patches".into()));
            }
            if !f.exists() {
                return Err(Error::Config(format!("initial.file {} does not exist", f.display())));
            }
        }
        if let FieldSpec::File { v1, v2 } = &self.field {
            for p in [v1, v2] {
                if !p.exists() {
                    return Err(Error::Config(format!("field.file {} does not exist", p.display())));
                }
            }
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Config(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        self.grid()?;
        self.model()?;
        self.mollifier()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let Rect { x0, y0, x1, y1 } = self.domain;
        let nx = ((x1 - x0) / self.dx).round();
        let ny = ((y1 - y0) / self.dy).round();
        if !(nx >= 1.0 && ny >= 1.0) {
            return Err(Error::Config(format!("grid spacing {} x {} is too coarse for the domain", self.dx, self.dy)));
        }
        if ((nx * self.dx) - (x1 - x0)).abs() > 1e-9 * (x1 - x0) || ((ny * self.dy) - (y1 - y0)).abs() > 1e-9 * (y1 - y0) {
            return Err(Error::Config(format!(
                "grid spacing {} x {} does not divide the domain {} x {}",
                self.dx,
                self.dy,
                x1 - x0,
                y1 - y0
            )));
        }
        Grid::new(nx as usize, ny as usize, self.dx, self.dy, x0, y0)
    }

    pub fn model(&self) -> Result<CongestionModel> {
        CongestionModel::new(self.heaviside, self.rho_max)
    }

    pub fn mollifier(&self) -> Result<MollifierSpec> {
        match self.truncation_radius {
            Some(r) => MollifierSpec::with_radius(self.sigma, r),
            None => MollifierSpec::new(self.sigma),
        }
    }

    /// Outflow abscissa: explicit, else the diverter tip, else mid-domain.
    pub fn outflow_x(&self) -> f64 {
        match (self.x_d, &self.field) {
            (Some(x), _) => x,
            (None, FieldSpec::Diverter(p)) => p.tip.0,
            _ => 0.5 * (self.domain.x0 + self.domain.x1),
        }
    }

    /// Canonical `key = value` rendering; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let Rect { x0, y0, x1, y1 } = self.domain;
        let _ = writeln!(s, "domain = {x0:e} {y0:e} {x1:e} {y1:e}");
        let _ = writeln!(s, "grid.dx = {:e}", self.dx);
        let _ = writeln!(s, "grid.dy = {:e}", self.dy);
        let _ = writeln!(s, "scheme = {}", self.scheme.as_str());
        let _ = writeln!(s, "epsilon = {:e}", self.epsilon);
        let _ = writeln!(s, "rho_max = {:e}", self.rho_max);
        match self.heaviside {
            HeavisideKind::Atan { slope } => {
                let _ = writeln!(s, "heaviside.kind = atan\nheaviside.slope = {slope:e}");
            }
            HeavisideKind::Spline { d_l, d_r } => {
                let _ = writeln!(s, "heaviside.kind = spline\nheaviside.d_l = {d_l:e}\nheaviside.d_r = {d_r:e}");
            }
            HeavisideKind::One => {
                let _ = writeln!(s, "heaviside.kind = one");
            }
        }
        let _ = writeln!(s, "mollifier.sigma = {:e}", self.sigma);
        if let Some(r) = self.truncation_radius {
            let _ = writeln!(s, "mollifier.truncation_radius = {r:e}");
        }
        let conv = match self.convolution {
            ConvolutionMethod::Direct => "direct",
            ConvolutionMethod::Separable => "separable",
        };
        let _ = writeln!(s, "convolution = {conv}");
        match &self.field {
            FieldSpec::Uniform { v1, v2 } => {
                let _ = writeln!(s, "field.preset = uniform\nfield.v_T = {v1:e}\nfield.v2 = {v2:e}");
            }
            FieldSpec::Diverter(p) => {
                let _ = writeln!(
                    s,
                    "field.preset = conveyor_diverter\nfield.v_T = {:e}\nfield.diverter = {:e} {:e} {:e} {:e}\nfield.blend_width = {:e}",
                    p.v_t, p.start.0, p.start.1, p.tip.0, p.tip.1, p.blend_width
                );
            }
            FieldSpec::File { v1, v2 } => {
                let _ = writeln!(s, "field.preset = file\nfield.file = {} {}", v1.display(), v2.display());
            }
        }
        let _ = writeln!(s, "field.samples = {}", self.norm_samples);
        for b in &self.initial.bumps {
            let _ = writeln!(s, "initial.bump = {:e} {:e} {:e} {:e}", b.x, b.y, b.mass, b.width);
        }
        for p in &self.initial.patches {
            let _ = writeln!(s, "initial.patch = {:e} {:e} {:e} {:e} {:e}", p.x1, p.y1, p.x2, p.y2, p.value);
        }
        if let Some(f) = &self.initial.file {
            let _ = writeln!(s, "initial.file = {}", f.display());
        }
        let _ = writeln!(s, "initial.normalize = {}", self.initial.normalize);
        let _ = writeln!(s, "initial.quad_order = {}", self.initial.quad_order);
        let _ = writeln!(s, "t_end = {:e}", self.t_end);
        let _ = writeln!(s, "output_every = {:e}", self.output_every);
        let _ = writeln!(s, "cfl_mode = {}", self.cfl_mode.as_str());
        let _ = writeln!(s, "cfl_safety = {:e}", self.cfl_safety);
        let _ = writeln!(s, "y_sweep_state = {}", self.y_sweep.as_str());
        if let Some(a) = self.lxf_alpha {
            let _ = writeln!(s, "lxf.alpha = {a:e}");
        }
        if let Some(b) = self.lxf_beta {
            let _ = writeln!(s, "lxf.beta = {b:e}");
        }
        if let Some(x) = self.x_d {
            let _ = writeln!(s, "outflow.x_d = {x:e}");
        }
        let d = &self.diagnostics;
        let kappas: Vec<String> = d.kappas.iter().map(|k| format!("{k:e}")).collect();
        let _ = writeln!(s, "diagnostics.bounds = {}", d.bounds);
        let _ = writeln!(s, "diagnostics.entropy = {}", d.entropy);
        let _ = writeln!(s, "diagnostics.kappas = {}", kappas.join(" "));
        let _ = writeln!(s, "diagnostics.appendix = {}", d.appendix);
        let _ = writeln!(s, "diagnostics.snapshots = {}", d.snapshots);
        if let Some(o) = &self.out_dir {
            let _ = writeln!(s, "output.dir = {}", o.display());
        }
        s
    }
}

fn resolve_heaviside(k: HeavisideKeys) -> Result<HeavisideKind> {
    match k.kind.as_deref().unwrap_or("atan") {
        "atan" => Ok(HeavisideKind::Atan { slope: k.slope.unwrap_or(50.0) }),
        "spline" | "poly" => Ok(HeavisideKind::Spline {
            d_l: k.d_l.unwrap_or(0.5),
            d_r: k.d_r.unwrap_or(1.6),
        }),
        "one" => Ok(HeavisideKind::One),
        other => Err(Error::Config(format!("heaviside.kind must be atan, spline or one, got '{other}'"))),
    }
}

fn resolve_field(k: FieldKeys) -> Result<FieldSpec> {
    let v_t = k.v_t.unwrap_or(0.42);
    match k.preset.as_deref().unwrap_or("uniform") {
        "uniform" => Ok(FieldSpec::Uniform { v1: v_t, v2: k.v2.unwrap_or(0.0) }),
        "conveyor_diverter" => {
            let d = k
                .diverter
                .ok_or_else(|| Error::Config("field.diverter = x1 y1 x2 y2 is required for conveyor_diverter".into()))?;
            let p = DiverterParams {
                v_t,
                start: (d[0], d[1]),
                tip: (d[2], d[3]),
                blend_width: k.blend_width.unwrap_or(0.03),
            };
            if let Some(th) = k.theta_deg {
                if (p.theta_deg() - th).abs() > 1e-6 {
                    return Err(Error::Config(format!(
                        "field.theta_deg = {th} disagrees with the diverter segment angle {}",
                        p.theta_deg()
                    )));
                }
            }
            Ok(FieldSpec::Diverter(p))
        }
        "file" => {
            let (v1, v2) = k.file.ok_or_else(|| Error::Config("field.file is required for preset 'file'".into()))?;
            Ok(FieldSpec::File { v1, v2 })
        }
        other => Err(Error::Config(format!(
            "field.preset must be conveyor_diverter, uniform or file, got '{other}'"
        ))),
    }
}
