//! Run configuration: a strict, line-oriented `key = value` format with
//! `[section]` headers. Unknown sections or keys are errors, duplicate
//! keys are errors, and every validation message names the offending key.
//! A loaded config re-serializes to a canonical form that parses back to
//! the identical configuration.

use crate::error::{Error, Result};
use crate::expr::{parse_expr, parse_kernel, Expr};
use crate::model::{Hypothesis, JumpKind, ModelSpec, SamplingPlan};
use crate::sde::SimulationConfig;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub master_seed: u64,
    pub output_dir: String,
    /// 0 = library default thread pool
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointsParams {
    pub deltas: Vec<f64>,
    pub grid_n: usize,
    pub j_max: u32,
    pub delta_max: f64,
    pub covering_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HolderParams {
    pub n_points: usize,
    pub j_lo: u32,
    pub j_hi: u32,
    pub h_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumMode {
    Theory,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumParams {
    pub mode: SpectrumMode,
    pub h_lo: f64,
    pub h_hi: f64,
    pub h_steps: usize,
    pub interval: (f64, f64),
    pub bin_centers: Vec<f64>,
    pub bin_width: f64,
    pub j_max: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentParams {
    pub t0: f64,
    pub alphas: Vec<f64>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandParams {
    pub delta: f64,
    pub eps: f64,
    pub m_values: Vec<u32>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    pub f: Expr,
    pub t_values: Vec<f64>,
    pub n_paths: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub sim: SimulationConfig,
    pub run: RunSection,
    pub points: PointsParams,
    pub holder: HolderParams,
    pub spectrum: SpectrumParams,
    pub tangent: TangentParams,
    pub band: BandParams,
    pub generator: GeneratorParams,
    pub admissible: SamplingPlan,
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

struct RawConfig {
    values: HashMap<(String, String), (String, usize)>,
}

impl RawConfig {
    fn take(&mut self, section: &str, key: &str) -> Option<(String, usize)> {
        self.values.remove(&(section.to_string(), key.to_string()))
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    (
        "model",
        &[
            "sigma",
            "b",
            "jump",
            "beta_tilde",
            "g",
            "beta_lo",
            "beta_hi",
            "hypothesis",
            "x0",
        ],
    ),
    ("sim", &["dt", "z_min", "horizon", "quad_n"]),
    ("run", &["master_seed", "output_dir", "threads"]),
    (
        "points",
        &["deltas", "grid_n", "j_max", "delta_max", "covering_delta"],
    ),
    ("holder", &["n_points", "j_lo", "j_hi", "h_cap"]),
    (
        "spectrum",
        &[
            "mode",
            "h_lo",
            "h_hi",
            "h_steps",
            "interval_lo",
            "interval_hi",
            "bin_centers",
            "bin_width",
            "j_max",
        ],
    ),
    ("tangent", &["t0", "alphas", "n_paths"]),
    ("band", &["delta", "eps", "m_values", "n_paths"]),
    ("generator", &["f", "t_values", "n_paths"]),
    ("admissible", &["x_lo", "x_hi", "n_x"]),
];

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        msg: msg.into(),
        line,
    }
}

fn lex_config(text: &str) -> Result<RawConfig> {
    let mut values = HashMap::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        // full-line or trailing comments introduced by whitespace + '#'
        let mut line = raw_line;
        if let Some(p) = line.find('#') {
            if p == 0 || line[..p].trim().is_empty() || line.as_bytes()[p - 1].is_ascii_whitespace()
            {
                line = &line[..p];
            }
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| cfg_err(line_no, "unterminated section header"))?
                .trim();
            if !KNOWN.iter().any(|(s, _)| *s == name) {
                return Err(cfg_err(line_no, format!("unknown section `[{name}]`")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| cfg_err(line_no, "expected `key = value`"))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if section.is_empty() {
            return Err(cfg_err(line_no, "key before any [section] header"));
        }
        let allowed = KNOWN
            .iter()
            .find(|(s, _)| *s == section)
            .map(|(_, ks)| *ks)
            .unwrap();
        if !allowed.contains(&key.as_str()) {
            return Err(cfg_err(line_no, format!("unknown key `{section}.{key}`")));
        }
        if values
            .insert((section.clone(), key.clone()), (value, line_no))
            .is_some()
        {
            return Err(cfg_err(line_no, format!("duplicate key `{section}.{key}`")));
        }
    }
    Ok(RawConfig { values })
}

fn get_f64(raw: &mut RawConfig, section: &str, key: &str, default: f64) -> Result<f64> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => v
            .parse()
            .map_err(|_| cfg_err(line, format!("`{section}.{key}`: not a number: `{v}`"))),
    }
}

fn get_usize(raw: &mut RawConfig, section: &str, key: &str, default: usize) -> Result<usize> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => v
            .parse()
            .map_err(|_| cfg_err(line, format!("`{section}.{key}`: not a count: `{v}`"))),
    }
}

fn get_u64(raw: &mut RawConfig, section: &str, key: &str, default: u64) -> Result<u64> {
    match raw.take(section, key) {
        None => Ok(default),
        Some((v, line)) => v
            .parse()
            .map_err(|_| cfg_err(line, format!("`{section}.{key}`: not an integer: `{v}`"))),
    }
}

fn get_u32(raw: &mut RawConfig, section: &str, key: &str, default: u32) -> Result<u32> {
    Ok(get_u64(raw, section, key, default as u64)? as u32)
}

fn get_string(raw: &mut RawConfig, section: &str, key: &str, default: &str) -> String {
    raw.take(section, key)
        .map(|(v, _)| v)
        .unwrap_or_else(|| default.to_string())
}

fn get_f64_list(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: &[f64],
) -> Result<Vec<f64>> {
    match raw.take(section, key) {
        None => Ok(default.to_vec()),
        Some((v, line)) => v
            .split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| cfg_err(line, format!("`{section}.{key}`: bad number `{tok}`")))
            })
            .collect(),
    }
}

fn get_u32_list(
    raw: &mut RawConfig,
    section: &str,
    key: &str,
    default: &[u32],
) -> Result<Vec<u32>> {
    match raw.take(section, key) {
        None => Ok(default.to_vec()),
        Some((v, line)) => v
            .split_whitespace()
            .map(|tok| {
                tok.parse()
                    .map_err(|_| cfg_err(line, format!("`{section}.{key}`: bad integer `{tok}`")))
            })
            .collect(),
    }
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let mut raw = lex_config(text)?;

    // [model]
    let sigma = match raw.take("model", "sigma") {
        None => None,
        Some((v, line)) => {
            if v.eq_ignore_ascii_case("zero") {
                None
            } else {
                Some(parse_expr(&v).map_err(|e| cfg_err(line, format!("`model.sigma`: {e}")))?)
            }
        }
    };
    let b = match raw.take("model", "b") {
        None => Expr::Num(0.0),
        Some((v, line)) => parse_expr(&v).map_err(|e| cfg_err(line, format!("`model.b`: {e}")))?,
    };
    let jump_kind_name = get_string(&mut raw, "model", "jump", "builtin");
    let beta_tilde_raw = raw.take("model", "beta_tilde");
    let g_raw = raw.take("model", "g");
    let jump = match jump_kind_name.as_str() {
        "builtin" => {
            let (v, line) = beta_tilde_raw.ok_or_else(|| {
                cfg_err(
                    0,
                    "`model.beta_tilde` is required for the builtin jump kernel",
                )
            })?;
            let beta_tilde =
                parse_expr(&v).map_err(|e| cfg_err(line, format!("`model.beta_tilde`: {e}")))?;
            JumpKind::BuiltinStableLike { beta_tilde }
        }
        "custom" => {
            let (v, line) = g_raw
                .ok_or_else(|| cfg_err(0, "`model.g` is required for the custom jump kernel"))?;
            let g = parse_kernel(&v).map_err(|e| cfg_err(line, format!("`model.g`: {e}")))?;
            JumpKind::Custom { g }
        }
        other => return Err(cfg_err(0, format!("`model.jump`: unknown kind `{other}`"))),
    };
    let hypothesis = match get_string(&mut raw, "model", "hypothesis", "none").as_str() {
        "none" => Hypothesis::None,
        "case_a" => Hypothesis::CaseA,
        "case_b" => Hypothesis::CaseB,
        other => {
            return Err(cfg_err(
                0,
                format!("`model.hypothesis`: unknown value `{other}` (none|case_a|case_b)"),
            ))
        }
    };
    let x0 = get_f64(&mut raw, "model", "x0", 0.0)?;
    let beta_lo = get_f64(&mut raw, "model", "beta_lo", f64::NAN)?;
    let beta_hi = get_f64(&mut raw, "model", "beta_hi", f64::NAN)?;
    let beta_band = resolve_beta_band(&jump, beta_lo, beta_hi)?;
    let model = ModelSpec {
        sigma,
        b,
        jump,
        beta_band,
        hypothesis,
        x0,
    };
    model
        .validate()
        .map_err(|e| cfg_err(0, format!("`model`: {e}")))?;

    // [sim] + [run]
    let run = RunSection {
        master_seed: get_u64(&mut raw, "run", "master_seed", 0)?,
        output_dir: get_string(&mut raw, "run", "output_dir", "out"),
        threads: get_usize(&mut raw, "run", "threads", 0)?,
    };
    let sim = SimulationConfig {
        dt: get_f64(&mut raw, "sim", "dt", 1.0 / 4096.0)?,
        z_min: get_f64(&mut raw, "sim", "z_min", 1e-4)?,
        horizon: get_f64(&mut raw, "sim", "horizon", 1.0)?,
        quad_n: get_usize(&mut raw, "sim", "quad_n", 32)?,
        seed: run.master_seed,
    };
    sim.validate()
        .map_err(|e| cfg_err(0, format!("`sim`: {e}")))?;

    let points = PointsParams {
        deltas: get_f64_list(&mut raw, "points", "deltas", &[2.0, 4.0])?,
        grid_n: get_usize(&mut raw, "points", "grid_n", 10_000)?,
        j_max: get_u32(&mut raw, "points", "j_max", 14)?,
        delta_max: get_f64(&mut raw, "points", "delta_max", 16.0)?,
        covering_delta: get_f64(&mut raw, "points", "covering_delta", 1.0)?,
    };
    let holder = HolderParams {
        n_points: get_usize(&mut raw, "holder", "n_points", 20)?,
        j_lo: get_u32(&mut raw, "holder", "j_lo", 6)?,
        j_hi: get_u32(&mut raw, "holder", "j_hi", 11)?,
        h_cap: get_f64(&mut raw, "holder", "h_cap", 1.5)?,
    };
    let spectrum = SpectrumParams {
        mode: match get_string(&mut raw, "spectrum", "mode", "theory").as_str() {
            "theory" => SpectrumMode::Theory,
            "empirical" => SpectrumMode::Empirical,
            other => {
                return Err(cfg_err(
                    0,
                    format!("`spectrum.mode`: unknown value `{other}` (theory|empirical)"),
                ))
            }
        },
        h_lo: get_f64(&mut raw, "spectrum", "h_lo", 0.0)?,
        h_hi: get_f64(&mut raw, "spectrum", "h_hi", 1.2)?,
        h_steps: get_usize(&mut raw, "spectrum", "h_steps", 121)?,
        interval: (
            get_f64(&mut raw, "spectrum", "interval_lo", 0.0)?,
            get_f64(&mut raw, "spectrum", "interval_hi", 1.0)?,
        ),
        bin_centers: get_f64_list(&mut raw, "spectrum", "bin_centers", &[0.4, 0.8])?,
        bin_width: get_f64(&mut raw, "spectrum", "bin_width", 0.1)?,
        j_max: get_u32(&mut raw, "spectrum", "j_max", 12)?,
    };
    let tangent = TangentParams {
        t0: get_f64(&mut raw, "tangent", "t0", 0.0)?,
        alphas: get_f64_list(&mut raw, "tangent", "alphas", &[0.1, 0.03, 0.01, 0.003])?,
        n_paths: get_usize(&mut raw, "tangent", "n_paths", 1000)?,
    };
    let band = BandParams {
        delta: get_f64(&mut raw, "band", "delta", 2.0)?,
        eps: get_f64(&mut raw, "band", "eps", 0.1)?,
        m_values: get_u32_list(&mut raw, "band", "m_values", &[6, 8, 10])?,
        n_paths: get_usize(&mut raw, "band", "n_paths", 200)?,
    };
    let generator = GeneratorParams {
        f: match raw.take("generator", "f") {
            None => parse_expr("x*x").unwrap(),
            Some((v, line)) => {
                parse_expr(&v).map_err(|e| cfg_err(line, format!("`generator.f`: {e}")))?
            }
        },
        t_values: get_f64_list(&mut raw, "generator", "t_values", &[0.01])?,
        n_paths: get_usize(&mut raw, "generator", "n_paths", 10_000)?,
    };
    let admissible = SamplingPlan {
        x_lo: get_f64(&mut raw, "admissible", "x_lo", -5.0)?,
        x_hi: get_f64(&mut raw, "admissible", "x_hi", 5.0)?,
        n_x: get_usize(&mut raw, "admissible", "n_x", 11)?,
        ..SamplingPlan::default()
    };

    debug_assert!(raw.values.is_empty(), "unconsumed config keys");
    Ok(RunConfig {
        model,
        sim,
        run,
        points,
        holder,
        spectrum,
        tangent,
        band,
        generator,
        admissible,
    })
}

/// Declared band when given, otherwise a grid scan of the builtin index
/// expression. The scan doubles as the range check: anything escaping
/// (0, 2) is rejected here.
fn resolve_beta_band(jump: &JumpKind, lo: f64, hi: f64) -> Result<(f64, f64)> {
    if lo.is_finite() && hi.is_finite() {
        return Ok((lo, hi));
    }
    if lo.is_finite() != hi.is_finite() {
        return Err(cfg_err(
            0,
            "`model.beta_lo`/`model.beta_hi`: give both bounds or neither",
        ));
    }
    match jump {
        JumpKind::BuiltinStableLike { beta_tilde } => {
            let mut mn = f64::INFINITY;
            let mut mx = f64::NEG_INFINITY;
            let n = 4096;
            for i in 0..=n {
                let x = -10.0 + 20.0 * i as f64 / n as f64;
                let v = beta_tilde.eval(x).map_err(|e| {
                    cfg_err(0, format!("`model.beta_tilde`: evaluation failed: {e}"))
                })?;
                mn = mn.min(v);
                mx = mx.max(v);
            }
            if !(mn > 0.0 && mx < 2.0) {
                return Err(cfg_err(
                    0,
                    format!(
                        "`model.beta_tilde`: range [{mn}, {mx}] escapes the \
                         beta_band requirement (0, 2)"
                    ),
                ));
            }
            Ok((mn, mx))
        }
        JumpKind::Custom { .. } => Err(cfg_err(
            0,
            "`model.beta_lo`/`model.beta_hi` are required for custom jump kernels",
        )),
    }
}

impl RunConfig {
    /// Canonical serialization: parses back to an identical config.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[model]");
        match &self.model.sigma {
            None => {
                let _ = writeln!(s, "sigma = zero");
            }
            Some(e) => {
                let _ = writeln!(s, "sigma = {e}");
            }
        }
        let _ = writeln!(s, "b = {}", self.model.b);
        match &self.model.jump {
            JumpKind::BuiltinStableLike { beta_tilde } => {
                let _ = writeln!(s, "jump = builtin");
                let _ = writeln!(s, "beta_tilde = {beta_tilde}");
            }
            JumpKind::Custom { g } => {
                let _ = writeln!(s, "jump = custom");
                let _ = writeln!(s, "g = {g}");
            }
        }
        let _ = writeln!(s, "beta_lo = {}", self.model.beta_band.0);
        let _ = writeln!(s, "beta_hi = {}", self.model.beta_band.1);
        let _ = writeln!(
            s,
            "hypothesis = {}",
            match self.model.hypothesis {
                Hypothesis::None => "none",
                Hypothesis::CaseA => "case_a",
                Hypothesis::CaseB => "case_b",
            }
        );
        let _ = writeln!(s, "x0 = {}", self.model.x0);

        let _ = writeln!(s, "\n[sim]");
        let _ = writeln!(s, "dt = {}", self.sim.dt);
        let _ = writeln!(s, "z_min = {}", self.sim.z_min);
        let _ = writeln!(s, "horizon = {}", self.sim.horizon);
        let _ = writeln!(s, "quad_n = {}", self.sim.quad_n);

        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "master_seed = {}", self.run.master_seed);
        let _ = writeln!(s, "output_dir = {}", self.run.output_dir);
        let _ = writeln!(s, "threads = {}", self.run.threads);

        let _ = writeln!(s, "\n[points]");
        let _ = writeln!(s, "deltas = {}", join(&self.points.deltas));
        let _ = writeln!(s, "grid_n = {}", self.points.grid_n);
        let _ = writeln!(s, "j_max = {}", self.points.j_max);
        let _ = writeln!(s, "delta_max = {}", self.points.delta_max);
        let _ = writeln!(s, "covering_delta = {}", self.points.covering_delta);

        let _ = writeln!(s, "\n[holder]");
        let _ = writeln!(s, "n_points = {}", self.holder.n_points);
        let _ = writeln!(s, "j_lo = {}", self.holder.j_lo);
        let _ = writeln!(s, "j_hi = {}", self.holder.j_hi);
        let _ = writeln!(s, "h_cap = {}", self.holder.h_cap);

        let _ = writeln!(s, "\n[spectrum]");
        let _ = writeln!(
            s,
            "mode = {}",
            match self.spectrum.mode {
                SpectrumMode::Theory => "theory",
                SpectrumMode::Empirical => "empirical",
            }
        );
        let _ = writeln!(s, "h_lo = {}", self.spectrum.h_lo);
        let _ = writeln!(s, "h_hi = {}", self.spectrum.h_hi);
        let _ = writeln!(s, "h_steps = {}", self.spectrum.h_steps);
        let _ = writeln!(s, "interval_lo = {}", self.spectrum.interval.0);
        let _ = writeln!(s, "interval_hi = {}", self.spectrum.interval.1);
        let _ = writeln!(s, "bin_centers = {}", join(&self.spectrum.bin_centers));
        let _ = writeln!(s, "bin_width = {}", self.spectrum.bin_width);
        let _ = writeln!(s, "j_max = {}", self.spectrum.j_max);

        let _ = writeln!(s, "\n[tangent]");
        let _ = writeln!(s, "t0 = {}", self.tangent.t0);
        let _ = writeln!(s, "alphas = {}", join(&self.tangent.alphas));
        let _ = writeln!(s, "n_paths = {}", self.tangent.n_paths);

        let _ = writeln!(s, "\n[band]");
        let _ = writeln!(s, "delta = {}", self.band.delta);
        let _ = writeln!(s, "eps = {}", self.band.eps);
        let _ = writeln!(
            s,
            "m_values = {}",
            self.band
                .m_values
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        );
        let _ = writeln!(s, "n_paths = {}", self.band.n_paths);

        let _ = writeln!(s, "\n[generator]");
        let _ = writeln!(s, "f = {}", self.generator.f);
        let _ = writeln!(s, "t_values = {}", join(&self.generator.t_values));
        let _ = writeln!(s, "n_paths = {}", self.generator.n_paths);

        let _ = writeln!(s, "\n[admissible]");
        let _ = writeln!(s, "x_lo = {}", self.admissible.x_lo);
        let _ = writeln!(s, "x_hi = {}", self.admissible.x_hi);
        let _ = writeln!(s, "n_x = {}", self.admissible.n_x);
        s
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}
