//! Subcommand execution: runs one analysis from a `RunConfig` and writes
//! its CSV/JSON artifacts. Everything here is deterministic given the
//! config and master seed, independent of the rayon thread count; the
//! CLI and the test-suite share this code path.

use crate::config::{RunConfig, SpectrumMode};
use crate::error::{Error, Result};
use crate::model::check_admissible;
use crate::points::{
    approx_rate_scaled, covering_fraction, level_set_box_dim, observation_depth, PointSystem,
};
use crate::regularity::{band_statistic, estimate_holder, theoretical_exponent, BetaPath};
use crate::rng::{derive_seed, SplitMix64};
use crate::sde::{generator_consistency, simulate_path, SamplePath, SimulationConfig};
use crate::spectrum::{
    empirical_spectrum, local_spectrum, CurveMode, HBins, IntervalContext, SpectrumCurve,
    SpectrumSample,
};
use crate::tangent::tangent_test;
use serde::Serialize;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Simulate,
    Points,
    Holder,
    Spectrum,
    Tangent,
    BandStats,
    CheckAdmissible,
    GeneratorCheck,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Simulate,
        Subcommand::Points,
        Subcommand::Holder,
        Subcommand::Spectrum,
        Subcommand::Tangent,
        Subcommand::BandStats,
        Subcommand::CheckAdmissible,
        Subcommand::GeneratorCheck,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Simulate => "simulate",
            Subcommand::Points => "points",
            Subcommand::Holder => "holder",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Tangent => "tangent",
            Subcommand::BandStats => "band-stats",
            Subcommand::CheckAdmissible => "check-admissible",
            Subcommand::GeneratorCheck => "generator-check",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Subcommand> {
        Subcommand::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| Error::invalid(format!("unknown subcommand `{s}`")))
    }
}

/// Outcome of one subcommand: artifacts written, a one-line summary, and
/// whether a validation-style check (admissibility) failed.
#[derive(Debug)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
    pub check_failed: bool,
}

struct Sink {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Sink {
    fn new(dir: &Path) -> Result<Sink> {
        fs::create_dir_all(dir)?;
        Ok(Sink {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::numerical(format!("json encoding: {e}")))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Remove everything written so far (used on failure so no partial
    /// artifact survives).
    fn rollback(&mut self) {
        for p in self.written.drain(..) {
            let _ = fs::remove_file(p);
        }
    }
}

/// Run one subcommand, writing artifacts into `out_dir`. On error no
/// partial artifacts are left behind.
pub fn run(cmd: Subcommand, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutput> {
    let mut sink = Sink::new(out_dir)?;
    let res = dispatch(cmd, cfg, &mut sink);
    match res {
        Ok((summary, check_failed)) => Ok(RunOutput {
            files: sink.written,
            summary,
            check_failed,
        }),
        Err(e) => {
            sink.rollback();
            Err(e)
        }
    }
}

fn dispatch(cmd: Subcommand, cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    match cmd {
        Subcommand::Simulate => run_simulate(cfg, sink),
        Subcommand::Points => run_points(cfg, sink),
        Subcommand::Holder => run_holder(cfg, sink),
        Subcommand::Spectrum => run_spectrum(cfg, sink),
        Subcommand::Tangent => run_tangent(cfg, sink),
        Subcommand::BandStats => run_band_stats(cfg, sink),
        Subcommand::CheckAdmissible => run_check_admissible(cfg, sink),
        Subcommand::GeneratorCheck => run_generator_check(cfg, sink),
    }
}

fn sample_driving_system(cfg: &RunConfig) -> Result<PointSystem> {
    PointSystem::sample(
        cfg.sim.horizon,
        cfg.sim.z_min,
        derive_seed(cfg.run.master_seed, "points", 0),
    )
}

fn simulate_driven(cfg: &RunConfig) -> Result<(PointSystem, SamplePath)> {
    let ps = sample_driving_system(cfg)?;
    let sim = SimulationConfig {
        seed: derive_seed(cfg.run.master_seed, "path", 0),
        ..cfg.sim
    };
    let path = simulate_path(&cfg.model, &ps, &sim)?;
    Ok((ps, path))
}

#[derive(Serialize)]
struct SimulateSummary {
    nodes: usize,
    jumps: usize,
    final_value: f64,
    min_value: f64,
    max_value: f64,
    z_min: f64,
    dt: f64,
    horizon: f64,
    master_seed: u64,
}

fn run_simulate(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let (_ps, path) = simulate_driven(cfg)?;
    let mut csv = Vec::new();
    path.write_csv(&mut csv)?;
    sink.write_bytes("path.csv", &csv)?;
    let mut bin = Vec::new();
    path.write_binary(&mut bin)?;
    sink.write_bytes("path.bin", &bin)?;
    let jumps = (0..path.len()).filter(|&i| path.is_jump(i)).count();
    let summary = SimulateSummary {
        nodes: path.len(),
        jumps,
        final_value: path.final_value(),
        min_value: path.values().iter().copied().fold(f64::INFINITY, f64::min),
        max_value: path
            .values()
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max),
        z_min: cfg.sim.z_min,
        dt: cfg.sim.dt,
        horizon: cfg.sim.horizon,
        master_seed: cfg.run.master_seed,
    };
    sink.write_json("path_summary.json", &summary)?;
    Ok((
        format!(
            "simulate: {} nodes, {} jumps, M({}) = {:.6}",
            summary.nodes, summary.jumps, cfg.sim.horizon, summary.final_value
        ),
        false,
    ))
}

#[derive(Serialize)]
struct BoxDimRow {
    delta: f64,
    dim: f64,
    ubiquity_value: f64,
    levels_used: usize,
    flagged: bool,
}

#[derive(Serialize)]
struct PointsSummary {
    count: usize,
    expected_count: f64,
    covering_delta: f64,
    covering_fraction: f64,
    box_dims: Vec<BoxDimRow>,
}

fn run_points(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let ps = sample_driving_system(cfg)?;
    let mut csv = Vec::new();
    ps.write_csv(&mut csv)?;
    sink.write_bytes("points.csv", &csv)?;
    let frac = covering_fraction(&ps, cfg.points.covering_delta, cfg.points.grid_n)?;
    let mut box_dims = Vec::new();
    for &delta in &cfg.points.deltas {
        let bd = level_set_box_dim(&ps, delta, cfg.points.j_max)?;
        box_dims.push(BoxDimRow {
            delta,
            dim: bd.dim,
            ubiquity_value: 1.0 / delta,
            levels_used: bd.levels_used,
            flagged: bd.flagged,
        });
    }
    let summary = PointsSummary {
        count: ps.len(),
        expected_count: crate::points::intensity_mass(cfg.sim.z_min) * cfg.sim.horizon,
        covering_delta: cfg.points.covering_delta,
        covering_fraction: frac,
        box_dims,
    };
    sink.write_json("points_summary.json", &summary)?;
    Ok((
        format!(
            "points: {} events, covering fraction {:.4} at delta {}",
            summary.count, frac, cfg.points.covering_delta
        ),
        false,
    ))
}

fn run_holder(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let (ps, path) = simulate_driven(cfg)?;
    let p = &cfg.holder;
    let margin = 2f64.powi(-(p.j_lo as i32));
    if 2.0 * margin >= cfg.sim.horizon {
        return Err(Error::invalid("holder: horizon too short for j_lo"));
    }
    let mut rng = SplitMix64::new(derive_seed(cfg.run.master_seed, "holder-times", 0));
    let mut rows = Vec::with_capacity(p.n_points);
    let mut csv = Vec::new();
    writeln!(csv, "t,h_hat,r2,h_theory,delta_hat,beta_t")?;
    let mut drawn = 0usize;
    let mut attempts = 0usize;
    while drawn < p.n_points && attempts < p.n_points * 100 {
        attempts += 1;
        let t = margin + rng.next_f64() * (cfg.sim.horizon - 2.0 * margin);
        let est = estimate_holder(&path, t, (p.j_lo, p.j_hi), p.h_cap)?;
        if est.flag == crate::regularity::HolderFlag::AtJump {
            continue; // continuity points only
        }
        let rate = approx_rate_scaled(
            &ps,
            t,
            observation_depth(cfg.sim.z_min),
            cfg.points.delta_max,
        )?;
        let beta_t = cfg.model.local_index(path.value_at(t))?;
        let h_theory = theoretical_exponent(beta_t, rate.delta_hat, cfg.model.sigma_zero());
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            t, est.h_hat, est.r2, h_theory, rate.delta_hat, beta_t
        )?;
        rows.push((est, h_theory));
        drawn += 1;
    }
    sink.write_bytes("holder.csv", &csv)?;
    if rows.is_empty() {
        return Ok(("holder: no continuity points drawn".into(), false));
    }
    let abs_err: Vec<f64> = rows.iter().map(|(e, h)| (e.h_hat - h).abs()).collect();
    let med = crate::stats::median(&abs_err);
    Ok((
        format!(
            "holder: {} points, median |h_hat - h_theory| = {:.4}",
            rows.len(),
            med
        ),
        false,
    ))
}

fn theory_interval_context(cfg: &RunConfig) -> Result<IntervalContext> {
    // beta samples along a simulated trajectory restricted to the interval
    let (ps, path) = simulate_driven(cfg)?;
    let (a, b) = cfg.spectrum.interval;
    let beta = BetaPath::from_path(&path, &cfg.model)?;
    let mut beta_samples = Vec::new();
    let n = 2048usize;
    for k in 0..=n {
        let t = a + (b - a) * k as f64 / n as f64;
        beta_samples.push(beta.at(t));
    }
    let mut beta_jump_values = Vec::new();
    for e in ps.events() {
        if e.t >= a && e.t <= b {
            let idx = path.index_at(e.t);
            beta_jump_values.push(cfg.model.local_index(path.values()[idx])?);
            beta_jump_values.push(cfg.model.local_index(path.left_values()[idx])?);
        }
    }
    Ok(IntervalContext {
        sigma_zero: cfg.model.sigma_zero(),
        beta_samples,
        beta_jump_values,
    })
}

fn run_spectrum(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let p = &cfg.spectrum;
    let curve = match p.mode {
        SpectrumMode::Theory => {
            if p.h_steps < 2 || !(p.h_hi > p.h_lo) {
                return Err(Error::invalid("spectrum: bad h grid"));
            }
            let ictx = theory_interval_context(cfg)?;
            let mut curve = SpectrumCurve::new(CurveMode::Theory, p.interval);
            curve.provenance.push(format!(
                "local spectrum, sigma_zero = {}, {} beta samples",
                ictx.sigma_zero,
                ictx.beta_samples.len()
            ));
            for k in 0..p.h_steps {
                let h = p.h_lo + (p.h_hi - p.h_lo) * k as f64 / (p.h_steps - 1) as f64;
                let v = local_spectrum(&ictx, h)?;
                curve.push(SpectrumSample {
                    h,
                    d: v.d,
                    flag: v.flag,
                })?;
            }
            curve
        }
        SpectrumMode::Empirical => {
            let (ps, path) = simulate_driven(cfg)?;
            let beta = BetaPath::from_path(&path, &cfg.model)?;
            let bins = HBins {
                centers: p.bin_centers.clone(),
                width: p.bin_width,
            };
            empirical_spectrum(
                &ps,
                &beta,
                p.interval,
                &bins,
                p.j_max,
                cfg.model.sigma_zero(),
            )?
        }
    };
    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    sink.write_bytes("spectrum.csv", &csv)?;
    sink.write_bytes("spectrum.json", format!("{}\n", curve.to_json()).as_bytes())?;
    Ok((
        format!(
            "spectrum: {} samples ({})",
            curve.samples.len(),
            match p.mode {
                SpectrumMode::Theory => "theory",
                SpectrumMode::Empirical => "empirical",
            }
        ),
        false,
    ))
}

#[derive(Serialize)]
struct TangentSummary {
    t0: f64,
    beta0: f64,
    n_paths: usize,
    z_min: f64,
    alphas: Vec<f64>,
    ks: Vec<f64>,
    p_values: Vec<f64>,
}

fn run_tangent(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let sim = SimulationConfig {
        seed: cfg.run.master_seed,
        ..cfg.sim
    };
    let rows = tangent_test(
        &cfg.model,
        cfg.tangent.t0,
        &cfg.tangent.alphas,
        cfg.tangent.n_paths,
        &sim,
    )?;
    let mut csv = Vec::new();
    writeln!(csv, "alpha,ks,p")?;
    for r in &rows {
        writeln!(csv, "{},{},{}", r.alpha, r.ks, r.p_value)?;
    }
    sink.write_bytes("tangent.csv", &csv)?;
    let beta0 = cfg.model.local_index(cfg.model.x0)?;
    let summary = TangentSummary {
        t0: cfg.tangent.t0,
        beta0,
        n_paths: cfg.tangent.n_paths,
        z_min: cfg.sim.z_min,
        alphas: rows.iter().map(|r| r.alpha).collect(),
        ks: rows.iter().map(|r| r.ks).collect(),
        p_values: rows.iter().map(|r| r.p_value).collect(),
    };
    sink.write_json("tangent.json", &summary)?;
    let last = rows.last().unwrap();
    Ok((
        format!(
            "tangent: beta0 = {:.4}, smallest alpha {} -> KS {:.4} (p = {:.4})",
            beta0, last.alpha, last.ks, last.p_value
        ),
        false,
    ))
}

fn run_band_stats(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let mut csv = Vec::new();
    writeln!(csv, "m,threshold,exceed_frequency,median_statistic")?;
    let mut all = Vec::new();
    for &m in &cfg.band.m_values {
        let sim = SimulationConfig {
            seed: derive_seed(cfg.run.master_seed, "band-m", m as u64),
            ..cfg.sim
        };
        let st = band_statistic(
            &cfg.model,
            cfg.band.delta,
            cfg.band.eps,
            m,
            cfg.band.n_paths,
            &sim,
        )?;
        writeln!(
            csv,
            "{},{},{},{}",
            st.m, st.threshold, st.exceed_frequency, st.median_statistic
        )?;
        all.push(st);
    }
    sink.write_bytes("band.csv", &csv)?;
    sink.write_json("band.json", &all)?;
    let freqs: Vec<String> = all
        .iter()
        .map(|s| format!("{}:{:.4}", s.m, s.exceed_frequency))
        .collect();
    Ok((format!("band-stats: exceedance {}", freqs.join(" ")), false))
}

fn run_check_admissible(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let report = check_admissible(&cfg.model, &cfg.admissible);
    sink.write_json("admissibility.json", &report)?;
    let pass = report.all_pass();
    let mut lines = report.summary_lines().join("\n");
    lines.push('\n');
    sink.write_bytes("admissibility.txt", lines.as_bytes())?;
    Ok((
        format!(
            "check-admissible: {}",
            if pass {
                "all conditions pass"
            } else {
                "FAILED (see admissibility.txt)"
            }
        ),
        !pass,
    ))
}

fn run_generator_check(cfg: &RunConfig, sink: &mut Sink) -> Result<(String, bool)> {
    let sim = SimulationConfig {
        seed: cfg.run.master_seed,
        ..cfg.sim
    };
    let rows = generator_consistency(
        &cfg.model,
        &cfg.generator.f,
        &cfg.generator.t_values,
        cfg.generator.n_paths,
        &sim,
    )?;
    let mut csv = Vec::new();
    writeln!(csv, "t,mc_rate,generator_value")?;
    for r in &rows {
        writeln!(csv, "{},{},{}", r.t, r.mc_rate, r.generator_value)?;
    }
    sink.write_bytes("generator.csv", &csv)?;
    let r = rows.last().unwrap();
    Ok((
        format!(
            "generator-check: t = {}, mc rate {:.4} vs generator {:.4}",
            r.t, r.mc_rate, r.generator_value
        ),
        false,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_str;

    fn tmpdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("jumpfrac-pipe-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn simulate_writes_artifacts() {
        let cfg =
            parse_config_str("[model]\nbeta_tilde = 1.2\n[sim]\nz_min = 0.01\nhorizon = 0.25\n")
                .unwrap();
        let dir = tmpdir("sim");
        let out = run(Subcommand::Simulate, &cfg, &dir).unwrap();
        assert_eq!(out.files.len(), 3);
        for f in &out.files {
            assert!(f.exists());
        }
        assert!(!out.check_failed);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn failed_admissibility_is_reported_not_error() {
        let cfg = parse_config_str(
            "[model]\njump = custom\ng = pow(max(z, 0), 2)\nbeta_lo = 0.5\nbeta_hi = 0.5\n",
        )
        .unwrap();
        let dir = tmpdir("adm");
        let out = run(Subcommand::CheckAdmissible, &cfg, &dir).unwrap();
        assert!(out.check_failed);
        assert!(out.summary.contains("FAILED"));
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn errors_leave_no_partial_artifacts() {
        // tangent on a diffusive model is a validation error
        let cfg = parse_config_str("[model]\nsigma = 1\nbeta_tilde = 1.2\n").unwrap();
        let dir = tmpdir("rollback");
        let err = run(Subcommand::Tangent, &cfg, &dir).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        let leftovers: Vec<_> = fs::read_dir(&dir)
            .map(|rd| rd.filter_map(|e| e.ok()).collect())
            .unwrap_or_default();
        assert!(leftovers.is_empty(), "leftovers: {leftovers:?}");
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn empirical_spectrum_subcommand() {
        let cfg = parse_config_str(
            "[model]\nbeta_tilde = 1.25\n[sim]\nz_min = 0.001\n[spectrum]\nmode = empirical\nj_max = 10\nbin_centers = 0.4 0.8\n",
        )
        .unwrap();
        let dir = tmpdir("emp");
        let out = run(Subcommand::Spectrum, &cfg, &dir).unwrap();
        let csv = std::fs::read_to_string(dir.join("spectrum.csv")).unwrap();
        assert!(csv.starts_with("h,d,flag\n"), "{csv}");
        assert_eq!(csv.lines().count(), 3);
        assert!(!out.check_failed);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn identical_runs_are_byte_identical() {
        let cfg = parse_config_str(
            "[model]\nbeta_tilde = 1.25\n[sim]\nz_min = 0.01\n[run]\nmaster_seed = 9\n",
        )
        .unwrap();
        let d1 = tmpdir("det1");
        let d2 = tmpdir("det2");
        let o1 = run(Subcommand::Points, &cfg, &d1).unwrap();
        let o2 = run(Subcommand::Points, &cfg, &d2).unwrap();
        for (a, b) in o1.files.iter().zip(&o2.files) {
            assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
        }
        fs::remove_dir_all(&d1).unwrap();
        fs::remove_dir_all(&d2).unwrap();
    }
}
