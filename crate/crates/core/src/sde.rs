//! Jump-adapted Euler integration of the SDE and its probabilistic
//! oracles (generator, martingale moments, truncation convergence).
//!
//! The grid is the union of uniform nodes and the jump times of the
//! driving point system. Between nodes the state moves by
//! sigma(M) dB + (b(M) - c(M)) dt, where c is the compensator of the
//! truncated small jumps; at a jump time T_n the state moves by
//! G(M-, Z_n) exactly. Brownian increments come from a counter-based
//! generator keyed by (seed, interval index), so two runs sharing a grid
//! prefix consume identical randomness on it.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{JumpKind, ModelSpec};
use crate::points::PointSystem;
use crate::quad;
use crate::rng::{derive_seed, CounterNormal};
use crate::stats;
use rayon::prelude::*;
use std::io::{BufRead, Read, Write};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// uniform grid step
    pub dt: f64,
    /// jump truncation level
    pub z_min: f64,
    pub horizon: f64,
    pub seed: u64,
    /// Gauss-Legendre nodes per quadrature panel
    pub quad_n: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            dt: 1.0 / 4096.0, // 2^-12
            z_min: 1e-4,
            horizon: 1.0,
            seed: 0,
            quad_n: 32,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt must be positive"));
        }
        if !(self.z_min > 0.0 && self.z_min <= 1.0) {
            return Err(Error::invalid("z_min must be in (0, 1]"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::invalid("horizon must be positive"));
        }
        if self.quad_n < 2 || self.quad_n > 128 {
            return Err(Error::invalid("quad_n must be in 2..=128"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_z_min(mut self, z_min: f64) -> Self {
        self.z_min = z_min;
        self
    }
}

/// One realization of M on the jump-adapted grid, with the
/// semimartingale components X (diffusion), Y (drift incl. compensator)
/// and Z (compensated jumps). X + Y + Z = M - x0 at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: Vec<f64>,
    values: Vec<f64>,
    left_values: Vec<f64>,
    jump_marks: Vec<f64>,
    comp_x: Vec<f64>,
    comp_y: Vec<f64>,
    comp_z: Vec<f64>,
    x0: f64,
}

impl SamplePath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left_values
    }

    pub fn jump_marks(&self) -> &[f64] {
        &self.jump_marks
    }

    pub fn component_x(&self) -> &[f64] {
        &self.comp_x
    }

    pub fn component_y(&self) -> &[f64] {
        &self.comp_y
    }

    pub fn component_z(&self) -> &[f64] {
        &self.comp_z
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn is_jump(&self, i: usize) -> bool {
        self.jump_marks[i] != 0.0
    }

    /// Index of the last node with time <= t.
    pub fn index_at(&self, t: f64) -> usize {
        self.grid.partition_point(|&g| g <= t).saturating_sub(1)
    }

    /// Cadlag evaluation: value at the last node with time <= t.
    pub fn value_at(&self, t: f64) -> f64 {
        if t < self.grid[0] {
            return self.x0;
        }
        self.values[self.index_at(t)]
    }

    /// Jump component at the last node with time <= t.
    pub fn jump_component_at(&self, t: f64) -> f64 {
        if t < self.grid[0] {
            return 0.0;
        }
        self.comp_z[self.index_at(t)]
    }

    pub fn final_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// CSV rows `t,m,m_left,jump,x,y,z`; jump rows are the ones with a
    /// non-zero jump column.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,m,m_left,jump,x,y,z")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.grid[i],
                self.values[i],
                self.left_values[i],
                self.jump_marks[i],
                self.comp_x[i],
                self.comp_y[i],
                self.comp_z[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, x0: f64) -> Result<SamplePath> {
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 7];
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "t,m,m_left,jump,x,y,z" {
                    return Err(Error::invalid("path csv: unexpected header"));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::invalid(format!("path csv: bad row {}", i + 1)));
            }
            for (c, f) in cols.iter_mut().zip(&fields) {
                c.push(f.trim().parse().map_err(|_| {
                    Error::invalid(format!("path csv: bad float in row {}", i + 1))
                })?);
            }
        }
        let mut it = cols.into_iter();
        Ok(SamplePath {
            grid: it.next().unwrap(),
            values: it.next().unwrap(),
            left_values: it.next().unwrap(),
            jump_marks: it.next().unwrap(),
            comp_x: it.next().unwrap(),
            comp_y: it.next().unwrap(),
            comp_z: it.next().unwrap(),
            x0,
        })
    }

    /// The path with a + b*t added to every value (jumps untouched, the
    /// affine part goes into the drift component and the offset into x0).
    pub fn with_affine_added(&self, a: f64, b: f64) -> SamplePath {
        let shift = |vs: &[f64]| -> Vec<f64> {
            vs.iter()
                .zip(&self.grid)
                .map(|(v, t)| v + a + b * t)
                .collect()
        };
        SamplePath {
            grid: self.grid.clone(),
            values: shift(&self.values),
            left_values: shift(&self.left_values),
            jump_marks: self.jump_marks.clone(),
            comp_x: self.comp_x.clone(),
            comp_y: self
                .comp_y
                .iter()
                .zip(&self.grid)
                .map(|(v, t)| v + b * t)
                .collect(),
            comp_z: self.comp_z.clone(),
            x0: self.x0 + a,
        }
    }

    const MAGIC: &'static [u8; 8] = b"JFPATH01";

    /// Binary layout: magic, version byte, node count (u64 LE), then the
    /// seven columns as little-endian f64 arrays.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&[1u8])?;
        w.write_all(&(self.len() as u64).to_le_bytes())?;
        w.write_all(&self.x0.to_le_bytes())?;
        for col in [
            &self.grid,
            &self.values,
            &self.left_values,
            &self.jump_marks,
            &self.comp_x,
            &self.comp_y,
            &self.comp_z,
        ] {
            for v in col {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<SamplePath> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(Error::invalid("path binary: bad magic"));
        }
        let mut version = [0u8; 1];
        r.read_exact(&mut version)?;
        if version[0] != 1 {
            return Err(Error::invalid("path binary: unsupported version"));
        }
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let n = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)?;
        let x0 = f64::from_le_bytes(buf8);
        let read_col = |r: &mut R| -> Result<Vec<f64>> {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                r.read_exact(&mut b)?;
                v.push(f64::from_le_bytes(b));
            }
            Ok(v)
        };
        Ok(SamplePath {
            grid: read_col(&mut r)?,
            values: read_col(&mut r)?,
            left_values: read_col(&mut r)?,
            jump_marks: read_col(&mut r)?,
            comp_x: read_col(&mut r)?,
            comp_y: read_col(&mut r)?,
            comp_z: read_col(&mut r)?,
            x0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CompensatorMode {
    /// odd kernel, compensator identically zero
    Zero,
    /// evaluated by quadrature at every step
    Quadrature,
}

/// Quadrature value of int_{z_min<|z|<1} G(x,z) dz/z^2. Zero (to within
/// quadrature rounding) for every kernel satisfying the odd-symmetry
/// condition; non-zero values feed back into the drift and flag an
/// inadmissible custom kernel.
pub fn compensator_drift(model: &ModelSpec, x: f64, z_min: f64, quad_n: usize) -> Result<f64> {
    if !(z_min > 0.0 && z_min < 1.0) {
        return Err(Error::invalid("compensator_drift: z_min must be in (0, 1)"));
    }
    let pos = quad::integrate_geometric(
        &mut |z| Ok(model.jump_size(x, z)? / (z * z)),
        z_min,
        1.0,
        quad_n,
    )?;
    let neg = quad::integrate_geometric(
        &mut |z| Ok(model.jump_size(x, -z)? / (z * z)),
        z_min,
        1.0,
        quad_n,
    )?;
    Ok(pos + neg)
}

fn compensator_mode(model: &ModelSpec, z_min: f64, quad_n: usize) -> Result<CompensatorMode> {
    if matches!(model.jump, JumpKind::BuiltinStableLike { .. }) {
        // odd by construction
        return Ok(CompensatorMode::Zero);
    }
    let x0 = model.x0;
    for x in [x0, x0 - 1.0, x0 + 1.0, -3.0, -0.5, 0.5, 3.0] {
        if compensator_drift(model, x, z_min, quad_n)?.abs() > 1e-10 {
            return Ok(CompensatorMode::Quadrature);
        }
    }
    Ok(CompensatorMode::Zero)
}

/// Integrate one path of the model driven by `ps`. Deterministic given
/// (model, ps, cfg) and independent of thread count.
pub fn simulate_path(
    model: &ModelSpec,
    ps: &PointSystem,
    cfg: &SimulationConfig,
) -> Result<SamplePath> {
    model.validate()?;
    cfg.validate()?;
    if (ps.horizon() - cfg.horizon).abs() > 1e-12 {
        return Err(Error::invalid(format!(
            "point system horizon {} does not match configured horizon {}",
            ps.horizon(),
            cfg.horizon
        )));
    }

    let comp_mode = compensator_mode(model, ps.z_min().min(0.999_999), cfg.quad_n)?;
    let jumps = ps.events_by_time();

    // merged grid: uniform nodes plus jump times
    let n_uniform = (cfg.horizon / cfg.dt).ceil() as usize;
    let mut grid: Vec<f64> = Vec::with_capacity(n_uniform + 1 + jumps.len());
    let mut node_jumps: Vec<(u32, u32)> = Vec::with_capacity(grid.capacity());
    let mut ji = 0usize;
    for k in 0..=n_uniform {
        let t_u = ((k as f64) * cfg.dt).min(cfg.horizon);
        while ji < jumps.len() && jumps[ji].t < t_u {
            let start = ji as u32;
            let t_j = jumps[ji].t;
            while ji < jumps.len() && jumps[ji].t == t_j {
                ji += 1;
            }
            grid.push(t_j);
            node_jumps.push((start, ji as u32));
        }
        let start = ji as u32;
        while ji < jumps.len() && jumps[ji].t == t_u {
            ji += 1;
        }
        grid.push(t_u);
        node_jumps.push((start, ji as u32));
        if t_u >= cfg.horizon {
            break;
        }
    }
    debug_assert!(ji == jumps.len());

    let n = grid.len();
    let mut values = vec![0.0; n];
    let mut left_values = vec![0.0; n];
    let mut jump_marks = vec![0.0; n];
    let mut comp_x = vec![0.0; n];
    let mut comp_y = vec![0.0; n];
    let mut comp_z = vec![0.0; n];

    let gauss = CounterNormal::new(cfg.seed);
    let has_sigma = model.sigma.is_some();
    let b_is_zero = model.b.is_zero_literal();
    let z_lo = ps.z_min().min(0.999_999);

    let mut m = model.x0;
    let (mut x_acc, mut y_acc, mut z_acc) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        if i > 0 {
            let d = grid[i] - grid[i - 1];
            if d > 0.0 {
                if has_sigma {
                    let sig = model.eval_sigma(m)?;
                    let db = gauss.sample((i - 1) as u64) * d.sqrt();
                    x_acc += sig * db;
                    m += sig * db;
                }
                if !b_is_zero {
                    let bv = model.eval_b(m)?;
                    y_acc += bv * d;
                    m += bv * d;
                }
                if comp_mode == CompensatorMode::Quadrature {
                    let c = compensator_drift(model, m, z_lo, cfg.quad_n)?;
                    z_acc -= c * d;
                    m -= c * d;
                }
            }
        }
        left_values[i] = m;
        let (j0, j1) = node_jumps[i];
        for j in j0..j1 {
            let g = model.jump_size(m, jumps[j as usize].z)?;
            m += g;
            z_acc += g;
            jump_marks[i] += g;
        }
        if !m.is_finite() {
            return Err(Error::numerical(format!(
                "state blew up at t = {}",
                grid[i]
            )));
        }
        values[i] = m;
        comp_x[i] = x_acc;
        comp_y[i] = y_acc;
        comp_z[i] = z_acc;
    }

    Ok(SamplePath {
        grid,
        values,
        left_values,
        jump_marks,
        comp_x,
        comp_y,
        comp_z,
        x0: model.x0,
    })
}

/// Sample a point system and integrate, deriving the point-system seed
/// from the path seed so one u64 reproduces the whole realization.
pub fn simulate_one(model: &ModelSpec, cfg: &SimulationConfig) -> Result<SamplePath> {
    let ps = PointSystem::sample(cfg.horizon, cfg.z_min, derive_seed(cfg.seed, "points", 0))?;
    simulate_path(model, &ps, cfg)
}

/// Sup-norm gaps between successive truncation levels under coupled
/// sampling: the finest system is sampled once and coarser ones are its
/// restrictions, so finer systems extend coarser ones event for event.
///
/// Cleanest for pure-jump models. With a diffusion the Brownian
/// increments are keyed by node index, so the extra jump nodes of a
/// finer level reshuffle the noise consumed after the first extra jump
/// and the gaps measure that reshuffling too.
pub fn refine_convergence(
    model: &ModelSpec,
    seed: u64,
    z_min_seq: &[f64],
    cfg: &SimulationConfig,
) -> Result<Vec<f64>> {
    if z_min_seq.len() < 2 {
        return Err(Error::invalid(
            "refine_convergence: need at least two levels",
        ));
    }
    for w in z_min_seq.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid(
                "refine_convergence: z_min_seq must be strictly decreasing",
            ));
        }
    }
    let finest = *z_min_seq.last().unwrap();
    let fine_ps = PointSystem::sample(cfg.horizon, finest, seed)?;
    let mut paths = Vec::with_capacity(z_min_seq.len());
    for &zm in z_min_seq {
        let ps = fine_ps.restrict(zm)?;
        let cfg_k = SimulationConfig { z_min: zm, ..*cfg };
        paths.push(simulate_path(model, &ps, &cfg_k)?);
    }
    let n_uniform = (cfg.horizon / cfg.dt).ceil() as usize;
    let mut gaps = Vec::with_capacity(z_min_seq.len() - 1);
    for w in paths.windows(2) {
        let mut sup = 0.0f64;
        for k in 0..=n_uniform {
            let t = ((k as f64) * cfg.dt).min(cfg.horizon);
            sup = sup.max((w[1].value_at(t) - w[0].value_at(t)).abs());
        }
        gaps.push(sup);
    }
    Ok(gaps)
}

/// Small-jump drift b~(x) = int_0^1 G(x,z) dz/z^2, defined exactly when
/// beta(x) < 1.
pub fn compute_btilde(model: &ModelSpec, x: f64) -> Result<f64> {
    if let JumpKind::BuiltinStableLike { beta_tilde } = &model.jump {
        let beta = beta_tilde.eval(x)?;
        if beta >= 1.0 {
            return Err(Error::Divergent(format!(
                "btilde undefined: beta({x}) = {beta} >= 1"
            )));
        }
    }
    quad::integrate_to_zero(
        &mut |z| Ok(model.jump_size(x, z)? / (z * z)),
        1.0,
        32,
        "btilde",
    )
}

/// Generator applied to f at x:
/// b f' + sigma^2 f''/2 + int [f(x+G) - f(x) - G f'(x)] dz/z^2,
/// with f', f'' by central differences (step 1e-5) and the |z| < 1e-6
/// region replaced by its second-order Taylor value f''(x)/2 int G^2 dpi.
pub fn generator_apply(model: &ModelSpec, f: &Expr, x: f64, quad_n: usize) -> Result<f64> {
    const FD_STEP: f64 = 1e-5;
    const SINGULAR_EDGE: f64 = 1e-6;
    let fp = f.eval(x + FD_STEP)?;
    let fm = f.eval(x - FD_STEP)?;
    let f0 = f.eval(x)?;
    let d1 = (fp - fm) / (2.0 * FD_STEP);
    let d2 = (fp - 2.0 * f0 + fm) / (FD_STEP * FD_STEP);

    let sigma = model.eval_sigma(x)?;
    let b = model.eval_b(x)?;
    let mut total = b * d1 + 0.5 * sigma * sigma * d2;

    let outer = |sign: f64| -> Result<f64> {
        quad::integrate_geometric(
            &mut |z| {
                let g = model.jump_size(x, sign * z)?;
                Ok((f.eval(x + g)? - f0 - g * d1) / (z * z))
            },
            SINGULAR_EDGE,
            1.0,
            quad_n,
        )
    };
    total += outer(1.0)? + outer(-1.0)?;

    let inner = |sign: f64| -> Result<f64> {
        quad::integrate_to_zero(
            &mut |z| {
                let g = model.jump_size(x, sign * z)?;
                Ok(g * g / (z * z))
            },
            SINGULAR_EDGE,
            quad_n.max(16),
            "generator singular region",
        )
    };
    total += 0.5 * d2 * (inner(1.0)? + inner(-1.0)?);
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorCheck {
    pub t: f64,
    /// (mean f(M_t) - f(x0)) / t over the Monte Carlo ensemble
    pub mc_rate: f64,
    pub generator_value: f64,
}

/// Monte Carlo check of E[f(M_t)] = f(x0) + int_0^t E[Lf(M_s)] ds at
/// small times: the empirical rate should approach the generator value.
pub fn generator_consistency(
    model: &ModelSpec,
    f: &Expr,
    t_seq: &[f64],
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<Vec<GeneratorCheck>> {
    let generator_value = generator_apply(model, f, model.x0, cfg.quad_n)?;
    let f0 = f.eval(model.x0)?;
    let mut out = Vec::with_capacity(t_seq.len());
    for (ti, &t) in t_seq.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::invalid(
                "generator_consistency: times must be positive",
            ));
        }
        let values: Vec<Result<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let idx = (ti * n_paths + p) as u64;
                let seed = derive_seed(cfg.seed, "generator", idx);
                let run_cfg = SimulationConfig {
                    horizon: t,
                    seed,
                    ..*cfg
                };
                let ps = PointSystem::sample(t, cfg.z_min, derive_seed(seed, "points", 0))?;
                let path = simulate_path(model, &ps, &run_cfg)?;
                Ok(f.eval(path.final_value())?)
            })
            .collect();
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        let mc_rate = (stats::mean(&values) - f0) / t;
        out.push(GeneratorCheck {
            t,
            mc_rate,
            generator_value,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleStats {
    pub mean_z: f64,
    pub var_z: f64,
    /// MC average of int_0^t int_{C(z_min,1)} G(M_s, z)^2 dz/z^2 ds
    pub predicted_var: f64,
}

fn jump_variance_rate(model: &ModelSpec, x: f64, z_min: f64, quad_n: usize) -> Result<f64> {
    match &model.jump {
        JumpKind::BuiltinStableLike { beta_tilde } => {
            let beta = beta_tilde.eval(x)?;
            let p = 2.0 / beta - 1.0; // > 0 since beta < 2
            Ok(2.0 * (1.0 - z_min.powf(p)) / p)
        }
        JumpKind::Custom { .. } => {
            let pos = quad::integrate_geometric(
                &mut |z| Ok(model.jump_size(x, z)?.powi(2) / (z * z)),
                z_min,
                1.0,
                quad_n,
            )?;
            let neg = quad::integrate_geometric(
                &mut |z| Ok(model.jump_size(x, -z)?.powi(2) / (z * z)),
                z_min,
                1.0,
                quad_n,
            )?;
            Ok(pos + neg)
        }
    }
}

/// Empirical mean/variance of the compensated jump term Z_t against its
/// predictable variance.
pub fn martingale_check(
    model: &ModelSpec,
    t: f64,
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<MartingaleStats> {
    if n_paths < 2 {
        return Err(Error::invalid("martingale_check: need at least two paths"));
    }
    let const_rate = match &model.jump {
        JumpKind::BuiltinStableLike { beta_tilde } => beta_tilde
            .as_const()
            .map(|_| jump_variance_rate(model, model.x0, cfg.z_min, cfg.quad_n))
            .transpose()?,
        JumpKind::Custom { g } => {
            if !g.uses_var(crate::expr::Var::X) {
                Some(jump_variance_rate(model, model.x0, cfg.z_min, cfg.quad_n)?)
            } else {
                None
            }
        }
    };
    let rows: Vec<Result<(f64, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let seed = derive_seed(cfg.seed, "martingale", p as u64);
            let run_cfg = SimulationConfig {
                horizon: t,
                seed,
                ..*cfg
            };
            let ps = PointSystem::sample(t, cfg.z_min, derive_seed(seed, "points", 0))?;
            let path = simulate_path(model, &ps, &run_cfg)?;
            let z_t = *path.component_z().last().unwrap();
            let mut pred = 0.0;
            let times = path.times();
            for i in 1..path.len() {
                let d = times[i] - times[i - 1];
                if d == 0.0 {
                    continue;
                }
                let rate = match const_rate {
                    Some(r) => r,
                    None => jump_variance_rate(model, path.values()[i - 1], cfg.z_min, cfg.quad_n)?,
                };
                pred += rate * d;
            }
            Ok((z_t, pred))
        })
        .collect();
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let zs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let preds: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(MartingaleStats {
        mean_z: stats::mean(&zs),
        var_z: stats::variance(&zs),
        predicted_var: stats::mean(&preds),
    })
}
