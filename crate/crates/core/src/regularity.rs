//! Pointwise Holder exponents: oscillation-based estimation from sampled
//! paths, the closed-form exponent 1/(delta_t beta(t)) (capped by 1/2 in
//! the diffusive case), and the dyadic band statistic controlling the
//! small-jump increments.

use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::points::PointSystem;
use crate::rng::derive_seed;
use crate::sde::{simulate_path, SamplePath, SimulationConfig};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;

pub const DEFAULT_H_CAP: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum HolderFlag {
    Ok,
    /// regression slope >= 1: dominated by the polynomial part
    Smooth,
    /// t coincides with a jump node; the exponent convention there is 0
    AtJump,
    /// fewer than two usable scales
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HolderEstimate {
    pub t: f64,
    pub h_hat: f64,
    /// regression fit quality in [0, 1]
    pub r2: f64,
    pub scales_used: usize,
    pub flag: HolderFlag,
}

/// Oscillation of the path over [t - r, t + r]: sup |M_u - M_v| over the
/// grid nodes inside, counting left limits so jumps interior to the
/// window register fully.
fn oscillation(path: &SamplePath, t: f64, r: f64) -> f64 {
    let times = path.times();
    let lo = times.partition_point(|&u| u < t - r);
    let hi = times.partition_point(|&u| u <= t + r);
    if lo >= hi {
        return 0.0;
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for i in lo..hi {
        let v = path.values()[i];
        min = min.min(v);
        max = max.max(v);
        if path.is_jump(i) {
            let l = path.left_values()[i];
            min = min.min(l);
            max = max.max(l);
        }
    }
    max - min
}

/// h_hat(t) = least-squares slope of log2 osc_j against -j over
/// j in j_range, where osc_j is the oscillation on the window of radius
/// 2^-j around t. Slopes >= 1 are reported as `h_cap` with the Smooth
/// flag (the oscillation estimator cannot see past the polynomial part).
pub fn estimate_holder(
    path: &SamplePath,
    t: f64,
    j_range: (u32, u32),
    h_cap: f64,
) -> Result<HolderEstimate> {
    let (j_lo, j_hi) = j_range;
    if j_lo > j_hi {
        return Err(Error::invalid("estimate_holder: empty scale range"));
    }
    let times = path.times();
    let (start, end) = (times[0], *times.last().unwrap());
    let r_max = 2f64.powi(-(j_lo as i32));
    if t - r_max < start || t + r_max > end {
        return Err(Error::invalid(format!(
            "estimate_holder: t = {t} too close to the path boundary for scale 2^-{j_lo}"
        )));
    }
    // t sitting exactly on a jump node: exponent 0 by the cadlag convention
    let idx = path.index_at(t);
    if times[idx] == t && path.is_jump(idx) {
        return Ok(HolderEstimate {
            t,
            h_hat: 0.0,
            r2: 1.0,
            scales_used: 0,
            flag: HolderFlag::AtJump,
        });
    }

    let mut xs = Vec::with_capacity((j_hi - j_lo + 1) as usize);
    let mut ys = Vec::with_capacity(xs.capacity());
    for j in j_lo..=j_hi {
        let osc = oscillation(path, t, 2f64.powi(-(j as i32)));
        if osc > 0.0 {
            xs.push(-(j as f64));
            ys.push(osc.log2());
        }
    }
    if xs.len() < 2 {
        // flat path in every window
        return Ok(HolderEstimate {
            t,
            h_hat: h_cap,
            r2: 0.0,
            scales_used: xs.len(),
            flag: if xs.is_empty() {
                HolderFlag::Smooth
            } else {
                HolderFlag::Degenerate
            },
        });
    }
    let (slope, _, r2) = stats::linear_fit(&xs, &ys);
    if slope >= 1.0 - 1e-9 {
        return Ok(HolderEstimate {
            t,
            h_hat: h_cap,
            r2,
            scales_used: xs.len(),
            flag: HolderFlag::Smooth,
        });
    }
    Ok(HolderEstimate {
        t,
        h_hat: slope.clamp(0.0, h_cap),
        r2,
        scales_used: xs.len(),
        flag: HolderFlag::Ok,
    })
}

/// Closed-form pointwise exponent at a continuity time:
/// 1/(delta_t beta_t) capped by 1/2 when the diffusion is present,
/// uncapped in the pure-jump case.
pub fn theoretical_exponent(beta_t: f64, delta_t: f64, sigma_zero: bool) -> f64 {
    let jump_part = 1.0 / (delta_t * beta_t);
    if sigma_zero {
        jump_part
    } else {
        jump_part.min(0.5)
    }
}

/// Sampled local index path beta(u) = beta_tilde(M(u)), kept with left
/// limits at jump nodes.
#[derive(Debug, Clone)]
pub struct BetaPath {
    times: Vec<f64>,
    values: Vec<f64>,
    left_values: Vec<f64>,
}

impl BetaPath {
    pub fn from_path(path: &SamplePath, model: &ModelSpec) -> Result<BetaPath> {
        let mut values = Vec::with_capacity(path.len());
        let mut left_values = Vec::with_capacity(path.len());
        for i in 0..path.len() {
            values.push(model.local_index(path.values()[i])?);
            left_values.push(model.local_index(path.left_values()[i])?);
        }
        Ok(BetaPath {
            times: path.times().to_vec(),
            values,
            left_values,
        })
    }

    pub fn from_samples(times: Vec<f64>, values: Vec<f64>) -> BetaPath {
        let left_values = values.clone();
        BetaPath {
            times,
            values,
            left_values,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cadlag lookup.
    pub fn at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|&u| u <= t);
        if i == 0 {
            self.values[0]
        } else {
            self.values[i - 1]
        }
    }

    /// Supremum of the sampled values (and stored left limits) over the
    /// closed window [lo, hi].
    pub fn sup_on(&self, lo: f64, hi: f64) -> Option<f64> {
        let a = self.times.partition_point(|&u| u < lo);
        let b = self.times.partition_point(|&u| u <= hi);
        if a >= b {
            // no sample inside: use the value flowing into the window
            if a == 0 {
                return None;
            }
            return Some(self.values[a - 1]);
        }
        let mut sup = f64::NEG_INFINITY;
        for i in a..b {
            sup = sup.max(self.values[i]).max(self.left_values[i]);
        }
        Some(sup)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandEnvelope {
    pub m: u32,
    /// sup of beta over [s, t], plus 2/m
    pub beta_bar: f64,
    /// same over the window widened by 2^-m on both sides
    pub beta_hat: f64,
}

/// The freezing envelopes of the band decomposition. The window is
/// order-normalized and the widened window clipped to the sampled domain.
pub fn beta_envelope(beta: &BetaPath, s: f64, t: f64, m: u32) -> Result<BandEnvelope> {
    if m == 0 {
        return Err(Error::invalid("beta_envelope: m must be positive"));
    }
    let (lo, hi) = if s <= t { (s, t) } else { (t, s) };
    let domain = (
        *beta
            .times
            .first()
            .ok_or_else(|| Error::invalid("empty beta path"))?,
        *beta.times.last().unwrap(),
    );
    if hi < domain.0 || lo > domain.1 {
        return Err(Error::invalid(
            "beta_envelope: window outside the path domain",
        ));
    }
    let pad = 2f64.powi(-(m as i32));
    let bar = beta
        .sup_on(lo, hi)
        .ok_or_else(|| Error::invalid("beta_envelope: window empty after clipping"))?;
    let hat = beta
        .sup_on((lo - pad).max(domain.0), (hi + pad).min(domain.1))
        .unwrap();
    let add = 2.0 / m as f64;
    Ok(BandEnvelope {
        m,
        beta_bar: bar + add,
        beta_hat: hat + add,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BandStats {
    pub m: u32,
    pub delta: f64,
    pub eps: f64,
    pub n_paths: usize,
    /// threshold 6 m^2 of the normalized dyadic statistic
    pub threshold: f64,
    /// fraction of paths whose statistic exceeded the threshold
    pub exceed_frequency: f64,
    /// median of the per-path statistic, for diagnostics
    pub median_statistic: f64,
}

/// Per path: sup over dyadic pairs at level m+2 with |s-t| <= 2^-m of
/// 2^(m / (delta (beta_hat^m_{s,t} + eps))) |Z_small(t) - Z_small(s)|,
/// where Z_small is the jump component restricted to marks below
/// 2^(-m/delta). Returns the frequency of exceeding 6 m^2.
///
/// The continuum sup is approximated on dyadic endpoints two levels below
/// m; the truncation z_min must resolve the small-jump band.
pub fn band_statistic(
    model: &ModelSpec,
    delta: f64,
    eps: f64,
    m: u32,
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<BandStats> {
    if !(delta > 1.0) || !(eps > 0.0) {
        return Err(Error::invalid("band_statistic: need delta > 1 and eps > 0"));
    }
    if m < 6 {
        return Err(Error::invalid("band_statistic: m must be at least 6"));
    }
    let threshold_mark = 2f64.powf(-(m as f64) / delta);
    if cfg.z_min >= threshold_mark {
        return Err(Error::invalid(format!(
            "band_statistic: z_min = {} cannot resolve marks below 2^(-m/delta) = {}",
            cfg.z_min, threshold_mark
        )));
    }
    if cfg.horizon < 1.0 {
        return Err(Error::invalid("band_statistic: horizon must cover [0, 1]"));
    }

    let level = m + 2;
    let n_grid = 1usize << level;
    let g = 1.0 / n_grid as f64;
    let max_sep = 4usize; // 2^-m = 4 g
    let widen = 1usize << 2; // 2^-m in grid units

    let stats_per_path: Vec<Result<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let seed = derive_seed(cfg.seed, "band", p as u64);
            let run_cfg = SimulationConfig { seed, ..*cfg };
            let ps = PointSystem::sample(cfg.horizon, cfg.z_min, derive_seed(seed, "points", 0))?;
            let path = simulate_path(model, &ps, &run_cfg)?;

            // small-jump component at the dyadic grid points k*g,
            // accumulated from the driving events in time order
            let mut z_small = vec![0.0f64; n_grid + 1];
            let mut incr = vec![0.0f64; n_grid + 1];
            let events = ps.events_by_time();
            let mut state_idx = 0usize;
            for ev in &events {
                if ev.t > 1.0 {
                    break;
                }
                if ev.z.abs() > threshold_mark {
                    continue;
                }
                // left state at the jump
                while state_idx + 1 < path.len() && path.times()[state_idx + 1] <= ev.t {
                    state_idx += 1;
                }
                let left = if path.times()[state_idx] == ev.t {
                    path.left_values()[state_idx]
                } else {
                    path.values()[state_idx]
                };
                let mark = model.jump_size(left, ev.z)?;
                let cell = ((ev.t / g).ceil() as usize).min(n_grid);
                incr[cell] += mark;
            }
            let mut acc = 0.0;
            let mut any_jump = false;
            for k in 0..=n_grid {
                acc += incr[k];
                any_jump |= incr[k] != 0.0;
                z_small[k] = acc;
            }
            if !any_jump {
                return Ok(0.0);
            }

            // beta on the same grid
            let beta: Vec<f64> = (0..=n_grid)
                .map(|k| model.local_index(path.value_at(k as f64 * g)))
                .collect::<std::result::Result<_, _>>()?;

            let mut stat = 0.0f64;
            for i in 0..n_grid {
                for len in 1..=max_sep.min(n_grid - i) {
                    let jv = (z_small[i + len] - z_small[i]).abs();
                    if jv == 0.0 {
                        continue;
                    }
                    let w_lo = i.saturating_sub(widen);
                    let w_hi = (i + len + widen).min(n_grid);
                    let mut sup = f64::NEG_INFINITY;
                    for b in &beta[w_lo..=w_hi] {
                        sup = sup.max(*b);
                    }
                    let beta_hat = sup + 2.0 / m as f64;
                    let factor = 2f64.powf(m as f64 / (delta * (beta_hat + eps)));
                    stat = stat.max(factor * jv);
                }
            }
            Ok(stat)
        })
        .collect();
    let stats_per_path: Vec<f64> = stats_per_path.into_iter().collect::<Result<_>>()?;
    let threshold = 6.0 * (m as f64) * (m as f64);
    let exceed = stats_per_path.iter().filter(|s| **s >= threshold).count();
    Ok(BandStats {
        m,
        delta,
        eps,
        n_paths,
        threshold,
        exceed_frequency: exceed as f64 / n_paths as f64,
        median_statistic: stats::median(&stats_per_path),
    })
}
