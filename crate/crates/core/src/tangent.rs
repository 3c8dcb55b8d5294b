//! Tangent-process checks for the pure-jump stable-like model: rescaled
//! increments against truncated stable marginals, and the linear-in-time
//! moment bound under the index stopping time.
//!
//! The rescaling (M_{t0+alpha} - M_{t0}) / alpha^(1/beta0) maps the
//! model's jump marks |Z| in (z_min, 1) over [t0, t0+alpha] onto a stable
//! point system with marks in ((z_min/alpha)^(1/beta0), alpha^(-1/beta0))
//! per unit time. The matched comparator uses exactly those truncation
//! levels; for constant beta the two ensembles then follow the same law
//! and the KS test's rejection rate is its nominal level.

use crate::error::{Error, Result};
use crate::model::{JumpKind, ModelSpec};
use crate::points::PointSystem;
use crate::rng::derive_seed;
use crate::sde::{simulate_path, SimulationConfig};
use crate::stats::{self, ks_two_sample};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct RescaledEnsemble {
    pub t0: f64,
    pub alpha: f64,
    /// deterministic beta(t0) when t0 = 0; ensemble median otherwise
    pub beta0: f64,
    pub samples: Vec<f64>,
}

fn require_pure_jump(model: &ModelSpec) -> Result<()> {
    if !model.sigma_zero() {
        return Err(Error::invalid(
            "tangent analysis requires sigma = 0 (pure-jump model)",
        ));
    }
    if !model.b.is_zero_literal() {
        return Err(Error::invalid("tangent analysis requires b = 0"));
    }
    if !matches!(model.jump, JumpKind::BuiltinStableLike { .. }) {
        return Err(Error::invalid(
            "tangent analysis requires the built-in stable-like kernel",
        ));
    }
    Ok(())
}

/// Ensemble of (M_{t0+alpha} - M_{t0}) / alpha^(1/beta0) over independent
/// paths. beta0 is read from beta_tilde(M_{t0}) per path; the default
/// protocol t0 = 0 makes it the deterministic beta_tilde(x0).
pub fn rescale_increments(
    model: &ModelSpec,
    t0: f64,
    alpha: f64,
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<RescaledEnsemble> {
    require_pure_jump(model)?;
    if !(alpha > 0.0) || t0 < 0.0 {
        return Err(Error::invalid(
            "rescale_increments: need alpha > 0 and t0 >= 0",
        ));
    }
    let horizon = t0 + alpha;
    let rows: Vec<Result<(f64, f64)>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let seed = derive_seed(cfg.seed, "tangent", p as u64);
            let run_cfg = SimulationConfig {
                horizon,
                seed,
                ..*cfg
            };
            let ps = PointSystem::sample(horizon, cfg.z_min, derive_seed(seed, "points", 0))?;
            let path = simulate_path(model, &ps, &run_cfg)?;
            let m0 = if t0 == 0.0 {
                model.x0
            } else {
                path.value_at(t0)
            };
            let beta0 = model.local_index(m0)?;
            let sample = (path.final_value() - m0) / alpha.powf(1.0 / beta0);
            Ok((sample, beta0))
        })
        .collect();
    let rows: Vec<(f64, f64)> = rows.into_iter().collect::<Result<_>>()?;
    let samples: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let beta0 = if t0 == 0.0 {
        model.local_index(model.x0)?
    } else {
        let betas: Vec<f64> = rows.iter().map(|r| r.1).collect();
        stats::median(&betas)
    };
    Ok(RescaledEnsemble {
        t0,
        alpha,
        beta0,
        samples,
    })
}

/// Marginals at time `horizon` of the compensated stable integral with
/// Levy measure beta0 |u|^(-1-beta0) du truncated to z_lo < |u| < z_hi.
/// The compensator vanishes by symmetry, so the marginal is the plain
/// sum of signed jump sizes.
pub fn stable_marginals(
    beta0: f64,
    horizon: f64,
    z_lo: f64,
    z_hi: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(beta0 > 0.0 && beta0 < 2.0) {
        return Err(Error::invalid(format!(
            "stable index {beta0} outside (0,2)"
        )));
    }
    if !(z_lo > 0.0 && z_lo < z_hi) {
        return Err(Error::invalid("stable_marginals: need 0 < z_lo < z_hi"));
    }
    let lo_pow = z_lo.powf(-beta0);
    let hi_pow = z_hi.powf(-beta0);
    let mass = 2.0 * (lo_pow - hi_pow) * horizon;
    let samples: Vec<Result<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "stable", p as u64));
            let count = if mass == 0.0 {
                0
            } else {
                Poisson::new(mass)
                    .map_err(|e| Error::numerical(format!("poisson({mass}): {e}")))?
                    .sample(&mut rng) as usize
            };
            let mut acc = 0.0;
            for _ in 0..count {
                let v: f64 = rng.gen();
                let size = (lo_pow - v * (lo_pow - hi_pow)).powf(-1.0 / beta0);
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                acc += sign * size;
            }
            Ok(acc)
        })
        .collect();
    samples.into_iter().collect()
}

/// Jump counts of the truncated stable system per path; drawn from the
/// same per-path stream as `stable_marginals`, so the counts are exactly
/// the ones behind that ensemble.
pub fn stable_jump_counts(
    beta0: f64,
    horizon: f64,
    z_lo: f64,
    z_hi: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if !(beta0 > 0.0 && beta0 < 2.0) || !(z_lo > 0.0 && z_lo < z_hi) {
        return Err(Error::invalid("stable_jump_counts: bad parameters"));
    }
    let mass = 2.0 * (z_lo.powf(-beta0) - z_hi.powf(-beta0)) * horizon;
    (0..n_paths)
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "stable", p as u64));
            if mass == 0.0 {
                return Ok(0);
            }
            Ok(Poisson::new(mass)
                .map_err(|e| Error::numerical(format!("poisson({mass}): {e}")))?
                .sample(&mut rng) as usize)
        })
        .collect()
}

/// Unit-time stable marginals on z_min < |u| < z_cap (z_cap >= 1).
pub fn simulate_stable(
    beta0: f64,
    n_paths: usize,
    z_min: f64,
    z_cap: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(z_cap >= 1.0) {
        return Err(Error::invalid("simulate_stable: z_cap must be >= 1"));
    }
    stable_marginals(beta0, 1.0, z_min, z_cap, n_paths, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TangentRow {
    pub alpha: f64,
    pub ks: f64,
    pub p_value: f64,
}

/// KS distance between the rescaled-increment ensemble and the matched
/// truncated stable comparator, for each scale in `alpha_seq`
/// (strictly decreasing). Rows come back in the given order.
pub fn tangent_test(
    model: &ModelSpec,
    t0: f64,
    alpha_seq: &[f64],
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<Vec<TangentRow>> {
    require_pure_jump(model)?;
    if alpha_seq.is_empty() {
        return Err(Error::invalid("tangent_test: empty alpha sequence"));
    }
    for w in alpha_seq.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::invalid(
                "tangent_test: alphas must be strictly decreasing",
            ));
        }
    }
    let mut rows = Vec::with_capacity(alpha_seq.len());
    for (ai, &alpha) in alpha_seq.iter().enumerate() {
        let run_cfg = SimulationConfig {
            seed: derive_seed(cfg.seed, "tangent-alpha", ai as u64),
            ..*cfg
        };
        let ens = rescale_increments(model, t0, alpha, n_paths, &run_cfg)?;
        let inv = 1.0 / ens.beta0;
        let z_lo = (cfg.z_min / alpha).powf(inv);
        let z_hi = (1.0 / alpha).powf(inv);
        let comparator = stable_marginals(
            ens.beta0,
            1.0,
            z_lo,
            z_hi,
            n_paths,
            derive_seed(cfg.seed, "tangent-comparator", ai as u64),
        )?;
        let ks = ks_two_sample(&ens.samples, &comparator)?;
        rows.push(TangentRow {
            alpha,
            ks: ks.statistic,
            p_value: ks.p_value,
        });
    }
    Ok(rows)
}

/// MC estimates of E|M_{alpha ^ tau_eta}|^gamma / alpha, where tau_eta is
/// the first time the local index exceeds beta(0) + eta. The admissible
/// gamma band is (beta0+eta, 2) for beta0 >= 1 and
/// (beta0+eta, min(1, 2 beta0)) below 1.
pub fn moment_ratio(
    model: &ModelSpec,
    eta: f64,
    gamma: f64,
    alpha_seq: &[f64],
    n_paths: usize,
    cfg: &SimulationConfig,
) -> Result<Vec<(f64, f64)>> {
    if !(eta > 0.0) {
        return Err(Error::invalid("moment_ratio: eta must be positive"));
    }
    // degenerate no-jump kernel: the stopped process never moves
    if let JumpKind::Custom { g } = &model.jump {
        if g.is_zero_literal() && model.b.is_zero_literal() && model.sigma_zero() {
            return Ok(alpha_seq.iter().map(|&a| (a, 0.0)).collect());
        }
    }
    require_pure_jump(model)?;
    let beta0 = model.local_index(model.x0)?;
    let upper = if beta0 >= 1.0 {
        2.0
    } else {
        1.0f64.min(2.0 * beta0)
    };
    if !(gamma > beta0 + eta && gamma < upper) {
        return Err(Error::invalid(format!(
            "moment_ratio: gamma {gamma} outside the admissible band ({}, {upper})",
            beta0 + eta
        )));
    }
    let stop_level = beta0 + eta;
    let mut out = Vec::with_capacity(alpha_seq.len());
    for (ai, &alpha) in alpha_seq.iter().enumerate() {
        if !(alpha > 0.0) {
            return Err(Error::invalid("moment_ratio: alphas must be positive"));
        }
        let values: Vec<Result<f64>> = (0..n_paths)
            .into_par_iter()
            .map(|p| {
                let seed = derive_seed(cfg.seed, "moment", (ai * n_paths + p) as u64);
                let run_cfg = SimulationConfig {
                    horizon: alpha,
                    seed,
                    ..*cfg
                };
                let ps = PointSystem::sample(alpha, cfg.z_min, derive_seed(seed, "points", 0))?;
                let path = simulate_path(model, &ps, &run_cfg)?;
                // value at alpha ^ tau_eta on the sampled grid
                let mut stopped = path.final_value();
                for i in 0..path.len() {
                    if model.local_index(path.values()[i])? > stop_level {
                        stopped = path.values()[i];
                        break;
                    }
                }
                Ok(stopped.abs().powf(gamma))
            })
            .collect();
        let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
        out.push((alpha, stats::mean(&values) / alpha));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::points::JumpEvent;

    fn pure(beta: &str, band: (f64, f64)) -> ModelSpec {
        ModelSpec::pure_jump(parse_expr(beta).unwrap(), band)
    }

    #[test]
    fn rejects_non_pure_jump_models() {
        let mut m = pure("1.2", (1.2, 1.2));
        m.sigma = Some(parse_expr("1").unwrap());
        let cfg = SimulationConfig::default();
        assert!(rescale_increments(&m, 0.0, 0.1, 4, &cfg).is_err());
        let mut m = pure("1.2", (1.2, 1.2));
        m.b = parse_expr("0.3").unwrap();
        assert!(rescale_increments(&m, 0.0, 0.1, 4, &cfg).is_err());
    }

    #[test]
    fn single_jump_rescales_exactly() {
        let m = pure("1.25", (1.25, 1.25));
        let alpha = 0.125f64;
        let ps =
            PointSystem::from_events(vec![JumpEvent { t: 0.06, z: -0.3 }], alpha, 1e-3, 0).unwrap();
        let cfg = SimulationConfig {
            horizon: alpha,
            z_min: 1e-3,
            ..Default::default()
        };
        let path = simulate_path(&m, &ps, &cfg).unwrap();
        let sample = (path.final_value() - 0.0) / alpha.powf(0.8);
        let expect = -(0.3f64.powf(0.8)) / alpha.powf(0.8);
        assert_eq!(sample, expect);
    }

    #[test]
    fn no_jumps_give_zero_samples() {
        let m = pure("1.2", (1.2, 1.2));
        let cfg = SimulationConfig {
            z_min: 0.9999,
            ..Default::default()
        };
        let ens = rescale_increments(&m, 0.0, 0.01, 16, &cfg).unwrap();
        // with z_min ~ 1 and alpha = 0.01 the window almost surely has no jump
        let zeros = ens.samples.iter().filter(|s| **s == 0.0).count();
        assert!(zeros >= 14, "zeros {zeros}");
    }

    #[test]
    fn ensemble_median_near_zero() {
        let m = pure("1.0", (1.0, 1.0));
        let cfg = SimulationConfig {
            z_min: 1e-3,
            seed: 5,
            ..Default::default()
        };
        let ens = rescale_increments(&m, 0.0, 0.05, 400, &cfg).unwrap();
        assert_eq!(ens.beta0, 1.0);
        let med = stats::median(&ens.samples);
        // symmetric law: the median concentrates at 0
        assert!(med.abs() < 0.5, "median {med}");
    }

    #[test]
    fn stable_marginal_symmetry_and_count() {
        let samples = simulate_stable(1.0, 4000, 1e-3, 1.0, 7).unwrap();
        let negated: Vec<f64> = samples.iter().map(|s| -s).collect();
        let ks = ks_two_sample(&samples, &negated).unwrap();
        assert!(ks.p_value > 0.01, "p = {}", ks.p_value);
        let m = stats::mean(&samples);
        let sd = stats::variance(&samples).sqrt();
        assert!(m.abs() <= 3.0 * sd / (samples.len() as f64).sqrt() + 1e-12);
    }

    #[test]
    fn stable_self_similarity() {
        // S_alpha / alpha^(1/beta) against S_1 at a wide truncation
        let beta0 = 1.0;
        let alpha = 0.25;
        let n = 10_000;
        let a = stable_marginals(beta0, alpha, 1e-3, 50.0, n, 11).unwrap();
        let rescaled: Vec<f64> = a.iter().map(|v| v / alpha.powf(1.0 / beta0)).collect();
        let b = stable_marginals(beta0, 1.0, 1e-3, 50.0, n, 12).unwrap();
        let ks = ks_two_sample(&rescaled, &b).unwrap();
        assert!(
            ks.p_value > 0.01,
            "p = {} (D = {})",
            ks.p_value,
            ks.statistic
        );
    }

    #[test]
    fn constant_index_matches_comparator() {
        // both sides are the same generator up to sampling noise
        let m = pure("1.2", (1.2, 1.2));
        let cfg = SimulationConfig {
            z_min: 1e-3,
            seed: 20,
            ..Default::default()
        };
        let rows = tangent_test(&m, 0.0, &[0.05, 0.02], 3000, &cfg).unwrap();
        for r in &rows {
            assert!(r.p_value > 0.005, "alpha {}: p = {}", r.alpha, r.p_value);
        }
    }

    #[test]
    fn moment_ratio_zero_kernel_is_zero() {
        let m = ModelSpec {
            sigma: None,
            b: parse_expr("0").unwrap(),
            jump: crate::model::JumpKind::Custom {
                g: crate::expr::parse_kernel("0").unwrap(),
            },
            beta_band: (1.0, 1.0),
            hypothesis: crate::model::Hypothesis::None,
            x0: 0.0,
        };
        let cfg = SimulationConfig::default();
        let rows = moment_ratio(&m, 0.1, 1.5, &[0.1, 0.05], 4, &cfg).unwrap();
        for (_, r) in rows {
            assert_eq!(r, 0.0);
        }
    }

    #[test]
    fn moment_ratio_rejects_bad_gamma() {
        let m = pure("1.2", (1.2, 1.2));
        let cfg = SimulationConfig::default();
        assert!(moment_ratio(&m, 0.1, 1.2, &[0.1], 4, &cfg).is_err());
        assert!(moment_ratio(&m, 0.1, 2.1, &[0.1], 4, &cfg).is_err());
        let m = pure("0.6", (0.6, 0.6));
        // upper limit is min(1, 1.2) = 1
        assert!(moment_ratio(&m, 0.05, 1.05, &[0.1], 4, &cfg).is_err());
        assert!(moment_ratio(&m, 0.05, 0.9, &[0.1], 4, &cfg).is_ok());
    }
}
