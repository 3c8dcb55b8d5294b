//! Model coefficients and the admissibility checks on the jump kernel.
//!
//! A kernel G(x, z) is admissible when it is odd in z, asymptotically
//! |z|^(1/beta(x)) with beta ranging inside (0, 2), and log-Lipschitz in
//! x. The built-in stable-like kernel sign(z)|z|^(1/beta(x)) satisfies
//! all of this by construction; custom kernels get the same conditions
//! probed numerically on a sampling plan.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quad;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq)]
pub enum JumpKind {
    /// G0(x, z) = sign(z) |z|^(1/beta_tilde(x))
    BuiltinStableLike { beta_tilde: Expr },
    /// arbitrary two-variable kernel in x and z
    Custom { g: Expr },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    None,
    /// b smooth and Range beta_tilde inside [1, 2)
    CaseA,
    /// b smooth and the small-jump drift x -> int_0^1 G(x,z) dz/z^2 smooth
    CaseB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    /// diffusion coefficient; None means identically zero
    pub sigma: Option<Expr>,
    pub b: Expr,
    pub jump: JumpKind,
    /// declared range of the local index, must sit inside (0, 2)
    pub beta_band: (f64, f64),
    pub hypothesis: Hypothesis,
    pub x0: f64,
}

impl ModelSpec {
    /// Pure-jump stable-like model with zero drift, the configuration the
    /// tangent-process results are stated for.
    pub fn pure_jump(beta_tilde: Expr, beta_band: (f64, f64)) -> ModelSpec {
        ModelSpec {
            sigma: None,
            b: Expr::Num(0.0),
            jump: JumpKind::BuiltinStableLike { beta_tilde },
            beta_band,
            hypothesis: Hypothesis::None,
            x0: 0.0,
        }
    }

    pub fn sigma_zero(&self) -> bool {
        self.sigma.is_none()
    }

    pub fn eval_sigma(&self, x: f64) -> Result<f64> {
        match &self.sigma {
            None => Ok(0.0),
            Some(e) => Ok(e.eval(x)?),
        }
    }

    pub fn eval_b(&self, x: f64) -> Result<f64> {
        Ok(self.b.eval(x)?)
    }

    /// G(x, z); marks live on the annulus C(0, 1).
    pub fn jump_size(&self, x: f64, z: f64) -> Result<f64> {
        match &self.jump {
            JumpKind::BuiltinStableLike { beta_tilde } => {
                let beta = beta_tilde.eval(x)?;
                Ok(z.signum() * z.abs().powf(1.0 / beta))
            }
            JumpKind::Custom { g } => Ok(g.eval_xz(x, z)?),
        }
    }

    /// Local index beta_tilde(x). For custom kernels this is estimated
    /// from the log-log slope of G at small |z|.
    pub fn local_index(&self, x: f64) -> Result<f64> {
        match &self.jump {
            JumpKind::BuiltinStableLike { beta_tilde } => Ok(beta_tilde.eval(x)?),
            JumpKind::Custom { g } => {
                let mut num = 0.0;
                let mut den = 0.0;
                for k in 6..=9 {
                    let z = 10f64.powi(-k);
                    let gv = g.eval_xz(x, z)?.abs();
                    if gv <= 0.0 {
                        return Err(Error::numerical(format!(
                            "local_index: G({x}, {z}) vanishes"
                        )));
                    }
                    num += gv.ln();
                    den += z.ln();
                }
                let slope = num / den;
                if slope <= 0.0 {
                    return Err(Error::numerical("local_index: non-positive slope"));
                }
                Ok(1.0 / slope)
            }
        }
    }

    /// Structural invariants of the declared metadata.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.beta_band;
        if !(lo > 0.0 && lo <= hi && hi < 2.0) {
            return Err(Error::invalid(format!(
                "beta_band ({lo}, {hi}) must satisfy 0 < lo <= hi < 2"
            )));
        }
        match self.hypothesis {
            Hypothesis::CaseA if lo < 1.0 => {
                return Err(Error::invalid(
                    "hypothesis case_a needs Range(beta_tilde) inside [1, 2)",
                ))
            }
            Hypothesis::CaseB if hi >= 1.0 => {
                return Err(Error::invalid(
                    "hypothesis case_b needs Range(beta_tilde) below 1 so the \
                     small-jump drift integral converges",
                ))
            }
            _ => {}
        }
        if let JumpKind::BuiltinStableLike { beta_tilde } = &self.jump {
            if let Some(c) = beta_tilde.as_const() {
                if c <= 0.0 || c >= 2.0 {
                    return Err(Error::invalid(format!(
                        "beta_tilde constant {c} outside beta_band range (0, 2)"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Grid on which the admissibility conditions are probed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingPlan {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_x: usize,
    /// |z| decades probed, 10^-hi_exp .. 10^-lo_exp
    pub z_lo_exp: i32,
    pub z_hi_exp: i32,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            x_lo: -5.0,
            x_hi: 5.0,
            n_x: 11,
            z_lo_exp: 2,
            z_hi_exp: 8,
        }
    }
}

impl SamplingPlan {
    fn xs(&self) -> Vec<f64> {
        if self.n_x <= 1 {
            return vec![self.x_lo];
        }
        let step = (self.x_hi - self.x_lo) / (self.n_x - 1) as f64;
        (0..self.n_x).map(|i| self.x_lo + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionResult {
    pub pass: bool,
    pub value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmissibilityReport {
    /// condition 1: odd symmetry and common sign across states
    pub symmetry: ConditionResult,
    /// condition 2: log-log slope stabilizes to 1/beta
    pub stable_like: ConditionResult,
    /// condition 3: log-Lipschitz constant in x
    pub log_lipschitz: ConditionResult,
    /// condition 4: index band containment plus the small-|z| envelope
    pub boundedness: ConditionResult,
    /// sup_x [sigma^2 + b^2 + int G^2 dpi] / (1 + x^2)
    pub growth_k0: f64,
    /// sup_x of the jump part int G^2 dpi alone
    pub jump_growth: f64,
    /// sup over x pairs of the squared-difference integral / |x-y|^2
    pub lipschitz_k1: f64,
    pub beta_estimates: Vec<(f64, f64)>,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.symmetry.pass
            && self.stable_like.pass
            && self.log_lipschitz.pass
            && self.boundedness.pass
            && self.growth_k0.is_finite()
            && self.lipschitz_k1.is_finite()
    }

    pub fn summary_lines(&self) -> Vec<String> {
        let fmt = |name: &str, c: &ConditionResult| {
            format!(
                "{:<14} {} value={:.6} {}",
                name,
                if c.pass { "pass" } else { "FAIL" },
                c.value,
                c.detail
            )
        };
        vec![
            fmt("symmetry", &self.symmetry),
            fmt("stable-like", &self.stable_like),
            fmt("log-lipschitz", &self.log_lipschitz),
            fmt("boundedness", &self.boundedness),
            format!(
                "growth         K0={:.6} (jump part {:.6})",
                self.growth_k0, self.jump_growth
            ),
            format!("lipschitz      K1={:.6}", self.lipschitz_k1),
        ]
    }
}

const SLOPE_TOL: f64 = 0.05;
const ENVELOPE_EPS: f64 = 0.05;

/// Probe the four class conditions and the two integral conditions on the
/// sampling plan. Nothing here aborts: failures are carried in the report.
pub fn check_admissible(model: &ModelSpec, plan: &SamplingPlan) -> AdmissibilityReport {
    let xs = plan.xs();
    let z_grid: Vec<f64> = (plan.z_lo_exp..=plan.z_hi_exp)
        .map(|k| 10f64.powi(-k))
        .collect();

    let symmetry = check_symmetry(model, &xs, &z_grid);
    let (stable_like, beta_estimates) = check_stable_like(model, &xs, plan);
    let log_lipschitz = check_log_lipschitz(model, &xs, &z_grid);
    let boundedness = check_boundedness(model, &beta_estimates);
    let (growth_k0, jump_growth) = growth_constants(model, &xs);
    let lipschitz_k1 = lipschitz_constant(model, &xs);

    AdmissibilityReport {
        symmetry,
        stable_like,
        log_lipschitz,
        boundedness,
        growth_k0,
        jump_growth,
        lipschitz_k1,
        beta_estimates,
    }
}

fn check_symmetry(model: &ModelSpec, xs: &[f64], z_grid: &[f64]) -> ConditionResult {
    let mut worst = 0.0f64;
    for &x in xs {
        for &z in z_grid {
            let (gp, gn) = match (model.jump_size(x, z), model.jump_size(x, -z)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    return ConditionResult {
                        pass: false,
                        value: f64::NAN,
                        detail: format!("kernel evaluation failed at x={x}, z={z}"),
                    }
                }
            };
            if gp == 0.0 || gn == 0.0 {
                return ConditionResult {
                    pass: false,
                    value: f64::INFINITY,
                    detail: format!("G vanishes at x={x}, |z|={z}"),
                };
            }
            let dev = (gp + gn).abs() / gp.abs().max(gn.abs());
            worst = worst.max(dev);
            if gp <= 0.0 {
                return ConditionResult {
                    pass: false,
                    value: worst,
                    detail: format!("G(x, z) not positive for z > 0 at x={x}, z={z}"),
                };
            }
        }
    }
    // common sign across states: G(x,z) G(y,z) > 0 for all probed pairs
    for &z in z_grid {
        for w in xs.windows(2) {
            let a = model.jump_size(w[0], z).unwrap_or(f64::NAN);
            let b = model.jump_size(w[1], z).unwrap_or(f64::NAN);
            if !(a * b > 0.0) {
                return ConditionResult {
                    pass: false,
                    value: worst,
                    detail: format!("sign of G flips between x={} and x={}", w[0], w[1]),
                };
            }
        }
    }
    ConditionResult {
        pass: worst <= 1e-9,
        value: worst,
        detail: "max relative asymmetry |G(x,z)+G(x,-z)|".into(),
    }
}

fn check_stable_like(
    model: &ModelSpec,
    xs: &[f64],
    plan: &SamplingPlan,
) -> (ConditionResult, Vec<(f64, f64)>) {
    let mut worst = 0.0f64;
    let mut estimates = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut slopes = Vec::new();
        for k in plan.z_lo_exp..=plan.z_hi_exp {
            let z = 10f64.powi(-k);
            match model.jump_size(x, z) {
                Ok(g) if g.abs() > 0.0 => slopes.push(g.abs().ln() / z.ln()),
                _ => {
                    return (
                        ConditionResult {
                            pass: false,
                            value: f64::NAN,
                            detail: format!("log-slope undefined at x={x}, z={z}"),
                        },
                        estimates,
                    )
                }
            }
        }
        let last = slopes[slopes.len() - 1];
        let prev = slopes[slopes.len() - 2];
        let drift = (last - prev).abs();
        let deviation = match &model.jump {
            JumpKind::BuiltinStableLike { beta_tilde } => match beta_tilde.eval(x) {
                Ok(beta) => (last - 1.0 / beta).abs(),
                Err(_) => f64::NAN,
            },
            JumpKind::Custom { .. } => drift,
        };
        worst = worst.max(deviation.max(drift));
        estimates.push((x, 1.0 / last));
    }
    (
        ConditionResult {
            pass: worst <= SLOPE_TOL,
            value: worst,
            detail: format!("max slope deviation over x grid (tol {SLOPE_TOL})"),
        },
        estimates,
    )
}

fn check_log_lipschitz(model: &ModelSpec, xs: &[f64], z_grid: &[f64]) -> ConditionResult {
    let mut c = 0.0f64;
    for w in xs.windows(2) {
        let dx = (w[1] - w[0]).abs();
        if dx == 0.0 {
            continue;
        }
        for &z in z_grid {
            let (a, b) = match (model.jump_size(w[0], z), model.jump_size(w[1], z)) {
                (Ok(a), Ok(b)) if a.abs() > 0.0 && b.abs() > 0.0 => (a.abs(), b.abs()),
                _ => {
                    return ConditionResult {
                        pass: false,
                        value: f64::INFINITY,
                        detail: "log ratio undefined (kernel vanished or failed)".into(),
                    }
                }
            };
            c = c.max(((b.ln() - a.ln()) / z.ln().abs()).abs() / dx);
        }
    }
    ConditionResult {
        pass: c.is_finite(),
        value: c,
        detail: "estimated log-Lipschitz constant C".into(),
    }
}

fn check_boundedness(model: &ModelSpec, beta_estimates: &[(f64, f64)]) -> ConditionResult {
    let (lo, hi) = model.beta_band;
    let mut detail = String::new();
    let mut pass = true;
    let mut worst_margin = 0.0f64;
    for &(x, beta) in beta_estimates {
        if !(beta >= lo - 1e-6 && beta <= hi + 1e-6) || !(beta > 0.0 && beta < 2.0) {
            pass = false;
            detail = format!("beta({x}) = {beta} escapes band ({lo}, {hi})");
            break;
        }
        // envelope |G| <= |z|^(1/(beta+eps)) for small |z|
        for k in 4..=8 {
            let z = 10f64.powi(-k);
            let g = match model.jump_size(x, z) {
                Ok(g) => g.abs(),
                Err(_) => {
                    pass = false;
                    detail = format!("kernel failed at x={x}, z={z}");
                    break;
                }
            };
            let bound = z.powf(1.0 / (beta + ENVELOPE_EPS));
            let margin = g / bound;
            worst_margin = worst_margin.max(margin);
            if margin > 1.0 + 1e-9 {
                pass = false;
                detail = format!("envelope violated at x={x}, z={z}: |G|={g}, bound={bound}");
                break;
            }
        }
        if !pass {
            break;
        }
    }
    if detail.is_empty() {
        detail =
            format!("band ({lo}, {hi}) contains all index estimates; envelope eps={ENVELOPE_EPS}");
    }
    ConditionResult {
        pass,
        value: worst_margin,
        detail,
    }
}

fn jump_second_moment(model: &ModelSpec, x: f64) -> Result<f64> {
    let pos = quad::integrate_to_zero(
        &mut |z| Ok(model.jump_size(x, z)?.powi(2) / (z * z)),
        1.0,
        32,
        "growth integral",
    )?;
    let neg = quad::integrate_to_zero(
        &mut |z| Ok(model.jump_size(x, -z)?.powi(2) / (z * z)),
        1.0,
        32,
        "growth integral",
    )?;
    Ok(pos + neg)
}

fn growth_constants(model: &ModelSpec, xs: &[f64]) -> (f64, f64) {
    let mut k0 = 0.0f64;
    let mut jump_only = 0.0f64;
    for &x in xs {
        let jump = match jump_second_moment(model, x) {
            Ok(v) => v,
            Err(_) => return (f64::INFINITY, f64::INFINITY),
        };
        let s = model.eval_sigma(x).unwrap_or(f64::NAN);
        let b = model.eval_b(x).unwrap_or(f64::NAN);
        jump_only = jump_only.max(jump);
        k0 = k0.max((s * s + b * b + jump) / (1.0 + x * x));
    }
    (k0, jump_only)
}

fn lipschitz_constant(model: &ModelSpec, xs: &[f64]) -> f64 {
    let mut k1 = 0.0f64;
    for w in xs.windows(2) {
        let (x, y) = (w[0], w[1]);
        let dx2 = (y - x) * (y - x);
        if dx2 == 0.0 {
            continue;
        }
        let diff = |z: f64| -> Result<f64> {
            let d = model.jump_size(x, z)? - model.jump_size(y, z)?;
            Ok(d * d / (z * z))
        };
        let int = quad::integrate_to_zero(&mut |z| diff(z), 1.0, 32, "lipschitz integral")
            .and_then(|p| {
                Ok(p + quad::integrate_to_zero(&mut |z| diff(-z), 1.0, 32, "lipschitz integral")?)
            });
        let int = match int {
            Ok(v) => v,
            Err(_) => return f64::INFINITY,
        };
        let ds = model.eval_sigma(x).unwrap_or(0.0) - model.eval_sigma(y).unwrap_or(0.0);
        let db = model.eval_b(x).unwrap_or(0.0) - model.eval_b(y).unwrap_or(0.0);
        k1 = k1.max((ds * ds + db * db + int) / dx2);
    }
    k1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;
    use crate::expr::parse_kernel;

    fn builtin(beta: &str, band: (f64, f64)) -> ModelSpec {
        ModelSpec::pure_jump(parse_expr(beta).unwrap(), band)
    }

    #[test]
    fn validate_band_and_hypotheses() {
        assert!(builtin("1.2", (1.2, 1.2)).validate().is_ok());
        assert!(builtin("1.2", (0.0, 1.2)).validate().is_err());
        assert!(builtin("1.2", (1.2, 2.0)).validate().is_err());
        assert!(builtin("2.5", (1.0, 1.9)).validate().is_err());

        let mut m = builtin("1.2", (1.2, 1.2));
        m.hypothesis = Hypothesis::CaseA;
        assert!(m.validate().is_ok());
        let mut m = builtin("0.8", (0.8, 0.8));
        m.hypothesis = Hypothesis::CaseA;
        assert!(m.validate().is_err());
        let mut m = builtin("0.8", (0.8, 0.8));
        m.hypothesis = Hypothesis::CaseB;
        assert!(m.validate().is_ok());
        let mut m = builtin("1.2", (1.2, 1.2));
        m.hypothesis = Hypothesis::CaseB;
        assert!(m.validate().is_err());
    }

    #[test]
    fn builtin_jump_sizes() {
        let m = builtin("1.25", (1.25, 1.25));
        let g = m.jump_size(0.0, 0.5).unwrap();
        assert!((g - 0.5f64.powf(0.8)).abs() < 1e-15);
        let g = m.jump_size(3.0, -0.5).unwrap();
        assert!((g + 0.5f64.powf(0.8)).abs() < 1e-15);
    }

    #[test]
    fn clamp_profile_passes_all_conditions() {
        let m = builtin("clamp(1 + 0.5*sin(x), 0.6, 1.8)", (0.6, 1.8));
        let rep = check_admissible(&m, &SamplingPlan::default());
        assert!(rep.all_pass(), "{:#?}", rep.summary_lines());
        // condition-2 slope at x = 0 is 1/beta(0) = 1
        let (_, beta0) = rep
            .beta_estimates
            .iter()
            .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
            .copied()
            .unwrap();
        assert!((beta0 - 1.0).abs() <= 0.05, "beta estimate {beta0}");
    }

    #[test]
    fn non_symmetric_kernel_fails_condition_one() {
        let m = ModelSpec {
            sigma: None,
            b: parse_expr("0").unwrap(),
            jump: JumpKind::Custom {
                g: parse_kernel("pow(max(z, 0), 2)").unwrap(),
            },
            beta_band: (0.5, 0.5),
            hypothesis: Hypothesis::None,
            x0: 0.0,
        };
        let rep = check_admissible(&m, &SamplingPlan::default());
        assert!(!rep.symmetry.pass);
        assert!(!rep.all_pass());
    }

    #[test]
    fn growth_integral_half_beta() {
        // beta = 0.5: int_{C(0,1)} |z|^4 dz/z^2 = 2/3
        let m = builtin("0.5", (0.5, 0.5));
        let rep = check_admissible(&m, &SamplingPlan::default());
        assert!((rep.jump_growth - 2.0 / 3.0).abs() < 1e-9);
        assert!((rep.growth_k0 - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn custom_odd_kernel_index_estimate() {
        // sign(z) z^2 written without sign(): z*abs(z)
        let m = ModelSpec {
            sigma: None,
            b: parse_expr("0").unwrap(),
            jump: JumpKind::Custom {
                g: parse_kernel("z*abs(z)").unwrap(),
            },
            beta_band: (0.5, 0.5),
            hypothesis: Hypothesis::None,
            x0: 0.0,
        };
        let beta = m.local_index(0.3).unwrap();
        assert!((beta - 0.5).abs() < 1e-6, "beta {beta}");
        let rep = check_admissible(&m, &SamplingPlan::default());
        assert!(rep.symmetry.pass);
        assert!(rep.stable_like.pass);
    }
}
