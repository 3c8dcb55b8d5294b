//! Theoretical multifractal spectra (pointwise and local) and their
//! empirical box-counting counterparts.
//!
//! With a non-vanishing diffusion the pointwise spectrum is linear with
//! slope beta(t) or beta(t-) (whichever is larger) up to h = 1/2, takes
//! the value 1 there and is -infinity beyond. Without diffusion the shape
//! is F_cont at continuity times and F_jump at jump times, with the
//! endpoint values resolved by strict-local-minimum flags of the modified
//! index maps, the sign of the index drop at the jump, and whether the
//! approximation rate equals 1.

use crate::error::{Error, Result};
use crate::points::{approx_rate_grid, PointSystem};
use crate::regularity::BetaPath;
use crate::stats;
use serde::Serialize;
use std::io::Write;

pub const NEG_INF: f64 = f64::NEG_INFINITY;
const BREAK_TOL: f64 = 1e-12;
/// |delta_hat - 1| tolerance when testing delta_t = 1 on estimated rates
pub const DELTA_ONE_TOL: f64 = 0.05;

/// Endpoint value of a spectrum shape at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Endpoint {
    One,
    Zero,
    NegInf,
}

impl Endpoint {
    fn value(self) -> f64 {
        match self {
            Endpoint::One => 1.0,
            Endpoint::Zero => 0.0,
            Endpoint::NegInf => NEG_INF,
        }
    }
}

/// Value at the inner breakpoint 1/gamma1 of F_jump: either 1 or the
/// symbolic h*gamma2, resolved only at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LeftEndpoint {
    One,
    SymbolicHGamma2,
}

/// F_cont(c, gamma, h): gamma*h on [0, 1/gamma), c at 1/gamma, -inf after.
pub fn f_cont(c: Endpoint, gamma: f64, h: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::invalid(format!(
            "f_cont: gamma {gamma} outside (0,2)"
        )));
    }
    if !(h >= 0.0) {
        return Err(Error::invalid("f_cont: h must be non-negative"));
    }
    let brk = 1.0 / gamma;
    if (h - brk).abs() <= BREAK_TOL {
        Ok(c.value())
    } else if h < brk {
        Ok(gamma * h)
    } else {
        Ok(NEG_INF)
    }
}

/// F_jump(c1, c2, gamma1, gamma2, h) for gamma1 > gamma2:
/// gamma1*h on [0, 1/gamma1), c1 at 1/gamma1 (h*gamma2 when symbolic),
/// gamma2*h on (1/gamma1, 1/gamma2), c2 at 1/gamma2, -inf beyond.
pub fn f_jump(c1: LeftEndpoint, c2: Endpoint, gamma1: f64, gamma2: f64, h: f64) -> Result<f64> {
    if !(gamma1 > gamma2) {
        return Err(Error::invalid(format!(
            "f_jump: gamma ordering violated ({gamma1} <= {gamma2})"
        )));
    }
    if !(gamma2 > 0.0 && gamma1 < 2.0) {
        return Err(Error::invalid("f_jump: gammas must lie in (0,2)"));
    }
    if !(h >= 0.0) {
        return Err(Error::invalid("f_jump: h must be non-negative"));
    }
    let b1 = 1.0 / gamma1;
    let b2 = 1.0 / gamma2;
    if (h - b1).abs() <= BREAK_TOL {
        return Ok(match c1 {
            LeftEndpoint::One => 1.0,
            LeftEndpoint::SymbolicHGamma2 => h * gamma2,
        });
    }
    if (h - b2).abs() <= BREAK_TOL {
        return Ok(c2.value());
    }
    if h < b1 {
        Ok(gamma1 * h)
    } else if h < b2 {
        Ok(gamma2 * h)
    } else {
        Ok(NEG_INF)
    }
}

/// Everything the sigma = 0 case dispatch needs to know about one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointContext {
    pub sigma_zero: bool,
    pub beta_t: f64,
    pub beta_t_minus: f64,
    pub delta_t: f64,
    pub is_jump_time: bool,
    /// strict local minimum of the modified index map on the right side
    pub lm_plus: bool,
    /// strict local minimum of the modified index map on the left side
    pub lm_minus: bool,
}

impl PointContext {
    pub fn continuity(sigma_zero: bool, beta: f64, delta: f64, lm: bool) -> PointContext {
        PointContext {
            sigma_zero,
            beta_t: beta,
            beta_t_minus: beta,
            delta_t: delta,
            is_jump_time: false,
            lm_plus: lm,
            lm_minus: lm,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, b) in [("beta_t", self.beta_t), ("beta_t_minus", self.beta_t_minus)] {
            if !(b > 0.0 && b < 2.0) {
                return Err(Error::invalid(format!("{name} = {b} outside (0,2)")));
            }
        }
        if !(self.delta_t >= 1.0) {
            return Err(Error::invalid("delta_t must be >= 1"));
        }
        if !self.is_jump_time && (self.beta_t - self.beta_t_minus).abs() > 1e-9 {
            return Err(Error::invalid(
                "inconsistent context: beta_t != beta_t_minus at a continuity time",
            ));
        }
        Ok(())
    }

    pub fn beta_max(&self) -> f64 {
        self.beta_t.max(self.beta_t_minus)
    }

    pub fn beta_min(&self) -> f64 {
        self.beta_t.min(self.beta_t_minus)
    }

    /// Drop of the local index across the jump, beta(t-) - beta(t).
    /// The c2 = 0 clause of the jump-time theorem fires exactly when the
    /// index drops (so the right limit realizes beta_min) and delta_t = 1.
    pub fn index_drop(&self) -> f64 {
        self.beta_t_minus - self.beta_t
    }

    fn delta_is_one(&self) -> bool {
        (self.delta_t - 1.0).abs() <= DELTA_ONE_TOL
    }
}

/// Resolved spectrum shape with the theorem clause that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumCase {
    pub kind: CaseKind,
    pub provenance: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CaseKind {
    Cont {
        c: Endpoint,
        gamma: f64,
    },
    Jump {
        c1: LeftEndpoint,
        c2: Endpoint,
        gamma1: f64,
        gamma2: f64,
    },
}

/// Case dispatch for the pure-jump spectrum theorems. Only meaningful
/// when sigma = 0; the diffusive shape needs no case analysis.
pub fn resolve_case(ctx: &PointContext) -> Result<SpectrumCase> {
    ctx.validate()?;
    if !ctx.sigma_zero {
        return Err(Error::invalid(
            "resolve_case: only the sigma = 0 shape has cases",
        ));
    }
    if !ctx.is_jump_time {
        let lm = ctx.lm_plus && ctx.lm_minus;
        let (c, provenance) = if !lm {
            (Endpoint::One, "cont:not-local-min")
        } else if ctx.delta_is_one() {
            (Endpoint::Zero, "cont:local-min,delta=1")
        } else {
            (Endpoint::NegInf, "cont:local-min,delta!=1")
        };
        return Ok(SpectrumCase {
            kind: CaseKind::Cont {
                c,
                gamma: ctx.beta_t,
            },
            provenance,
        });
    }

    let c2_of = |ctx: &PointContext| -> (Endpoint, bool) {
        if !ctx.lm_minus {
            (Endpoint::One, false)
        } else if ctx.index_drop() > 0.0 && ctx.delta_is_one() {
            (Endpoint::Zero, true)
        } else {
            (Endpoint::NegInf, true)
        }
    };

    let (gamma1, gamma2) = (ctx.beta_max(), ctx.beta_min());
    if gamma1 - gamma2 <= 1e-12 {
        // degenerate jump: the index does not move, both breakpoints
        // coincide and the shape collapses to F_cont with the outer
        // endpoint value
        let (c2, _) = c2_of(ctx);
        return Ok(SpectrumCase {
            kind: CaseKind::Cont {
                c: c2,
                gamma: gamma2,
            },
            provenance: "jump:degenerate-equal-indices",
        });
    }

    let c1 = if ctx.lm_plus {
        LeftEndpoint::SymbolicHGamma2
    } else {
        LeftEndpoint::One
    };
    let (c2, minus_special) = c2_of(ctx);
    let provenance = match (ctx.lm_plus, minus_special, c2) {
        (false, false, _) => "jump:no-local-min",
        (false, true, Endpoint::Zero) => "jump:lm-minus,drop,delta=1",
        (false, true, _) => "jump:lm-minus,rise-or-delta!=1",
        (true, false, _) => "jump:lm-plus-only",
        (true, true, Endpoint::Zero) => "jump:lm-both,drop,delta=1",
        (true, true, _) => "jump:lm-both,rise-or-delta!=1",
    };
    Ok(SpectrumCase {
        kind: CaseKind::Jump {
            c1,
            c2,
            gamma1,
            gamma2,
        },
        provenance,
    })
}

/// Pointwise multifractal spectrum of M at one time, as a function of h.
/// Returns -infinity outside the support.
pub fn pointwise_spectrum(ctx: &PointContext, h: f64) -> Result<f64> {
    ctx.validate()?;
    if !(h >= 0.0) {
        return Err(Error::invalid("pointwise_spectrum: h must be non-negative"));
    }
    if !ctx.sigma_zero {
        // diffusive shape: linear with slope beta(t) v beta(t-) up to 1/2
        if (h - 0.5).abs() <= BREAK_TOL {
            return Ok(1.0);
        }
        return Ok(if h < 0.5 { h * ctx.beta_max() } else { NEG_INF });
    }
    let case = resolve_case(ctx)?;
    evaluate_case(&case, h)
}

pub fn evaluate_case(case: &SpectrumCase, h: f64) -> Result<f64> {
    match case.kind {
        CaseKind::Cont { c, gamma } => f_cont(c, gamma, h),
        CaseKind::Jump {
            c1,
            c2,
            gamma1,
            gamma2,
        } => f_jump(c1, c2, gamma1, gamma2, h),
    }
}

// ---------------------------------------------------------------------------
// local spectrum
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveFlag {
    Ok,
    /// h collides with 1/beta at some jump time: the theory leaves the
    /// value open there, it is never reported as a number
    Undefined,
    /// empty admissible set / empty bin
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalValue {
    /// dimension, -inf allowed; NaN when flag != Ok
    pub d: f64,
    pub flag: CurveFlag,
}

/// Everything the local spectrum needs about an interval: the sampled
/// index values on it and the index values at its jump times (the
/// exceptional set (beta(J))^-1).
#[derive(Debug, Clone)]
pub struct IntervalContext {
    pub sigma_zero: bool,
    pub beta_samples: Vec<f64>,
    pub beta_jump_values: Vec<f64>,
}

impl IntervalContext {
    pub fn gamma_sup(&self) -> f64 {
        self.beta_samples.iter().fold(NEG_INF, |a, &b| a.max(b))
    }

    pub fn gamma_inf(&self) -> f64 {
        self.beta_samples
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// gamma_I(h) = sup{beta(s) : beta(s) <= 1/h}; None when empty.
    pub fn gamma_at(&self, h: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        for &b in &self.beta_samples {
            if b * h <= 1.0 + 1e-15 {
                best = Some(best.map_or(b, |v: f64| v.max(b)));
            }
        }
        best
    }
}

/// Local multifractal spectrum on an interval.
pub fn local_spectrum(ctx: &IntervalContext, h: f64) -> Result<LocalValue> {
    if ctx.beta_samples.is_empty() {
        return Err(Error::invalid("local_spectrum: no beta samples"));
    }
    if !(h >= 0.0) {
        return Err(Error::invalid("local_spectrum: h must be non-negative"));
    }
    if !ctx.sigma_zero {
        let d = if (h - 0.5).abs() <= BREAK_TOL {
            1.0
        } else if h < 0.5 {
            h * ctx.gamma_sup()
        } else {
            NEG_INF
        };
        return Ok(LocalValue {
            d,
            flag: CurveFlag::Ok,
        });
    }
    // exceptional set (beta(J))^-1
    for &bj in &ctx.beta_jump_values {
        if (h - 1.0 / bj).abs() <= 1e-9 {
            return Ok(LocalValue {
                d: f64::NAN,
                flag: CurveFlag::Undefined,
            });
        }
    }
    let inv_inf = 1.0 / ctx.gamma_inf();
    if (h - inv_inf).abs() <= 1e-9 {
        // right edge of the support: the theory does not assign a value
        return Ok(LocalValue {
            d: f64::NAN,
            flag: CurveFlag::Undefined,
        });
    }
    if h > inv_inf {
        return Ok(LocalValue {
            d: NEG_INF,
            flag: CurveFlag::Ok,
        });
    }
    match ctx.gamma_at(h) {
        Some(g) => Ok(LocalValue {
            d: h * g,
            flag: CurveFlag::Ok,
        }),
        None => Ok(LocalValue {
            d: NEG_INF,
            flag: CurveFlag::Empty,
        }),
    }
}

/// The local spectrum as the sup of pointwise spectra: returns both sides
/// so tests can check the sup-consistency identity. The provider maps a
/// grid time to its point context.
pub fn sup_consistency<F>(
    interval: (f64, f64),
    h: f64,
    t_grid: usize,
    provider: F,
) -> Result<(LocalValue, f64)>
where
    F: Fn(f64) -> PointContext,
{
    if t_grid == 0 || !(interval.1 > interval.0) {
        return Err(Error::invalid("sup_consistency: bad interval/grid"));
    }
    let step = (interval.1 - interval.0) / t_grid as f64;
    let mut beta_samples = Vec::with_capacity(t_grid);
    let mut beta_jump_values = Vec::new();
    let mut sup = NEG_INF;
    let mut sigma_zero = true;
    for k in 0..t_grid {
        let t = interval.0 + (k as f64 + 0.5) * step;
        let ctx = provider(t);
        sigma_zero = ctx.sigma_zero;
        beta_samples.push(ctx.beta_t);
        if ctx.is_jump_time {
            beta_samples.push(ctx.beta_t_minus);
            beta_jump_values.push(ctx.beta_t);
            beta_jump_values.push(ctx.beta_t_minus);
        }
        sup = sup.max(pointwise_spectrum(&ctx, h)?);
    }
    let ictx = IntervalContext {
        sigma_zero,
        beta_samples,
        beta_jump_values,
    };
    Ok((local_spectrum(&ictx, h)?, sup))
}

// ---------------------------------------------------------------------------
// strict-local-minimum detection on sampled data
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmDecision {
    pub is_strict_min: bool,
    /// not enough samples on one of the sides; the decision defaults to false
    pub insufficient: bool,
}

/// Detect a strict local minimum of the modified index map at `t` from
/// ordered samples (u, beta(u)).
///
/// For the plus side the map keeps the samples to the right of t and
/// redefines the value at t as the limit from the left (estimated by
/// linear extrapolation of the two nearest left samples); mirrored for
/// the minus side. True iff every one of the `window` nearest samples on
/// the comparison side exceeds that value by the strictness margin.
pub fn lm_detect(samples: &[(f64, f64)], t: f64, side: Side, window: usize) -> LmDecision {
    const MARGIN: f64 = 1e-9;
    let left: Vec<&(f64, f64)> = samples.iter().filter(|(u, _)| *u < t).collect();
    let right: Vec<&(f64, f64)> = samples.iter().filter(|(u, _)| *u > t).collect();
    let (limit_side, cmp_side): (&[&(f64, f64)], Vec<&(f64, f64)>) = match side {
        Side::Plus => (&left, right.iter().take(window).copied().collect()),
        Side::Minus => (&right, left.iter().rev().take(window).copied().collect()),
    };
    if limit_side.is_empty() || cmp_side.len() < window {
        return LmDecision {
            is_strict_min: false,
            insufficient: true,
        };
    }
    // one-sided limit at t by linear extrapolation of the two nearest samples
    let modified = match side {
        Side::Plus => {
            let n = limit_side.len();
            if n >= 2 {
                extrapolate(limit_side[n - 2], limit_side[n - 1], t)
            } else {
                limit_side[n - 1].1
            }
        }
        Side::Minus => {
            if limit_side.len() >= 2 {
                extrapolate(limit_side[1], limit_side[0], t)
            } else {
                limit_side[0].1
            }
        }
    };
    let is_min = cmp_side.iter().all(|(_, b)| *b > modified + MARGIN);
    LmDecision {
        is_strict_min: is_min,
        insufficient: false,
    }
}

fn extrapolate(a: &(f64, f64), b: &(f64, f64), t: f64) -> f64 {
    if a.0 == b.0 {
        return b.1;
    }
    b.1 + (b.1 - a.1) / (b.0 - a.0) * (t - b.0)
}

// ---------------------------------------------------------------------------
// empirical spectrum by box counting
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveMode {
    Theory,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectrumSample {
    pub h: f64,
    /// serialized as null when not finite (see flag)
    pub d: f64,
    pub flag: CurveFlag,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumCurve {
    pub mode: CurveMode,
    pub region: (f64, f64),
    pub samples: Vec<SpectrumSample>,
    pub provenance: Vec<String>,
}

impl SpectrumCurve {
    pub fn new(mode: CurveMode, region: (f64, f64)) -> SpectrumCurve {
        SpectrumCurve {
            mode,
            region,
            samples: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn push(&mut self, s: SpectrumSample) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(s.h > last.h) {
                return Err(Error::invalid(
                    "spectrum curve: h must be strictly increasing",
                ));
            }
        }
        self.samples.push(s);
        Ok(())
    }

    /// CSV rows `h,d,flag`; d is `-inf` for empty parts and `nan` for
    /// undefined ones.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,d,flag")?;
        for s in &self.samples {
            let flag = match s.flag {
                CurveFlag::Ok => "ok",
                CurveFlag::Undefined => "undefined",
                CurveFlag::Empty => "empty",
            };
            if s.d == NEG_INF {
                writeln!(w, "{},-inf,{}", s.h, flag)?;
            } else if s.d.is_nan() {
                writeln!(w, "{},nan,{}", s.h, flag)?;
            } else {
                writeln!(w, "{},{},{}", s.h, s.d, flag)?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spectrum curve serializes")
    }
}

/// Uniform exponent bins centered at `centers` with common width.
#[derive(Debug, Clone)]
pub struct HBins {
    pub centers: Vec<f64>,
    pub width: f64,
}

/// Empirical spectrum: at each dyadic depth j = j_max-4 .. j_max compute
/// the scale-anchored exponents h_hat = 1/(delta_hat^(j) beta(t)) on the
/// depth-j grid (capped by 1/2 in the diffusive mode) and count the cells
/// whose exponent falls into each bin; the dimension estimate is the
/// slope of log2 N_j against j.
///
/// Re-estimating at every depth is what ties the count to the limsup
/// geometry: the level sets of a single finest-depth estimate form a
/// finite point cloud whose box counts saturate instead of scaling.
pub fn empirical_spectrum(
    ps: &PointSystem,
    beta: &BetaPath,
    interval: (f64, f64),
    bins: &HBins,
    j_max: u32,
    sigma_zero: bool,
) -> Result<SpectrumCurve> {
    if !(interval.0 >= 0.0 && interval.1 <= ps.horizon() && interval.0 < interval.1) {
        return Err(Error::invalid("empirical_spectrum: bad interval"));
    }
    if j_max < 6 || j_max > 24 {
        return Err(Error::invalid("empirical_spectrum: j_max out of range"));
    }
    let mut order: Vec<usize> = (0..bins.centers.len()).collect();
    order.sort_by(|&a, &b| bins.centers[a].total_cmp(&bins.centers[b]));

    // reference index level for classifying bins relative to h* = 1/beta
    let beta_ref = {
        let mut samples = Vec::with_capacity(257);
        for k in 0..=256 {
            let t = interval.0 + (interval.1 - interval.0) * k as f64 / 256.0;
            samples.push(beta.at(t));
        }
        stats::median(&samples)
    };
    let mut h_star = 1.0 / beta_ref;
    if !sigma_zero {
        h_star = h_star.min(0.5);
    }

    // Bins strictly below h* are counted as superlevel sets
    // {h_hat < bin_hi}: the windowed count subtracts a same-order edge
    // term and inflates the finite-scale slope, while the superlevel
    // count is exactly exponential with the same box dimension (the
    // extra piece is lower-dimensional). Such a bin only uses depths
    // whose snap threshold resolves its rates.
    let mut counts: Vec<Vec<(u32, usize)>> = vec![Vec::with_capacity(5); bins.centers.len()];
    for j in (j_max - 4)..=j_max {
        let n_grid = ((1usize << j) as f64 * ps.horizon()).round() as usize;
        let delta = approx_rate_grid(ps, n_grid, 16.0)?;
        let spacing = ps.horizon() / n_grid as f64;
        let snap = crate::points::snap_threshold(j);
        let mut level_counts = vec![0usize; bins.centers.len()];
        let mut level_valid = vec![true; bins.centers.len()];
        for (bi, &center) in bins.centers.iter().enumerate() {
            let hi = center + 0.5 * bins.width;
            if hi <= h_star {
                let delta_lo_ref = 1.0 / (hi * beta_ref);
                level_valid[bi] = delta_lo_ref >= snap;
            }
        }
        for (k, dk) in delta.iter().enumerate() {
            let t = (k as f64 + 0.5) * spacing;
            if t < interval.0 || t > interval.1 {
                continue;
            }
            let mut h_hat = 1.0 / (dk * beta.at(t));
            if !sigma_zero {
                h_hat = h_hat.min(0.5);
            }
            for (bi, &center) in bins.centers.iter().enumerate() {
                let (lo, hi) = (center - 0.5 * bins.width, center + 0.5 * bins.width);
                let hit = if hi <= h_star {
                    h_hat < hi
                } else {
                    h_hat >= lo && h_hat < hi
                };
                if hit {
                    level_counts[bi] += 1;
                }
            }
        }
        for (bi, c) in level_counts.into_iter().enumerate() {
            if level_valid[bi] {
                counts[bi].push((j, c));
            }
        }
    }

    let mut curve = SpectrumCurve::new(CurveMode::Empirical, interval);
    for bi in order {
        let center = bins.centers[bi];
        let mut xs = Vec::with_capacity(5);
        let mut ys = Vec::with_capacity(5);
        for &(j, c) in &counts[bi] {
            if c > 0 {
                xs.push(j as f64);
                ys.push((c as f64).log2());
            }
        }
        if xs.is_empty() {
            curve.push(SpectrumSample {
                h: center,
                d: NEG_INF,
                flag: CurveFlag::Empty,
            })?;
            curve.provenance.push(format!("bin {center}: empty"));
            continue;
        }
        if xs.len() < 2 {
            curve.push(SpectrumSample {
                h: center,
                d: f64::NAN,
                flag: CurveFlag::Undefined,
            })?;
            curve
                .provenance
                .push(format!("bin {center}: degenerate regression"));
            continue;
        }
        let (slope, _, _) = stats::linear_fit(&xs, &ys);
        curve.push(SpectrumSample {
            h: center,
            d: slope,
            flag: CurveFlag::Ok,
        })?;
        curve
            .provenance
            .push(format!("bin {center}: counts {:?}", counts[bi]));
    }
    Ok(curve)
}
