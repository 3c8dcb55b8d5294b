//! Gauss-Legendre quadrature with geometric panel refinement.
//!
//! The jump integrals all look like `int g(z) dz/z^2` on `(a, 1)` with
//! `g(z) ~ z^{1/beta}`, so the integrand is steep near the inner edge.
//! Panels are laid out geometrically towards the singular end; integrals
//! down to zero are summed panel by panel with a geometric tail
//! extrapolation and an explicit divergence check.

use crate::error::{Error, Result};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss-Legendre nodes/weights on [-1, 1], cached per order.
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Newton iteration from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Single-panel Gauss-Legendre on [a, b].
pub fn integrate_panel<F>(f: &mut F, a: f64, b: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let gl = gauss_legendre(n);
    let (nodes, weights) = (&gl.0, &gl.1);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights) {
        acc += w * f(mid + half * x)?;
    }
    Ok(acc * half)
}

/// Integral over [a, b], 0 < a < b, with panels refined geometrically
/// towards a (panel edges at b/2^k).
pub fn integrate_geometric<F>(f: &mut F, a: f64, b: f64, nodes: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a > 0.0 && a < b) {
        return Err(Error::invalid("integrate_geometric needs 0 < a < b"));
    }
    let mut acc = 0.0;
    let mut hi = b;
    loop {
        let lo = (hi * 0.5).max(a);
        acc += integrate_panel(f, lo, hi, nodes)?;
        if lo <= a {
            return Ok(acc);
        }
        hi = lo;
    }
}

/// Integral over (0, b] of an integrand behaving like z^(p) near zero with
/// p > -1. Sums geometric panels and extrapolates the tail; returns a
/// divergence error when the panel integrals stop decaying.
pub fn integrate_to_zero<F>(f: &mut F, b: f64, nodes: usize, what: &str) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    // Deep enough that transition regions (e.g. differences of close
    // powers of z) have settled into their asymptotic power law before
    // the divergence decision is made.
    const MAX_PANELS: usize = 140;
    let mut acc = 0.0;
    let mut hi = b;
    let mut panels: Vec<f64> = Vec::with_capacity(MAX_PANELS);
    for _ in 0..MAX_PANELS {
        let lo = hi * 0.5;
        let panel = integrate_panel(f, lo, hi, nodes)?;
        acc += panel;
        panels.push(panel.abs());
        if panel.abs() <= 1e-16 * acc.abs().max(1e-300) {
            return Ok(acc);
        }
        hi = lo;
    }
    // asymptotic decay ratio from the deepest panels
    let n = panels.len();
    let first = panels[n - 9];
    let last = panels[n - 1];
    if last == 0.0 {
        return Ok(acc);
    }
    if first == 0.0 {
        return Err(Error::Divergent(format!(
            "{what}: erratic panel masses near 0"
        )));
    }
    let r = (last / first).powf(1.0 / 8.0);
    if r < 1.0 - 1e-6 {
        Ok(acc + last * r / (1.0 - r))
    } else {
        Err(Error::Divergent(format!(
            "{what}: panel integrals do not decay towards 0 (ratio {r:.6})"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_nodes_integrate_polynomials_exactly() {
        // degree 2n-1 exactness: x^7 on [0,1] with n=4
        let v = integrate_panel(&mut |x: f64| Ok(x.powi(7)), 0.0, 1.0, 4).unwrap();
        assert!((v - 0.125).abs() < 1e-14);
        let v = integrate_panel(&mut |x: f64| Ok(x.sin()), 0.0, 1.0, 16).unwrap();
        assert!((v - (1.0 - 1.0f64.cos())).abs() < 1e-14);
    }

    #[test]
    fn geometric_panels_handle_steep_integrands() {
        // int_a^1 z^{-1.5} dz = 2(1/sqrt(a) - 1)
        let a = 1e-6;
        let v = integrate_geometric(&mut |z: f64| Ok(z.powf(-1.5)), a, 1.0, 32).unwrap();
        let exact = 2.0 * (1.0 / a.sqrt() - 1.0);
        assert!((v - exact).abs() / exact < 1e-12);
    }

    #[test]
    fn to_zero_converges_and_detects_divergence() {
        // int_0^1 z^{-1/2} dz = 2
        let v = integrate_to_zero(&mut |z: f64| Ok(z.powf(-0.5)), 1.0, 32, "test").unwrap();
        assert!((v - 2.0).abs() < 1e-10, "got {v}");
        // int_0^1 z^0 dz = 1 (fast decay of panel mass)
        let v = integrate_to_zero(&mut |_z: f64| Ok(1.0), 1.0, 16, "test").unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        // int_0^1 dz/z diverges
        let r = integrate_to_zero(&mut |z: f64| Ok(1.0 / z), 1.0, 16, "test");
        assert!(matches!(r, Err(Error::Divergent(_))));
        // and so does dz/z^{1.2}
        let r = integrate_to_zero(&mut |z: f64| Ok(z.powf(-1.2)), 1.0, 16, "test");
        assert!(matches!(r, Err(Error::Divergent(_))));
    }

    #[test]
    fn to_zero_handles_slow_decay() {
        // int_0^1 z^{-0.99} dz = 100, panel ratio 2^{-0.01} ~ 0.993
        let v = integrate_to_zero(&mut |z: f64| Ok(z.powf(-0.99)), 1.0, 32, "test").unwrap();
        assert!((v - 100.0).abs() / 100.0 < 1e-6, "got {v}");
    }
}
