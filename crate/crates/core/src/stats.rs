//! Order statistics and the two-sample Kolmogorov-Smirnov test.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Classical two-sample KS statistic with the asymptotic p-value
/// Q_KS((sqrt(ne) + 0.12 + 0.11/sqrt(ne)) * D), ne = n*m/(n+m).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("ks_two_sample: empty sample"));
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));

    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    // the remaining tail only shrinks |F_a - F_b| towards 0
    let ne = (n as f64 * m as f64) / (n + m) as f64;
    let sqrt_ne = ne.sqrt();
    let lambda = (sqrt_ne + 0.12 + 0.11 / sqrt_ne) * d;
    Ok(KsResult {
        statistic: d,
        p_value: q_ks(lambda),
    })
}

fn q_ks(lambda: f64) -> f64 {
    if lambda < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k as f64) * (k as f64) * lambda * lambda).exp();
        sum += sign * term;
        sign = -sign;
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Median over a copy; for even lengths, the mean of the two middle values.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    let mut v = xs.to_vec();
    v.sort_by(|p, q| p.total_cmp(q));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope/intercept/r^2 of y on x.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = mean(x);
    let my = mean(y);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 || n < 2.0 {
        return (0.0, my, 0.0);
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, my - slope * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn ks_identical_samples() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let r = ks_two_sample(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value > 0.999);
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = vec![0.0, 0.1, 0.2];
        let b = vec![5.0, 5.1, 5.2];
        let r = ks_two_sample(&a, &b).unwrap();
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn ks_two_uniform_samples() {
        let mut rng = SplitMix64::new(2024);
        let a: Vec<f64> = (0..1000).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.next_f64()).collect();
        let r = ks_two_sample(&a, &b).unwrap();
        assert!(r.statistic <= 0.08, "D = {}", r.statistic);
        assert!(r.p_value > 0.01);
    }

    #[test]
    fn ks_invariant_under_monotone_transform() {
        let mut rng = SplitMix64::new(7);
        let a: Vec<f64> = (0..500).map(|_| rng.next_f64()).collect();
        let b: Vec<f64> = (0..700).map(|_| rng.next_f64()).collect();
        let d0 = ks_two_sample(&a, &b).unwrap().statistic;
        let ta: Vec<f64> = a.iter().map(|v| (3.0 * v).exp()).collect();
        let tb: Vec<f64> = b.iter().map(|v| (3.0 * v).exp()).collect();
        let d1 = ks_two_sample(&ta, &tb).unwrap().statistic;
        assert!((d0 - d1).abs() < 1e-15);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let (slope, icept, r2) = linear_fit(&x, &y);
        assert!((slope - 2.5).abs() < 1e-12);
        assert!((icept + 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
