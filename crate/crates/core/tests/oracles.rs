//! Monte Carlo oracles: ensemble statistics checked against closed-form
//! values of the driving intensity and the moment bounds.

use jumpfrac::expr::parse_expr;
use jumpfrac::model::ModelSpec;
use jumpfrac::points::{covering_fraction, intensity_mass, PointSystem};
use jumpfrac::rng::derive_seed;
use jumpfrac::sde::{refine_convergence, SimulationConfig};
use jumpfrac::stats::{mean, median, variance};
use jumpfrac::tangent::{moment_ratio, stable_jump_counts};

const MASTER: u64 = 0x6f72_6163;

#[test]
fn point_count_matches_poisson_intensity() {
    // z_min = 1e-3: mass = 2(10^3 - 1) = 1998 per unit time
    let z_min = 1e-3;
    let lambda = intensity_mass(z_min);
    assert_eq!(lambda, 1998.0);
    let n = 100;
    let counts: Vec<f64> = (0..n)
        .map(|s| {
            PointSystem::sample(1.0, z_min, derive_seed(MASTER, "count", s))
                .unwrap()
                .len() as f64
        })
        .collect();
    let m = mean(&counts);
    let v = variance(&counts);
    // mean of n Poisson(lambda) draws: sd = sqrt(lambda/n)
    let sd_mean = (lambda / n as f64).sqrt();
    assert!((m - lambda).abs() <= 3.0 * sd_mean, "mean {m}");
    // sample variance of Poisson: sd ~ lambda sqrt(2/(n-1))
    let sd_var = lambda * (2.0 / (n - 1) as f64).sqrt();
    assert!((v - lambda).abs() <= 3.0 * sd_var, "variance {v}");
}

#[test]
fn covering_improves_as_truncation_refines() {
    // median covering fraction at delta = 1 grows as z_min drops
    let seeds = 20u64;
    let med = |z_min: f64| {
        let fr: Vec<f64> = (0..seeds)
            .map(|s| {
                let ps = PointSystem::sample(1.0, z_min, derive_seed(MASTER, "cover", s)).unwrap();
                covering_fraction(&ps, 1.0, 2000).unwrap()
            })
            .collect();
        median(&fr)
    };
    let coarse = med(0.2);
    let mid = med(0.05);
    let fine = med(1e-3);
    assert!(coarse <= mid + 1e-12, "{coarse} vs {mid}");
    assert!(mid <= fine + 1e-12, "{mid} vs {fine}");
    assert!(fine > 0.999, "fine covering {fine}");
}

#[test]
fn refinement_gaps_scale_with_activity() {
    // the heavy-activity index beta = 1.9 leaves visibly larger
    // truncation gaps than beta = 0.5, and both shrink with z_min
    let cfg = SimulationConfig::default();
    let seq = [1e-1, 1e-2, 1e-3, 1e-4];
    let gaps_for = |beta: &str| -> Vec<Vec<f64>> {
        let model = ModelSpec::pure_jump(
            parse_expr(beta).unwrap(),
            (beta.parse().unwrap(), beta.parse().unwrap()),
        );
        (0..20u64)
            .map(|s| {
                refine_convergence(&model, derive_seed(MASTER, "refine", s), &seq, &cfg).unwrap()
            })
            .collect()
    };
    let light = gaps_for("0.5");
    let heavy = gaps_for("1.9");
    for k in 0..seq.len() - 1 {
        let ml = median(&light.iter().map(|g| g[k]).collect::<Vec<_>>());
        let mh = median(&heavy.iter().map(|g| g[k]).collect::<Vec<_>>());
        assert!(
            mh > 10.0 * ml,
            "level {k}: heavy {mh} not well above light {ml}"
        );
    }
    let ml: Vec<f64> = (0..seq.len() - 1)
        .map(|k| median(&light.iter().map(|g| g[k]).collect::<Vec<_>>()))
        .collect();
    assert!(ml[0] > ml[1] && ml[1] > ml[2], "light medians {ml:?}");
}

#[test]
fn stable_count_oracle() {
    // beta0 = 1, z_min = 1e-3, z_cap = 1: 2(z_min^-1 - 1) = 1998 per unit time
    let counts = stable_jump_counts(1.0, 1.0, 1e-3, 1.0, 200, MASTER).unwrap();
    let counts: Vec<f64> = counts.into_iter().map(|c| c as f64).collect();
    let lambda = 1998.0;
    let m = mean(&counts);
    let sd = (lambda / counts.len() as f64).sqrt();
    assert!((m - lambda).abs() <= 3.0 * sd, "mean {m}");
}

#[test]
fn moment_bound_below_one() {
    // lemma case (ii): beta0 = 0.6, gamma = 0.9 inside (0.65, min(1, 1.2))
    let model = ModelSpec::pure_jump(parse_expr("0.6").unwrap(), (0.6, 0.6));
    let cfg = SimulationConfig {
        z_min: 1e-4,
        seed: MASTER,
        ..Default::default()
    };
    let rows = moment_ratio(&model, 0.05, 0.9, &[0.1, 0.05, 0.025, 0.0125], 2000, &cfg).unwrap();
    let ratios: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let max = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
    let min = ratios.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    assert!(min > 0.0);
    assert!(max / min <= 5.0, "ratios {ratios:?}");
}
