use super::analytic::value_and_gradient;
use super::lookahead::EntropySearch;
use super::*;
use crate::lowdisc;
use crate::rng::seeded;
use crate::space::Bounds;
use crate::stats::{ei_h, log_norm_pdf, norm_cdf, norm_pdf};
use crate::surrogate::{Dataset, KernelFamily, KernelParams};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

fn pred(mean: Vec<f64>, variance: Vec<f64>) -> PosteriorPrediction {
    PosteriorPrediction { mean, variance }
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn model_from(points: Vec<Vec<f64>>, values: Vec<f64>, ls: Vec<f64>, outputscale: f64, noise: f64) -> GpModel {
    let d = points[0].len();
    let ds = Dataset::new(points, values, Bounds::unit(d)).unwrap();
    GpModel::new(ds, KernelParams::new(ls, outputscale, noise, KernelFamily::Matern52).unwrap()).unwrap()
}

fn random_model(seed: u64, n: usize, d: usize) -> GpModel {
    let mut rng = seeded(seed);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let vals = pts.iter().map(|p| p.iter().map(|v| (4.0 * v).cos()).sum::<f64>() + rng.random::<f64>() * 0.1).collect();
    let ls = (0..d).map(|_| rng.random_range(0.15..0.6)).collect();
    model_from(pts, vals, ls, rng.random_range(0.5..2.0), 1e-6)
}

fn ctx(model: &GpModel) -> AcqContext<'_> {
    AcqContext::new(model, DEFAULT_KAPPA, McConfig::default(), 11).unwrap()
}

#[test]
fn improvement_reference_values() {
    let p = pred(vec![1.0], vec![1.0]);
    let pi = eval_improvement(AcquisitionKind::Pi, &p, 0.0).unwrap()[0];
    let ei = eval_improvement(AcquisitionKind::Ei, &p, 0.0).unwrap()[0];
    // quadrature of ∫ max(g, 0) φ(g − 1) dg and ∫_{0}^{∞} φ(g − 1) dg
    let ei_quad = simpson(|g| g * norm_pdf(g - 1.0), 0.0, 12.0, 20_000);
    let pi_quad = simpson(|g| norm_pdf(g - 1.0), 0.0, 12.0, 20_000);
    assert!((ei - ei_quad).abs() < 1e-9 && (ei - 1.083_315_470_9).abs() < 1e-9);
    assert!((pi - pi_quad).abs() < 1e-9 && (pi - 0.841_344_746_068_543).abs() < 1e-12);
}

#[test]
fn zero_variance_limits() {
    let p = pred(vec![2.0, 1.0, 0.5], vec![0.0, 0.0, 0.0]);
    assert_eq!(eval_improvement(AcquisitionKind::Pi, &p, 1.0).unwrap(), vec![1.0, 0.5, 0.0]);
    assert_eq!(eval_improvement(AcquisitionKind::Ei, &p, 1.0).unwrap(), vec![1.0, 0.0, 0.0]);
}

#[test]
fn log_ei_deep_in_the_tail() {
    let z = -20.0;
    let log_ei = eval_improvement(AcquisitionKind::LogEi, &pred(vec![z], vec![1.0]), 0.0).unwrap()[0];
    assert!(log_ei.is_finite());
    // EI = φ(z)·∫₀^∞ y·exp(yz − y²/2) dy
    let tail = simpson(|y| y * (y * z - 0.5 * y * y).exp(), 0.0, 3.0, 60_000);
    let oracle = log_norm_pdf(z) + tail.ln();
    assert!((log_ei - oracle).abs() < 1e-6, "{log_ei} vs {oracle}");
    // the one-term expansion log φ(z) − log z² is only good to O(1/z²)
    let asymptotic = log_norm_pdf(z) - (z * z).ln();
    assert!((log_ei - asymptotic).abs() < 1e-2);
    // farther out the naive form underflows while the log form stays finite
    let z = -40.0;
    assert_eq!((norm_pdf(z) + z * norm_cdf(z)).ln(), f64::NEG_INFINITY);
    assert!(eval_improvement(AcquisitionKind::LogEi, &pred(vec![z], vec![1.0]), 0.0).unwrap()[0].is_finite());
}

#[test]
fn wrong_family_is_rejected() {
    let p = pred(vec![0.0], vec![1.0]);
    assert!(eval_improvement(AcquisitionKind::Ucb, &p, 0.0).is_err());
    assert!(eval_confidence(AcquisitionKind::Ei, &p, 2.0).is_err());
    assert!(eval_confidence(AcquisitionKind::Ucb, &p, 0.0).is_err());
}

#[test]
fn confidence_values() {
    let p = pred(vec![1.0], vec![4.0]);
    assert_eq!(eval_confidence(AcquisitionKind::Ucb, &p, 2.0).unwrap(), vec![5.0]);
    assert_eq!(eval_confidence(AcquisitionKind::PosMean, &p, 2.0).unwrap(), vec![1.0]);
    assert_eq!(eval_confidence(AcquisitionKind::PosStd, &p, 2.0).unwrap(), vec![2.0]);
    let m = random_model(1, 6, 2);
    let at_data = predict_g(&m, m.dataset().points()).unwrap();
    let sd = eval_confidence(AcquisitionKind::PosStd, &at_data, 2.0).unwrap();
    assert!(sd.iter().all(|s| *s < 1e-3));
}

#[test]
fn ucb_argmax_tends_to_mean_argmax() {
    let m = random_model(2, 8, 2);
    let grid: Vec<Vec<f64>> = (0..41).flat_map(|i| (0..41).map(move |j| vec![i as f64 / 40.0, j as f64 / 40.0])).collect();
    let p = predict_g(&m, &grid).unwrap();
    let mean_best = argmax(&eval_confidence(AcquisitionKind::PosMean, &p, 1.0).unwrap()).unwrap();
    let ucb_best = argmax(&eval_confidence(AcquisitionKind::Ucb, &p, 1e-9).unwrap()).unwrap();
    assert_eq!(mean_best, ucb_best);
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let m = random_model(3, 7, 2);
    let tau = observed_best_g(&m);
    for kind in AcquisitionKind::ALL.into_iter().filter(|k| k.is_analytic()) {
        for u in [[0.13, 0.71], [0.52, 0.48], [0.9, 0.05]] {
            let f = |x: &[f64]| {
                let (mu, var, dm, dv) = m.predict_unit_grad(x);
                value_and_gradient(kind, mu, var, &dm, &dv, tau, 2.0)
            };
            let (_, g) = f(&u);
            for d in 0..2 {
                let h = 1e-6;
                let (mut up, mut um) = (u, u);
                up[d] += h;
                um[d] -= h;
                let fd = (f(&up).0 - f(&um).0) / (2.0 * h);
                assert!((fd - g[d]).abs() < 1e-5 * (1.0 + fd.abs()), "{kind} {u:?} dim {d}: {fd} vs {}", g[d]);
            }
        }
    }
}

#[test]
fn thompson_selection() {
    let m = random_model(4, 6, 1);
    assert_eq!(select_thompson(&m, &[vec![0.3]], &mut seeded(1)).unwrap(), vec![0.3]);
    let c: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0]).collect();
    assert_eq!(select_thompson(&m, &c, &mut seeded(5)).unwrap(), select_thompson(&m, &c, &mut seeded(5)).unwrap());
    assert!(select_thompson(&m, &[], &mut seeded(5)).is_err());

    // one point observed far below the rest (maximal g), others far away
    let pts = vec![vec![0.0], vec![0.5], vec![1.0]];
    let m = model_from(pts.clone(), vec![0.0, -50.0, 0.0], vec![0.05], 1.0, 0.0);
    let hits = (0..100).filter(|&s| select_thompson(&m, &pts, &mut seeded(s)).unwrap() == vec![0.5]).count();
    assert!(hits >= 99, "{hits}");
}

#[test]
fn kg_behaviour() {
    let m = random_model(5, 6, 2);
    let c = ctx(&m);
    let x = m.dataset().points()[2].clone();
    assert!(eval_kg(&c, &x).unwrap().abs() < 1e-6);
    for s in 0..20 {
        let m = random_model(100 + s, 5, 2);
        let c = AcqContext::new(&m, 2.0, McConfig { kg_inner: 64, ..Default::default() }, s).unwrap();
        let x: Vec<f64> = vec![(s as f64 * 0.37) % 1.0, (s as f64 * 0.61) % 1.0];
        assert!(eval_kg(&c, &x).unwrap() >= -1e-6);
    }
}

#[test]
fn kg_matches_explicit_conditioning() {
    let m = model_from(vec![vec![0.2]], vec![1.5], vec![0.3], 1.2, 0.0);
    let x = vec![0.7];
    let kg = KnowledgeGradient::new(&m, std::slice::from_ref(&x), 1, &mut seeded(3)).unwrap();
    let e = kg.fantasies()[0];
    let before = predict_g(&m, std::slice::from_ref(&x)).unwrap();
    let (mu, sd) = (before.mean[0], before.std()[0]);
    let g_fantasy = mu + sd * e;
    let ot = m.output_transform();
    let conditioned = m.condition(std::slice::from_ref(&x), &[ot.inverse(-g_fantasy)]).unwrap();
    let after = predict_g(&conditioned, std::slice::from_ref(&x)).unwrap().mean[0];
    let oracle = after - mu;
    assert!((kg.value(&x).unwrap() - oracle).abs() < 1e-6);
}

#[test]
fn extreme_values_degenerate_and_clamped() {
    let pts = vec![vec![0.1], vec![0.4], vec![0.8]];
    let m = model_from(pts.clone(), vec![1.0, -2.0, 0.5], vec![0.2], 1.0, 0.0);
    let s = sample_extreme_values(&m, &pts, 50, &mut seeded(1)).unwrap();
    let top = predict_g(&m, &pts).unwrap().mean.into_iter().fold(f64::NEG_INFINITY, f64::max);
    assert!(s.iter().all(|v| (v - top).abs() < 2e-6));
    let m = random_model(6, 8, 2);
    let c = lowdisc::points_in(m.bounds(), 64, &mut seeded(2));
    let s = sample_extreme_values(&m, &c, 200, &mut seeded(3)).unwrap();
    let inc = observed_best_g(&m);
    assert!(s.iter().all(|v| *v >= inc));
    assert!(sample_extreme_values(&m, &c, 0, &mut seeded(3)).is_err());
}

fn ks_distance(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn gumbel_fit_matches_joint_sampling() {
    // weakly correlated candidates: spacing of several lengthscales
    let m = model_from(vec![vec![0.0], vec![1.0], vec![0.5]], vec![0.0, 0.0, 10.0], vec![0.02], 4.0, 0.0);
    let cands: Vec<Vec<f64>> = (0..10).map(|i| vec![0.05 + 0.1 * i as f64]).collect();
    let gumbel = sample_extreme_values(&m, &cands, 10_000, &mut seeded(4)).unwrap();
    let direct: Vec<f64> = m
        .sample_joint(&cands, 10_000, false, &mut seeded(5))
        .unwrap()
        .into_iter()
        .map(|row| row.into_iter().map(|v| -v).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let d = ks_distance(gumbel, direct);
    assert!(d < 0.05, "sup distance {d}");
}

#[test]
fn mes_values() {
    let v = eval_mes(&pred(vec![1.0], vec![1.0]), &[1.0]).unwrap()[0];
    assert!((v - std::f64::consts::LN_2).abs() < 1e-12);
    assert_eq!(eval_mes(&pred(vec![1.0], vec![0.0]), &[2.0]).unwrap()[0], 0.0);
    assert!(eval_mes(&pred(vec![1.0], vec![1.0]), &[]).is_err());
    for i in 0..20 {
        for j in 0..20 {
            let mu = -3.0 + 6.0 * i as f64 / 19.0;
            let sigma = 0.01 + 3.0 * j as f64 / 19.0;
            let v = eval_mes(&pred(vec![mu], vec![sigma * sigma]), &[mu, mu + 0.5, mu + 4.0]).unwrap()[0];
            assert!(v >= 0.0);
        }
    }
}

#[test]
fn pes_behaviour() {
    let m = random_model(7, 6, 2);
    let c = ctx(&m);
    let stars = vec![vec![0.31, 0.77]];
    assert!(eval_pes(&c, &m.dataset().points()[0], &stars).unwrap() < 1e-6);

    // x is the optimizer sample: two-model entropy difference
    let x = stars[0].clone();
    let v = eval_pes(&c, &x, &stars).unwrap();
    let before = m.posterior(std::slice::from_ref(&x), false).unwrap().variance[0];
    let conditioned = m.condition(std::slice::from_ref(&x), &[0.0]).unwrap();
    let after = conditioned.posterior(std::slice::from_ref(&x), false).unwrap().variance[0].max(ENTROPY_VARIANCE_FLOOR);
    let oracle = 0.5 * (before / after).ln();
    assert!((v - oracle).abs() < 1e-6, "{v} vs {oracle}");

    // a generic point against the same two-model oracle
    let q = vec![0.45, 0.6];
    let v = eval_pes(&c, &q, &stars).unwrap();
    let b = m.posterior(std::slice::from_ref(&q), false).unwrap().variance[0];
    let a = conditioned.posterior(std::slice::from_ref(&q), false).unwrap().variance[0].max(ENTROPY_VARIANCE_FLOOR);
    assert!((v - 0.5 * (b / a).ln()).abs() < 1e-6);

    let mut rng = seeded(8);
    for _ in 0..50 {
        let q = vec![rng.random(), rng.random()];
        assert!(eval_pes(&c, &q, &stars).unwrap() >= 0.0);
    }
    let exact = model_from(vec![vec![0.2, 0.2], vec![0.7, 0.6]], vec![1.0, 0.0], vec![0.3, 0.3], 1.0, 0.0);
    let c = ctx(&exact);
    assert!(matches!(eval_pes(&c, &q, &[vec![0.7, 0.6]]), Err(crate::Error::Evaluation(_))));
}

#[test]
fn jes_behaviour() {
    let m = random_model(9, 6, 2);
    let c = ctx(&m);
    let pairs = vec![(vec![0.31, 0.77], 2.5), (vec![0.8, 0.2], 2.0)];
    assert!(eval_jes(&c, &m.dataset().points()[0], &pairs).unwrap() < 1e-6);
    let q = vec![0.5, 0.5];
    let stars: Vec<Vec<f64>> = pairs.iter().map(|p| p.0.clone()).collect();
    let inf_pairs: Vec<(Vec<f64>, f64)> = stars.iter().map(|s| (s.clone(), 1e9)).collect();
    let jes = eval_jes(&c, &q, &inf_pairs).unwrap();
    let pes = eval_pes(&c, &q, &stars).unwrap();
    assert!((jes - pes).abs() < 1e-6);
}

#[test]
fn jes_matches_truncated_entropy_quadrature() {
    let m = model_from(vec![vec![0.1], vec![0.9]], vec![0.3, -0.4], vec![0.25], 1.0, 0.0);
    let c = ctx(&m);
    let (star, y_star) = (vec![0.55], 1.1);
    let x = vec![0.4];
    let v = eval_jes(&c, &x, &[(star.clone(), y_star)]).unwrap();

    let ot = m.output_transform();
    let conditioned = m.condition(std::slice::from_ref(&star), &[ot.inverse(-y_star)]).unwrap();
    let post = predict_g(&conditioned, std::slice::from_ref(&x)).unwrap();
    let (mu, sd) = (post.mean[0], post.std()[0]);
    let z = norm_cdf((y_star - mu) / sd);
    let density = |g: f64| norm_pdf((g - mu) / sd) / (sd * z);
    let entropy_after = simpson(|g| { let p = density(g); if p > 0.0 { -p * p.ln() } else { 0.0 } }, mu - 12.0 * sd, y_star, 200_000);
    let before = m.posterior(std::slice::from_ref(&x), false).unwrap().variance[0];
    let oracle = (0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * before).ln() - entropy_after).max(0.0);
    assert!((v - oracle).abs() < 1e-4, "{v} vs {oracle}");
}

#[test]
fn pos_mean_optimizer_finds_grid_argmax() {
    let pts = vec![vec![0.1, 0.1], vec![0.9, 0.2], vec![0.5, 0.55], vec![0.2, 0.9], vec![0.85, 0.85]];
    let vals = vec![1.0, 1.2, -1.0, 0.9, 1.1];
    let m = model_from(pts, vals, vec![0.4, 0.4], 1.0, 1e-6);
    let c = ctx(&m);
    let x = optimize_acquisition(AcquisitionKind::PosMean, &c, &mut seeded(1)).unwrap();
    let grid: Vec<Vec<f64>> = (0..100).flat_map(|i| (0..100).map(move |j| vec![i as f64 / 99.0, j as f64 / 99.0])).collect();
    let g = predict_g(&m, &grid).unwrap().mean;
    let best = &grid[argmax(&g).unwrap()];
    let dist = ((x[0] - best[0]).powi(2) + (x[1] - best[1]).powi(2)).sqrt();
    assert!(dist < 1e-2, "{x:?} vs {best:?}");
}

#[test]
fn optimized_point_beats_every_probe() {
    for (s, kind) in AcquisitionKind::ALL.into_iter().filter(|k| k.is_analytic()).enumerate() {
        let m = random_model(20 + s as u64, 7, 2);
        let c = ctx(&m);
        let rng = seeded(s as u64);
        let probes = lowdisc::unit_points(2, c.mc.n_probes, &mut rng.clone());
        let x = optimize_acquisition(kind, &c, &mut rng.clone()).unwrap();
        let score = |u: &[f64]| {
            let p = predict_g(&m, &[m.bounds().from_unit(u)]).unwrap();
            super::analytic::value_and_sensitivities(kind, p.mean[0], p.std()[0], c.incumbent, c.kappa).0
        };
        let best = score(&m.bounds().to_unit(&x));
        for p in &probes {
            assert!(best >= score(p) - 1e-9, "{kind}");
        }
    }
}

#[test]
fn returned_points_stay_in_bounds() {
    let mc = McConfig { kg_inner: 64, lookahead_candidates: 64, discrete_candidates: 128, entropy_optimizer_candidates: 64, n_probes: 64, n_starts: 3, ..Default::default() };
    for s in 0..100u64 {
        let mut rng = seeded(500 + s);
        let d = 1 + (s % 3) as usize;
        let bounds = Bounds::new((0..d).map(|i| (-2.0 - i as f64, 3.0 + i as f64)).collect()).unwrap();
        let pts = lowdisc::points_in(&bounds, 5, &mut rng);
        let vals = pts.iter().map(|p| p.iter().map(|v| v * v).sum()).collect();
        let ds = Dataset::new(pts, vals, bounds.clone()).unwrap();
        let m = GpModel::new(ds, KernelParams::new(vec![0.3; d], 1.0, 1e-6, KernelFamily::Matern52).unwrap()).unwrap();
        let c = AcqContext::new(&m, 2.0, mc.clone(), s).unwrap();
        let kind = AcquisitionKind::ALL[(s % 12) as usize];
        let x = optimize_acquisition(kind, &c, &mut rng).unwrap();
        assert!(bounds.contains(&x), "{kind} {x:?}");
    }
}

#[test]
fn stochastic_members_are_reproducible() {
    let m = random_model(30, 6, 2);
    let c = ctx(&m);
    for kind in [AcquisitionKind::Ts, AcquisitionKind::Kg, AcquisitionKind::Mes, AcquisitionKind::Pes, AcquisitionKind::Jes] {
        let a = optimize_acquisition(kind, &c, &mut seeded(77)).unwrap();
        let b = optimize_acquisition(kind, &c, &mut seeded(77)).unwrap();
        assert_eq!(a, b, "{kind}");
    }
    let x = vec![0.4, 0.4];
    assert_eq!(eval_kg(&c, &x).unwrap().to_bits(), eval_kg(&c, &x).unwrap().to_bits());
}

#[test]
fn entropy_search_skips_uninformative_samples() {
    let m = random_model(31, 5, 1);
    let pairs = vec![(m.dataset().points()[0].clone(), 1.0), (vec![0.5], 1.0)];
    let es = EntropySearch::new(&m, &pairs, false).unwrap();
    assert!(es.value_unit(&[0.3]) >= 0.0);
}

#[test]
fn portfolio_tags_and_groups() {
    use std::collections::HashSet;
    let tags: HashSet<&str> = AcquisitionKind::ALL.iter().map(|k| k.abbrev()).collect();
    assert_eq!(tags.len(), 12);
    let exploit: Vec<_> = AcquisitionKind::ALL.into_iter().filter(|k| k.group() == Group::Exploitative).collect();
    assert_eq!(
        exploit,
        vec![AcquisitionKind::Pi, AcquisitionKind::LogPi, AcquisitionKind::Ei, AcquisitionKind::LogEi, AcquisitionKind::PosMean]
    );
    for k in AcquisitionKind::ALL {
        assert_eq!(k.abbrev().parse::<AcquisitionKind>().unwrap(), k);
        assert_eq!(format!("q{}", k.abbrev()).parse::<AcquisitionKind>().unwrap(), k);
        assert_eq!(k.abbrev().to_lowercase().parse::<AcquisitionKind>().unwrap(), k);
        let json = serde_json::to_string(&k).unwrap();
        assert_eq!(serde_json::from_str::<AcquisitionKind>(&json).unwrap(), k);
    }
    assert!("qq".parse::<AcquisitionKind>().is_err());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ei_matches_monte_carlo() {
        let mut rng = seeded(42);
        for _ in 0..20 {
            let mu: f64 = rng.random_range(-2.0..2.0);
            let sigma: f64 = rng.random_range(0.1..2.0);
            let tau: f64 = rng.random_range(-2.0..2.0);
            let n = 1_000_000;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                let imp = (mu + sigma * z - tau).max(0.0);
                s += imp;
                s2 += imp * imp;
            }
            let mean = s / n as f64;
            let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
            let ei = eval_improvement(AcquisitionKind::Ei, &pred(vec![mu], vec![sigma * sigma]), tau).unwrap()[0];
            assert!((ei - mean).abs() <= 3.0 * se, "{mu} {sigma} {tau}");
        }
    }

    proptest! {
        #[test]
        fn log_ei_is_log_of_ei(mu in -30.0f64..5.0, sigma in 0.01f64..5.0) {
            let p = pred(vec![mu], vec![sigma * sigma]);
            let ei = eval_improvement(AcquisitionKind::Ei, &p, 0.0).unwrap()[0];
            let log_ei = eval_improvement(AcquisitionKind::LogEi, &p, 0.0).unwrap()[0];
            prop_assert!(log_ei.is_finite());
            if ei > 1e-8 {
                prop_assert!((log_ei - ei.ln()).abs() < 1e-6);
            }
            prop_assert!((sigma * ei_h(mu / sigma) - ei).abs() <= 1e-12 * (1.0 + ei));
        }

        #[test]
        fn pi_monotone(mu in -3.0f64..3.0, dmu in 0.0f64..1.0, sigma in 0.05f64..3.0, dsigma in 0.0f64..1.0) {
            let pi = |m: f64, s: f64| eval_improvement(AcquisitionKind::Pi, &pred(vec![m], vec![s * s]), 0.0).unwrap()[0];
            prop_assert!(pi(mu + dmu, sigma) >= pi(mu, sigma));
            if mu < 0.0 {
                prop_assert!(pi(mu, sigma + dsigma) >= pi(mu, sigma));
            }
        }
    }
}
