use super::*;
use crate::geometry::norm;
use crate::targets::{gaussian_target, quartic_target, CountingTarget, FnTarget};
use nalgebra::DMatrix;
use rand::RngCore;

/// Every draw is the largest possible value, so `random::<f64>()` is just
/// below 1: stage one rejects unless `alpha = 1`, stage two accepts only
/// when `alpha_DR = 1`.
struct MaxRng;

impl RngCore for MaxRng {
    fn next_u32(&mut self) -> u32 {
        u32::MAX
    }
    fn next_u64(&mut self) -> u64 {
        u64::MAX
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        dst.fill(0xff);
    }
}

fn std_normal(d: usize) -> crate::targets::GaussianTarget {
    gaussian_target(&vec![0.0; d], &DMatrix::identity(d, d)).unwrap()
}

#[test]
fn accept_prob_examples() {
    assert_eq!(accept_prob(-1.3, -1.3).unwrap(), 1.0);
    assert!((accept_prob(0.0, -0.5).unwrap() - 0.6065306597126334).abs() < 1e-15);
    assert_eq!(accept_prob(0.0, f64::NEG_INFINITY).unwrap(), 0.0);
    assert_eq!(
        accept_prob(f64::NEG_INFINITY, f64::NEG_INFINITY),
        Err(Error::BothLogDensitiesInfinite)
    );
}

#[test]
fn dr_accept_prob_examples() {
    // (1 - e^{-0.8}) / (1 - e^{-1}) * e^{-0.2}
    let expect = (1.0 - (-0.8f64).exp()) / (1.0 - (-1.0f64).exp()) * (-0.2f64).exp();
    let got = dr_accept_prob(0.0, -1.0, -0.2).unwrap();
    assert!((got - expect).abs() < 1e-15);
    assert!((got - 0.71324).abs() < 1e-5);
    // symmetric case is exactly one
    assert_eq!(dr_accept_prob(-0.3, -2.0, -0.3).unwrap(), 1.0);
    // x'' would accept x' outright
    assert_eq!(dr_accept_prob(0.0, -1.0, -1.5).unwrap(), 0.0);
    assert_eq!(dr_accept_prob(0.0, -1.0, f64::NEG_INFINITY).unwrap(), 0.0);
    assert_eq!(dr_accept_prob(0.0, 0.5, 0.0), Err(Error::StageOneAccepted));
    assert_eq!(dr_accept_prob(0.0, f64::NEG_INFINITY, -0.1).unwrap(), (-0.1f64).exp());
}

#[test]
fn one_dimensional_hand_trace() {
    let t = std_normal(1);
    let cfg = SamplerConfig::new(1.0, 0.0, 0.0);
    let mut state = PhaseState { x: vec![0.0], u: vec![1.0] };
    let mut lp = t.log_density(&state.x);
    let out = dbps_step(&mut state, &mut lp, &cfg, &t, &mut MaxRng).unwrap();
    assert_eq!(out.kind, StepKind::BounceAccept);
    assert_eq!(out.x_proposed, vec![1.0]);
    assert_eq!(state.x, vec![0.0]);
    assert_eq!(state.u, vec![-1.0]);
    assert_eq!(out.evaluations, 2);
}

#[test]
fn flat_direction_moves_in_a_straight_line() {
    // depends on x_2 only
    let t = FnTarget::new(2, |x: &[f64]| -0.5 * x[1] * x[1]);
    let cfg = SamplerConfig::new(0.7, 0.0, 0.0).with_gradient_mode(GradientMode::CentralDifference);
    let mut state = PhaseState { x: vec![0.2, 0.4], u: vec![1.0, 0.0] };
    let mut lp = t.log_density(&state.x);
    for k in 1..=5 {
        let out = dbps_step(&mut state, &mut lp, &cfg, &t, &mut MaxRng).unwrap();
        assert_eq!(out.kind, StepKind::PlainAccept);
        assert!((state.x[0] - (0.2 + 0.7 * k as f64)).abs() < 1e-12);
        assert_eq!(state.x[1], 0.4);
        assert_eq!(state.u, vec![1.0, 0.0]);
    }
}

#[test]
fn spherical_gaussian_never_rejects_a_bounce() {
    let t = std_normal(6);
    for (eps, n_cpt) in [(0.0, None), (0.0, Some(6))] {
        let mut cfg = SamplerConfig::new(1.2, eps, 0.0).with_seed(4);
        cfg.n_cpt = n_cpt;
        let trace = run_chain(&t, &cfg, &[0.5; 6], &RunOptions::new(2000, 1)).unwrap();
        let bounces = trace.kinds.iter().filter(|k| **k == StepKind::BounceAccept).count();
        assert!(bounces > 100);
        assert!(!trace.kinds.contains(&StepKind::BounceReject));
    }
    // second-stage probability at forced rejections
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    for _ in 0..2000 {
        let x = geometry::standard_normal_vec(6, &mut rng);
        let u = sample_unit_sphere(6, &mut rng);
        let xp: Vec<f64> = x.iter().zip(&u).map(|(a, b)| a + 0.9 * b).collect();
        let (lp, lpp) = (t.log_density(&x), t.log_density(&xp));
        if lpp >= lp {
            continue;
        }
        let u2 = geometry::reflect(&u, &t.gradient(&xp).unwrap()).unwrap();
        let x2: Vec<f64> = (0..6).map(|i| x[i] + 0.9 * u[i] - 0.9 * u2[i]).collect();
        let a2 = dr_accept_prob(lp, lpp, t.log_density(&x2)).unwrap();
        assert!(a2 >= 1.0 - 1e-12, "{a2}");
        checked += 1;
    }
    assert!(checked > 500);
}

#[test]
fn single_iteration_trace_and_determinism() {
    let t = quartic_target(&[1.0, 2.0, 3.0]).unwrap();
    let cfg = SamplerConfig::new(0.5, 0.0, 0.1).with_seed(99);
    let one = run_chain(&t, &cfg, &[0.1, 0.2, 0.3], &RunOptions::new(1, 1)).unwrap();
    assert_eq!(one.kinds.len(), 1);
    assert_eq!(one.log_pi.len(), 1);
    assert_eq!(one.n_thinned(), 1);

    let opts = RunOptions { n_iters: 3000, thin: 7, record_velocities: true };
    let a = run_chain(&t, &cfg, &[0.1, 0.2, 0.3], &opts).unwrap();
    let b = run_chain(&t, &cfg, &[0.1, 0.2, 0.3], &opts).unwrap();
    assert_eq!(a.positions, b.positions);
    assert_eq!(a.log_pi, b.log_pi);
    assert_eq!(a.kinds, b.kinds);
    assert_eq!(a.segments, b.segments);
    assert_eq!(a.n_thinned(), 3000 / 7);
    let c = run_chain(&t, &cfg.clone().with_seed(100), &[0.1, 0.2, 0.3], &opts).unwrap();
    assert_ne!(a.log_pi, c.log_pi);
}

#[test]
fn trace_bookkeeping_is_consistent() {
    let t = quartic_target(&[1.0; 4]).unwrap();
    let cfg = SamplerConfig::new(1.0, 0.0, 0.05).with_seed(5);
    let opts = RunOptions { n_iters: 5000, thin: 10, record_velocities: true };
    let tr = run_chain(&t, &cfg, &[0.5; 4], &opts).unwrap();
    let events: Vec<usize> = tr
        .kinds
        .iter()
        .enumerate()
        .filter(|(_, k)| k.is_dr_event())
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(events, tr.dr_iters);
    let segs = tr.segments.as_ref().unwrap();
    assert_eq!(segs.len(), events.len());
    assert_eq!(tr.segment_cosines.len(), events.len() - 1);
    for (k, c) in tr.segment_cosines.iter().enumerate() {
        let direct = dot(&segs[k].velocity_after, &segs[k + 1].velocity_before);
        assert_eq!(*c, direct);
    }
    assert_eq!(tr.thinned_log_pi().len(), tr.n_thinned());
    assert_eq!(tr.coordinate(2).len(), tr.n_thinned());
    assert_eq!(tr.position(3)[2], tr.coordinate(2)[3]);
}

#[test]
fn bounces_only_follow_stage_one_rejections() {
    let t = quartic_target(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    let cfg = SamplerConfig::new(1.5, 0.0, 0.02).with_seed(8);
    let mut chain = Chain::new(&t, cfg, &[0.0; 4]).unwrap();
    for _ in 0..5000 {
        let lp_before = chain.log_pi();
        let out = chain.step().unwrap();
        let a1 = accept_prob(lp_before, t.log_density(&out.x_proposed)).unwrap();
        if out.kind.is_dr_event() || out.kind == StepKind::DegenerateSkip {
            assert!(a1 < 1.0);
        }
        if a1 >= 1.0 {
            assert_eq!(out.kind, StepKind::PlainAccept);
        }
    }
}

#[test]
fn straight_lines_between_events_without_perturbation() {
    let t = quartic_target(&[1.0, 1.5, 2.0]).unwrap();
    let cfg = SamplerConfig::new(0.6, 0.0, 0.0).with_seed(12);
    let mut chain = Chain::new(&t, cfg, &[0.2, 0.1, -0.3]).unwrap();
    let mut prev = chain.state().clone();
    for _ in 0..3000 {
        let out = chain.step().unwrap();
        let s = chain.state();
        if out.kind == StepKind::PlainAccept {
            assert_eq!(s.u, prev.u);
            for i in 0..3 {
                assert!((s.x[i] - prev.x[i] - 0.6 * prev.u[i]).abs() < 1e-14);
            }
        }
        prev = s.clone();
    }
}

#[test]
fn velocity_stays_on_the_metric_sphere() {
    let t = quartic_target(&[1.0, 3.0, 5.0]).unwrap();
    let metric = Metric::from_diagonal(&[1.0, 1.0 / 9.0, 1.0 / 25.0]).unwrap();
    for (eps, kappa, n_cpt) in [(0.0, 0.1, None), (0.3, 0.0, None), (0.0, 0.1, Some(2))] {
        let mut cfg = SamplerConfig::new(1.0, eps, kappa).with_seed(2).with_metric(metric.clone());
        cfg.n_cpt = n_cpt;
        let mut chain = Chain::new(&t, cfg, &[0.1, 0.1, 0.1]).unwrap();
        for _ in 0..20_000 {
            chain.step().unwrap();
            let speed = metric.quad_form(&chain.state().u).sqrt();
            assert!((speed - 1.0).abs() < 1e-8);
        }
    }
    let cfg = SamplerConfig::new(1.0, 0.0, 0.2).with_seed(3);
    let mut chain = Chain::new(&t, cfg, &[0.1, 0.1, 0.1]).unwrap();
    for _ in 0..20_000 {
        chain.step().unwrap();
        assert!((norm(&chain.state().u) - 1.0).abs() < 1e-8);
    }
}

/// Extra evaluations per stage-one rejection, by gradient mode.
fn gradient_cost(mode: &GradientMode, d: u64, n_cpt: Option<u64>) -> u64 {
    match (mode, n_cpt) {
        (GradientMode::Analytic | GradientMode::Surrogate(_), _) => 0,
        (GradientMode::ForwardDifference, None) => d,
        (GradientMode::CentralDifference, None) => 2 * d,
        (GradientMode::ForwardDifference, Some(k)) => k,
        (GradientMode::CentralDifference, Some(k)) => 2 * k,
    }
}

#[test]
fn evaluation_counts_follow_the_cost_model() {
    let d = 5;
    let base = quartic_target(&[1.0, 1.0, 2.0, 2.0, 3.0]).unwrap();
    let surrogate = Arc::new(
        GaussianSurrogate::new(vec![0.0; d], DMatrix::identity(d, d)).unwrap(),
    );
    let modes = [
        GradientMode::Analytic,
        GradientMode::ForwardDifference,
        GradientMode::CentralDifference,
        GradientMode::Surrogate(surrogate),
    ];
    for mode in modes {
        for n_cpt in [None, Some(2), Some(4)] {
            let t = CountingTarget::new(&base);
            let mut cfg = SamplerConfig::new(1.3, 0.0, 0.05)
                .with_seed(21)
                .with_gradient_mode(mode.clone());
            cfg.n_cpt = n_cpt;
            let mut chain = Chain::new(&t, cfg, &[0.3; 5]).unwrap();
            let mut expected = 1;
            let mut rejections = 0;
            for _ in 0..3000 {
                let out = chain.step().unwrap();
                let mut e = 1;
                if out.kind != StepKind::PlainAccept {
                    rejections += 1;
                    e += gradient_cost(&mode, d as u64, n_cpt.map(|k| k as u64));
                    if out.kind != StepKind::DegenerateSkip {
                        e += 1;
                    }
                }
                assert_eq!(out.evaluations, e, "{mode:?} {n_cpt:?} {:?}", out.kind);
                expected += e;
            }
            assert!(rejections > 100);
            assert_eq!(chain.evaluations(), expected);
            assert_eq!(t.evaluations(), expected);
        }
    }
}

#[test]
fn config_validation() {
    let t = quartic_target(&[1.0, 1.0, 1.0]).unwrap();
    let ok = SamplerConfig::new(0.5, 0.0, 0.1);
    assert!(ok.validate(&t).is_ok());
    assert!(SamplerConfig::new(0.5, 0.1, 0.1).validate(&t).is_err());
    assert!(SamplerConfig::new(0.0, 0.0, 0.0).validate(&t).is_err());
    assert!(SamplerConfig::new(0.5, 1.5, 0.0).validate(&t).is_err());
    assert!(ok.clone().with_n_cpt(1).validate(&t).is_err());
    assert!(ok.clone().with_n_cpt(4).validate(&t).is_err());
    assert!(ok.clone().with_n_cpt(3).validate(&t).is_ok());
    let no_grad = FnTarget::new(3, |x: &[f64]| -x[0] * x[0]);
    assert!(ok.validate(&no_grad).is_err());
    let outside = FnTarget::new(1, |x: &[f64]| if x[0] > 1.0 { f64::NEG_INFINITY } else { 0.0 });
    let cfg = SamplerConfig::new(0.5, 0.0, 0.0).with_gradient_mode(GradientMode::CentralDifference);
    assert!(matches!(
        Chain::new(&outside, cfg, &[2.0]),
        Err(Error::StartOutsideSupport)
    ));
}

#[test]
fn support_boundary_gives_degenerate_skips() {
    // half-line target: forward differences at a point outside the support
    // cannot be formed
    let t = FnTarget::new(2, |x: &[f64]| {
        if x[0] < 0.0 {
            f64::NEG_INFINITY
        } else {
            -x[0] - 0.5 * x[1] * x[1]
        }
    });
    let cfg = SamplerConfig::new(0.8, 0.0, 0.1)
        .with_seed(1)
        .with_gradient_mode(GradientMode::ForwardDifference);
    let tr = run_chain(&t, &cfg, &[0.5, 0.0], &RunOptions::new(5000, 1)).unwrap();
    assert!(tr.kinds.contains(&StepKind::DegenerateSkip));
    assert!(tr.log_pi.iter().all(|v| v.is_finite()));
}

#[test]
fn equivalence_with_identity_metric_is_exact() {
    let t = quartic_target(&[1.0, 2.0]).unwrap();
    let cfg = SamplerConfig::new(0.8, 0.0, 0.1).with_seed(3);
    let dev =
        precondition_equivalence_check(&t, &Metric::identity(2), &cfg, &[0.1, 0.2], 2000).unwrap();
    assert!(dev <= 1e-12);
}

#[test]
fn equivalence_with_diagonal_metric_on_the_quartic() {
    let lambdas: Vec<f64> = (1..=6).map(|i| i as f64).collect();
    let t = quartic_target(&lambdas).unwrap();
    let metric = Metric::from_diagonal(&lambdas.iter().map(|l| l.powi(-2)).collect::<Vec<_>>())
        .unwrap();
    let x0: Vec<f64> = lambdas.iter().map(|l| 0.3 * l).collect();
    for (eps, kappa, n_cpt) in [(0.0, 0.0, None), (0.0, 0.1, None), (0.2, 0.0, None), (0.0, 0.1, Some(3))] {
        let mut cfg = SamplerConfig::new(0.8, eps, kappa).with_seed(17);
        cfg.n_cpt = n_cpt;
        let dev = precondition_equivalence_check(&t, &metric, &cfg, &x0, 10_000).unwrap();
        assert!(dev <= 1e-8, "{eps} {kappa} {n_cpt:?}: {dev}");
    }
}

#[test]
fn equivalence_with_dense_metric_on_a_gaussian() {
    let d = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let a = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    let cov = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
    let t = gaussian_target(&[0.5, -0.2, 0.0, 1.0], &cov).unwrap();
    let b = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() - 0.5);
    let gamma = &b * b.transpose() / d as f64 + DMatrix::identity(d, d);
    let metric = Metric::from_gamma(gamma).unwrap();
    let cfg = SamplerConfig::new(0.5, 0.0, 0.2).with_seed(31);
    let dev = precondition_equivalence_check(&t, &metric, &cfg, &[0.0; 4], 10_000).unwrap();
    assert!(dev <= 1e-8, "{dev}");
}

#[test]
fn spherical_scaling_is_rejection_free() {
    let t = std_normal(5);
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let pts = dr_rejection_scaling(&t, &[0.4, 0.1, 0.025], 2000, &mut rng).unwrap();
    for p in pts {
        assert!(p.mean_rejection <= 1e-10, "{p:?}");
        assert!(p.n_effective > 1000);
    }
}

#[test]
fn anisotropic_rejection_orders_in_the_step_size() {
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]);
    let t = gaussian_target(&[0.0, 0.0], &cov).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let deltas = [0.4, 0.2, 0.1, 0.05, 0.025];
    let pts = dr_rejection_scaling(&t, &deltas, 20_000, &mut rng).unwrap();
    // given a bounce, rejection vanishes linearly; per iteration, quadratically
    let forced: Vec<(f64, f64)> = pts.iter().map(|p| (p.delta, p.mean_rejection)).collect();
    let joint: Vec<(f64, f64)> = pts.iter().map(|p| (p.delta, p.joint_rejection)).collect();
    let s1 = log_log_slope(&forced);
    let s2 = log_log_slope(&joint);
    assert!((0.8..=1.3).contains(&s1), "{s1}");
    assert!((1.8..=2.2).contains(&s2), "{s2}");
}

#[test]
fn log_log_slope_of_a_power_law() {
    let pts: Vec<(f64, f64)> = [0.1, 0.2, 0.4, 0.8].iter().map(|&x| (x, 3.0 * x * x)).collect();
    assert!((log_log_slope(&pts) - 2.0).abs() < 1e-12);
}
