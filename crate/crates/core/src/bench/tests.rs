use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::embedding::Scheme;
use crate::problem::{BoxBounds, Problem, QpData};
use crate::refine::RefineConfig;

fn exp_formula(q: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    let n = b.len();
    let mut f = 0.0;
    for i in 0..n {
        for j in 0..n {
            f += 0.5 * q[i][j] * x[i].exp() * x[j].exp();
        }
        f += b[i] * (-x[i]).exp();
    }
    f
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

#[test]
fn exp_instance_matches_direct_formula() {
    let (q, b) = random_coefficients(2, 1.0, 0);
    let spec = generate_exp_instance_with(2, 1.0, 0, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = random_point(&mut rng, 2);
        let want = exp_formula(&q, &b, &x);
        assert!((spec.problem.value(&x).unwrap() - want).abs() < 1e-12 * want.abs().max(1.0));
    }
}

#[test]
fn exp_instance_six_variables_decomposes() {
    let (q, b) = random_coefficients(6, 0.5, 3);
    let spec = generate_exp_instance_with(6, 0.5, 3, 0);
    let obj = spec.problem.objective();
    assert_eq!(obj.univariate().len(), 6);
    let off_diagonal = (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j))).filter(|&(i, j)| q[i][j] != 0.0).count();
    assert_eq!(obj.bivariate().len(), off_diagonal);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let x = random_point(&mut rng, 6);
        for (i, g) in obj.univariate() {
            let want = 0.5 * q[*i][*i] * (2.0 * x[*i]).exp() + b[*i] * (-x[*i]).exp();
            assert!((g.eval(&x).unwrap() - want).abs() < 1e-12);
        }
        for t in obj.bivariate() {
            let got = t.p.eval(&x).unwrap() * t.q.eval(&x).unwrap();
            let want = q[t.k][t.l] * x[t.k].exp() * x[t.l].exp();
            assert!((got - want).abs() < 1e-12);
        }
        assert!((spec.problem.value(&x).unwrap() - exp_formula(&q, &b, &x)).abs() < 1e-11);
    }
}

#[test]
fn exp_instance_sparsity_and_symmetry() {
    let (q, _) = random_coefficients(40, 0.25, 7);
    let mut nonzero = 0;
    for i in 0..40 {
        for j in 0..40 {
            assert_eq!(q[i][j], q[j][i]);
            assert!(q[i][j].abs() <= 1.0);
            if i < j && q[i][j] != 0.0 {
                nonzero += 1;
            }
        }
    }
    let fraction = nonzero as f64 / 780.0;
    assert!((fraction - 0.25).abs() < 0.05, "fraction {fraction}");
}

#[test]
fn exp_instance_without_coupling_has_closed_form_minimum() {
    let (mut q, b) = random_coefficients(3, 1.0, 11);
    for i in 0..3 {
        for j in 0..3 {
            if i != j {
                q[i][j] = 0.0;
            }
        }
    }
    let problem = Problem::from_objective(exp_objective(&q, &b), BoxBounds::unit(3)).unwrap();
    assert!(problem.objective().bivariate().is_empty());
    let mut want = 0.0;
    for i in 0..3 {
        let h = |x: f64| 0.5 * q[i][i] * (2.0 * x).exp() + b[i] * (-x).exp();
        let mut candidates = vec![0.0, 1.0];
        let ratio = b[i] / q[i][i];
        if ratio > 0.0 {
            let x = ratio.ln() / 3.0;
            if (0.0..=1.0).contains(&x) {
                candidates.push(x);
            }
        }
        want += candidates.into_iter().map(h).fold(f64::INFINITY, f64::min);
    }
    let cfg = RefineConfig { tol: ORACLE_TOL, ..RefineConfig::default() };
    let best = multi_start_minimum(&problem, 200, 0, &cfg).unwrap();
    assert!((best.f_star - want).abs() < 1e-9, "{} vs {}", best.f_star, want);
}

#[test]
fn exp_instance_is_deterministic() {
    let a = generate_exp_instance_with(3, 0.5, 9, 50);
    let b = generate_exp_instance_with(3, 0.5, 9, 50);
    assert_eq!(a.id, b.id);
    assert_eq!(a.f_star, b.f_star);
    assert_eq!(a.f_star.as_ref().unwrap().provenance, Provenance::Derived);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x = random_point(&mut rng, 3);
        assert_eq!(a.problem.value(&x).unwrap(), b.problem.value(&x).unwrap());
    }
    let c = generate_exp_instance_with(3, 0.5, 10, 0);
    assert_ne!(a.problem.value(&[0.5; 3]).unwrap(), c.problem.value(&[0.5; 3]).unwrap());
}

#[test]
fn generated_qp_oracle_is_derived() {
    let spec = generate_qp_instance(3, 0.5, 2, 200);
    let k = spec.f_star.unwrap();
    assert_eq!(k.provenance, Provenance::Derived);
    let x = k.minimizer.unwrap();
    assert!((spec.problem.value(&x).unwrap() - k.value).abs() < 1e-12);
}

#[test]
fn builtin_reference_values_hold() {
    let specs = builtins();
    assert_eq!(specs.len(), 7);
    for spec in &specs {
        let k = spec.f_star.as_ref().unwrap();
        if let Some(printed) = k.printed {
            assert_eq!(k.provenance, Provenance::Reference);
            assert!(((k.value * 1000.0).round() / 1000.0 - printed).abs() < 1e-12, "{}", spec.id);
        }
        if let Some(x) = &k.minimizer {
            assert!((spec.problem.value(x).unwrap() - k.value).abs() < 1e-12, "{}", spec.id);
        }
    }
    let one = builtin("nonlinear-1").unwrap();
    assert_eq!(one.problem.value(&[0.0, 1.0]).unwrap(), -3.0);
    let three = builtin("nonlinear-3").unwrap();
    assert!((three.problem.value(&[1.0, 1.0]).unwrap() - (1.0 - 0.25 * 4f64.exp())).abs() < 1e-12);
    assert_eq!(example_qp().f_star.unwrap().provenance, Provenance::Derived);
}

#[test]
fn builtin_reference_values_are_not_beaten_by_multistart() {
    let cfg =
        RefineConfig { method: crate::refine::RefineMethod::TruncatedNewton, tol: 1e-10, ..RefineConfig::default() };
    for spec in builtins() {
        let best = multi_start_minimum(&spec.problem, 300, 5, &cfg).unwrap();
        let k = spec.f_star.unwrap().value;
        assert!(best.f_star >= k - 1e-7, "{}: {} < {}", spec.id, best.f_star, k);
        assert!(best.f_star <= k + 1e-6, "{}: {} > {}", spec.id, best.f_star, k);
    }
}

#[test]
fn logarithmic_instances_are_defined_on_the_whole_box() {
    for id in ["nonlinear-2", "nonlinear-5"] {
        let spec = builtin(id).unwrap();
        let n = spec.problem.n();
        for index in 0..17usize.pow(n as u32) {
            let x: Vec<f64> = (0..n).map(|i| ((index / 17usize.pow(i as u32)) % 17) as f64 / 16.0).collect();
            assert!(spec.problem.value(&x).unwrap().is_finite());
        }
    }
}

#[test]
fn qp_embedded_unary_finds_minimum() {
    let cfg = PipelineConfig { backend: Backend::Embedded, scheme: Scheme::Unary, resolution: 5, ..Default::default() };
    let report = run_instance(&example_qp(), &cfg).unwrap();
    let c = &report.canonical;
    assert_eq!(c.samples.len(), 1000);
    assert!(c.success_probability.unwrap() > 0.0);
    assert!((c.best.as_ref().unwrap().f + 0.75).abs() < 1e-9);
    assert!(c.norm_drift.unwrap() <= 1e-8);
    assert_eq!(c.state_dimension, Some(1 << 10));
    for s in &c.samples {
        assert_eq!(s.outcome.len(), 10);
    }
}

#[test]
fn zero_shots_is_an_error() {
    let cfg = PipelineConfig { shots: 0, ..Default::default() };
    assert!(matches!(run_instance(&example_qp(), &cfg), Err(BenchError::NoSamples)));
}

#[test]
fn direct_backend_solves_exponential_instance() {
    let report = run_instance(&builtin("nonlinear-3").unwrap(), &PipelineConfig::default()).unwrap();
    let best = report.canonical.best.unwrap();
    assert!((best.f + 12.649538).abs() < 1e-6, "{}", best.f);
    assert_eq!(report.canonical.rejection_rate, 0.0);
}

#[test]
fn tts_is_recomputable_from_report() {
    let report =
        run_instance(&builtin("nonlinear-1").unwrap(), &PipelineConfig { shots: 200, ..Default::default() }).unwrap();
    let t = &report.timing;
    let p = report.canonical.success_probability.unwrap();
    assert!((0.0..=1.0).contains(&p));
    assert_eq!(t.tts, Some(tts(t.t0.0, p)));
    assert_eq!(t.label, T0_LABEL);
    let back = RunReport::from_json(&report.to_json().unwrap()).unwrap();
    assert_eq!(back.timing.tts, Some(tts(back.timing.t0.0, back.canonical.success_probability.unwrap())));
    let recount = success_probability(&report.refined_values(), Some(-3.0), DEFAULT_SUCCESS_TOL).unwrap();
    assert_eq!(recount, p);
}

#[test]
fn reports_are_deterministic() {
    let cfg = PipelineConfig { backend: Backend::Embedded, shots: 300, seed: 17, ..Default::default() };
    let spec = builtin("nonlinear-2").unwrap();
    let a = run_instance(&spec, &cfg).unwrap().canonical_json().unwrap();
    let b = run_instance(&spec, &cfg).unwrap().canonical_json().unwrap();
    assert_eq!(a, b);
    let base = BaselineConfig { starts: 200, seed: 3, ..Default::default() };
    let a = run_baseline(&spec, &base).unwrap().canonical_json().unwrap();
    let b = run_baseline(&spec, &base).unwrap().canonical_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn baseline_on_convex_qp_always_succeeds() {
    let qp = QpData::new(vec![vec![2.0, 0.0], vec![0.0, 2.0]], vec![-0.6, -1.2]).unwrap();
    let mut spec = InstanceSpec::user("convex", Problem::from_qp(qp, BoxBounds::unit(2)).unwrap());
    // minimizer (0.3, 0.6), value -0.45
    spec.f_star = Some(KnownOptimum { value: -0.45, provenance: Provenance::Derived, printed: None, minimizer: None });
    let report = run_baseline(&spec, &BaselineConfig::default()).unwrap();
    assert_eq!(report.canonical.success_probability, Some(1.0));
}

#[test]
fn baseline_on_two_basin_instance_is_mixed() {
    let report =
        run_baseline(&builtin("nonlinear-1").unwrap(), &BaselineConfig { seed: 42, ..Default::default() }).unwrap();
    let p = report.canonical.success_probability.unwrap();
    assert!(p > 0.0 && p < 1.0, "p_s = {p}");
}

#[test]
fn user_instance_without_reference_has_no_success_rate() {
    let p = Problem::from_symbolic("x^2 + y", &["x".into(), "y".into()], BoxBounds::unit(2)).unwrap();
    let report =
        run_instance(&InstanceSpec::user("u", p), &PipelineConfig { shots: 50, grid_points: 5, ..Default::default() })
            .unwrap();
    assert_eq!(report.canonical.success_probability, None);
    assert_eq!(report.timing.tts, None);
    assert!(report.canonical.best.unwrap().f.abs() < 1e-9);
}

#[test]
fn bounds_are_reported_in_original_coordinates() {
    let p = Problem::from_symbolic("(x - 2)^2", &["x".into()], BoxBounds::new(vec![(1.0, 5.0)]).unwrap()).unwrap();
    let report = run_instance(
        &InstanceSpec::user("shifted", p),
        &PipelineConfig { shots: 20, grid_points: 9, ..Default::default() },
    )
    .unwrap();
    let best = report.canonical.best.unwrap();
    assert!((best.x[0] - 2.0).abs() < 1e-4);
    for s in &report.canonical.samples {
        let x = s.decoded.as_ref().unwrap()[0];
        assert!((1.0..=5.0).contains(&x));
    }
}

#[test]
fn warmstart_constant_objective_gives_identical_distributions() {
    let p = Problem::from_symbolic("3 + 0*x + 0*y", &["x".into(), "y".into()], BoxBounds::unit(2)).unwrap();
    let cfg = PipelineConfig { shots: 100, grid_points: 5, ..Default::default() };
    let w = warmstart_comparison(&InstanceSpec::user("flat", p), &cfg).unwrap();
    assert_eq!(w.uniform.values, w.decoded.values);
    assert_eq!(w.decoded.values, w.refined.values);
    assert!(w.decoded_not_worse);
}

#[test]
fn warmstart_decoded_median_beats_uniform() {
    let w = warmstart_comparison(&example_qp(), &PipelineConfig::default()).unwrap();
    assert!(w.decoded_not_worse, "{:?} vs {:?}", w.decoded.median, w.uniform.median);
    assert_eq!(w.uniform.values.len(), 1000);
    let w = warmstart_comparison(&builtin("nonlinear-1").unwrap(), &PipelineConfig::default()).unwrap();
    assert!(w.decoded_not_worse, "{:?} vs {:?}", w.decoded.median, w.uniform.median);
}

#[test]
fn csv_has_one_row_per_sample() {
    let report = run_instance(
        &example_qp(),
        &PipelineConfig {
            backend: Backend::Embedded,
            scheme: Scheme::OneHot,
            resolution: 5,
            shots: 40,
            ..Default::default()
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    report.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), 41);
    assert!(text.starts_with("outcome,decoded,refined,f,success"));
    let rejected = report.canonical.samples.iter().filter(|s| s.decoded.is_none()).count();
    assert!((report.canonical.rejection_rate - rejected as f64 / 40.0).abs() < 1e-15);
}

#[test]
fn oversized_instances_hit_the_cap() {
    let spec = generate_exp_instance_with(50, 0.1, 0, 0);
    let err = run_instance(&spec, &PipelineConfig::default()).unwrap_err();
    assert!(err.is_cap_exceeded());
    let embedded = PipelineConfig { backend: Backend::Embedded, resolution: 8, ..Default::default() };
    assert!(run_instance(&spec, &embedded).unwrap_err().is_cap_exceeded());
}
