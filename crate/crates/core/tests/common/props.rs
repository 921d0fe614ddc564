//! Property checks shared by the `properties` test target and the acceptance
//! gate. Each returns `Err` with a description of the first counterexample.

use nalgebra::{DMatrix, DVector};
use proptest::collection::vec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use robust_kalman::benchmarks::{ct_system, dt_system, load_shipped};
use robust_kalman::chaos::{
    build_basis, build_quadratic_basis, build_quadrature, Marginal, ParameterDistribution,
    Polynomial,
};
use robust_kalman::config::Case;
use robust_kalman::discrete::{dt_propagate, kalman_update, DtMomentTables, NominalDtFilter};
use robust_kalman::harness::{
    mean_sd, run_ensemble, simulate_truth, DeltaSource, ExperimentConfig, NoiseStream, Overrides,
};
use robust_kalman::hybrid::{galerkin_for_system, integrate_pce, lift, CdRobustFilter, PceState};
use robust_kalman::io::{read_trace_csv, trace_file_name, write_outputs, OutputOptions};
use robust_kalman::system::{MatrixPolynomial, TimeMode, UncertainLinearSystem};
use robust_kalman::{Filter, FilterKind, GaussianBelief};

use super::{min_eig, taylor_expm};

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut runner =
        TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn marginal() -> impl Strategy<Value = Marginal> {
    prop_oneof![
        (-2.0..1.0f64, 0.05..3.0f64).prop_map(|(lower, w)| Marginal::Uniform {
            lower,
            upper: lower + w
        }),
        (-1.0..1.0f64, 0.1..2.0f64).prop_map(|(mean, stddev)| Marginal::Gaussian { mean, stddev }),
    ]
}

fn distribution(max_dims: usize) -> impl Strategy<Value = ParameterDistribution> {
    vec(marginal(), 1..=max_dims).prop_map(|m| ParameterDistribution::new(m).unwrap())
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    vec(-2.0..2.0f64, n * n).prop_map(move |v| {
        let l = DMatrix::from_vec(n, n, v);
        &l * l.transpose() + DMatrix::identity(n, n) * 1e-3
    })
}

fn standard_moment(m: &Marginal, k: u32) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    match m {
        Marginal::Gaussian { .. } => (1..k).step_by(2).map(|j| j as f64).product(),
        _ => 1.0 / (k as f64 + 1.0),
    }
}

/// `|E[phi_i phi_j]| < 1e-10` (relative to the norms) off the diagonal; the
/// diagonal reproduces the carried norms.
pub fn basis_orthogonality() -> Result<(), String> {
    check(48, (distribution(3), 0u32..=4), |(dist, order)| {
        let order = if dist.dims() == 3 {
            order.min(3)
        } else {
            order
        };
        let basis = build_basis(&dist, order).unwrap();
        let rule = build_quadrature(&dist, order as usize + 1).unwrap();
        let g = basis.gram(&rule);
        let h = basis.norms();
        for i in 0..basis.len() {
            prop_assert!(
                (g[(i, i)] - h[i]).abs() <= 1e-10 * h[i],
                "norm {i}: {} vs {}",
                g[(i, i)],
                h[i]
            );
            for j in 0..i {
                let scale = (h[i] * h[j]).sqrt().max(1.0);
                prop_assert!(
                    g[(i, j)].abs() < 1e-10 * scale,
                    "E[phi_{i} phi_{j}] = {}",
                    g[(i, j)]
                );
            }
        }
        Ok(())
    })
}

/// Every product `phi_i phi_j` lies in span{theta}.
pub fn quadratic_completeness() -> Result<(), String> {
    check(32, (distribution(2), 0u32..=4), |(dist, order)| {
        let basis = build_basis(&dist, order).unwrap();
        let q = build_quadratic_basis(&basis).unwrap();
        let res = q.reconstruction_residual();
        prop_assert!(res < 1e-10, "residual {res}");
        prop_assert!(q.functions()[0].is_constant());
        Ok(())
    })
}

/// Tensor Gauss rules integrate any polynomial within their exactness degree.
pub fn quadrature_exactness() -> Result<(), String> {
    let strategy = (distribution(2), 1usize..=8).prop_flat_map(|(dist, p)| {
        let d = dist.dims();
        let terms = (2 * p).pow(d as u32);
        (Just(dist), Just(p), vec(-1.0..1.0f64, terms))
    });
    check(64, strategy, |(dist, p, coeffs)| {
        let d = dist.dims();
        let top = 2 * p as u32; // exponents 0..=2p-1 per dimension
        let mut poly = Polynomial::zero(d);
        let mut exact = 0.0;
        let mut scale = 0.0;
        for (idx, c) in coeffs.iter().enumerate() {
            let mut rest = idx as u32;
            let mut exps = vec![0u32; d];
            for e in exps.iter_mut() {
                *e = rest % top;
                rest /= top;
            }
            poly = poly.add(&Polynomial::monomial(&exps, *c));
            let m: f64 = exps
                .iter()
                .zip(dist.marginals())
                .map(|(&k, mg)| standard_moment(mg, k))
                .product();
            let abs_m: f64 = exps
                .iter()
                .zip(dist.marginals())
                .map(|(&k, mg)| standard_moment(mg, k + k % 2))
                .product();
            exact += c * m;
            scale += c.abs() * abs_m;
        }
        let rule = build_quadrature(&dist, p).unwrap();
        prop_assert_eq!(rule.exactness_degree(), 2 * p - 1);
        let got = rule.expect_scalar(|q| poly.eval(q.std));
        prop_assert!(
            (got - exact).abs() <= 1e-12 * scale.max(exact.abs()).max(1e-300),
            "quadrature {got} vs exact {exact}"
        );
        Ok(())
    })
}

/// A basis on a shifted/scaled law, evaluated at mapped points, equals the
/// standard basis at the unmapped points; quadrature nodes map the same way.
pub fn affine_map_consistency() -> Result<(), String> {
    let strategy = (marginal(), 0u32..=4, vec(-1.0..1.0f64, 1..5));
    check(48, strategy, |(m, order, xis)| {
        let dist = ParameterDistribution::new(vec![m]).unwrap();
        let standard = match m {
            Marginal::Gaussian { .. } => ParameterDistribution::gaussian(0.0, 1.0).unwrap(),
            _ => ParameterDistribution::uniform(-1.0, 1.0).unwrap(),
        };
        let b = build_basis(&dist, order).unwrap();
        let b0 = build_basis(&standard, order).unwrap();
        for xi in xis {
            let delta = dist.to_param(&[xi]);
            let lhs = b.eval(&delta);
            let rhs = b0.eval(&[xi]);
            prop_assert!((&lhs - &rhs).amax() <= 1e-10 * rhs.amax().max(1.0));
        }
        let rule = build_quadrature(&dist, order as usize + 1).unwrap();
        for (std, param) in rule.std_nodes().iter().zip(rule.nodes()) {
            prop_assert!((dist.to_param(std)[0] - param[0]).abs() < 1e-12 * (1.0 + param[0].abs()));
        }
        Ok(())
    })
}

/// `E[A]` from the library equals the weighted sum of `A` at the rule's nodes.
pub fn mean_a_consistency() -> Result<(), String> {
    for sys in [dt_system(), ct_system()] {
        let rule = build_quadrature(sys.delta_dist(), 3).unwrap();
        let mut manual = DMatrix::zeros(2, 2);
        for (node, w) in rule.nodes().iter().zip(rule.weights()) {
            manual += sys.eval_a(node) * *w;
        }
        let err = (sys.mean_a(&rule) - manual).amax();
        if err > 1e-14 {
            return Err(format!("mean_A mismatch {err}"));
        }
    }
    Ok(())
}

/// `trace(Sigma+) <= trace(Sigma-)` and the posterior stays PSD.
pub fn update_monotonicity() -> Result<(), String> {
    let strategy = (1usize..=4, 1usize..=3).prop_flat_map(|(n, p)| {
        (
            spd(n),
            spd(p),
            vec(-5.0..5.0f64, p * n),
            vec(-5.0..5.0f64, n),
            vec(-5.0..5.0f64, p),
        )
    });
    check(128, strategy, |(prior_cov, r, c, mean, y)| {
        let (n, p) = (prior_cov.nrows(), r.nrows());
        let c = DMatrix::from_vec(p, n, c);
        let prior = GaussianBelief::new(DVector::from_vec(mean), prior_cov).unwrap();
        let post = kalman_update(&prior, &DVector::from_vec(y), &c, &r).unwrap();
        let (tp, tq) = (prior.cov.trace(), post.cov.trace());
        prop_assert!(tq <= tp * (1.0 + 1e-12), "trace grew: {tp} -> {tq}");
        prop_assert!(min_eig(&post.cov) >= -1e-10 * tp);
        prop_assert!(post.cov == post.cov.transpose());
        Ok(())
    })
}

fn affine_dt_system(a0: &[f64], a1: &[f64], width: f64) -> UncertainLinearSystem {
    let entries = (0..4)
        .map(|k| {
            let (i, j) = (k / 2, k % 2);
            Polynomial::constant(1, a0[i * 2 + j]).add(&Polynomial::monomial(&[1], a1[i * 2 + j]))
        })
        .collect();
    UncertainLinearSystem::new(
        MatrixPolynomial::new(2, 2, entries).unwrap(),
        MatrixPolynomial::constant(&DMatrix::from_row_slice(2, 1, &[1.0, 0.5]), 1),
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        DMatrix::identity(1, 1),
        DMatrix::identity(1, 1),
        ParameterDistribution::uniform(-width, width).unwrap(),
        TimeMode::Discrete,
    )
    .unwrap()
}

/// Discrete propagation: prior PSD, the mean-spread term PSD, and the robust
/// prior dominating the nominal one for shared posteriors.
pub fn dt_prior_dominance() -> Result<(), String> {
    let strategy = (
        vec(-1.5..1.5f64, 4),
        vec(-1.0..1.0f64, 4),
        0.01..1.0f64,
        vec(-30.0..30.0f64, 2),
        spd(2),
    );
    check(128, strategy, |(a0, a1, width, mean, cov)| {
        for sys in [dt_system(), affine_dt_system(&a0, &a1, width)] {
            let tables = DtMomentTables::for_system(&sys).unwrap();
            let post = GaussianBelief::new(DVector::from_vec(mean.clone()), cov.clone()).unwrap();
            let robust = dt_propagate(&tables, &post);
            let nominal = NominalDtFilter::new(&sys).predict(&post).unwrap();
            let tr = robust.cov.trace();
            prop_assert!(min_eig(&robust.cov) >= -1e-10 * tr);
            let spread = tables.mean_spread(&post.mean);
            prop_assert!(min_eig(&spread) >= -1e-10 * spread.trace().max(1e-300));
            let diff = &robust.cov - &nominal.cov;
            prop_assert!(
                min_eig(&diff) >= -1e-10 * tr,
                "robust - nominal has eigenvalue {}",
                min_eig(&diff)
            );
        }
        Ok(())
    })
}

/// The Galerkin integrator is linear in the mean coefficients and affine in
/// the covariance coefficients.
pub fn integrator_linearity() -> Result<(), String> {
    let ops = galerkin_for_system(&ct_system(), 3).unwrap();
    let (k, m) = (ops.mean_terms(), ops.cov_terms());
    let strategy = (vec(-5.0..5.0f64, 2 * k), spd(2), spd(2));
    check(16, strategy, |(mu, s1, s2)| {
        let zero = lift(
            &GaussianBelief::new(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap(),
            k,
            m,
        );
        let mut a = zero.clone();
        a.mu_pc = DVector::from_vec(mu);
        a.sigma_pc.rows_mut(0, 2).copy_from(&s1);
        let doubled = PceState {
            mu_pc: &a.mu_pc * 2.0,
            sigma_pc: a.sigma_pc.clone(),
        };
        let fa = integrate_pce(&ops, &a, 0.1, 10).unwrap();
        let fd = integrate_pce(&ops, &doubled, 0.1, 10).unwrap();
        prop_assert_eq!(&fd.mu_pc, &(&fa.mu_pc * 2.0));

        let mut b = zero.clone();
        b.sigma_pc.rows_mut(0, 2).copy_from(&s2);
        let mut ab = zero.clone();
        ab.sigma_pc.rows_mut(0, 2).copy_from(&(&s1 + &s2));
        let f0 = integrate_pce(&ops, &zero, 0.1, 10).unwrap();
        let fb = integrate_pce(&ops, &b, 0.1, 10).unwrap();
        let fab = integrate_pce(&ops, &ab, 0.1, 10).unwrap();
        let lhs = &fab.sigma_pc - &fb.sigma_pc;
        let rhs = &fa.sigma_pc - &f0.sigma_pc;
        prop_assert!((&lhs - &rhs).amax() <= 1e-12 * fab.sigma_pc.amax().max(1.0));
        Ok(())
    })
}

/// Every reconstructed prior along full-length benchmark runs has
/// `min eig >= -1e-8 trace`.
pub fn psd_preservation_along_runs() -> Result<(), String> {
    let cases = [
        (dt_system(), DVector::from_vec(vec![20.0, 20.0])),
        (ct_system(), DVector::from_vec(vec![3.0, 3.0])),
    ];
    for (sys, x0) in cases {
        let filter: Box<dyn Filter> = match sys.time_mode() {
            TimeMode::Discrete => {
                Box::new(robust_kalman::discrete::DtRobustFilter::new(&sys).unwrap())
            }
            TimeMode::Continuous { sample_period } => {
                Box::new(CdRobustFilter::new(&sys, 4, sample_period, 10).unwrap())
            }
        };
        let widths: Vec<f64> = match sys.delta_dist().marginals()[0] {
            Marginal::Uniform { lower, upper } => vec![lower, 0.0, upper],
            _ => unreachable!(),
        };
        for (idx, d) in widths.into_iter().enumerate() {
            let mut rng = NoiseStream::new(11, idx as u64);
            let truth = simulate_truth(&sys, &DeltaSource::Fixed(vec![d]), &x0, &mut rng, 200)
                .map_err(|e| e.to_string())?;
            let mut belief =
                GaussianBelief::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
            for (k, y) in truth.measurements.iter().enumerate() {
                let prior = filter
                    .predict(&belief)
                    .map_err(|e| format!("step {k}: {e}"))?;
                let tr = prior.cov.trace();
                let lam = min_eig(&prior.cov);
                if lam < -1e-8 * tr {
                    return Err(format!(
                        "prior at step {k} (delta {d}) has eigenvalue {lam}"
                    ));
                }
                belief = filter.update(&prior, y).map_err(|e| e.to_string())?;
            }
        }
    }
    Ok(())
}

fn small_experiment(name: &str, case: Case, seeds: usize, horizon: usize) -> ExperimentConfig {
    let cfg = load_shipped(name).unwrap();
    ExperimentConfig::from_benchmark(
        &cfg,
        case,
        &Overrides {
            seeds: Some(seeds),
            horizon: Some(horizon),
            order: Some(3),
        },
    )
    .unwrap()
}

/// Identical inputs give identical tables, bands and traces, regardless of the
/// number of worker threads.
pub fn ensemble_determinism() -> Result<(), String> {
    for name in ["benchmark_dt", "benchmark_ct"] {
        let exp = small_experiment(name, Case::II, 4, 30);
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let mut res = pool.install(|| run_ensemble(&exp)).unwrap();
            res.table.zero_timing();
            res
        };
        let a = run_with(1);
        let b = run_with(4);
        let c = run_with(4);
        if a.table != b.table || b.table != c.table {
            return Err(format!("{name}: metrics differ between runs"));
        }
        let untimed = |r: &robust_kalman::harness::EnsembleResult| {
            let mut t = r.traces.clone();
            t.iter_mut()
                .flat_map(|t| t.filters.iter_mut())
                .for_each(|f| f.wall_ms = 0.0);
            t
        };
        if a.bands != b.bands || untimed(&a) != untimed(&b) {
            return Err(format!("{name}: bands or traces differ between runs"));
        }
    }
    Ok(())
}

/// Harness statistics equal a recomputation from the dumped trace files.
pub fn metric_sanity() -> Result<(), String> {
    let exp = small_experiment("benchmark_dt", Case::I, 3, 40);
    let res = run_ensemble(&exp).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    write_outputs(dir.path(), &res, OutputOptions::default()).map_err(|e| e.to_string())?;
    for kind in [FilterKind::Robust, FilterKind::Nominal] {
        for (i, state) in ["x1", "x2"].iter().enumerate() {
            let mut errs = Vec::new();
            for t in &res.traces {
                let rows = read_trace_csv(&dir.path().join(trace_file_name(t)))
                    .map_err(|e| e.to_string())?;
                errs.extend(
                    rows.iter()
                        .filter(|r| r.filter == kind.as_str() && r.state == *state)
                        .filter(|r| exp.window.contains(&(r.step - 1)))
                        .map(|r| (r.truth - r.estimate).abs()),
                );
            }
            let (m, s) = mean_sd(&errs);
            let (tm, ts) = (res.table.mean(kind, i), res.table.sd(kind, i));
            if (m - tm).abs() > 1e-12 * m || (s - ts).abs() > 1e-12 * s {
                return Err(format!(
                    "{kind} {state}: recomputed {m}/{s} vs table {tm}/{ts}"
                ));
            }
        }
    }
    Ok(())
}

/// Conditional mean check helper for the hybrid filter: max error over the
/// Galerkin rule's nodes between the chaos reconstruction and `exp(A t) mu0`.
pub fn ct_node_mean_error(order: u32, mu0: &DVector<f64>, t: f64, substeps: usize) -> f64 {
    let sys = ct_system();
    let ops = galerkin_for_system(&sys, order).unwrap();
    let prior = GaussianBelief::new(mu0.clone(), DMatrix::identity(2, 2)).unwrap();
    let state = lift(&prior, ops.mean_terms(), ops.cov_terms());
    let out = integrate_pce(&ops, &state, t, substeps).unwrap();
    let rule = robust_kalman::hybrid::galerkin_rule(&sys, ops.basis()).unwrap();
    rule.std_nodes()
        .iter()
        .zip(rule.nodes())
        .map(|(xi, delta)| {
            let exact = taylor_expm(&(sys.eval_a(delta) * t)) * mu0;
            (ops.conditional_mean(&out, xi) - exact).amax()
        })
        .fold(0.0, f64::max)
}

pub type Property = fn() -> Result<(), String>;

/// All properties, in a fixed order, for the acceptance gate.
pub fn all() -> Vec<(&'static str, Property)> {
    vec![
        ("basis orthogonality", basis_orthogonality),
        ("quadratic-basis completeness", quadratic_completeness),
        ("quadrature exactness", quadrature_exactness),
        ("affine-map consistency", affine_map_consistency),
        ("mean_A consistency", mean_a_consistency),
        ("update monotonicity", update_monotonicity),
        ("DT prior dominance / PSD", dt_prior_dominance),
        ("integrator linearity", integrator_linearity),
        ("PSD preservation along runs", psd_preservation_along_runs),
        ("ensemble determinism", ensemble_determinism),
        ("metric sanity", metric_sanity),
    ]
}
