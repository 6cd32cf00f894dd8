//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion fails.

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lrnewton::clustering::{linspace, split_clusters, split_range, ParameterGrid, ParameterPoint, Reference};
use lrnewton::linalg::{norm2, thin_svd, vec as vectorize, SparseMatrix};
use lrnewton::lowrank::LowRankMatrix;
use lrnewton::model::{
    generate_synthetic, ConvectionDiffusion, ConvectionDiffusionConfig, ParametricSystem, QuadraticForm,
    SyntheticConfig,
};
use lrnewton::newton::{
    assemble_cluster_rhs, build_cluster_newton_equation, newton_solve_single, solve_anchors,
    solve_cluster_equation, standard_newton_sweep, ClusterSolver, ClusterStepOptions, EquationTerm,
    MatrixEquationSpec, NewtonOptions, RightFactor,
};
use lrnewton::solvers::{gmrest, IdentityPreconditioner, LeftPreconditioner, MeanPreconditioner, SolverOptions};
use lrnewton::timestepping::{theta_cluster_step, theta_operator, theta_residual, theta_trajectory_single, ClusterTimeStep, RhsMode, TimeGrid};
use lrnewton_cli::{commands, RunConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap()
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm2(&d) / norm2(b).max(f64::MIN_POSITIVE)
}

fn random_instance(rng: &mut ChaCha8Rng) -> ParametricSystem {
    generate_synthetic(&SyntheticConfig {
        seed: rng.random(),
        dim: rng.random_range(10..=60),
        density: rng.random_range(0.05..0.2),
        nonlinear_scale: rng.random_range(0.01..0.2),
        ..SyntheticConfig::default()
    })
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, four: bool) -> Vec<ParameterPoint> {
    (0..n)
        .map(|_| ParameterPoint {
            mu: rng.random_range(0.7..1.3),
            nu: rng.random_range(0.7..1.3),
            lambda: if four { rng.random_range(0.7..1.3) } else { 1.0 },
            rho: if four { rng.random_range(0.7..1.3) } else { 1.0 },
        })
        .collect()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn block_diagonal_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let sys = random_instance(&mut rng);
        let n = rng.random_range(1..=5);
        let pts = random_points(&mut rng, n, case % 2 == 1);
        let x = random_vec(&mut rng, sys.dim());
        let spec = build_cluster_newton_equation(&sys, &x, &pts[n / 2], &pts).unwrap();
        let s = DMatrix::from_fn(sys.dim(), n, |_, _| rng.random_range(-1.0..1.0));
        let got = vectorize(&spec.apply_dense(&s).unwrap());
        let mut want = Vec::new();
        for (j, p) in pts.iter().enumerate() {
            want.extend(sys.jacobian(&x, p).mul_vec(s.column(j).as_slice()));
        }
        worst = worst.max(rel(&got, &want));
    }
    Outcome {
        pass: worst <= 1e-12,
        detail: format!("max relative error {worst:.2e} over 20 instances"),
    }
}

fn numerical_rank(x: &DMatrix<f64>) -> usize {
    let s = thin_svd(x).singular_values;
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > 1e-12 * top).count()
}

fn rhs_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    let mut ranks_ok = true;
    let mut max_rank = [0usize; 2];
    for case in 0..20 {
        let four = case % 2 == 1;
        let sys = random_instance(&mut rng);
        let pts = random_points(&mut rng, 8, four);
        let x = random_vec(&mut rng, sys.dim());
        let b = assemble_cluster_rhs(&sys, &x, &pts[4], &pts).unwrap().to_dense();
        for (j, p) in pts.iter().enumerate() {
            worst = worst.max(rel(b.column(j).as_slice(), &sys.residual(&x, p)));
        }
        let r = numerical_rank(&b);
        let bound = if four { 5 } else { 3 };
        ranks_ok &= r <= bound;
        max_rank[four as usize] = max_rank[four as usize].max(r);
    }
    Outcome {
        pass: worst <= 1e-12 && ranks_ok,
        detail: format!(
            "column error {worst:.2e}; ranks two-parameter {} (<= 3), four-parameter {} (<= 5)",
            max_rank[0], max_rank[1]
        ),
    }
}

fn clustering_fidelity() -> Outcome {
    let r = Reference {
        mu: 0.0,
        nu: 0.0,
        lambda: 0.0,
        rho: 1.0,
    };
    let grid = ParameterGrid::two_parameter(linspace(1.0, 4.0, 4), linspace(1.0, 5.0, 5), r).unwrap();
    let medians: Vec<Vec<usize>> = split_clusters(&grid, 3)
        .unwrap()
        .iter()
        .map(|c| c.upper_median_index(&grid).unwrap())
        .collect();
    let example = medians == vec![vec![4, 1], vec![2, 3], vec![1, 5]];
    let mut rule = true;
    for m in 1..=200 {
        for k in 1..=m {
            let cs = split_range(m, k).unwrap();
            let base = m / k;
            let mut next = 0;
            for (i, c) in cs.iter().enumerate() {
                let want = if i + 1 < k { base } else { m - (k - 1) * base };
                rule &= c.len() == want && c.columns.start == next && c.index == i;
                next = c.columns.end;
            }
            rule &= next == m && cs.len() == k;
        }
    }
    Outcome {
        pass: example && rule,
        detail: format!("example medians {medians:?}; size rule for all K <= m <= 200: {rule}"),
    }
}

fn truncation_optimality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (m, n, k) = (rng.random_range(5..40), rng.random_range(3..20), rng.random_range(1..12));
        let x = LowRankMatrix::new(
            DMatrix::from_fn(m, k, |_, _| rng.random_range(-1.0..1.0)),
            DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0)),
        )
        .unwrap();
        let r = rng.random_range(1..=k.min(m).min(n));
        let dense = x.to_dense();
        let sigma = dense.clone().svd(false, false).singular_values;
        let tail = sigma.iter().skip(r).map(|s| s * s).sum::<f64>().sqrt();
        let err = (dense - x.truncate(r).to_dense()).norm();
        worst = worst.max((err - tail).abs() / sigma[0]);
    }
    Outcome {
        pass: worst <= 1e-10,
        detail: format!("max |error - tail| / sigma_1 = {worst:.2e} over 50 cases"),
    }
}

fn fd_check(q: &QuadraticForm, x: &[f64], v: &[f64]) -> f64 {
    let eps = 1e-6;
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - eps * b).collect();
    let fd: Vec<f64> = q.eval(&xp).iter().zip(q.eval(&xm)).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    let jv = q.jacobian(x).mul_vec(v);
    if norm2(&jv) == 0.0 && norm2(&fd) == 0.0 {
        return 0.0;
    }
    rel(&fd, &jv)
}

fn identity_check(q: &QuadraticForm, x: &[f64]) -> f64 {
    let n = q.eval(x);
    if norm2(&n) == 0.0 {
        return 0.0;
    }
    let two_n: Vec<f64> = n.iter().map(|v| 2.0 * v).collect();
    rel(&q.jacobian(x).mul_vec(x), &two_n).max(rel(&q.picard(x).mul_vec(x), &n))
}

fn jacobian_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let cd = ConvectionDiffusion::build(ConvectionDiffusionConfig {
        n: 12,
        ..ConvectionDiffusionConfig::default()
    })
    .unwrap();
    let syn = generate_synthetic(&SyntheticConfig {
        seed: 5,
        dim: 40,
        ..SyntheticConfig::default()
    });
    let (mut fd, mut ident, mut full) = (0.0f64, 0.0f64, 0.0f64);
    for sys in [&cd.system, &syn] {
        let x = random_vec(&mut rng, sys.dim());
        let v = random_vec(&mut rng, sys.dim());
        for q in [&sys.g_mu, &sys.g_lambda, &sys.g_rho] {
            fd = fd.max(fd_check(q, &x, &v));
            ident = ident.max(identity_check(q, &x));
        }
        let p = random_points(&mut rng, 1, true)[0];
        let eps = 1e-6;
        let xp: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + eps * b).collect();
        let xm: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a - eps * b).collect();
        let d: Vec<f64> = sys.apply(&xp, &p).iter().zip(sys.apply(&xm, &p)).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
        full = full.max(rel(&d, &sys.jacobian(&x, &p).mul_vec(&v)));
    }
    Outcome {
        pass: fd <= 1e-5 && full <= 1e-5 && ident <= 1e-12,
        detail: format!("finite differences {fd:.2e} (pieces), {full:.2e} (full); J(x)x = 2N(x), F(x)x = N(x): {ident:.2e}"),
    }
}

fn dense_gmres(a: &DMatrix<f64>, b: &DVector<f64>, restart: usize, cycles: usize) -> DVector<f64> {
    let mut x = DVector::zeros(b.len());
    for _ in 0..cycles {
        let r = b - a * &x;
        let beta = r.norm();
        let mut v = vec![r / beta];
        let mut h = DMatrix::zeros(restart + 1, restart);
        for j in 0..restart {
            let mut w = a * &v[j];
            for i in 0..=j {
                h[(i, j)] = w.dot(&v[i]);
                w -= h[(i, j)] * &v[i];
            }
            h[(j + 1, j)] = w.norm();
            v.push(w / h[(j + 1, j)]);
        }
        let mut e1 = DVector::zeros(restart + 1);
        e1[0] = beta;
        let y = h.svd(true, true).solve(&e1, 1e-300).unwrap();
        for j in 0..restart {
            x += y[j] * &v[j];
        }
    }
    x
}

fn random_spec(rng: &mut ChaCha8Rng, m: usize, n: usize) -> MatrixEquationSpec {
    let mut a0 = DMatrix::from_fn(m, m, |_, _| if rng.random_bool(0.3) { rng.random_range(-0.5..0.5) } else { 0.0 });
    for i in 0..m {
        a0[(i, i)] += 1.5;
    }
    let a1 = DMatrix::from_fn(m, m, |i, j| if i == j { rng.random_range(0.0..1.0) } else { 0.0 });
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = LowRankMatrix::new(
        DMatrix::from_fn(m, 2, |_, _| rng.random_range(-1.0..1.0)),
        DMatrix::from_fn(n, 2, |_, _| rng.random_range(-1.0..1.0)),
    )
    .unwrap();
    MatrixEquationSpec::new(
        vec![
            EquationTerm::new("A0", SparseMatrix::from_dense(&a0, 0.0), RightFactor::Identity),
            EquationTerm::new("A1", SparseMatrix::from_dense(&a1, 0.0), RightFactor::Diagonal(d)),
        ],
        b,
    )
    .unwrap()
}

/// `‖P⁻¹(B − L(X))‖ / ‖P⁻¹B‖` from the dense vectorized operator.
fn independent_residual(spec: &MatrixEquationSpec, p: &dyn LeftPreconditioner, x: &LowRankMatrix) -> f64 {
    let b = spec.rhs().to_dense();
    let r = &b - spec.apply_dense(&x.to_dense()).unwrap();
    p.solve_block(&r).unwrap().norm() / p.solve_block(&b).unwrap().norm()
}

fn solver_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (m, n) = (rng.random_range(10..30), rng.random_range(2..5));
        let spec = random_spec(&mut rng, m, n);
        let opts = SolverOptions {
            rank: m.min(n),
            restart: 4,
            max_restarts: 1,
            tol: 1e-300,
            trace: false,
        };
        let out = gmrest(&spec, &IdentityPreconditioner, &opts).unwrap();
        let a = spec.vectorized_operator().unwrap().to_dense();
        let b = DVector::from_vec(vectorize(&spec.rhs().to_dense()));
        let oracle = dense_gmres(&a, &b, 4, 2);
        let got = DVector::from_vec(vectorize(&out.x.to_dense()));
        worst = worst.max((got - &oracle).norm() / oracle.norm());
    }
    let mut honest_ok = true;
    let mut converged = 0;
    for case in 0..20 {
        let (m, n) = (rng.random_range(10..40), rng.random_range(2..8));
        let spec = random_spec(&mut rng, m, n);
        let opts = SolverOptions {
            rank: rng.random_range(2..=n),
            restart: rng.random_range(4..12),
            max_restarts: rng.random_range(5..30),
            tol: 1e-6,
            trace: false,
        };
        let pre = MeanPreconditioner::from_matrix(&spec.terms()[0].left).unwrap();
        let p: &dyn LeftPreconditioner = if case % 2 == 0 { &IdentityPreconditioner } else { &pre };
        let out = gmrest(&spec, p, &opts).unwrap();
        if out.converged {
            converged += 1;
            honest_ok &= independent_residual(&spec, p, &out.x) <= 2.0 * opts.tol;
        }
    }
    Outcome {
        pass: worst <= 1e-8 && honest_ok,
        detail: format!(
            "untruncated GMREST vs dense GMRES {worst:.2e}; converged => honest <= 2 tol on {converged} converged runs: {honest_ok}"
        ),
    }
}

fn desk_run() -> Outcome {
    let cfg = config("desk.conf");
    let out = tempfile::tempdir().unwrap();
    let t = Instant::now();
    let run = commands::run(&cfg, out.path()).unwrap();
    let elapsed = t.elapsed();
    let (sys, _) = commands::build_instance(&cfg.instance).unwrap();
    let base = standard_newton_sweep(&sys, &cfg.grid().unwrap(), &cfg.newton, true).unwrap();
    let steps = run.report.total_steps();
    let base_steps = base.report.total_steps();
    let max = run.report.max_residual();
    Outcome {
        pass: sys.dim() == 2500 && run.report.rows.len() == 100 && max <= 1e-3 && 5 * steps <= base_steps,
        detail: format!(
            "M = {}, m = {}, max relative residual {max:.3e}; Newton steps {steps} vs standard {base_steps} (ratio {:.3}); {:.1?}",
            sys.dim(),
            run.report.rows.len(),
            steps as f64 / base_steps as f64,
            elapsed
        ),
    }
}

fn cluster_count_trend() -> Outcome {
    let cfg = config("desk_compare.conf");
    let out = tempfile::tempdir().unwrap();
    let rows = commands::compare(&cfg, out.path()).unwrap();
    let ks: Vec<usize> = rows.iter().map(|r| r.clusters).collect();
    let max: Vec<f64> = rows.iter().map(|r| r.max_residual).collect();
    let decreasing = max.windows(2).all(|w| w[1] < w[0]);
    Outcome {
        pass: ks == [10, 20, 40] && cfg.grid().unwrap().len() == 200 && decreasing,
        detail: format!(
            "K {ks:?}: max residual {}",
            max.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(" -> ")
        ),
    }
}

fn newton_vs_picard() -> Outcome {
    let cfg = config("desk.conf");
    let out = tempfile::tempdir().unwrap();
    let cmp = commands::picard_compare(&cfg, out.path()).unwrap();
    Outcome {
        pass: cmp.max_newton() < cmp.max_picard(),
        detail: format!(
            "max residual Newton {:.3e}, fixed point {:.3e}, ratio {:.2}",
            cmp.max_newton(),
            cmp.max_picard(),
            cmp.ratio()
        ),
    }
}

fn theta_scheme() -> Outcome {
    let cd = ConvectionDiffusion::build(ConvectionDiffusionConfig {
        n: 20,
        ..ConvectionDiffusionConfig::default()
    })
    .unwrap();
    let sys = &cd.system;
    let p = ParameterPoint {
        mu: 1.05,
        nu: 0.04,
        lambda: 1.0,
        rho: 1.0,
    };
    let newton = NewtonOptions {
        tol: 1e-12,
        max_steps: 30,
    };
    let stationary = newton_solve_single(sys, &p, &sys.b_d, &newton).unwrap().x;
    let tg = TimeGrid::new(40.0, 40, 1.0).unwrap();
    let b = sys.b_d.clone();
    let states = theta_trajectory_single(sys, &p, &sys.b_d, &tg, &newton, &move |_| b.clone()).unwrap();
    let drift = rel(states.last().unwrap(), &stationary);

    // singleton cluster step against one step of the per-problem scheme
    let tg = TimeGrid::new(1.0, 10, 0.5).unwrap();
    let x_prev = states[3].clone();
    let x_trial = states[4].iter().map(|v| 0.9 * v).collect::<Vec<f64>>();
    let step = ClusterTimeStep {
        pts: &[p],
        anchor: p,
        x_anchor: &x_trial,
        x_anchor_prev: &x_prev,
        x_prev: &LowRankMatrix::from_outer(&x_prev, &[1.0]),
        b_prev: &sys.b_d,
        b_cur: &sys.b_d,
    };
    let opts = ClusterStepOptions {
        solver: ClusterSolver::Dense,
        ..ClusterStepOptions::default()
    };
    let (x, _) = theta_cluster_step(sys, &step, &tg, RhsMode::Exact, &opts).unwrap();
    let r = theta_residual(sys, &p, &x_trial, &x_prev, &sys.b_d, &sys.b_d, &tg);
    let s = lrnewton::linalg::LuFactorization::factor(&theta_operator(sys, &p, &x_trial, &tg))
        .unwrap()
        .solve(&r)
        .unwrap();
    let single: Vec<f64> = x_trial.iter().zip(&s).map(|(a, b)| a + b).collect();
    let singleton = rel(&x.column(0).unwrap(), &single);
    Outcome {
        pass: drift <= 1e-6 && singleton <= 1e-10,
        detail: format!("theta = 1 after 40 steps: distance to stationary {drift:.2e}; singleton cluster step {singleton:.2e}"),
    }
}

fn qoi_errors() -> Outcome {
    let cfg = config("desk_qoi.conf");
    let out = tempfile::tempdir().unwrap();
    let rows = commands::qoi_errors(&cfg, out.path()).unwrap();
    let samples: std::collections::BTreeSet<usize> = rows.iter().map(|r| r.p).collect();
    let functionals: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.functional.as_str()).collect();
    let ok = rows.iter().all(|r| r.err < r.errdisc);
    let detail = rows
        .iter()
        .map(|r| format!("p{} {}: {:.2e} < {:.2e}", r.p, r.functional, r.err, r.errdisc))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome {
        pass: ok && samples.len() == 2 && functionals.len() == 2,
        detail,
    }
}

fn singular_value_decay() -> Outcome {
    let cfg = config("desk.conf");
    let (sys, _) = commands::build_instance(&cfg.instance).unwrap();
    let grid = cfg.grid().unwrap();
    let clusters = split_clusters(&grid, cfg.clusters).unwrap();
    let anchors = solve_anchors(&sys, &grid, &clusters, &cfg.newton, true).unwrap();
    let dense = ClusterStepOptions {
        solver: ClusterSolver::Dense,
        ..ClusterStepOptions::default()
    };
    let mut worst = 0.0f64;
    for (c, a) in clusters.iter().zip(&anchors) {
        let pts = c.points(&grid).unwrap();
        let anchor = grid.point(c.upper_median()).unwrap();
        let spec = build_cluster_newton_equation(&sys, &a.x, &anchor, &pts).unwrap();
        let s = solve_cluster_equation(&spec, &IdentityPreconditioner, &dense).unwrap().x.to_dense();
        let sigma = thin_svd(&s).singular_values;
        let ratio = if sigma.len() >= 10 && sigma[0] > 0.0 { sigma[9] / sigma[0] } else { 0.0 };
        worst = worst.max(ratio);
    }
    Outcome {
        pass: worst <= 1e-2,
        detail: format!("max over clusters of sigma_10 / sigma_1 = {worst:.2e}"),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("block-diagonal equivalence", block_diagonal_equivalence),
        ("right-hand side structure", rhs_structure),
        ("clustering fidelity", clustering_fidelity),
        ("truncation optimality", truncation_optimality),
        ("Jacobian correctness", jacobian_correctness),
        ("solver sanity", solver_sanity),
        ("desk-scale clustered run", desk_run),
        ("cluster-count trend", cluster_count_trend),
        ("Newton vs fixed point", newton_vs_picard),
        ("theta scheme", theta_scheme),
        ("functional errors", qoi_errors),
        ("singular-value decay", singular_value_decay),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        // written to the raw handle so the lines survive output capture
        writeln!(
            std::io::stderr(),
            "{} {:>2} {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed()
        )
        .unwrap();
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
