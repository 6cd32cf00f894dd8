//! The subcommands. Each one reads a [`RunConfig`], writes its files into the
//! output directory and returns the data it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use lrnewton::clustering::{linear_index, ParameterGrid};
use lrnewton::fixedpoint::{compare_newton_vs_picard, PicardComparison};
use lrnewton::model::{
    generate_synthetic, ConvectionDiffusion, ConvectionDiffusionConfig, LinearFunctional, ParametricSystem,
};
use lrnewton::newton::{
    algorithm_one, newton_solve_single, ClusterSolver, ClusterStepOptions, NewtonOptions, RunOptions,
    RunOutcome,
};
use lrnewton::solvers::{estimate_chebyshev_params, ChebyshevParams, SpectrumEstimate};
use lrnewton::timestepping::{theta_trajectory_clustered, TrajectoryOutcome};

use crate::config::{ChebyshevSource, InstanceConfig, RunConfig, SolverChoice};
use crate::error::CliError;

pub const CHEBYSHEV_FILE: &str = "chebyshev_params.txt";

/// The system of the configured instance, plus the grid geometry for
/// convection–diffusion.
pub fn build_instance(inst: &InstanceConfig) -> Result<(ParametricSystem, Option<ConvectionDiffusion>), CliError> {
    match inst {
        InstanceConfig::Synthetic(c) => Ok((generate_synthetic(c), None)),
        InstanceConfig::ConvectionDiffusion(c) => {
            let cd = ConvectionDiffusion::build(c.clone())?;
            Ok((cd.system.clone(), Some(cd)))
        }
    }
}

/// `c = …` / `d = …` with shortest round-trip formatting.
pub fn format_chebyshev(p: &ChebyshevParams) -> String {
    format!("c = {:?}\nd = {:?}\n", p.c, p.d)
}

pub fn parse_chebyshev(text: &str) -> Result<ChebyshevParams, CliError> {
    let mut c = None;
    let mut d = None;
    for (i, line) in text.lines().enumerate() {
        let bad = || CliError::Config {
            line: Some(i + 1),
            message: "expected `c = <value>` or `d = <value>`".into(),
        };
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(bad)?;
        let v: f64 = v.trim().parse().map_err(|_| bad())?;
        match k.trim() {
            "c" => c = Some(v),
            "d" => d = Some(v),
            _ => return Err(bad()),
        }
    }
    match (c, d) {
        (Some(c), Some(d)) => Ok(ChebyshevParams::new(c, d)?),
        _ => Err(CliError::Config {
            line: None,
            message: "Chebyshev parameter file needs both c and d".into(),
        }),
    }
}

fn write(out: &Path, name: &str, content: &str) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    fs::write(out.join(name), content)?;
    Ok(())
}

/// Coarse system used by the spectrum estimate.
fn coarse_system(cfg: &RunConfig) -> Result<ParametricSystem, CliError> {
    match (&cfg.instance, cfg.estimate.n) {
        (InstanceConfig::ConvectionDiffusion(c), Some(n)) => Ok(ConvectionDiffusion::build(ConvectionDiffusionConfig {
            n,
            ..c.clone()
        })?
        .system),
        _ => Ok(build_instance(&cfg.instance)?.0),
    }
}

pub fn estimate(cfg: &RunConfig) -> Result<SpectrumEstimate, CliError> {
    let sys = coarse_system(cfg)?;
    let grid = cfg.grid()?;
    Ok(estimate_chebyshev_params(&sys, &grid, cfg.estimate.clusters, &cfg.newton)?)
}

fn step_options(cfg: &RunConfig) -> Result<ClusterStepOptions, CliError> {
    let solver = match &cfg.solver {
        SolverChoice::Gmrest => ClusterSolver::Gmrest,
        SolverChoice::Dense => ClusterSolver::Dense,
        SolverChoice::Chebyshev(ChebyshevSource::Given(p)) => ClusterSolver::Chebyshev(*p),
        SolverChoice::Chebyshev(ChebyshevSource::File(path)) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config {
                line: None,
                message: format!("cannot read {}: {e}", path.display()),
            })?;
            ClusterSolver::Chebyshev(parse_chebyshev(&text)?)
        }
        SolverChoice::Chebyshev(ChebyshevSource::Estimate) => {
            let est = estimate(cfg)?;
            log::info!("estimated Chebyshev parameters c = {:e}, d = {:e}", est.params.c, est.params.d);
            ClusterSolver::Chebyshev(est.params)
        }
    };
    Ok(ClusterStepOptions {
        solver,
        solver_opts: cfg.solver_opts,
        second_step: cfg.second_step,
    })
}

pub fn run_options(cfg: &RunConfig, clusters: usize) -> Result<RunOptions, CliError> {
    Ok(RunOptions {
        clusters,
        newton: cfg.newton,
        step: step_options(cfg)?,
        chaining: cfg.chaining,
    })
}

fn join<T: ToString>(v: &[T]) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
    }
}

pub fn summary(grid: &ParameterGrid, clusters: usize, run: &RunOutcome) -> String {
    let r = &run.report;
    let dims: Vec<String> = grid.dims().iter().map(usize::to_string).collect();
    let mut s = String::new();
    writeln!(s, "parameters: {} ({})", grid.len(), dims.join(" x ")).unwrap();
    writeln!(s, "clusters: {clusters}").unwrap();
    writeln!(s, "max_rel_residual: {:.6e}", r.max_residual()).unwrap();
    writeln!(s, "mean_rel_residual: {:.6e}", r.mean_residual()).unwrap();
    writeln!(s, "newton_steps_anchor: {}", r.anchor_steps).unwrap();
    writeln!(s, "newton_steps_cluster: {}", r.cluster_steps).unwrap();
    writeln!(s, "newton_steps_total: {}", r.total_steps()).unwrap();
    writeln!(s, "solver_iterations: {}", join(&r.solver_iterations)).unwrap();
    writeln!(s, "ranks: {}", join(&r.ranks)).unwrap();
    writeln!(s, "global_rank: {}", run.x.rank()).unwrap();
    writeln!(s, "flagged_clusters: {}", join(&r.flagged_clusters)).unwrap();
    s
}

fn trace_csv(run: &RunOutcome) -> String {
    let mut s = String::from("cluster,iteration,rel_residual,rank\n");
    for (c, t) in run.trace_rows() {
        writeln!(s, "{c},{},{:.6e},{}", t.iteration, t.residual, t.rank).unwrap();
    }
    s
}

/// Clustered sweep: `report.csv`, `summary.txt`, `solver_trace.csv`.
pub fn run(cfg: &RunConfig, out: &Path) -> Result<RunOutcome, CliError> {
    let (sys, _) = build_instance(&cfg.instance)?;
    let grid = cfg.grid()?;
    let result = algorithm_one(&sys, &grid, &run_options(cfg, cfg.clusters)?)?;
    log::info!("sweep finished in {:?}", result.report.wall_time);
    write(out, "report.csv", &result.report.to_csv())?;
    write(out, "summary.txt", &summary(&grid, cfg.clusters, &result))?;
    write(out, "solver_trace.csv", &trace_csv(&result))?;
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub clusters: usize,
    pub max_residual: f64,
    pub mean_residual: f64,
    pub total_steps: usize,
}

/// One sweep per entry of `compare_clusters`: `report_K{K}.csv` and `compare_summary.csv`.
pub fn compare(cfg: &RunConfig, out: &Path) -> Result<Vec<CompareRow>, CliError> {
    if cfg.compare_clusters.len() < 2 {
        return Err(CliError::Config {
            line: None,
            message: "compare needs at least two values in [newton] compare_clusters".into(),
        });
    }
    let (sys, _) = build_instance(&cfg.instance)?;
    let grid = cfg.grid()?;
    let mut rows = Vec::new();
    let mut s = String::from("clusters,max_rel_residual,mean_rel_residual,newton_steps_total\n");
    for &k in &cfg.compare_clusters {
        let r = algorithm_one(&sys, &grid, &run_options(cfg, k)?)?;
        write(out, &format!("report_K{k}.csv"), &r.report.to_csv())?;
        let row = CompareRow {
            clusters: k,
            max_residual: r.report.max_residual(),
            mean_residual: r.report.mean_residual(),
            total_steps: r.report.total_steps(),
        };
        writeln!(s, "{k},{:.6e},{:.6e},{}", row.max_residual, row.mean_residual, row.total_steps).unwrap();
        rows.push(row);
    }
    write(out, "compare_summary.csv", &s)?;
    Ok(rows)
}

/// Writes `chebyshev_params.txt` for reuse through `chebyshev_file`.
pub fn estimate_cmd(cfg: &RunConfig, out: &Path) -> Result<SpectrumEstimate, CliError> {
    let est = estimate(cfg)?;
    write(out, CHEBYSHEV_FILE, &format_chebyshev(&est.params))?;
    Ok(est)
}

/// `picard_compare.csv` with per-parameter residual triples.
pub fn picard_compare(cfg: &RunConfig, out: &Path) -> Result<PicardComparison, CliError> {
    let (sys, _) = build_instance(&cfg.instance)?;
    let grid = cfg.grid()?;
    let step = step_options(cfg)?;
    let cmp = compare_newton_vs_picard(&sys, &grid, cfg.clusters, &cfg.newton, &step)?;
    write(out, "picard_compare.csv", &cmp.to_csv())?;
    let s = format!(
        "max_rel_residual_newton: {:.6e}\nmax_rel_residual_picard: {:.6e}\nratio: {:.3}\n",
        cmp.max_newton(),
        cmp.max_picard(),
        cmp.ratio()
    );
    write(out, "picard_summary.txt", &s)?;
    Ok(cmp)
}

/// `trajectory.csv` for stationary boundary data.
pub fn time_run(cfg: &RunConfig, out: &Path) -> Result<TrajectoryOutcome, CliError> {
    let t = cfg.time.ok_or_else(|| CliError::Config {
        line: None,
        message: "time-run needs a [time] section".into(),
    })?;
    let (sys, _) = build_instance(&cfg.instance)?;
    let grid = cfg.grid()?;
    let opts = run_options(cfg, cfg.clusters)?;
    let b = sys.b_d.clone();
    let forcing = move |_t: f64| b.clone();
    let traj = theta_trajectory_clustered(&sys, &grid, &t.grid, &opts, t.rhs, t.initial, &forcing)?;
    write(out, "trajectory.csv", &traj.to_csv())?;
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoiRow {
    pub p: usize,
    pub index: Vec<usize>,
    pub functional: String,
    pub j_ref: f64,
    pub j_eps: f64,
    pub j_hat: f64,
    /// `|J(x̂) − J(x_ε)| / |J(x_ref)|`
    pub err: f64,
    /// `|J(x_ref) − J(x_ε)| / |J(x_ref)|`
    pub errdisc: f64,
}

pub fn qoi_csv(rows: &[QoiRow]) -> String {
    let dims = rows.first().map_or(2, |r| r.index.len());
    let mut s = String::from("p");
    for k in 1..=dims {
        write!(s, ",i{k}").unwrap();
    }
    s.push_str(",functional,j_ref,j_eps,j_hat,err,errdisc\n");
    for r in rows {
        write!(s, "{}", r.p).unwrap();
        for i in &r.index {
            write!(s, ",{i}").unwrap();
        }
        writeln!(
            s,
            ",{},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e}",
            r.functional, r.j_ref, r.j_eps, r.j_hat, r.err, r.errdisc
        )
        .unwrap();
    }
    s
}

fn functionals(cfg: &RunConfig, cd: &ConvectionDiffusion) -> Result<Vec<LinearFunctional>, CliError> {
    let mut out = Vec::new();
    for &(x, y) in &cfg.qoi.points {
        out.push(cd.point_functional(x, y)?);
    }
    if cfg.qoi.integral {
        out.push(cd.integral_functional());
    }
    Ok(out)
}

/// Error of the clustered approximation against the discretization error,
/// measured in linear functionals with a refined-grid reference:
/// `qoi_errors.csv`.
pub fn qoi_errors(cfg: &RunConfig, out: &Path) -> Result<Vec<QoiRow>, CliError> {
    let (sys, cd) = build_instance(&cfg.instance)?;
    let cd = cd.ok_or_else(|| CliError::Config {
        line: None,
        message: "qoi-errors needs the convection-diffusion instance (grid refinement)".into(),
    })?;
    let fine = cd.refined()?;
    let grid = cfg.grid()?;
    let dims = grid.dims();
    let samples = if cfg.qoi.samples.is_empty() {
        vec![vec![1; dims.len()], dims.clone()]
    } else {
        cfg.qoi.samples.clone()
    };
    let coarse_f = functionals(cfg, &cd)?;
    let fine_f = functionals(cfg, &fine)?;
    let run = algorithm_one(&sys, &grid, &run_options(cfg, cfg.clusters)?)?;
    let fine_opts = NewtonOptions {
        tol: cfg.qoi.fine_tol,
        max_steps: cfg.newton.max_steps,
    };

    let mut rows = Vec::new();
    for idx in samples {
        let p1 = linear_index(&idx, &dims).map_err(|e| CliError::Config {
            line: None,
            message: format!("qoi sample {idx:?}: {e}"),
        })?;
        let p = grid.point(p1 - 1)?;
        let x_hat = run.x.column(p1 - 1)?;
        let x_eps = newton_solve_single(&sys, &p, &sys.b_d, &cfg.newton)?.x;
        let x_ref = newton_solve_single(&fine.system, &p, &fine.system.b_d, &fine_opts)?.x;
        for (jc, jf) in coarse_f.iter().zip(&fine_f) {
            let (j_ref, j_eps, j_hat) = (jf.eval(&x_ref), jc.eval(&x_eps), jc.eval(&x_hat));
            rows.push(QoiRow {
                p: p1,
                index: idx.clone(),
                functional: jc.name.clone(),
                j_ref,
                j_eps,
                j_hat,
                err: (j_hat - j_eps).abs() / j_ref.abs(),
                errdisc: (j_ref - j_eps).abs() / j_ref.abs(),
            });
        }
    }
    write(out, "qoi_errors.csv", &qoi_csv(&rows))?;
    Ok(rows)
}
