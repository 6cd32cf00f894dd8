//! Run configuration.
//!
//! Plain text, one `key = value` per line, grouped under `[section]`
//! headers. `#` starts a comment. Lists are comma separated. Unknown
//! sections and keys are rejected with the offending line number.
//!
//! ```text
//! [instance]
//! kind = convection-diffusion
//! n = 50
//!
//! [parameters]
//! mu = 0.9, 1.1, 10        # low, high, count
//! nu = 0.03, 0.06, 10
//!
//! [newton]
//! clusters = 10
//! tol = 1e-6
//!
//! [solver]
//! method = gmrest
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lrnewton::clustering::{linspace, ParameterGrid, Reference};
use lrnewton::model::{ConvectionDiffusionConfig, Source, SyntheticConfig};
use lrnewton::newton::NewtonOptions;
use lrnewton::solvers::{ChebyshevParams, SolverOptions};
use lrnewton::timestepping::{InitialState, RhsMode, TimeGrid};

use crate::error::CliError;

const SECTIONS: &[&str] = &["instance", "parameters", "newton", "solver", "estimate", "time", "qoi"];

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: usize,
}

/// Parsed lines with bookkeeping of which keys were consumed.
struct Raw {
    entries: Vec<Entry>,
    used: HashSet<usize>,
}

fn config_err(line: usize, message: impl Into<String>) -> CliError {
    CliError::Config {
        line: Some(line),
        message: message.into(),
    }
}

impl Raw {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries: Vec<Entry> = Vec::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, "section header must end with ']'"))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(config_err(line, format!("unknown section [{name}]")));
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, "expected `key = value`"))?;
            let key = key.trim().to_string();
            if section.is_empty() {
                return Err(config_err(line, format!("key `{key}` outside of any section")));
            }
            if let Some(prev) = entries.iter().find(|e| e.section == section && e.key == key) {
                return Err(config_err(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
            entries.push(Entry {
                section: section.clone(),
                key,
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(Raw {
            entries,
            used: HashSet::new(),
        })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<Entry> {
        let idx = self
            .entries
            .iter()
            .position(|e| e.section == section && e.key == key)?;
        self.used.insert(idx);
        Some(self.entries[idx].clone())
    }

    fn has_section(&self, section: &str) -> bool {
        self.entries.iter().any(|e| e.section == section)
    }

    fn get<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<(T, usize)>, CliError> {
        match self.take(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(|v| Some((v, e.line)))
                .map_err(|_| config_err(e.line, format!("cannot parse `{}` for [{section}] {key}", e.value))),
        }
    }

    fn or<T: FromStr>(&mut self, section: &str, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.get(section, key)?.map_or(default, |(v, _)| v))
    }

    fn list<T: FromStr>(&mut self, section: &str, key: &str) -> Result<Option<(Vec<T>, usize)>, CliError> {
        let Some(e) = self.take(section, key) else {
            return Ok(None);
        };
        let items = e
            .value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<T>()
                    .map_err(|_| config_err(e.line, format!("cannot parse list item `{}` for [{section}] {key}", s.trim())))
            })
            .collect::<Result<Vec<T>, _>>()?;
        Ok(Some((items, e.line)))
    }

    fn finish(&self) -> Result<(), CliError> {
        for (i, e) in self.entries.iter().enumerate() {
            if !self.used.contains(&i) {
                return Err(config_err(
                    e.line,
                    format!("unknown key `{}` in section [{}]", e.key, e.section),
                ));
            }
        }
        Ok(())
    }
}

/// `low, high, count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.count)
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceConfig {
    Synthetic(SyntheticConfig),
    ConvectionDiffusion(ConvectionDiffusionConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChebyshevSource {
    Given(ChebyshevParams),
    Estimate,
    /// A file written by the `estimate` command.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolverChoice {
    Gmrest,
    Chebyshev(ChebyshevSource),
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateConfig {
    /// Grid size of the coarse convection–diffusion instance.
    pub n: Option<usize>,
    pub clusters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeConfig {
    pub grid: TimeGrid,
    pub rhs: RhsMode,
    pub initial: InitialState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QoiConfig {
    /// Node coordinates of point-value functionals.
    pub points: Vec<(f64, f64)>,
    pub integral: bool,
    /// 1-based multi-indices of the sampled parameter combinations.
    pub samples: Vec<Vec<usize>>,
    pub fine_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub mu: Axis,
    pub nu: Axis,
    pub lambda: Option<Axis>,
    pub rho: Option<Axis>,
    pub clusters: usize,
    pub compare_clusters: Vec<usize>,
    pub newton: NewtonOptions,
    pub chaining: bool,
    pub solver: SolverChoice,
    pub solver_opts: SolverOptions,
    pub second_step: bool,
    pub estimate: EstimateConfig,
    pub time: Option<TimeConfig>,
    pub qoi: QoiConfig,
}

fn axis(raw: &mut Raw, key: &str) -> Result<Option<Axis>, CliError> {
    let Some((v, line)) = raw.list::<f64>("parameters", key)? else {
        return Ok(None);
    };
    if v.len() != 3 || v[2] < 1.0 || v[2].fract() != 0.0 {
        return Err(config_err(line, format!("[parameters] {key} needs `low, high, count` with count >= 1")));
    }
    if v[1] < v[0] {
        return Err(config_err(line, format!("[parameters] {key}: high must not be below low")));
    }
    Ok(Some(Axis {
        lo: v[0],
        hi: v[1],
        count: v[2] as usize,
    }))
}

fn positive(value: f64, line: Option<usize>, what: &str) -> Result<f64, CliError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(CliError::Config {
            line,
            message: format!("{what} must be positive, got {value}"),
        })
    }
}

fn parse_instance(raw: &mut Raw, reference: Reference) -> Result<InstanceConfig, CliError> {
    let kind = raw.take("instance", "kind").ok_or_else(|| CliError::Config {
        line: None,
        message: "[instance] kind is required (synthetic | convection-diffusion)".into(),
    })?;
    let s = "instance";
    match kind.value.as_str() {
        "synthetic" => {
            let d = SyntheticConfig::default();
            Ok(InstanceConfig::Synthetic(SyntheticConfig {
                seed: raw.or(s, "seed", d.seed)?,
                dim: raw.or(s, "dim", d.dim)?,
                density: raw.or(s, "density", d.density)?,
                nonlinear_scale: raw.or(s, "nonlinear_scale", d.nonlinear_scale)?,
                reference,
            }))
        }
        "convection-diffusion" => {
            let d = ConvectionDiffusionConfig::default();
            let source = match raw.take(s, "source") {
                None => d.source,
                Some(e) if e.value == "manufactured" => Source::Manufactured,
                Some(e) => {
                    let v = e.value.strip_prefix("constant").map(str::trim);
                    match v.and_then(|v| v.parse::<f64>().ok()) {
                        Some(f) => Source::Constant(f),
                        None => {
                            return Err(config_err(e.line, "source must be `manufactured` or `constant <value>`"))
                        }
                    }
                }
            };
            let solid_box = match raw.list::<f64>(s, "solid_box")? {
                None => d.solid_box,
                Some((v, line)) => v
                    .try_into()
                    .map_err(|_| config_err(line, "solid_box needs four values x0, x1, y0, y1"))?,
            };
            Ok(InstanceConfig::ConvectionDiffusion(ConvectionDiffusionConfig {
                n: raw.or(s, "n", d.n)?,
                reference,
                rho_s: raw.or(s, "rho_s", d.rho_s)?,
                reaction: raw.or(s, "reaction", d.reaction)?,
                solid_reaction: raw.or(s, "solid_reaction", d.solid_reaction)?,
                kappa_mu: raw.or(s, "kappa_mu", d.kappa_mu)?,
                kappa_lambda: raw.or(s, "kappa_lambda", d.kappa_lambda)?,
                kappa_rho: raw.or(s, "kappa_rho", d.kappa_rho)?,
                inflow: raw.or(s, "inflow", d.inflow)?,
                source,
                solid_box,
            }))
        }
        other => Err(config_err(
            kind.line,
            format!("unknown instance kind `{other}` (synthetic | convection-diffusion)"),
        )),
    }
}

fn parse_solver(raw: &mut Raw, base: &Path) -> Result<SolverChoice, CliError> {
    let s = "solver";
    let method = raw.take(s, "method");
    let cheb = raw.take(s, "chebyshev");
    let file = raw.take(s, "chebyshev_file");
    let choice = match method.as_ref().map(|e| e.value.as_str()) {
        None | Some("gmrest") => SolverChoice::Gmrest,
        Some("dense") => SolverChoice::Dense,
        Some("chebyshevt") => {
            let source = match (&cheb, &file) {
                (Some(_), Some(f)) => {
                    return Err(config_err(f.line, "give either `chebyshev` or `chebyshev_file`, not both"))
                }
                (None, Some(f)) => ChebyshevSource::File(base.join(&f.value)),
                (Some(e), None) if e.value == "estimate" => ChebyshevSource::Estimate,
                (Some(e), None) => {
                    let v: Vec<f64> = e
                        .value
                        .split(',')
                        .map(|t| t.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| config_err(e.line, "chebyshev must be `estimate` or `c, d`"))?;
                    if v.len() != 2 {
                        return Err(config_err(e.line, "chebyshev must be `estimate` or `c, d`"));
                    }
                    ChebyshevSource::Given(
                        ChebyshevParams::new(v[0], v[1]).map_err(|err| config_err(e.line, err.to_string()))?,
                    )
                }
                (None, None) => ChebyshevSource::Estimate,
            };
            SolverChoice::Chebyshev(source)
        }
        Some(other) => {
            return Err(config_err(
                method.as_ref().map_or(0, |e| e.line),
                format!("unknown solver method `{other}` (gmrest | chebyshevt | dense)"),
            ))
        }
    };
    if !matches!(choice, SolverChoice::Chebyshev(_)) {
        if let Some(e) = cheb.or(file) {
            return Err(config_err(e.line, "Chebyshev parameters given but method is not chebyshevt"));
        }
    }
    Ok(choice)
}

fn parse_time(raw: &mut Raw) -> Result<Option<TimeConfig>, CliError> {
    if !raw.has_section("time") {
        return Ok(None);
    }
    let s = "time";
    let theta = raw.or(s, "theta", 1.0)?;
    let t_final = raw.or(s, "t_final", 1.0)?;
    let steps = raw.or(s, "steps", 10usize)?;
    let grid = TimeGrid::new(t_final, steps, theta).map_err(|e| CliError::Config {
        line: None,
        message: e.to_string(),
    })?;
    let rhs = match raw.take(s, "rhs") {
        None => RhsMode::default(),
        Some(e) => match e.value.as_str() {
            "approximated" => RhsMode::Approximated,
            "exact" => RhsMode::Exact,
            _ => return Err(config_err(e.line, "rhs must be `approximated` or `exact`")),
        },
    };
    let initial = match raw.take(s, "initial") {
        None => InitialState::default(),
        Some(e) => match e.value.as_str() {
            "dirichlet" => InitialState::Dirichlet,
            "stationary" => InitialState::Stationary,
            _ => return Err(config_err(e.line, "initial must be `dirichlet` or `stationary`")),
        },
    };
    Ok(Some(TimeConfig { grid, rhs, initial }))
}

fn parse_qoi(raw: &mut Raw) -> Result<QoiConfig, CliError> {
    let s = "qoi";
    let points = match raw.take(s, "points") {
        None => vec![(0.5, 0.75)],
        Some(e) => e
            .value
            .split(',')
            .map(|p| {
                let xy: Vec<f64> = p
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| config_err(e.line, "points are `x y` pairs separated by commas"))?;
                match xy[..] {
                    [x, y] => Ok((x, y)),
                    _ => Err(config_err(e.line, "points are `x y` pairs separated by commas")),
                }
            })
            .collect::<Result<_, _>>()?,
    };
    let samples = match raw.take(s, "samples") {
        None => Vec::new(),
        Some(e) => e
            .value
            .split(',')
            .map(|t| {
                t.trim()
                    .split(':')
                    .map(|i| i.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| config_err(e.line, "samples are 1-based multi-indices like `1:1, 10:10`"))
            })
            .collect::<Result<_, _>>()?,
    };
    Ok(QoiConfig {
        points,
        integral: raw.or(s, "integral", true)?,
        samples,
        fine_tol: raw.or(s, "fine_tol", 1e-12)?,
    })
}

impl RunConfig {
    /// Parses `text`; relative paths inside are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, CliError> {
        let mut raw = Raw::parse(text)?;

        let mu = axis(&mut raw, "mu")?.ok_or_else(|| CliError::Config {
            line: None,
            message: "[parameters] mu is required".into(),
        })?;
        let nu = axis(&mut raw, "nu")?.ok_or_else(|| CliError::Config {
            line: None,
            message: "[parameters] nu is required".into(),
        })?;
        let lambda = axis(&mut raw, "lambda")?;
        let rho = axis(&mut raw, "rho")?;
        let s = "instance";
        let reference = Reference {
            mu: raw.or(s, "mu_ref", mu.mid())?,
            nu: raw.or(s, "nu_ref", nu.mid())?,
            lambda: raw.or(s, "lambda_ref", lambda.map_or(1.0, |a| a.mid()))?,
            rho: raw.or(s, "rho_ref", rho.map_or(1.0, |a| a.mid()))?,
        };
        let instance = parse_instance(&mut raw, reference)?;

        let m = mu.count * nu.count * lambda.map_or(1, |a| a.count) * rho.map_or(1, |a| a.count);
        let s = "newton";
        let (clusters, line) = raw.get::<usize>(s, "clusters")?.unwrap_or((1, 0));
        if clusters == 0 || clusters > m {
            return Err(CliError::Config {
                line: (line > 0).then_some(line),
                message: format!(
                    "clusters must satisfy 1 <= K <= m; got K = {clusters} with m = {m} parameter combinations"
                ),
            });
        }
        let compare_clusters = raw.list::<usize>(s, "compare_clusters")?.map_or(Vec::new(), |(v, _)| v);
        if let Some(&k) = compare_clusters.iter().find(|&&k| k == 0 || k > m) {
            return Err(CliError::Config {
                line: None,
                message: format!("compare_clusters entry K = {k} violates 1 <= K <= m = {m}"),
            });
        }
        let newton = NewtonOptions {
            tol: positive(raw.or(s, "tol", 1e-6)?, None, "[newton] tol")?,
            max_steps: raw.or(s, "max_steps", 50)?,
        };
        let chaining = raw.or(s, "chaining", true)?;

        let solver = parse_solver(&mut raw, base)?;
        let s = "solver";
        let d = SolverOptions::default();
        let solver_opts = SolverOptions {
            rank: raw.or(s, "rank", d.rank)?,
            restart: raw.or(s, "restart", d.restart)?,
            max_restarts: raw.or(s, "max_restarts", d.max_restarts)?,
            tol: positive(raw.or(s, "tol", d.tol)?, None, "[solver] tol")?,
            trace: raw.or(s, "trace", true)?,
        };
        if solver_opts.rank == 0 || solver_opts.restart == 0 {
            return Err(CliError::Config {
                line: None,
                message: "[solver] rank and restart must be at least 1".into(),
            });
        }
        let second_step = raw.or(s, "second_step", false)?;

        let estimate = EstimateConfig {
            n: raw.get::<usize>("estimate", "n")?.map(|(v, _)| v),
            clusters: raw.or("estimate", "clusters", clusters)?,
        };
        let time = parse_time(&mut raw)?;
        let qoi = parse_qoi(&mut raw)?;
        raw.finish()?;

        Ok(RunConfig {
            instance,
            mu,
            nu,
            lambda,
            rho,
            clusters,
            compare_clusters,
            newton,
            chaining,
            solver,
            solver_opts,
            second_step,
            estimate,
            time,
            qoi,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn reference(&self) -> Reference {
        match &self.instance {
            InstanceConfig::Synthetic(c) => c.reference,
            InstanceConfig::ConvectionDiffusion(c) => c.reference,
        }
    }

    pub fn grid(&self) -> Result<ParameterGrid, CliError> {
        let r = self.reference();
        let grid = if self.lambda.is_some() || self.rho.is_some() {
            ParameterGrid::four_parameter(
                self.mu.values(),
                self.nu.values(),
                self.lambda.map_or(vec![r.lambda], |a| a.values()),
                self.rho.map_or(vec![r.rho], |a| a.values()),
                r,
            )?
        } else {
            ParameterGrid::two_parameter(self.mu.values(), self.nu.values(), r)?
        };
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[instance]\nkind = synthetic\n[parameters]\nmu = 0.9, 1.1, 4\nnu = 1, 2, 3\n";

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(text, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.clusters, 1);
        assert_eq!(c.solver, SolverChoice::Gmrest);
        assert_eq!(c.solver_opts.rank, 10);
        assert_eq!(c.reference().mu, 1.0);
        assert_eq!(c.reference().nu, 1.5);
        assert_eq!(c.grid().unwrap().len(), 12);
        assert!(c.time.is_none());
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse(&format!("{MINIMAL}[newton]\nclusters = 2\nfoo = 1\n")).unwrap_err();
        match err {
            CliError::Config { line, message } => {
                assert_eq!(line, Some(8));
                assert!(message.contains("foo"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn too_many_clusters_names_the_constraint() {
        let err = parse(&format!("{MINIMAL}[newton]\nclusters = 13\n")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("K = 13") && msg.contains("m = 12"), "{msg}");
        assert!(msg.contains("line 7"), "{msg}");
    }

    #[test]
    fn chebyshev_sources() {
        let c = parse(&format!("{MINIMAL}[solver]\nmethod = chebyshevt\nchebyshev = 0.1, 1\n")).unwrap();
        assert_eq!(
            c.solver,
            SolverChoice::Chebyshev(ChebyshevSource::Given(ChebyshevParams { c: 0.1, d: 1.0 }))
        );
        let c = parse(&format!("{MINIMAL}[solver]\nmethod = chebyshevt\nchebyshev_file = p.txt\n")).unwrap();
        assert_eq!(
            c.solver,
            SolverChoice::Chebyshev(ChebyshevSource::File(PathBuf::from("./p.txt")))
        );
        assert!(parse(&format!("{MINIMAL}[solver]\nmethod = chebyshevt\nchebyshev = 1, 1\n")).is_err());
        assert!(parse(&format!("{MINIMAL}[solver]\nchebyshev = 0.1, 1\n")).is_err());
    }

    #[test]
    fn malformed_lines() {
        assert!(parse("[instance\nkind = synthetic\n").is_err());
        assert!(parse("kind = synthetic\n").is_err());
        assert!(parse("[nonsense]\n").is_err());
        assert!(parse(&format!("{MINIMAL}[newton]\ntol = abc\n")).is_err());
        assert!(parse(&format!("{MINIMAL}[newton]\ntol = 1\ntol = 2\n")).is_err());
        assert!(parse("[instance]\nkind = synthetic\n[parameters]\nmu = 1, 2\nnu = 1, 2, 3\n").is_err());
    }

    #[test]
    fn time_and_qoi_sections() {
        let c = parse(&format!(
            "{MINIMAL}[time]\ntheta = 0.5\nsteps = 4\nrhs = exact\n[qoi]\npoints = 0.5 0.75, 0.25 0.25\nsamples = 1:1, 4:3\n"
        ))
        .unwrap();
        let t = c.time.unwrap();
        assert_eq!(t.grid.theta, 0.5);
        assert_eq!(t.rhs, RhsMode::Exact);
        assert_eq!(c.qoi.points, vec![(0.5, 0.75), (0.25, 0.25)]);
        assert_eq!(c.qoi.samples, vec![vec![1, 1], vec![4, 3]]);
    }
}
