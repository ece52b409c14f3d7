//! Convergence studies, the boundary-pulse benchmark with the locking
//! comparison, and the permeability-coupling sweep.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{build_structured, Rect};
use crate::model::{PermeabilityLaw, Problem};
use crate::solver::classical::Classical;
use crate::solver::diagnostics::{undershoot, Diagnostics};
use crate::solver::{Discretization, Mafea, SolverSettings, StepperState};
use crate::spaces::{compute_error, compute_error_against, FieldVector, Norm, PointSample};

/// Degrees of the displacement space and of the scalar spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementPair {
    pub u_degree: usize,
    pub s_degree: usize,
}

impl ElementPair {
    pub const P2_P1: ElementPair = ElementPair { u_degree: 2, s_degree: 1 };
    pub const P1_P1: ElementPair = ElementPair { u_degree: 1, s_degree: 1 };
    pub const P2_P2: ElementPair = ElementPair { u_degree: 2, s_degree: 2 };
}

impl fmt::Display for ElementPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.u_degree, self.s_degree)
    }
}

impl FromStr for ElementPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config(format!("element pair '{s}' must look like 2-1 with degrees 1 or 2"));
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let u_degree: usize = a.trim().parse().map_err(|_| bad())?;
        let s_degree: usize = b.trim().parse().map_err(|_| bad())?;
        if !(1..=2).contains(&u_degree) || !(1..=2).contains(&s_degree) {
            return Err(bad());
        }
        Ok(ElementPair { u_degree, s_degree })
    }
}

/// Column names of the six error measures, in table order.
pub const ERROR_COLUMNS: [&str; 6] = ["u_L2", "u_H1", "p_L2", "p_H1", "T_L2", "T_H1"];

/// `log2(e_coarse / e_fine)`.
pub fn convergence_rate(e_coarse: f64, e_fine: f64) -> f64 {
    (e_coarse / e_fine).log2()
}

/// Error rows keyed by a step size, with rates between consecutive rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// Name of the first column (`h` or `dt`).
    pub key: String,
    pub relative: bool,
    pub rows: Vec<(f64, [f64; 6])>,
}

impl ConvergenceTable {
    /// Rates between row `i − 1` and row `i`.
    pub fn rates(&self, i: usize) -> Option<[f64; 6]> {
        if i == 0 || i >= self.rows.len() {
            return None;
        }
        let (a, b) = (&self.rows[i - 1].1, &self.rows[i].1);
        Some(std::array::from_fn(|k| convergence_rate(a[k], b[k])))
    }

    pub fn finest_rates(&self) -> Option<[f64; 6]> {
        self.rates(self.rows.len().saturating_sub(1))
    }

    /// `key, e, CR` per measure; rate cells of the first row are empty.
    pub fn to_csv(&self) -> String {
        let mut s = self.key.clone();
        for c in ERROR_COLUMNS {
            let _ = write!(s, ",{c},{c}_rate");
        }
        s.push('\n');
        for (i, (k, e)) in self.rows.iter().enumerate() {
            let _ = write!(s, "{k:.16e}");
            let r = self.rates(i);
            for j in 0..6 {
                let _ = write!(s, ",{:.16e},", e[j]);
                if let Some(r) = r {
                    let _ = write!(s, "{:.16e}", r[j]);
                }
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// Human-readable table.
    pub fn render(&self) -> String {
        let mut s = format!("{:>10}", self.key);
        for c in ERROR_COLUMNS {
            let _ = write!(s, " {c:>11} {:>7}", "CR");
        }
        s.push('\n');
        for (i, (k, e)) in self.rows.iter().enumerate() {
            let _ = write!(s, "{k:>10.3e}");
            let r = self.rates(i);
            for j in 0..6 {
                let _ = write!(s, " {:>11.4e}", e[j]);
                match r {
                    Some(r) => {
                        let _ = write!(s, " {:>7.4}", r[j]);
                    }
                    None => s.push_str("        "),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// How the time step follows the mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    /// `Δt = coef·(1/n)²` for an `n × n` mesh.
    HSquared { coef: f64 },
    Fixed(f64),
}

impl DtRule {
    pub fn dt(&self, n: usize) -> f64 {
        match *self {
            DtRule::HSquared { coef } => coef / (n * n) as f64,
            DtRule::Fixed(dt) => dt,
        }
    }
}

/// Unit-square mesh with `n × n` cells.
pub fn unit_mesh(n: usize) -> Result<Arc<crate::mesh::Mesh>> {
    Ok(Arc::new(build_structured(n, n, Rect::UNIT)?))
}

/// Runs the multiphysics stepper to the final time.
pub fn run_mafea(
    problem: Arc<dyn Problem>,
    n: usize,
    pair: ElementPair,
    settings: &SolverSettings,
    law: Option<PermeabilityLaw>,
    mut observe: impl FnMut(&Discretization, &StepperState) -> Result<()>,
) -> Result<StepperState> {
    let mut disc = Discretization::new(problem, unit_mesh(n)?, pair.u_degree, pair.s_degree)?;
    if let Some(l) = law {
        disc = disc.with_law(l);
    }
    let mut m = Mafea::new(disc, settings.clone())?;
    let mut s = m.init()?;
    observe(&m.disc, &s)?;
    for _ in 0..settings.num_steps() {
        s = m.step(&s)?;
        observe(&m.disc, &s)?;
    }
    Ok(s)
}

/// `[u L2, u H1, p L2, p H1, T L2, T H1]` errors of `(u, p, T)` against the
/// exact solution of `problem` at time `t`.
pub fn errors_vs_exact(
    problem: &dyn Problem,
    u: &FieldVector,
    p: &FieldVector,
    temp: &FieldVector,
    t: f64,
    relative: bool,
) -> Result<[f64; 6]> {
    let ex = problem
        .exact()
        .ok_or_else(|| Error::config(format!("case '{}' has no exact solution", problem.name())))?;
    let fu = |x: [f64; 2]| {
        let s = ex.state(x, t);
        PointSample {
            value: s.u,
            grad: s.grad_u,
        }
    };
    let fp = |x: [f64; 2]| {
        let s = ex.state(x, t);
        PointSample::scalar(s.p, s.grad_p)
    };
    let ft = |x: [f64; 2]| {
        let s = ex.state(x, t);
        PointSample::scalar(s.temp, s.grad_temp)
    };
    Ok([
        compute_error(u, fu, Norm::L2, relative)?,
        compute_error(u, fu, Norm::H1, relative)?,
        compute_error(p, fp, Norm::L2, relative)?,
        compute_error(p, fp, Norm::H1, relative)?,
        compute_error(temp, ft, Norm::L2, relative)?,
        compute_error(temp, ft, Norm::H1, relative)?,
    ])
}

/// Errors of a coarse solution against a reference solution (absolute).
pub fn errors_vs_reference(coarse: &StepperState, reference: &StepperState) -> Result<[f64; 6]> {
    let pairs = [
        (&coarse.u, &reference.u),
        (&coarse.p, &reference.p),
        (&coarse.temp, &reference.temp),
    ];
    let mut out = [0.0; 6];
    for (k, (c, r)) in pairs.iter().enumerate() {
        out[2 * k] = compute_error_against(c, r, Norm::L2)?;
        out[2 * k + 1] = compute_error_against(c, r, Norm::H1)?;
    }
    Ok(out)
}

/// Spatial study: one run per `n` (mesh `n × n`, table key `h = 1/n`), errors
/// against the exact solution at the final time.
pub fn spatial_convergence(
    problem: Arc<dyn Problem>,
    pair: ElementPair,
    ns: &[usize],
    base: &SolverSettings,
    dt_rule: DtRule,
    relative: bool,
) -> Result<ConvergenceTable> {
    check_halving(ns)?;
    let rows: Vec<Result<(f64, [f64; 6])>> = ns
        .par_iter()
        .map(|&n| {
            let settings = SolverSettings {
                dt: dt_rule.dt(n),
                ..base.clone()
            };
            let s = run_mafea(problem.clone(), n, pair, &settings, None, |_, _| Ok(()))?;
            let e = errors_vs_exact(problem.as_ref(), &s.u, &s.p, &s.temp, s.t, relative)?;
            log::info!("spatial study {pair} n = {n}: {e:?}");
            Ok((1.0 / n as f64, e))
        })
        .collect();
    Ok(ConvergenceTable {
        key: "h".into(),
        relative,
        rows: rows.into_iter().collect::<Result<_>>()?,
    })
}

fn check_halving(ns: &[usize]) -> Result<()> {
    if ns.is_empty() || ns.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::config(format!(
            "mesh list {ns:?} must be non-empty and double at every entry"
        )));
    }
    Ok(())
}

/// Temporal study on a fixed mesh: Richardson differences
/// `‖v^{Δt} − v^{Δt/2}‖` at the final time, one row per consecutive pair.
pub fn temporal_convergence(
    problem: Arc<dyn Problem>,
    pair: ElementPair,
    n: usize,
    dts: &[f64],
    base: &SolverSettings,
) -> Result<ConvergenceTable> {
    if dts.len() < 2 || dts.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
        return Err(Error::config(format!(
            "time step list {dts:?} must have at least two entries, halving each time"
        )));
    }
    let sols: Vec<Result<StepperState>> = dts
        .par_iter()
        .map(|&dt| {
            let settings = SolverSettings { dt, ..base.clone() };
            run_mafea(problem.clone(), n, pair, &settings, None, |_, _| Ok(()))
        })
        .collect();
    let sols = sols.into_iter().collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, w) in sols.windows(2).enumerate() {
        rows.push((dts[i], errors_vs_reference(&w[0], &w[1])?));
    }
    Ok(ConvergenceTable {
        key: "dt".into(),
        relative: false,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPath {
    Classical,
    Mafea,
}

impl fmt::Display for SolverPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverPath::Classical => "classical",
            SolverPath::Mafea => "mafea",
        })
    }
}

/// Final fields and undershoot history of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub path: SolverPath,
    pub u: FieldVector,
    pub p: FieldVector,
    pub temp: FieldVector,
    /// `(t, pressure undershoot metric, temperature undershoot metric)` per step.
    pub history: Vec<(f64, f64, f64)>,
    /// Multiphysics runs only.
    pub diagnostics: Option<Diagnostics>,
    pub final_state: Option<StepperState>,
}

impl BenchmarkRun {
    /// Largest pressure undershoot over all steps.
    pub fn max_pressure_undershoot(&self) -> f64 {
        self.history.iter().map(|h| h.1).fold(0.0, f64::max)
    }

    pub fn max_temperature_undershoot(&self) -> f64 {
        self.history.iter().map(|h| h.2).fold(0.0, f64::max)
    }
}

/// Runs the benchmark with either solver. `snapshot` receives `(n, t, u, p, T)`
/// for every state.
pub fn benchmark_run(
    problem: Arc<dyn Problem>,
    n: usize,
    pair: ElementPair,
    settings: &SolverSettings,
    path: SolverPath,
    law: Option<PermeabilityLaw>,
    mut snapshot: impl FnMut(usize, f64, &FieldVector, &FieldVector, &FieldVector) -> Result<()>,
) -> Result<BenchmarkRun> {
    let mut history = Vec::new();
    match path {
        SolverPath::Mafea => {
            let mut diag = Diagnostics::default();
            let s = run_mafea(problem, n, pair, settings, law, |d, s| {
                let row = diag.record(d, s);
                let ut = undershoot(&s.temp, &d.rule).metric();
                history.push((s.t, row.undershoot.metric(), ut));
                snapshot(s.n, s.t, &s.u, &s.p, &s.temp)
            })?;
            Ok(BenchmarkRun {
                path,
                u: s.u.clone(),
                p: s.p.clone(),
                temp: s.temp.clone(),
                history,
                diagnostics: Some(diag),
                final_state: Some(s),
            })
        }
        SolverPath::Classical => {
            let mut disc = Discretization::new(problem, unit_mesh(n)?, pair.u_degree, pair.s_degree)?;
            if let Some(l) = law {
                disc = disc.with_law(l);
            }
            let mut c = Classical::new(disc, settings.clone())?;
            let rule = c.disc.rule.clone();
            let s = c.run(|s| {
                history.push((
                    s.t,
                    undershoot(&s.p, &rule).metric(),
                    undershoot(&s.temp, &rule).metric(),
                ));
                snapshot(s.n, s.t, &s.u, &s.p, &s.temp)
            })?;
            Ok(BenchmarkRun {
                path,
                u: s.u,
                p: s.p,
                temp: s.temp,
                history,
                diagnostics: None,
                final_state: None,
            })
        }
    }
}

/// Self-convergence against a reference run on an `n_ref × n_ref` mesh with
/// the same time step. Errors are absolute.
pub fn self_convergence(
    problem: Arc<dyn Problem>,
    pair: ElementPair,
    ns: &[usize],
    n_ref: usize,
    settings: &SolverSettings,
) -> Result<ConvergenceTable> {
    check_halving(ns)?;
    let mut all: Vec<usize> = ns.to_vec();
    all.push(n_ref);
    let sols: Vec<Result<StepperState>> = all
        .par_iter()
        .map(|&n| run_mafea(problem.clone(), n, pair, settings, None, |_, _| Ok(())))
        .collect();
    let mut sols = sols.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = sols.pop().expect("reference run present");
    let mut rows = Vec::new();
    for (n, s) in ns.iter().zip(&sols) {
        rows.push((1.0 / *n as f64, errors_vs_reference(s, &reference)?));
    }
    Ok(ConvergenceTable {
        key: "h".into(),
        relative: false,
        rows,
    })
}

/// Summary of one sweep value.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub max_p: f64,
    pub min_p: f64,
    pub max_temp: f64,
    pub p_l2: f64,
    pub temp_l2: f64,
    pub undershoot: f64,
    pub p: FieldVector,
    pub temp: FieldVector,
}

impl SweepSummary {
    pub fn scalars(&self) -> [f64; 6] {
        [self.max_p, self.min_p, self.max_temp, self.p_l2, self.temp_l2, self.undershoot]
    }
}

#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub b: f64,
    /// A failed run is recorded, not propagated.
    pub outcome: std::result::Result<SweepSummary, String>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    /// Whether the `b = 0` run equals a constant-permeability run bit for bit
    /// (`None` when 0 is not among the values).
    pub control_bitwise_equal: Option<bool>,
}

pub const SWEEP_HEADER: &str = "b,status,max_p,min_p,max_T,p_L2,T_L2,undershoot";

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_HEADER);
        s.push('\n');
        for r in &self.records {
            match &r.outcome {
                Ok(m) => {
                    let _ = write!(s, "{:.16e},ok", r.b);
                    for v in m.scalars() {
                        let _ = write!(s, ",{v:.16e}");
                    }
                    s.push('\n');
                }
                Err(e) => {
                    let _ = writeln!(s, "{:.16e},\"failed: {}\",,,,,,", r.b, e.replace('"', "'"));
                }
            }
        }
        s
    }

    /// Whether, over the successful runs, the terminal maximum pressure is
    /// monotone in `b`.
    pub fn monotone_max_p(&self) -> Option<&'static str> {
        let v: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| r.outcome.as_ref().ok().map(|m| m.max_p))
            .collect();
        if v.len() < 2 {
            return None;
        }
        if v.windows(2).all(|w| w[1] >= w[0]) {
            Some("non-decreasing")
        } else if v.windows(2).all(|w| w[1] <= w[0]) {
            Some("non-increasing")
        } else {
            None
        }
    }
}

fn summarize(run: &BenchmarkRun) -> Result<SweepSummary> {
    let rule = run.p.space.default_quadrature();
    let zero = |_: [f64; 2]| PointSample::default();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SweepSummary {
        max_p: max(&run.p.coeffs),
        min_p: run.p.coeffs.iter().copied().fold(f64::INFINITY, f64::min),
        max_temp: max(&run.temp.coeffs),
        p_l2: compute_error(&run.p, zero, Norm::L2, false)?,
        temp_l2: compute_error(&run.temp, zero, Norm::L2, false)?,
        undershoot: undershoot(&run.p, &rule).metric(),
        p: run.p.clone(),
        temp: run.temp.clone(),
    })
}

/// One multiphysics run per `b` (with `params.b` replaced); a `b = 0` entry is
/// also compared against a constant-permeability run.
pub fn sweep_b(
    make_problem: impl Fn(f64) -> Result<Arc<dyn Problem>> + Sync,
    b_values: &[f64],
    n: usize,
    pair: ElementPair,
    settings: &SolverSettings,
) -> Result<SweepReport> {
    let runs: Vec<(f64, std::result::Result<BenchmarkRun, String>)> = b_values
        .par_iter()
        .map(|&b| {
            let r = make_problem(b)
                .and_then(|pr| benchmark_run(pr, n, pair, settings, SolverPath::Mafea, None, |_, _, _, _, _| Ok(())))
                .map_err(|e| e.to_string());
            if let Err(e) = &r {
                log::warn!("sweep value b = {b} failed: {e}");
            }
            (b, r)
        })
        .collect();
    let mut control_bitwise_equal = None;
    if let Some((_, Ok(zero_run))) = runs.iter().find(|(b, _)| *b == 0.0) {
        let pr = make_problem(0.0)?;
        let law = PermeabilityLaw::constant(pr.params());
        let c = benchmark_run(pr, n, pair, settings, SolverPath::Mafea, Some(law), |_, _, _, _, _| Ok(()))?;
        let same = |a: &FieldVector, b: &FieldVector| {
            a.coeffs.len() == b.coeffs.len() && a.coeffs.iter().zip(&b.coeffs).all(|(x, y)| x.to_bits() == y.to_bits())
        };
        control_bitwise_equal = Some(same(&zero_run.u, &c.u) && same(&zero_run.p, &c.p) && same(&zero_run.temp, &c.temp));
    }
    let mut records = Vec::new();
    for (b, r) in runs {
        let outcome = match r {
            Ok(run) => summarize(&run).map_err(|e| e.to_string()),
            Err(e) => Err(e),
        };
        records.push(SweepRecord { b, outcome });
    }
    Ok(SweepReport {
        records,
        control_bitwise_equal,
    })
}
