//! Run configuration: a sectioned TOML file read strictly (unknown keys are
//! errors) with every problem reported at once.
//!
//! ```toml
//! command = "converge-space"
//! case = "test1"
//! pair = "2-1"
//! theta = 0
//! t_final = 1.0
//!
//! [mesh]
//! n_list = [4, 8, 16, 32]
//!
//! [time]
//! dt_rule = "h2"
//! dt_coef = 1.0
//!
//! [params]
//! poisson = 0.4
//!
//! [boundary.G2]
//! p = "flux"
//!
//! [output]
//! dir = "out/test1"
//! ```

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::experiments::{DtRule, ElementPair};
use crate::mesh::Segment;
use crate::model::{default_layout, default_params, BoundaryLayout, PhysicalParams, SegmentConditions, Tensor2};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    ConvergeSpace,
    ConvergeTime,
    Barry,
    SweepB,
    Check,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Run,
        Command::ConvergeSpace,
        Command::ConvergeTime,
        Command::Barry,
        Command::SweepB,
        Command::Check,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::ConvergeSpace => "converge-space",
            Command::ConvergeTime => "converge-time",
            Command::Barry => "barry",
            Command::SweepB => "sweep-b",
            Command::Check => "check",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Command::ALL.iter().map(|c| c.name()).collect();
            Error::config(format!("unknown command '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

/// Which storage coefficient vanishes in the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarryVariant {
    Pressure,
    Temperature,
}

impl BarryVariant {
    pub fn name(self) -> &'static str {
        match self {
            BarryVariant::Pressure => "pressure",
            BarryVariant::Temperature => "temperature",
        }
    }

    pub fn params(self) -> PhysicalParams {
        match self {
            BarryVariant::Pressure => PhysicalParams::barry_pressure(),
            BarryVariant::Temperature => PhysicalParams::barry_temperature(),
        }
    }
}

/// Default time step of `barry` and `sweep-b`.
pub const BENCHMARK_DT: f64 = 0.0625;

/// Fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub case: String,
    pub pair: ElementPair,
    /// Cells per side for single-mesh commands.
    pub n: usize,
    /// Halving sequence for spatial studies.
    pub n_list: Vec<usize>,
    /// Reference mesh of the benchmark self-convergence study.
    pub n_ref: usize,
    pub dt_rule: DtRule,
    /// Halving sequence for temporal studies.
    pub dt_list: Vec<f64>,
    /// `t_final`, θ, tolerances, initialization. `dt` is resolved per mesh.
    pub solver: SolverSettings,
    pub params: PhysicalParams,
    pub allow_storage_override: bool,
    pub layout: BoundaryLayout,
    pub relative_errors: bool,
    pub variant: BarryVariant,
    pub b_values: Vec<f64>,
    pub out_dir: PathBuf,
    /// Write field snapshots every `k` steps (0: final state only).
    pub snapshot_every: usize,
    /// Also run the expensive benchmark self-convergence study.
    pub reference_run: bool,
    /// Non-fatal findings of validation.
    pub warnings: Vec<String>,
}

impl RunConfig {
    /// Settings with `dt` resolved for an `n × n` mesh.
    pub fn settings_for(&self, n: usize) -> SolverSettings {
        SolverSettings {
            dt: self.dt_rule.dt(n),
            ..self.solver.clone()
        }
    }

    /// Defaults for a command with no file.
    pub fn defaults(command: Command) -> Result<Self> {
        parse_table(command_table(command), None)
    }

    /// Effective configuration as TOML; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let f = |v: f64| format!("{v:e}");
        let list = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
        let ilist = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let tensor = |t: &Tensor2| format!("[[{}, {}], [{}, {}]]", f(t[0][0]), f(t[0][1]), f(t[1][0]), f(t[1][1]));
        let _ = writeln!(s, "command = \"{}\"", self.command);
        let _ = writeln!(s, "case = \"{}\"", self.case);
        let _ = writeln!(s, "pair = \"{}\"", self.pair);
        let _ = writeln!(s, "theta = {}", self.solver.theta);
        let _ = writeln!(s, "t_final = {}", f(self.solver.t_final));
        let _ = writeln!(s, "\n[mesh]\nn = {}\nn_list = [{}]\nn_ref = {}", self.n, ilist(&self.n_list), self.n_ref);
        s.push_str("\n[time]\n");
        match self.dt_rule {
            DtRule::HSquared { coef } => {
                let _ = writeln!(s, "dt_rule = \"h2\"\ndt_coef = {}", f(coef));
            }
            DtRule::Fixed(dt) => {
                let _ = writeln!(s, "dt = {}", f(dt));
            }
        }
        let _ = writeln!(s, "dt_list = [{}]", list(&self.dt_list));
        let p = &self.params;
        let _ = writeln!(
            s,
            "\n[params]\na0 = {}\nb0 = {}\nc0 = {}\nalpha = {}\nbeta = {}\na = {}\nb = {}\nk0 = {}\nconductivity = {}\nyoung = {}\npoisson = {}\nallow_storage_override = {}",
            f(p.a0),
            f(p.b0),
            f(p.c0),
            f(p.alpha),
            f(p.beta),
            f(p.a),
            f(p.b),
            tensor(&p.k0),
            tensor(&p.theta),
            f(p.young),
            f(p.poisson),
            self.allow_storage_override
        );
        for seg in Segment::ALL {
            let c = self.layout.get(seg);
            let d = |b: bool, yes: &str, no: &str| if b { yes.to_string() } else { no.to_string() };
            let _ = writeln!(
                s,
                "\n[boundary.{seg}]\nu1 = \"{}\"\nu2 = \"{}\"\np = \"{}\"\nT = \"{}\"",
                d(c.u_dirichlet[0], "dirichlet", "traction"),
                d(c.u_dirichlet[1], "dirichlet", "traction"),
                d(c.p_dirichlet, "dirichlet", "flux"),
                d(c.t_dirichlet, "dirichlet", "flux"),
            );
        }
        let st = &self.solver;
        let _ = writeln!(
            s,
            "\n[solver]\nlinear_tol = {}\npicard_tol = {}\npicard_max = {}\ndt_coupling = {}\nproject_initial = {}",
            f(st.linear_tol),
            f(st.picard_tol),
            st.picard_max,
            f(st.dt_coupling),
            st.project_initial
        );
        let _ = writeln!(s, "\n[errors]\nrelative = {}", self.relative_errors);
        let _ = writeln!(s, "\n[barry]\nvariant = \"{}\"", self.variant.name());
        let _ = writeln!(s, "\n[sweep]\nb_values = [{}]", list(&self.b_values));
        let _ = writeln!(
            s,
            "\n[output]\ndir = {}\nsnapshot_every = {}\nreference_run = {}",
            Value::String(self.out_dir.display().to_string()),
            self.snapshot_every,
            self.reference_run
        );
        s
    }
}

fn command_table(command: Command) -> Table {
    let mut t = Table::new();
    t.insert("command".into(), Value::String(command.name().into()));
    t
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("malformed TOML: {}", e.message())))?;
    parse_table(table, None)
}

/// Like [`parse_config_str`] with the command taken from the caller when the
/// file does not name one (or overriding it when it does).
pub fn parse_config_with_command(text: &str, command: Option<Command>) -> Result<RunConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("malformed TOML: {}", e.message())))?;
    parse_table(table, command)
}

/// Pulls typed values out of one table, remembering which keys were used.
struct Section<'a> {
    name: String,
    table: Option<&'a Table>,
    used: Vec<String>,
}

impl<'a> Section<'a> {
    fn new(name: impl Into<String>, table: Option<&'a Table>) -> Self {
        Section {
            name: name.into(),
            table,
            used: Vec::new(),
        }
    }

    fn path(&self, key: &str) -> String {
        if self.name.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.name)
        }
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.used.push(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn f64(&mut self, key: &str, errors: &mut Vec<String>) -> Option<f64> {
        let v = self.raw(key)?;
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                errors.push(format!("{} must be a number (got {other})", self.path(key)));
                None
            }
        }
    }

    fn usize(&mut self, key: &str, errors: &mut Vec<String>) -> Option<usize> {
        let v = self.raw(key)?;
        match v.as_integer() {
            Some(i) if i >= 0 => Some(i as usize),
            _ => {
                errors.push(format!("{} must be a nonnegative integer (got {v})", self.path(key)));
                None
            }
        }
    }

    fn bool(&mut self, key: &str, errors: &mut Vec<String>) -> Option<bool> {
        let v = self.raw(key)?;
        v.as_bool().or_else(|| {
            errors.push(format!("{} must be true or false (got {v})", self.path(key)));
            None
        })
    }

    fn str(&mut self, key: &str, errors: &mut Vec<String>) -> Option<&'a str> {
        let v = self.raw(key)?;
        v.as_str().or_else(|| {
            errors.push(format!("{} must be a string (got {v})", self.path(key)));
            None
        })
    }

    fn f64_list(&mut self, key: &str, errors: &mut Vec<String>) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let items = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                .collect::<Option<Vec<f64>>>()
        });
        if items.is_none() {
            errors.push(format!("{} must be a list of numbers (got {v})", self.path(key)));
        }
        items
    }

    fn usize_list(&mut self, key: &str, errors: &mut Vec<String>) -> Option<Vec<usize>> {
        let v = self.raw(key)?;
        let items = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_integer().filter(|i| *i > 0).map(|i| i as usize))
                .collect::<Option<Vec<usize>>>()
        });
        if items.is_none() {
            errors.push(format!("{} must be a list of positive integers (got {v})", self.path(key)));
        }
        items
    }

    /// A number is read as `s·I`; a 2×2 nested list as the full tensor.
    fn tensor(&mut self, key: &str, errors: &mut Vec<String>) -> Option<Tensor2> {
        let v = self.raw(key)?;
        if let Some(x) = v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
            return Some([[x, 0.0], [0.0, x]]);
        }
        let num = |x: &Value| x.as_float().or_else(|| x.as_integer().map(|i| i as f64));
        let rows = v.as_array().filter(|a| a.len() == 2).and_then(|a| {
            a.iter()
                .map(|r| {
                    r.as_array()
                        .filter(|r| r.len() == 2)
                        .and_then(|r| Some([num(&r[0])?, num(&r[1])?]))
                })
                .collect::<Option<Vec<[f64; 2]>>>()
        });
        match rows {
            Some(r) => Some([r[0], r[1]]),
            None => {
                errors.push(format!("{} must be a number or a 2x2 list (got {v})", self.path(key)));
                None
            }
        }
    }

    fn sub(&self, key: &str, errors: &mut Vec<String>) -> Option<&'a Table> {
        let v = self.table.and_then(|t| t.get(key))?;
        match v.as_table() {
            Some(t) => Some(t),
            None => {
                errors.push(format!("{} must be a table", self.path(key)));
                None
            }
        }
    }

    /// Reports keys that were never asked for.
    fn finish(&self, errors: &mut Vec<String>) {
        if let Some(t) = self.table {
            for k in t.keys() {
                if !self.used.iter().any(|u| u == k) {
                    errors.push(format!("unknown key '{}'", self.path(k)));
                }
            }
        }
    }
}

fn parse_table(table: Table, command_override: Option<Command>) -> Result<RunConfig> {
    let mut errors: Vec<String> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut top = Section::new("", Some(&table));

    let command = match (command_override, top.str("command", &mut errors)) {
        (Some(c), _) => Some(c),
        (None, Some(s)) => match s.parse::<Command>() {
            Ok(c) => Some(c),
            Err(Error::Config(e)) => {
                errors.extend(e);
                None
            }
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        },
        (None, None) => {
            errors.push("missing key 'command'".into());
            None
        }
    };
    let command = command.unwrap_or(Command::Run);

    let default_case = match command {
        Command::Barry => "barry_mercer",
        Command::SweepB => "b_sweep",
        _ => "test1",
    };
    let case = top.str("case", &mut errors).unwrap_or(default_case).to_string();
    let case_known = ["test1", "test2", "barry_mercer", "b_sweep"].contains(&case.as_str());
    if !case_known {
        errors.push(format!(
            "unknown case '{case}' (expected test1, test2, barry_mercer or b_sweep)"
        ));
    }

    let pair = match top.str("pair", &mut errors) {
        Some(s) => match s.parse::<ElementPair>() {
            Ok(p) => p,
            Err(e) => {
                errors.push(e.to_string());
                ElementPair::P2_P1
            }
        },
        None => ElementPair::P2_P1,
    };

    // The benchmark parameters make the decoupled scheme's Δt ≤ C·h² bound
    // tiny, so benchmark commands default to the monolithic scheme.
    let benchmark = matches!(command, Command::Barry | Command::SweepB);
    let defaults = SolverSettings::default();
    let theta = match top.usize("theta", &mut errors) {
        Some(t) if t <= 1 => t as u8,
        Some(t) => {
            errors.push(format!("theta must be 0 or 1 (got {t})"));
            0
        }
        None => u8::from(benchmark),
    };
    let t_final = top.f64("t_final", &mut errors).unwrap_or(1.0);

    // [mesh]
    let mut mesh = Section::new("mesh", top.sub("mesh", &mut errors));
    let n = mesh.usize("n", &mut errors).unwrap_or(16);
    if n == 0 {
        errors.push("mesh.n must be positive".into());
    }
    let n_list = mesh.usize_list("n_list", &mut errors).unwrap_or_else(|| match command {
        Command::Barry => vec![4, 8, 16],
        _ => vec![4, 8, 16, 32],
    });
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] != 2 * w[0]) {
        errors.push(format!("mesh.n_list {n_list:?} must double from one entry to the next"));
    }
    let n_ref = mesh.usize("n_ref", &mut errors).unwrap_or(90);
    if n_list.last().is_some_and(|&m| n_ref <= m) {
        errors.push(format!("mesh.n_ref ({n_ref}) must exceed the finest study mesh"));
    }
    mesh.finish(&mut errors);

    // [time]
    let mut time = Section::new("time", top.sub("time", &mut errors));
    let dt = time.f64("dt", &mut errors);
    let rule = time.str("dt_rule", &mut errors);
    let coef = time.f64("dt_coef", &mut errors);
    let dt_rule = match (dt, rule) {
        (Some(_), Some(_)) => {
            errors.push("give either time.dt or time.dt_rule, not both".into());
            DtRule::HSquared { coef: 1.0 }
        }
        (Some(dt), None) => {
            if coef.is_some() {
                errors.push("time.dt_coef only applies with time.dt_rule = \"h2\"".into());
            }
            DtRule::Fixed(dt)
        }
        (None, None) if benchmark => DtRule::Fixed(BENCHMARK_DT),
        (None, Some("h2")) | (None, None) => DtRule::HSquared { coef: coef.unwrap_or(1.0) },
        (None, Some(other)) => {
            errors.push(format!("time.dt_rule must be \"h2\" (got \"{other}\")"));
            DtRule::HSquared { coef: 1.0 }
        }
    };
    match dt_rule {
        DtRule::Fixed(v) | DtRule::HSquared { coef: v } if !(v > 0.0 && v.is_finite()) => {
            errors.push(format!("time step (or its coefficient) must be positive (got {v})"));
        }
        _ => {}
    }
    let dt_list = time
        .f64_list("dt_list", &mut errors)
        .unwrap_or_else(|| vec![1e-2, 5e-3, 2.5e-3, 1.25e-3]);
    if dt_list.len() < 2 || dt_list.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-12) {
        errors.push(format!("time.dt_list {dt_list:?} must have at least two entries, halving each time"));
    }
    time.finish(&mut errors);

    // [barry]
    let mut barry = Section::new("barry", top.sub("barry", &mut errors));
    let variant = match barry.str("variant", &mut errors) {
        None | Some("pressure") => BarryVariant::Pressure,
        Some("temperature") => BarryVariant::Temperature,
        Some(other) => {
            errors.push(format!("barry.variant must be \"pressure\" or \"temperature\" (got \"{other}\")"));
            BarryVariant::Pressure
        }
    };
    barry.finish(&mut errors);

    // [params]
    let mut params = if case == "barry_mercer" || case == "b_sweep" {
        variant.params()
    } else {
        default_params(&case).unwrap_or_else(|_| PhysicalParams::test1())
    };
    let mut ps = Section::new("params", top.sub("params", &mut errors));
    for (key, slot) in [
        ("a0", &mut params.a0),
        ("b0", &mut params.b0),
        ("c0", &mut params.c0),
        ("alpha", &mut params.alpha),
        ("beta", &mut params.beta),
        ("a", &mut params.a),
        ("b", &mut params.b),
        ("young", &mut params.young),
        ("poisson", &mut params.poisson),
    ] {
        if let Some(v) = ps.f64(key, &mut errors) {
            *slot = v;
        }
    }
    if let Some(t) = ps.tensor("k0", &mut errors) {
        params.k0 = t;
    }
    if let Some(t) = ps.tensor("conductivity", &mut errors) {
        params.theta = t;
    }
    let allow_storage_override = ps.bool("allow_storage_override", &mut errors).unwrap_or(false);
    ps.finish(&mut errors);
    let (pe, pw) = params.validate(allow_storage_override);
    errors.extend(pe);
    warnings.extend(pw);
    if errors.is_empty() {
        match crate::model::DerivedCoefficients::derive(&params) {
            Ok(c) => {
                warnings.extend(c.warnings());
                if let Err(e) = c.require_positive_gamma6() {
                    errors.push(e.to_string());
                }
            }
            Err(e) => errors.push(e.to_string()),
        }
    }

    // [boundary.Gk]
    let mut layout = default_layout(if case_known { &case } else { "test1" })?;
    let mut bsec = Section::new("boundary", top.sub("boundary", &mut errors));
    for seg in Segment::ALL {
        let key = seg.to_string();
        let sub = bsec.sub(&key, &mut errors);
        bsec.used.push(key.clone());
        let mut s = Section::new(format!("boundary.{key}"), sub);
        let mut c: SegmentConditions = layout.get(seg);
        let kind = |s: &mut Section, k: &str, yes: &str, no: &str, slot: &mut bool, errors: &mut Vec<String>| {
            if let Some(v) = s.str(k, errors) {
                if v == yes {
                    *slot = true;
                } else if v == no {
                    *slot = false;
                } else {
                    errors.push(format!("{} must be \"{yes}\" or \"{no}\" (got \"{v}\")", s.path(k)));
                }
            }
        };
        kind(&mut s, "u1", "dirichlet", "traction", &mut c.u_dirichlet[0], &mut errors);
        kind(&mut s, "u2", "dirichlet", "traction", &mut c.u_dirichlet[1], &mut errors);
        kind(&mut s, "p", "dirichlet", "flux", &mut c.p_dirichlet, &mut errors);
        kind(&mut s, "T", "dirichlet", "flux", &mut c.t_dirichlet, &mut errors);
        s.finish(&mut errors);
        layout.set(seg, c);
    }
    bsec.finish(&mut errors);
    for c in 0..2 {
        if !layout.any_u_dirichlet(c) {
            errors.push(format!(
                "displacement component u{} has no Dirichlet segment; rigid motions would make the problem singular",
                c + 1
            ));
        }
    }

    // [solver]
    let mut sv = Section::new("solver", top.sub("solver", &mut errors));
    let solver = SolverSettings {
        theta,
        dt: dt_rule.dt(n.max(1)),
        t_final,
        linear_tol: sv.f64("linear_tol", &mut errors).unwrap_or(defaults.linear_tol),
        picard_tol: sv.f64("picard_tol", &mut errors).unwrap_or(defaults.picard_tol),
        picard_max: sv.usize("picard_max", &mut errors).unwrap_or(defaults.picard_max),
        dt_coupling: sv.f64("dt_coupling", &mut errors).unwrap_or(defaults.dt_coupling),
        project_initial: sv.bool("project_initial", &mut errors).unwrap_or(defaults.project_initial),
    };
    sv.finish(&mut errors);
    let meshes: Vec<usize> = match command {
        Command::ConvergeSpace => n_list.clone(),
        _ => vec![n.max(1)],
    };
    for &m in &meshes {
        let st = SolverSettings {
            dt: dt_rule.dt(m),
            ..solver.clone()
        };
        let (se, sw) = st.validate(1.0 / m as f64);
        for e in se {
            if !errors.contains(&e) {
                errors.push(e);
            }
        }
        warnings.extend(sw);
    }

    // [errors]
    let mut es = Section::new("errors", top.sub("errors", &mut errors));
    let relative_errors = es.bool("relative", &mut errors).unwrap_or(case == "test1" || case == "test2");
    es.finish(&mut errors);

    // [sweep]
    let mut sw = Section::new("sweep", top.sub("sweep", &mut errors));
    let b_values = sw
        .f64_list("b_values", &mut errors)
        .unwrap_or_else(|| vec![0.0, 1e-2, 1.0, 1e2]);
    if b_values.is_empty() || b_values.iter().any(|b| !b.is_finite() || *b < 0.0) {
        errors.push(format!("sweep.b_values {b_values:?} must be a nonempty list of nonnegative numbers"));
    }
    sw.finish(&mut errors);

    // [output]
    let mut os = Section::new("output", top.sub("output", &mut errors));
    let out_dir = PathBuf::from(os.str("dir", &mut errors).unwrap_or("out"));
    let snapshot_every = os.usize("snapshot_every", &mut errors).unwrap_or(0);
    let reference_run = os.bool("reference_run", &mut errors).unwrap_or(false);
    os.finish(&mut errors);

    for k in ["mesh", "time", "params", "boundary", "solver", "errors", "barry", "sweep", "output"] {
        top.used.push(k.into());
    }
    top.finish(&mut errors);

    if !errors.is_empty() {
        return Err(Error::Config(errors));
    }
    Ok(RunConfig {
        command,
        case,
        pair,
        n,
        n_list,
        n_ref,
        dt_rule,
        dt_list,
        solver,
        params,
        allow_storage_override,
        layout,
        relative_errors,
        variant,
        b_values,
        out_dir,
        snapshot_every,
        reference_run,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errs(text: &str) -> Vec<String> {
        match parse_config_str(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected configuration errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_fills_defaults() {
        let c = parse_config_str("command = \"run\"\ncase = \"test1\"\n").unwrap();
        assert_eq!(c.solver.theta, 0);
        assert_eq!(c.solver.t_final, 1.0);
        assert_eq!(c.dt_rule, DtRule::HSquared { coef: 1.0 });
        assert_eq!(c.pair, ElementPair::P2_P1);
        assert_eq!(c.params, PhysicalParams::test1());
    }

    #[test]
    fn benchmark_defaults_monolithic() {
        for cmd in [Command::Barry, Command::SweepB] {
            let c = RunConfig::defaults(cmd).unwrap();
            assert_eq!(c.solver.theta, 1);
            assert_eq!(c.dt_rule, DtRule::Fixed(BENCHMARK_DT));
        }
    }

    #[test]
    fn poisson_bound_named() {
        let e = errs("command = \"run\"\n[params]\npoisson = 0.6\n");
        assert!(e.iter().any(|m| m.contains("Poisson")), "{e:?}");
    }

    #[test]
    fn benchmark_storage_accepted() {
        let c = parse_config_str("command = \"barry\"\n[params]\nc0 = 1e-10\nb0 = 0.0\n").unwrap();
        assert_eq!(c.params.c0, 1e-10);
        assert_eq!(c.case, "barry_mercer");
    }

    #[test]
    fn all_errors_reported() {
        let e = errs(
            "command = \"run\"\nthta = 1\npair = \"3-1\"\n[mesh]\nn_list = [4, 6]\n[params]\npoisson = 0.7\nE = 3.0\n[boundary.G2]\np = \"neumann\"\n",
        );
        for needle in ["thta", "3-1", "n_list", "Poisson", "params.E", "boundary.G2.p"] {
            assert!(e.iter().any(|m| m.contains(needle)), "missing '{needle}' in {e:?}");
        }
    }

    #[test]
    fn unknown_command_rejected() {
        let e = errs("command = \"explode\"\n");
        assert!(e[0].contains("unknown command"));
    }

    #[test]
    fn dt_and_rule_conflict() {
        let e = errs("command = \"run\"\n[time]\ndt = 0.1\ndt_rule = \"h2\"\n");
        assert!(e.iter().any(|m| m.contains("not both")));
    }

    #[test]
    fn effective_toml_round_trips() {
        for cmd in Command::ALL {
            let c = RunConfig::defaults(cmd).unwrap();
            let again = parse_config_str(&c.to_toml()).unwrap();
            assert_eq!(c, again, "{cmd}");
        }
        let c = parse_config_str(
            "command = \"converge-time\"\ncase = \"test2\"\npair = \"1-1\"\ntheta = 1\n[time]\ndt = 0.125\n[params]\nk0 = [[1.0, 0.0], [0.0, 2.0]]\n[boundary.G4]\nT = \"flux\"\n",
        )
        .unwrap();
        assert_eq!(c, parse_config_str(&c.to_toml()).unwrap());
    }

    #[test]
    fn boundary_override_applies() {
        let c = parse_config_str("command = \"run\"\n[boundary.G2]\np = \"flux\"\n").unwrap();
        assert!(!c.layout.get(Segment::G2).p_dirichlet);
        assert!(c.layout.get(Segment::G1).p_dirichlet);
    }

    #[test]
    fn free_displacement_rejected() {
        let e = errs(
            "command = \"run\"\n[boundary.G2]\nu1 = \"traction\"\n[boundary.G4]\nu1 = \"traction\"\n",
        );
        assert!(e.iter().any(|m| m.contains("rigid")));
    }
}
