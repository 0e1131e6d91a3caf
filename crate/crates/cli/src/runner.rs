//! Experiment execution. A [`RunSpec`] fully determines the output tables
//! apart from the `wall_ms` column; it is what the manifest stores.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use swipt_core::conic::{IterationRecord, SolveStatus};
use swipt_core::design::{solve_power_min, BeamformingDesign};
use swipt_core::montecarlo::{mix_seed, stream_rng, validate_design_seeded, OutageReport};
use swipt_core::scenario::{sample_channels, ChannelSet};
use swipt_core::srm::{srm_solve, SrmSettings};
use swipt_core::{MethodTag, ScenarioConfig, SolverSettings};

use crate::grid::Vary;
use crate::table::{num, opt, short, Table};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SolvePower,
    Sweep,
    Feasibility,
    SolveSrm,
    Validate,
}

impl Experiment {
    pub fn csv_name(&self) -> &'static str {
        match self {
            Experiment::SolvePower => "power.csv",
            Experiment::Sweep => "sweep.csv",
            Experiment::Feasibility => "feasibility.csv",
            Experiment::SolveSrm => "srm.csv",
            Experiment::Validate => "validate.csv",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub methods: Vec<MethodTag>,
    /// Instance `i` draws its channels from `stream_rng(seed, i)`.
    pub seed: u64,
    pub instances: usize,
    pub vary: Option<Vary>,
    /// Monte-Carlo trials per design; zero disables validation.
    pub trials: usize,
    pub solver_log: bool,
    pub solver: SolverSettings,
    pub srm: SrmSettings,
    pub config: ScenarioConfig,
}

impl RunSpec {
    pub fn new(experiment: Experiment, config: ScenarioConfig) -> Self {
        Self {
            experiment,
            methods: MethodTag::ROBUST.to_vec(),
            seed: config.rng_seed,
            instances: 1,
            vary: None,
            trials: 0,
            solver_log: false,
            solver: SolverSettings::default(),
            srm: SrmSettings::default(),
            config,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub table: Table,
    /// Per (sweep value, method) aggregate for the terminal.
    pub summary: Table,
    /// Solver iteration logs keyed by file name.
    pub logs: Vec<(String, Table)>,
    pub solver_failures: usize,
}

/// The seed of the Monte-Carlo stream validating designs of instance `i`.
/// All methods of one instance share it, so outages are compared on the
/// same error draws.
pub fn validation_seed(seed: u64, instance: usize) -> u64 {
    mix_seed(mix_seed(seed) ^ instance as u64)
}

struct Entry {
    point: usize,
    method: MethodTag,
    feasible: bool,
    failures: usize,
    /// Power for power-min experiments, rate for SRM.
    metric: Option<f64>,
    outage: Option<OutageReport>,
    cells: Vec<String>,
    log: Option<(String, Table)>,
}

fn is_failure(s: SolveStatus) -> bool {
    matches!(s, SolveStatus::MaxIter | SolveStatus::Numerical)
}

fn log_table(log: &[IterationRecord]) -> Table {
    let mut t = Table::new(&[
        "iter", "pobj", "dobj", "gap", "pres", "dres", "mu", "tau", "kappa", "step", "sigma",
    ]);
    for r in log {
        t.push(vec![
            r.iter.to_string(),
            num(r.primal_objective),
            num(r.dual_objective),
            num(r.gap),
            num(r.primal_residual),
            num(r.dual_residual),
            num(r.mu),
            num(r.tau),
            num(r.kappa),
            num(r.step),
            num(r.sigma),
        ]);
    }
    t
}

fn eta(cfg: &ScenarioConfig) -> Option<f64> {
    cfg.eh_targets.first().copied()
}

fn outage_cells(r: Option<&OutageReport>) -> Vec<String> {
    match r {
        Some(r) => vec![
            num(r.secrecy_outage_rate),
            num(r.secrecy_half_width),
            num(r.max_eh_outage()),
            num(r.eh_half_width.iter().copied().fold(0.0, f64::max)),
        ],
        None => vec![String::new(); 4],
    }
}

struct Ctx<'a> {
    spec: &'a RunSpec,
    point: usize,
    value: Option<f64>,
    cfg: &'a ScenarioConfig,
    instance: usize,
    cs: ChannelSet,
}

impl Ctx<'_> {
    fn lead(&self) -> Vec<String> {
        let mut v = Vec::new();
        if let (Some(vary), Some(x)) = (&self.spec.vary, self.value) {
            v.push(vary.name.clone());
            v.push(num(x));
        }
        v.push(self.spec.seed.to_string());
        v.push(self.instance.to_string());
        v
    }

    fn validate(&self, d: &BeamformingDesign, rate: f64) -> Result<OutageReport, CliError> {
        let mut c = self.cfg.clone();
        c.rate_target = rate;
        let seed = validation_seed(self.spec.seed, self.instance);
        Ok(validate_design_seeded(d, &self.cs, &c, self.spec.trials, seed)?)
    }

    fn power(&self, method: MethodTag) -> Result<Entry, CliError> {
        let out = solve_power_min(&self.cs, self.cfg, method, &self.spec.solver)?;
        let d = out.design.as_ref();
        let validate = self.spec.experiment == Experiment::Validate;
        let report = match d {
            Some(d) if validate => Some(self.validate(d, self.cfg.rate_target)?),
            _ => None,
        };
        let cfg = self.cfg;
        let mut cells = self.lead();
        cells.extend([
            method.to_string(),
            num(cfg.rate_target),
            opt(eta(cfg)),
            num(cfg.p_secrecy),
            num(cfg.q_eh),
            out.status.as_str().to_string(),
            opt(out.power()),
            opt(d.map(|d| d.rank_ratio)),
            out.iterations.to_string(),
        ]);
        if validate {
            cells.push(self.spec.trials.to_string());
            cells.extend(outage_cells(report.as_ref()));
            cells.push(
                report
                    .as_ref()
                    .map(|r| {
                        r.worst_eve_histogram.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
                    })
                    .unwrap_or_default(),
            );
        }
        cells.push(num(out.wall_ms));
        let log = self.spec.solver_log.then(|| {
            (format!("p{}_i{}_{}.csv", self.point, self.instance, method), log_table(&out.log))
        });
        Ok(Entry {
            point: self.point,
            method,
            feasible: out.is_feasible(),
            failures: is_failure(out.status) as usize,
            metric: out.power(),
            outage: report,
            cells,
            log,
        })
    }

    /// All SRM rows of this instance. MRT is validated at the best robust
    /// rate of the same instance, which is the rate it would have to carry
    /// to compete; without a feasible robust method, at its own rate.
    fn srm(&self) -> Result<Vec<Entry>, CliError> {
        let mut solved = Vec::new();
        for &m in &self.spec.methods {
            solved.push(srm_solve(&self.cs, self.cfg, m, &self.spec.solver, &self.spec.srm)?);
        }
        let robust_best = solved
            .iter()
            .filter(|o| o.method.is_robust() && o.design.is_some())
            .map(|o| o.rate)
            .fold(None, |a: Option<f64>, r| Some(a.map_or(r, |a| a.max(r))));
        let mut entries = Vec::new();
        for o in solved {
            let check_rate = match (o.method, robust_best) {
                (MethodTag::Mrt, Some(r)) => r,
                _ => o.rate,
            };
            let report = match (&o.design, self.spec.trials) {
                (Some(d), t) if t > 0 => Some(self.validate(d, check_rate)?),
                _ => None,
            };
            let d = o.design.as_ref();
            let cfg = self.cfg;
            let mut cells = self.lead();
            cells.extend([
                o.method.to_string(),
                num(cfg.power_budget),
                opt(eta(cfg)),
                num(cfg.p_secrecy),
                num(cfg.q_eh),
                if d.is_some() { "feasible" } else { "infeasible" }.to_string(),
                num(o.rate),
                num(o.bracket.1),
                opt(d.map(|d| d.power)),
                opt(d.map(|d| d.rank_ratio)),
                o.probes.len().to_string(),
                o.solver_failures.to_string(),
                o.iterations.to_string(),
            ]);
            if self.spec.trials > 0 {
                cells.push(self.spec.trials.to_string());
                cells.push(if d.is_some() { num(check_rate) } else { String::new() });
                cells.extend(outage_cells(report.as_ref()));
            }
            cells.push(num(o.wall_ms));
            entries.push(Entry {
                point: self.point,
                method: o.method,
                feasible: d.is_some(),
                failures: o.solver_failures,
                metric: d.map(|_| o.rate),
                outage: report,
                cells,
                log: None,
            });
        }
        Ok(entries)
    }
}

fn header(spec: &RunSpec) -> Vec<&'static str> {
    let mut h = Vec::new();
    if spec.vary.is_some() {
        h.extend(["param", "value"]);
    }
    match spec.experiment {
        Experiment::Feasibility => {
            h.extend(["method", "instances", "feasible", "rate", "solver_failures"]);
            return h;
        }
        Experiment::SolveSrm => {
            h.extend([
                "seed", "instance", "method", "Pt", "eta", "p", "q", "status", "rate", "rate_hi",
                "power", "rank_ratio", "probes", "solver_failures", "iters",
            ]);
            if spec.trials > 0 {
                h.extend([
                    "trials", "validated_R", "secrecy_outage", "secrecy_half_width",
                    "eh_outage_max", "eh_half_width_max",
                ]);
            }
        }
        Experiment::SolvePower | Experiment::Sweep | Experiment::Validate => {
            h.extend([
                "seed", "instance", "method", "R", "eta", "p", "q", "status", "power", "rank_ratio",
                "iters",
            ]);
            if spec.experiment == Experiment::Validate {
                h.extend([
                    "trials", "secrecy_outage", "secrecy_half_width", "eh_outage_max",
                    "eh_half_width_max", "worst_eve_hist",
                ]);
            }
        }
    }
    h.push("wall_ms");
    h
}

fn check(spec: &RunSpec) -> Result<(), CliError> {
    if spec.instances == 0 {
        return Err(CliError::Config("--instances must be at least 1".into()));
    }
    if spec.methods.is_empty() {
        return Err(CliError::Config("no methods selected".into()));
    }
    if spec.experiment == Experiment::Sweep && spec.vary.is_none() {
        return Err(CliError::Config("sweep needs --vary name=start:stop:step".into()));
    }
    if spec.experiment == Experiment::Validate && spec.trials == 0 {
        return Err(CliError::Config("validate needs --trials > 0".into()));
    }
    spec.config.validate()?;
    Ok(())
}

/// Runs the experiment on the current rayon pool. Rows come out in
/// (sweep value, instance, method) order whatever the thread count.
pub fn execute(spec: &RunSpec) -> Result<RunOutput, CliError> {
    check(spec)?;
    let points: Vec<(Option<f64>, ScenarioConfig)> = match &spec.vary {
        None => vec![(None, spec.config.clone())],
        Some(v) => v
            .values
            .iter()
            .map(|&x| {
                let mut c = spec.config.clone();
                c.set_param(&v.name, x)?;
                Ok((Some(x), c))
            })
            .collect::<Result<_, CliError>>()?,
    };
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..spec.instances).map(move |i| (p, i)))
        .collect();
    let per_task = tasks
        .par_iter()
        .map(|&(p, i)| -> Result<Vec<Entry>, CliError> {
            let (value, cfg) = &points[p];
            let cs = sample_channels(cfg, &mut stream_rng(spec.seed, i as u64))?;
            let ctx = Ctx { spec, point: p, value: *value, cfg, instance: i, cs };
            if spec.experiment == Experiment::SolveSrm {
                ctx.srm()
            } else {
                spec.methods.iter().map(|&m| ctx.power(m)).collect()
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let entries: Vec<Entry> = per_task.into_iter().flatten().collect();

    let mut out = RunOutput {
        solver_failures: entries.iter().map(|e| e.failures).sum(),
        ..Default::default()
    };
    out.summary = summarize(spec, &points, &entries);
    if spec.experiment == Experiment::Feasibility {
        out.table = out.summary.clone();
    } else {
        out.table = Table::new(&header(spec));
        for e in entries {
            out.table.push(e.cells);
            out.logs.extend(e.log);
        }
    }
    Ok(out)
}

fn summarize(spec: &RunSpec, points: &[(Option<f64>, ScenarioConfig)], entries: &[Entry]) -> Table {
    let feas = spec.experiment == Experiment::Feasibility;
    let mut h: Vec<&str> = Vec::new();
    if spec.vary.is_some() {
        h.extend(["param", "value"]);
    }
    if feas {
        h.extend(["method", "instances", "feasible", "rate", "solver_failures"]);
    } else {
        let metric = if spec.experiment == Experiment::SolveSrm { "mean_rate" } else { "mean_power" };
        h.extend(["method", "instances", "feasible", metric]);
        if spec.trials > 0 {
            h.extend(["mean_secrecy_outage", "max_eh_outage"]);
        }
    }
    let mut t = Table::new(&h);
    for (p, (value, _)) in points.iter().enumerate() {
        for &m in &spec.methods {
            let group: Vec<&Entry> = entries.iter().filter(|e| e.point == p && e.method == m).collect();
            let n = group.len();
            let ok = group.iter().filter(|e| e.feasible).count();
            let mut row = Vec::new();
            if let (Some(v), Some(x)) = (&spec.vary, value) {
                row.push(v.name.clone());
                row.push(short(*x));
            }
            row.extend([m.to_string(), n.to_string(), ok.to_string()]);
            if feas {
                row.push(num(ok as f64 / n.max(1) as f64));
                row.push(group.iter().map(|e| e.failures).sum::<usize>().to_string());
            } else {
                let vals: Vec<f64> = group.iter().filter_map(|e| e.metric).collect();
                row.push(mean(&vals).map(short).unwrap_or_default());
                if spec.trials > 0 {
                    let reps: Vec<&OutageReport> = group.iter().filter_map(|e| e.outage.as_ref()).collect();
                    let sec: Vec<f64> = reps.iter().map(|r| r.secrecy_outage_rate).collect();
                    row.push(mean(&sec).map(short).unwrap_or_default());
                    row.push(
                        reps.iter()
                            .map(|r| r.max_eh_outage())
                            .reduce(f64::max)
                            .map(short)
                            .unwrap_or_default(),
                    );
                }
            }
            t.push(row);
        }
    }
    t
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment) -> RunSpec {
        let mut s = RunSpec::new(experiment, ScenarioConfig::preset("small").unwrap());
        s.methods = vec![MethodTag::Ldi, MethodTag::NonRobust];
        s.instances = 2;
        s
    }

    fn strip_wall(t: &Table) -> Vec<Vec<String>> {
        let w = t.column("wall_ms");
        t.rows
            .iter()
            .map(|r| r.iter().enumerate().filter(|(i, _)| Some(*i) != w).map(|(_, c)| c.clone()).collect())
            .collect()
    }

    #[test]
    fn power_rows_have_the_contract_columns() {
        let out = execute(&small(Experiment::SolvePower)).unwrap();
        assert_eq!(
            out.table.header,
            ["seed", "instance", "method", "R", "eta", "p", "q", "status", "power", "rank_ratio", "iters", "wall_ms"]
        );
        assert_eq!(out.table.rows.len(), 4);
        assert_eq!(out.table.rows[1][2], "nonrobust");
    }

    #[test]
    fn thread_count_does_not_change_rows() {
        let mut spec = small(Experiment::Sweep);
        spec.vary = Some(Vary::parse("R=0.5:1:0.5").unwrap());
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| execute(&spec)).unwrap();
        let b = three.install(|| execute(&spec)).unwrap();
        assert_eq!(strip_wall(&a.table), strip_wall(&b.table));
        assert_eq!(a.table.header[..2], ["param", "value"]);
    }

    #[test]
    fn feasibility_table_counts() {
        let mut spec = small(Experiment::Feasibility);
        spec.methods = vec![MethodTag::Mrt];
        let out = execute(&spec).unwrap();
        assert_eq!(out.table.rows, vec![vec!["mrt", "2", "2", "1", "0"]]);
    }

    #[test]
    fn sweep_without_vary_is_a_config_error() {
        assert!(matches!(execute(&small(Experiment::Sweep)), Err(CliError::Config(_))));
    }

    #[test]
    fn srm_validation_columns() {
        let mut spec = small(Experiment::SolveSrm);
        spec.instances = 1;
        spec.methods = vec![MethodTag::Ldi, MethodTag::Mrt];
        spec.trials = 50;
        let out = execute(&spec).unwrap();
        let t = &out.table;
        let vr = t.column("validated_R").unwrap();
        let rate = t.column("rate").unwrap();
        if t.rows[0][t.column("status").unwrap()] == "feasible" {
            // MRT is checked at the robust rate.
            assert_eq!(t.rows[1][vr], t.rows[0][rate]);
        }
        assert_eq!(t.header.last().unwrap(), "wall_ms");
    }
}
