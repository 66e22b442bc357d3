//! Benchmark harness: scaling sweeps, baseline comparison tables and
//! time-to-target distributions.
//!
//! Wall times are measured around the solver call only; instances are loaded
//! and built beforehand.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::brkga::{self, BrkgaParams};
use crate::danneal::{self, DaParams};
use crate::error::{domain, validation, Error, Result};
use crate::greedy::{self, GreedyParams};
use crate::instance::Instance;
use crate::qubo::{self, QuboDecode, QuboSaParams};
use crate::rko::{CostMode, Tour};
use crate::trace::{time_to_target, Improvement};

/// A solver together with its hyperparameters. The seed inside is replaced per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "kebab-case")]
pub enum SolverSpec {
    Greedy(GreedyParams),
    Brkga(BrkgaParams),
    Da(DaParams),
    QuboSa(QuboSaParams),
}

impl SolverSpec {
    pub fn id(&self) -> &'static str {
        match self {
            SolverSpec::Greedy(_) => "greedy",
            SolverSpec::Brkga(_) => "brkga",
            SolverSpec::Da(_) => "da",
            SolverSpec::QuboSa(_) => "qubo-sa",
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut spec = self.clone();
        match &mut spec {
            SolverSpec::Greedy(p) => p.seed = seed,
            SolverSpec::Brkga(p) => p.seed = seed,
            SolverSpec::Da(p) => p.seed = seed,
            SolverSpec::QuboSa(p) => p.seed = seed,
        }
        spec
    }

    pub fn has_trace(&self) -> bool {
        !matches!(self, SolverSpec::QuboSa(_))
    }
}

/// Best tour of one run with its incumbent trace.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub tour: Tour,
    /// Empty for solvers without trace support.
    pub trace: Vec<Improvement>,
    pub wall_seconds: f64,
}

/// Runs one solver with `seed`. QUBO tours are re-costed home-anchored so
/// that every solver reports the same objective.
pub fn run_solver(spec: &SolverSpec, instance: &Instance, seed: u64) -> Result<RunOutcome> {
    let start = Instant::now();
    let (tour, trace) = match spec.with_seed(seed) {
        SolverSpec::Greedy(p) => greedy::multi_shot_traced(instance, &p)?,
        SolverSpec::Brkga(p) => {
            let out = brkga::run(instance, &p, &[])?;
            (out.best.tour, out.improvements)
        }
        SolverSpec::Da(p) => {
            let out = danneal::run(instance, &p, None)?;
            (out.best.tour, out.improvements)
        }
        SolverSpec::QuboSa(p) => {
            let problem = qubo::build_qubo(instance, qubo::default_penalty(instance), qubo::DEFAULT_VAR_CAP)?;
            let (x, _) = qubo::solve_sa(&problem.qubo, &p)?;
            match qubo::decode_qubo_solution(&x, &problem, instance)? {
                QuboDecode::Tour(t) => (Tour::from_nodes(t.nodes, instance, CostMode::HomeAnchored), Vec::new()),
                QuboDecode::Infeasible(report) => {
                    return Err(domain(format!("annealed QUBO assignment is infeasible: {report}")))
                }
            }
        }
    };
    Ok(RunOutcome { tour, trace, wall_seconds: start.elapsed().as_secs_f64() })
}

/// Outcome of one shot against one target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TttRecord {
    pub solver: String,
    pub target: f64,
    pub shot: usize,
    pub hit: bool,
    /// Present iff `hit`.
    pub time_to_hit: Option<f64>,
}

/// One step of an empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub solver: String,
    pub target: f64,
    pub prob: f64,
    pub time_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TttResult {
    pub records: Vec<TttRecord>,
    pub cdf: Vec<CdfPoint>,
}

/// Runs `shots` independent runs (seeds `seed..seed + shots`) and records, for
/// each target, the first time the incumbent reached it.
///
/// Each target's CDF lists the sorted hit times with probability `i / shots`.
/// A target nobody hit gets a single row with probability 0.
pub fn run_ttt(spec: &SolverSpec, instance: &Instance, targets: &[f64], shots: usize, seed: u64) -> Result<TttResult> {
    if shots == 0 {
        return Err(validation("shots must be >= 1"));
    }
    if !spec.has_trace() {
        return Err(Error::Capability(format!("solver {} does not record an improvement trace", spec.id())));
    }
    let solver = spec.id().to_string();
    let mut records = Vec::with_capacity(shots * targets.len());
    for shot in 0..shots {
        let run = run_solver(spec, instance, seed.wrapping_add(shot as u64))?;
        for &target in targets {
            let t = time_to_target(&run.trace, target);
            records.push(TttRecord { solver: solver.clone(), target, shot, hit: t.is_some(), time_to_hit: t });
        }
    }
    let cdf = empirical_cdf(&records, targets, shots);
    Ok(TttResult { records, cdf })
}

fn empirical_cdf(records: &[TttRecord], targets: &[f64], shots: usize) -> Vec<CdfPoint> {
    let mut cdf = Vec::new();
    for &target in targets {
        let solver = records.first().map(|r| r.solver.clone()).unwrap_or_default();
        let mut times: Vec<f64> = records.iter().filter(|r| r.target == target).filter_map(|r| r.time_to_hit).collect();
        times.sort_by(f64::total_cmp);
        if times.is_empty() {
            cdf.push(CdfPoint { solver, target, prob: 0.0, time_seconds: 0.0 });
            continue;
        }
        for (i, t) in times.into_iter().enumerate() {
            cdf.push(CdfPoint { solver: solver.clone(), target, prob: (i + 1) as f64 / shots as f64, time_seconds: t });
        }
    }
    cdf
}

/// Probability of having hit `target` by time `t`, read off a CDF table.
pub fn cdf_at(cdf: &[CdfPoint], target: f64, t: f64) -> f64 {
    cdf.iter()
        .filter(|p| p.target == target && p.time_seconds <= t)
        .map(|p| p.prob)
        .fold(0.0, f64::max)
}

/// Writes `solver,target,prob,time_seconds` rows.
pub fn write_ttt_csv(cdf: &[CdfPoint], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for p in cdf {
        out.serialize(p)?;
    }
    out.flush()?;
    Ok(())
}

/// A labelled instance in a sweep.
#[derive(Debug, Clone)]
pub struct SweepInstance {
    pub label: String,
    pub instance: Instance,
}

/// Downsampled family: `samples` instances for each size in `sizes`.
pub fn downsample_family(base: &Instance, sizes: &[usize], samples: usize, seed: u64) -> Result<Vec<SweepInstance>> {
    let mut out = Vec::with_capacity(sizes.len() * samples);
    for &size in sizes {
        for k in 0..samples {
            let s = seed ^ ((size as u64) << 32) ^ k as u64;
            out.push(SweepInstance { label: format!("n{size}_s{k}"), instance: base.downsample(size, s)? });
        }
    }
    Ok(out)
}

/// One cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub instance: String,
    pub n_seams: usize,
    pub solver: String,
    pub seed: u64,
    /// Empty when the run failed.
    pub best_cost: Option<f64>,
    pub wall_seconds: f64,
    #[serde(skip)]
    pub tour: Option<Tour>,
    #[serde(skip)]
    pub error: Option<String>,
}

/// Full factorial over instances, solvers and seeds, in that nesting order.
///
/// Cells run in parallel; a failing cell is recorded and the rest continue.
pub fn run_sweep(instances: &[SweepInstance], solvers: &[SolverSpec], seeds: &[u64]) -> Vec<SweepResult> {
    let mut cells = Vec::with_capacity(instances.len() * solvers.len() * seeds.len());
    for inst in instances {
        for spec in solvers {
            for &seed in seeds {
                cells.push((inst, spec, seed));
            }
        }
    }
    cells
        .into_par_iter()
        .map(|(inst, spec, seed)| {
            let start = Instant::now();
            let run = run_solver(spec, &inst.instance, seed);
            let mut row = SweepResult {
                instance: inst.label.clone(),
                n_seams: inst.instance.n_seams(),
                solver: spec.id().to_string(),
                seed,
                best_cost: None,
                wall_seconds: start.elapsed().as_secs_f64(),
                tour: None,
                error: None,
            };
            match run {
                Ok(r) => {
                    row.best_cost = Some(r.tour.total_cost);
                    row.wall_seconds = r.wall_seconds;
                    row.tour = Some(r.tour);
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepResult], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv(r: impl std::io::Read) -> Result<Vec<SweepResult>> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd.deserialize().collect::<std::result::Result<Vec<SweepResult>, _>>()?;
    Ok(rows)
}

/// Absolute and relative improvement of `other` over the greedy baseline.
pub fn improvement(greedy: f64, other: f64) -> (f64, f64) {
    let delta = greedy - other;
    (delta, delta / greedy * 100.0)
}

/// One benchmark row: best cost per solver plus the improvement over greedy.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub instance: String,
    pub costs: BTreeMap<String, f64>,
    pub delta: f64,
    pub relative_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub solvers: Vec<String>,
    pub rows: Vec<TableRow>,
}

/// Per instance: best cost over seeds for each solver, and
/// `Δ = greedy − best other`, `Δ% = Δ / greedy × 100`.
pub fn compare_table(results: &[SweepResult]) -> Result<ComparisonTable> {
    let mut by_instance: BTreeMap<&str, BTreeMap<String, f64>> = BTreeMap::new();
    let mut solvers: Vec<String> = Vec::new();
    for r in results {
        let Some(cost) = r.best_cost else { continue };
        if !solvers.contains(&r.solver) {
            solvers.push(r.solver.clone());
        }
        let best = by_instance.entry(&r.instance).or_default().entry(r.solver.clone()).or_insert(cost);
        *best = best.min(cost);
    }
    let mut rows = Vec::with_capacity(by_instance.len());
    for (instance, costs) in by_instance {
        let greedy = *costs
            .get("greedy")
            .ok_or_else(|| validation(format!("instance {instance} has no greedy baseline")))?;
        let best_other = costs
            .iter()
            .filter(|(s, _)| s.as_str() != "greedy")
            .map(|(_, &c)| c)
            .fold(f64::INFINITY, f64::min);
        let (delta, relative_percent) = if best_other.is_finite() { improvement(greedy, best_other) } else { (0.0, 0.0) };
        rows.push(TableRow { instance: instance.to_string(), costs, delta, relative_percent });
    }
    if rows.is_empty() {
        return Err(validation("no successful results with a greedy baseline"));
    }
    solvers.sort_by_key(|s| (s != "greedy", s.clone()));
    Ok(ComparisonTable { solvers, rows })
}

impl ComparisonTable {
    /// Markdown table with two decimals.
    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| instance |");
        for solver in &self.solvers {
            s.push_str(&format!(" {solver} |"));
        }
        s.push_str(" Δ | Δ% |\n|---|");
        for _ in &self.solvers {
            s.push_str("---:|");
        }
        s.push_str("---:|---:|\n");
        for row in &self.rows {
            s.push_str(&format!("| {} |", row.instance));
            for solver in &self.solvers {
                match row.costs.get(solver) {
                    Some(c) => s.push_str(&format!(" {c:.2} |")),
                    None => s.push_str(" - |"),
                }
            }
            s.push_str(&format!(" {:.2} | {:.2}% |\n", row.delta, row.relative_percent));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate_synthetic, DimSizes, GeneratorParams};

    fn toy() -> Instance {
        generate_synthetic(&GeneratorParams {
            n_seams: 4,
            dims: DimSizes::new(2, 1, 1, 1),
            feasibility_rate: 1.0,
            cost_scale: 1.0,
            seed: 17,
        })
        .unwrap()
        .instance
    }

    fn row(instance: &str, solver: &str, seed: u64, cost: Option<f64>) -> SweepResult {
        SweepResult {
            instance: instance.into(),
            n_seams: 4,
            solver: solver.into(),
            seed,
            best_cost: cost,
            wall_seconds: 0.1,
            tour: None,
            error: None,
        }
    }

    #[test]
    fn table_fixtures() {
        let (d, r) = improvement(37.05, 33.30);
        assert!((d - 3.75).abs() < 0.005 && (r - 10.12).abs() < 0.005, "{d} {r}");
        let (d, r) = improvement(65.99, 63.60);
        assert!((d - 2.39).abs() < 0.005 && (r - 3.62).abs() < 0.005, "{d} {r}");
        assert_eq!(improvement(5.0, 5.0), (0.0, 0.0));
    }

    #[test]
    fn table_from_rows() {
        let rows = vec![
            row("L", "greedy", 0, Some(37.05)),
            row("L", "da", 0, Some(34.0)),
            row("L", "da", 1, Some(33.30)),
            row("L", "brkga", 0, Some(33.80)),
            row("L", "brkga", 1, None),
        ];
        let table = compare_table(&rows).unwrap();
        assert_eq!(table.solvers, vec!["greedy", "brkga", "da"]);
        assert_eq!(table.rows[0].costs["da"], 33.30);
        assert!((table.rows[0].delta - 3.75).abs() < 1e-9);
        let md = table.to_markdown();
        assert!(md.contains("| L | 37.05 | 33.80 | 33.30 | 3.75 | 10.12% |"), "{md}");
        assert!(compare_table(&rows[1..]).is_err());
    }

    #[test]
    fn sweep_is_full_factorial_and_csv_round_trips() {
        let inst = toy();
        let instances = vec![
            SweepInstance { label: "a".into(), instance: inst.clone() },
            SweepInstance { label: "b".into(), instance: inst.downsample(3, 1).unwrap() },
        ];
        let solvers = vec![
            SolverSpec::Greedy(GreedyParams { shots: 10, seed: 0 }),
            SolverSpec::Da(DaParams { maxiter: 20, ..Default::default() }),
        ];
        let rows = run_sweep(&instances, &solvers, &[1, 2, 3]);
        assert_eq!(rows.len(), 12);
        for r in &rows {
            let tour = r.tour.as_ref().unwrap();
            let (cost, _) = crate::rko::tour_cost(&tour.nodes, &instances.iter().find(|i| i.label == r.instance).unwrap().instance, CostMode::HomeAnchored);
            assert_eq!(Some(cost), r.best_cost);
        }
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("instance,n_seams,solver,seed,best_cost,wall_seconds\n"));
        let back = read_sweep_csv(text.as_bytes()).unwrap();
        assert_eq!(back.len(), 12);
        assert_eq!(back[0].best_cost, rows[0].best_cost);
    }

    #[test]
    fn failing_cell_does_not_stop_sweep() {
        let instances = vec![SweepInstance { label: "a".into(), instance: toy() }];
        let solvers = vec![
            SolverSpec::Greedy(GreedyParams { shots: 0, seed: 0 }),
            SolverSpec::Greedy(GreedyParams { shots: 5, seed: 0 }),
        ];
        let rows = run_sweep(&instances, &solvers, &[0]);
        assert_eq!(rows.len(), 2);
        assert!(rows[0].best_cost.is_none() && rows[0].error.is_some());
        assert!(rows[1].best_cost.is_some());
    }

    #[test]
    fn ttt_contract() {
        let inst = toy();
        let spec = SolverSpec::Greedy(GreedyParams { shots: 20, seed: 0 });
        let res = run_ttt(&spec, &inst, &[f64::INFINITY, 0.0], 5, 3).unwrap();
        assert_eq!(res.records.len(), 10);
        for r in &res.records {
            assert_eq!(r.hit, r.time_to_hit.is_some());
        }
        assert_eq!(cdf_at(&res.cdf, f64::INFINITY, f64::MAX), 1.0);
        let zero: Vec<&CdfPoint> = res.cdf.iter().filter(|p| p.target == 0.0).collect();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero[0].prob, 0.0);

        let qspec = SolverSpec::QuboSa(QuboSaParams::default());
        assert!(matches!(run_ttt(&qspec, &inst, &[1.0], 1, 0), Err(Error::Capability(_))));
        assert!(run_ttt(&spec, &inst, &[1.0], 0, 0).is_err());
    }

    #[test]
    fn family_size() {
        let base = generate_synthetic(&GeneratorParams { n_seams: 20, ..Default::default() }).unwrap().instance;
        let fam = downsample_family(&base, &[5, 10, 20], 4, 0).unwrap();
        assert_eq!(fam.len(), 12);
        assert_eq!(fam[5].instance.n_seams(), 10);
        assert_eq!(fam[5].label, "n10_s1");
    }

    #[test]
    fn spec_serde() {
        let spec: SolverSpec = serde_json::from_str(r#"{"solver":"qubo-sa","sweeps":5}"#).unwrap();
        assert_eq!(spec.id(), "qubo-sa");
        assert_eq!(spec.with_seed(4), SolverSpec::QuboSa(QuboSaParams { sweeps: 5, seed: 4, ..Default::default() }));
    }
}
