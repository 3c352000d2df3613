use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{mean, std_dev};
use super::{run_bcd, ExperimentSpec, RunRecord, Solver};
use crate::binary::QuadraticForm;
use crate::error::{Error, Result};
use crate::linalg::RVec;
use crate::model::{dbm_to_watts, Feeding};
use crate::sphere::{sd_solve, SdVariant};

/// `spec.realizations` runs with seeds `base_seed, base_seed + 1, ...`,
/// in parallel, returned in seed order.
pub fn run_realizations(spec: &ExperimentSpec, base_seed: u64) -> Result<Vec<RunRecord>> {
    (0..spec.realizations as u64)
        .into_par_iter()
        .map(|r| run_bcd(spec, base_seed + r))
        .collect()
}

/// One averaged point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// `p_tot_dbm` or `elements`.
    pub sweep: String,
    pub x: f64,
    pub solver: String,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub realizations: usize,
    pub mean_iterations: f64,
    pub mean_sd_nodes: Option<f64>,
    pub mean_wall_time_s: f64,
}

fn summarize(sweep: &str, x: f64, solver: Solver, runs: &[RunRecord]) -> SweepRow {
    let rates: Vec<f64> = runs.iter().map(|r| r.sum_rate).collect();
    let iters: Vec<f64> = runs.iter().map(|r| r.iterations as f64).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.wall_time_s).collect();
    let nodes: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.sd_nodes.map(|n| n as f64))
        .collect();
    SweepRow {
        sweep: sweep.to_string(),
        x,
        solver: solver.name().to_string(),
        mean_sum_rate: mean(&rates),
        std_sum_rate: std_dev(&rates),
        realizations: runs.len(),
        mean_iterations: mean(&iters),
        mean_sd_nodes: (!nodes.is_empty()).then(|| mean(&nodes)),
        mean_wall_time_s: mean(&times),
    }
}

/// Averaged sum rate per total power budget (dBm) and solver. The per-RF
/// budget follows `p_tot` unless it was set explicitly.
pub fn sweep_power(
    spec: &ExperimentSpec,
    solvers: &[Solver],
    p_tot_dbm: &[f64],
    base_seed: u64,
) -> Result<(Vec<SweepRow>, Vec<RunRecord>)> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &p in p_tot_dbm {
        for &solver in solvers {
            let mut s = spec.clone();
            s.solver = solver;
            s.scenario.p_tot = dbm_to_watts(p);
            let runs = run_realizations(&s, base_seed)?;
            rows.push(summarize("p_tot_dbm", p, solver, &runs));
            all.extend(runs);
        }
    }
    Ok((rows, all))
}

/// Averaged sum rate per element count, varying elements per microstrip.
/// Which dimension of the array grows in an antenna sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayAxis {
    /// More elements per microstrip. With the default `P_rf = P_tot / M` the
    /// total RF power falls as `1 / M_x`.
    ElementsPerRf,
    /// More microstrips; total RF power stays at `P_tot / M_x`.
    #[default]
    RfChains,
}

impl std::str::FromStr for ArrayAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elements_per_rf" | "m_x" => Ok(Self::ElementsPerRf),
            "rf_chains" | "m_y" => Ok(Self::RfChains),
            _ => Err(Error::InvalidConfig(format!("unknown array axis {s:?}"))),
        }
    }
}

/// Rows are keyed by the total element count `M`.
pub fn sweep_antennas(
    spec: &ExperimentSpec,
    solvers: &[Solver],
    axis: ArrayAxis,
    counts: &[usize],
    base_seed: u64,
) -> Result<(Vec<SweepRow>, Vec<RunRecord>)> {
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for &n in counts {
        for &solver in solvers {
            let mut s = spec.clone();
            s.solver = solver;
            match axis {
                ArrayAxis::ElementsPerRf => s.scenario.elements_per_rf = n,
                ArrayAxis::RfChains => s.scenario.rf_chains = n,
            }
            s.validate()?;
            let runs = run_realizations(&s, base_seed)?;
            rows.push(summarize(
                "elements",
                s.scenario.elements() as f64,
                solver,
                &runs,
            ));
            all.extend(runs);
        }
    }
    Ok((rows, all))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeedingRow {
    pub seed: u64,
    pub solver: String,
    pub edge_sum_rate: f64,
    pub center_sum_rate: f64,
    pub delta: f64,
}

/// Paired edge- and center-fed runs on identical seeds.
pub fn compare_feeding(spec: &ExperimentSpec, base_seed: u64) -> Result<Vec<FeedingRow>> {
    let with = |feeding| {
        let mut s = spec.clone();
        s.scenario.feeding = feeding;
        run_realizations(&s, base_seed)
    };
    let edge = with(Feeding::Edge)?;
    let center = with(Feeding::Center)?;
    Ok(edge
        .iter()
        .zip(&center)
        .map(|(e, c)| FeedingRow {
            seed: e.seed,
            solver: spec.solver.name().to_string(),
            edge_sum_rate: e.sum_rate,
            center_sum_rate: c.sum_rate,
            delta: c.sum_rate - e.sum_rate,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SdBenchRow {
    #[serde(rename = "M")]
    pub elements: usize,
    pub variant: String,
    pub instance: usize,
    pub nodes_visited: u64,
    pub wall_time: f64,
    pub objective: f64,
}

/// Solve every instance with every variant, radius seeded by HC from the
/// all-ones point.
pub fn sd_bench(instances: &[QuadraticForm], variants: &[SdVariant]) -> Result<Vec<SdBenchRow>> {
    let per: Vec<Result<Vec<SdBenchRow>>> = instances
        .par_iter()
        .enumerate()
        .map(|(i, qf)| {
            let x0 = RVec::from_element(qf.dim(), 1.0);
            variants
                .iter()
                .map(|&v| {
                    let t = Instant::now();
                    let r = sd_solve(qf, &x0, v.options())?;
                    Ok(SdBenchRow {
                        elements: qf.dim(),
                        variant: v.name().to_string(),
                        instance: i,
                        nodes_visited: r.nodes_visited,
                        wall_time: t.elapsed().as_secs_f64(),
                        objective: r.objective,
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for p in per {
        rows.extend(p?);
    }
    Ok(rows)
}

/// One row per finished run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummaryRow {
    pub solver: String,
    pub seed: u64,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    pub sd_nodes: Option<u64>,
    pub regularized: bool,
    pub sd_substituted: bool,
}

impl From<&RunRecord> for RunSummaryRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            solver: r.solver.name().to_string(),
            seed: r.seed,
            sum_rate: r.sum_rate,
            iterations: r.iterations,
            converged: r.converged,
            wall_time_s: r.wall_time_s,
            sd_nodes: r.sd_nodes,
            regularized: r.regularized,
            sd_substituted: r.sd_substituted,
        }
    }
}

/// Per-iteration rows of a set of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<'a> {
    pub record: &'a RunRecord,
}

impl TraceRow<'_> {
    /// Columns `solver, seed, iteration, objective, sum_rate, rate_user_0, ...`.
    pub fn write_all<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let users = records
            .first()
            .map(|r| r.final_user_rates.len())
            .unwrap_or(0);
        let mut header = vec![
            "solver".to_string(),
            "seed".into(),
            "iteration".into(),
            "objective".into(),
            "sum_rate".into(),
        ];
        header.extend((0..users).map(|u| format!("rate_user_{u}")));
        w.write_record(&header)?;
        for r in records {
            for p in &r.trace {
                let mut row = vec![
                    r.solver.name().to_string(),
                    r.seed.to_string(),
                    p.iteration.to_string(),
                    p.objective.to_string(),
                    p.sum_rate.to_string(),
                ];
                row.extend(p.user_rates.iter().map(|x| x.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
