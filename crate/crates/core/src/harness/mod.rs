//! Experiment orchestration: the outer block-coordinate-descent loop,
//! baseline arrays, sweeps and result tables.

mod stats;
mod sweep;

pub use stats::{mean, sign_test, std_dev, SignTest};
pub use sweep::{
    compare_feeding, run_realizations, sd_bench, sweep_antennas, sweep_power, write_csv, ArrayAxis,
    FeedingRow, RunSummaryRow, SdBenchRow, SweepRow, TraceRow,
};

use std::time::Instant;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binary::{
    assemble_element_problem, gray_projection_baseline, hc_solve_with, projection_baseline,
    response_to_signs, signs_to_response, to_real_binary, LocalSearch,
};
use crate::error::{Error, Result};
use crate::linalg::{cr, CVec};
use crate::mm::{
    self, lorentzian_from_unit, random_unit, unit_from_lorentzian, UnitModulusQuadratic,
};
use crate::model::{
    build_waveguide, generate_channels_seeded, ElementConstraint, ScenarioConfig, WaveguideModel,
};
use crate::sphere::{sd_solve, SdVariant};
use crate::wmmse::{
    rf_power, update_all_precoders, update_decoders, update_weights, wmmse_objective,
    BeamformerState, Network, RateReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Solver {
    #[serde(rename = "wmmse-hc")]
    WmmseHC,
    #[serde(rename = "wmmse-sd")]
    WmmseSD,
    #[serde(rename = "wmmse-biproj")]
    WmmseBiProj,
    #[serde(rename = "wmmse-mm")]
    WmmseMM,
    #[serde(rename = "wmmse-grayproj")]
    WmmseGrayProj,
    #[serde(rename = "fully-digital")]
    FullyDigital,
    #[serde(rename = "hybrid-da")]
    HybridDA,
}

impl Solver {
    pub const ALL: [Solver; 7] = [
        Self::WmmseHC,
        Self::WmmseSD,
        Self::WmmseBiProj,
        Self::WmmseMM,
        Self::WmmseGrayProj,
        Self::FullyDigital,
        Self::HybridDA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::WmmseHC => "wmmse-hc",
            Self::WmmseSD => "wmmse-sd",
            Self::WmmseBiProj => "wmmse-biproj",
            Self::WmmseMM => "wmmse-mm",
            Self::WmmseGrayProj => "wmmse-grayproj",
            Self::FullyDigital => "fully-digital",
            Self::HybridDA => "hybrid-da",
        }
    }

    /// Element constraint the solver designs for; `None` for the baselines
    /// without metamaterial elements.
    pub fn constraint(self, varpi: f64) -> Option<ElementConstraint> {
        match self {
            Self::WmmseHC | Self::WmmseSD | Self::WmmseBiProj => {
                Some(ElementConstraint::Binary { varpi })
            }
            Self::WmmseMM | Self::WmmseGrayProj => Some(ElementConstraint::Lorentzian),
            Self::FullyDigital | Self::HybridDA => None,
        }
    }

    /// Every block update is a descent step on the WMMSE objective, so the
    /// sum rate trace is non-decreasing. The projection baselines are not.
    pub fn is_descent(self) -> bool {
        !matches!(self, Self::WmmseBiProj | Self::WmmseGrayProj)
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown solver '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub solver: Solver,
    /// Explicit element constraint; must agree with the solver when set.
    pub constraint: Option<ElementConstraint>,
    pub realizations: usize,
    pub max_iters: usize,
    /// Relative sum-rate change below which the outer loop stops.
    pub tol: f64,
    pub sd_variant: SdVariantName,
    /// Above this many elements the sphere decoder is replaced by HC.
    pub sd_max_elements: usize,
    pub local_search: LocalSearchName,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            solver: Solver::WmmseHC,
            constraint: None,
            realizations: 100,
            max_iters: 100,
            tol: 1e-4,
            sd_variant: SdVariantName(SdVariant::Accelerated),
            sd_max_elements: 32,
            local_search: LocalSearchName(LocalSearch::SinglePass),
        }
    }
}

/// Serde wrapper for [`SdVariant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SdVariantName(pub SdVariant);

impl Serialize for SdVariantName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.0.name())
    }
}

impl<'de> Deserialize<'de> for SdVariantName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map(SdVariantName)
            .map_err(serde::de::Error::custom)
    }
}

/// Serde wrapper for [`LocalSearch`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSearchName(pub LocalSearch);

impl Serialize for LocalSearchName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self.0 {
            LocalSearch::SinglePass => "single",
            LocalSearch::UntilStable => "stable",
            LocalSearch::Off => "off",
        })
    }
}

impl<'de> Deserialize<'de> for LocalSearchName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match String::deserialize(d)?.as_str() {
            "single" => Ok(Self(LocalSearch::SinglePass)),
            "stable" => Ok(Self(LocalSearch::UntilStable)),
            "off" => Ok(Self(LocalSearch::Off)),
            other => Err(serde::de::Error::custom(format!(
                "unknown local search '{other}'"
            ))),
        }
    }
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig, solver: Solver) -> Self {
        Self {
            scenario,
            solver,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if let Some(c) = self.constraint {
            let want = self.solver.constraint(self.scenario.varpi);
            let ok = match (c, want) {
                (ElementConstraint::Binary { .. }, Some(ElementConstraint::Binary { .. })) => true,
                (ElementConstraint::Lorentzian, Some(ElementConstraint::Lorentzian)) => true,
                _ => false,
            };
            if !ok {
                return Err(Error::IncompatibleSolver {
                    solver: self.solver.name(),
                    constraint: c.name(),
                });
            }
        }
        if self.max_iters == 0 || !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig(
                "max_iters must be positive and tol non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// State of the outer loop after one iteration (index 0 is the initial point).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub iteration: usize,
    /// WMMSE objective with decoders and weights optimal for this point.
    pub objective: f64,
    /// Weighted sum rate, bit/s/Hz.
    pub sum_rate: f64,
    pub user_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub solver: Solver,
    pub seed: u64,
    pub trace: Vec<TracePoint>,
    pub final_user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Total sphere-decoder nodes over all element updates.
    pub sd_nodes: Option<u64>,
    /// Some linear solve needed ridge regularization.
    pub regularized: bool,
    /// Sphere decoding was replaced by HC because `M` exceeded the cap.
    pub sd_substituted: bool,
    #[serde(skip)]
    pub final_state: BeamformerState,
}

impl RunRecord {
    pub fn is_monotone(&self, rel_tol: f64) -> bool {
        self.trace
            .windows(2)
            .all(|w| w[1].sum_rate >= w[0].sum_rate - rel_tol * w[0].sum_rate.abs().max(1e-300))
    }
}

/// Network of `solver`'s architecture on the channel drawn from `seed`.
pub fn build_network(cfg: &ScenarioConfig, solver: Solver, seed: u64) -> Result<Network> {
    cfg.validate()?;
    let channels = generate_channels_seeded(cfg, seed);
    let m = cfg.elements();
    match solver {
        Solver::FullyDigital => {
            let digital = ScenarioConfig {
                rf_chains: m,
                elements_per_rf: 1,
                p_rf: Some(cfg.p_tot / m as f64),
                ..cfg.clone()
            };
            let wg = vec![WaveguideModel::identity(m); cfg.cells];
            Network::new(&digital, channels, wg)
        }
        Solver::HybridDA => {
            let wg = vec![WaveguideModel::ones(cfg.rf_chains, cfg.elements_per_rf); cfg.cells];
            Network::new(cfg, channels, wg)
        }
        _ => {
            let wg = (0..cfg.cells).map(|b| build_waveguide(cfg, b)).collect();
            Network::new(cfg, channels, wg)
        }
    }
}

/// Initial element responses: binary all on, Lorentzian and unit-modulus
/// with random phases, ones for the digital array.
pub fn initial_response(cfg: &ScenarioConfig, solver: Solver, rng: &mut ChaCha8Rng) -> Vec<CVec> {
    let m = cfg.elements();
    (0..cfg.cells)
        .map(|_| match solver {
            Solver::WmmseHC | Solver::WmmseSD | Solver::WmmseBiProj => {
                CVec::from_element(m, cr(cfg.varpi))
            }
            Solver::WmmseMM | Solver::WmmseGrayProj => lorentzian_from_unit(&random_unit(m, rng)),
            Solver::HybridDA => random_unit(m, rng),
            Solver::FullyDigital => CVec::from_element(m, cr(1.0)),
        })
        .collect()
}

struct ElementUpdate {
    q: CVec,
    nodes: u64,
    regularized: bool,
}

fn update_cell_elements(
    spec: &ExperimentSpec,
    net: &Network,
    state: &BeamformerState,
    cell: usize,
    use_sd: bool,
) -> Result<ElementUpdate> {
    let varpi = spec.scenario.varpi;
    let problem = assemble_element_problem(net, state, cell);
    let q_now = &state.q[cell];
    let mut out = ElementUpdate {
        q: q_now.clone(),
        nodes: 0,
        regularized: false,
    };
    match spec.solver {
        Solver::WmmseHC | Solver::WmmseSD => {
            let qf = to_real_binary(&problem, varpi);
            let x_prev = response_to_signs(q_now, varpi);
            let x = if use_sd {
                let r = sd_solve(&qf, &x_prev, spec.sd_variant.0.options())?;
                out.nodes = r.nodes_visited;
                r.q_star
            } else {
                hc_solve_with(&qf, &x_prev, spec.local_search.0).x
            };
            out.q = signs_to_response(&x, varpi);
        }
        Solver::WmmseBiProj => {
            let (q, reg) = projection_baseline(&problem, varpi)?;
            out.q = q;
            out.regularized = reg.0;
        }
        Solver::WmmseGrayProj => {
            let (q, reg) = gray_projection_baseline(&problem)?;
            out.q = q;
            out.regularized = reg.0;
        }
        Solver::WmmseMM => {
            let r = mm::mm_solve(&problem, &unit_from_lorentzian(q_now));
            out.q = r.lorentzian_response();
        }
        Solver::HybridDA => {
            let um = UnitModulusQuadratic::unit_modulus(&problem);
            let start = q_now.map(|z| {
                if z.norm() > 0.0 {
                    z / z.norm()
                } else {
                    Complex64::new(1.0, 0.0)
                }
            });
            out.q = um
                .solve(&start, mm::DEFAULT_TOL, mm::DEFAULT_MAX_ITERS)
                .q_hat;
        }
        Solver::FullyDigital => {}
    }
    Ok(out)
}

/// Decoder and weight updates followed by a trace point for the current
/// precoders and elements.
fn refresh(
    net: &Network,
    state: &mut BeamformerState,
    iteration: usize,
) -> Result<(TracePoint, bool)> {
    let r1 = update_decoders(net, state)?;
    let r2 = update_weights(net, state)?;
    let report = RateReport::evaluate(net, state)?;
    Ok((
        TracePoint {
            iteration,
            objective: wmmse_objective(net, state)?,
            sum_rate: report.weighted_sum_rate,
            user_rates: report.user_rates,
        },
        r1.0 || r2.0,
    ))
}

/// One seeded run of the outer loop: decoders, weights, all per-RF
/// precoders, then the element responses of every cell, until the relative
/// sum-rate change drops below `spec.tol` or `spec.max_iters` is reached.
pub fn run_bcd(spec: &ExperimentSpec, seed: u64) -> Result<RunRecord> {
    spec.validate()?;
    let start = Instant::now();
    let cfg = &spec.scenario;
    let net = build_network(cfg, spec.solver, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let q0 = initial_response(cfg, spec.solver, &mut rng);
    let mut state = BeamformerState::initial(&net, q0, &mut rng);

    let use_sd = spec.solver == Solver::WmmseSD && cfg.elements() <= spec.sd_max_elements;
    let sd_substituted = spec.solver == Solver::WmmseSD && !use_sd;
    if sd_substituted {
        log::warn!(
            "M = {} exceeds the sphere decoding cap {}; using HC instead",
            cfg.elements(),
            spec.sd_max_elements
        );
    }

    let (first, mut regularized) = refresh(&net, &mut state, 0)?;
    let mut trace = vec![first];
    let mut nodes = 0u64;
    let mut converged = false;
    for it in 1..=spec.max_iters {
        update_all_precoders(&net, &mut state);
        if spec.solver != Solver::FullyDigital {
            let updates: Vec<Result<ElementUpdate>> = (0..net.cells())
                .into_par_iter()
                .map(|cell| update_cell_elements(spec, &net, &state, cell, use_sd))
                .collect();
            for (cell, up) in updates.into_iter().enumerate() {
                let up = up?;
                nodes += up.nodes;
                regularized |= up.regularized;
                state.q[cell] = up.q;
            }
        }
        let (point, reg) = refresh(&net, &mut state, it)?;
        regularized |= reg;
        let prev = trace.last().map(|p| p.sum_rate).unwrap_or(0.0);
        let change = (point.sum_rate - prev).abs();
        trace.push(point);
        if change <= spec.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let last = trace.last().expect("trace has the initial point");
    Ok(RunRecord {
        solver: spec.solver,
        seed,
        final_user_rates: last.user_rates.clone(),
        sum_rate: last.sum_rate,
        iterations: trace.len() - 1,
        converged,
        wall_time_s: start.elapsed().as_secs_f64(),
        sd_nodes: (spec.solver == Solver::WmmseSD).then_some(nodes),
        regularized,
        sd_substituted,
        trace,
        final_state: state,
    })
}

/// Largest relative per-RF power excess `(P_used - P_rf) / P_rf`, clamped at 0.
pub fn power_violation(net: &Network, state: &BeamformerState) -> f64 {
    let mut worst = 0.0f64;
    for cell in 0..net.cells() {
        for rf in 0..net.rf_chains(cell) {
            worst = worst.max((rf_power(net, state, cell, rf) - net.p_rf) / net.p_rf);
        }
    }
    worst
}

/// Every element response of `state` lies in the solver's feasible set.
pub fn elements_feasible(spec: &ExperimentSpec, state: &BeamformerState, tol: f64) -> bool {
    let all = |f: &dyn Fn(Complex64) -> bool| state.q.iter().all(|q| q.iter().all(|z| f(*z)));
    match spec.solver.constraint(spec.scenario.varpi) {
        Some(c) => all(&|z| c.contains(z, tol)),
        None if spec.solver == Solver::HybridDA => all(&|z| (z.norm() - 1.0).abs() <= tol),
        None => all(&|z| z == cr(1.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            cells: 2,
            rf_chains: 4,
            elements_per_rf: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
        }
        assert!("wmmse".parse::<Solver>().is_err());
    }

    #[test]
    fn incompatible_constraint_rejected() {
        let mut spec = ExperimentSpec::new(small(), Solver::WmmseMM);
        spec.constraint = Some(ElementConstraint::Binary { varpi: 0.8 });
        assert!(matches!(
            spec.validate(),
            Err(Error::IncompatibleSolver { .. })
        ));
        spec.solver = Solver::WmmseHC;
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn spec_toml_round_trip() {
        let spec = ExperimentSpec {
            solver: Solver::WmmseSD,
            sd_variant: SdVariantName(SdVariant::LowerBound),
            realizations: 7,
            ..ExperimentSpec::new(small(), Solver::WmmseSD)
        };
        let text = spec.to_toml().unwrap();
        assert!(text.contains("solver = \"wmmse-sd\""), "{text}");
        assert_eq!(ExperimentSpec::from_toml(&text).unwrap(), spec);
    }

    #[test]
    fn every_solver_runs_feasibly() {
        for solver in Solver::ALL {
            let mut spec = ExperimentSpec::new(small(), solver);
            spec.max_iters = 5;
            let rec = run_bcd(&spec, 3).unwrap();
            let net = build_network(&spec.scenario, solver, 3).unwrap();
            assert!(
                power_violation(&net, &rec.final_state) <= 1e-9,
                "{}",
                solver.name()
            );
            assert!(
                elements_feasible(&spec, &rec.final_state, 1e-12),
                "{}",
                solver.name()
            );
            assert!(rec.sum_rate.is_finite() && rec.sum_rate > 0.0);
            assert_eq!(rec.trace[0].iteration, 0);
        }
    }

    #[test]
    fn fully_digital_uses_identity() {
        let net = build_network(&small(), Solver::FullyDigital, 1).unwrap();
        assert_eq!(net.rf_chains(0), 12);
        assert_eq!(net.waveguides[0].matrix(), crate::CMat::identity(12, 12));
    }

    #[test]
    fn sd_cap_substitutes_hc() {
        let mut spec = ExperimentSpec::new(small(), Solver::WmmseSD);
        spec.sd_max_elements = 8;
        spec.max_iters = 2;
        let rec = run_bcd(&spec, 0).unwrap();
        assert!(rec.sd_substituted);
        assert_eq!(rec.sd_nodes, Some(0));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut spec = ExperimentSpec::new(small(), Solver::WmmseHC);
        spec.max_iters = 4;
        let a = run_bcd(&spec, 11).unwrap();
        let b = run_bcd(&spec, 11).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.final_state, b.final_state);
    }
}
