//! Benchmark cases and the experiment harnesses built on them.

mod mix;
mod rocof;
mod sensitivity;
mod two_node;

pub use mix::{
    grid_forming_unit, technology_mix_study, with_grid_forming, FaultProtocol, Mix, MixMetrics,
    MixStudy,
};
pub use rocof::{
    compare_models, fit_share_model, measure_rocof, momentum_share_sweep, realized_step,
    rocof_vs_inertia, ModelComparison, RocofCurve, RocofMeasurement, ShareCurve,
};
pub use sensitivity::{
    apply_parameter, corruption_locality, sensitivity_sweep, trajectory_metrics, Locality,
    Parameter, RunMetrics, SensitivityReport, SensitivityRow, SweepOptions,
};
pub use two_node::{two_node_decomposition, Decomposition, TwoNodeState, TwoNodeSystem};

use std::sync::OnceLock;

use crate::dynamics::{
    integrate, DynamicSystem, Event, Generator, Model, SystemSetup, SystemState, Technology,
    Trajectory,
};
use crate::electromagnetics::{calibrate_kappa, system_share};
use crate::io::{parse_case_str, CaseOptions};
use crate::network::PowerNetwork;
use crate::{Error, Result};

const WSCC9: &str = include_str!("cases/wscc9.toml");
const NE39: &str = include_str!("cases/ne39.toml");

/// Names accepted by [`load_benchmark`].
pub const BENCHMARKS: [&str; 2] = ["wscc9", "ne39"];

/// Electromagnetic share the reference constant is calibrated to, on wscc9
/// with every machine at `REFERENCE_H`.
pub const REFERENCE_SHARE: f64 = 0.102;
pub const REFERENCE_H: f64 = 6.0;

/// A network with its machines, default disturbances and run options.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseDefinition {
    pub name: String,
    pub source: String,
    pub network: PowerNetwork,
    pub generators: Vec<Generator>,
    pub events: Vec<Event>,
    pub options: CaseOptions,
}

impl CaseDefinition {
    /// Copy with every synchronous machine set to inertia constant `h`.
    pub fn with_inertia(&self, h: f64) -> CaseDefinition {
        let mut c = self.clone();
        for g in c.generators.iter_mut().filter(|g| g.tech == Technology::Sg) {
            g.h = h;
        }
        c
    }

    /// Sum of generator momenta, seconds.
    pub fn generator_momentum(&self) -> f64 {
        self.generators
            .iter()
            .map(|g| g.momentum(self.network.base_mva))
            .sum()
    }

    /// The case's own `kappa` or the wscc9 reference calibration.
    pub fn kappa(&self) -> Result<f64> {
        match self.options.kappa {
            Some(k) => Ok(k),
            None => reference_kappa(),
        }
    }

    pub fn setup(&self, kappa: f64) -> SystemSetup {
        SystemSetup {
            kappa,
            attribution: self.options.attribution,
            ..SystemSetup::default()
        }
    }

    pub fn build(&self, setup: SystemSetup) -> Result<(DynamicSystem, SystemState)> {
        if !self.options.reduce {
            return Err(Error::Model(
                "dynamic simulation runs on the reduced network; set options.reduce = true".into(),
            ));
        }
        DynamicSystem::new(&self.network, &self.generators, setup)
    }

    /// First load-step event of the case.
    pub fn default_disturbance(&self) -> Option<&Event> {
        self.events
            .iter()
            .find(|e| matches!(e, Event::LoadStep { .. }))
    }

    pub fn simulate(
        &self,
        model: Model,
        setup: SystemSetup,
        events: &[Event],
        horizon: f64,
    ) -> Result<Trajectory> {
        let (mut sys, x0) = self.build(setup)?;
        integrate(&mut sys, model, &x0, events, self.options.dt, horizon)
    }

    /// Analytic system share `sum M_l / sum M` at the operating point.
    pub fn analytic_share(&self, kappa: f64) -> Result<f64> {
        let (sys, x0) = self.build(self.setup(kappa))?;
        Ok(system_share(&sys.budgets(&x0)?))
    }
}

/// Loads an embedded benchmark and checks that its power flow solves.
pub fn load_benchmark(name: &str) -> Result<CaseDefinition> {
    let text = match name {
        "wscc9" => WSCC9,
        "ne39" => NE39,
        _ => {
            return Err(Error::UnknownBenchmark {
                name: name.to_string(),
                available: BENCHMARKS.join(", "),
            })
        }
    };
    let case = parse_case_str(text)?;
    crate::network::solve_power_flow(
        &case.network,
        crate::network::DEFAULT_PF_TOLERANCE,
        crate::network::DEFAULT_PF_MAX_ITERATIONS,
    )?;
    Ok(case)
}

/// Finds `kappa` so that `case`, with every machine at `h_ref`, has system
/// share `target_share` at its operating point.
pub fn calibrate_momentum_constant(
    case: &CaseDefinition,
    h_ref: f64,
    target_share: f64,
) -> Result<f64> {
    let c = case.with_inertia(h_ref);
    let (sys, x0) = c.build(c.setup(1.0))?;
    let budgets = sys.budgets(&x0)?;
    let mg: f64 = budgets.iter().map(|b| b.generator_momentum).sum();
    let ml: f64 = budgets.iter().map(|b| b.line_momentum).sum();
    calibrate_kappa(mg, ml, target_share)
}

/// The wscc9 reference calibration, computed once per process.
pub fn reference_kappa() -> Result<f64> {
    static KAPPA: OnceLock<std::result::Result<f64, String>> = OnceLock::new();
    KAPPA
        .get_or_init(|| {
            load_benchmark("wscc9")
                .and_then(|c| calibrate_momentum_constant(&c, REFERENCE_H, REFERENCE_SHARE))
                .map_err(|e| e.to_string())
        })
        .clone()
        .map_err(Error::Calibration)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn benchmark_sizes() {
        let c = load_benchmark("wscc9").unwrap();
        assert_eq!((c.network.bus_count(), c.generators.len()), (9, 3));
        let c = load_benchmark("ne39").unwrap();
        assert_eq!((c.network.bus_count(), c.generators.len()), (39, 10));
    }

    #[test]
    fn unknown_benchmark_lists_names() {
        match load_benchmark("wscc10") {
            Err(Error::UnknownBenchmark { available, .. }) => {
                assert!(available.contains("wscc9") && available.contains("ne39"))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_calibration_hits_target() {
        let k = reference_kappa().unwrap();
        let c = load_benchmark("wscc9").unwrap().with_inertia(REFERENCE_H);
        assert!((c.analytic_share(k).unwrap() - REFERENCE_SHARE).abs() < 1e-9);
    }

    #[test]
    fn zero_target_gives_zero_kappa() {
        let c = load_benchmark("wscc9").unwrap();
        assert_eq!(calibrate_momentum_constant(&c, 6.0, 0.0).unwrap(), 0.0);
    }
}
