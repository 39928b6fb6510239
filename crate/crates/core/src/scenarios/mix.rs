use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sensitivity::{trajectory_metrics, RunMetrics};
use super::CaseDefinition;
use crate::dynamics::{DampingSpec, Event, Generator, Model, Technology};
use crate::{Error, Result, C64};

/// Fault on a branch, cleared after `duration` without topology change.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultProtocol {
    pub branch: usize,
    pub position: f64,
    pub time: f64,
    pub duration: f64,
    pub horizon: f64,
}

impl FaultProtocol {
    /// Fault at the middle of the branch joining buses `a` and `b`.
    pub fn on_branch_between(
        case: &CaseDefinition,
        a: usize,
        b: usize,
        duration: f64,
    ) -> Result<Self> {
        let br = case
            .network
            .branches
            .iter()
            .find(|br| (br.from == a && br.to == b) || (br.from == b && br.to == a))
            .ok_or_else(|| Error::Argument(format!("no branch joins buses {a} and {b}")))?;
        Ok(FaultProtocol {
            branch: br.id,
            position: 0.5,
            time: 1.0,
            duration,
            horizon: 10.0,
        })
    }

    pub fn clear_time(&self) -> f64 {
        self.time + self.duration
    }

    pub fn events(&self) -> Vec<Event> {
        vec![
            Event::ThreePhaseFault {
                time: self.time,
                branch: self.branch,
                position: self.position,
                admittance: None,
            },
            Event::ClearFault {
                time: self.clear_time(),
            },
        ]
    }
}

/// Generation mixes of the three-machine system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mix {
    Sg3,
    Sg2Gfm1,
    Sg1Gfm2,
    Gfm3,
}

impl Mix {
    pub const ALL: [Mix; 4] = [Mix::Sg3, Mix::Sg2Gfm1, Mix::Sg1Gfm2, Mix::Gfm3];

    pub fn label(self) -> &'static str {
        match self {
            Mix::Sg3 => "3SG",
            Mix::Sg2Gfm1 => "2SG+1GFM",
            Mix::Sg1Gfm2 => "1SG+2GFM",
            Mix::Gfm3 => "3GFM",
        }
    }

    pub fn gfm_count(self) -> usize {
        match self {
            Mix::Sg3 => 0,
            Mix::Sg2Gfm1 => 1,
            Mix::Sg1Gfm2 => 2,
            Mix::Gfm3 => 3,
        }
    }
}

/// Droop-controlled grid-forming replacement for a machine of the same
/// rating: 5 % droop behind a 5 ms measurement lag, no rotating mass.
pub fn grid_forming_unit(g: &Generator, base_mva: f64) -> Generator {
    let to_system = base_mva / g.rating_mva;
    Generator {
        bus: g.bus,
        tech: Technology::GfmDroop,
        h: 0.0,
        rating_mva: g.rating_mva,
        damping: Some(DampingSpec::DroopWithDelay {
            r_d: 0.05,
            tau_d: 0.005,
        }),
        t_v: 0.05,
        z_m: C64::new(0.0, 0.15 * to_system),
        x_transient: None,
        p_max: None,
        q_limit: None,
        i_limit: Some(1.5),
        pll_tau: g.pll_tau,
    }
}

/// Converts the last `count` machines (in case order) to grid-forming units.
pub fn with_grid_forming(case: &CaseDefinition, count: usize) -> CaseDefinition {
    let mut c = case.clone();
    let n = c.generators.len();
    let base = c.network.base_mva;
    for g in c.generators.iter_mut().skip(n.saturating_sub(count)) {
        *g = grid_forming_unit(g, base);
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixMetrics {
    pub mix: Mix,
    pub label: String,
    /// Largest nodal frequency deviation while the fault is applied, Hz.
    pub peak_df_fault_hz: f64,
    pub metrics: RunMetrics,
    /// Largest pairwise nodal frequency difference over the run, Hz.
    pub max_spread_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixStudy {
    pub protocol: FaultProtocol,
    pub rows: Vec<MixMetrics>,
}

/// Runs the same fault on each generation mix at identical loading.
pub fn technology_mix_study(
    case: &CaseDefinition,
    mixes: &[Mix],
    protocol: &FaultProtocol,
    kappa: f64,
) -> Result<MixStudy> {
    if case.generators.len() != 3 {
        return Err(Error::Argument(
            "technology mixes are defined for three-machine cases".into(),
        ));
    }
    let rows = mixes
        .par_iter()
        .map(|&mix| {
            let c = with_grid_forming(case, mix.gfm_count());
            let traj = c.simulate(
                Model::PlaneWave,
                c.setup(kappa),
                &protocol.events(),
                protocol.horizon,
            )?;
            let k0 = traj.index_of(protocol.time);
            let k1 = traj.index_of(protocol.clear_time());
            let peak_df_fault_hz = traj
                .omega
                .iter()
                .flat_map(|s| s[k0..=k1].iter())
                .fold(0.0f64, |m, w| m.max(w.abs()))
                / (2.0 * PI);
            let mut spread = 0.0f64;
            for k in 0..traj.len() {
                let (lo, hi) = traj
                    .omega
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                        (lo.min(s[k]), hi.max(s[k]))
                    });
                spread = spread.max(hi - lo);
            }
            Ok(MixMetrics {
                mix,
                label: mix.label().to_string(),
                peak_df_fault_hz,
                metrics: trajectory_metrics(&traj, protocol)?,
                max_spread_hz: spread / (2.0 * PI),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MixStudy {
        protocol: *protocol,
        rows,
    })
}
