//! Generator technologies, the plane-wave and classical right-hand sides,
//! disturbance events and fixed-step integration.

mod integrate;
mod system;

pub use integrate::{integrate, snap_events, Trajectory};
pub use system::{
    classical_swing_rhs, flow_functions, plane_wave_rhs, DynamicSystem, MomentumMode,
    StateDerivative, SystemSetup, SystemState, VoltageMode,
};

use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technology {
    Sg,
    Gfl,
    GfmDroop,
    GfmVsm,
    GfmVoc,
}

impl Technology {
    pub fn is_inverter(self) -> bool {
        !matches!(self, Technology::Sg)
    }

    pub fn is_grid_forming(self) -> bool {
        matches!(
            self,
            Technology::GfmDroop | Technology::GfmVsm | Technology::GfmVoc
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Technology::Sg => "sg",
            Technology::Gfl => "gfl",
            Technology::GfmDroop => "gfm_droop",
            Technology::GfmVsm => "gfm_vsm",
            Technology::GfmVoc => "gfm_voc",
        }
    }
}

/// Frequency damping law of a unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingSpec {
    /// `P = d * dw`, `d` in system per-unit power per rad/s.
    Constant {
        d: f64,
    },
    /// First-order lag with time constant `tau_d` of
    /// `(S / S_base) (dw / omega_s) / r_d`.
    DroopWithDelay {
        r_d: f64,
        #[serde(default)]
        tau_d: f64,
    },
    None,
}

impl DampingSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DampingSpec::Constant { d } if !(d >= 0.0 && d.is_finite()) => Err(Error::Model(
                format!("damping coefficient must be non-negative, got {d}"),
            )),
            DampingSpec::DroopWithDelay { r_d, tau_d } if !(r_d > 0.0 && tau_d >= 0.0) => {
                Err(Error::Model(format!(
                    "droop needs r_d > 0 and tau_d >= 0, got {r_d}, {tau_d}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// One step of a damping law. Returns `(power, new_filter_state)` with power
/// on the unit's own rating (`rating_pu = S / S_base` scales it to system
/// base). The droop lag is advanced with its exact exponential update.
pub fn damping_power(
    spec: &DampingSpec,
    delta_omega: f64,
    omega_s: f64,
    filter_state: f64,
    dt: f64,
) -> (f64, f64) {
    match *spec {
        DampingSpec::Constant { d } => (d * delta_omega, filter_state),
        DampingSpec::DroopWithDelay { r_d, tau_d } => {
            let target = delta_omega / omega_s / r_d;
            if tau_d == 0.0 {
                (target, target)
            } else {
                let next = target + (filter_state - target) * (-dt / tau_d).exp();
                (next, next)
            }
        }
        DampingSpec::None => (0.0, filter_state),
    }
}

fn default_pll_tau() -> f64 {
    0.02
}

/// A generating unit. Impedances are per-unit on the system base; limits are
/// per-unit of the unit's own rating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Generator {
    pub bus: usize,
    pub tech: Technology,
    /// Inertia constant on the unit rating, seconds.
    #[serde(default)]
    pub h: f64,
    pub rating_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingSpec>,
    /// Voltage transient time constant, seconds.
    pub t_v: f64,
    /// Magnetizing / filter impedance entering the voltage equation. For a
    /// machine this is `x_d - x'_d`, the flux-decay coupling.
    pub z_m: C64,
    /// Internal-node reactance (transient reactance of a machine). Defaults
    /// to `z_m` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_transient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_limit: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i_limit: Option<f64>,
    /// Frequency-tracking lag of grid-following units, seconds.
    #[serde(default = "default_pll_tau")]
    pub pll_tau: f64,
}

impl Generator {
    /// Inertial momentum `2 H S / S_base` in seconds; zero for grid-following
    /// units.
    pub fn momentum(&self, base_mva: f64) -> f64 {
        if self.tech == Technology::Gfl {
            0.0
        } else {
            2.0 * self.h * self.rating_mva / base_mva
        }
    }

    pub fn rating_pu(&self, base_mva: f64) -> f64 {
        self.rating_mva / base_mva
    }

    pub fn internal_impedance(&self) -> C64 {
        match self.x_transient {
            Some(x) => C64::new(0.0, x),
            None => self.z_m,
        }
    }

    pub fn damping_spec(&self) -> DampingSpec {
        self.damping.unwrap_or(DampingSpec::None)
    }

    /// Parameter checks that need no network.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::Semantic(format!(
                "generator at bus {}: {msg}",
                self.bus
            )))
        };
        if !(self.h >= 0.0 && self.h.is_finite()) {
            return bad(format!(
                "inertia constant must be non-negative, got {}",
                self.h
            ));
        }
        if !(self.rating_mva > 0.0) {
            return bad("rating must be positive".into());
        }
        if !(self.t_v > 0.0) {
            return bad(format!("t_v must be positive, got {}", self.t_v));
        }
        if !(self.z_m.norm() > 0.0) {
            return bad("z_m must be non-zero".into());
        }
        if let Some(x) = self.x_transient {
            if !(x > 0.0) {
                return bad("x_transient must be positive".into());
            }
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("q_limit", self.q_limit),
            ("i_limit", self.i_limit),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) {
                    return bad(format!("{name} must be non-negative"));
                }
            }
        }
        if !(self.pll_tau > 0.0) {
            return bad("pll_tau must be positive".into());
        }
        let damping = self.damping_spec();
        if let Err(Error::Model(m)) = damping.validate() {
            return bad(m);
        }
        if matches!(self.tech, Technology::GfmDroop | Technology::GfmVoc)
            && !matches!(damping, DampingSpec::DroopWithDelay { .. })
        {
            return bad(format!(
                "{} requires a droop_with_delay damping with a droop value r_d",
                self.tech.name()
            ));
        }
        Ok(())
    }
}

/// Default near-bolted fault admittance, `1 / (j 1e-5)`.
pub fn default_fault_admittance() -> C64 {
    C64::new(0.0, 1e-5).inv()
}

fn half() -> f64 {
    0.5
}

/// A disturbance applied at a step boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    /// Constant-impedance load increase at a bus, per-unit on system base.
    LoadStep {
        time: f64,
        bus: usize,
        dp: f64,
        #[serde(default)]
        dq: f64,
    },
    /// Shunt fault at fractional `position` along a branch.
    #[serde(alias = "fault")]
    ThreePhaseFault {
        time: f64,
        branch: usize,
        #[serde(default = "half")]
        position: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        admittance: Option<C64>,
    },
    ClearFault {
        time: f64,
    },
    LineTrip {
        time: f64,
        branch: usize,
    },
}

impl Event {
    pub fn time(&self) -> f64 {
        match *self {
            Event::LoadStep { time, .. }
            | Event::ThreePhaseFault { time, .. }
            | Event::ClearFault { time }
            | Event::LineTrip { time, .. } => time,
        }
    }

    pub fn with_time(&self, t: f64) -> Event {
        let mut e = self.clone();
        match &mut e {
            Event::LoadStep { time, .. }
            | Event::ThreePhaseFault { time, .. }
            | Event::ClearFault { time }
            | Event::LineTrip { time, .. } => *time = t,
        }
        e
    }

    pub fn label(&self) -> String {
        match self {
            Event::LoadStep { bus, dp, dq, .. } => format!("load_step bus={bus} dp={dp} dq={dq}"),
            Event::ThreePhaseFault {
                branch, position, ..
            } => {
                format!("three_phase_fault branch={branch} position={position}")
            }
            Event::ClearFault { .. } => "clear_fault".into(),
            Event::LineTrip { branch, .. } => format!("line_trip branch={branch}"),
        }
    }
}

/// Checks ordering and fault/clear pairing.
pub fn validate_events(events: &[Event]) -> Result<()> {
    let mut last = 0.0;
    let mut fault_open = false;
    for e in events {
        let t = e.time();
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::Protocol(format!(
                "event time must be non-negative, got {t}"
            )));
        }
        if t < last {
            return Err(Error::Protocol("events must be sorted by time".into()));
        }
        last = t;
        match e {
            Event::ThreePhaseFault { .. } => {
                if fault_open {
                    return Err(Error::Protocol(
                        "overlapping faults are not supported".into(),
                    ));
                }
                fault_open = true;
            }
            Event::ClearFault { .. } => {
                if !fault_open {
                    return Err(Error::Protocol(
                        "clear_fault without an active fault".into(),
                    ));
                }
                fault_open = false;
            }
            _ => {}
        }
    }
    if fault_open {
        return Err(Error::Protocol("fault has no matching clear_fault".into()));
    }
    Ok(())
}

/// Which right-hand side to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    PlaneWave,
    Classical,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::PlaneWave => "planewave",
            Model::Classical => "classical",
        }
    }
}
