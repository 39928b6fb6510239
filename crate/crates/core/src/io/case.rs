//! TOML case files.
//!
//! ```toml
//! [system]
//! name = "two-bus"
//! base_mva = 100.0
//! frequency_hz = 60.0
//!
//! [[buses]]
//! id = 1
//! kind = "slack"        # slack | generator | load
//! voltage = 1.0
//!
//! [[branches]]
//! id = 1
//! from = 1
//! to = 2
//! r = 0.0
//! x = 0.1
//! b = 0.02
//! length_m = 80000.0
//!
//! [[generators]]
//! bus = 1
//! tech = "sg"           # sg | gfl | gfm_droop | gfm_vsm | gfm_voc
//! h = 4.0
//! rating_mva = 200.0
//! damping = { kind = "constant", d = 0.05 }
//! t_v = 6.0
//! z_m = [0.0, 0.9]
//! x_transient = 0.12
//!
//! [[events]]
//! time = 1.0
//! kind = "load_step"
//! bus = 2
//! dp = 0.09
//!
//! [options]
//! dt = 0.001
//! horizon = 10.0
//! ```
//!
//! Powers and impedances are per-unit on `base_mva`; lengths are meters.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{validate_events, Event, Generator};
use crate::electromagnetics::{Attribution, DEFAULT_EPS_POL};
use crate::network::{Branch, Bus, PowerNetwork};
use crate::scenarios::CaseDefinition;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    name: String,
    #[serde(default)]
    source: String,
    #[serde(default = "default_base")]
    base_mva: f64,
    #[serde(default = "default_frequency")]
    frequency_hz: f64,
}

fn default_base() -> f64 {
    100.0
}

fn default_frequency() -> f64 {
    60.0
}

/// Run options stored with a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseOptions {
    pub dt: f64,
    pub horizon: f64,
    /// Line-momentum constant; the wscc9 calibration is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub rocof_window: f64,
    pub eps_pol: f64,
    pub attribution: Attribution,
    pub reduce: bool,
    /// Under-frequency load-shedding threshold drawn on frequency plots, Hz.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ufls_hz: Option<f64>,
}

impl Default for CaseOptions {
    fn default() -> Self {
        CaseOptions {
            dt: 1e-3,
            horizon: 10.0,
            kappa: None,
            rocof_window: 0.05,
            eps_pol: DEFAULT_EPS_POL,
            attribution: Attribution::Sending,
            reduce: true,
            ufls_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDocument {
    system: SystemSection,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    generators: Vec<Generator>,
    #[serde(default)]
    events: Vec<Event>,
    #[serde(default)]
    options: CaseOptions,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map(|p| p + 1).unwrap_or(0) + 1;
    (line, col)
}

/// Parses and validates a case document.
pub fn parse_case_str(text: &str) -> Result<CaseDefinition> {
    let doc: CaseDocument = toml::from_str(text).map_err(|e| Error::Schema {
        location: e.span().map(|s| {
            let (l, c) = line_col(text, s.start);
            format!("line {l}, column {c}")
        }),
        message: e.message().to_string(),
    })?;
    let o = &doc.options;
    if !(o.dt > 0.0 && o.horizon >= 0.0 && o.rocof_window > 0.0 && o.eps_pol >= 0.0) {
        return Err(Error::Semantic(
            "options: dt, horizon, rocof_window and eps_pol must be positive".into(),
        ));
    }
    if let Some(k) = o.kappa {
        if !(k >= 0.0) {
            return Err(Error::Semantic(
                "options: kappa must be non-negative".into(),
            ));
        }
    }
    let network = PowerNetwork::new(
        doc.buses,
        doc.branches,
        doc.system.base_mva,
        doc.system.frequency_hz,
    )
    .map_err(|e| match e {
        Error::Model(m) => Error::Semantic(m),
        other => other,
    })?;
    for g in &doc.generators {
        if network.bus_index(g.bus).is_none() {
            return Err(Error::Semantic(format!(
                "generator references missing bus {}",
                g.bus
            )));
        }
        g.validate()?;
    }
    for e in &doc.events {
        match e {
            Event::LoadStep { bus, .. } if network.bus_index(*bus).is_none() => {
                return Err(Error::Semantic(format!(
                    "event references missing bus {bus}"
                )));
            }
            Event::ThreePhaseFault { branch, .. } | Event::LineTrip { branch, .. }
                if network.branch_index(*branch).is_none() =>
            {
                return Err(Error::Semantic(format!(
                    "event references missing branch {branch}"
                )));
            }
            _ => {}
        }
    }
    validate_events(&doc.events).map_err(|e| Error::Semantic(e.to_string()))?;
    Ok(CaseDefinition {
        name: doc.system.name,
        source: doc.system.source,
        network,
        generators: doc.generators,
        events: doc.events,
        options: doc.options,
    })
}

pub fn parse_case(path: impl AsRef<Path>) -> Result<CaseDefinition> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_case_str(&text)
}

/// Renders a case back to TOML; `parse_case_str(&serialize_case(c)) == c`.
pub fn serialize_case(case: &CaseDefinition) -> Result<String> {
    let doc = CaseDocument {
        system: SystemSection {
            name: case.name.clone(),
            source: case.source.clone(),
            base_mva: case.network.base_mva,
            frequency_hz: case.network.frequency_hz,
        },
        buses: case.network.buses.clone(),
        branches: case.network.branches.clone(),
        generators: case.generators.clone(),
        events: case.events.clone(),
        options: case.options.clone(),
    };
    toml::to_string(&doc).map_err(|e| Error::Schema {
        location: None,
        message: e.to_string(),
    })
}
