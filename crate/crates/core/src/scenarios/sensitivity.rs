use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mix::FaultProtocol;
use super::CaseDefinition;
use crate::dynamics::{DampingSpec, Model, Trajectory};
use crate::modal::{damping_ratio, prony_fit_detailed, select_order_detailed, Detrend, TimeSeries};
use crate::network::{solve_power_flow, DEFAULT_PF_MAX_ITERATIONS, DEFAULT_PF_TOLERANCE};
use crate::{Error, Result};

/// Parameter varied by a sweep. Values are multipliers on the case data,
/// except `PHeadroom` whose value is the headroom fraction above dispatch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    /// Frequency damping (constant `D` or droop gain `1 / r_d`).
    DOmega,
    /// Voltage damping through the magnetizing impedance `Z_m`.
    DvProxy,
    PHeadroom,
    /// Inertia constant.
    MOmega,
    Tv,
    XScale,
    RScale,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::DOmega => "d_omega",
            Parameter::DvProxy => "d_v_proxy",
            Parameter::PHeadroom => "p_headroom",
            Parameter::MOmega => "m_omega",
            Parameter::Tv => "t_v",
            Parameter::XScale => "x_scale",
            Parameter::RScale => "r_scale",
        }
    }

    pub fn parse(s: &str) -> Option<Parameter> {
        [
            Parameter::DOmega,
            Parameter::DvProxy,
            Parameter::PHeadroom,
            Parameter::MOmega,
            Parameter::Tv,
            Parameter::XScale,
            Parameter::RScale,
        ]
        .into_iter()
        .find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub fault: FaultProtocol,
    /// Generator (index in case order) whose parameters are varied; all
    /// generators when `None`. Network parameters ignore it.
    pub target: Option<usize>,
    pub kappa: f64,
}

/// Post-disturbance metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Largest nodal frequency deviation after fault inception, Hz.
    pub peak_df_hz: f64,
    /// Largest drop of a bus voltage below its pre-fault value after the
    /// fault is cleared, per-unit.
    pub peak_dv_pu: f64,
    /// Time after clearing until every nodal frequency stays within 2 % of
    /// its peak excursion around its final value, seconds.
    pub settling_time: f64,
    /// Damping ratio and frequency of the most energetic oscillatory mode
    /// of the most disturbed nodal frequency after clearing.
    pub zeta: Option<f64>,
    pub mode_hz: Option<f64>,
}

fn settling(traj: &Trajectory, k_clear: usize) -> f64 {
    let mut last = k_clear;
    for s in &traj.omega {
        let fin = *s.last().unwrap();
        let peak = s[k_clear..]
            .iter()
            .fold(0.0f64, |m, w| m.max((w - fin).abs()));
        if peak == 0.0 {
            continue;
        }
        if let Some(k) = (k_clear..s.len())
            .rev()
            .find(|&k| (s[k] - fin).abs() > 0.02 * peak)
        {
            last = last.max(k);
        }
    }
    traj.times[last] - traj.times[k_clear]
}

fn dominant_mode(traj: &Trajectory, k_clear: usize) -> Option<(f64, f64)> {
    let start = k_clear + (0.1 / traj.dt).round() as usize;
    let end = (start + (6.0 / traj.dt).round() as usize).min(traj.len());
    if end <= start + 40 {
        return None;
    }
    let node = (0..traj.node_count()).max_by(|&a, &b| {
        let amp = |i: usize| {
            traj.omega[i][start..end]
                .iter()
                .fold(0.0f64, |m, w| m.max(w.abs()))
        };
        amp(a).total_cmp(&amp(b))
    })?;
    let step = ((0.01 / traj.dt).round() as usize).max(1);
    let samples: Vec<f64> = traj.omega[node][start..end]
        .iter()
        .step_by(step)
        .copied()
        .collect();
    let series = TimeSeries::new(traj.dt * step as f64, samples, "omega").ok()?;
    let sel = select_order_detailed(&series, 0.9999, Detrend::Mean).ok()?;
    let mut order = sel.order.clamp(2, 16);
    loop {
        if let Ok(fit) = prony_fit_detailed(&series, order, Detrend::Mean) {
            let m = fit
                .modes
                .iter()
                .find(|m| m.omega > 0.5 && m.omega < PI / series.dt * 0.9)?;
            return damping_ratio(m).ok().map(|z| (z, m.frequency_hz()));
        }
        if order <= 2 {
            return None;
        }
        order -= 1;
    }
}

/// Metrics of a faulted run.
pub fn trajectory_metrics(traj: &Trajectory, fault: &FaultProtocol) -> Result<RunMetrics> {
    if traj.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    let k_fault = traj.index_of(fault.time);
    let k_clear = traj.index_of(fault.clear_time()) + 1;
    if k_clear >= traj.len() {
        return Err(Error::Argument(
            "trajectory ends before the fault is cleared".into(),
        ));
    }
    let peak_df_hz = traj
        .omega
        .iter()
        .flat_map(|s| s[k_fault..].iter())
        .fold(0.0f64, |m, w| m.max(w.abs()))
        / (2.0 * PI);
    let peak_dv_pu = traj
        .bus_v
        .iter()
        .map(|s| {
            let v0 = s[0];
            s[k_clear..].iter().fold(0.0f64, |m, v| m.max(v0 - v))
        })
        .fold(0.0f64, f64::max);
    let (zeta, mode_hz) = match dominant_mode(traj, k_clear) {
        Some((z, f)) => (Some(z), Some(f)),
        None => (None, None),
    };
    Ok(RunMetrics {
        peak_df_hz,
        peak_dv_pu,
        settling_time: settling(traj, k_clear),
        zeta,
        mode_hz,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub value: f64,
    pub metrics: Option<RunMetrics>,
    /// Time of numerical blow-up when the run was unstable.
    pub unstable_at: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub rows: Vec<SensitivityRow>,
}

/// Case with one parameter changed.
pub fn apply_parameter(
    case: &CaseDefinition,
    parameter: Parameter,
    value: f64,
    target: Option<usize>,
) -> Result<CaseDefinition> {
    if !value.is_finite() {
        return Err(Error::Argument("parameter value must be finite".into()));
    }
    let mut c = case.clone();
    if let Some(t) = target {
        if t >= c.generators.len() {
            return Err(Error::Argument(format!(
                "target generator {t} does not exist"
            )));
        }
    }
    let selected = |k: usize| target.is_none_or(|t| t == k);
    match parameter {
        Parameter::XScale | Parameter::RScale => {
            if !(value > 0.0 || (parameter == Parameter::RScale && value == 0.0)) {
                return Err(Error::Argument("impedance scale must be positive".into()));
            }
            for br in c.network.branches.iter_mut() {
                if parameter == Parameter::XScale {
                    br.x *= value;
                } else {
                    br.r *= value;
                }
            }
            return Ok(c);
        }
        Parameter::PHeadroom => {
            if !(value >= 0.0) {
                return Err(Error::Argument("headroom must be non-negative".into()));
            }
            let pf = solve_power_flow(&c.network, DEFAULT_PF_TOLERANCE, DEFAULT_PF_MAX_ITERATIONS)?;
            let base = c.network.base_mva;
            for (k, g) in c.generators.iter_mut().enumerate() {
                if selected(k) {
                    let b = c.network.bus_index(g.bus).expect("validated case");
                    let dispatch = (pf.p[b] + c.network.buses[b].load_p) / g.rating_pu(base);
                    g.p_max = Some((1.0 + value) * dispatch.max(0.0));
                }
            }
            return Ok(c);
        }
        _ => {}
    }
    if !(value >= 0.0) {
        return Err(Error::Argument(
            "parameter multiplier must be non-negative".into(),
        ));
    }
    for (k, g) in c.generators.iter_mut().enumerate() {
        if !selected(k) {
            continue;
        }
        match parameter {
            Parameter::DOmega => {
                g.damping = match g.damping_spec() {
                    DampingSpec::Constant { d } => Some(DampingSpec::Constant { d: d * value }),
                    DampingSpec::DroopWithDelay { r_d, tau_d } if value > 0.0 => {
                        Some(DampingSpec::DroopWithDelay {
                            r_d: r_d / value,
                            tau_d,
                        })
                    }
                    DampingSpec::DroopWithDelay { .. } => {
                        return Err(Error::Argument(
                            "droop gain cannot be scaled to zero".into(),
                        ))
                    }
                    DampingSpec::None => Some(DampingSpec::None),
                }
            }
            Parameter::DvProxy => {
                if value == 0.0 {
                    return Err(Error::Argument("z_m cannot be scaled to zero".into()));
                }
                g.z_m *= value;
            }
            Parameter::MOmega => g.h *= value,
            Parameter::Tv => {
                if value == 0.0 {
                    return Err(Error::Argument("t_v cannot be scaled to zero".into()));
                }
                g.t_v *= value;
            }
            _ => unreachable!(),
        }
    }
    Ok(c)
}

/// Runs the fault protocol once per parameter value. Unstable runs are
/// reported with their blow-up time instead of metrics.
pub fn sensitivity_sweep(
    case: &CaseDefinition,
    parameter: Parameter,
    values: &[f64],
    options: &SweepOptions,
) -> Result<SensitivityReport> {
    let rows = values
        .par_iter()
        .map(|&value| {
            let c = apply_parameter(case, parameter, value, options.target)?;
            let run = c
                .simulate(
                    Model::PlaneWave,
                    c.setup(options.kappa),
                    &options.fault.events(),
                    options.fault.horizon,
                )
                .and_then(|traj| trajectory_metrics(&traj, &options.fault));
            Ok(match run {
                Ok(m) => SensitivityRow {
                    value,
                    metrics: Some(m),
                    unstable_at: None,
                    error: None,
                },
                Err(Error::NumericalBlowup { last_valid_time }) => SensitivityRow {
                    value,
                    metrics: None,
                    unstable_at: Some(last_valid_time),
                    error: Some("numerical blow-up".into()),
                },
                Err(e) => SensitivityRow {
                    value,
                    metrics: None,
                    unstable_at: None,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityReport {
        parameter,
        values: values.to_vec(),
        rows,
    })
}

/// Spread of a one-unit parameter change, measured against the unchanged
/// case after the fault is cleared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Locality {
    /// Largest change of the target's internal voltage, per-unit.
    pub local_dv_pu: f64,
    /// Largest change of any other node's frequency, per-unit of nominal.
    pub remote_df_pu: f64,
    /// Largest change of any bus voltage other than the target's terminal,
    /// per-unit.
    pub remote_dv_pu: f64,
}

pub fn corruption_locality(
    case: &CaseDefinition,
    parameter: Parameter,
    value: f64,
    target: usize,
    fault: &FaultProtocol,
    kappa: f64,
) -> Result<Locality> {
    let changed = apply_parameter(case, parameter, value, Some(target))?;
    let run = |c: &CaseDefinition| {
        c.simulate(
            Model::PlaneWave,
            c.setup(kappa),
            &fault.events(),
            fault.horizon,
        )
    };
    let nom = run(case)?;
    let cor = run(&changed)?;
    let k_clear = nom.index_of(fault.clear_time()) + 1;
    if k_clear >= nom.len() {
        return Err(Error::Argument(
            "trajectory ends before the fault is cleared".into(),
        ));
    }
    let max_diff = |a: &[f64], b: &[f64]| {
        a[k_clear..]
            .iter()
            .zip(&b[k_clear..])
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    };
    let terminal = case.generators[target].bus;
    let remote_df_pu = (0..nom.node_count())
        .filter(|&i| i != target)
        .map(|i| max_diff(&cor.omega[i], &nom.omega[i]))
        .fold(0.0, f64::max)
        / nom.omega_s;
    let remote_dv_pu = nom
        .bus_ids
        .iter()
        .enumerate()
        .filter(|(_, &id)| id != terminal)
        .map(|(b, _)| max_diff(&cor.bus_v[b], &nom.bus_v[b]))
        .fold(0.0, f64::max);
    Ok(Locality {
        local_dv_pu: max_diff(&cor.v[target], &nom.v[target]),
        remote_df_pu,
        remote_dv_pu,
    })
}
