use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::CaseDefinition;
use crate::dynamics::{Event, Model, Trajectory};
use crate::electromagnetics::system_share;
use crate::{Error, Result};

/// Span after the event searched for the steepest window, seconds.
const ROCOF_SEARCH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocofMeasurement {
    pub hz_per_s: f64,
    /// Per-unit of nominal frequency per second.
    pub pu_per_s: f64,
    pub window: f64,
    pub event_time: f64,
    /// Start of the steepest window.
    pub window_start: f64,
}

fn ls_slope(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in t.iter().zip(y) {
        num += (a - tm) * (b - ym);
        den += (a - tm) * (a - tm);
    }
    num / den
}

/// Largest absolute least-squares slope of the center-of-inertia frequency
/// over sliding windows of width `window` starting within 500 ms of the
/// event. Weights are the nodal momenta in force at the event sample.
pub fn measure_rocof(traj: &Trajectory, event_time: f64, window: f64) -> Result<RocofMeasurement> {
    if traj.is_empty() {
        return Err(Error::Argument("empty trajectory".into()));
    }
    if !(window >= 2.0 * traj.dt - 1e-12) {
        return Err(Error::Argument(format!(
            "ROCOF window {window} s is shorter than two samples"
        )));
    }
    let t_end = *traj.times.last().unwrap();
    if event_time < traj.times[0] - 1e-12 || event_time > t_end + 1e-12 {
        return Err(Error::Argument(format!(
            "event time {event_time} s outside the trajectory"
        )));
    }
    let ke = traj.index_of(event_time);
    let width = (window / traj.dt).round() as usize;
    let last = (ke + (ROCOF_SEARCH / traj.dt).round() as usize).min(traj.len() - 1);
    if ke + width > last {
        return Err(Error::Argument(format!(
            "ROCOF window {window} s exceeds the available post-event samples"
        )));
    }
    let f = traj.coi_frequency_hz(ke);
    let mut best = 0.0f64;
    let mut best_start = ke;
    for s in ke..=last - width {
        let slope = ls_slope(&traj.times[s..=s + width], &f[s..=s + width]);
        if slope.abs() > best {
            best = slope.abs();
            best_start = s;
        }
    }
    let f0 = traj.omega_s / (2.0 * std::f64::consts::PI);
    Ok(RocofMeasurement {
        hz_per_s: best,
        pu_per_s: best / f0,
        window,
        event_time,
        window_start: traj.times[best_start],
    })
}

/// Jump of total electrical power at the instant a load step is applied to
/// the equilibrium. Constant-impedance loads make it differ from the nominal
/// step once voltages move.
pub fn realized_step(case: &CaseDefinition, kappa: f64, disturbance: &Event) -> Result<f64> {
    if !matches!(disturbance, Event::LoadStep { .. }) {
        return Err(Error::Argument(
            "momentum estimates need a load_step disturbance".into(),
        ));
    }
    let (mut sys, x0) = case.build(case.setup(kappa))?;
    let before: f64 = sys.electrical_power(&x0).iter().sum();
    sys.apply_event(disturbance, &x0)?;
    let after: f64 = sys.electrical_power(&x0).iter().sum();
    Ok(after - before)
}

fn run_rocof(
    case: &CaseDefinition,
    model: Model,
    kappa: f64,
    disturbance: &Event,
) -> Result<RocofMeasurement> {
    let t_e = disturbance.time();
    let horizon = t_e + ROCOF_SEARCH + 0.1;
    let traj = case.simulate(
        model,
        case.setup(kappa),
        std::slice::from_ref(disturbance),
        horizon,
    )?;
    measure_rocof(&traj, t_e, case.options.rocof_window)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareCurve {
    pub h: Vec<f64>,
    /// `M_l / (M_g + M_l)` from the operating-point budgets.
    pub analytic: Vec<f64>,
    /// `(M_hat - M_g) / M_hat` with `M_hat = dP / ROCOF` and `dP` the
    /// realized electrical step.
    pub empirical: Vec<f64>,
    /// `M_hat` per grid point, seconds.
    pub momentum_estimate: Vec<f64>,
    /// `M_g + M_l` at the operating point per grid point, seconds.
    pub momentum_analytic: Vec<f64>,
    pub step_pu: f64,
    pub rocof_hz: Vec<f64>,
    /// Fitted `a` of `a / (b H + a)`; `a` is the constant line momentum.
    pub fit_a: f64,
    /// `b = 2 sum S / S_base`, fixed by the machine ratings.
    pub fit_b: f64,
    pub fit_max_deviation: f64,
    pub kappa: f64,
}

/// Least-squares `a` of `share = a / (b H + a)` for fixed `b`.
pub fn fit_share_model(h: &[f64], share: &[f64], b: f64) -> f64 {
    let mut guesses: Vec<f64> = h
        .iter()
        .zip(share)
        .filter(|(_, &s)| s > 0.0 && s < 1.0)
        .map(|(&h, &s)| b * h * s / (1.0 - s))
        .collect();
    if guesses.is_empty() {
        return 0.0;
    }
    guesses.sort_by(f64::total_cmp);
    let mut a = guesses[guesses.len() / 2];
    for _ in 0..100 {
        let (mut jr, mut jj) = (0.0, 0.0);
        for (&h, &s) in h.iter().zip(share) {
            let den = b * h + a;
            let r = s - a / den;
            let d = -b * h / (den * den);
            jr += d * r;
            jj += d * d;
        }
        if jj == 0.0 {
            break;
        }
        let step = -jr / jj;
        a = (a + step).max(0.0);
        if step.abs() <= 1e-15 * a.max(1.0) {
            break;
        }
    }
    a
}

// analytic share, empirical share, ROCOF, M_hat, M_g + M_l
type ShareRow = (f64, f64, f64, f64, f64);

/// Share of electromagnetic momentum against homogeneous inertia constant.
pub fn momentum_share_sweep(
    case: &CaseDefinition,
    h_grid: &[f64],
    disturbance: &Event,
    kappa: f64,
) -> Result<ShareCurve> {
    let dp = realized_step(case, kappa, disturbance)?;
    let rows: Vec<Result<ShareRow>> = h_grid
        .par_iter()
        .map(|&h| {
            let c = case.with_inertia(h);
            let (sys, x0) = c.build(c.setup(kappa))?;
            let budgets = sys.budgets(&x0)?;
            let analytic = system_share(&budgets);
            let total: f64 = budgets.iter().map(|b| b.total).sum();
            let r = run_rocof(&c, Model::PlaneWave, kappa, disturbance)?;
            if r.pu_per_s <= 1e-12 {
                return Err(Error::Measurement(format!("ROCOF vanishes at H = {h} s")));
            }
            let m_hat = dp.abs() / r.pu_per_s;
            let mg = c.generator_momentum();
            Ok((analytic, (m_hat - mg) / m_hat, r.hz_per_s, m_hat, total))
        })
        .collect();
    let mut analytic = Vec::with_capacity(h_grid.len());
    let mut empirical = Vec::with_capacity(h_grid.len());
    let mut rocof_hz = Vec::with_capacity(h_grid.len());
    let mut momentum_estimate = Vec::with_capacity(h_grid.len());
    let mut momentum_analytic = Vec::with_capacity(h_grid.len());
    for row in rows {
        let (a, e, r, m_hat, m) = row?;
        analytic.push(a);
        empirical.push(e);
        rocof_hz.push(r);
        momentum_estimate.push(m_hat);
        momentum_analytic.push(m);
    }
    let base = case.network.base_mva;
    let fit_b: f64 = case
        .generators
        .iter()
        .filter(|g| g.tech == crate::dynamics::Technology::Sg)
        .map(|g| 2.0 * g.rating_mva / base)
        .sum();
    let fit_a = fit_share_model(h_grid, &analytic, fit_b);
    let fit_max_deviation = h_grid
        .iter()
        .zip(&analytic)
        .map(|(&h, &s)| (s - fit_a / (fit_b * h + fit_a)).abs())
        .fold(0.0, f64::max);
    Ok(ShareCurve {
        h: h_grid.to_vec(),
        analytic,
        empirical,
        momentum_estimate,
        momentum_analytic,
        step_pu: dp,
        rocof_hz,
        fit_a,
        fit_b,
        fit_max_deviation,
        kappa,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocofCurve {
    pub model: Model,
    pub h: Vec<f64>,
    pub rocof_hz: Vec<f64>,
    /// `ROCOF = c1 / (H + c2)`; `c2 = 0` for the classical fit `c1 / H`.
    pub c1: f64,
    pub c2: f64,
    pub r_squared: f64,
}

fn r_squared(y: &[f64], fit: impl Fn(usize) -> f64) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y
        .iter()
        .enumerate()
        .map(|(k, v)| (v - fit(k)).powi(2))
        .sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// ROCOF against homogeneous inertia constant for one model.
pub fn rocof_vs_inertia(
    case: &CaseDefinition,
    model: Model,
    disturbance: &Event,
    h_grid: &[f64],
    kappa: f64,
) -> Result<RocofCurve> {
    let rocof_hz: Vec<f64> = h_grid
        .par_iter()
        .map(|&h| run_rocof(&case.with_inertia(h), model, kappa, disturbance).map(|r| r.hz_per_s))
        .collect::<Result<_>>()?;
    let (c1, c2) = match model {
        Model::PlaneWave => {
            // 1 / ROCOF = H / c1 + c2 / c1
            let inv: Vec<f64> = rocof_hz.iter().map(|r| 1.0 / r).collect();
            let slope = ls_slope(h_grid, &inv);
            let n = h_grid.len() as f64;
            let intercept = inv.iter().sum::<f64>() / n - slope * h_grid.iter().sum::<f64>() / n;
            (1.0 / slope, intercept / slope)
        }
        Model::Classical => {
            let num: f64 = h_grid.iter().zip(&rocof_hz).map(|(h, r)| r / h).sum();
            let den: f64 = h_grid.iter().map(|h| 1.0 / (h * h)).sum();
            (num / den, 0.0)
        }
    };
    let r2 = r_squared(&rocof_hz, |k| c1 / (h_grid[k] + c2));
    Ok(RocofCurve {
        model,
        h: h_grid.to_vec(),
        rocof_hz,
        c1,
        c2,
        r_squared: r2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub planewave: RocofCurve,
    pub classical: RocofCurve,
    /// `|ROCOF_classical - ROCOF_planewave|` per grid point, Hz/s.
    pub divergence: Vec<f64>,
}

pub fn compare_models(
    case: &CaseDefinition,
    disturbance: &Event,
    h_grid: &[f64],
    kappa: f64,
) -> Result<ModelComparison> {
    let planewave = rocof_vs_inertia(case, Model::PlaneWave, disturbance, h_grid, kappa)?;
    let classical = rocof_vs_inertia(case, Model::Classical, disturbance, h_grid, kappa)?;
    let divergence = planewave
        .rocof_hz
        .iter()
        .zip(&classical.rocof_hz)
        .map(|(p, c)| (c - p).abs())
        .collect();
    Ok(ModelComparison {
        planewave,
        classical,
        divergence,
    })
}
