use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use super::system::{DynamicSystem, SystemState};
use super::{validate_events, Event, Model};
use crate::electromagnetics::system_share;
use crate::{Error, Result};

/// Sampled simulation output. Series are indexed `[element][sample]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub model: Model,
    pub omega_s: f64,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Terminal bus id of each dynamic node.
    pub node_buses: Vec<usize>,
    pub delta: Vec<Vec<f64>>,
    /// Speed deviation, rad/s.
    pub omega: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Effective nodal momentum in force at each sample, seconds.
    pub momentum: Vec<Vec<f64>>,
    /// System electromagnetic momentum share at each sample.
    pub em_share: Vec<f64>,
    pub bus_ids: Vec<usize>,
    pub bus_v: Vec<Vec<f64>>,
    /// Unwrapped bus voltage angle, rad.
    pub bus_angle: Vec<Vec<f64>>,
    pub branch_ids: Vec<usize>,
    /// Active and reactive power leaving the `from` end, per-unit.
    pub line_p: Vec<Vec<f64>>,
    pub line_q: Vec<Vec<f64>>,
    /// `(time, description)` of every applied event.
    pub events: Vec<(f64, String)>,
    pub final_state: SystemState,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.delta.len()
    }

    /// Sample index nearest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.times[0]) / self.dt).round().max(0.0) as usize;
        k.min(self.len() - 1)
    }

    /// Momentum-weighted mean speed deviation (rad/s) with fixed weights.
    pub fn mean_omega(&self, weights: &[f64]) -> Vec<f64> {
        let total: f64 = weights.iter().sum();
        (0..self.len())
            .map(|k| {
                weights
                    .iter()
                    .zip(&self.omega)
                    .map(|(w, s)| w * s[k])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    /// Center-of-inertia frequency in Hz, weighted by the nodal momenta in
    /// force at sample `weight_sample` (equal weights if all are zero).
    pub fn coi_frequency_hz(&self, weight_sample: usize) -> Vec<f64> {
        let mut w: Vec<f64> = self.momentum.iter().map(|m| m[weight_sample]).collect();
        if w.iter().all(|&x| x <= 0.0) {
            w = vec![1.0; w.len()];
        }
        let f0 = self.omega_s / (2.0 * PI);
        self.mean_omega(&w)
            .into_iter()
            .map(|dw| f0 + dw / (2.0 * PI))
            .collect()
    }

    /// Bus frequency deviation in rad/s from the unwrapped bus angle, by
    /// central differences (one-sided at the ends).
    pub fn bus_omega(&self, bus: usize) -> Vec<f64> {
        let a = &self.bus_angle[bus];
        let n = a.len();
        if n < 2 {
            return vec![0.0; n];
        }
        (0..n)
            .map(|k| {
                if k == 0 {
                    (a[1] - a[0]) / self.dt
                } else if k == n - 1 {
                    (a[n - 1] - a[n - 2]) / self.dt
                } else {
                    (a[k + 1] - a[k - 1]) / (2.0 * self.dt)
                }
            })
            .collect()
    }
}

/// Snaps events to step indices. Times that are not multiples of `dt` are
/// moved to the nearest step with a warning.
pub fn snap_events(events: &[Event], dt: f64) -> Vec<(usize, Event)> {
    events
        .iter()
        .map(|e| {
            let t = e.time();
            let k = (t / dt).round() as usize;
            let snapped = k as f64 * dt;
            if (snapped - t).abs() > 1e-9 * t.abs().max(1.0) {
                warn!("event at t = {t} s snapped to {snapped} s");
            }
            (k, e.with_time(snapped))
        })
        .collect()
}

struct Recorder {
    traj: Trajectory,
}

impl Recorder {
    fn new(
        system: &DynamicSystem,
        model: Model,
        dt: f64,
        capacity: usize,
        initial: &SystemState,
    ) -> Self {
        let n = system.node_count();
        let net = system.dynamic_network().network();
        let series = |m: usize| vec![Vec::with_capacity(capacity); m];
        Recorder {
            traj: Trajectory {
                model,
                omega_s: system.omega_s(),
                dt,
                times: Vec::with_capacity(capacity),
                node_buses: system.generators().iter().map(|g| g.bus).collect(),
                delta: series(n),
                omega: series(n),
                v: series(n),
                momentum: series(n),
                em_share: Vec::with_capacity(capacity),
                bus_ids: net.buses.iter().map(|b| b.id).collect(),
                bus_v: series(net.bus_count()),
                bus_angle: series(net.bus_count()),
                branch_ids: net.branches.iter().map(|b| b.id).collect(),
                line_p: series(net.branches.len()),
                line_q: series(net.branches.len()),
                events: Vec::new(),
                final_state: initial.clone(),
            },
        }
    }

    fn record(&mut self, system: &DynamicSystem, state: &SystemState) -> Result<()> {
        let tr = &mut self.traj;
        tr.times.push(state.t);
        let budgets = match tr.model {
            Model::PlaneWave => system.budgets(state)?,
            Model::Classical => system
                .generator_momentum()
                .into_iter()
                .enumerate()
                .map(|(k, m)| crate::electromagnetics::MomentumBudget::new(k, m, 0.0))
                .collect(),
        };
        for k in 0..state.len() {
            tr.delta[k].push(state.delta[k]);
            tr.omega[k].push(state.omega[k]);
            tr.v[k].push(state.v[k]);
            tr.momentum[k].push(budgets[k].total);
        }
        tr.em_share.push(system_share(&budgets));
        let buses = system.bus_voltages(state);
        for (b, u) in buses.iter().enumerate() {
            tr.bus_v[b].push(u.norm());
            let mut a = u.arg();
            if let Some(&prev) = tr.bus_angle[b].last() {
                a += 2.0 * PI * ((prev - a) / (2.0 * PI)).round();
            }
            tr.bus_angle[b].push(a);
        }
        for (k, fl) in system
            .dynamic_network()
            .branch_flows(&buses)
            .iter()
            .enumerate()
        {
            tr.line_p[k].push(fl.from_power.re);
            tr.line_q[k].push(fl.from_power.im);
        }
        Ok(())
    }
}

/// Fixed-step classical Runge-Kutta integration from `initial` over
/// `[initial.t, initial.t + horizon]`. Events are applied at step
/// boundaries; the sample at an event time shows the pre-event network.
pub fn integrate(
    system: &mut DynamicSystem,
    model: Model,
    initial: &SystemState,
    events: &[Event],
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Argument(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Argument(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    if initial.len() != system.node_count() || initial.aux.len() != initial.len() {
        return Err(Error::Argument(
            "state dimension does not match the system".into(),
        ));
    }
    validate_events(events)?;
    let steps = (horizon / dt).round() as usize;
    let t0 = initial.t;
    let mut pending = snap_events(events, dt);
    pending.retain(|(k, e)| {
        let inside = (e.time() - t0) >= -1e-12 && *k <= steps + (t0 / dt).round() as usize;
        if !inside {
            warn!(
                "event at t = {} s lies outside the simulated interval",
                e.time()
            );
        }
        inside
    });
    let k0 = (t0 / dt).round() as usize;

    let mut rec = Recorder::new(system, model, dt, steps + 1, initial);
    let nx = 4 * initial.len();
    let mut x = initial.to_flat();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]);
    let mut tmp = vec![0.0; nx];
    let mut next_event = 0;

    for step in 0..=steps {
        let t = t0 + step as f64 * dt;
        let state = SystemState::from_flat(t, &x);
        rec.record(system, &state)?;
        while next_event < pending.len() && pending[next_event].0 == k0 + step {
            let ev = &pending[next_event].1;
            system.apply_event(ev, &state)?;
            rec.traj.events.push((t, ev.label()));
            next_event += 1;
        }
        if step == steps {
            rec.traj.final_state = state;
            break;
        }

        system.eval(model, &x, &mut k1)?;
        for i in 0..nx {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        system.eval(model, &tmp, &mut k2)?;
        for i in 0..nx {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        system.eval(model, &tmp, &mut k3)?;
        for i in 0..nx {
            tmp[i] = x[i] + dt * k3[i];
        }
        system.eval(model, &tmp, &mut k4)?;
        for i in 0..nx {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        let n = nx / 4;
        if x.iter().any(|v| !v.is_finite()) || x[2 * n..3 * n].iter().any(|&v| v <= 0.0) {
            return Err(Error::NumericalBlowup { last_valid_time: t });
        }
    }
    Ok(rec.traj)
}
