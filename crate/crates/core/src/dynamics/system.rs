use std::collections::HashSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{default_fault_admittance, DampingSpec, Event, Generator, Model, Technology};
use crate::electromagnetics::{dynamic_budgets, Attribution, MomentumBudget};
use crate::network::{
    fold_loads_and_augment, solve_power_flow, AdmittanceMatrix, BusKind, DynamicNetwork,
    MachineTerminal, PowerFlowSolution, PowerNetwork, DEFAULT_PF_MAX_ITERATIONS,
    DEFAULT_PF_TOLERANCE,
};
use crate::{Error, Result, C64};

/// Source of the line-momentum part of the nodal momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumMode {
    /// Recomputed from instantaneous line flows at every stage.
    #[default]
    Dynamic,
    /// Fixed at the initial operating point.
    Frozen,
    /// Line momentum ignored.
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoltageMode {
    #[default]
    Dynamic,
    /// Internal voltage magnitudes held at their initial values.
    Algebraic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemSetup {
    /// Line-momentum constant, seconds per (per-unit power x meter).
    pub kappa: f64,
    pub attribution: Attribution,
    pub momentum: MomentumMode,
    pub voltage: VoltageMode,
    /// Active-power tracking gain of grid-following units, rad/s per pu.
    pub gfl_power_gain: f64,
}

impl Default for SystemSetup {
    fn default() -> Self {
        SystemSetup {
            kappa: 0.0,
            attribution: Attribution::Sending,
            momentum: MomentumMode::Dynamic,
            voltage: VoltageMode::Dynamic,
            gfl_power_gain: 10.0,
        }
    }
}

/// Per-node state. `omega` is the deviation from synchronous speed in
/// rad/s; `aux` holds droop filter outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub t: f64,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub aux: Vec<f64>,
}

impl SystemState {
    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub(crate) fn to_flat(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.len());
        x.extend_from_slice(&self.delta);
        x.extend_from_slice(&self.omega);
        x.extend_from_slice(&self.v);
        x.extend_from_slice(&self.aux);
        x
    }

    pub(crate) fn from_flat(t: f64, x: &[f64]) -> Self {
        let n = x.len() / 4;
        SystemState {
            t,
            delta: x[..n].to_vec(),
            omega: x[n..2 * n].to_vec(),
            v: x[2 * n..3 * n].to_vec(),
            aux: x[3 * n..].to_vec(),
        }
    }

    pub fn phasors(&self) -> Vec<C64> {
        self.v
            .iter()
            .zip(&self.delta)
            .map(|(&v, &d)| C64::from_polar(v, d))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub v: Vec<f64>,
    pub aux: Vec<f64>,
}

impl StateDerivative {
    fn from_flat(x: &[f64]) -> Self {
        let s = SystemState::from_flat(0.0, x);
        StateDerivative {
            delta: s.delta,
            omega: s.omega,
            v: s.v,
            aux: s.aux,
        }
    }
}

/// `f_i = Re(U_i conj(I_i))` and `g_i = |Z_m,i I_i|` with `I = Y U`, which
/// expand to the angle/magnitude sums over `Y_ij` and `alpha_ij`.
pub fn flow_functions(
    y: &AdmittanceMatrix,
    delta: &[f64],
    v: &[f64],
    z_m: &[C64],
) -> (Vec<f64>, Vec<f64>) {
    let u: Vec<C64> = v
        .iter()
        .zip(delta)
        .map(|(&m, &a)| C64::from_polar(m, a))
        .collect();
    let i = y.currents(&u);
    let f = u.iter().zip(&i).map(|(u, i)| (u * i.conj()).re).collect();
    let g = i.iter().zip(z_m).map(|(i, z)| (z * i).norm()).collect();
    (f, g)
}

#[derive(Debug, Clone)]
struct NodeModel {
    tech: Technology,
    m_g: f64,
    p_set: f64,
    e_set: f64,
    t_v: f64,
    z_m: C64,
    damping: DampingSpec,
    rating_pu: f64,
    p_max: Option<f64>,
    q_limit: Option<f64>,
    i_limit: Option<f64>,
    pll_tau: f64,
}

struct Terms {
    f: Vec<f64>,
    g: Vec<f64>,
    q_drop: Vec<f64>,
    u: Vec<C64>,
}

/// A network with its machines, ready for integration.
#[derive(Debug, Clone)]
pub struct DynamicSystem {
    dn: DynamicNetwork,
    generators: Vec<Generator>,
    nodes: Vec<NodeModel>,
    omega_s: f64,
    setup: SystemSetup,
    frozen_line_momentum: Vec<f64>,
    power_flow: PowerFlowSolution,
}

/// Largest torque imbalance tolerated at a node with zero momentum.
const MOMENTUM_GUARD: f64 = 1e-9;

impl DynamicSystem {
    /// Solves the power flow, builds the reduced network and the equilibrium
    /// state. Mechanical setpoints and internal voltages are chosen so that
    /// the returned state is an exact fixed point.
    pub fn new(
        network: &PowerNetwork,
        generators: &[Generator],
        setup: SystemSetup,
    ) -> Result<(DynamicSystem, SystemState)> {
        if generators.is_empty() {
            return Err(Error::Semantic("at least one generator is required".into()));
        }
        let mut seen = HashSet::new();
        for g in generators {
            g.validate()?;
            let b = network.bus_index(g.bus).ok_or_else(|| {
                Error::Semantic(format!("generator references missing bus {}", g.bus))
            })?;
            if network.buses[b].kind == BusKind::Load {
                return Err(Error::Semantic(format!(
                    "generator at bus {} which is a load bus",
                    g.bus
                )));
            }
            if !seen.insert(g.bus) {
                return Err(Error::Semantic(format!(
                    "more than one generator at bus {}",
                    g.bus
                )));
            }
        }
        for bus in &network.buses {
            if bus.kind != BusKind::Load && !seen.contains(&bus.id) {
                return Err(Error::Semantic(format!(
                    "{:?} bus {} has no generator model",
                    bus.kind, bus.id
                )));
            }
        }
        if !(setup.kappa >= 0.0) {
            return Err(Error::Argument("kappa must be non-negative".into()));
        }

        let pf = solve_power_flow(network, DEFAULT_PF_TOLERANCE, DEFAULT_PF_MAX_ITERATIONS)?;
        let terminals: Vec<MachineTerminal> = generators
            .iter()
            .map(|g| MachineTerminal {
                bus: g.bus,
                impedance: g.internal_impedance(),
            })
            .collect();
        let dn = fold_loads_and_augment(network, &pf, &terminals, true)?;

        let n = generators.len();
        let mut delta = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for g in generators {
            let b = network.bus_index(g.bus).expect("checked above");
            let bus = &network.buses[b];
            let s = C64::new(pf.p[b] + bus.load_p, pf.q[b] + bus.load_q);
            let ut = pf.phasor(b);
            let e = ut + g.internal_impedance() * (s / ut).conj();
            delta.push(e.arg());
            v.push(e.norm());
        }
        let base = network.base_mva;
        let nodes = generators
            .iter()
            .map(|g| {
                let rating_pu = g.rating_pu(base);
                NodeModel {
                    tech: g.tech,
                    m_g: g.momentum(base),
                    p_set: 0.0,
                    e_set: 0.0,
                    t_v: g.t_v,
                    z_m: g.z_m,
                    damping: g.damping_spec(),
                    rating_pu,
                    p_max: g.p_max.map(|p| p * rating_pu),
                    q_limit: g.q_limit.map(|q| q * rating_pu),
                    i_limit: g.i_limit.map(|i| i * rating_pu),
                    pll_tau: g.pll_tau,
                }
            })
            .collect();
        let mut sys = DynamicSystem {
            dn,
            generators: generators.to_vec(),
            nodes,
            omega_s: network.omega_s(),
            setup,
            frozen_line_momentum: vec![0.0; n],
            power_flow: pf,
        };
        let state = SystemState {
            t: 0.0,
            delta,
            omega: vec![0.0; n],
            v,
            aux: vec![0.0; n],
        };
        let terms = sys.terms(&state.delta, &state.v);
        for (k, node) in sys.nodes.iter_mut().enumerate() {
            node.p_set = terms.f[k];
            node.e_set = state.v[k] + terms.g[k] + terms.q_drop[k];
            if let Some(pm) = node.p_max {
                if node.p_set > pm {
                    warn!("generator {k}: dispatch {} exceeds p_max {pm}", node.p_set);
                }
            }
        }
        sys.frozen_line_momentum = sys.line_momentum_at(&state.delta, &state.v)?;
        Ok((sys, state))
    }

    pub fn dynamic_network(&self) -> &DynamicNetwork {
        &self.dn
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn power_flow(&self) -> &PowerFlowSolution {
        &self.power_flow
    }

    pub fn omega_s(&self) -> f64 {
        self.omega_s
    }

    pub fn setup(&self) -> &SystemSetup {
        &self.setup
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Mechanical power setpoints solved at initialization.
    pub fn p_set(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.p_set).collect()
    }

    /// Internal EMF setpoints solved at initialization.
    pub fn e_set(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.e_set).collect()
    }

    pub fn generator_momentum(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.m_g).collect()
    }

    /// Bus voltage phasors for a node state.
    pub fn bus_voltages(&self, state: &SystemState) -> Vec<C64> {
        self.dn.bus_voltages(&state.phasors())
    }

    fn terms(&self, delta: &[f64], v: &[f64]) -> Terms {
        let u: Vec<C64> = v
            .iter()
            .zip(delta)
            .map(|(&m, &a)| C64::from_polar(m, a))
            .collect();
        let currents = self.dn.admittance().currents(&u);
        let n = self.nodes.len();
        let mut f = vec![0.0; n];
        let mut g = vec![0.0; n];
        let mut q_drop = vec![0.0; n];
        for (k, node) in self.nodes.iter().enumerate() {
            let i = currents[k];
            let s = u[k] * i.conj();
            let scale = match node.i_limit {
                Some(lim) if i.norm() > lim => lim / i.norm(),
                _ => 1.0,
            };
            f[k] = s.re * scale;
            g[k] = (node.z_m * i).norm() * scale;
            if let Some(ql) = node.q_limit {
                let q = s.im * scale;
                if q > ql {
                    q_drop[k] = (q - ql) * node.z_m.norm() / v[k];
                }
            }
        }
        Terms { f, g, q_drop, u }
    }

    /// Electrical power `f_i` delivered by each node at `state`, after
    /// current limiting.
    pub fn electrical_power(&self, state: &SystemState) -> Vec<f64> {
        self.terms(&state.delta, &state.v).f
    }

    fn line_momentum_at(&self, delta: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let u: Vec<C64> = v
            .iter()
            .zip(delta)
            .map(|(&m, &a)| C64::from_polar(m, a))
            .collect();
        let buses = self.dn.bus_voltages(&u);
        let zeros = vec![0.0; self.nodes.len()];
        Ok(dynamic_budgets(
            &self.dn,
            &zeros,
            &buses,
            self.setup.kappa,
            self.setup.attribution,
        )?
        .iter()
        .map(|b| b.line_momentum)
        .collect())
    }

    /// Momentum budgets used by the plane-wave model at `state`.
    pub fn budgets(&self, state: &SystemState) -> Result<Vec<MomentumBudget>> {
        let ml = match self.setup.momentum {
            MomentumMode::Dynamic => self.line_momentum_at(&state.delta, &state.v)?,
            MomentumMode::Frozen => self.frozen_line_momentum.clone(),
            MomentumMode::Off => vec![0.0; self.nodes.len()],
        };
        Ok(self
            .nodes
            .iter()
            .zip(ml)
            .enumerate()
            .map(|(k, (n, ml))| MomentumBudget::new(k, n.m_g, ml))
            .collect())
    }

    pub(crate) fn eval(&self, model: Model, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let n = self.nodes.len();
        let (delta, rest) = x.split_at(n);
        let (omega, rest) = rest.split_at(n);
        let (v, aux) = rest.split_at(n);
        let terms = self.terms(delta, v);
        let momentum: Vec<f64> = match model {
            Model::Classical => self.nodes.iter().map(|nd| nd.m_g).collect(),
            Model::PlaneWave => {
                let ml = match self.setup.momentum {
                    MomentumMode::Dynamic => self.line_momentum_at(delta, v)?,
                    MomentumMode::Frozen => self.frozen_line_momentum.clone(),
                    MomentumMode::Off => vec![0.0; n],
                };
                self.nodes
                    .iter()
                    .zip(ml)
                    .map(|(nd, ml)| nd.m_g + ml)
                    .collect()
            }
        };
        let dynamic_voltage =
            model == Model::PlaneWave && self.setup.voltage == VoltageMode::Dynamic;
        let mut has_gfl = false;
        for (k, node) in self.nodes.iter().enumerate() {
            let (p_damp, d_aux) = match node.damping {
                DampingSpec::Constant { d } => (d * omega[k], 0.0),
                DampingSpec::DroopWithDelay { r_d, tau_d } => {
                    let target = node.rating_pu * omega[k] / self.omega_s / r_d;
                    if tau_d > 0.0 {
                        (aux[k], (target - aux[k]) / tau_d)
                    } else {
                        (target, 0.0)
                    }
                }
                DampingSpec::None => (0.0, 0.0),
            };
            dx[3 * n + k] = d_aux;
            let mut p_avail = node.p_set - p_damp;
            if let Some(pm) = node.p_max {
                p_avail = p_avail.min(pm);
            }
            let imbalance = p_avail - terms.f[k];
            if node.tech == Technology::Gfl {
                has_gfl = true;
                dx[k] = omega[k] + self.setup.gfl_power_gain * (node.p_set - terms.f[k]);
            } else {
                dx[k] = omega[k];
                let m = momentum[k];
                dx[n + k] = if m > 0.0 {
                    self.omega_s * imbalance / m
                } else if model == Model::Classical || imbalance.abs() > MOMENTUM_GUARD {
                    return Err(Error::SingularMomentum { node: k, imbalance });
                } else {
                    0.0
                };
            }
            dx[2 * n + k] = if dynamic_voltage {
                (node.e_set - terms.q_drop[k] - v[k] - terms.g[k]) / node.t_v
            } else {
                0.0
            };
        }
        if has_gfl {
            // terminal-bus frequency seen by each tracking loop
            let du: Vec<C64> = (0..n)
                .map(|j| terms.u[j] * C64::new(dx[2 * n + j] / v[j], dx[j]))
                .collect();
            let rec = self.dn.recovery();
            for (k, node) in self.nodes.iter().enumerate() {
                if node.tech != Technology::Gfl {
                    continue;
                }
                let b = self.dn.machine_bus_index(k);
                let ub: C64 = (0..n).map(|j| rec[(b, j)] * terms.u[j]).sum();
                let dub: C64 = (0..n).map(|j| rec[(b, j)] * du[j]).sum();
                let w_term = (dub / ub).im;
                dx[n + k] = (w_term - omega[k]) / node.pll_tau;
            }
        }
        Ok(())
    }

    /// Applies a disturbance to the network at `state`.
    pub fn apply_event(&mut self, event: &Event, state: &SystemState) -> Result<()> {
        match *event {
            Event::LoadStep { bus, dp, dq, .. } => {
                let b = self
                    .dn
                    .network()
                    .bus_index(bus)
                    .ok_or_else(|| Error::Model(format!("load step at missing bus {bus}")))?;
                let v_pre = self.bus_voltages(state)[b].norm();
                if v_pre == 0.0 {
                    return Err(Error::SingularFold { bus });
                }
                self.dn
                    .add_bus_shunt(bus, C64::new(dp, -dq) / (v_pre * v_pre))
            }
            Event::ThreePhaseFault {
                branch,
                position,
                admittance,
                ..
            } => self.dn.apply_fault(
                branch,
                position,
                admittance.unwrap_or_else(default_fault_admittance),
            ),
            Event::ClearFault { .. } => self.dn.clear_fault(),
            Event::LineTrip { branch, .. } => self.dn.trip_branch(branch),
        }
    }

    /// `sum M_i / (2 omega_s) dw_i^2 - sum P_i d_i - sum_{i<j} V_i V_j B_ij
    /// cos(d_i - d_j)`, using the momenta in effect for the plane-wave model.
    /// Conserved along trajectories of lossless networks without damping and
    /// with constant voltages and momenta.
    pub fn conservative_energy(&self, state: &SystemState) -> Result<f64> {
        let budgets = self.budgets(state)?;
        let y = self.dn.admittance();
        let n = self.nodes.len();
        let mut e = 0.0;
        for k in 0..n {
            e += budgets[k].total / (2.0 * self.omega_s) * state.omega[k].powi(2);
            e -= self.nodes[k].p_set * state.delta[k];
            for j in k + 1..n {
                e -= state.v[k]
                    * state.v[j]
                    * y.entry(k, j).im
                    * (state.delta[k] - state.delta[j]).cos();
            }
        }
        Ok(e)
    }
}

fn rhs(system: &DynamicSystem, model: Model, state: &SystemState) -> Result<StateDerivative> {
    if state.len() != system.node_count() || state.aux.len() != state.len() {
        return Err(Error::Argument(
            "state dimension does not match the system".into(),
        ));
    }
    let x = state.to_flat();
    let mut dx = vec![0.0; x.len()];
    system.eval(model, &x, &mut dx)?;
    Ok(StateDerivative::from_flat(&dx))
}

/// Plane-wave right-hand side at `state`.
pub fn plane_wave_rhs(system: &DynamicSystem, state: &SystemState) -> Result<StateDerivative> {
    rhs(system, Model::PlaneWave, state)
}

/// Classical swing right-hand side: generator momentum only, voltages fixed.
pub fn classical_swing_rhs(system: &DynamicSystem, state: &SystemState) -> Result<StateDerivative> {
    rhs(system, Model::Classical, state)
}
