//! Per-unit network models, nodal admittance assembly, Newton power flow and
//! the reduced dynamic network consumed by the ODE models.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusKind {
    Slack,
    Generator,
    Load,
}

/// A network bus. Powers are per-unit on the system base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bus {
    pub id: usize,
    pub kind: BusKind,
    /// Voltage magnitude setpoint for slack and generator buses, flat-start
    /// guess for load buses.
    #[serde(default = "one")]
    pub voltage: f64,
    /// Scheduled active generation (generator buses only).
    #[serde(default)]
    pub gen_p: f64,
    #[serde(default)]
    pub load_p: f64,
    #[serde(default)]
    pub load_q: f64,
}

fn one() -> f64 {
    1.0
}

/// A pi-model branch. Impedances are per-unit on the system base, `b` is the
/// total line-charging susceptance and `tap` an off-nominal ratio on the
/// `from` side (1.0 for lines).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Branch {
    pub id: usize,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "one")]
    pub tap: f64,
    /// Physical length in meters; zero for transformers.
    #[serde(default)]
    pub length_m: f64,
    /// Thermal rating, per-unit apparent power.
    #[serde(default)]
    pub rating: f64,
}

impl Branch {
    pub fn series_admittance(&self) -> C64 {
        C64::new(self.r, self.x).inv()
    }

    /// Pi-model stamp `[[y_ff, y_ft], [y_tf, y_tt]]`.
    pub fn stamp(&self) -> [[C64; 2]; 2] {
        let y = self.series_admittance();
        let half_b = C64::new(0.0, self.b / 2.0);
        let t = self.tap;
        [[(y + half_b) / (t * t), -y / t], [-y / t, y + half_b]]
    }

    /// Complex power leaving each end, `(S_from, S_to)`.
    pub fn end_powers(&self, v_from: C64, v_to: C64) -> (C64, C64) {
        let [[yff, yft], [ytf, ytt]] = self.stamp();
        let i_from = yff * v_from + yft * v_to;
        let i_to = ytf * v_from + ytt * v_to;
        (v_from * i_from.conj(), v_to * i_to.conj())
    }
}

/// Line length of a lossless overhead line whose wave velocity is the speed
/// of light: `l = c * sqrt(X * B) / omega` with per-unit `X` and total `B`.
/// Returns zero when `B` is zero (transformers, equivalents).
pub fn electrical_length(x: f64, b: f64, frequency_hz: f64) -> f64 {
    if b <= 0.0 || x <= 0.0 {
        return 0.0;
    }
    SPEED_OF_LIGHT * (x * b).sqrt() / (2.0 * PI * frequency_hz)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub base_mva: f64,
    pub frequency_hz: f64,
    #[serde(skip)]
    index: HashMap<usize, usize>,
}

impl PartialEq for PowerNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.buses == other.buses
            && self.branches == other.branches
            && self.base_mva == other.base_mva
            && self.frequency_hz == other.frequency_hz
    }
}

impl PowerNetwork {
    pub fn new(
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        base_mva: f64,
        frequency_hz: f64,
    ) -> Result<Self> {
        if !(base_mva > 0.0 && base_mva.is_finite()) {
            return Err(Error::Model(format!(
                "base_mva must be positive, got {base_mva}"
            )));
        }
        if !(frequency_hz > 0.0 && frequency_hz.is_finite()) {
            return Err(Error::Model(format!(
                "nominal frequency must be positive, got {frequency_hz}"
            )));
        }
        if frequency_hz != 50.0 && frequency_hz != 60.0 {
            warn!("non-standard nominal frequency {frequency_hz} Hz");
        }
        let mut index = HashMap::with_capacity(buses.len());
        for (k, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, k).is_some() {
                return Err(Error::Model(format!("duplicate bus id {}", bus.id)));
            }
            if !(bus.voltage > 0.0 && bus.voltage.is_finite()) {
                return Err(Error::Model(format!(
                    "bus {}: voltage magnitude must be positive",
                    bus.id
                )));
            }
            if !(bus.load_p.is_finite() && bus.load_q.is_finite() && bus.gen_p.is_finite()) {
                return Err(Error::Model(format!("bus {}: non-finite power", bus.id)));
            }
        }
        let slack = buses.iter().filter(|b| b.kind == BusKind::Slack).count();
        if slack != 1 {
            return Err(Error::Model(format!(
                "exactly one slack bus required, found {slack}"
            )));
        }
        for br in &branches {
            for end in [br.from, br.to] {
                if !index.contains_key(&end) {
                    return Err(Error::Model(format!(
                        "branch {} references missing bus {end}",
                        br.id
                    )));
                }
            }
            if br.from == br.to {
                return Err(Error::Model(format!("branch {} is a self-loop", br.id)));
            }
            if !(br.length_m >= 0.0) {
                return Err(Error::Model(format!("branch {}: negative length", br.id)));
            }
            if !(br.tap > 0.0) {
                return Err(Error::Model(format!(
                    "branch {}: tap must be positive",
                    br.id
                )));
            }
            if br.x == 0.0 || !br.x.is_finite() || !br.r.is_finite() {
                return Err(Error::DegenerateBranch { branch: br.id });
            }
        }
        let net = PowerNetwork {
            buses,
            branches,
            base_mva,
            frequency_hz,
            index,
        };
        let active = vec![true; net.branches.len()];
        if let Some(bus) = net.first_unreachable(&active) {
            return Err(Error::Disconnected { bus });
        }
        Ok(net)
    }

    pub fn omega_s(&self) -> f64 {
        2.0 * PI * self.frequency_hz
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_index(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub(crate) fn bus_index_or_err(&self, id: usize) -> Result<usize> {
        self.bus_index(id)
            .ok_or_else(|| Error::Model(format!("bus {id} does not exist")))
    }

    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated on construction")
    }

    pub fn branch_index(&self, id: usize) -> Option<usize> {
        self.branches.iter().position(|b| b.id == id)
    }

    /// First bus (by id) not reachable from the slack over active branches.
    pub(crate) fn first_unreachable(&self, active: &[bool]) -> Option<usize> {
        let n = self.buses.len();
        let mut adj = vec![Vec::new(); n];
        for (br, &on) in self.branches.iter().zip(active) {
            if on {
                let (f, t) = (self.index[&br.from], self.index[&br.to]);
                adj[f].push(t);
                adj[t].push(f);
            }
        }
        let mut seen = vec![false; n];
        let start = self.slack_index();
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, &s)| !s)
            .map(|(k, _)| self.buses[k].id)
            .min()
    }
}

/// Complex nodal admittance matrix with polar accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmittanceMatrix {
    matrix: DMatrix<C64>,
}

impl AdmittanceMatrix {
    pub fn from_matrix(matrix: DMatrix<C64>) -> Self {
        assert!(matrix.is_square(), "admittance matrix must be square");
        AdmittanceMatrix { matrix }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.matrix[(i, j)]
    }

    /// `Y_ij = |Y_ij|`.
    pub fn magnitude(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)].norm()
    }

    /// `alpha_ij = arg(Y_ij)` in radians.
    pub fn angle(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)].arg()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    /// Nodal current injections `I = Y U`.
    pub fn currents(&self, voltages: &[C64]) -> Vec<C64> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)] * voltages[j]).sum())
            .collect()
    }
}

fn stamp_branch(y: &mut DMatrix<C64>, f: usize, t: usize, stamp: &[[C64; 2]; 2], sign: f64) {
    y[(f, f)] += stamp[0][0] * sign;
    y[(f, t)] += stamp[0][1] * sign;
    y[(t, f)] += stamp[1][0] * sign;
    y[(t, t)] += stamp[1][1] * sign;
}

/// Standard nodal assembly: `-1/(R+jX)` off-diagonal, diagonals sum the
/// incident series admittances plus `jB/2` per branch end.
pub fn build_admittance_matrix(network: &PowerNetwork) -> Result<AdmittanceMatrix> {
    let n = network.bus_count();
    let mut y = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for br in &network.branches {
        if br.r == 0.0 && br.x == 0.0 {
            return Err(Error::DegenerateBranch { branch: br.id });
        }
        let f = network.bus_index_or_err(br.from)?;
        let t = network.bus_index_or_err(br.to)?;
        stamp_branch(&mut y, f, t, &br.stamp(), 1.0);
    }
    if let Some(bus) = network.first_unreachable(&vec![true; network.branches.len()]) {
        return Err(Error::Disconnected { bus });
    }
    Ok(AdmittanceMatrix::from_matrix(y))
}

/// Converged bus state. Vectors are indexed by bus position in the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub v: Vec<f64>,
    pub delta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn phasor(&self, k: usize) -> C64 {
        C64::from_polar(self.v[k], self.delta[k])
    }

    pub fn phasors(&self) -> Vec<C64> {
        (0..self.v.len()).map(|k| self.phasor(k)).collect()
    }
}

pub const DEFAULT_PF_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_PF_MAX_ITERATIONS: usize = 20;

fn injections(y: &DMatrix<C64>, v: &[f64], th: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = v.len();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            let yik = y[(i, k)];
            if yik.re == 0.0 && yik.im == 0.0 {
                continue;
            }
            let (s, c) = (th[i] - th[k]).sin_cos();
            p[i] += v[i] * v[k] * (yik.re * c + yik.im * s);
            q[i] += v[i] * v[k] * (yik.re * s - yik.im * c);
        }
    }
    (p, q)
}

/// Newton-Raphson power flow in polar coordinates from a flat start.
pub fn solve_power_flow(
    network: &PowerNetwork,
    tolerance: f64,
    max_iterations: usize,
) -> Result<PowerFlowSolution> {
    solve_power_flow_from(network, tolerance, max_iterations, None)
}

/// As [`solve_power_flow`] with an optional `(V, delta)` warm start.
pub fn solve_power_flow_from(
    network: &PowerNetwork,
    tolerance: f64,
    max_iterations: usize,
    warm_start: Option<(&[f64], &[f64])>,
) -> Result<PowerFlowSolution> {
    if !(tolerance > 0.0) {
        return Err(Error::Argument(
            "power-flow tolerance must be positive".into(),
        ));
    }
    let ybus = build_admittance_matrix(network)?;
    let y = ybus.as_matrix();
    let n = network.bus_count();

    let mut v: Vec<f64> = network
        .buses
        .iter()
        .map(|b| match b.kind {
            BusKind::Load => 1.0,
            _ => b.voltage,
        })
        .collect();
    let mut th = vec![0.0; n];
    if let Some((v0, th0)) = warm_start {
        if v0.len() != n || th0.len() != n {
            return Err(Error::Argument("warm start has wrong length".into()));
        }
        for (k, b) in network.buses.iter().enumerate() {
            if b.kind == BusKind::Load {
                v[k] = v0[k];
            }
            if b.kind != BusKind::Slack {
                th[k] = th0[k];
            }
        }
    }

    let p_spec: Vec<f64> = network.buses.iter().map(|b| b.gen_p - b.load_p).collect();
    let q_spec: Vec<f64> = network.buses.iter().map(|b| -b.load_q).collect();
    let ang: Vec<usize> = (0..n)
        .filter(|&k| network.buses[k].kind != BusKind::Slack)
        .collect();
    let mag: Vec<usize> = (0..n)
        .filter(|&k| network.buses[k].kind == BusKind::Load)
        .collect();
    let na = ang.len();
    let dim = na + mag.len();

    let mismatch = |v: &[f64], th: &[f64]| -> (DVector<f64>, f64, Vec<f64>, Vec<f64>) {
        let (p, q) = injections(y, v, th);
        let mut f = DVector::zeros(dim);
        for (r, &k) in ang.iter().enumerate() {
            f[r] = p_spec[k] - p[k];
        }
        for (r, &k) in mag.iter().enumerate() {
            f[na + r] = q_spec[k] - q[k];
        }
        let worst = f.amax();
        (f, worst, p, q)
    };

    let mut iterations = 0;
    loop {
        let (f, worst, p, q) = mismatch(&v, &th);
        if !worst.is_finite() {
            return Err(Error::Divergence {
                iterations,
                max_mismatch: worst,
            });
        }
        if worst <= tolerance {
            return Ok(PowerFlowSolution {
                v,
                delta: th,
                p,
                q,
                iterations,
                max_mismatch: worst,
            });
        }
        if iterations >= max_iterations {
            return Err(Error::Divergence {
                iterations,
                max_mismatch: worst,
            });
        }

        let mut jac = DMatrix::<f64>::zeros(dim, dim);
        // rows: dP (ang), dQ (mag); columns: dtheta (ang), dV (mag)
        let mut col_of_ang = vec![usize::MAX; n];
        for (c, &k) in ang.iter().enumerate() {
            col_of_ang[k] = c;
        }
        let mut col_of_mag = vec![usize::MAX; n];
        for (c, &k) in mag.iter().enumerate() {
            col_of_mag[k] = na + c;
        }
        let mut fill = |row: usize, i: usize, want_p: bool| {
            for k in 0..n {
                let yik = y[(i, k)];
                let (g, b) = (yik.re, yik.im);
                let (s, c) = (th[i] - th[k]).sin_cos();
                let (dth, dv) = if k == i {
                    if want_p {
                        (-q[i] - b * v[i] * v[i], p[i] / v[i] + g * v[i])
                    } else {
                        (p[i] - g * v[i] * v[i], q[i] / v[i] - b * v[i])
                    }
                } else if want_p {
                    (v[i] * v[k] * (g * s - b * c), v[i] * (g * c + b * s))
                } else {
                    (-v[i] * v[k] * (g * c + b * s), v[i] * (g * s - b * c))
                };
                if col_of_ang[k] != usize::MAX {
                    jac[(row, col_of_ang[k])] = dth;
                }
                if col_of_mag[k] != usize::MAX {
                    jac[(row, col_of_mag[k])] = dv;
                }
            }
        };
        for (r, &i) in ang.iter().enumerate() {
            fill(r, i, true);
        }
        for (r, &i) in mag.iter().enumerate() {
            fill(na + r, i, false);
        }

        let dx = jac.lu().solve(&f).ok_or(Error::Divergence {
            iterations,
            max_mismatch: worst,
        })?;
        for (r, &k) in ang.iter().enumerate() {
            th[k] += dx[r];
        }
        for (r, &k) in mag.iter().enumerate() {
            v[k] += dx[na + r];
        }
        iterations += 1;
    }
}

/// Eliminates every node not in `keep`. Returns the reduced matrix over
/// `keep` (in the given order) and the recovery matrix mapping kept-node
/// voltages to eliminated-node voltages, `U_elim = K U_keep`.
pub fn kron_reduce(y: &DMatrix<C64>, keep: &[usize]) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = y.nrows();
    let mut is_kept = vec![false; n];
    for &k in keep {
        is_kept[k] = true;
    }
    let elim: Vec<usize> = (0..n).filter(|&k| !is_kept[k]).collect();
    let (nk, ne) = (keep.len(), elim.len());
    let pick = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |r, c| y[(rows[r], cols[c])])
    };
    let ykk = pick(keep, keep);
    if ne == 0 {
        return Ok((ykk, DMatrix::zeros(0, nk)));
    }
    let yke = pick(keep, &elim);
    let yek = pick(&elim, keep);
    let yee = pick(&elim, &elim);
    let lu = yee.lu();
    let solved = lu
        .solve(&yek)
        .ok_or_else(|| Error::Model("Kron reduction: eliminated block is singular".into()))?;
    let reduced = ykk - yke * &solved;
    Ok((reduced, -solved))
}

/// Connection of a machine's internal node to its terminal bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineTerminal {
    pub bus: usize,
    pub impedance: C64,
}

/// What a dynamic node stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeRef {
    /// Internal node of the k-th machine.
    Machine(usize),
    /// Network bus at the given bus position.
    Bus(usize),
}

#[derive(Debug, Clone)]
struct FaultState {
    branch: usize,
    position: f64,
    admittance: C64,
    /// Fault-node voltage as a combination of the branch end voltages.
    coeff_from: C64,
    coeff_to: C64,
    saved: Box<Snapshot>,
}

#[derive(Debug, Clone)]
struct Snapshot {
    full: DMatrix<C64>,
    nodes: AdmittanceMatrix,
    recovery: DMatrix<C64>,
    weights: DMatrix<f64>,
}

/// The network as seen by the dynamic models: loads folded into constant
/// admittances, machine internal nodes appended, optionally Kron-reduced.
#[derive(Debug, Clone)]
pub struct DynamicNetwork {
    network: PowerNetwork,
    machines: Vec<MachineTerminal>,
    machine_bus_index: Vec<usize>,
    reduced: bool,
    /// Augmented bus + internal-node admittance matrix.
    full: DMatrix<C64>,
    nodes: AdmittanceMatrix,
    node_refs: Vec<NodeRef>,
    /// Bus voltages from dynamic-node voltages.
    recovery: DMatrix<C64>,
    /// Row-normalized |recovery|: share of each bus attributed to each node.
    weights: DMatrix<f64>,
    active: Vec<bool>,
    fault: Option<FaultState>,
}

impl PartialEq for DynamicNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.full == other.full
            && self.nodes == other.nodes
            && self.recovery == other.recovery
            && self.active == other.active
    }
}

/// Branch power flows at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchFlow {
    pub branch: usize,
    pub from_power: C64,
    pub to_power: C64,
}

impl BranchFlow {
    /// `(sending bus id, receiving bus id, apparent power at the sending
    /// end)`. The sending end is the end with the larger active-power
    /// outflow.
    pub fn sending(&self, branch: &Branch) -> (usize, usize, C64) {
        if self.from_power.re >= self.to_power.re {
            (branch.from, branch.to, self.from_power)
        } else {
            (branch.to, branch.from, self.to_power)
        }
    }
}

/// Folds loads as `(P - jQ)/V^2` shunts at their solved voltage, appends one
/// internal node per machine behind its source impedance and, when `reduce`
/// is set, eliminates every network bus so that only internal nodes remain.
pub fn fold_loads_and_augment(
    network: &PowerNetwork,
    solution: &PowerFlowSolution,
    machines: &[MachineTerminal],
    reduce: bool,
) -> Result<DynamicNetwork> {
    let nb = network.bus_count();
    let ng = machines.len();
    let ybus = build_admittance_matrix(network)?;
    let mut full = DMatrix::from_element(nb + ng, nb + ng, C64::new(0.0, 0.0));
    full.view_mut((0, 0), (nb, nb)).copy_from(ybus.as_matrix());
    for (k, bus) in network.buses.iter().enumerate() {
        if bus.load_p != 0.0 || bus.load_q != 0.0 {
            let v = solution.v[k];
            if v == 0.0 {
                return Err(Error::SingularFold { bus: bus.id });
            }
            full[(k, k)] += C64::new(bus.load_p, -bus.load_q) / (v * v);
        }
    }
    let mut machine_bus_index = Vec::with_capacity(ng);
    for (m, mt) in machines.iter().enumerate() {
        let b = network.bus_index_or_err(mt.bus)?;
        if mt.impedance.norm() == 0.0 {
            return Err(Error::Model(format!(
                "machine at bus {} has zero source impedance",
                mt.bus
            )));
        }
        let y = mt.impedance.inv();
        let g = nb + m;
        full[(b, b)] += y;
        full[(g, g)] += y;
        full[(b, g)] -= y;
        full[(g, b)] -= y;
        machine_bus_index.push(b);
    }
    let mut dn = DynamicNetwork {
        network: network.clone(),
        machines: machines.to_vec(),
        machine_bus_index,
        reduced: reduce,
        full,
        nodes: AdmittanceMatrix::from_matrix(DMatrix::zeros(0, 0)),
        node_refs: Vec::new(),
        recovery: DMatrix::zeros(0, 0),
        weights: DMatrix::zeros(0, 0),
        active: vec![true; network.branches.len()],
        fault: None,
    };
    dn.rebuild()?;
    Ok(dn)
}

impl DynamicNetwork {
    fn rebuild(&mut self) -> Result<()> {
        let nb = self.network.bus_count();
        let ng = self.machines.len();
        if self.reduced {
            let keep: Vec<usize> = (nb..nb + ng).collect();
            let (red, rec) = kron_reduce(&self.full, &keep)?;
            self.nodes = AdmittanceMatrix::from_matrix(red);
            self.recovery = rec;
            self.node_refs = (0..ng).map(NodeRef::Machine).collect();
        } else {
            self.nodes = AdmittanceMatrix::from_matrix(self.full.clone());
            let mut rec = DMatrix::from_element(nb, nb + ng, C64::new(0.0, 0.0));
            for k in 0..nb {
                rec[(k, k)] = C64::new(1.0, 0.0);
            }
            self.recovery = rec;
            self.node_refs = (0..nb)
                .map(NodeRef::Bus)
                .chain((0..ng).map(NodeRef::Machine))
                .collect();
        }
        let n = self.nodes.n();
        let mut w = DMatrix::zeros(nb, n);
        for b in 0..nb {
            let row: f64 = (0..n).map(|j| self.recovery[(b, j)].norm()).sum();
            if row > 0.0 {
                for j in 0..n {
                    w[(b, j)] = self.recovery[(b, j)].norm() / row;
                }
            }
        }
        self.weights = w;
        Ok(())
    }

    pub fn network(&self) -> &PowerNetwork {
        &self.network
    }

    pub fn machines(&self) -> &[MachineTerminal] {
        &self.machines
    }

    pub fn is_reduced(&self) -> bool {
        self.reduced
    }

    /// Admittance matrix over the dynamic nodes.
    pub fn admittance(&self) -> &AdmittanceMatrix {
        &self.nodes
    }

    /// Augmented (bus + internal node) admittance matrix.
    pub fn full_admittance(&self) -> &DMatrix<C64> {
        &self.full
    }

    pub fn node_refs(&self) -> &[NodeRef] {
        &self.node_refs
    }

    pub fn node_count(&self) -> usize {
        self.nodes.n()
    }

    pub fn recovery(&self) -> &DMatrix<C64> {
        &self.recovery
    }

    /// Attribution weights from buses (rows) to dynamic nodes (columns).
    pub fn bus_weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Dynamic node carrying machine `m`.
    pub fn machine_node(&self, m: usize) -> usize {
        if self.reduced {
            m
        } else {
            self.network.bus_count() + m
        }
    }

    pub fn machine_bus_index(&self, m: usize) -> usize {
        self.machine_bus_index[m]
    }

    pub fn branch_active(&self, k: usize) -> bool {
        self.active[k]
    }

    pub fn fault_active(&self) -> bool {
        self.fault.is_some()
    }

    /// Bus voltage phasors from dynamic-node phasors.
    pub fn bus_voltages(&self, node_voltages: &[C64]) -> Vec<C64> {
        let nb = self.network.bus_count();
        let n = self.nodes.n();
        (0..nb)
            .map(|b| {
                (0..n)
                    .map(|j| self.recovery[(b, j)] * node_voltages[j])
                    .sum()
            })
            .collect()
    }

    /// Power at both ends of every branch; zero for tripped branches. A
    /// faulted branch reports the flows into its two segments.
    pub fn branch_flows(&self, bus_voltages: &[C64]) -> Vec<BranchFlow> {
        let zero = C64::new(0.0, 0.0);
        self.network
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                if !self.active[k] {
                    return BranchFlow {
                        branch: br.id,
                        from_power: zero,
                        to_power: zero,
                    };
                }
                let f = self.network.index[&br.from];
                let t = self.network.index[&br.to];
                let (vf, vt) = (bus_voltages[f], bus_voltages[t]);
                if let Some(fs) = self.fault.as_ref().filter(|fs| fs.branch == k) {
                    if fs.position > 0.0 && fs.position < 1.0 {
                        let vfault = fs.coeff_from * vf + fs.coeff_to * vt;
                        let (a, b) = split_branch(br, fs.position);
                        let (sf, _) = a.end_powers(vf, vfault);
                        let (_, st) = b.end_powers(vfault, vt);
                        return BranchFlow {
                            branch: br.id,
                            from_power: sf,
                            to_power: st,
                        };
                    }
                }
                let (sf, st) = br.end_powers(vf, vt);
                BranchFlow {
                    branch: br.id,
                    from_power: sf,
                    to_power: st,
                }
            })
            .collect()
    }

    /// Adds a constant shunt admittance at a bus.
    pub fn add_bus_shunt(&mut self, bus_id: usize, y: C64) -> Result<()> {
        let b = self.network.bus_index_or_err(bus_id)?;
        self.full[(b, b)] += y;
        self.rebuild()
    }

    /// Removes a branch from service.
    pub fn trip_branch(&mut self, branch_id: usize) -> Result<()> {
        let k = self
            .network
            .branch_index(branch_id)
            .ok_or_else(|| Error::Model(format!("branch {branch_id} does not exist")))?;
        if !self.active[k] {
            return Err(Error::Protocol(format!(
                "branch {branch_id} already tripped"
            )));
        }
        let mut active = self.active.clone();
        active[k] = false;
        if let Some(bus) = self.network.first_unreachable(&active) {
            return Err(Error::Model(format!(
                "tripping branch {branch_id} isolates bus {bus}"
            )));
        }
        let br = &self.network.branches[k];
        let f = self.network.index[&br.from];
        let t = self.network.index[&br.to];
        stamp_branch(&mut self.full, f, t, &br.stamp(), -1.0);
        self.active = active;
        self.rebuild()
    }

    /// Applies a shunt fault of admittance `y_f` at fractional `position`
    /// along a branch (0 = from bus, 1 = to bus).
    pub fn apply_fault(&mut self, branch_id: usize, position: f64, y_f: C64) -> Result<()> {
        if self.fault.is_some() {
            return Err(Error::Protocol("a fault is already active".into()));
        }
        if !(0.0..=1.0).contains(&position) {
            return Err(Error::Argument(format!(
                "fault position must lie in [0, 1], got {position}"
            )));
        }
        let k = self
            .network
            .branch_index(branch_id)
            .ok_or_else(|| Error::Model(format!("branch {branch_id} does not exist")))?;
        if !self.active[k] {
            return Err(Error::Protocol(format!(
                "branch {branch_id} is out of service"
            )));
        }
        let saved = Box::new(Snapshot {
            full: self.full.clone(),
            nodes: self.nodes.clone(),
            recovery: self.recovery.clone(),
            weights: self.weights.clone(),
        });
        let br = self.network.branches[k].clone();
        let f = self.network.index[&br.from];
        let t = self.network.index[&br.to];
        let zero = C64::new(0.0, 0.0);
        let (coeff_from, coeff_to) = if position == 0.0 {
            self.full[(f, f)] += y_f;
            (C64::new(1.0, 0.0), zero)
        } else if position == 1.0 {
            self.full[(t, t)] += y_f;
            (zero, C64::new(1.0, 0.0))
        } else {
            if br.tap != 1.0 {
                return Err(Error::Argument(format!(
                    "interior faults are not supported on tapped branch {branch_id}"
                )));
            }
            stamp_branch(&mut self.full, f, t, &br.stamp(), -1.0);
            let (a, b) = split_branch(&br, position);
            let sa = a.stamp();
            let sb = b.stamp();
            // fault node F eliminated in closed form
            let yff = sa[1][1] + sb[0][0] + y_f;
            let (yfa, yfb) = (sa[1][0], sb[0][1]);
            let (yaf, ybf) = (sa[0][1], sb[1][0]);
            self.full[(f, f)] += sa[0][0] - yaf * yfa / yff;
            self.full[(t, t)] += sb[1][1] - ybf * yfb / yff;
            self.full[(f, t)] += -yaf * yfb / yff;
            self.full[(t, f)] += -ybf * yfa / yff;
            (-yfa / yff, -yfb / yff)
        };
        self.fault = Some(FaultState {
            branch: k,
            position,
            admittance: y_f,
            coeff_from,
            coeff_to,
            saved,
        });
        self.rebuild()
    }

    /// Restores the stored pre-fault matrices exactly.
    pub fn clear_fault(&mut self) -> Result<()> {
        let fs = self
            .fault
            .take()
            .ok_or_else(|| Error::Protocol("clear requested with no active fault".into()))?;
        let s = *fs.saved;
        self.full = s.full;
        self.nodes = s.nodes;
        self.recovery = s.recovery;
        self.weights = s.weights;
        let _ = fs.admittance;
        Ok(())
    }
}

fn split_branch(br: &Branch, position: f64) -> (Branch, Branch) {
    let mut a = br.clone();
    a.r *= position;
    a.x *= position;
    a.b *= position;
    a.length_m *= position;
    let mut b = br.clone();
    let rest = 1.0 - position;
    b.r *= rest;
    b.x *= rest;
    b.b *= rest;
    b.length_m *= rest;
    b.tap = 1.0;
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bus(id: usize, kind: BusKind) -> Bus {
        Bus {
            id,
            kind,
            voltage: 1.0,
            gen_p: 0.0,
            load_p: 0.0,
            load_q: 0.0,
        }
    }

    fn line(id: usize, from: usize, to: usize, r: f64, x: f64, b: f64) -> Branch {
        Branch {
            id,
            from,
            to,
            r,
            x,
            b,
            tap: 1.0,
            length_m: 0.0,
            rating: 1.0,
        }
    }

    fn two_bus(b: f64) -> PowerNetwork {
        PowerNetwork::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(1, 1, 2, 0.0, 0.1, b)],
            100.0,
            60.0,
        )
        .unwrap()
    }

    #[test]
    fn two_bus_admittance_closed_form() {
        let y = build_admittance_matrix(&two_bus(0.0)).unwrap();
        assert_abs_diff_eq!(y.entry(0, 0).im, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.entry(1, 1).im, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.entry(0, 1).im, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.entry(1, 0).re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.magnitude(0, 1), 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.angle(0, 1), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn shunt_split_adds_half_per_end() {
        let y0 = build_admittance_matrix(&two_bus(0.0)).unwrap();
        let y1 = build_admittance_matrix(&two_bus(0.02)).unwrap();
        for k in 0..2 {
            let d = y1.entry(k, k) - y0.entry(k, k);
            assert_abs_diff_eq!(d.im, 0.01, epsilon = 1e-15);
            assert_abs_diff_eq!(d.re, 0.0, epsilon = 1e-15);
        }
        assert_eq!(y1.entry(0, 1), y0.entry(0, 1));
    }

    #[test]
    fn zero_reactance_is_degenerate() {
        let err = PowerNetwork::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Load)],
            vec![line(7, 1, 2, 0.01, 0.0, 0.0)],
            100.0,
            60.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateBranch { branch: 7 }));
    }

    #[test]
    fn disconnected_network_rejected() {
        let err = PowerNetwork::new(
            vec![
                bus(1, BusKind::Slack),
                bus(2, BusKind::Load),
                bus(3, BusKind::Load),
            ],
            vec![line(1, 1, 2, 0.0, 0.1, 0.0)],
            100.0,
            60.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Disconnected { bus: 3 }));
    }

    #[test]
    fn two_slack_buses_rejected() {
        let err = PowerNetwork::new(
            vec![bus(1, BusKind::Slack), bus(2, BusKind::Slack)],
            vec![line(1, 1, 2, 0.0, 0.1, 0.0)],
            100.0,
            60.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Model(_)));
    }

    #[test]
    fn flat_network_needs_no_iterations() {
        let net = PowerNetwork::new(
            vec![
                bus(1, BusKind::Slack),
                bus(2, BusKind::Generator),
                bus(3, BusKind::Load),
            ],
            vec![line(1, 1, 2, 0.01, 0.1, 0.0), line(2, 2, 3, 0.02, 0.2, 0.0)],
            100.0,
            60.0,
        )
        .unwrap();
        let sol = solve_power_flow(&net, 1e-10, 20).unwrap();
        assert!(sol.iterations <= 1);
        for k in 0..3 {
            assert_abs_diff_eq!(sol.v[k], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(sol.delta[k], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_convergence_reports_mismatch() {
        let mut net = two_bus(0.0);
        net.buses[1].load_p = 50.0;
        match solve_power_flow(&net, 1e-10, 5) {
            Err(Error::Divergence { max_mismatch, .. }) => assert!(max_mismatch > 1e-10),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn kron_three_bus_chain_is_series_combination() {
        let net = PowerNetwork::new(
            vec![
                bus(1, BusKind::Slack),
                bus(2, BusKind::Load),
                bus(3, BusKind::Load),
            ],
            vec![
                line(1, 1, 2, 0.01, 0.1, 0.0),
                line(2, 2, 3, 0.03, 0.25, 0.0),
            ],
            100.0,
            60.0,
        )
        .unwrap();
        let y = build_admittance_matrix(&net).unwrap();
        let (red, _) = kron_reduce(y.as_matrix(), &[0, 2]).unwrap();
        let z = C64::new(0.01, 0.1) + C64::new(0.03, 0.25);
        let ys = z.inv();
        let expect = [[ys, -ys], [-ys, ys]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((red[(i, j)] - expect[i][j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fold_zero_loads_only_appends_internal_nodes() {
        let net = two_bus(0.0);
        let sol = solve_power_flow(&net, 1e-10, 20).unwrap();
        let dn = fold_loads_and_augment(
            &net,
            &sol,
            &[MachineTerminal {
                bus: 1,
                impedance: C64::new(0.0, 0.2),
            }],
            false,
        )
        .unwrap();
        let y = build_admittance_matrix(&net).unwrap();
        let full = dn.full_admittance();
        // bus block differs only by the machine stamp at bus 1
        assert_eq!(full[(1, 1)], y.entry(1, 1));
        assert_eq!(full[(0, 1)], y.entry(0, 1));
        assert!((full[(0, 0)] - y.entry(0, 0) - C64::new(0.0, -5.0)).norm() < 1e-12);
        assert_eq!(dn.node_count(), 3);
    }

    #[test]
    fn fold_load_formula_instance() {
        let mut net = two_bus(0.0);
        net.buses[1].load_p = 1.0;
        net.buses[1].load_q = 0.5;
        let y = build_admittance_matrix(&net).unwrap();
        let sol = PowerFlowSolution {
            v: vec![1.0, 1.0],
            delta: vec![0.0, 0.0],
            p: vec![0.0; 2],
            q: vec![0.0; 2],
            iterations: 0,
            max_mismatch: 0.0,
        };
        let dn = fold_loads_and_augment(&net, &sol, &[], false).unwrap();
        let d = dn.full_admittance()[(1, 1)] - y.entry(1, 1);
        assert!((d - C64::new(1.0, -0.5)).norm() < 1e-15);
    }

    #[test]
    fn fold_rejects_zero_voltage() {
        let mut net = two_bus(0.0);
        net.buses[1].load_p = 1.0;
        let sol = PowerFlowSolution {
            v: vec![1.0, 0.0],
            delta: vec![0.0, 0.0],
            p: vec![0.0; 2],
            q: vec![0.0; 2],
            iterations: 0,
            max_mismatch: 0.0,
        };
        assert!(matches!(
            fold_loads_and_augment(&net, &sol, &[], false),
            Err(Error::SingularFold { bus: 2 })
        ));
    }

    #[test]
    fn electrical_length_of_typical_230kv_line() {
        // 100 km-class line: X = 0.085 pu, B = 0.176 pu at 60 Hz
        let l = electrical_length(0.085, 0.176, 60.0);
        assert!((l - 97_335.0).abs() < 100.0, "{l}");
        assert_eq!(electrical_length(0.05, 0.0, 60.0), 0.0);
    }
}
