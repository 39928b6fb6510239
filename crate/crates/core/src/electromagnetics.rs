//! Circuit-reduced electromagnetic quantities of transmission lines: stored
//! field energy, power-flow terms, line momentum, nodal momentum budgets and
//! polarization of the transferred power.
//!
//! Momenta are expressed in seconds, the unit of `2 H S / S_base`, so that a
//! nodal budget adds directly to generator momentum in the swing equation.

use serde::{Deserialize, Serialize};

use crate::network::{Branch, BranchFlow, DynamicNetwork};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Field energy of one branch. Stored terms are instantaneous, `dissipated`
/// accumulates across calls. Energies are per-unit power times seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub magnetic: f64,
    pub electric: f64,
    pub dissipated: f64,
    pub total: f64,
}

/// Updates the energy of `branch` carrying series current `current` with
/// voltage `voltage` across its shunt capacitance.
///
/// `L = X / omega_s` and `C = B / omega_s`. Magnitudes are reported; the
/// minus sign of the field-energy expression marks energy leaving the volume
/// and is not applied to storage.
pub fn line_field_energy(
    branch: &Branch,
    current: C64,
    voltage: C64,
    dt: f64,
    omega_s: f64,
    accumulator: EnergyBreakdown,
) -> Result<EnergyBreakdown> {
    if !(dt >= 0.0) {
        return Err(Error::Argument(format!(
            "dt must be non-negative, got {dt}"
        )));
    }
    let l = branch.x / omega_s;
    let c = branch.b / omega_s;
    let magnetic = 0.5 * l * current.norm_sqr();
    let electric = 0.5 * c * voltage.norm_sqr();
    let dissipated = accumulator.dissipated + branch.r * current.norm_sqr() * dt;
    Ok(EnergyBreakdown {
        magnetic,
        electric,
        dissipated,
        total: magnetic + electric + dissipated,
    })
}

/// The two terms of the line power-flow expression, seen from node `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerms {
    /// `X |Y|^2 V_i (V_j e^{j(d_i - d_j)} - V_i)`: the surface term with
    /// `L d(delta)/dt = X` in the quasi-steady state.
    pub delivered_complex: C64,
    /// Active power delivered from `i` towards `j`, `Im(delivered_complex)`.
    pub delivered: f64,
    /// Ohmic loss `R |Y|^2 |V_i e^{j d_i} - V_j e^{j d_j}|^2`, never negative.
    pub loss: f64,
    /// Phasor form `conj(Y) V_i (V_j e^{j(d_i - d_j)} - V_i)`.
    pub phasor: C64,
}

pub fn line_power_terms(branch: &Branch, vi: f64, di: f64, vj: f64, dj: f64) -> Result<PowerTerms> {
    if !(vi.is_finite() && vj.is_finite() && di.is_finite() && dj.is_finite()) {
        return Err(Error::Argument("non-finite voltage or angle".into()));
    }
    let y = branch.series_admittance();
    let y2 = y.norm_sqr();
    let bracket = vi * (C64::from_polar(vj, di - dj) - vi);
    let delivered_complex = bracket * (branch.x * y2);
    let drop = C64::from_polar(vi, di) - C64::from_polar(vj, dj);
    Ok(PowerTerms {
        delivered_complex,
        delivered: delivered_complex.im,
        loss: branch.r * y2 * drop.norm_sqr(),
        phasor: y.conj() * bracket,
    })
}

/// Momentum of the field carried by one line in one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMomentum {
    pub line: usize,
    /// `(sending node, receiving node)`.
    pub direction: (usize, usize),
    /// SI momentum, kg m/s.
    pub physical: f64,
    /// Swing-equation momentum, seconds.
    pub per_unit: f64,
    /// `|S|` in per-unit.
    pub flow_magnitude: f64,
}

/// `physical = |S| length / c^2` with `|S|` in watts; `per_unit = kappa |S|
/// length` with `|S|` in per-unit.
pub fn line_momentum(
    line: usize,
    direction: (usize, usize),
    flow: C64,
    length_m: f64,
    base_mva: f64,
    kappa: f64,
) -> Result<LineMomentum> {
    if !(length_m >= 0.0) {
        return Err(Error::Argument(format!(
            "line length must be non-negative, got {length_m}"
        )));
    }
    if !(kappa >= 0.0) {
        return Err(Error::Argument(format!(
            "kappa must be non-negative, got {kappa}"
        )));
    }
    let s = flow.norm();
    let watts = s * base_mva * 1e6;
    Ok(LineMomentum {
        line,
        direction,
        physical: watts * length_m / (SPEED_OF_LIGHT * SPEED_OF_LIGHT),
        per_unit: kappa * s * length_m,
        flow_magnitude: s,
    })
}

/// Momentum budget of one dynamic node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentumBudget {
    pub node: usize,
    pub generator_momentum: f64,
    pub line_momentum: f64,
    pub total: f64,
    pub em_share: f64,
}

impl MomentumBudget {
    pub fn new(node: usize, generator_momentum: f64, line_momentum: f64) -> Self {
        let total = generator_momentum + line_momentum;
        MomentumBudget {
            node,
            generator_momentum,
            line_momentum,
            total,
            em_share: if total > 0.0 {
                line_momentum / total
            } else {
                0.0
            },
        }
    }
}

/// `M = M_g + sum of attributed line momenta`.
pub fn nodal_momentum(
    node: usize,
    generator_momentum: f64,
    lines: &[LineMomentum],
) -> MomentumBudget {
    let ml: f64 = lines.iter().map(|l| l.per_unit).sum();
    MomentumBudget::new(node, generator_momentum, ml)
}

/// How a line's momentum is assigned to its end buses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Whole momentum to the end with the larger active-power outflow.
    #[default]
    Sending,
    /// Half to each end, each half using that end's apparent power.
    Split,
}

/// Per-bus line momenta for the given flows.
pub fn bus_line_momenta(
    branches: &[Branch],
    flows: &[BranchFlow],
    base_mva: f64,
    kappa: f64,
    attribution: Attribution,
) -> Result<Vec<(usize, LineMomentum)>> {
    let mut out = Vec::with_capacity(branches.len());
    for (br, fl) in branches.iter().zip(flows) {
        if br.length_m == 0.0 {
            continue;
        }
        match attribution {
            Attribution::Sending => {
                let (send, recv, s) = fl.sending(br);
                out.push((
                    send,
                    line_momentum(br.id, (send, recv), s, br.length_m, base_mva, kappa)?,
                ));
            }
            Attribution::Split => {
                for (a, b, s) in [
                    (br.from, br.to, fl.from_power),
                    (br.to, br.from, fl.to_power),
                ] {
                    let mut lm = line_momentum(br.id, (a, b), s, br.length_m, base_mva, kappa)?;
                    lm.physical *= 0.5;
                    lm.per_unit *= 0.5;
                    out.push((a, lm));
                }
            }
        }
    }
    Ok(out)
}

/// Total per-unit `sum |S| length` over lines, the quantity `kappa` scales.
pub fn flow_length_sum(branches: &[Branch], flows: &[BranchFlow], attribution: Attribution) -> f64 {
    branches
        .iter()
        .zip(flows)
        .map(|(br, fl)| match attribution {
            Attribution::Sending => fl.sending(br).2.norm() * br.length_m,
            Attribution::Split => 0.5 * (fl.from_power.norm() + fl.to_power.norm()) * br.length_m,
        })
        .sum()
}

/// Budgets for every dynamic node. Bus-level line momentum is spread onto
/// nodes with the network's bus-to-node attribution weights.
pub fn dynamic_budgets(
    dn: &DynamicNetwork,
    node_generator_momentum: &[f64],
    bus_voltages: &[C64],
    kappa: f64,
    attribution: Attribution,
) -> Result<Vec<MomentumBudget>> {
    let net = dn.network();
    let flows = dn.branch_flows(bus_voltages);
    let per_bus = bus_line_momenta(&net.branches, &flows, net.base_mva, kappa, attribution)?;
    let n = dn.node_count();
    let w = dn.bus_weights();
    let mut ml = vec![0.0; n];
    for (bus_id, lm) in per_bus {
        let b = net.bus_index_or_err(bus_id)?;
        for (j, slot) in ml.iter_mut().enumerate() {
            *slot += w[(b, j)] * lm.per_unit;
        }
    }
    Ok((0..n)
        .map(|j| MomentumBudget::new(j, node_generator_momentum[j], ml[j]))
        .collect())
}

/// System-wide electromagnetic share `sum M_l / sum M`.
pub fn system_share(budgets: &[MomentumBudget]) -> f64 {
    let ml: f64 = budgets.iter().map(|b| b.line_momentum).sum();
    let m: f64 = budgets.iter().map(|b| b.total).sum();
    if m > 0.0 {
        ml / m
    } else {
        0.0
    }
}

/// Finds `kappa` with `share(kappa) = target` by bisection, where
/// `share(kappa) = kappa L / (M_g + kappa L)`.
pub fn calibrate_kappa(
    generator_momentum: f64,
    flow_length: f64,
    target_share: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&target_share) {
        return Err(Error::Calibration(format!(
            "target share must lie in [0, 1), got {target_share}"
        )));
    }
    if target_share == 0.0 {
        return Ok(0.0);
    }
    if !(flow_length > 0.0) {
        return Err(Error::Calibration(
            "no line carries power; target unreachable".into(),
        ));
    }
    if !(generator_momentum > 0.0) {
        return Err(Error::Calibration(
            "generator momentum must be positive".into(),
        ));
    }
    let share = |k: f64| k * flow_length / (generator_momentum + k * flow_length);
    let mut hi = generator_momentum / flow_length;
    while share(hi) < target_share {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if share(mid) < target_share {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarizationKind {
    Linear,
    Elliptical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    None,
    Clockwise,
    Counterclockwise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerFactorSense {
    Unity,
    Leading,
    Lagging,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarizationState {
    pub power_factor: f64,
    pub kind: PolarizationKind,
    pub rotation: Rotation,
    pub sense: PowerFactorSense,
}

pub const DEFAULT_EPS_POL: f64 = 1e-3;

/// Lagging power (Q > 0) maps to clockwise rotation, leading to
/// counterclockwise.
pub fn classify_polarization(s: C64, eps_pol: f64) -> Result<PolarizationState> {
    let mag = s.norm();
    if !(mag > 0.0) {
        return Err(Error::UndefinedPolarization);
    }
    let power_factor = s.re.abs() / mag;
    if s.im.abs() <= eps_pol * mag {
        return Ok(PolarizationState {
            power_factor,
            kind: PolarizationKind::Linear,
            rotation: Rotation::None,
            sense: PowerFactorSense::Unity,
        });
    }
    let (rotation, sense) = if s.im > 0.0 {
        (Rotation::Clockwise, PowerFactorSense::Lagging)
    } else {
        (Rotation::Counterclockwise, PowerFactorSense::Leading)
    };
    Ok(PolarizationState {
        power_factor,
        kind: PolarizationKind::Elliptical,
        rotation,
        sense,
    })
}

/// Number of reference units (inertia constant `h_ref` on `s_ref_mva`)
/// whose momentum equals `total_momentum` (seconds on `base_mva`).
pub fn equivalent_units(
    total_momentum: f64,
    h_ref: f64,
    s_ref_mva: f64,
    base_mva: f64,
) -> Result<f64> {
    if !(h_ref > 0.0 && s_ref_mva > 0.0 && base_mva > 0.0) {
        return Err(Error::Argument(
            "reference unit parameters must be positive".into(),
        ));
    }
    Ok(total_momentum / (2.0 * h_ref * s_ref_mva / base_mva))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn branch(r: f64, x: f64, b: f64) -> Branch {
        Branch {
            id: 1,
            from: 1,
            to: 2,
            r,
            x,
            b,
            tap: 1.0,
            length_m: 1000.0,
            rating: 1.0,
        }
    }

    #[test]
    fn energy_zero_state() {
        let e = line_field_energy(
            &branch(0.01, 0.1, 0.1),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            0.1,
            1.0,
            EnergyBreakdown::default(),
        )
        .unwrap();
        assert_eq!(e, EnergyBreakdown::default());
    }

    #[test]
    fn magnetic_energy_formula_instance() {
        // omega_s = 1 so that L = X
        let e = line_field_energy(
            &branch(0.0, 0.1, 0.0),
            C64::new(0.6, 0.8),
            C64::new(1.0, 0.0),
            0.0,
            1.0,
            EnergyBreakdown::default(),
        )
        .unwrap();
        assert_relative_eq!(e.magnetic, 0.05, epsilon = 1e-15);
    }

    #[test]
    fn negative_dt_rejected() {
        let r = line_field_energy(
            &branch(0.0, 0.1, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            -1e-3,
            1.0,
            EnergyBreakdown::default(),
        );
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn dissipation_matches_trapezoid_quadrature() {
        // i(t) = 1.3 cos(2 pi 60 t + 0.4), accumulated with a rectangle rule on
        // a fine grid, compared with a trapezoidal oracle over one period.
        let br = branch(0.01, 0.1, 0.0);
        let f = 60.0;
        let period = 1.0 / f;
        let n = 200_000;
        let dt = period / n as f64;
        let current = |t: f64| 1.3 * (2.0 * PI * f * t + 0.4).cos();
        let mut acc = EnergyBreakdown::default();
        for k in 0..n {
            let t = (k as f64 + 0.5) * dt;
            acc = line_field_energy(
                &br,
                C64::new(current(t), 0.0),
                C64::new(0.0, 0.0),
                dt,
                2.0 * PI * f,
                acc,
            )
            .unwrap();
        }
        let m = 4000;
        let h = period / m as f64;
        let mut trap = 0.0;
        for k in 0..=m {
            let w = if k == 0 || k == m { 0.5 } else { 1.0 };
            trap += w * 0.01 * current(k as f64 * h).powi(2);
        }
        trap *= h;
        assert!(
            (acc.dissipated - trap).abs() < 1e-6,
            "{} vs {}",
            acc.dissipated,
            trap
        );
    }

    #[test]
    fn power_terms_equal_endpoints() {
        let t = line_power_terms(&branch(0.01, 0.1, 0.0), 1.02, 0.3, 1.02, 0.3).unwrap();
        assert_eq!(t.delivered, 0.0);
        assert_eq!(t.loss, 0.0);
    }

    #[test]
    fn power_terms_lossless() {
        let t = line_power_terms(&branch(0.0, 0.1, 0.0), 1.0, 0.2, 0.97, -0.1).unwrap();
        assert_eq!(t.loss, 0.0);
    }

    #[test]
    fn delivered_power_matches_phasor_form() {
        let t = line_power_terms(&branch(0.0, 0.1, 0.0), 1.0, 0.1, 1.0, 0.0).unwrap();
        let oracle = (0.1f64).sin() / 0.1;
        assert_relative_eq!(t.delivered, oracle, epsilon = 1e-12);
        assert_relative_eq!(t.delivered, -t.phasor.re, epsilon = 1e-12);
        assert!((t.delivered - 0.9983).abs() < 1e-4);
    }

    #[test]
    fn loss_equals_r_current_squared() {
        let br = branch(0.02, 0.1, 0.0);
        let (vi, di, vj, dj) = (1.03, 0.12, 0.98, -0.05);
        let t = line_power_terms(&br, vi, di, vj, dj).unwrap();
        let i = br.series_admittance() * (C64::from_polar(vi, di) - C64::from_polar(vj, dj));
        assert_relative_eq!(t.loss, 0.02 * i.norm_sqr(), epsilon = 1e-13);
    }

    #[test]
    fn line_momentum_reference_value() {
        // 1 GW on a 100 MVA base is 10 pu
        let lm = line_momentum(3, (1, 2), C64::new(10.0, 0.0), 160_934.0, 100.0, 0.0).unwrap();
        let oracle = 1e9 * 160_934.0 / (299_792_458.0f64 * 299_792_458.0);
        assert_relative_eq!(lm.physical, oracle, max_relative = 1e-14);
        assert!((lm.physical - 1.7907e-3).abs() < 1e-7);
    }

    #[test]
    fn line_momentum_zero_flow_and_linearity() {
        let z = line_momentum(1, (1, 2), C64::new(0.0, 0.0), 5e4, 100.0, 2e-5).unwrap();
        assert_eq!((z.physical, z.per_unit), (0.0, 0.0));
        let a = line_momentum(1, (1, 2), C64::new(0.7, 0.2), 5e4, 100.0, 2e-5).unwrap();
        let b = line_momentum(1, (1, 2), C64::new(0.7, 0.2), 1e5, 100.0, 2e-5).unwrap();
        assert_eq!(b.physical, 2.0 * a.physical);
        assert_eq!(b.per_unit, 2.0 * a.per_unit);
        assert!(line_momentum(1, (1, 2), C64::new(1.0, 0.0), -1.0, 100.0, 0.0).is_err());
    }

    #[test]
    fn budget_identity_and_limits() {
        let b = nodal_momentum(4, 3.0, &[]);
        assert_eq!((b.total, b.em_share), (3.0, 0.0));
        let lm = line_momentum(1, (1, 2), C64::new(1.0, 0.0), 1e5, 100.0, 1e-5).unwrap();
        let b = nodal_momentum(4, 0.0, &[lm]);
        assert_eq!(b.em_share, 1.0);
        let b = nodal_momentum(4, 2.5, &[lm, lm]);
        assert_eq!(b.total, b.generator_momentum + b.line_momentum);
    }

    #[test]
    fn calibration_matches_closed_form() {
        let (mg, l) = (12.3, 4.4e5);
        let k = calibrate_kappa(mg, l, 0.102).unwrap();
        let closed = 0.102 / (1.0 - 0.102) * mg / l;
        assert_relative_eq!(k, closed, max_relative = 1e-12);
        assert_eq!(calibrate_kappa(mg, l, 0.0).unwrap(), 0.0);
        assert!(matches!(
            calibrate_kappa(mg, 0.0, 0.1),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn polarization_cases() {
        let p = classify_polarization(C64::new(1.0, 0.0), DEFAULT_EPS_POL).unwrap();
        assert_eq!(
            (p.kind, p.rotation),
            (PolarizationKind::Linear, Rotation::None)
        );
        assert_eq!(p.power_factor, 1.0);
        let p = classify_polarization(C64::new(0.8, 0.6), DEFAULT_EPS_POL).unwrap();
        assert_relative_eq!(p.power_factor, 0.8, epsilon = 1e-15);
        assert_eq!(
            (p.kind, p.rotation, p.sense),
            (
                PolarizationKind::Elliptical,
                Rotation::Clockwise,
                PowerFactorSense::Lagging
            )
        );
        let p = classify_polarization(C64::new(0.8, -0.6), DEFAULT_EPS_POL).unwrap();
        assert_eq!(
            (p.rotation, p.sense),
            (Rotation::Counterclockwise, PowerFactorSense::Leading)
        );
        assert!(matches!(
            classify_polarization(C64::new(0.0, 0.0), DEFAULT_EPS_POL),
            Err(Error::UndefinedPolarization)
        ));
    }

    #[test]
    fn equivalent_unit_counts() {
        let unit = 2.0 * 4.0 * 300.0 / 100.0;
        assert_eq!(equivalent_units(0.0, 4.0, 300.0, 100.0).unwrap(), 0.0);
        assert_relative_eq!(equivalent_units(unit, 4.0, 300.0, 100.0).unwrap(), 1.0);
        assert_relative_eq!(
            equivalent_units(2.5 * unit, 4.0, 300.0, 100.0).unwrap(),
            2.5
        );
    }
}
