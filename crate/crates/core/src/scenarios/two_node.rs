use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// A generator feeding one load through a line, in the planar form of the
/// generator's frequency and voltage dynamics.
///
/// `phi_n = diag(1 / M_g, 1 / T_vg)` and `k_n = diag(-M_load / M_g, -T_vl / T_vg)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoNodeSystem {
    /// Frequency momentum of the generator and network combined.
    pub m_g: f64,
    pub t_vg: f64,
    pub d_g: f64,
    pub z_m: C64,
    pub p_g: f64,
    pub e_g: f64,
    pub p_l: f64,
    pub e_l: f64,
    /// Momentum of the load (zero for static loads).
    pub m_load: f64,
    pub t_vl: f64,
}

impl TwoNodeSystem {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_g > 0.0 && self.t_vg > 0.0) {
            return Err(Error::Argument("M_g and T_vg must be positive".into()));
        }
        if !(self.m_load >= 0.0 && self.t_vl >= 0.0) {
            return Err(Error::Argument(
                "load momentum and T_vl must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn phi(&self) -> [f64; 2] {
        [1.0 / self.m_g, 1.0 / self.t_vg]
    }

    pub fn k(&self) -> [f64; 2] {
        [-self.m_load / self.m_g, -self.t_vl / self.t_vg]
    }

    /// `[dw_g/dt, dV_g/dt]` evaluated directly.
    pub fn rhs(&self, s: &TwoNodeState) -> [f64; 2] {
        [
            (self.p_g - self.p_l - self.d_g * s.delta_dot_g - self.m_load * s.omega_dot_l)
                / self.m_g,
            (self.e_g - self.e_l - (self.z_m * s.i_gl).norm() - self.t_vl * s.v_dot_l) / self.t_vg,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoNodeState {
    /// `omega_g - omega_s`.
    pub delta_dot_g: f64,
    pub i_gl: C64,
    pub omega_dot_l: f64,
    pub v_dot_l: f64,
}

/// The three contributions to `[dw_g/dt, dV_g/dt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `phi_n [P_g - P_l, E_g - E_l]`.
    pub imbalance: [f64; 2],
    /// `-phi_n [D_g d_g, |Z_m I_gl|]`.
    pub damping: [f64; 2],
    /// `k_n [dw_l/dt, dV_l/dt]`.
    pub interaction: [f64; 2],
    pub total: [f64; 2],
}

pub fn two_node_decomposition(sys: &TwoNodeSystem, s: &TwoNodeState) -> Result<Decomposition> {
    sys.validate()?;
    let phi = sys.phi();
    let k = sys.k();
    let imbalance = [phi[0] * (sys.p_g - sys.p_l), phi[1] * (sys.e_g - sys.e_l)];
    let damping = [
        -phi[0] * sys.d_g * s.delta_dot_g,
        -phi[1] * (sys.z_m * s.i_gl).norm(),
    ];
    let interaction = [k[0] * s.omega_dot_l, k[1] * s.v_dot_l];
    let total = [
        imbalance[0] + damping[0] + interaction[0],
        imbalance[1] + damping[1] + interaction[1],
    ];
    Ok(Decomposition {
        imbalance,
        damping,
        interaction,
        total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys() -> TwoNodeSystem {
        TwoNodeSystem {
            m_g: 8.0,
            t_vg: 5.0,
            d_g: 0.4,
            z_m: C64::new(0.0, 0.3),
            p_g: 1.0,
            e_g: 1.1,
            p_l: 1.0,
            e_l: 1.1,
            m_load: 0.0,
            t_vl: 0.0,
        }
    }

    #[test]
    fn balanced_at_rest_is_zero() {
        let d = two_node_decomposition(
            &sys(),
            &TwoNodeState {
                delta_dot_g: 0.0,
                i_gl: C64::new(0.0, 0.0),
                omega_dot_l: 0.0,
                v_dot_l: 0.0,
            },
        )
        .unwrap();
        assert_eq!(d.imbalance, [0.0, 0.0]);
        assert_eq!(d.damping, [0.0, 0.0]);
        assert_eq!(d.interaction, [0.0, 0.0]);
    }

    #[test]
    fn static_load_has_no_interaction() {
        let d = two_node_decomposition(
            &sys(),
            &TwoNodeState {
                delta_dot_g: 0.3,
                i_gl: C64::new(0.8, -0.2),
                omega_dot_l: 4.0,
                v_dot_l: -2.0,
            },
        )
        .unwrap();
        assert_eq!(d.interaction, [0.0, 0.0]);
    }

    #[test]
    fn rejects_nonpositive_momentum() {
        let mut s = sys();
        s.m_g = 0.0;
        let st = TwoNodeState {
            delta_dot_g: 0.0,
            i_gl: C64::new(0.0, 0.0),
            omega_dot_l: 0.0,
            v_dot_l: 0.0,
        };
        assert!(two_node_decomposition(&s, &st).is_err());
    }
}
