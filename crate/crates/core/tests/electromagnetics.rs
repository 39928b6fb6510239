use planewave::electromagnetics::{
    bus_line_momenta, classify_polarization, line_field_energy, line_momentum, line_power_terms,
    Attribution, EnergyBreakdown, MomentumBudget, DEFAULT_EPS_POL,
};
use planewave::network::{Branch, BranchFlow};
use planewave::{C64, SPEED_OF_LIGHT};
use proptest::prelude::*;

fn branch(r: f64, x: f64, b: f64, length_m: f64) -> Branch {
    Branch {
        id: 7,
        from: 1,
        to: 2,
        r,
        x,
        b,
        tap: 1.0,
        length_m,
        rating: 0.0,
    }
}

#[test]
fn gigawatt_over_a_hundred_miles() {
    // 10 pu on a 100 MVA base is 1 GW
    let lm = line_momentum(1, (1, 2), C64::new(10.0, 0.0), 160_934.0, 100.0, 0.0).unwrap();
    let oracle = 1e9 * 160_934.0 / (SPEED_OF_LIGHT * SPEED_OF_LIGHT);
    assert!((lm.physical - 1.7907e-3).abs() < 1e-7);
    assert!((lm.physical - oracle).abs() < 1e-18);
}

#[test]
fn negative_length_rejected() {
    assert!(line_momentum(1, (1, 2), C64::new(1.0, 0.0), -1.0, 100.0, 1e-5).is_err());
}

#[test]
fn dissipation_is_monotone_along_a_trajectory() {
    let br = branch(0.01, 0.1, 0.02, 1e5);
    let mut acc = EnergyBreakdown::default();
    for k in 0..500 {
        let t = k as f64 * 1e-3;
        let i = C64::from_polar(1.0 + 0.3 * (7.0 * t).sin(), t);
        let prev = acc.dissipated;
        acc = line_field_energy(
            &br,
            i,
            C64::new(1.0, 0.0),
            1e-3,
            120.0 * std::f64::consts::PI,
            acc,
        )
        .unwrap();
        assert!(acc.dissipated >= prev);
        assert!(acc.magnetic >= 0.0 && acc.electric >= 0.0);
    }
}

proptest! {
    #[test]
    fn momentum_is_linear_in_flow_and_length(
        p in -20.0..20.0f64, q in -10.0..10.0f64, len in 0.0..5e5f64, a in 0.1..10.0f64,
    ) {
        let s = C64::new(p, q);
        let kappa = 1.7e-5;
        let base = line_momentum(1, (1, 2), s, len, 100.0, kappa).unwrap();
        let scaled_s = line_momentum(1, (1, 2), s * a, len, 100.0, kappa).unwrap();
        let scaled_l = line_momentum(1, (1, 2), s, len * a, 100.0, kappa).unwrap();
        let tol = |v: f64| 1e-14 * v.abs().max(1e-300);
        prop_assert!((scaled_s.physical - a * base.physical).abs() <= tol(scaled_s.physical));
        prop_assert!((scaled_l.physical - a * base.physical).abs() <= tol(scaled_l.physical));
        prop_assert!((scaled_s.per_unit - a * base.per_unit).abs() <= tol(scaled_s.per_unit));
        prop_assert!((scaled_l.per_unit - a * base.per_unit).abs() <= tol(scaled_l.per_unit));
        let zero = line_momentum(1, (1, 2), C64::new(0.0, 0.0), len, 100.0, kappa).unwrap();
        prop_assert_eq!((zero.physical, zero.per_unit), (0.0, 0.0));
    }

    #[test]
    fn sending_end_carries_the_momentum(
        r in 0.0..0.05f64, x in 0.02..0.3f64, d in 0.01..0.5f64, vi in 0.9..1.1f64, vj in 0.9..1.1f64,
    ) {
        let br = branch(r, x, 0.1, 2e5);
        let u_hi = C64::from_polar(vi, d);
        let u_lo = C64::from_polar(vj, 0.0);
        let flow = |uf: C64, ut: C64| {
            let (sf, st) = br.end_powers(uf, ut);
            BranchFlow { branch: br.id, from_power: sf, to_power: st }
        };
        let f = flow(u_hi, u_lo);
        let expected = if f.from_power.re >= f.to_power.re { 1 } else { 2 };
        let fwd = bus_line_momenta(std::slice::from_ref(&br), &[f], 100.0, 1e-5, Attribution::Sending).unwrap();
        prop_assert_eq!(fwd.len(), 1);
        prop_assert_eq!(fwd[0].0, expected);
        prop_assert!(fwd[0].1.per_unit > 0.0);
        // swapping the end voltages reverses the flow and the attribution
        let rev = bus_line_momenta(std::slice::from_ref(&br), &[flow(u_lo, u_hi)], 100.0, 1e-5, Attribution::Sending).unwrap();
        prop_assert_eq!(rev[0].0, 3 - expected);
        prop_assert_eq!(rev[0].1.direction, (fwd[0].1.direction.1, fwd[0].1.direction.0));
        prop_assert!((rev[0].1.per_unit - fwd[0].1.per_unit).abs() < 1e-15);
    }

    #[test]
    fn budget_identity_and_share_monotone(mg in 0.0..50.0f64, ml in 1e-6..10.0f64, dm in 1e-3..10.0f64) {
        let b = MomentumBudget::new(0, mg, ml);
        prop_assert_eq!(b.total, mg + ml);
        prop_assert!((0.0..=1.0).contains(&b.em_share));
        let heavier = MomentumBudget::new(0, mg + dm, ml);
        prop_assert!(heavier.em_share < b.em_share);
    }

    #[test]
    fn loss_is_never_negative(
        r in 0.0..0.1f64, x in 0.01..0.5f64, vi in 0.5..1.5f64, vj in 0.5..1.5f64, di in -3.0..3.0f64, dj in -3.0..3.0f64,
    ) {
        let t = line_power_terms(&branch(r, x, 0.0, 0.0), vi, di, vj, dj).unwrap();
        prop_assert!(t.loss >= 0.0);
    }

    #[test]
    fn lossless_delivered_matches_phasor(
        x in 0.01..0.5f64, vi in 0.5..1.5f64, vj in 0.5..1.5f64, di in -3.0..3.0f64, dj in -3.0..3.0f64,
    ) {
        let t = line_power_terms(&branch(0.0, x, 0.0, 0.0), vi, di, vj, dj).unwrap();
        prop_assert_eq!(t.loss, 0.0);
        prop_assert!((t.delivered + t.phasor.re).abs() < 1e-12);
        let oracle = vi * vj * (dj - di).sin() / x;
        prop_assert!((t.delivered + oracle).abs() < 1e-12);
    }

    #[test]
    fn conjugate_flips_rotation_only(p in -5.0..5.0f64, q in -5.0..5.0f64) {
        let s = C64::new(p, q);
        prop_assume!(s.norm() > 1e-9);
        let a = classify_polarization(s, DEFAULT_EPS_POL).unwrap();
        let b = classify_polarization(s.conj(), DEFAULT_EPS_POL).unwrap();
        prop_assert_eq!(a.power_factor, b.power_factor);
        prop_assert_eq!(a.kind, b.kind);
        use planewave::electromagnetics::Rotation::*;
        let flipped = match a.rotation { None => None, Clockwise => Counterclockwise, Counterclockwise => Clockwise };
        prop_assert_eq!(b.rotation, flipped);
    }
}
