//! Property-based checks of the algebraic layer: the transformation group,
//! its action on packets and currents, and the closed-form flow.

use num_complex::Complex64;
use proptest::prelude::*;

use arrival_core::flow::{flow_map_group_deviation, gaussian_flow_map};
use arrival_core::{GalileanBoost, Packet, PacketTerm, SpacetimePoint};

fn boosts() -> impl Strategy<Value = GalileanBoost> {
    (
        -2.0f64..2.0,
        any::<bool>(),
        -2.0f64..2.0,
        -2.0f64..2.0,
        -2.0f64..2.0,
    )
        .prop_map(|(v, refl, b0, b1, c)| GalileanBoost::new(v, refl, b0, b1, c))
}

fn points() -> impl Strategy<Value = SpacetimePoint> {
    (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(t, x)| SpacetimePoint::new(t, x))
}

proptest! {
    #[test]
    fn composition_acts_like_sequential_application(
        g in boosts(), h in boosts(), p in points()
    ) {
        let combined = g.compose(&h).apply(p);
        let sequential = g.apply(h.apply(p));
        prop_assert!((combined.t - sequential.t).abs() < 1e-12);
        prop_assert!((combined.x - sequential.x).abs() < 1e-12);
    }

    #[test]
    fn inverses_cancel(g in boosts(), p in points()) {
        let q = g.inverse().apply(g.apply(p));
        prop_assert!((q.t - p.t).abs() < 1e-12);
        prop_assert!((q.x - p.x).abs() < 1e-12);
        // and the phase cancels too
        let total = g.compose(&g.inverse());
        prop_assert!(total.phase(p).abs() < 1e-11);
    }

    #[test]
    fn transport_phases_compose_without_anomaly(
        g in boosts(), h in boosts(), q in points()
    ) {
        // dragging through h then g equals dragging through g∘h: the phase
        // at the target point stacks with the inner phase at the pulled-back
        // point, with no leftover constant
        let stacked = g.transport_phase(q) + h.transport_phase(g.inverse().apply(q));
        let direct = g.compose(&h).transport_phase(q);
        prop_assert!((stacked - direct).abs() < 1e-10, "phase anomaly {}", stacked - direct);
    }

    #[test]
    fn flow_map_satisfies_the_group_law(
        p in points(), s in -4.0f64..4.0, t in -4.0f64..4.0
    ) {
        prop_assert!(flow_map_group_deviation(p, s, t) < 1e-12);
    }

    #[test]
    fn flow_map_never_crosses_the_axis(p in points(), s in -4.0f64..4.0) {
        let q = gaussian_flow_map(p, s);
        prop_assert!(q.x.signum() == p.x.signum() || p.x == 0.0);
    }

    #[test]
    fn boosted_packets_stay_normalized(v in -1.5f64..1.5, b1 in -1.5f64..1.5, t in -2.0f64..2.0) {
        let g = GalileanBoost::new(v, false, 0.0, b1, 0.3);
        let packet = Packet::gaussian().boosted(&g).unwrap();
        let (lo, hi) = packet.mass_window(t, 9.0);
        let total = packet.mass(t, lo, hi, 1e-12).value;
        prop_assert!((total - 1.0).abs() < 1e-9, "mass {total}");
    }

    #[test]
    fn two_term_superpositions_stay_normalized(
        re in -1.0f64..1.0, im in -1.0f64..1.0, sep in 0.4f64..2.5, t in -2.0f64..2.0
    ) {
        prop_assume!(re * re + im * im > 0.05);
        let packet = Packet::superposed(vec![
            PacketTerm::new(Complex64::new(1.0, 0.0), GalileanBoost::translation(0.0, -sep)),
            PacketTerm::new(Complex64::new(re, im), GalileanBoost::translation(0.0, sep)),
        ]).unwrap();
        let (lo, hi) = packet.mass_window(t, 9.0);
        let total = packet.mass(t, lo, hi, 1e-12).value;
        prop_assert!((total - 1.0).abs() < 1e-9, "mass {total}");
    }

    #[test]
    fn densities_transform_as_scalars(g in boosts(), p in points()) {
        let packet = Packet::gaussian();
        let boosted = packet.boosted(&g).unwrap();
        let before = packet.current(p);
        let after = boosted.current(g.apply(p));
        prop_assert!((after.density - before.density).abs() < 1e-10);
        let expected_flux = g.velocity * before.density + g.sign() * before.flux;
        prop_assert!((after.flux - expected_flux).abs() < 1e-10);
    }
}
