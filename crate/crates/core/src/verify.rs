//! Self-checking invariant suite.
//!
//! [`run_suite`] measures a battery of structural properties the library must
//! satisfy — closed-form flow agreement, the flow group law, probability
//! transport, independence of the reference slice, monotonicity in the
//! detection window, Galilean invariance, current covariance, and agreement
//! between the closed-form and generic numeric pipelines — and reports the
//! worst observed deviation of each against a fixed tolerance.
//!
//! The suite is deterministic for a given seed, so a report can be compared
//! byte for byte across runs. The `perturbation` argument injects a constant
//! offset into the velocity field used by the trajectory-level checks; any
//! nonzero value must make the suite fail, which makes the harness itself
//! testable.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detection::{transition_probability, DetectionSettings, Region};
use crate::flow::{
    gaussian_flow_map, integrate, IntegratorSettings, PerturbedField, VelocityField,
};
use crate::spacetime::{GalileanBoost, SpacetimePoint};
use crate::wavepacket::{Packet, PacketTerm};
use num_complex::Complex64;

/// One measured property: its worst deviation against the tolerance.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn measure(name: &'static str, deviation: f64, tolerance: f64) -> Self {
        let pass = deviation.is_finite() && deviation <= tolerance;
        CheckResult { name, deviation, tolerance, pass }
    }
}

/// The full suite outcome. `Display` renders the fixed-format report used by
/// the command-line front end.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<28} {:<6} {:>14} {:>14}", "check", "status", "deviation", "tolerance")?;
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {:<6} {:>14} {:>14}",
                c.name,
                if c.pass { "PASS" } else { "FAIL" },
                format_sci(c.deviation),
                format_sci(c.tolerance),
            )?;
        }
        let passed = self.checks.iter().filter(|c| c.pass).count();
        write!(
            f,
            "result: {} ({passed}/{} checks)",
            if self.all_pass { "PASS" } else { "FAIL" },
            self.checks.len()
        )
    }
}

fn format_sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6e}")
    } else {
        format!("{v}")
    }
}

fn two_hump() -> Packet {
    Packet::superposed(vec![
        PacketTerm::new(Complex64::new(1.0, 0.0), GalileanBoost::translation(0.0, -1.2)),
        PacketTerm::new(Complex64::new(0.8, 0.0), GalileanBoost::translation(0.0, 1.2)),
    ])
    .expect("two-hump test packet is well defined")
}

/// Endpoint of the numerically integrated trajectory of `field` from `start`
/// to `t_end`, or infinity when integration fails.
fn endpoint<F: VelocityField + ?Sized>(
    field: &F,
    start: SpacetimePoint,
    t_end: f64,
    settings: &IntegratorSettings,
) -> f64 {
    match integrate(field, start, t_end, settings, &[]) {
        Ok(traj) => traj.position(t_end).unwrap_or(f64::INFINITY),
        Err(_) => f64::INFINITY,
    }
}

/// Integrated flow endpoints against the closed-form map, over random
/// starting events and lapses.
fn check_flow_map_oracle(rng: &mut ChaCha8Rng, perturbation: f64) -> CheckResult {
    let packet = Packet::gaussian();
    let field = PerturbedField { inner: &packet, offset: perturbation };
    let settings = IntegratorSettings::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let p = SpacetimePoint::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
        let lapse = rng.gen_range(-5.0..5.0);
        let expected = gaussian_flow_map(p, lapse);
        let got = endpoint(&field, p, p.t + lapse, &settings);
        worst = worst.max((got - expected.x).abs());
    }
    CheckResult::measure("flow_map_oracle", worst, 1e-8)
}

/// Two consecutive integration legs against one direct leg.
fn check_flow_group_law(rng: &mut ChaCha8Rng, perturbation: f64) -> CheckResult {
    let packet = Packet::gaussian();
    let field = PerturbedField { inner: &packet, offset: perturbation };
    let settings = IntegratorSettings::default();
    let mut worst: f64 = 0.0;
    for _ in 0..25 {
        let p = SpacetimePoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.5..2.5));
        let s = rng.gen_range(-3.0..3.0);
        let t = rng.gen_range(-3.0..3.0);
        let mid = endpoint(&field, p, p.t + s, &settings);
        let two_legs =
            endpoint(&field, SpacetimePoint::new(p.t + s, mid), p.t + s + t, &settings);
        let direct = endpoint(&field, p, p.t + s + t, &settings);
        worst = worst.max((two_legs - direct).abs());
    }
    CheckResult::measure("flow_group_law", worst, 10.0 * settings.rel_tol)
}

/// Probability transport: the mass of an interval on one slice equals the
/// mass of its flow image on another.
fn check_conservation(
    name: &'static str,
    packet: &Packet,
    rng: &mut ChaCha8Rng,
    perturbation: f64,
) -> CheckResult {
    let field = PerturbedField { inner: packet, offset: perturbation };
    let settings = IntegratorSettings::default();
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let a = rng.gen_range(-1.8..0.6);
        let b = a + rng.gen_range(0.3..1.2);
        let m0 = packet.mass(0.0, a, b, 1e-12).value;
        for _ in 0..3 {
            let t = rng.gen_range(0.4..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let a1 = endpoint(&field, SpacetimePoint::new(0.0, a), t, &settings);
            let b1 = endpoint(&field, SpacetimePoint::new(0.0, b), t, &settings);
            if !(a1.is_finite() && b1.is_finite()) {
                worst = f64::INFINITY;
                continue;
            }
            let m1 = packet.mass(t, a1, b1, 1e-12).value;
            worst = worst.max((m1 - m0).abs());
        }
    }
    CheckResult::measure(name, worst, 1e-7)
}

/// The transition probability must not depend on which slice carries the
/// hit-set mass. Deviations are measured relative to the reported error
/// bounds.
fn check_slice_independence(rng: &mut ChaCha8Rng) -> CheckResult {
    let packet = Packet::gaussian();
    let mut settings = DetectionSettings {
        force_numeric: true,
        grid_points: 128,
        ..DetectionSettings::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let level = rng.gen_range(0.5..2.5);
        let t_on = rng.gen_range(-0.5..1.0);
        let t_off = t_on + rng.gen_range(0.5..2.0);
        let region = match Region::point_detector(level, t_on, t_off) {
            Ok(r) => r,
            Err(_) => return CheckResult::measure("slice_independence", f64::INFINITY, 2.0),
        };
        let mut results = Vec::new();
        for reference in [-1.0, 0.0, 2.0] {
            settings.reference_time = reference;
            match transition_probability(&packet, &region, &settings) {
                Ok(p) => results.push(p),
                Err(_) => {
                    return CheckResult::measure("slice_independence", f64::INFINITY, 2.0)
                }
            }
        }
        for i in 0..results.len() {
            for j in i + 1..results.len() {
                let gap = (results[i].value - results[j].value).abs();
                let budget = results[i].error_bound + results[j].error_bound + 1e-12;
                worst = worst.max(gap / budget);
            }
        }
    }
    CheckResult::measure("slice_independence", worst, 2.0)
}

/// Enlarging the detection window can only add trajectories, so the
/// probability is nondecreasing in the cap and nonincreasing in the onset.
/// The deviation is the worst violation after subtracting error bounds;
/// anything positive fails.
fn check_monotonicity(rng: &mut ChaCha8Rng) -> CheckResult {
    let packet = Packet::gaussian();
    let closed = DetectionSettings::default();
    let numeric = DetectionSettings {
        force_numeric: true,
        grid_points: 96,
        ..DetectionSettings::default()
    };
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10 {
        let settings = if i < 8 { &closed } else { &numeric };
        let level = rng.gen_range(0.4..3.0);
        let t_on = rng.gen_range(-2.0..0.5);
        let t1 = t_on + rng.gen_range(0.2..1.5);
        let t2 = t1 + rng.gen_range(0.2..1.5);
        let probe = |on: f64, off: f64| -> Option<(f64, f64)> {
            let region = Region::point_detector(level, on, off).ok()?;
            let p = transition_probability(&packet, &region, settings).ok()?;
            Some((p.value, p.error_bound))
        };
        let (Some((p_small, e_small)), Some((p_large, e_large)), Some((p_late, e_late))) =
            (probe(t_on, t1), probe(t_on, t2), probe(t_on + 0.1, t2))
        else {
            return CheckResult::measure("monotonicity", f64::INFINITY, 0.0);
        };
        worst = worst.max(p_small - p_large - e_small - e_large);
        worst = worst.max(p_late - p_large - e_late - e_large);
    }
    CheckResult::measure("monotonicity", worst, 0.0)
}

/// Transition probabilities are unchanged when packet and region are carried
/// by the same Galilean transformation. Ratio against error bounds.
fn check_boost_invariance(rng: &mut ChaCha8Rng) -> CheckResult {
    let packet = Packet::gaussian();
    let closed = DetectionSettings::default();
    let numeric = DetectionSettings {
        grid_points: 128,
        ..DetectionSettings::default()
    };
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let level = rng.gen_range(0.7..2.0);
        let t_off = rng.gen_range(0.8..2.0);
        let region = match Region::point_detector(level, 0.0, t_off) {
            Ok(r) => r,
            Err(_) => return CheckResult::measure("boost_invariance", f64::INFINITY, 2.0),
        };
        let g = GalileanBoost::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_bool(0.5),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let base = match transition_probability(&packet, &region, &closed) {
            Ok(p) => p,
            Err(_) => return CheckResult::measure("boost_invariance", f64::INFINITY, 2.0),
        };
        let boosted_packet = match packet.boosted(&g) {
            Ok(p) => p,
            Err(_) => return CheckResult::measure("boost_invariance", f64::INFINITY, 2.0),
        };
        let moved =
            match transition_probability(&boosted_packet, &region.boosted(&g), &numeric) {
                Ok(p) => p,
                Err(_) => return CheckResult::measure("boost_invariance", f64::INFINITY, 2.0),
            };
        let gap = (moved.value - base.value).abs();
        let budget = base.error_bound + moved.error_bound + 1e-12;
        worst = worst.max(gap / budget);
    }
    CheckResult::measure("boost_invariance", worst, 2.0)
}

/// The probability current transforms as a spacetime vector: density is a
/// scalar and the flux picks up `v * density`.
fn check_current_covariance(rng: &mut ChaCha8Rng) -> CheckResult {
    let packet = Packet::gaussian();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = GalileanBoost::new(
            rng.gen_range(-1.5..1.5),
            rng.gen_bool(0.5),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let boosted = match packet.boosted(&g) {
            Ok(p) => p,
            Err(_) => return CheckResult::measure("current_covariance", f64::INFINITY, 1e-9),
        };
        for _ in 0..5 {
            let p = SpacetimePoint::new(rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0));
            let c = packet.current(p);
            let image = boosted.current(g.apply(p));
            worst = worst.max((image.density - c.density).abs());
            worst =
                worst.max((image.flux - (g.velocity * c.density + g.sign() * c.flux)).abs());
        }
    }
    CheckResult::measure("current_covariance", worst, 1e-9)
}

/// The generic scan/bisection pipeline against the closed form on the same
/// configuration.
fn check_closed_vs_numeric() -> CheckResult {
    let packet = Packet::gaussian();
    let closed = DetectionSettings::default();
    let numeric = DetectionSettings {
        force_numeric: true,
        ..DetectionSettings::default()
    };
    let mut worst: f64 = 0.0;
    for (level, t_off) in [(1.5, 4.0), (0.8, 2.0)] {
        let region = match Region::point_detector(level, 0.0, t_off) {
            Ok(r) => r,
            Err(_) => return CheckResult::measure("closed_vs_numeric", f64::INFINITY, 1e-6),
        };
        let a = transition_probability(&packet, &region, &closed);
        let b = transition_probability(&packet, &region, &numeric);
        match (a, b) {
            (Ok(a), Ok(b)) => worst = worst.max((a.value - b.value).abs()),
            _ => return CheckResult::measure("closed_vs_numeric", f64::INFINITY, 1e-6),
        }
    }
    CheckResult::measure("closed_vs_numeric", worst, 1e-6)
}

/// Run every check with reproducible randomness. `perturbation` offsets the
/// velocity field seen by the trajectory-level checks (the fault-injection
/// hook); zero means the true field.
pub fn run_suite(seed: u64, perturbation: f64) -> VerifyReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let superposed = two_hump();
    let checks = vec![
        check_flow_map_oracle(&mut rng, perturbation),
        check_flow_group_law(&mut rng, perturbation),
        check_conservation("conservation_gaussian", &Packet::gaussian(), &mut rng, perturbation),
        check_conservation("conservation_superposition", &superposed, &mut rng, perturbation),
        check_slice_independence(&mut rng),
        check_monotonicity(&mut rng),
        check_boost_invariance(&mut rng),
        check_current_covariance(&mut rng),
        check_closed_vs_numeric(),
    ];
    let all_pass = checks.iter().all(|c| c.pass);
    VerifyReport { checks, all_pass }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_suite_passes() {
        let report = run_suite(0, 0.0);
        assert!(report.all_pass, "{report}");
    }

    #[test]
    fn reports_are_deterministic_per_seed() {
        let a = run_suite(7, 0.0).to_string();
        let b = run_suite(7, 0.0).to_string();
        assert_eq!(a, b);
        let c = run_suite(8, 0.0).to_string();
        assert!(a != c, "different seeds should sample different configurations");
    }

    #[test]
    fn velocity_faults_are_caught() {
        let report = run_suite(0, 1e-3);
        assert!(!report.all_pass);
        let conservation = report
            .checks
            .iter()
            .find(|c| c.name == "conservation_gaussian")
            .expect("conservation check present");
        assert!(!conservation.pass, "{report}");
        let oracle = report
            .checks
            .iter()
            .find(|c| c.name == "flow_map_oracle")
            .expect("oracle check present");
        assert!(!oracle.pass, "{report}");
    }
}
