//! Events and Galilean symmetry of the 1+1-dimensional classical spacetime.
//!
//! All quantities are dimensionless: time is measured in units of the squared
//! packet width and position in units of the packet width (with `hbar` and
//! the mass scaled out). [`ChartScale`] converts physical inputs into these
//! units at the boundary; everything else in the crate works with
//! [`SpacetimePoint`] directly.

use crate::error::Error;

/// An event, i.e. a point (t, x) of the spacetime in dimensionless units.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: f64,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: f64) -> Self {
        Self { t, x }
    }
}

/// Unit conversion between physical coordinates and the dimensionless chart.
///
/// A packet of physical width `delta` prepared with Planck constant `hbar`
/// and mass `mass` is described internally by the unit-width standing packet;
/// a physical time T and length L map to
///
/// ```text
/// t = hbar * T / (mass * delta^2),        x = L / delta.
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartScale {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for ChartScale {
    fn default() -> Self {
        Self { hbar: 1.0, mass: 1.0 }
    }
}

impl ChartScale {
    pub fn new(hbar: f64, mass: f64) -> Result<Self, Error> {
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(Error::invalid("hbar and mass must be positive"));
        }
        Ok(Self { hbar, mass })
    }

    /// Dimensionless time of a physical instant for a packet of width `delta`.
    pub fn dimensionless_time(&self, t_phys: f64, delta: f64) -> f64 {
        self.hbar * t_phys / (self.mass * delta * delta)
    }

    /// Dimensionless position of a physical length for a packet of width `delta`.
    pub fn dimensionless_length(&self, x_phys: f64, delta: f64) -> f64 {
        x_phys / delta
    }

    /// Both coordinates at once.
    pub fn dimensionless_point(&self, t_phys: f64, x_phys: f64, delta: f64) -> SpacetimePoint {
        SpacetimePoint::new(
            self.dimensionless_time(t_phys, delta),
            self.dimensionless_length(x_phys, delta),
        )
    }

    /// Inverse of [`dimensionless_time`](Self::dimensionless_time).
    pub fn physical_time(&self, t: f64, delta: f64) -> f64 {
        t * self.mass * delta * delta / self.hbar
    }

    /// Inverse of [`dimensionless_length`](Self::dimensionless_length).
    pub fn physical_length(&self, x: f64, delta: f64) -> f64 {
        x * delta
    }
}

/// An element of the (extended) Galilei group in one spatial dimension:
/// a boost by `velocity`, an optional spatial reflection, a spacetime
/// translation, and a constant phase offset `phase_shift` carried along for
/// wave-function transport.
///
/// As a point map the element acts as
///
/// ```text
/// (t, x)  ->  (t + shift_t,  velocity * t + sign * x + shift_x)
/// ```
///
/// with `sign = -1` when `reflected` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalileanBoost {
    pub velocity: f64,
    pub reflected: bool,
    pub shift_t: f64,
    pub shift_x: f64,
    pub phase_shift: f64,
}

impl Default for GalileanBoost {
    fn default() -> Self {
        Self::identity()
    }
}

impl GalileanBoost {
    pub fn identity() -> Self {
        Self {
            velocity: 0.0,
            reflected: false,
            shift_t: 0.0,
            shift_x: 0.0,
            phase_shift: 0.0,
        }
    }

    /// Pure boost: the mapped frame moves with `velocity`.
    pub fn pure(velocity: f64) -> Self {
        Self { velocity, ..Self::identity() }
    }

    /// Pure spacetime translation.
    pub fn translation(shift_t: f64, shift_x: f64) -> Self {
        Self { shift_t, shift_x, ..Self::identity() }
    }

    pub fn new(velocity: f64, reflected: bool, shift_t: f64, shift_x: f64, phase_shift: f64) -> Self {
        Self { velocity, reflected, shift_t, shift_x, phase_shift }
    }

    /// The reflection sign as a number: +1 or -1.
    pub fn sign(&self) -> f64 {
        if self.reflected { -1.0 } else { 1.0 }
    }

    /// Apply the point map to an event.
    pub fn apply(&self, p: SpacetimePoint) -> SpacetimePoint {
        SpacetimePoint::new(
            p.t + self.shift_t,
            self.velocity * p.t + self.sign() * p.x + self.shift_x,
        )
    }

    /// Group inverse. The phase offset is chosen so that composing with the
    /// inverse (in either order) yields the identity with zero phase.
    pub fn inverse(&self) -> Self {
        let r = self.sign();
        let v = self.velocity;
        Self {
            velocity: -r * v,
            reflected: self.reflected,
            shift_t: -self.shift_t,
            shift_x: r * (v * self.shift_t - self.shift_x),
            phase_shift: -self.phase_shift + 0.5 * v * v * self.shift_t - v * self.shift_x,
        }
    }

    /// Composition as point maps: `outer.compose(&inner)` applies `inner`
    /// first, i.e. equals `outer ∘ inner`.
    ///
    /// The composed phase offset is fixed so that the solution-transport
    /// phases multiply exactly: transporting a wave function by `inner` and
    /// then by `outer` gives the same function (including its constant phase)
    /// as transporting it once by the composition. Relative phases between
    /// superposition terms are therefore preserved under composition.
    pub fn compose(&self, inner: &Self) -> Self {
        let (v1, r1) = (self.velocity, self.sign());
        let v2 = inner.velocity;
        Self {
            velocity: v1 + r1 * v2,
            reflected: self.reflected != inner.reflected,
            shift_t: inner.shift_t + self.shift_t,
            shift_x: v1 * inner.shift_t + r1 * inner.shift_x + self.shift_x,
            phase_shift: self.phase_shift
                + inner.phase_shift
                + v2 * r1 * (v1 * self.shift_t - self.shift_x)
                + 0.5 * v2 * v2 * self.shift_t,
        }
    }

    /// Phase accompanying the frame change, evaluated at an event `p` given
    /// in the original frame's coordinates:
    ///
    /// ```text
    /// phi(p) = velocity^2 * t / 2 - velocity * x + phase_shift.
    /// ```
    ///
    /// A solution of the free evolution equation, multiplied by `exp(i phi)`,
    /// solves the same equation written in the transformed frame.
    pub fn phase(&self, p: SpacetimePoint) -> f64 {
        0.5 * self.velocity * self.velocity * p.t - self.velocity * p.x + self.phase_shift
    }

    /// Phase of the actively transported solution: if `psi` solves the free
    /// evolution equation, so does
    ///
    /// ```text
    /// psi'(p) = exp(i * transport_phase(p)) * psi(g^{-1} p),
    /// ```
    ///
    /// and `psi'` is the state `psi` dragged along this group element (its
    /// density moves with `velocity`).
    pub fn transport_phase(&self, p: SpacetimePoint) -> f64 {
        self.velocity * p.x - 0.5 * self.velocity * self.velocity * p.t + self.phase_shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-14;

    #[test]
    fn boost_moves_events_along_the_frame_velocity() {
        let g = GalileanBoost::pure(1.0);
        let q = g.apply(SpacetimePoint::new(2.0, 0.0));
        assert_eq!((q.t, q.x), (2.0, 2.0));

        let shift = GalileanBoost::translation(1.0, -3.0);
        let q = shift.apply(SpacetimePoint::new(2.0, 0.5));
        assert_eq!((q.t, q.x), (3.0, -2.5));
    }

    #[test]
    fn frame_change_phase_at_a_known_event() {
        let g = GalileanBoost::pure(1.0);
        let p = SpacetimePoint::new(2.0, 3.0);
        assert_eq!(g.phase(p), -2.0);
        // transport phase is the reflection of the frame-change phase
        assert_eq!(g.transport_phase(p), 2.0);
    }

    #[test]
    fn inverse_is_two_sided_and_phase_free() {
        let g = GalileanBoost::new(0.7, true, 1.3, -0.4, 0.9);
        for comp in [g.compose(&g.inverse()), g.inverse().compose(&g)] {
            assert!(comp.velocity.abs() < EPS);
            assert!(!comp.reflected);
            assert!(comp.shift_t.abs() < EPS);
            assert!(comp.shift_x.abs() < EPS);
            assert!(comp.phase_shift.abs() < EPS);
        }
        let p = SpacetimePoint::new(0.3, -1.9);
        let q = g.inverse().apply(g.apply(p));
        assert!((q.t - p.t).abs() < EPS && (q.x - p.x).abs() < EPS);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let g1 = GalileanBoost::new(0.5, false, 0.2, 1.0, 0.1);
        let g2 = GalileanBoost::new(-1.2, true, -0.7, 0.3, -0.4);
        let p = SpacetimePoint::new(1.1, -0.6);
        let seq = g2.apply(g1.apply(p));
        let comp = g2.compose(&g1).apply(p);
        assert!((seq.t - comp.t).abs() < EPS);
        assert!((seq.x - comp.x).abs() < EPS);
    }

    #[test]
    fn transport_phases_compose_exactly() {
        // outer ∘ inner transport phase == inner transport phase at the
        // pulled-back event plus outer transport phase, with no leftover
        // constant: the composition rule absorbs the cocycle.
        let outer = GalileanBoost::new(0.8, false, 0.4, -1.1, 0.25);
        let inner = GalileanBoost::new(-0.3, true, 1.6, 0.2, -0.75);
        let comp = outer.compose(&inner);
        for (t, x) in [(0.0, 0.0), (1.7, -2.4), (-3.1, 0.9), (0.5, 4.2)] {
            let p = SpacetimePoint::new(t, x);
            let stacked = outer.transport_phase(p)
                + inner.transport_phase(outer.inverse().apply(p));
            assert!((stacked - comp.transport_phase(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_change_phase_composition_is_constant_in_the_event() {
        let outer = GalileanBoost::new(1.4, false, -0.6, 0.9, 0.0);
        let inner = GalileanBoost::new(0.9, false, 0.3, -0.2, 0.0);
        let comp = outer.compose(&inner);
        let diff_at = |p: SpacetimePoint| {
            comp.phase(p) - outer.phase(p) - inner.phase(outer.inverse().apply(p))
        };
        let base = diff_at(SpacetimePoint::new(0.0, 0.0));
        for (t, x) in [(2.0, -1.0), (-0.5, 0.25), (3.3, 3.3)] {
            assert!((diff_at(SpacetimePoint::new(t, x)) - base).abs() < 1e-12);
        }
    }

    #[test]
    fn physical_units_scale_out() {
        let chart = ChartScale::default();
        let p = chart.dimensionless_point(4.0, 6.0, 2.0);
        assert_eq!((p.t, p.x), (1.0, 3.0));
        assert_eq!(chart.physical_time(p.t, 2.0), 4.0);
        assert_eq!(chart.physical_length(p.x, 2.0), 6.0);

        let chart = ChartScale::new(2.0, 4.0).unwrap();
        // t = hbar T / (m delta^2) = 2*8/(4*4) = 1
        assert_eq!(chart.dimensionless_time(8.0, 2.0), 1.0);
        assert!(ChartScale::new(0.0, 1.0).is_err());
    }
}
