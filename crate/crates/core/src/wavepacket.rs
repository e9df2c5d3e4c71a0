//! Free 1-D wave packets: the unit-width standing Gaussian and finite
//! superpositions of its Galilean transports.
//!
//! The standing packet in dimensionless coordinates is
//!
//! ```text
//! psi(t, x) = pi^{-1/4} (1 + it)^{-1/2} exp( -x^2 / (2 (1 + it)) ),
//! ```
//!
//! (principal square root), with density `exp(-x^2/s^2) / (sqrt(pi) s)` and
//! spread `s = sqrt(1 + t^2)`. Superpositions carry one Galilean group
//! element per term; each term is evaluated as the transported solution
//! `exp(i * transport_phase) * psi ∘ g^{-1}`, so every packet here solves the
//! same free evolution equation exactly.
//!
//! Spatial derivatives are always evaluated in closed form — nothing in this
//! module differentiates numerically.

use num_complex::Complex64;

use crate::analytic::{half_erf_diff, spread};
use crate::error::Error;
use crate::quad::{self, QuadResult};
use crate::spacetime::{GalileanBoost, SpacetimePoint};

const PI_QUARTER_INV: f64 = 0.7511255444649425; // pi^{-1/4}

/// Density and flux of the probability current at an event, together with
/// the transport velocity `flux / density` (non-finite at exact nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurrentSample {
    pub density: f64,
    pub flux: f64,
    pub velocity: f64,
}

impl CurrentSample {
    fn from_parts(density: f64, flux: f64) -> Self {
        Self { density, flux, velocity: flux / density }
    }
}

/// The standing unit-width Gaussian packet centred at the origin.
///
/// Physical packets of other widths are mapped onto this one by the
/// dimensionless chart (see [`crate::spacetime::ChartScale`]).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianPacket;

impl GaussianPacket {
    pub fn psi(&self, p: SpacetimePoint) -> Complex64 {
        let a = Complex64::new(1.0, p.t);
        PI_QUARTER_INV / a.sqrt() * (Complex64::new(-0.5 * p.x * p.x, 0.0) / a).exp()
    }

    pub fn dpsi_dx(&self, p: SpacetimePoint) -> Complex64 {
        self.psi(p) * (-p.x / Complex64::new(1.0, p.t))
    }

    pub fn density(&self, p: SpacetimePoint) -> f64 {
        let s = spread(p.t);
        (-(p.x / s) * (p.x / s)).exp() / (std::f64::consts::PI.sqrt() * s)
    }

    /// Transport velocity of the current, `t x / (1 + t^2)`.
    pub fn velocity(&self, p: SpacetimePoint) -> f64 {
        p.t * p.x / (1.0 + p.t * p.t)
    }

    pub fn current(&self, p: SpacetimePoint) -> CurrentSample {
        let density = self.density(p);
        let velocity = self.velocity(p);
        CurrentSample { density, flux: density * velocity, velocity }
    }

    /// Potential of the current one-form: `H(t, x) = erf(x / s(t)) / 2`,
    /// with `dH/dx = density` and `dH/dt = -flux`. It is constant along
    /// trajectories, and differences of `H` give interval masses.
    pub fn flow_potential(&self, p: SpacetimePoint) -> f64 {
        0.5 * libm::erf(p.x / spread(p.t))
    }

    /// Probability mass of `[a, b]` on the slice at time `t` (signed if the
    /// bounds are reversed). Exact up to the accuracy of `erf`.
    pub fn mass(&self, t: f64, a: f64, b: f64) -> QuadResult {
        let s = spread(t);
        QuadResult { value: half_erf_diff(a / s, b / s), error: 4.0 * f64::EPSILON }
    }

    /// Interval of initial positions outside of which less than
    /// `erfc(sigmas)` of the mass lives at time `t`.
    pub fn mass_window(&self, t: f64, sigmas: f64) -> (f64, f64) {
        let w = sigmas * spread(t);
        (-w, w)
    }
}

/// One term of a superposition: a complex coefficient and the group element
/// transporting the standing packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketTerm {
    pub coefficient: Complex64,
    pub boost: GalileanBoost,
}

impl PacketTerm {
    pub fn new(coefficient: Complex64, boost: GalileanBoost) -> Self {
        Self { coefficient, boost }
    }
}

/// A normalized finite superposition of transported Gaussian packets.
#[derive(Debug, Clone)]
pub struct SuperposedPacket {
    terms: Vec<PacketTerm>,
    /// Multiplies the raw sum so that the t = 0 slice carries unit mass.
    norm_factor: f64,
    /// Densities below this are treated as nodes of the wave function.
    density_floor: f64,
}

impl SuperposedPacket {
    /// Build and normalize a superposition. Fails if the term list is empty
    /// or the terms cancel to (numerically) zero total mass.
    pub fn new(terms: Vec<PacketTerm>) -> Result<Self, Error> {
        if terms.is_empty() {
            return Err(Error::DegenerateSuperposition { norm: 0.0 });
        }
        let mut packet = Self { terms, norm_factor: 1.0, density_floor: 0.0 };
        let (lo, hi) = packet.mass_window(0.0, 10.0);
        let raw = quad::integrate(|x| packet.density(SpacetimePoint::new(0.0, x)), lo, hi, 1e-13);
        if !(raw.value > 1e-12) {
            return Err(Error::DegenerateSuperposition { norm: raw.value });
        }
        packet.norm_factor = 1.0 / raw.value.sqrt();
        // global bound on the density: |psi| <= norm * sum |c_k| * pi^{-1/4}
        let amp: f64 = packet.terms.iter().map(|t| t.coefficient.norm()).sum();
        let peak = (packet.norm_factor * amp * PI_QUARTER_INV).powi(2);
        packet.density_floor = 1e-14 * peak;
        Ok(packet)
    }

    pub fn terms(&self) -> &[PacketTerm] {
        &self.terms
    }

    pub fn norm_factor(&self) -> f64 {
        self.norm_factor
    }

    pub fn psi(&self, p: SpacetimePoint) -> Complex64 {
        let base = GaussianPacket;
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let u = term.boost.inverse().apply(p);
            let phase = Complex64::from_polar(1.0, term.boost.transport_phase(p));
            acc += term.coefficient * phase * base.psi(u);
        }
        self.norm_factor * acc
    }

    pub fn dpsi_dx(&self, p: SpacetimePoint) -> Complex64 {
        let base = GaussianPacket;
        let mut acc = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let g = &term.boost;
            let u = g.inverse().apply(p);
            let phase = Complex64::from_polar(1.0, g.transport_phase(p));
            let dpsi = Complex64::new(0.0, g.velocity) * base.psi(u) + g.sign() * base.dpsi_dx(u);
            acc += term.coefficient * phase * dpsi;
        }
        self.norm_factor * acc
    }

    pub fn density(&self, p: SpacetimePoint) -> f64 {
        self.psi(p).norm_sqr()
    }

    pub fn current(&self, p: SpacetimePoint) -> CurrentSample {
        let psi = self.psi(p);
        let dpsi = self.dpsi_dx(p);
        CurrentSample::from_parts(psi.norm_sqr(), (psi.conj() * dpsi).im)
    }

    pub fn density_floor(&self) -> f64 {
        self.density_floor
    }

    /// Union of the per-term windows: term k is centred at
    /// `v_k (t - shift_t_k) + shift_x_k` with spread `s(t - shift_t_k)`.
    pub fn mass_window(&self, t: f64, sigmas: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for term in &self.terms {
            let g = &term.boost;
            let centre = g.velocity * (t - g.shift_t) + g.shift_x;
            let w = sigmas * spread(t - g.shift_t);
            lo = lo.min(centre - w);
            hi = hi.max(centre + w);
        }
        (lo, hi)
    }

    pub fn mass(&self, t: f64, a: f64, b: f64, abs_tol: f64) -> QuadResult {
        quad::integrate(|x| self.density(SpacetimePoint::new(t, x)), a, b, abs_tol)
    }
}

/// Any packet the crate can transport: the plain Gaussian or a superposition.
#[derive(Debug, Clone)]
pub enum Packet {
    Gaussian(GaussianPacket),
    Superposed(SuperposedPacket),
}

impl Packet {
    pub fn gaussian() -> Self {
        Packet::Gaussian(GaussianPacket)
    }

    pub fn superposed(terms: Vec<PacketTerm>) -> Result<Self, Error> {
        Ok(Packet::Superposed(SuperposedPacket::new(terms)?))
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, Packet::Gaussian(_))
    }

    pub fn psi(&self, p: SpacetimePoint) -> Complex64 {
        match self {
            Packet::Gaussian(g) => g.psi(p),
            Packet::Superposed(s) => s.psi(p),
        }
    }

    pub fn dpsi_dx(&self, p: SpacetimePoint) -> Complex64 {
        match self {
            Packet::Gaussian(g) => g.dpsi_dx(p),
            Packet::Superposed(s) => s.dpsi_dx(p),
        }
    }

    pub fn density(&self, p: SpacetimePoint) -> f64 {
        match self {
            Packet::Gaussian(g) => g.density(p),
            Packet::Superposed(s) => s.density(p),
        }
    }

    pub fn current(&self, p: SpacetimePoint) -> CurrentSample {
        match self {
            Packet::Gaussian(g) => g.current(p),
            Packet::Superposed(s) => s.current(p),
        }
    }

    /// Closed-form potential of the current; only the plain Gaussian has one.
    pub fn flow_potential(&self, p: SpacetimePoint) -> Result<f64, Error> {
        match self {
            Packet::Gaussian(g) => Ok(g.flow_potential(p)),
            Packet::Superposed(_) => Err(Error::FlowPotentialUnsupported),
        }
    }

    /// Mass of `[a, b]` on the slice at `t`, with an error estimate.
    pub fn mass(&self, t: f64, a: f64, b: f64, abs_tol: f64) -> QuadResult {
        match self {
            Packet::Gaussian(g) => g.mass(t, a, b),
            Packet::Superposed(s) => s.mass(t, a, b, abs_tol),
        }
    }

    pub fn mass_window(&self, t: f64, sigmas: f64) -> (f64, f64) {
        match self {
            Packet::Gaussian(g) => g.mass_window(t, sigmas),
            Packet::Superposed(s) => s.mass_window(t, sigmas),
        }
    }

    /// Rigorous bound on the mass outside [`Packet::mass_window`]: each term
    /// leaves at most `erfc(sigmas)` outside its own window, and the combined
    /// amplitude is bounded by the sum of the terms'.
    pub fn tail_mass_bound(&self, sigmas: f64) -> f64 {
        match self {
            Packet::Gaussian(_) => libm::erfc(sigmas),
            Packet::Superposed(s) => {
                let amp: f64 =
                    s.terms().iter().map(|t| t.coefficient.norm()).sum::<f64>() * s.norm_factor();
                amp * amp * libm::erfc(sigmas)
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Packet::Gaussian(_) => "gaussian".to_string(),
            Packet::Superposed(s) => format!("superposition({} terms)", s.terms().len()),
        }
    }

    /// Node threshold: densities at or below this abort trajectory
    /// integration. The plain Gaussian has no nodes, so its floor is zero.
    pub fn density_floor(&self) -> f64 {
        match self {
            Packet::Gaussian(_) => 0.0,
            Packet::Superposed(s) => s.density_floor(),
        }
    }

    /// Transport the packet by a Galilean group element. The result is
    /// always a superposition (a single-term one for the Gaussian); its
    /// normalization is recomputed and agrees with the original by unitarity.
    pub fn boosted(&self, g: &GalileanBoost) -> Result<Packet, Error> {
        let terms = match self {
            Packet::Gaussian(_) => vec![PacketTerm::new(Complex64::new(1.0, 0.0), *g)],
            Packet::Superposed(s) => s
                .terms
                .iter()
                .map(|term| PacketTerm::new(term.coefficient, g.compose(&term.boost)))
                .collect(),
        };
        Packet::superposed(terms)
    }
}
