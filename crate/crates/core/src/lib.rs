//! Arrival-time statistics of free 1-D quantum wave packets.
//!
//! The crate computes, for a packet spreading freely in one dimension, the
//! probability that its probability current carries a trajectory into a given
//! spacetime detector region. For the standing Gaussian packet everything has
//! closed form; superpositions of boosted/shifted copies are handled by an
//! adaptive trajectory integrator over the transport velocity field.
//!
//! Modules, roughly bottom-up:
//!
//! * [`spacetime`] — events, the dimensionless chart, Galilean boosts.
//! * [`quad`] — adaptive Gauss–Legendre quadrature.
//! * [`analytic`] — closed forms for the standing Gaussian (detector curves,
//!   current counts, the arrival-time density and its divergent mean).
//! * [`wavepacket`] — the packets themselves and their currents.
//! * [`flow`] — trajectory integration and the closed-form flow map.
//! * [`detection`] — detector regions and transition probabilities.
//! * [`verify`] — self-check suite wired to a fault-injection hook.

pub mod analytic;
pub mod detection;
pub mod error;
pub mod flow;
pub mod quad;
pub mod spacetime;
pub mod verify;
pub mod wavepacket;

pub use error::Error;
pub use spacetime::{ChartScale, GalileanBoost, SpacetimePoint};
pub use wavepacket::{CurrentSample, GaussianPacket, Packet, PacketTerm, SuperposedPacket};
