//! Detector regions in spacetime and the statistics of trajectories meeting
//! them.
//!
//! The central quantity is the transition probability of the current through
//! a region X: the initial-slice mass of the set of trajectories that
//! intersect X. Because 1-D trajectories never cross, that set is a union of
//! intervals of initial positions; [`project_region`] finds it by scanning a
//! grid over the packet's mass window and sharpening every hit/miss boundary
//! by bisection. A closed form replaces the scan for the plain Gaussian with
//! a static point detector.
//!
//! The Leavens comparator integrates |flux| along the detector worldline
//! instead; it counts every crossing separately and therefore exceeds the
//! transition probability whenever trajectories cross more than once.

use std::sync::Arc;

use rayon::prelude::*;

use crate::analytic::{self, spread};
use crate::error::Error;
use crate::flow::{integrate_window, IntegratorSettings, Trajectory, WatchLine};
use crate::quad;
use crate::spacetime::{GalileanBoost, SpacetimePoint};
use crate::wavepacket::Packet;

/// Bounding box of a predicate region: time window and spatial extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub t_on: f64,
    pub t_off: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// A detector sensitivity region in spacetime.
///
/// `drift` makes the point/slab variants move uniformly; unboosted detectors
/// have drift zero, and boosting a region folds the boost velocity into the
/// drift so the family is closed under Galilean transformations.
#[derive(Clone)]
pub enum Region {
    /// The worldline segment `x = level + drift t`, `t_on <= t <= t_off`.
    PointDetector { level: f64, drift: f64, t_on: f64, t_off: f64 },
    /// `x_lo + drift t <= x <= x_hi + drift t`, `t_on <= t <= t_off`.
    Slab { x_lo: f64, x_hi: f64, drift: f64, t_on: f64, t_off: f64 },
    /// Arbitrary indicator, false outside its bounding box.
    Predicate {
        indicator: Arc<dyn Fn(SpacetimePoint) -> bool + Send + Sync>,
        bbox: BoundingBox,
    },
}

impl std::fmt::Debug for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.describe())
    }
}

impl Region {
    pub fn point_detector(level: f64, t_on: f64, t_off: f64) -> Result<Region, Error> {
        Region::moving_point_detector(level, 0.0, t_on, t_off)
    }

    pub fn moving_point_detector(
        level: f64,
        drift: f64,
        t_on: f64,
        t_off: f64,
    ) -> Result<Region, Error> {
        if !(level.is_finite() && drift.is_finite()) {
            return Err(Error::invalid("detector level and drift must be finite"));
        }
        check_window(t_on, t_off)?;
        Ok(Region::PointDetector { level, drift, t_on, t_off })
    }

    pub fn slab(x_lo: f64, x_hi: f64, t_on: f64, t_off: f64) -> Result<Region, Error> {
        Region::moving_slab(x_lo, x_hi, 0.0, t_on, t_off)
    }

    pub fn moving_slab(
        x_lo: f64,
        x_hi: f64,
        drift: f64,
        t_on: f64,
        t_off: f64,
    ) -> Result<Region, Error> {
        if !(x_lo.is_finite() && x_hi.is_finite() && drift.is_finite()) {
            return Err(Error::invalid("slab bounds and drift must be finite"));
        }
        if !(x_lo < x_hi) {
            return Err(Error::invalid("slab requires x_lo < x_hi"));
        }
        check_window(t_on, t_off)?;
        Ok(Region::Slab { x_lo, x_hi, drift, t_on, t_off })
    }

    pub fn predicate(
        indicator: impl Fn(SpacetimePoint) -> bool + Send + Sync + 'static,
        bbox: BoundingBox,
    ) -> Result<Region, Error> {
        if !(bbox.t_on.is_finite() && bbox.t_off.is_finite() && bbox.x_lo.is_finite() && bbox.x_hi.is_finite()) {
            return Err(Error::invalid("predicate bounding box must be finite"));
        }
        if !(bbox.x_lo < bbox.x_hi) {
            return Err(Error::invalid("predicate bounding box requires x_lo < x_hi"));
        }
        check_window(bbox.t_on, bbox.t_off)?;
        Ok(Region::Predicate { indicator: Arc::new(indicator), bbox })
    }

    /// Activation window `(t_on, t_off)`.
    pub fn window(&self) -> (f64, f64) {
        match self {
            Region::PointDetector { t_on, t_off, .. } => (*t_on, *t_off),
            Region::Slab { t_on, t_off, .. } => (*t_on, *t_off),
            Region::Predicate { bbox, .. } => (bbox.t_on, bbox.t_off),
        }
    }

    /// The same region with its activation window replaced.
    pub fn with_window(&self, t_on: f64, t_off: f64) -> Result<Region, Error> {
        check_window(t_on, t_off)?;
        Ok(match self.clone() {
            Region::PointDetector { level, drift, .. } => {
                Region::PointDetector { level, drift, t_on, t_off }
            }
            Region::Slab { x_lo, x_hi, drift, .. } => {
                Region::Slab { x_lo, x_hi, drift, t_on, t_off }
            }
            Region::Predicate { indicator, bbox } => Region::Predicate {
                indicator,
                bbox: BoundingBox { t_on, t_off, ..bbox },
            },
        })
    }

    pub fn contains(&self, p: SpacetimePoint) -> bool {
        match self {
            Region::PointDetector { level, drift, t_on, t_off } => {
                p.t >= *t_on && p.t <= *t_off && p.x == level + drift * p.t
            }
            Region::Slab { x_lo, x_hi, drift, t_on, t_off } => {
                p.t >= *t_on
                    && p.t <= *t_off
                    && p.x >= x_lo + drift * p.t
                    && p.x <= x_hi + drift * p.t
            }
            Region::Predicate { indicator, .. } => indicator(p),
        }
    }

    /// Image of the region under a Galilean transformation. Point and slab
    /// detectors stay in their variant (the boost velocity joins the drift);
    /// predicates are wrapped with the inverse transformation.
    pub fn boosted(&self, g: &GalileanBoost) -> Region {
        let v = g.velocity;
        let r = g.sign();
        match self {
            Region::PointDetector { level, drift, t_on, t_off } => {
                let new_drift = v + r * drift;
                Region::PointDetector {
                    level: r * level + g.shift_x - new_drift * g.shift_t,
                    drift: new_drift,
                    t_on: t_on + g.shift_t,
                    t_off: t_off + g.shift_t,
                }
            }
            Region::Slab { x_lo, x_hi, drift, t_on, t_off } => {
                let new_drift = v + r * drift;
                let a = r * x_lo + g.shift_x - new_drift * g.shift_t;
                let b = r * x_hi + g.shift_x - new_drift * g.shift_t;
                Region::Slab {
                    x_lo: a.min(b),
                    x_hi: a.max(b),
                    drift: new_drift,
                    t_on: t_on + g.shift_t,
                    t_off: t_off + g.shift_t,
                }
            }
            Region::Predicate { indicator, bbox } => {
                let g_inv = g.inverse();
                let inner = indicator.clone();
                // hull of the transformed box corners
                let mut x_lo = f64::INFINITY;
                let mut x_hi = f64::NEG_INFINITY;
                for &t in &[bbox.t_on, bbox.t_off] {
                    for &x in &[bbox.x_lo, bbox.x_hi] {
                        let q = g.apply(SpacetimePoint::new(t, x));
                        x_lo = x_lo.min(q.x);
                        x_hi = x_hi.max(q.x);
                    }
                }
                Region::Predicate {
                    indicator: Arc::new(move |p| inner(g_inv.apply(p))),
                    bbox: BoundingBox {
                        t_on: bbox.t_on + g.shift_t,
                        t_off: bbox.t_off + g.shift_t,
                        x_lo,
                        x_hi,
                    },
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Region::PointDetector { level, drift, t_on, t_off } => {
                format!("point(level={level}, drift={drift}, window=[{t_on}, {t_off}])")
            }
            Region::Slab { x_lo, x_hi, drift, t_on, t_off } => {
                format!("slab(x=[{x_lo}, {x_hi}], drift={drift}, window=[{t_on}, {t_off}])")
            }
            Region::Predicate { bbox, .. } => format!(
                "predicate(bbox: t=[{}, {}], x=[{}, {}])",
                bbox.t_on, bbox.t_off, bbox.x_lo, bbox.x_hi
            ),
        }
    }
}

fn check_window(t_on: f64, t_off: f64) -> Result<(), Error> {
    if !(t_on.is_finite() && t_off.is_finite()) {
        return Err(Error::invalid("activation window must be finite"));
    }
    if t_on > t_off {
        return Err(Error::invalid("activation window requires t_on <= t_off"));
    }
    Ok(())
}

/// Knobs of the projection/probability pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSettings {
    /// Slice on which hit sets and masses are evaluated.
    pub reference_time: f64,
    /// Half-width of the scanned initial-position window, in packet widths.
    pub window_sigmas: f64,
    /// Scan grid resolution.
    pub grid_points: usize,
    /// Initial-position resolution of hit/miss boundaries.
    pub boundary_tol: f64,
    /// Hard cap on the probability mass of near-node trajectories that may be
    /// excluded before the projection fails.
    pub error_budget: f64,
    /// Absolute tolerance of mass/flux quadratures.
    pub quad_tol: f64,
    /// Time samples per trajectory when testing a predicate region.
    pub predicate_samples: usize,
    /// Route everything through the generic scan even when a closed form
    /// exists (cross-validation hook).
    pub force_numeric: bool,
    pub integrator: IntegratorSettings,
}

impl Default for DetectionSettings {
    fn default() -> Self {
        Self {
            reference_time: 0.0,
            window_sigmas: 8.0,
            grid_points: 512,
            boundary_tol: 1e-10,
            error_budget: 1e-6,
            quad_tol: 1e-10,
            predicate_samples: 256,
            force_numeric: false,
            integrator: IntegratorSettings::default(),
        }
    }
}

impl DetectionSettings {
    /// Position resolution credited to numerically located interval edges:
    /// the bisection tolerance plus a budget for the global error of the
    /// trajectory integrations that drive each bisection probe.
    fn edge_resolution(&self) -> f64 {
        self.boundary_tol + 50.0 * self.integrator.rel_tol
    }

    fn validate(&self) -> Result<(), Error> {
        if self.grid_points < 8 {
            return Err(Error::invalid("grid_points must be at least 8"));
        }
        if !(self.window_sigmas > 0.0) {
            return Err(Error::invalid("window_sigmas must be positive"));
        }
        if !(self.boundary_tol > 0.0 && self.quad_tol > 0.0 && self.error_budget >= 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if self.predicate_samples < 2 {
            return Err(Error::invalid("predicate_samples must be at least 2"));
        }
        Ok(())
    }
}

/// The projection of a region onto an initial slice: the set of positions
/// whose trajectories meet it, as disjoint ordered intervals.
#[derive(Debug, Clone)]
pub struct HitSet {
    pub reference_time: f64,
    pub intervals: Vec<(f64, f64)>,
    /// Position resolution achieved at the interval boundaries.
    pub boundary_tol: f64,
    /// Mass of trajectories discarded because they ran into a node.
    pub excluded_mass: f64,
    /// Bound on the mass outside the scanned window.
    pub window_tail_mass: f64,
}

/// A probability together with everything known to limit its accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability {
    pub value: f64,
    pub error_bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    TransitionP,
    LeavensPL,
    ConditionalW,
    DensityW,
    DensityWTilde,
}

/// A sampled distribution curve plus per-point error bounds.
#[derive(Debug, Clone)]
pub struct DistributionCurve {
    pub kind: CurveKind,
    pub abscissa: Vec<f64>,
    pub ordinate: Vec<f64>,
    pub error_bound: Vec<f64>,
    pub params: String,
}

impl DistributionCurve {
    /// Structural sanity: bounded ordinates for probabilities, monotonicity
    /// for cumulative kinds (up to accumulated error bounds).
    pub fn validate(&self) -> Result<(), Error> {
        if self.abscissa.len() != self.ordinate.len()
            || self.abscissa.len() != self.error_bound.len()
        {
            return Err(Error::invalid("curve arrays must have equal length"));
        }
        let bounded = matches!(self.kind, CurveKind::TransitionP | CurveKind::ConditionalW);
        let monotone = matches!(
            self.kind,
            CurveKind::TransitionP | CurveKind::ConditionalW | CurveKind::LeavensPL
        );
        for (i, (&y, &e)) in self.ordinate.iter().zip(&self.error_bound).enumerate() {
            if bounded && !(-e - 1e-12..=1.0 + e + 1e-12).contains(&y) {
                return Err(Error::invalid(format!("curve ordinate {y} out of [0,1] at index {i}")));
            }
            if monotone && i > 0 {
                let slack = e + self.error_bound[i - 1] + 1e-12;
                if y < self.ordinate[i - 1] - slack {
                    return Err(Error::invalid(format!("curve not nondecreasing at index {i}")));
                }
            }
        }
        Ok(())
    }
}

/// Outcome of probing a single initial position.
#[derive(Debug, Clone, Copy)]
enum Probe {
    /// Trajectory meets the region; `first_touch` is the earliest contact
    /// time; `side` records which side of the region it occupied at `t_on`
    /// (0 = inside / on it).
    Hit { first_touch: f64, side: i8 },
    /// Never meets the region within the window.
    Miss { side: i8 },
    /// Ran into a node before the question could be settled.
    Excluded,
}

impl Probe {
    fn is_hit(&self) -> bool {
        matches!(self, Probe::Hit { .. })
    }

    /// Restrict a probe taken on the full family window to `t <= cap`.
    fn thresholded(&self, cap: f64) -> Probe {
        match *self {
            Probe::Hit { first_touch, side } if first_touch > cap => Probe::Miss { side },
            other => other,
        }
    }
}

/// Shared context for probing initial positions against one region.
struct Classifier<'a> {
    packet: &'a Packet,
    region: &'a Region,
    reference_time: f64,
    settings: &'a DetectionSettings,
    watches: Vec<WatchLine>,
}

impl<'a> Classifier<'a> {
    fn new(
        packet: &'a Packet,
        region: &'a Region,
        reference_time: f64,
        settings: &'a DetectionSettings,
    ) -> Self {
        let watches = match region {
            Region::PointDetector { level, drift, .. } => {
                vec![WatchLine { offset: *level, slope: *drift }]
            }
            Region::Slab { x_lo, x_hi, drift, .. } => vec![
                WatchLine { offset: *x_lo, slope: *drift },
                WatchLine { offset: *x_hi, slope: *drift },
            ],
            Region::Predicate { .. } => Vec::new(),
        };
        Self { packet, region, reference_time, settings, watches }
    }

    /// Probe one initial position, considering region contact only up to
    /// `t_cap` (used to reuse one scan across a whole family of windows).
    fn classify(&self, x0: f64, t_cap: f64) -> Result<Probe, Error> {
        let (t_on, t_off_full) = self.region.window();
        let t_off = t_off_full.min(t_cap);
        if t_off < t_on {
            return Ok(Probe::Miss { side: 0 });
        }
        let start = SpacetimePoint::new(self.reference_time, x0);
        let lo = t_on.min(start.t);
        let hi = t_off.max(start.t);
        match integrate_window(self.packet, start, lo, hi, &self.settings.integrator, &self.watches)
        {
            Ok(traj) => Ok(self.classify_trajectory(&traj, t_on, t_off)),
            Err(Error::NearNode { partial, .. }) => {
                // a contact already recorded before the abort is still a hit
                match self.classify_trajectory(&partial, t_on, t_off) {
                    p @ Probe::Hit { .. } => Ok(p),
                    _ => Ok(Probe::Excluded),
                }
            }
            Err(e) => Err(e),
        }
    }

    fn classify_trajectory(&self, traj: &Trajectory, t_on: f64, t_off: f64) -> Probe {
        match self.region {
            Region::PointDetector { level, drift, .. } => {
                let side = traj
                    .position(t_on)
                    .map(|x| sign_i8(x - (level + drift * t_on)))
                    .unwrap_or(0);
                if side == 0 && traj.position(t_on).is_some() {
                    return Probe::Hit { first_touch: t_on, side: 0 };
                }
                match traj.events.iter().find(|e| e.t >= t_on && e.t <= t_off) {
                    Some(e) => Probe::Hit { first_touch: e.t, side },
                    None => Probe::Miss { side },
                }
            }
            Region::Slab { x_lo, x_hi, drift, .. } => {
                let side = match traj.position(t_on) {
                    Some(x) => {
                        let (lo, hi) = (x_lo + drift * t_on, x_hi + drift * t_on);
                        if x < lo {
                            -1
                        } else if x > hi {
                            1
                        } else {
                            return Probe::Hit { first_touch: t_on, side: 0 };
                        }
                    }
                    None => 0,
                };
                match traj.events.iter().find(|e| e.t >= t_on && e.t <= t_off) {
                    Some(e) => Probe::Hit { first_touch: e.t, side },
                    None => Probe::Miss { side },
                }
            }
            Region::Predicate { indicator, .. } => {
                let n = self.settings.predicate_samples;
                let at = |t: f64| {
                    traj.position(t)
                        .map(|x| indicator(SpacetimePoint::new(t, x)))
                        .unwrap_or(false)
                };
                let mut prev_t = t_on;
                let mut prev_in = at(t_on);
                if prev_in {
                    return Probe::Hit { first_touch: t_on, side: 0 };
                }
                for j in 1..=n {
                    let t = t_on + (t_off - t_on) * j as f64 / n as f64;
                    if at(t) {
                        // refine the first contact within (prev_t, t]
                        let (mut a, mut b) = (prev_t, t);
                        for _ in 0..60 {
                            if b - a <= self.settings.integrator.event_refine_tol {
                                break;
                            }
                            let m = 0.5 * (a + b);
                            if at(m) {
                                b = m;
                            } else {
                                a = m;
                            }
                        }
                        return Probe::Hit { first_touch: b, side: 0 };
                    }
                    prev_t = t;
                    prev_in = false;
                }
                let _ = prev_in;
                Probe::Miss { side: 0 }
            }
        }
    }
}

fn sign_i8(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Scan the mass window once, probing each grid point against the region
/// with contacts capped at `t_cap`.
fn scan_grid(cls: &Classifier, t_cap: f64) -> Result<Vec<(f64, Probe)>, Error> {
    let (w_lo, w_hi) =
        cls.packet.mass_window(cls.reference_time, cls.settings.window_sigmas);
    let n = cls.settings.grid_points;
    let xs: Vec<f64> = (0..n)
        .map(|i| w_lo + (w_hi - w_lo) * i as f64 / (n - 1) as f64)
        .collect();
    let mut pts: Vec<(f64, Probe)> = xs
        .par_iter()
        .map(|&x| cls.classify(x, t_cap).map(|p| (x, p)))
        .collect::<Result<_, _>>()?;

    // predicate regions lack side information, so thin intervals hiding
    // between two misses are hunted with one midpoint probe per miss pair
    if matches!(cls.region, Region::Predicate { .. }) {
        let mids: Vec<f64> = pts
            .windows(2)
            .filter(|w| matches!((w[0].1, w[1].1), (Probe::Miss { .. }, Probe::Miss { .. })))
            .map(|w| 0.5 * (w[0].0 + w[1].0))
            .collect();
        let extra: Vec<(f64, Probe)> = mids
            .par_iter()
            .map(|&x| cls.classify(x, t_cap).map(|p| (x, p)))
            .collect::<Result<_, _>>()?;
        pts.extend(extra.into_iter().filter(|(_, p)| p.is_hit()));
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    }
    Ok(pts)
}

/// Result of searching for a hit between two misses on opposite sides.
enum HiddenScan {
    Found(f64, Probe),
    /// No resolvable hit; the bracket's mass is charged to the exclusion
    /// account.
    Unresolved(f64, f64),
}

fn find_hidden_hit(
    cls: &Classifier,
    t_cap: f64,
    (xa, side_a): (f64, i8),
    xb: f64,
) -> Result<HiddenScan, Error> {
    let tol = cls.settings.boundary_tol;
    let (mut a, mut b) = (xa, xb);
    for _ in 0..300 {
        if (b - a).abs() <= tol {
            return Ok(HiddenScan::Unresolved(a.min(b), a.max(b)));
        }
        let m = 0.5 * (a + b);
        match cls.classify(m, t_cap)? {
            p @ Probe::Hit { .. } => return Ok(HiddenScan::Found(m, p)),
            Probe::Miss { side } if side == side_a => a = m,
            Probe::Miss { .. } => b = m,
            Probe::Excluded => return Ok(HiddenScan::Unresolved(a.min(b), a.max(b))),
        }
    }
    Ok(HiddenScan::Unresolved(a.min(b), a.max(b)))
}

/// Sharpen the boundary between a hit point and a miss point down to
/// `boundary_tol`, returning the innermost position known to hit.
fn bisect_edge(cls: &Classifier, t_cap: f64, x_hit: f64, x_miss: f64) -> Result<f64, Error> {
    let tol = cls.settings.boundary_tol;
    let (mut a, mut b) = (x_hit, x_miss);
    let mut iters = 0;
    while (a - b).abs() > tol {
        iters += 1;
        if iters > 300 {
            return Err(Error::UnresolvedBoundary { x_lo: a.min(b), x_hi: a.max(b) });
        }
        let mut m = 0.5 * (a + b);
        let mut probe = cls.classify(m, t_cap)?;
        let mut tries = 0;
        while matches!(probe, Probe::Excluded) {
            tries += 1;
            if tries > 4 {
                return Err(Error::UnresolvedBoundary { x_lo: a.min(b), x_hi: a.max(b) });
            }
            m = 0.5 * (m + b);
            probe = cls.classify(m, t_cap)?;
        }
        if probe.is_hit() {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(a)
}

/// Build the disjoint hit intervals from a probed point list; returns the
/// intervals plus the mass excluded around near-node probes.
fn assemble_intervals(
    cls: &Classifier,
    t_cap: f64,
    pts: &[(f64, Probe)],
    window: (f64, f64),
) -> Result<(Vec<(f64, f64)>, f64), Error> {
    let mut pts: Vec<(f64, Probe)> = pts.to_vec();

    // hidden-interval hunt: adjacent misses on opposite sides bracket a hit
    // (positions on the t_on slice are continuous and ordered in x0)
    let mut found = Vec::new();
    let mut excluded_spans: Vec<(f64, f64)> = Vec::new();
    for w in pts.windows(2) {
        if let ((xa, Probe::Miss { side: sa }), (xb, Probe::Miss { side: sb })) =
            ((w[0].0, w[0].1), (w[1].0, w[1].1))
        {
            if sa != 0 && sb != 0 && sa != sb {
                match find_hidden_hit(cls, t_cap, (xa, sa), xb)? {
                    HiddenScan::Found(x, p) => found.push((x, p)),
                    HiddenScan::Unresolved(lo, hi) => excluded_spans.push((lo, hi)),
                }
            }
        }
    }
    pts.extend(found);
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // exclusion accounting: the cell around each near-node probe
    for (i, (x, p)) in pts.iter().enumerate() {
        if matches!(p, Probe::Excluded) {
            let lo = if i > 0 { 0.5 * (pts[i - 1].0 + x) } else { window.0 };
            let hi = if i + 1 < pts.len() { 0.5 * (x + pts[i + 1].0) } else { window.1 };
            excluded_spans.push((lo, hi));
        }
    }
    let mut excluded_mass = 0.0;
    for (lo, hi) in excluded_spans {
        excluded_mass += cls
            .packet
            .mass(cls.reference_time, lo.max(window.0), hi.min(window.1), cls.settings.quad_tol)
            .value
            .max(0.0);
    }

    // walk runs of hits and sharpen their edges
    let mut intervals = Vec::new();
    let mut i = 0;
    while i < pts.len() {
        if !pts[i].1.is_hit() {
            i += 1;
            continue;
        }
        let mut j = i;
        while j + 1 < pts.len() && pts[j + 1].1.is_hit() {
            j += 1;
        }
        let left = if i == 0 {
            window.0
        } else {
            match pts[i - 1].1 {
                Probe::Miss { .. } => bisect_edge(cls, t_cap, pts[i].0, pts[i - 1].0)?,
                _ => 0.5 * (pts[i - 1].0 + pts[i].0), // excluded neighbor: stop at the cell edge
            }
        };
        let right = if j == pts.len() - 1 {
            window.1
        } else {
            match pts[j + 1].1 {
                Probe::Miss { .. } => bisect_edge(cls, t_cap, pts[j].0, pts[j + 1].0)?,
                _ => 0.5 * (pts[j].0 + pts[j + 1].0),
            }
        };
        if right > left {
            intervals.push((left, right));
        }
        i = j + 1;
    }
    Ok((intervals, excluded_mass))
}

/// Closed-form projection for the plain Gaussian against a static point
/// detector: the orbit `x0 * s(t) / s(ref)` meets the level exactly when
/// `x0` lies between `level * s(ref) / s_far` and `level * s(ref) / s_near`,
/// where `s_near`/`s_far` are the extremes of the spread over the window.
fn gaussian_point_hit_set(
    level: f64,
    t_on: f64,
    t_off: f64,
    reference_time: f64,
) -> HitSet {
    let mut intervals = Vec::new();
    if level != 0.0 && t_off >= t_on {
        let s_ref = spread(reference_time);
        let s_near = if t_on <= 0.0 && 0.0 <= t_off {
            1.0
        } else {
            spread(t_on.abs().min(t_off.abs()))
        };
        let s_far = spread(t_on.abs().max(t_off.abs()));
        let a = level * s_ref / s_far;
        let b = level * s_ref / s_near;
        intervals.push((a.min(b), a.max(b)));
    }
    HitSet {
        reference_time,
        intervals,
        boundary_tol: 0.0,
        excluded_mass: 0.0,
        window_tail_mass: 0.0,
    }
}

fn closed_form_applies(packet: &Packet, region: &Region, settings: &DetectionSettings) -> bool {
    !settings.force_numeric
        && packet.is_gaussian()
        && matches!(region, Region::PointDetector { drift, .. } if *drift == 0.0)
}

/// Project a region onto the slice at `reference_time`: the initial positions
/// whose trajectories meet it.
pub fn project_region(
    packet: &Packet,
    region: &Region,
    reference_time: f64,
    settings: &DetectionSettings,
) -> Result<HitSet, Error> {
    settings.validate()?;
    if closed_form_applies(packet, region, settings) {
        if let Region::PointDetector { level, t_on, t_off, .. } = region {
            return Ok(gaussian_point_hit_set(*level, *t_on, *t_off, reference_time));
        }
    }
    let cls = Classifier::new(packet, region, reference_time, settings);
    let (_, t_off) = region.window();
    let pts = scan_grid(&cls, t_off)?;
    let window = packet.mass_window(reference_time, settings.window_sigmas);
    let (intervals, excluded_mass) = assemble_intervals(&cls, t_off, &pts, window)?;
    if excluded_mass > settings.error_budget {
        return Err(Error::NearNodeMassExceeded {
            excluded: excluded_mass,
            budget: settings.error_budget,
        });
    }
    Ok(HitSet {
        reference_time,
        intervals,
        boundary_tol: settings.edge_resolution(),
        excluded_mass,
        window_tail_mass: packet.tail_mass_bound(settings.window_sigmas),
    })
}

/// Mass of a hit set on its reference slice, with an error bound combining
/// quadrature error, boundary resolution, excluded trajectories, and the
/// window tail.
fn hit_set_mass(packet: &Packet, hits: &HitSet, quad_tol: f64) -> Probability {
    let mut value = 0.0;
    let mut err = hits.excluded_mass + hits.window_tail_mass;
    for &(l, r) in &hits.intervals {
        let m = packet.mass(hits.reference_time, l, r, quad_tol);
        value += m.value;
        err += m.error;
        let rho_l = packet.density(SpacetimePoint::new(hits.reference_time, l));
        let rho_r = packet.density(SpacetimePoint::new(hits.reference_time, r));
        err += hits.boundary_tol * (rho_l + rho_r);
    }
    let clamped = value.clamp(0.0, 1.0);
    Probability { value: clamped, error_bound: err + (value - clamped).abs() }
}

/// The transition probability of the current through the region: the mass of
/// trajectories that meet it.
pub fn transition_probability(
    packet: &Packet,
    region: &Region,
    settings: &DetectionSettings,
) -> Result<Probability, Error> {
    let hits = project_region(packet, region, settings.reference_time, settings)?;
    Ok(hit_set_mass(packet, &hits, settings.quad_tol))
}

/// Transition probabilities for the whole family of windows `[t_on, T]`,
/// `T` running over `t_grid`. One scan serves every `T`: each probed
/// trajectory records its first contact time, and the family is obtained by
/// thresholding, with per-`T` boundary sharpening.
pub fn transition_curve(
    packet: &Packet,
    region: &Region,
    t_grid: &[f64],
    settings: &DetectionSettings,
) -> Result<DistributionCurve, Error> {
    settings.validate()?;
    let (t_on, _) = region.window();
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid must be nonempty"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    if t_grid[0] < t_on {
        return Err(Error::invalid("time grid must start at or after t_on"));
    }
    let t_max = *t_grid.last().unwrap();
    let family = region.with_window(t_on, t_max)?;

    let params = format!("{}; {}", packet.describe(), family.describe());
    let mut ordinate = Vec::with_capacity(t_grid.len());
    let mut error_bound = Vec::with_capacity(t_grid.len());

    if closed_form_applies(packet, &family, settings) {
        for &t in t_grid {
            let p = transition_probability(packet, &family.with_window(t_on, t)?, settings)?;
            ordinate.push(p.value);
            error_bound.push(p.error_bound);
        }
    } else {
        let cls = Classifier::new(packet, &family, settings.reference_time, settings);
        let pts = scan_grid(&cls, t_max)?;
        let window = packet.mass_window(settings.reference_time, settings.window_sigmas);
        let results: Vec<Probability> = t_grid
            .par_iter()
            .map(|&t| -> Result<Probability, Error> {
                let capped: Vec<(f64, Probe)> =
                    pts.iter().map(|&(x, p)| (x, p.thresholded(t))).collect();
                let (intervals, excluded) = assemble_intervals(&cls, t, &capped, window)?;
                if excluded > settings.error_budget {
                    return Err(Error::NearNodeMassExceeded {
                        excluded,
                        budget: settings.error_budget,
                    });
                }
                let hits = HitSet {
                    reference_time: settings.reference_time,
                    intervals,
                    boundary_tol: settings.edge_resolution(),
                    excluded_mass: excluded,
                    window_tail_mass: packet.tail_mass_bound(settings.window_sigmas),
                };
                Ok(hit_set_mass(packet, &hits, settings.quad_tol))
            })
            .collect::<Result<_, _>>()?;
        for p in results {
            ordinate.push(p.value);
            error_bound.push(p.error_bound);
        }
    }
    Ok(DistributionCurve {
        kind: CurveKind::TransitionP,
        abscissa: t_grid.to_vec(),
        ordinate,
        error_bound,
        params,
    })
}

/// Flux of the packet through the moving line `x = level + drift t`.
fn line_flux(packet: &Packet, level: f64, drift: f64, t: f64) -> f64 {
    let c = packet.current(SpacetimePoint::new(t, level + drift * t));
    // in the line's co-moving frame the counted flux is j - drift * rho
    c.flux - drift * c.density
}

/// Sign-change breakpoints of the line flux on [a, b], located by sampling
/// and bisection; passed to the quadrature so |flux| integrates cleanly.
fn flux_sign_breaks(packet: &Packet, level: f64, drift: f64, a: f64, b: f64) -> Vec<f64> {
    const SAMPLES: usize = 128;
    let mut breaks = Vec::new();
    if !(b > a) {
        return breaks;
    }
    let f = |t: f64| line_flux(packet, level, drift, t);
    let mut prev_t = a;
    let mut prev_v = f(a);
    for j in 1..=SAMPLES {
        let t = a + (b - a) * j as f64 / SAMPLES as f64;
        let v = f(t);
        if prev_v != 0.0 && v != 0.0 && (prev_v > 0.0) != (v > 0.0) {
            let (mut lo, mut hi) = (prev_t, t);
            let mut f_lo = prev_v;
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                let fm = f(m);
                if fm == 0.0 || hi - lo < 1e-13 * (1.0 + m.abs()) {
                    lo = m;
                    break;
                }
                if (f_lo > 0.0) == (fm > 0.0) {
                    lo = m;
                    f_lo = fm;
                } else {
                    hi = m;
                }
            }
            breaks.push(0.5 * (lo + hi));
        }
        prev_t = t;
        prev_v = v;
    }
    breaks
}

/// The crossing-count integral along the detector line: integral of |flux|
/// over `[t_on, t]`. Counts every crossing, so it dominates the transition
/// probability.
pub fn leavens_probability(
    packet: &Packet,
    level: f64,
    t_on: f64,
    t: f64,
    settings: &DetectionSettings,
) -> Result<Probability, Error> {
    settings.validate()?;
    if t < t_on {
        return Err(Error::invalid("leavens_probability requires t >= t_on"));
    }
    if packet.is_gaussian() && !settings.force_numeric {
        let value = analytic::current_count_window(level, t_on, t);
        return Ok(Probability { value, error_bound: 8.0 * f64::EPSILON * (1.0 + value) });
    }
    let breaks = flux_sign_breaks(packet, level, 0.0, t_on, t);
    let r = quad::integrate_split(
        |u| line_flux(packet, level, 0.0, u).abs(),
        t_on,
        t,
        &breaks,
        settings.quad_tol,
    );
    Ok(Probability { value: r.value, error_bound: r.error })
}

/// Total crossing count `[t_on, infinity)`: the normalization constant of the
/// conditional crossing distribution. Numerically the integral runs to a
/// cutoff and the tail is fitted to the free-decay law `|flux| ~ C / t^2`;
/// packets whose tail does not fit that law are rejected.
pub fn leavens_normalization(
    packet: &Packet,
    level: f64,
    t_on: f64,
    settings: &DetectionSettings,
) -> Result<Probability, Error> {
    settings.validate()?;
    if packet.is_gaussian() && !settings.force_numeric {
        let value = analytic::current_count_window(level, t_on, f64::INFINITY);
        return Ok(Probability { value, error_bound: 8.0 * f64::EPSILON * (1.0 + value) });
    }
    let cutoff = 1e4 * level.abs().max(1.0);
    let base = leavens_probability(packet, level, t_on, cutoff, settings)?;
    let c_half = line_flux(packet, level, 0.0, 0.5 * cutoff).abs() * (0.5 * cutoff).powi(2);
    let c_full = line_flux(packet, level, 0.0, cutoff).abs() * cutoff * cutoff;
    let scale = c_full.max(c_half);
    let mismatch = if scale > 0.0 { (c_full - c_half).abs() / scale } else { 0.0 };
    if mismatch > 0.05 {
        return Err(Error::TailNotConvergent { spread: mismatch });
    }
    let tail = c_full / cutoff;
    Ok(Probability {
        value: base.value + tail,
        error_bound: base.error_bound + tail * mismatch.max(1e-3),
    })
}

/// Crossing-count curve over a grid of cap times.
pub fn leavens_curve(
    packet: &Packet,
    level: f64,
    t_on: f64,
    t_grid: &[f64],
    settings: &DetectionSettings,
) -> Result<DistributionCurve, Error> {
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid must be nonempty"));
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    let results: Vec<Probability> = t_grid
        .par_iter()
        .map(|&t| leavens_probability(packet, level, t_on, t, settings))
        .collect::<Result<_, _>>()?;
    Ok(DistributionCurve {
        kind: CurveKind::LeavensPL,
        abscissa: t_grid.to_vec(),
        ordinate: results.iter().map(|p| p.value).collect(),
        error_bound: results.iter().map(|p| p.error_bound).collect(),
        params: format!("{}; line(level={level}), t_on={t_on}", packet.describe()),
    })
}

/// Long-time limit of the transition probability for the window family
/// `[t_on, T]`, `T -> infinity`.
fn transition_limit(
    packet: &Packet,
    region: &Region,
    settings: &DetectionSettings,
) -> Result<Probability, Error> {
    if closed_form_applies(packet, region, settings) {
        if let Region::PointDetector { level, t_on, .. } = region {
            // every orbit between the axis and the level eventually reaches it
            let hits = gaussian_point_hit_set(*level, *t_on, f64::INFINITY, 0.0);
            let mut h = hits;
            h.intervals = match h.intervals.first() {
                Some(&(a, b)) => vec![(a.min(0.0).min(b), a.max(0.0).max(b))],
                None => vec![],
            };
            if *level != 0.0 {
                let edge = *level;
                h.intervals = vec![if edge > 0.0 { (0.0, edge) } else { (edge, 0.0) }];
            }
            return Ok(hit_set_mass(packet, &h, settings.quad_tol));
        }
    }
    // numeric fallback: evaluate at a generous cap and bound the remainder
    // by the crossing-count tail of the region's far boundary
    let (t_on, _) = region.window();
    let cap_level = match region {
        Region::PointDetector { level, .. } => *level,
        Region::Slab { x_lo, x_hi, .. } => if x_hi.abs() > x_lo.abs() { *x_hi } else { *x_lo },
        Region::Predicate { bbox, .. } => {
            if bbox.x_hi.abs() > bbox.x_lo.abs() { bbox.x_hi } else { bbox.x_lo }
        }
    };
    let t_cap = 100.0 * cap_level.abs().max(1.0);
    let capped = region.with_window(t_on, t_cap.max(t_on + 1.0))?;
    let p = transition_probability(packet, &capped, settings)?;
    let c_tail = line_flux(packet, cap_level, 0.0, t_cap).abs() * t_cap * t_cap;
    Ok(Probability { value: p.value, error_bound: p.error_bound + c_tail / t_cap })
}

/// Conditional arrival-time distribution: the transition curve normalized by
/// its long-time limit.
pub fn conditional_distribution(
    packet: &Packet,
    region: &Region,
    t_grid: &[f64],
    settings: &DetectionSettings,
) -> Result<DistributionCurve, Error> {
    let limit = transition_limit(packet, region, settings)?;
    if limit.value < 1e-12 {
        return Err(Error::DegenerateConditioning { norm: limit.value });
    }
    let curve = transition_curve(packet, region, t_grid, settings)?;
    let ordinate: Vec<f64> = curve.ordinate.iter().map(|p| p / limit.value).collect();
    let error_bound: Vec<f64> = curve
        .ordinate
        .iter()
        .zip(&curve.error_bound)
        .map(|(p, e)| (e + p * limit.error_bound / limit.value) / limit.value)
        .collect();
    Ok(DistributionCurve {
        kind: CurveKind::ConditionalW,
        abscissa: curve.abscissa,
        ordinate,
        error_bound,
        params: curve.params,
    })
}

/// Density of the conditional arrival-time distribution on a grid: exact for
/// the plain Gaussian, a centered difference of the conditional curve
/// otherwise.
pub fn arrival_density_curve(
    packet: &Packet,
    level: f64,
    t_grid: &[f64],
    settings: &DetectionSettings,
) -> Result<DistributionCurve, Error> {
    if packet.is_gaussian() && !settings.force_numeric {
        let ordinate: Vec<f64> =
            t_grid.iter().map(|&t| analytic::arrival_density(level, t)).collect();
        return Ok(DistributionCurve {
            kind: CurveKind::DensityWTilde,
            abscissa: t_grid.to_vec(),
            ordinate,
            error_bound: vec![1e-15; t_grid.len()],
            params: format!("gaussian; line(level={level}), t_on=0"),
        });
    }
    arrival_density_fd(packet, level, t_grid, settings)
}

/// Arrival-time density by centered finite differences of the conditional
/// distribution (the generic path; also a cross-check of the closed form).
pub fn arrival_density_fd(
    packet: &Packet,
    level: f64,
    t_grid: &[f64],
    settings: &DetectionSettings,
) -> Result<DistributionCurve, Error> {
    let region = Region::point_detector(level, 0.0, 1.0)?;
    let limit = transition_limit(packet, &region, settings)?;
    if limit.value < 1e-12 {
        return Err(Error::DegenerateConditioning { norm: limit.value });
    }
    let w_at = |t: f64| -> Result<f64, Error> {
        if t <= 0.0 {
            return Ok(0.0);
        }
        let p = transition_probability(packet, &region.with_window(0.0, t)?, settings)?;
        Ok(p.value / limit.value)
    };
    let mut ordinate = Vec::with_capacity(t_grid.len());
    let mut error_bound = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let h = 1e-3 * t.abs().max(0.1);
        let lo = (t - h).max(0.0);
        let hi = t + h;
        let d = (w_at(hi)? - w_at(lo)?) / (hi - lo);
        ordinate.push(d);
        error_bound.push(1e-6 + 2.0 * limit.error_bound / limit.value / (hi - lo));
    }
    Ok(DistributionCurve {
        kind: CurveKind::DensityWTilde,
        abscissa: t_grid.to_vec(),
        ordinate,
        error_bound,
        params: format!("{}; line(level={level}), t_on=0", packet.describe()),
    })
}

/// Diagnostics of the slowly-decaying arrival-time density: the `t^{-2}`
/// tail coefficient and the logarithmic growth of the truncated mean.
#[derive(Debug, Clone)]
pub struct DivergentMeanReport {
    /// Limit of `t^2 w(t)` as `t -> infinity`.
    pub limit: f64,
    /// `(t, relative deviation of t^2 w(t) from the limit)`.
    pub ratio_deviations: Vec<(f64, f64)>,
    /// `(decade end, relative deviation of the truncated-mean growth from
    /// limit * ln 10)`.
    pub decade_deviations: Vec<(f64, f64)>,
    /// `t^2 w(t)` sampled beyond 10x the level, for the monotone approach.
    pub tail_samples: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Check that the mean arrival time diverges logarithmically: `t^2 w(t)`
/// approaches a positive limit, so the truncated mean grows by
/// `limit * ln 10` per decade. Closed-form packet only.
pub fn divergent_mean_check(
    packet: &Packet,
    level: f64,
    _settings: &DetectionSettings,
) -> Result<DivergentMeanReport, Error> {
    if !packet.is_gaussian() {
        return Err(Error::invalid("divergent-mean diagnostics need the closed-form packet"));
    }
    let lambda = level;
    let limit = analytic::mean_asymptote(lambda);
    let mut pass = limit > 0.0;

    let mut ratio_deviations = Vec::new();
    for &t in &[1e3, 1e4, 1e5] {
        let dev = (t * t * analytic::arrival_density(lambda, t) - limit).abs() / limit;
        pass &= dev < 0.01;
        ratio_deviations.push((t, dev));
    }

    let mut decade_deviations = Vec::new();
    let mut prev = analytic::truncated_mean(lambda, 1e3, 1e-9).value;
    for &cap in &[1e4, 1e5] {
        let cur = analytic::truncated_mean(lambda, cap, 1e-9).value;
        let dev = ((cur - prev) / (limit * std::f64::consts::LN_10) - 1.0).abs();
        pass &= dev < 0.05;
        decade_deviations.push((cap, dev));
        prev = cur;
    }

    let mut tail_samples = Vec::new();
    let mut t = 10.0 * lambda.abs().max(1.0);
    let mut last = f64::NEG_INFINITY;
    while t <= 1.01e5 {
        let v = t * t * analytic::arrival_density(lambda, t);
        pass &= v >= last;
        tail_samples.push((t, v));
        last = v;
        t *= 2.0;
    }

    Ok(DivergentMeanReport { limit, ratio_deviations, decade_deviations, tail_samples, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavepacket::PacketTerm;
    use num_complex::Complex64;

    const SQRT_3: f64 = 1.7320508075688772;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a:e} vs {b:e} (diff {:e})", (a - b).abs());
    }

    fn two_hump() -> Packet {
        let c = Complex64::new(1.0, 0.0);
        Packet::superposed(vec![
            PacketTerm::new(c, GalileanBoost::translation(0.0, -2.0)),
            PacketTerm::new(c * 0.8, GalileanBoost::translation(0.0, 2.0)),
        ])
        .unwrap()
    }

    fn antisymmetric() -> Packet {
        let c = Complex64::new(1.0, 0.0);
        Packet::superposed(vec![
            PacketTerm::new(c, GalileanBoost::translation(0.0, -2.0)),
            PacketTerm::new(-c, GalileanBoost::translation(0.0, 2.0)),
        ])
        .unwrap()
    }

    #[test]
    fn closed_form_projection_intervals() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let region = Region::point_detector(2.0, 0.0, 3.0).unwrap();
        let hits = project_region(&packet, &region, 0.0, &settings).unwrap();
        assert_eq!(hits.intervals.len(), 1);
        let (a, b) = hits.intervals[0];
        close(a, 2.0 / spread(3.0), 1e-15);
        close(b, 2.0, 1e-15);

        // early activation: constant interval while the detector waits for
        // re-expansion
        let early = Region::point_detector(100.0, -100.0 * SQRT_3, 50.0).unwrap();
        let hits = project_region(&packet, &early, 0.0, &settings).unwrap();
        let (a, b) = hits.intervals[0];
        close(a, 100.0 / (1.0f64 + 3e4).sqrt(), 1e-12);
        close(b, 100.0, 1e-12);
        let later = Region::point_detector(100.0, -100.0 * SQRT_3, 120.0).unwrap();
        let hits2 = project_region(&packet, &later, 0.0, &settings).unwrap();
        close(hits2.intervals[0].0, a, 1e-15);
        close(hits2.intervals[0].1, b, 1e-15);
    }

    #[test]
    fn transition_probability_closed_forms() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let p = transition_probability(
            &packet,
            &Region::point_detector(100.0, 0.0, 100.0).unwrap(),
            &settings,
        )
        .unwrap();
        close(p.value, analytic::delta_l(100.0, 100.0), 1e-15);
        // saturation at half the total mass on the detector's side
        let p = transition_probability(
            &packet,
            &Region::point_detector(100.0, 0.0, 1e12).unwrap(),
            &settings,
        )
        .unwrap();
        close(p.value, 0.5, 1e-9);
    }

    #[test]
    fn full_slab_captures_everything() {
        let settings = DetectionSettings::default();
        for packet in [Packet::gaussian(), two_hump()] {
            let (lo, hi) = packet.mass_window(0.0, 9.0);
            let region = Region::slab(lo, hi, -0.5, 0.5).unwrap();
            let p = transition_probability(&packet, &region, &settings).unwrap();
            assert!(p.value >= 1.0 - 1e-9, "{}", p.value);
        }
    }

    #[test]
    fn numeric_scan_matches_the_closed_form() {
        let packet = Packet::gaussian();
        let mut settings = DetectionSettings::default();
        settings.force_numeric = true;
        let region = Region::point_detector(1.5, 0.0, 5.0).unwrap();
        let numeric = transition_probability(&packet, &region, &settings).unwrap();
        settings.force_numeric = false;
        let closed = transition_probability(&packet, &region, &settings).unwrap();
        close(numeric.value, closed.value, 1e-7);
        assert!(numeric.error_bound < 1e-6);
    }

    #[test]
    fn hidden_thin_intervals_are_recovered() {
        // hit set [0.5/s(0.3), 0.5] is far thinner than the coarse scan grid,
        // so every grid point misses; the opposite-side jump exposes it
        let packet = Packet::gaussian();
        let mut settings = DetectionSettings::default();
        settings.force_numeric = true;
        settings.grid_points = 64;
        let region = Region::point_detector(0.5, -0.3, 0.3).unwrap();
        let numeric = transition_probability(&packet, &region, &settings).unwrap();
        settings.force_numeric = false;
        let closed = transition_probability(&packet, &region, &settings).unwrap();
        assert!(closed.value > 0.007); // the interval carries real mass
        close(numeric.value, closed.value, 1e-7);
    }

    #[test]
    fn slab_and_equivalent_predicate_agree() {
        let packet = two_hump();
        let settings = DetectionSettings::default();
        let slab = Region::slab(0.75, 1.25, 0.0, 2.0).unwrap();
        let pred = Region::predicate(
            |p| (0.0..=2.0).contains(&p.t) && (0.75..=1.25).contains(&p.x),
            BoundingBox { t_on: 0.0, t_off: 2.0, x_lo: 0.75, x_hi: 1.25 },
        )
        .unwrap();
        let ps = transition_probability(&packet, &slab, &settings).unwrap();
        let pp = transition_probability(&packet, &pred, &settings).unwrap();
        close(ps.value, pp.value, 1e-5);
        assert!(ps.value > 0.05);
    }

    #[test]
    fn nodes_are_excluded_and_budgeted() {
        // antisymmetric packet: a node pinned at x = 0; an odd grid puts a
        // probe right on it
        let packet = antisymmetric();
        let mut settings = DetectionSettings::default();
        settings.grid_points = 511;
        let region = Region::slab(-0.05, 0.05, 0.0, 1.0).unwrap();
        let hits = project_region(&packet, &region, 0.0, &settings).unwrap();
        assert!(hits.excluded_mass > 0.0);
        // the node cell carries almost no mass, so excluding it is harmless
        assert!(hits.excluded_mass < 1e-12, "{}", hits.excluded_mass);

        settings.error_budget = 1e-16;
        let err = project_region(&packet, &region, 0.0, &settings);
        assert!(matches!(err, Err(Error::NearNodeMassExceeded { .. })), "{err:?}");
    }

    #[test]
    fn slice_choice_does_not_change_the_probability() {
        let packet = Packet::gaussian();
        let region = Region::point_detector(1.2, 0.5, 3.0).unwrap();
        let mut settings = DetectionSettings::default();
        settings.force_numeric = true;
        let mut values = Vec::new();
        for ref_t in [-1.0, 0.0, 2.0] {
            settings.reference_time = ref_t;
            values.push(transition_probability(&packet, &region, &settings).unwrap());
        }
        for w in values.windows(2) {
            let tol = 2.0 * (w[0].error_bound + w[1].error_bound) + 1e-9;
            close(w[0].value, w[1].value, tol);
        }
    }

    #[test]
    fn transition_curve_walks_the_branches() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        // single-branch family: curve equals the closed-form count
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 5.0).collect();
        let region = Region::point_detector(100.0, 0.0, 100.0).unwrap();
        let curve = transition_curve(&packet, &region, &grid, &settings).unwrap();
        curve.validate().unwrap();
        for (&t, &p) in curve.abscissa.iter().zip(&curve.ordinate) {
            close(p, analytic::delta_l(100.0, t), 1e-14);
        }

        // early-activation family: constant plateau before re-expansion
        let early = Region::point_detector(100.0, -100.0 * SQRT_3, 0.0).unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 30.0).collect();
        let curve = transition_curve(&packet, &early, &grid, &settings).unwrap();
        curve.validate().unwrap();
        for (&t, &p) in curve.abscissa.iter().zip(&curve.ordinate) {
            close(p, analytic::detector_curve_from(100.0, -100.0 * SQRT_3, t).unwrap(), 1e-14);
        }
    }

    #[test]
    fn numeric_curve_on_a_coarse_grid() {
        let packet = Packet::gaussian();
        let mut settings = DetectionSettings::default();
        settings.force_numeric = true;
        let region = Region::point_detector(1.0, 0.0, 4.0).unwrap();
        let grid = [0.5, 1.0, 2.0, 4.0];
        let curve = transition_curve(&packet, &region, &grid, &settings).unwrap();
        curve.validate().unwrap();
        for (&t, &p) in curve.abscissa.iter().zip(&curve.ordinate) {
            close(p, analytic::delta_l(1.0, t), 1e-7);
        }
    }

    #[test]
    fn crossing_count_matches_and_dominates() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        // fresh detector: single crossings, count equals probability
        let pl = leavens_probability(&packet, 100.0, 0.0, 80.0, &settings).unwrap();
        close(pl.value, analytic::delta_l(100.0, 80.0), 1e-14);

        // early activation: contraction-era crossings are counted twice
        let t_a = -100.0 * SQRT_3;
        let pl = leavens_probability(&packet, 100.0, t_a, 100.0, &settings).unwrap();
        close(pl.value, analytic::current_count_from(100.0, t_a, 100.0).unwrap(), 1e-14);
        let p = transition_probability(
            &packet,
            &Region::point_detector(100.0, t_a, 100.0).unwrap(),
            &settings,
        )
        .unwrap();
        assert!(pl.value > p.value + 0.05);
    }

    #[test]
    fn numeric_crossing_count_against_closed_form() {
        let packet = Packet::gaussian();
        let mut settings = DetectionSettings::default();
        settings.force_numeric = true;
        let t_a = -2.0;
        let numeric = leavens_probability(&packet, 1.0, t_a, 3.0, &settings).unwrap();
        let closed = analytic::current_count_window(1.0, t_a, 3.0);
        close(numeric.value, closed, 1e-9);

        let norm = leavens_normalization(&packet, 1.0, t_a, &settings).unwrap();
        let closed = analytic::current_count_window(1.0, t_a, f64::INFINITY);
        close(norm.value, closed, 1e-4);
        assert!(norm.error_bound < 1e-3);
    }

    #[test]
    fn union_probability_is_not_additive() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let t_a = -100.0 * SQRT_3;
        let t_mid = 0.5 * (-t_a);
        let before = Region::point_detector(100.0, t_a, 0.0).unwrap();
        let after = Region::point_detector(100.0, 0.0, t_mid).unwrap();
        let union = Region::point_detector(100.0, t_a, t_mid).unwrap();
        let p_before = transition_probability(&packet, &before, &settings).unwrap();
        let p_after = transition_probability(&packet, &after, &settings).unwrap();
        let p_union = transition_probability(&packet, &union, &settings).unwrap();
        let margin = p_before.value + p_after.value - p_union.value;
        assert!(margin > 0.05, "margin {margin}");
        // the overlap is exactly the fresh-detector mass of the second piece
        close(margin, analytic::delta_l(100.0, t_mid), 1e-12);
    }

    #[test]
    fn conditional_distribution_normalizes() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let region = Region::point_detector(100.0, 0.0, 1.0).unwrap();
        let grid = [0.0, 50.0, 100.0, 200.0, 1000.0];
        let w = conditional_distribution(&packet, &region, &grid, &settings).unwrap();
        w.validate().unwrap();
        close(w.ordinate[0], 0.0, 1e-15);
        close(w.ordinate[2], analytic::conditional_fraction(100.0, 100.0), 1e-12);
        assert!(w.ordinate[4] < 1.0);
    }

    #[test]
    fn density_matches_its_finite_difference() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let grid = [0.1, 1.0, 50.0, 100.0, 500.0];
        let exact = arrival_density_curve(&packet, 100.0, &grid, &settings).unwrap();
        let fd = arrival_density_fd(&packet, 100.0, &grid, &settings).unwrap();
        for ((&a, &b), &t) in exact.ordinate.iter().zip(&fd.ordinate).zip(&grid) {
            close(a, analytic::arrival_density(100.0, t), 1e-15);
            close(a, b, 1e-6);
        }
    }

    #[test]
    fn divergent_mean_report_passes_for_the_gaussian() {
        let packet = Packet::gaussian();
        let report = divergent_mean_check(&packet, 100.0, &DetectionSettings::default()).unwrap();
        assert!(report.pass, "{report:?}");
        close(report.limit, 112.8379167095513, 1e-10);
        assert!(divergent_mean_check(&two_hump(), 1.0, &DetectionSettings::default()).is_err());
    }

    #[test]
    fn regions_transform_and_return() {
        let g = GalileanBoost::new(0.7, true, -0.4, 1.2, 0.3);
        let region = Region::point_detector(2.0, -1.0, 4.0).unwrap();
        let there = region.boosted(&g);
        let back = there.boosted(&g.inverse());
        if let (Region::PointDetector { level, drift, t_on, t_off },
                Region::PointDetector { level: l2, drift: d2, t_on: on2, t_off: off2 }) =
            (&region, &back)
        {
            close(*l2, *level, 1e-12);
            close(*d2, *drift, 1e-12);
            close(*on2, *t_on, 1e-12);
            close(*off2, *t_off, 1e-12);
        } else {
            panic!("variant changed under boosting");
        }
        // the boosted worldline is the image of the original one
        if let Region::PointDetector { level, drift, .. } = there {
            for t in [-1.0, 0.5, 4.0] {
                let p = g.apply(SpacetimePoint::new(t, 2.0));
                close(level + drift * p.t, p.x, 1e-12);
            }
        }
    }

    #[test]
    fn boosting_packet_and_region_together_is_invariant() {
        let packet = Packet::gaussian();
        let settings = DetectionSettings::default();
        let region = Region::point_detector(1.0, 0.2, 2.5).unwrap();
        let base = transition_probability(&packet, &region, &settings).unwrap();
        let g = GalileanBoost::new(0.6, false, 0.3, -0.8, 0.0);
        let moved = transition_probability(
            &packet.boosted(&g).unwrap(),
            &region.boosted(&g),
            &settings,
        )
        .unwrap();
        let tol = 2.0 * (base.error_bound + moved.error_bound) + 1e-8;
        close(moved.value, base.value, tol);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(Region::point_detector(1.0, 2.0, 1.0).is_err());
        assert!(Region::slab(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(Region::slab(f64::INFINITY, 2.0, 0.0, 1.0).is_err());
        let mut settings = DetectionSettings::default();
        settings.grid_points = 2;
        let err = transition_probability(
            &two_hump(),
            &Region::slab(-1.0, 1.0, 0.0, 1.0).unwrap(),
            &settings,
        );
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }
}
