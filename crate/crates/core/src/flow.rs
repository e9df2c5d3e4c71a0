//! Trajectories of the probability transport: integral curves of the
//! velocity field `flux / density`.
//!
//! The integrator is an embedded Dormand–Prince 5(4) pair with the standard
//! quartic dense-output interpolant. Crossings of watch lines (straight
//! spacetime lines `x = offset + slope t`) are located on the interpolant and
//! refined by bisection; tangential grazes produce no events. Integration
//! runs in either time direction by taking steps of the appropriate sign —
//! the field itself is never reversed.
//!
//! For the standing Gaussian packet the transport has the closed form
//! [`gaussian_flow_map`], used throughout as the oracle for the integrator.

use crate::analytic::spread;
use crate::error::Error;
use crate::spacetime::SpacetimePoint;
use crate::wavepacket::Packet;

/// Closed-form transport of an event by `lambda` units of time along the
/// standing Gaussian's flow:
///
/// ```text
/// F_lambda(t, x) = ( t + lambda,  x * sqrt(1 + (t+lambda)^2) / sqrt(1 + t^2) ).
/// ```
pub fn gaussian_flow_map(p: SpacetimePoint, lambda: f64) -> SpacetimePoint {
    let t1 = p.t + lambda;
    SpacetimePoint::new(t1, p.x * spread(t1) / spread(p.t))
}

/// Deviation from the one-parameter group law of the closed-form map,
/// `|F_s(F_t(p)) - F_{s+t}(p)|` in the position component.
pub fn flow_map_group_deviation(p: SpacetimePoint, s: f64, t: f64) -> f64 {
    (gaussian_flow_map(gaussian_flow_map(p, t), s).x - gaussian_flow_map(p, s + t).x).abs()
}

/// A velocity field that trajectories can be integrated through.
///
/// `velocity` returns `None` where the field is undefined because the
/// density has fallen to the packet's node floor; integration then aborts
/// with [`Error::NearNode`].
pub trait VelocityField: Sync {
    fn velocity(&self, t: f64, x: f64) -> Option<f64>;
}

impl VelocityField for Packet {
    fn velocity(&self, t: f64, x: f64) -> Option<f64> {
        match self {
            Packet::Gaussian(g) => Some(g.velocity(SpacetimePoint::new(t, x))),
            Packet::Superposed(s) => {
                let c = s.current(SpacetimePoint::new(t, x));
                if c.density <= s.density_floor() {
                    None
                } else {
                    Some(c.velocity)
                }
            }
        }
    }
}

/// Fault-injection wrapper: the inner field plus a constant velocity offset.
/// A nonzero offset breaks probability transport on purpose, which is how
/// the self-check machinery is itself tested.
pub struct PerturbedField<'a, F: VelocityField + ?Sized> {
    pub inner: &'a F,
    pub offset: f64,
}

impl<F: VelocityField + ?Sized> VelocityField for PerturbedField<'_, F> {
    fn velocity(&self, t: f64, x: f64) -> Option<f64> {
        self.inner.velocity(t, x).map(|v| v + self.offset)
    }
}

/// Tolerances and step limits of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Width (in time) to which crossing events are refined.
    pub event_refine_tol: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self { rel_tol: 1e-9, abs_tol: 1e-12, max_step: 0.1, event_refine_tol: 1e-12 }
    }
}

/// A straight watch line `x = offset + slope * t`; the integrator records
/// every transversal crossing of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WatchLine {
    pub offset: f64,
    pub slope: f64,
}

impl WatchLine {
    pub fn fixed(level: f64) -> Self {
        Self { offset: level, slope: 0.0 }
    }

    pub fn position(&self, t: f64) -> f64 {
        self.offset + self.slope * t
    }
}

/// A recorded transversal crossing of a watch line. `direction` is the sign
/// of `d/dt (x - line)` in forward time: +1 when the trajectory overtakes
/// the line upward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossingEvent {
    pub watch: usize,
    pub t: f64,
    pub x: f64,
    pub direction: i8,
}

/// One accepted integrator step with its dense-output coefficients.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep {
    t0: f64,
    h: f64,
    c: [f64; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> f64 {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        self.c[0] + th * (self.c[1] + th1 * (self.c[2] + th * (self.c[3] + th1 * self.c[4])))
    }

    fn t_range(&self) -> (f64, f64) {
        if self.h >= 0.0 {
            (self.t0, self.t0 + self.h)
        } else {
            (self.t0 + self.h, self.t0)
        }
    }
}

/// An integrated trajectory: accepted samples (ascending in time), dense
/// interpolants, and the crossing events of the watch lines.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub start: SpacetimePoint,
    pub samples: Vec<SpacetimePoint>,
    steps: Vec<DenseStep>,
    pub events: Vec<CrossingEvent>,
    /// Cleared when the trajectory passed near a node (set only on the
    /// partial trajectory attached to [`Error::NearNode`]).
    pub reliable: bool,
}

impl Trajectory {
    /// Covered time interval.
    pub fn span(&self) -> (f64, f64) {
        let first = self.samples.first().map_or(self.start.t, |p| p.t);
        let last = self.samples.last().map_or(self.start.t, |p| p.t);
        (first, last)
    }

    /// Dense-output position at any time within the span.
    pub fn position(&self, t: f64) -> Option<f64> {
        if self.steps.is_empty() {
            return (t == self.start.t).then_some(self.start.x);
        }
        let (lo, hi) = self.span();
        if t < lo || t > hi {
            return None;
        }
        // binary search on the (ascending) step ranges
        let idx = self
            .steps
            .partition_point(|s| s.t_range().1 < t)
            .min(self.steps.len() - 1);
        Some(self.steps[idx].eval(t))
    }

    pub fn end(&self) -> SpacetimePoint {
        *self.samples.last().unwrap_or(&self.start)
    }

    /// First event on any watch at or after `t_from`.
    pub fn first_event_from(&self, t_from: f64) -> Option<&CrossingEvent> {
        self.events.iter().find(|e| e.t >= t_from)
    }

    fn sort_ascending(&mut self) {
        self.samples.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
        self.steps.sort_by(|a, b| a.t_range().0.partial_cmp(&b.t_range().0).unwrap());
        self.events.sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap());
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Error coefficients (5th order solution minus embedded 4th order).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output coefficients.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Subsample count per step for event scanning.
const EVENT_SCAN: usize = 8;

struct EventScanner<'a> {
    watches: &'a [WatchLine],
    /// last seen nonzero sign of x - line, per watch
    last_sign: Vec<f64>,
    /// watches on which the start point sits exactly
    pending_start: Vec<usize>,
    refine_tol: f64,
}

impl<'a> EventScanner<'a> {
    fn new(watches: &'a [WatchLine], start: SpacetimePoint, refine_tol: f64) -> Self {
        let mut last_sign = Vec::with_capacity(watches.len());
        let mut pending_start = Vec::new();
        for (i, w) in watches.iter().enumerate() {
            let q = start.x - w.position(start.t);
            if q == 0.0 {
                pending_start.push(i);
            }
            last_sign.push(sign_of(q));
        }
        Self { watches, last_sign, pending_start, refine_tol }
    }

    /// Scan one accepted step for crossings; `events` receives them in
    /// integration order.
    fn scan(&mut self, step: &DenseStep, start_t: f64, events: &mut Vec<CrossingEvent>) {
        for (w, line) in self.watches.iter().enumerate() {
            let q = |t: f64| step.eval(t) - line.position(t);
            // subsample times in integration order
            let mut ts = [0.0; EVENT_SCAN + 1];
            for (j, tj) in ts.iter_mut().enumerate() {
                *tj = step.t0 + step.h * j as f64 / EVENT_SCAN as f64;
            }

            // resolve a start point that sat exactly on the line
            if let Some(pos) = self.pending_start.iter().position(|&pw| pw == w) {
                let probe = q(ts[1]);
                if probe != 0.0 {
                    self.pending_start.swap_remove(pos);
                    let forward = step.h > 0.0;
                    let dir = if forward { sign_of(probe) } else { -sign_of(probe) };
                    events.push(CrossingEvent {
                        watch: w,
                        t: start_t,
                        x: line.position(start_t),
                        direction: dir as i8,
                    });
                    self.last_sign[w] = sign_of(probe);
                }
            }

            for j in 0..EVENT_SCAN {
                let (ta, tb) = (ts[j], ts[j + 1]);
                let (qa, qb) = (q(ta), q(tb));
                let sa = if qa == 0.0 { self.last_sign[w] } else { sign_of(qa) };
                let sb = sign_of(qb);
                if sb != 0.0 && sa != 0.0 && sa != sb {
                    let t_ev = refine_crossing(&q, ta, tb, self.refine_tol);
                    push_event(events, self.watches, w, t_ev, step, self.refine_tol);
                    self.last_sign[w] = sb;
                    continue;
                }
                if sb != 0.0 {
                    self.last_sign[w] = sb;
                }
                // same sign at both ends: look for a thin dip through the
                // line via an interior extremum of q
                if sa == sb && sa != 0.0 {
                    let dq = |t: f64| {
                        let d = 1e-6 * step.h.abs().max(1e-12);
                        (q(t + d) - q(t - d)) / (2.0 * d)
                    };
                    let (da, db) = (dq(ta), dq(tb));
                    if da != 0.0 && db != 0.0 && sign_of(da) != sign_of(db) {
                        let t_ext = refine_crossing(&dq, ta, tb, self.refine_tol);
                        let q_ext = q(t_ext);
                        if q_ext != 0.0 && sign_of(q_ext) != sa {
                            let t1 = refine_crossing(&q, ta, t_ext, self.refine_tol);
                            let t2 = refine_crossing(&q, t_ext, tb, self.refine_tol);
                            push_event(events, self.watches, w, t1, step, self.refine_tol);
                            push_event(events, self.watches, w, t2, step, self.refine_tol);
                        }
                    }
                }
            }
        }
    }
}

fn sign_of(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Bisect a sign change of `f` between `ta` and `tb` (any order) down to
/// `tol` in time.
fn refine_crossing<F: Fn(f64) -> f64>(f: &F, ta: f64, tb: f64, tol: f64) -> f64 {
    let (mut a, mut b) = (ta, tb);
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fa > 0.0) == (fm > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn push_event(
    events: &mut Vec<CrossingEvent>,
    watches: &[WatchLine],
    w: usize,
    t_ev: f64,
    step: &DenseStep,
    refine_tol: f64,
) {
    // forward-time direction from the interpolant around the event
    let line = &watches[w];
    let (lo, hi) = step.t_range();
    let d = ((hi - lo) / (4.0 * EVENT_SCAN as f64)).max(refine_tol);
    let tm = (t_ev - d).max(lo);
    let tp = (t_ev + d).min(hi);
    let qm = step.eval(tm) - line.position(tm);
    let qp = step.eval(tp) - line.position(tp);
    let dir = sign_of(qp - qm);
    if dir == 0.0 {
        return;
    }
    // drop duplicates from adjacent subsample cells or step boundaries
    if events
        .iter()
        .any(|e| e.watch == w && (e.t - t_ev).abs() <= 8.0 * refine_tol)
    {
        return;
    }
    events.push(CrossingEvent { watch: w, t: t_ev, x: line.position(t_ev), direction: dir as i8 });
}

/// Integrate from `start.t` to `t_end` (either direction), recording
/// crossings of the watch lines.
pub fn integrate<F: VelocityField + ?Sized>(
    field: &F,
    start: SpacetimePoint,
    t_end: f64,
    settings: &IntegratorSettings,
    watches: &[WatchLine],
) -> Result<Trajectory, Error> {
    let mut traj = Trajectory {
        start,
        samples: vec![start],
        steps: Vec::new(),
        events: Vec::new(),
        reliable: true,
    };
    if t_end == start.t {
        return Ok(traj);
    }
    let dir = if t_end > start.t { 1.0 } else { -1.0 };
    let mut scanner = EventScanner::new(watches, start, settings.event_refine_tol);

    let mut t = start.t;
    let mut x = start.x;
    let eval = |t: f64, x: f64, traj: &mut Trajectory| -> Result<f64, Error> {
        field.velocity(t, x).ok_or_else(|| {
            let mut partial = std::mem::take(traj);
            partial.reliable = false;
            partial.sort_ascending();
            Error::NearNode { t, x, partial: Box::new(partial) }
        })
    };
    let mut k1 = eval(t, x, &mut traj)?;
    let mut h = dir * settings.max_step.min((t_end - start.t).abs());

    while (t_end - t) * dir > 0.0 {
        let tiny = 8.0 * f64::EPSILON * t.abs().max(1.0);
        if (t_end - t).abs() < tiny {
            // within roundoff of the endpoint: snap instead of stepping
            traj.samples.push(SpacetimePoint::new(t_end, x));
            break;
        }
        h = dir * h.abs().min(settings.max_step).min((t_end - t).abs());
        if h.abs() < tiny {
            return Err(Error::StepFailure { t });
        }

        let mut k = [k1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut x1 = x;
        for s in 1..7 {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += A[s - 1][j] * kj;
            }
            x1 = x + h * acc;
            k[s] = eval(t + C[s] * h, x1, &mut traj)?;
        }
        let err: f64 = h * k.iter().zip(E.iter()).map(|(ki, ei)| ki * ei).sum::<f64>();
        let scale = settings.abs_tol + settings.rel_tol * x.abs().max(x1.abs());
        let err_norm = (err / scale).abs();

        if err_norm <= 1.0 {
            // accept: build the dense interpolant and scan it
            let ydiff = x1 - x;
            let bspl = h * k[0] - ydiff;
            let dsum: f64 = k.iter().zip(D.iter()).map(|(ki, di)| ki * di).sum();
            let step = DenseStep {
                t0: t,
                h,
                c: [x, ydiff, bspl, ydiff - h * k[6] - bspl, h * dsum],
            };
            scanner.scan(&step, start.t, &mut traj.events);
            traj.steps.push(step);
            t += h;
            x = x1;
            traj.samples.push(SpacetimePoint::new(t, x));
            k1 = k[6];
        }
        let factor = if !err_norm.is_finite() {
            0.2
        } else if err_norm > 0.0 {
            0.9 * err_norm.powf(-0.2)
        } else {
            5.0
        };
        let factor = if err_norm <= 1.0 {
            factor.clamp(0.2, 5.0)
        } else {
            factor.clamp(0.2, 1.0)
        };
        h *= factor;
    }
    traj.sort_ascending();
    Ok(traj)
}

/// Integrate a trajectory through `start` covering the whole window
/// `[t_lo, t_hi]`, running backward and/or forward from the anchor as
/// needed. The result is normalized to ascending time.
pub fn integrate_window<F: VelocityField + ?Sized>(
    field: &F,
    start: SpacetimePoint,
    t_lo: f64,
    t_hi: f64,
    settings: &IntegratorSettings,
    watches: &[WatchLine],
) -> Result<Trajectory, Error> {
    if t_lo > t_hi {
        return Err(Error::invalid("window must satisfy t_lo <= t_hi"));
    }
    let lo = t_lo.min(start.t);
    let hi = t_hi.max(start.t);
    let mut merged: Option<Trajectory> = None;
    for leg_end in [lo, hi] {
        if leg_end == start.t {
            continue;
        }
        let leg = integrate(field, start, leg_end, settings, watches)?;
        merged = Some(match merged {
            None => leg,
            Some(mut acc) => {
                acc.samples.extend(leg.samples.into_iter().filter(|p| p.t != start.t));
                acc.steps.extend(leg.steps);
                for e in leg.events {
                    let dup = acc
                        .events
                        .iter()
                        .any(|o| o.watch == e.watch && (o.t - e.t).abs() <= 8.0 * settings.event_refine_tol);
                    if !dup {
                        acc.events.push(e);
                    }
                }
                acc.reliable &= leg.reliable;
                acc
            }
        });
    }
    let mut traj = merged.unwrap_or(Trajectory {
        start,
        samples: vec![start],
        steps: Vec::new(),
        events: Vec::new(),
        reliable: true,
    });
    traj.start = start;
    traj.sort_ascending();
    Ok(traj)
}
