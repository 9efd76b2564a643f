//! Exact maximization of `sum_i w_i 1{beta'x_i >= 0}` over the unit circle.
//!
//! Each nonzero point contributes its weight on a closed half circle of
//! directions. Sorting the 2n half-circle endpoints and walking them once
//! gives the objective on every open arc and at every endpoint.

use std::cmp::Ordering;
use std::ops::{Add, Sub};

use num_traits::Zero;

use crate::scalar::Real;

/// Weight type the sweep accumulates: exact integers for the score, reals
/// for the smoothed objective.
pub trait SweepWeight:
    Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Zero + Send + Sync
{
}

impl<W> SweepWeight for W where
    W: Copy + PartialOrd + Add<Output = W> + Sub<Output = W> + Zero + Send + Sync
{
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    /// Midpoint of an open arc between consecutive endpoints.
    Arc,
    /// An endpoint where some `beta'x_i` is exactly zero.
    Breakpoint,
}

#[derive(Debug, Clone, Copy)]
pub struct SweepOptimum<T, W> {
    pub direction: [T; 2],
    pub value: W,
    pub location: Location,
}

struct Event<T, W> {
    angle: T,
    dir: [T; 2],
    /// weight entering (start of the half circle) or leaving
    weight: W,
    start: bool,
}

fn wrap<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let t = theta % two_pi;
    if t < T::zero() {
        t + two_pi
    } else {
        t
    }
}

/// Cyclic membership of `t` in the closed arc running counterclockwise from
/// `s` to `e`.
fn in_arc<T: Real>(t: T, s: T, e: T) -> bool {
    if s <= e {
        s <= t && t <= e
    } else {
        t >= s || t <= e
    }
}

/// Global maximizer over directions `(cos t, sin t)` of
/// `sum_i w_i 1{a_i cos t + b_i sin t >= 0}`.
///
/// Ties prefer open arcs over isolated endpoints, then the smallest angle in
/// `[0, 2 pi)`.
pub fn sweep_max<T: Real, W: SweepWeight>(coords: &[[T; 2]], weights: &[W]) -> SweepOptimum<T, W> {
    debug_assert_eq!(coords.len(), weights.len());
    let mut base = W::zero();
    let mut events: Vec<Event<T, W>> = Vec::with_capacity(2 * coords.len());
    let mut arcs: Vec<(T, T, W)> = Vec::with_capacity(coords.len());
    for (&[a, b], &w) in coords.iter().zip(weights) {
        if a == T::zero() && b == T::zero() {
            base = base + w;
            continue;
        }
        // beta'x = 0 exactly at beta = (b, -a) (start) and (-b, a) (end)
        let s = wrap((-a).atan2(b));
        let e = wrap(a.atan2(-b));
        events.push(Event { angle: s, dir: [b, -a], weight: w, start: true });
        events.push(Event { angle: e, dir: [-b, a], weight: w, start: false });
        arcs.push((s, e, w));
    }
    if events.is_empty() {
        return SweepOptimum {
            direction: [T::one(), T::zero()],
            value: base,
            location: Location::Arc,
        };
    }
    events.sort_by(|p, q| p.angle.partial_cmp(&q.angle).unwrap_or(Ordering::Equal));

    // value on the open arc that wraps from the last event to the first
    let first = events[0].angle;
    let last = events[events.len() - 1].angle;
    let wrap_mid = wrap((last + first + T::TAU()) / T::lit(2.0));
    let mut open = arcs
        .iter()
        .filter(|(s, e, _)| in_arc(wrap_mid, *s, *e))
        .fold(base, |acc, &(_, _, w)| acc + w);

    let mut best_arc: Option<(T, W)> = None;
    let mut best_bp: Option<(T, [T; 2], W)> = None;
    let better = |v: W, t: T, cur: Option<(W, T)>| match cur {
        None => true,
        Some((cv, ct)) => v > cv || (v == cv && t < ct),
    };

    let mut k = 0;
    while k < events.len() {
        let angle = events[k].angle;
        let mut entering = W::zero();
        let mut leaving = W::zero();
        let dir = events[k].dir;
        while k < events.len() && events[k].angle == angle {
            if events[k].start {
                entering = entering + events[k].weight;
            } else {
                leaving = leaving + events[k].weight;
            }
            k += 1;
        }
        let at_bp = open + entering;
        if better(at_bp, angle, best_bp.map(|(t, _, v)| (v, t))) {
            best_bp = Some((angle, dir, at_bp));
        }
        open = open + entering - leaving;
        let next = if k < events.len() {
            events[k].angle
        } else {
            first + T::TAU()
        };
        let mid = wrap((angle + next) / T::lit(2.0));
        if better(open, mid, best_arc.map(|(t, v)| (v, t))) {
            best_arc = Some((mid, open));
        }
    }

    let (arc_mid, arc_val) = best_arc.expect("at least two events");
    let (_, bp_dir, bp_val) = best_bp.expect("at least two events");
    if bp_val > arc_val {
        let r = (bp_dir[0] * bp_dir[0] + bp_dir[1] * bp_dir[1]).sqrt();
        SweepOptimum {
            direction: [bp_dir[0] / r, bp_dir[1] / r],
            value: bp_val,
            location: Location::Breakpoint,
        }
    } else {
        SweepOptimum {
            direction: [arc_mid.cos(), arc_mid.sin()],
            value: arc_val,
            location: Location::Arc,
        }
    }
}
