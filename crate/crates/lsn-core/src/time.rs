//! Fixed-point simulation time.
//!
//! Deadline arithmetic must support exact equality: tie-breaking between a
//! frame arrival and a machine tick at the same instant is part of the
//! engine's determinism contract, and floating-point drift would make those
//! ties seed-dependent. Time is therefore an integer nanosecond count.

use core::fmt;
use core::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Serialize};

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

/// A point in simulation time (or a span), in whole nanoseconds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    /// Rounds to the nearest nanosecond; negative inputs clamp to zero.
    pub fn from_secs_f64(secs: f64) -> Self {
        if secs <= 0.0 {
            return SimTime(0);
        }
        SimTime((secs * NANOS_PER_SEC as f64 + 0.5) as u64)
    }

    pub fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NANOS_PER_SEC as f64
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }

    /// `self - rhs` as a signed nanosecond count (for delayed-sample queries
    /// that may reach before the start of the run).
    pub fn signed_sub(self, rhs: SimTime) -> i128 {
        self.0 as i128 - rhs.0 as i128
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Tick period of a clock running at `freq_hz`, rounded to the nearest
/// nanosecond. The rounded period *is* the machine's actual rate; all later
/// deadline arithmetic is exact.
pub fn period_ns(freq_hz: f64) -> u64 {
    debug_assert!(freq_hz > 0.0);
    let p = (NANOS_PER_SEC as f64 / freq_hz + 0.5) as u64;
    p.max(1)
}

/// Ceiling of a nonnegative float as an integer count.
pub(crate) fn ceil_pos(x: f64) -> u64 {
    debug_assert!(x >= 0.0);
    let t = x as u64;
    if (t as f64) < x {
        t + 1
    } else {
        t
    }
}
