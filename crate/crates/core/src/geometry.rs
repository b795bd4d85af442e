//! Arithmetic on a circle of circumference `C`: wrapped positions, directed
//! arcs, closed intervals, and gaps between consecutive intervals.
//!
//! Positions are stored as offsets in `[0, C)` in double precision. Touch
//! and containment predicates use the absolute tolerance [`CONTACT_EPS`];
//! event times elsewhere are computed in closed form, so rounding error
//! stays near machine epsilon and the tolerance only absorbs dust.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute length tolerance for containment and touch predicates.
pub const CONTACT_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("circumference must be positive and finite, got {0}")]
    BadCircumference(f64),
    #[error("non-finite length {0}")]
    NonFinite(f64),
    #[error("positions on different circles: circumference {0} vs {1}")]
    CircumferenceMismatch(f64, f64),
    #[error("interval length {length} outside [0, {circumference}]")]
    BadLength { length: f64, circumference: f64 },
    #[error("intervals overlap by {depth} beyond tolerance")]
    Overlap { depth: f64 },
}

/// Travel orientation around the circle: `Positive` increases offsets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn signum(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Direction {
        match self {
            Direction::Positive => Direction::Negative,
            Direction::Negative => Direction::Positive,
        }
    }
}

impl std::ops::Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        self.flipped()
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Positive => write!(f, "1"),
            Direction::Negative => write!(f, "-1"),
        }
    }
}

impl TryFrom<i8> for Direction {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(Direction::Positive),
            -1 => Ok(Direction::Negative),
            other => Err(format!("direction must be 1 or -1, got {other}")),
        }
    }
}

impl From<Direction> for i8 {
    fn from(d: Direction) -> i8 {
        match d {
            Direction::Positive => 1,
            Direction::Negative => -1,
        }
    }
}

/// A point on a circle, stored as an offset in `[0, C)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CircPos {
    value: f64,
    circumference: f64,
}

/// Reduce `raw` modulo `circumference` into `[0, circumference)`.
pub fn wrap(raw: f64, circumference: f64) -> Result<CircPos, GeometryError> {
    if !circumference.is_finite() || circumference <= 0.0 {
        return Err(GeometryError::BadCircumference(circumference));
    }
    if !raw.is_finite() {
        return Err(GeometryError::NonFinite(raw));
    }
    Ok(CircPos {
        value: wrap_value(raw, circumference),
        circumference,
    })
}

/// Modular reduction on raw offsets; inputs assumed finite, `c > 0`.
pub(crate) fn wrap_value(raw: f64, c: f64) -> f64 {
    let r = raw.rem_euclid(c);
    // rem_euclid can round up to exactly c for tiny negative inputs
    if r >= c {
        0.0
    } else {
        r
    }
}

impl CircPos {
    pub fn value(self) -> f64 {
        self.value
    }

    pub fn circumference(self) -> f64 {
        self.circumference
    }

    /// The point `delta` further along the positive direction (wrapping).
    pub fn offset(self, delta: f64) -> CircPos {
        CircPos {
            value: wrap_value(self.value + delta, self.circumference),
            circumference: self.circumference,
        }
    }

    /// Arc length in `[0, C)` traversed from `self` to `to` moving in `dir`.
    pub fn directed_arc(self, to: CircPos, dir: Direction) -> Result<f64, GeometryError> {
        if self.circumference != to.circumference {
            return Err(GeometryError::CircumferenceMismatch(
                self.circumference,
                to.circumference,
            ));
        }
        let delta = match dir {
            Direction::Positive => to.value - self.value,
            Direction::Negative => self.value - to.value,
        };
        Ok(wrap_value(delta, self.circumference))
    }
}

/// Closed set of points reached moving the positive direction from `start`
/// through `length`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CircInterval {
    start: CircPos,
    length: f64,
}

impl CircInterval {
    pub fn new(start: CircPos, length: f64) -> Result<Self, GeometryError> {
        if !length.is_finite() {
            return Err(GeometryError::NonFinite(length));
        }
        if length < 0.0 || length > start.circumference() {
            return Err(GeometryError::BadLength {
                length,
                circumference: start.circumference(),
            });
        }
        Ok(CircInterval { start, length })
    }

    pub fn start(&self) -> CircPos {
        self.start
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Positive-direction endpoint.
    pub fn end(&self) -> CircPos {
        self.start.offset(self.length)
    }

    /// True iff `p` lies in the closed interval, endpoints widened by `eps`.
    pub fn contains(&self, p: CircPos, eps: f64) -> bool {
        debug_assert_eq!(self.start.circumference(), p.circumference());
        let c = self.start.circumference();
        let arc = wrap_value(p.value() - self.start.value(), c);
        arc <= self.length + eps || arc >= c - eps
    }
}

/// Arc length from `a`'s positive end to `b`'s start, where `b` is the next
/// interval after `a` in the positive direction. Zero when touching; an
/// interior overlap deeper than [`CONTACT_EPS`] is a coordination violation.
pub fn gap_after(a: &CircInterval, b: &CircInterval) -> Result<f64, GeometryError> {
    let c = a.start().circumference();
    if c != b.start().circumference() {
        return Err(GeometryError::CircumferenceMismatch(
            c,
            b.start().circumference(),
        ));
    }
    let raw = a.end().directed_arc(b.start(), Direction::Positive)?;
    // A genuine gap never exceeds C - len(a) - len(b); beyond that the raw
    // arc has wrapped, meaning b starts inside a by depth C - raw.
    if raw >= c - CONTACT_EPS {
        return Ok(0.0);
    }
    if raw <= c - a.length() - b.length() + CONTACT_EPS {
        return Ok(raw);
    }
    Err(GeometryError::Overlap { depth: c - raw })
}
