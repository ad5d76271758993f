//! Geometry: node positions, building boxes, mobility, and LoS/NLoS/outage
//! classification by a straight-line blockage test.

use std::fmt;

use crate::engine::SimTime;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    fn lerp(&self, other: &Position, f: f64) -> Position {
        Position::new(
            self.x + (other.x - self.x) * f,
            self.y + (other.y - self.y) * f,
            self.z + (other.z - self.z) * f,
        )
    }

    fn axis(&self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }
}

/// Azimuth and elevation (radians) of the direction from `from` to `to`.
pub fn direction(from: &Position, to: &Position) -> (f64, f64) {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let az = dy.atan2(dx);
    let el = dz.atan2((dx * dx + dy * dy).sqrt());
    (az, el)
}

/// Axis-aligned building obstacle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Building {
    pub min: Position,
    pub max: Position,
}

impl Building {
    pub fn new(min: Position, max: Position) -> Result<Self> {
        if !(min.x < max.x && min.y < max.y && min.z < max.z) {
            return Err(Error::violation(format!(
                "building bounds must satisfy min < max on every axis: {min:?} {max:?}"
            )));
        }
        Ok(Building { min, max })
    }

    /// From `xmin,xmax,ymin,ymax,zmin,zmax`.
    pub fn from_bounds(b: [f64; 6]) -> Result<Self> {
        Building::new(
            Position::new(b[0], b[2], b[4]),
            Position::new(b[1], b[3], b[5]),
        )
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0..3).all(|i| p.axis(i) >= self.min.axis(i) && p.axis(i) <= self.max.axis(i))
    }
}

/// Closed-box slab test for the segment `a -> b`.
pub fn segment_intersects_box(a: &Position, b: &Position, bx: &Building) -> bool {
    let mut t0 = 0.0_f64;
    let mut t1 = 1.0_f64;
    for i in 0..3 {
        let o = a.axis(i);
        let d = b.axis(i) - o;
        let lo = bx.min.axis(i);
        let hi = bx.max.axis(i);
        if d == 0.0 {
            if o < lo || o > hi {
                return false;
            }
            continue;
        }
        let mut ta = (lo - o) / d;
        let mut tb = (hi - o) / d;
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return false;
        }
    }
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ChannelState {
    LoS,
    NLoS,
    Outage,
}

impl fmt::Display for ChannelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelState::LoS => "LoS",
            ChannelState::NLoS => "NLoS",
            ChannelState::Outage => "Outage",
        })
    }
}

pub fn channel_state(
    tx: &Position,
    rx: &Position,
    buildings: &[Building],
    outage_distance: f64,
) -> ChannelState {
    if tx.distance(rx) > outage_distance {
        ChannelState::Outage
    } else if buildings.iter().any(|b| segment_intersects_box(tx, rx, b)) {
        ChannelState::NLoS
    } else {
        ChannelState::LoS
    }
}

/// Piecewise-linear trajectory through timed waypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct MobilityTrack {
    waypoints: Vec<(SimTime, Position)>,
}

impl MobilityTrack {
    pub fn stationary(p: Position) -> Self {
        MobilityTrack {
            waypoints: vec![(SimTime::ZERO, p)],
        }
    }

    pub fn new(waypoints: Vec<(SimTime, Position)>) -> Result<Self> {
        if waypoints.is_empty() {
            return Err(Error::violation(
                "mobility track needs at least one waypoint",
            ));
        }
        if waypoints.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::violation(
                "waypoint times must be strictly increasing",
            ));
        }
        if waypoints.iter().any(|(_, p)| !p.is_finite()) {
            return Err(Error::violation("waypoint positions must be finite"));
        }
        Ok(MobilityTrack { waypoints })
    }

    pub fn waypoints(&self) -> &[(SimTime, Position)] {
        &self.waypoints
    }

    fn segment(&self, t: SimTime) -> Option<usize> {
        let i = self.waypoints.partition_point(|(wt, _)| *wt <= t);
        if i == 0 || i >= self.waypoints.len() {
            None
        } else {
            Some(i - 1)
        }
    }

    pub fn position_at(&self, t: SimTime) -> Position {
        match self.segment(t) {
            Some(i) => {
                let (t0, p0) = self.waypoints[i];
                let (t1, p1) = self.waypoints[i + 1];
                let f = (t - t0).as_nanos() as f64 / (t1 - t0).as_nanos() as f64;
                p0.lerp(&p1, f)
            }
            None if t < self.waypoints[0].0 => self.waypoints[0].1,
            None => self.waypoints[self.waypoints.len() - 1].1,
        }
    }

    /// Speed (m/s) and horizontal heading (rad) at `t`.
    pub fn velocity_at(&self, t: SimTime) -> (f64, f64) {
        match self.segment(t) {
            Some(i) => {
                let (t0, p0) = self.waypoints[i];
                let (t1, p1) = self.waypoints[i + 1];
                let dt = (t1 - t0).as_secs_f64();
                let (heading, _) = direction(&p0, &p1);
                (p0.distance(&p1) / dt, heading)
            }
            None => (0.0, 0.0),
        }
    }

    /// Instants at which the velocity changes.
    pub fn breakpoints(&self) -> impl Iterator<Item = SimTime> + '_ {
        self.waypoints.iter().map(|(t, _)| *t)
    }
}
