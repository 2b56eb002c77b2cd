use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Waypoint polyline. Closed paths wrap from the last point to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    points: Vec<(f64, f64)>,
    closed: bool,
    /// Arc length at each waypoint.
    #[serde(skip)]
    stations: Vec<f64>,
}

/// Closest point on a path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub segment: usize,
    pub point: (f64, f64),
    /// Arc length of the projected point.
    pub station: f64,
    pub distance: f64,
}

impl Path {
    pub fn new(points: Vec<(f64, f64)>, closed: bool) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::config(format!(
                "path needs at least 2 waypoints, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
            return Err(Error::config("path waypoints must be finite"));
        }
        let mut stations = Vec::with_capacity(points.len());
        let mut s = 0.0;
        stations.push(0.0);
        for w in points.windows(2) {
            s += dist(w[0], w[1]);
            stations.push(s);
        }
        Ok(Self {
            points,
            closed,
            stations,
        })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.points.len()
        } else {
            self.points.len() - 1
        }
    }

    fn segment(&self, i: usize) -> ((f64, f64), (f64, f64)) {
        (self.points[i], self.points[(i + 1) % self.points.len()])
    }

    pub fn length(&self) -> f64 {
        let open = *self.stations.last().unwrap();
        if self.closed {
            open + dist(*self.points.last().unwrap(), self.points[0])
        } else {
            open
        }
    }

    pub fn project(&self, p: (f64, f64)) -> Projection {
        let mut best: Option<Projection> = None;
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let q = (a.0 + t * dx, a.1 + t * dy);
            let d = dist(p, q);
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Projection {
                    segment: i,
                    point: q,
                    station: self.stations[i] + t * len2.sqrt(),
                    distance: d,
                });
            }
        }
        best.expect("path has at least one segment")
    }

    /// Point at arc length `s`. Closed paths wrap; open paths extrapolate
    /// along the end segments.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let total = self.length();
        let (s, last_seg) = if self.closed {
            (s.rem_euclid(total), self.segment_count() - 1)
        } else {
            (s, self.segment_count() - 1)
        };
        let i = match self.stations.binary_search_by(|x| x.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(last_seg),
            Err(0) => 0,
            Err(i) => (i - 1).min(last_seg),
        };
        let (a, b) = self.segment(i);
        let len = dist(a, b);
        if len == 0.0 {
            return a;
        }
        let t = (s - self.stations[i]) / len;
        (a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1))
    }

    /// Unit tangent heading at arc length `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let a = self.point_at(s);
        let b = self.point_at(s + 1e-3);
        (b.1 - a.1).atan2(b.0 - a.0)
    }

    /// Largest distance from any point in `trace` to the path.
    pub fn max_deviation(&self, trace: impl IntoIterator<Item = (f64, f64)>) -> f64 {
        trace
            .into_iter()
            .map(|p| self.project(p).distance)
            .fold(0.0, f64::max)
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (b.0 - a.0).hypot(b.1 - a.1)
}

/// Counter-clockwise oval centred on the origin: two straights of length
/// `2 * half_length` along x joined by semicircles of `radius`.
pub fn oval_path(half_length: f64, radius: f64, spacing: f64) -> Result<Path> {
    if !(half_length >= 0.0 && radius > 0.0 && spacing > 0.0) {
        return Err(Error::config(format!(
            "oval needs half_length >= 0, radius > 0, spacing > 0 (got {half_length}, {radius}, {spacing})"
        )));
    }
    let mut pts = Vec::new();
    let straight = |pts: &mut Vec<(f64, f64)>, from: (f64, f64), to: (f64, f64)| {
        let len = dist(from, to);
        if len == 0.0 {
            return;
        }
        let n = ((len / spacing).round() as usize).max(1);
        for k in 0..n {
            let t = k as f64 / n as f64;
            pts.push((from.0 + t * (to.0 - from.0), from.1 + t * (to.1 - from.1)));
        }
    };
    let arc = |pts: &mut Vec<(f64, f64)>, cx: f64, start: f64| {
        let n = ((PI * radius / spacing).round() as usize).max(2);
        for k in 0..n {
            let a = start + PI * k as f64 / n as f64;
            pts.push((cx + radius * a.cos(), radius * a.sin()));
        }
    };
    straight(&mut pts, (-half_length, -radius), (half_length, -radius));
    arc(&mut pts, half_length, -PI / 2.0);
    straight(&mut pts, (half_length, radius), (-half_length, radius));
    arc(&mut pts, -half_length, PI / 2.0);
    Path::new(pts, true)
}

/// Open straight path from `start` along `heading`.
pub fn straight_path(start: (f64, f64), heading: f64, length: f64, spacing: f64) -> Result<Path> {
    if !(length > 0.0 && spacing > 0.0) {
        return Err(Error::config("straight path needs positive length and spacing"));
    }
    let n = ((length / spacing).round() as usize).max(1);
    let (c, s) = (heading.cos(), heading.sin());
    let pts = (0..=n)
        .map(|k| {
            let d = length * k as f64 / n as f64;
            (start.0 + d * c, start.1 + d * s)
        })
        .collect();
    Path::new(pts, false)
}
