//! Geometry: a static vehicle, a holder walking a piecewise-linear path, and
//! propagation delay proportional to distance.

use crate::protocol::keyfob::Pedometer;

/// Default signal speed: 100 m takes 2 ms.
pub const DEFAULT_SIGNAL_SPEED: f64 = 50_000.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dist(self, o: Point) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }

    fn lerp(self, o: Point, f: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * f, self.y + (o.y - self.y) * f)
    }
}

/// Waypoints `(t_us, position)` with strictly increasing times. The holder
/// stands still before the first and after the last waypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    points: Vec<(i64, Point)>,
}

impl Trajectory {
    pub fn new(points: Vec<(i64, Point)>) -> Result<Self, String> {
        if points.is_empty() {
            return Err("trajectory needs at least one waypoint".into());
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err("waypoint times must be strictly increasing".into());
        }
        Ok(Trajectory { points })
    }

    pub fn stationary(at: Point) -> Self {
        Trajectory { points: vec![(0, at)] }
    }

    /// Start at `from` at time 0 and walk towards `towards` at `speed` m/s for `duration_us`.
    pub fn walking(from: Point, towards: Point, speed: f64, duration_us: i64) -> Self {
        let d = from.dist(towards);
        if speed <= 0.0 || d == 0.0 || duration_us <= 0 {
            return Trajectory::stationary(from);
        }
        let travel = (speed * duration_us as f64 / 1e6).min(d);
        let end_us = (travel / speed * 1e6).round().max(1.0) as i64;
        Trajectory { points: vec![(0, from), (end_us, from.lerp(towards, travel / d))] }
    }

    pub fn waypoints(&self) -> &[(i64, Point)] {
        &self.points
    }

    pub fn position(&self, t_us: i64) -> Point {
        let pts = &self.points;
        if t_us <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((t0, a), (t1, b)) = (w[0], w[1]);
            if t_us <= t1 {
                return a.lerp(b, (t_us - t0) as f64 / (t1 - t0) as f64);
            }
        }
        pts[pts.len() - 1].1
    }

    /// Distance walked along the path between two instants.
    pub fn path_length(&self, from_us: i64, to_us: i64) -> f64 {
        if to_us <= from_us {
            return 0.0;
        }
        let mut knots = vec![from_us];
        knots.extend(self.points.iter().map(|p| p.0).filter(|&t| t > from_us && t < to_us));
        knots.push(to_us);
        knots.windows(2).map(|w| self.position(w[0]).dist(self.position(w[1]))).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub vehicle_pos: Point,
    pub holder: Trajectory,
    /// Meters per second.
    pub signal_speed: f64,
}

impl World {
    pub fn propagation_us(&self, a: Point, b: Point) -> i64 {
        (a.dist(b) / self.signal_speed * 1e6).round() as i64
    }
}

/// Pedometer reading the holder's path, with the keyfob clock offset by `drift_us`.
pub struct PathPedometer<'a> {
    pub path: &'a Trajectory,
    pub drift_us: i64,
}

impl Pedometer for PathPedometer<'_> {
    fn displacement_m(&self, from_us: i64, to_us: i64) -> f64 {
        self.path.path_length(from_us - self.drift_us, to_us - self.drift_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_meters_take_two_ms() {
        let w = World {
            vehicle_pos: Point::new(0.0, 0.0),
            holder: Trajectory::stationary(Point::new(100.0, 0.0)),
            signal_speed: DEFAULT_SIGNAL_SPEED,
        };
        assert_eq!(w.propagation_us(w.vehicle_pos, w.holder.position(0)), 2_000);
    }

    #[test]
    fn walking_path_length_matches_speed() {
        let t = Trajectory::walking(Point::new(100.0, 0.0), Point::new(0.0, 0.0), 1.5, 10_000_000);
        assert!((t.path_length(0, 2_000_000) - 3.0).abs() < 1e-9);
        assert!((t.position(2_000_000).x - 97.0).abs() < 1e-9);
        // clamps after the last waypoint
        assert!((t.path_length(0, 20_000_000) - 15.0).abs() < 1e-9);
    }

    #[test]
    fn polyline_length_sums_segments() {
        let t = Trajectory::new(vec![
            (0, Point::new(0.0, 0.0)),
            (1_000_000, Point::new(3.0, 0.0)),
            (2_000_000, Point::new(3.0, 4.0)),
        ])
        .unwrap();
        assert!((t.path_length(0, 2_000_000) - 7.0).abs() < 1e-9);
        assert!((t.path_length(500_000, 1_500_000) - 3.5).abs() < 1e-9);
        assert!(Trajectory::new(vec![(1, Point::new(0.0, 0.0)), (1, Point::new(1.0, 0.0))]).is_err());
    }
}
