use super::quadrature::gauss_legendre;
use super::superellipse::Superellipse;
use super::vec2::Vec2;
use crate::config::{Mode, TableConfig};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Scatterer,
    North,
    East,
    South,
    West,
}

impl Component {
    pub const WALLS: [Component; 4] = [Component::North, Component::East, Component::South, Component::West];

    pub fn is_wall(self) -> bool {
        self != Component::Scatterer
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Scatterer => "scatterer",
            Component::North => "north",
            Component::East => "east",
            Component::South => "south",
            Component::West => "west",
        }
    }
}

/// Position, frame and curvature at a boundary point.
///
/// `normal` points into the billiard domain and `tangent = normal.perp()`
/// is the direction of increasing `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryPoint {
    pub component: Component,
    pub r: f64,
    pub position: Vec2,
    pub normal: Vec2,
    pub tangent: Vec2,
    pub curvature: f64,
}

const GL_ORDER: usize = 8;
const UNIFORM_PANELS: usize = 128;
const GRADED_PANELS: i32 = 40;
const GUESS_POINTS: usize = 4096;

/// Arclength of one octant arc as a graph over its tangential coordinate.
#[derive(Clone, Debug)]
struct ArcLength {
    shape: Superellipse<f64>,
    breaks: Vec<f64>,
    cumulative: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// `u(s)` and `du/ds` on a uniform grid in `s`, for starting guesses.
    guess: Vec<(f64, f64)>,
}

impl ArcLength {
    fn new(shape: Superellipse<f64>) -> Self {
        let (nodes, weights) = gauss_legendre(GL_ORDER);
        let xd = shape.diagonal();
        let h = xd / UNIFORM_PANELS as f64;
        let mut breaks = vec![0.0];
        for k in (1..=GRADED_PANELS).rev() {
            breaks.push(h * 0.5f64.powi(k));
        }
        for i in 1..=UNIFORM_PANELS {
            breaks.push(if i == UNIFORM_PANELS { xd } else { h * i as f64 });
        }
        let mut arc = Self { shape, breaks, cumulative: Vec::new(), nodes, weights, guess: Vec::new() };
        let mut cum = vec![0.0];
        for w in arc.breaks.windows(2) {
            let last = *cum.last().unwrap();
            cum.push(last + arc.panel(w[0], w[1]));
        }
        arc.cumulative = cum;
        let total = arc.total();
        arc.guess = (0..=GUESS_POINTS)
            .map(|j| {
                let u = arc.solve(total * j as f64 / GUESS_POINTS as f64, None);
                (u, 1.0 / arc.speed(u))
            })
            .collect();
        arc
    }

    fn initial_guess(&self, s: f64) -> f64 {
        let h = self.total() / GUESS_POINTS as f64;
        let x = (s / h).clamp(0.0, GUESS_POINTS as f64);
        let j = (x.floor() as usize).min(GUESS_POINTS - 1);
        let t = x - j as f64;
        let (u0, d0) = self.guess[j];
        let (u1, d1) = self.guess[j + 1];
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * d1
    }

    #[inline]
    fn speed(&self, u: f64) -> f64 {
        let d = self.shape.graph_slope(u);
        (1.0 + d * d).sqrt()
    }

    fn panel(&self, lo: f64, hi: f64) -> f64 {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * self.speed(mid + half * x);
        }
        acc * half
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn length(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, *self.breaks.last().unwrap());
        let i = match self.breaks.binary_search_by(|b| b.partial_cmp(&u).unwrap()) {
            Ok(i) => return self.cumulative[i],
            Err(i) => i - 1,
        };
        self.cumulative[i] + self.panel(self.breaks[i], u)
    }

    fn inverse(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, self.total());
        self.solve(s, Some(self.initial_guess(s)))
    }

    fn solve(&self, s: f64, guess: Option<f64>) -> f64 {
        let i = match self.cumulative.binary_search_by(|b| b.partial_cmp(&s).unwrap()) {
            Ok(i) => return self.breaks[i],
            Err(i) => (i - 1).min(self.breaks.len() - 2),
        };
        let (lo, hi) = (self.breaks[i], self.breaks[i + 1]);
        let (slo, shi) = (self.cumulative[i], self.cumulative[i + 1]);
        let mut u = guess.unwrap_or(lo + (hi - lo) * (s - slo) / (shi - slo)).clamp(lo, hi);
        for _ in 0..30 {
            let f = self.cumulative[i] + self.panel(lo, u) - s;
            let step = f / self.speed(u);
            u = (u - step).clamp(lo, hi);
            if step.abs() <= 1e-17 + 4.0 * f64::EPSILON * u.abs() {
                break;
            }
        }
        u
    }
}

/// Immutable table geometry shared by all computations.
#[derive(Clone, Debug)]
pub struct Table {
    config: TableConfig,
    shape: Superellipse<f64>,
    arc: ArcLength,
    quarter: f64,
}

impl Table {
    pub fn new(config: TableConfig) -> Result<Self> {
        config.validate()?;
        let shape = Superellipse::new(config.beta, config.scatterer_radius);
        let arc = ArcLength::new(shape);
        let quarter = arc.total();
        Ok(Self { config, shape, arc, quarter })
    }

    pub fn config(&self) -> &TableConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn shape(&self) -> &Superellipse<f64> {
        &self.shape
    }

    pub fn beta(&self) -> f64 {
        self.config.beta
    }

    pub fn radius(&self) -> f64 {
        self.config.scatterer_radius
    }

    pub fn width(&self) -> f64 {
        self.config.rect_width
    }

    pub fn height(&self) -> f64 {
        self.config.rect_height
    }

    /// Coefficient `c` in the flat-point model `-c|s|^β`.
    pub fn flat_coefficient(&self) -> f64 {
        self.shape.flat_coefficient()
    }

    /// Perimeter of the scatterer.
    pub fn perimeter(&self) -> f64 {
        8.0 * self.quarter
    }

    /// Arclength between a flat point and the adjacent diagonal point.
    pub fn octant_length(&self) -> f64 {
        self.quarter
    }

    pub fn component_length(&self, c: Component) -> f64 {
        match c {
            Component::Scatterer => self.perimeter(),
            Component::North | Component::South => self.width(),
            Component::East | Component::West => self.height(),
        }
    }

    /// Total boundary length seen by the billiard map in the current mode.
    pub fn boundary_length(&self) -> f64 {
        match self.mode() {
            Mode::Torus => self.perimeter(),
            Mode::Rectangle => self.perimeter() + 2.0 * (self.width() + self.height()),
        }
    }

    pub fn components(&self) -> &'static [Component] {
        match self.mode() {
            Mode::Torus => &[Component::Scatterer],
            Mode::Rectangle => &[
                Component::Scatterer,
                Component::North,
                Component::East,
                Component::South,
                Component::West,
            ],
        }
    }

    /// Shortest free flight between scatterer collisions in the lattice.
    pub fn tau_min(&self) -> f64 {
        self.width().min(self.height()) - 2.0 * self.radius()
    }

    /// Arclength coordinates of the four flat points: top, left, bottom, right.
    pub fn flat_points(&self) -> [f64; 4] {
        let q = self.quarter;
        [0.0, 2.0 * q, 4.0 * q, 6.0 * q]
    }

    /// Signed arclength from the nearest flat point, in `[-q, q)`.
    pub fn flat_offset(&self, r: f64) -> f64 {
        let q2 = 2.0 * self.quarter;
        let k = (r / q2).round();
        r - k * q2
    }

    /// Index (0..4) of the flat point nearest to `r`.
    pub fn nearest_flat(&self, r: f64) -> usize {
        let q2 = 2.0 * self.quarter;
        ((r / q2).round() as i64).rem_euclid(4) as usize
    }

    fn wrap(&self, r: f64) -> f64 {
        let p = self.perimeter();
        let w = r.rem_euclid(p);
        if w >= p {
            0.0
        } else {
            w
        }
    }

    /// Boundary data at arclength `r` on component `c`.
    pub fn boundary_at(&self, c: Component, r: f64) -> Result<BoundaryPoint> {
        if !r.is_finite() {
            return Err(Error::Domain(format!("non-finite r on {}", c.name())));
        }
        let (w2, h2) = (0.5 * self.width(), 0.5 * self.height());
        let wall = |pos: Vec2, normal: Vec2, len: f64| -> Result<BoundaryPoint> {
            if !(0.0..=len).contains(&r) {
                return Err(Error::Domain(format!("r = {r} outside wall {} of length {len}", c.name())));
            }
            Ok(BoundaryPoint { component: c, r, position: pos, normal, tangent: normal.perp(), curvature: 0.0 })
        };
        match c {
            Component::North => wall(Vec2::new(r - w2, h2), Vec2::new(0.0, -1.0), self.width()),
            Component::East => wall(Vec2::new(w2, h2 - r), Vec2::new(-1.0, 0.0), self.height()),
            Component::South => wall(Vec2::new(w2 - r, -h2), Vec2::new(0.0, 1.0), self.width()),
            Component::West => wall(Vec2::new(-w2, r - h2), Vec2::new(1.0, 0.0), self.height()),
            Component::Scatterer => Ok(self.scatterer_point(self.scatterer_position(r), Some(self.wrap(r)))),
        }
    }

    fn scatterer_position(&self, r: f64) -> Vec2 {
        let q = self.quarter;
        let r = self.wrap(r);
        let oct = ((r / q).floor() as i64).clamp(0, 7);
        let sigma = r - oct as f64 * q;
        let f = |u: f64| self.shape.graph(u);
        let inv = |s: f64| self.arc.inverse(s);
        match oct {
            0 => {
                let u = inv(sigma);
                Vec2::new(-u, f(u))
            }
            1 => {
                let u = inv(q - sigma);
                Vec2::new(-f(u), u)
            }
            2 => {
                let u = inv(sigma);
                Vec2::new(-f(u), -u)
            }
            3 => {
                let u = inv(q - sigma);
                Vec2::new(-u, -f(u))
            }
            4 => {
                let u = inv(sigma);
                Vec2::new(u, -f(u))
            }
            5 => {
                let u = inv(q - sigma);
                Vec2::new(f(u), -u)
            }
            6 => {
                let u = inv(sigma);
                Vec2::new(f(u), u)
            }
            _ => {
                let u = inv(q - sigma);
                Vec2::new(u, f(u))
            }
        }
    }

    /// Arclength of a point lying on the scatterer (local coordinates).
    pub fn scatterer_r(&self, p: Vec2) -> f64 {
        let q = self.quarter;
        let p8 = 8.0 * q;
        if p.x.abs() <= p.y.abs() {
            let s = self.arc.length(p.x.abs());
            if p.y > 0.0 {
                if p.x <= 0.0 || s == 0.0 {
                    s
                } else {
                    p8 - s
                }
            } else if p.x <= 0.0 {
                4.0 * q - s
            } else {
                4.0 * q + s
            }
        } else {
            let s = self.arc.length(p.y.abs());
            if p.x < 0.0 {
                if p.y >= 0.0 {
                    2.0 * q - s
                } else {
                    2.0 * q + s
                }
            } else if p.y < 0.0 {
                6.0 * q - s
            } else {
                6.0 * q + s
            }
        }
    }

    /// Frame and curvature at a scatterer point given in local coordinates.
    pub fn scatterer_point(&self, p: Vec2, r: Option<f64>) -> BoundaryPoint {
        let (nx, ny) = self.shape.outward_normal(p.x, p.y);
        let normal = Vec2::new(nx, ny);
        BoundaryPoint {
            component: Component::Scatterer,
            r: r.unwrap_or_else(|| self.scatterer_r(p)),
            position: p,
            normal,
            tangent: normal.perp(),
            curvature: self.shape.curvature(p.x, p.y),
        }
    }

    /// Wall point hit at rectangle-frame position `p`.
    pub fn wall_point(&self, c: Component, p: Vec2) -> BoundaryPoint {
        let (w2, h2) = (0.5 * self.width(), 0.5 * self.height());
        let (r, pos, normal) = match c {
            Component::North => (p.x + w2, Vec2::new(p.x, h2), Vec2::new(0.0, -1.0)),
            Component::East => (h2 - p.y, Vec2::new(w2, p.y), Vec2::new(-1.0, 0.0)),
            Component::South => (w2 - p.x, Vec2::new(p.x, -h2), Vec2::new(0.0, 1.0)),
            Component::West => (p.y + h2, Vec2::new(-w2, p.y), Vec2::new(1.0, 0.0)),
            Component::Scatterer => unreachable!("wall_point called for the scatterer"),
        };
        let len = self.component_length(c);
        BoundaryPoint { component: c, r: r.clamp(0.0, len), position: pos, normal, tangent: normal.perp(), curvature: 0.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn table(beta: f64) -> Table {
        Table::new(TableConfig::default().with_beta(beta)).unwrap()
    }

    #[test]
    fn circle_perimeter() {
        let t = table(2.0);
        assert!((t.perimeter() - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn arclength_round_trip() {
        for beta in [2.0, 2.5, 4.0, 6.0] {
            let t = table(beta);
            let p = t.perimeter();
            for i in 0..997 {
                let r = p * i as f64 / 997.0 + 1e-3;
                let b = t.boundary_at(Component::Scatterer, r).unwrap();
                let back = t.scatterer_r(b.position);
                let d = (back - t.wrap(r)).abs();
                assert!(d.min(p - d) < 1e-12, "beta {beta} r {r} back {back}");
                assert!(t.shape().implicit(b.position.x, b.position.y).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn flat_points_have_zero_curvature() {
        let t = table(4.0);
        for (i, r) in t.flat_points().into_iter().enumerate() {
            let b = t.boundary_at(Component::Scatterer, r).unwrap();
            assert_eq!(b.curvature, 0.0);
            let expect = [Vec2::new(0.0, 1.0), Vec2::new(-1.0, 0.0), Vec2::new(0.0, -1.0), Vec2::new(1.0, 0.0)][i];
            assert!((b.position - expect).norm() < 1e-14);
            assert!((b.normal - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn tangent_is_derivative_of_position() {
        let t = table(4.0);
        let h = 1e-6;
        for i in 0..50 {
            let r = 0.1 + 0.2 * i as f64;
            let b = t.boundary_at(Component::Scatterer, r).unwrap();
            let fwd = t.boundary_at(Component::Scatterer, r + h).unwrap().position;
            let bwd = t.boundary_at(Component::Scatterer, r - h).unwrap().position;
            let d = (fwd - bwd) * (0.5 / h);
            assert!((d - b.tangent).norm() < 1e-8, "r {r}");
        }
    }
}
