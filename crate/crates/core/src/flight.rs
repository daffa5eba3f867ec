//! Free flight to the next boundary collision.

use crate::config::Mode;
use crate::error::{Error, Result};
use crate::geometry::{Component, Superellipse, Table, Vec2};
use serde::{Deserialize, Serialize};

/// `|cos φ|` below which a scatterer contact counts as tangential.
pub const TANGENCY_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    /// Unit direction.
    pub direction: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub hit_r: f64,
    pub boundary_kind: Component,
    pub tau: f64,
    /// Chebyshev length of the lattice offset between the two scatterer cells.
    pub cells_crossed: u64,
    pub tangential: bool,
    /// Lattice offset of the cell that was hit.
    pub shift: (i64, i64),
    /// Hit point in the frame of the component that was hit.
    pub position: Vec2,
    /// Tangential contacts passed through on the way.
    pub grazes: u32,
    /// `|cos φ|` of the incoming direction at the hit.
    pub cos_incidence: f64,
}

/// First parameter `t >= 0` where the ray `o + t d` meets the scatterer centred at the origin.
pub fn scatterer_hit(shape: &Superellipse<f64>, o: Vec2, d: Vec2) -> Option<f64> {
    let a = shape.radius();
    if o.cross(d).abs() > a * std::f64::consts::SQRT_2 * (1.0 + 1e-12) {
        return None;
    }
    let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
    for (oc, dc) in [(o.x, d.x), (o.y, d.y)] {
        if dc == 0.0 {
            if oc.abs() > a {
                return None;
            }
        } else {
            let ta = (-a - oc) / dc;
            let tb = (a - oc) / dc;
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if t0 >= t1 {
        return None;
    }
    let beta = shape.beta();
    let g = |t: f64| shape.implicit(o.x + t * d.x, o.y + t * d.y);
    let dg = |t: f64| {
        let (x, y) = (o.x + t * d.x, o.y + t * d.y);
        beta * (x.signum() * shape.pow_b1(x) * d.x + y.signum() * shape.pow_b1(y) * d.y)
    };
    let ddg = |t: f64| {
        let (x, y) = (o.x + t * d.x, o.y + t * d.y);
        beta * (beta - 1.0) * (shape.pow_b2(x) * d.x * d.x + shape.pow_b2(y) * d.y * d.y)
    };

    // Right end of a bracket [t0, hi] with g(hi) <= 0.
    let foot = -o.dot(d);
    let perp = o.cross(d).abs();
    let hi = if perp < a * (1.0 - 1e-9) && foot > t0 && foot < t1 {
        foot
    } else {
        if dg(t0) >= 0.0 || dg(t1) <= 0.0 {
            return None;
        }
        // Minimise the convex g on [t0, t1] by safeguarded Newton on g'.
        let (mut lo, mut up) = (t0, t1);
        let mut t = 0.5 * (lo + up);
        for _ in 0..200 {
            let d1 = dg(t);
            if d1 < 0.0 {
                lo = t;
            } else if d1 > 0.0 {
                up = t;
            } else {
                break;
            }
            if g(t) < 0.0 {
                break;
            }
            let d2 = ddg(t);
            let mut next = if d2 > 0.0 { t - d1 / d2 } else { f64::NAN };
            if !(next > lo && next < up) {
                next = 0.5 * (lo + up);
            }
            if (up - lo) <= 4.0 * f64::EPSILON * (1.0 + t.abs()) {
                break;
            }
            t = next;
        }
        if g(t) > 0.0 {
            return None;
        }
        t
    };

    // g is convex and decreasing on [t0, hi]: Newton from the left never overshoots.
    let mut t = t0;
    let mut ok = false;
    for _ in 0..100 {
        let gv = g(t);
        if gv <= 0.0 {
            ok = true;
            break;
        }
        let gp = dg(t);
        if gp >= 0.0 {
            break;
        }
        let next = (t - gv / gp).min(hi);
        if next - t <= 2.0 * f64::EPSILON * (1.0 + t.abs()) {
            t = next;
            ok = true;
            break;
        }
        t = next;
    }
    if !ok {
        let (mut lo, mut up) = (t, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + up);
            if mid <= lo || mid >= up {
                break;
            }
            if g(mid) > 0.0 {
                lo = mid;
            } else {
                up = mid;
            }
        }
        t = up;
    }
    Some(t)
}

fn cos_at(table: &Table, p: Vec2, d: Vec2) -> f64 {
    let (nx, ny) = table.shape().outward_normal(p.x, p.y);
    (d.x * nx + d.y * ny).abs()
}

/// Flight through the scatterer lattice starting from the scatterer of cell (0, 0).
///
/// With `pass_tangent` set, tangential contacts are skipped and counted in `grazes`.
pub fn lattice_flight(table: &Table, ray: Ray, pass_tangent: bool) -> Result<CollisionEvent> {
    lattice_flight_capped(table, ray, pass_tangent, table.config().max_flight_cells)
}

/// [`lattice_flight`] with an explicit cap on the cells crossed.
pub fn lattice_flight_capped(table: &Table, ray: Ray, pass_tangent: bool, limit: u64) -> Result<CollisionEvent> {
    let (w, h) = (table.width(), table.height());
    let (o, d) = (ray.origin, ray.direction);
    let limit = limit as i64;
    let step_x: i64 = if d.x > 0.0 { 1 } else { -1 };
    let step_y: i64 = if d.y > 0.0 { 1 } else { -1 };
    let (dtx, tx0) = if d.x != 0.0 {
        let edge = 0.5 * w * step_x as f64;
        (w / d.x.abs(), (edge - o.x) / d.x)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let (dty, ty0) = if d.y != 0.0 {
        let edge = 0.5 * h * step_y as f64;
        (h / d.y.abs(), (edge - o.y) / d.y)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let (mut kx, mut ky) = (0i64, 0i64);
    let (mut i, mut j) = (0i64, 0i64);
    let mut grazes = 0u32;
    let shape = table.shape();
    loop {
        let tx = if d.x != 0.0 { tx0 + kx as f64 * dtx } else { f64::INFINITY };
        let ty = if d.y != 0.0 { ty0 + ky as f64 * dty } else { f64::INFINITY };
        if tx < ty {
            i += step_x;
            kx += 1;
        } else {
            j += step_y;
            ky += 1;
        }
        let n = i.abs().max(j.abs());
        if n > limit {
            return Err(Error::HorizonOverflow { limit: limit as u64 });
        }
        let centre = Vec2::new(i as f64 * w, j as f64 * h);
        let local = o - centre;
        if let Some(t) = scatterer_hit(shape, local, d) {
            let p = local + d * t;
            let cos = cos_at(table, p, d);
            let tangential = cos < TANGENCY_TOL;
            if tangential && pass_tangent {
                grazes += 1;
                continue;
            }
            return Ok(CollisionEvent {
                hit_r: table.scatterer_r(p),
                boundary_kind: Component::Scatterer,
                tau: t,
                cells_crossed: n as u64,
                tangential,
                shift: (i, j),
                position: p,
                grazes,
                cos_incidence: cos,
            });
        }
    }
}

/// Flight inside the rectangle with a single central scatterer.
pub fn rectangle_flight(table: &Table, ray: Ray, start: Component, pass_tangent: bool) -> Result<CollisionEvent> {
    let (o, d) = (ray.origin, ray.direction);
    let (w2, h2) = (0.5 * table.width(), 0.5 * table.height());
    let mut grazes = 0u32;
    if start != Component::Scatterer {
        if let Some(t) = scatterer_hit(table.shape(), o, d) {
            let p = o + d * t;
            let cos = cos_at(table, p, d);
            let tangential = cos < TANGENCY_TOL;
            if !(tangential && pass_tangent) {
                return Ok(CollisionEvent {
                    hit_r: table.scatterer_r(p),
                    boundary_kind: Component::Scatterer,
                    tau: t,
                    cells_crossed: 0,
                    tangential,
                    shift: (0, 0),
                    position: p,
                    grazes,
                    cos_incidence: cos,
                });
            }
            grazes += 1;
        }
    }
    let mut best = (f64::INFINITY, Component::North);
    let mut consider = |t: f64, c: Component| {
        if c != start && t > 0.0 && t < best.0 {
            best = (t, c);
        }
    };
    if d.y > 0.0 {
        consider((h2 - o.y) / d.y, Component::North);
    }
    if d.y < 0.0 {
        consider((-h2 - o.y) / d.y, Component::South);
    }
    if d.x > 0.0 {
        consider((w2 - o.x) / d.x, Component::East);
    }
    if d.x < 0.0 {
        consider((-w2 - o.x) / d.x, Component::West);
    }
    let (t, c) = best;
    if !t.is_finite() {
        return Err(Error::Domain("ray does not leave the rectangle".into()));
    }
    let p = o + d * t;
    let bp = table.wall_point(c, p);
    Ok(CollisionEvent {
        hit_r: bp.r,
        boundary_kind: c,
        tau: t,
        cells_crossed: 0,
        tangential: false,
        shift: (0, 0),
        position: bp.position,
        grazes,
        cos_incidence: d.dot(bp.normal).abs(),
    })
}

/// First collision along `ray` leaving component `start` in the table's mode.
///
/// Tangential scatterer contacts are returned with `tangential = true`.
pub fn next_collision(table: &Table, ray: Ray, start: Component) -> Result<CollisionEvent> {
    match table.mode() {
        Mode::Torus => lattice_flight(table, ray, false),
        Mode::Rectangle => rectangle_flight(table, ray, start, false),
    }
}
