//! Billiard maps on the collision space, their differentials and the time reversal.

use crate::config::Mode;
use crate::error::{Error, Result};
use crate::flight::{lattice_flight, rectangle_flight, CollisionEvent, Ray};
use crate::geometry::{BoundaryPoint, Component, Table, Vec2};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Point `(r, φ)` of the collision space; `φ` is measured from the inward normal
/// towards the direction of increasing `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub component: Component,
    pub r: f64,
    pub phi: f64,
}

impl PhasePoint {
    pub fn scatterer(r: f64, phi: f64) -> Self {
        Self { component: Component::Scatterer, r, phi }
    }

    /// The involution `(r, φ) ↦ (r, -φ)`.
    pub fn reversed(self) -> Self {
        Self { phi: -self.phi, ..self }
    }
}

/// A collision together with its outgoing velocity and boundary frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub boundary: BoundaryPoint,
    pub phi: f64,
    pub velocity: Vec2,
}

impl State {
    pub fn new(table: &Table, x: PhasePoint) -> Result<Self> {
        if !(x.phi.is_finite() && x.phi.abs() <= FRAC_PI_2) {
            return Err(Error::Domain(format!("phi = {} outside [-pi/2, pi/2]", x.phi)));
        }
        if x.component.is_wall() && table.mode() == Mode::Torus {
            return Err(Error::Domain("walls do not exist in torus mode".into()));
        }
        let b = table.boundary_at(x.component, x.r)?;
        let (s, c) = x.phi.sin_cos();
        Ok(Self { boundary: b, phi: x.phi, velocity: b.normal * c + b.tangent * s })
    }

    fn after_hit(b: BoundaryPoint, incoming: Vec2) -> Self {
        let v = incoming.reflect(b.normal);
        let phi = v.dot(b.tangent).atan2(v.dot(b.normal));
        Self { boundary: b, phi, velocity: v }
    }

    pub fn phase(&self) -> PhasePoint {
        PhasePoint { component: self.boundary.component, r: self.boundary.r, phi: self.phi }
    }

    pub fn ray(&self) -> Ray {
        Ray { origin: self.boundary.position, direction: self.velocity }
    }

    pub fn cos_phi(&self) -> f64 {
        self.phi.cos()
    }

    pub fn curvature(&self) -> f64 {
        self.boundary.curvature
    }
}

/// One application of the scatterer map: flight through the unfolded lattice.
///
/// Tangential contacts are passed through.
pub fn scatterer_step(table: &Table, s: &State) -> Result<(State, CollisionEvent)> {
    if s.boundary.component != Component::Scatterer {
        return Err(Error::Domain("scatterer map needs a scatterer point".into()));
    }
    let ev = lattice_flight(table, s.ray(), true)?;
    let b = table.scatterer_point(ev.position, Some(ev.hit_r));
    Ok((State::after_hit(b, s.velocity), ev))
}

/// One application of the full billiard map in the table's mode.
pub fn full_step(table: &Table, s: &State) -> Result<(State, CollisionEvent)> {
    match table.mode() {
        Mode::Torus => scatterer_step(table, s),
        Mode::Rectangle => {
            let ev = rectangle_flight(table, s.ray(), s.boundary.component, true)?;
            let b = match ev.boundary_kind {
                Component::Scatterer => table.scatterer_point(ev.position, Some(ev.hit_r)),
                c => table.wall_point(c, ev.position),
            };
            Ok((State::after_hit(b, s.velocity), ev))
        }
    }
}

pub fn full_map(table: &Table, x: PhasePoint) -> Result<(PhasePoint, CollisionEvent)> {
    let s = State::new(table, x)?;
    let (s1, ev) = full_step(table, &s)?;
    Ok((s1.phase(), ev))
}

pub fn scatterer_map(table: &Table, x: PhasePoint) -> Result<(PhasePoint, CollisionEvent)> {
    let s = State::new(table, x)?;
    let (s1, ev) = scatterer_step(table, &s)?;
    Ok((s1.phase(), ev))
}

pub fn time_reverse(x: PhasePoint) -> PhasePoint {
    x.reversed()
}

/// Differential of one collision step together with the quantities it depends on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepDerivative {
    pub matrix: [[f64; 2]; 2],
    pub tau: f64,
    pub curvature: f64,
    pub curvature1: f64,
    pub cos_phi: f64,
    pub cos_phi1: f64,
}

impl StepDerivative {
    pub fn new(tau: f64, k: f64, k1: f64, cos: f64, cos1: f64) -> Self {
        let m = [
            [-(tau * k + cos) / cos1, -tau / cos1],
            [-(tau * k * k1 + k * cos1 + k1 * cos) / cos1, -(tau * k1 + cos1) / cos1],
        ];
        Self { matrix: m, tau, curvature: k, curvature1: k1, cos_phi: cos, cos_phi1: cos1 }
    }

    pub fn between(s: &State, s1: &State, tau: f64) -> Self {
        Self::new(tau, s.curvature(), s1.curvature(), s.cos_phi(), s1.cos_phi())
    }

    pub fn det(&self) -> f64 {
        let m = self.matrix;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.matrix;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }
}

/// Which map a differential or induced return refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseMap {
    Full,
    Scatterer,
}

pub fn step(table: &Table, base: BaseMap, s: &State) -> Result<(State, CollisionEvent)> {
    match base {
        BaseMap::Full => full_step(table, s),
        BaseMap::Scatterer => scatterer_step(table, s),
    }
}

pub fn differential(table: &Table, base: BaseMap, x: PhasePoint) -> Result<StepDerivative> {
    let s = State::new(table, x)?;
    let (s1, ev) = step(table, base, &s)?;
    Ok(StepDerivative::between(&s, &s1, ev.tau))
}

/// Unstable-cone tangent data: a vector `(dr, dφ)` with slope `V = dφ/dr`
/// and post-collision wavefront curvature `B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TangentData {
    pub dr: f64,
    pub dphi: f64,
    pub b: f64,
}

impl TangentData {
    pub fn slope(&self) -> f64 {
        self.dphi / self.dr
    }

    /// Vector at `s` with post-collision curvature `b`, normalised so `dr = 1`.
    pub fn from_curvature(s: &State, b: f64) -> Self {
        Self { dr: 1.0, dphi: b * s.cos_phi() - s.curvature(), b }
    }
}

/// Expansion factors of one transported step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    /// `|dx₁|_p / |dx|_p = 1 + τB`.
    pub p_metric: f64,
    /// Ratio of Euclidean norms of `(dr, dφ)`.
    pub euclidean: f64,
}

/// Transport a tangent vector through one step.
pub fn wavefront_step(d: &StepDerivative, v: &TangentData) -> (TangentData, Expansion) {
    let [dr1, dphi1] = d.apply([v.dr, v.dphi]);
    let pre = v.b / (1.0 + d.tau * v.b);
    let b1 = pre + 2.0 * d.curvature1 / d.cos_phi1;
    let e = (dr1.hypot(dphi1)) / v.dr.hypot(v.dphi);
    let p = (d.cos_phi1 * dr1.abs()) / (d.cos_phi * v.dr.abs());
    (TangentData { dr: dr1, dphi: dphi1, b: b1 }, Expansion { p_metric: p, euclidean: e })
}

/// Whether slope `v` lies in the unstable cone `K ≤ V ≤ K + 1/τ_min` (with slack `tol`).
pub fn in_unstable_cone(k: f64, tau_min: f64, v: f64, tol: f64) -> bool {
    v >= k - tol && v <= k + 1.0 / tau_min + tol
}

/// Count of cone violations after one step of `DF` applied to `vectors`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConeReport {
    pub tested: u64,
    pub violations: u64,
    pub excluded_tangent: u64,
}

/// Apply `DF` to unstable-cone vectors at `x` and check the image slopes.
pub fn cone_check(table: &Table, base: BaseMap, x: PhasePoint, slopes: &[f64]) -> Result<ConeReport> {
    let s = State::new(table, x)?;
    let (s1, ev) = step(table, base, &s)?;
    let mut rep = ConeReport::default();
    if s1.cos_phi() < 1e-6 || s.cos_phi() < 1e-6 {
        rep.excluded_tangent = slopes.len() as u64;
        return Ok(rep);
    }
    let d = StepDerivative::between(&s, &s1, ev.tau);
    let tmin = table.tau_min();
    let k1 = s1.curvature();
    for &v in slopes {
        let [dr1, dphi1] = d.apply([1.0, v]);
        let v1 = dphi1 / dr1;
        rep.tested += 1;
        if !in_unstable_cone(k1, tmin, v1, 1e-9 * (1.0 + v1.abs())) {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TableConfig;

    fn fd_jacobian(table: &Table, base: BaseMap, x: PhasePoint, h: f64) -> [[f64; 2]; 2] {
        let f = |dr: f64, dp: f64| {
            let s = State::new(table, PhasePoint { r: x.r + dr, phi: x.phi + dp, ..x }).unwrap();
            let (s1, _) = step(table, base, &s).unwrap();
            (s1.boundary.r, s1.phi)
        };
        let (a, b) = (f(h, 0.0), f(-h, 0.0));
        let (c, d) = (f(0.0, h), f(0.0, -h));
        [[(a.0 - b.0) / (2.0 * h), (c.0 - d.0) / (2.0 * h)], [(a.1 - b.1) / (2.0 * h), (c.1 - d.1) / (2.0 * h)]]
    }

    #[test]
    fn differential_matches_finite_differences() {
        for mode in [Mode::Torus, Mode::Rectangle] {
            let t = Table::new(TableConfig::default().with_mode(mode)).unwrap();
            for (r, phi) in [(0.3, 0.2), (1.7, -0.9), (3.1, 0.5), (5.0, 1.2), (0.01, 1.3)] {
                let x = PhasePoint::scatterer(r, phi);
                let d = differential(&t, BaseMap::Full, x).unwrap();
                let fd = fd_jacobian(&t, BaseMap::Full, x, 1e-6);
                println!("{mode:?} {:?}\n   {:?}", d.matrix, fd);
                for i in 0..2 {
                    for j in 0..2 {
                        assert!((d.matrix[i][j] - fd[i][j]).abs() < 1e-5 * (1.0 + fd[i][j].abs()));
                    }
                }
            }
        }
    }
}
