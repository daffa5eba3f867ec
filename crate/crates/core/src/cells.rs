//! Flat-point windows, the induced map and the cell partition.

use crate::error::{Error, Result};
use crate::flight::{lattice_flight_capped, CollisionEvent};
use crate::geometry::{Component, Table};
use crate::map::{scatterer_step, BaseMap, PhasePoint, State};
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

/// Half-width `ε₀ m^{-1/(β-1)}` of the window around a flat point for cell index `m`.
pub fn window_radius(table: &Table, m: u64) -> f64 {
    let m = m.max(1) as f64;
    table.config().epsilon0 * m.powf(-1.0 / (table.beta() - 1.0))
}

/// Whether a scatterer point at `r` whose next flight crosses `m` cells lies in its window.
pub fn in_window(table: &Table, r: f64, m: u64) -> bool {
    table.flat_offset(r).abs() <= window_radius(table, m)
}

/// Window endpoints `(q1, q2)` around flat point `flat` (0..4) and the curvature there.
pub fn window_endpoints(table: &Table, flat: usize, m: u64) -> Result<(f64, f64, f64)> {
    let rf = table.flat_points()[flat % 4];
    let w = window_radius(table, m);
    let (q1, q2) = ((rf - w).rem_euclid(table.perimeter()), rf + w);
    let k = table.boundary_at(Component::Scatterer, q2)?.curvature;
    Ok((q1, q2, k))
}

/// A scatterer collision together with its outgoing flight.
#[derive(Clone, Copy, Debug)]
pub struct Node {
    pub state: State,
    pub next: State,
    pub flight: CollisionEvent,
}

impl Node {
    pub fn new(table: &Table, state: State) -> Result<Self> {
        let (next, flight) = scatterer_step(table, &state)?;
        Ok(Self { state, next, flight })
    }

    pub fn at(table: &Table, x: PhasePoint) -> Result<Self> {
        Self::new(table, State::new(table, x)?)
    }

    pub fn cell(&self) -> u64 {
        self.flight.cells_crossed
    }

    /// Membership in the window of its own cell index.
    pub fn in_window(&self, table: &Table) -> bool {
        in_window(table, self.state.boundary.r, self.cell())
    }

    pub fn in_m(&self, table: &Table) -> bool {
        !self.in_window(table)
    }

    /// Wall collisions of the folded rectangle orbit during this flight.
    pub fn wall_hits(&self) -> u64 {
        (self.flight.shift.0.unsigned_abs()) + (self.flight.shift.1.unsigned_abs())
    }

    pub fn advance(&self, table: &Table) -> Result<Node> {
        Node::new(table, self.next)
    }
}

/// Result of one step of the induced map on `M`.
#[derive(Clone, Copy, Debug)]
pub struct InducedStep {
    pub image: Node,
    /// Return time for the scatterer map.
    pub scatterer_steps: u64,
    /// Return time for the full rectangle map, walls included.
    pub full_steps: u64,
    /// Sum of the lattice shifts of all flights up to the return.
    pub displacement: (i64, i64),
}

impl InducedStep {
    pub fn return_time(&self, base: BaseMap) -> u64 {
        match base {
            BaseMap::Full => self.full_steps,
            BaseMap::Scatterer => self.scatterer_steps,
        }
    }
}

/// Default cap on scatterer collisions spent inside a single trap.
pub const MAX_TRAP: u64 = 50_000_000;

/// First return of the scatterer map to `M` starting from `x`.
pub fn induced_step(table: &Table, x: &Node) -> Result<InducedStep> {
    let mut full = x.wall_hits() + 1;
    let mut k = 1u64;
    let mut disp = x.flight.shift;
    let mut cur = x.advance(table)?;
    while cur.in_window(table) {
        full += cur.wall_hits() + 1;
        k += 1;
        disp = (disp.0 + cur.flight.shift.0, disp.1 + cur.flight.shift.1);
        if k > MAX_TRAP {
            return Err(Error::Convergence(format!("trap longer than {MAX_TRAP} collisions")));
        }
        cur = cur.advance(table)?;
    }
    Ok(InducedStep { image: cur, scatterer_steps: k, full_steps: full, displacement: disp })
}

/// Induced map `x ↦ F_M(x)` with its return time for the chosen base map.
pub fn induced_map(table: &Table, x: PhasePoint, base: BaseMap) -> Result<(PhasePoint, u64)> {
    let node = Node::at(table, x)?;
    let st = induced_step(table, &node)?;
    Ok((st.image.state.phase(), st.return_time(base)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    /// Within `1/n` of grazing.
    CPrime,
    CDoublePrime,
}

/// Label identifying the element of the cell partition containing a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellLabel {
    pub n: u64,
    pub shift: (i64, i64),
    pub in_window: bool,
    pub part: Part,
    /// Collisions spent in windows before returning to `M`.
    pub trap_k: u64,
    pub homogeneity: i32,
}

/// Homogeneity strip index: 0 away from grazing, `±k` on
/// `π/2 - k^{-2} < |φ| ≤ π/2 - (k+1)^{-2}` for `k ≥ k0`.
pub fn homogeneity_index(k0: u32, phi: f64) -> i32 {
    let gap = FRAC_PI_2 - phi.abs();
    let k0f = k0 as f64;
    if gap > 1.0 / (k0f * k0f) {
        return 0;
    }
    let k = if gap <= 0.0 { i32::MAX } else { (1.0 / gap.sqrt()).floor().min(i32::MAX as f64) as i32 };
    let k = k.max(k0 as i32);
    if phi < 0.0 {
        -k
    } else {
        k
    }
}

pub fn part_of(n: u64, phi: f64) -> Part {
    if FRAC_PI_2 - phi.abs() < 1.0 / n.max(1) as f64 {
        Part::CPrime
    } else {
        Part::CDoublePrime
    }
}

pub fn label_of(table: &Table, node: &Node) -> Result<CellLabel> {
    let st = induced_step(table, node)?;
    let n = node.cell();
    Ok(CellLabel {
        n,
        shift: node.flight.shift,
        in_window: node.in_window(table),
        part: part_of(n, node.state.phi),
        trap_k: st.scatterer_steps - 1,
        homogeneity: homogeneity_index(table.config().k0, node.state.phi),
    })
}

pub fn classify(table: &Table, x: PhasePoint) -> Result<CellLabel> {
    label_of(table, &Node::at(table, x)?)
}

/// Continuity component of the induced map `F` (with the homogeneity strips of `x` and `Fx`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Branch {
    pub first_shift: (i64, i64),
    pub displacement: (i64, i64),
    pub trap_k: u64,
    pub strip: i32,
    pub image_strip: i32,
}

/// Which side of `S₁` a point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Piece {
    /// Inside a window, outside the domain of `F`.
    Window,
    Branch(Branch),
    /// The flight or trap could not be resolved (channel direction, cap exceeded).
    Unresolved,
}

/// Piece containing `x`, with `Fx` when defined.
pub fn piece(table: &Table, x: PhasePoint) -> Result<(Piece, Option<PhasePoint>)> {
    let node = match Node::at(table, x) {
        Ok(n) => n,
        Err(Error::HorizonOverflow { .. } | Error::Convergence(_)) => return Ok((Piece::Unresolved, None)),
        Err(e) => return Err(e),
    };
    if node.in_window(table) {
        return Ok((Piece::Window, None));
    }
    let st = match induced_step(table, &node) {
        Ok(st) => st,
        Err(Error::HorizonOverflow { .. } | Error::Convergence(_)) => return Ok((Piece::Unresolved, None)),
        Err(e) => return Err(e),
    };
    let k0 = table.config().k0;
    let image = st.image.state.phase();
    let b = Branch {
        first_shift: node.flight.shift,
        displacement: st.displacement,
        trap_k: st.scatterer_steps - 1,
        strip: homogeneity_index(k0, x.phi),
        image_strip: homogeneity_index(k0, image.phi),
    };
    Ok((Piece::Branch(b), Some(image)))
}

/// Lattice offset of the first non-tangential scatterer hit within `cap` cells, or `None` beyond.
fn target(table: &Table, r: f64, phi: f64, cap: u64) -> Result<Option<(i64, i64, u64)>> {
    let s = State::new(table, PhasePoint::scatterer(r, phi))?;
    match lattice_flight_capped(table, s.ray(), true, cap.min(table.config().max_flight_cells)) {
        Ok(ev) => Ok(Some((ev.shift.0, ev.shift.1, ev.cells_crossed))),
        Err(Error::HorizonOverflow { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn bisect<F: FnMut(f64) -> Result<bool>>(mut lo: f64, mut hi: f64, mut pred_hi: F, iters: usize) -> Result<f64> {
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        if pred_hi(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Angle on the curve bounding the immediate-neighbour region, for a base point at
/// arclength offset `u > 0` from the top flat point (flights heading into the
/// horizontal corridor on the left).
///
/// Points with `φ` between the returned value and `π/2` hit the neighbouring
/// scatterer of the same row.
pub fn s_prime_phi(table: &Table, u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Ok(FRAC_PI_2);
    }
    let neighbour = |phi: f64| -> Result<bool> { Ok(matches!(target(table, u, phi, 1)?, Some((-1, 0, _)))) };
    let mut lo = FRAC_PI_2 - 0.05;
    while neighbour(lo)? {
        lo = FRAC_PI_2 - 2.0 * (FRAC_PI_2 - lo);
        if lo < 0.0 {
            return Err(Error::Convergence("s' not bracketed".into()));
        }
    }
    bisect(lo, FRAC_PI_2, neighbour, 80)
}

/// Angle on the curve `s_n` at base offset `u` from the top flat point: flights with
/// larger `φ` (closer to grazing) travel more than `n` cells.
pub fn s_n_phi(table: &Table, n: u64, u: f64) -> Result<f64> {
    let far = |phi: f64| -> Result<bool> {
        Ok(match target(table, u, phi, n + 1)? {
            None => true,
            Some((dx, dy, m)) => dx < 0 && dy >= 0 && m > n,
        })
    };
    let upper = s_prime_phi(table, u)? - 1e-12;
    if !far(upper)? {
        return Err(Error::Domain(format!("no flight longer than {n} cells from offset {u}")));
    }
    let mut lo = upper - 0.5 / n as f64;
    while far(lo)? {
        lo = upper - 2.0 * (upper - lo);
        if lo < 0.0 {
            return Err(Error::Convergence("s_n not bracketed".into()));
        }
    }
    bisect(lo, upper, far, 80)
}

/// Largest cell index reachable from base offset `u`, attained just below `s'`.
pub fn max_cell_from(table: &Table, u: f64) -> Result<u64> {
    let phi = s_prime_phi(table, u)?;
    let mut best = 0;
    for eps in [1e-13, 1e-12, 1e-11] {
        match target(table, u, phi - eps, u64::MAX)? {
            Some((_, _, m)) => best = best.max(m),
            None => return Ok(u64::MAX),
        }
    }
    Ok(best)
}

/// Largest base offset from which a flight of at least `n` cells into the corridor exists.
pub fn cell_extent(table: &Table, n: u64) -> Result<f64> {
    let reach = |u: f64| -> Result<bool> { Ok(max_cell_from(table, u)? < n) };
    let mut hi = 0.05;
    while !reach(hi)? {
        hi *= 2.0;
        if hi > table.octant_length() {
            return Err(Error::Convergence("cell extent not bracketed".into()));
        }
    }
    bisect(0.0, hi, reach, 60)
}

/// Sample the curves `s'` and `s_n` over base offsets `us`.
pub fn trace_singularity(table: &Table, n: Option<u64>, us: &[f64]) -> Result<Vec<(f64, f64)>> {
    us.iter()
        .map(|&u| Ok((u, if let Some(n) = n { s_n_phi(table, n, u)? } else { s_prime_phi(table, u)? })))
        .collect()
}

/// The period-two orbit through the top flat point that reaches the partner flat
/// point `m` cells away in the horizontal corridor, found by shooting on `φ`.
pub fn periodic_point(table: &Table, m: u64) -> Result<PhasePoint> {
    if m == 0 {
        return Err(Error::Domain("cell index must be positive".into()));
    }
    let bottom = table.flat_points()[2];
    let tol = table.config().newton_tol;
    let w = table.height() - 2.0 * table.radius();
    let guess = FRAC_PI_2 - (w / (m as f64 * table.width())).atan();
    let miss = |phi: f64| -> Result<Option<f64>> {
        let node = Node::at(table, PhasePoint::scatterer(0.0, phi))?;
        if node.flight.shift != (-(m as i64), 1) {
            return Ok(None);
        }
        Ok(Some(node.flight.hit_r - bottom))
    };
    let mut phi = guess;
    for _ in 0..60 {
        let f = miss(phi)?.ok_or_else(|| Error::Convergence("shooting left the target cell".into()))?;
        let h = 1e-7;
        let f2 = miss(phi + h)?.ok_or_else(|| Error::Convergence("shooting left the target cell".into()))?;
        let slope = (f2 - f) / h;
        // The miss distance cannot resolve below one ulp of the angle times the slope.
        if f.abs() < tol.max(4.0 * f64::EPSILON * slope.abs()) {
            return Ok(PhasePoint::scatterer(0.0, phi));
        }
        phi -= f / slope;
    }
    Err(Error::Convergence(format!("periodic point for m = {m} did not converge")))
}
