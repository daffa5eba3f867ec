//! Lyapunov exponent of the collision map and expansion along the channel periodic orbits.

use super::fit::Z95;
use crate::cells::periodic_point;
use crate::error::{Error, Result};
use crate::flight::TANGENCY_TOL;
use crate::geometry::Table;
use crate::map::{scatterer_step, step, BaseMap, PhasePoint, State, StepDerivative};
use serde::{Deserialize, Serialize};

pub const RENORMALIZE_EVERY: u64 = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Mean log Euclidean expansion per collision.
    pub exponent: f64,
    pub ci_halfwidth: f64,
    pub steps: u64,
    pub batches: u64,
    /// Steps skipped because the next collision was tangential.
    pub flagged: u64,
}

/// Lower edge `V = K` of the unstable cone, i.e. a beam with `B⁻ = 0`.
fn cone_vector(s: &State) -> [f64; 2] {
    [1.0, s.curvature()]
}

/// Estimate along `steps` collisions from `x`, transporting an unstable-cone vector.
pub fn lyapunov(table: &Table, base: BaseMap, x: PhasePoint, steps: u64, batches: u64) -> Result<LyapunovEstimate> {
    let blocks = steps / RENORMALIZE_EVERY;
    if blocks < batches || batches < 2 {
        return Err(Error::InsufficientSamples(format!("{steps} steps for {batches} batches")));
    }
    let per_batch = blocks / batches;
    let mut s = State::new(table, x)?;
    let mut v = cone_vector(&s);
    let mut flagged = 0;
    let mut batch_means = Vec::with_capacity(batches as usize);
    for _ in 0..batches {
        let mut log_sum = 0.0;
        let mut counted = 0u64;
        for _ in 0..per_batch {
            let mut acc = 0.0;
            for _ in 0..RENORMALIZE_EVERY {
                let (s1, ev) = step(table, base, &s)?;
                if s1.cos_phi() < TANGENCY_TOL {
                    flagged += 1;
                    s = s1;
                    v = cone_vector(&s);
                    continue;
                }
                let d = StepDerivative::between(&s, &s1, ev.tau);
                let before = v[0].hypot(v[1]);
                v = d.apply(v);
                acc += (v[0].hypot(v[1]) / before).ln();
                let norm = v[0].hypot(v[1]);
                v = [v[0] / norm, v[1] / norm];
                counted += 1;
                s = s1;
            }
            log_sum += acc;
        }
        batch_means.push(log_sum / counted.max(1) as f64);
    }
    let nb = batch_means.len() as f64;
    let mean = batch_means.iter().sum::<f64>() / nb;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (nb - 1.0);
    Ok(LyapunovEstimate { exponent: mean, ci_halfwidth: Z95 * (var / nb).sqrt(), steps: per_batch * batches * RENORMALIZE_EVERY, batches, flagged })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicExpansion {
    pub m: u64,
    pub periods: u64,
    /// Free path of one flight of the orbit.
    pub tau: f64,
    /// Mean log p-metric expansion per period (two flights).
    pub per_period: f64,
    /// The same per unit path length.
    pub per_length: f64,
    /// Largest `|K|` met along the orbit.
    pub max_curvature: f64,
}

/// p-metric expansion of an unstable-cone beam along the orbit of the periodic point `y_m`.
///
/// The beam starts at the upper cone edge `B⁻ = 1/τ_min`.
pub fn periodic_expansion(table: &Table, m: u64, periods: u64) -> Result<PeriodicExpansion> {
    let y = periodic_point(table, m)?;
    let mut s = State::new(table, y)?;
    let mut b_minus = 1.0 / table.tau_min();
    let mut total = 0.0;
    let mut tau = 0.0;
    let mut kmax: f64 = 0.0;
    for _ in 0..2 * periods {
        let (s1, ev) = scatterer_step(table, &s)?;
        total += (1.0 + ev.tau * (b_minus + 2.0 * s.curvature() / s.cos_phi())).ln();
        b_minus = {
            let b = b_minus + 2.0 * s.curvature() / s.cos_phi();
            b / (1.0 + ev.tau * b)
        };
        tau = ev.tau;
        kmax = kmax.max(s1.curvature().abs());
        s = s1;
    }
    let per_period = total / periods as f64;
    Ok(PeriodicExpansion { m, periods, tau, per_period, per_length: per_period / (2.0 * tau), max_curvature: kmax })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Mode, TableConfig};
    use crate::stats::{sample_mu, stream_rng};

    #[test]
    fn typical_orbit_is_hyperbolic() {
        let t = Table::new(TableConfig::default().with_mode(Mode::Rectangle)).unwrap();
        let x = sample_mu(&t, &mut stream_rng(4, 0));
        let l = lyapunov(&t, BaseMap::Full, x, 64 * 320, 10).unwrap();
        assert!(l.exponent - l.ci_halfwidth > 0.0, "{l:?}");
    }

    #[test]
    fn channel_orbit_expansion_fades() {
        let t = Table::new(TableConfig::default()).unwrap();
        let a = periodic_expansion(&t, 4, 200).unwrap();
        let b = periodic_expansion(&t, 16, 200).unwrap();
        assert!(a.max_curvature < 1e-6 && b.max_curvature < 1e-6);
        assert!(b.per_length < a.per_length);
        let short = periodic_expansion(&t, 4, 20).unwrap();
        assert!(a.per_period < short.per_period);
    }
}
