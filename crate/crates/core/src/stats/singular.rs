//! Estimators near the singularity set `S₁` of the induced map: the one-step
//! expansion sums and the measure of `δ`-neighbourhoods.

use super::fit::{fit_power, wilson, PowerFit};
use super::runner::{run_chunks, Merge};
use super::sampling::sample_mu_scatterer;
use crate::cells::{piece, Piece};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::map::{PhasePoint, State};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Maximum bisection depth when locating a label change.
pub const BISECTION_ITERS: usize = 60;

/// Middle of the unstable cone at `x` as a unit vector in `(r, φ)`.
pub fn unstable_direction(table: &Table, x: PhasePoint) -> Result<[f64; 2]> {
    let s = State::new(table, x)?;
    let v = s.curvature() + 0.5 * s.cos_phi() / table.tau_min();
    let n = v.hypot(1.0);
    Ok([1.0 / n, v / n])
}

fn shifted(table: &Table, x: PhasePoint, d: [f64; 2], t: f64) -> PhasePoint {
    PhasePoint::scatterer((x.r + t * d[0]).rem_euclid(table.perimeter()), x.phi + t * d[1])
}

/// Whether `x + t·d` stays inside the collision space.
fn admissible(x: PhasePoint, d: [f64; 2], t: f64) -> bool {
    (x.phi + t * d[1]).abs() < std::f64::consts::FRAC_PI_2
}

/// Label evaluations allowed per curve when resolving its pieces.
pub const EVAL_BUDGET: usize = 20_000;

/// Bisection state shared across one curve.
struct Resolver<'a> {
    table: &'a Table,
    x: PhasePoint,
    d: [f64; 2],
    /// Intervals shorter than this are left unresolved.
    resolution: f64,
    budget: usize,
}

impl Resolver<'_> {
    fn label(&mut self, t: f64) -> Result<(Piece, Option<PhasePoint>)> {
        self.budget = self.budget.saturating_sub(1);
        piece(self.table, shifted(self.table, self.x, self.d, t))
    }

    /// Push the brackets `(lo, hi)` of every label change on `[a, b]`.
    fn cuts(&mut self, (a, la): (f64, Piece), (b, lb): (f64, Piece), out: &mut Vec<(f64, f64)>) -> Result<()> {
        if la == lb {
            return Ok(());
        }
        let mid = 0.5 * (a + b);
        if b - a <= self.resolution || self.budget == 0 || mid <= a || mid >= b {
            out.push((a, b));
            return Ok(());
        }
        let lm = self.label(mid)?.0;
        self.cuts((a, la), (mid, lm), out)?;
        self.cuts((mid, lm), (b, lb), out)
    }
}

/// Bisect `[a, b]` (labels differ at the ends) down to one label change.
fn first_cut(table: &Table, x: PhasePoint, d: [f64; 2], (mut a, la): (f64, Piece), mut b: f64) -> Result<f64> {
    for _ in 0..BISECTION_ITERS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if piece(table, shifted(table, x, d, mid))?.0 == la {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Outcome of pushing one short unstable curve through `F`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneStepTrial {
    pub center: PhasePoint,
    pub length: f64,
    /// Number of pieces of `W ∩ M` with a defined image.
    pub pieces: usize,
    /// `Σ |Wᵢ| / |FWᵢ|`.
    pub sum: f64,
    /// Length of the parts of `W` in windows or unresolved.
    pub dropped: f64,
    /// Whether the label-evaluation budget ran out.
    pub truncated: bool,
}

fn image_gap(table: &Table, a: PhasePoint, b: PhasePoint) -> f64 {
    let p = table.perimeter();
    let dr = (b.r - a.r + 0.5 * p).rem_euclid(p) - 0.5 * p;
    dr.hypot(b.phi - a.phi)
}

/// Cut the segment `center + s·d`, `|s| ≤ length/2`, at the label changes of `F` and return
/// the one-step sum, with image lengths measured by chords through `samples` points.
pub fn one_step_sum(table: &Table, center: PhasePoint, d: [f64; 2], length: f64, samples: usize) -> Result<OneStepTrial> {
    let samples = samples.max(2);
    let h = length / (samples - 1) as f64;
    let mut res = Resolver { table, x: center, d, resolution: length * 1e-10, budget: EVAL_BUDGET };
    let mut pts: Vec<(f64, Piece, Option<PhasePoint>)> = Vec::with_capacity(samples + 16);
    for i in 0..samples {
        let s = -0.5 * length + i as f64 * h;
        let (l, img) = res.label(s)?;
        pts.push((s, l, img));
    }
    // Insert the bracket points of every cut between consecutive samples.
    let mut all = Vec::with_capacity(pts.len() * 2);
    for w in pts.windows(2) {
        all.push(w[0]);
        let mut found = Vec::new();
        res.cuts((w[0].0, w[0].1), (w[1].0, w[1].1), &mut found)?;
        for (lo, hi) in found {
            for s in [lo, hi] {
                if s > w[0].0 && s < w[1].0 {
                    let (l, img) = res.label(s)?;
                    all.push((s, l, img));
                }
            }
        }
    }
    all.push(*pts.last().unwrap());
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut sum = 0.0;
    let mut dropped = 0.0;
    let mut pieces = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].1 == all[i].1 {
            j += 1;
        }
        let len_w = all[j].0 - all[i].0;
        match all[i].1 {
            Piece::Branch(_) => {
                let image: f64 = (i..j).map(|k| image_gap(table, all[k].2.unwrap(), all[k + 1].2.unwrap())).sum();
                if image > 0.0 && len_w > 0.0 {
                    sum += len_w / image;
                    pieces += 1;
                }
            }
            _ => dropped += len_w,
        }
        // Unresolved gap up to the next piece.
        if j + 1 < all.len() {
            dropped += all[j + 1].0 - all[j].0;
        }
        i = j + 1;
    }
    if pieces == 0 && dropped >= length * (1.0 - 1e-12) {
        return Err(Error::Domain("curve has no piece with a defined image".into()));
    }
    Ok(OneStepTrial { center, length, pieces, sum, dropped, truncated: res.budget == 0 })
}

/// Find a point of `S₁` by scanning from a μ-random point of `M` along its unstable direction.
pub fn find_crossing<R: Rng + ?Sized>(table: &Table, reach: f64, rng: &mut R) -> Result<(PhasePoint, [f64; 2])> {
    const PROBES: usize = 32;
    for _ in 0..100_000 {
        let x = sample_mu_scatterer(table, rng);
        let (l0, _) = piece(table, x)?;
        if !matches!(l0, Piece::Branch(_)) {
            continue;
        }
        let d = unstable_direction(table, x)?;
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let d = [sign * d[0], sign * d[1]];
        let mut prev = (0.0, l0);
        for i in 1..=PROBES {
            let t = reach * i as f64 / PROBES as f64;
            if !admissible(x, d, t) {
                break;
            }
            let l = piece(table, shifted(table, x, d, t))?.0;
            if l != prev.1 {
                let c = first_cut(table, x, d, prev, t)?;
                return Ok((shifted(table, x, d, c), d));
            }
            prev = (t, l);
        }
    }
    Err(Error::Convergence("no singularity crossing found".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneStepReport {
    pub lengths: Vec<f64>,
    /// `trials[i][j]`: trial `i` at length `lengths[j]`, sharing the same crossing point.
    pub trials: Vec<Vec<OneStepTrial>>,
    pub max_sum: Vec<f64>,
    pub mean_sum: Vec<f64>,
}

/// One-step sums for `trials` unstable curves crossing `S₁`, each evaluated at every length.
///
/// The same crossing point and relative offset are reused across lengths.
pub fn one_step_expansion(table: &Table, lengths: &[f64], trials: usize, samples: usize, seed: u64) -> Result<OneStepReport> {
    if lengths.iter().any(|&l| !(l > 0.0 && l <= 1e-3)) {
        return Err(Error::Config("curve lengths must lie in (0, 1e-3]".into()));
    }
    let sizes = vec![1u64; trials];
    let out: TrialList = run_chunks(seed, 1 << 28, &sizes, |_, _, rng| {
        let res = (|| {
            let (c, d) = find_crossing(table, 0.05, rng)?;
            let xi: f64 = rng.random::<f64>() - 0.5;
            lengths
                .iter()
                .map(|&l| {
                    let center = shifted(table, c, d, xi * l);
                    one_step_sum(table, center, d, l, samples)
                })
                .collect::<Result<Vec<_>>>()
        })();
        TrialList(vec![res.map_err(|e| e.to_string())])
    });
    let trials: Vec<Vec<OneStepTrial>> = out.0.into_iter().collect::<std::result::Result<_, _>>().map_err(Error::Convergence)?;
    let nl = lengths.len();
    let max_sum = (0..nl).map(|j| trials.iter().map(|t| t[j].sum).fold(0.0, f64::max)).collect();
    let mean_sum = (0..nl).map(|j| trials.iter().map(|t| t[j].sum).sum::<f64>() / trials.len() as f64).collect();
    Ok(OneStepReport { lengths: lengths.to_vec(), trials, max_sum, mean_sum })
}

#[derive(Default)]
struct TrialList(Vec<std::result::Result<Vec<OneStepTrial>, String>>);

impl Merge for TrialList {
    fn merge(&mut self, o: &Self) {
        self.0.extend(o.0.iter().cloned());
    }
}

/// Axis directions `±r`, `±φ` used by the distance proxy.
pub const PROBE_DIRECTIONS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

/// Proxy distance from `x` to the set where `label` changes: the smallest probe
/// offset along the four axis directions at which the label differs, refined by
/// bisection. Offsets are tried at the increasing `scales`; `None` if no change
/// is seen up to the last one.
pub fn proxy_distance<L, F>(table: &Table, x: PhasePoint, scales: &[f64], label: F) -> Result<Option<f64>>
where
    L: PartialEq,
    F: Fn(PhasePoint) -> Result<L>,
{
    let l0 = label(x)?;
    let mut best: Option<f64> = None;
    for d in PROBE_DIRECTIONS {
        let mut lo = 0.0;
        for &t in scales {
            if best.is_some_and(|b| t > 2.0 * b) {
                break;
            }
            let (t, hit) = if admissible(x, d, t) {
                (t, label(shifted(table, x, d, t))? != l0)
            } else {
                // The boundary φ = ±π/2 of the collision space counts as singular.
                ((std::f64::consts::FRAC_PI_2 - x.phi.abs()).max(0.0), true)
            };
            if hit {
                let (mut a, mut b) = (lo, t);
                for _ in 0..BISECTION_ITERS {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b || !admissible(x, d, m) {
                        break;
                    }
                    if label(shifted(table, x, d, m))? != l0 {
                        b = m;
                    } else {
                        a = m;
                    }
                }
                best = Some(best.map_or(b, |v: f64| v.min(b)));
                break;
            }
            lo = t;
        }
    }
    Ok(best)
}

/// Counts of `proxy-dist ≤ δ` per threshold.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodCounts {
    pub samples: u64,
    pub hits: Vec<u64>,
}

impl Merge for NeighborhoodCounts {
    fn merge(&mut self, o: &Self) {
        if self.hits.is_empty() {
            self.hits = vec![0; o.hits.len()];
        }
        self.samples += o.samples;
        for (a, b) in self.hits.iter_mut().zip(&o.hits) {
            *a += b;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodEstimate {
    pub deltas: Vec<f64>,
    /// Fraction of `μ`-random points of `M` within proxy distance `δ` of `S₁`.
    pub measure: Vec<f64>,
    pub wilson_lo: Vec<f64>,
    pub wilson_hi: Vec<f64>,
    pub counts: Vec<u64>,
    pub fit: PowerFit,
    pub sample_count: u64,
}

/// `μ(x ∈ M : proxy-dist(x, S₁) ≤ δ)` for each `δ` in `deltas`.
pub fn singularity_neighborhood(table: &Table, deltas: &[f64], samples: u64, seed: u64) -> Result<NeighborhoodEstimate> {
    let mut scales = deltas.to_vec();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let sizes = super::runner::chunk_sizes(samples, 4096);
    let acc: NeighborhoodCounts = run_chunks(seed, 1 << 32, &sizes, |_, size, rng| {
        let mut acc = NeighborhoodCounts { samples: 0, hits: vec![0; scales.len()] };
        let mut drawn = 0;
        while drawn < size {
            let x = sample_mu_scatterer(table, rng);
            let Ok((l0, _)) = piece(table, x) else { continue };
            if l0 == Piece::Window {
                continue;
            }
            drawn += 1;
            acc.samples += 1;
            let d = proxy_distance(table, x, &scales, |y| Ok(piece(table, y)?.0)).unwrap_or(Some(0.0));
            if let Some(d) = d {
                for (i, &s) in scales.iter().enumerate() {
                    if d <= s {
                        acc.hits[i] += 1;
                    }
                }
            }
        }
        acc
    });
    let n = acc.samples as f64;
    let measure: Vec<f64> = acc.hits.iter().map(|&h| h as f64 / n).collect();
    let (lo, hi): (Vec<f64>, Vec<f64>) = acc.hits.iter().map(|&h| wilson(h as f64, n)).unzip();
    let pts: Vec<_> = scales
        .iter()
        .zip(&acc.hits)
        .filter(|(_, &h)| h >= super::tails::MIN_BIN_COUNT)
        .map(|(&d, &h)| {
            let p = h as f64 / n;
            (d, p, (p * (1.0 - p) / n).sqrt())
        })
        .collect();
    let window = (scales[0], *scales.last().unwrap());
    let fit = fit_power(&pts, window)?;
    Ok(NeighborhoodEstimate { deltas: scales, measure, wilson_lo: lo, wilson_hi: hi, counts: acc.hits, fit, sample_count: acc.samples })
}

/// Euclidean distance in `(r, φ)` from `x` to a polyline (wrapping in `r` ignored).
pub fn polyline_distance(poly: &[(f64, f64)], x: PhasePoint) -> f64 {
    let p = [x.r, x.phi];
    poly.windows(2)
        .map(|w| {
            let (a, b) = ([w[0].0, w[0].1], [w[1].0, w[1].1]);
            let ab = [b[0] - a[0], b[1] - a[1]];
            let ap = [p[0] - a[0], p[1] - a[1]];
            let len2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
            (ap[0] - t * ab[0]).hypot(ap[1] - t * ab[1])
        })
        .fold(f64::INFINITY, f64::min)
}
