use super::accum::Histogram;
use super::runner::Merge;
use crate::geometry::{Component, Table};
use crate::map::PhasePoint;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[inline]
fn cos_weighted_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0).clamp(-1.0, 1.0).asin()
}

/// Draw from the invariant measure `cos φ dr dφ` on the whole collision space of the table.
pub fn sample_mu<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> PhasePoint {
    let mut r = rng.random::<f64>() * table.boundary_length();
    for &c in table.components() {
        let len = table.component_length(c);
        if r < len || c == *table.components().last().unwrap() {
            return PhasePoint { component: c, r: r.min(len), phi: cos_weighted_angle(rng) };
        }
        r -= len;
    }
    unreachable!()
}

/// Draw from the invariant measure restricted to the scatterer.
pub fn sample_mu_scatterer<R: Rng + ?Sized>(table: &Table, rng: &mut R) -> PhasePoint {
    PhasePoint {
        component: Component::Scatterer,
        r: rng.random::<f64>() * table.perimeter(),
        phi: cos_weighted_angle(rng),
    }
}

/// Product region on the scatterer: a union of arcs times a band of `|sin φ|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    /// Arcs as `(start, length)` in arclength.
    pub arcs: Vec<(f64, f64)>,
    pub sin_lo: f64,
    pub sin_hi: f64,
}

impl Region {
    pub fn whole(table: &Table) -> Self {
        Self { arcs: vec![(0.0, table.perimeter())], sin_lo: 0.0, sin_hi: 1.0 }
    }

    /// All directions over the arcs `|r - r_flat| ≤ half` at the four flat points.
    pub fn flat_arcs(table: &Table, half: f64) -> Self {
        let arcs = table.flat_points().iter().map(|&f| (f - half, 2.0 * half)).collect();
        Self { arcs, sin_lo: 0.0, sin_hi: 1.0 }
    }

    pub fn with_band(mut self, lo: f64, hi: f64) -> Self {
        self.sin_lo = lo;
        self.sin_hi = hi;
        self
    }

    fn arc_length(&self) -> f64 {
        self.arcs.iter().map(|a| a.1).sum()
    }

    /// Mass under the normalised invariant measure on the scatterer.
    pub fn mass(&self, table: &Table) -> f64 {
        self.arc_length() / table.perimeter() * (self.sin_hi - self.sin_lo)
    }

    pub fn sample<R: Rng + ?Sized>(&self, table: &Table, rng: &mut R) -> PhasePoint {
        let mut u = rng.random::<f64>() * self.arc_length();
        let mut r = 0.0;
        for &(start, len) in &self.arcs {
            if u < len {
                r = start + u;
                break;
            }
            u -= len;
            r = start + len;
        }
        let s = self.sin_lo + (self.sin_hi - self.sin_lo) * rng.random::<f64>();
        let s = if rng.random::<bool>() { s } else { -s };
        PhasePoint::scatterer(r.rem_euclid(table.perimeter()), s.clamp(-1.0, 1.0).asin())
    }
}

/// Disjoint strata with their sample allocations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratification {
    pub regions: Vec<Region>,
    pub samples: Vec<u64>,
}

impl Stratification {
    /// Bands of `|sin φ|` split at `cuts`, sampled with the given fractions of `total`.
    pub fn sin_bands(table: &Table, cuts: &[f64], fractions: &[f64], total: u64) -> Self {
        assert_eq!(cuts.len() + 1, fractions.len());
        let mut edges = vec![0.0];
        edges.extend_from_slice(cuts);
        edges.push(1.0);
        let norm: f64 = fractions.iter().sum();
        let regions = edges.windows(2).map(|w| Region::whole(table).with_band(w[0], w[1])).collect();
        let samples = fractions.iter().map(|f| (total as f64 * f / norm).round() as u64).collect();
        Self { regions, samples }
    }

    /// Disjoint strata refining towards the flat points.
    ///
    /// Level `j` is the difference of the nested regions `arcs(h_j) × {π/2 - |φ| ≤ g_j}`
    /// with `h_j = 3 n_j^{-1/β}` and `g_j = 3 n_j^{-(β-1)/β}`, which contain the
    /// corridor launches reaching roughly `n_j` cells. The first level is the whole
    /// phase space; every level receives the same share of `total`.
    pub fn flat_funnel(table: &Table, levels: &[f64], total: u64) -> Self {
        let beta = table.beta();
        let q = table.octant_length();
        let mut nested = vec![(q, 0.0)];
        for &n in levels {
            let h = (3.0 * n.powf(-1.0 / beta)).min(q);
            let g = (3.0 * n.powf(-(beta - 1.0) / beta)).min(std::f64::consts::FRAC_PI_2);
            nested.push((h, g.cos()));
        }
        let per_level = total / nested.len() as u64;
        let mut regions = Vec::new();
        let mut samples = Vec::new();
        for (j, &(h, lo)) in nested.iter().enumerate() {
            let mut pieces = Vec::new();
            match nested.get(j + 1) {
                Some(&(h1, lo1)) => {
                    if lo1 > lo {
                        pieces.push(Region::flat_arcs(table, h).with_band(lo, lo1));
                    }
                    if h > h1 {
                        let arcs = table
                            .flat_points()
                            .iter()
                            .flat_map(|&f| [(f - h, h - h1), (f + h1, h - h1)])
                            .collect();
                        pieces.push(Region { arcs, sin_lo: lo1, sin_hi: 1.0 });
                    }
                }
                None => pieces.push(Region::flat_arcs(table, h).with_band(lo, 1.0)),
            }
            let mass: f64 = pieces.iter().map(|p| p.mass(table)).sum();
            for p in pieces {
                samples.push((per_level as f64 * p.mass(table) / mass).round() as u64);
                regions.push(p);
            }
        }
        Self { regions, samples }
    }

    pub fn masses(&self, table: &Table) -> Vec<f64> {
        self.regions.iter().map(|r| r.mass(table)).collect()
    }

    pub fn total(&self) -> u64 {
        self.samples.iter().sum()
    }

    /// `(stratum, size)` work items of at most `chunk` samples each.
    pub fn chunks(&self, chunk: u64) -> Vec<(usize, u64)> {
        let mut out = Vec::new();
        for (s, &n) in self.samples.iter().enumerate() {
            for size in super::runner::chunk_sizes(n, chunk) {
                out.push((s, size));
            }
        }
        out
    }
}

/// Per-stratum histograms of an integer or tuple label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StratifiedCounts<K: Ord> {
    pub samples: Vec<u64>,
    pub hists: Vec<Histogram<K>>,
}

impl<K: Ord> Default for StratifiedCounts<K> {
    fn default() -> Self {
        Self { samples: Vec::new(), hists: Vec::new() }
    }
}

impl<K: Ord + Clone> StratifiedCounts<K> {
    pub fn new(strata: usize) -> Self {
        Self { samples: vec![0; strata], hists: vec![Histogram::default(); strata] }
    }

    pub fn record(&mut self, stratum: usize, label: Option<K>) {
        self.samples[stratum] += 1;
        if let Some(k) = label {
            self.hists[stratum].add(k);
        }
    }

    /// Estimate and standard error of the measure of `{label : pred(label)}`.
    pub fn estimate<F: Fn(&K) -> bool>(&self, masses: &[f64], pred: F) -> (f64, f64, u64) {
        let (mut est, mut var, mut hits) = (0.0, 0.0, 0u64);
        for (s, h) in self.hists.iter().enumerate() {
            let n = self.samples[s];
            if n == 0 {
                continue;
            }
            let c: u64 = h.counts.iter().filter(|(k, _)| pred(k)).map(|(_, c)| *c).sum();
            let p = c as f64 / n as f64;
            est += masses[s] * p;
            var += masses[s] * masses[s] * p * (1.0 - p) / n as f64;
            hits += c;
        }
        (est, var.sqrt(), hits)
    }
}

impl<K: Ord + Clone> Merge for StratifiedCounts<K> {
    fn merge(&mut self, o: &Self) {
        if self.samples.is_empty() {
            *self = o.clone();
            return;
        }
        for (a, b) in self.samples.iter_mut().zip(&o.samples) {
            *a += b;
        }
        for (a, b) in self.hists.iter_mut().zip(&o.hists) {
            a.merge(b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TableConfig;
    use crate::stats::runner::stream_rng;

    #[test]
    fn mean_cosine_is_pi_over_four() {
        let t = Table::new(TableConfig::default()).unwrap();
        let mut rng = stream_rng(1, 0);
        let n = 400_000;
        let (mut c, mut p) = (0.0, 0.0);
        for _ in 0..n {
            let x = sample_mu_scatterer(&t, &mut rng);
            c += x.phi.cos();
            p += x.phi;
        }
        let (c, p) = (c / n as f64, p / n as f64);
        // Standard deviation of cos φ under the measure is about 0.22.
        assert!((c - std::f64::consts::FRAC_PI_4).abs() < 5.0 * 0.22 / (n as f64).sqrt(), "{c}");
        assert!(p.abs() < 5.0 * 0.69 / (n as f64).sqrt());
    }

    #[test]
    fn r_marginal_passes_ks() {
        let t = Table::new(TableConfig::default().with_mode(crate::config::Mode::Rectangle)).unwrap();
        let mut rng = stream_rng(2, 0);
        let n = 1_000_000;
        let mut us: Vec<f64> = (0..n)
            .map(|_| {
                let x = sample_mu(&t, &mut rng);
                let mut off = 0.0;
                for &c in t.components() {
                    if c == x.component {
                        break;
                    }
                    off += t.component_length(c);
                }
                (off + x.r) / t.boundary_length()
            })
            .collect();
        us.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let d = us
            .iter()
            .enumerate()
            .map(|(i, u)| ((i + 1) as f64 / n as f64 - u).max(u - i as f64 / n as f64))
            .fold(0.0, f64::max);
        // Kolmogorov critical value at the 1% level.
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn region_mass_matches_sampling_frequency() {
        let t = Table::new(TableConfig::default()).unwrap();
        let reg = Region::flat_arcs(&t, 0.2).with_band(0.5, 0.9);
        let mut rng = stream_rng(3, 0);
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let x = sample_mu_scatterer(&t, &mut rng);
                t.flat_offset(x.r).abs() <= 0.2 && (0.5..=0.9).contains(&x.phi.sin().abs())
            })
            .count();
        let p = hits as f64 / n as f64;
        let m = reg.mass(&t);
        assert!((p - m).abs() < 5.0 * (m / n as f64).sqrt());
    }
}
