//! Cell measures, return-time tails, trap measures and conditional returns.

use super::accum::Histogram;
use super::fit::{fit_power, wilson, PowerFit};
use super::runner::{run_chunks, Merge};
use super::sampling::{Region, Stratification, StratifiedCounts};
use crate::cells::{induced_step, Node};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::map::PhasePoint;
use serde::{Deserialize, Serialize};

/// Label recorded for flights that hit the horizon cap or fail numerically.
pub const CENSORED: u64 = u64::MAX;

/// Samples per parallel work item.
pub const CHUNK: u64 = 1 << 15;

/// Minimum hits for a bin to enter a fit.
pub const MIN_BIN_COUNT: u64 = 25;

/// Per-`n` estimate of the measure of a level set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelBin {
    pub n: u64,
    pub estimate: f64,
    pub std_err: f64,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

/// Empirical survival function with a power-law fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub thresholds: Vec<u64>,
    pub survival: Vec<f64>,
    pub std_err: Vec<f64>,
    pub counts: Vec<u64>,
    pub fitted_exponent: f64,
    pub ci_halfwidth: f64,
    pub fit_window: (u64, u64),
    pub sample_count: u64,
    pub censored_count: u64,
}

impl TailEstimate {
    fn build(
        thresholds: Vec<u64>,
        rows: Vec<(f64, f64, u64)>,
        window: (u64, u64),
        sample_count: u64,
        censored_count: u64,
    ) -> Result<Self> {
        let pts: Vec<(f64, f64, f64)> = thresholds
            .iter()
            .zip(&rows)
            .filter(|(_, r)| r.2 >= MIN_BIN_COUNT)
            .map(|(&n, r)| (n as f64, r.0, r.1))
            .collect();
        let fit = fit_power(&pts, (window.0 as f64, window.1 as f64))?;
        Ok(Self {
            thresholds,
            survival: rows.iter().map(|r| r.0).collect(),
            std_err: rows.iter().map(|r| r.1).collect(),
            counts: rows.iter().map(|r| r.2).collect(),
            fitted_exponent: fit.exponent,
            ci_halfwidth: fit.ci_halfwidth,
            fit_window: window,
            sample_count,
            censored_count,
        })
    }
}

/// Geometric grid of integer thresholds from `lo` to `hi` with `per_octave` points per doubling.
pub fn log_grid(lo: u64, hi: u64, per_octave: u32) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let steps = ((hi as f64 / lo as f64).log2() * per_octave as f64).round() as i64;
    for i in 0..=steps {
        let v = (lo as f64 * 2f64.powf(i as f64 / per_octave as f64)).round() as u64;
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

fn stratified_run<K, F>(table: &Table, strata: &Stratification, seed: u64, label: F) -> StratifiedCounts<K>
where
    K: Ord + Clone + Send + Sync,
    F: Fn(&Table, PhasePoint) -> Option<K> + Sync,
{
    let work = strata.chunks(CHUNK);
    let sizes: Vec<u64> = work.iter().map(|w| w.1).collect();
    let n_strata = strata.regions.len();
    run_chunks(seed, 0, &sizes, |i, size, rng| {
        let s = work[i as usize].0;
        let mut acc = StratifiedCounts::new(n_strata);
        for _ in 0..size {
            let x = strata.regions[s].sample(table, rng);
            acc.record(s, label(table, x));
        }
        acc
    })
}

/// Stratification used by the cell-measure and return-tail estimators: long flights
/// need near-grazing directions, so most samples go to high `|sin φ|`.
pub fn grazing_strata(table: &Table, total: u64) -> Stratification {
    Stratification::sin_bands(table, &[0.9, 0.99], &[0.2, 0.3, 0.5], total)
}

/// Result of [`cell_measure_profile`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellProfile {
    pub bins: Vec<LevelBin>,
    pub fit: PowerFit,
    pub survival: TailEstimate,
    pub sample_count: u64,
    pub censored_count: u64,
    /// Equivalent number of plain samples for the rarest stratum.
    pub effective_samples: f64,
}

/// Measure of `M_n = {x : flight crosses n cells}` for `n ≤ n_max`, fitted on `[n_lo, n_max]`.
pub fn cell_measure_profile(table: &Table, n_lo: u64, n_max: u64, samples: u64, seed: u64) -> Result<CellProfile> {
    if samples < 1_000_000 {
        return Err(Error::InsufficientSamples(format!("{samples} < 10^6 samples")));
    }
    let strata = grazing_strata(table, samples);
    let masses = strata.masses(table);
    let acc: StratifiedCounts<u64> = stratified_run(table, &strata, seed, |t, x| {
        Some(Node::at(t, x).map(|n| n.cell()).unwrap_or(CENSORED))
    });
    let mut bins = Vec::new();
    for n in 1..=n_max {
        let (est, se, count) = acc.estimate(&masses, |&k| k == n);
        bins.push(level_bin(n, est, se, count));
    }
    let pts: Vec<(f64, f64, f64)> = bins
        .iter()
        .filter(|b| b.count >= MIN_BIN_COUNT)
        .map(|b| (b.n as f64, b.estimate, b.std_err))
        .collect();
    let fit = fit_power(&pts, (n_lo as f64, n_max as f64))?;
    for b in bins.iter().filter(|b| b.n >= n_lo) {
        if b.count < MIN_BIN_COUNT {
            return Err(Error::InsufficientSamples(format!("bin n = {} has {} hits", b.n, b.count)));
        }
    }
    let thresholds = log_grid(n_lo.min(2).max(1), n_max, 4);
    let rows: Vec<(f64, f64, u64)> = thresholds
        .iter()
        .map(|&n| acc.estimate(&masses, |&k| k >= n && k != CENSORED))
        .collect();
    let censored = acc.estimate(&masses, |&k| k == CENSORED).2;
    let survival = TailEstimate::build(thresholds, rows, (n_lo, n_max), strata.total(), censored)?;
    // Plain-sampling size giving the same variance in the sparsest fitted bin.
    let effective_samples = bins
        .iter()
        .filter(|b| b.n >= n_lo && b.std_err > 0.0)
        .map(|b| b.estimate * (1.0 - b.estimate) / (b.std_err * b.std_err))
        .fold(f64::INFINITY, f64::min);
    Ok(CellProfile { bins, fit, survival, sample_count: strata.total(), censored_count: censored, effective_samples })
}

fn level_bin(n: u64, est: f64, se: f64, count: u64) -> LevelBin {
    // Wilson interval on the effective binomial sample implied by (est, se).
    let (lo, hi) = if est > 0.0 && se > 0.0 {
        let n_eff = est * (1.0 - est) / (se * se);
        let (l, h) = wilson(est * n_eff, n_eff);
        (l, h)
    } else {
        (0.0, 0.0)
    };
    LevelBin { n, estimate: est, std_err: se, lo, hi, count }
}

/// Which return time a tail refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReturnKind {
    /// Full-map return to `M` (walls counted).
    R,
    /// Scatterer-map return to `M`.
    Rtilde,
}

/// Return time to `M` of a scatterer point, or `None` when it is not in `M`.
fn return_label(table: &Table, x: PhasePoint, which: ReturnKind) -> Option<u64> {
    let node = match Node::at(table, x) {
        Ok(n) => n,
        Err(_) => return Some(CENSORED),
    };
    if !node.in_m(table) {
        return None;
    }
    match induced_step(table, &node) {
        Ok(st) => Some(match which {
            ReturnKind::R => st.full_steps,
            ReturnKind::Rtilde => st.scatterer_steps,
        }),
        Err(_) => Some(CENSORED),
    }
}

/// Survival function `μ(R ≥ n | M)` from direct stratified sampling of `M`.
pub fn return_tail(table: &Table, which: ReturnKind, samples: u64, window: (u64, u64), seed: u64) -> Result<TailEstimate> {
    let strata = grazing_strata(table, samples);
    let masses = strata.masses(table);
    let acc = stratified_run(table, &strata, seed, |t, x| return_label(t, x, which));
    let (m_mass, _, _) = acc.estimate(&masses, |_| true);
    let thresholds = log_grid(1, window.1.max(2), 4);
    let rows: Vec<(f64, f64, u64)> = thresholds
        .iter()
        .map(|&n| {
            let (e, se, c) = acc.estimate(&masses, |&k| k >= n);
            (e / m_mass, se / m_mass, c)
        })
        .collect();
    let censored = acc.estimate(&masses, |&k| k == CENSORED).2;
    TailEstimate::build(thresholds, rows, window, strata.total(), censored)
}

/// Outcome of seeding one point in the flat-point arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Seeded {
    /// In a window, but its predecessor is not in `M`.
    Interior,
    /// Entry point of a trap: predecessor in `C_m`, followed by `k ≥ 1` window collisions.
    Entry { m: u64, k: u64 },
    /// Not in a window (the point lies in `M`).
    Outside,
    Censored,
}

/// Classify a seeded point `y` in the flat-point arcs.
///
/// `F̃⁻¹y` is obtained by reversing, flying and reversing again.
pub fn seed_label(table: &Table, y: PhasePoint) -> Seeded {
    let run = || -> Result<Seeded> {
        let node = Node::at(table, y)?;
        if !node.in_window(table) {
            return Ok(Seeded::Outside);
        }
        let back = Node::at(table, y.reversed())?;
        let x = Node::at(table, back.next.phase().reversed())?;
        if x.in_window(table) {
            return Ok(Seeded::Interior);
        }
        let mut k = 0u64;
        let mut cur = node;
        while cur.in_window(table) {
            k += 1;
            if k > crate::cells::MAX_TRAP {
                return Err(Error::Convergence("trap cap".into()));
            }
            cur = cur.advance(table)?;
        }
        Ok(Seeded::Entry { m: x.cell(), k })
    };
    run().unwrap_or(Seeded::Censored)
}

/// Importance-seeded trap statistics: counts over uniform seeds in the arcs
/// `|r - r_flat| ≤ ε₀` (which contain every window).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrapCounts {
    pub samples: u64,
    pub hist: Histogram<Seeded>,
    /// Mass of the seeding region under the normalised scatterer measure.
    pub seed_mass: f64,
}

impl Merge for TrapCounts {
    fn merge(&mut self, o: &Self) {
        self.samples += o.samples;
        self.hist.merge(&o.hist);
        if self.seed_mass == 0.0 {
            self.seed_mass = o.seed_mass;
        }
    }
}

impl TrapCounts {
    /// Measure and standard error of the seeded set selected by `pred`.
    pub fn measure<F: Fn(&Seeded) -> bool>(&self, pred: F) -> (f64, f64, u64) {
        let c: u64 = self.hist.counts.iter().filter(|(k, _)| pred(k)).map(|(_, c)| *c).sum();
        let p = c as f64 / self.samples as f64;
        (self.seed_mass * p, self.seed_mass * (p * (1.0 - p) / self.samples as f64).sqrt(), c)
    }

    /// `μ(C_{m,k})`; for `k = 0` this is not available from seeding.
    pub fn cell(&self, m: u64, k: u64) -> (f64, f64, u64) {
        self.measure(|s| matches!(s, Seeded::Entry { m: mm, k: kk } if *mm == m && *kk == k))
    }

    /// Measure of `M`: everything outside the windows.
    pub fn m_mass(&self) -> f64 {
        let (w, _, _) = self.measure(|s| matches!(s, Seeded::Interior | Seeded::Entry { .. }));
        1.0 - w
    }
}

pub fn seed_traps(table: &Table, samples: u64, seed: u64) -> TrapCounts {
    let region = Region::flat_arcs(table, table.config().epsilon0);
    let mass = region.mass(table);
    let sizes = super::runner::chunk_sizes(samples, CHUNK);
    run_chunks(seed, 1 << 20, &sizes, |_, size, rng| {
        let mut acc = TrapCounts { samples: 0, hist: Histogram::default(), seed_mass: mass };
        for _ in 0..size {
            let y = region.sample(table, rng);
            acc.samples += 1;
            acc.hist.add(seed_label(table, y));
        }
        acc
    })
}

/// Two-way trap-measure table with slope fits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrapTable {
    pub cells: Vec<(u64, u64, f64, f64, u64)>,
    /// Fit in `m` at fixed `k = k_fixed`.
    pub m_fit: PowerFit,
    pub k_fixed: u64,
    /// Fit in `k` at fixed `m = m_fixed`.
    pub k_fit: PowerFit,
    pub m_fixed: u64,
    /// Fit in `m` of `Σ_{k≥1} μ(C_{m,k})`.
    pub sum_fit: PowerFit,
    pub sample_count: u64,
    pub censored_count: u64,
}

/// Trap-measure table over `m_range × k_range` with the two-way fits.
pub fn trap_table(
    counts: &TrapCounts,
    m_range: (u64, u64),
    k_range: (u64, u64),
    k_fixed: u64,
    m_fixed: u64,
) -> Result<TrapTable> {
    let mut cells = Vec::new();
    for m in m_range.0..=m_range.1 {
        for k in k_range.0..=k_range.1 {
            let (e, se, c) = counts.cell(m, k);
            cells.push((m, k, e, se, c));
        }
    }
    let usable = |c: u64| c >= MIN_BIN_COUNT;
    let m_pts: Vec<(f64, f64, f64)> = (m_range.0..=m_range.1)
        .map(|m| counts.cell(m, k_fixed))
        .zip(m_range.0..=m_range.1)
        .filter(|((_, _, c), _)| usable(*c))
        .map(|((e, se, _), m)| (m as f64, e, se))
        .collect();
    let k_pts: Vec<(f64, f64, f64)> = log_grid(k_range.0, k_range.1, 2)
        .windows(2)
        .filter_map(|w| {
            // Average over [w0, w1) so sparse large-k cells pool into bins.
            let (e, se, c) = counts.measure(|s| matches!(s, Seeded::Entry { m, k } if *m == m_fixed && *k >= w[0] && *k < w[1]));
            let width = (w[1] - w[0]) as f64;
            let centre = ((w[0] as f64) * (w[1] as f64 - 1.0)).sqrt();
            usable(c).then_some((centre, e / width, se / width))
        })
        .collect();
    let s_pts: Vec<(f64, f64, f64)> = (m_range.0..=m_range.1)
        .filter_map(|m| {
            let (e, se, c) = counts.measure(|s| matches!(s, Seeded::Entry { m: mm, .. } if *mm == m));
            usable(c).then_some((m as f64, e, se))
        })
        .collect();
    let wm = (m_range.0 as f64, m_range.1 as f64);
    Ok(TrapTable {
        cells,
        m_fit: fit_power(&m_pts, wm)?,
        k_fixed,
        k_fit: fit_power(&k_pts, (k_range.0 as f64, k_range.1 as f64))?,
        m_fixed,
        sum_fit: fit_power(&s_pts, wm)?,
        sample_count: counts.samples,
        censored_count: counts.hist.get(&Seeded::Censored),
    })
}

/// `μ(R̃ ≥ n | M)` from trap seeding: `R̃ ≥ n` for `n ≥ 2` means a trap of length `≥ n - 1`.
pub fn rtilde_tail_seeded(counts: &TrapCounts, window: (u64, u64)) -> Result<TailEstimate> {
    let m_mass = counts.m_mass();
    let thresholds = log_grid(2, window.1.max(4), 4);
    let rows: Vec<(f64, f64, u64)> = thresholds
        .iter()
        .map(|&n| {
            let (e, se, c) = counts.measure(|s| matches!(s, Seeded::Entry { k, .. } if *k + 1 >= n));
            (e / m_mass, se / m_mass, c)
        })
        .collect();
    TailEstimate::build(thresholds, rows, window, counts.samples, counts.hist.get(&Seeded::Censored))
}

/// Per-stratum, per-`n` sums for the conditional return estimator.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConditionalCounts {
    pub samples: Vec<u64>,
    /// `(stratum, octave) → [count, ΣR, ΣR², D(0), D(1/2β), D(1/β), short-chain, Σn]`
    pub bins: std::collections::BTreeMap<(usize, usize), [u128; 8]>,
    pub censored: u64,
}

impl Merge for ConditionalCounts {
    fn merge(&mut self, o: &Self) {
        if self.samples.is_empty() {
            self.samples = vec![0; o.samples.len()];
        }
        for (a, b) in self.samples.iter_mut().zip(&o.samples) {
            *a += b;
        }
        for (k, v) in &o.bins {
            let e = self.bins.entry(*k).or_insert([0; 8]);
            for i in 0..8 {
                e[i] += v[i];
            }
        }
        self.censored += o.censored;
    }
}

/// Conditional statistics of the image's return time over one octave of cell indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalBin {
    pub n_lo: u64,
    pub n_hi: u64,
    /// Conditional mean of `n` over the octave.
    pub n_mean: f64,
    pub mean_return: f64,
    pub std_err: f64,
    pub count: u64,
    /// Fractions with `R(Fx) ≥ n^{1-a}` for `a = 0, 1/(2β), 1/β`.
    pub d_fractions: [f64; 3],
    /// Fraction whose next `⌈ln n⌉` induced images all have cell index `< n^{1-1/(2β)}`.
    pub short_chain_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionalReturn {
    pub bins: Vec<ConditionalBin>,
    pub fit: PowerFit,
    pub d_fits: Vec<PowerFit>,
    pub sample_count: u64,
    pub censored_count: u64,
}

/// Octave edges `n_lo·2^j` covering `[n_lo, n_hi]`.
fn octaves(n_range: (u64, u64)) -> Vec<u64> {
    let mut edges = vec![n_range.0.max(1)];
    while *edges.last().unwrap() <= n_range.1 {
        let e = edges.last().unwrap() * 2;
        edges.push(e);
    }
    edges
}

/// `E[R(Fx) | x ∈ M_n]` over octaves of `n` in `n_range`, with `R` the full-map return time.
///
/// Sampling uses [`Stratification::flat_funnel`] with one level per octave.
pub fn conditional_return(table: &Table, n_range: (u64, u64), samples: u64, seed: u64) -> Result<ConditionalReturn> {
    let edges = octaves(n_range);
    let levels: Vec<f64> = edges[..edges.len() - 1].iter().map(|&n| n as f64).collect();
    let strata = Stratification::flat_funnel(table, &levels, samples);
    let masses = strata.masses(table);
    let beta = table.beta();
    let work = strata.chunks(CHUNK / 4);
    let sizes: Vec<u64> = work.iter().map(|w| w.1).collect();
    let ns = strata.regions.len();
    let nb = edges.len() - 1;
    let acc: ConditionalCounts = run_chunks(seed, 1 << 24, &sizes, |i, size, rng| {
        let s = work[i as usize].0;
        let mut acc = ConditionalCounts { samples: vec![0; ns], ..Default::default() };
        for _ in 0..size {
            acc.samples[s] += 1;
            let x = strata.regions[s].sample(table, rng);
            let res = (|| -> Result<Option<(u64, u64, bool)>> {
                let node = Node::at(table, x)?;
                let n = node.cell();
                if n < edges[0] || n >= edges[nb] || !node.in_m(table) {
                    return Ok(None);
                }
                let first = induced_step(table, &node)?;
                let second = induced_step(table, &first.image)?;
                let cap = (n as f64).powf(1.0 - 1.0 / (2.0 * beta));
                let mut short = first.image.cell() as f64 <= cap;
                let mut cur = second.image;
                let steps = (n as f64).ln().ceil() as u64;
                for _ in 1..steps {
                    if !short {
                        break;
                    }
                    short = (cur.cell() as f64) < cap;
                    cur = induced_step(table, &cur)?.image;
                }
                Ok(Some((n, second.full_steps, short)))
            })();
            match res {
                Ok(Some((n, r, short))) => {
                    let b = edges.partition_point(|&e| e <= n) - 1;
                    let e = acc.bins.entry((s, b)).or_insert([0; 8]);
                    let r128 = r as u128;
                    e[0] += 1;
                    e[1] += r128;
                    e[2] += r128 * r128;
                    for (j, a) in [0.0, 1.0 / (2.0 * beta), 1.0 / beta].iter().enumerate() {
                        if r as f64 >= (n as f64).powf(1.0 - a) {
                            e[3 + j] += 1;
                        }
                    }
                    e[6] += short as u128;
                    e[7] += n as u128;
                }
                Ok(None) => {}
                Err(_) => acc.censored += 1,
            }
        }
        acc
    });
    let mut bins = Vec::new();
    for b in 0..nb {
        let mut num = [0.0f64; 8];
        let mut count = 0u64;
        for s in 0..ns {
            if let Some(v) = acc.bins.get(&(s, b)) {
                let w = masses[s] / acc.samples[s] as f64;
                for i in 0..8 {
                    num[i] += w * v[i] as f64;
                }
                count += v[0] as u64;
            }
        }
        if count < 2 {
            continue;
        }
        let mean = num[1] / num[0];
        // Ratio-estimator variance, summed over strata.
        let mut var_mean = 0.0;
        for s in 0..ns {
            if let Some(v) = acc.bins.get(&(s, b)) {
                let w = masses[s] / acc.samples[s] as f64;
                let c = v[0] as f64;
                let dev2 = (v[2] as f64 - 2.0 * mean * v[1] as f64 + mean * mean * c).max(0.0);
                var_mean += w * w * dev2;
            }
        }
        bins.push(ConditionalBin {
            n_lo: edges[b],
            n_hi: edges[b + 1] - 1,
            n_mean: num[7] / num[0],
            mean_return: mean,
            std_err: var_mean.sqrt() / num[0],
            count,
            d_fractions: [num[3] / num[0], num[4] / num[0], num[5] / num[0]],
            short_chain_fraction: num[6] / num[0],
        });
    }
    let window = (n_range.0 as f64, n_range.1 as f64 * 2.0);
    let pts: Vec<_> = bins
        .iter()
        .filter(|b| b.count >= MIN_BIN_COUNT)
        .map(|b| (b.n_mean, b.mean_return, b.std_err))
        .collect();
    let fit = fit_power(&pts, window)?;
    let d_fits = (0..3)
        .map(|j| {
            let pts: Vec<_> = bins
                .iter()
                .filter(|b| b.count >= MIN_BIN_COUNT && b.d_fractions[j] > 0.0)
                .map(|b| {
                    let p = b.d_fractions[j];
                    (b.n_mean, p, (p * (1.0 - p) / b.count as f64).sqrt().max(1e-12))
                })
                .collect();
            fit_power(&pts, window)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionalReturn { bins, fit, d_fits, sample_count: strata.total(), censored_count: acc.censored })
}
