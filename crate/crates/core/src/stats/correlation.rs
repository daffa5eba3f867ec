//! Lag correlations along a single long orbit.

use super::sampling::sample_mu;
use crate::cells::Node;
use crate::error::{Error, Result};
use crate::geometry::{Component, Table};
use crate::map::{step, BaseMap, PhasePoint, State};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Built-in test observables on the collision space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observable {
    Constant,
    /// `sin(2πr/|∂B|)` on the scatterer, zero on the walls.
    SinR,
    /// The collision angle `φ`.
    Phi,
    /// Smooth bump `exp(1 - 1/(1-u))`, `u = (Δr/ρ_r)² + (Δφ/ρ_φ)²`, on the scatterer.
    Bump { r: f64, phi: f64, radius_r: f64, radius_phi: f64 },
}

impl Observable {
    pub const IDS: [&'static str; 4] = ["const", "sin_r", "phi", "bump"];

    pub fn parse(id: &str, table: &Table) -> Result<Self> {
        match id {
            "const" => Ok(Self::Constant),
            "sin_r" => Ok(Self::SinR),
            "phi" => Ok(Self::Phi),
            "bump" => Ok(Self::default_bump(table)),
            _ => Err(Error::Config(format!("unknown observable `{id}` (expected one of {:?})", Self::IDS))),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Constant => "const",
            Self::SinR => "sin_r",
            Self::Phi => "phi",
            Self::Bump { .. } => "bump",
        }
    }

    /// Bump around normal incidence at the middle of the first octant, well inside
    /// one cell and away from the windows.
    pub fn default_bump(table: &Table) -> Self {
        Self::Bump { r: table.octant_length(), phi: 0.0, radius_r: 0.1, radius_phi: 0.1 }
    }

    pub fn eval(&self, table: &Table, x: &PhasePoint) -> f64 {
        match *self {
            Self::Constant => 1.0,
            Self::Phi => x.phi,
            Self::SinR => match x.component {
                Component::Scatterer => (2.0 * PI * x.r / table.perimeter()).sin(),
                _ => 0.0,
            },
            Self::Bump { r, phi, radius_r, radius_phi } => {
                if x.component != Component::Scatterer {
                    return 0.0;
                }
                let p = table.perimeter();
                let dr = (x.r - r + 0.5 * p).rem_euclid(p) - 0.5 * p;
                let u = (dr / radius_r).powi(2) + ((x.phi - phi) / radius_phi).powi(2);
                if u < 1.0 {
                    (1.0 - 1.0 / (1.0 - u)).exp()
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether the support lies in a single cell `C_m` (probed on a grid).
    pub fn support_cell(&self, table: &Table, grid: usize) -> Result<Option<u64>> {
        let Self::Bump { r, phi, radius_r, radius_phi } = *self else {
            return Ok(None);
        };
        let mut cell = None;
        for i in 0..=grid {
            for j in 0..=grid {
                let a = -1.0 + 2.0 * i as f64 / grid as f64;
                let b = -1.0 + 2.0 * j as f64 / grid as f64;
                if a * a + b * b > 1.0 {
                    continue;
                }
                let x = PhasePoint::scatterer((r + a * radius_r).rem_euclid(table.perimeter()), phi + b * radius_phi);
                let node = Node::at(table, x)?;
                if !node.in_m(table) {
                    return Ok(None);
                }
                match cell {
                    None => cell = Some(node.cell()),
                    Some(c) if c != node.cell() => return Ok(None),
                    _ => {}
                }
            }
        }
        Ok(cell)
    }
}

/// Lag correlations `ĉ_n = avg(f∘Fⁿ · g) - avg f · avg g` with batch-means errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub lags: Vec<u64>,
    pub c_n: Vec<f64>,
    pub stderr: Vec<f64>,
    pub observables: (String, String),
    pub mean_f: f64,
    pub mean_g: f64,
    pub orbit_len: u64,
    pub batches: u64,
    /// Orbit restarts after a numerical failure.
    pub restarts: u64,
}

#[derive(Clone)]
struct Batch {
    len: u64,
    sum_f: f64,
    sum_g: f64,
    lagged: Vec<f64>,
    pairs: Vec<u64>,
}

impl Batch {
    fn new(n_max: usize) -> Self {
        Self { len: 0, sum_f: 0.0, sum_g: 0.0, lagged: vec![0.0; n_max + 1], pairs: vec![0; n_max + 1] }
    }

    fn c(&self, n: usize) -> f64 {
        let l = self.len as f64;
        self.lagged[n] / self.pairs[n] as f64 - (self.sum_f / l) * (self.sum_g / l)
    }
}

pub const DEFAULT_BATCHES: u64 = 32;

/// Correlations along one orbit of `orbit_len` steps of `base`, started at a μ-random point.
///
/// The orbit is split into `batches` contiguous blocks; the reported standard
/// error is the spread of the per-block estimates.
pub fn correlation(
    table: &Table,
    base: BaseMap,
    f: Observable,
    g: Observable,
    n_max: u64,
    orbit_len: u64,
    batches: u64,
    rng: &mut ChaCha8Rng,
) -> Result<CorrelationSeries> {
    if orbit_len < 10 * n_max.max(1) * batches.max(2) {
        return Err(Error::InsufficientSamples(format!("orbit_len {orbit_len} too short for n_max {n_max}")));
    }
    let n_max = n_max as usize;
    let start = |rng: &mut ChaCha8Rng| -> Result<State> {
        let x = match base {
            BaseMap::Full => sample_mu(table, rng),
            BaseMap::Scatterer => super::sampling::sample_mu_scatterer(table, rng),
        };
        State::new(table, x)
    };
    let mut state = start(rng)?;
    let mut history: VecDeque<f64> = VecDeque::with_capacity(n_max + 1);
    let mut restarts = 0;
    let block = orbit_len / batches;
    let mut blocks = Vec::with_capacity(batches as usize);
    for _ in 0..batches {
        let mut b = Batch::new(n_max);
        for _ in 0..block {
            let x = state.phase();
            let (fx, gx) = (f.eval(table, &x), g.eval(table, &x));
            history.push_front(gx);
            if history.len() > n_max + 1 {
                history.pop_back();
            }
            for (n, gh) in history.iter().enumerate() {
                b.lagged[n] += fx * gh;
                b.pairs[n] += 1;
            }
            b.len += 1;
            b.sum_f += fx;
            b.sum_g += gx;
            state = match step(table, base, &state) {
                Ok((s, _)) => s,
                Err(_) => {
                    restarts += 1;
                    history.clear();
                    start(rng)?
                }
            };
        }
        blocks.push(b);
    }
    let total: f64 = blocks.iter().map(|b| b.len as f64).sum();
    let mean_f = blocks.iter().map(|b| b.sum_f).sum::<f64>() / total;
    let mean_g = blocks.iter().map(|b| b.sum_g).sum::<f64>() / total;
    let mut c_n = Vec::with_capacity(n_max + 1);
    let mut stderr = Vec::with_capacity(n_max + 1);
    let nb = blocks.len() as f64;
    for n in 0..=n_max {
        let lagged: f64 = blocks.iter().map(|b| b.lagged[n]).sum();
        let pairs: u64 = blocks.iter().map(|b| b.pairs[n]).sum();
        c_n.push(lagged / pairs as f64 - mean_f * mean_g);
        let per: Vec<f64> = blocks.iter().map(|b| b.c(n)).collect();
        let m = per.iter().sum::<f64>() / nb;
        let var = per.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (nb - 1.0);
        stderr.push((var / nb).sqrt());
    }
    Ok(CorrelationSeries {
        lags: (0..=n_max as u64).collect(),
        c_n,
        stderr,
        observables: (f.id().to_string(), g.id().to_string()),
        mean_f,
        mean_g,
        orbit_len: total as u64,
        batches,
        restarts,
    })
}
