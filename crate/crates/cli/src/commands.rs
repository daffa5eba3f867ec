use crate::output::{Outputs, SCHEMA_VERSION};
use clap::{Args, ValueEnum};
use flatbill::cells::{s_n_phi, s_prime_phi, window_endpoints};
use flatbill::flight::TANGENCY_TOL;
use flatbill::jacobi::{cross_check_cocycle, m_sweep, ode_to_turn, scaling_report, sweep_point, ChannelModel, R0Rule, ScalingRow, Trajectory};
use flatbill::map::{cone_check, differential, full_map, step, BaseMap};
use flatbill::stats::tails::{cell_measure_profile, return_tail, rtilde_tail_seeded, seed_traps, trap_table, ReturnKind, TailEstimate};
use flatbill::stats::{correlation, one_step_expansion, sample_mu, sample_mu_scatterer, singularity_neighborhood, stream_rng, Observable};
use flatbill::{Error, PhasePoint, State, Table, TableConfig};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    /// A check failed; the summary is still written.
    #[error("{1}")]
    Checks(Box<Summary>, String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Numerical(_) | Self::Checks(..) => 3,
            Self::Io(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Self::Usage(m),
            Error::Io(e) => Self::Io(e.to_string()),
            Error::Json(e) => Self::Io(e.to_string()),
            other => Self::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

type Outcome = Result<Summary, Failure>;

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub schema_version: u32,
    pub command: String,
    pub config: TableConfig,
    pub seed: u64,
    pub estimator: String,
    pub fit_window: Option<(f64, f64)>,
    pub exponent: Option<f64>,
    pub ci: Option<f64>,
    pub sample_count: u64,
    pub censored_count: u64,
    pub details: serde_json::Value,
}

impl Summary {
    fn fit(mut self, fit: &flatbill::stats::PowerFit) -> Self {
        self.fit_window = Some(fit.window);
        self.exponent = Some(fit.exponent);
        self.ci = Some(fit.ci_halfwidth);
        self
    }

    fn tail(mut self, t: &TailEstimate) -> Self {
        self.fit_window = Some((t.fit_window.0 as f64, t.fit_window.1 as f64));
        self.exponent = Some(t.fitted_exponent);
        self.ci = Some(t.ci_halfwidth);
        self.sample_count = t.sample_count;
        self.censored_count = t.censored_count;
        self
    }

    fn counts(mut self, samples: u64, censored: u64) -> Self {
        self.sample_count = samples;
        self.censored_count = censored;
        self
    }

    fn details(mut self, d: serde_json::Value) -> Self {
        self.details = d;
        self
    }
}

pub struct Ctx {
    pub table: Table,
    pub seed: u64,
    pub failure_budget: f64,
    pub command: &'static str,
}

impl Ctx {
    fn summary(&self, estimator: &str) -> Summary {
        Summary {
            schema_version: SCHEMA_VERSION,
            command: self.command.to_string(),
            config: self.table.config().clone(),
            seed: self.seed,
            estimator: estimator.to_string(),
            fit_window: None,
            exponent: None,
            ci: None,
            sample_count: 0,
            censored_count: 0,
            details: serde_json::Value::Null,
        }
    }

    fn progress(&self, msg: &str) {
        eprintln!("flatbill {}: {msg}", self.command);
    }

    /// Fail with exit code 3 when more than the budgeted fraction of evaluations failed.
    fn budget(&self, summary: Summary, failed: u64, total: u64) -> Outcome {
        if failed as f64 > self.failure_budget * total.max(1) as f64 {
            let msg = format!("{failed} of {total} evaluations failed (budget {})", self.failure_budget);
            return Err(Failure::Checks(Box::new(summary), msg));
        }
        Ok(summary)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Base {
    /// Every collision, walls included.
    Full,
    /// Scatterer collisions only.
    Scatterer,
}

impl From<Base> for BaseMap {
    fn from(b: Base) -> Self {
        match b {
            Base::Full => BaseMap::Full,
            Base::Scatterer => BaseMap::Scatterer,
        }
    }
}

fn wrap(dr: f64, len: f64) -> f64 {
    (dr + 0.5 * len).rem_euclid(len) - 0.5 * len
}

#[derive(Args, Debug)]
pub struct TableInfoArgs {
    /// Largest cell index in the window table.
    #[arg(long, default_value_t = 64)]
    pub m_max: u64,
}

pub fn table_info(ctx: &Ctx, a: &TableInfoArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let rows = (1..=a.m_max)
        .map(|m| {
            let (q1, q2, k) = window_endpoints(t, 0, m)?;
            Ok(format!("{m},{q1},{q2},{k}"))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    out.csv("windows.csv", "m,q1,q2,curvature_at_endpoint", rows)?;
    Ok(ctx.summary("table_info").details(json!({
        "beta": t.beta(),
        "scatterer_radius": t.radius(),
        "width": t.width(),
        "height": t.height(),
        "flat_coefficient": t.flat_coefficient(),
        "tau_min": t.tau_min(),
        "perimeter": t.perimeter(),
        "flat_points": t.flat_points(),
    })))
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[arg(long, default_value_t = 10_000)]
    pub steps: u64,
    #[arg(long, value_enum, default_value_t = Base::Full)]
    pub base: Base,
}

fn random_state(t: &Table, base: BaseMap, rng: &mut ChaCha8Rng) -> State {
    loop {
        let x = match base {
            BaseMap::Full => sample_mu(t, rng),
            BaseMap::Scatterer => sample_mu_scatterer(t, rng),
        };
        if let Ok(s) = State::new(t, x) {
            return s;
        }
    }
}

pub fn orbit(ctx: &Ctx, a: &OrbitArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let base = BaseMap::from(a.base);
    let mut rng = stream_rng(ctx.seed, 0);
    let mut s = random_state(t, base, &mut rng);
    let mut rows = Vec::with_capacity(a.steps as usize);
    let (mut restarts, mut tangential) = (0u64, 0u64);
    for i in 0..a.steps {
        match step(t, base, &s) {
            Ok((s1, ev)) => {
                let x = s1.phase();
                tangential += ev.tangential as u64;
                rows.push(format!("{i},{},{},{},{},{},{}", x.component.name(), x.r, x.phi, ev.tau, ev.cells_crossed, ev.tangential));
                s = s1;
            }
            Err(_) => {
                restarts += 1;
                s = random_state(t, base, &mut rng);
            }
        }
    }
    out.csv("orbit.csv", "step,component,r,phi,tau,cells_crossed,tangential", rows)?;
    let summary = ctx.summary("orbit").counts(a.steps, restarts).details(json!({ "restarts": restarts, "tangential": tangential }));
    ctx.budget(summary, restarts, a.steps)
}

#[derive(Args, Debug)]
pub struct MapCheckArgs {
    #[arg(long, default_value_t = 2000)]
    pub points: u64,
}

#[derive(Default, Serialize)]
struct MapCheck {
    points: u64,
    skipped: u64,
    tangential: u64,
    det_max_rel_err: f64,
    reversal_max_err: f64,
    cone_tested: u64,
    cone_violations: u64,
}

pub fn map_check(ctx: &Ctx, a: &MapCheckArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let mut rng = stream_rng(ctx.seed, 0);
    let mut r = MapCheck::default();
    let tmin = t.tau_min();
    for _ in 0..a.points {
        let x = sample_mu(t, &mut rng);
        r.points += 1;
        let checked = (|| -> flatbill::Result<()> {
            let d = differential(t, BaseMap::Full, x)?;
            if d.cos_phi < TANGENCY_TOL || d.cos_phi1 < TANGENCY_TOL {
                r.tangential += 1;
                return Ok(());
            }
            let want = d.cos_phi / d.cos_phi1;
            r.det_max_rel_err = r.det_max_rel_err.max((d.det() - want).abs() / want);
            let (x1, _) = full_map(t, x)?;
            let (back, _) = full_map(t, x1.reversed())?;
            let y: PhasePoint = back.reversed();
            let err = if y.component == x.component {
                wrap(y.r - x.r, t.component_length(x.component)).hypot(y.phi - x.phi)
            } else {
                f64::INFINITY
            };
            r.reversal_max_err = r.reversal_max_err.max(err);
            let k = State::new(t, x)?.curvature();
            let c = cone_check(t, BaseMap::Full, x, &[k, k + 0.5 / tmin, k + 1.0 / tmin])?;
            r.cone_tested += c.tested;
            r.cone_violations += c.violations;
            Ok(())
        })();
        if checked.is_err() {
            r.skipped += 1;
        }
    }
    let pass = r.det_max_rel_err < 1e-8 && r.reversal_max_err < 1e-9 && r.cone_violations == 0;
    ctx.progress(&format!(
        "det {:.2e}, reversal {:.2e}, cone violations {}/{}",
        r.det_max_rel_err, r.reversal_max_err, r.cone_violations, r.cone_tested
    ));
    out.json("map_check.json", &r)?;
    let summary = ctx.summary("map_check").counts(r.points, r.skipped).details(json!({ "pass": pass, "checks": r }));
    if !pass {
        return Err(Failure::Checks(Box::new(summary), "map identities violated".into()));
    }
    ctx.budget(summary, r.skipped, r.points)
}

#[derive(Args, Debug)]
pub struct CellsArgs {
    #[arg(long, default_value_t = 2_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 8)]
    pub n_lo: u64,
    #[arg(long, default_value_t = 256)]
    pub n_max: u64,
    /// Cell indices whose boundary curves are traced.
    #[arg(long, value_delimiter = ',', default_value = "20,40,80")]
    pub trace_n: Vec<u64>,
    /// Points per traced curve.
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
    /// Offset range from the flat point covered by the traces.
    #[arg(long, default_value_t = 0.01)]
    pub r_lo: f64,
    #[arg(long, default_value_t = 0.25)]
    pub r_hi: f64,
}

pub fn cells(ctx: &Ctx, a: &CellsArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    if a.grid < 2 || !(a.r_lo > 0.0 && a.r_lo < a.r_hi) {
        return Err(Failure::Usage("need grid >= 2 and 0 < r_lo < r_hi".into()));
    }
    ctx.progress(&format!("cell measures from {} samples", a.samples));
    let p = cell_measure_profile(t, a.n_lo, a.n_max, a.samples, ctx.seed)?;
    out.csv(
        "cells.csv",
        "n,measure,std_err,lo,hi,count",
        p.bins.iter().map(|b| format!("{},{},{},{},{},{}", b.n, b.estimate, b.std_err, b.lo, b.hi, b.count)),
    )?;
    ctx.progress("tracing singularity curves");
    let us: Vec<f64> = (0..a.grid).map(|i| a.r_lo * (a.r_hi / a.r_lo).powf(i as f64 / (a.grid - 1) as f64)).collect();
    let curves: Vec<Option<u64>> = std::iter::once(None).chain(a.trace_n.iter().map(|&n| Some(n))).collect();
    let traced: Vec<(usize, Option<u64>, f64, Option<f64>)> = curves
        .iter()
        .enumerate()
        .flat_map(|(id, &n)| us.iter().map(move |&u| (id, n, u)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(id, n, u)| {
            let phi = match n {
                None => s_prime_phi(t, u),
                Some(n) => s_n_phi(t, n, u),
            };
            (id, n, u, phi.ok())
        })
        .collect();
    // Offsets beyond the reach of cell n have no s_n point; they are left out, not counted as failures.
    let missing = traced.iter().filter(|p| p.3.is_none()).count() as u64;
    out.csv(
        "polylines.csv",
        "curve_id,n,r,phi",
        traced.iter().filter_map(|&(id, n, u, phi)| phi.map(|phi| format!("{id},{},{u},{phi}", n.unwrap_or(0)))),
    )?;
    Ok(ctx.summary("cell_measure").fit(&p.fit).counts(p.sample_count, p.censored_count).details(json!({
        "effective_samples": p.effective_samples,
        "survival_exponent": p.survival.fitted_exponent,
        "survival_ci": p.survival.ci_halfwidth,
        "polyline_points": traced.len() as u64 - missing,
        "polyline_gaps": missing,
    })))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Which {
    /// Full-map return time.
    R,
    /// Scatterer-map return time.
    Rtilde,
}

fn pair(flag: &str, v: &[u64]) -> Result<(u64, u64), Failure> {
    match v {
        &[lo, hi] => Ok((lo, hi)),
        _ => Err(Failure::Usage(format!("{flag} takes two values LO,HI"))),
    }
}

#[derive(Args, Debug)]
pub struct TailsArgs {
    #[arg(long, value_enum, default_value_t = Which::R)]
    pub which: Which,
    #[arg(long, default_value_t = 2_000_000)]
    pub samples: u64,
    /// Fit window `LO,HI`.
    #[arg(long, value_delimiter = ',', default_values_t = [8u64, 128])]
    pub window: Vec<u64>,
    /// Estimate the R̃ tail from seeds in the flat-point arcs.
    #[arg(long)]
    pub seeded: bool,
}

pub fn tails(ctx: &Ctx, a: &TailsArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let window = pair("--window", &a.window)?;
    if window.0 < 1 || window.0 >= window.1 {
        return Err(Failure::Usage(format!("bad fit window {window:?}")));
    }
    ctx.progress(&format!("{} samples", a.samples));
    let (est, name) = match (a.which, a.seeded) {
        (Which::Rtilde, true) => (rtilde_tail_seeded(&seed_traps(t, a.samples, ctx.seed), window)?, "rtilde_seeded"),
        (Which::Rtilde, false) => (return_tail(t, ReturnKind::Rtilde, a.samples, window, ctx.seed)?, "rtilde"),
        (Which::R, false) => (return_tail(t, ReturnKind::R, a.samples, window, ctx.seed)?, "r"),
        (Which::R, true) => return Err(Failure::Usage("--seeded applies to --which rtilde only".into())),
    };
    out.csv(
        "tails.csv",
        "n,survival,std_err,count",
        est.thresholds.iter().enumerate().map(|(i, n)| format!("{n},{},{},{}", est.survival[i], est.std_err[i], est.counts[i])),
    )?;
    let summary = ctx.summary(&format!("tail_{name}")).tail(&est);
    ctx.budget(summary, est.censored_count, est.sample_count)
}

#[derive(Args, Debug)]
pub struct TrapsArgs {
    #[arg(long, default_value_t = 2_000_000)]
    pub samples: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [4u64, 16])]
    pub m_range: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_values_t = [4u64, 64])]
    pub k_range: Vec<u64>,
    /// Trap length at which the fit in `m` is taken.
    #[arg(long, default_value_t = 1)]
    pub k_fixed: u64,
    /// Cell index at which the fit in `k` is taken.
    #[arg(long, default_value_t = 2)]
    pub m_fixed: u64,
}

pub fn traps(ctx: &Ctx, a: &TrapsArgs, out: &mut Outputs) -> Outcome {
    ctx.progress(&format!("seeding {} points in the flat-point arcs", a.samples));
    let counts = seed_traps(&ctx.table, a.samples, ctx.seed);
    let tt = trap_table(&counts, pair("--m-range", &a.m_range)?, pair("--k-range", &a.k_range)?, a.k_fixed, a.m_fixed)?;
    out.csv("traps.csv", "m,k,measure,std_err,count", tt.cells.iter().map(|(m, k, e, se, c)| format!("{m},{k},{e},{se},{c}")))?;
    let summary = ctx.summary("trap_measure").fit(&tt.k_fit).counts(tt.sample_count, tt.censored_count).details(json!({
        "k_fit": tt.k_fit, "m_fixed": tt.m_fixed,
        "m_fit": tt.m_fit, "k_fixed": tt.k_fixed,
        "sum_fit": tt.sum_fit,
    }));
    ctx.budget(summary, tt.censored_count, tt.sample_count)
}

#[derive(Args, Debug)]
pub struct CorrArgs {
    /// Observable: const, sin_r, phi or bump.
    #[arg(long, default_value = "sin_r")]
    pub f: String,
    #[arg(long, default_value = "sin_r")]
    pub g: String,
    #[arg(long, default_value_t = 100)]
    pub n_max: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub orbit_len: u64,
    #[arg(long, default_value_t = 32)]
    pub batches: u64,
    #[arg(long, value_enum, default_value_t = Base::Full)]
    pub base: Base,
}

pub fn corr(ctx: &Ctx, a: &CorrArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let (f, g) = (Observable::parse(&a.f, t)?, Observable::parse(&a.g, t)?);
    ctx.progress(&format!("orbit of {} steps", a.orbit_len));
    let s = correlation(t, a.base.into(), f, g, a.n_max, a.orbit_len, a.batches, &mut stream_rng(ctx.seed, 0))?;
    out.csv("corr.csv", "lag,c_n,stderr", s.lags.iter().enumerate().map(|(i, n)| format!("{n},{},{}", s.c_n[i], s.stderr[i])))?;
    let summary = ctx.summary("correlation").counts(s.orbit_len, s.restarts).details(json!({
        "observables": s.observables, "mean_f": s.mean_f, "mean_g": s.mean_g, "batches": s.batches,
    }));
    ctx.budget(summary, s.restarts, s.orbit_len)
}

#[derive(Args, Debug)]
pub struct OnestepArgs {
    /// Curve lengths, each at most 1e-3.
    #[arg(long, value_delimiter = ',', default_value = "1e-4,1e-5")]
    pub lengths: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Sample points per curve.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

pub fn onestep(ctx: &Ctx, a: &OnestepArgs, out: &mut Outputs) -> Outcome {
    ctx.progress(&format!("{} curves at {} lengths", a.trials, a.lengths.len()));
    let rep = one_step_expansion(&ctx.table, &a.lengths, a.trials, a.samples, ctx.seed)?;
    let mut rows = Vec::new();
    let mut truncated = 0;
    for (i, trial) in rep.trials.iter().enumerate() {
        for x in trial {
            truncated += x.truncated as u64;
            rows.push(format!("{i},{},{},{},{},{}", x.length, x.pieces, x.sum, x.dropped, x.truncated));
        }
    }
    out.csv("onestep.csv", "trial,length,pieces,sum,dropped,truncated", rows)?;
    let total = (rep.trials.len() * rep.lengths.len()) as u64;
    Ok(ctx.summary("one_step_expansion").counts(total, truncated).details(json!({
        "lengths": rep.lengths, "max_sum": rep.max_sum, "mean_sum": rep.mean_sum,
    })))
}

#[derive(Args, Debug)]
pub struct JacobiArgs {
    /// Cell index of the trap-length sweep.
    #[arg(long, default_value_t = 10)]
    pub m: u64,
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256,512,1024,2048")]
    pub ks: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40,80")]
    pub ms: Vec<u64>,
    /// Trap length of the cell-index sweep.
    #[arg(long, default_value_t = 200)]
    pub k_fixed: u64,
    /// Launch offset `ρ m^{-2/(β-2)}`.
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// Use a channel of unit period and gap instead of the table's.
    #[arg(long)]
    pub unit: bool,
    /// Also compare with the derivative cocycle along real trap orbits.
    #[arg(long)]
    pub cocycle: bool,
    #[arg(long, default_value_t = 10)]
    pub cocycle_m: u64,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,8,10,12")]
    pub cocycle_ks: Vec<u64>,
    #[arg(long, default_value_t = 10)]
    pub per_k: usize,
    #[arg(long, default_value_t = 20_000_000)]
    pub max_seeds: u64,
}

/// Invariant drift of the continuous flow integrated from the launch point of `tr` to its turn.
fn invariant_drift(model: &ChannelModel<f64>, tr: &Trajectory<f64>) -> flatbill::Result<f64> {
    let s0 = tr.states[0];
    let t_max = 100.0 * tr.states.len() as f64;
    Ok(ode_to_turn(model, s0.r, s0.v, t_max, 1e-10)?.h_drift)
}

fn jacobi_rows(model: &ChannelModel<f64>, rule: R0Rule, points: &[(u64, u64)]) -> Result<Vec<String>, Failure> {
    points
        .iter()
        .map(|&(m, k)| {
            let mm = model.with_m(m);
            let (row, tr): (ScalingRow, _) = sweep_point(&mm, rule, k)?;
            let drift = invariant_drift(&mm, &tr)?;
            Ok(format!("{},{},{},{},{},{}", row.m, row.k, row.lambda_p, row.k_prime, row.k_double_prime, drift))
        })
        .collect()
}

pub fn jacobi(ctx: &Ctx, a: &JacobiArgs, out: &mut Outputs) -> Outcome {
    let t = &ctx.table;
    let model = if a.unit {
        ChannelModel::new(t.beta(), t.flat_coefficient(), a.m, 1.0, 1.0).with_epsilon0(t.config().epsilon0)
    } else {
        ChannelModel::from_table(t, a.m)
    };
    let rule = R0Rule::Scaled { rho: a.rho };
    const HEADER: &str = "m,k,Lambda,k_prime,k_doubleprime,H_drift";
    ctx.progress("trap-length sweep");
    let rep = scaling_report(&model, rule, &a.ks)?;
    let rows = jacobi_rows(&model, rule, &a.ks.iter().map(|&k| (a.m, k)).collect::<Vec<_>>())?;
    out.csv("jacobi_k.csv", HEADER, rows)?;
    ctx.progress("cell-index sweep");
    let (_, euclid, vertical) = m_sweep(&model, rule, a.k_fixed, &a.ms)?;
    let rows = jacobi_rows(&model, rule, &a.ms.iter().map(|&m| (m, a.k_fixed)).collect::<Vec<_>>())?;
    out.csv("jacobi_m.csv", HEADER, rows)?;
    let mut details = json!({
        "z_fit": rep.z_fit,
        "r_k_prime_fit": rep.r_k_prime_fit,
        "lambda_p_fit": rep.lambda_p_fit,
        "lambda_euclid_fit": rep.lambda_euclid_fit,
        "k_ratio": rep.k_ratio,
        "m_sweep_euclid_fit": euclid,
        "m_sweep_vertical_fit": vertical,
    });
    let mut samples = (a.ks.len() + a.ms.len()) as u64;
    if a.cocycle {
        ctx.progress(&format!("cocycle cross-check at m = {}", a.cocycle_m));
        let c = cross_check_cocycle(t, a.cocycle_m, &a.cocycle_ks, a.per_k, a.max_seeds, ctx.seed)?;
        out.csv("cocycle.csv", "m,k,measured,oracle", c.samples.iter().map(|s| format!("{},{},{},{}", c.m, s.k, s.measured, s.oracle)))?;
        samples += c.samples.len() as u64;
        details["cocycle"] = json!({
            "in_band": c.in_band, "measured_fit": c.measured_fit, "oracle_fit": c.oracle_fit, "missing": c.missing,
        });
    }
    Ok(ctx.summary("channel_recursion").fit(&rep.lambda_p_fit).counts(samples, 0).details(details))
}

#[derive(Args, Debug)]
pub struct NeighborhoodArgs {
    #[arg(long, value_delimiter = ',', default_value = "1e-2,3e-3,1e-3,3e-4,1e-4,3e-5,1e-5")]
    pub deltas: Vec<f64>,
    #[arg(long, default_value_t = 200_000)]
    pub samples: u64,
}

pub fn neighborhood(ctx: &Ctx, a: &NeighborhoodArgs, out: &mut Outputs) -> Outcome {
    ctx.progress(&format!("{} samples at {} radii", a.samples, a.deltas.len()));
    let e = singularity_neighborhood(&ctx.table, &a.deltas, a.samples, ctx.seed)?;
    out.csv(
        "neighborhood.csv",
        "delta,measure,wilson_lo,wilson_hi,count",
        e.deltas.iter().enumerate().map(|(i, d)| format!("{d},{},{},{},{}", e.measure[i], e.wilson_lo[i], e.wilson_hi[i], e.counts[i])),
    )?;
    Ok(ctx.summary("singularity_neighborhood").fit(&e.fit).counts(e.sample_count, 0))
}
