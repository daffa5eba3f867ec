//! Reduced model of a trajectory trapped near a flat point in a horizontal channel.
//!
//! Successive window collisions are tracked by the offset `r_j` from the flat
//! point and the angle `v_j` between the orbit and the channel periodic orbit.

use crate::cells::{window_radius, Node};
use crate::error::{Error, Result};
use crate::geometry::Table;
use crate::map::{PhasePoint, StepDerivative, TangentData, wavefront_step};
use crate::scalar::Scalar;
use crate::stats::fit::{fit_power, linear_fit, PowerFit};
use crate::stats::runner::run_chunks;
use crate::stats::tails::{seed_label, Seeded};
use crate::stats::{Merge, Region};
use serde::{Deserialize, Serialize};

/// Channel parameters entering the recursion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel<T> {
    pub beta: T,
    /// Profile coefficient: the scatterer near the flat point is `c|r|^β` below the tangent line.
    pub c: T,
    pub m: u64,
    /// Coefficient of `tan v_j` in the offset update; `τ/cos φ = m²L²/g` by
    /// default, which is `m²` for a unit channel.
    pub coeff: T,
    /// Horizontal period of the channel.
    pub period: T,
    /// Vertical gap between the two rows of flat points.
    pub gap: T,
    /// Window constant: the entrance collision sits at `ε₀ m^{-1/(β-1)}`.
    pub epsilon0: T,
}

impl<T: Scalar> ChannelModel<T> {
    pub fn new(beta: T, c: T, m: u64, period: T, gap: T) -> Self {
        let tau = T::from_u64(m).unwrap() * period;
        Self { beta, c, m, coeff: tau * tau / gap, period, gap, epsilon0: T::lit(0.45) }
    }

    pub fn with_epsilon0(mut self, epsilon0: T) -> Self {
        self.epsilon0 = epsilon0;
        self
    }

    /// Offset of the window edge.
    pub fn window_edge(&self) -> T {
        let m = T::from_u64(self.m).unwrap();
        self.epsilon0 * m.powf(-T::one() / (self.beta - T::one()))
    }

    pub fn with_coeff(mut self, coeff: T) -> Self {
        self.coeff = coeff;
        self
    }

    pub fn with_m(self, m: u64) -> Self {
        Self::new(self.beta, self.c, m, self.period, self.gap).with_epsilon0(self.epsilon0)
    }

    /// Free path between window collisions.
    pub fn tau(&self) -> T {
        T::from_u64(self.m).unwrap() * self.period
    }

    pub fn cos_phi(&self) -> T {
        self.gap / self.tau()
    }

    /// `𝒦(r) = β(β-1)c|r|^{β-2}`.
    pub fn curvature(&self, r: T) -> T {
        self.beta * (self.beta - T::one()) * self.c * r.abs().powf(self.beta - T::lit(2.0))
    }

    fn slope(&self, r: T) -> T {
        self.beta * self.c * r.signum() * r.abs().powf(self.beta - T::one())
    }

    fn height(&self, r: T) -> T {
        self.c * r.abs().powf(self.beta)
    }

    /// `H = m²v² - 4c|r|^β`, conserved by the continuous flow.
    pub fn invariant(&self, r: T, v: T) -> T {
        self.coeff * v * v - T::lit(4.0) * self.height(r)
    }

    /// Angle at which `H = 0` for offset `r`.
    pub fn separatrix(&self, r: T) -> T {
        (T::lit(4.0) * self.height(r) / self.coeff).sqrt()
    }
}

impl ChannelModel<f64> {
    /// Model of the horizontal channel of `table` for cell index `m`.
    pub fn from_table(table: &Table, m: u64) -> Self {
        Self::new(table.beta(), table.flat_coefficient(), m, table.width(), table.height() - 2.0 * table.radius())
            .with_epsilon0(table.config().epsilon0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelState<T> {
    pub j: i64,
    pub r: T,
    pub v: T,
    pub m: u64,
}

const FIXED_POINT_ITERS: usize = 200;

/// Advance by one window collision using the exact recursion
///
/// `v_{j+1} = v_j - 2 atan(βc r_{j+1}^{β-1})`,
/// `r_{j+1} = r_j - (coeff + 2c(|r_j|^β + |r_{j+1}|^β)) tan v_j`,
///
/// solving for `r_{j+1}` by fixed-point iteration.
pub fn step<T: Scalar>(model: &ChannelModel<T>, s: &ChannelState<T>) -> Result<ChannelState<T>> {
    let tol = T::lit(1e-14).max(T::lit(4.0) * T::epsilon());
    let t = s.v.tan();
    let hj = model.height(s.r);
    let update = |x: T| s.r - (model.coeff + T::lit(2.0) * (hj + model.height(x))) * t;
    let mut x = s.r - model.coeff * t;
    let mut converged = false;
    for _ in 0..FIXED_POINT_ITERS {
        let nx = update(x);
        if !nx.is_finite() {
            break;
        }
        let done = (nx - x).abs() <= tol * nx.abs().max(s.r.abs()).max(T::min_positive_value());
        x = nx;
        if done {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::FixedPointDivergence { j: s.j, r: s.r.to_f64().unwrap(), v: s.v.to_f64().unwrap() });
    }
    let v1 = s.v - T::lit(2.0) * model.slope(x).atan();
    Ok(ChannelState { j: s.j + 1, r: x, v: v1, m: s.m })
}

/// Leading-order recursion `r_{j+1} = r_j - m²v_j`, `v_{j+1} = v_j - 2βc r_{j+1}^{β-1}`.
pub fn step_leading<T: Scalar>(model: &ChannelModel<T>, s: &ChannelState<T>) -> ChannelState<T> {
    let r1 = s.r - model.coeff * s.v;
    ChannelState { j: s.j + 1, r: r1, v: s.v - T::lit(2.0) * model.slope(r1), m: s.m }
}

/// How a launched trajectory left the neighbourhood of the flat point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Turned back and returned to the launch offset.
    Returned,
    /// Crossed over the flat point.
    PassedThrough,
    /// Still inside after the step budget.
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub states: Vec<ChannelState<T>>,
    pub outcome: Outcome,
    /// Turning index `k'`: the first `j` with `r_{j+1} ≥ r_j`.
    pub k_prime: Option<usize>,
}

impl<T: Scalar> Trajectory<T> {
    /// Number of collisions strictly inside the launch offset.
    pub fn trap_length(&self) -> usize {
        self.states.len() - 1
    }

    /// Last index before the turn whose angle still exceeds twice the angle
    /// decrement at the turn.
    pub fn k_double_prime(&self) -> Option<usize> {
        let kp = self.k_prime?;
        if kp == 0 {
            return None;
        }
        let dv = self.states[kp - 1].v - self.states[kp].v;
        (0..kp).rev().find(|&j| self.states[j].v > T::lit(2.0) * dv)
    }
}

/// Iterate from `(r0, v0)` until the offset returns to `r0`, crosses zero, or `max_steps` is reached.
pub fn trajectory<T: Scalar>(model: &ChannelModel<T>, r0: T, v0: T, max_steps: usize) -> Result<Trajectory<T>> {
    let mut s = ChannelState { j: 0, r: r0, v: v0, m: model.m };
    let mut states = vec![s];
    let mut k_prime = None;
    for _ in 0..max_steps {
        let s1 = step(model, &s)?;
        if k_prime.is_none() && s1.r >= s.r {
            k_prime = Some(states.len() - 1);
        }
        if s1.r <= T::zero() {
            return Ok(Trajectory { states, outcome: Outcome::PassedThrough, k_prime });
        }
        if s1.r >= r0 {
            return Ok(Trajectory { states, outcome: Outcome::Returned, k_prime });
        }
        states.push(s1);
        s = s1;
    }
    Ok(Trajectory { states, outcome: Outcome::Exhausted, k_prime })
}

/// Launch angle whose trajectory from `r0` stays `k` collisions inside, found by bisection.
pub fn launch_for_trap<T: Scalar>(model: &ChannelModel<T>, r0: T, k: usize) -> Result<Trajectory<T>> {
    let budget = 4 * k + 64;
    let len = |v: T| -> Result<(usize, Trajectory<T>)> {
        let tr = trajectory(model, r0, v, budget)?;
        let n = match tr.outcome {
            Outcome::Returned => tr.trap_length(),
            _ => usize::MAX,
        };
        Ok((n, tr))
    };
    let mut lo = T::zero();
    let mut hi = model.separatrix(r0);
    for _ in 0..200 {
        if len(hi)?.0 >= k {
            break;
        }
        hi = hi * T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if len(mid)?.0 >= k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (n, tr) = len(hi)?;
    if n == usize::MAX {
        return Err(Error::Convergence(format!("no returning trajectory of length {k}")));
    }
    Ok(tr)
}

/// Result of integrating the continuous limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory<T> {
    pub t: Vec<T>,
    pub r: Vec<T>,
    pub v: Vec<T>,
    /// `max |H(t) - H(0)| / |H(0)|`.
    pub h_drift: T,
}

impl<T: Scalar> OdeTrajectory<T> {
    /// Offset at time `t` by cubic Hermite interpolation between accepted steps.
    pub fn r_at(&self, model: &ChannelModel<T>, t: T) -> Option<T> {
        let i = self.t.partition_point(|&x| x <= t);
        if i == 0 || i >= self.t.len() {
            return (i > 0 && t == *self.t.last()?).then(|| *self.r.last().unwrap());
        }
        let (t0, t1) = (self.t[i - 1], self.t[i]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (r0, r1) = (self.r[i - 1], self.r[i]);
        let (d0, d1) = (-model.coeff * self.v[i - 1] * h, -model.coeff * self.v[i] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        Some(
            (two * s3 - three * s2 + T::one()) * r0
                + (s3 - two * s2 + s) * d0
                + (three * s2 - two * s3) * r1
                + (s3 - s2) * d1,
        )
    }
}

// Dormand–Prince 5(4) tableau; the last row is the fifth-order solution (first same as last).
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth- minus fourth-order weights.
const DP_E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrate `dr/dt = -m²v`, `dv/dt = -2βc r^{β-1}` from `(r0, v0)` to `t_end`
/// with an adaptive Dormand–Prince 5(4) scheme at relative tolerance `rtol`.
pub fn ode_limit<T: Scalar>(model: &ChannelModel<T>, r0: T, v0: T, t_end: T, rtol: T) -> Result<OdeTrajectory<T>> {
    integrate(model, r0, v0, t_end, rtol, false)
}

/// Integrate from `(r0, v0)` with `v0 > 0` until the first step on which `v ≤ 0`
/// (the continuous turning point), giving up at `t_max`.
pub fn ode_to_turn<T: Scalar>(model: &ChannelModel<T>, r0: T, v0: T, t_max: T, rtol: T) -> Result<OdeTrajectory<T>> {
    let o = integrate(model, r0, v0, t_max, rtol, true)?;
    if *o.v.last().unwrap() > T::zero() {
        return Err(Error::Convergence("continuous orbit did not turn".into()));
    }
    Ok(o)
}

fn integrate<T: Scalar>(model: &ChannelModel<T>, r0: T, v0: T, t_end: T, rtol: T, stop_at_turn: bool) -> Result<OdeTrajectory<T>> {
    let rhs = |y: [T; 2]| [-model.coeff * y[1], -T::lit(2.0) * model.slope(y[0])];
    let h0 = model.invariant(r0, v0);
    let h_scale = h0.abs().max(model.coeff * v0 * v0).max(T::min_positive_value());
    let mut out = OdeTrajectory { t: vec![T::zero()], r: vec![r0], v: vec![v0], h_drift: T::zero() };
    let (mut t, mut y) = (T::zero(), [r0, v0]);
    let mut h = t_end / T::lit(1000.0);
    let atol = [rtol * r0.abs().max(T::min_positive_value()), rtol * v0.abs().max(T::min_positive_value())];
    let mut k = [[T::zero(); 2]; 7];
    let mut y5 = y;
    k[0] = rhs(y);
    while t < t_end {
        if t + h > t_end {
            h = t_end - t;
        }
        if h <= T::epsilon() * t.abs().max(T::one()) {
            return Err(Error::StepUnderflow { t: t.to_f64().unwrap() });
        }
        for i in 1..7 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(i) {
                let a = T::lit(DP_A[i][j]);
                yi[0] = yi[0] + h * a * kj[0];
                yi[1] = yi[1] + h * a * kj[1];
            }
            k[i] = rhs(yi);
            if i == 6 {
                y5 = yi;
            }
        }
        let mut err = T::zero();
        for d in 0..2 {
            let e = k.iter().zip(DP_E).fold(T::zero(), |acc, (ki, w)| acc + h * T::lit(w) * ki[d]);
            let sc = atol[d] + rtol * y[d].abs().max(y5[d].abs());
            err = err.max((e / sc).abs());
        }
        if err <= T::one() {
            t = t + h;
            y = y5;
            k[0] = k[6];
            out.t.push(t);
            out.r.push(y[0]);
            out.v.push(y[1]);
            let drift = (model.invariant(y[0], y[1]) - h0).abs() / h_scale;
            out.h_drift = out.h_drift.max(drift);
            if stop_at_turn && y[1] <= T::zero() {
                break;
            }
        }
        let fac = if err > T::zero() { T::lit(0.9) * err.powf(T::lit(-0.2)) } else { T::lit(5.0) };
        h = h * fac.max(T::lit(0.2)).min(T::lit(5.0));
    }
    Ok(out)
}

/// Largest relative gap between `r_j` and the continuous solution at `t = j` over
/// `0 ≤ j ≤ k'`, with the invariant drift of the integration.
///
/// The recursion updates `r` with the angle of the preceding half step, so the flow
/// starts from `v_0 + βc r_0^{β-1}`.
pub fn discrete_vs_ode(model: &ChannelModel<f64>, tr: &Trajectory<f64>, rtol: f64) -> Result<(f64, f64)> {
    let kp = tr.k_prime.ok_or_else(|| Error::Convergence("trajectory did not turn".into()))?;
    let s0 = tr.states[0];
    let v_start = s0.v + 0.5 * 2.0 * model.slope(s0.r);
    let o = ode_limit(model, s0.r, v_start, kp as f64, rtol)?;
    let mut worst: f64 = 0.0;
    for (j, s) in tr.states.iter().enumerate().take(kp + 1) {
        let r = o.r_at(model, j as f64).ok_or_else(|| Error::Convergence("interpolation outside the run".into()))?;
        worst = worst.max((r / s.r - 1.0).abs());
    }
    Ok((worst, o.h_drift))
}

/// Expansion factors of a trapped trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionProduct {
    /// `∏_{j=1}^{k-1} (1 + τℬ_j)`, the p-metric expansion inside the window.
    pub lambda_p: f64,
    /// `Λ_p` times the entrance factor `τ𝒦/cos φ` at the window edge.
    pub lambda_euclid: f64,
    /// `Λ_p` times `τ/cos φ`, the factor for a vertical curve.
    pub lambda_vertical: f64,
    /// `Λ_p` over collisions `1..=k'` and `k'+1..k-1`.
    pub lambda_first: f64,
    pub lambda_second: f64,
    /// `τℬ_j` along the trajectory.
    pub tau_b: Vec<f64>,
}

/// Wavefront recursion `ℬ_j = 2𝒦(r_j)/cos φ + 1/(τ + 1/ℬ_{j-1})` along the offsets `rs`,
/// starting from `ℬ_0 = 2𝒦(r_0)/cos φ + 1/τ`.
pub fn expansion_product<T: Scalar>(model: &ChannelModel<T>, rs: &[T], k_prime: Option<usize>) -> ExpansionProduct {
    let f = |x: T| x.to_f64().unwrap();
    let tau = f(model.tau());
    let cos = f(model.cos_phi());
    let entrance = f(model.curvature(model.window_edge()));
    let curv: Vec<f64> = rs.iter().map(|&r| f(model.curvature(r))).collect();
    let mut b = 2.0 * curv[0] / cos + 1.0 / tau;
    let mut tau_b = vec![tau * b];
    let (mut l1, mut l2) = (0.0, 0.0);
    let kp = k_prime.unwrap_or(rs.len());
    for (j, &kj) in curv.iter().enumerate().skip(1) {
        b = 2.0 * kj / cos + 1.0 / (tau + 1.0 / b);
        tau_b.push(tau * b);
        let l = (1.0 + tau * b).ln();
        if j <= kp {
            l1 += l;
        } else {
            l2 += l;
        }
    }
    let lp = l1 + l2;
    ExpansionProduct {
        lambda_p: lp.exp(),
        lambda_euclid: (lp + (tau * entrance / cos).ln()).exp(),
        lambda_vertical: (lp + (tau / cos).ln()).exp(),
        lambda_first: l1.exp(),
        lambda_second: l2.exp(),
        tau_b,
    }
}

/// Starting offset for a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum R0Rule {
    /// `r_0 = ρ m^{-2/(β-2)}`, under which the leading-order recursion is scale invariant in `m`.
    Scaled { rho: f64 },
    /// `r_0 = ε₀ m^{-1/(β-1)}`, the window half-width.
    Window { epsilon0: f64 },
    Fixed { r0: f64 },
}

impl R0Rule {
    pub fn r0(&self, beta: f64, m: u64) -> f64 {
        let m = m as f64;
        match *self {
            Self::Scaled { rho } => rho * m.powf(-2.0 / (beta - 2.0)),
            Self::Window { epsilon0 } => epsilon0 * m.powf(-1.0 / (beta - 1.0)),
            Self::Fixed { r0 } => r0,
        }
    }
}

impl Default for R0Rule {
    fn default() -> Self {
        Self::Scaled { rho: 0.5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub m: u64,
    pub k: u64,
    pub r0: f64,
    pub v0: f64,
    pub k_prime: u64,
    pub k_double_prime: u64,
    pub r_k_prime: f64,
    pub lambda_p: f64,
    pub lambda_euclid: f64,
    pub lambda_vertical: f64,
    pub lambda_first: f64,
    pub lambda_second: f64,
}

/// One point of a sweep: the trajectory trapped for `k` collisions and its expansion.
pub fn sweep_point(model: &ChannelModel<f64>, rule: R0Rule, k: u64) -> Result<(ScalingRow, Trajectory<f64>)> {
    let r0 = rule.r0(model.beta, model.m);
    let tr = launch_for_trap(model, r0, k as usize)?;
    let kp = tr.k_prime.ok_or_else(|| Error::Convergence("trajectory did not turn".into()))?;
    let rs: Vec<f64> = tr.states.iter().map(|s| s.r).collect();
    let e = expansion_product(model, &rs, Some(kp));
    let row = ScalingRow {
        m: model.m,
        k: tr.trap_length() as u64,
        r0,
        v0: tr.states[0].v,
        k_prime: kp as u64,
        k_double_prime: tr.k_double_prime().unwrap_or(0) as u64,
        r_k_prime: tr.states[kp].r,
        lambda_p: e.lambda_p,
        lambda_euclid: e.lambda_euclid,
        lambda_vertical: e.lambda_vertical,
        lambda_first: e.lambda_first,
        lambda_second: e.lambda_second,
    };
    Ok((row, tr))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `log Z_j` against `log j` with `Z_j = r_j^{-(β-2)/2}`, on the longest trajectory.
    pub z_fit: PowerFit,
    pub r_k_prime_fit: PowerFit,
    pub lambda_p_fit: PowerFit,
    pub lambda_euclid_fit: PowerFit,
    /// `k''/k'` for each row.
    pub k_ratio: Vec<f64>,
}

fn fit_unweighted(pts: &[(f64, f64)]) -> Result<PowerFit> {
    if pts.len() < 3 {
        return Err(Error::InsufficientSamples(format!("{} points", pts.len())));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (s, i, se) = linear_fit(&xs, &ys);
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    Ok(PowerFit { exponent: s, intercept: i, ci_halfwidth: crate::stats::fit::Z95 * se, window: (lo, hi), points: pts.len() })
}

/// Sweep over trap lengths `ks` at fixed `m`, with slope fits.
pub fn scaling_report(model: &ChannelModel<f64>, rule: R0Rule, ks: &[u64]) -> Result<ScalingReport> {
    let mut rows = Vec::with_capacity(ks.len());
    let mut longest: Option<Trajectory<f64>> = None;
    for &k in ks {
        let (row, tr) = sweep_point(model, rule, k)?;
        if longest.as_ref().is_none_or(|l| l.trap_length() < tr.trap_length()) {
            longest = Some(tr);
        }
        rows.push(row);
    }
    let tr = longest.ok_or_else(|| Error::InsufficientSamples("empty sweep".into()))?;
    let kdd = tr.k_double_prime().unwrap_or(tr.k_prime.unwrap_or(1));
    let e = (model.beta - 2.0) / 2.0;
    let z: Vec<(f64, f64)> = (kdd / 8..=kdd / 2).filter(|&j| j >= 1).map(|j| (j as f64, tr.states[j].r.powf(-e))).collect();
    let z_fit = fit_unweighted(&z)?;
    let pick = |g: fn(&ScalingRow) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.k as f64, g(r))).collect() };
    Ok(ScalingReport {
        z_fit,
        r_k_prime_fit: fit_unweighted(&pick(|r| r.r_k_prime))?,
        lambda_p_fit: fit_unweighted(&pick(|r| r.lambda_p))?,
        lambda_euclid_fit: fit_unweighted(&pick(|r| r.lambda_euclid))?,
        k_ratio: rows.iter().map(|r| r.k_double_prime as f64 / r.k_prime.max(1) as f64).collect(),
        rows,
    })
}

/// Sweep over `ms` at fixed trap length `k`: slopes of the Euclidean and vertical factors in `m`.
pub fn m_sweep(base: &ChannelModel<f64>, rule: R0Rule, k: u64, ms: &[u64]) -> Result<(Vec<ScalingRow>, PowerFit, PowerFit)> {
    let rows = ms.iter().map(|&m| Ok(sweep_point(&base.with_m(m), rule, k)?.0)).collect::<Result<Vec<_>>>()?;
    let pick = |g: fn(&ScalingRow) -> f64| -> Vec<(f64, f64)> { rows.iter().map(|r| (r.m as f64, g(r))).collect() };
    let eu = fit_unweighted(&pick(|r| r.lambda_euclid))?;
    let ve = fit_unweighted(&pick(|r| r.lambda_vertical))?;
    Ok((rows, eu, ve))
}

/// A genuine trap orbit: consecutive window collisions of one cell.
#[derive(Clone, Debug)]
pub struct TrapOrbit {
    pub m: u64,
    pub nodes: Vec<Node>,
}

/// Follow the window collisions from an entry point; `m` is the cell count of the first trapped flight.
pub fn trap_orbit(table: &Table, y: PhasePoint) -> Result<TrapOrbit> {
    let mut cur = Node::at(table, y)?;
    let m = cur.cell();
    let mut nodes = Vec::new();
    while cur.in_window(table) {
        nodes.push(cur);
        cur = cur.advance(table)?;
    }
    Ok(TrapOrbit { m, nodes })
}

/// Measured and model p-metric expansion along one trap orbit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleSample {
    pub k: u64,
    pub measured: f64,
    pub oracle: f64,
}

/// Compare the model product with the derivative cocycle of the billiard map along `orbit`.
///
/// Both start from the same post-collision wavefront at the first window collision
/// and multiply the p-metric factors of the flights leaving collisions `1..k`.
pub fn cocycle_sample(table: &Table, orbit: &TrapOrbit) -> Result<CocycleSample> {
    let model = ChannelModel::from_table(table, orbit.m);
    let rs: Vec<f64> = orbit.nodes.iter().map(|n| table.flat_offset(n.state.boundary.r).abs()).collect();
    let oracle = expansion_product(&model, &rs, None).lambda_p;
    let first = &orbit.nodes[0];
    let b0 = 2.0 * first.state.curvature() / first.state.cos_phi() + 1.0 / model.tau();
    let mut v = TangentData::from_curvature(&first.state, b0);
    let mut log = 0.0;
    for (j, n) in orbit.nodes.iter().enumerate() {
        let d = StepDerivative::between(&n.state, &n.next, n.flight.tau);
        let (v1, e) = wavefront_step(&d, &v);
        if j >= 1 {
            log += e.p_metric.ln();
        }
        v = v1;
    }
    Ok(CocycleSample { k: orbit.nodes.len() as u64, measured: log.exp(), oracle })
}

#[derive(Clone, Debug, Default)]
struct Orbits(Vec<(u64, PhasePoint)>);

impl Merge for Orbits {
    fn merge(&mut self, o: &Self) {
        self.0.extend_from_slice(&o.0);
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocycleReport {
    pub m: u64,
    pub samples: Vec<CocycleSample>,
    /// Fraction of samples with `oracle/measured ∈ [1/10, 10]`.
    pub in_band: f64,
    pub measured_fit: PowerFit,
    pub oracle_fit: PowerFit,
    /// Trap lengths requested but not found.
    pub missing: Vec<u64>,
}

/// Seed entry points of traps with `k ∈ ks` window collisions, all crossing `m` cells,
/// and compare the model expansion with the measured one; `per_k` orbits are kept for each `k`.
pub fn cross_check_cocycle(table: &Table, m: u64, ks: &[u64], per_k: usize, max_seeds: u64, seed: u64) -> Result<CocycleReport> {
    let model = ChannelModel::from_table(table, m);
    let gap = model.gap;
    let cos_at = |mm: f64| gap / (mm * table.width()).hypot(gap);
    let (c_lo, c_hi) = (cos_at(m as f64 + 1.5), cos_at((m as f64 - 1.5).max(0.5)));
    let flats = table.flat_points();
    let h = window_radius(table, m);
    let region = Region {
        arcs: [flats[0], flats[2]].iter().map(|&f| (f - h, 2.0 * h)).collect(),
        sin_lo: (1.0 - c_hi * c_hi).sqrt(),
        sin_hi: (1.0 - c_lo * c_lo).sqrt(),
    };
    let (kmin, kmax) = (*ks.iter().min().unwrap_or(&1), *ks.iter().max().unwrap_or(&1));
    let mut found: Vec<Vec<PhasePoint>> = vec![Vec::new(); ks.len()];
    let mut used = 0u64;
    let mut round = 0u64;
    while used < max_seeds && found.iter().any(|f| f.len() < per_k) {
        let batch = (1u64 << 14).min(max_seeds - used);
        let sizes = crate::stats::runner::chunk_sizes(batch, 1 << 11);
        let got: Orbits = run_chunks(seed, (1 << 36) + round * 1024, &sizes, |_, size, rng| {
            let mut o = Orbits::default();
            for _ in 0..size {
                let y = region.sample(table, rng);
                if let Seeded::Entry { k, .. } = seed_label(table, y) {
                    if (kmin..=kmax).contains(&k) && trap_orbit(table, y).is_ok_and(|t| t.nodes.iter().all(|n| n.cell() == m)) {
                        o.0.push((k, y));
                    }
                }
            }
            o
        });
        for (k, y) in got.0 {
            if let Some(i) = ks.iter().position(|&kk| kk == k) {
                if found[i].len() < per_k {
                    found[i].push(y);
                }
            }
        }
        used += batch;
        round += 1;
    }
    let mut samples = Vec::new();
    let mut missing = Vec::new();
    for (i, ys) in found.iter().enumerate() {
        if ys.is_empty() {
            missing.push(ks[i]);
        }
        for &y in ys {
            samples.push(cocycle_sample(table, &trap_orbit(table, y)?)?);
        }
    }
    if samples.is_empty() {
        return Err(Error::InsufficientSamples(format!("no trap orbits of cell {m} found in {used} seeds")));
    }
    let in_band = samples.iter().filter(|s| (0.1..=10.0).contains(&(s.oracle / s.measured))).count() as f64 / samples.len() as f64;
    let fit = |g: fn(&CocycleSample) -> f64| -> Result<PowerFit> {
        let mut pts = Vec::new();
        for &k in ks {
            let logs: Vec<f64> = samples.iter().filter(|s| s.k == k).map(|s| g(s).ln()).collect();
            if logs.len() >= 2 {
                let n = logs.len() as f64;
                let mean = logs.iter().sum::<f64>() / n;
                let var = logs.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / (n - 1.0);
                // Points of a log-mean fit: weights from the spread of log Λ.
                pts.push((k as f64, mean.exp(), mean.exp() * (var / n).sqrt().max(1e-3)));
            }
        }
        fit_power(&pts, (kmin as f64, kmax as f64))
    };
    Ok(CocycleReport { m, measured_fit: fit(|s| s.measured)?, oracle_fit: fit(|s| s.oracle)?, samples, in_band, missing })
}
