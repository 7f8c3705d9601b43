//! Closed-form stability conditions for the scalar example family
//! `x' = b x(t - r) + k x(t_i)`, `x+ = (1 + beta) x-`, with `V(x) = x^2`,
//! and the procedure that selects dwell, jump factor and Razumikhin
//! constant from them.
//!
//! All boolean verdicts use strict inequalities with no tolerance; the
//! margins are reported alongside so tight passes are visible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Initial upper end of the `q` search window; doubled while needed.
const Q_WINDOW: f64 = 1e6;
/// Hard ceiling on the window after doubling.
const Q_CEILING: f64 = 1e300;
const GRID_POINTS: usize = 400;

/// `k + sqrt(q)|b| + sqrt(sigma0)|k|`; negative when the event-triggered
/// loop is certified.
pub fn feedback_margin(k: f64, b: f64, q: f64, sigma0: f64) -> f64 {
    k + q.sqrt() * b.abs() + sigma0.sqrt() * k.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CbarMode {
    /// Feedback active between impulses: `2 sqrt(q) (|b| + |k|)`.
    #[default]
    Full,
    /// No feedback: `2 sqrt(q) |b|`.
    ImpulsiveOnly,
}

/// Growth rate bounding `D+V <= cbar V` on dwell intervals.
pub fn cbar(q: f64, abs_b: f64, abs_k: f64, mode: CbarMode) -> f64 {
    match mode {
        CbarMode::Full => 2.0 * q.sqrt() * (abs_b + abs_k),
        CbarMode::ImpulsiveOnly => 2.0 * q.sqrt() * abs_b,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionIii {
    pub q: f64,
    pub inv_rho: f64,
    /// `exp(cbar * h)`.
    pub growth: f64,
    /// `q - 1/rho`.
    pub upper_gap: f64,
    /// `1/rho - exp(cbar * h)`.
    pub lower_gap: f64,
    pub passes: bool,
}

/// `q > 1/rho > exp(cbar * h)`.
pub fn condition_iii_check(q: f64, rho: f64, cbar_value: f64, h: f64) -> ConditionIii {
    let inv_rho = 1.0 / rho;
    let growth = (cbar_value * h).exp();
    ConditionIii {
        q,
        inv_rho,
        growth,
        upper_gap: q - inv_rho,
        lower_gap: inv_rho - growth,
        passes: q > inv_rho && inv_rho > growth,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DwellSearch {
    /// Sampled objective was unimodal; golden-section refinement.
    GoldenSection,
    /// Several local maxima were sampled; the best one was refined.
    GridFallback,
    /// Objective still increasing at the search ceiling.
    Divergent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwellBound {
    pub q_star: f64,
    pub h_max: f64,
    pub search: DwellSearch,
}

impl DwellBound {
    pub fn is_bounded(&self) -> bool {
        self.search != DwellSearch::Divergent
    }
}

/// Maximizes `G(q) = ln(q) / cbar(q)` over `q > 1`.
///
/// The search runs in `u = ln q`, which preserves unimodality and keeps the
/// sampling uniform over many decades.
pub fn dwell_bound<F>(cbar_of_q: F) -> Result<DwellBound>
where
    F: Fn(f64) -> f64,
{
    let objective = |u: f64| -> Result<f64> {
        let c = cbar_of_q(u.exp());
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::Precondition(format!(
                "cbar({}) = {c} is not positive",
                u.exp()
            )));
        }
        Ok(u / c)
    };

    let mut u_hi = Q_WINDOW.ln();
    loop {
        let grid: Vec<f64> = (1..=GRID_POINTS)
            .map(|i| u_hi * i as f64 / GRID_POINTS as f64)
            .collect();
        let values = grid.iter().map(|&u| objective(u)).collect::<Result<Vec<_>>>()?;
        let best = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .expect("grid is non-empty");

        if best == GRID_POINTS - 1 {
            if u_hi >= Q_CEILING.ln() {
                return Ok(DwellBound {
                    q_star: u_hi.exp(),
                    h_max: values[best],
                    search: DwellSearch::Divergent,
                });
            }
            u_hi += std::f64::consts::LN_2;
            continue;
        }

        let local_maxima = (0..GRID_POINTS)
            .filter(|&i| {
                let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
                let right = if i + 1 == GRID_POINTS { f64::NEG_INFINITY } else { values[i + 1] };
                values[i] > left && values[i] >= right
            })
            .count();
        let search = if local_maxima == 1 {
            DwellSearch::GoldenSection
        } else {
            DwellSearch::GridFallback
        };

        let lo = if best == 0 { 0.0 } else { grid[best - 1] };
        let hi = grid[best + 1];
        let u_star = golden_section_max(&objective, lo, hi, 1e-12)?;
        let h_star = objective(u_star)?;
        // The refined point can only improve on the sampled best.
        let (u_star, h_star) = if h_star >= values[best] {
            (u_star, h_star)
        } else {
            (grid[best], values[best])
        };
        return Ok(DwellBound {
            q_star: u_star.exp(),
            h_max: h_star,
            search,
        });
    }
}

fn golden_section_max<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    // Keep probes strictly inside (lo, hi): lo may be u = 0, i.e. q = 1.
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    while hi - lo > tol {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = f(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = f(a)?;
        }
        if !(a > lo && b < hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `H(q) = q - exp(cbar(q) h)`.
pub fn fixed_point_residual<F: Fn(f64) -> f64>(q: f64, h: f64, cbar_of_q: &F) -> f64 {
    q - (cbar_of_q(q) * h).exp()
}

/// Roots `q1 < q* < q2` of `H(q) = q - exp(cbar(q) h)`.
///
/// `H` is positive strictly between them, so `exp(cbar(q) h) < q` holds
/// exactly on `(q1, q2)`.
pub fn fixed_point_roots<F>(h: f64, cbar_of_q: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("dwell {h} must be positive")));
    }
    let bound = dwell_bound(&cbar_of_q)?;
    if bound.is_bounded() && h >= bound.h_max {
        return Err(Error::NoRoot(format!(
            "dwell {h} is not below the largest admissible dwell {}",
            bound.h_max
        )));
    }
    let residual = |q: f64| fixed_point_residual(q, h, &cbar_of_q);
    let q_star = bound.q_star;
    if residual(q_star) <= 0.0 {
        return Err(Error::NoRoot(format!("H(q*) = {} is not positive", residual(q_star))));
    }
    let q1 = if residual(1.0) >= 0.0 {
        1.0
    } else {
        bisect_root(&residual, 1.0, q_star)
    };
    let mut q_hi = Q_WINDOW.max(2.0 * q_star);
    while residual(q_hi) >= 0.0 {
        q_hi *= 2.0;
        if q_hi > Q_CEILING {
            return Err(Error::NoRoot(format!(
                "H stays positive up to the search ceiling {Q_CEILING:e}"
            )));
        }
    }
    let q2 = bisect_root(&residual, q_star, q_hi);
    Ok((q1, q2))
}

/// Root of `f` on `[a, b]` where `f(a)` and `f(b)` differ in sign, to
/// `1e-10` relative to `max(1, |q|)`.
fn bisect_root<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (a, b);
    let f_lo_positive = f(lo) > 0.0;
    while hi - lo > 1e-10 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == f_lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Admissible jump factors `(1/q2, 1/q1)`.
pub fn rho_interval(q1: f64, q2: f64) -> Result<(f64, f64)> {
    if !(q1 >= 1.0) {
        return Err(Error::Precondition(format!("q1 = {q1} must exceed 1")));
    }
    if !(q1 < q2) {
        return Err(Error::EmptyInterval { lo: 1.0 / q2, hi: 1.0 / q1 });
    }
    Ok((1.0 / q2, 1.0 / q1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaBranch {
    /// `beta = sqrt(rho) - 1`, a contraction towards the origin.
    #[default]
    Contraction,
    /// `beta = -sqrt(rho) - 1`, jumps through the origin.
    Overshoot,
}

impl BetaBranch {
    pub fn beta(&self, rho: f64) -> f64 {
        match self {
            BetaBranch::Contraction => rho.sqrt() - 1.0,
            BetaBranch::Overshoot => -rho.sqrt() - 1.0,
        }
    }
}

/// Constants of the scalar example family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleConstants {
    pub b: f64,
    pub k: f64,
    pub r: f64,
    pub sigma0: f64,
    pub q: f64,
    pub h: f64,
    pub beta: f64,
    /// `(1 + beta)^2`.
    pub rho: f64,
    pub cbar: f64,
    /// Decay rate of `V` under the trigger rule, `-(2k + 2 sqrt(q)|b| + sqrt(sigma0)|k|)`.
    pub c: f64,
}

impl ExampleConstants {
    /// Fills the derived fields `rho`, `cbar` and `c`.
    pub fn new(b: f64, k: f64, r: f64, sigma0: f64, q: f64, h: f64, beta: f64, mode: CbarMode) -> Self {
        Self {
            b,
            k,
            r,
            sigma0,
            q,
            h,
            beta,
            rho: (1.0 + beta).powi(2),
            cbar: cbar(q, b.abs(), k.abs(), mode),
            c: -(2.0 * k + 2.0 * q.sqrt() * b.abs() + sigma0.sqrt() * k.abs()),
        }
    }

    /// Constants of the worked example: `b = -0.1`, `k = -0.2`, `r = 16`,
    /// `sigma0 = 0.36`, `q = 3`, `h = 0.666`, `beta = -0.293`.
    pub fn worked_example() -> Self {
        Self::new(-0.1, -0.2, 16.0, 0.36, 3.0, 0.666, -0.293, CbarMode::Full)
    }

    pub fn cbar_fn(&self, mode: CbarMode) -> impl Fn(f64) -> f64 + Copy {
        let (abs_b, abs_k) = (self.b.abs(), self.k.abs());
        move |q| cbar(q, abs_b, abs_k, mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub constants: ExampleConstants,
    pub cbar_mode: CbarMode,
    pub feedback_margin: f64,
    pub feedback_satisfied: bool,
    pub condition_iii: ConditionIii,
    pub dwell_bound: DwellBound,
    /// Roots of `H` at the configured dwell, when it is admissible.
    pub roots: Option<(f64, f64)>,
    pub rho_interval: Option<(f64, f64)>,
    pub rho_in_interval: Option<bool>,
    /// First condition that failed, if any.
    pub first_failure: Option<String>,
    pub narrative: Vec<String>,
}

impl CertificateReport {
    pub fn all_pass(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Evaluates every certificate for the given constants.
pub fn certify(constants: &ExampleConstants, mode: CbarMode) -> Result<CertificateReport> {
    let c = constants;
    let cbar_of_q = c.cbar_fn(mode);
    let margin = feedback_margin(c.k, c.b, c.q, c.sigma0);
    let feedback_satisfied = margin < 0.0;
    let check = condition_iii_check(c.q, c.rho, c.cbar, c.h);
    let bound = dwell_bound(cbar_of_q)?;
    let roots = fixed_point_roots(c.h, cbar_of_q).ok();
    let interval = roots.and_then(|(q1, q2)| rho_interval(q1, q2).ok());
    let rho_in_interval = interval.map(|(lo, hi)| c.rho > lo && c.rho < hi);

    let mut narrative = Vec::new();
    let mut first_failure = None;
    let mut fail = |name: &str, line: String, failed: bool, narrative: &mut Vec<String>| {
        if failed && first_failure.is_none() {
            first_failure = Some(name.to_string());
        }
        narrative.push(line);
    };

    // The feedback inequality only concerns the event-triggered loop.
    if mode == CbarMode::Full {
        fail(
            "feedback_margin",
            format!(
                "feedback inequality k + sqrt(q)|b| + sqrt(sigma0)|k| = {margin:.6} ({})",
                if feedback_satisfied { "< 0, satisfied" } else { ">= 0, NOT satisfied" }
            ),
            !feedback_satisfied,
            &mut narrative,
        );
    }
    fail(
        "condition_iii",
        format!(
            "condition (iii): q = {:.6} {} 1/rho = {:.6} {} exp(cbar h) = {:.6}",
            c.q,
            if c.q > check.inv_rho { ">" } else { "<=" },
            check.inv_rho,
            if check.inv_rho > check.growth { ">" } else { "<=" },
            check.growth
        ),
        !check.passes,
        &mut narrative,
    );
    let bounded = bound.is_bounded() && c.h < bound.h_max;
    fail(
        "dwell_bound",
        format!(
            "dwell h = {} against largest admissible dwell {:.6} at q* = {:.6}",
            c.h, bound.h_max, bound.q_star
        ),
        !bounded,
        &mut narrative,
    );
    if let (Some((q1, q2)), Some((lo, hi)), Some(inside)) = (roots, interval, rho_in_interval) {
        fail(
            "rho_interval",
            format!(
                "H(q) = 0 at q1 = {q1:.6}, q2 = {q2:.6}; rho = {:.6} {} ({lo:.6}, {hi:.6})",
                c.rho,
                if inside { "inside" } else { "outside" }
            ),
            !inside,
            &mut narrative,
        );
    }

    Ok(CertificateReport {
        constants: *c,
        cbar_mode: mode,
        feedback_margin: margin,
        feedback_satisfied,
        condition_iii: check,
        dwell_bound: bound,
        roots,
        rho_interval: interval,
        rho_in_interval,
        first_failure,
        narrative,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionInput {
    pub b: f64,
    pub k: f64,
    pub r: f64,
    pub sigma0: f64,
    pub target_h: Option<f64>,
    pub branch: BetaBranch,
    pub mode: CbarMode,
}

impl SelectionInput {
    pub fn new(b: f64, k: f64) -> Self {
        Self {
            b,
            k,
            r: 16.0,
            sigma0: 0.36,
            target_h: None,
            branch: BetaBranch::Contraction,
            mode: CbarMode::Full,
        }
    }

    pub fn with_target_h(mut self, h: f64) -> Self {
        self.target_h = Some(h);
        self
    }
}

/// Runs the selection procedure: dwell bound, dwell, roots of `H`, jump
/// factor interval, jump factor, impulse gain and finally `q`.
///
/// `rho` is the geometric mean of `(1/q2, 1/q1)`. For that `rho`, condition
/// (iii) with `cbar` evaluated at the same `q` holds exactly for
/// `q` in `(1/rho, q_up)` where `cbar(q_up) h = ln(1/rho)`; `q` is the
/// midpoint of that interval.
pub fn select_parameters(input: &SelectionInput) -> Result<CertificateReport> {
    let (abs_b, abs_k, mode) = (input.b.abs(), input.k.abs(), input.mode);
    let cbar_of_q = move |q: f64| cbar(q, abs_b, abs_k, mode);
    let bound = dwell_bound(cbar_of_q)?;
    if !bound.is_bounded() {
        return Err(Error::NoRoot("dwell bound diverges; any dwell is admissible".into()));
    }
    let h = match input.target_h {
        Some(h) if h > 0.0 && h < bound.h_max => h,
        Some(h) => return Err(Error::InfeasibleDwell { requested: h, h_max: bound.h_max }),
        None => 0.5 * bound.h_max,
    };
    let (q1, q2) = fixed_point_roots(h, cbar_of_q)?;
    let (rho_lo, rho_hi) = rho_interval(q1, q2)?;
    let rho = (rho_lo * rho_hi).sqrt();
    let inv_rho = 1.0 / rho;
    let log_inv_rho = inv_rho.ln();
    let q_up = bisect_root(&|q: f64| log_inv_rho - cbar_of_q(q) * h, inv_rho, q2);
    let q = 0.5 * (inv_rho + q_up);
    let beta = input.branch.beta(rho);

    let mut constants = ExampleConstants::new(input.b, input.k, input.r, input.sigma0, q, h, beta, mode);
    // Keep the selected rho exactly rather than re-deriving it through beta.
    constants.rho = rho;
    certify(&constants, mode)
}
