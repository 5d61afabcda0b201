//! Coherence-based convergence guarantees and a checker for solver traces.
//!
//! With `c` the rule's boundedness constant, `mu` the coherence, `k*` the
//! true sparsity and `k` the specified sparsity, the guarantees need
//!
//! ```text
//! mu < 1 / ((3 + c) k*)   and   k* <= k < 1 / ((3 + c) mu)
//! ```
//!
//! Under them the true support is contained in every iterate support from
//! some `t* <= T_{k*}` on, and afterwards
//! `||x(t) - x*||_inf <= (3 + c)/2 * min|x*_i| * rho^(t - t* + 1)` with
//! contraction factor `rho = (1 + c) k mu < 1/2`. When `k = k*` the supports
//! coincide exactly.

use serde::{Deserialize, Serialize};

use crate::engine::IterationRecord;
use crate::error::{Error, Result};
use crate::problem::GroundTruth;
use crate::threshold::ThresholdRule;

/// Relative slack on the geometric envelope.
pub const ENVELOPE_REL_SLACK: f64 = 1e-9;
/// Absolute slack on the envelope, as a multiple of `max |x*_i|`. The
/// envelope decays to zero while a finite-precision iterate settles at a
/// rounding floor of a few ulps of the largest component.
pub const ENVELOPE_ABS_FLOOR: f64 = 1e-12;

fn check_domain(c: f64, k: usize, mu: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Domain(format!("c must lie in [0, 1], got {c}")));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0, 1], got {mu}")));
    }
    Ok(())
}

/// `rho = (1 + c) k mu`.
pub fn contraction_factor(c: f64, k: usize, mu: f64) -> Result<f64> {
    check_domain(c, k, mu)?;
    Ok((1.0 + c) * k as f64 * mu)
}

/// Evaluation of the two hypothesis sets, with the distance to each boundary
/// (positive means satisfied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    /// Both coherence conditions hold: support identification within
    /// `T_{k*}` and the geometric error envelope.
    pub recovery_guaranteed: bool,
    /// Additionally `k = k*`, so the iterate support equals the true one.
    pub exact_support_guaranteed: bool,
    /// `1/((3+c)k*) - mu`; `None` when `k* = 0` leaves `mu` unconstrained.
    pub mu_slack: Option<f64>,
    /// `k - k*`.
    pub k_lower_slack: f64,
    /// `1/((3+c)mu) - k`.
    pub k_upper_slack: f64,
    /// Informational: `k* <= (1 + 1/mu)/2`, under which `x*` is the unique
    /// sparsest solution.
    pub unique_sparsest: bool,
    /// First failing inequality, if any.
    pub violation: Option<String>,
}

pub fn check_hypotheses(c: f64, k: usize, k_star: usize, mu: f64) -> HypothesisCheck {
    let (kf, ksf) = (k as f64, k_star as f64);
    let mu_limit = 1.0 / ((3.0 + c) * ksf);
    let k_limit = 1.0 / ((3.0 + c) * mu);
    let mu_slack = (k_star > 0).then_some(mu_limit - mu);
    let k_lower_slack = kf - ksf;
    let k_upper_slack = k_limit - kf;

    let violation = if !(mu > 0.0) {
        Some(format!("0 < mu fails: mu = {mu}"))
    } else if mu_slack.is_some_and(|s| !(s > 0.0)) {
        Some(format!(
            "mu < 1/((3+c)k*) fails: mu = {mu} >= {mu_limit} (c = {c}, k* = {k_star})"
        ))
    } else if k_lower_slack < 0.0 {
        Some(format!("k* <= k fails: k = {k} < k* = {k_star}"))
    } else if !(k_upper_slack > 0.0) {
        Some(format!(
            "k < 1/((3+c)mu) fails: k = {k} >= {k_limit} (c = {c}, mu = {mu})"
        ))
    } else {
        None
    };
    let recovery_guaranteed = violation.is_none();
    HypothesisCheck {
        recovery_guaranteed,
        exact_support_guaranteed: recovery_guaranteed && k == k_star,
        mu_slack,
        k_lower_slack,
        k_upper_slack,
        unique_sparsest: ksf <= 0.5 * (1.0 + 1.0 / mu),
        violation,
    }
}

fn log_base(base: f64, x: f64) -> f64 {
    x.ln() / base.ln()
}

/// Support-identification bound `T_{k*}`:
///
/// ```text
/// k* + (k*-1) log_rho[(1-(3+c)k mu) / ((3+c) - (c^2+4c+3+2/Dr) k mu)] - log_rho(Dr)
/// ```
///
/// Returned as a real number; callers round for display.
pub fn iteration_bound(c: f64, k: usize, k_star: usize, mu: f64, dr: f64) -> Result<f64> {
    check_domain(c, k, mu)?;
    if k_star == 0 {
        return Err(Error::Domain("k* must be at least 1".into()));
    }
    if !(dr >= 1.0) || !dr.is_finite() {
        return Err(Error::Domain(format!(
            "Dr must be finite and >= 1, got {dr}"
        )));
    }
    let check = check_hypotheses(c, k, k_star, mu);
    if let Some(v) = check.violation {
        return Err(Error::HypothesisViolated(v));
    }
    let kmu = k as f64 * mu;
    let rho = (1.0 + c) * kmu;
    let num = 1.0 - (3.0 + c) * kmu;
    let den = (3.0 + c) - (c * c + 4.0 * c + 3.0 + 2.0 / dr) * kmu;
    let arg = num / den;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::LogDomain(arg));
    }
    let ks = k_star as f64;
    Ok(ks + (ks - 1.0) * log_base(rho, arg) - log_base(rho, dr))
}

/// `T*_{k*}`: [`iteration_bound`] with `k = k*`.
pub fn iteration_bound_exact_k(c: f64, k_star: usize, mu: f64, dr: f64) -> Result<f64> {
    iteration_bound(c, k_star, k_star, mu, dr)
}

/// Per-index detection budget `l_r` for adjacent ratio `|x*_r| / |x*_{r+1}|`:
///
/// ```text
/// log_rho[(1-(3+c)k mu) / ((3+c)(1-(1+c)k mu) ratio - 2 k mu)]
/// ```
///
/// Returned before rounding.
pub fn detection_budget_lr(c: f64, k: usize, mu: f64, ratio: f64) -> Result<f64> {
    check_domain(c, k, mu)?;
    if !(ratio >= 1.0) || !ratio.is_finite() {
        return Err(Error::Domain(format!(
            "ratio must be finite and >= 1, got {ratio}"
        )));
    }
    let kmu = k as f64 * mu;
    if !((3.0 + c) * kmu < 1.0) {
        return Err(Error::HypothesisViolated(format!(
            "k < 1/((3+c)mu) fails: k = {k}, mu = {mu}, c = {c}"
        )));
    }
    let rho = (1.0 + c) * kmu;
    let num = 1.0 - (3.0 + c) * kmu;
    let den = (3.0 + c) * (1.0 - rho) * ratio - 2.0 * kmu;
    let arg = num / den;
    if !(arg > 0.0) || !arg.is_finite() {
        return Err(Error::LogDomain(arg));
    }
    Ok(log_base(rho, arg))
}

/// Every closed-form quantity for one `(rule, k, mu, x*)` combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub mu: f64,
    pub c: f64,
    pub k: usize,
    pub k_star: usize,
    pub dr: f64,
    pub rho: f64,
    /// `T_{k*}`; absent when the hypotheses fail or the bound is undefined.
    pub t_bound: Option<f64>,
    /// `T*_{k*}`.
    pub t_bound_exact_k: Option<f64>,
    /// `l_r` for `r = 1..k*-1`; empty when the hypotheses fail.
    pub l_budgets: Vec<f64>,
    pub hypotheses: HypothesisCheck,
}

impl TheoryBounds {
    pub fn new(c: f64, k: usize, k_star: usize, mu: f64, dr: f64, adjacent_ratios: &[f64]) -> Self {
        let hypotheses = check_hypotheses(c, k, k_star, mu);
        let l_budgets = if hypotheses.recovery_guaranteed {
            adjacent_ratios
                .iter()
                .filter_map(|&r| detection_budget_lr(c, k, mu, r).ok())
                .collect()
        } else {
            Vec::new()
        };
        TheoryBounds {
            mu,
            c,
            k,
            k_star,
            dr,
            rho: (1.0 + c) * k as f64 * mu,
            t_bound: iteration_bound(c, k, k_star, mu, dr).ok(),
            t_bound_exact_k: iteration_bound_exact_k(c, k_star, mu, dr).ok(),
            l_budgets,
            hypotheses,
        }
    }

    pub fn for_truth(rule: ThresholdRule, k: usize, mu: f64, truth: &GroundTruth) -> Self {
        Self::new(
            rule.boundedness_constant(),
            k,
            truth.sparsity,
            mu,
            truth.dynamic_range,
            &truth.adjacent_ratios(),
        )
    }

    pub fn t_bound_floor(&self) -> Option<i64> {
        self.t_bound.map(|t| t.floor() as i64)
    }

    pub fn t_bound_ceil(&self) -> Option<i64> {
        self.t_bound.map(|t| t.ceil() as i64)
    }
}

/// Outcome of [`verify_trace`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    /// Smallest `t` with `I* ⊆ I(s)` for every recorded `s >= t`.
    pub support_identified_at: Option<usize>,
    /// `support_identified_at <= floor(T_{k*})`.
    pub within_t_bound: bool,
    /// The error envelope holds from some anchor `t* <= floor(T_{k*})` with
    /// `t* >= support_identified_at`.
    pub geometric_envelope_ok: bool,
    /// Smallest anchor `t* >= support_identified_at` from which the envelope
    /// holds for the rest of the trace.
    pub envelope_anchor: Option<usize>,
    /// Larger components never enter the support later than smaller ones.
    pub recruitment_order_ok: bool,
    /// Once the `r` largest components are all in the support they stay.
    pub containment_persistent: bool,
    /// `I(t) = I*` from identification on; only evaluated when `k = k*`
    /// and the hypotheses hold.
    pub support_exact: Option<bool>,
    pub details: Vec<String>,
}

impl VerificationVerdict {
    fn trivial() -> Self {
        VerificationVerdict {
            support_identified_at: Some(0),
            within_t_bound: true,
            geometric_envelope_ok: true,
            envelope_anchor: Some(0),
            recruitment_order_ok: true,
            containment_persistent: true,
            support_exact: Some(true),
            details: vec!["empty true support: all checks hold trivially".into()],
        }
    }

    pub fn all_ok(&self) -> bool {
        self.within_t_bound
            && self.geometric_envelope_ok
            && self.recruitment_order_ok
            && self.containment_persistent
            && self.support_exact.unwrap_or(true)
    }
}

fn contains_all(sorted_support: &[usize], indices: &[usize]) -> bool {
    indices
        .iter()
        .all(|i| sorted_support.binary_search(i).is_ok())
}

/// Holds a solver trace to the support-identification, envelope,
/// recruitment-order and containment claims.
///
/// Records must be `t = 1, 2, ...` without gaps and carry either the full
/// iterate or its sup-norm error to `truth` (normalized coordinates).
pub fn verify_trace(
    trace: &[IterationRecord],
    truth: &GroundTruth,
    bounds: &TheoryBounds,
) -> Result<VerificationVerdict> {
    if truth.sparsity == 0 {
        return Ok(VerificationVerdict::trivial());
    }
    if trace.is_empty() {
        return Err(Error::IncompleteTrace("trace has no records".into()));
    }
    let mut errors = Vec::with_capacity(trace.len());
    for (i, rec) in trace.iter().enumerate() {
        if rec.t != i + 1 {
            return Err(Error::IncompleteTrace(format!(
                "record {i} has t = {}, expected {}",
                rec.t,
                i + 1
            )));
        }
        let err = match (&rec.state, rec.linf_err) {
            (Some(state), _) => {
                if state.x.len() != truth.signal.len() {
                    return Err(Error::DimensionMismatch {
                        expected: truth.signal.len(),
                        actual: state.x.len(),
                    });
                }
                (&state.x - &truth.signal).amax()
            }
            (None, Some(e)) => e,
            (None, None) => {
                return Err(Error::IncompleteTrace(format!(
                    "record t = {} has neither the iterate nor its error",
                    rec.t
                )))
            }
        };
        errors.push(err);
    }

    let mut details = Vec::new();
    let star = &truth.support;

    let support_identified_at = match trace.iter().rposition(|r| !contains_all(&r.support, star)) {
        None => Some(1),
        Some(last) if last + 1 < trace.len() => Some(trace[last + 1].t),
        Some(_) => None,
    };

    let within_t_bound = match (support_identified_at, bounds.t_bound) {
        (Some(s), Some(t)) => (s as f64) <= t.floor(),
        (None, _) => {
            details.push("true support never stays inside the iterate support".into());
            false
        }
        (Some(_), None) => {
            details.push("T_{k*} undefined for these parameters".into());
            false
        }
    };

    let base = 0.5 * (3.0 + bounds.c) * truth.min_magnitude();
    let floor = ENVELOPE_ABS_FLOOR * truth.signal.amax();
    let holds_from = |anchor: usize| {
        trace
            .iter()
            .zip(&errors)
            .filter(|(r, _)| r.t >= anchor)
            .find(|(rec, &err)| {
                let envelope = base * bounds.rho.powi((rec.t - anchor + 1) as i32);
                err > envelope * (1.0 + ENVELOPE_REL_SLACK) + floor
            })
            .map(|(rec, &err)| (rec.t, err))
    };
    // Widening the anchor only loosens the envelope, so the first anchor
    // that works is the smallest one.
    let envelope_anchor = support_identified_at
        .and_then(|sid| (sid..=trace.len()).find(|&a| holds_from(a).is_none()));
    if let Some(sid) = support_identified_at {
        if let Some((t, err)) = holds_from(sid) {
            details.push(format!(
                "envelope anchored at identification (t = {sid}) fails at t = {t}: error {err:e}"
            ));
        }
    }
    let geometric_envelope_ok = match (envelope_anchor, bounds.t_bound) {
        (Some(a), Some(t)) => (a as f64) <= t.floor(),
        (Some(a), None) => Some(a) == support_identified_at,
        (None, _) => false,
    };
    if !geometric_envelope_ok {
        details.push(format!(
            "no envelope anchor within the bound (smallest anchor {envelope_anchor:?})"
        ));
    }

    let entry: Vec<Option<usize>> = star
        .iter()
        .map(|i| {
            trace
                .iter()
                .find(|r| r.support.binary_search(i).is_ok())
                .map(|r| r.t)
        })
        .collect();
    let mut recruitment_order_ok = true;
    'outer: for a in 0..star.len() {
        for b in (a + 1)..star.len() {
            let (ma, mb) = (truth.signal[star[a]].abs(), truth.signal[star[b]].abs());
            if ma <= mb {
                continue;
            }
            let later = match (entry[a], entry[b]) {
                (Some(ea), Some(eb)) => ea > eb,
                (None, Some(_)) => true,
                _ => false,
            };
            if later {
                details.push(format!(
                    "index {} (|x*| = {ma}) entered after index {} (|x*| = {mb})",
                    star[a], star[b]
                ));
                recruitment_order_ok = false;
                break 'outer;
            }
        }
    }

    let mut containment_persistent = true;
    for r in 1..=star.len() {
        let prefix = &star[..r];
        if let Some(first) = trace
            .iter()
            .position(|rec| contains_all(&rec.support, prefix))
        {
            if let Some(lost) = trace[first..]
                .iter()
                .find(|rec| !contains_all(&rec.support, prefix))
            {
                details.push(format!(
                    "top-{r} components contained at t = {} but lost at t = {}",
                    trace[first].t, lost.t
                ));
                containment_persistent = false;
                break;
            }
        }
    }

    let support_exact = bounds.hypotheses.exact_support_guaranteed.then(|| {
        let mut sorted_star = star.clone();
        sorted_star.sort_unstable();
        match support_identified_at {
            Some(sid) => trace
                .iter()
                .filter(|r| r.t >= sid)
                .all(|r| r.support == sorted_star),
            None => false,
        }
    });
    if support_exact == Some(false) {
        details.push("iterate support differs from the true support after identification".into());
    }

    Ok(VerificationVerdict {
        support_identified_at,
        within_t_bound,
        geometric_envelope_ok,
        envelope_anchor,
        recruitment_order_ok,
        containment_persistent,
        support_exact,
        details,
    })
}
