//! Scalar thresholding functions and the componentwise operator `H_tau`.
//!
//! Every rule zeroes inputs with `|u| <= tau` and applies an odd defining
//! function `f_tau` above the threshold. Each `f_tau` is positively
//! homogeneous of degree one in `(u, tau)` and satisfies
//! `u - c tau <= f_tau(u) <= u` for `u >= tau` with the rule's boundedness
//! constant `c`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SCAD_A: f64 = 3.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Hard,
    Half,
    TwoThirds,
    Soft,
    Scad,
}

impl RuleKind {
    pub const ALL: [RuleKind; 5] = [
        RuleKind::Hard,
        RuleKind::Half,
        RuleKind::TwoThirds,
        RuleKind::Soft,
        RuleKind::Scad,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Hard => "hard",
            RuleKind::Half => "half",
            RuleKind::TwoThirds => "twothirds",
            RuleKind::Soft => "soft",
            RuleKind::Scad => "scad",
        }
    }
}

/// A thresholding rule. `scad_a` only matters for [`RuleKind::Scad`].
///
/// Parses from and prints as `hard`, `half`, `twothirds`, `soft`, `scad` or
/// `scad:a=<value>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ThresholdRule {
    kind: RuleKind,
    scad_a: f64,
}

impl ThresholdRule {
    pub fn new(kind: RuleKind) -> Self {
        ThresholdRule {
            kind,
            scad_a: DEFAULT_SCAD_A,
        }
    }

    pub fn hard() -> Self {
        Self::new(RuleKind::Hard)
    }

    pub fn half() -> Self {
        Self::new(RuleKind::Half)
    }

    pub fn two_thirds() -> Self {
        Self::new(RuleKind::TwoThirds)
    }

    pub fn soft() -> Self {
        Self::new(RuleKind::Soft)
    }

    pub fn scad(a: f64) -> Result<Self> {
        if !(a > 2.0) || !a.is_finite() {
            return Err(Error::InvalidRule(format!("SCAD needs a > 2, got {a}")));
        }
        Ok(ThresholdRule {
            kind: RuleKind::Scad,
            scad_a: a,
        })
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn scad_a(&self) -> f64 {
        self.scad_a
    }

    /// Boundedness constant `c`: hard 0, half 1/3, 2/3-rule 1/2, soft 1, SCAD 1.
    pub fn boundedness_constant(&self) -> f64 {
        boundedness_constant(*self)
    }

    /// One rule of each kind, SCAD with the default `a`.
    pub fn all() -> [ThresholdRule; 5] {
        RuleKind::ALL.map(ThresholdRule::new)
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RuleKind::Scad => write!(f, "scad:a={}", self.scad_a),
            k => f.write_str(k.name()),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, params) = match s.split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s, None),
        };
        let kind = match name.to_ascii_lowercase().as_str() {
            "hard" => RuleKind::Hard,
            "half" => RuleKind::Half,
            "twothirds" | "2/3" => RuleKind::TwoThirds,
            "soft" => RuleKind::Soft,
            "scad" => RuleKind::Scad,
            _ => return Err(Error::InvalidRule(s.to_string())),
        };
        match (kind, params) {
            (RuleKind::Scad, None) => Ok(ThresholdRule::new(kind)),
            (RuleKind::Scad, Some(p)) => {
                let a = p
                    .trim()
                    .strip_prefix("a=")
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::InvalidRule(s.to_string()))?;
                ThresholdRule::scad(a)
            }
            (_, None) => Ok(ThresholdRule::new(kind)),
            (_, Some(_)) => Err(Error::InvalidRule(format!("{name} takes no parameters"))),
        }
    }
}

impl TryFrom<String> for ThresholdRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ThresholdRule> for String {
    fn from(r: ThresholdRule) -> String {
        r.to_string()
    }
}

pub fn boundedness_constant(rule: ThresholdRule) -> f64 {
    match rule.kind {
        RuleKind::Hard => 0.0,
        RuleKind::Half => 1.0 / 3.0,
        RuleKind::TwoThirds => 0.5,
        RuleKind::Soft => 1.0,
        RuleKind::Scad => 1.0,
    }
}

/// `h_tau(u)`: zero for `|u| <= tau`, `sign(u) f_tau(|u|)` otherwise.
pub fn apply_scalar(rule: ThresholdRule, u: f64, tau: f64) -> Result<f64> {
    if !u.is_finite() {
        return Err(Error::NonFinite(u));
    }
    if !tau.is_finite() {
        return Err(Error::NonFinite(tau));
    }
    if tau <= 0.0 {
        return Err(Error::NonpositiveThreshold(tau));
    }
    Ok(threshold_unchecked(rule, u, tau))
}

/// Componentwise [`apply_scalar`].
pub fn apply_vector(rule: ThresholdRule, z: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(z.len());
    for (o, &u) in out.iter_mut().zip(z.iter()) {
        *o = apply_scalar(rule, u, tau)?;
    }
    Ok(out)
}

/// The solver's `H_tau`. Identical to [`apply_vector`] for `tau > 0`; at
/// `tau = 0` (fewer than `k + 1` nonzero entries in `z`) it takes the
/// `tau -> 0+` limit of every rule, which is the identity.
pub fn threshold_operator(rule: ThresholdRule, z: &DVector<f64>, tau: f64) -> Result<DVector<f64>> {
    if tau == 0.0 {
        if let Some(bad) = z.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(*bad));
        }
        return Ok(z.clone());
    }
    apply_vector(rule, z, tau)
}

fn threshold_unchecked(rule: ThresholdRule, u: f64, tau: f64) -> f64 {
    let mag = u.abs();
    if mag <= tau {
        return 0.0;
    }
    let f = match rule.kind {
        RuleKind::Hard => mag,
        RuleKind::Soft => mag - tau,
        RuleKind::Half => half_defining(mag, tau),
        RuleKind::TwoThirds => two_thirds_defining(mag, tau),
        RuleKind::Scad => scad_defining(mag, tau, rule.scad_a),
    };
    if u.is_sign_negative() {
        -f
    } else {
        f
    }
}

/// Half (L_{1/2}) defining function for `u > tau > 0`.
/// Jumps to `2 tau / 3` just above the threshold.
fn half_defining(u: f64, tau: f64) -> f64 {
    let inner = FRAC_1_SQRT_2 * (tau / u).powf(1.5);
    let angle = 2.0 * PI / 3.0 - (2.0 / 3.0) * inner.acos();
    (2.0 / 3.0) * u * (1.0 + angle.cos())
}

/// 2/3 (L_{2/3}) defining function for `u > tau > 0`, the closed-form
/// minimizer of `(x - u)^2 + lambda |x|^{2/3}` with
/// `lambda = (27/16)^{1/3} tau^{4/3}`. Jumps to `tau / 2` at the threshold.
fn two_thirds_defining(u: f64, tau: f64) -> f64 {
    let ratio = u / tau;
    // The argument is >= 3 sqrt(3) / 4 for u > tau; clamp guards rounding.
    let arg = (0.75 * 3f64.sqrt() * ratio * ratio).max(1.0);
    let theta = arg.acosh();
    let phi = (2.0 / 3f64.sqrt())
        * (27.0f64 / 16.0).powf(1.0 / 12.0)
        * tau.cbrt()
        * (theta / 3.0).cosh().sqrt();
    let root = (2.0 * u / phi - phi * phi).max(0.0).sqrt();
    ((phi + root) / 2.0).powi(3)
}

fn scad_defining(u: f64, tau: f64, a: f64) -> f64 {
    if u > a * tau {
        u
    } else if u > 2.0 * tau {
        ((a - 1.0) * u - a * tau) / (a - 2.0)
    } else {
        u - tau
    }
}
