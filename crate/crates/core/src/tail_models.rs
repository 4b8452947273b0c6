//! Parametric tail functions `Π̄(x) = Π{(x, ∞)}` and their right-continuous inverses.
//!
//! Five families cover every index regime near zero:
//!
//! | family            | `Π̄(x)` for `x < 1`              | regime at 0        |
//! |-------------------|---------------------------------|--------------------|
//! | `Pareto`          | `x^{-α}`                        | `RV_0(-α)`         |
//! | `ParetoLog`       | `x^{-α} (1 + log(1/x))^{β}`     | `RV_0(-α)`         |
//! | `ParetoPerturbed` | `x^{-α} (1 + c x^{γ})`          | `RV_0(-α)`         |
//! | `RapidZero`       | `exp(1/x) - 1`                  | rapid (`α = ∞`)    |
//! | `SlowZero`        | `log(1 + 1/x)`                  | slow (`α = 0`)     |
//!
//! `ParetoLog` and `ParetoPerturbed` are continued for `x ≥ 1` by freezing the
//! correction factor at its value at `x = 1`, which keeps the tail monotone and
//! vanishing at infinity.
//!
//! All evaluation has a log-argument form (`tail_at_log`, `log_inverse_tail`)
//! because the slowly varying family pushes points far below `f64::MIN_POSITIVE`
//! at small `t`; ratios of ordered points are formed from log differences.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value reported in place of `Π̄(x)` when `exp(1/x)` would overflow.
pub const RAPID_SATURATION: f64 = 1e300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailKind {
    Pareto,
    ParetoLog,
    ParetoPerturbed,
    RapidZero,
    SlowZero,
}

impl TailKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TailKind::Pareto => "pareto",
            TailKind::ParetoLog => "pareto_log",
            TailKind::ParetoPerturbed => "pareto_perturbed",
            TailKind::RapidZero => "rapid_zero",
            TailKind::SlowZero => "slow_zero",
        }
    }
}

impl fmt::Display for TailKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TailKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pareto" => Ok(TailKind::Pareto),
            "pareto_log" | "paretolog" => Ok(TailKind::ParetoLog),
            "pareto_perturbed" | "paretoperturbed" | "perturbed" => Ok(TailKind::ParetoPerturbed),
            "rapid_zero" | "rapidzero" | "rapid" => Ok(TailKind::RapidZero),
            "slow_zero" | "slowzero" | "slow" => Ok(TailKind::SlowZero),
            other => Err(Error::domain(format!("unknown tail kind '{other}'"))),
        }
    }
}

/// Index of variation at zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailIndex {
    Regular(f64),
    /// `α = 0`
    Slow,
    /// `α = ∞`
    Rapid,
}

/// A validated tail model. Construct through the checked constructors or
/// [`TailModel::from_record`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TailRecord", into = "TailRecord")]
pub enum TailModel {
    Pareto { alpha: f64 },
    ParetoLog { alpha: f64, beta: f64 },
    ParetoPerturbed { alpha: f64, c: f64, gamma: f64 },
    RapidZero,
    SlowZero,
}

/// Result of [`TailModel::eval_tail`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEval {
    pub value: f64,
    /// Set when the true value exceeded [`RAPID_SATURATION`].
    pub saturated: bool,
}

/// Controls for the numeric inverse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseSpec {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for InverseSpec {
    fn default() -> Self {
        Self {
            bracket_lo: 0.5,
            bracket_hi: 2.0,
            rel_tol: 1e-12,
            max_iter: 200,
        }
    }
}

impl InverseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bracket_lo > 0.0 && self.bracket_lo < self.bracket_hi && self.bracket_hi.is_finite()) {
            return Err(Error::domain("inverse bracket must satisfy 0 < lo < hi < inf"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-6) {
            return Err(Error::domain("inverse rel_tol must lie in (0, 1e-6]"));
        }
        if self.max_iter < 64 {
            return Err(Error::domain("inverse max_iter must be at least 64"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")))
    }
}

/// `log(1 + e^{z})` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    if z > 30.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl TailModel {
    pub fn pareto(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(TailModel::Pareto { alpha })
    }

    pub fn pareto_log(alpha: f64, beta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !beta.is_finite() {
            return Err(Error::domain("beta must be finite"));
        }
        // d/dx log Π̄ < 0 on (0,1) iff alpha + beta / (1 + log(1/x)) > 0
        if alpha + beta.min(0.0) <= 0.0 {
            return Err(Error::domain("pareto_log requires alpha + min(beta, 0) > 0 for monotonicity"));
        }
        Ok(TailModel::ParetoLog { alpha, beta })
    }

    pub fn pareto_perturbed(alpha: f64, c: f64, gamma: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(c >= 0.0 && c.is_finite() && gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::domain("pareto_perturbed requires finite c >= 0 and gamma >= 0"));
        }
        if gamma > alpha && c * (gamma - alpha) >= alpha {
            return Err(Error::domain(
                "pareto_perturbed requires c * (gamma - alpha) < alpha when gamma > alpha",
            ));
        }
        Ok(TailModel::ParetoPerturbed { alpha, c, gamma })
    }

    pub fn kind(&self) -> TailKind {
        match self {
            TailModel::Pareto { .. } => TailKind::Pareto,
            TailModel::ParetoLog { .. } => TailKind::ParetoLog,
            TailModel::ParetoPerturbed { .. } => TailKind::ParetoPerturbed,
            TailModel::RapidZero => TailKind::RapidZero,
            TailModel::SlowZero => TailKind::SlowZero,
        }
    }

    pub fn index(&self) -> TailIndex {
        match *self {
            TailModel::Pareto { alpha }
            | TailModel::ParetoLog { alpha, .. }
            | TailModel::ParetoPerturbed { alpha, .. } => TailIndex::Regular(alpha),
            TailModel::RapidZero => TailIndex::Rapid,
            TailModel::SlowZero => TailIndex::Slow,
        }
    }

    /// `α` for regularly varying families.
    pub fn alpha(&self) -> Option<f64> {
        match self.index() {
            TailIndex::Regular(a) => Some(a),
            _ => None,
        }
    }

    /// True when every ratio statistic has exactly its limit law at every `t`.
    pub fn is_exact_pareto(&self) -> bool {
        matches!(self, TailModel::Pareto { .. })
    }

    pub fn has_closed_form_inverse(&self) -> bool {
        !matches!(self, TailModel::ParetoLog { .. } | TailModel::ParetoPerturbed { .. })
    }

    /// `Π̄(x)` for `x > 0`, saturating for the rapid family.
    pub fn eval_tail(&self, x: f64) -> Result<TailEval> {
        if !(x > 0.0) || x.is_nan() {
            return Err(Error::domain(format!("tail argument must be positive, got {x}")));
        }
        if x.is_infinite() {
            return Ok(TailEval {
                value: 0.0,
                saturated: false,
            });
        }
        let value = match *self {
            TailModel::Pareto { alpha } => {
                if alpha == 1.0 {
                    1.0 / x
                } else {
                    x.powf(-alpha)
                }
            }
            TailModel::ParetoLog { alpha, beta } => {
                let log_factor = if x < 1.0 { (1.0 - x.ln()).powf(beta) } else { 1.0 };
                x.powf(-alpha) * log_factor
            }
            TailModel::ParetoPerturbed { alpha, c, gamma } => {
                let bump = if x < 1.0 { 1.0 + c * x.powf(gamma) } else { 1.0 + c };
                x.powf(-alpha) * bump
            }
            TailModel::RapidZero => {
                let z = 1.0 / x;
                if z > RAPID_SATURATION.ln() {
                    return Ok(TailEval {
                        value: RAPID_SATURATION,
                        saturated: true,
                    });
                }
                z.exp_m1()
            }
            TailModel::SlowZero => (1.0 / x).ln_1p(),
        };
        Ok(TailEval {
            value,
            saturated: false,
        })
    }

    /// `Π̄(x)` as a plain value (saturated where applicable).
    pub fn tail(&self, x: f64) -> Result<f64> {
        self.eval_tail(x).map(|e| e.value)
    }

    /// `Π̄(e^{l})`, valid for every finite `l` even when `e^{l}` underflows.
    pub fn tail_at_log(&self, log_x: f64) -> f64 {
        match *self {
            TailModel::Pareto { alpha } => (-alpha * log_x).exp(),
            TailModel::ParetoLog { alpha, beta } => {
                let log_factor = if log_x < 0.0 { (1.0 - log_x).powf(beta) } else { 1.0 };
                (-alpha * log_x).exp() * log_factor
            }
            TailModel::ParetoPerturbed { alpha, c, gamma } => {
                let bump = if log_x < 0.0 { 1.0 + c * (gamma * log_x).exp() } else { 1.0 + c };
                (-alpha * log_x).exp() * bump
            }
            TailModel::RapidZero => {
                let z = (-log_x).exp();
                if z > RAPID_SATURATION.ln() {
                    RAPID_SATURATION
                } else {
                    z.exp_m1()
                }
            }
            TailModel::SlowZero => softplus(-log_x),
        }
    }

    /// `log Π̄←(y)` where `Π̄←(y) = inf{x > 0 : Π̄(x) ≤ y}`.
    pub fn log_inverse_tail(&self, y: f64, spec: &InverseSpec) -> Result<f64> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::domain(format!("inverse tail argument must be positive and finite, got {y}")));
        }
        match *self {
            TailModel::Pareto { alpha } => Ok(-y.ln() / alpha),
            TailModel::RapidZero => Ok(-y.ln_1p().ln()),
            TailModel::SlowZero => {
                if y > 30.0 {
                    Ok(-(y + (-(-y).exp()).ln_1p()))
                } else {
                    Ok(-y.exp_m1().ln())
                }
            }
            TailModel::ParetoLog { .. } | TailModel::ParetoPerturbed { .. } => self.bisect_log_inverse(y, spec),
        }
    }

    /// `Π̄←(y)`. May underflow to zero for the slowly varying family; use
    /// [`Self::log_inverse_tail`] when forming ratios.
    pub fn eval_inverse_tail(&self, y: f64, spec: &InverseSpec) -> Result<f64> {
        match *self {
            TailModel::Pareto { alpha } => {
                if !(y > 0.0) || !y.is_finite() {
                    return Err(Error::domain(format!(
                        "inverse tail argument must be positive and finite, got {y}"
                    )));
                }
                Ok(if alpha == 1.0 { 1.0 / y } else { y.powf(-1.0 / alpha) })
            }
            TailModel::RapidZero => {
                self.log_inverse_tail(y, spec)?;
                Ok(1.0 / y.ln_1p())
            }
            TailModel::SlowZero => {
                self.log_inverse_tail(y, spec)?;
                Ok(1.0 / y.exp_m1())
            }
            _ => self.log_inverse_tail(y, spec).map(f64::exp),
        }
    }

    /// Geometric bracket expansion (factor 4) then bisection, both on `log x`.
    fn bisect_log_inverse(&self, y: f64, spec: &InverseSpec) -> Result<f64> {
        let step = 4f64.ln();
        let mut lo = spec.bracket_lo.ln();
        let mut hi = spec.bracket_hi.ln();
        let mut iterations = 0;
        // invariant once established: Π̄(e^lo) > y >= Π̄(e^hi)
        while self.tail_at_log(lo) <= y {
            hi = lo;
            lo -= step;
            iterations += 1;
            if iterations > spec.max_iter {
                return Err(Error::Inversion {
                    y,
                    lo: lo.exp(),
                    hi: hi.exp(),
                    iterations,
                });
            }
        }
        while self.tail_at_log(hi) > y {
            lo = hi;
            hi += step;
            iterations += 1;
            if iterations > spec.max_iter {
                return Err(Error::Inversion {
                    y,
                    lo: lo.exp(),
                    hi: hi.exp(),
                    iterations,
                });
            }
        }
        let mut bisections = 0;
        while hi - lo > spec.rel_tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.tail_at_log(mid) <= y {
                hi = mid;
            } else {
                lo = mid;
            }
            bisections += 1;
            if bisections > spec.max_iter {
                return Err(Error::Inversion {
                    y,
                    lo: lo.exp(),
                    hi: hi.exp(),
                    iterations: iterations + bisections,
                });
            }
        }
        Ok(hi)
    }

    /// `t Π̄(u Π̄←(y/t))` along `t_grid`; tends to `u^{-α} y` for regularly varying tails.
    pub fn rv_limit_table(&self, u: f64, y: f64, t_grid: &[f64], spec: &InverseSpec) -> Result<Vec<f64>> {
        if !(u > 0.0) || !(y > 0.0) {
            return Err(Error::domain("rv_limit_table requires u > 0 and y > 0"));
        }
        if t_grid.iter().any(|&t| !(t > 0.0)) || t_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::domain("t_grid must be strictly decreasing and positive"));
        }
        t_grid
            .iter()
            .map(|&t| match *self {
                TailModel::Pareto { alpha } => {
                    let x = self.eval_inverse_tail(y / t, spec)?;
                    Ok(t * (u * x).powf(-alpha))
                }
                _ => {
                    let lx = self.log_inverse_tail(y / t, spec)?;
                    Ok(t * self.tail_at_log(u.ln() + lx))
                }
            })
            .collect()
    }

    pub fn to_record(&self) -> TailRecord {
        let mut rec = TailRecord {
            kind: self.kind(),
            alpha: None,
            beta: None,
            c: None,
            gamma: None,
        };
        match *self {
            TailModel::Pareto { alpha } => rec.alpha = Some(alpha),
            TailModel::ParetoLog { alpha, beta } => {
                rec.alpha = Some(alpha);
                rec.beta = Some(beta);
            }
            TailModel::ParetoPerturbed { alpha, c, gamma } => {
                rec.alpha = Some(alpha);
                rec.c = Some(c);
                rec.gamma = Some(gamma);
            }
            TailModel::RapidZero | TailModel::SlowZero => {}
        }
        rec
    }

    pub fn from_record(rec: &TailRecord) -> Result<Self> {
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::domain(format!("missing field: {name}")));
        match rec.kind {
            TailKind::Pareto => TailModel::pareto(need(rec.alpha, "alpha")?),
            TailKind::ParetoLog => TailModel::pareto_log(need(rec.alpha, "alpha")?, need(rec.beta, "beta")?),
            TailKind::ParetoPerturbed => TailModel::pareto_perturbed(
                need(rec.alpha, "alpha")?,
                need(rec.c, "c")?,
                need(rec.gamma, "gamma")?,
            ),
            TailKind::RapidZero => Ok(TailModel::RapidZero),
            TailKind::SlowZero => Ok(TailModel::SlowZero),
        }
    }

    /// Flat `key=value` pairs, absent fields omitted.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        self.to_record().to_key_values()
    }

    pub fn from_key_values<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        TailModel::from_record(&TailRecord::from_key_values(pairs)?)
    }
}

/// Flat serialized form of a [`TailModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRecord {
    pub kind: TailKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl TailRecord {
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let mut out = vec![("kind".to_string(), self.kind.to_string())];
        for (k, v) in [("alpha", self.alpha), ("beta", self.beta), ("c", self.c), ("gamma", self.gamma)] {
            if let Some(v) = v {
                out.push((k.to_string(), format!("{v:?}")));
            }
        }
        out
    }

    pub fn from_key_values<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let map: BTreeMap<&str, &str> = pairs.into_iter().collect();
        let kind: TailKind = map
            .get("kind")
            .ok_or_else(|| Error::domain("missing field: kind"))?
            .parse()?;
        let num = |key: &str| -> Result<Option<f64>> {
            map.get(key)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::domain(format!("field {key}: not a number: '{s}'")))
                })
                .transpose()
        };
        Ok(TailRecord {
            kind,
            alpha: num("alpha")?,
            beta: num("beta")?,
            c: num("c")?,
            gamma: num("gamma")?,
        })
    }
}

impl TryFrom<TailRecord> for TailModel {
    type Error = Error;

    fn try_from(rec: TailRecord) -> Result<Self> {
        TailModel::from_record(&rec)
    }
}

impl From<TailModel> for TailRecord {
    fn from(m: TailModel) -> Self {
        m.to_record()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shipped() -> Vec<TailModel> {
        vec![
            TailModel::pareto(0.5).unwrap(),
            TailModel::pareto(2.0).unwrap(),
            TailModel::pareto_log(1.0, 2.0).unwrap(),
            TailModel::pareto_log(1.5, -0.5).unwrap(),
            TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap(),
            TailModel::pareto_perturbed(2.0, 3.0, 0.5).unwrap(),
            TailModel::RapidZero,
            TailModel::SlowZero,
        ]
    }

    /// Plain linear bisection for `inf{x : Π̄(x) <= y}`, independent of the
    /// log-space implementation.
    fn bisection_oracle(m: &TailModel, y: f64) -> f64 {
        // geometric midpoints so tiny inverses stay reachable
        let (mut lo, mut hi) = (1e-300f64, 1e300f64);
        for _ in 0..400 {
            let mid = (lo.sqrt() * hi.sqrt()).clamp(lo, hi);
            if m.tail(mid).unwrap() <= y {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    #[test]
    fn eval_tail_examples() {
        assert_eq!(TailModel::pareto(1.0).unwrap().tail(2.0).unwrap(), 0.5);
        let v = TailModel::pareto(2.0).unwrap().tail(0.1).unwrap();
        assert!((v - 100.0).abs() < 1e-12);
        let p = TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap();
        assert!((p.tail(0.5).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn eval_tail_rejects_nonpositive() {
        let m = TailModel::pareto(1.0).unwrap();
        assert!(matches!(m.tail(0.0), Err(Error::Domain(_))));
        assert!(matches!(m.tail(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rapid_saturates_with_flag() {
        let e = TailModel::RapidZero.eval_tail(1e-3).unwrap();
        assert!(e.saturated);
        assert_eq!(e.value, RAPID_SATURATION);
        let e = TailModel::RapidZero.eval_tail(1.0).unwrap();
        assert!(!e.saturated);
        assert!((e.value - (1f64.exp() - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn inverse_examples() {
        let s = InverseSpec::default();
        assert!((TailModel::pareto(2.0).unwrap().eval_inverse_tail(4.0, &s).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(TailModel::pareto(1.0).unwrap().eval_inverse_tail(10.0, &s).unwrap(), 0.1);
        let p = TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap();
        let oracle = bisection_oracle(&p, 3.0);
        assert!((oracle - 0.5).abs() < 1e-9);
        let got = p.eval_inverse_tail(3.0, &s).unwrap();
        assert!((got - oracle).abs() / oracle < 1e-9, "{got} vs {oracle}");
    }

    #[test]
    fn numeric_inverse_matches_oracle_on_grid() {
        let s = InverseSpec::default();
        for m in shipped() {
            for k in -4..=4 {
                let y = 10f64.powi(k) * 1.7;
                let got = m.eval_inverse_tail(y, &s).unwrap();
                let want = bisection_oracle(&m, y);
                if want <= 1e-290 {
                    // below the oracle's bracket; covered by the log-space contract tests
                    continue;
                }
                assert!((got - want).abs() / want < 1e-8, "{m:?} y={y}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn inversion_failure_carries_bracket() {
        let s = InverseSpec {
            max_iter: 64,
            ..InverseSpec::default()
        };
        let m = TailModel::pareto_log(1.0, 0.0).unwrap();
        // needs ~600 expansions by 4 to reach x ~ 1e-300
        match m.eval_inverse_tail(1e300, &s) {
            Err(Error::Inversion { lo, hi, .. }) => assert!(lo < hi),
            other => panic!("expected inversion failure, got {other:?}"),
        }
    }

    #[test]
    fn right_continuous_inverse_contract() {
        let s = InverseSpec::default();
        for m in shipped() {
            for i in 0..=48 {
                let y = 10f64.powf(-6.0 + 0.25 * i as f64);
                let lx = m.log_inverse_tail(y, &s).unwrap();
                // closed forms round to the nearest double; allow a few ulps
                let slack = if m.has_closed_form_inverse() { 1e-13 } else { 0.0 };
                let at = m.tail_at_log(lx);
                assert!(at <= y * (1.0 + slack), "{m:?} y={y}: Π̄(Π̄←(y))={at}");
                let below = m.tail_at_log(lx + (1.0 - 10.0 * s.rel_tol).ln());
                assert!(below >= y * (1.0 - slack), "{m:?} y={y}: {below}");
            }
        }
    }

    #[test]
    fn inverse_monotone_in_y() {
        let s = InverseSpec::default();
        for m in shipped() {
            let mut prev = f64::INFINITY;
            for i in 0..=96 {
                let y = 10f64.powf(-6.0 + 0.125 * i as f64);
                let lx = m.log_inverse_tail(y, &s).unwrap();
                assert!(lx <= prev, "{m:?}");
                prev = lx;
            }
        }
    }

    #[test]
    fn tails_monotone_infinite_at_zero_finite_everywhere() {
        for m in shipped() {
            let mut prev = f64::INFINITY;
            for i in 0..400 {
                let x = 10f64.powf(-3.0 + 0.015 * i as f64);
                let v = m.tail(x).unwrap();
                assert!(v.is_finite() && v <= prev, "{m:?} at {x}");
                prev = v;
            }
            assert!(m.tail_at_log(-700.0) >= 699.0, "{m:?}");
        }
    }

    #[test]
    fn log_and_direct_forms_agree() {
        for m in shipped() {
            for i in 0..50 {
                let x = 10f64.powf(-2.0 + 0.08 * i as f64);
                let d = m.tail(x).unwrap();
                let l = m.tail_at_log(x.ln());
                assert!((d - l).abs() <= 1e-12 * d.abs().max(1e-300), "{m:?} x={x}");
            }
        }
    }

    #[test]
    fn rv_limit_pareto_is_constant() {
        let s = InverseSpec::default();
        let grid: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
        let a = TailModel::pareto(1.0).unwrap().rv_limit_table(2.0, 3.0, &grid, &s).unwrap();
        assert!(a.iter().all(|v| (v - 1.5).abs() < 1e-14));
        let b = TailModel::pareto(2.0).unwrap().rv_limit_table(0.5, 1.0, &grid, &s).unwrap();
        assert!(b.iter().all(|v| (v - 4.0).abs() < 1e-13));
    }

    #[test]
    fn rv_limit_perturbed_converges() {
        // oracle: Π̄(x) = 1/x + 1 on (0,1) inverts to 1/(y-1); 2x stays below 1 for t <= 0.1
        let s = InverseSpec::default();
        let m = TailModel::pareto_perturbed(1.0, 1.0, 1.0).unwrap();
        let grid: Vec<f64> = (1..=8).map(|k| 10f64.powi(-k)).collect();
        let got = m.rv_limit_table(2.0, 1.0, &grid, &s).unwrap();
        for (t, v) in grid.iter().zip(&got) {
            let x = 1.0 / (1.0 / t - 1.0);
            let want = t * (1.0 / (2.0 * x) + 1.0);
            assert!((v - want).abs() < 1e-8 * want, "t={t}: {v} vs {want}");
        }
        assert!((got[7] - 0.5).abs() < 0.005);
    }

    #[test]
    fn rv_limit_rapid_diverges_slow_tends_to_y() {
        let s = InverseSpec::default();
        let grid: Vec<f64> = (1..=12).map(|k| 10f64.powi(-k)).collect();
        let rapid = TailModel::RapidZero.rv_limit_table(0.5, 1.0, &grid, &s).unwrap();
        assert!(rapid.windows(2).all(|w| w[1] > w[0]));
        assert!(rapid[11] > 1e6);
        let slow = TailModel::SlowZero.rv_limit_table(3.0, 2.0, &grid, &s).unwrap();
        assert!((slow[11] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn rv_limit_rejects_bad_grid() {
        let s = InverseSpec::default();
        let m = TailModel::pareto(1.0).unwrap();
        assert!(m.rv_limit_table(1.0, 1.0, &[0.1, 0.1], &s).is_err());
        assert!(m.rv_limit_table(0.0, 1.0, &[0.1], &s).is_err());
    }

    #[test]
    fn constructors_validate() {
        assert!(TailModel::pareto(0.0).is_err());
        assert!(TailModel::pareto_log(1.0, -1.0).is_err());
        assert!(TailModel::pareto_perturbed(1.0, 2.0, 2.0).is_err());
        assert!(TailModel::pareto_perturbed(1.0, -1.0, 0.5).is_err());
    }

    #[test]
    fn key_value_record_omits_absent_fields() {
        let m = TailModel::pareto_perturbed(1.0, 0.5, 1.0).unwrap();
        let kv = m.to_key_values();
        let keys: Vec<&str> = kv.iter().map(|(k, _)| k.as_str()).collect();
        assert_eq!(keys, ["kind", "alpha", "c", "gamma"]);
        let back = TailModel::from_key_values(kv.iter().map(|(k, v)| (k.as_str(), v.as_str()))).unwrap();
        assert_eq!(back, m);
        assert_eq!(TailModel::RapidZero.to_key_values().len(), 1);
        let err = TailModel::from_key_values([("kind", "pareto")]).unwrap_err();
        assert!(err.to_string().contains("missing field: alpha"));
    }

    #[test]
    fn json_uses_flat_record() {
        let m = TailModel::pareto_log(1.0, 2.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"kind":"pareto_log","alpha":1.0,"beta":2.0}"#);
        let back: TailModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<TailModel>(r#"{"kind":"pareto","alpha":-1}"#).is_err());
    }
}
