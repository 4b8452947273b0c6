//! Closed-form small-time limit laws for ratios of ordered points.
//!
//! Notation: `Λ(dx) = α x^{-α-1} dx` on `(0, ∞)`; `B_{r,n}` is Beta(r, n);
//! `W_{r,n} = B_{r,n}^{1/α}`; `J(u)` is `Λ` restricted to `(1, 1/u)` and
//! normalized; `L` is `Λ` restricted to `(1, ∞)`; `K = 1/L`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{integrate, QuadSpec};
use crate::special::{self, binomial, gamma_p};

pub use crate::special::incomplete_beta;

/// Parameters selecting one limit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub alpha: f64,
    pub r: u32,
    pub n: u32,
    /// Conditioning value for `J(u)`, in `(0, 1)`.
    pub u: f64,
    /// Conditioning level for the conditional gamma law.
    pub z: f64,
    /// Laplace argument.
    pub lambda: f64,
}

impl LawSpec {
    /// Parameters for the `W_{r,n}` law; the other fields take neutral values.
    pub fn w(alpha: f64, r: u32, n: u32) -> Self {
        Self {
            alpha,
            r,
            n,
            u: 0.5,
            z: 1.0,
            lambda: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.n == 0 {
            return Err(Error::domain("n must be at least 1"));
        }
        if !(self.u > 0.0 && self.u < 1.0) {
            return Err(Error::domain(format!("u must lie strictly inside (0, 1), got {}", self.u)));
        }
        if !(self.z > 0.0) {
            return Err(Error::domain("z must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::domain("lambda must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityCdf {
    pub density: f64,
    pub cdf: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")))
    }
}

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Law of `W_{r,n} = B_{r,n}^{1/α}` at `w ∈ (0, 1)`.
pub fn w_law(spec: &LawSpec, w: f64) -> Result<DensityCdf> {
    check_alpha(spec.alpha)?;
    if spec.r == 0 {
        return Err(Error::domain("W_{r,n} is undefined for r = 0"));
    }
    if spec.n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    check_unit_open("w", w)?;
    let (alpha, r, n) = (spec.alpha, spec.r as f64, spec.n as f64);
    let wa = w.powf(alpha);
    let density = (1.0 - wa).powf(n - 1.0) * alpha * w.powf(alpha * r - 1.0) / special::beta(r, n);
    let cdf = incomplete_beta(r, n, wa)?;
    Ok(DensityCdf { density, cdf })
}

/// CDF of `W_{r,n}` on the whole real line.
pub fn w_cdf(alpha: f64, r: u32, n: u32, w: f64) -> f64 {
    if w <= 0.0 {
        0.0
    } else if w >= 1.0 {
        1.0
    } else {
        incomplete_beta(r as f64, n as f64, w.powf(alpha)).unwrap_or(f64::NAN)
    }
}

/// Law of `J(u)`: `Λ` restricted to `(1, 1/u)`, normalized by `1 - u^α`.
pub fn j_law(spec: &LawSpec, x: f64) -> Result<DensityCdf> {
    check_alpha(spec.alpha)?;
    check_unit_open("u", spec.u)?;
    if !(x > 0.0) {
        return Err(Error::domain("x must be positive"));
    }
    let (alpha, u) = (spec.alpha, spec.u);
    let mass = 1.0 - u.powf(alpha);
    let upper = 1.0 / u;
    let density = if x > 1.0 && x < upper {
        alpha * x.powf(-alpha - 1.0) / mass
    } else {
        0.0
    };
    let cdf = if x <= 1.0 {
        0.0
    } else {
        ((1.0 - x.powf(-alpha)) / mass).clamp(0.0, 1.0)
    };
    Ok(DensityCdf { density, cdf })
}

/// Law of `L`: Pareto(α) on `(1, ∞)`.
pub fn l_law(alpha: f64, x: f64) -> Result<DensityCdf> {
    check_alpha(alpha)?;
    if !(x >= 1.0) {
        return Err(Error::domain(format!("L is supported on [1, inf), got x = {x}")));
    }
    Ok(DensityCdf {
        density: alpha * x.powf(-alpha - 1.0),
        cdf: 1.0 - x.powf(-alpha),
    })
}

/// `P(K^{(n)}_{r+n-1} ≤ w)`: the n-th largest of `r+n-1` i.i.d. `K` with `P(K ≤ w) = w^α`.
pub fn k_orderstat_cdf(r: u32, n: u32, alpha: f64, w: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r == 0 || n == 0 {
        return Err(Error::domain("r and n must be at least 1"));
    }
    check_unit_open("w", w)?;
    let m = (r + n - 1) as u64;
    let p = w.powf(alpha);
    // at least r of the m variables fall at or below w
    Ok((r as u64..=m)
        .map(|k| binomial(m, k) * p.powi(k as i32) * (1.0 - p).powi((m - k) as i32))
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// `P(1 / L^{(r)}_{r+n-1} ≤ w)` where `L^{(r)}_{m}` is the r-th largest of `m` i.i.d. `L`.
pub fn reciprocal_l_orderstat_cdf(r: u32, n: u32, alpha: f64, w: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r == 0 || n == 0 {
        return Err(Error::domain("r and n must be at least 1"));
    }
    check_unit_open("w", w)?;
    let m = (r + n - 1) as u64;
    let exceed = w.powf(alpha); // P(L ≥ 1/w)
    // complement: fewer than r of the L's reach 1/w
    let fewer: f64 = (0..r as u64)
        .map(|k| binomial(m, k) * exceed.powi(k as i32) * (1.0 - exceed).powi((m - k) as i32))
        .sum();
    Ok((1.0 - fewer).clamp(0.0, 1.0))
}

/// CDF of `Y_k ~ Beta(kα, 1)`, the limit of `Δ^{(k+1)}/Δ^{(k)}`. `α = 0` is a
/// point mass at 0 and `α = ∞` a point mass at 1.
pub fn successive_ratio_cdf(k: u32, alpha: f64, y: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    if !(alpha >= 0.0) {
        return Err(Error::domain("alpha must be nonnegative"));
    }
    if alpha == 0.0 {
        return Ok(if y >= 0.0 { 1.0 } else { 0.0 });
    }
    if alpha.is_infinite() {
        return Ok(if y >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok(if y <= 0.0 {
        0.0
    } else if y >= 1.0 {
        1.0
    } else {
        y.powf(k as f64 * alpha)
    })
}

pub fn successive_ratio_density(k: u32, alpha: f64, y: f64) -> f64 {
    if y <= 0.0 || y >= 1.0 {
        return 0.0;
    }
    let e = k as f64 * alpha;
    e * y.powf(e - 1.0)
}

/// Limit of `P(Δ^{(r)}/Δ^{(r+1)} > x)`, which is `x^{-rα}` for `x ≥ 1`.
pub fn ratio_tail_n1(r: u32, alpha: f64, x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        x.powf(-(r as f64) * alpha)
    }
}

/// `P(Γ_{r+n} ≤ w^{-α} z)`.
pub fn conditional_gamma_cdf(r: u32, n: u32, alpha: f64, w: f64, z: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if r + n == 0 {
        return Err(Error::domain("r + n must be at least 1"));
    }
    check_unit_open("w", w)?;
    if !(z >= 0.0) {
        return Err(Error::domain("z must be nonnegative"));
    }
    gamma_p((r + n) as f64, w.powf(-alpha) * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeForm {
    /// `f(x) = λ 1_{(a,b)}(x)`
    IndicatorStep,
    /// `f(x) = λ x 1_{(a,b)}(x)`
    LinearRamp,
}

impl std::str::FromStr for ProbeForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "indicator_step" | "indicator" | "step" => Ok(ProbeForm::IndicatorStep),
            "linear_ramp" | "ramp" | "linear" => Ok(ProbeForm::LinearRamp),
            other => Err(Error::domain(format!("unknown probe form '{other}'"))),
        }
    }
}

/// Nonnegative test function for Laplace functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceProbe {
    pub form: ProbeForm,
    /// `λ_f`; may be `+∞` for void-probability probes.
    pub amplitude: f64,
    pub a: f64,
    /// May be `+∞`.
    pub b: f64,
}

impl LaplaceProbe {
    pub fn new(form: ProbeForm, amplitude: f64, a: f64, b: f64) -> Result<Self> {
        let p = Self { form, amplitude, a, b };
        p.validate()?;
        Ok(p)
    }

    pub fn step(amplitude: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(ProbeForm::IndicatorStep, amplitude, a, b)
    }

    pub fn ramp(amplitude: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(ProbeForm::LinearRamp, amplitude, a, b)
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self {
            form: ProbeForm::IndicatorStep,
            amplitude: 0.0,
            a: 0.0,
            b: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) {
            return Err(Error::domain("probe amplitude must be nonnegative"));
        }
        if !(self.a >= 0.0 && self.a.is_finite() && self.a < self.b) {
            return Err(Error::domain("probe interval must satisfy 0 <= a < b"));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        if x > self.a && x < self.b && self.amplitude > 0.0 {
            match self.form {
                ProbeForm::IndicatorStep => self.amplitude,
                ProbeForm::LinearRamp => self.amplitude * x,
            }
        } else {
            0.0
        }
    }

    /// `∫_{(lo,hi) ∩ (a,b)} (1 - e^{-f(x)}) Λ(dx)`; may be `+∞` when the
    /// window reaches down to 0.
    pub fn lambda_mass(&self, alpha: f64, lo: f64, hi: f64, quad: &QuadSpec) -> Result<f64> {
        let l = self.a.max(lo);
        let h = self.b.min(hi);
        if !(l < h) || self.amplitude == 0.0 {
            return Ok(0.0);
        }
        let power_mass = |l: f64, h: f64| -> f64 {
            let upper = if h.is_infinite() { 0.0 } else { h.powf(-alpha) };
            l.powf(-alpha) - upper
        };
        if l == 0.0 {
            return match self.form {
                ProbeForm::IndicatorStep => Ok(f64::INFINITY),
                ProbeForm::LinearRamp if self.amplitude.is_infinite() => Ok(f64::INFINITY),
                ProbeForm::LinearRamp => Err(Error::domain("linear ramp probe needs a > 0 to integrate")),
            };
        }
        if self.amplitude.is_infinite() {
            return Ok(power_mass(l, h));
        }
        match self.form {
            ProbeForm::IndicatorStep => Ok(-(-self.amplitude).exp_m1() * power_mass(l, h)),
            ProbeForm::LinearRamp => {
                if h.is_infinite() {
                    return Err(Error::domain("linear ramp probe needs a finite upper bound"));
                }
                let lam = self.amplitude;
                integrate(
                    |x: f64| -(-lam * x).exp_m1() * alpha * x.powf(-alpha - 1.0),
                    l,
                    h,
                    quad,
                )
            }
        }
    }
}

/// Laplace functional of `BN(n, Λ*)`: `(1 + ∫_0^1 (1 - e^{-f}) dΛ)^{-n}`.
pub fn nb_laplace(n: u32, alpha: f64, probe: &LaplaceProbe, quad: &QuadSpec) -> Result<f64> {
    check_alpha(alpha)?;
    probe.validate()?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let mass = probe.lambda_mass(alpha, 0.0, 1.0, quad)?;
    if mass.is_infinite() {
        return Ok(0.0);
    }
    Ok((1.0 + mass).powi(-(n as i32)))
}

/// Limit Laplace functional of the full `(r, r+n)` ratio pattern:
/// above-1 factor, the unit point, and the negative binomial part.
pub fn limit_laplace_full(r: u32, n: u32, alpha: f64, probe: &LaplaceProbe, quad: &QuadSpec) -> Result<f64> {
    check_alpha(alpha)?;
    probe.validate()?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    let below = nb_laplace(r + n, alpha, probe, quad)?;
    let unit = (-probe.eval(1.0)).exp();
    let above = if n == 1 {
        1.0
    } else if r == 0 {
        // E e^{-f(L)} = 1 - ∫_1^∞ (1 - e^{-f}) dΛ
        (1.0 - probe.lambda_mass(alpha, 1.0, f64::INFINITY, quad)?).powi(n as i32 - 1)
    } else {
        above_factor_mixed(r, n, alpha, probe, quad)?
    };
    Ok(above * unit * below)
}

/// `E[ (E[e^{-f(J(u))}] at u = B_{r,n}^{1/α})^{n-1} ]`, outer integral over the Beta(r, n) law.
fn above_factor_mixed(r: u32, n: u32, alpha: f64, probe: &LaplaceProbe, quad: &QuadSpec) -> Result<f64> {
    let (rf, nf) = (r as f64, n as f64);
    let ln_norm = special::ln_beta(rf, nf);
    // E e^{-f(J(u))} with u^α = s: 1 - ∫_1^{s^{-1/α}} (1 - e^{-f}) dΛ / (1 - s)
    let inner = |s: f64| -> Result<f64> {
        let upper = s.powf(-1.0 / alpha);
        let m = probe.lambda_mass(alpha, 1.0, upper, quad)?;
        Ok(1.0 - m / (1.0 - s))
    };
    let mut cuts = vec![0.0, 1.0];
    for edge in [probe.a, probe.b] {
        if edge > 1.0 && edge.is_finite() {
            cuts.push(edge.powf(-alpha));
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let failure = RefCell::new(None);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let part = integrate(
            |s: f64| {
                let density = ((rf - 1.0) * s.ln() + (nf - 1.0) * (-s).ln_1p() - ln_norm).exp();
                match inner(s) {
                    Ok(v) => density * v.powi(n as i32 - 1),
                    Err(e) => {
                        failure.borrow_mut().get_or_insert(e);
                        0.0
                    }
                }
            },
            w[0],
            w[1],
            quad,
        );
        total += part?;
    }
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    Ok(total)
}

/// `Φ(λ, u) = ∫_1^{1/u} e^{-λx} Λ(dx) / (1 - u^α)`.
pub fn phi_conditional(lambda: f64, u: f64, alpha: f64, quad: &QuadSpec) -> Result<f64> {
    check_alpha(alpha)?;
    check_unit_open("u", u)?;
    if !(lambda >= 0.0) {
        return Err(Error::domain("lambda must be nonnegative"));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let mass = 1.0 - u.powf(alpha);
    let v = integrate(|x: f64| (-lambda * x).exp() * alpha * x.powf(-alpha - 1.0), 1.0, 1.0 / u, quad)?;
    Ok(v / mass)
}
