//! Exact samplers built on the inverse-tail representation
//! `Δ_t^{(i)} = Π̄←(Γ_i / t)`, where `Γ_1 < Γ_2 < …` are unit-rate Poisson arrivals.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{RngStream, StreamRng};
use crate::tail_models::{InverseSpec, TailModel};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_CAP: usize = 1_000_000;

/// Successive unit-rate Poisson arrivals drawn from one stream.
#[derive(Debug, Clone)]
pub struct GammaArrivals {
    rng: StreamRng,
    current: f64,
}

impl GammaArrivals {
    pub fn new(stream: RngStream) -> Self {
        Self {
            rng: stream.generator(),
            current: 0.0,
        }
    }
}

impl Iterator for GammaArrivals {
    type Item = f64;

    #[inline]
    fn next(&mut self) -> Option<f64> {
        self.current += self.rng.exponential();
        Some(self.current)
    }
}

/// `Γ_1 < … < Γ_count`.
pub fn sample_gamma_arrivals(count: usize, stream: RngStream) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("count must be at least 1"));
    }
    Ok(GammaArrivals::new(stream).take(count).collect())
}

/// The `count` largest points of the Poisson process with intensity `tΠ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedSample {
    pub t: f64,
    pub gammas: Vec<f64>,
    /// `Δ_t^{(1)} ≥ Δ_t^{(2)} ≥ …`; may underflow to zero for slowly varying tails.
    pub points: Vec<f64>,
    /// `log Δ_t^{(i)}`, always finite.
    pub log_points: Vec<f64>,
    pub count: usize,
}

impl OrderedSample {
    /// `Δ^{(i)} / Δ^{(j)}` with 1-based indices, formed in log space.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.log_ratio(i, j).exp()
    }

    pub fn log_ratio(&self, i: usize, j: usize) -> f64 {
        self.log_points[i - 1] - self.log_points[j - 1]
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("t must be positive and finite, got {t}")))
    }
}

pub fn sample_ordered_points(
    model: &TailModel,
    t: f64,
    count: usize,
    stream: RngStream,
    spec: &InverseSpec,
) -> Result<OrderedSample> {
    check_t(t)?;
    let gammas = sample_gamma_arrivals(count, stream)?;
    let mut points = Vec::with_capacity(count);
    let mut log_points = Vec::with_capacity(count);
    for &g in &gammas {
        let lp = model.log_inverse_tail(g / t, spec)?;
        let p = if model.has_closed_form_inverse() {
            model.eval_inverse_tail(g / t, spec)?
        } else {
            lp.exp()
        };
        log_points.push(lp);
        points.push(p);
    }
    Ok(OrderedSample {
        t,
        gammas,
        points,
        log_points,
        count,
    })
}

/// The `(r, n)`-normalized ratio pattern `Δ^{(i)} / Δ^{(r+n)}`, `i > r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioConfiguration {
    pub r: usize,
    pub n: usize,
    /// `Δ^{(r+k)} / Δ^{(r+n)}` for `k = 1..n-1`, non-increasing, all `≥ 1`.
    pub above: Vec<f64>,
    /// `Δ^{(r+n+j)} / Δ^{(r+n)}` for `j ≥ 1` while above `epsilon`.
    pub below: Vec<f64>,
    pub epsilon: f64,
    /// `W_{r,n}(t) = Δ^{(r+n)} / Δ^{(r)}`, absent for `r = 0`.
    pub w_rn: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn sample_ratio_configuration(
    model: &TailModel,
    t: f64,
    r: usize,
    n: usize,
    epsilon: f64,
    stream: RngStream,
    cap: usize,
    spec: &InverseSpec,
) -> Result<RatioConfiguration> {
    check_t(t)?;
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if cap < r + n + 1 {
        return Err(Error::domain(format!("cap must be at least r + n + 1 = {}", r + n + 1)));
    }
    let mut arrivals = GammaArrivals::new(stream);
    let mut log_points = Vec::with_capacity(r + n);
    for g in arrivals.by_ref().take(r + n) {
        log_points.push(model.log_inverse_tail(g / t, spec)?);
    }
    let reference = log_points[r + n - 1];
    let above = log_points[r..r + n - 1].iter().map(|lp| (lp - reference).exp()).collect();
    let w_rn = (r >= 1).then(|| (reference - log_points[r - 1]).exp());
    let log_eps = epsilon.ln();
    let mut below = Vec::new();
    let mut generated = r + n;
    loop {
        if generated >= cap {
            return Err(Error::Truncated {
                cap,
                epsilon,
                partial: Box::new(RatioConfiguration {
                    r,
                    n,
                    above,
                    below,
                    epsilon,
                    w_rn,
                }),
            });
        }
        let g = arrivals.next().expect("arrivals are unbounded");
        generated += 1;
        let lr = model.log_inverse_tail(g / t, spec)? - reference;
        if lr <= log_eps {
            break;
        }
        below.push(lr.exp());
    }
    Ok(RatioConfiguration {
        r,
        n,
        above,
        below,
        epsilon,
        w_rn,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NbMethod {
    /// Normalized arrivals `(Γ_{n+j}/Γ_n)^{-1/α}`.
    LimitRatios,
    /// Gamma-mixed Poisson count with i.i.d. truncated power-law points.
    MixedPoisson,
}

impl NbMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            NbMethod::LimitRatios => "limit_ratios",
            NbMethod::MixedPoisson => "mixed_poisson",
        }
    }
}

impl std::str::FromStr for NbMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "limit_ratios" | "limitratios" | "ratios" => Ok(NbMethod::LimitRatios),
            "mixed_poisson" | "mixedpoisson" | "mixed" => Ok(NbMethod::MixedPoisson),
            other => Err(Error::domain(format!("unknown negative binomial method '{other}'"))),
        }
    }
}

/// One draw of the negative binomial process `BN(n, Λ*)` restricted to `(ε, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbSample {
    pub n: usize,
    pub alpha: f64,
    /// Non-increasing, all in `(ε, 1]`.
    pub points: Vec<f64>,
    pub epsilon: f64,
    pub method: NbMethod,
}

impl NbSample {
    pub fn count_above(&self, a: f64) -> usize {
        self.points.iter().take_while(|&&p| p > a).count()
    }
}

pub fn sample_negbin_process(
    n: usize,
    alpha: f64,
    epsilon: f64,
    method: NbMethod,
    stream: RngStream,
) -> Result<NbSample> {
    if n == 0 {
        return Err(Error::domain("n must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::domain(format!("alpha must be positive and finite, got {alpha}")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let points = match method {
        NbMethod::LimitRatios => {
            let mut arrivals = GammaArrivals::new(stream);
            let base = arrivals.nth(n - 1).expect("arrivals are unbounded");
            let ln_base = base.ln();
            // (Γ_{n+j}/Γ_n)^{-1/α} > ε  ⇔  Γ_{n+j} < Γ_n ε^{-α}
            let stop = base * epsilon.powf(-alpha);
            arrivals
                .take_while(|&g| g < stop)
                .map(|g| (-(g.ln() - ln_base) / alpha).exp())
                .filter(|&p| p > epsilon)
                .collect()
        }
        NbMethod::MixedPoisson => {
            let mut rng = stream.generator();
            let mixing = rng.gamma_int(n as u32);
            let span = epsilon.powf(-alpha) - 1.0;
            let mean = mixing * span;
            let count = Poisson::new(mean)
                .map_err(|e| Error::domain(format!("poisson mean {mean}: {e}")))?
                .sample(&mut rng) as usize;
            let mut pts: Vec<f64> = (0..count)
                .map(|_| (1.0 + rng.uniform() * span).powf(-1.0 / alpha))
                .filter(|&p| p > epsilon)
                .collect();
            pts.sort_by(|a, b| b.total_cmp(a));
            pts
        }
    };
    Ok(NbSample {
        n,
        alpha,
        points,
        epsilon,
        method,
    })
}
