//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-10,
            max_depth: 48,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol <= 1e-8 && self.rel_tol > 0.0 && self.rel_tol <= 1e-8) {
            return Err(Error::domain("quadrature tolerances must lie in (0, 1e-8]"));
        }
        if self.max_depth == 0 {
            return Err(Error::domain("quadrature max_depth must be positive"));
        }
        Ok(())
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Cap on bisections per call, so singular integrands fail instead of
/// refining every subinterval to `max_depth`.
pub const MAX_SUBDIVISIONS: usize = 20_000;

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    depth: u32,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        // Gauss nodes sit at odd Kronrod indices
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// `∫_a^b f`. The integrand is never evaluated at the endpoints.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadSpec) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if b < a {
        return integrate(f, b, a, spec).map(|v| -v);
    }
    let (value, error) = kronrod15(&f, a, b);
    let mut segments = vec![Segment {
        a,
        b,
        value,
        error,
        depth: 0,
    }];
    for _ in 0..=MAX_SUBDIVISIONS {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::INFINITY,
                requested: spec.abs_tol,
            });
        }
        let target = spec.abs_tol.max(spec.rel_tol * total.abs());
        if err <= target {
            return Ok(total);
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.depth < spec.max_depth)
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i);
        let Some(i) = worst else {
            return Err(Error::Quadrature {
                achieved: err,
                requested: target,
            });
        };
        let s = segments.swap_remove(i);
        let mid = 0.5 * (s.a + s.b);
        for (lo, hi) in [(s.a, mid), (mid, s.b)] {
            let (value, error) = kronrod15(&f, lo, hi);
            segments.push(Segment {
                a: lo,
                b: hi,
                value,
                error,
                depth: s.depth + 1,
            });
        }
    }
    let total: f64 = segments.iter().map(|s| s.value).sum();
    let err: f64 = segments.iter().map(|s| s.error).sum();
    Err(Error::Quadrature {
        achieved: err,
        requested: spec.abs_tol.max(spec.rel_tol * total.abs()),
    })
}
