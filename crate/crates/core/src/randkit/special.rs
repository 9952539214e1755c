//! Log-gamma, the regularized incomplete beta function and normal cdf/quantile.

use crate::error::{domain, Result};
use std::f64::consts::PI;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// zeta(2)..zeta(10); higher orders are summed directly.
const ZETA_LOW: [f64; 9] = [
    1.644_934_066_848_226_4,
    1.202_056_903_159_594_2,
    1.082_323_233_711_138_2,
    1.036_927_755_143_369_9,
    1.017_343_061_984_449_1,
    1.008_349_277_381_922_8,
    1.004_077_356_197_944_3,
    1.002_008_392_826_082_2,
    1.000_994_575_127_818_1,
];

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn zeta(k: usize) -> f64 {
    if k <= 10 {
        return ZETA_LOW[k - 2];
    }
    (1..=40).map(|n| (n as f64).powi(-(k as i32))).sum()
}

/// ln Γ(1 + z) for |z| ≤ 0.25 from the zeta series.
fn lgamma1p_series(z: f64) -> f64 {
    let mut sum = -EULER_GAMMA * z;
    // zk = (-z)^k
    let mut zk = -z;
    for k in 2..60 {
        zk *= -z;
        let term = zeta(k) * zk / k as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Stirling remainder ln Γ(x) − [(x − ½) ln x − x + ½ ln 2π], valid for x ≥ 10.
fn stirling_corr(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    r * (1.0 / 12.0
        - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 * (1.0 / 1680.0 - r2 / 1188.0))))
}

fn lgamma_lanczos(x: f64) -> f64 {
    let xm1 = x - 1.0;
    let mut series = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        series += c / (xm1 + i as f64);
    }
    let t = xm1 + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (xm1 + 0.5) * t.ln() - t + series.ln()
}

fn lgamma_pos(x: f64) -> f64 {
    if x >= 10.0 {
        (x - 0.5) * x.ln() - x + LN_SQRT_2PI + stirling_corr(x)
    } else if (x - 1.0).abs() <= 0.25 {
        lgamma1p_series(x - 1.0)
    } else if (x - 2.0).abs() <= 0.25 {
        let z = x - 2.0;
        lgamma1p_series(z) + z.ln_1p()
    } else if x < 0.5 {
        // Γ(x) = Γ(1 + x) / x keeps the tiny-x regime accurate.
        lgamma_pos(x + 1.0) - x.ln()
    } else {
        lgamma_lanczos(x)
    }
}

/// Natural log of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return domain(format!("log_gamma needs a finite x > 0, got {x}"));
    }
    Ok(lgamma_pos(x))
}

/// Unchecked variant for internal callers that already validated `x > 0`.
#[inline]
pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    lgamma_pos(x)
}

/// ln B(a, c).
pub fn log_beta(a: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && c > 0.0) {
        return domain(format!("log_beta needs positive parameters, got ({a}, {c})"));
    }
    Ok(ln_beta(a, c))
}

pub(crate) fn ln_beta(a: f64, c: f64) -> f64 {
    if a >= 10.0 && c >= 10.0 {
        let s = a + c;
        // Stirling form; avoids cancelling three large log-gammas.
        (a - 0.5) * (a / s).ln() + (c - 0.5) * (c / s).ln() - 0.5 * s.ln()
            + LN_SQRT_2PI
            + stirling_corr(a)
            + stirling_corr(c)
            - stirling_corr(s)
    } else {
        ln_gamma(a) + ln_gamma(c) - ln_gamma(a + c)
    }
}

/// ln[x^a (1 − x)^c / B(a, c)].
fn ln_power_prefix(x: f64, a: f64, c: f64) -> f64 {
    let y = 1.0 - x;
    if a >= 10.0 && c >= 10.0 {
        let s = a + c;
        let x0 = a / s;
        let y0 = c / s;
        // a ln(x/x0) + c ln(y/y0) with the ratios formed as log1p of small offsets.
        let lx = ((x - x0) / x0).ln_1p();
        let ly = ((x0 - x) / y0).ln_1p();
        0.5 * (a * c / (2.0 * PI * s)).ln() + a * lx + c * ly
            + stirling_corr(s)
            - stirling_corr(a)
            - stirling_corr(c)
    } else {
        a * x.ln() + c * y.ln() - ln_beta(a, c)
    }
}

/// Continued fraction for I_x(a, c), modified Lentz.
fn betacf(x: f64, a: f64, c: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200_000;
    let qab = a + c;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut cc = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (c - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        h *= d * cc;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        cc = 1.0 + aa / cc;
        if cc.abs() < TINY {
            cc = TINY;
        }
        d = 1.0 / d;
        let del = d * cc;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

fn inc_beta_unchecked(x: f64, a: f64, c: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + c + 2.0) {
        (ln_power_prefix(x, a, c).exp() * betacf(x, a, c) / a).clamp(0.0, 1.0)
    } else {
        let y = 1.0 - x;
        (1.0 - ln_power_prefix(y, c, a).exp() * betacf(y, c, a) / c).clamp(0.0, 1.0)
    }
}

/// Cumulative probability of a Beta(a, c) law at `x`.
pub fn reg_inc_beta(x: f64, a: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return domain(format!("reg_inc_beta needs x in [0, 1], got {x}"));
    }
    if !(a > 0.0 && c > 0.0) || !a.is_finite() || !c.is_finite() {
        return domain(format!(
            "reg_inc_beta needs finite positive parameters, got ({a}, {c})"
        ));
    }
    Ok(inc_beta_unchecked(x, a, c))
}

/// Beta cdf that also accepts a zero parameter: Beta(0, c) is a point mass
/// at 0 and Beta(a, 0) a point mass at 1. Both zero is not allowed.
pub(crate) fn beta_cdf_ext(x: f64, a: f64, c: f64) -> f64 {
    debug_assert!(a >= 0.0 && c >= 0.0 && a + c > 0.0);
    if a == 0.0 {
        return if x >= 0.0 { 1.0 } else { 0.0 };
    }
    if c == 0.0 {
        return if x >= 1.0 { 1.0 } else { 0.0 };
    }
    inc_beta_unchecked(x, a, c)
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile (Acklam's rational start, one Halley step).
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;
    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Beta(alpha, beta) law with strictly positive parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return domain(format!(
                "Beta parameters must be finite and positive, got ({alpha}, {beta})"
            ));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        inc_beta_unchecked(x.clamp(0.0, 1.0), self.alpha, self.beta)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return f64::NEG_INFINITY;
        }
        (self.alpha - 1.0) * x.ln() + (self.beta - 1.0) * (1.0 - x).ln()
            - ln_beta(self.alpha, self.beta)
    }

    /// Inverse cdf by bisection to about 1e-15.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample(&self, rng: &mut super::RngState) -> f64 {
        super::sample::beta_pair_unchecked(self.alpha, self.beta, rng).0
    }
}
