#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `zeta(k) - 1` for `k = 2, 3, ...`.
const ZETA_MINUS_ONE: [f64; 38] = [
    0.644_934_066_848_226_4,
    0.202_056_903_159_594_3,
    0.082_323_233_711_138_19,
    0.036_927_755_143_369_93,
    0.017_343_061_984_449_14,
    0.008_349_277_381_922_827,
    0.004_077_356_197_944_339,
    0.002_008_392_826_082_214,
    0.000_994_575_127_818_085_3,
    0.000_494_188_604_119_464_6,
    0.000_246_086_553_308_048_3,
    0.000_122_713_347_578_489_1,
    6.124_813_505_870_483e-5,
    3.058_823_630_702_049e-5,
    1.528_225_940_865_187e-5,
    7.637_197_637_899_762e-6,
    3.817_293_264_999_840e-6,
    1.908_212_716_553_939e-6,
    9.539_620_338_727_961e-7,
    4.769_329_867_878_065e-7,
    2.384_505_027_277_330e-7,
    1.192_199_259_653_111e-7,
    5.960_818_905_125_948e-8,
    2.980_350_351_465_228e-8,
    1.490_155_482_836_504e-8,
    7.450_711_789_835_429e-9,
    3.725_334_024_788_457e-9,
    1.862_659_723_513_049e-9,
    9.313_274_324_196_682e-10,
    4.656_629_065_033_784e-10,
    2.328_311_833_676_505e-10,
    1.164_155_017_270_052e-10,
    5.820_772_087_902_701e-11,
    2.910_385_044_497_100e-11,
    1.455_192_189_104_198e-11,
    7.275_959_835_057_481e-12,
    3.637_979_547_378_651e-12,
    1.818_989_650_307_066e-12,
];

/// Stirling-series coefficients `B_2k / (2k (2k - 1))`.
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
];

/// `B_2k / (2k)` for the digamma asymptotic series.
const DIGAMMA_ASYMPTOTIC: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
];

/// Natural log of the Gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(ln_gamma(x))
    } else {
        Err(Error::Domain {
            function: "log_gamma",
            value: x,
        })
    }
}

/// `log B(a, b) = log Γ(a) + log Γ(b) - log Γ(a + b)` for `a, b > 0`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    for v in [a, b] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain {
                function: "log_beta",
                value: v,
            });
        }
    }
    Ok(ln_beta(a, b))
}

/// Digamma `ψ(x) = d/dx log Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(digamma_unchecked(x))
    } else {
        Err(Error::Domain {
            function: "digamma",
            value: x,
        })
    }
}

/// Series part of `log Γ(2 + z)`, valid for `|z| <= 1/2`:
/// `(1 - γ) z + Σ_k (-1)^k (ζ(k) - 1) z^k / k`.
fn ln_gamma_two_plus(z: f64) -> f64 {
    // Horner in -z over the terms k >= 2, then scale by z^2
    let mut acc = 0.0;
    for (i, c) in ZETA_MINUS_ONE.iter().enumerate().rev() {
        acc = acc * -z + c / (i + 2) as f64;
    }
    (1.0 - EULER_GAMMA) * z + z * z * acc
}

pub(crate) fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x; x + 1 lands in [1, 1.5)
        return ln_gamma(x + 1.0) - x.ln();
    }
    if x < 1.5 {
        let z = x - 1.0;
        if z == 0.0 {
            return 0.0;
        }
        return -z.ln_1p() + ln_gamma_two_plus(z);
    }
    if x <= 2.5 {
        return ln_gamma_two_plus(x - 2.0);
    }
    if x < 13.0 {
        // shift down into (1.5, 2.5] and account for the product
        let mut y = x;
        let mut prod = 1.0;
        while y > 2.5 {
            y -= 1.0;
            prod *= y;
        }
        return prod.ln() + ln_gamma_two_plus(y - 2.0);
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_tail(x)
}

/// `log Γ(a + k) - log Γ(a)`, accurate when `a` is large and `k` small
/// relative to it.
pub(crate) fn ln_rising(a: f64, k: f64) -> f64 {
    debug_assert!(a > 0.0 && k >= 0.0);
    if k == 0.0 {
        return 0.0;
    }
    if a < 13.0 {
        return ln_gamma(a + k) - ln_gamma(a);
    }
    // difference of two Stirling expansions, with the leading terms
    // regrouped so nothing of size a·log(a) cancels
    let b = a + k;
    (a - 0.5) * (k / a).ln_1p() + k * b.ln() - k + stirling_tail(b) - stirling_tail(a)
}

fn stirling_tail(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for c in STIRLING.iter().rev() {
        series = series * inv2 + c;
    }
    series * inv
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 6.0 {
        let mut acc = digamma_unchecked(x + 6.0);
        for k in (1..6).rev() {
            acc -= 1.0 / (x + k as f64);
        }
        // 1/x dominates for tiny x; fold its rounding error into the small
        // part so the result is rounded once
        let q = 1.0 / x;
        let q_err = libm::fma(-q, x, 1.0) / x;
        return (acc - q_err) - q;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    for c in DIGAMMA_ASYMPTOTIC.iter().rev() {
        series = series * inv2 + c;
    }
    x.ln() - 0.5 / x - series * inv2
}
