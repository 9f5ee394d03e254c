//! Standard normal and Student-t primitives on the unit scale.

use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{PI, SQRT_2};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

pub(crate) fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

/// Inverse of the standard normal cdf (Wichura's AS 241, PPND16).
#[allow(clippy::excessive_precision)] // coefficients as published
pub(crate) fn normal_quantile(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_608,
        1.331_416_678_917_843_774_5e2,
        1.971_590_950_306_551_442_7e3,
        1.373_169_376_550_946_112_5e4,
        4.592_195_393_154_987_145_7e4,
        6.726_577_092_700_870_085_3e4,
        3.343_057_558_358_812_810_5e4,
        2.509_080_928_730_122_672_7e3,
    ];
    const B: [f64; 8] = [
        1.0,
        4.231_333_070_160_091_125_2e1,
        6.871_870_074_920_579_083e2,
        5.394_196_021_424_751_107_7e3,
        2.121_379_430_158_659_586_7e4,
        3.930_789_580_009_271_061e4,
        2.872_908_573_572_194_267_4e4,
        5.226_495_278_852_854_561e3,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_577_34,
        4.630_337_846_156_545_295_9,
        5.769_497_221_460_691_405_5,
        3.647_848_324_763_204_605_04,
        1.270_458_252_452_368_382_58,
        2.417_807_251_774_506_117_7e-1,
        2.272_384_498_926_918_458_33e-2,
        7.745_450_142_783_414_076_4e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_758_821_87,
        1.676_384_830_183_803_849_4,
        6.897_673_349_851_000_045_5e-1,
        1.481_039_764_274_800_745_9e-1,
        1.519_866_656_361_645_719_66e-2,
        5.475_938_084_995_344_946e-4,
        1.050_750_071_644_416_843_24e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103_777_2,
        5.463_784_911_164_114_369_9,
        1.784_826_539_917_291_335_8,
        2.965_605_718_285_048_912_3e-1,
        2.653_218_952_657_612_309_3e-2,
        1.242_660_947_388_078_438_6e-3,
        2.711_555_568_743_487_578_15e-5,
        2.010_334_399_292_288_132_65e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        5.998_322_065_558_879_376_9e-1,
        1.369_298_809_227_358_053_1e-1,
        1.487_536_129_085_061_485_25e-2,
        7.868_691_311_456_132_591e-4,
        1.846_318_317_510_054_681_8e-5,
        1.421_511_758_316_445_888_7e-7,
        2.044_263_103_389_939_785_64e-15,
    ];

    fn ratio(num: &[f64; 8], den: &[f64; 8], r: f64) -> f64 {
        let n = num.iter().rev().fold(0.0, |acc, c| acc * r + c);
        let d = den.iter().rev().fold(0.0, |acc, c| acc * r + c);
        n / d
    }

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * ratio(&A, &B, r);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let x = if r <= 5.0 {
        r -= 1.6;
        ratio(&C, &D, r)
    } else {
        r -= 5.0;
        ratio(&E, &F, r)
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}

/// Upper-tail inverse of the standard normal: the `z` with `P(Z > z) = tail`.
pub(crate) fn normal_isf(tail: f64) -> f64 {
    -normal_quantile(tail)
}

pub(crate) fn t_ln_norm(dof: f64) -> f64 {
    ln_gamma(0.5 * (dof + 1.0)) - ln_gamma(0.5 * dof) - 0.5 * (dof * PI).ln()
}

pub(crate) fn t_pdf(dof: f64, x: f64) -> f64 {
    (t_ln_norm(dof) - 0.5 * (dof + 1.0) * (x * x / dof).ln_1p()).exp()
}

/// `P(T > x)` for a standard Student-t.
pub(crate) fn t_sf(dof: f64, x: f64) -> f64 {
    let x2 = x * x;
    let near = x2 / (dof + x2);
    if near < 0.5 {
        // I_{x²/(ν+x²)}(1/2, ν/2) is the two-sided central mass
        let central = beta_reg(0.5, 0.5 * dof, near);
        if x >= 0.0 {
            0.5 - 0.5 * central
        } else {
            0.5 + 0.5 * central
        }
    } else {
        let tail = 0.5 * beta_reg(0.5 * dof, 0.5, dof / (dof + x2));
        if x >= 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }
}

pub(crate) fn t_cdf(dof: f64, x: f64) -> f64 {
    t_sf(dof, -x)
}

/// Upper-tail inverse of the standard Student-t by bracketed bisection.
pub(crate) fn t_isf(dof: f64, tail: f64) -> f64 {
    if tail == 0.5 {
        return 0.0;
    }
    if tail > 0.5 {
        return -t_isf(dof, 1.0 - tail);
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while t_sf(dof, hi) > tail {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return f64::INFINITY;
        }
    }
    // bisect down to adjacent floats; 200 halvings cover any finite bracket
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if t_sf(dof, mid) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
