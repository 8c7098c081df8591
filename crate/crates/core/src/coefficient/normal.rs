//! Inverse of the standard normal CDF.
//!
//! Implementation of Wichura's algorithm AS 241 (`PPND16`, Applied
//! Statistics 37, 1988), which gives about 16 significant digits over
//! the whole open unit interval. Three rational approximations are used:
//! a central one for `|u - 0.5| <= 0.425` and two tail approximations in
//! the variable `r = sqrt(-ln(min(u, 1 - u)))`, split at `r = 5`.

#![allow(clippy::excessive_precision)]

use super::CoefficientError;

const SPLIT1: f64 = 0.425;
const SPLIT2: f64 = 5.0;
const CONST1: f64 = 0.180625;
const CONST2: f64 = 1.6;

// Central region, |q| <= 0.425.
const A: [f64; 8] = [
    3.387_132_872_796_366_608_0e0,
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
    6.871_870_074_920_579_083_0e2,
    5.394_196_021_424_751_107_7e3,
    2.121_379_430_158_659_586_7e4,
    3.930_789_580_009_271_061_0e4,
    2.872_908_573_572_194_267_4e4,
    5.226_495_278_852_854_561_0e3,
];

// Intermediate tail, r <= 5.
const C: [f64; 8] = [
    1.423_437_110_749_683_577_34e0,
    4.630_337_846_156_545_295_90e0,
    5.769_497_221_460_691_405_50e0,
    3.647_848_324_763_204_605_04e0,
    1.270_458_252_452_368_382_58e0,
    2.417_807_251_774_506_117_70e-1,
    2.272_384_498_926_918_458_33e-2,
    7.745_450_142_783_414_076_40e-4,
];
const D: [f64; 8] = [
    1.0,
    2.053_191_626_637_758_821_87e0,
    1.676_384_830_183_803_849_40e0,
    6.897_673_349_851_000_045_50e-1,
    1.481_039_764_274_800_745_90e-1,
    1.519_866_656_361_645_719_66e-2,
    5.475_938_084_995_344_946_00e-4,
    1.050_750_071_644_416_843_24e-9,
];

// Far tail, r > 5.
const E: [f64; 8] = [
    6.657_904_643_501_103_777_20e0,
    5.463_784_911_164_114_369_90e0,
    1.784_826_539_917_291_335_80e0,
    2.965_605_718_285_048_912_30e-1,
    2.653_218_952_657_612_309_30e-2,
    1.242_660_947_388_078_438_60e-3,
    2.711_555_568_743_487_578_15e-5,
    2.010_334_399_292_288_132_65e-7,
];
const F: [f64; 8] = [
    1.0,
    5.998_322_065_558_879_376_90e-1,
    1.369_298_809_227_358_053_10e-1,
    1.487_536_129_085_061_485_25e-2,
    7.868_691_311_456_132_591_00e-4,
    1.846_318_317_510_054_681_80e-5,
    1.421_511_758_316_445_888_70e-7,
    2.044_263_103_389_939_785_64e-15,
];

#[inline]
fn horner(coeffs: &[f64; 8], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Returns `t` with `Phi(t) = u` for the standard normal CDF `Phi`.
///
/// Errors if `u` is not strictly inside `(0, 1)` (the quantile is infinite
/// at the end points).
pub fn inverse_normal_cdf(u: f64) -> Result<f64, CoefficientError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(CoefficientError::QuantileDomain(u));
    }
    let q = u - 0.5;
    if q.abs() <= SPLIT1 {
        let r = CONST1 - q * q;
        return Ok(q * horner(&A, r) / horner(&B, r));
    }
    let tail = if q < 0.0 { u } else { 1.0 - u };
    let r = (-tail.ln()).sqrt();
    let value = if r <= SPLIT2 {
        let r = r - CONST2;
        horner(&C, r) / horner(&D, r)
    } else {
        let r = r - SPLIT2;
        horner(&E, r) / horner(&F, r)
    };
    Ok(if q < 0.0 { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_is_zero() {
        assert_eq!(inverse_normal_cdf(0.5).unwrap(), 0.0);
    }

    #[test]
    fn rejects_closed_endpoints() {
        for u in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(inverse_normal_cdf(u).is_err(), "u = {u}");
        }
    }

    #[test]
    fn known_quantiles() {
        // 97.5% two-sided critical value.
        assert!((inverse_normal_cdf(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((inverse_normal_cdf(0.841_344_746).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn odd_symmetry() {
        for k in 1..1000 {
            let u = k as f64 / 1000.0;
            let s = inverse_normal_cdf(u).unwrap() + inverse_normal_cdf(1.0 - u).unwrap();
            assert!(s.abs() <= 1e-9, "u = {u}: {s}");
        }
    }
}
