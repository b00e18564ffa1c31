//! Matrix exponential by scaling and squaring with a degree-adaptive Padé
//! approximant (Higham 2005, "The scaling and squaring method for the matrix
//! exponential revisited").

use super::{ensure_finite, ensure_square, norm1};
use crate::{Error, RealMatrix, Result};

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Computes `exp(t·M)`.
///
/// Fails with [`Error::MagnitudeOverflow`] when `|t|·‖M‖` or any
/// intermediate result leaves the finite range.
pub fn expm(m: &RealMatrix, t: f64) -> Result<RealMatrix> {
    let n = ensure_square(m)?;
    ensure_finite(m)?;
    if !t.is_finite() {
        return Err(Error::NonFinite);
    }
    if t == 0.0 {
        return Ok(RealMatrix::identity(n, n));
    }
    let a = m * t;
    let norm = norm1(&a);
    if !norm.is_finite() {
        return Err(Error::MagnitudeOverflow);
    }

    for &(degree, theta) in &THETA[..4] {
        if norm <= theta {
            return pade(&a, degree);
        }
    }

    let theta13 = THETA[4].1;
    let s = if norm > theta13 {
        (norm / theta13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    if s > 1020 {
        return Err(Error::MagnitudeOverflow);
    }
    let scaled = &a * 2f64.powi(-s);
    let mut result = pade(&scaled, 13)?;
    for _ in 0..s {
        result = &result * &result;
        if !result.iter().all(|x| x.is_finite()) {
            return Err(Error::MagnitudeOverflow);
        }
    }
    Ok(result)
}

fn pade(a: &RealMatrix, degree: usize) -> Result<RealMatrix> {
    let n = a.nrows();
    let ident = RealMatrix::identity(n, n);
    let a2 = a * a;
    let (u, v) = match degree {
        3 | 5 | 7 | 9 => {
            let b: &[f64] = match degree {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            // Even powers I, A², A⁴, ...
            let mut powers = vec![ident.clone(), a2.clone()];
            while powers.len() <= degree / 2 {
                let next = powers.last().unwrap() * &a2;
                powers.push(next);
            }
            let mut odd = RealMatrix::zeros(n, n);
            let mut even = RealMatrix::zeros(n, n);
            for (k, p) in powers.iter().enumerate() {
                odd += p * b[2 * k + 1];
                even += p * b[2 * k];
            }
            (a * odd, even)
        }
        13 => {
            let b = &B13;
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
            let u_tail = &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1];
            let u = a * (&a6 * u_inner + u_tail);
            let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
            let v_tail = &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
            (u, &a6 * v_inner + v_tail)
        }
        _ => unreachable!("unsupported Padé degree"),
    };
    let denom = &v - &u;
    let numer = &v + &u;
    denom
        .lu()
        .solve(&numer)
        .filter(|r| r.iter().all(|x| x.is_finite()))
        .ok_or(Error::MagnitudeOverflow)
}
