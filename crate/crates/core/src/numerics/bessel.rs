use std::f64::consts::PI;

use crate::error::{Error, Result};

const SERIES_LIMIT: f64 = 8.0;
const RECURRENCE_LIMIT: f64 = 25.0;

/// Zeroth-order Bessel function of the first kind.
///
/// Power series below `|x| = 8`, Miller's backward recurrence up to 25, Hankel's
/// asymptotic expansion beyond. Absolute error stays near 1e-15 on `|x| <= 50`.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j0 of non-finite argument {x}")));
    }
    let ax = x.abs();
    Ok(if ax < SERIES_LIMIT {
        series(ax)
    } else if ax < RECURRENCE_LIMIT {
        miller(ax)
    } else {
        asymptotic(ax)
    })
}

fn series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn miller(x: f64) -> f64 {
    let mut n = (x as usize) + 40;
    if n % 2 == 1 {
        n += 1;
    }
    let mut j_next = 0.0;
    let mut j_cur = 1e-300;
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=n).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j_cur;
        }
        if k == 1 {
            j0 = j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
        }
    }
    norm += j0;
    j0 / norm
}

fn asymptotic(x: f64) -> f64 {
    // a_k = Π_{i=1..k} (-(2i-1)²) / (k! 8^k)
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut xpow = 1.0;
    let mut last = f64::INFINITY;
    for k in 0..60usize {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= -(odd * odd) / (k as f64 * 8.0);
            xpow *= x;
        }
        let term = a / xpow;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // P collects even k with sign (-1)^{k/2}, Q odd k with sign (-1)^{(k-1)/2}
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if last < 1e-18 {
            break;
        }
    }
    let w = x - PI / 4.0;
    (2.0 / (PI * x)).sqrt() * (p * w.cos() - q * w.sin())
}
