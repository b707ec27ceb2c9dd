//! Window filters.
//!
//! [`FilterH`] is a time-domain window that is flat on most of `[0, T]` and
//! has a compactly supported spectrum. [`FilterG`] is a flat-top frequency
//! window whose time response is a scaled B-spline times a sinc; shifted and
//! periodized copies of it define the `B` hash bins.

mod bspline;
mod cache;
mod freq;
mod time;

pub use bspline::{cardinal_bspline, scaled_box_power};
pub use cache::{load_h_table, save_h_table, CACHE_MAGIC};
pub use freq::{FilterG, GKnobs};
pub use time::{FilterH, HKnobs};

/// Unnormalized `sin(x)/x`.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Normalized `sin(πx)/(πx)`.
#[inline]
pub fn sinc_normalized(x: f64) -> f64 {
    sinc(std::f64::consts::PI * x)
}

/// Smallest power of two that is ≥ `x` (and ≥ 1).
pub fn next_pow2(x: f64) -> u64 {
    let mut p = 1u64;
    while (p as f64) < x {
        p <<= 1;
    }
    p
}

/// Smallest even integer ≥ `x` (and ≥ 2).
pub fn next_even(x: f64) -> u32 {
    let c = x.ceil().max(2.0) as u32;
    c + (c % 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert_eq!(next_pow2(1.0), 1);
        assert_eq!(next_pow2(4.0), 4);
        assert_eq!(next_pow2(4.5), 8);
        assert_eq!(next_even(7.6), 8);
        assert_eq!(next_even(8.0), 8);
        assert_eq!(next_even(0.3), 2);
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc_normalized(1.0)).abs() < 1e-15);
    }
}
