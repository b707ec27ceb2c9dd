//! Cardinal B-splines from the divided-difference formula.

/// `ln C(n, i)`.
fn ln_binomial(n: u32, i: u32) -> f64 {
    ln_factorial(n) - ln_factorial(i) - ln_factorial(n - i)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|v| (v as f64).ln()).sum()
}

/// Cardinal B-spline of order `l` (degree `l−1`) supported on `[0, l]`:
/// `N_l(x) = 1/(l−1)! · Σ_{i=0}^{l} (−1)^i C(l,i) (x−i)_+^{l−1}`.
///
/// The sum is taken on the nearer half of the support (the spline is
/// symmetric about `l/2`), which keeps the alternating terms small. Binomials
/// and the factorial go through logarithms once `l > 20`.
pub fn cardinal_bspline(l: u32, x: f64) -> f64 {
    assert!(l >= 1, "B-spline order must be positive");
    let lf = l as f64;
    if !(x > 0.0 && x < lf) {
        return 0.0;
    }
    if l == 1 {
        return 1.0;
    }
    let y = if x > 0.5 * lf { lf - x } else { x };
    let deg = (l - 1) as i32;
    let mut sum = 0.0;
    if l <= 20 {
        let mut binom = 1.0f64;
        let mut fact = 1.0f64;
        for v in 2..l {
            fact *= v as f64;
        }
        for i in 0..=l {
            let d = y - i as f64;
            if d <= 0.0 {
                break;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * binom * d.powi(deg);
            binom = binom * (l - i) as f64 / (i + 1) as f64;
        }
        sum / fact
    } else {
        let ln_fact = ln_factorial(l - 1);
        for i in 0..=l {
            let d = y - i as f64;
            if d <= 0.0 {
                break;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * (ln_binomial(l, i) + deg as f64 * d.ln() - ln_fact).exp();
        }
        sum
    }
}

/// `l`-fold self-convolution of the unit-height box of width `w` centred at
/// the origin: `w^{l−1}·N_l(τ/w + l/2)`, returned without the `w^{l−1}`
/// factor so large widths cannot overflow.
pub fn scaled_box_power(l: u32, w: f64, tau: f64) -> f64 {
    cardinal_bspline(l, tau / w + 0.5 * l as f64)
}
