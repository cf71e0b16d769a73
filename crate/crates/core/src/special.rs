//! Bessel functions of integer order, their zeros, and the gamma function.

use num_complex::Complex64;

/// J_n(x) for integer n >= 0 and real x >= 0.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if x < 0.0 {
        let v = bessel_j(n, -x);
        return if n % 2 == 0 { v } else { -v };
    }
    match complex_bessel::besselj(n as f64, Complex64::new(x, 0.0)) {
        Ok(z) => z.re,
        Err(_) => f64::NAN,
    }
}

/// dJ_n/dx.
pub fn bessel_j_prime(n: u32, x: f64) -> f64 {
    if n == 0 {
        -bessel_j(1, x)
    } else {
        0.5 * (bessel_j(n - 1, x) - bessel_j(n + 1, x))
    }
}

/// The first `count` positive zeros of J_n, increasing.
pub fn bessel_zeros(n: u32, count: usize) -> Vec<f64> {
    let mut zeros = Vec::with_capacity(count);
    // consecutive zeros are at least ~2.4 apart for every order
    let step = 0.25;
    let mut a = if n == 0 { 0.5 } else { n as f64 };
    let mut fa = bessel_j(n, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_j(n, b);
        if fa == 0.0 {
            zeros.push(a);
        } else if fa.signum() != fb.signum() {
            zeros.push(refine_zero(n, a, b, fa));
        }
        a = b;
        fa = fb;
    }
    zeros
}

fn refine_zero(n: u32, mut lo: f64, mut hi: f64, flo: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..100 {
        let fx = bessel_j(n, x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
        } else {
            hi = x;
        }
        let d = bessel_j_prime(n, x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x {
            return next;
        }
        x = next;
    }
    x
}

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_match_reference_table() {
        // reference values from an independent arbitrary-precision evaluation
        let table = [
            (0, 3.0, -2.600_519_549_019_334e-1),
            (1, 10.0, 4.347_274_616_886_144e-2),
            (2, 100.0, -2.152_875_734_450_536e-2),
            (3, 800.0, -2.681_929_126_250_825e-2),
            (0, 1600.0, -1.974_105_085_801_802e-2),
        ];
        for (n, x, v) in table {
            assert!((bessel_j(n, x) - v).abs() < 1e-15, "J_{n}({x})");
        }
    }

    #[test]
    fn zeros_are_roots_and_ordered() {
        for n in 0..4 {
            let z = bessel_zeros(n, 300);
            for w in z.windows(2) {
                assert!(w[1] - w[0] > 2.0);
            }
            for &x in &z {
                assert!(bessel_j(n, x).abs() < 1e-13, "n={n} x={x}");
            }
        }
        assert!((bessel_zeros(0, 1)[0] - 2.404_825_557_695_773).abs() < 1e-14);
        assert!((bessel_zeros(2, 1)[0] - 5.135_622_301_840_683).abs() < 1e-13);
    }

    #[test]
    fn derivative_matches_difference() {
        for n in 0..4 {
            let x = 3.7;
            let h = 1e-5;
            let fd = (bessel_j(n, x + h) - bessel_j(n, x - h)) / (2.0 * h);
            assert!((fd - bessel_j_prime(n, x)).abs() < 1e-9);
        }
    }
}
