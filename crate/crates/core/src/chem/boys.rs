//! Zeroth-order Boys function.

use std::f64::consts::PI;

/// `F₀(x) = ∫₀¹ exp(-x t²) dt`, erf closed form with a Taylor branch near 0.
pub fn boys0(x: f64) -> f64 {
    if x < 1e-6 {
        1.0 - x / 3.0 + x * x / 10.0
    } else {
        0.5 * (PI / x).sqrt() * libm::erf(x.sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(x: f64) -> f64 {
        let n = 20_000;
        let h = 1.0 / n as f64;
        let f = |t: f64| (-x * t * t).exp();
        let mut s = f(0.0) + f(1.0);
        for k in 1..n {
            let w = if k % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(k as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn matches_quadrature_across_branches() {
        for &x in &[0.0, 1e-9, 5e-7, 1e-6, 2e-6, 0.1, 1.0, 7.5, 30.0] {
            assert!((boys0(x) - simpson(x)).abs() < 1e-12, "x = {x}");
        }
    }

    #[test]
    fn continuous_at_branch_point() {
        let lo = boys0(1e-6 * (1.0 - 1e-12));
        let hi = boys0(1e-6);
        assert!((lo - hi).abs() < 1e-13);
    }
}
