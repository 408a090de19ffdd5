/// `P(sup_{s≤1} |W_s| < a)` by the theta series
/// `(4/π) Σ_k (−1)^k/(2k+1)·exp(−(2k+1)²π²/(8a²))`.
pub fn brownian_sup_cdf(a: f64) -> f64 {
    if a <= 0.0 {
        return 0.0;
    }
    let pi = std::f64::consts::PI;
    let mut s = 0.0;
    for k in 0..10_000 {
        let m = (2 * k + 1) as f64;
        let term = (-(m * m) * pi * pi / (8.0 * a * a)).exp() / m;
        s += if k % 2 == 0 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (4.0 / pi * s).clamp(0.0, 1.0)
}

/// `E[(vol·sup_{s≤T} |W_s|)^p]` by Simpson quadrature of
/// `∫ p·a^{p−1}·P(M > a) da`.
pub fn brownian_sup_moment(p: f64, horizon: f64, vol: f64) -> f64 {
    let upper = 12.0;
    let n = 20_000;
    let h = upper / n as f64;
    let f = |a: f64| if a == 0.0 && p <= 1.0 { 0.0 } else { p * a.powf(p - 1.0) * (1.0 - brownian_sup_cdf(a)) };
    let mut s = f(0.0) + f(upper);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 * (vol * vol * horizon).powf(0.5 * p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_is_a_distribution() {
        assert!(brownian_sup_cdf(0.05) < 1e-20);
        assert!((brownian_sup_cdf(8.0) - 1.0).abs() < 1e-12);
        let mut prev = 0.0;
        for i in 1..100 {
            let c = brownian_sup_cdf(0.05 * i as f64);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn second_moment_bounds() {
        // E[W_1²] = 1 ≤ E[M²] ≤ E[4 W_1²] by Doob.
        let m2 = brownian_sup_moment(2.0, 1.0, 1.0);
        assert!(m2 > 1.0 && m2 < 4.0, "{m2}");
        let scaled = brownian_sup_moment(2.0, 4.0, 0.5);
        assert!((scaled - m2).abs() < 1e-12);
    }
}
