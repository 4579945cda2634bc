//! Quadrature rules: triangle rules in barycentric coordinates, Gauss–Legendre
//! on intervals and an adaptive tensor rule on rectangles.

/// Degree-5 seven-point rule (Dunavant). Barycentric points, weights sum to 1.
pub const TRI7: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059715871789770;
    const B1: f64 = 0.470142064105115;
    const W1: f64 = 0.132394152788506;
    const A2: f64 = 0.797426985353087;
    const B2: f64 = 0.101286507323456;
    const W2: f64 = 0.125939180544827;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// Edge-midpoint rule, exact for quadratics.
pub const TRI_MID: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

/// Gauss–Legendre nodes and weights on [−1, 1] (Golub–Welsch free Newton iteration).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Composite Gauss–Legendre integral of `f` over [a, b] with `panels` panels of `order` nodes.
pub fn integrate_interval<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(lo + 0.5 * h * (xi + 1.0));
        }
    }
    0.5 * h * s
}

/// Adaptive tensor Gauss–Legendre on a rectangle: subdivides a cell into four
/// until two rule orders agree to `tol` (absolute, scaled by cell fraction).
pub fn integrate_rect_adaptive<F: Fn(f64, f64) -> f64>(
    f: &F,
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    tol: f64,
    max_depth: usize,
) -> f64 {
    let lo = gauss_legendre(6);
    let hi = gauss_legendre(10);
    fn rule<F: Fn(f64, f64) -> f64>(f: &F, r: &(Vec<f64>, Vec<f64>), x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let (hx, hy) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
        let mut s = 0.0;
        for (xi, wi) in r.0.iter().zip(&r.1) {
            for (yj, wj) in r.0.iter().zip(&r.1) {
                s += wi * wj * f(x0 + hx * (xi + 1.0), y0 + hy * (yj + 1.0));
            }
        }
        s * hx * hy
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64, f64) -> f64>(
        f: &F,
        lo: &(Vec<f64>, Vec<f64>),
        hi: &(Vec<f64>, Vec<f64>),
        x0: f64,
        x1: f64,
        y0: f64,
        y1: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let a = rule(f, lo, x0, x1, y0, y1);
        let b = rule(f, hi, x0, x1, y0, y1);
        if (a - b).abs() <= tol || depth == 0 {
            return b;
        }
        let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let t = tol / 4.0;
        rec(f, lo, hi, x0, xm, y0, ym, t, depth - 1)
            + rec(f, lo, hi, xm, x1, y0, ym, t, depth - 1)
            + rec(f, lo, hi, x0, xm, ym, y1, t, depth - 1)
            + rec(f, lo, hi, xm, x1, ym, y1, t, depth - 1)
    }
    rec(f, &lo, &hi, x0, x1, y0, y1, tol, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tri7_integrates_quintics() {
        // ∫_T λ1^a λ2^b λ3^c = 2A a!b!c!/(a+b+c+2)!; with A normalized to 1
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for (a, b, c) in [(2, 2, 1), (5, 0, 0), (1, 1, 3), (0, 0, 0)] {
            let exact = 2.0 * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2);
            let q: f64 = TRI7.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32) * p[2].powi(c as i32)).sum();
            assert!((q - exact).abs() < 1e-12, "{a}{b}{c}: {q} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_exactness() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert!((s - 2.0 / 13.0).abs() < 1e-14);
        let v = integrate_interval(|t| t.exp(), 0.0, 1.0, 3, 8);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn adaptive_rect_matches_closed_form() {
        let f = |x: f64, y: f64| 1.0 / (1.05 - x * y);
        let v = integrate_rect_adaptive(&f, 0.0, 1.0, 0.0, 1.0, 1e-12, 12);
        // ∫∫ 1/(c − xy) = Σ_n ∫∫ (xy)^n / c^{n+1} = Σ 1/((n+1)² c^{n+1})
        let c: f64 = 1.05;
        let series: f64 = (0..4000).map(|n| 1.0 / ((n as f64 + 1.0).powi(2) * c.powi(n + 1))).sum();
        assert!((v - series).abs() < 1e-9, "{v} {series}");
    }
}
