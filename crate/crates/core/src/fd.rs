//! Finite differences on nonuniform grids.

/// Fornberg weights for derivatives `0..=m` at `z` from nodes `x`.
///
/// Row `k` of the result holds the weights of the `k`-th derivative.
pub fn fornberg(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    c
}

/// First derivative of `f` with respect to `x` by centred five-point
/// stencils. The two samples at each end get `None`.
pub fn derivative5(x: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(x.len(), f.len());
    let n = x.len();
    let mut out = vec![None; n];
    if n < 5 {
        return out;
    }
    for i in 2..n - 2 {
        let w = fornberg(x[i], &x[i - 2..=i + 2], 1);
        out[i] = Some((0..5).map(|k| w[1][k] * f[i - 2 + k]).sum());
    }
    out
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_weights_match_textbook() {
        let w = fornberg(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let d1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for k in 0..5 {
            assert_abs_diff_eq!(w[1][k], d1[k], epsilon = 1e-14);
            assert_abs_diff_eq!(w[2][k], d2[k], epsilon = 1e-13);
        }
        assert_abs_diff_eq!(w[0][2], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn quartic_is_differentiated_exactly_on_a_stretched_grid() {
        let x: Vec<f64> = (0..12).map(|i| (0.3 * i as f64).exp()).collect();
        let f: Vec<f64> = x.iter().map(|t| t.powi(4) - 3.0 * t * t + t).collect();
        let d = derivative5(&x, &f);
        assert!(d[0].is_none() && d[1].is_none() && d[11].is_none());
        for i in 2..10 {
            let exact = 4.0 * x[i].powi(3) - 6.0 * x[i] + 1.0;
            assert!((d[i].unwrap() - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn slope_of_a_line() {
        let x = [1.0, 2.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        assert_abs_diff_eq!(slope(&x, &y), 2.5, epsilon = 1e-14);
    }
}
