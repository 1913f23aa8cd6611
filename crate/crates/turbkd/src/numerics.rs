//! Small numerical kernels shared across the crate: adaptive Gauss-Kronrod
//! quadrature, predicate bisection, and polynomial least squares.

/// 15-point Kronrod abscissae on [-1, 1] (positive half; symmetric).
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Kronrod weights matching `XGK`.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// 7-point Gauss weights for the embedded estimate (odd-index nodes of `XGK`).
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 15(7) panel: returns (K15 estimate, |K15 - G7|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;

    for j in 0..7 {
        let dx = half * XGK[j];
        let fsum = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * fsum;
        if j % 2 == 1 {
            // XGK[1], XGK[3], XGK[5] are the embedded Gauss nodes
            gauss += WG[j / 2] * fsum;
        }
    }
    kronrod *= half;
    gauss *= half;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive quadrature of `f` over [a, b] by Gauss-Kronrod 15(7) panels with
/// interval bisection. Panels are accepted once the embedded error estimate
/// drops below `max(abs_tol_share, rel_tol * |panel|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let mut total = 0.0;
    let mut stack = vec![(a, b, abs_tol.max(f64::MIN_POSITIVE))];
    let min_width = (b - a).abs() * 1e-14;
    while let Some((lo, hi, share)) = stack.pop() {
        let (val, err) = gk15(&f, lo, hi);
        if err <= share.max(rel_tol * val.abs()) || (hi - lo).abs() <= min_width {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, 0.5 * share));
            stack.push((mid, hi, 0.5 * share));
        }
    }
    total
}

/// Smallest x in [lo, hi] where the monotone predicate flips to true,
/// located by bisection to absolute tolerance `tol`. The caller guarantees
/// `pred(hi)` is true; `pred(lo)` is expected false (if it is true the
/// bracket collapses onto `lo`).
pub fn bisect_predicate<P: Fn(f64) -> bool>(pred: P, lo: f64, hi: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Least-squares polynomial fit of the given degree, coefficients returned
/// low -> high. The abscissae are internally rescaled to O(1) before the
/// normal equations are formed, so raw inputs may live at any magnitude.
pub fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Option<Vec<f64>> {
    let n = degree + 1;
    if xs.len() != ys.len() || xs.len() < n {
        return None;
    }
    let scale = xs
        .iter()
        .fold(0.0f64, |m, &x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);

    // normal equations in the scaled variable
    let mut ata = vec![0.0; n * n];
    let mut aty = vec![0.0; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let s = x / scale;
        let mut pow = vec![1.0; n];
        for j in 1..n {
            pow[j] = pow[j - 1] * s;
        }
        for i in 0..n {
            aty[i] += pow[i] * y;
            for j in 0..n {
                ata[i * n + j] += pow[i] * pow[j];
            }
        }
    }

    let mut coef = solve_dense(&mut ata, &mut aty, n)?;
    for (j, c) in coef.iter_mut().enumerate() {
        *c /= scale.powi(j as i32);
    }
    Some(coef)
}

/// Gaussian elimination with partial pivoting on an n x n system (in place).
pub fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut pivot = col;
        for row in col + 1..n {
            if a[row * n + col].abs() > a[pivot * n + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        let inv = 1.0 / a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] * inv;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for j in row + 1..n {
            sum -= a[row * n + j] * x[j];
        }
        x[row] = sum / a[row * n + row];
    }
    Some(x)
}

/// Evaluate a polynomial with coefficients low -> high at x (Horner).
pub fn polyval(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_polynomials_exact() {
        // GK15 integrates polynomials up to degree 29 exactly; the adaptive
        // wrapper must agree with closed forms to near machine precision.
        let v = integrate(|x| x * x * x, 0.0, 2.0, 1e-14, 1e-12);
        assert!((v - 4.0).abs() < 1e-12, "got {v}");
        let v = integrate(|x| x.powi(7) - 3.0 * x, -1.0, 3.0, 1e-14, 1e-12);
        assert!((v - (3.0f64.powi(8) - 1.0) / 8.0 + 3.0 / 2.0 * 8.0).abs() < 1e-9);
    }

    #[test]
    fn quadrature_peaked_gaussian() {
        // standard normal over +/- 10 sigma integrates to 1
        let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(|x| inv * (-0.5 * x * x).exp(), -10.0, 10.0, 1e-13, 1e-10);
        assert!((v - 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn bisect_locates_threshold() {
        let x = bisect_predicate(|x| x > 0.3125, 0.0, 1.0, 1e-9);
        assert!((x - 0.3125).abs() < 1e-8);
    }

    #[test]
    fn polyfit_recovers_cubic() {
        let xs: Vec<f64> = (0..20).map(|i| 1e-9 * (i as f64 + 1.0)).collect();
        let truth = [0.5, 2.0e9, -3.0e18, 4.0e27];
        let ys: Vec<f64> = xs.iter().map(|&x| polyval(&truth, x)).collect();
        let fit = polyfit(&xs, &ys, 3).unwrap();
        for (&c, &t) in fit.iter().zip(&truth) {
            assert!((c - t).abs() <= 1e-6 * t.abs().max(1.0), "{c} vs {t}");
        }
    }

    #[test]
    fn polyfit_underdetermined_is_none() {
        assert!(polyfit(&[1.0, 2.0], &[1.0, 2.0], 3).is_none());
    }
}
