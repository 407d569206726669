use nalgebra::DMatrix;

/// Central-difference Hessian with absolute steps `steps`. Symmetric by
/// construction.
pub fn numerical_hessian<F>(f: F, x: &[f64], steps: &[f64]) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let n = x.len();
    let f0 = f(x);
    let mut h = vec![vec![0.0; n]; n];
    let mut point = x.to_vec();
    let mut at = |shifts: &[(usize, f64)]| {
        point.copy_from_slice(x);
        for &(i, d) in shifts {
            point[i] += d;
        }
        f(&point)
    };
    for i in 0..n {
        let si = steps[i];
        h[i][i] = (at(&[(i, si)]) - 2.0 * f0 + at(&[(i, -si)])) / (si * si);
        for j in 0..i {
            let sj = steps[j];
            let v = (at(&[(i, si), (j, sj)]) - at(&[(i, si), (j, -sj)]) - at(&[(i, -si), (j, sj)])
                + at(&[(i, -si), (j, -sj)]))
                / (4.0 * si * sj);
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    h
}

/// `rel * max(|x_i|, 1e-2)` per coordinate.
pub fn relative_steps(x: &[f64], rel: f64) -> Vec<f64> {
    x.iter().map(|v| rel * v.abs().max(1e-2)).collect()
}

/// Square roots of the diagonal of `(-H)^{-1}`. `None` where the Hessian is
/// singular, non-finite, or the variance is not positive.
pub fn standard_errors(hessian: &[Vec<f64>]) -> Vec<Option<f64>> {
    let n = hessian.len();
    if hessian.iter().flatten().any(|v| !v.is_finite()) {
        return vec![None; n];
    }
    let neg = DMatrix::from_fn(n, n, |i, j| -hessian[i][j]);
    let inv = match neg.clone().cholesky() {
        Some(c) => Some(c.inverse()),
        None => neg.try_inverse(),
    };
    match inv {
        Some(inv) => (0..n)
            .map(|i| {
                let v = inv[(i, i)];
                (v > 0.0 && v.is_finite()).then(|| v.sqrt())
            })
            .collect(),
        None => vec![None; n],
    }
}
