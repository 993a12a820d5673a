//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Least-squares fit `y = X b + e`.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: DVector<f64>,
    pub resid: DVector<f64>,
    pub rss: f64,
    /// `(X'X)^{-1}`.
    pub xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    /// Conventional standard error of coefficient `j` with `n - k` degrees of freedom.
    pub fn std_error(&self, j: usize) -> f64 {
        let n = self.resid.len();
        let k = self.coef.len();
        let s2 = self.rss / (n - k) as f64;
        (s2 * self.xtx_inv[(j, j)]).sqrt()
    }

    pub fn t_stat(&self, j: usize) -> f64 {
        self.coef[j] / self.std_error(j)
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))
}

/// `ln det` of a symmetric positive-definite matrix.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    let c = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))?;
    Ok(2.0 * c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// OLS via the normal equations.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let n = x.nrows();
    let k = x.ncols();
    if n <= k {
        return Err(Error::insufficient(format!(
            "regression needs more than {k} observations, got {n}"
        )));
    }
    let xtx = x.transpose() * x;
    let xtx_inv = well_conditioned_inverse(&xtx)?;
    let coef = &xtx_inv * (x.transpose() * y);
    let resid = y - x * &coef;
    let rss = resid.norm_squared();
    Ok(OlsFit {
        coef,
        resid,
        rss,
        xtx_inv,
    })
}

/// Multivariate OLS `Y = X B + E`; returns `(B, E)`.
pub fn ols_multi(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if x.ncols() == 0 {
        return Ok((DMatrix::zeros(0, y.ncols()), y.clone()));
    }
    if x.nrows() <= x.ncols() {
        return Err(Error::insufficient(format!(
            "regression needs more than {} observations, got {}",
            x.ncols(),
            x.nrows()
        )));
    }
    let xtx = x.transpose() * x;
    let inv = well_conditioned_inverse(&xtx)?;
    let b = inv * (x.transpose() * y);
    let e = y - x * &b;
    Ok((b, e))
}

/// Inverts a Gram matrix, refusing numerically singular input.
pub fn well_conditioned_inverse(xtx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let k = xtx.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Scale to unit diagonal so the conditioning check is scale free.
    let d: Vec<f64> = (0..k).map(|i| xtx[(i, i)]).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::numerical("singular regressor matrix (zero column)"));
    }
    let s = DVector::from_iterator(k, d.iter().map(|v| 1.0 / v.sqrt()));
    let mut scaled = xtx.clone();
    for i in 0..k {
        for j in 0..k {
            scaled[(i, j)] *= s[i] * s[j];
        }
    }
    let chol = scaled
        .cholesky()
        .ok_or_else(|| Error::numerical("singular regressor matrix"))?;
    let diag = chol.l().diagonal();
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = diag.iter().cloned().fold(0.0, f64::max);
    if min <= 1e-7 * max {
        return Err(Error::numerical("singular regressor matrix (collinear columns)"));
    }
    let mut inv = chol.inverse();
    for i in 0..k {
        for j in 0..k {
            inv[(i, j)] *= s[i] * s[j];
        }
    }
    Ok(inv)
}

/// Symmetric eigen-decomposition with eigenvalues sorted in non-increasing order.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = DVector::from_iterator(n, idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (vals, vecs)
}

/// Flip each column so that its largest-magnitude entry is positive.
pub fn canonical_signs(v: &mut DMatrix<f64>) {
    for mut col in v.column_iter_mut() {
        let mut best = 0.0f64;
        for &x in col.iter() {
            if x.abs() > best.abs() {
                best = x;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}

/// Empirical lower-tail critical value: the `floor(alpha * B)`-th order statistic
/// (0-based) of `values`. A statistic is rejected when strictly smaller.
pub fn lower_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    lower_quantile_sorted(&v, alpha)
}

pub fn lower_quantile_sorted(sorted: &[f64], alpha: f64) -> f64 {
    let b = sorted.len();
    let idx = ((alpha * b as f64).floor() as usize).min(b.saturating_sub(1));
    sorted[idx]
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration (upper bound
/// safeguarded by the Gershgorin bound).
pub fn spectral_norm_psd(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let (vals, _) = sym_eigen_desc(m);
    vals[0].max(0.0)
}

/// Serde adapter writing matrices as `{rows, cols, data}` with row-major data.
pub mod row_major {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    pub struct Shape {
        pub rows: usize,
        pub cols: usize,
        pub data: Vec<f64>,
    }

    impl From<&DMatrix<f64>> for Shape {
        fn from(m: &DMatrix<f64>) -> Self {
            let data = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
            Shape { rows: m.nrows(), cols: m.ncols(), data }
        }
    }

    impl Shape {
        pub fn into_matrix<E: serde::de::Error>(self) -> Result<DMatrix<f64>, E> {
            if self.data.len() != self.rows * self.cols {
                return Err(E::custom(format!(
                    "matrix data has {} entries for shape {}x{}",
                    self.data.len(),
                    self.rows,
                    self.cols
                )));
            }
            Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
        }
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        Shape::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        Shape::deserialize(d)?.into_matrix()
    }

    /// Same layout for a list of matrices.
    pub mod list {
        use super::Shape;
        use nalgebra::DMatrix;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(ms: &[DMatrix<f64>], s: S) -> Result<S::Ok, S::Error> {
            ms.iter().map(Shape::from).collect::<Vec<_>>().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DMatrix<f64>>, D::Error> {
            Vec::<Shape>::deserialize(d)?.into_iter().map(Shape::into_matrix).collect()
        }
    }

    /// Optional matrix.
    pub mod option {
        use super::Shape;
        use nalgebra::DMatrix;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(m: &Option<DMatrix<f64>>, s: S) -> Result<S::Ok, S::Error> {
            m.as_ref().map(Shape::from).serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<DMatrix<f64>>, D::Error> {
            Option::<Shape>::deserialize(d)?.map(Shape::into_matrix).transpose()
        }
    }
}

/// Solve `A x = b` for symmetric positive-definite `A`.
pub fn spd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.solve(b))
        .ok_or_else(|| Error::numerical("matrix is not positive definite"))
}

/// Minimiser of `||y - X b||^2 + kappa ||b||_2` given `X'X` and `X'y`.
///
/// Zero when `2 ||X'y|| <= kappa`; otherwise `b = (2 X'X + kappa/s I)^{-1} 2 X'y`
/// with `s = ||b||` found by a safeguarded scalar root search.
pub fn group_threshold(xtx: &DMatrix<f64>, xty: &DVector<f64>, kappa: f64) -> DVector<f64> {
    let k = xty.len();
    let g = 2.0 * xty.norm();
    if k == 0 || !(kappa < f64::INFINITY) || g <= kappa {
        return DVector::zeros(k);
    }
    let (d, v) = sym_eigen_desc(xtx);
    let d: Vec<f64> = d.iter().map(|x| x.max(0.0)).collect();
    let c = v.transpose() * xty;
    if kappa == 0.0 {
        let mut b = DVector::zeros(k);
        for i in 0..k {
            if d[i] > 1e-14 * d[0].max(1e-300) {
                b[i] = c[i] / d[i];
            }
        }
        return v * b;
    }
    // phi(s) = sum 4 c_i^2 / (2 d_i s + kappa)^2 - 1, decreasing in s
    let phi = |s: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for i in 0..k {
            let den = 2.0 * d[i] * s + kappa;
            let t = 4.0 * c[i] * c[i] / (den * den);
            f += t;
            df -= 2.0 * t * 2.0 * d[i] / den;
        }
        (f, df)
    };
    let mut lo = 0.0;
    let mut hi = 1.0f64;
    while phi(hi).0 > 0.0 && hi < 1e300 {
        lo = hi;
        hi *= 2.0;
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (f, df) = phi(s);
        if f > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if f.abs() < 1e-15 || (hi - lo) <= 1e-15 * hi {
            break;
        }
        let newton = s - f / df;
        s = if df < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
    }
    let b = DVector::from_fn(k, |i, _| 2.0 * c[i] * s / (2.0 * d[i] * s + kappa));
    v * b
}

/// Largest KKT violation of [`group_threshold`]'s problem at `b`.
pub fn group_kkt(xtx: &DMatrix<f64>, xty: &DVector<f64>, kappa: f64, b: &DVector<f64>) -> f64 {
    let grad = 2.0 * (xtx * b - xty);
    let norm = b.norm();
    if norm == 0.0 {
        if kappa.is_infinite() {
            return 0.0;
        }
        (grad.norm() - kappa).max(0.0)
    } else {
        (grad + b * (kappa / norm)).amax()
    }
}

/// Canonical correlations between the column spaces of two demeaned `T x k` blocks,
/// in non-increasing order.
pub fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let centre = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for mut col in c.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        c
    };
    let qa = centre(a).qr().q();
    let qb = centre(b).qr().q();
    let mut sv: Vec<f64> = (qa.transpose() * qb).singular_values().iter().map(|v| v.min(1.0)).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Largest principal angle (degrees) between the column spans of `a` and `b`.
pub fn subspace_angle_deg(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let sv = (qa.transpose() * qb).singular_values();
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    smallest.acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_convention() {
        let v: Vec<f64> = (1..=999).map(|x| x as f64).collect();
        assert_eq!(lower_quantile(&v, 0.05), 50.0);
        assert_eq!(lower_quantile(&[3.0], 0.05), 3.0);
    }

    #[test]
    fn ols_recovers_exact_line() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y = DVector::from_fn(5, |i, _| 2.0 + 3.0 * i as f64);
        let fit = ols(&x, &y).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-12);
        assert!((fit.coef[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn group_threshold_orthonormal_closed_form() {
        let xtx = DMatrix::identity(2, 2);
        let xty = DVector::from_vec(vec![3.0, -4.0]);
        for kappa in [0.0, 1.0, 4.0, 9.99, 10.0, 12.0] {
            let b = group_threshold(&xtx, &xty, kappa);
            let shrink = (1.0 - kappa / (2.0 * 5.0)).max(0.0);
            assert!((b[0] - 3.0 * shrink).abs() < 1e-12, "kappa {kappa}");
            assert!((b[1] + 4.0 * shrink).abs() < 1e-12);
            assert!(group_kkt(&xtx, &xty, kappa, &b) < 1e-9);
        }
    }

    #[test]
    fn group_threshold_general_design_kkt() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 0.5, 0.2, -0.3, 1.2, 0.1, 0.8, -0.4, 0.25, 0.1, 0.9, 0.3]);
        let xtx = x.transpose() * &x;
        let xty = DVector::from_vec(vec![1.0, -2.0, 0.3]);
        for kappa in [0.0, 0.5, 2.0, 5.0] {
            let b = group_threshold(&xtx, &xty, kappa);
            assert!(group_kkt(&xtx, &xty, kappa, &b) < 1e-8, "kappa {kappa}");
        }
    }

    #[test]
    fn collinear_design_is_rejected() {
        let x = DMatrix::from_fn(6, 2, |i, _| i as f64 + 1.0);
        let y = DVector::from_element(6, 1.0);
        assert!(matches!(ols(&x, &y), Err(Error::Numerical(_))));
    }
}
