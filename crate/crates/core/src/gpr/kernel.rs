use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Squared-exponential kernel with one lengthscale per input dimension:
/// `k(x, y) = λ · exp(−Σ_d (x_d − y_d)² / ℓ_d²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeKernelParams<T: Real> {
    pub lambda: T,
    pub lengthscales: DVector<T>,
}

impl<T: Real> SeKernelParams<T> {
    pub fn new(lambda: T, lengthscales: DVector<T>) -> Result<Self> {
        let p = Self {
            lambda,
            lengthscales,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn isotropic(lambda: T, lengthscale: T, dim: usize) -> Result<Self> {
        Self::new(lambda, DVector::from_element(dim, lengthscale))
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: T| v > T::zero() && v.is_finite();
        if !ok(self.lambda) {
            return Err(Error::InvalidParameter("kernel variance must be positive".into()));
        }
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| ok(l)) {
            return Err(Error::InvalidParameter("lengthscales must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `[ln λ, ln ℓ_1, …, ln ℓ_D]`
    pub(crate) fn to_log(&self) -> DVector<T> {
        let mut v = DVector::zeros(self.dim() + 1);
        v[0] = self.lambda.ln();
        for (d, l) in self.lengthscales.iter().enumerate() {
            v[d + 1] = l.ln();
        }
        v
    }

    pub(crate) fn from_log(v: &DVector<T>) -> Self {
        Self {
            lambda: v[0].exp(),
            lengthscales: DVector::from_iterator(v.len() - 1, v.iter().skip(1).map(|x| x.exp())),
        }
    }
}

/// Kernel value for two points given as slices of equal length.
pub fn se_kernel<T: Real>(x: &[T], y: &[T], params: &SeKernelParams<T>) -> T {
    debug_assert_eq!(x.len(), params.dim());
    debug_assert_eq!(y.len(), params.dim());
    let mut s = T::zero();
    for ((&a, &b), &l) in x.iter().zip(y).zip(params.lengthscales.iter()) {
        let r = (a - b) / l;
        s += r * r;
    }
    params.lambda * (-s).exp()
}

/// Noise-free Gram matrix over the rows of `inputs`.
pub(crate) fn gram<T: Real>(inputs: &DMatrix<T>, params: &SeKernelParams<T>) -> DMatrix<T> {
    let n = inputs.nrows();
    let rows: Vec<Vec<T>> = (0..n).map(|i| inputs.row(i).iter().copied().collect()).collect();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = params.lambda;
        for j in 0..i {
            let v = se_kernel(&rows[i], &rows[j], params);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance between one point and every row of `inputs`.
pub(crate) fn cross<T: Real>(inputs: &DMatrix<T>, x: &[T], params: &SeKernelParams<T>) -> DVector<T> {
    let mut out = DVector::zeros(inputs.nrows());
    let mut row = vec![T::zero(); x.len()];
    for i in 0..inputs.nrows() {
        for (d, r) in row.iter_mut().enumerate() {
            *r = inputs[(i, d)];
        }
        out[i] = se_kernel(&row, x, params);
    }
    out
}
