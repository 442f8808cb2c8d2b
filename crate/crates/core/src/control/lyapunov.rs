use nalgebra::DMatrix;

use super::GainSpec;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Quadratic Lyapunov function `V(ξ) = ξᵀQξ` for the tracking-error
/// dynamics `ξ̇ = H̃ξ`, with `H̃ᵀQ + QH̃ = −P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovDesign<T: Real> {
    pub q: DMatrix<T>,
    pub p: DMatrix<T>,
}

impl<T: Real> LyapunovDesign<T> {
    pub fn value(&self, xi: &nalgebra::DVector<T>) -> T {
        xi.dot(&(&self.q * xi))
    }

    /// Frobenius norm of `H̃ᵀQ + QH̃ + P`.
    pub fn residual(&self, h: &DMatrix<T>) -> T {
        (h.transpose() * &self.q + &self.q * h + &self.p).norm()
    }
}

/// `H̃ = [[0, I], [−K_P, −K_D]]`.
pub fn error_dynamics_matrix<T: Real>(gains: &GainSpec<T>, n_joints: usize) -> DMatrix<T> {
    let n = n_joints;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        h[(i, n + i)] = T::one();
        h[(n + i, i)] = -gains.kp;
        h[(n + i, n + i)] = -gains.kd;
    }
    h
}

/// Solves `AᵀX + XA = −P` through the Kronecker-vectorized linear system.
///
/// Fails if the system is singular or `X` is not positive definite, i.e.
/// when `A` is not Hurwitz.
pub fn solve_continuous_lyapunov<T: Real>(a: &DMatrix<T>, p: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if !a.is_square() || p.shape() != (n, n) {
        return Err(Error::InvalidParameter("Lyapunov equation needs square A and P".into()));
    }
    let eye = DMatrix::<T>::identity(n, n);
    let at = a.transpose();
    // vec(AᵀX) = (I ⊗ Aᵀ) vec(X), vec(XA) = (Aᵀ ⊗ I) vec(X), column-major
    let lhs = eye.kronecker(&at) + at.kronecker(&eye);
    let rhs = -nalgebra::DVector::from_column_slice(p.as_slice());
    let sol = lhs
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("Lyapunov system is singular".into()))?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    let x = (&x + x.transpose()) * lit::<T>(0.5);
    if x.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite(
            "Lyapunov solution (error dynamics not Hurwitz)",
        ));
    }
    Ok(x)
}

/// Lyapunov design with `P = I_{2N}`.
pub fn design_lyapunov<T: Real>(gains: &GainSpec<T>, n_joints: usize) -> Result<LyapunovDesign<T>> {
    design_lyapunov_with(gains, n_joints, DMatrix::identity(2 * n_joints, 2 * n_joints))
}

pub fn design_lyapunov_with<T: Real>(
    gains: &GainSpec<T>,
    n_joints: usize,
    p: DMatrix<T>,
) -> Result<LyapunovDesign<T>> {
    if p != p.transpose() || p.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite("Lyapunov P"));
    }
    let h = error_dynamics_matrix(gains, n_joints);
    let q = solve_continuous_lyapunov(&h, &p)?;
    Ok(LyapunovDesign { q, p })
}
