//! Rigid-body dynamics of planar serial manipulators with revolute joints.
//!
//! Frame convention: joint 1 angle is measured from the positive x-axis,
//! every further joint angle is relative to the previous link, and gravity
//! acts along −y. With this convention `q = [-π/2, 0, ..]` is the arm
//! hanging straight down, where `g(q) = 0`.

mod simulate;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, Real};

pub use simulate::{simulate, RunTrace, SimConfig, TraceTick};

/// Physical parameters of a planar N-link revolute arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatorModel<T: Real> {
    masses: Vec<T>,
    lengths: Vec<T>,
    com_offsets: Vec<T>,
    inertias: Vec<T>,
    gravity: T,
}

/// Joint positions and velocities.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
}

impl<T: Real> RobotState<T> {
    pub fn new(q: DVector<T>, dq: DVector<T>) -> Result<Self> {
        check_dim("state velocity", q.len(), dq.len())?;
        Ok(Self { q, dq })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            q: DVector::zeros(n),
            dq: DVector::zeros(n),
        }
    }

    pub fn n_joints(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().chain(self.dq.iter()).all(|x| x.is_finite())
    }
}

/// Per-link kinematic sums used by the Jacobian and its derivatives.
///
/// `sin_sum(i, m) = Σ_{j=m}^{i-1} l_j sin θ_j + c_i sin θ_i` where `θ_j` is the
/// absolute angle of link `j` and `c_i` its COM offset; `cos_sum` likewise.
struct LinkSums<T: Real> {
    sin_sum: DMatrix<T>,
    cos_sum: DMatrix<T>,
}

impl<T: Real> ManipulatorModel<T> {
    pub fn new(
        masses: Vec<T>,
        lengths: Vec<T>,
        com_offsets: Vec<T>,
        inertias: Vec<T>,
        gravity: T,
    ) -> Result<Self> {
        let n = masses.len();
        if n == 0 {
            return Err(Error::InvalidParameter("manipulator needs at least one link".into()));
        }
        check_dim("link lengths", n, lengths.len())?;
        check_dim("COM offsets", n, com_offsets.len())?;
        check_dim("link inertias", n, inertias.len())?;
        let zero = T::zero();
        if masses.iter().chain(lengths.iter()).any(|&v| !(v > zero) || !v.is_finite()) {
            return Err(Error::InvalidParameter("masses and lengths must be positive".into()));
        }
        if inertias.iter().chain(com_offsets.iter()).any(|&v| !(v >= zero) || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "inertias and COM offsets must be non-negative".into(),
            ));
        }
        if !gravity.is_finite() {
            return Err(Error::InvalidParameter("gravity must be finite".into()));
        }
        Ok(Self {
            masses,
            lengths,
            com_offsets,
            inertias,
            gravity,
        })
    }

    /// Uniform slender rods: COM at mid-length, inertia `m l² / 12`.
    pub fn uniform_rods(masses: Vec<T>, lengths: Vec<T>, gravity: T) -> Result<Self> {
        check_dim("link lengths", masses.len(), lengths.len())?;
        let com = lengths.iter().map(|&l| l * lit(0.5)).collect();
        let inertias = masses
            .iter()
            .zip(&lengths)
            .map(|(&m, &l)| m * l * l / lit(12.0))
            .collect();
        Self::new(masses, lengths, com, inertias, gravity)
    }

    /// Two 1 kg, 1 m uniform rods under 9.81 m/s² gravity.
    pub fn two_link_default() -> Self {
        Self::uniform_rods(vec![T::one(); 2], vec![T::one(); 2], lit(9.81))
            .expect("default parameters are valid")
    }

    pub fn n_joints(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[T] {
        &self.masses
    }

    pub fn lengths(&self) -> &[T] {
        &self.lengths
    }

    pub fn com_offsets(&self) -> &[T] {
        &self.com_offsets
    }

    pub fn inertias(&self) -> &[T] {
        &self.inertias
    }

    pub fn gravity(&self) -> T {
        self.gravity
    }

    /// Same arm with gravity switched off.
    pub fn without_gravity(&self) -> Self {
        Self {
            gravity: T::zero(),
            ..self.clone()
        }
    }

    fn link_sums(&self, q: &DVector<T>) -> LinkSums<T> {
        let n = self.n_joints();
        let mut theta = Vec::with_capacity(n);
        let mut acc = T::zero();
        for &qi in q.iter() {
            acc += qi;
            theta.push(acc);
        }
        let mut sin_sum = DMatrix::zeros(n, n);
        let mut cos_sum = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut s = self.com_offsets[i] * theta[i].sin();
            let mut c = self.com_offsets[i] * theta[i].cos();
            sin_sum[(i, i)] = s;
            cos_sum[(i, i)] = c;
            for m in (0..i).rev() {
                s += self.lengths[m] * theta[m].sin();
                c += self.lengths[m] * theta[m].cos();
                sin_sum[(i, m)] = s;
                cos_sum[(i, m)] = c;
            }
        }
        LinkSums { sin_sum, cos_sum }
    }

    /// Derivative of the inertia matrix with respect to each joint angle;
    /// entry `p` holds `∂M/∂q_p`.
    fn inertia_partials(&self, sums: &LinkSums<T>) -> Vec<DMatrix<T>> {
        let n = self.n_joints();
        let mut partials = vec![DMatrix::zeros(n, n); n];
        for (p, dm) in partials.iter_mut().enumerate() {
            for i in p..n {
                let m = self.masses[i];
                for k in 0..=i {
                    let jx_k = -sums.sin_sum[(i, k)];
                    let jy_k = sums.cos_sum[(i, k)];
                    let djx_k = -sums.cos_sum[(i, k.max(p))];
                    let djy_k = -sums.sin_sum[(i, k.max(p))];
                    for l in 0..=i {
                        let jx_l = -sums.sin_sum[(i, l)];
                        let jy_l = sums.cos_sum[(i, l)];
                        let djx_l = -sums.cos_sum[(i, l.max(p))];
                        let djy_l = -sums.sin_sum[(i, l.max(p))];
                        dm[(k, l)] += m * (djx_k * jx_l + jx_k * djx_l + djy_k * jy_l + jy_k * djy_l);
                    }
                }
            }
        }
        partials
    }

    fn check_q(&self, q: &DVector<T>) -> Result<()> {
        check_dim("joint positions", self.n_joints(), q.len())
    }

    fn check_state(&self, q: &DVector<T>, dq: &DVector<T>) -> Result<()> {
        self.check_q(q)?;
        check_dim("joint velocities", self.n_joints(), dq.len())
    }

    /// Joint-space inertia matrix `M(q)`.
    pub fn inertia(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_q(q)?;
        let n = self.n_joints();
        let sums = self.link_sums(q);
        let mut mass = DMatrix::zeros(n, n);
        for i in 0..n {
            let m = self.masses[i];
            for k in 0..=i {
                let jx_k = sums.sin_sum[(i, k)];
                let jy_k = sums.cos_sum[(i, k)];
                for l in 0..=i {
                    mass[(k, l)] += m * (jx_k * sums.sin_sum[(i, l)] + jy_k * sums.cos_sum[(i, l)])
                        + self.inertias[i];
                }
            }
        }
        Ok(mass)
    }

    /// Coriolis/centrifugal matrix built from the Christoffel symbols of `M`,
    /// so that `Ṁ − 2C` is skew-symmetric.
    pub fn coriolis(&self, q: &DVector<T>, dq: &DVector<T>) -> Result<DMatrix<T>> {
        self.check_state(q, dq)?;
        let n = self.n_joints();
        let partials = self.inertia_partials(&self.link_sums(q));
        let half: T = lit(0.5);
        let mut c = DMatrix::zeros(n, n);
        for k in 0..n {
            for j in 0..n {
                let mut acc = T::zero();
                for p in 0..n {
                    acc += half
                        * (partials[p][(k, j)] + partials[j][(k, p)] - partials[k][(p, j)])
                        * dq[p];
                }
                c[(k, j)] = acc;
            }
        }
        Ok(c)
    }

    /// Gravity torque `g(q)`, the gradient of the potential energy.
    pub fn gravity_torque(&self, q: &DVector<T>) -> Result<DVector<T>> {
        self.check_q(q)?;
        let n = self.n_joints();
        let sums = self.link_sums(q);
        Ok(DVector::from_fn(n, |k, _| {
            (k..n).fold(T::zero(), |acc, i| {
                acc + self.masses[i] * self.gravity * sums.cos_sum[(i, k)]
            })
        }))
    }

    /// `C(q, q̇) q̇ + g(q)`.
    pub fn bias(&self, q: &DVector<T>, dq: &DVector<T>) -> Result<DVector<T>> {
        Ok(self.coriolis(q, dq)? * dq + self.gravity_torque(q)?)
    }

    /// `τ = M(q) q̈ + C(q, q̇) q̇ + g(q)`.
    pub fn inverse_dynamics(
        &self,
        q: &DVector<T>,
        dq: &DVector<T>,
        ddq: &DVector<T>,
    ) -> Result<DVector<T>> {
        check_dim("joint accelerations", self.n_joints(), ddq.len())?;
        Ok(self.inertia(q)? * ddq + self.bias(q, dq)?)
    }

    /// Solves `M q̈ = τ − C q̇ − g` with a Cholesky factorization of `M`.
    pub fn forward_dynamics(&self, state: &RobotState<T>, tau: &DVector<T>) -> Result<DVector<T>> {
        check_dim("torque", self.n_joints(), tau.len())?;
        let mass = self.inertia(&state.q)?;
        let rhs = tau - self.bias(&state.q, &state.dq)?;
        let chol = mass
            .cholesky()
            .ok_or(Error::NotPositiveDefinite("manipulator inertia"))?;
        Ok(chol.solve(&rhs))
    }

    pub fn kinetic_energy(&self, state: &RobotState<T>) -> Result<T> {
        let m = self.inertia(&state.q)?;
        Ok(state.dq.dot(&(m * &state.dq)) * lit(0.5))
    }

    pub fn potential_energy(&self, q: &DVector<T>) -> Result<T> {
        self.check_q(q)?;
        let sums = self.link_sums(q);
        Ok((0..self.n_joints()).fold(T::zero(), |acc, i| {
            acc + self.masses[i] * self.gravity * sums.sin_sum[(i, 0)]
        }))
    }

    pub fn total_energy(&self, state: &RobotState<T>) -> Result<T> {
        Ok(self.kinetic_energy(state)? + self.potential_energy(&state.q)?)
    }
}

/// The controller's approximate model: `M̂(q)` and `n̂(q, q̇) = Ĉq̇ + ĝ`.
#[derive(Debug, Clone, PartialEq)]
pub enum NominalModel<T: Real> {
    /// Constant inertia estimate, `n̂ = 0`.
    ConstantInertia(DMatrix<T>),
    /// Full rigid-body estimate (possibly with wrong parameters).
    Rigid(ManipulatorModel<T>),
}

impl<T: Real> NominalModel<T> {
    pub fn constant_inertia(inertia: DMatrix<T>) -> Result<Self> {
        if !inertia.is_square() {
            return Err(Error::InvalidParameter("nominal inertia must be square".into()));
        }
        if inertia != inertia.transpose() || inertia.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite("nominal inertia"));
        }
        Ok(Self::ConstantInertia(inertia))
    }

    /// `M̂ = s·I`, `n̂ = 0`.
    pub fn scaled_identity(n_joints: usize, scale: T) -> Result<Self> {
        Self::constant_inertia(DMatrix::identity(n_joints, n_joints) * scale)
    }

    pub fn n_joints(&self) -> usize {
        match self {
            Self::ConstantInertia(m) => m.nrows(),
            Self::Rigid(model) => model.n_joints(),
        }
    }

    pub fn inertia(&self, q: &DVector<T>) -> Result<DMatrix<T>> {
        match self {
            Self::ConstantInertia(m) => {
                check_dim("joint positions", m.nrows(), q.len())?;
                Ok(m.clone())
            }
            Self::Rigid(model) => model.inertia(q),
        }
    }

    pub fn bias(&self, q: &DVector<T>, dq: &DVector<T>) -> Result<DVector<T>> {
        match self {
            Self::ConstantInertia(m) => {
                check_dim("joint positions", m.nrows(), q.len())?;
                check_dim("joint velocities", m.nrows(), dq.len())?;
                Ok(DVector::zeros(m.nrows()))
            }
            Self::Rigid(model) => model.bias(q, dq),
        }
    }
}
