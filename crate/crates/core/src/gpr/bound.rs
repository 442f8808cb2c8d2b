use nalgebra::DVector;

use super::dataset::GpInput;
use super::kernel::{se_kernel, SeKernelParams};
use super::model::GpModel;
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// How the confidence half-width is derived from `β` and the posterior
/// variance `Σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HalfWidth {
    /// `β · sqrt(Σ)`: β counts standard deviations.
    #[default]
    BetaStd,
    /// `β · Σ`, the variance scaled directly.
    BetaVariance,
    /// `sqrt(β · Σ)`, the high-probability bound form.
    SqrtBetaVariance,
}

impl HalfWidth {
    pub fn apply<T: Real>(self, beta: T, variance: T) -> T {
        match self {
            Self::BetaStd => beta * variance.sqrt(),
            Self::BetaVariance => beta * variance,
            Self::SqrtBetaVariance => (beta * variance).sqrt(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::BetaStd => "beta_std",
            Self::BetaVariance => "beta_variance",
            Self::SqrtBetaVariance => "sqrt_beta_variance",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::BetaStd, Self::BetaVariance, Self::SqrtBetaVariance]
            .into_iter()
            .find(|h| h.name() == s)
    }
}

/// Confidence multiplier per output plus the failure probability used by
/// [`beta_from_rkhs_bound`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundParams<T: Real> {
    pub beta: DVector<T>,
    pub delta: T,
    pub half_width: HalfWidth,
}

impl<T: Real> BoundParams<T> {
    pub fn new(beta: DVector<T>, delta: T, half_width: HalfWidth) -> Result<Self> {
        if beta.is_empty() || beta.iter().any(|&b| !(b > T::zero()) || !b.is_finite()) {
            return Err(Error::InvalidParameter("beta must be positive".into()));
        }
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
        }
        Ok(Self {
            beta,
            delta,
            half_width,
        })
    }

    /// Same `β` for every output, `δ = 0.01`, standard-deviation scaling.
    pub fn uniform(beta: T, n_outputs: usize) -> Result<Self> {
        Self::new(DVector::from_element(n_outputs, beta), lit(0.01), HalfWidth::BetaStd)
    }
}

/// `ρ_i = max(|μ_i − h_i|, |μ_i + h_i|)`, `ρ = ‖(ρ_1, …, ρ_N)‖₂` from a
/// posterior mean/variance pair.
pub fn rho_from_posterior<T: Real>(
    mean: &DVector<T>,
    variance: &DVector<T>,
    bounds: &BoundParams<T>,
) -> Result<(T, DVector<T>)> {
    let n = mean.len();
    if variance.len() != n || bounds.beta.len() != n {
        return Err(Error::Dimension {
            what: "bound inputs",
            expected: n,
            got: variance.len().min(bounds.beta.len()),
        });
    }
    let comps = DVector::from_fn(n, |i, _| {
        let h = bounds.half_width.apply(bounds.beta[i], variance[i]);
        (mean[i] - h).abs().max((mean[i] + h).abs())
    });
    let rho = comps.norm();
    if !rho.is_finite() {
        return Err(Error::NonFiniteRho);
    }
    Ok((rho, comps))
}

/// Robust-term magnitude at `x` from the GP confidence interval.
pub fn rho_bound<T: Real>(
    model: &GpModel<T>,
    x: &GpInput<T>,
    bounds: &BoundParams<T>,
) -> Result<(T, DVector<T>)> {
    let (mean, var) = model.predict(x)?;
    rho_from_posterior(&mean, &var, bounds)
}

/// `β_i = 2‖e_i‖²_k + 300 γ ln³((n + 1)/δ)` for every output.
pub fn beta_from_rkhs_bound<T: Real>(
    rkhs_norm_bounds: &[T],
    gamma: T,
    n: usize,
    delta: T,
) -> Result<DVector<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::InvalidParameter("delta must lie in (0, 1)".into()));
    }
    if gamma < T::zero() || rkhs_norm_bounds.iter().any(|&b| b < T::zero()) {
        return Err(Error::InvalidParameter("norm bounds and gamma must be non-negative".into()));
    }
    let log_term = (T::from_usize(n + 1).expect("count fits in scalar") / delta).ln();
    let second = lit::<T>(300.0) * gamma * log_term * log_term * log_term;
    Ok(DVector::from_iterator(
        rkhs_norm_bounds.len(),
        rkhs_norm_bounds.iter().map(|&b| lit::<T>(2.0) * b * b + second),
    ))
}

/// Greedy lower bound on the maximum information gain
/// `max_S ½ log det(I + σ̄⁻² K_S)` over subsets `S` of `pool` of size
/// `budget`.
///
/// Each step adds the candidate with the largest posterior variance given the
/// points already chosen (noise variance `σ̄²`); the objective grows by
/// `½ ln(1 + σ̄⁻² var)`. Candidates are drawn without replacement, so the
/// budget is capped at the pool size.
pub fn max_information_gain<T: Real>(
    pool: &[GpInput<T>],
    params: &SeKernelParams<T>,
    noise_bound: T,
    budget: usize,
) -> Result<T> {
    Ok(greedy_information_gain(pool, params, noise_bound, budget)?.0)
}

/// Greedy selection returning the gain and the chosen pool indices in order.
pub fn greedy_information_gain<T: Real>(
    pool: &[GpInput<T>],
    params: &SeKernelParams<T>,
    noise_bound: T,
    budget: usize,
) -> Result<(T, Vec<usize>)> {
    if pool.is_empty() {
        return Err(Error::InvalidParameter("candidate pool is empty".into()));
    }
    if !(noise_bound > T::zero()) {
        return Err(Error::InvalidParameter("noise bound must be positive".into()));
    }
    params.validate()?;
    let points: Vec<Vec<T>> = pool.iter().map(|x| x.to_vec()).collect();
    if points.iter().any(|p| p.len() != params.dim()) {
        return Err(Error::Dimension {
            what: "candidate input",
            expected: params.dim(),
            got: points.iter().map(Vec::len).find(|&l| l != params.dim()).unwrap_or(0),
        });
    }
    let noise_var = noise_bound * noise_bound;
    let budget = budget.min(pool.len());
    let m = pool.len();
    // Posterior covariance is k(c, d) − Σ_t g[c][t] g[d][t].
    let mut factors: Vec<Vec<T>> = vec![Vec::with_capacity(budget); m];
    let mut variance: Vec<T> = points.iter().map(|p| se_kernel(p, p, params)).collect();
    let mut chosen = vec![false; m];
    let mut order = Vec::with_capacity(budget);
    let mut gain = T::zero();
    for _ in 0..budget {
        let (s, _) = variance
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen[*i])
            .fold((usize::MAX, -T::one()), |best, (i, &v)| {
                if v > best.1 {
                    (i, v)
                } else {
                    best
                }
            });
        let var_s = variance[s].max(T::zero());
        gain += lit::<T>(0.5) * (T::one() + var_s / noise_var).ln();
        chosen[s] = true;
        order.push(s);
        let scale = (var_s + noise_var).sqrt();
        let g_s = factors[s].clone();
        for c in 0..m {
            let mut cov = se_kernel(&points[c], &points[s], params);
            for (a, b) in factors[c].iter().zip(&g_s) {
                cov -= *a * *b;
            }
            let g = cov / scale;
            factors[c].push(g);
            variance[c] -= g * g;
        }
    }
    Ok((gain, order))
}
