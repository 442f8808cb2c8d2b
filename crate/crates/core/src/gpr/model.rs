use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::dataset::{GpDataset, GpInput};
use super::kernel::{cross, gram, SeKernelParams};
use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Relative diagonal jitter tried first, then multiplied by 10 until it
/// exceeds the upper limit.
const JITTER_START: f64 = 1e-10;
const JITTER_LIMIT: f64 = 1e-4;
/// Computed variances in `[-tol, 0)` are round-off and clamp to zero.
const NEGATIVE_VARIANCE_TOL: f64 = 1e-9;

/// Box on the log-hyperparameters explored by the optimizer.
const LOG_LAMBDA_RANGE: (f64, f64) = (-25.0, 25.0);
const LOG_LENGTHSCALE_RANGE: (f64, f64) = (-7.0, 9.0);

/// Iteration budget for marginal likelihood maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBudget {
    /// Number of starts, the first being the supplied initialization.
    pub restarts: usize,
    /// Ascent iterations per start.
    pub max_iters: usize,
    /// Seed for the perturbed restarts.
    pub seed: u64,
}

impl Default for FitBudget {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 150,
            seed: 0,
        }
    }
}

/// Fitted posterior for one output dimension.
#[derive(Debug, Clone)]
pub struct OutputPosterior<T: Real> {
    params: SeKernelParams<T>,
    chol: Cholesky<T, Dyn>,
    alpha: DVector<T>,
    jitter: T,
    log_marginal_likelihood: T,
}

impl<T: Real> OutputPosterior<T> {
    pub fn params(&self) -> &SeKernelParams<T> {
        &self.params
    }

    /// `(K + σ²I)⁻¹ y`
    pub fn alpha(&self) -> &DVector<T> {
        &self.alpha
    }

    /// Diagonal jitter that was needed for the factorization, absolute.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> T {
        self.log_marginal_likelihood
    }
}

/// Independent per-output GP posteriors over a shared dataset.
#[derive(Debug, Clone)]
pub struct GpModel<T: Real> {
    dataset: GpDataset<T>,
    outputs: Vec<OutputPosterior<T>>,
}

/// Factorizes `K + (σ² + jitter) I`, escalating the jitter on failure.
fn factorize<T: Real>(
    k: &DMatrix<T>,
    noise_var: T,
    lambda: T,
) -> Result<(Cholesky<T, Dyn>, T)> {
    let mut rel = JITTER_START;
    loop {
        let jitter = lambda * lit(rel);
        let mut a = k.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += noise_var + jitter;
        }
        if let Some(ch) = a.cholesky() {
            return Ok((ch, jitter));
        }
        rel *= 10.0;
        if rel > JITTER_LIMIT * 1.000_001 {
            return Err(Error::IllConditioned {
                jitter: JITTER_LIMIT * to_f64(lambda),
            });
        }
    }
}

fn posterior_for<T: Real>(
    dataset: &GpDataset<T>,
    output: usize,
    params: SeKernelParams<T>,
) -> Result<OutputPosterior<T>> {
    params.validate()?;
    check_dim("kernel lengthscales", dataset.input_dim(), params.dim())?;
    let y = dataset.target_column(output);
    let k = gram(dataset.inputs(), &params);
    let noise_var = dataset.noise_std() * dataset.noise_std();
    let (chol, jitter) = factorize(&k, noise_var, params.lambda)?;
    let alpha = chol.solve(&y);
    let n = T::from_usize(y.len()).expect("dataset size fits in scalar");
    let log_det_half = chol.l_dirty().diagonal().iter().fold(T::zero(), |a, d| a + d.ln());
    let lml = -lit::<T>(0.5) * y.dot(&alpha) - log_det_half - n * lit(0.5) * T::two_pi().ln();
    Ok(OutputPosterior {
        params,
        chol,
        alpha,
        jitter,
        log_marginal_likelihood: lml,
    })
}

/// Log marginal likelihood of one output under `params`.
pub fn log_marginal_likelihood<T: Real>(
    dataset: &GpDataset<T>,
    output: usize,
    params: &SeKernelParams<T>,
) -> Result<T> {
    Ok(posterior_for(dataset, output, params.clone())?.log_marginal_likelihood)
}

/// Gradient of the log marginal likelihood with respect to
/// `[ln λ, ln ℓ_1, …, ln ℓ_D]`.
fn lml_gradient<T: Real>(dataset: &GpDataset<T>, post: &OutputPosterior<T>) -> DVector<T> {
    let x = dataset.inputs();
    let n = x.nrows();
    let dim = x.ncols();
    let params = &post.params;
    let k = gram(x, params);
    let k_inv = post.chol.inverse();
    let alpha = &post.alpha;
    // W = α αᵀ − (K + σ²I)⁻¹; ∂L/∂θ = ½ tr(W ∂K/∂θ)
    let mut grad = DVector::zeros(dim + 1);
    let half: T = lit(0.5);
    let two: T = lit(2.0);
    for i in 0..n {
        for j in 0..n {
            let w = alpha[i] * alpha[j] - k_inv[(i, j)];
            let kij = k[(i, j)];
            grad[0] += half * w * kij;
            if i != j {
                for d in 0..dim {
                    let r = (x[(i, d)] - x[(j, d)]) / params.lengthscales[d];
                    grad[d + 1] += half * w * kij * two * r * r;
                }
            }
        }
    }
    grad
}

fn clamp_log<T: Real>(v: &mut DVector<T>) {
    v[0] = v[0].clamp(lit(LOG_LAMBDA_RANGE.0), lit(LOG_LAMBDA_RANGE.1));
    for i in 1..v.len() {
        v[i] = v[i].clamp(lit(LOG_LENGTHSCALE_RANGE.0), lit(LOG_LENGTHSCALE_RANGE.1));
    }
}

/// Normalized-gradient ascent with an adaptive step in log-parameter space.
/// Only improving steps are accepted, so the result never scores below the
/// start.
fn ascend<T: Real>(
    dataset: &GpDataset<T>,
    output: usize,
    start: OutputPosterior<T>,
    max_iters: usize,
) -> OutputPosterior<T> {
    let mut best = start;
    let mut theta = best.params.to_log();
    let mut step: T = lit(0.5);
    let min_step: T = lit(1e-7);
    let mut grad = lml_gradient(dataset, &best);
    for _ in 0..max_iters {
        let gnorm = grad.norm();
        if !(gnorm > lit(1e-10)) || step < min_step {
            break;
        }
        let mut cand = &theta + &grad * (step / gnorm);
        clamp_log(&mut cand);
        let accepted = posterior_for(dataset, output, SeKernelParams::from_log(&cand))
            .ok()
            .filter(|p| {
                p.log_marginal_likelihood.is_finite()
                    && p.log_marginal_likelihood > best.log_marginal_likelihood
            });
        match accepted {
            Some(p) => {
                best = p;
                theta = cand;
                grad = lml_gradient(dataset, &best);
                step *= lit(1.5);
            }
            None => step *= lit(0.3),
        }
    }
    best
}

impl<T: Real> GpModel<T> {
    /// Builds the posterior for fixed hyperparameters (no optimization).
    pub fn from_params(dataset: GpDataset<T>, params: Vec<SeKernelParams<T>>) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_dim("per-output kernel params", dataset.n_outputs(), params.len())?;
        let outputs = params
            .into_iter()
            .enumerate()
            .map(|(i, p)| posterior_for(&dataset, i, p))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dataset, outputs })
    }

    /// Maximizes each output's log marginal likelihood over `λ` and the
    /// lengthscales, starting from `init` plus `budget.restarts − 1`
    /// randomly perturbed starts.
    pub fn fit(
        dataset: GpDataset<T>,
        init: &[SeKernelParams<T>],
        budget: &FitBudget,
    ) -> Result<Self> {
        if dataset.len() < 2 {
            return Err(Error::InvalidParameter("fit needs at least two samples".into()));
        }
        check_dim("per-output kernel params", dataset.n_outputs(), init.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        let mut outputs = Vec::with_capacity(init.len());
        for (i, p0) in init.iter().enumerate() {
            let first = posterior_for(&dataset, i, p0.clone())?;
            let mut best = ascend(&dataset, i, first, budget.max_iters);
            for _ in 1..budget.restarts {
                let mut theta = p0.to_log();
                for v in theta.iter_mut() {
                    *v += lit(rng.random_range(-1.0..1.0));
                }
                clamp_log(&mut theta);
                let Ok(start) = posterior_for(&dataset, i, SeKernelParams::from_log(&theta)) else {
                    continue;
                };
                let cand = ascend(&dataset, i, start, budget.max_iters);
                if cand.log_marginal_likelihood > best.log_marginal_likelihood {
                    best = cand;
                }
            }
            outputs.push(best);
        }
        Ok(Self { dataset, outputs })
    }

    /// Fit starting from [`default_init`].
    pub fn fit_default(dataset: GpDataset<T>, budget: &FitBudget) -> Result<Self> {
        let init = default_init(&dataset);
        Self::fit(dataset, &init, budget)
    }

    pub fn dataset(&self) -> &GpDataset<T> {
        &self.dataset
    }

    pub fn outputs(&self) -> &[OutputPosterior<T>] {
        &self.outputs
    }

    pub fn n_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn params(&self) -> Vec<SeKernelParams<T>> {
        self.outputs.iter().map(|o| o.params.clone()).collect()
    }

    /// Posterior mean and variance of every output at `x`.
    pub fn predict(&self, x: &GpInput<T>) -> Result<(DVector<T>, DVector<T>)> {
        self.predict_slice(&x.to_vec())
    }

    pub fn predict_slice(&self, x: &[T]) -> Result<(DVector<T>, DVector<T>)> {
        check_dim("GP query input", self.dataset.input_dim(), x.len())?;
        let n_out = self.outputs.len();
        let mut mean = DVector::zeros(n_out);
        let mut var = DVector::zeros(n_out);
        for (i, post) in self.outputs.iter().enumerate() {
            let k_star = cross(self.dataset.inputs(), x, &post.params);
            mean[i] = k_star.dot(&post.alpha);
            let v = post
                .chol
                .l_dirty()
                .solve_lower_triangular(&k_star)
                .expect("Cholesky factor has a non-zero diagonal");
            let raw = post.params.lambda - v.dot(&v);
            var[i] = if raw >= T::zero() {
                raw
            } else if raw >= -lit::<T>(NEGATIVE_VARIANCE_TOL) * T::one().max(post.params.lambda) {
                T::zero()
            } else {
                return Err(Error::NegativeVariance(to_f64(raw)));
            };
        }
        Ok((mean, var))
    }

    /// Flat `key = value` listing of the fitted hyperparameters.
    pub fn hyperparameter_entries(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("n_outputs".to_string(), self.outputs.len().to_string()),
            ("input_dim".to_string(), self.dataset.input_dim().to_string()),
            ("n_samples".to_string(), self.dataset.len().to_string()),
            ("noise_std".to_string(), self.dataset.noise_std().to_string()),
        ];
        for (i, o) in self.outputs.iter().enumerate() {
            let k = i + 1;
            out.push((format!("output{k}.lambda"), o.params.lambda.to_string()));
            for (d, l) in o.params.lengthscales.iter().enumerate() {
                out.push((format!("output{k}.lengthscale{}", d + 1), l.to_string()));
            }
            out.push((format!("output{k}.jitter"), o.jitter.to_string()));
            out.push((
                format!("output{k}.log_marginal_likelihood"),
                o.log_marginal_likelihood.to_string(),
            ));
        }
        out
    }

    /// Inverse of [`Self::hyperparameter_entries`] for the kernel parameters.
    pub fn params_from_entries(
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<Vec<SeKernelParams<T>>> {
        let get = |key: &str| -> Result<f64> {
            lookup(key)
                .ok_or_else(|| Error::InvalidParameter(format!("missing key {key}")))?
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value for {key}")))
        };
        let n_out = get("n_outputs")? as usize;
        let dim = get("input_dim")? as usize;
        (1..=n_out)
            .map(|k| {
                let lambda = lit(get(&format!("output{k}.lambda"))?);
                let ls = (1..=dim)
                    .map(|d| get(&format!("output{k}.lengthscale{d}")).map(lit))
                    .collect::<Result<Vec<T>>>()?;
                SeKernelParams::new(lambda, DVector::from_vec(ls))
            })
            .collect()
    }
}

/// Data-driven starting point: `λ` = target variance, `ℓ_d` = input spread.
pub fn default_init<T: Real>(dataset: &GpDataset<T>) -> Vec<SeKernelParams<T>> {
    let n = T::from_usize(dataset.len()).expect("dataset size fits in scalar");
    let spread = |col: DVector<T>| {
        let mean = col.sum() / n;
        let var = col.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean)) / n;
        var
    };
    let lengthscales = DVector::from_iterator(
        dataset.input_dim(),
        (0..dataset.input_dim()).map(|d| {
            let s = spread(dataset.inputs().column(d).into_owned()).sqrt();
            if s > lit(1e-6) {
                s
            } else {
                T::one()
            }
        }),
    );
    (0..dataset.n_outputs())
        .map(|i| {
            let v = spread(dataset.target_column(i));
            SeKernelParams {
                lambda: if v > lit(1e-12) { v } else { T::one() },
                lengthscales: lengthscales.clone(),
            }
        })
        .collect()
}
