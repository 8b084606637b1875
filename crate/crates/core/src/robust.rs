//! Tyler-type robust covariance and subspace estimators, and HOrSTE.
//!
//! Samples are the columns of a `D x N` matrix. All estimators start from
//! `Σ = I/D` and stop when the relative Frobenius change of `Σ` drops below
//! `conv_tol` or after `max_iters` steps.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{Mode, Tensor3, TuckerFactors};

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceConfig {
    /// Target subspace dimension.
    pub d: usize,
    /// Shrink factor for the trailing eigenvalues, in (0, 1).
    pub ste_gamma: f64,
    pub reg_alpha: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
}

impl Default for SubspaceConfig {
    fn default() -> Self {
        Self {
            d: 4,
            ste_gamma: 0.9,
            reg_alpha: 0.05,
            max_iters: 200,
            conv_tol: 1e-8,
        }
    }
}

impl SubspaceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ste_gamma > 0.0 && self.ste_gamma < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "ste_gamma must lie in (0, 1), got {}",
                self.ste_gamma
            )));
        }
        if !(self.reg_alpha >= 0.0 && self.reg_alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("reg_alpha must be >= 0, got {}", self.reg_alpha)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.conv_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("conv_tol must be positive, got {}", self.conv_tol)));
        }
        Ok(())
    }
}

/// Symmetric positive-definite scatter estimate with unit trace.
#[derive(Clone, Debug)]
pub struct CovarianceEstimate {
    pub sigma: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug)]
pub struct SubspaceEstimate {
    /// `D x d` orthonormal basis of the leading eigenvectors.
    pub basis: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_samples(x: &DMatrix<f64>) -> Result<()> {
    for (i, c) in x.column_iter().enumerate() {
        let n = c.norm();
        if n == 0.0 {
            return Err(Error::ZeroSample(i));
        }
        if !n.is_finite() {
            return Err(Error::Numerical(format!("sample {i} is not finite")));
        }
    }
    Ok(())
}

fn trace_normalized(mut s: DMatrix<f64>) -> DMatrix<f64> {
    let s2 = (&s + s.transpose()) * 0.5;
    s.copy_from(&s2);
    let tr = s.trace();
    s / tr
}

/// `(D/N) Σ x xᵀ / (xᵀ Σ⁻¹ x)`.
fn tyler_step(x: &DMatrix<f64>, sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (dim, n) = x.shape();
    let chol = sigma
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("scatter matrix lost positive definiteness".into()))?;
    let solved = chol.solve(x);
    let mut weighted = x.clone();
    for (i, mut col) in weighted.column_iter_mut().enumerate() {
        let q = x.column(i).dot(&solved.column(i));
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::Numerical(format!("degenerate Mahalanobis norm for sample {i}")));
        }
        col /= q;
    }
    Ok(weighted * x.transpose() * (dim as f64 / n as f64))
}

/// `(1/(1+α)) (D/N) Σ x xᵀ / (xᵀ Σ⁻¹ x) + (α/(1+α)) I`.
fn regularized_step(x: &DMatrix<f64>, sigma: &DMatrix<f64>, alpha: f64) -> Result<DMatrix<f64>> {
    let dim = x.nrows();
    let z = tyler_step(x, sigma)?;
    Ok(z / (1.0 + alpha) + DMatrix::identity(dim, dim) * (alpha / (1.0 + alpha)))
}

/// Rescales so that `tr(Σ⁻¹) = D`, which every regularized fixed point
/// satisfies. Removes the slow scale mode of the plain iteration.
fn inverse_trace_normalized(s: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = s.nrows() as f64;
    let inv = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("scatter matrix lost positive definiteness".into()))?
        .inverse();
    Ok(s * (inv.trace() / dim))
}

fn relative_change(new: &DMatrix<f64>, old: &DMatrix<f64>) -> f64 {
    (new - old).norm() / old.norm()
}

fn iterate(
    mut sigma: DMatrix<f64>,
    cfg: &SubspaceConfig,
    mut step: impl FnMut(&DMatrix<f64>) -> Result<DMatrix<f64>>,
) -> Result<CovarianceEstimate> {
    for it in 1..=cfg.max_iters {
        let next = step(&sigma).map_err(|e| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        })?;
        let change = relative_change(&next, &sigma);
        sigma = next;
        if change < cfg.conv_tol {
            return Ok(CovarianceEstimate {
                sigma: trace_normalized(sigma),
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(CovarianceEstimate {
        sigma: trace_normalized(sigma),
        iterations: cfg.max_iters,
        converged: false,
    })
}

/// Tyler's M-estimator of scatter.
pub fn tme(x: &DMatrix<f64>, cfg: &SubspaceConfig) -> Result<CovarianceEstimate> {
    cfg.validate()?;
    let (dim, n) = x.shape();
    if n <= dim {
        return Err(Error::TooFewSamples { samples: n, dim });
    }
    check_samples(x)?;
    let start = DMatrix::identity(dim, dim) / dim as f64;
    iterate(start, cfg, |s| Ok(trace_normalized(tyler_step(x, s)?)))
}

/// Regularized Tyler estimator, shrunk toward the identity by `reg_alpha`.
///
/// A fixed point exists only when `α/(1+α) > 1 − N/D`, so with `N ≤ D`
/// the regularization has to be strong enough.
pub fn regularized_tme(x: &DMatrix<f64>, cfg: &SubspaceConfig) -> Result<CovarianceEstimate> {
    cfg.validate()?;
    let (dim, n) = x.shape();
    let rho = cfg.reg_alpha / (1.0 + cfg.reg_alpha);
    if n <= dim && rho <= 1.0 - n as f64 / dim as f64 {
        if cfg.reg_alpha == 0.0 {
            return Err(Error::TooFewSamples { samples: n, dim });
        }
        return Err(Error::InvalidConfig(format!(
            "reg_alpha {} too small for {n} samples in dimension {dim}",
            cfg.reg_alpha
        )));
    }
    check_samples(x)?;
    // I/D rescaled so that tr(Σ⁻¹) = D.
    let start = DMatrix::identity(dim, dim);
    iterate(start, cfg, |s| inverse_trace_normalized(regularized_step(x, s, cfg.reg_alpha)?))
}

/// Replaces the trailing `D - d` eigenvalues by `gamma` times their mean.
/// Returns the modified matrix and its leading `d` eigenvectors.
pub fn shrink_trailing(z: &DMatrix<f64>, d: usize, gamma: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = z.nrows();
    let eig = SymmetricEigen::new(z.clone());
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let trailing_mean =
        order[d..].iter().map(|&i| eig.eigenvalues[i]).sum::<f64>() / (dim - d) as f64;
    let floor = (gamma * trailing_mean).max(1e-12 * top).max(f64::MIN_POSITIVE);
    let mut vals = eig.eigenvalues.clone();
    for &i in &order[d..] {
        vals[i] = floor;
    }
    for &i in &order[..d] {
        vals[i] = vals[i].max(floor);
    }
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&vals) * v.transpose();
    let basis = DMatrix::from_fn(dim, d, |r, c| v[(r, order[c])]);
    (rebuilt, basis)
}

fn subspace_iterate(
    x: &DMatrix<f64>,
    cfg: &SubspaceConfig,
    alpha: f64,
) -> Result<SubspaceEstimate> {
    cfg.validate()?;
    let (dim, n) = x.shape();
    if cfg.d == 0 || cfg.d >= dim {
        return Err(Error::InvalidConfig(format!(
            "subspace dimension must lie in [1, {dim}), got {}",
            cfg.d
        )));
    }
    if n < cfg.d {
        return Err(Error::TooFewSamples { samples: n, dim: cfg.d });
    }
    check_samples(x)?;
    let mut sigma = DMatrix::identity(dim, dim) / dim as f64;
    let mut basis = DMatrix::zeros(dim, cfg.d);
    for it in 1..=cfg.max_iters {
        let z = if alpha > 0.0 {
            // Σ is kept at unit trace; the regularizer is calibrated for trace D.
            regularized_step(x, &(&sigma * dim as f64), alpha)
        } else {
            tyler_step(x, &sigma)
        }
        .map_err(|e| Error::Iteration {
            iteration: it,
            source: Box::new(e),
        })?;
        let (shrunk, b) = shrink_trailing(&z, cfg.d, cfg.ste_gamma);
        basis = b;
        let next = trace_normalized(shrunk);
        let change = relative_change(&next, &sigma);
        sigma = next;
        if change < cfg.conv_tol {
            return Ok(SubspaceEstimate {
                basis,
                sigma,
                iterations: it,
                converged: true,
            });
        }
    }
    Ok(SubspaceEstimate {
        basis,
        sigma,
        iterations: cfg.max_iters,
        converged: false,
    })
}

/// Subspace-constrained Tyler estimator.
pub fn ste(x: &DMatrix<f64>, cfg: &SubspaceConfig) -> Result<SubspaceEstimate> {
    subspace_iterate(x, cfg, 0.0)
}

/// STE with the regularized Tyler step, usable when `N <= D`.
pub fn regularized_ste(x: &DMatrix<f64>, cfg: &SubspaceConfig) -> Result<SubspaceEstimate> {
    subspace_iterate(x, cfg, cfg.reg_alpha)
}

/// Largest principal angle between the column spaces of `a` and `b`, radians.
pub fn largest_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let (small, big) = if qa.ncols() <= qb.ncols() { (qa, qb) } else { (qb, qa) };
    let resid = &small - &big * (big.transpose() * &small);
    let s = resid.singular_values().max().min(1.0);
    s.asin()
}

/// Robust Tucker approximation: each factor is the leading basis of
/// regularized STE applied to the nonzero columns of the flattening.
pub fn horste(t: &Tensor3, ranks: [usize; 3], cfg: &SubspaceConfig) -> Result<TuckerFactors> {
    let factors: Vec<DMatrix<f64>> = Mode::ALL
        .par_iter()
        .map(|&mode| {
            let m = t.flatten(mode);
            let keep: Vec<usize> = (0..m.ncols()).filter(|&c| m.column(c).norm() > 0.0).collect();
            if keep.is_empty() {
                return Err(Error::Degenerate(format!(
                    "mode-{} flattening has no nonzero columns",
                    mode.number()
                )));
            }
            let samples = m.select_columns(&keep);
            let mode_cfg = SubspaceConfig {
                d: ranks[mode.axis()],
                ..cfg.clone()
            };
            Ok(regularized_ste(&samples, &mode_cfg)?.basis)
        })
        .collect::<Result<_>>()?;
    let [a, b, c]: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
    TuckerFactors::from_factors(t, [a, b, c])
}
