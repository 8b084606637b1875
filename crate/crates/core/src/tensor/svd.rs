use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Which SVD algorithm backs the truncated factorizations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SvdMode {
    Exact,
    Randomized,
}

/// SVD backend selection. Randomized mode is a Gaussian range finder with
/// QR-stabilized power iterations; the seed makes it deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SvdBackendConfig {
    pub mode: SvdMode,
    pub oversampling: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for SvdBackendConfig {
    fn default() -> Self {
        Self::exact()
    }
}

impl SvdBackendConfig {
    pub fn exact() -> Self {
        Self {
            mode: SvdMode::Exact,
            oversampling: 10,
            power_iterations: 2,
            seed: 0,
        }
    }

    pub fn randomized(seed: u64) -> Self {
        Self {
            mode: SvdMode::Randomized,
            seed,
            ..Self::exact()
        }
    }
}

/// Leading-`k` singular triplets: `M ≈ U · diag(S) · Vᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let s = DMatrix::from_diagonal(&DVector::from_column_slice(&self.s));
        &self.u * s * self.v.transpose()
    }
}

/// Full thin SVD with singular values sorted in non-increasing order.
fn sorted_svd(m: &DMatrix<f64>) -> TruncatedSvd {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let v = DMatrix::from_fn(v_t.ncols(), order.len(), |r, c| v_t[(order[c], r)]);
    TruncatedSvd { u, s, v }
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn randomized_svd(m: &DMatrix<f64>, k: usize, cfg: &SvdBackendConfig) -> TruncatedSvd {
    let (rows, cols) = m.shape();
    let l = (k + cfg.oversampling).min(rows.min(cols));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let omega = DMatrix::from_fn(cols, l, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(m * omega);
    for _ in 0..cfg.power_iterations {
        let z = orthonormalize(m.transpose() * &q);
        q = orthonormalize(m * z);
    }
    let b = q.transpose() * m;
    let small = sorted_svd(&b);
    TruncatedSvd {
        u: (q * small.u).columns(0, k).into_owned(),
        s: small.s[..k].to_vec(),
        v: small.v.columns(0, k).into_owned(),
    }
}

/// Leading `k` singular triplets of `m`.
pub fn truncated_svd(m: &DMatrix<f64>, k: usize, cfg: &SvdBackendConfig) -> Result<TruncatedSvd> {
    let limit = m.nrows().min(m.ncols());
    if k == 0 || k > limit {
        return Err(Error::RankOutOfRange {
            mode: 0,
            rank: k,
            size: limit,
        });
    }
    Ok(match cfg.mode {
        SvdMode::Exact => {
            let full = sorted_svd(m);
            TruncatedSvd {
                u: full.u.columns(0, k).into_owned(),
                s: full.s[..k].to_vec(),
                v: full.v.columns(0, k).into_owned(),
            }
        }
        SvdMode::Randomized => randomized_svd(m, k, cfg),
    })
}

/// Left singular vectors and singular values of `m`.
///
/// With `k = None` the exact backend returns every singular value. The
/// randomized backend needs a target; it returns `k` columns and values.
pub fn left_singular(
    m: &DMatrix<f64>,
    k: Option<usize>,
    cfg: &SvdBackendConfig,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let limit = m.nrows().min(m.ncols());
    match (cfg.mode, k) {
        (SvdMode::Exact, None) | (SvdMode::Randomized, None) => {
            // A thin QR of the tall transpose shrinks the problem to a square one.
            let full = if m.ncols() > 2 * m.nrows() {
                let r = m.transpose().qr().r();
                sorted_svd(&r.transpose())
            } else {
                sorted_svd(m)
            };
            Ok((full.u, full.s))
        }
        (_, Some(k)) => {
            let t = truncated_svd(m, k.min(limit), cfg)?;
            Ok((t.u, t.s))
        }
    }
}
