use nalgebra::DMatrix;
use rayon::prelude::*;

use super::svd::{left_singular, SvdBackendConfig, SvdMode};
use super::{Mode, Tensor3};
use crate::error::{Error, Result};

/// Tucker decomposition `T ≈ core ×₁ A₁ ×₂ A₂ ×₃ A₃` with orthonormal factors.
#[derive(Clone, Debug)]
pub struct TuckerFactors {
    pub core: Tensor3,
    pub factors: [DMatrix<f64>; 3],
}

impl TuckerFactors {
    /// Projects `t` onto the span of the given orthonormal factors.
    pub fn from_factors(t: &Tensor3, factors: [DMatrix<f64>; 3]) -> Result<Self> {
        let mut core = t.clone();
        for m in Mode::ALL {
            core = core.mode_product(&factors[m.axis()].transpose(), m)?;
        }
        Ok(Self { core, factors })
    }

    pub fn ranks(&self) -> [usize; 3] {
        self.core.dims()
    }

    pub fn reconstruct(&self) -> Tensor3 {
        let mut t = self.core.clone();
        for m in Mode::ALL {
            t = t
                .mode_product(&self.factors[m.axis()], m)
                .expect("factor shapes match the core");
        }
        t
    }
}

fn leading_columns(u: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    u.columns(0, k).into_owned()
}

/// Truncated HOSVD: each factor holds the leading left singular vectors of
/// the matching flattening.
pub fn hosvd(t: &Tensor3, ranks: [usize; 3], cfg: &SvdBackendConfig) -> Result<TuckerFactors> {
    let dims = t.dims();
    for m in Mode::ALL {
        let (r, d) = (ranks[m.axis()], dims[m.axis()]);
        if r == 0 || r > d {
            return Err(Error::RankOutOfRange {
                mode: m.number(),
                rank: r,
                size: d,
            });
        }
    }
    let factors: Vec<DMatrix<f64>> = Mode::ALL
        .par_iter()
        .map(|&m| {
            let flat = t.flatten(m);
            let r = ranks[m.axis()];
            let target = match cfg.mode {
                SvdMode::Exact => None,
                SvdMode::Randomized => Some(r),
            };
            let (u, _) = left_singular(&flat, target, cfg)?;
            if u.ncols() < r {
                // A flattening can have fewer columns than rows; pad with an
                // orthonormal complement so the requested rank is honoured.
                return Ok(complete_basis(&u, r));
            }
            Ok(leading_columns(&u, r))
        })
        .collect::<Result<_>>()?;
    let factors: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
    TuckerFactors::from_factors(t, factors)
}

/// Extends an orthonormal basis to `r` columns by Gram-Schmidt on the
/// coordinate vectors, taking the least-covered one each time.
fn complete_basis(u: &DMatrix<f64>, r: usize) -> DMatrix<f64> {
    let d = u.nrows();
    let mut out = DMatrix::zeros(d, r);
    out.columns_mut(0, u.ncols()).copy_from(u);
    for c in u.ncols()..r {
        let basis = out.columns(0, c);
        let mut best = nalgebra::DVector::zeros(d);
        for i in 0..d {
            let mut e = nalgebra::DVector::zeros(d);
            e[i] = 1.0;
            for _ in 0..2 {
                let coeff = basis.transpose() * &e;
                e -= &basis * coeff;
            }
            if e.norm() > best.norm() {
                best = e;
            }
        }
        let norm = best.norm();
        out.column_mut(c).copy_from(&(best / norm));
    }
    out
}

/// Result of HOSVD with hard singular-value thresholds.
#[derive(Clone, Debug)]
pub struct ThresholdedHosvd {
    pub tensor: Tensor3,
    pub ranks: [usize; 3],
    /// Singular values computed per mode, non-increasing. In exact mode this is
    /// the whole spectrum of the flattening.
    pub singular_values: [Vec<f64>; 3],
    pub factors: TuckerFactors,
}

fn thresholded_basis(
    flat: &DMatrix<f64>,
    threshold: f64,
    cfg: &SvdBackendConfig,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    match cfg.mode {
        SvdMode::Exact => left_singular(flat, None, cfg),
        SvdMode::Randomized => {
            // Grow the sketch until a computed value falls below the threshold.
            let limit = flat.nrows().min(flat.ncols());
            let mut k = 8.min(limit);
            loop {
                let (u, s) = left_singular(flat, Some(k), cfg)?;
                if k == limit || s.last().is_some_and(|&x| x <= threshold) {
                    return Ok((u, s));
                }
                k = (2 * k).min(limit);
            }
        }
    }
}

/// HOSVD keeping, per mode, every singular direction with `σ > l_m`.
pub fn hosvd_ht(
    t: &Tensor3,
    thresholds: [f64; 3],
    cfg: &SvdBackendConfig,
) -> Result<ThresholdedHosvd> {
    if thresholds.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidConfig(format!(
            "thresholds must be nonnegative, got {thresholds:?}"
        )));
    }
    let per_mode: Vec<(DMatrix<f64>, Vec<f64>)> = Mode::ALL
        .par_iter()
        .map(|&m| thresholded_basis(&t.flatten(m), thresholds[m.axis()], cfg))
        .collect::<Result<_>>()?;
    let mut ranks = [0; 3];
    let mut factors = Vec::with_capacity(3);
    let mut spectra = Vec::with_capacity(3);
    for (m, (u, s)) in Mode::ALL.into_iter().zip(per_mode) {
        let l = thresholds[m.axis()];
        let a = s.iter().take_while(|&&x| x > l).count();
        if a == 0 {
            return Err(Error::ThresholdTooHigh {
                mode: m.number(),
                threshold: l,
            });
        }
        ranks[m.axis()] = a;
        factors.push(leading_columns(&u, a));
        spectra.push(s);
    }
    let factors: [DMatrix<f64>; 3] = factors.try_into().expect("three modes");
    let tucker = TuckerFactors::from_factors(t, factors)?;
    Ok(ThresholdedHosvd {
        tensor: tucker.reconstruct(),
        ranks,
        singular_values: spectra.try_into().expect("three modes"),
        factors: tucker,
    })
}

/// Higher-order orthogonal iteration started from the HOSVD.
pub fn hooi(t: &Tensor3, ranks: [usize; 3], max_iters: usize, tol: f64) -> Result<TuckerFactors> {
    let cfg = SvdBackendConfig::exact();
    let mut current = hosvd(t, ranks, &cfg)?;
    let mut prev_norm = current.core.norm();
    for _ in 0..max_iters {
        let mut factors = current.factors.clone();
        for m in Mode::ALL {
            let mut y = t.clone();
            for other in Mode::ALL.into_iter().filter(|&o| o != m) {
                y = y.mode_product(&factors[other.axis()].transpose(), other)?;
            }
            let (u, _) = left_singular(&y.flatten(m), None, &cfg)?;
            let r = ranks[m.axis()];
            factors[m.axis()] = if u.ncols() < r {
                complete_basis(&u, r)
            } else {
                leading_columns(&u, r)
            };
        }
        current = TuckerFactors::from_factors(t, factors)?;
        let norm = current.core.norm();
        if (norm - prev_norm).abs() <= tol * norm.max(f64::MIN_POSITIVE) {
            break;
        }
        prev_norm = norm;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::multilinear_rank;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_orthonormal(d: usize, r: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(d, r, |_, _| rng.sample(StandardNormal))
            .qr()
            .q()
    }

    fn low_rank(dims: [usize; 3], ranks: [usize; 3], rng: &mut ChaCha8Rng) -> Tensor3 {
        let core = Tensor3::random(ranks, rng);
        let f = [0, 1, 2].map(|m| random_orthonormal(dims[m], ranks[m], rng));
        TuckerFactors { core, factors: f }.reconstruct()
    }

    fn gram_defect(u: &DMatrix<f64>) -> f64 {
        (u.transpose() * u - DMatrix::identity(u.ncols(), u.ncols())).norm()
    }

    #[test]
    fn exact_low_rank_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = low_rank([5, 6, 7], [2, 2, 2], &mut rng);
        let h = hosvd(&t, [2, 2, 2], &SvdBackendConfig::exact()).unwrap();
        assert!(h.reconstruct().relative_error(&t) <= 1e-12);
        for f in &h.factors {
            assert!(gram_defect(f) <= 1e-10);
        }
    }

    #[test]
    fn full_ranks_are_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let t = Tensor3::random([3, 4, 5], &mut rng);
        let h = hosvd(&t, [3, 4, 5], &SvdBackendConfig::exact()).unwrap();
        assert!(h.reconstruct().relative_error(&t) <= 1e-12);
    }

    #[test]
    fn ranks_larger_than_flattening_columns_are_padded() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let t = Tensor3::random([7, 2, 2], &mut rng);
        let h = hosvd(&t, [6, 2, 2], &SvdBackendConfig::exact()).unwrap();
        assert_eq!(h.factors[0].ncols(), 6);
        assert!(gram_defect(&h.factors[0]) <= 1e-10);
        assert!(h.reconstruct().relative_error(&t) <= 1e-12);
    }

    #[test]
    fn rank_out_of_range() {
        let t = Tensor3::zeros([2, 3, 4]);
        let err = hosvd(&t, [3, 1, 1], &SvdBackendConfig::exact()).unwrap_err();
        assert!(matches!(err, Error::RankOutOfRange { mode: 1, .. }));
    }

    #[test]
    fn zero_threshold_on_full_rank_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let t = Tensor3::random([4, 4, 4], &mut rng);
        let h = hosvd_ht(&t, [0.0; 3], &SvdBackendConfig::exact()).unwrap();
        assert_eq!(h.ranks, [4, 4, 4]);
        assert!(h.tensor.relative_error(&t) <= 1e-12);
    }

    #[test]
    fn rank_one_thresholded() {
        let t = Tensor3::outer(&[1.0, -2.0, 0.5], &[0.3, 1.0], &[2.0, 1.0, 1.0, -1.0]);
        let s = t.norm();
        let h = hosvd_ht(&t, [0.5 * s; 3], &SvdBackendConfig::exact()).unwrap();
        assert_eq!(h.ranks, [1, 1, 1]);
        assert!(h.tensor.relative_error(&t) <= 1e-12);
    }

    #[test]
    fn threshold_too_high_names_mode() {
        let t = Tensor3::outer(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        let err = hosvd_ht(&t, [0.5, 2.0, 0.5], &SvdBackendConfig::exact()).unwrap_err();
        assert!(matches!(err, Error::ThresholdTooHigh { mode: 2, .. }));
    }

    #[test]
    fn ties_are_excluded() {
        let t = Tensor3::outer(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]);
        assert!(hosvd_ht(&t, [1.0, 0.5, 0.5], &SvdBackendConfig::exact()).is_err());
    }

    #[test]
    fn randomized_hosvd_ht_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let t = low_rank([20, 20, 20], [6, 4, 4], &mut rng);
        let l = [1e-8 * t.norm(); 3];
        let exact = hosvd_ht(&t, l, &SvdBackendConfig::exact()).unwrap();
        let rand = hosvd_ht(&t, l, &SvdBackendConfig::randomized(5)).unwrap();
        assert_eq!(exact.ranks, [6, 4, 4]);
        assert_eq!(rand.ranks, [6, 4, 4]);
        assert!(rand.tensor.relative_error(&exact.tensor) <= 1e-10);
    }

    #[test]
    fn output_rank_bounded_by_retained() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let t = Tensor3::random([6, 6, 6], &mut rng);
        let h = hosvd_ht(&t, [2.0, 2.5, 3.0], &SvdBackendConfig::exact()).unwrap();
        let r = multilinear_rank(&h.tensor, 1e-10);
        for m in 0..3 {
            assert!(r[m] <= h.ranks[m]);
        }
    }

    #[test]
    fn hooi_does_not_lose_to_hosvd() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let t = Tensor3::random([6, 7, 8], &mut rng);
        let ranks = [2, 3, 3];
        let a = hosvd(&t, ranks, &SvdBackendConfig::exact()).unwrap();
        let b = hooi(&t, ranks, 50, 1e-12).unwrap();
        let ea = t.sub(&a.reconstruct()).norm();
        let eb = t.sub(&b.reconstruct()).norm();
        assert!(eb <= ea * (1.0 + 1e-12));
        assert!(ea <= 3f64.sqrt() * eb);
    }
}
