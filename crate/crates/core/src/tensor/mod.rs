//! Dense order-3 tensors, flattenings and mode products.
//!
//! Storage is column-major in mode 1: entry `(a, b, c)` of a `d1 × d2 × d3`
//! tensor lives at `a + d1 * (b + d2 * c)`.
//!
//! Flattenings place mode-`m` fibers as columns. Columns are ordered
//! lexicographically over the two remaining modes with the later mode
//! varying fastest:
//!
//! | mode | row | column          |
//! |------|-----|-----------------|
//! | 1    | `a` | `b * d3 + c`    |
//! | 2    | `b` | `a * d3 + c`    |
//! | 3    | `c` | `a * d2 + b`    |
//!
//! With this order `flatten(T ×₁ A ×₂ B ×₃ C, 1) = A · flatten(T, 1) · (B ⊗ C)ᵀ`
//! using the standard Kronecker product.

mod svd;
mod tucker;

pub use svd::{left_singular, truncated_svd, SvdBackendConfig, SvdMode, TruncatedSvd};
pub use tucker::{hooi, hosvd, hosvd_ht, ThresholdedHosvd, TuckerFactors};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// One of the three modes of an order-3 tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    /// Zero-based axis index.
    pub fn axis(self) -> usize {
        match self {
            Mode::One => 0,
            Mode::Two => 1,
            Mode::Three => 2,
        }
    }

    /// One-based mode number, as used in error messages and reports.
    pub fn number(self) -> usize {
        self.axis() + 1
    }
}

impl TryFrom<usize> for Mode {
    type Error = Error;

    fn try_from(m: usize) -> Result<Self> {
        match m {
            1 => Ok(Mode::One),
            2 => Ok(Mode::Two),
            3 => Ok(Mode::Three),
            other => Err(Error::InvalidMode(other)),
        }
    }
}

/// Dense real tensor of order 3.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Self {
        Self {
            dims,
            data: vec![0.0; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dims);
        for c in 0..dims[2] {
            for b in 0..dims[1] {
                for a in 0..dims[0] {
                    let i = t.offset(a, b, c);
                    t.data[i] = f(a, b, c);
                }
            }
        }
        t
    }

    /// Wraps a buffer laid out in the crate's storage order.
    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::DimensionMismatch(format!(
                "buffer of length {} for dims {:?}",
                data.len(),
                dims
            )));
        }
        Ok(Self { dims, data })
    }

    /// I.i.d. standard normal entries.
    pub fn random<R: Rng + ?Sized>(dims: [usize; 3], rng: &mut R) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        let data = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn offset(&self, a: usize, b: usize, c: usize) -> usize {
        a + self.dims[0] * (b + self.dims[1] * c)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.data[self.offset(a, b, c)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, c: usize, v: f64) {
        let i = self.offset(a, b, c);
        self.data[i] = v;
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn dot(&self, other: &Tensor3) -> f64 {
        debug_assert_eq!(self.dims, other.dims);
        self.data.iter().zip(&other.data).map(|(x, y)| x * y).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    pub fn scaled(&self, s: f64) -> Tensor3 {
        let mut t = self.clone();
        t.scale(s);
        t
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        debug_assert_eq!(self.dims, other.dims);
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x - y).collect();
        Tensor3 {
            dims: self.dims,
            data,
        }
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        debug_assert_eq!(self.dims, other.dims);
        let data = self.data.iter().zip(&other.data).map(|(x, y)| x + y).collect();
        Tensor3 {
            dims: self.dims,
            data,
        }
    }

    /// `‖self − other‖ / ‖other‖`, or the absolute difference when `other` is zero.
    pub fn relative_error(&self, reference: &Tensor3) -> f64 {
        let diff = self.sub(reference).norm();
        let base = reference.norm();
        if base == 0.0 {
            diff
        } else {
            diff / base
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Outer product `a ∘ b ∘ c`.
    pub fn outer(a: &[f64], b: &[f64], c: &[f64]) -> Tensor3 {
        Tensor3::from_fn([a.len(), b.len(), c.len()], |i, j, k| a[i] * b[j] * c[k])
    }

    /// Mode-`mode` flattening; see the module docs for the column order.
    pub fn flatten(&self, mode: Mode) -> DMatrix<f64> {
        let [d1, d2, d3] = self.dims;
        match mode {
            Mode::One => DMatrix::from_fn(d1, d2 * d3, |a, col| {
                self.get(a, col / d3, col % d3)
            }),
            Mode::Two => DMatrix::from_fn(d2, d1 * d3, |b, col| {
                self.get(col / d3, b, col % d3)
            }),
            Mode::Three => DMatrix::from_fn(d3, d1 * d2, |c, col| {
                self.get(col / d2, col % d2, c)
            }),
        }
    }

    /// Like [`Tensor3::flatten`] but taking a one-based mode number.
    pub fn flatten_mode(&self, mode: usize) -> Result<DMatrix<f64>> {
        Ok(self.flatten(Mode::try_from(mode)?))
    }

    /// Exact inverse of [`Tensor3::flatten`].
    pub fn unflatten(m: &DMatrix<f64>, mode: Mode, dims: [usize; 3]) -> Result<Tensor3> {
        let [d1, d2, d3] = dims;
        let expected = match mode {
            Mode::One => (d1, d2 * d3),
            Mode::Two => (d2, d1 * d3),
            Mode::Three => (d3, d1 * d2),
        };
        if m.shape() != expected {
            return Err(Error::DimensionMismatch(format!(
                "matrix {:?} cannot unflatten to dims {:?} along mode {}",
                m.shape(),
                dims,
                mode.number()
            )));
        }
        let t = match mode {
            Mode::One => Tensor3::from_fn(dims, |a, b, c| m[(a, b * d3 + c)]),
            Mode::Two => Tensor3::from_fn(dims, |a, b, c| m[(b, a * d3 + c)]),
            Mode::Three => Tensor3::from_fn(dims, |a, b, c| m[(c, a * d2 + b)]),
        };
        Ok(t)
    }

    /// `self ×_mode u`; `u` must have as many columns as the mode's size.
    pub fn mode_product(&self, u: &DMatrix<f64>, mode: Mode) -> Result<Tensor3> {
        let size = self.dims[mode.axis()];
        if u.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "mode-{} product with a {}x{} matrix on a tensor of dims {:?}",
                mode.number(),
                u.nrows(),
                u.ncols(),
                self.dims
            )));
        }
        let mut dims = self.dims;
        dims[mode.axis()] = u.nrows();
        let product = u * self.flatten(mode);
        Tensor3::unflatten(&product, mode, dims)
    }

    /// Swaps modes 2 and 3.
    pub fn transpose23(&self) -> Tensor3 {
        let [d1, d2, d3] = self.dims;
        Tensor3::from_fn([d1, d3, d2], |a, b, c| self.get(a, c, b))
    }
}

/// Singular values of every flattening.
pub fn mode_singular_values(t: &Tensor3) -> [Vec<f64>; 3] {
    Mode::ALL.map(|m| singular_values(&t.flatten(m)))
}

/// Singular values of a matrix in non-increasing order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Number of singular values with `σ_i / σ_1 > rel_tol` in each flattening.
pub fn multilinear_rank(t: &Tensor3, rel_tol: f64) -> [usize; 3] {
    mode_singular_values(t).map(|s| numerical_rank(&s, rel_tol))
}

/// Counts `σ_i / σ_1 > rel_tol` in a non-increasing list.
pub fn numerical_rank(sorted: &[f64], rel_tol: f64) -> usize {
    match sorted.first() {
        Some(&top) if top > 0.0 => sorted.iter().filter(|&&s| s / top > rel_tol).count(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mode1_flattening_is_lexicographic() {
        let t = Tensor3::from_fn([2, 2, 2], |a, b, c| (4 * a + 2 * b + c) as f64);
        let m = t.flatten(Mode::One);
        let expected = DMatrix::from_row_slice(2, 4, &[0., 1., 2., 3., 4., 5., 6., 7.]);
        assert_eq!(m, expected);
    }

    #[test]
    fn flattening_norms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = Tensor3::random([3, 4, 5], &mut rng);
        for m in Mode::ALL {
            assert!((t.flatten(m).norm() - t.norm()).abs() <= 1e-14 * t.norm());
        }
    }

    #[test]
    fn unflatten_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = Tensor3::random([3, 4, 5], &mut rng);
        for m in Mode::ALL {
            let back = Tensor3::unflatten(&t.flatten(m), m, t.dims()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn unflatten_edge_cases() {
        let z = Tensor3::unflatten(&DMatrix::zeros(3, 20), Mode::One, [3, 4, 5]).unwrap();
        assert_eq!(z, Tensor3::zeros([3, 4, 5]));
        let s = Tensor3::from_vec([1, 1, 1], vec![2.5]).unwrap();
        for m in Mode::ALL {
            assert_eq!(Tensor3::unflatten(&s.flatten(m), m, [1, 1, 1]).unwrap(), s);
        }
        assert!(matches!(
            Tensor3::unflatten(&DMatrix::zeros(3, 19), Mode::One, [3, 4, 5]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn invalid_mode_numbers_are_rejected() {
        let t = Tensor3::zeros([2, 2, 2]);
        assert!(matches!(t.flatten_mode(0), Err(Error::InvalidMode(0))));
        assert!(matches!(t.flatten_mode(4), Err(Error::InvalidMode(4))));
        assert!(t.flatten_mode(3).is_ok());
    }

    #[test]
    fn identity_mode_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Tensor3::random([3, 4, 5], &mut rng);
        for m in Mode::ALL {
            let id = DMatrix::identity(t.dims()[m.axis()], t.dims()[m.axis()]);
            assert_eq!(t.mode_product(&id, m).unwrap(), t);
        }
    }

    #[test]
    fn mode_products_on_distinct_modes_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let t = Tensor3::random([4, 5, 6], &mut rng);
        let a: DMatrix<f64> = DMatrix::from_fn(3, 4, |_, _| rng.sample(StandardNormal));
        let b: DMatrix<f64> = DMatrix::from_fn(7, 5, |_, _| rng.sample(StandardNormal));
        let ab = t
            .mode_product(&a, Mode::One)
            .unwrap()
            .mode_product(&b, Mode::Two)
            .unwrap();
        let ba = t
            .mode_product(&b, Mode::Two)
            .unwrap()
            .mode_product(&a, Mode::One)
            .unwrap();
        assert!(ab.relative_error(&ba) <= 1e-12);
    }

    #[test]
    fn mode_product_of_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.sample(StandardNormal)).collect();
        let c: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
        let u: DMatrix<f64> = DMatrix::from_fn(5, 3, |_, _| rng.sample(StandardNormal));
        let t = Tensor3::outer(&a, &b, &c);
        let ua = &u * nalgebra::DVector::from_column_slice(&a);
        let expected = Tensor3::outer(ua.as_slice(), &b, &c);
        let got = t.mode_product(&u, Mode::One).unwrap();
        assert!(got.relative_error(&expected) <= 1e-13);
    }

    #[test]
    fn mode_product_dimension_mismatch() {
        let t = Tensor3::zeros([2, 3, 4]);
        let u = DMatrix::zeros(2, 2);
        assert!(matches!(
            t.mode_product(&u, Mode::Two),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn rank_of_outer_product() {
        let t = Tensor3::outer(&[1.0, 2.0], &[3.0, -1.0, 0.5], &[1.0, 1.0]);
        assert_eq!(multilinear_rank(&t, 1e-10), [1, 1, 1]);
        assert_eq!(multilinear_rank(&Tensor3::zeros([2, 2, 2]), 1e-10), [0, 0, 0]);
    }
}
