//! The `(3n)³` block trifocal tensor and its Tucker structure.
//!
//! Block `(i, j, k)` occupies rows `3i..3i+3`, `3j..3j+3`, `3k..3k+3` of a
//! single dense [`Tensor3`]. Observation masks and scale fields are indexed
//! by `i + n * (j + n * k)`, the same order as the tensor storage.

use nalgebra::{DMatrix, Matrix3};
use rayon::prelude::*;

use crate::camera::{fundamental_from_cameras, line_projection_matrix, CameraMatrix};
use crate::error::{Error, Result};
use crate::tensor::{mode_singular_values, Mode, Tensor3};
use crate::trifocal::trifocal_from_cameras;

/// Block tensor plus its observation mask.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTensor {
    n: usize,
    tensor: Tensor3,
    mask: Vec<bool>,
}

#[inline]
fn triple_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    i + n * (j + n * k)
}

/// Every ordered triple `(i, j, k)` in mask order.
pub fn triples(n: usize) -> impl Iterator<Item = (usize, usize, usize)> {
    (0..n).flat_map(move |k| (0..n).flat_map(move |j| (0..n).map(move |i| (i, j, k))))
}

impl BlockTensor {
    /// Zero tensor with every block unobserved except the diagonal.
    pub fn empty(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidConfig(format!("need at least 3 cameras, got {n}")));
        }
        let mut mask = vec![false; n * n * n];
        for i in 0..n {
            mask[triple_index(n, i, i, i)] = true;
        }
        Ok(Self {
            n,
            tensor: Tensor3::zeros([3 * n; 3]),
            mask,
        })
    }

    /// Wraps a tensor and mask; unobserved blocks are zeroed.
    pub fn from_parts(tensor: Tensor3, mask: Vec<bool>) -> Result<Self> {
        let d = tensor.dims()[0];
        if tensor.dims() != [d; 3] || d % 3 != 0 {
            return Err(Error::DimensionMismatch(format!(
                "block tensor dims must be (3n,3n,3n), got {:?}",
                tensor.dims()
            )));
        }
        let n = d / 3;
        if mask.len() != n * n * n {
            return Err(Error::DimensionMismatch(format!(
                "mask of length {} for n = {n}",
                mask.len()
            )));
        }
        let mut out = Self::empty(n)?;
        out.tensor = tensor;
        for (i, j, k) in triples(n) {
            let observed = mask[triple_index(n, i, j, k)] || (i == j && j == k);
            out.mask[triple_index(n, i, j, k)] = observed;
            if !observed {
                out.set_block(i, j, k, &Tensor3::zeros([3, 3, 3]));
            }
        }
        Ok(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.tensor
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.tensor
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_observed(&self, i: usize, j: usize, k: usize) -> bool {
        self.mask[triple_index(self.n, i, j, k)]
    }

    pub fn set_observed(&mut self, i: usize, j: usize, k: usize, observed: bool) {
        let diagonal = i == j && j == k;
        self.mask[triple_index(self.n, i, j, k)] = observed || diagonal;
        if !observed && !diagonal {
            self.set_block(i, j, k, &Tensor3::zeros([3, 3, 3]));
        }
    }

    pub fn observed_fraction(&self) -> f64 {
        self.mask.iter().filter(|&&m| m).count() as f64 / self.mask.len() as f64
    }

    pub fn block(&self, i: usize, j: usize, k: usize) -> Tensor3 {
        block_of(&self.tensor, i, j, k)
    }

    pub fn set_block(&mut self, i: usize, j: usize, k: usize, b: &Tensor3) {
        set_block_of(&mut self.tensor, i, j, k, b);
    }

    /// Cameras that appear in no observed off-diagonal block.
    pub fn orphan_cameras(&self) -> Vec<usize> {
        let mut covered = vec![false; self.n];
        for (i, j, k) in triples(self.n) {
            if self.is_observed(i, j, k) && !(i == j && j == k) {
                covered[i] = true;
                covered[j] = true;
                covered[k] = true;
            }
        }
        (0..self.n).filter(|&c| !covered[c]).collect()
    }
}

/// Copy of block `(i, j, k)` of a `(3n)³` tensor.
pub fn block_of(t: &Tensor3, i: usize, j: usize, k: usize) -> Tensor3 {
    Tensor3::from_fn([3, 3, 3], |w, q, r| t.get(3 * i + w, 3 * j + q, 3 * k + r))
}

/// Overwrites block `(i, j, k)` of a `(3n)³` tensor.
pub fn set_block_of(t: &mut Tensor3, i: usize, j: usize, k: usize, b: &Tensor3) {
    for r in 0..3 {
        for q in 0..3 {
            for w in 0..3 {
                t.set(3 * i + w, 3 * j + q, 3 * k + r, b.get(w, q, r));
            }
        }
    }
}

/// Fully observed block tensor of the given cameras.
pub fn build_block_tensor(cameras: &[CameraMatrix]) -> Result<BlockTensor> {
    let n = cameras.len();
    let mut out = BlockTensor::empty(n)?;
    let all: Vec<(usize, usize, usize)> = triples(n).collect();
    let blocks: Vec<Tensor3> = all
        .par_iter()
        .map(|&(i, j, k)| trifocal_from_cameras(&cameras[i], &cameras[j], &cameras[k]))
        .collect();
    for (&(i, j, k), b) in all.iter().zip(&blocks) {
        out.set_block(i, j, k, b);
    }
    out.mask.iter_mut().for_each(|m| *m = true);
    Ok(out)
}

/// The constant 6×4×4 core. Slice `s` is indexed by the camera columns of
/// the second and third modes.
pub fn core_tensor() -> Tensor3 {
    const ENTRIES: [(usize, usize, usize, f64); 12] = [
        (0, 2, 3, 1.0),
        (0, 3, 2, -1.0),
        (1, 1, 3, -1.0),
        (1, 3, 1, 1.0),
        (2, 1, 2, 1.0),
        (2, 2, 1, -1.0),
        (3, 0, 3, 1.0),
        (3, 3, 0, -1.0),
        (4, 0, 2, -1.0),
        (4, 2, 0, 1.0),
        (5, 0, 1, 1.0),
        (5, 1, 0, -1.0),
    ];
    let mut g = Tensor3::zeros([6, 4, 4]);
    for (s, v, u, x) in ENTRIES {
        g.set(s, v, u, x);
    }
    g
}

/// Stacked cameras `𝒞` (3n×4) and stacked line-projection matrices `𝒫` (3n×6).
#[derive(Clone, Debug)]
pub struct FactorStacks {
    pub c: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

pub fn camera_stack(cameras: &[CameraMatrix]) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(3 * cameras.len(), 4);
    for (i, cam) in cameras.iter().enumerate() {
        c.view_mut((3 * i, 0), (3, 4)).copy_from(cam.matrix());
    }
    c
}

/// Core and factor stacks with `T = 𝒢 ×₁ 𝒫 ×₂ 𝒞 ×₃ 𝒞`.
pub fn tucker_factors(cameras: &[CameraMatrix]) -> Result<(Tensor3, FactorStacks)> {
    if cameras.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "need at least 3 cameras, got {}",
            cameras.len()
        )));
    }
    let mut p = DMatrix::zeros(3 * cameras.len(), 6);
    for (i, cam) in cameras.iter().enumerate() {
        p.view_mut((3 * i, 0), (3, 6))
            .copy_from(&line_projection_matrix(cam).0);
    }
    Ok((
        core_tensor(),
        FactorStacks {
            c: camera_stack(cameras),
            p,
        },
    ))
}

/// Evaluates `𝒢 ×₁ 𝒫 ×₂ 𝒞 ×₃ 𝒞`.
pub fn tucker_reconstruct(core: &Tensor3, stacks: &FactorStacks) -> Result<Tensor3> {
    core.mode_product(&stacks.p, Mode::One)?
        .mode_product(&stacks.c, Mode::Two)?
        .mode_product(&stacks.c, Mode::Three)
}

/// One multiplier per block.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleField {
    n: usize,
    values: Vec<f64>,
}

impl ScaleField {
    pub fn ones(n: usize) -> Self {
        Self {
            n,
            values: vec![1.0; n * n * n],
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut values = vec![0.0; n * n * n];
        for (i, j, k) in triples(n) {
            values[triple_index(n, i, j, k)] = f(i, j, k);
        }
        Self { n, values }
    }

    /// `λ_ijk = α_i β_j γ_k`.
    pub fn rank1(alpha: &[f64], beta: &[f64], gamma: &[f64]) -> Result<Self> {
        let n = alpha.len();
        if beta.len() != n || gamma.len() != n {
            return Err(Error::DimensionMismatch("rank-1 scale vectors differ in length".into()));
        }
        Ok(Self::from_fn(n, |i, j, k| alpha[i] * beta[j] * gamma[k]))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[triple_index(self.n, i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        self.values[triple_index(self.n, i, j, k)] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Multiplies block `(i, j, k)` by `λ_ijk`.
pub fn apply_block_scaling(t: &BlockTensor, lambda: &ScaleField) -> Result<BlockTensor> {
    if lambda.n != t.n {
        return Err(Error::DimensionMismatch(format!(
            "scale field for n = {} applied to n = {}",
            lambda.n, t.n
        )));
    }
    let mut out = t.clone();
    for (i, j, k) in triples(t.n) {
        let l = lambda.get(i, j, k);
        let diagonal = i == j && j == k;
        if t.is_observed(i, j, k) && !diagonal && l == 0.0 {
            return Err(Error::InvalidConfig(format!(
                "zero scale on observed block ({i}, {j}, {k})"
            )));
        }
        if l != 1.0 {
            out.set_block(i, j, k, &t.block(i, j, k).scaled(l));
        }
    }
    Ok(out)
}

/// Outcome of the structural checks on a ground-truth block tensor.
#[derive(Clone, Debug, Default)]
pub struct PropertyReport {
    pub diagonal_zero: bool,
    pub repeated_blocks_skew: bool,
    /// `None` when cameras were not supplied.
    pub fundamental_match: Option<bool>,
    pub slices_skew: bool,
    /// `None` when the calibrated check was not requested.
    pub equal_singular_values: Option<bool>,
    pub failures: Vec<String>,
    pub mode1_singular_values: Vec<f64>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const LEVI_CIVITA_EVEN: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

fn levi_civita(q: usize, r: usize, m: usize) -> f64 {
    if LEVI_CIVITA_EVEN.contains(&(q, r, m)) {
        1.0
    } else {
        -1.0
    }
}

/// Checks the structural properties of a fully observed block tensor:
/// (i) zero diagonal blocks; (ii) blocks `(j, i, i)` vanish on `q = r`, are
/// antisymmetric in `(q, r)` and, when `cameras` is given, equal
/// `det K_i det K_j · ε_qrm · F_ji(w, m)`; (iii) skew-symmetric horizontal
/// slices; (iv) with `calibrated`, three of the six nonzero mode-1 singular
/// values coincide.
pub fn check_block_properties(
    t: &BlockTensor,
    cameras: Option<&[CameraMatrix]>,
    calibrated: bool,
    tol: f64,
) -> Result<PropertyReport> {
    let n = t.n;
    if t.mask.iter().any(|&m| !m) {
        return Err(Error::InvalidConfig("property checks need a fully observed tensor".into()));
    }
    let scale = t.tensor.data().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let abs_tol = tol * scale.max(f64::MIN_POSITIVE);
    let mut report = PropertyReport::default();

    report.diagonal_zero = true;
    for i in 0..n {
        if t.block(i, i, i).data().iter().any(|x| x.abs() > abs_tol) {
            report.diagonal_zero = false;
            report.failures.push(format!("diagonal block ({i}, {i}, {i}) is not zero"));
        }
    }

    report.repeated_blocks_skew = true;
    let mut fundamental_ok = true;
    for j in 0..n {
        for i in (0..n).filter(|&i| i != j) {
            let b = t.block(j, i, i);
            let mut ok = true;
            for w in 0..3 {
                for q in 0..3 {
                    if b.get(w, q, q).abs() > abs_tol {
                        ok = false;
                    }
                    for r in 0..3 {
                        if (b.get(w, q, r) + b.get(w, r, q)).abs() > abs_tol {
                            ok = false;
                        }
                    }
                }
            }
            if !ok {
                report.repeated_blocks_skew = false;
                report.failures.push(format!("block ({j}, {i}, {i}) is not antisymmetric"));
            }
            if let Some(cams) = cameras {
                let expected = expected_repeated_block(&cams[j], &cams[i])?;
                if b.sub(&expected).norm() > abs_tol * 27f64.sqrt() {
                    fundamental_ok = false;
                    report
                        .failures
                        .push(format!("block ({j}, {i}, {i}) disagrees with F_{j}{i}"));
                }
            }
        }
    }
    if cameras.is_some() {
        report.fundamental_match = Some(fundamental_ok);
    }

    report.slices_skew = true;
    let d = 3 * n;
    for a in 0..d {
        let mut worst = 0.0f64;
        for b in 0..d {
            for c in b..d {
                worst = worst.max((t.tensor.get(a, b, c) + t.tensor.get(a, c, b)).abs());
            }
        }
        if worst > abs_tol {
            report.slices_skew = false;
            report
                .failures
                .push(format!("horizontal slice {a} is not skew-symmetric ({worst:e})"));
        }
    }

    let [s1, _, _] = mode_singular_values(&t.tensor);
    if calibrated {
        let top = &s1[..6.min(s1.len())];
        let found = (0..top.len()).any(|a| {
            (a + 1..top.len()).any(|b| {
                (b + 1..top.len()).any(|c| {
                    let (lo, hi) = (top[c], top[a]);
                    (hi - lo) <= 1e-9 * hi
                })
            })
        });
        report.equal_singular_values = Some(found);
        if !found {
            report
                .failures
                .push(format!("no three coinciding mode-1 singular values in {top:?}"));
        }
    }
    report.mode1_singular_values = s1;
    Ok(report)
}

/// The block `(j, i, i)` predicted from the fundamental matrix `F_ji`.
pub fn expected_repeated_block(cj: &CameraMatrix, ci: &CameraMatrix) -> Result<Tensor3> {
    let f = fundamental_from_cameras(cj, ci)?.f;
    let (dj, di) = (
        cj.decomposition().expect("checked by fundamental_from_cameras"),
        ci.decomposition().expect("checked by fundamental_from_cameras"),
    );
    let kappa = dj.k.determinant() * di.k.determinant() * dj.scale * di.scale * di.scale;
    Ok(Tensor3::from_fn([3, 3, 3], |w, q, r| {
        if q == r {
            0.0
        } else {
            let m = 3 - q - r;
            kappa * levi_civita(q, r, m) * f[(w, m)]
        }
    }))
}

/// `true` when `m` is skew-symmetric to `tol` relative to its largest entry.
pub fn is_skew(m: &Matrix3<f64>, tol: f64) -> bool {
    let scale = m.amax().max(f64::MIN_POSITIVE);
    (m + m.transpose()).amax() <= tol * scale
}
