//! Gauge fixing and pose error metrics.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, Vector3};

use crate::block::camera_stack;
use crate::camera::CameraMatrix;
use crate::error::{Error, Result};

/// Relative residual above which an alignment is flagged as failed.
pub const ALIGNMENT_FAILURE_RESIDUAL: f64 = 0.5;

#[derive(Clone, Debug)]
pub struct AlignmentResult {
    /// Maps the ground-truth frame to the estimate: `P_gt,i · H ≈ s_i · P̂_i`.
    pub h: Matrix4<f64>,
    pub per_camera_scales: Vec<f64>,
    /// Relative Frobenius misfit after normalizing every estimated camera block.
    pub residual: f64,
    pub failed: bool,
    /// Estimated cameras brought into the ground-truth frame, `s_i · P̂_i · H⁻¹`.
    pub aligned: Vec<Matrix3x4<f64>>,
}

fn blocks(c: &DMatrix<f64>) -> Result<Vec<Matrix3x4<f64>>> {
    if c.ncols() != 4 || c.nrows() % 3 != 0 {
        return Err(Error::DimensionMismatch(format!(
            "camera stack must be 3n x 4, got {} x {}",
            c.nrows(),
            c.ncols()
        )));
    }
    (0..c.nrows() / 3)
        .map(|i| {
            let b: Matrix3x4<f64> = c.fixed_view::<3, 4>(3 * i, 0).into_owned();
            let norm = b.norm();
            if norm == 0.0 || !norm.is_finite() {
                Err(Error::InvalidCamera(format!("camera {i} is zero or not finite")))
            } else {
                Ok(b / norm)
            }
        })
        .collect()
}

/// Projective alignment of an estimated camera stack to the ground truth.
///
/// Minimizes `Σ ‖s_i P̂_i − P_i H‖²` with unit-norm estimated blocks and `‖s‖ = 1`.
/// For fixed `s` the optimal `H` is a linear least-squares solution, so the
/// residual is a quadratic form in `s` and the global optimum is its
/// smallest singular direction.
pub fn align_projective(c_est: &DMatrix<f64>, c_gt: &DMatrix<f64>) -> Result<AlignmentResult> {
    let est = blocks(c_est)?;
    let n = est.len();
    if c_gt.shape() != c_est.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{n} estimated cameras vs ground-truth stack of shape {:?}",
            c_gt.shape()
        )));
    }
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "projective alignment needs at least 4 cameras, got {n}"
        )));
    }
    let g = c_gt;
    let svd = g.clone().svd(true, false);
    let s = &svd.singular_values;
    if s.min() <= 1e-12 * s.max() {
        return Err(Error::Degenerate("ground-truth camera stack has rank < 4".into()));
    }
    let u = svd.u.unwrap();
    // Residual of each block after projecting out the ground-truth column space.
    let resid: Vec<DMatrix<f64>> = est
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let mut e = DMatrix::zeros(3 * n, 4);
            e.fixed_view_mut::<3, 4>(3 * i, 0).copy_from(b);
            let proj = &u * (u.transpose() * &e);
            e - proj
        })
        .collect();
    let stacked = DMatrix::from_fn(12 * n, n, |r, c| resid[c].as_slice()[r]);
    let rsvd = stacked.svd(false, true);
    let imin = rsvd.singular_values.imin();
    let v_t = rsvd.v_t.unwrap();
    let mut scales: Vec<f64> = v_t.row(imin).iter().copied().collect();
    // Fix the sign gauge so that the scales are mostly positive.
    if scales.iter().sum::<f64>() < 0.0 {
        scales.iter_mut().for_each(|x| *x = -*x);
    }
    let residual = rsvd.singular_values[imin];

    let mut target = DMatrix::zeros(3 * n, 4);
    for (i, b) in est.iter().enumerate() {
        target.fixed_view_mut::<3, 4>(3 * i, 0).copy_from(&(b * scales[i]));
    }
    let h_dyn = svd_solve(g, &target)?;
    let h = Matrix4::from_fn(|r, c| h_dyn[(r, c)]);
    let h_inv = h
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("alignment transform is singular".into()))?;
    let aligned = est
        .iter()
        .zip(&scales)
        .map(|(b, s)| b * *s * h_inv)
        .collect();
    Ok(AlignmentResult {
        h,
        per_camera_scales: scales,
        residual,
        failed: residual > ALIGNMENT_FAILURE_RESIDUAL,
        aligned,
    })
}

fn svd_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone()
        .svd(true, true)
        .solve(b, 1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))
}

/// Nearest calibrated camera `[R | −R t]` up to scale.
pub fn round_to_calibrated(p: &Matrix3x4<f64>) -> Result<(Matrix3<f64>, Vector3<f64>)> {
    let mut p = *p;
    let mut m: Matrix3<f64> = p.fixed_view::<3, 3>(0, 0).into_owned();
    let det = m.determinant();
    if !det.is_finite() {
        return Err(Error::InvalidCamera("camera is not finite".into()));
    }
    if det < 0.0 {
        p = -p;
        m = -m;
    }
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let sv = svd.singular_values;
    if sv.min() <= 1e-12 * sv.max() {
        return Err(Error::InvalidCamera("leading 3x3 block is singular".into()));
    }
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        // Only reachable through rounding when det(M) is tiny but positive.
        let mut u2 = u;
        let k = sv.imin();
        u2.column_mut(k).neg_mut();
        r = u2 * v_t;
    }
    let c = m.dot(&r) / 3.0;
    let t = -r.transpose() * p.column(3) / c;
    Ok((r, t))
}

fn special_procrustes(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * v_t
}

/// Geodesic angle of a rotation, in radians.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let chord = (r - Matrix3::identity()).norm() / 8f64.sqrt();
    2.0 * chord.min(1.0).asin()
}

/// Per-camera rotation errors in degrees after removing a global rotation.
pub fn rotation_errors(r_est: &[Matrix3<f64>], r_gt: &[Matrix3<f64>]) -> Result<Vec<f64>> {
    if r_est.len() != r_gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimated rotations vs {} ground-truth rotations",
            r_est.len(),
            r_gt.len()
        )));
    }
    let m: Matrix3<f64> = r_est.iter().zip(r_gt).map(|(a, b)| a * b.transpose()).sum();
    let q = special_procrustes(&m);
    Ok(r_est
        .iter()
        .zip(r_gt)
        .map(|(a, b)| rotation_angle(&(a * (q * b).transpose())).to_degrees())
        .collect())
}

/// Per-camera location errors after removing a similarity transform.
pub fn location_errors(t_est: &[Vector3<f64>], t_gt: &[Vector3<f64>]) -> Result<Vec<f64>> {
    let n = t_est.len();
    if n != t_gt.len() {
        return Err(Error::DimensionMismatch(format!(
            "{n} estimated locations vs {} ground-truth locations",
            t_gt.len()
        )));
    }
    if n < 3 {
        return Err(Error::InvalidConfig(format!(
            "location alignment needs at least 3 cameras, got {n}"
        )));
    }
    let nf = n as f64;
    let mu_e: Vector3<f64> = t_est.iter().sum::<Vector3<f64>>() / nf;
    let mu_g: Vector3<f64> = t_gt.iter().sum::<Vector3<f64>>() / nf;
    let var_e = t_est.iter().map(|x| (x - mu_e).norm_squared()).sum::<f64>() / nf;
    let scale_ref = t_est.iter().map(|x| x.norm_squared()).sum::<f64>() / nf;
    if var_e <= 1e-24 * scale_ref.max(1e-300) {
        return Err(Error::Degenerate("estimated locations coincide".into()));
    }
    let cov: Matrix3<f64> = t_est
        .iter()
        .zip(t_gt)
        .map(|(e, g)| (g - mu_g) * (e - mu_e).transpose())
        .sum::<Matrix3<f64>>()
        / nf;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let d = (u * v_t).determinant().signum();
    let s = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d));
    let q = u * s * v_t;
    let c = (Matrix3::from_diagonal(&svd.singular_values) * s).trace() / var_e;
    let b = mu_g - c * q * mu_e;
    Ok(t_est
        .iter()
        .zip(t_gt)
        .map(|(e, g)| (c * q * e + b - g).norm())
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSummary {
    pub rotation_deg: Vec<f64>,
    pub location: Vec<f64>,
    pub mean_rotation_deg: f64,
    pub median_rotation_deg: f64,
    pub mean_location: f64,
    pub median_location: f64,
}

impl ErrorSummary {
    pub fn from_errors(rotation_deg: Vec<f64>, location: Vec<f64>) -> Self {
        Self {
            mean_rotation_deg: mean(&rotation_deg),
            median_rotation_deg: median(&rotation_deg),
            mean_location: mean(&location),
            median_location: median(&location),
            rotation_deg,
            location,
        }
    }

    pub fn max_rotation_deg(&self) -> f64 {
        self.rotation_deg.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_location(&self) -> f64 {
        self.location.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub alignment: AlignmentResult,
    pub summary: ErrorSummary,
}

/// Aligns a recovered camera stack, rounds every camera to calibrated form
/// and reports rotation and location errors against the ground truth.
pub fn evaluate_cameras(c_est: &DMatrix<f64>, gt: &[CameraMatrix]) -> Result<Evaluation> {
    let c_gt = camera_stack(gt);
    let alignment = align_projective(c_est, &c_gt)?;
    let rounded_est = alignment
        .aligned
        .iter()
        .map(round_to_calibrated)
        .collect::<Result<Vec<_>>>()?;
    let rounded_gt = gt
        .iter()
        .map(|c| round_to_calibrated(c.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let (re, te): (Vec<_>, Vec<_>) = rounded_est.into_iter().unzip();
    let (rg, tg): (Vec<_>, Vec<_>) = rounded_gt.into_iter().unzip();
    let summary = ErrorSummary::from_errors(rotation_errors(&re, &rg)?, location_errors(&te, &tg)?);
    Ok(Evaluation { alignment, summary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::calibrated_camera;
    use crate::scene::random_rotation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot_about_z(deg: f64) -> Matrix3<f64> {
        let (s, c) = deg.to_radians().sin_cos();
        Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
    }

    fn random_cams(n: usize, rng: &mut ChaCha8Rng) -> Vec<CameraMatrix> {
        (0..n)
            .map(|_| {
                let t = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                calibrated_camera(random_rotation(rng), t).unwrap()
            })
            .collect()
    }

    #[test]
    fn gauge_oracle_recovers_h() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cams = random_cams(6, &mut rng);
        let c_gt = camera_stack(&cams);
        let h0 = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let h0d = DMatrix::from_fn(4, 4, |r, c| h0[(r, c)]);
        let mut c_est = &c_gt * &h0d;
        for i in 0..6 {
            let s: f64 = rng.random_range(-3.0..3.0);
            c_est.rows_mut(3 * i, 3).scale_mut(s);
        }
        let a = align_projective(&c_est, &c_gt).unwrap();
        assert!(a.residual <= 1e-10, "{}", a.residual);
        assert!(!a.failed);
        let ratio = a.h.dot(&h0) / h0.norm_squared();
        assert!((a.h - h0 * ratio).norm() <= 1e-8 * a.h.norm());
        let ratio = a.aligned[0].dot(cams[0].matrix()) / cams[0].matrix().norm_squared();
        for (al, c) in a.aligned.iter().zip(&cams) {
            assert!((al - c.matrix() * ratio).norm() <= 1e-9 * al.norm());
        }
    }

    #[test]
    fn identity_alignment() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = camera_stack(&random_cams(5, &mut rng));
        let a = align_projective(&c, &c).unwrap();
        let h = a.h / a.h[(0, 0)];
        assert!((h - Matrix4::identity()).norm() <= 1e-9);
    }

    #[test]
    fn three_cameras_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = camera_stack(&random_cams(3, &mut rng));
        assert!(matches!(align_projective(&c, &c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn residual_invariant_under_ground_truth_gauge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c_gt = camera_stack(&random_cams(6, &mut rng));
        let c_est = DMatrix::from_fn(18, 4, |_, _| rng.random_range(-1.0..1.0));
        let h = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let r1 = align_projective(&c_est, &c_gt).unwrap().residual;
        let r2 = align_projective(&c_est, &(&c_gt * h)).unwrap().residual;
        assert!((r1 - r2).abs() <= 1e-10);
        assert!(r1 > 0.1);
    }

    #[test]
    fn rounding_exact_camera() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = random_rotation(&mut rng);
        let t = Vector3::new(0.3, -1.0, 2.0);
        let p = calibrated_camera(r, t).unwrap().matrix() * -2.5;
        let (r2, t2) = round_to_calibrated(&p).unwrap();
        assert!((r2 - r).norm() <= 1e-12);
        assert!((t2 - t).norm() <= 1e-12);
    }

    #[test]
    fn rounding_perturbed_camera() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let r = random_rotation(&mut rng);
        let p = calibrated_camera(r, Vector3::new(1.0, 0.0, 0.0)).unwrap();
        let noise = Matrix3x4::from_fn(|_, _| rng.random_range(-1e-6..1e-6));
        let (r2, _) = round_to_calibrated(&(p.matrix() + noise)).unwrap();
        assert!(rotation_angle(&(r2 * r.transpose())) <= 1e-5);
        assert!((r2.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rounding_negative_determinant() {
        let p = Matrix3x4::new(-1.0, 0.0, 0.0, 0.5, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let (r, t) = round_to_calibrated(&p).unwrap();
        assert!((r - Matrix3::identity()).norm() <= 1e-12);
        assert!((t - Vector3::new(0.5, 0.0, 0.0)).norm() <= 1e-12);
        let reflect = Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0);
        let (r, _) = round_to_calibrated(&reflect).unwrap();
        assert!((r.determinant() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn rotation_errors_single_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let gt: Vec<_> = (0..8).map(|_| random_rotation(&mut rng)).collect();
        let q0 = random_rotation(&mut rng);
        let mut est: Vec<_> = gt.iter().map(|r| q0 * r).collect();
        let e = rotation_errors(&est, &gt).unwrap();
        assert!(e.iter().all(|x| *x <= 1e-10));
        est[3] = rot_about_z(5.0) * est[3];
        let e = rotation_errors(&est, &gt).unwrap();
        assert!((e[3] - 5.0).abs() <= 0.7, "{e:?}");
        let left = random_rotation(&mut rng);
        let moved: Vec<_> = est.iter().map(|r| left * r).collect();
        let e2 = rotation_errors(&moved, &gt).unwrap();
        for (a, b) in e.iter().zip(&e2) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn random_rotations_have_errors_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a: Vec<_> = (0..10).map(|_| random_rotation(&mut rng)).collect();
        let b: Vec<_> = (0..10).map(|_| random_rotation(&mut rng)).collect();
        for e in rotation_errors(&a, &b).unwrap() {
            assert!(e > 0.0 && e <= 180.0);
        }
    }

    #[test]
    fn location_errors_similarity_and_defect() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gt: Vec<Vector3<f64>> = (0..10)
            .map(|_| Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let q = random_rotation(&mut rng);
        let shift = Vector3::new(1.0, 2.0, -3.0);
        let est: Vec<_> = gt.iter().map(|x| 2.5 * q * x + shift).collect();
        assert!(location_errors(&est, &gt).unwrap().iter().all(|e| *e <= 1e-10));

        let mut moved = gt.clone();
        moved[0] += Vector3::new(0.5, 0.0, 0.0);
        let e = location_errors(&moved, &gt).unwrap();
        assert!((e[0] - 0.5).abs() <= 0.1, "{e:?}");
        assert!(e[1..].iter().all(|x| *x < 0.1));
    }

    #[test]
    fn reflection_is_not_absorbed() {
        let gt = vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(1.0, 1.0, 1.0),
        ];
        let est: Vec<_> = gt.iter().map(|x| Vector3::new(x.x, x.y, -x.z)).collect();
        let e = location_errors(&est, &gt).unwrap();
        assert!(e.iter().any(|x| *x > 1e-3));
    }

    #[test]
    fn summary_statistics_match_lists() {
        let s = ErrorSummary::from_errors(vec![1.0, 3.0, 2.0, 10.0], vec![0.5, 0.1, 0.2]);
        assert_eq!(s.mean_rotation_deg, 4.0);
        assert_eq!(s.median_rotation_deg, 2.5);
        assert_eq!(s.median_location, 0.2);
        assert_eq!(s.max_rotation_deg(), 10.0);
    }
}
