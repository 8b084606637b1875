//! Single 3×3×3 trifocal tensors.
//!
//! Entry `(w, q, r)` of the tensor of cameras `(P_i, P_j, P_k)` is
//! `(−1)^w det[P_i without row w; row q of P_j; row r of P_k]` with zero-based
//! `w`. The first index therefore belongs to the view whose two rows enter
//! each determinant.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Matrix4, SMatrix, Vector3, Vector4};

use crate::camera::{normalized, skew, CameraMatrix};
use crate::error::{Error, Result};
use crate::tensor::{Mode, Tensor3};

/// A trifocal tensor attached to an ordered camera triple.
#[derive(Clone, Debug, PartialEq)]
pub struct TrifocalBlock {
    pub t: Tensor3,
    pub triple: (usize, usize, usize),
    /// False for estimated tensors, which are only known up to scale.
    pub scale_known: bool,
}

/// Corresponding image points in three views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointTripleCorrespondence {
    pub x1: Vector3<f64>,
    pub x2: Vector3<f64>,
    pub x3: Vector3<f64>,
}

/// Corresponding image lines in three views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineTripleCorrespondence {
    pub l1: Vector3<f64>,
    pub l2: Vector3<f64>,
    pub l3: Vector3<f64>,
}

impl PointTripleCorrespondence {
    fn normalized(&self) -> Self {
        Self {
            x1: normalized(&self.x1),
            x2: normalized(&self.x2),
            x3: normalized(&self.x3),
        }
    }
}

impl LineTripleCorrespondence {
    fn normalized(&self) -> Self {
        Self {
            l1: normalized(&self.l1),
            l2: normalized(&self.l2),
            l3: normalized(&self.l3),
        }
    }
}

const DROP: [(usize, usize); 3] = [(1, 2), (0, 2), (0, 1)];

/// Trifocal tensor of three raw 3×4 matrices. Multilinear in the rows, so it
/// is also meaningful for rank-deficient inputs.
pub fn trifocal_from_matrices(
    pi: &Matrix3x4<f64>,
    pj: &Matrix3x4<f64>,
    pk: &Matrix3x4<f64>,
) -> Tensor3 {
    Tensor3::from_fn([3, 3, 3], |w, q, r| {
        let (a, b) = DROP[w];
        let rows = [pi.row(a), pi.row(b), pj.row(q), pk.row(r)];
        // A repeated row makes the determinant vanish; keep it exactly zero.
        let repeated = (0..4).any(|x| (x + 1..4).any(|y| rows[x] == rows[y]));
        if repeated {
            return 0.0;
        }
        let sign = if w == 1 { -1.0 } else { 1.0 };
        sign * Matrix4::from_rows(&rows).determinant()
    })
}

/// Trifocal tensor of three cameras. Repeated cameras are allowed.
pub fn trifocal_from_cameras(pi: &CameraMatrix, pj: &CameraMatrix, pk: &CameraMatrix) -> Tensor3 {
    trifocal_from_matrices(pi.matrix(), pj.matrix(), pk.matrix())
}

/// The 3×3 matrix `T_w = T(w, ·, ·)`.
pub fn slice(t: &Tensor3, w: usize) -> Matrix3<f64> {
    Matrix3::from_fn(|q, r| t.get(w, q, r))
}

/// `[x2]× (Σ_w x1_w T_w) [x3]×`; zero for a true point correspondence.
pub fn point_incidence_residual(t: &Tensor3, c: &PointTripleCorrespondence) -> Matrix3<f64> {
    let m = (0..3).fold(Matrix3::zeros(), |acc, w| acc + slice(t, w) * c.x1[w]);
    skew(&c.x2) * m * skew(&c.x3)
}

/// `l1 × v` with `v_w = l2ᵀ T_w l3`; zero for a true line correspondence.
pub fn line_incidence_residual(t: &Tensor3, c: &LineTripleCorrespondence) -> Vector3<f64> {
    let v = Vector3::from_fn(|w, _| (c.l2.transpose() * slice(t, w) * c.l3)[0]);
    c.l1.cross(&v)
}

fn basis_tensor(m: usize) -> Tensor3 {
    let mut e = Tensor3::zeros([3, 3, 3]);
    e.data_mut()[m] = 1.0;
    e
}

/// Independent equations contributed by one point and one line.
const POINT_RANK: usize = 4;
const LINE_RANK: usize = 2;

/// Design matrix whose null vector is the tensor, in storage order.
pub fn design_matrix(
    points: &[PointTripleCorrespondence],
    lines: &[LineTripleCorrespondence],
) -> DMatrix<f64> {
    let rows = 9 * points.len() + 3 * lines.len();
    let mut a = DMatrix::zeros(rows.max(27), 27);
    let basis: Vec<Tensor3> = (0..27).map(basis_tensor).collect();
    let mut row = 0;
    for p in points.iter().map(PointTripleCorrespondence::normalized) {
        for (col, e) in basis.iter().enumerate() {
            let res = point_incidence_residual(e, &p);
            for (i, v) in res.iter().enumerate() {
                a[(row + i, col)] = *v;
            }
        }
        row += 9;
    }
    for l in lines.iter().map(LineTripleCorrespondence::normalized) {
        for (col, e) in basis.iter().enumerate() {
            let res = line_incidence_residual(e, &l);
            for i in 0..3 {
                a[(row + i, col)] = res[i];
            }
        }
        row += 3;
    }
    a
}

/// Similarity taking the view's measurements to zero centroid and mean
/// distance `√2`. Lines are represented by the point on them nearest to the
/// origin.
fn normalizing_transform(points: &[Vector3<f64>], lines: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut feet: Vec<(f64, f64)> = Vec::with_capacity(points.len() + lines.len());
    for x in points {
        if x.z.abs() > 1e-12 * x.norm() {
            feet.push((x.x / x.z, x.y / x.z));
        }
    }
    for l in lines {
        let ab = l.x * l.x + l.y * l.y;
        if ab > 1e-24 * l.norm_squared() {
            feet.push((-l.z * l.x / ab, -l.z * l.y / ab));
        }
    }
    if feet.is_empty() {
        return Matrix3::identity();
    }
    let n = feet.len() as f64;
    let cx = feet.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = feet.iter().map(|p| p.1).sum::<f64>() / n;
    let d = feet.iter().map(|p| (p.0 - cx).hypot(p.1 - cy)).sum::<f64>() / n;
    let s = if d > 1e-12 { 2f64.sqrt() / d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0)
}

fn to_dmatrix(m: &Matrix3<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(3, 3, |r, c| m[(r, c)])
}

/// Linear estimate from point and line correspondences: the unit-norm
/// smallest right singular vector of the stacked incidence equations,
/// computed in normalized image coordinates.
pub fn estimate_trifocal_linear(
    points: &[PointTripleCorrespondence],
    lines: &[LineTripleCorrespondence],
) -> Result<Tensor3> {
    let have = POINT_RANK * points.len() + LINE_RANK * lines.len();
    if have < 26 {
        return Err(Error::InsufficientConstraints { have, need: 26 });
    }
    let view_points = |f: fn(&PointTripleCorrespondence) -> Vector3<f64>| -> Vec<Vector3<f64>> {
        points.iter().map(f).collect()
    };
    let view_lines = |f: fn(&LineTripleCorrespondence) -> Vector3<f64>| -> Vec<Vector3<f64>> {
        lines.iter().map(f).collect()
    };
    let h = [
        normalizing_transform(&view_points(|p| p.x1), &view_lines(|l| l.l1)),
        normalizing_transform(&view_points(|p| p.x2), &view_lines(|l| l.l2)),
        normalizing_transform(&view_points(|p| p.x3), &view_lines(|l| l.l3)),
    ];
    let h_inv = h.map(|m| m.try_inverse().expect("similarity with positive scale"));
    let h_inv_t = h_inv.map(|m| m.transpose());
    let norm_points: Vec<PointTripleCorrespondence> = points
        .iter()
        .map(|p| PointTripleCorrespondence {
            x1: h[0] * p.x1,
            x2: h[1] * p.x2,
            x3: h[2] * p.x3,
        })
        .collect();
    let norm_lines: Vec<LineTripleCorrespondence> = lines
        .iter()
        .map(|l| LineTripleCorrespondence {
            l1: h_inv_t[0] * l.l1,
            l2: h_inv_t[1] * l.l2,
            l3: h_inv_t[2] * l.l3,
        })
        .collect();

    let a = design_matrix(&norm_points, &norm_lines);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let s = &svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]));
    let top = s[order[0]];
    let rank = order.iter().filter(|&&i| s[i] > 1e-10 * top).count();
    if top == 0.0 || s[order[25]] <= 1e-10 * top {
        return Err(Error::RankDeficientDesign {
            rank: rank.min(26),
            need: 26,
        });
    }
    let v = v_t.row(order[26]).transpose();
    let t_norm = Tensor3::from_vec([3, 3, 3], v.as_slice().to_vec())?;
    // Back to the original coordinates: T = T' ×₁ H₁ᵀ ×₂ H₂⁻¹ ×₃ H₃⁻¹.
    let t = t_norm
        .mode_product(&to_dmatrix(&h[0].transpose()), Mode::One)?
        .mode_product(&to_dmatrix(&h_inv[1]), Mode::Two)?
        .mode_product(&to_dmatrix(&h_inv[2]), Mode::Three)?;
    let norm = t.norm();
    Ok(t.scaled(1.0 / norm))
}

/// Relative distance between two tensors after optimal scaling of the first.
pub fn error_up_to_scale(est: &Tensor3, truth: &Tensor3) -> f64 {
    let denom = est.dot(est);
    if denom == 0.0 {
        return 1.0;
    }
    let mu = est.dot(truth) / denom;
    est.scaled(mu).relative_error(truth)
}

/// Epipoles `(e2, e3)` of the second and third views, from the null vectors
/// of the slices.
pub fn epipoles(t: &Tensor3) -> (Vector3<f64>, Vector3<f64>) {
    let mut left = Matrix3::zeros();
    let mut right = Matrix3::zeros();
    for w in 0..3 {
        let s = slice(t, w);
        left.set_row(w, &null_vector3(&s.transpose()).transpose());
        right.set_row(w, &null_vector3(&s).transpose());
    }
    (null_vector3(&left), null_vector3(&right))
}

fn null_vector3(m: &Matrix3<f64>) -> Vector3<f64> {
    smallest_right_singular(&DMatrix::from_column_slice(3, 3, m.as_slice()))
        .fixed_rows::<3>(0)
        .into_owned()
}

fn smallest_right_singular(m: &DMatrix<f64>) -> nalgebra::DVector<f64> {
    let padded = if m.nrows() < m.ncols() {
        let mut p = DMatrix::zeros(m.ncols(), m.ncols());
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let i = svd.singular_values.imin();
    v_t.row(i).transpose()
}

/// Fundamental matrix `F21` (`x2ᵀ F21 x1 = 0`) encoded in a trifocal tensor.
pub fn fundamental_from_trifocal(t: &Tensor3) -> Matrix3<f64> {
    let (e2, e3) = epipoles(t);
    let mut m = Matrix3::zeros();
    for w in 0..3 {
        m.set_column(w, &(slice(t, w) * e3));
    }
    skew(&e2) * m
}

/// Left epipole `e` with `eᵀ F = 0`.
fn left_epipole(f: &Matrix3<f64>) -> Vector3<f64> {
    null_vector3(&f.transpose())
}

fn p3_from_skew_constraints(
    f31: &Matrix3<f64>,
    f32: &Matrix3<f64>,
    p1: &Matrix3x4<f64>,
    p2: &Matrix3x4<f64>,
) -> (DMatrix<f64>, Vec<f64>) {
    // Each entry of P3ᵀ F P is linear in P3; symmetric parts must vanish.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(20);
    for (f, p) in [(f32, p2), (f31, p1)] {
        let mut per_unknown: Vec<Matrix4<f64>> = Vec::with_capacity(12);
        for u in 0..12 {
            let mut e = Matrix3x4::zeros();
            e[(u % 3, u / 3)] = 1.0;
            per_unknown.push(e.transpose() * f * p);
        }
        for a in 0..4 {
            for b in a..4 {
                rows.push(per_unknown.iter().map(|m| m[(a, b)] + m[(b, a)]).collect());
            }
        }
    }
    let a = DMatrix::from_fn(rows.len(), 12, |r, c| rows[r][c]);
    let svd = a.clone().svd(false, true);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    (a, s)
}

/// Builds a canonical camera triple from `F21`, `F31`, `F32` and returns the
/// third camera together with the tensor of `([I | 0], P2', P3)`.
pub fn trifocal_from_fundamentals(
    f21: &Matrix3<f64>,
    f31: &Matrix3<f64>,
    f32: &Matrix3<f64>,
) -> Result<(Matrix3x4<f64>, Tensor3)> {
    let fs = f21.svd(false, false).singular_values;
    let mut fs: Vec<f64> = fs.iter().copied().collect();
    fs.sort_by(|x, y| y.total_cmp(x));
    if fs[0] == 0.0 || fs[1] <= 1e-10 * fs[0] {
        return Err(Error::Degenerate("F21 has rank below 2".into()));
    }
    let f21 = f21 / f21.norm();
    let f31 = f31 / f31.norm();
    let f32 = f32 / f32.norm();
    let e2 = left_epipole(&f21);
    let p1 = Matrix3x4::identity();
    let mut p2 = Matrix3x4::zeros();
    p2.fixed_view_mut::<3, 3>(0, 0).copy_from(&(skew(&e2) * f21));
    p2.set_column(3, &e2);

    let (a, s) = p3_from_skew_constraints(&f31, &f32, &p1, &p2);
    // A one-dimensional solution space shows up as a single vanishing value.
    let null_dim = s.iter().filter(|&&x| x <= 1e-8 * s[0]).count();
    if s[10] <= 1e-8 * s[0] {
        return Err(Error::Degenerate(format!(
            "solution space for the third camera has dimension {}",
            null_dim.max(2)
        )));
    }
    let v = smallest_right_singular(&a);
    let p3 = Matrix3x4::from_fn(|r, c| v[c * 3 + r]);
    let t = trifocal_from_matrices(&p1, &p2, &p3);
    if t.norm() == 0.0 || !t.is_finite() {
        return Err(Error::Numerical("recovered trifocal tensor vanishes".into()));
    }
    let norm = t.norm();
    Ok((p3, t.scaled(1.0 / norm)))
}

/// Returns `±t` with the sign of `⟨t, reference⟩`.
pub fn correct_sign_with_reference(t: &Tensor3, reference: &Tensor3) -> Tensor3 {
    if t.dot(reference) < 0.0 {
        t.scaled(-1.0)
    } else {
        t.clone()
    }
}

fn triangulate(
    p1: &Matrix3x4<f64>,
    p2: &Matrix3x4<f64>,
    x1: &Vector3<f64>,
    x2: &Vector3<f64>,
) -> Vector4<f64> {
    let mut a = SMatrix::<f64, 4, 4>::zeros();
    a.set_row(0, &(p1.row(2) * x1[0] - p1.row(0) * x1[2]));
    a.set_row(1, &(p1.row(2) * x1[1] - p1.row(1) * x1[2]));
    a.set_row(2, &(p2.row(2) * x2[0] - p2.row(0) * x2[2]));
    a.set_row(3, &(p2.row(2) * x2[1] - p2.row(1) * x2[2]));
    let v = smallest_right_singular(&DMatrix::from_column_slice(4, 4, a.as_slice()));
    let x = Vector4::new(v[0], v[1], v[2], v[3]);
    if x[3] < 0.0 {
        -x
    } else {
        x
    }
}

/// Depth sign of `X` (with `X₄ > 0`) seen through `p` at oriented image point `x`.
fn depth_sign(p: &Matrix3x4<f64>, x_world: &Vector4<f64>, x_img: &Vector3<f64>) -> f64 {
    (p * x_world).dot(x_img)
}

fn relative_pose_candidates(e: &Matrix3<f64>) -> Vec<Matrix3x4<f64>> {
    let svd = e.svd(true, true);
    let mut u = svd.u.expect("u");
    let mut v_t = svd.v_t.expect("v_t");
    let imin = svd.singular_values.imin();
    // Move the null direction to the last column.
    if imin != 2 {
        u.swap_columns(imin, 2);
        v_t.swap_rows(imin, 2);
    }
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t = u.column(2).into_owned();
    let mut out = Vec::with_capacity(4);
    for r in [u * w * v_t, u * w.transpose() * v_t] {
        for sign in [1.0, -1.0] {
            let mut p = Matrix3x4::zeros();
            p.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
            p.set_column(3, &(t * sign));
            out.push(p);
        }
    }
    out
}

/// Chooses the sign of an estimated tensor by cheirality.
///
/// Inputs must be in normalized (calibrated) image coordinates with the
/// third coordinate positive for points in front of the camera. The relative
/// pose of the first two views is read from the tensor, the third camera is
/// fitted linearly so that it reproduces `t`, and every point votes with the
/// sign of its depth in the third view. A tie is reported as an error.
pub fn correct_block_sign(
    t: &Tensor3,
    points: &[PointTripleCorrespondence],
) -> Result<Tensor3> {
    if points.is_empty() {
        return Err(Error::InsufficientConstraints { have: 0, need: 1 });
    }
    let pts: Vec<PointTripleCorrespondence> = points
        .iter()
        .map(|p| {
            let flip = |x: Vector3<f64>| if x[2] < 0.0 { -x } else { x };
            PointTripleCorrespondence {
                x1: flip(p.x1),
                x2: flip(p.x2),
                x3: flip(p.x3),
            }
        })
        .collect();
    let e21 = fundamental_from_trifocal(t);
    let p1 = Matrix3x4::identity();
    let p2 = relative_pose_candidates(&e21)
        .into_iter()
        .max_by_key(|p2| {
            pts.iter()
                .filter(|c| {
                    let x = triangulate(&p1, p2, &c.x1, &c.x2);
                    depth_sign(&p1, &x, &c.x1) > 0.0 && depth_sign(p2, &x, &c.x2) > 0.0
                })
                .count()
        })
        .expect("four candidates");

    // T(P1, P2, ·) is linear in the third camera.
    let mut a = DMatrix::zeros(27, 12);
    for u in 0..12 {
        let mut e = Matrix3x4::zeros();
        e[(u % 3, u / 3)] = 1.0;
        let col = trifocal_from_matrices(&p1, &p2, &e);
        for (r, v) in col.data().iter().enumerate() {
            a[(r, u)] = *v;
        }
    }
    let b = DMatrix::from_column_slice(27, 1, t.data());
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let p3 = Matrix3x4::from_fn(|r, c| sol[(c * 3 + r, 0)]);

    let (mut positive, mut negative) = (0, 0);
    for c in &pts {
        let x = triangulate(&p1, &p2, &c.x1, &c.x2);
        let d = depth_sign(&p3, &x, &c.x3);
        if d > 0.0 {
            positive += 1;
        } else if d < 0.0 {
            negative += 1;
        }
    }
    match positive.cmp(&negative) {
        std::cmp::Ordering::Greater => Ok(t.clone()),
        std::cmp::Ordering::Less => Ok(t.scaled(-1.0)),
        std::cmp::Ordering::Equal => Err(Error::AmbiguousSign { positive, negative }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{
        calibrated_camera, compose_camera, fundamental_from_cameras, project_line, project_point,
        PluckerLine,
    };
    use nalgebra::UnitQuaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let q = nalgebra::Quaternion::new(
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        );
        UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
    }

    fn vec3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
        Vector3::from_fn(|_, _| rng.sample(StandardNormal))
    }

    fn vec4(rng: &mut ChaCha8Rng) -> Vector4<f64> {
        Vector4::from_fn(|_, _| rng.sample(StandardNormal))
    }

    fn raw_camera(rng: &mut ChaCha8Rng) -> CameraMatrix {
        CameraMatrix::from_matrix(Matrix3x4::from_fn(|_, _| rng.sample(StandardNormal))).unwrap()
    }

    /// Cameras looking at the origin from distance about 3.
    fn looking_camera(rng: &mut ChaCha8Rng) -> CameraMatrix {
        let r = random_rotation(rng);
        let c = -r.transpose() * Vector3::new(0.0, 0.0, 3.0) + vec3(rng) * 0.3;
        calibrated_camera(r, c).unwrap()
    }

    fn det_oracle(pi: &CameraMatrix, pj: &CameraMatrix, pk: &CameraMatrix, w: usize, q: usize, r: usize) -> f64 {
        let kept: Vec<usize> = (0..3).filter(|&x| x != w).collect();
        let m = Matrix4::from_fn(|row, col| match row {
            0 => pi.matrix()[(kept[0], col)],
            1 => pi.matrix()[(kept[1], col)],
            2 => pj.matrix()[(q, col)],
            _ => pk.matrix()[(r, col)],
        });
        (-1f64).powi(w as i32) * m.determinant()
    }

    #[test]
    fn identical_cameras_give_zero_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p = raw_camera(&mut rng);
        assert_eq!(trifocal_from_cameras(&p, &p, &p).norm(), 0.0);
    }

    #[test]
    fn entries_match_determinant_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..200 {
            let (a, b, c) = (raw_camera(&mut rng), raw_camera(&mut rng), raw_camera(&mut rng));
            let t = trifocal_from_cameras(&a, &b, &c);
            for w in 0..3 {
                for q in 0..3 {
                    for r in 0..3 {
                        let o = det_oracle(&a, &b, &c, w, q, r);
                        assert!((t.get(w, q, r) - o).abs() <= 1e-12 * t.norm());
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_first_camera_expansion() {
        // With P_i = [I | 0], T_w = a_w b_4ᵀ − a_4 b_wᵀ where a, b are the
        // columns of P_j and P_k.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let pi = CameraMatrix::from_matrix(Matrix3x4::identity()).unwrap();
        let (pj, pk) = (raw_camera(&mut rng), raw_camera(&mut rng));
        let t = trifocal_from_cameras(&pi, &pj, &pk);
        let a = |c: usize| pj.matrix().column(c).into_owned();
        let b = |c: usize| pk.matrix().column(c).into_owned();
        for w in 0..3 {
            let expected = a(w) * b(3).transpose() - a(3) * b(w).transpose();
            assert!((slice(&t, w) - expected).norm() <= 1e-12);
        }
    }

    #[test]
    fn camera_scaling_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let (a, b, c) = (raw_camera(&mut rng), raw_camera(&mut rng), raw_camera(&mut rng));
        let t = trifocal_from_cameras(&a, &b, &c);
        let s = 1.7;
        let ti = trifocal_from_cameras(&a.scaled(s), &b, &c);
        let tj = trifocal_from_cameras(&a, &b.scaled(s), &c);
        let tk = trifocal_from_cameras(&a, &b, &c.scaled(s));
        assert!(ti.relative_error(&t.scaled(s * s)) <= 1e-13);
        assert!(tj.relative_error(&t.scaled(s)) <= 1e-13);
        assert!(tk.relative_error(&t.scaled(s)) <= 1e-13);
    }

    #[test]
    fn world_change_scales_by_determinant() {
        let mut rng = ChaCha8Rng::seed_from_u64(45);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let h = Matrix4::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        let moved: Vec<CameraMatrix> = cams
            .iter()
            .map(|c| CameraMatrix::from_matrix(c.matrix() * h).unwrap())
            .collect();
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let t2 = trifocal_from_cameras(&moved[0], &moved[1], &moved[2]);
        assert!(t2.relative_error(&t.scaled(h.determinant())) <= 1e-12);
    }

    #[test]
    fn swapping_last_two_cameras_negates_the_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(46);
        let (a, b, c) = (raw_camera(&mut rng), raw_camera(&mut rng), raw_camera(&mut rng));
        let t = trifocal_from_cameras(&a, &b, &c);
        let s = trifocal_from_cameras(&a, &c, &b);
        assert!(s.relative_error(&t.transpose23().scaled(-1.0)) <= 1e-13);
    }

    fn point_corr(cams: &[CameraMatrix], x: &Vector4<f64>) -> PointTripleCorrespondence {
        PointTripleCorrespondence {
            x1: project_point(&cams[0], x).unwrap(),
            x2: project_point(&cams[1], x).unwrap(),
            x3: project_point(&cams[2], x).unwrap(),
        }
    }

    fn line_corr(cams: &[CameraMatrix], l: &PluckerLine) -> LineTripleCorrespondence {
        LineTripleCorrespondence {
            l1: project_line(&cams[0], l),
            l2: project_line(&cams[1], l),
            l3: project_line(&cams[2], l),
        }
    }

    #[test]
    fn incidence_residuals_vanish_on_true_correspondences() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let t = t.scaled(1.0 / t.norm());
        for _ in 0..20 {
            let p = point_corr(&cams, &vec4(&mut rng)).normalized();
            assert!(point_incidence_residual(&t, &p).norm() <= 1e-10);
            let l = line_corr(&cams, &PluckerLine::join(&vec4(&mut rng), &vec4(&mut rng))).normalized();
            assert!(line_incidence_residual(&t, &l).norm() <= 1e-10);
        }
        let zero = Tensor3::zeros([3, 3, 3]);
        let p = point_corr(&cams, &vec4(&mut rng));
        assert_eq!(point_incidence_residual(&zero, &p).norm(), 0.0);
    }

    #[test]
    fn point_residual_grows_continuously_under_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(48);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let t = t.scaled(1.0 / t.norm());
        let p = point_corr(&cams, &vec4(&mut rng)).normalized();
        let dir = vec3(&mut rng);
        let mut prev = 0.0;
        for eps in [1e-6, 1e-5, 1e-4, 1e-3] {
            let mut q = p;
            q.x2 += dir * eps;
            let r = point_incidence_residual(&t, &q).norm();
            assert!(r > prev && r <= 50.0 * eps * dir.norm());
            prev = r;
        }
    }

    #[test]
    fn unrelated_lines_give_nonzero_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(49);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let t = t.scaled(1.0 / t.norm());
        for _ in 0..20 {
            let c = LineTripleCorrespondence {
                l1: normalized(&vec3(&mut rng)),
                l2: normalized(&vec3(&mut rng)),
                l3: normalized(&vec3(&mut rng)),
            };
            assert!(line_incidence_residual(&t, &c).norm() > 1e-3);
        }
        let c = LineTripleCorrespondence {
            l1: Vector3::new(1.0, 2.0, 3.0),
            l2: Vector3::new(1.0, 0.0, 0.0),
            l3: Vector3::new(1.0, 0.0, 0.0),
        };
        let mut t = Tensor3::zeros([3, 3, 3]);
        t.set(0, 0, 0, 1.0);
        t.set(1, 0, 0, 2.0);
        t.set(2, 0, 0, 3.0);
        assert_eq!(line_incidence_residual(&t, &c), Vector3::zeros());
    }

    #[test]
    fn linear_estimation_is_exact_on_clean_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let truth = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let lines: Vec<_> = (0..13)
            .map(|_| line_corr(&cams, &PluckerLine::join(&vec4(&mut rng), &vec4(&mut rng))))
            .collect();
        let points: Vec<_> = (0..7).map(|_| point_corr(&cams, &vec4(&mut rng))).collect();
        let from_lines = estimate_trifocal_linear(&[], &lines).unwrap();
        let from_points = estimate_trifocal_linear(&points, &[]).unwrap();
        let mixed = estimate_trifocal_linear(&points[..4], &lines[..5]).unwrap();
        for est in [from_lines, from_points, mixed] {
            assert!((est.norm() - 1.0).abs() < 1e-12);
            assert!(error_up_to_scale(&est, &truth) <= 1e-8);
        }
    }

    #[test]
    fn linear_estimation_rejects_too_few_constraints() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let points: Vec<_> = (0..6).map(|_| point_corr(&cams, &vec4(&mut rng))).collect();
        assert!(matches!(
            estimate_trifocal_linear(&points, &[]),
            Err(Error::InsufficientConstraints { have: 24, need: 26 })
        ));
    }

    #[test]
    fn repeated_correspondence_is_rank_deficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| raw_camera(&mut rng)).collect();
        let p = point_corr(&cams, &vec4(&mut rng));
        let points = vec![p; 8];
        assert!(matches!(
            estimate_trifocal_linear(&points, &[]),
            Err(Error::RankDeficientDesign { .. })
        ));
    }

    #[test]
    fn fundamental_read_from_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| looking_camera(&mut rng)).collect();
        let t = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
        let f = fundamental_from_trifocal(&t);
        let truth = fundamental_from_cameras(&cams[1], &cams[0]).unwrap().f;
        let (a, b) = (f / f.norm(), truth / truth.norm());
        assert!((a - b).norm().min((a + b).norm()) <= 1e-10);
    }

    #[test]
    fn fundamentals_determine_the_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        for _ in 0..20 {
            let k = Matrix3::new(1.1, 0.02, 0.1, 0.0, 0.95, -0.05, 0.0, 0.0, 1.0);
            let cams: Vec<CameraMatrix> = (0..3)
                .map(|_| compose_camera(k, random_rotation(&mut rng), vec3(&mut rng)).unwrap())
                .collect();
            let f = |a: usize, b: usize| fundamental_from_cameras(&cams[a], &cams[b]).unwrap().f;
            let (_, t) = trifocal_from_fundamentals(&f(1, 0), &f(2, 0), &f(2, 1)).unwrap();
            let truth = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
            assert!(error_up_to_scale(&t, &truth) <= 1e-8);
        }
    }

    #[test]
    fn collinear_centers_are_degenerate_for_fundamentals() {
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let dir = vec3(&mut rng);
        let base = vec3(&mut rng);
        let cams: Vec<CameraMatrix> = [0.0, 1.0, 2.5]
            .iter()
            .map(|&s| calibrated_camera(random_rotation(&mut rng), base + dir * s).unwrap())
            .collect();
        let f = |a: usize, b: usize| fundamental_from_cameras(&cams[a], &cams[b]).unwrap().f;
        assert!(matches!(
            trifocal_from_fundamentals(&f(1, 0), &f(2, 0), &f(2, 1)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn noisy_fundamentals_still_give_a_finite_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(56);
        let cams: Vec<CameraMatrix> = (0..3).map(|_| looking_camera(&mut rng)).collect();
        let mut f = |a: usize, b: usize| {
            let m = fundamental_from_cameras(&cams[a], &cams[b]).unwrap().f;
            let m = m / m.norm();
            m + Matrix3::from_fn(|_, _| 1e-3 * rng.sample::<f64, _>(StandardNormal))
        };
        let (f21, f31, f32) = (f(1, 0), f(2, 0), f(2, 1));
        let (_, t) = trifocal_from_fundamentals(&f21, &f31, &f32).unwrap();
        assert!(t.is_finite());
    }

    #[test]
    fn reference_sign_correction() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let t = Tensor3::random([3, 3, 3], &mut rng);
        assert_eq!(correct_sign_with_reference(&t.scaled(-1.0), &t), t);
        assert_eq!(correct_sign_with_reference(&t, &t), t);
    }

    #[test]
    fn cheirality_vote_recovers_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(58);
        for trial in 0..10 {
            let cams: Vec<CameraMatrix> = (0..3).map(|_| looking_camera(&mut rng)).collect();
            let truth = trifocal_from_cameras(&cams[0], &cams[1], &cams[2]);
            let points: Vec<_> = (0..30)
                .map(|_| {
                    let x = vec3(&mut rng) * 0.3;
                    point_corr(&cams, &Vector4::new(x.x, x.y, x.z, 1.0))
                })
                .collect();
            let noise = Tensor3::random([3, 3, 3], &mut rng).scaled(1e-4 * truth.norm());
            let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
            let est = truth.add(&noise).scaled(sign * 0.37);
            let fixed = correct_block_sign(&est, &points).unwrap();
            assert!(fixed.dot(&truth) > 0.0, "trial {trial}");
        }
    }
}
