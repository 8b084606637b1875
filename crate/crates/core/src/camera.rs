//! Projective cameras, Plücker lines and two-view epipolar geometry.

use nalgebra::{Matrix3, Matrix3x4, SMatrix, Vector3, Vector4, Vector6};

use crate::error::{Error, Result};

/// Column pairs indexing Plücker coordinates and line-projection columns.
pub const PLUCKER_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

pub type Matrix3x6 = SMatrix<f64, 3, 6>;

/// Intrinsics, orientation and center of a camera `P = s · K R [I | −t]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decomposition {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    pub scale: f64,
}

/// A 3×4 projection matrix, optionally with its metric decomposition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraMatrix {
    p: Matrix3x4<f64>,
    decomposition: Option<Decomposition>,
}

fn rank_is_full(p: &Matrix3x4<f64>) -> bool {
    let s = p.svd(false, false).singular_values;
    let max = s.max();
    max > 0.0 && s.min() > 1e-10 * max
}

impl CameraMatrix {
    /// Wraps a raw projection matrix; it must have rank 3.
    pub fn from_matrix(p: Matrix3x4<f64>) -> Result<Self> {
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidCamera("non-finite entry".into()));
        }
        if !rank_is_full(&p) {
            return Err(Error::InvalidCamera("projection matrix has rank below 3".into()));
        }
        Ok(Self {
            p,
            decomposition: None,
        })
    }

    /// Wraps a projection matrix and recovers `s · K R [I | −t]` by an RQ
    /// factorization of its left 3×3 block, normalized so `K₃₃ = 1`.
    /// Fails when that block has a negative determinant.
    pub fn decompose(p: Matrix3x4<f64>) -> Result<Self> {
        let cam = Self::from_matrix(p)?;
        let m = p.fixed_view::<3, 3>(0, 0).into_owned();
        if m.determinant() <= 0.0 {
            return Err(Error::InvalidCamera(
                "left 3x3 block must have a positive determinant".into(),
            ));
        }
        let flip = Matrix3::new(0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0);
        let qr = (flip * m).transpose().qr();
        let mut k = flip * qr.r().transpose() * flip;
        let mut r = flip * qr.q().transpose();
        for i in 0..3 {
            if k[(i, i)] < 0.0 {
                k.set_column(i, &(-k.column(i)));
                r.set_row(i, &(-r.row(i)));
            }
        }
        let scale = k[(2, 2)];
        k /= scale;
        let t = -(m.try_inverse().ok_or(Error::InvalidCamera("singular 3x3 block".into()))?
            * p.column(3));
        Ok(Self {
            decomposition: Some(Decomposition { k, r, t, scale }),
            ..cam
        })
    }

    pub fn matrix(&self) -> &Matrix3x4<f64> {
        &self.p
    }

    pub fn decomposition(&self) -> Option<&Decomposition> {
        self.decomposition.as_ref()
    }

    /// Rows of `P` as 4-vectors.
    pub fn row(&self, w: usize) -> Vector4<f64> {
        self.p.row(w).transpose()
    }

    /// Returns `s · P`, keeping the decomposition consistent.
    pub fn scaled(&self, s: f64) -> CameraMatrix {
        let decomposition = self.decomposition.and_then(|d| {
            (s > 0.0).then_some(Decomposition {
                scale: d.scale * s,
                ..d
            })
        });
        CameraMatrix {
            p: self.p * s,
            decomposition,
        }
    }

    /// Homogeneous camera center, the null vector of `P`.
    pub fn center(&self) -> Vector4<f64> {
        if let Some(d) = &self.decomposition {
            return Vector4::new(d.t.x, d.t.y, d.t.z, 1.0);
        }
        // Signed cofactors of the 3×3 minors give the null vector exactly.
        let mut c = Vector4::zeros();
        for drop in 0..4 {
            let cols: Vec<usize> = (0..4).filter(|&j| j != drop).collect();
            let m = Matrix3::from_fn(|r, k| self.p[(r, cols[k])]);
            let sign = if drop % 2 == 0 { 1.0 } else { -1.0 };
            c[drop] = sign * m.determinant();
        }
        c
    }
}

fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    (r.transpose() * r - Matrix3::identity()).norm() <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// `P = K R [I | −t]`.
pub fn compose_camera(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>) -> Result<CameraMatrix> {
    if !is_rotation(&r, 1e-8) {
        return Err(Error::InvalidCamera("R is not a rotation".into()));
    }
    let upper = k[(1, 0)] == 0.0 && k[(2, 0)] == 0.0 && k[(2, 1)] == 0.0;
    let positive = (0..3).all(|i| k[(i, i)] > 0.0);
    if !upper || !positive {
        return Err(Error::InvalidCamera(
            "K must be upper-triangular with a positive diagonal".into(),
        ));
    }
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.set_column(3, &(-(r * t)));
    Ok(CameraMatrix {
        p: k * rt,
        decomposition: Some(Decomposition {
            k,
            r,
            t,
            scale: 1.0,
        }),
    })
}

/// Camera with identity intrinsics.
pub fn calibrated_camera(r: Matrix3<f64>, t: Vector3<f64>) -> Result<CameraMatrix> {
    compose_camera(Matrix3::identity(), r, t)
}

/// Cross-product matrix `[v]×`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// A world line in Plücker coordinates `L_ab = X_a Y_b − X_b Y_a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PluckerLine(pub Vector6<f64>);

impl PluckerLine {
    /// Line through two homogeneous world points.
    pub fn join(x: &Vector4<f64>, y: &Vector4<f64>) -> PluckerLine {
        PluckerLine(Vector6::from_fn(|s, _| {
            let (a, b) = PLUCKER_PAIRS[s];
            x[a] * y[b] - x[b] * y[a]
        }))
    }

    /// `L₁L₆ − L₂L₅ + L₃L₄`, zero for every real line.
    pub fn quadric(&self) -> f64 {
        let l = &self.0;
        l[0] * l[5] - l[1] * l[4] + l[2] * l[3]
    }

    /// Quadric residual relative to `‖L‖²`.
    pub fn quadric_residual(&self) -> f64 {
        self.quadric().abs() / self.0.norm_squared().max(f64::MIN_POSITIVE)
    }
}

/// The 3×6 matrix mapping Plücker lines to image lines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineProjectionMatrix(pub Matrix3x6);

/// Row `w` holds the signed 2×2 minors of `P` with row `w` removed, i.e. the
/// rows are `P²∧P³`, `P³∧P¹` and `P¹∧P²`.
pub fn line_projection_matrix(cam: &CameraMatrix) -> LineProjectionMatrix {
    let p = cam.matrix();
    let rows = [(1, 2), (2, 0), (0, 1)];
    LineProjectionMatrix(Matrix3x6::from_fn(|w, s| {
        let (r1, r2) = rows[w];
        let (a, b) = PLUCKER_PAIRS[s];
        p[(r1, a)] * p[(r2, b)] - p[(r1, b)] * p[(r2, a)]
    }))
}

/// Image line of a world line.
pub fn project_line(cam: &CameraMatrix, line: &PluckerLine) -> Vector3<f64> {
    line_projection_matrix(cam).0 * line.0
}

/// `x = P X`; fails when `X` is the camera center.
pub fn project_point(cam: &CameraMatrix, x: &Vector4<f64>) -> Result<Vector3<f64>> {
    if x.norm() == 0.0 {
        return Err(Error::InvalidConfig("world point is the zero vector".into()));
    }
    let img = cam.matrix() * x;
    let scale = cam.matrix().norm() * x.norm();
    if img.norm() <= 1e-12 * scale {
        return Err(Error::PointAtCenter);
    }
    Ok(img)
}

/// Fundamental matrix with `x_iᵀ F x_j = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fundamental {
    pub f: Matrix3<f64>,
    /// Set when the centers coincide and `F` collapses to rank ≤ 1.
    pub rank_deficient: bool,
}

/// `F_ij = K_i⁻ᵀ [t_ij]× R_ij K_j⁻¹` with `R_ij = R_i R_jᵀ`, `t_ij = R_i (t_i − t_j)`.
pub fn fundamental_from_cameras(ci: &CameraMatrix, cj: &CameraMatrix) -> Result<Fundamental> {
    let (di, dj) = match (ci.decomposition(), cj.decomposition()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::InvalidCamera(
                "fundamental matrix needs decomposed cameras".into(),
            ))
        }
    };
    let ki_inv = di
        .k
        .try_inverse()
        .ok_or_else(|| Error::InvalidCamera("singular K".into()))?;
    let kj_inv = dj
        .k
        .try_inverse()
        .ok_or_else(|| Error::InvalidCamera("singular K".into()))?;
    let r_ij = di.r * dj.r.transpose();
    let t_ij = di.r * (di.t - dj.t);
    let f = ki_inv.transpose() * skew(&t_ij) * r_ij * kj_inv;
    let baseline = (di.t - dj.t).norm();
    let extent = di.t.norm().max(dj.t.norm()).max(1.0);
    Ok(Fundamental {
        f,
        rank_deficient: baseline <= 1e-12 * extent,
    })
}

/// Fundamental matrix from raw projection matrices: `F_ij = [e_i]× P_i P_j⁺`
/// where `e_i = P_i C_j`. Agrees with [`fundamental_from_cameras`] up to scale.
pub fn fundamental_from_projections(ci: &CameraMatrix, cj: &CameraMatrix) -> Result<Matrix3<f64>> {
    let pj = cj.matrix();
    let pinv = pj
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let e = ci.matrix() * cj.center();
    Ok(skew(&e) * ci.matrix() * pinv)
}

/// Unit-norm copy of a vector; zero vectors are returned unchanged.
pub fn normalized<const D: usize>(v: &SMatrix<f64, D, 1>) -> SMatrix<f64, D, 1> {
    let n = v.norm();
    if n == 0.0 {
        *v
    } else {
        v / n
    }
}

/// Angle between two projective vectors, in radians, ignoring sign.
pub fn projective_angle<const D: usize>(a: &SMatrix<f64, D, 1>, b: &SMatrix<f64, D, 1>) -> f64 {
    let (a, mut b) = (normalized(a), normalized(b));
    if a.dot(&b) < 0.0 {
        b = -b;
    }
    // The chord form stays accurate for tiny angles, unlike acos.
    2.0 * ((a - b).norm() / 2.0).min(1.0).asin()
}
