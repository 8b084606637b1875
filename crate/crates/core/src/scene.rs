//! Seeded synthetic scenes, block corruption and the line-only experiment.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector4};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::block::{build_block_tensor, triples, BlockTensor, ScaleField};
use crate::camera::{
    compose_camera, normalized, project_line, project_point, CameraMatrix, PluckerLine,
};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;
use crate::trifocal::{
    correct_sign_with_reference, estimate_trifocal_linear, LineTripleCorrespondence,
};

/// How camera centers are placed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Layout {
    /// Uniform rotations, centers uniform in the unit box around the origin.
    /// Cameras face arbitrary directions, so world points cannot be visible in
    /// all of them; use [`Layout::Inward`] for scenes with points.
    Generic,
    /// Cameras about 3 units from the origin facing it, centers jittered in a unit box.
    Inward,
    /// Centers on a line that misses the origin.
    Collinear,
    /// All centers equal.
    Coincident,
}

impl std::str::FromStr for Layout {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generic" => Ok(Layout::Generic),
            "inward" => Ok(Layout::Inward),
            "collinear" => Ok(Layout::Collinear),
            "coincident" => Ok(Layout::Coincident),
            other => Err(Error::InvalidConfig(format!("unknown layout '{other}'"))),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::Generic => "generic",
            Layout::Inward => "inward",
            Layout::Collinear => "collinear",
            Layout::Coincident => "coincident",
        })
    }
}

/// Radius of the ball holding world points and lines.
pub const DEFAULT_SCENE_RADIUS: f64 = 1.0;

/// Relative measurement noise of 0.02 percent.
pub const NOISE_PAPER_LOW: f64 = 0.0002;
/// Relative measurement noise of 2 percent.
pub const NOISE_PAPER_HIGH: f64 = 0.02;

/// Resolves a named noise preset or a plain number.
pub fn parse_noise(s: &str) -> Result<f64> {
    match s {
        "paper-low" => Ok(NOISE_PAPER_LOW),
        "paper-high" => Ok(NOISE_PAPER_HIGH),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|x| *x >= 0.0 && x.is_finite())
            .ok_or_else(|| Error::InvalidConfig(format!("bad noise level '{other}'"))),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneConfig {
    pub n_cameras: usize,
    pub layout: Layout,
    pub calibrated: bool,
    pub n_points: usize,
    pub n_lines: usize,
    pub noise_rel: f64,
    /// Radius of the ball around the origin holding points and lines.
    pub scene_radius: f64,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_cameras: 10,
            layout: Layout::Generic,
            calibrated: true,
            n_points: 0,
            n_lines: 0,
            noise_rel: 0.0,
            scene_radius: DEFAULT_SCENE_RADIUS,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cameras < 3 {
            return Err(Error::InvalidConfig(format!(
                "n_cameras must be at least 3, got {}",
                self.n_cameras
            )));
        }
        if !(self.noise_rel >= 0.0 && self.noise_rel.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad noise_rel {}", self.noise_rel)));
        }
        if !(self.scene_radius > 0.0 && self.scene_radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "scene_radius must be positive, got {}",
                self.scene_radius
            )));
        }
        Ok(())
    }
}

/// Cameras, world geometry and per-image measurements (unit-norm vectors).
#[derive(Clone, Debug)]
pub struct Scene {
    pub cameras: Vec<CameraMatrix>,
    pub points: Vec<Vector4<f64>>,
    pub lines: Vec<PluckerLine>,
    /// `point_obs[c][p]`: image of point `p` in camera `c`.
    pub point_obs: Vec<Vec<Vector3<f64>>>,
    /// `line_obs[c][l]`: image of line `l` in camera `c`.
    pub line_obs: Vec<Vec<Vector3<f64>>>,
}

/// Uniformly distributed rotation.
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    let q = Quaternion::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    );
    UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .into_inner()
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal));
        if v.norm() > 1e-6 {
            return v.normalize();
        }
    }
}

/// Rotation whose optical axis points from `center` to the origin, with a random roll.
fn look_at_origin<R: Rng + ?Sized>(center: &Vector3<f64>, rng: &mut R) -> Matrix3<f64> {
    let z = (-center).normalize();
    let x = loop {
        let v = random_unit(rng);
        let x = v - z * v.dot(&z);
        if x.norm() > 1e-3 {
            break x.normalize();
        }
    };
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}

fn random_intrinsics<R: Rng + ?Sized>(rng: &mut R) -> Matrix3<f64> {
    Matrix3::new(
        rng.random_range(0.8..1.5),
        rng.random_range(-0.05..0.05),
        rng.random_range(-0.2..0.2),
        0.0,
        rng.random_range(0.8..1.5),
        rng.random_range(-0.2..0.2),
        0.0,
        0.0,
        1.0,
    )
}

fn generate_cameras<R: Rng + ?Sized>(cfg: &SceneConfig, rng: &mut R) -> Result<Vec<CameraMatrix>> {
    let line_dir = random_unit(rng);
    let offset = {
        let v = random_unit(rng);
        (v - line_dir * v.dot(&line_dir)).normalize() * 3.0
    };
    let shared_center = random_unit(rng) * 3.0;
    (0..cfg.n_cameras)
        .map(|_| {
            let (r, c) = match cfg.layout {
                Layout::Generic => (
                    random_rotation(rng),
                    Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5)),
                ),
                Layout::Inward => {
                    let r = random_rotation(rng);
                    let jitter = Vector3::from_fn(|_, _| rng.random_range(-0.5..0.5));
                    (r, -r.transpose() * Vector3::new(0.0, 0.0, 3.0) + jitter)
                }
                Layout::Collinear => {
                    let c = offset + line_dir * rng.random_range(-2.0..2.0);
                    (look_at_origin(&c, rng), c)
                }
                Layout::Coincident => (look_at_origin(&shared_center, rng), shared_center),
            };
            let k = if cfg.calibrated {
                Matrix3::identity()
            } else {
                random_intrinsics(rng)
            };
            compose_camera(k, r, c)
        })
        .collect()
}

fn depth(cam: &CameraMatrix, x: &Vector4<f64>) -> f64 {
    let d = cam.decomposition().expect("generated cameras are decomposed");
    (d.r * (x.xyz() / x.w - d.t)).z
}

fn sample_point<R: Rng + ?Sized>(
    cams: &[CameraMatrix],
    radius: f64,
    rng: &mut R,
) -> Result<Vector4<f64>> {
    for _ in 0..1000 {
        let v = uniform_in_ball(radius, rng);
        let x = Vector4::new(v.x, v.y, v.z, 1.0);
        if cams.iter().all(|c| depth(c, &x) > 0.1) {
            return Ok(x);
        }
    }
    Err(Error::Degenerate("no world point visible in all cameras after 1000 draws".into()))
}

fn uniform_in_ball<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Vector3<f64> {
    random_unit(rng) * radius * rng.random::<f64>().cbrt()
}

/// Join of two uniform points in the ball. Lines need not be in front of the
/// cameras, only away from their centers.
fn sample_line<R: Rng + ?Sized>(cams: &[CameraMatrix], radius: f64, rng: &mut R) -> Result<PluckerLine> {
    for _ in 0..1000 {
        let (a, b) = (uniform_in_ball(radius, rng), uniform_in_ball(radius, rng));
        let dir = b - a;
        if dir.norm() < 0.1 * radius {
            continue;
        }
        let u = dir.normalize();
        let clear = cams.iter().all(|c| {
            let off = c.center().xyz() / c.center().w - a;
            (off - u * off.dot(&u)).norm() > 0.02 * radius
        });
        if clear {
            return Ok(PluckerLine::join(&a.push(1.0), &b.push(1.0)));
        }
    }
    Err(Error::Degenerate("no world line clear of the camera centers after 1000 draws".into()))
}

/// Adds noise of relative size `rel` in a random direction, then renormalizes.
pub fn perturb<R: Rng + ?Sized>(x: &Vector3<f64>, rel: f64, rng: &mut R) -> Vector3<f64> {
    let base = normalized(x);
    if rel == 0.0 {
        return base;
    }
    normalized(&(base + random_unit(rng) * rel))
}

/// Generates a seeded scene with measurements in every camera.
pub fn generate_scene(cfg: &SceneConfig) -> Result<Scene> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let cameras = generate_cameras(cfg, &mut rng)?;
    let points: Vec<Vector4<f64>> = (0..cfg.n_points)
        .map(|_| sample_point(&cameras, cfg.scene_radius, &mut rng))
        .collect::<Result<_>>()?;
    let lines: Vec<PluckerLine> = (0..cfg.n_lines)
        .map(|_| sample_line(&cameras, cfg.scene_radius, &mut rng))
        .collect::<Result<_>>()?;
    let mut point_obs = Vec::with_capacity(cameras.len());
    let mut line_obs = Vec::with_capacity(cameras.len());
    for cam in &cameras {
        let pts = points
            .iter()
            .map(|x| Ok(perturb(&project_point(cam, x)?, cfg.noise_rel, &mut rng)))
            .collect::<Result<Vec<_>>>()?;
        let lns = lines
            .iter()
            .map(|l| perturb(&project_line(cam, l), cfg.noise_rel, &mut rng))
            .collect();
        point_obs.push(pts);
        line_obs.push(lns);
    }
    Ok(Scene {
        cameras,
        points,
        lines,
        point_obs,
        line_obs,
    })
}

/// Law for the unknown per-block scales.
#[derive(Clone, Debug, PartialEq)]
pub enum ScaleLaw {
    Unit,
    /// `log λ` uniform on `[log lo, log hi]`.
    LogUniform { lo: f64, hi: f64 },
    /// Fixed `λ = α ⊗ β ⊗ γ`.
    Rank1 {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
    /// `λ = α ⊗ β ⊗ γ` with entries drawn uniformly from `[lo, hi]`.
    RandomRank1 { lo: f64, hi: f64 },
}

/// Law for the observation mask.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MaskLaw {
    Full,
    /// Each off-diagonal block observed independently with probability `p`.
    Bernoulli { p_observed: f64 },
    /// Each frontal slice keeps at least a fraction `q` of its blocks.
    PerSliceMin { q: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionConfig {
    pub scale_law: ScaleLaw,
    pub sign_flip_prob: f64,
    pub mask_law: MaskLaw,
    pub outlier_block_prob: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            scale_law: ScaleLaw::Unit,
            sign_flip_prob: 0.0,
            mask_law: MaskLaw::Full,
            outlier_block_prob: 0.0,
            seed: 0,
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {p}")))
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("sign_flip_prob", self.sign_flip_prob)?;
        check_probability("outlier_block_prob", self.outlier_block_prob)?;
        match self.mask_law {
            MaskLaw::Full => {}
            MaskLaw::Bernoulli { p_observed } => check_probability("p_observed", p_observed)?,
            MaskLaw::PerSliceMin { q } => check_probability("q", q)?,
        }
        match &self.scale_law {
            ScaleLaw::LogUniform { lo, hi } | ScaleLaw::RandomRank1 { lo, hi } => {
                if !(*lo > 0.0 && *hi >= *lo) {
                    return Err(Error::InvalidConfig(format!(
                        "scale bounds need 0 < lo <= hi, got [{lo}, {hi}]"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// A corrupted tensor together with the corruption that produced it.
#[derive(Clone, Debug)]
pub struct Corruption {
    pub tensor: BlockTensor,
    /// Ground-truth scales; zero on unobserved blocks and one on the diagonal.
    pub lambda: ScaleField,
    pub mask: Vec<bool>,
    /// Blocks replaced by random tensors.
    pub outliers: Vec<(usize, usize, usize)>,
}

fn draw_mask<R: Rng + ?Sized>(n: usize, law: MaskLaw, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![true; n * n * n];
    match law {
        MaskLaw::Full => {}
        MaskLaw::Bernoulli { p_observed } => {
            for m in mask.iter_mut() {
                *m = rng.random::<f64>() < p_observed;
            }
        }
        MaskLaw::PerSliceMin { q } => {
            let keep = (q * (n * n) as f64).ceil() as usize;
            for k in 0..n {
                let mut cells: Vec<usize> = (0..n * n).collect();
                cells.shuffle(rng);
                for (rank, &c) in cells.iter().enumerate() {
                    mask[c + n * n * k] = rank < keep;
                }
            }
        }
    }
    for i in 0..n {
        mask[i + n * (i + n * i)] = true;
    }
    mask
}

fn covers_all(n: usize, mask: &[bool]) -> bool {
    let mut covered = vec![false; n];
    for (i, j, k) in triples(n) {
        if mask[i + n * (j + n * k)] && !(i == j && j == k) {
            covered[i] = true;
            covered[j] = true;
            covered[k] = true;
        }
    }
    covered.into_iter().all(|c| c)
}

/// Applies scales, sign flips, a mask and gross outliers to a tensor.
pub fn corrupt_blocks(t: &BlockTensor, cfg: &CorruptionConfig) -> Result<Corruption> {
    cfg.validate()?;
    let n = t.n();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut lambda = match &cfg.scale_law {
        ScaleLaw::Unit => ScaleField::ones(n),
        ScaleLaw::LogUniform { lo, hi } => {
            let (a, b) = (lo.ln(), hi.ln());
            ScaleField::from_fn(n, |_, _, _| {
                if a == b {
                    *lo
                } else {
                    rng.random_range(a..=b).exp()
                }
            })
        }
        ScaleLaw::Rank1 { alpha, beta, gamma } => ScaleField::rank1(alpha, beta, gamma)?,
        ScaleLaw::RandomRank1 { lo, hi } => {
            let mut v = || (0..n).map(|_| rng.random_range(*lo..=*hi)).collect::<Vec<f64>>();
            let (a, b, c) = (v(), v(), v());
            ScaleField::rank1(&a, &b, &c)?
        }
    };
    if lambda.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "scale law for n = {} applied to n = {n}",
            lambda.n()
        )));
    }
    for (i, j, k) in triples(n) {
        if cfg.sign_flip_prob > 0.0 && rng.random::<f64>() < cfg.sign_flip_prob {
            lambda.set(i, j, k, -lambda.get(i, j, k));
        }
    }
    let mut mask = None;
    for _ in 0..100 {
        let m = draw_mask(n, cfg.mask_law, &mut rng);
        if covers_all(n, &m) {
            mask = Some(m);
            break;
        }
    }
    let mask = mask.ok_or_else(|| {
        Error::Degenerate("mask law left a camera uncovered after 100 draws".into())
    })?;

    let mut out = t.clone();
    let mut outliers = Vec::new();
    for (i, j, k) in triples(n) {
        let idx = i + n * (j + n * k);
        if i == j && j == k {
            lambda.set(i, j, k, 1.0);
            continue;
        }
        if !mask[idx] {
            lambda.set(i, j, k, 0.0);
            out.set_observed(i, j, k, false);
            continue;
        }
        let scaled = t.block(i, j, k).scaled(lambda.get(i, j, k));
        let block = if cfg.outlier_block_prob > 0.0 && rng.random::<f64>() < cfg.outlier_block_prob
        {
            outliers.push((i, j, k));
            let g = Tensor3::random([3, 3, 3], &mut rng);
            g.scaled(scaled.norm() / g.norm())
        } else {
            scaled
        };
        out.set_block(i, j, k, &block);
        out.set_observed(i, j, k, true);
    }
    Ok(Corruption {
        tensor: out,
        lambda,
        mask,
        outliers,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LineExperimentConfig {
    pub n_cameras: usize,
    pub n_lines: usize,
    pub noise_rel: f64,
    pub scene_radius: f64,
    pub seed: u64,
}

impl Default for LineExperimentConfig {
    fn default() -> Self {
        Self {
            n_cameras: 20,
            n_lines: 25,
            noise_rel: NOISE_PAPER_HIGH,
            scene_radius: DEFAULT_SCENE_RADIUS,
            seed: 0,
        }
    }
}

/// Estimated blocks for every triple of distinct cameras plus the ground truth.
#[derive(Clone, Debug)]
pub struct LineExperiment {
    pub estimated: BlockTensor,
    pub ground_truth: BlockTensor,
    pub scene: Scene,
}

/// Line-only experiment: every triple of distinct calibrated cameras is
/// estimated linearly from the shared lines and sign-corrected against the
/// ground-truth block. Blocks with a repeated camera cannot be estimated from
/// lines and stay unobserved; diagonal blocks stay observed as zeros.
pub fn generate_line_experiment(cfg: &LineExperimentConfig) -> Result<LineExperiment> {
    if cfg.n_lines < 13 {
        return Err(Error::InsufficientConstraints {
            have: 2 * cfg.n_lines,
            need: 26,
        });
    }
    let scene = generate_scene(&SceneConfig {
        n_cameras: cfg.n_cameras,
        layout: Layout::Generic,
        calibrated: true,
        n_points: 0,
        n_lines: cfg.n_lines,
        noise_rel: cfg.noise_rel,
        scene_radius: cfg.scene_radius,
        seed: cfg.seed,
    })?;
    let ground_truth = build_block_tensor(&scene.cameras)?;
    let n = cfg.n_cameras;
    let distinct: Vec<(usize, usize, usize)> = triples(n)
        .filter(|&(i, j, k)| i != j && j != k && i != k)
        .collect();
    let blocks: Vec<Tensor3> = distinct
        .par_iter()
        .map(|&(i, j, k)| {
            let lines: Vec<LineTripleCorrespondence> = (0..cfg.n_lines)
                .map(|l| LineTripleCorrespondence {
                    l1: scene.line_obs[i][l],
                    l2: scene.line_obs[j][l],
                    l3: scene.line_obs[k][l],
                })
                .collect();
            let est = estimate_trifocal_linear(&[], &lines).map_err(|e| Error::Iteration {
                iteration: i + n * (j + n * k),
                source: Box::new(e),
            })?;
            Ok(correct_sign_with_reference(&est, &ground_truth.block(i, j, k)))
        })
        .collect::<Result<_>>()?;
    let mut estimated = BlockTensor::empty(n)?;
    for (&(i, j, k), b) in distinct.iter().zip(&blocks) {
        estimated.set_block(i, j, k, b);
        estimated.set_observed(i, j, k, true);
    }
    Ok(LineExperiment {
        estimated,
        ground_truth,
        scene,
    })
}
