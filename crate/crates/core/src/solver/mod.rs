//! Box recovery from nine keypoints.
//!
//! The energy is the confidence-weighted reprojection error of the eight
//! vertexes and the 3D center, plus optional dimension and orientation
//! priors. It is minimized with Levenberg-Marquardt over a left se(3)
//! perturbation of the pose and the three box dimensions; the full rotation
//! is optimized and the yaw extracted at the end.

mod residuals;

use nalgebra::{SMatrix, SVector, Vector2, Vector3, Vector6};
use thiserror::Error;

use crate::geometry::{
    exp_se3, hat, twist_from_parts, Box3D, CameraModel, GeometryError, KeypointSet, PoseSE3, Twist,
    CENTER, MIN_DEPTH,
};

pub use residuals::{
    box_pose, jacobian_camera_point, residual_camera_point, residual_dimension, residual_rotation,
    split_yaw, total_energy, CameraJacobian, CameraResidual, ConfidenceWeight, EnergyBreakdown,
    NUM_PARAMS, NUM_ROWS,
};

/// Mean car dimensions `[h, w, l]` of the KITTI training split.
pub const MEAN_CAR_DIMS: [f64; 3] = [1.53, 1.62, 3.89];

/// Standard deviation of the car dimensions `[h, w, l]`.
pub const STD_CAR_DIMS: [f64; 3] = [0.13, 0.10, 0.41];

/// Depth used when neither a prior nor a usable keypoint extent is available.
const FALLBACK_DEPTH: f64 = 20.0;

/// Optional priors decoded alongside the keypoints.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Priors {
    /// `[h, w, l]` in meters.
    pub dims: Option<Vector3<f64>>,
    /// Global yaw in radians.
    pub yaw: Option<f64>,
    /// Depth of the box in meters.
    pub depth: Option<f64>,
}

impl Priors {
    pub fn all_present(&self) -> bool {
        self.dims.is_some() && self.yaw.is_some() && self.depth.is_some()
    }

    pub fn is_valid(&self) -> bool {
        self.dims.is_none_or(|d| d.iter().all(|v| *v > 0.0))
            && self.depth.is_none_or(|z| z > 0.0)
            && self.yaw.is_none_or(f64::is_finite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyWeights {
    pub w_d: f64,
    pub w_r: f64,
}

impl Default for EnergyWeights {
    fn default() -> Self {
        Self { w_d: 1.0, w_r: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Convergence threshold on the infinity norm of the energy gradient.
    pub g_tol: f64,
    /// Relative step size below which iteration stops.
    pub step_tol: f64,
    /// Steps moving any keypoint beyond this depth are rejected.
    pub max_depth: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            g_tol: 1e-8,
            step_tol: 1e-10,
            max_depth: 1000.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub box3d: Box3D,
    /// Full optimized pose; its rotation may carry roll and pitch.
    pub pose: PoseSE3,
    /// Roll/pitch rotation vector left after removing the yaw.
    pub tilt: Vector3<f64>,
    pub iterations: usize,
    pub final_cost: f64,
    pub energy: EnergyBreakdown,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SolveError {
    #[error("{visible} visible keypoints, need at least {required}")]
    InsufficientConstraints { visible: usize, required: usize },
    #[error("energy became non-finite")]
    Diverged,
    #[error("invalid camera or priors")]
    InvalidInput,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Visible keypoints needed for a well-posed problem.
pub fn required_keypoints(priors: &Priors) -> usize {
    if priors.all_present() {
        2
    } else {
        5
    }
}

/// Initial pose twist and dimensions from priors and keypoints.
pub fn initialize(priors: &Priors, kps: &KeypointSet, cam: &CameraModel) -> (Twist, Vector3<f64>) {
    let dims = priors.dims.unwrap_or_else(|| Vector3::from(MEAN_CAR_DIMS));
    let yaw = priors.yaw.unwrap_or(0.0);

    let anchor = if kps.visible[CENTER] {
        kps.pts[CENTER]
    } else if kps.visible_count() > 0 {
        kps.visible_points().sum::<Vector2<f64>>() / kps.visible_count() as f64
    } else {
        Vector2::new(cam.cx, cam.cy)
    };
    let depth = priors.depth.unwrap_or_else(|| {
        let vs: Vec<f64> = (0..CENTER).filter(|j| kps.visible[*j]).map(|j| kps.pts[j].y).collect();
        let extent = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vs.iter().cloned().fold(f64::INFINITY, f64::min);
        if vs.len() >= 2 && extent > 1.0 {
            (cam.fy * dims[0] / extent).clamp(1.0, 200.0)
        } else {
            FALLBACK_DEPTH
        }
    });
    // The anchor is the box center, half a height above the bottom face.
    let center = cam.back_project(&anchor, depth);
    let t = center + Vector3::new(0.0, 0.5 * dims[0], 0.0);
    (twist_from_parts(&Vector3::new(0.0, yaw, 0.0), &t), dims)
}

/// Solves for the box best explaining `kps`, starting from [`initialize`].
pub fn solve(
    kps: &KeypointSet,
    cam: &CameraModel,
    priors: &Priors,
    weights: &EnergyWeights,
    config: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    let required = required_keypoints(priors);
    let visible = kps.visible_count();
    if visible < required {
        return Err(SolveError::InsufficientConstraints { visible, required });
    }
    let (xi, dims) = initialize(priors, kps, cam);
    solve_from(kps, cam, priors, weights, config, &xi, &dims)
}

struct Linearization {
    cost: EnergyBreakdown,
    hessian: SMatrix<f64, NUM_PARAMS, NUM_PARAMS>,
    /// `Jᵀ W e`; the energy gradient is twice this.
    jte: SVector<f64, NUM_PARAMS>,
}

struct Problem<'a> {
    kps: &'a KeypointSet,
    cam: &'a CameraModel,
    priors: &'a Priors,
    weights: &'a EnergyWeights,
    confw: ConfidenceWeight,
    row_w: SVector<f64, NUM_ROWS>,
    max_depth: f64,
}

impl Problem<'_> {
    fn energy(&self, pose: &PoseSE3, dims: &Vector3<f64>) -> Result<EnergyBreakdown, GeometryError> {
        residuals::energy(pose, dims, self.kps, self.cam, self.priors, self.weights, &self.confw)
    }

    fn admissible(&self, pose: &PoseSE3, dims: &Vector3<f64>) -> bool {
        dims.iter().all(|d| *d > MIN_DEPTH)
            && crate::geometry::object_points(dims).iter().all(|p| {
                let z = self.cam.to_camera(&pose.transform(p)).z;
                z > MIN_DEPTH && z < self.max_depth
            })
    }

    fn linearize(&self, pose: &PoseSE3, dims: &Vector3<f64>) -> Result<Linearization, GeometryError> {
        let e = residuals::camera_residual(pose, dims, self.kps, self.cam)?;
        let mut j = residuals::camera_jacobian(pose, dims, self.cam)?;
        for r in 0..NUM_ROWS {
            if !self.kps.visible[r / 2] {
                j.row_mut(r).fill(0.0);
            }
        }
        let jw = SMatrix::<f64, NUM_PARAMS, NUM_ROWS>::from_fn(|i, k| j[(k, i)] * self.row_w[k]);
        let mut hessian = jw * j;
        let mut jte = jw * e;

        if let Some(d_hat) = self.priors.dims {
            // e_d = D̂ - D, de_d/dD = -I
            let e_d = residual_dimension(dims, &d_hat);
            for k in 0..3 {
                hessian[(6 + k, 6 + k)] += self.weights.w_d;
                jte[6 + k] -= self.weights.w_d * e_d[k];
            }
        }
        if let Some(theta_hat) = self.priors.yaw {
            let e_r = residuals::rotation_residual(&pose.r, theta_hat);
            let j_r = residuals::rotation_jacobian(&pose.r, &e_r);
            let jrt = j_r.transpose() * self.weights.w_r;
            let block = jrt * j_r;
            let g = jrt * e_r;
            for a in 0..3 {
                jte[3 + a] += g[a];
                for b in 0..3 {
                    hessian[(3 + a, 3 + b)] += block[(a, b)];
                }
            }
        }
        Ok(Linearization { cost: self.energy(pose, dims)?, hessian, jte })
    }
}

/// Maps `(v', w', dD)`, a motion rotating about `c`, to the left-perturbation
/// twist `(v' + c × w', w', dD)`.
fn object_centred_basis(c: &Vector3<f64>) -> SMatrix<f64, NUM_PARAMS, NUM_PARAMS> {
    let mut a = SMatrix::<f64, NUM_PARAMS, NUM_PARAMS>::identity();
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&hat(c));
    a
}

fn apply_step(pose: &PoseSE3, dims: &Vector3<f64>, step: &SVector<f64, NUM_PARAMS>) -> (PoseSE3, Vector3<f64>) {
    let dxi = Twist::from_vector(&Vector6::from_iterator(step.iter().take(6).cloned()));
    let new_pose = exp_se3(&dxi).compose(pose);
    (new_pose, dims + Vector3::new(step[6], step[7], step[8]))
}

/// Levenberg-Marquardt from an explicit initial pose twist and dimensions.
pub fn solve_from(
    kps: &KeypointSet,
    cam: &CameraModel,
    priors: &Priors,
    weights: &EnergyWeights,
    config: &SolverConfig,
    init_pose: &Twist,
    init_dims: &Vector3<f64>,
) -> Result<SolveReport, SolveError> {
    if !cam.is_valid() || !priors.is_valid() || !init_pose.is_finite() {
        return Err(SolveError::InvalidInput);
    }
    let confw = ConfidenceWeight::from_confidences(&kps.conf);
    let problem = Problem {
        kps,
        cam,
        priors,
        weights,
        row_w: confw.row_weights(),
        confw,
        max_depth: config.max_depth,
    };

    let mut pose = exp_se3(init_pose);
    let mut dims = *init_dims;
    let mut lin = problem.linearize(&pose, &dims)?;
    if !lin.cost.total().is_finite() {
        return Err(SolveError::Diverged);
    }

    let mut lambda = config.initial_damping;
    let mut iterations = 0;
    let mut grad_norm = 2.0 * lin.jte.amax();
    while iterations < config.max_iter && grad_norm >= config.g_tol {
        let mut accepted = false;
        // Damping acts in coordinates that rotate about the box instead of
        // the camera origin; the step is mapped back before it is applied.
        let a = object_centred_basis(&pose.t);
        let h = a.transpose() * lin.hessian * a;
        let g = a.transpose() * lin.jte;
        while lambda < 1e16 {
            let mut damped = h;
            for k in 0..NUM_PARAMS {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-9);
            }
            let Some(step) = damped.cholesky().map(|c| a * c.solve(&-g)) else {
                lambda *= config.damping_factor;
                continue;
            };
            let scale = pose.t.norm() + dims.norm();
            if step.norm() < config.step_tol * (scale + config.step_tol) {
                break;
            }
            let (cand_pose, cand_dims) = apply_step(&pose, &dims, &step);
            let cand_cost = if problem.admissible(&cand_pose, &cand_dims) {
                problem.energy(&cand_pose, &cand_dims).ok().map(|e| e.total())
            } else {
                None
            };
            match cand_cost {
                Some(c) if c.is_finite() && c <= lin.cost.total() => {
                    pose = cand_pose;
                    dims = cand_dims;
                    lambda = (lambda / config.damping_factor).max(1e-12);
                    accepted = true;
                    break;
                }
                _ => lambda *= config.damping_factor,
            }
        }
        if !accepted {
            break;
        }
        iterations += 1;
        lin = problem.linearize(&pose, &dims)?;
        if !lin.cost.total().is_finite() {
            return Err(SolveError::Diverged);
        }
        grad_norm = 2.0 * lin.jte.amax();
    }

    let (yaw, tilt) = split_yaw(&pose.r);
    Ok(SolveReport {
        box3d: Box3D::new(dims, pose.t, yaw),
        pose,
        tilt,
        iterations,
        final_cost: lin.cost.total(),
        energy: lin.cost,
        gradient_norm: grad_norm,
        converged: grad_norm < config.g_tol,
    })
}

/// Twist and dimensions of a known box, e.g. to start from a perturbed truth.
pub fn box_to_init(b: &Box3D) -> (Twist, Vector3<f64>) {
    (twist_from_parts(&Vector3::new(0.0, b.yaw, 0.0), &b.t), b.dims)
}

/// Solves many independent objects, in parallel when enabled.
pub fn solve_batch(
    items: &[(KeypointSet, Priors)],
    cam: &CameraModel,
    weights: &EnergyWeights,
    config: &SolverConfig,
) -> Vec<Result<SolveReport, SolveError>> {
    crate::par::map(items, |(k, p)| solve(k, cam, p, weights, config))
}

/// Sequential counterpart of [`solve_batch`].
pub fn solve_batch_seq(
    items: &[(KeypointSet, Priors)],
    cam: &CameraModel,
    weights: &EnergyWeights,
    config: &SolverConfig,
) -> Vec<Result<SolveReport, SolveError>> {
    crate::par::map_seq(items, |(k, p)| solve(k, cam, p, weights, config))
}
