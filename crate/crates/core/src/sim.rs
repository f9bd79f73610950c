//! Closed-loop verification of a plan: a unicycle vehicle follows the tour
//! waypoints using only bearing measurements to the placed landmarks.
//!
//! State estimation runs in information form (an extended information
//! filter): the belief is `(xi, Omega)` with `Omega = P^-1` and
//! `xi = Omega * mu`. Bearings enter as rank-one information additions, so
//! the update cost is independent of how many landmarks are visible.
//! Heading needs bearings from at least two distinct landmarks to be
//! observable, so the filter only applies an update when two or more
//! landmarks are in range; with fewer, the step is prediction-only and
//! uncertainty grows.
//!
//! The controller is proportional in the heading error toward the active
//! waypoint, with the turn rate clamped. Waypoints advance when the
//! *estimated* distance drops below the configured minimum — the truth is
//! never consulted, which is the point of the exercise.

use nalgebra::{Matrix2, Matrix3, Matrix3x2, RowVector3, Vector2, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geom::{wrap_angle, Point2};
use crate::instance::Instance;
use crate::model::Solution;

/// Planar pose. Heading is always wrapped to `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl VehicleState {
    pub fn position(&self) -> Point2 {
        Point2 { x: self.x, y: self.y }
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.psi)
    }
}

/// Forward speed and turn rate. The vehicle cannot reverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlInput {
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial covariance is not positive definite")]
    BadInitialCovariance,
    #[error("plan has no waypoints")]
    EmptyRoute,
}

/// Gaussian belief in information form, with the recovered mean cached.
#[derive(Debug, Clone)]
pub struct Belief {
    pub xi: Vector3<f64>,
    pub omega: Matrix3<f64>,
    pub mean: VehicleState,
}

impl Belief {
    /// Builds the information form from a mean and covariance.
    pub fn from_moments(mean: VehicleState, cov: &Matrix3<f64>) -> Result<Self, SimError> {
        let omega = nalgebra::Cholesky::new(*cov)
            .ok_or(SimError::BadInitialCovariance)?
            .inverse();
        let omega = symmetrized(&omega);
        Ok(Belief { xi: omega * mean.as_vector(), omega, mean })
    }

    /// Recovered covariance `Omega^-1`, or `None` if the information
    /// matrix has lost positive definiteness.
    pub fn covariance(&self) -> Option<Matrix3<f64>> {
        nalgebra::Cholesky::new(self.omega).map(|c| symmetrized(&c.inverse()))
    }
}

fn symmetrized(m: &Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// One Euler step of the unicycle. `noise` perturbs `(v, omega)`.
pub fn step_dynamics(
    s: &VehicleState,
    u: &ControlInput,
    dt: f64,
    noise: Option<[f64; 2]>,
) -> VehicleState {
    let [nv, nw] = noise.unwrap_or([0.0, 0.0]);
    let v = u.v + nv;
    let w = u.omega + nw;
    VehicleState {
        x: s.x + v * s.psi.cos() * dt,
        y: s.y + v * s.psi.sin() * dt,
        psi: wrap_angle(s.psi + w * dt),
    }
}

/// Jacobians of [`step_dynamics`] at `(s, u)`: `F` with respect to the
/// state and `G` with respect to the control (equivalently the additive
/// control noise).
pub fn motion_jacobians(s: &VehicleState, u: &ControlInput, dt: f64) -> (Matrix3<f64>, Matrix3x2<f64>) {
    let (sin, cos) = s.psi.sin_cos();
    let f = Matrix3::new(
        1.0, 0.0, -u.v * sin * dt,
        0.0, 1.0, u.v * cos * dt,
        0.0, 0.0, 1.0,
    );
    let g = Matrix3x2::new(
        cos * dt, 0.0,
        sin * dt, 0.0,
        0.0, dt,
    );
    (f, g)
}

/// Relative bearing from a pose to a point, wrapped.
pub fn bearing_to(s: &VehicleState, p: &Point2) -> f64 {
    wrap_angle((p.y - s.y).atan2(p.x - s.x) - s.psi)
}

/// Row Jacobian of the bearing measurement with respect to the state.
pub fn bearing_jacobian(s: &VehicleState, p: &Point2) -> RowVector3<f64> {
    let dx = p.x - s.x;
    let dy = p.y - s.y;
    let q = dx * dx + dy * dy;
    RowVector3::new(dy / q, -dx / q, -1.0)
}

/// Noisy bearings to every landmark strictly within range of the true
/// pose, as `(landmark index, bearing)`. Identities are known; there is no
/// data association.
pub fn measure_bearings<R: Rng>(
    s: &VehicleState,
    landmarks: &[Point2],
    range: f64,
    sigma: f64,
    rng: &mut R,
) -> Vec<(usize, f64)> {
    let noise = Normal::new(0.0, sigma).expect("bearing noise std must be finite and >= 0");
    landmarks
        .iter()
        .enumerate()
        .filter(|(_, l)| l.dist(&s.position()) < range)
        .map(|(k, l)| (k, wrap_angle(bearing_to(s, l) + noise.sample(rng))))
        .collect()
}

/// Prediction: propagate the mean through the noiseless dynamics and the
/// covariance through the linearization, then return to information form.
/// Fails when the information matrix is no longer positive definite.
pub fn eif_predict(
    b: &Belief,
    u: &ControlInput,
    dt: f64,
    q: &Matrix2<f64>,
) -> Option<Belief> {
    let p = b.covariance()?;
    let (f, g) = motion_jacobians(&b.mean, u, dt);
    let p_next = symmetrized(&(f * p * f.transpose() + g * q * g.transpose()));
    let omega = symmetrized(&nalgebra::Cholesky::new(p_next)?.inverse());
    let mean = step_dynamics(&b.mean, u, dt, None);
    Some(Belief { xi: omega * mean.as_vector(), omega, mean })
}

/// Measurement update from a batch of bearings, all linearized at the
/// prior mean. Returns the posterior and the number of measurements
/// skipped because the landmark coincided with the estimate. `None` means
/// the posterior information matrix failed its positive-definiteness
/// check (filter divergence).
pub fn eif_update(
    b: &Belief,
    measurements: &[(usize, f64)],
    landmarks: &[Point2],
    sigma: f64,
) -> Option<(Belief, usize)> {
    if measurements.is_empty() {
        return Some((b.clone(), 0));
    }
    let inv_var = 1.0 / (sigma * sigma);
    let mu0 = b.mean.as_vector();
    let mut omega = b.omega;
    let mut xi = b.xi;
    let mut skipped = 0;
    for &(k, z) in measurements {
        let l = &landmarks[k];
        let dx = l.x - b.mean.x;
        let dy = l.y - b.mean.y;
        if dx * dx + dy * dy < 1e-12 {
            skipped += 1;
            continue;
        }
        let h = bearing_jacobian(&b.mean, l);
        let predicted = bearing_to(&b.mean, l);
        let innovation = wrap_angle(z - predicted);
        omega += h.transpose() * h * inv_var;
        // Information-vector target: the innovation re-expressed around the
        // linearization point.
        xi += h.transpose() * (innovation + (h * mu0)[0]) * inv_var;
    }
    omega = symmetrized(&omega);
    let chol = nalgebra::Cholesky::new(omega)?;
    let mut mu = chol.solve(&xi);
    let wrapped = wrap_angle(mu[2]);
    if wrapped != mu[2] {
        // Keep xi consistent with the wrapped mean.
        mu[2] = wrapped;
        xi = omega * mu;
    }
    let mean = VehicleState { x: mu[0], y: mu[1], psi: mu[2] };
    Some((Belief { xi, omega, mean }, skipped))
}

/// Proportional heading controller toward a waypoint at constant speed.
pub fn waypoint_controller(
    est: &VehicleState,
    wp: &Point2,
    gain: f64,
    v_nominal: f64,
    omega_max: f64,
) -> ControlInput {
    let err = wrap_angle((wp.y - est.y).atan2(wp.x - est.x) - est.psi);
    ControlInput { v: v_nominal, omega: (gain * err).clamp(-omega_max, omega_max) }
}

/// Scenario parameters. Defaults follow the first simulation scenario:
/// gain 2.0, waypoint switch distance 1.0, sensing range 35.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub v_nominal: f64,
    pub controller_gain: f64,
    pub min_wp_distance: f64,
    pub sensing_range: f64,
    pub omega_max: f64,
    /// Covariance of the additive `(v, omega)` process noise.
    pub process_noise: Matrix2<f64>,
    pub bearing_noise_std: f64,
    pub initial_belief_cov: Matrix3<f64>,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let five_deg = 5.0_f64.to_radians();
        SimConfig {
            dt: 0.05,
            n_steps: 3000,
            v_nominal: 1.0,
            controller_gain: 2.0,
            min_wp_distance: 1.0,
            sensing_range: 35.0,
            omega_max: 2.0,
            process_noise: Matrix2::from_diagonal(&Vector2::new(1e-4, 1e-4)),
            bearing_noise_std: 0.5_f64.to_radians(),
            initial_belief_cov: Matrix3::from_diagonal(&Vector3::new(
                1.0,
                1.0,
                five_deg * five_deg,
            )),
            rng_seed: 0,
        }
    }
}

/// One recorded simulation step. The CSV export keeps the documented
/// column set; the extra covariance fields back plots and analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub t: f64,
    pub truth: VehicleState,
    pub estimate: VehicleState,
    /// Posterior covariance diagonal (x, y, psi).
    pub cov_diag: [f64; 3],
    /// Posterior x-y cross covariance (for uncertainty ellipses).
    pub cov_xy: f64,
    /// Pre-update covariance diagonal of the position block, for
    /// before/after comparisons of the measurement update.
    pub cov_pred_pos: [f64; 2],
    /// Landmarks within sensing range this step.
    pub n_visible: usize,
    /// Whether a measurement update was applied this step.
    pub updated: bool,
    /// Active waypoint index (0-based; stays on the last one after
    /// completion).
    pub waypoint: usize,
    /// Turn rate actually commanded this step.
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    /// Every waypoint was reached before the step budget ran out.
    CompletedRoute { at_step: usize },
    ReachedStepLimit,
}

#[derive(Debug, Clone)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub status: RunStatus,
    pub waypoints: Vec<Point2>,
    pub landmarks: Vec<Point2>,
    /// Step at which the filter lost positive definiteness, if it did; the
    /// run continues on dead reckoning with frozen covariance.
    pub diverged_at: Option<usize>,
    /// Measurements dropped because a landmark coincided with the
    /// estimated position.
    pub skipped_measurements: usize,
}

impl Trace {
    pub fn completed(&self) -> bool {
        matches!(self.status, RunStatus::CompletedRoute { .. })
    }

    /// CSV export with the fixed column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t,x,y,psi,xe,ye,psie,sxx,syy,spp,n_vis,wp,omega\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6e},{:.6e},{:.6e},{},{},{:.6}\n",
                s.step,
                s.t,
                s.truth.x,
                s.truth.y,
                s.truth.psi,
                s.estimate.x,
                s.estimate.y,
                s.estimate.psi,
                s.cov_diag[0],
                s.cov_diag[1],
                s.cov_diag[2],
                s.n_visible,
                s.waypoint,
                s.omega,
            ));
        }
        out
    }
}

/// Cholesky factor of the process noise for sampling; falls back to the
/// diagonal square root when the matrix is only semi-definite.
fn noise_factor(q: &Matrix2<f64>) -> Matrix2<f64> {
    match nalgebra::Cholesky::new(*q) {
        Some(c) => c.l(),
        None => Matrix2::new(q[(0, 0)].max(0.0).sqrt(), 0.0, 0.0, q[(1, 1)].max(0.0).sqrt()),
    }
}

/// Flies a solved plan in closed loop.
///
/// Per step: measure bearings from the true pose, apply the information
/// update when at least two landmarks are visible, advance the waypoint
/// while the estimated distance is below the switch threshold, compute the
/// control from the estimate, record the step, then move the truth with
/// sampled process noise and run the filter prediction. The run ends at
/// the step budget or when the final waypoint (the depot) is reached.
pub fn run_scenario(sol: &Solution, inst: &Instance, cfg: &SimConfig) -> Result<Trace, SimError> {
    if sol.visit_order.len() < 2 {
        return Err(SimError::EmptyRoute);
    }
    let landmarks: Vec<Point2> = sol.chosen_sites.iter().map(|&k| inst.sites[k]).collect();
    let waypoints: Vec<Point2> =
        sol.visit_order[1..].iter().map(|&v| inst.targets[v]).collect();
    let start = inst.targets[sol.visit_order[0]];

    let psi0 = (waypoints[0].y - start.y).atan2(waypoints[0].x - start.x);
    let mut truth = VehicleState { x: start.x, y: start.y, psi: psi0 };
    let mut belief = Belief::from_moments(truth, &cfg.initial_belief_cov)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let lq = noise_factor(&cfg.process_noise);

    let mut steps = Vec::new();
    let mut status = RunStatus::ReachedStepLimit;
    let mut diverged_at = None;
    let mut skipped = 0usize;
    let mut wp_idx = 0usize;
    // Frozen covariance snapshot once the filter has diverged.
    let mut frozen_cov: Option<Matrix3<f64>> = None;

    for step in 0..cfg.n_steps {
        let meas =
            measure_bearings(&truth, &landmarks, cfg.sensing_range, cfg.bearing_noise_std, &mut rng);
        let n_visible = meas.len();

        let cov_before = match frozen_cov {
            Some(c) => c,
            None => belief.covariance().unwrap_or_else(Matrix3::zeros),
        };
        // Heading is unobservable from a single bearing, so updates wait
        // for two landmarks; this also keeps uncertainty growth visible in
        // under-covered stretches.
        let mut updated = false;
        if frozen_cov.is_none() && n_visible >= 2 {
            match eif_update(&belief, &meas, &landmarks, cfg.bearing_noise_std) {
                Some((b, sk)) => {
                    belief = b;
                    skipped += sk;
                    updated = true;
                }
                None => {
                    diverged_at = Some(step);
                    frozen_cov = Some(cov_before);
                }
            }
        }

        while wp_idx < waypoints.len()
            && belief.mean.position().dist(&waypoints[wp_idx]) < cfg.min_wp_distance
        {
            wp_idx += 1;
        }
        let completed = wp_idx >= waypoints.len();
        let u = if completed {
            ControlInput { v: 0.0, omega: 0.0 }
        } else {
            waypoint_controller(
                &belief.mean,
                &waypoints[wp_idx],
                cfg.controller_gain,
                cfg.v_nominal,
                cfg.omega_max,
            )
        };

        let cov_after = match frozen_cov {
            Some(c) => c,
            None => belief.covariance().unwrap_or_else(Matrix3::zeros),
        };
        steps.push(TraceStep {
            step,
            t: step as f64 * cfg.dt,
            truth,
            estimate: belief.mean,
            cov_diag: [cov_after[(0, 0)], cov_after[(1, 1)], cov_after[(2, 2)]],
            cov_xy: cov_after[(0, 1)],
            cov_pred_pos: [cov_before[(0, 0)], cov_before[(1, 1)]],
            n_visible,
            updated,
            waypoint: wp_idx.min(waypoints.len() - 1),
            omega: u.omega,
        });
        if completed {
            status = RunStatus::CompletedRoute { at_step: step };
            break;
        }

        let z = Vector2::new(std_normal.sample(&mut rng), std_normal.sample(&mut rng));
        let n = lq * z;
        truth = step_dynamics(&truth, &u, cfg.dt, Some([n[0], n[1]]));

        if frozen_cov.is_none() {
            match eif_predict(&belief, &u, cfg.dt, &cfg.process_noise) {
                Some(b) => belief = b,
                None => {
                    diverged_at = Some(step);
                    frozen_cov = Some(cov_after);
                    belief.mean = step_dynamics(&belief.mean, &u, cfg.dt, None);
                }
            }
        } else {
            // Dead reckoning: mean moves with the commanded control, the
            // information matrix stays frozen.
            belief.mean = step_dynamics(&belief.mean, &u, cfg.dt, None);
            belief.xi = belief.omega * belief.mean.as_vector();
        }
    }

    Ok(Trace { steps, status, waypoints, landmarks, diverged_at, skipped_measurements: skipped })
}

/// Per-axis error series and summary statistics of a trace.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    /// Per-axis estimation error series (x, y, wrapped heading).
    pub errors: [Vec<f64>; 3],
    /// Matching three-standard-deviation envelopes from the covariance
    /// diagonal.
    pub sigma3: [Vec<f64>; 3],
    /// Root-mean-square error per axis.
    pub rmse: [f64; 3],
    /// Fraction of steps with `|error| <= 3 sigma`, per axis.
    pub containment: [f64; 3],
    /// Mean number of visible landmarks per step.
    pub mean_visible: f64,
    /// Fraction of steps with at least two landmarks visible.
    pub frac_two_visible: f64,
}

pub fn error_stats(trace: &Trace) -> ErrorReport {
    let n = trace.steps.len();
    assert!(n > 0, "cannot summarize an empty trace");
    let mut errors: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut sigma3: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut contained = [0usize; 3];
    let mut sq = [0.0f64; 3];
    let mut vis_sum = 0usize;
    let mut two_vis = 0usize;
    for s in &trace.steps {
        let e = [
            s.estimate.x - s.truth.x,
            s.estimate.y - s.truth.y,
            wrap_angle(s.estimate.psi - s.truth.psi),
        ];
        for a in 0..3 {
            let bound = 3.0 * s.cov_diag[a].max(0.0).sqrt();
            errors[a].push(e[a]);
            sigma3[a].push(bound);
            if e[a].abs() <= bound {
                contained[a] += 1;
            }
            sq[a] += e[a] * e[a];
        }
        vis_sum += s.n_visible;
        if s.n_visible >= 2 {
            two_vis += 1;
        }
    }
    let nf = n as f64;
    ErrorReport {
        errors,
        sigma3,
        rmse: [
            (sq[0] / nf).sqrt(),
            (sq[1] / nf).sqrt(),
            (sq[2] / nf).sqrt(),
        ],
        containment: [
            contained[0] as f64 / nf,
            contained[1] as f64 / nf,
            contained[2] as f64 / nf,
        ],
        mean_visible: vis_sum as f64 / nf,
        frac_two_visible: two_vis as f64 / nf,
    }
}
