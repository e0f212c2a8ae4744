//! Canonical dynamics of the twelve scenarios.
//!
//! World frame is z-up with the floor at z = 0; resting objects sit with their
//! centre at [`REST_HEIGHT`]. Every scenario moves mainly along its initial
//! direction (+x by default). Closed forms are used where they are exact and
//! fixed-step RK4 elsewhere (pendulums, conical swing, continuous push).
//!
//! | id | dynamics                                          |
//! |----|---------------------------------------------------|
//! | 1  | projectile launched from a height, lands on floor |
//! | 2  | free fall from rest, off the view axis            |
//! | 3  | projectile launched from the floor                |
//! | 4  | impulse-launched straight-line flight             |
//! | 5  | object at rest                                    |
//! | 6  | drop onto the floor, then rest                    |
//! | 7  | conical swing around a vertical axis              |
//! | 8  | constant push against kinetic friction            |
//! | 9  | slide down a 30 degree incline with friction      |
//! | 10 | surface slide decelerated by friction             |
//! | 11 | vertical throw, rise and fall                     |
//! | 12 | planar pendulum                                   |

use nalgebra::{SVector, Vector3};

use crate::camera::view_rotation;
use crate::catalog::{self, ViewpointSpec};
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

pub const DEFAULT_GRAVITY: f64 = 9.81;
pub const DEFAULT_FRICTION: f64 = 0.3;
pub const DEFAULT_DT: f64 = 1e-3;
pub const REST_HEIGHT: f64 = 0.1;
/// Samples per trajectory stored in the bank.
pub const STATES_PER_ENTRY: usize = 10;
pub const RAW_FEATURE_LEN: usize = 10;

const ZERO_SPEED: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub gravity: f64,
    pub friction_mu: f64,
    pub pendulum_length: f64,
    /// Release angle from the vertical for the pendulum, cone half-angle for the conical swing.
    pub initial_angle: f64,
    pub initial_speed: f64,
    pub initial_direction: Vec3,
    /// Launch point, or pivot for the swinging scenarios.
    pub start_position: Vec3,
    pub incline_angle: f64,
    /// Applied push per unit mass for the continuous-push scenario.
    pub push_accel: f64,
    pub duration: f64,
    pub dt: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            friction_mu: DEFAULT_FRICTION,
            pendulum_length: 1.0,
            initial_angle: 0.0,
            initial_speed: 0.0,
            initial_direction: Vec3::x(),
            start_position: Vec3::new(0.0, 0.0, REST_HEIGHT),
            incline_angle: 30f64.to_radians(),
            push_accel: 5.0,
            duration: 1.0,
            dt: DEFAULT_DT,
        }
    }
}

/// Exact period of a planar pendulum released from rest at `theta0`.
pub fn pendulum_period(length: f64, gravity: f64, theta0: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, (theta0 / 2.0).cos());
    while (a - b).abs() > 1e-15 * a {
        (a, b) = ((a + b) / 2.0, (a * b).sqrt());
    }
    2.0 * std::f64::consts::PI * (length / gravity).sqrt() / a
}

fn elevated(speed: f64, degrees: f64) -> (f64, Vec3) {
    let (s, c) = degrees.to_radians().sin_cos();
    (speed, Vec3::new(c, 0.0, s))
}

/// Time for `z0 + vz t - g t^2 / 2` to come back down to `floor`.
fn landing_time(z0: f64, vz: f64, g: f64, floor: f64) -> f64 {
    (vz + (vz * vz + 2.0 * g * (z0 - floor)).sqrt()) / g
}

impl SimParams {
    /// Parameters for the canonical version of `scenario_id`.
    pub fn canonical(scenario_id: u8) -> Result<Self> {
        catalog::scenario(scenario_id)?;
        let base = SimParams::default();
        let g = base.gravity;
        let p = match scenario_id {
            1 => {
                let (speed, dir) = elevated(6.0, 30.0);
                let start = Vec3::new(-1.5, 0.0, 1.2);
                SimParams {
                    initial_speed: speed,
                    initial_direction: dir,
                    start_position: start,
                    duration: landing_time(start.z, speed * dir.z, g, REST_HEIGHT),
                    ..base
                }
            }
            2 => {
                let start = Vec3::new(1.0, 0.0, 2.0);
                SimParams {
                    start_position: start,
                    duration: landing_time(start.z, 0.0, g, REST_HEIGHT),
                    ..base
                }
            }
            3 => {
                let (speed, dir) = elevated(10.0, 45.0);
                SimParams {
                    initial_speed: speed,
                    initial_direction: dir,
                    start_position: Vec3::new(-3.0, 0.0, REST_HEIGHT),
                    duration: 2.0 * speed * dir.z / g,
                    ..base
                }
            }
            4 => {
                let (speed, dir) = elevated(2.0, 20.0);
                SimParams {
                    initial_speed: speed,
                    initial_direction: dir,
                    start_position: Vec3::new(-1.5, 0.0, 0.5),
                    duration: 1.5,
                    ..base
                }
            }
            5 => SimParams {
                start_position: Vec3::new(0.0, 0.0, 0.6),
                duration: 1.0,
                ..base
            },
            6 => {
                let start = Vec3::new(0.9, 0.0, 1.5);
                SimParams {
                    start_position: start,
                    duration: landing_time(start.z, 0.0, g, REST_HEIGHT) + 0.4,
                    ..base
                }
            }
            7 => {
                let (length, theta) = (1.0, 0.4f64);
                SimParams {
                    pendulum_length: length,
                    initial_angle: theta,
                    initial_speed: (g * length * theta.sin() * theta.tan()).sqrt(),
                    start_position: Vec3::new(0.0, 0.0, 1.5),
                    duration: 2.0 * std::f64::consts::PI * (length * theta.cos() / g).sqrt(),
                    ..base
                }
            }
            8 => SimParams {
                start_position: Vec3::new(-1.5, 0.0, REST_HEIGHT),
                duration: 1.5,
                ..base
            },
            9 => {
                let alpha = base.incline_angle;
                let start = Vec3::new(-1.0, 0.0, 1.2);
                let accel = g * (alpha.sin() - base.friction_mu * alpha.cos());
                let run = (start.z - REST_HEIGHT) / alpha.sin();
                SimParams {
                    start_position: start,
                    duration: (2.0 * run / accel).sqrt(),
                    ..base
                }
            }
            10 => SimParams {
                initial_speed: 3.0,
                start_position: Vec3::new(-0.6, 0.0, REST_HEIGHT),
                duration: 1.3,
                ..base
            },
            11 => {
                let speed = 4.0;
                SimParams {
                    initial_speed: speed,
                    initial_direction: Vec3::z(),
                    start_position: Vec3::new(0.0, 0.0, REST_HEIGHT),
                    duration: 2.0 * speed / g,
                    ..base
                }
            }
            12 => {
                let (length, theta0) = (1.0, 0.6);
                SimParams {
                    pendulum_length: length,
                    initial_angle: theta0,
                    start_position: Vec3::new(0.0, 0.0, 1.5),
                    duration: pendulum_period(length, g, theta0),
                    ..base
                }
            }
            _ => unreachable!("scenario id validated above"),
        };
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Param(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.duration >= 10.0 * self.dt) || !self.duration.is_finite() {
            return Err(Error::Param(format!(
                "duration {} must be at least 10 * dt ({})",
                self.duration, self.dt
            )));
        }
        let n = self.initial_direction.norm();
        if !((n - 1.0).abs() <= 1e-9) {
            return Err(Error::Param(format!(
                "initial_direction must be unit length, norm is {n}"
            )));
        }
        let scalars = [
            self.gravity,
            self.friction_mu,
            self.pendulum_length,
            self.initial_angle,
            self.initial_speed,
            self.incline_angle,
            self.push_accel,
        ];
        if scalars.iter().any(|v| !v.is_finite()) || !self.start_position.iter().all(|v| v.is_finite()) {
            return Err(Error::Param("simulation parameters must be finite".into()));
        }
        if self.pendulum_length <= 0.0 {
            return Err(Error::Param("pendulum_length must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryState {
    pub t: f64,
    pub position: Vec3,
    pub velocity_dir: Vec3,
    pub force_dir: Vec3,
    pub speed: f64,
}

impl TrajectoryState {
    fn from_kinematics(t: f64, position: Vec3, velocity: Vec3, force: Vec3) -> Self {
        let speed = velocity.norm();
        Self {
            t,
            position,
            velocity_dir: unit_or_zero(&velocity),
            force_dir: unit_or_zero(&force),
            speed: if speed > ZERO_SPEED { speed } else { 0.0 },
        }
    }
}

fn unit_or_zero(v: &Vec3) -> Vec3 {
    let n = v.norm();
    if n > ZERO_SPEED {
        v / n
    } else {
        Vec3::zeros()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub scenario_id: u8,
    pub states: Vec<TrajectoryState>,
    pub params: SimParams,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        self.states.last().map_or(0.0, |s| s.t)
    }
}

/// One classical RK4 step of `y' = f(t, y)`.
pub fn rk4_step<const N: usize>(
    t: f64,
    y: &SVector<f64, N>,
    h: f64,
    f: impl Fn(f64, &SVector<f64, N>) -> SVector<f64, N>,
) -> SVector<f64, N> {
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, &(y + k1 * (h / 2.0)));
    let k3 = f(t + h / 2.0, &(y + k2 * (h / 2.0)));
    let k4 = f(t + h, &(y + k3 * h));
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Uniform time grid of `round(duration / dt)` steps ending exactly at `duration`.
fn time_grid(params: &SimParams) -> (usize, f64) {
    let steps = (params.duration / params.dt).round().max(1.0) as usize;
    (steps, params.duration / steps as f64)
}

fn grid_time(k: usize, steps: usize, h: f64, duration: f64) -> f64 {
    if k == steps {
        duration
    } else {
        k as f64 * h
    }
}

/// Integrates a point mass with acceleration `accel(p, v)` on the parameter grid.
/// The closure also returns the net force per unit mass to report.
fn integrate_point_mass(
    params: &SimParams,
    p0: Vec3,
    v0: Vec3,
    mut post_step: impl FnMut(&mut SVector<f64, 6>),
    accel: impl Fn(&Vec3, &Vec3) -> Vec3,
) -> Vec<TrajectoryState> {
    let (steps, h) = time_grid(params);
    let mut y = SVector::<f64, 6>::zeros();
    y.fixed_rows_mut::<3>(0).copy_from(&p0);
    y.fixed_rows_mut::<3>(3).copy_from(&v0);
    let deriv = |_t: f64, y: &SVector<f64, 6>| {
        let p: Vec3 = y.fixed_rows::<3>(0).into();
        let v: Vec3 = y.fixed_rows::<3>(3).into();
        let a = accel(&p, &v);
        let mut d = SVector::<f64, 6>::zeros();
        d.fixed_rows_mut::<3>(0).copy_from(&v);
        d.fixed_rows_mut::<3>(3).copy_from(&a);
        d
    };
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = grid_time(k, steps, h, params.duration);
        let p: Vec3 = y.fixed_rows::<3>(0).into();
        let v: Vec3 = y.fixed_rows::<3>(3).into();
        out.push(TrajectoryState::from_kinematics(t, p, v, accel(&p, &v)));
        if k < steps {
            y = rk4_step(t, &y, h, deriv);
            post_step(&mut y);
        }
    }
    out
}

fn sample_closed_form(params: &SimParams, f: impl Fn(f64) -> (Vec3, Vec3, Vec3)) -> Vec<TrajectoryState> {
    let (steps, h) = time_grid(params);
    (0..=steps)
        .map(|k| {
            let t = grid_time(k, steps, h, params.duration);
            let (p, v, force) = f(t);
            TrajectoryState::from_kinematics(t, p, v, force)
        })
        .collect()
}

fn horizontal(dir: &Vec3) -> Vec3 {
    let h = Vec3::new(dir.x, dir.y, 0.0);
    if h.norm() > ZERO_SPEED {
        h.normalize()
    } else {
        Vec3::x()
    }
}

fn ballistic(params: &SimParams, accel: Vec3, impulse: bool) -> Vec<TrajectoryState> {
    let p0 = params.start_position;
    let v0 = params.initial_direction * params.initial_speed;
    sample_closed_form(params, |t| {
        let force = if impulse {
            if t == 0.0 {
                params.initial_direction
            } else {
                Vec3::zeros()
            }
        } else {
            accel
        };
        (p0 + v0 * t + accel * (0.5 * t * t), v0 + accel * t, force)
    })
}

fn planar_pendulum(params: &SimParams) -> Vec<TrajectoryState> {
    let (g, len) = (params.gravity, params.pendulum_length);
    let pivot = params.start_position;
    let across = horizontal(&params.initial_direction);
    let (steps, h) = time_grid(params);
    let deriv = |_t: f64, y: &SVector<f64, 2>| SVector::<f64, 2>::new(y[1], -(g / len) * y[0].sin());
    let mut y = SVector::<f64, 2>::new(params.initial_angle, 0.0);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = grid_time(k, steps, h, params.duration);
        let (theta, omega) = (y[0], y[1]);
        let (s, c) = theta.sin_cos();
        let radial = across * s - Vec3::z() * c;
        let tangent = across * c + Vec3::z() * s;
        let alpha = -(g / len) * s;
        let position = pivot + radial * len;
        let velocity = tangent * (len * omega);
        let accel = tangent * (len * alpha) - radial * (len * omega * omega);
        out.push(TrajectoryState::from_kinematics(t, position, velocity, accel));
        if k < steps {
            y = rk4_step(t, &y, h, deriv);
        }
    }
    out
}

fn conical_swing(params: &SimParams) -> Vec<TrajectoryState> {
    let (g, len, theta) = (params.gravity, params.pendulum_length, params.initial_angle);
    let pivot = params.start_position;
    let tangent = horizontal(&params.initial_direction);
    // start on the side so that the initial velocity is `tangent`, orbiting counterclockwise from above
    let outward = Vec3::new(tangent.y, -tangent.x, 0.0);
    let p0 = pivot + outward * (len * theta.sin()) - Vec3::z() * (len * theta.cos());
    let v0 = tangent * params.initial_speed;
    let gvec = Vec3::new(0.0, 0.0, -g);
    integrate_point_mass(
        params,
        p0,
        v0,
        |_| {},
        move |p, v| {
            let r = p - pivot;
            let k = (v.norm_squared() + r.dot(&gvec)) / r.norm_squared();
            gvec - r * k
        },
    )
}

fn push(params: &SimParams) -> Vec<TrajectoryState> {
    let dir = horizontal(&params.initial_direction);
    let friction = params.friction_mu * params.gravity;
    let push = params.push_accel;
    let v0 = dir * params.initial_speed;
    integrate_point_mass(
        params,
        params.start_position,
        v0,
        |_| {},
        move |_p, v| {
            let moving = v.norm() > ZERO_SPEED;
            if moving {
                dir * push - v.normalize() * friction
            } else if push > friction {
                dir * (push - friction)
            } else {
                Vec3::zeros()
            }
        },
    )
}

fn friction_slide(params: &SimParams) -> Vec<TrajectoryState> {
    let dir = horizontal(&params.initial_direction);
    let v0 = params.initial_speed;
    let decel = params.friction_mu * params.gravity;
    let stop = if decel > 0.0 { v0 / decel } else { f64::INFINITY };
    let p0 = params.start_position;
    sample_closed_form(params, |t| {
        if t < stop {
            (p0 + dir * (v0 * t - 0.5 * decel * t * t), dir * (v0 - decel * t), -dir)
        } else {
            (p0 + dir * (0.5 * v0 * stop), Vec3::zeros(), Vec3::zeros())
        }
    })
}

fn incline_slide(params: &SimParams) -> Vec<TrajectoryState> {
    let alpha = params.incline_angle;
    let downhill = horizontal(&params.initial_direction) * alpha.cos() - Vec3::z() * alpha.sin();
    let a = params.gravity * (alpha.sin() - params.friction_mu * alpha.cos());
    let p0 = params.start_position;
    let v0 = params.initial_speed;
    sample_closed_form(params, |t| {
        if a < 0.0 && v0 + a * t <= 0.0 {
            // friction holds the object once it stops
            let stop = -v0 / a;
            (
                p0 + downhill * (v0 * stop + 0.5 * a * stop * stop),
                Vec3::zeros(),
                Vec3::zeros(),
            )
        } else {
            let force = if a == 0.0 { Vec3::zeros() } else { downhill * a.signum() };
            (
                p0 + downhill * (v0 * t + 0.5 * a * t * t),
                downhill * (v0 + a * t),
                force,
            )
        }
    })
}

fn drop_onto_plane(params: &SimParams) -> Vec<TrajectoryState> {
    let g = params.gravity;
    let p0 = params.start_position;
    let hit = landing_time(p0.z, 0.0, g, REST_HEIGHT.min(p0.z));
    sample_closed_form(params, |t| {
        if t < hit {
            (p0 - Vec3::z() * (0.5 * g * t * t), -Vec3::z() * (g * t), -Vec3::z())
        } else {
            (
                Vec3::new(p0.x, p0.y, REST_HEIGHT.min(p0.z)),
                Vec3::zeros(),
                Vec3::zeros(),
            )
        }
    })
}

pub fn simulate(scenario_id: u8, params: &SimParams) -> Result<Trajectory> {
    catalog::scenario(scenario_id)?;
    params.validate()?;
    let gravity = Vec3::new(0.0, 0.0, -params.gravity);
    let states = match scenario_id {
        1 | 3 | 11 => ballistic(params, gravity, false),
        2 => ballistic(
            &SimParams {
                initial_speed: 0.0,
                ..params.clone()
            },
            gravity,
            false,
        ),
        4 => ballistic(params, Vec3::zeros(), true),
        5 => sample_closed_form(params, |_| (params.start_position, Vec3::zeros(), Vec3::zeros())),
        6 => drop_onto_plane(params),
        7 => conical_swing(params),
        8 => push(params),
        9 => incline_slide(params),
        10 => friction_slide(params),
        12 => planar_pendulum(params),
        _ => unreachable!("scenario id validated above"),
    };
    Ok(Trajectory {
        scenario_id,
        states,
        params: params.clone(),
    })
}

/// Canonical trajectory of a scenario.
pub fn simulate_canonical(scenario_id: u8) -> Result<Trajectory> {
    simulate(scenario_id, &SimParams::canonical(scenario_id)?)
}

/// Indices `round(k (N - 1) / (n - 1))` for `k = 0..n`.
pub fn sample_indices(len: usize, n: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::Param(format!("need at least 2 samples, got {n}")));
    }
    if len < n {
        return Err(Error::Param(format!("cannot sample {n} states from {len}")));
    }
    let span = (len - 1) as f64;
    Ok((0..n)
        .map(|k| (k as f64 * span / (n - 1) as f64).round() as usize)
        .collect())
}

pub fn sample_states(traj: &Trajectory, n: usize) -> Result<Vec<TrajectoryState>> {
    Ok(sample_indices(traj.states.len(), n)?
        .into_iter()
        .map(|i| traj.states[i].clone())
        .collect())
}

/// Viewpoint-specific feature of a state: camera-frame position, velocity
/// direction and force direction, then the phase `t / duration`.
pub fn state_raw_features(state: &TrajectoryState, duration: f64, view: &ViewpointSpec) -> [f64; RAW_FEATURE_LEN] {
    let r = view_rotation(view);
    let p = r * state.position;
    let v = r * state.velocity_dir;
    let f = r * state.force_dir;
    let phase = if duration > 0.0 { state.t / duration } else { 0.0 };
    [p.x, p.y, p.z, v.x, v.y, v.z, f.x, f.y, f.z, phase]
}
