//! Pinhole cameras placed on a sphere around the world origin.
//!
//! Camera frame axes are (right, up, forward). Image `v` points up. The camera
//! always looks at the world origin from `distance` metres away.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::catalog::ViewpointSpec;
use crate::dynamics::{Trajectory, TrajectoryState};
use crate::error::{Error, Result};

pub const CANONICAL_DISTANCE: f64 = 10.0;
pub const CANONICAL_FOCAL: f64 = 1.0;

/// Depth below which a point counts as lying on the camera plane.
const MIN_DEPTH: f64 = 1e-9;

/// World to camera rotation for a viewpoint; rows are right, up and forward.
pub fn view_rotation(view: &ViewpointSpec) -> Matrix3<f64> {
    let (sa, ca) = view.azimuth.to_radians().sin_cos();
    let (se, ce) = view.elevation.to_radians().sin_cos();
    Matrix3::new(
        ca,
        sa,
        0.0, //
        -sa * se,
        ca * se,
        ce, //
        -sa * ce,
        ca * ce,
        -se,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    pub focal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl Camera {
    pub fn new(azimuth: f64, elevation: f64, distance: f64, focal: f64) -> Result<Self> {
        if !(distance > 0.0 && distance.is_finite()) {
            return Err(Error::Param(format!("camera distance must be > 0, got {distance}")));
        }
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::Param(format!("camera focal must be > 0, got {focal}")));
        }
        Ok(Self {
            azimuth,
            elevation,
            distance,
            focal,
        })
    }

    /// Camera with the canonical distance and focal factor.
    pub fn canonical(view: &ViewpointSpec) -> Self {
        Self {
            azimuth: view.azimuth,
            elevation: view.elevation,
            distance: CANONICAL_DISTANCE,
            focal: CANONICAL_FOCAL,
        }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        view_rotation(&ViewpointSpec {
            azimuth: self.azimuth,
            elevation: self.elevation,
        })
    }

    /// Camera-frame coordinates `(x right, y up, depth)`.
    pub fn to_camera_frame(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + Vector3::new(0.0, 0.0, self.distance)
    }

    pub fn project_point(&self, p: &Vector3<f64>) -> Result<ImagePoint> {
        let c = self.to_camera_frame(p);
        if !(c.z > MIN_DEPTH) {
            return Err(Error::Projection(format!(
                "point ({}, {}, {}) at or behind the camera plane (depth {})",
                p.x, p.y, p.z, c.z
            )));
        }
        Ok(ImagePoint {
            u: self.focal * c.x / c.z,
            v: self.focal * c.y / c.z,
        })
    }

    pub fn project_curve(&self, traj: &Trajectory) -> Result<Vec<ImagePoint>> {
        self.project_states(&traj.states)
    }

    pub fn project_states(&self, states: &[TrajectoryState]) -> Result<Vec<ImagePoint>> {
        states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                self.project_point(&s.position).map_err(|e| match e {
                    Error::Projection(msg) => Error::Projection(format!("state {i}: {msg}")),
                    other => other,
                })
            })
            .collect()
    }

    /// Normalized image-plane direction of a 3D direction `dir` applied at `p`.
    ///
    /// Returns the zero vector when the image motion vanishes, i.e. the
    /// direction runs along the line of sight.
    pub fn project_direction(&self, p: &Vector3<f64>, dir: &Vector3<f64>) -> Result<Vector2<f64>> {
        let c = self.to_camera_frame(p);
        if !(c.z > MIN_DEPTH) {
            return Err(Error::Projection(format!("point at depth {} is not visible", c.z)));
        }
        let d = self.rotation() * dir;
        // d/dt (f x / z, f y / z)
        let flow = Vector2::new(d.x * c.z - c.x * d.z, d.y * c.z - c.y * d.z) * (self.focal / (c.z * c.z));
        let scale = self.focal * dir.norm() / c.z;
        let n = flow.norm();
        if n <= 1e-9 * scale.max(f64::MIN_POSITIVE) {
            Ok(Vector2::zeros())
        } else {
            Ok(flow / n)
        }
    }

    pub fn project_flow(&self, state: &TrajectoryState) -> Result<Vector2<f64>> {
        if state.velocity_dir == Vector3::zeros() {
            return Err(Error::FlowUndefined(format!("state at t = {} is not moving", state.t)));
        }
        self.project_direction(&state.position, &state.velocity_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::build_catalog;

    fn cam(az: f64, el: f64) -> Camera {
        Camera::canonical(&ViewpointSpec {
            azimuth: az,
            elevation: el,
        })
    }

    fn moving_state(p: Vector3<f64>, v: Vector3<f64>) -> TrajectoryState {
        TrajectoryState {
            t: 0.0,
            position: p,
            velocity_dir: v.normalize(),
            force_dir: Vector3::zeros(),
            speed: 1.0,
        }
    }

    #[test]
    fn rotations_are_orthonormal() {
        for e in build_catalog() {
            let r = view_rotation(&e.viewpoint);
            let err = (r.transpose() * r - Matrix3::identity()).abs().max();
            assert!(err < 1e-12, "entry {}: {err}", e.entry_id);
            // (right, up, forward) with forward into the scene is a left-handed frame
            assert!((r.determinant() + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn azimuth_zero_sees_x_as_right() {
        let r = view_rotation(&ViewpointSpec {
            azimuth: 0.0,
            elevation: 0.0,
        });
        assert_eq!(r * Vector3::x(), Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(r * Vector3::z(), Vector3::new(0.0, 1.0, 0.0));
    }

    #[test]
    fn origin_projects_to_center() {
        let p = cam(30.0, 45.0).project_point(&Vector3::zeros()).unwrap();
        assert!(p.u.abs() < 1e-15 && p.v.abs() < 1e-15);
    }

    #[test]
    fn up_displacement_scales_by_focal_over_depth() {
        let c = Camera::new(0.0, 0.0, 10.0, 2.0).unwrap();
        // camera up is world z at elevation 0; depth stays 10
        let p = c.project_point(&Vector3::new(0.0, 0.0, 0.5)).unwrap();
        assert_eq!(p.u, 0.0);
        assert!((p.v - 0.1).abs() < 1e-15);
    }

    #[test]
    fn doubling_distance_halves_offsets() {
        let p = Vector3::new(0.01, 0.0, 0.02);
        let near = Camera::new(0.0, 0.0, 10.0, 1.0).unwrap().project_point(&p).unwrap();
        let far = Camera::new(0.0, 0.0, 20.0, 1.0).unwrap().project_point(&p).unwrap();
        // depth is 10 and 20 exactly since p has no y component
        assert!((near.u - 0.001).abs() < 1e-15 && (far.u - 0.0005).abs() < 1e-15);
        assert!((far.v * 2.0 - near.v).abs() < 1e-15);
    }

    #[test]
    fn behind_camera_rejected() {
        let c = cam(0.0, 0.0);
        // camera sits at y = -10 looking along +y
        assert!(matches!(
            c.project_point(&Vector3::new(0.0, -10.0, 0.0)),
            Err(Error::Projection(_))
        ));
        assert!(c.project_point(&Vector3::new(0.0, -12.0, 0.0)).is_err());
        assert!(Camera::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn flow_examples() {
        let c = cam(0.0, 0.0);
        let right = c.project_flow(&moving_state(Vector3::zeros(), Vector3::x())).unwrap();
        assert!((right - Vector2::new(1.0, 0.0)).norm() < 1e-15);

        let along_axis = c.project_flow(&moving_state(Vector3::zeros(), Vector3::y())).unwrap();
        assert_eq!(along_axis, Vector2::zeros());

        let diag = c
            .project_flow(&moving_state(Vector3::zeros(), Vector3::new(1.0, 0.0, 1.0)))
            .unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((diag - Vector2::new(h, h)).norm() < 1e-9);

        let still = TrajectoryState {
            velocity_dir: Vector3::zeros(),
            speed: 0.0,
            ..moving_state(Vector3::zeros(), Vector3::x())
        };
        assert!(matches!(c.project_flow(&still), Err(Error::FlowUndefined(_))));
    }

    #[test]
    fn flow_is_unit_or_zero() {
        for e in build_catalog() {
            let c = Camera::canonical(&e.viewpoint);
            for k in 0..20 {
                let a = k as f64 * 0.7;
                let p = Vector3::new(a.cos(), a.sin() * 0.5, 0.3 * k as f64 / 20.0);
                let v = Vector3::new((2.0 * a).sin(), a.cos(), (0.5 * a).sin());
                let f = c.project_flow(&moving_state(p, v)).unwrap();
                let n = f.norm();
                assert!(n == 0.0 || (n - 1.0).abs() < 1e-9);
            }
        }
    }
}
