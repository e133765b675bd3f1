//! Articulated rigid-body model description.
//!
//! A model is a kinematic tree of bodies connected by joints (with optional
//! torsional/linear spring-dampers), plus affine voltage-driven actuators,
//! kinematic-loop closure constraints, and ground contact points. All values
//! are stored in working units: millimeters, grams, milliseconds, volts.

mod parse;

pub mod library;

pub use parse::parse_model;

use crate::real::{is_finite, lit, Real};
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Planar models live in the x–z plane (3-coordinate floating base);
/// spatial models use all of x, y, z (6-coordinate floating base).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    Planar,
    Spatial,
}

/// Rigid body: mass properties in the body frame.
#[derive(Clone, Debug)]
pub struct Body<T: Real> {
    pub name: String,
    /// Mass [g].
    pub mass: T,
    /// Rotational inertia about the COM, body frame [g·mm²].
    pub inertia: Matrix3<T>,
    /// COM offset in the body frame [mm].
    pub com: Vector3<T>,
}

#[derive(Clone, Debug)]
pub enum JointKind<T: Real> {
    /// Free base pose: (x, z, pitch) planar, (x, y, z, roll, pitch, yaw) spatial.
    Floating,
    /// One rotational coordinate about `axis` (joint frame).
    Revolute { axis: Vector3<T> },
    /// One translational coordinate along `axis` (joint frame).
    Prismatic { axis: Vector3<T> },
}

/// Joint connecting `parent` (or the world) to the child body, with a
/// flexure-style spring-damper on its coordinate.
#[derive(Clone, Debug)]
pub struct Joint<T: Real> {
    pub name: String,
    pub kind: JointKind<T>,
    /// Parent body index, or `None` for the world frame.
    pub parent: Option<usize>,
    /// Child body index.
    pub child: usize,
    /// Joint frame origin in the parent frame [mm].
    pub origin: Vector3<T>,
    /// Spring stiffness on the joint coordinate [g·mm²/ms² per rad, or g/ms²].
    pub stiffness: T,
    /// Damping on the joint coordinate rate.
    pub damping: T,
    /// Spring rest position (angle or displacement).
    pub rest: T,
    /// Position limits on the joint coordinate.
    pub limits: Option<(T, T)>,
    /// First generalized-coordinate index owned by this joint.
    pub coord_offset: usize,
}

impl<T: Real> Joint<T> {
    /// Number of generalized coordinates this joint contributes.
    pub fn ncoords(&self, mode: Mode) -> usize {
        match self.kind {
            JointKind::Floating => match mode {
                Mode::Planar => 3,
                Mode::Spatial => 6,
            },
            JointKind::Revolute { .. } | JointKind::Prismatic { .. } => 1,
        }
    }

    pub fn is_floating(&self) -> bool {
        matches!(self.kind, JointKind::Floating)
    }
}

/// Voltage-driven force source in parallel with a spring, acting on one
/// joint coordinate: `F_s(u, q) = gain·u + q_gain·q + bias`, opposed by
/// `spring·q`.
#[derive(Clone, Debug)]
pub struct Actuator<T: Real> {
    pub name: String,
    /// Index of the driven joint (must be single-coordinate).
    pub joint: usize,
    pub gain: T,
    pub q_gain: T,
    pub bias: T,
    pub spring: T,
    /// Voltage bounds [V].
    pub v_limits: (T, T),
}

/// Coordinate axes usable as loop-closure directions.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn unit<T: Real>(self) -> Vector3<T> {
        match self {
            Axis::X => Vector3::new(T::one(), T::zero(), T::zero()),
            Axis::Y => Vector3::new(T::zero(), T::one(), T::zero()),
            Axis::Z => Vector3::new(T::zero(), T::zero(), T::one()),
        }
    }
}

/// Holonomic loop-closure constraint: two body-fixed points made coincident
/// along the listed world axes.
#[derive(Clone, Debug)]
pub struct LoopConstraint<T: Real> {
    pub body_a: usize,
    pub offset_a: Vector3<T>,
    pub body_b: usize,
    pub offset_b: Vector3<T>,
    pub directions: Vec<Axis>,
}

/// Point contact candidate: a body-fixed point tested against the ground.
#[derive(Clone, Debug)]
pub struct ContactPoint<T: Real> {
    pub name: String,
    pub body: usize,
    /// Body-frame offset [mm].
    pub offset: Vector3<T>,
}

#[derive(Error, Debug)]
pub enum ModelError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid model: {0}")]
    Validation(String),
}

/// Validated articulated-model description. Immutable after construction;
/// all evaluation helpers are pure functions over `&Model`.
#[derive(Clone, Debug)]
pub struct Model<T: Real> {
    pub name: String,
    pub mode: Mode,
    pub bodies: Vec<Body<T>>,
    pub joints: Vec<Joint<T>>,
    pub actuators: Vec<Actuator<T>>,
    pub loops: Vec<LoopConstraint<T>>,
    pub contacts: Vec<ContactPoint<T>>,
    /// Gravitational acceleration vector [mm/ms²]; planar models keep y = 0.
    pub gravity: Vector3<T>,
    nq: usize,
    /// Joint evaluation order (parents before children).
    eval_order: Vec<usize>,
}

impl<T: Real> Model<T> {
    /// Assemble and validate a model from its parts. Coordinate offsets are
    /// assigned in joint declaration order.
    pub fn new(
        name: String,
        mode: Mode,
        bodies: Vec<Body<T>>,
        mut joints: Vec<Joint<T>>,
        actuators: Vec<Actuator<T>>,
        loops: Vec<LoopConstraint<T>>,
        contacts: Vec<ContactPoint<T>>,
        gravity: Vector3<T>,
    ) -> Result<Self, ModelError> {
        let mut nq = 0;
        for joint in &mut joints {
            joint.coord_offset = nq;
            nq += joint.ncoords(mode);
        }
        let eval_order = topological_order(&bodies, &joints)?;
        let model = Model {
            name,
            mode,
            bodies,
            joints,
            actuators,
            loops,
            contacts,
            gravity,
            nq,
            eval_order,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Validation(msg));
        for body in &self.bodies {
            if !(body.mass > T::zero()) || !is_finite(body.mass) {
                return bad(format!("body `{}` has non-positive mass", body.name));
            }
            match self.mode {
                Mode::Planar => {
                    if !(body.inertia[(1, 1)] > T::zero()) {
                        return bad(format!(
                            "body `{}` needs positive planar inertia (iyy)",
                            body.name
                        ));
                    }
                }
                Mode::Spatial => {
                    let sym = (self.sym_defect(&body.inertia)).abs();
                    if sym > lit(1e-9) {
                        return bad(format!("body `{}` inertia is not symmetric", body.name));
                    }
                    let eig = body.inertia.symmetric_eigenvalues();
                    if !(eig.min() > T::zero()) {
                        return bad(format!(
                            "body `{}` inertia is not positive definite",
                            body.name
                        ));
                    }
                }
            }
        }
        for act in &self.actuators {
            let joint = self
                .joints
                .get(act.joint)
                .ok_or_else(|| ModelError::Validation(format!(
                    "actuator `{}` references nonexistent joint",
                    act.name
                )))?;
            if joint.is_floating() {
                return bad(format!(
                    "actuator `{}` drives floating joint `{}`",
                    act.name, joint.name
                ));
            }
            if act.v_limits.0 > act.v_limits.1 {
                return bad(format!("actuator `{}` has inverted voltage bounds", act.name));
            }
        }
        for (i, lp) in self.loops.iter().enumerate() {
            if lp.body_a >= self.bodies.len() || lp.body_b >= self.bodies.len() {
                return bad(format!("loop constraint {i} references nonexistent body"));
            }
            if lp.directions.is_empty() {
                return bad(format!("loop constraint {i} constrains no directions"));
            }
        }
        for contact in &self.contacts {
            if contact.body >= self.bodies.len() {
                return bad(format!(
                    "contact `{}` references nonexistent body",
                    contact.name
                ));
            }
        }
        for joint in &self.joints {
            if let Some((lo, hi)) = joint.limits {
                if lo > hi {
                    return bad(format!("joint `{}` has inverted limits", joint.name));
                }
            }
            if let JointKind::Revolute { axis } | JointKind::Prismatic { axis } = joint.kind {
                if !(axis.norm() > lit(1e-12)) {
                    return bad(format!("joint `{}` has zero axis", joint.name));
                }
            }
        }
        Ok(())
    }

    fn sym_defect(&self, m: &Matrix3<T>) -> T {
        let mut worst = T::zero();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d = (m[(i, j)] - m[(j, i)]).abs();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Number of generalized coordinates.
    pub fn nq(&self) -> usize {
        self.nq
    }

    /// Number of actuator input channels.
    pub fn nu(&self) -> usize {
        self.actuators.len()
    }

    /// Number of loop-constraint rows.
    pub fn n_loop_rows(&self) -> usize {
        self.loops.iter().map(|l| l.directions.len()).sum()
    }

    pub fn n_contacts(&self) -> usize {
        self.contacts.len()
    }

    /// Joint evaluation order with parents before children.
    pub fn eval_order(&self) -> &[usize] {
        &self.eval_order
    }

    pub fn body_index(&self, name: &str) -> Option<usize> {
        self.bodies.iter().position(|b| b.name == name)
    }

    pub fn joint_index(&self, name: &str) -> Option<usize> {
        self.joints.iter().position(|j| j.name == name)
    }

    /// Index of the floating-base joint, if the model has one.
    pub fn floating_joint(&self) -> Option<usize> {
        self.joints.iter().position(|j| j.is_floating())
    }

    /// Coordinate index of the base x-translation, if floating.
    pub fn base_x_coord(&self) -> Option<usize> {
        self.floating_joint().map(|j| self.joints[j].coord_offset)
    }

    /// Coordinate index of the base vertical (z) translation, if floating.
    pub fn base_z_coord(&self) -> Option<usize> {
        self.floating_joint().map(|j| {
            self.joints[j].coord_offset + if self.mode == Mode::Planar { 1 } else { 2 }
        })
    }

    /// Per-coordinate names, used by file headers and diagnostics.
    pub fn coord_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.nq];
        for joint in &self.joints {
            let base = joint.coord_offset;
            match joint.kind {
                JointKind::Floating => {
                    let labels: &[&str] = match self.mode {
                        Mode::Planar => &["x", "z", "pitch"],
                        Mode::Spatial => &["x", "y", "z", "roll", "pitch", "yaw"],
                    };
                    for (i, label) in labels.iter().enumerate() {
                        names[base + i] = format!("{}.{}", joint.name, label);
                    }
                }
                _ => names[base] = joint.name.clone(),
            }
        }
        names
    }

    /// Lower/upper position bounds per coordinate (unbounded where no joint
    /// limit applies).
    pub fn coord_limits(&self) -> (Vec<Option<T>>, Vec<Option<T>>) {
        let mut lo = vec![None; self.nq];
        let mut hi = vec![None; self.nq];
        for joint in &self.joints {
            if let Some((a, b)) = joint.limits {
                if !joint.is_floating() {
                    lo[joint.coord_offset] = Some(a);
                    hi[joint.coord_offset] = Some(b);
                }
            }
        }
        (lo, hi)
    }
}

fn topological_order<T: Real>(
    bodies: &[Body<T>],
    joints: &[Joint<T>],
) -> Result<Vec<usize>, ModelError> {
    let nb = bodies.len();
    let mut parent_joint = vec![usize::MAX; nb];
    for (ji, joint) in joints.iter().enumerate() {
        if joint.child >= nb {
            return Err(ModelError::Validation(format!(
                "joint `{}` has nonexistent child body",
                joint.name
            )));
        }
        if parent_joint[joint.child] != usize::MAX {
            return Err(ModelError::Validation(format!(
                "body `{}` has more than one parent joint",
                bodies[joint.child].name
            )));
        }
        parent_joint[joint.child] = ji;
    }
    if let Some(orphan) = parent_joint.iter().position(|&j| j == usize::MAX) {
        return Err(ModelError::Validation(format!(
            "body `{}` is not connected by any joint",
            bodies[orphan].name
        )));
    }
    // Walk joints whose parent body is already placed.
    let mut placed = vec![false; nb];
    let mut order = Vec::with_capacity(joints.len());
    let mut remaining: Vec<usize> = (0..joints.len()).collect();
    while !remaining.is_empty() {
        let before = order.len();
        remaining.retain(|&ji| {
            let ready = match joints[ji].parent {
                None => true,
                Some(pb) => pb < nb && placed[pb],
            };
            if ready {
                order.push(ji);
                placed[joints[ji].child] = true;
            }
            !ready
        });
        if order.len() == before {
            return Err(ModelError::Validation(
                "joint graph contains a cycle or a dangling parent reference".into(),
            ));
        }
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle_parts() -> (Vec<Body<f64>>, Vec<Joint<f64>>) {
        let body = Body {
            name: "ball".into(),
            mass: 2.0,
            inertia: Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 1.0)),
            com: Vector3::zeros(),
        };
        let joint = Joint {
            name: "base".into(),
            kind: JointKind::Floating,
            parent: None,
            child: 0,
            origin: Vector3::zeros(),
            stiffness: 0.0,
            damping: 0.0,
            rest: 0.0,
            limits: None,
            coord_offset: 0,
        };
        (vec![body], vec![joint])
    }

    #[test]
    fn planar_floating_base_has_three_coords() {
        let (bodies, joints) = particle_parts();
        let model = Model::new(
            "p".into(),
            Mode::Planar,
            bodies,
            joints,
            vec![],
            vec![],
            vec![],
            Vector3::new(0.0, 0.0, -9.81e-3),
        )
        .unwrap();
        assert_eq!(model.nq(), 3);
        assert_eq!(model.base_x_coord(), Some(0));
        assert_eq!(model.base_z_coord(), Some(1));
    }

    #[test]
    fn nonpositive_mass_rejected() {
        let (mut bodies, joints) = particle_parts();
        bodies[0].mass = 0.0;
        let err = Model::new(
            "p".into(),
            Mode::Planar,
            bodies,
            joints,
            vec![],
            vec![],
            vec![],
            Vector3::zeros(),
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::Validation(_)));
    }

    #[test]
    fn actuator_on_missing_joint_rejected() {
        let (bodies, joints) = particle_parts();
        let act = Actuator {
            name: "a".into(),
            joint: 5,
            gain: 1.0,
            q_gain: 0.0,
            bias: 0.0,
            spring: 0.0,
            v_limits: (0.0, 225.0),
        };
        let err = Model::new(
            "p".into(),
            Mode::Planar,
            bodies,
            joints,
            vec![act],
            vec![],
            vec![],
            Vector3::zeros(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("nonexistent joint"));
    }

    #[test]
    fn disconnected_body_rejected() {
        let (mut bodies, joints) = particle_parts();
        bodies.push(Body {
            name: "stray".into(),
            mass: 1.0,
            inertia: Matrix3::identity(),
            com: Vector3::zeros(),
        });
        let err = Model::new(
            "p".into(),
            Mode::Planar,
            bodies,
            joints,
            vec![],
            vec![],
            vec![],
            Vector3::zeros(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not connected"));
    }
}
