//! Forward kinematics and energies, generic over the differentiation scalar.
//!
//! These functions are the single source of truth for all positions and
//! energies; every Jacobian in the library is obtained by evaluating them on
//! dual numbers. Convention: z is vertical, planar models live in the x–z
//! plane, rotations follow the right-hand rule about their axis.

use crate::ad::{seed_dir, Dual, Scalar};
use crate::model::{Joint, JointKind, Mode, Model};
use num_traits::Zero;
use nalgebra::{Matrix3, Vector3};

/// Rigid transform of a body frame relative to the world.
#[derive(Clone, Debug)]
pub struct FramePose<S: Scalar> {
    pub rot: Matrix3<S>,
    pub pos: Vector3<S>,
}

impl<S: Scalar> FramePose<S> {
    pub fn identity() -> Self {
        FramePose {
            rot: Matrix3::identity(),
            pos: Vector3::zeros(),
        }
    }

    /// World coordinates of a point given in this frame.
    pub fn point(&self, local: &Vector3<S>) -> Vector3<S> {
        self.pos + self.rot * local
    }
}

/// Lift a base-scalar 3-vector to the working scalar.
pub fn lift3<S: Scalar>(v: &Vector3<S::Base>) -> Vector3<S> {
    Vector3::new(S::from_base(v.x), S::from_base(v.y), S::from_base(v.z))
}

/// Lift a base-scalar 3×3 matrix to the working scalar.
pub fn lift3x3<S: Scalar>(m: &Matrix3<S::Base>) -> Matrix3<S> {
    Matrix3::from_fn(|i, j| S::from_base(m[(i, j)]))
}

fn skew<S: Scalar>(v: &Vector3<S>) -> Matrix3<S> {
    let z = S::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Rotation about a unit axis by `angle` (Rodrigues).
pub fn rot_axis<S: Scalar>(axis: &Vector3<S>, angle: S) -> Matrix3<S> {
    let k = skew(axis);
    let s = angle.sine();
    let c = angle.cosine();
    let one = S::one();
    Matrix3::identity() + k * s + k * k * (one - c)
}

fn joint_transform<S: Scalar>(
    joint: &Joint<S::Base>,
    mode: Mode,
    q: &[S],
) -> (Matrix3<S>, Vector3<S>) {
    let base = joint.coord_offset;
    match &joint.kind {
        JointKind::Floating => match mode {
            Mode::Planar => {
                let y_axis = Vector3::new(S::zero(), S::one(), S::zero());
                let rot = rot_axis(&y_axis, q[base + 2]);
                (rot, Vector3::new(q[base], S::zero(), q[base + 1]))
            }
            Mode::Spatial => {
                // R = Rz(yaw)·Ry(pitch)·Rx(roll)
                let ex = Vector3::new(S::one(), S::zero(), S::zero());
                let ey = Vector3::new(S::zero(), S::one(), S::zero());
                let ez = Vector3::new(S::zero(), S::zero(), S::one());
                let rot = rot_axis(&ez, q[base + 5])
                    * rot_axis(&ey, q[base + 4])
                    * rot_axis(&ex, q[base + 3]);
                (rot, Vector3::new(q[base], q[base + 1], q[base + 2]))
            }
        },
        JointKind::Revolute { axis } => (rot_axis(&lift3::<S>(axis), q[base]), Vector3::zeros()),
        JointKind::Prismatic { axis } => {
            (Matrix3::identity(), lift3::<S>(axis) * q[base])
        }
    }
}

/// World pose of every body, parents evaluated before children.
pub fn body_poses<S: Scalar>(model: &Model<S::Base>, q: &[S]) -> Vec<FramePose<S>> {
    debug_assert_eq!(q.len(), model.nq());
    let mut poses: Vec<FramePose<S>> = vec![FramePose::identity(); model.bodies.len()];
    for &ji in model.eval_order() {
        let joint = &model.joints[ji];
        let parent = match joint.parent {
            None => FramePose::identity(),
            Some(pb) => poses[pb].clone(),
        };
        let anchor = parent.point(&lift3::<S>(&joint.origin));
        let (jrot, jpos) = joint_transform(joint, model.mode, q);
        poses[joint.child] = FramePose {
            pos: anchor + parent.rot * jpos,
            rot: parent.rot * jrot,
        };
    }
    poses
}

/// World positions of every contact point.
pub fn contact_positions<S: Scalar>(model: &Model<S::Base>, q: &[S]) -> Vec<Vector3<S>> {
    let poses = body_poses(model, q);
    model
        .contacts
        .iter()
        .map(|c| poses[c.body].point(&lift3::<S>(&c.offset)))
        .collect()
}

/// Loop-closure residual rows: per constraint, the separation of the two
/// anchor points projected on each constrained axis.
pub fn loop_residual<S: Scalar>(model: &Model<S::Base>, q: &[S]) -> Vec<S> {
    if model.loops.is_empty() {
        return Vec::new();
    }
    let poses = body_poses(model, q);
    let mut rows = Vec::with_capacity(model.n_loop_rows());
    for lp in &model.loops {
        let pa = poses[lp.body_a].point(&lift3::<S>(&lp.offset_a));
        let pb = poses[lp.body_b].point(&lift3::<S>(&lp.offset_b));
        let gap = pa - pb;
        for &axis in &lp.directions {
            rows.push(gap.dot(&axis.unit::<S::Base>().map(S::from_base)));
        }
    }
    rows
}

/// Potential energy: gravity on every COM plus joint-spring energy.
pub fn potential_energy<S: Scalar>(model: &Model<S::Base>, q: &[S]) -> S {
    let poses = body_poses(model, q);
    let gravity = lift3::<S>(&model.gravity);
    let half = S::constant(0.5);
    let mut v = S::zero();
    for (body, pose) in model.bodies.iter().zip(&poses) {
        let com = pose.point(&lift3::<S>(&body.com));
        v -= com.dot(&gravity) * S::from_base(body.mass);
    }
    for joint in &model.joints {
        if joint.is_floating() || joint.stiffness == S::Base::zero() {
            continue;
        }
        let d = q[joint.coord_offset] - S::from_base(joint.rest);
        v += half * S::from_base(joint.stiffness) * d * d;
    }
    v
}

/// Kinetic energy `½Σ mᵢ‖vᵢ‖² + ½Σ ωᵢᵀIᵢωᵢ`, with body velocities obtained
/// from one directional dual pass along `qdot`.
pub fn kinetic_energy<S: Scalar>(model: &Model<S::Base>, q: &[S], qdot: &[S]) -> S {
    let seeded: Vec<Dual<S>> = seed_dir(q, qdot);
    let poses = body_poses::<Dual<S>>(model, &seeded);
    let half = S::constant(0.5);
    let mut t = S::zero();
    for (body, pose) in model.bodies.iter().zip(&poses) {
        let com = pose.point(&lift3::<Dual<S>>(&body.com));
        let v = Vector3::new(com.x.eps, com.y.eps, com.z.eps);
        t += half * S::from_base(body.mass) * v.dot(&v);

        let r = Matrix3::from_fn(|i, j| pose.rot[(i, j)].re);
        let r_dot = Matrix3::from_fn(|i, j| pose.rot[(i, j)].eps);
        let w = r_dot * r.transpose();
        let omega_world = Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]);
        let omega_body = r.transpose() * omega_world;
        let inertia = lift3x3::<S>(&body.inertia);
        t += half * omega_body.dot(&(inertia * omega_body));
    }
    t
}

/// Continuous Lagrangian T − V (spring energy included in V), computed from
/// a single velocity-seeded kinematics pass: the primal parts give the
/// potential, the dual parts give body velocities for the kinetic term.
pub fn lagrangian<S: Scalar>(model: &Model<S::Base>, q: &[S], qdot: &[S]) -> S {
    let seeded: Vec<Dual<S>> = seed_dir(q, qdot);
    let poses = body_poses::<Dual<S>>(model, &seeded);
    let gravity = lift3::<S>(&model.gravity);
    let half = S::constant(0.5);
    let mut t = S::zero();
    let mut v = S::zero();
    for (body, pose) in model.bodies.iter().zip(&poses) {
        let com = pose.point(&lift3::<Dual<S>>(&body.com));
        let com_pos = Vector3::new(com.x.re, com.y.re, com.z.re);
        let com_vel = Vector3::new(com.x.eps, com.y.eps, com.z.eps);
        v -= com_pos.dot(&gravity) * S::from_base(body.mass);
        t += half * S::from_base(body.mass) * com_vel.dot(&com_vel);

        let r = Matrix3::from_fn(|i, j| pose.rot[(i, j)].re);
        let r_dot = Matrix3::from_fn(|i, j| pose.rot[(i, j)].eps);
        let w = r_dot * r.transpose();
        let omega_world = Vector3::new(w[(2, 1)], w[(0, 2)], w[(1, 0)]);
        let omega_body = r.transpose() * omega_world;
        let inertia = lift3x3::<S>(&body.inertia);
        t += half * omega_body.dot(&(inertia * omega_body));
    }
    for joint in &model.joints {
        if joint.is_floating() || joint.stiffness == S::Base::zero() {
            continue;
        }
        let d = q[joint.coord_offset] - S::from_base(joint.rest);
        v += half * S::from_base(joint.stiffness) * d * d;
    }
    t - v
}

/// Generalized external force: flexure damping plus actuator forces,
/// `F(q, q̇, u) = F_damp(q̇) + Bᵀ(F_s(u, q) − K q)`.
pub fn external_force<S: Scalar>(
    model: &Model<S::Base>,
    q: &[S],
    qdot: &[S],
    u: &[S],
) -> Vec<S> {
    debug_assert_eq!(u.len(), model.nu());
    let mut f = vec![S::zero(); model.nq()];
    for joint in &model.joints {
        if joint.is_floating() || joint.damping == S::Base::zero() {
            continue;
        }
        let i = joint.coord_offset;
        f[i] -= S::from_base(joint.damping) * qdot[i];
    }
    for (act, &ui) in model.actuators.iter().zip(u.iter()) {
        let i = model.joints[act.joint].coord_offset;
        let qi = q[i];
        let fs = S::from_base(act.gain) * ui + S::from_base(act.q_gain) * qi
            + S::from_base(act.bias);
        f[i] += fs - S::from_base(act.spring) * qi;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use approx::assert_relative_eq;

    const PENDULUM: &str = "\
[world]
mode = planar
gravity = 0 -9.81e-3 mm/ms^2

[body]
name = bob
mass = 3 g
inertia = 0.5 g.mm^2
com = 0 -10 mm

[joint]
name = hinge
type = revolute
parent = world
child = bob
stiffness = 2 mJ/rad
";

    #[test]
    fn pendulum_energies_match_closed_form() {
        let m: Model<f64> = parse_model(PENDULUM, "pendulum").unwrap();
        let (mass, length, g, k, inertia_com) = (3.0, 10.0, 9.81e-3, 2.0, 0.5);
        let theta: f64 = 0.4;
        let theta_dot = 0.25;
        // Point-mass pendulum about the hinge: I_hinge = I_com + m l².
        let i_hinge = inertia_com + mass * length * length;
        let t_expect = 0.5 * i_hinge * theta_dot * theta_dot;
        let v_expect = -mass * g * length * theta.cos() + 0.5 * k * theta * theta;
        let t = kinetic_energy(&m, &[theta], &[theta_dot]);
        let v = potential_energy(&m, &[theta]);
        assert_relative_eq!(t, t_expect, max_relative = 1e-13);
        assert_relative_eq!(v, v_expect, max_relative = 1e-13);
        assert_relative_eq!(
            lagrangian(&m, &[theta], &[theta_dot]),
            t_expect - v_expect,
            max_relative = 1e-13
        );
    }

    #[test]
    fn contact_point_follows_base() {
        let text = "\
[world]
mode = planar
gravity = 0 -9.81e-3 mm/ms^2

[body]
name = ball
mass = 1 g
inertia = 1 g.mm^2

[joint]
name = base
type = floating
parent = world
child = ball

[contact]
body = ball
offset = 0 -2 mm
";
        let m: Model<f64> = parse_model(text, "x").unwrap();
        let p = contact_positions(&m, &[3.0, 7.0, 0.0]);
        assert_relative_eq!(p[0].x, 3.0);
        assert_relative_eq!(p[0].z, 5.0);
        // rotate the base: the offset swings with it
        let p = contact_positions(&m, &[0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        assert_relative_eq!(p[0].z, 0.0, epsilon = 1e-12);
        assert!((p[0].x.abs() - 2.0).abs() < 1e-12);
    }
}
