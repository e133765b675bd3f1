//! Dynamic quantities over a model: energies, mass matrix, constraint and
//! contact Jacobians, actuator forces.
//!
//! Values come straight from the generic kinematics; Jacobians come from
//! dual-number passes over the same code, so they are exact to rounding.
//! Dimension mismatches are programming errors and panic.

use crate::ad::{jacobian, Dual, Scalar};
use crate::kinematics::{self, lift3};
use crate::model::Model;
use crate::real::Real;
use crate::surface::Surface;
use nalgebra::{DMatrix, DVector, Vector3};

fn check_dim<T: Real>(model: &Model<T>, q: &[T], what: &str) {
    assert_eq!(
        q.len(),
        model.nq(),
        "{what}: expected {} coordinates, got {}",
        model.nq(),
        q.len()
    );
}

/// Continuous Lagrangian T − V [g·mm²/ms²].
pub fn lagrangian<T: Real>(model: &Model<T>, q: &[T], qdot: &[T]) -> T {
    check_dim(model, q, "lagrangian");
    check_dim(model, qdot, "lagrangian velocities");
    kinematics::lagrangian(model, q, qdot)
}

/// Kinetic energy ½q̇ᵀM(q)q̇.
pub fn kinetic_energy<T: Real>(model: &Model<T>, q: &[T], qdot: &[T]) -> T {
    check_dim(model, q, "kinetic_energy");
    kinematics::kinetic_energy(model, q, qdot)
}

/// Potential energy (gravity plus joint springs).
pub fn potential_energy<T: Real>(model: &Model<T>, q: &[T]) -> T {
    check_dim(model, q, "potential_energy");
    kinematics::potential_energy(model, q)
}

/// Mass matrix: the kinetic-energy quadratic form, recovered by polarization
/// (T is exactly quadratic in q̇, so this is exact up to rounding).
pub fn mass_matrix<T: Real>(model: &Model<T>, q: &[T]) -> DMatrix<T> {
    check_dim(model, q, "mass_matrix");
    let n = model.nq();
    let mut m = DMatrix::zeros(n, n);
    let mut unit = vec![T::zero(); n];
    let mut diag_t = vec![T::zero(); n];
    for i in 0..n {
        unit[i] = T::one();
        diag_t[i] = kinematics::kinetic_energy(model, q, &unit);
        m[(i, i)] = diag_t[i] + diag_t[i];
        unit[i] = T::zero();
    }
    for i in 0..n {
        unit[i] = T::one();
        for j in (i + 1)..n {
            unit[j] = T::one();
            let tij = kinematics::kinetic_energy(model, q, &unit);
            let off = tij - diag_t[i] - diag_t[j];
            m[(i, j)] = off;
            m[(j, i)] = off;
            unit[j] = T::zero();
        }
        unit[i] = T::zero();
    }
    m
}

/// Loop-closure residual c(q) and its Jacobian C = ∂c/∂q.
pub fn loop_constraints<T: Real>(model: &Model<T>, q: &[T]) -> (DVector<T>, DMatrix<T>) {
    check_dim(model, q, "loop_constraints");
    let rows = model.n_loop_rows();
    let c = DVector::from_vec(kinematics::loop_residual(model, q));
    let jac = jacobian(rows, q, |qs| kinematics::loop_residual::<Dual<T>>(model, qs));
    (c, jac)
}

/// Loop-closure Jacobian at the midpoint of two configurations, the discrete
/// constraint-force direction used by the stepper.
pub fn loop_jacobian_mid<T: Real>(model: &Model<T>, q_a: &[T], q_b: &[T]) -> DMatrix<T> {
    let half = crate::real::lit::<T>(0.5);
    let mid: Vec<T> = q_a
        .iter()
        .zip(q_b.iter())
        .map(|(&a, &b)| (a + b) * half)
        .collect();
    jacobian(model.n_loop_rows(), &mid, |qs| {
        kinematics::loop_residual::<Dual<T>>(model, qs)
    })
}

/// Signed distances φ(q) from each contact point to the ground plane [mm]
/// and the normal Jacobian N = ∂φ/∂q. Penetration is reported, not clamped.
pub fn signed_distance<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    q: &[T],
) -> (DVector<T>, DMatrix<T>) {
    check_dim(model, q, "signed_distance");
    let nc = model.n_contacts();
    let phi = DVector::from_iterator(
        nc,
        kinematics::contact_positions(model, q)
            .iter()
            .map(|p| p.z - surface.height),
    );
    let jac = jacobian(nc, q, |qs| {
        kinematics::contact_positions::<Dual<T>>(model, qs)
            .iter()
            .map(|p| p.z - Dual::from_base(surface.height))
            .collect()
    });
    (phi, jac)
}

/// Tangential contact basis: stacked rows, one per (contact, direction).
///
/// `jacobian` maps generalized velocity to the slip speed along each basis
/// direction; its transpose maps stacked nonnegative direction impulses β to
/// generalized impulses (the force-selection map applied at q_{k+1} in the
/// stepper).
#[derive(Clone, Debug)]
pub struct FrictionBasis<T: Real> {
    /// Row (c·d + j): direction j of contact c. Size (n_contacts·d) × nq.
    pub jacobian: DMatrix<T>,
    /// Directions per contact.
    pub n_directions: usize,
}

impl<T: Real> FrictionBasis<T> {
    /// Generalized impulse from stacked direction impulses: Pᵀβ.
    pub fn generalized_impulse(&self, beta: &DVector<T>) -> DVector<T> {
        self.jacobian.transpose() * beta
    }

    /// Slip speeds along each direction for a generalized velocity.
    pub fn slip_speeds(&self, qdot: &DVector<T>) -> DVector<T> {
        &self.jacobian * qdot
    }
}

/// Tangential-velocity Jacobian rows for every contact point and basis
/// direction at configuration `q`.
pub fn friction_basis<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    q: &[T],
) -> FrictionBasis<T> {
    check_dim(model, q, "friction_basis");
    let dirs = surface.directions();
    let rows = model.n_contacts() * dirs.len();
    let jac = jacobian(rows, q, |qs| {
        let points = kinematics::contact_positions::<Dual<T>>(model, qs);
        let mut out = Vec::with_capacity(rows);
        for p in &points {
            for dir in &dirs {
                let d = lift3::<Dual<T>>(dir);
                out.push(p.dot(&d));
            }
        }
        out
    });
    FrictionBasis {
        jacobian: jac,
        n_directions: dirs.len(),
    }
}

/// Full 3×nq world Jacobian of one contact point.
pub fn contact_point_jacobian<T: Real>(
    model: &Model<T>,
    q: &[T],
    contact: usize,
) -> DMatrix<T> {
    check_dim(model, q, "contact_point_jacobian");
    jacobian(3, q, |qs| {
        let p = &kinematics::contact_positions::<Dual<T>>(model, qs)[contact];
        vec![p.x, p.y, p.z]
    })
}

/// World positions of all contact points.
pub fn contact_positions<T: Real>(model: &Model<T>, q: &[T]) -> Vec<Vector3<T>> {
    check_dim(model, q, "contact_positions");
    kinematics::contact_positions(model, q)
}

/// Generalized actuator force Bᵀ(F_s(u, q) − Kq) with the affine source
/// F_s = gain·u + q_gain·q + bias per actuator.
pub fn actuator_force<T: Real>(model: &Model<T>, q: &[T], u: &[T]) -> DVector<T> {
    check_dim(model, q, "actuator_force");
    assert_eq!(
        u.len(),
        model.nu(),
        "actuator_force: expected {} inputs, got {}",
        model.nu(),
        u.len()
    );
    // damping is velocity-driven and vanishes at q̇ = 0, leaving the
    // actuator terms of the external force
    let zero_vel = vec![T::zero(); model.nq()];
    DVector::from_vec(kinematics::external_force(model, q, &zero_vel, u))
}

/// Input Jacobian B(q)ᵀ·∂F_s/∂u: column j is the generalized force direction
/// of a unit voltage on actuator j.
pub fn actuator_input_jacobian<T: Real>(model: &Model<T>, q: &[T]) -> DMatrix<T> {
    check_dim(model, q, "actuator_input_jacobian");
    let mut b = DMatrix::zeros(model.nq(), model.nu());
    for (col, act) in model.actuators.iter().enumerate() {
        b[(model.joints[act.joint].coord_offset, col)] = act.gain;
    }
    b
}

/// Generalized external force F_b(q, q̇) + F_act(u, q): flexure damping plus
/// actuator force.
pub fn external_force<T: Real>(model: &Model<T>, q: &[T], qdot: &[T], u: &[T]) -> DVector<T> {
    check_dim(model, q, "external_force");
    DVector::from_vec(kinematics::external_force(model, q, qdot, u))
}
