//! Second-order variational time stepping with rigid contact.
//!
//! One step solves the discrete Euler-Lagrange equations together with the
//! contact/friction KKT system as a nonlinear complementarity problem:
//!
//! ```text
//! r(h, q_{k-1}, q_k, q_{k+1}, u_{k-1}, u_k, λ, γ) + P(q_{k+1})ᵀβ = 0
//! c((q_k + q_{k+1})/2) = 0
//! g₁ = ψ ⊕ slip − η = 0
//! 0 ≤ γ ⊥ φ(q_{k+1}) ≥ 0
//! 0 ≤ ψ ⊥ μγ − Σβ ≥ 0
//! 0 ≤ β ⊥ η ≥ 0
//! ```
//!
//! where the discrete Lagrangian and forcing use the midpoint rule and the
//! slip measure is the per-direction tangential displacement rate of each
//! contact point over the step. Impacts are perfectly inelastic.

mod solve;

pub use solve::{solve_step, StepError, StepOptions};

use crate::ad::{gradient_nested, lift, Dual, Scalar};
use crate::kinematics;
use crate::model::Model;
use crate::real::{lit, Real};
use crate::surface::Surface;
use crate::trajectory::Trajectory;
use nalgebra::DVector;

/// Inputs of one integrator step: two trailing configurations and the two
/// adjacent interval voltages.
#[derive(Clone, Debug)]
pub struct StepInputs<T: Real> {
    /// Time step [ms].
    pub h: T,
    pub q_prev: DVector<T>,
    pub q_cur: DVector<T>,
    pub u_prev: DVector<T>,
    pub u_cur: DVector<T>,
}

/// One step's outputs: the next configuration, all multipliers (impulses
/// over the step), and solver diagnostics.
#[derive(Clone, Debug)]
pub struct StepSolution<T: Real> {
    pub q_next: DVector<T>,
    /// Loop-constraint impulses.
    pub lambda: DVector<T>,
    /// Normal impulses, one per contact (≥ 0).
    pub gamma: DVector<T>,
    /// Friction impulses per (contact, direction) (≥ 0).
    pub beta: DVector<T>,
    /// Slip-speed multipliers per contact (≥ 0).
    pub psi: DVector<T>,
    /// Friction-cone slack multipliers per (contact, direction) (≥ 0).
    pub eta: DVector<T>,
    /// ∞-norm of the DEL + constraint equality residual.
    pub residual_norm: T,
    /// Largest complementarity inner product among the three groups.
    pub comp_violation: T,
    pub newton_iters: usize,
}

/// Discrete Lagrangian: midpoint quadrature of the action over one step,
/// `L_d(h, q_a, q_b) = h·L((q_a+q_b)/2, (q_b−q_a)/h)`.
pub fn discrete_lagrangian<T: Real>(model: &Model<T>, h: T, q_a: &[T], q_b: &[T]) -> T {
    assert!(h > T::zero(), "discrete_lagrangian: h must be positive");
    discrete_lagrangian_s(model, h, q_a, q_b)
}

pub(crate) fn mid_and_rate<S: Scalar>(h: S, q_a: &[S], q_b: &[S]) -> (Vec<S>, Vec<S>) {
    let half = S::constant(0.5);
    let mid = q_a
        .iter()
        .zip(q_b)
        .map(|(&a, &b)| (a + b) * half)
        .collect();
    let rate = q_a.iter().zip(q_b).map(|(&a, &b)| (b - a) / h).collect();
    (mid, rate)
}

pub(crate) fn discrete_lagrangian_s<S: Scalar>(
    model: &Model<S::Base>,
    h: S,
    q_a: &[S],
    q_b: &[S],
) -> S {
    let (mid, rate) = mid_and_rate(h, q_a, q_b);
    h * kinematics::lagrangian(model, &mid, &rate)
}

/// Slot derivative D₁L_d: gradient with respect to the first configuration.
pub(crate) fn d1_discrete_lagrangian<S: Scalar>(
    model: &Model<S::Base>,
    h: S,
    q_a: &[S],
    q_b: &[S],
) -> Vec<S> {
    let qb_c: Vec<Dual<S>> = q_b.iter().map(|&x| Dual::constant(x)).collect();
    gradient_nested(q_a, |qa_d| {
        discrete_lagrangian_s(model, Dual::constant(h), qa_d, &qb_c)
    })
}

/// Slot derivative D₂L_d: gradient with respect to the second configuration.
pub(crate) fn d2_discrete_lagrangian<S: Scalar>(
    model: &Model<S::Base>,
    h: S,
    q_a: &[S],
    q_b: &[S],
) -> Vec<S> {
    let qa_c: Vec<Dual<S>> = q_a.iter().map(|&x| Dual::constant(x)).collect();
    gradient_nested(q_b, |qb_d| {
        discrete_lagrangian_s(model, Dual::constant(h), &qa_c, qb_d)
    })
}

/// Midpoint discretization of the generalized external force (flexure
/// damping plus actuator force), as an impulse over the step.
pub(crate) fn discrete_force<S: Scalar>(
    model: &Model<S::Base>,
    h: S,
    q_a: &[S],
    q_b: &[S],
    u: &[S],
) -> Vec<S> {
    let (mid, rate) = mid_and_rate(h, q_a, q_b);
    kinematics::external_force(model, &mid, &rate, u)
        .into_iter()
        .map(|f| f * h)
        .collect()
}

/// Generalized loop-constraint force C(q)ᵀλ at configuration `q`, obtained
/// as ∇_q (λᵀc)(q).
pub(crate) fn loop_force<S: Scalar>(model: &Model<S::Base>, q: &[S], lambda: &[S]) -> Vec<S> {
    if model.n_loop_rows() == 0 {
        return vec![S::zero(); model.nq()];
    }
    let lam: Vec<Dual<S>> = lambda.iter().map(|&x| Dual::constant(x)).collect();
    gradient_nested(q, |q_d| {
        kinematics::loop_residual(model, q_d)
            .iter()
            .zip(&lam)
            .map(|(&c, &l)| c * l)
            .fold(Dual::constant(S::zero()), |acc, x| acc + x)
    })
}

/// Generalized normal contact force N(q)ᵀγ = ∇_q (γᵀφ)(q).
pub(crate) fn normal_force<S: Scalar>(
    model: &Model<S::Base>,
    surface: &Surface<S::Base>,
    q: &[S],
    gamma: &[S],
) -> Vec<S> {
    if model.n_contacts() == 0 {
        return vec![S::zero(); model.nq()];
    }
    let g: Vec<Dual<S>> = gamma.iter().map(|&x| Dual::constant(x)).collect();
    let height = surface.height;
    gradient_nested(q, |q_d| {
        kinematics::contact_positions(model, q_d)
            .iter()
            .zip(&g)
            .map(|(p, &gi)| (p.z - Dual::from_base(height)) * gi)
            .fold(Dual::constant(S::zero()), |acc, x| acc + x)
    })
}

/// Stacked tangential coordinates τ(q): one entry per (contact, direction),
/// the contact-point position projected along each friction direction.
pub(crate) fn tangential_coords<S: Scalar>(
    model: &Model<S::Base>,
    surface: &Surface<S::Base>,
    q: &[S],
) -> Vec<S> {
    let dirs = surface.directions();
    let points = kinematics::contact_positions(model, q);
    let mut out = Vec::with_capacity(points.len() * dirs.len());
    for p in &points {
        for d in &dirs {
            out.push(p.dot(&kinematics::lift3::<S>(d)));
        }
    }
    out
}

/// Generalized friction force P(q)ᵀβ = ∇_q (βᵀτ)(q).
pub(crate) fn friction_force<S: Scalar>(
    model: &Model<S::Base>,
    surface: &Surface<S::Base>,
    q: &[S],
    beta: &[S],
) -> Vec<S> {
    if model.n_contacts() == 0 {
        return vec![S::zero(); model.nq()];
    }
    let b: Vec<Dual<S>> = beta.iter().map(|&x| Dual::constant(x)).collect();
    gradient_nested(q, |q_d| {
        tangential_coords(model, surface, q_d)
            .iter()
            .zip(&b)
            .map(|(&t, &bi)| t * bi)
            .fold(Dual::constant(S::zero()), |acc, x| acc + x)
    })
}

/// Discrete Euler-Lagrange residual with constraint, contact, and friction
/// impulses:
///
/// ```text
/// r = D₂L_d(h, q_prev, q_cur) + D₁L_d(h, q_cur, q_next)
///   + ½F_d(h, q_prev, q_cur, u_prev) + ½F_d(h, q_cur, q_next, u_cur)
///   + ½(C(mid_prev) + C(mid_cur))ᵀλ + N(q_next)ᵀγ + P(q_next)ᵀβ
/// ```
pub(crate) fn del_residual_s<S: Scalar>(
    model: &Model<S::Base>,
    surface: &Surface<S::Base>,
    h: S,
    q_prev: &[S],
    q_cur: &[S],
    q_next: &[S],
    u_prev: &[S],
    u_cur: &[S],
    lambda: &[S],
    gamma: &[S],
    beta: &[S],
) -> Vec<S> {
    let n = model.nq();
    let half = S::constant(0.5);
    let mut r = d2_discrete_lagrangian(model, h, q_prev, q_cur);
    let d1 = d1_discrete_lagrangian(model, h, q_cur, q_next);
    let f_prev = discrete_force(model, h, q_prev, q_cur, u_prev);
    let f_cur = discrete_force(model, h, q_cur, q_next, u_cur);
    for i in 0..n {
        r[i] += d1[i] + half * (f_prev[i] + f_cur[i]);
    }
    if model.n_loop_rows() > 0 {
        let (mid_prev, _) = mid_and_rate(h, q_prev, q_cur);
        let (mid_cur, _) = mid_and_rate(h, q_cur, q_next);
        let fp = loop_force(model, &mid_prev, lambda);
        let fc = loop_force(model, &mid_cur, lambda);
        for i in 0..n {
            r[i] += half * (fp[i] + fc[i]);
        }
    }
    if model.n_contacts() > 0 {
        let fn_ = normal_force(model, surface, q_next, gamma);
        let ff = friction_force(model, surface, q_next, beta);
        for i in 0..n {
            r[i] += fn_[i] + ff[i];
        }
    }
    r
}

/// Public DEL residual: evaluates `r` for given multipliers.
pub fn del_residual<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    inputs: &StepInputs<T>,
    q_next: &DVector<T>,
    lambda: &DVector<T>,
    gamma: &DVector<T>,
    beta: &DVector<T>,
) -> DVector<T> {
    DVector::from_vec(del_residual_s(
        model,
        surface,
        inputs.h,
        inputs.q_prev.as_slice(),
        inputs.q_cur.as_slice(),
        q_next.as_slice(),
        inputs.u_prev.as_slice(),
        inputs.u_cur.as_slice(),
        lambda.as_slice(),
        gamma.as_slice(),
        beta.as_slice(),
    ))
}

/// Per-direction slip rates over the step: (τ(q_next) − τ(q_cur))/h.
pub(crate) fn slip_rates<S: Scalar>(
    model: &Model<S::Base>,
    surface: &Surface<S::Base>,
    h: S,
    q_cur: &[S],
    q_next: &[S],
) -> Vec<S> {
    let t_cur = tangential_coords(model, surface, q_cur);
    let t_next = tangential_coords(model, surface, q_next);
    t_cur
        .iter()
        .zip(&t_next)
        .map(|(&a, &b)| (b - a) / h)
        .collect()
}

/// Contact/friction KKT residual bundle for one solved step.
#[derive(Clone, Debug)]
pub struct KktResidual<T: Real> {
    /// Loop-constraint residual at the interval midpoint.
    pub loop_residual: DVector<T>,
    /// Signed distances at q_next.
    pub phi_next: DVector<T>,
    /// γ_c·φ_c per contact.
    pub normal_products: DVector<T>,
    /// g₁ = ψ ⊕ slip − η per (contact, direction).
    pub g1: DVector<T>,
    /// g₂ = μγ − Σβ per contact (polyhedral cone residual).
    pub g2: DVector<T>,
    /// ψ_c·g₂_c per contact.
    pub cone_products: DVector<T>,
    /// β_j·η_j per (contact, direction).
    pub tangent_products: DVector<T>,
}

impl<T: Real> KktResidual<T> {
    /// Largest complementarity inner product over the three groups.
    pub fn max_complementarity(&self) -> T {
        let sum = |v: &DVector<T>| v.iter().fold(T::zero(), |a, &x| a + x);
        sum(&self.normal_products)
            .max(sum(&self.cone_products))
            .max(sum(&self.tangent_products))
    }

    /// Worst violation of the sign conditions (negative products clip at 0).
    pub fn max_violation(&self) -> T {
        let inf = |v: &DVector<T>| v.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
        inf(&self.loop_residual)
            .max(inf(&self.g1))
            .max(self.max_complementarity())
    }
}

/// Evaluate the contact KKT conditions for a candidate step solution.
pub fn contact_kkt<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    inputs: &StepInputs<T>,
    sol: &StepSolution<T>,
) -> KktResidual<T> {
    let (mid, _) = mid_and_rate(inputs.h, inputs.q_cur.as_slice(), sol.q_next.as_slice());
    let loop_residual = DVector::from_vec(kinematics::loop_residual(model, &mid));
    let m = model.n_contacts();
    let d = surface.n_directions();
    let phi_next = DVector::from_iterator(
        m,
        kinematics::contact_positions(model, sol.q_next.as_slice())
            .iter()
            .map(|p| p.z - surface.height),
    );
    let normal_products = DVector::from_fn(m, |c, _| sol.gamma[c] * phi_next[c]);
    let slip = slip_rates(
        model,
        surface,
        inputs.h,
        inputs.q_cur.as_slice(),
        sol.q_next.as_slice(),
    );
    let g1 = DVector::from_fn(m * d, |row, _| {
        let c = row / d;
        sol.psi[c] + slip[row] - sol.eta[row]
    });
    let g2 = DVector::from_fn(m, |c, _| {
        let mut s = surface.mu * sol.gamma[c];
        for j in 0..d {
            s -= sol.beta[c * d + j];
        }
        s
    });
    let cone_products = DVector::from_fn(m, |c, _| sol.psi[c] * g2[c]);
    let tangent_products = DVector::from_fn(m * d, |row, _| sol.beta[row] * sol.eta[row]);
    KktResidual {
        loop_residual,
        phi_next,
        normal_products,
        g1,
        g2,
        cone_products,
        tangent_products,
    }
}

/// Project a configuration onto the loop-constraint manifold by
/// Gauss-Newton on ‖c(q)‖².
pub fn project_to_loops<T: Real>(
    model: &Model<T>,
    q_guess: &DVector<T>,
    tol: T,
    max_iters: usize,
) -> Result<DVector<T>, StepError<T>> {
    let mut q = q_guess.clone();
    if model.n_loop_rows() == 0 {
        return Ok(q);
    }
    for _ in 0..max_iters {
        let (c, jac) = crate::dynamics::loop_constraints(model, q.as_slice());
        if c.amax() <= tol {
            return Ok(q);
        }
        let jjt = &jac * jac.transpose();
        let rhs = jjt
            .lu()
            .solve(&c)
            .ok_or(StepError::IllConditioned { step: 0 })?;
        q -= jac.transpose() * rhs;
    }
    let (c, _) = crate::dynamics::loop_constraints(model, q.as_slice());
    if c.amax() <= tol {
        Ok(q)
    } else {
        Err(StepError::ProjectionFailed {
            residual: c.amax(),
        })
    }
}

/// Simulate a full rollout: repeated [`solve_step`], seeding the two-point
/// scheme with a backward-Euler estimate of q_{-1} projected onto the loop
/// manifold. Refuses to start from a penetrating configuration.
#[allow(clippy::too_many_arguments)]
pub fn rollout<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    q0: &DVector<T>,
    qdot0: &DVector<T>,
    inputs: &[DVector<T>],
    h: T,
    options: &StepOptions<T>,
) -> Result<Trajectory<T>, StepError<T>> {
    assert_eq!(q0.len(), model.nq(), "rollout: q0 dimension");
    assert_eq!(qdot0.len(), model.nq(), "rollout: qdot0 dimension");
    let (phi0, _) = crate::dynamics::signed_distance(model, surface, q0.as_slice());
    if model.n_contacts() > 0 && phi0.min() < -options.penetration_tol {
        return Err(StepError::InitialPenetration { phi: phi0.min() });
    }
    let q_prev0 = project_to_loops(model, &(q0 - qdot0 * h), lit(1e-12), 50)?;

    let mut traj = Trajectory {
        h,
        states: vec![q0.clone()],
        inputs: inputs.to_vec(),
        gammas: Vec::new(),
        betas: Vec::new(),
        lambdas: Vec::new(),
        phis: vec![DVector::from_iterator(phi0.len(), phi0.iter().copied())],
        slacks: Vec::new(),
        resid: Vec::new(),
        comp_viol: Vec::new(),
    };
    let mut q_prev = q_prev0;
    let mut q_cur = q0.clone();
    let mut warm: Option<StepSolution<T>> = None;
    for (k, u_cur) in inputs.iter().enumerate() {
        let u_prev = if k == 0 { u_cur } else { &inputs[k - 1] };
        let step = StepInputs {
            h,
            q_prev: q_prev.clone(),
            q_cur: q_cur.clone(),
            u_prev: u_prev.clone(),
            u_cur: u_cur.clone(),
        };
        let sol = solve_step(model, surface, &step, options, warm.as_ref())
            .map_err(|e| e.at_step(k))?;
        let (phi, _) = crate::dynamics::signed_distance(model, surface, sol.q_next.as_slice());
        traj.states.push(sol.q_next.clone());
        traj.phis.push(phi);
        traj.gammas.push(sol.gamma.clone());
        traj.betas.push(sol.beta.clone());
        traj.lambdas.push(sol.lambda.clone());
        traj.resid.push(sol.residual_norm);
        traj.comp_viol.push(sol.comp_violation);
        q_prev = q_cur;
        q_cur = sol.q_next.clone();
        warm = Some(sol);
    }
    Ok(traj)
}

/// Total mechanical energy T + V at a state, for conservation audits.
pub fn total_energy<T: Real>(model: &Model<T>, q: &[T], qdot: &[T]) -> T {
    kinematics::kinetic_energy(model, q, qdot) + kinematics::potential_energy(model, q)
}

/// Lift a base slice into any scalar level (solver assembly helper).
pub(crate) fn lift_slice<S: Scalar>(xs: &[S::Base]) -> Vec<S> {
    lift::<S>(xs)
}
