//! Integrator and contact-solve checks against hand-derived oracles.

use nalgebra::{DVector, Vector3};
use varcontact::dynamics;
use varcontact::model::{library, parse_model, Model};
use varcontact::stepper::{
    self, contact_kkt, del_residual, discrete_lagrangian, rollout, solve_step, StepInputs,
    StepOptions, StepSolution,
};
use varcontact::surface::Surface;

const G: f64 = 9.81e-3;

fn unit_particle() -> Model<f64> {
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
";
    parse_model(text, "unit_particle").unwrap()
}

fn zeros(n: usize) -> DVector<f64> {
    DVector::zeros(n)
}

#[test]
fn discrete_lagrangian_examples() {
    let mut m = unit_particle();
    m.gravity = Vector3::zeros(); // zero potential
    // resting, coincident endpoints -> 0
    let q = [1.0, 2.0, 0.3];
    assert_eq!(discrete_lagrangian(&m, 1.0, &q, &q), 0.0);
    // free particle m=1, h=1, Δq=(1,0): L_d = ½m‖Δq/h‖²·h = ½
    let qa = [0.0, 0.0, 0.0];
    let qb = [1.0, 0.0, 0.0];
    assert!((discrete_lagrangian(&m, 1.0, &qa, &qb) - 0.5).abs() < 1e-14);
    // midpoint symmetry under time reversal for velocity-even Lagrangians
    let m2 = library::load::<f64>("pendulum").unwrap();
    let a = [0.2];
    let b = [0.5];
    let fwd = discrete_lagrangian(&m2, 0.25, &a, &b);
    let rev = discrete_lagrangian(&m2, 0.25, &b, &a);
    assert!((fwd - rev).abs() < 1e-14);
}

#[test]
fn del_residual_vanishes_on_free_fall_parabola() {
    let m = unit_particle();
    let s = Surface::planar(0.5);
    let h = 0.7;
    // midpoint recurrence: z_{k+1} = 2 z_k − z_{k−1} + h²·g_z
    let z0 = 10.0;
    let v0 = 0.3;
    let z1 = z0 + v0 * h - 0.5 * G * h * h;
    let z2 = 2.0 * z1 - z0 - G * h * h;
    let inputs = StepInputs {
        h,
        q_prev: DVector::from_vec(vec![0.0, z0, 0.0]),
        q_cur: DVector::from_vec(vec![0.0, z1, 0.0]),
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let r = del_residual(
        &m,
        &s,
        &inputs,
        &DVector::from_vec(vec![0.0, z2, 0.0]),
        &zeros(0),
        &zeros(1),
        &zeros(2),
    );
    assert!(r.amax() < 1e-10, "free-fall residual {}", r.amax());
}

#[test]
fn del_residual_static_contact_force_balance() {
    // particle resting on the ground: γ = m·g·h balances gravity
    let m = unit_particle();
    let s = Surface::planar(0.5);
    let h = 0.5;
    let q = DVector::from_vec(vec![0.0, 0.0, 0.0]);
    let inputs = StepInputs {
        h,
        q_prev: q.clone(),
        q_cur: q.clone(),
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let gamma = DVector::from_vec(vec![1.0 * G * h]);
    let r = del_residual(&m, &s, &inputs, &q, &zeros(0), &gamma, &zeros(2));
    assert!(r.amax() < 1e-14, "static residual {}", r.amax());
}

#[test]
fn del_residual_uniform_motion_momentum_conservation() {
    let mut m = unit_particle();
    m.gravity = Vector3::zeros();
    let s = Surface::planar(0.5);
    let h = 0.3;
    let step = DVector::from_vec(vec![0.11, 0.07, 0.02]);
    let q0 = DVector::from_vec(vec![1.0, 5.0, 0.1]);
    let q1 = &q0 + &step;
    let q2 = &q1 + &step;
    let inputs = StepInputs {
        h,
        q_prev: q0,
        q_cur: q1,
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let r = del_residual(&m, &s, &inputs, &q2, &zeros(0), &zeros(1), &zeros(2));
    assert!(r.amax() < 1e-14);
}

fn plain_solution(q_next: DVector<f64>, m: usize, md: usize) -> StepSolution<f64> {
    StepSolution {
        q_next,
        lambda: zeros(0),
        gamma: zeros(m),
        beta: zeros(md),
        psi: zeros(m),
        eta: zeros(md),
        residual_norm: 0.0,
        comp_violation: 0.0,
        newton_iters: 0,
    }
}

#[test]
fn contact_kkt_foot_in_air() {
    let m = unit_particle();
    let s = Surface::planar(0.5);
    let q = DVector::from_vec(vec![0.0, 4.0, 0.0]);
    let inputs = StepInputs {
        h: 1.0,
        q_prev: q.clone(),
        q_cur: q.clone(),
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let sol = plain_solution(q, 1, 2);
    let kkt = contact_kkt(&m, &s, &inputs, &sol);
    assert!(kkt.phi_next[0] > 0.0);
    assert_eq!(kkt.max_complementarity(), 0.0);
    assert!(kkt.g1.amax() < 1e-15);
}

#[test]
fn contact_kkt_sticking_foot() {
    // zero slip, β strictly inside the cone, ψ = 0, η = 0
    let m = unit_particle();
    let s = Surface::planar(0.5);
    let q = DVector::from_vec(vec![2.0, 0.0, 0.0]);
    let inputs = StepInputs {
        h: 1.0,
        q_prev: q.clone(),
        q_cur: q.clone(),
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let gamma_val = G; // supporting the weight
    let mut sol = plain_solution(q, 1, 2);
    sol.gamma = DVector::from_vec(vec![gamma_val]);
    sol.beta = DVector::from_vec(vec![0.1 * s.mu * gamma_val, 0.1 * s.mu * gamma_val]);
    let kkt = contact_kkt(&m, &s, &inputs, &sol);
    assert!(kkt.g1.amax() < 1e-15, "g1 holds with ψ = η = 0 at zero slip");
    assert!(kkt.g2[0] > 0.0, "strictly inside the friction cone");
    assert_eq!(kkt.max_complementarity(), 0.0);
}

#[test]
fn contact_kkt_sliding_foot() {
    // sliding at speed v: ψ = v, the opposing direction is active at the
    // cone boundary, all products vanish
    let m = unit_particle();
    let s = Surface::planar(0.5);
    let h = 1.0;
    let v = 0.8;
    let q_cur = DVector::from_vec(vec![0.0, 0.0, 0.0]);
    let q_next = DVector::from_vec(vec![v * h, 0.0, 0.0]);
    let inputs = StepInputs {
        h,
        q_prev: q_cur.clone(),
        q_cur,
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let gamma_val = G;
    let mut sol = plain_solution(q_next, 1, 2);
    sol.gamma = DVector::from_vec(vec![gamma_val]);
    // +x slip: direction 0 (+x) has η = 2v, β = 0; direction 1 (−x) active
    sol.psi = DVector::from_vec(vec![v]);
    sol.eta = DVector::from_vec(vec![2.0 * v, 0.0]);
    sol.beta = DVector::from_vec(vec![0.0, s.mu * gamma_val]);
    let kkt = contact_kkt(&m, &s, &inputs, &sol);
    assert!(kkt.g1.amax() < 1e-15);
    assert!(kkt.g2[0].abs() < 1e-15, "cone boundary Σβ = μγ");
    assert!(kkt.max_complementarity() < 1e-15);
}

#[test]
fn particle_drop_matches_recurrence_then_impacts() {
    let m = library::load::<f64>("particle").unwrap();
    let s = Surface::planar(0.51);
    let h = 1.0;
    let opts = StepOptions::default();
    let q0 = DVector::from_vec(vec![0.0, 5.0, 0.0]);
    let traj = rollout(&m, &s, &q0, &zeros(3), &vec![zeros(0); 200], h, &opts).unwrap();

    // exact midpoint free-fall recurrence while φ stays positive; the
    // rollout seeds q_{-1} = q_0 − h·q̇_0 = q_0 here, so z_1 = z_0 − G·h²
    let mut z_prev = 5.0;
    let mut z_cur = 5.0 - G * h * h;
    assert!((traj.states[1][1] - z_cur).abs() < 1e-9);
    for k in 2..traj.states.len() {
        let z_next = 2.0 * z_cur - z_prev - G * h * h;
        if z_next < 0.0 {
            break;
        }
        assert!(
            (traj.states[k][1] - z_next).abs() < 1e-8,
            "free-fall deviation at knot {k}"
        );
        z_prev = z_cur;
        z_cur = z_next;
    }
    // after impact: non-penetration and a positive normal impulse
    let min_phi = traj
        .phis
        .iter()
        .map(|p| p.min())
        .fold(f64::INFINITY, f64::min);
    assert!(min_phi >= -1e-6, "penetration: {min_phi}");
    let max_gamma = traj
        .gammas
        .iter()
        .map(|g| g.max())
        .fold(0.0f64, f64::max);
    assert!(max_gamma > 0.5 * 2.0 * G * h, "impact impulse missing");
    // settled at the end
    let last = traj.states.last().unwrap();
    assert!(last[1].abs() < 1e-6, "particle should rest on the ground");
}

#[test]
fn solver_is_deterministic() {
    let m = library::load::<f64>("quad2d").unwrap();
    let s = Surface::planar(0.51);
    let opts = StepOptions::default();
    let q0 = standing_quad(&m, &s);
    let inputs = StepInputs {
        h: 0.5,
        q_prev: q0.clone(),
        q_cur: q0.clone(),
        u_prev: zeros(8),
        u_cur: zeros(8),
    };
    let a = solve_step(&m, &s, &inputs, &opts, None).unwrap();
    let b = solve_step(&m, &s, &inputs, &opts, None).unwrap();
    assert_eq!(a.q_next, b.q_next);
    assert_eq!(a.gamma, b.gamma);
    assert_eq!(a.beta, b.beta);
    assert_eq!(a.residual_norm, b.residual_norm);
}

/// Base height such that feet touch the ground exactly at neutral joints.
fn standing_quad(m: &Model<f64>, s: &Surface<f64>) -> DVector<f64> {
    let mut q = zeros(m.nq());
    let (phi, _) = dynamics::signed_distance(m, s, q.as_slice());
    q[1] = -phi.min();
    q
}

#[test]
fn quad_standing_complementarity() {
    let m = library::load::<f64>("quad2d").unwrap();
    let s = Surface::planar(0.51);
    let opts = StepOptions::default();
    let q0 = standing_quad(&m, &s);
    let traj = rollout(&m, &s, &q0, &zeros(11), &vec![zeros(8); 100], 0.5, &opts).unwrap();
    for k in 0..traj.n_intervals() {
        assert!(traj.comp_viol[k] <= 1e-8, "step {k}: {}", traj.comp_viol[k]);
        assert!(traj.phis[k + 1].min() >= -1e-6);
    }
    // it should settle rather than sink or bounce away
    let z_final = traj.states.last().unwrap()[1];
    assert!((z_final - q0[1]).abs() < 1.0, "standing drifted: {z_final}");
}

#[test]
fn pendulum_energy_bounded_over_long_rollout() {
    let m = library::load::<f64>("pendulum").unwrap();
    let s = Surface::planar(0.5);
    let opts = StepOptions::default();
    let h = 0.5;
    let q0 = DVector::from_vec(vec![0.9]);
    let traj = rollout(&m, &s, &q0, &zeros(1), &vec![zeros(0); 10_000], h, &opts).unwrap();
    let energy: Vec<f64> = (0..traj.n_knots() - 1)
        .map(|k| {
            let v = traj.velocity(k);
            stepper::total_energy(&m, traj.states[k].as_slice(), v.as_slice())
        })
        .collect();
    let e0 = energy[0];
    let amplitude = energy
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
            (lo.min(e), hi.max(e))
        });
    let spread = amplitude.1 - amplitude.0;
    assert!(spread < 0.02 * e0.abs(), "energy spread {spread} vs E0 {e0}");
    // no secular drift: late-window mean stays within the oscillation band
    let tail = &energy[energy.len() - 500..];
    let head = &energy[..500];
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    assert!(
        (mean(tail) - mean(head)).abs() < 0.5 * spread + 1e-12,
        "secular energy drift"
    );
}

#[test]
fn zero_gravity_momentum_conserved() {
    let mut m = library::load::<f64>("particle").unwrap();
    m.gravity = Vector3::zeros();
    let s = Surface::planar(0.5);
    let opts = StepOptions::default();
    let q0 = DVector::from_vec(vec![0.0, 50.0, 0.0]);
    let v0 = DVector::from_vec(vec![0.4, 0.1, 0.0]);
    let traj = rollout(&m, &s, &q0, &v0, &vec![zeros(0); 500], 0.5, &opts).unwrap();
    let mass = m.bodies[0].mass;
    let p0 = traj.velocity(0) * mass;
    for k in 1..traj.n_intervals() {
        let p = traj.velocity(k) * mass;
        assert!((&p - &p0).amax() < 1e-10, "momentum drift at {k}");
    }
}

#[test]
fn rollout_refuses_initial_penetration() {
    let m = library::load::<f64>("particle").unwrap();
    let s = Surface::planar(0.5);
    let opts = StepOptions::default();
    let q0 = DVector::from_vec(vec![0.0, -0.5, 0.0]);
    let err = rollout(&m, &s, &q0, &zeros(3), &[zeros(0)], 1.0, &opts).unwrap_err();
    assert!(err.to_string().contains("penetration"));
}

#[test]
fn si_and_working_unit_models_agree() {
    let working = "\
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
stiffness = 2 mN.mm/rad
damping = 1 mN.mm.ms/rad
";
    let si = "\
[world]
mode = planar
gravity = 0 -9.81 m/s^2

[body]
name = bob
mass = 0.003 kg
inertia = 5e-10 kg.m^2
com = 0 -0.01 m

[joint]
name = hinge
type = revolute
parent = world
child = bob
stiffness = 2e-6 N.m/rad
damping = 1e-9 N.m.s/rad
";
    let mw: Model<f64> = parse_model(working, "w").unwrap();
    let ms: Model<f64> = parse_model(si, "s").unwrap();
    let surf = Surface::planar(0.5);
    let inputs_of = |_m: &Model<f64>| StepInputs {
        h: 0.5,
        q_prev: DVector::from_vec(vec![0.3]),
        q_cur: DVector::from_vec(vec![0.35]),
        u_prev: zeros(0),
        u_cur: zeros(0),
    };
    let q_next = DVector::from_vec(vec![0.41]);
    let rw = del_residual(&mw, &surf, &inputs_of(&mw), &q_next, &zeros(0), &zeros(0), &zeros(0));
    let rs = del_residual(&ms, &surf, &inputs_of(&ms), &q_next, &zeros(0), &zeros(0), &zeros(0));
    let denom = rw.amax().max(1e-30);
    assert!(
        (rw - rs).amax() / denom < 1e-9,
        "unit systems disagree"
    );
}
