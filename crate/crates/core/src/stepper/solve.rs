//! One-step NCP solve: primal-dual Newton on the relaxed KKT system with the
//! complementarity products driven to their floor over a geometric homotopy
//! schedule, mirroring the optimizer's slack relaxation.
//!
//! Contacts whose gap cannot close within the step are pruned from the
//! system and given the exact separated-contact multipliers (all impulses
//! zero); a post-solve penetration check falls back to the full contact set
//! if the pruning guess was wrong.

use super::{
    d2_discrete_lagrangian, discrete_force, discrete_lagrangian_s, lift_slice, mid_and_rate,
    slip_rates, StepInputs, StepSolution,
};
use crate::ad::{gradient_nested, seed, Dual, Scalar};
use crate::dynamics;
use crate::kinematics;
use crate::model::Model;
use crate::real::{lit, Real};
use crate::surface::Surface;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Stepper options. Multiplier products are relaxed to a parameter `s`
/// driven from `s_init` down to a floor derived from `comp_tol` by the
/// geometric ratio `s_ratio`.
#[derive(Clone, Debug)]
pub struct StepOptions<T: Real> {
    /// ∞-norm tolerance on the equality residual rows.
    pub newton_tol: T,
    /// Bound on each complementarity inner product at an accepted step.
    pub comp_tol: T,
    /// Newton iteration cap per homotopy stage.
    pub max_iters_per_stage: usize,
    pub s_init: T,
    pub s_ratio: T,
    /// Allowed signed-distance violation at accepted configurations [mm].
    pub penetration_tol: T,
    /// Fraction-to-boundary factor keeping the iterates interior.
    pub fraction_to_boundary: T,
}

impl<T: Real> Default for StepOptions<T> {
    fn default() -> Self {
        StepOptions {
            newton_tol: lit(1e-8),
            comp_tol: lit(1e-8),
            max_iters_per_stage: 200,
            s_init: lit(1e-2),
            s_ratio: lit(0.1),
            penetration_tol: lit(1e-6),
            fraction_to_boundary: lit(0.995),
        }
    }
}

#[derive(Error, Debug)]
pub enum StepError<T: Real> {
    #[error("step {step}: Newton did not converge (residual {residual:?})")]
    NonConvergence {
        step: usize,
        residual: T,
        best: Box<StepSolution<T>>,
    },
    #[error("step {step}: linear solve failed (singular KKT system)")]
    IllConditioned { step: usize },
    #[error("rollout starts in penetration (min φ = {phi:?} mm)")]
    InitialPenetration { phi: T },
    #[error("loop-constraint projection stalled at ‖c‖ = {residual:?}")]
    ProjectionFailed { residual: T },
}

impl<T: Real> StepError<T> {
    pub(crate) fn at_step(self, k: usize) -> Self {
        match self {
            StepError::NonConvergence { residual, best, .. } => StepError::NonConvergence {
                step: k,
                residual,
                best,
            },
            StepError::IllConditioned { .. } => StepError::IllConditioned { step: k },
            other => other,
        }
    }
}

/// Variable layout inside the step's unknown vector (contact blocks sized by
/// the active contact subset).
struct Layout {
    n: usize,
    nc: usize,
    m: usize,
    md: usize,
}

impl Layout {
    fn q(&self) -> std::ops::Range<usize> {
        0..self.n
    }
    fn lambda(&self) -> std::ops::Range<usize> {
        self.n..self.n + self.nc
    }
    fn gamma(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc;
        o..o + self.m
    }
    fn beta(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc + self.m;
        o..o + self.md
    }
    fn psi(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc + self.m + self.md;
        o..o + self.m
    }
    fn eta(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc + 2 * self.m + self.md;
        o..o + self.md
    }
    fn w(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc + 2 * self.m + 2 * self.md;
        o..o + self.m
    }
    fn v(&self) -> std::ops::Range<usize> {
        let o = self.n + self.nc + 3 * self.m + 2 * self.md;
        o..o + self.m
    }
    fn total(&self) -> usize {
        self.n + self.nc + 4 * self.m + 2 * self.md
    }
    /// Smooth equality row count (dyn, loop, g1, gap, cone).
    fn n_smooth(&self) -> usize {
        self.n + self.nc + self.md + 2 * self.m
    }
}

struct StepContext<'a, T: Real> {
    model: &'a Model<T>,
    surface: &'a Surface<T>,
    inputs: &'a StepInputs<T>,
    /// D₂L_d(h, q_prev, q_cur) + ½F_d(h, q_prev, q_cur, u_prev): the part of
    /// the DEL residual no unknown touches.
    fixed: Vec<T>,
    /// Loop Jacobian at the trailing interval midpoint.
    c_prev: DMatrix<T>,
    /// Contacts participating in this step's system.
    active: Vec<usize>,
    layout: Layout,
}

/// Scalar potential whose q_next-gradient is the multiplier-force part of
/// the DEL residual: Φ = λᵀc(mid) + Σ_active γ_a φ_a(q_next) + βᵀτ(q_next),
/// so ∇Φ = ½C(mid)ᵀλ + N(q_next)ᵀγ + P(q_next)ᵀβ.
fn force_potential<S: Scalar>(
    ctx: &StepContext<'_, S::Base>,
    q_cur: &[S],
    q_next: &[S],
    lambda: &[S],
    gamma: &[S],
    beta: &[S],
) -> S {
    let model = ctx.model;
    let surface = ctx.surface;
    let h = S::from_base(ctx.inputs.h);
    let mut phi_total = S::zero();
    if ctx.layout.nc > 0 {
        let (mid, _) = mid_and_rate(h, q_cur, q_next);
        let c = kinematics::loop_residual(model, &mid);
        for (ci, &l) in c.iter().zip(lambda) {
            phi_total += *ci * l;
        }
    }
    if !ctx.active.is_empty() {
        let points = kinematics::contact_positions(model, q_next);
        let dirs = surface.directions();
        for (ai, &c) in ctx.active.iter().enumerate() {
            let p = &points[c];
            phi_total += (p.z - S::from_base(surface.height)) * gamma[ai];
            for (j, dir) in dirs.iter().enumerate() {
                phi_total += p.dot(&kinematics::lift3::<S>(dir)) * beta[ai * dirs.len() + j];
            }
        }
    }
    phi_total
}

/// Smooth equality rows [dyn; loop; g1; gap; cone], generic so one dual pass
/// per q_next coordinate yields the corresponding Jacobian columns.
#[allow(clippy::too_many_arguments)]
fn smooth_rows<S: Scalar>(
    ctx: &StepContext<'_, S::Base>,
    q_next: &[S],
    lambda: &[S],
    gamma: &[S],
    beta: &[S],
    psi: &[S],
    eta: &[S],
    w: &[S],
    v: &[S],
) -> Vec<S> {
    let model = ctx.model;
    let surface = ctx.surface;
    let lay = &ctx.layout;
    let h = S::from_base(ctx.inputs.h);
    let q_cur = lift_slice::<S>(ctx.inputs.q_cur.as_slice());
    let u_cur = lift_slice::<S>(ctx.inputs.u_cur.as_slice());
    let half = S::constant(0.5);

    let mut rows = Vec::with_capacity(lay.n_smooth());
    // dyn: fixed + D₁L_d + ∇Φ + ½F_d(cur) + ½C_prevᵀλ
    let d1 = super::d1_discrete_lagrangian(model, h, &q_cur, q_next);
    let lam_d: Vec<Dual<S>> = lambda.iter().map(|&x| Dual::constant(x)).collect();
    let gam_d: Vec<Dual<S>> = gamma.iter().map(|&x| Dual::constant(x)).collect();
    let bet_d: Vec<Dual<S>> = beta.iter().map(|&x| Dual::constant(x)).collect();
    let q_cur_d: Vec<Dual<S>> = q_cur.iter().map(|&x| Dual::constant(x)).collect();
    let grad = if lay.nc > 0 || !ctx.active.is_empty() {
        gradient_nested(q_next, |qn| {
            force_potential(ctx, &q_cur_d, qn, &lam_d, &gam_d, &bet_d)
        })
    } else {
        vec![S::zero(); lay.n]
    };
    let f_cur = discrete_force(model, h, &q_cur, q_next, &u_cur);
    let mut dyn_rows: Vec<S> = ctx
        .fixed
        .iter()
        .enumerate()
        .map(|(i, &c)| S::from_base(c) + d1[i] + grad[i] + half * f_cur[i])
        .collect();
    if lay.nc > 0 {
        for i in 0..lay.n {
            let mut acc = S::zero();
            for (r, &l) in lambda.iter().enumerate() {
                acc += S::from_base(ctx.c_prev[(r, i)]) * l;
            }
            dyn_rows[i] += half * acc;
        }
    }
    rows.extend(dyn_rows);
    // loop: c at the interval midpoint
    if lay.nc > 0 {
        let (mid_cur, _) = mid_and_rate(h, &q_cur, q_next);
        rows.extend(kinematics::loop_residual(model, &mid_cur));
    }
    if lay.m > 0 {
        let d = surface.n_directions();
        let slip_all = slip_rates(model, surface, h, &q_cur, q_next);
        // g1: ψ ⊕ slip − η
        for (ai, &c) in ctx.active.iter().enumerate() {
            for j in 0..d {
                rows.push(psi[ai] + slip_all[c * d + j] - eta[ai * d + j]);
            }
        }
        // gap: φ(q_next) − w
        let points = kinematics::contact_positions(model, q_next);
        for (ai, &c) in ctx.active.iter().enumerate() {
            rows.push(points[c].z - S::from_base(surface.height) - w[ai]);
        }
        // cone: μγ − Σβ − v
        let mu = S::from_base(surface.mu);
        for ai in 0..lay.m {
            let mut g2 = mu * gamma[ai] - v[ai];
            for j in 0..d {
                g2 -= beta[ai * d + j];
            }
            rows.push(g2);
        }
    }
    rows
}

fn split<'x, T: Real>(lay: &Layout, x: &'x DVector<T>) -> [&'x [T]; 8] {
    let s = x.as_slice();
    [
        &s[lay.q()],
        &s[lay.lambda()],
        &s[lay.gamma()],
        &s[lay.beta()],
        &s[lay.psi()],
        &s[lay.eta()],
        &s[lay.w()],
        &s[lay.v()],
    ]
}

/// Full residual: smooth rows followed by the relaxed product rows.
fn residual<T: Real>(ctx: &StepContext<'_, T>, x: &DVector<T>, s: T) -> DVector<T> {
    let lay = &ctx.layout;
    let [q, lambda, gamma, beta, psi, eta, w, v] = split(lay, x);
    let mut out = DVector::zeros(lay.total());
    let smooth = smooth_rows::<T>(ctx, q, lambda, gamma, beta, psi, eta, w, v);
    for (i, val) in smooth.into_iter().enumerate() {
        out[i] = val;
    }
    let mut row = lay.n_smooth();
    for c in 0..lay.m {
        out[row] = gamma[c] * w[c] - s;
        row += 1;
    }
    for c in 0..lay.m {
        out[row] = psi[c] * v[c] - s;
        row += 1;
    }
    for j in 0..lay.md {
        out[row] = beta[j] * eta[j] - s;
        row += 1;
    }
    out
}

fn jacobian<T: Real>(ctx: &StepContext<'_, T>, x: &DVector<T>) -> DMatrix<T> {
    let lay = &ctx.layout;
    let [q, lambda, gamma, beta, psi, eta, w, v] = split(lay, x);
    let mut jac = DMatrix::zeros(lay.total(), lay.total());

    // ∂(smooth rows)/∂q_next by one dual pass per coordinate.
    let lam_d: Vec<Dual<T>> = lambda.iter().map(|&x| Dual::constant(x)).collect();
    let gam_d: Vec<Dual<T>> = gamma.iter().map(|&x| Dual::constant(x)).collect();
    let bet_d: Vec<Dual<T>> = beta.iter().map(|&x| Dual::constant(x)).collect();
    let psi_d: Vec<Dual<T>> = psi.iter().map(|&x| Dual::constant(x)).collect();
    let eta_d: Vec<Dual<T>> = eta.iter().map(|&x| Dual::constant(x)).collect();
    let w_d: Vec<Dual<T>> = w.iter().map(|&x| Dual::constant(x)).collect();
    let v_d: Vec<Dual<T>> = v.iter().map(|&x| Dual::constant(x)).collect();
    for col in 0..lay.n {
        let q_seed = seed(q, col);
        let rows = smooth_rows::<Dual<T>>(
            ctx, &q_seed, &lam_d, &gam_d, &bet_d, &psi_d, &eta_d, &w_d, &v_d,
        );
        for (r, val) in rows.into_iter().enumerate() {
            jac[(r, col)] = val.eps;
        }
    }

    // Multiplier columns are analytic.
    let model = ctx.model;
    let surface = ctx.surface;
    let d = surface.n_directions();
    if lay.nc > 0 {
        let half = lit::<T>(0.5);
        let c_cur = dynamics::loop_jacobian_mid(model, ctx.inputs.q_cur.as_slice(), q);
        let sum = (&ctx.c_prev + &c_cur) * half;
        for i in 0..lay.n {
            for (jc, col) in lay.lambda().enumerate() {
                jac[(i, col)] = sum[(jc, i)];
            }
        }
    }
    if lay.m > 0 {
        let (_, n_mat) = dynamics::signed_distance(model, surface, q);
        let basis = dynamics::friction_basis(model, surface, q);
        for i in 0..lay.n {
            for (ai, col) in lay.gamma().enumerate() {
                jac[(i, col)] = n_mat[(ctx.active[ai], i)];
            }
            for (jj, col) in lay.beta().enumerate() {
                let full_row = ctx.active[jj / d] * d + (jj % d);
                jac[(i, col)] = basis.jacobian[(full_row, i)];
            }
        }
        let g1_off = lay.n + lay.nc;
        for row in 0..lay.md {
            let c = row / d;
            jac[(g1_off + row, lay.psi().start + c)] = T::one();
            jac[(g1_off + row, lay.eta().start + row)] = -T::one();
        }
        let gap_off = g1_off + lay.md;
        for c in 0..lay.m {
            jac[(gap_off + c, lay.w().start + c)] = -T::one();
        }
        let cone_off = gap_off + lay.m;
        for c in 0..lay.m {
            jac[(cone_off + c, lay.gamma().start + c)] = surface.mu;
            for j in 0..d {
                jac[(cone_off + c, lay.beta().start + c * d + j)] = -T::one();
            }
            jac[(cone_off + c, lay.v().start + c)] = -T::one();
        }
        // product rows
        let mut row = lay.n_smooth();
        for c in 0..lay.m {
            jac[(row, lay.gamma().start + c)] = w[c];
            jac[(row, lay.w().start + c)] = gamma[c];
            row += 1;
        }
        for c in 0..lay.m {
            jac[(row, lay.psi().start + c)] = v[c];
            jac[(row, lay.v().start + c)] = psi[c];
            row += 1;
        }
        for j in 0..lay.md {
            jac[(row, lay.beta().start + j)] = eta[j];
            jac[(row, lay.eta().start + j)] = beta[j];
            row += 1;
        }
    }
    jac
}

/// Largest step in direction `dx` keeping the sign-constrained variables
/// at least `(1 − τ)` of their current value.
fn fraction_to_boundary<T: Real>(lay: &Layout, x: &DVector<T>, dx: &DVector<T>, tau: T) -> T {
    let mut alpha = T::one();
    let mut clip = |range: std::ops::Range<usize>| {
        for i in range {
            if dx[i] < T::zero() {
                let limit = -tau * x[i] / dx[i];
                if limit < alpha {
                    alpha = limit;
                }
            }
        }
    };
    clip(lay.gamma());
    clip(lay.beta());
    clip(lay.psi());
    clip(lay.eta());
    clip(lay.w());
    clip(lay.v());
    alpha
}

/// Expand the active-subset unknowns into a full solution; pruned contacts
/// get the exact separated-contact multipliers (zero impulses, ψ matching
/// the slip magnitude so g₁ holds with η ≥ 0).
fn solution_from<T: Real>(
    ctx: &StepContext<'_, T>,
    x: &DVector<T>,
    iters: usize,
) -> StepSolution<T> {
    let lay = &ctx.layout;
    let model = ctx.model;
    let surface = ctx.surface;
    let m_all = model.n_contacts();
    let d = surface.n_directions();
    let [q, lambda, gamma_a, beta_a, psi_a, eta_a, _, _] = split(lay, x);

    let mut gamma = DVector::zeros(m_all);
    let mut beta = DVector::zeros(m_all * d);
    let mut psi = DVector::zeros(m_all);
    let mut eta = DVector::zeros(m_all * d);
    for (ai, &c) in ctx.active.iter().enumerate() {
        gamma[c] = gamma_a[ai];
        psi[c] = psi_a[ai];
        for j in 0..d {
            beta[c * d + j] = beta_a[ai * d + j];
            eta[c * d + j] = eta_a[ai * d + j];
        }
    }
    if m_all > 0 && ctx.active.len() < m_all {
        let slip = slip_rates::<T>(
            model,
            surface,
            ctx.inputs.h,
            ctx.inputs.q_cur.as_slice(),
            q,
        );
        for c in 0..m_all {
            if ctx.active.contains(&c) {
                continue;
            }
            let mut worst = T::zero();
            for j in 0..d {
                worst = worst.max(-slip[c * d + j]);
            }
            psi[c] = worst;
            for j in 0..d {
                eta[c * d + j] = psi[c] + slip[c * d + j];
            }
        }
    }

    let sol = StepSolution {
        q_next: DVector::from_row_slice(q),
        lambda: DVector::from_row_slice(lambda),
        gamma,
        beta,
        psi,
        eta,
        residual_norm: T::zero(),
        comp_violation: T::zero(),
        newton_iters: iters,
    };
    let kkt = super::contact_kkt(model, surface, ctx.inputs, &sol);
    let r = super::del_residual(
        model,
        surface,
        ctx.inputs,
        &sol.q_next,
        &sol.lambda,
        &sol.gamma,
        &sol.beta,
    );
    StepSolution {
        residual_norm: r.amax().max(kkt.loop_residual.amax()).max(kkt.g1.amax()),
        comp_violation: kkt.max_complementarity(),
        ..sol
    }
}

/// Solve one variational contact step. `warm` (the previous step's solution)
/// shortens the homotopy; failed warm or pruned attempts fall back to the
/// full cold solve. Deterministic for fixed inputs and options.
pub fn solve_step<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    inputs: &StepInputs<T>,
    options: &StepOptions<T>,
    warm: Option<&StepSolution<T>>,
) -> Result<StepSolution<T>, StepError<T>> {
    let m_all = model.n_contacts();
    let active = prune_contacts(model, surface, inputs);
    let pruned = active.len() < m_all;

    let first = attempt(model, surface, inputs, options, warm, &active);
    let need_fallback = match &first {
        Err(_) => pruned || warm.is_some(),
        Ok(sol) if pruned => {
            // verify the pruned contacts stayed separated
            let (phi, _) = dynamics::signed_distance(model, surface, sol.q_next.as_slice());
            (0..m_all).any(|c| !active.contains(&c) && phi[c] < -options.penetration_tol)
        }
        Ok(_) => false,
    };
    if !need_fallback {
        return first;
    }
    let all: Vec<usize> = (0..m_all).collect();
    match attempt(model, surface, inputs, options, warm, &all) {
        Ok(sol) => Ok(sol),
        Err(_) if warm.is_some() => attempt(model, surface, inputs, options, None, &all),
        Err(e) => Err(e),
    }
}

/// Contacts that could plausibly touch within this step: keep any whose
/// extrapolated gap is within a conservative closing margin.
fn prune_contacts<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    inputs: &StepInputs<T>,
) -> Vec<usize> {
    let m_all = model.n_contacts();
    if m_all == 0 {
        return Vec::new();
    }
    let (phi_prev, _) = dynamics::signed_distance(model, surface, inputs.q_prev.as_slice());
    let (phi_cur, _) = dynamics::signed_distance(model, surface, inputs.q_cur.as_slice());
    let extrap: Vec<T> = inputs
        .q_cur
        .iter()
        .zip(inputs.q_prev.iter())
        .map(|(&c, &p)| c + c - p)
        .collect();
    let (phi_ext, _) = dynamics::signed_distance(model, surface, &extrap);
    (0..m_all)
        .filter(|&c| {
            let margin = lit::<T>(4.0) * (phi_cur[c] - phi_prev[c]).abs() + lit::<T>(1e-2);
            phi_ext[c] <= margin
        })
        .collect()
}

fn s_floor<T: Real>(options: &StepOptions<T>, lay: &Layout) -> T {
    let pairs = lay.m.max(lay.md).max(1);
    options.comp_tol / (lit::<T>(2.0) * lit::<T>(pairs as f64))
}

fn attempt<T: Real>(
    model: &Model<T>,
    surface: &Surface<T>,
    inputs: &StepInputs<T>,
    options: &StepOptions<T>,
    warm: Option<&StepSolution<T>>,
    active: &[usize],
) -> Result<StepSolution<T>, StepError<T>> {
    let d = surface.n_directions();
    let lay = Layout {
        n: model.nq(),
        nc: model.n_loop_rows(),
        m: active.len(),
        md: active.len() * d,
    };
    let h = inputs.h;
    assert!(h > T::zero(), "solve_step: h must be positive");

    // Constant residual part from the trailing interval.
    let q_prev = inputs.q_prev.as_slice();
    let q_cur = inputs.q_cur.as_slice();
    let mut fixed = d2_discrete_lagrangian::<T>(model, h, q_prev, q_cur);
    let f_prev = discrete_force::<T>(model, h, q_prev, q_cur, inputs.u_prev.as_slice());
    let half = lit::<T>(0.5);
    for i in 0..lay.n {
        fixed[i] += half * f_prev[i];
    }
    let c_prev = if lay.nc > 0 {
        dynamics::loop_jacobian_mid(model, q_prev, q_cur)
    } else {
        DMatrix::zeros(0, lay.n)
    };
    let ctx = StepContext {
        model,
        surface,
        inputs,
        fixed,
        c_prev,
        active: active.to_vec(),
        layout: lay,
    };
    let lay = &ctx.layout;

    // Initial iterate: constant-velocity extrapolation plus positive
    // multiplier seeds (product-consistent where cheap).
    let mut x = DVector::zeros(lay.total());
    for i in 0..lay.n {
        x[i] = inputs.q_cur[i] + inputs.q_cur[i] - inputs.q_prev[i];
    }
    let floor = s_floor(options, lay);
    let mut s0 = options.s_init;
    if let Some(wsol) = warm {
        for (i, col) in lay.lambda().enumerate() {
            x[col] = wsol.lambda[i];
        }
        s0 = wsol.comp_violation.max(floor).min(options.s_init);
    }
    if lay.m > 0 {
        let (phi, _) = dynamics::signed_distance(model, surface, &x.as_slice()[lay.q()]);
        let clampv = |val: T, lo: T, hi: T| val.max(lo).min(hi);
        let sqrt_s = s0.sqrt();
        for (ai, col) in lay.w().enumerate() {
            x[col] = phi[ctx.active[ai]].max(lit(1e-6));
        }
        for (ai, col) in lay.gamma().enumerate() {
            let cold = s0 / x[lay.w().start + ai];
            let init = warm.map_or(cold, |wsol| wsol.gamma[ctx.active[ai]]);
            x[col] = clampv(init, lit(1e-10), T::one());
        }
        for (jj, col) in lay.beta().enumerate() {
            let full = ctx.active[jj / d] * d + (jj % d);
            let init = warm.map_or(sqrt_s, |wsol| wsol.beta[full]);
            x[col] = clampv(init, lit(1e-10), T::one());
        }
        for (ai, col) in lay.psi().enumerate() {
            let init = warm.map_or(sqrt_s, |wsol| wsol.psi[ctx.active[ai]]);
            x[col] = clampv(init, lit(1e-10), T::one());
        }
        for (jj, col) in lay.eta().enumerate() {
            let full = ctx.active[jj / d] * d + (jj % d);
            let init = warm.map_or(sqrt_s, |wsol| wsol.eta[full]);
            x[col] = clampv(init, lit(1e-10), T::one());
        }
        for (ai, col) in lay.v().enumerate() {
            x[col] = clampv(s0 / x[lay.psi().start + ai], lit(1e-10), T::one());
        }
    }

    // Geometric homotopy schedule down to the floor.
    let mut stages = Vec::new();
    let mut s = s0.max(floor);
    while s > floor * lit::<T>(1.0001) {
        stages.push(s);
        s *= options.s_ratio;
    }
    stages.push(floor);

    let mut total_iters = 0usize;
    for (si, &s) in stages.iter().enumerate() {
        let last = si + 1 == stages.len();
        let stage_tol = if last {
            options.newton_tol
        } else {
            options.newton_tol.max(s * lit(1e-2))
        };
        let mut converged = false;
        for _ in 0..options.max_iters_per_stage {
            let f = residual(&ctx, &x, s);
            let smooth_norm = f.rows(0, lay.n_smooth()).amax();
            let prod_norm = if lay.total() > lay.n_smooth() {
                f.rows(lay.n_smooth(), lay.total() - lay.n_smooth()).amax()
            } else {
                T::zero()
            };
            if smooth_norm <= stage_tol && prod_norm <= s {
                converged = true;
                break;
            }
            total_iters += 1;
            let jac = jacobian(&ctx, &x);
            let dx = jac
                .lu()
                .solve(&(-&f))
                .ok_or(StepError::IllConditioned { step: 0 })?;
            let alpha_max =
                fraction_to_boundary(lay, &x, &dx, options.fraction_to_boundary).min(T::one());
            let merit0 = f.norm_squared();
            let mut alpha = alpha_max;
            let mut accepted = false;
            for _ in 0..60 {
                let x_trial = &x + &dx * alpha;
                let f_trial = residual(&ctx, &x_trial, s);
                let merit = f_trial.norm_squared();
                if merit <= (T::one() - lit::<T>(1e-4) * alpha) * merit0 {
                    x = x_trial;
                    accepted = true;
                    break;
                }
                alpha *= half;
                if alpha < lit(1e-14) {
                    break;
                }
            }
            if !accepted {
                let best = solution_from(&ctx, &x, total_iters);
                return Err(StepError::NonConvergence {
                    step: 0,
                    residual: best.residual_norm,
                    best: Box::new(best),
                });
            }
        }
        if !converged {
            let best = solution_from(&ctx, &x, total_iters);
            return Err(StepError::NonConvergence {
                step: 0,
                residual: best.residual_norm,
                best: Box::new(best),
            });
        }
    }
    Ok(solution_from(&ctx, &x, total_iters))
}
