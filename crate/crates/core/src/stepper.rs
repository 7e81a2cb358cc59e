//! First-order IMEX time stepping.
//!
//! One step updates the density along frozen-velocity characteristics, then
//! the director with implicit diffusion, then the velocity with an implicit
//! viscous term. The momentum solve uses the fresh density and stress.
//!
//! The variable-density momentum system
//! `ρ(u − uⁿ)/dt − Δu + ∇p = −ρ uⁿ·∇uⁿ + F_el`, `∇·u = 0`
//! is solved by the fixed-point iteration
//! `u ← P (ρ̄/dt − Δ)⁻¹ [ρ̄uⁿ/dt + F + (ρ̄ − ρ)(u − uⁿ)/dt]`
//! with `ρ̄` the midrange of `ρ`. The map contracts with factor at most
//! `(max ρ − min ρ)/(max ρ + min ρ)`, and is exact in one pass when `ρ` is
//! constant.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{divergence, project_spectra, wavenumber_sq, Field, Spectrum, VectorField};
use crate::model::{advection, check_density_floor, director_explicit, elastic_force, Params, SimState};
use crate::transport::{advect_density, VelocityHistory};

pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const FIXED_POINT_MAX_ITER: usize = 50;
pub const CFL_LIMIT: f64 = 0.9;
pub const DIVERGENCE_TOL: f64 = 1e-9;

/// Director update: `(d̂ⁿ + dt N̂) / (1 + dt|k|²)` with
/// `N = −u·∇d − f(d)` evaluated at the current state.
pub fn step_director(state: &SimState, params: &Params, dt: f64) -> VectorField {
    let explicit = director_explicit(&state.u, &state.d, params.eta);
    let grid = *state.grid();
    let comps = state
        .d
        .components()
        .iter()
        .zip(explicit.components())
        .map(|(dc, nc)| {
            let mut s = Spectrum::of(dc);
            let n = Spectrum::of(nc);
            for (i, (c, e)) in s.coeffs_mut().iter_mut().zip(n.coeffs()).enumerate() {
                *c = (*c + dt * e) / (1.0 + dt * wavenumber_sq(&grid, i));
            }
            s.to_physical()
        })
        .collect();
    VectorField::from_components(comps).expect("components")
}

fn max_abs_diff(a: &[Spectrum], b: &[Spectrum]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.coeffs().iter().zip(y.coeffs()).map(|(p, q)| (p - q).norm()))
        .fold(0.0, f64::max)
}

fn max_abs(a: &[Spectrum]) -> f64 {
    a.iter().flat_map(|x| x.coeffs().iter().map(|c| c.norm())).fold(0.0, f64::max)
}

/// Velocity update with the state's density and director; the returned field
/// is divergence-free and band-limited to the resolved modes.
pub fn step_velocity(state: &SimState, params: &Params, dt: f64) -> Result<VectorField> {
    check_density_floor(&state.rho, params)?;
    let grid = *state.grid();
    let dim = grid.dim();
    let rho = state.rho.values();
    let rho_bar = 0.5 * (state.rho.min() + state.rho.max());

    let adv = advection(&state.u, &state.u);
    let force = elastic_force(&state.d);
    // Explicit part ρ̄uⁿ/dt − ρ uⁿ·∇uⁿ + F_el, truncated.
    let base: Vec<Spectrum> = (0..dim)
        .map(|a| {
            let vals: Vec<f64> = state
                .u
                .component(a)
                .values()
                .iter()
                .zip(adv.component(a).values())
                .zip(force.component(a).values())
                .zip(rho)
                .map(|(((u, c), f), r)| rho_bar * u / dt - r * c + f)
                .collect();
            Spectrum::of(&Field::from_values(grid, vals).expect("grid length")).truncated()
        })
        .collect();
    let denom: Vec<f64> = (0..grid.len()).map(|i| rho_bar / dt + wavenumber_sq(&grid, i)).collect();
    let solve = |rhs: &mut Vec<Spectrum>| {
        for s in rhs.iter_mut() {
            for (c, d) in s.coeffs_mut().iter_mut().zip(&denom) {
                *c /= d;
            }
        }
        project_spectra(rhs);
    };

    let mut current = base.clone();
    solve(&mut current);
    let variable = state.rho.max() > state.rho.min();
    if variable {
        let un = state.u.components();
        let mut converged = false;
        for _ in 0..FIXED_POINT_MAX_ITER {
            let mut next = base.clone();
            for a in 0..dim {
                let ua = current[a].to_physical();
                let vals: Vec<f64> = ua
                    .values()
                    .iter()
                    .zip(un[a].values())
                    .zip(rho)
                    .map(|((u, u0), r)| (rho_bar - r) * (u - u0) / dt)
                    .collect();
                let corr = Spectrum::of(&Field::from_values(grid, vals).expect("grid length")).truncated();
                next[a].add_assign(&corr);
            }
            solve(&mut next);
            let inc = max_abs_diff(&next, &current);
            let scale = max_abs(&next);
            current = next;
            if inc <= FIXED_POINT_TOL * scale || inc == 0.0 {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::StepFailure {
                t: state.t,
                reason: format!("momentum fixed point did not converge in {FIXED_POINT_MAX_ITER} iterations"),
            });
        }
    }
    for s in current.iter_mut() {
        // Roundoff can leave a tiny imaginary zero mode; keep the field real.
        let zero = &mut s.coeffs_mut()[0];
        *zero = Complex64::new(zero.re, 0.0);
    }
    VectorField::from_components(current.iter().map(Spectrum::to_physical).collect())
}

/// Courant number `max|u|·dt/h`.
pub fn courant(u: &VectorField, dt: f64) -> f64 {
    u.max_magnitude() * dt / u.grid().spacing()
}

/// One full step: density, director, momentum.
pub fn step(state: &SimState, params: &Params, dt: f64) -> Result<SimState> {
    let c = courant(&state.u, dt);
    if c > CFL_LIMIT {
        return Err(Error::Cfl { courant: c });
    }
    let history = VelocityHistory::frozen(state.u.clone(), state.t, state.t + dt);
    let rho = advect_density(&state.rho, &history, state.t, dt)?;
    let d = step_director(state, params, dt);
    let mid = SimState { rho, u: state.u.clone(), d, t: state.t };
    let u = step_velocity(&mid, params, dt)?;
    Ok(SimState { rho: mid.rho, u, d: mid.d, t: state.t + dt })
}

/// One step, retried once as two half steps if the momentum solve fails.
pub fn step_with_retry(state: &SimState, params: &Params, dt: f64) -> Result<SimState> {
    match step(state, params, dt) {
        Err(Error::StepFailure { .. }) => {
            let half = step(state, params, 0.5 * dt)?;
            step(&half, params, 0.5 * dt)
        }
        other => other,
    }
}

/// Bounds checked after every step of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantBounds {
    pub rho_min: f64,
    pub rho_max: f64,
    pub director_max: f64,
}

impl InvariantBounds {
    pub fn new(params: &Params, d0: &VectorField) -> Self {
        Self { rho_min: params.m1, rho_max: params.m2, director_max: d0.max_magnitude().max(1.0) + 10.0 * params.dt }
    }

    pub fn check(&self, state: &SimState) -> Result<()> {
        let violation = |what: String| Err(Error::InvariantViolation { t: state.t, what });
        if !(state.rho.is_finite() && state.u.is_finite() && state.d.is_finite()) {
            return violation("non-finite values in state".into());
        }
        let div = divergence(&state.u).max_abs();
        if div > DIVERGENCE_TOL {
            return violation(format!("max |div u| = {div:e} exceeds {DIVERGENCE_TOL:e}"));
        }
        let slack = 1e-12 * self.rho_max.abs().max(1.0);
        let (lo, hi) = (state.rho.min(), state.rho.max());
        if lo < self.rho_min - slack || hi > self.rho_max + slack {
            return violation(format!(
                "density range [{lo}, {hi}] leaves [{}, {}]",
                self.rho_min, self.rho_max
            ));
        }
        let dmax = state.d.max_magnitude();
        if dmax > self.director_max {
            return violation(format!("max |d| = {dmax} exceeds {}", self.director_max));
        }
        Ok(())
    }
}

/// Integrate from `state0` to `params.t_end` with step `params.dt`.
///
/// Step `k` ends at `t = k·dt`, so a run resumed from a saved state follows
/// the same time grid as an uninterrupted one. `hook` sees the starting state
/// and then every state whose step index is a multiple of `interval`, plus the
/// final state; it receives the step index alongside.
pub fn run(
    state0: SimState,
    params: &Params,
    interval: usize,
    mut hook: impl FnMut(&SimState, usize) -> Result<()>,
) -> Result<SimState> {
    params.validate()?;
    if interval == 0 {
        return Err(Error::InvalidParameter("diagnostics interval must be positive".into()));
    }
    let dt = params.dt;
    let k0 = (state0.t / dt).round();
    if (state0.t - k0 * dt).abs() > 1e-9 * (1.0 + state0.t.abs()) {
        return Err(Error::InvalidParameter(format!("start time {} is not on the dt = {dt} grid", state0.t)));
    }
    let k0 = k0 as usize;
    let k_end = (params.t_end / dt).round() as usize;
    let bounds = InvariantBounds::new(params, &state0.d);
    bounds.check(&state0).or_else(|e| match e {
        // Initial data need not be exactly projected; only bounds matter here.
        Error::InvariantViolation { ref what, .. } if what.starts_with("max |div u|") => Ok(()),
        e => Err(e),
    })?;
    hook(&state0, k0)?;
    let mut state = state0;
    for k in k0..k_end {
        let mut next = step_with_retry(&state, params, dt)?;
        next.t = (k + 1) as f64 * dt;
        bounds.check(&next)?;
        state = next;
        if (k + 1) % interval == 0 || k + 1 == k_end {
            hook(&state, k + 1)?;
        }
    }
    Ok(state)
}
