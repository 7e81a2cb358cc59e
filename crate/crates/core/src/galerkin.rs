//! Faedo–Galerkin truncation of the momentum equation in the Stokes
//! eigenbasis, and a reference integrator built on it.
//!
//! On the torus the Stokes eigenfunctions are the real divergence-free
//! Fourier modes `φ = √(2/|Ω|) e cos(k·x)` and `√(2/|Ω|) e sin(k·x)` with
//! `e ⟂ k`, `|e| = 1` and eigenvalue `|k|²`. The velocity `u = Σ g_i φ_i`
//! obeys `A ġ = −b(g) − C g + D` with
//! `A_ij = ∫ρ φ_i·φ_j`, `b_j = Σ_ik B_ik^j g_i g_k`,
//! `B_ik^j = ∫ρ (φ_i·∇φ_k)·φ_j`, `C_ij = ∫∇φ_i:∇φ_j` and
//! `D_j = ∫ Σ_kl (∂_k d·∂_l d) ∂_l φ_j^k`.
//!
//! All integrals are trapezoid sums on the grid, evaluated through FFTs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{Field, Grid, Spectrum, VectorField};
use crate::model::{check_density_floor, component_gradients, stress_spectra, Params, SimState};
use crate::stepper::step_director;
use crate::transport::{advect_density, VelocityHistory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Cos,
    Sin,
}

/// One real Stokes eigenfunction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesMode {
    /// Integer wavevector, first nonzero component positive.
    pub k: [i64; 3],
    /// Polarization index: always 0 in 2D, 0 or 1 in 3D.
    pub polarization: usize,
    /// Unit polarization vector orthogonal to `k`.
    pub e: [f64; 3],
    pub parity: Parity,
    /// Eigenvalue `|k|²` in physical units.
    pub lambda: f64,
    spectral_index: usize,
}

/// The `m` lowest Stokes eigenfunctions on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StokesBasis {
    grid: Grid,
    modes: Vec<StokesMode>,
    /// `√(2/|Ω|)`
    scale: f64,
}

fn canonical(k: [i64; 3]) -> bool {
    k.iter().copied().find(|&c| c != 0).is_some_and(|c| c > 0)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    v.map(|c| c / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn polarizations(dim: usize, k: [i64; 3]) -> Vec<[f64; 3]> {
    let kf = k.map(|c| c as f64);
    if dim == 2 {
        return vec![normalize([-kf[1], kf[0], 0.0])];
    }
    // Cross with the coordinate axis least aligned with k.
    let axis = (0..3).min_by_key(|&a| k[a].abs()).expect("three axes");
    let mut ax = [0.0; 3];
    ax[axis] = 1.0;
    let e1 = normalize(cross(kf, ax));
    let e2 = normalize(cross(normalize(kf), e1));
    vec![e1, e2]
}

fn all_modes(grid: &Grid) -> Vec<StokesMode> {
    let dim = grid.dim();
    let c = grid.resolved_cutoff();
    let s = grid.wave_scale();
    let zr = if dim == 3 { -c..=c } else { 0..=0 };
    let mut modes = Vec::new();
    for kx in -c..=c {
        for ky in -c..=c {
            for kz in zr.clone() {
                let k = [kx, ky, kz];
                if !canonical(k) {
                    continue;
                }
                let lambda = s * s * (kx * kx + ky * ky + kz * kz) as f64;
                let spectral_index = grid.spectral_index(k).expect("resolved modes are representable");
                for (polarization, e) in polarizations(dim, k).into_iter().enumerate() {
                    for parity in [Parity::Cos, Parity::Sin] {
                        modes.push(StokesMode { k, polarization, e, parity, lambda, spectral_index });
                    }
                }
            }
        }
    }
    modes.sort_by(|a, b| {
        let ka = a.k.iter().map(|c| c * c).sum::<i64>();
        let kb = b.k.iter().map(|c| c * c).sum::<i64>();
        ka.cmp(&kb)
            .then(a.k.cmp(&b.k))
            .then(a.polarization.cmp(&b.polarization))
            .then(a.parity.cmp(&b.parity))
    });
    modes
}

/// Number of Stokes modes resolved on a grid.
pub fn available_modes(grid: &Grid) -> usize {
    let side = (2 * grid.resolved_cutoff() + 1) as usize;
    let count = side.pow(grid.dim() as u32) - 1;
    count / 2 * (grid.dim() - 1) * 2
}

pub fn build_basis(grid: Grid, m: usize) -> Result<StokesBasis> {
    let available = available_modes(&grid);
    if m == 0 || m > available {
        return Err(Error::BasisTooLarge { requested: m, available });
    }
    let mut modes = all_modes(&grid);
    modes.truncate(m);
    Ok(StokesBasis { grid, modes, scale: (2.0 / grid.volume()).sqrt() })
}

impl StokesBasis {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[StokesMode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.modes.iter().map(|m| m.lambda))
    }

    /// Samples of `φ_i`.
    pub fn mode_field(&self, i: usize) -> VectorField {
        let mode = self.modes[i];
        let s = self.grid.wave_scale();
        let c = self.scale;
        VectorField::from_fn(self.grid, |x| {
            let phase = s * (mode.k[0] as f64 * x[0] + mode.k[1] as f64 * x[1] + mode.k[2] as f64 * x[2]);
            let w = c * match mode.parity {
                Parity::Cos => phase.cos(),
                Parity::Sin => phase.sin(),
            };
            mode.e.map(|e| w * e)
        })
    }

    fn project_spectra(&self, spectra: &[Spectrum]) -> DVector<f64> {
        let vol = self.grid.volume();
        DVector::from_iterator(
            self.len(),
            self.modes.iter().map(|m| {
                let mut acc = Complex64::default();
                for (a, s) in spectra.iter().enumerate() {
                    acc += s.coeffs()[m.spectral_index] * m.e[a];
                }
                self.scale * vol * match m.parity {
                    Parity::Cos => acc.re,
                    Parity::Sin => -acc.im,
                }
            }),
        )
    }

    /// `g_i = ∫ v·φ_i`.
    pub fn project(&self, v: &VectorField) -> Result<DVector<f64>> {
        if *v.grid() != self.grid {
            return Err(Error::GridMismatch("field and basis live on different grids".into()));
        }
        let spectra: Vec<Spectrum> = v.components().iter().map(Spectrum::of).collect();
        Ok(self.project_spectra(&spectra))
    }

    /// `Σ g_i φ_i`.
    pub fn reconstruct(&self, g: &DVector<f64>) -> VectorField {
        let dim = self.grid.dim();
        let mut spectra = vec![Spectrum::zeros(self.grid); dim];
        for (m, &gi) in self.modes.iter().zip(g.iter()) {
            let half = 0.5 * self.scale * gi;
            let plus = match m.parity {
                Parity::Cos => Complex64::new(half, 0.0),
                Parity::Sin => Complex64::new(0.0, -half),
            };
            let minus_k = m.k.map(|c| -c);
            let mi = self.grid.spectral_index(minus_k).expect("resolved");
            for (a, s) in spectra.iter_mut().enumerate() {
                s.coeffs_mut()[m.spectral_index] += plus * m.e[a];
                s.coeffs_mut()[mi] += plus.conj() * m.e[a];
            }
        }
        VectorField::from_components(spectra.iter().map(Spectrum::to_physical).collect()).expect("components")
    }
}

fn multiply(rho: &Field, v: &VectorField) -> VectorField {
    v.map_components(|c| c.zip_map(rho, |a, r| a * r))
}

/// `A_ij = ∫ρ φ_i·φ_j`, assembled column by column as `P_m(ρφ_j)`.
pub fn mass_matrix(rho: &Field, basis: &StokesBasis) -> Result<DMatrix<f64>> {
    if *rho.grid() != basis.grid {
        return Err(Error::GridMismatch("density and basis live on different grids".into()));
    }
    let m = basis.len();
    let cols: Vec<DVector<f64>> = (0..m)
        .into_par_iter()
        .map(|j| basis.project(&multiply(rho, &basis.mode_field(j))).expect("same grid"))
        .collect();
    let mut a = DMatrix::from_columns(&cols);
    // Symmetrize away roundoff.
    a = (&a + a.transpose()) * 0.5;
    Ok(a)
}

/// `D_j = ∫ Σ_kl (∂_k d·∂_l d) ∂_l φ_j^k`, from the stress spectra.
pub fn elastic_vector(d: &VectorField, basis: &StokesBasis) -> Result<DVector<f64>> {
    if *d.grid() != basis.grid {
        return Err(Error::GridMismatch("director and basis live on different grids".into()));
    }
    let dim = basis.grid.dim();
    let stress = stress_spectra(d);
    let s = basis.grid.wave_scale();
    let vol = basis.grid.volume();
    Ok(DVector::from_iterator(
        basis.len(),
        basis.modes.iter().map(|m| {
            let mut acc = 0.0;
            for k in 0..dim {
                for l in 0..dim {
                    let t = stress[k][l].coeffs()[m.spectral_index];
                    let kl = s * m.k[l] as f64;
                    // ∂_l cos = −k_l sin, ∂_l sin = k_l cos; ∫T sin = −|Ω| Im T̂, ∫T cos = |Ω| Re T̂.
                    acc += m.e[k] * kl * match m.parity {
                        Parity::Cos => t.im,
                        Parity::Sin => t.re,
                    };
                }
            }
            basis.scale * vol * acc
        }),
    ))
}

/// `∫∇φ_i:∇φ_j` by direct quadrature of spectral gradients.
pub fn stiffness_matrix(basis: &StokesBasis) -> DMatrix<f64> {
    let m = basis.len();
    let cell = basis.grid.cell_volume();
    let grads: Vec<Vec<Vec<Field>>> = (0..m).into_par_iter().map(|i| component_gradients(&basis.mode_field(i))).collect();
    let mut c = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut sum = 0.0;
            for (gi, gj) in grads[i].iter().zip(&grads[j]) {
                for (a, b) in gi.iter().zip(gj) {
                    sum += a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>();
                }
            }
            c[(i, j)] = sum * cell;
            c[(j, i)] = sum * cell;
        }
    }
    c
}

/// Projection of `ρ (u·∇)u` for `u = Σ g_i φ_i`: the vector `Σ_ik B_ik^j g_i g_k`.
pub fn advection_vector(rho: &Field, g: &DVector<f64>, basis: &StokesBasis) -> DVector<f64> {
    let u = basis.reconstruct(g);
    advection_of(rho, &u, &u, basis)
}

fn advection_of(rho: &Field, a: &VectorField, b: &VectorField, basis: &StokesBasis) -> DVector<f64> {
    let grid = basis.grid;
    let grads = component_gradients(b);
    let spectra: Vec<Spectrum> = grads
        .iter()
        .map(|gc| {
            let mut out = vec![0.0; grid.len()];
            for (i, gi) in gc.iter().enumerate() {
                for ((o, x), y) in out.iter_mut().zip(a.component(i).values()).zip(gi.values()) {
                    *o += x * y;
                }
            }
            for (o, r) in out.iter_mut().zip(rho.values()) {
                *o *= r;
            }
            Spectrum::of(&Field::from_values(grid, out).expect("grid length"))
        })
        .collect();
    basis.project_spectra(&spectra)
}

/// Explicit advection tensor, `b[(i·m + k)·m + j] = B_ik^j`.
pub fn advection_tensor(rho: &Field, basis: &StokesBasis) -> Vec<f64> {
    let m = basis.len();
    let fields: Vec<VectorField> = (0..m).map(|i| basis.mode_field(i)).collect();
    let rows: Vec<Vec<f64>> = (0..m * m)
        .into_par_iter()
        .map(|ik| {
            let (i, k) = (ik / m, ik % m);
            advection_of(rho, &fields[i], &fields[k], basis).iter().copied().collect()
        })
        .collect();
    rows.concat()
}

/// The explicit ODE system at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinSystem<'a> {
    pub basis: &'a StokesBasis,
    pub a: DMatrix<f64>,
    /// `B_ik^j` at `(i·m + k)·m + j`.
    pub b: Vec<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    pub g: DVector<f64>,
    pub t: f64,
}

/// Assemble `A`, `B`, `C`, `D` for the given density and director, with
/// mode coefficients `g`.
pub fn assemble_coefficients<'a>(
    rho: &Field,
    d: &VectorField,
    g: DVector<f64>,
    basis: &'a StokesBasis,
    t: f64,
) -> Result<GalerkinSystem<'a>> {
    if g.len() != basis.len() {
        return Err(Error::InvalidParameter(format!("{} coefficients for {} modes", g.len(), basis.len())));
    }
    Ok(GalerkinSystem {
        basis,
        a: mass_matrix(rho, basis)?,
        b: advection_tensor(rho, basis),
        c: stiffness_matrix(basis),
        d: elastic_vector(d, basis)?,
        g,
        t,
    })
}

impl GalerkinSystem<'_> {
    /// `Σ_ik B_ik^j g_i g_k` for each `j`.
    pub fn advection(&self, g: &DVector<f64>) -> DVector<f64> {
        let m = self.basis.len();
        let mut out = DVector::zeros(m);
        for i in 0..m {
            for k in 0..m {
                let w = g[i] * g[k];
                if w == 0.0 {
                    continue;
                }
                let row = &self.b[(i * m + k) * m..(i * m + k + 1) * m];
                for (o, b) in out.iter_mut().zip(row) {
                    *o += w * b;
                }
            }
        }
        out
    }
}

fn factor(a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or_else(|| Error::CorruptedState("mass matrix is not positive definite".into()))
}

/// `ġ` solving `A ġ = −Σ B g g − C g + D`.
pub fn galerkin_rhs(system: &GalerkinSystem<'_>) -> Result<DVector<f64>> {
    let rhs = -system.advection(&system.g) - &system.c * &system.g + &system.d;
    Ok(factor(system.a.clone())?.solve(&rhs))
}

/// Coupled reference integrator: density and director advance as in the
/// spectral stepper, the velocity by RK4 on the Galerkin ODE with `A` and
/// `D` frozen over each step.
pub struct ReferenceIntegrator {
    basis: StokesBasis,
    lambda: DVector<f64>,
}

impl ReferenceIntegrator {
    pub fn new(grid: Grid, m: usize) -> Result<Self> {
        let basis = build_basis(grid, m)?;
        let lambda = basis.eigenvalues();
        Ok(Self { basis, lambda })
    }

    pub fn basis(&self) -> &StokesBasis {
        &self.basis
    }

    /// Replace the state's velocity by its projection onto the basis.
    pub fn project_state(&self, state: &SimState) -> Result<(SimState, DVector<f64>)> {
        let g = self.basis.project(&state.u)?;
        let mut s = state.clone();
        s.u = self.basis.reconstruct(&g);
        Ok((s, g))
    }

    pub fn step(&self, state: &SimState, g: &DVector<f64>, params: &Params, dt: f64) -> Result<(SimState, DVector<f64>)> {
        let history = VelocityHistory::frozen(state.u.clone(), state.t, state.t + dt);
        let rho = advect_density(&state.rho, &history, state.t, dt)?;
        check_density_floor(&rho, params)?;
        let d = step_director(state, params, dt);
        let chol = factor(mass_matrix(&rho, &self.basis)?)?;
        let forcing = elastic_vector(&d, &self.basis)?;
        let f = |g: &DVector<f64>| -> DVector<f64> {
            let rhs = -advection_vector(&rho, g, &self.basis) - self.lambda.component_mul(g) + &forcing;
            chol.solve(&rhs)
        };
        let k1 = f(g);
        let k2 = f(&(g + &k1 * (0.5 * dt)));
        let k3 = f(&(g + &k2 * (0.5 * dt)));
        let k4 = f(&(g + &k3 * dt));
        let g_next = g + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let u = self.basis.reconstruct(&g_next);
        Ok((SimState { rho, u, d, t: state.t + dt }, g_next))
    }

    /// Same calling convention as `stepper::run`: the hook sees the
    /// projected initial state, then every `interval`-th state and the last.
    pub fn run(
        &self,
        state0: &SimState,
        params: &Params,
        interval: usize,
        mut hook: impl FnMut(&SimState, usize) -> Result<()>,
    ) -> Result<SimState> {
        params.validate()?;
        if interval == 0 {
            return Err(Error::InvalidParameter("diagnostics interval must be positive".into()));
        }
        let dt = params.dt;
        let k0 = (state0.t / dt).round() as usize;
        let k_end = (params.t_end / dt).round() as usize;
        let (mut state, mut g) = self.project_state(state0)?;
        hook(&state, k0)?;
        for k in k0..k_end {
            let (mut next, g_next) = self.step(&state, &g, params, dt)?;
            next.t = (k + 1) as f64 * dt;
            if !(next.u.is_finite() && next.d.is_finite()) {
                return Err(Error::InvariantViolation { t: next.t, what: "non-finite Galerkin state".into() });
            }
            state = next;
            g = g_next;
            if (k + 1) % interval == 0 || k + 1 == k_end {
                hook(&state, k + 1)?;
            }
        }
        Ok(state)
    }
}

/// Every state of a Galerkin run with `m` modes, from `state0` to `t_end`.
pub fn integrate_reference(state0: &SimState, params: &Params, m: usize) -> Result<Vec<SimState>> {
    let integrator = ReferenceIntegrator::new(*state0.grid(), m)?;
    let mut out = Vec::new();
    integrator.run(state0, params, 1, |s, _| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
