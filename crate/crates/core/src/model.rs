//! Physics of the coupled system: parameters, the Ginzburg–Landau penalty,
//! the elastic stress and the assembled right-hand sides.
//!
//! ```text
//! ρ_t + u·∇ρ = 0
//! ρ(u_t + u·∇u) + ∇p = Δu − ∇·(∇d ⊙ ∇d),   ∇·u = 0
//! d_t + u·∇d = Δd − f(d)
//! F(d) = (|d|² − 1)² / (4η²),   f(d) = ∇F(d) = (|d|² − 1) d / η²
//! ```
//!
//! `(∇d ⊙ ∇d)_ij = ∂_i d · ∂_j d` is a `dim × dim` matrix. Viscosity is 1.

use crate::error::{Error, Result};
use crate::fields::spectral::project_spectra;
use crate::fields::{DirectorField, Field, Grid, Spectrum, VectorField};

/// Physical and numerical parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Penalty length η.
    pub eta: f64,
    /// Lower density bound M1.
    pub m1: f64,
    /// Upper density bound M2.
    pub m2: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self { eta: 0.2, m1: 1.0, m2: 2.0, dt: 1e-3, t_end: 1.0 }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("eta", self.eta)?;
        positive("m1", self.m1)?;
        positive("m2", self.m2)?;
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        if self.m1 > self.m2 {
            return Err(Error::InvalidParameter(format!(
                "density bounds out of order: m1 = {} > m2 = {}",
                self.m1, self.m2
            )));
        }
        Ok(())
    }
}

/// The unknowns `(ρ, u, d)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub rho: Field,
    pub u: VectorField,
    pub d: DirectorField,
    pub t: f64,
}

impl SimState {
    pub fn new(rho: Field, u: VectorField, d: DirectorField, t: f64) -> Result<Self> {
        let grid = *rho.grid();
        if *u.grid() != grid || *d.grid() != grid {
            return Err(Error::GridMismatch("ρ, u and d must share one grid".into()));
        }
        Ok(Self { rho, u, d, t })
    }

    /// `ρ ≡ rho`, `u ≡ 0`, `d ≡ e_1`.
    pub fn rest(grid: Grid, rho: f64) -> Self {
        Self {
            rho: Field::constant(grid, rho),
            u: VectorField::zeros(grid),
            d: VectorField::constant(grid, [1.0, 0.0, 0.0]),
            t: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.rho.grid()
    }
}

/// Pointwise penalty energy density `F(d)`.
pub fn penalty_density(d: &DirectorField, eta: f64) -> Field {
    let s = 1.0 / (4.0 * eta * eta);
    d.norm_sq().map(|m| s * (m - 1.0).powi(2))
}

/// `f(d)` at a single director value.
pub fn penalty_gradient_at(d: [f64; 3], eta: f64) -> [f64; 3] {
    let s = (d.iter().map(|c| c * c).sum::<f64>() - 1.0) / (eta * eta);
    d.map(|c| s * c)
}

/// Pointwise penalty force `f(d) = ∇F(d)`.
pub fn penalty_gradient(d: &DirectorField, eta: f64) -> DirectorField {
    let factor = d.norm_sq().map(|m| (m - 1.0) / (eta * eta));
    d.map_components(|c| c.zip_map(&factor, |v, s| v * s))
}

/// `grads[c][i] = ∂_i v_c`, spectrally.
pub(crate) fn component_gradients(v: &VectorField) -> Vec<Vec<Field>> {
    v.components()
        .iter()
        .map(|c| {
            let s = Spectrum::of(c);
            (0..v.dim()).map(|i| s.derivative(i).to_physical()).collect()
        })
        .collect()
}

/// `(u·∇) v` for each component of `v`, without dealiasing.
fn advection_raw(u: &VectorField, v: &VectorField) -> VectorField {
    let grads = component_gradients(v);
    let grid = *u.grid();
    let comps = grads
        .iter()
        .map(|gc| {
            let mut out = vec![0.0; grid.len()];
            for (i, gi) in gc.iter().enumerate() {
                let ui = u.component(i).values();
                for ((o, a), b) in out.iter_mut().zip(ui).zip(gi.values()) {
                    *o += a * b;
                }
            }
            Field::from_values(grid, out).expect("grid length")
        })
        .collect();
    VectorField::from_components(comps).expect("components")
}

/// Dealiased `(u·∇) v`.
pub fn advection(u: &VectorField, v: &VectorField) -> VectorField {
    advection_raw(u, v).map_components(crate::fields::dealias)
}

/// Spectra of the dealiased stress `∂_i d · ∂_j d`, indexed `[i][j]`.
pub(crate) fn stress_spectra(d: &DirectorField) -> Vec<Vec<Spectrum>> {
    let grads = component_gradients(d);
    let dim = d.dim();
    let grid = *d.grid();
    let mut out: Vec<Vec<Option<Spectrum>>> = vec![vec![None; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let mut t = vec![0.0; grid.len()];
            for gc in &grads {
                for ((o, a), b) in t.iter_mut().zip(gc[i].values()).zip(gc[j].values()) {
                    *o += a * b;
                }
            }
            let s = Spectrum::of(&Field::from_values(grid, t).expect("grid length")).truncated();
            out[j][i] = Some(s.clone());
            out[i][j] = Some(s);
        }
    }
    out.into_iter().map(|row| row.into_iter().map(|s| s.expect("filled")).collect()).collect()
}

/// Elastic body force `−∇·(∇d ⊙ ∇d)`, with component `j` equal to
/// `−Σ_i ∂_i (∂_i d · ∂_j d)`.
pub fn elastic_force(d: &DirectorField) -> VectorField {
    let dim = d.dim();
    let grid = *d.grid();
    let stress = stress_spectra(d);
    let comps = (0..dim)
        .map(|j| {
            let mut acc = Spectrum::zeros(grid);
            for (i, row) in stress.iter().enumerate() {
                acc.add_assign(&row[j].derivative(i));
            }
            acc.apply(|_| -1.0);
            acc.to_physical()
        })
        .collect();
    VectorField::from_components(comps).expect("components")
}

pub(crate) fn check_density_floor(rho: &Field, params: &Params) -> Result<()> {
    let min = rho.min();
    if !(min >= 0.5 * params.m1) {
        return Err(Error::CorruptedState(format!(
            "density minimum {min} below half the lower bound {}",
            params.m1
        )));
    }
    Ok(())
}

/// `P[(Δu − ρ u·∇u − ∇·(∇d ⊙ ∇d)) / ρ]`: the unweighted Leray projection of
/// the momentum tendency. For constant density this is the exact `u_t`.
pub fn momentum_rhs(state: &SimState, params: &Params) -> Result<VectorField> {
    check_density_floor(&state.rho, params)?;
    let adv = advection(&state.u, &state.u);
    let force = elastic_force(&state.d);
    let rho = state.rho.values();
    let mut spectra: Vec<Spectrum> = (0..state.u.dim())
        .map(|a| {
            let lap = crate::fields::laplacian(state.u.component(a));
            let vals: Vec<f64> = lap
                .values()
                .iter()
                .zip(adv.component(a).values())
                .zip(force.component(a).values())
                .zip(rho)
                .map(|(((l, c), f), r)| (l - r * c + f) / r)
                .collect();
            Spectrum::of(&Field::from_values(*state.grid(), vals).expect("grid length"))
                .truncated()
        })
        .collect();
    project_spectra(&mut spectra);
    VectorField::from_components(spectra.iter().map(Spectrum::to_physical).collect())
}

/// `Δd − u·∇d − f(d)`, with the nonlinear part dealiased.
pub fn director_rhs(state: &SimState, eta: f64) -> DirectorField {
    let explicit = director_explicit(&state.u, &state.d, eta);
    let comps = state
        .d
        .components()
        .iter()
        .zip(explicit.components())
        .map(|(dc, ec)| crate::fields::laplacian(dc).zip_map(ec, |a, b| a + b))
        .collect();
    VectorField::from_components(comps).expect("components")
}

/// Dealiased explicit director tendency `−u·∇d − f(d)`.
pub(crate) fn director_explicit(u: &VectorField, d: &DirectorField, eta: f64) -> DirectorField {
    let adv = advection_raw(u, d);
    let pen = penalty_gradient(d, eta);
    adv.zip_map(&pen, |a, p| -(a + p)).map_components(crate::fields::dealias)
}
