//! Initial data presets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{Field, Grid, VectorField};
use crate::model::{Params, SimState};

/// Width parameter of the density blob.
const BLOB_KAPPA: f64 = 1.5;
/// Largest director angle in the variable-density preset.
const ANGLE_AMPLITUDE: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    Rest,
    TaylorGreen2d,
    VariableDensity2d,
    SmallData3d,
    Twin,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::Rest, Scenario::TaylorGreen2d, Scenario::VariableDensity2d, Scenario::SmallData3d, Scenario::Twin];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rest => "rest",
            Scenario::TaylorGreen2d => "taylor-green-2d",
            Scenario::VariableDensity2d => "variable-density-2d",
            Scenario::SmallData3d => "small-data-3d",
            Scenario::Twin => "twin",
        }
    }

    pub fn default_dim(self) -> usize {
        match self {
            Scenario::SmallData3d => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown scenario '{s}'")))
    }
}

/// Knobs shared by the presets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioOptions {
    /// Scales the velocity and the director tilt.
    pub amplitude: f64,
    /// Seeds the random director angle.
    pub seed: u64,
    /// Size of the perturbation between twins.
    pub twin_epsilon: f64,
}

impl Default for ScenarioOptions {
    fn default() -> Self {
        Self { amplitude: 1.0, seed: 0, twin_epsilon: 1e-6 }
    }
}

fn unit(grid: Grid) -> VectorField {
    let mut e = [0.0; 3];
    e[0] = 1.0;
    VectorField::constant(grid, e)
}

/// `m1 + (m2 − m1) exp(κ(Σ cos(x_i − π) − dim))`: equal to `m2` at the box
/// centre and close to `m1` near the corners.
pub fn density_blob(grid: Grid, m1: f64, m2: f64) -> Field {
    let dim = grid.dim();
    Field::from_fn(grid, |x| {
        let s: f64 = x.iter().take(dim).map(|c| (c - PI).cos()).sum::<f64>() - dim as f64;
        m1 + (m2 - m1) * (BLOB_KAPPA * s).exp()
    })
}

/// Taylor–Green cell `(sin x cos y, −cos x sin y[, 0])`, with a `cos z`
/// factor in 3D.
pub fn taylor_green(grid: Grid, amplitude: f64) -> VectorField {
    let dim = grid.dim();
    VectorField::from_fn(grid, |x| {
        let z = if dim == 3 { x[2].cos() } else { 1.0 };
        [amplitude * x[0].sin() * x[1].cos() * z, -amplitude * x[0].cos() * x[1].sin() * z, 0.0]
    })
}

/// Smooth angle field from random low modes, bounded by `max_angle`.
fn random_angle(grid: Grid, seed: u64, max_angle: f64) -> Field {
    let dim = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    let zr = if dim == 3 { -2i64..=2 } else { 0..=0 };
    for kx in -2i64..=2 {
        for ky in -2i64..=2 {
            for kz in zr.clone() {
                if kx * kx + ky * ky + kz * kz == 0 {
                    continue;
                }
                let a: f64 = rng.random_range(-1.0..1.0);
                let phase: f64 = rng.random_range(0.0..2.0 * PI);
                modes.push(([kx as f64, ky as f64, kz as f64], a, phase));
            }
        }
    }
    let norm: f64 = modes.iter().map(|m| m.1.abs()).sum();
    Field::from_fn(grid, |x| {
        let s: f64 = modes.iter().map(|(k, a, ph)| a * (k[0] * x[0] + k[1] * x[1] + k[2] * x[2] + ph).cos()).sum();
        max_angle * s / norm
    })
}

fn director_from_angle(theta: &Field) -> VectorField {
    let grid = *theta.grid();
    let dim = grid.dim();
    let mut comps = vec![theta.map(f64::cos), theta.map(f64::sin)];
    if dim == 3 {
        comps.push(Field::zeros(grid));
    }
    VectorField::from_components(comps).expect("components")
}

/// Initial state of a preset; `Twin` returns the unperturbed member.
pub fn initial_state(scenario: Scenario, grid: Grid, params: &Params, opts: &ScenarioOptions) -> Result<SimState> {
    params.validate()?;
    let (m1, m2) = (params.m1, params.m2);
    let a = opts.amplitude;
    let state = match scenario {
        Scenario::Rest => SimState::rest(grid, 0.5 * (m1 + m2)),
        Scenario::TaylorGreen2d => {
            require_dim(scenario, grid, 2)?;
            SimState::new(Field::constant(grid, m1), taylor_green(grid, a), unit(grid), 0.0)?
        }
        Scenario::VariableDensity2d => {
            require_dim(scenario, grid, 2)?;
            let theta = random_angle(grid, opts.seed, ANGLE_AMPLITUDE * a);
            SimState::new(density_blob(grid, m1, m2), taylor_green(grid, a), director_from_angle(&theta), 0.0)?
        }
        Scenario::SmallData3d => {
            require_dim(scenario, grid, 3)?;
            let theta = random_angle(grid, opts.seed, ANGLE_AMPLITUDE * a);
            SimState::new(density_blob(grid, m1, m2), taylor_green(grid, 0.5 * a), director_from_angle(&theta), 0.0)?
        }
        Scenario::Twin => {
            let base = if grid.dim() == 3 { Scenario::SmallData3d } else { Scenario::VariableDensity2d };
            initial_state(base, grid, params, opts)?
        }
    };
    Ok(state)
}

fn require_dim(scenario: Scenario, grid: Grid, dim: usize) -> Result<()> {
    if grid.dim() != dim {
        return Err(Error::InvalidGrid(format!("scenario {scenario} needs a {dim}-dimensional grid")));
    }
    Ok(())
}

/// Two states whose velocities differ by `ε·w` for a fixed divergence-free
/// `w` of unit amplitude and whose director angles differ by `ε cos(x − y)`.
pub fn twin_pair(grid: Grid, params: &Params, opts: &ScenarioOptions) -> Result<(SimState, SimState)> {
    let base = initial_state(Scenario::Twin, grid, params, opts)?;
    let eps = opts.twin_epsilon;
    let dim = grid.dim();
    let mut other = base.clone();
    let w = VectorField::from_fn(grid, |x| {
        if dim == 3 {
            [x[1].cos(), x[2].sin(), x[0].cos()]
        } else {
            [x[1].cos(), x[0].sin(), 0.0]
        }
    });
    other.u = base.u.zip_map(&w, |u, w| u + eps * w);
    let tilt = Field::from_fn(grid, |x| eps * (x[0] - x[1]).cos());
    // Rotate d in the (d0, d1) plane by the tilt; |d| is unchanged.
    let (c, s) = (tilt.map(f64::cos), tilt.map(f64::sin));
    let d0 = base.d.component(0);
    let d1 = base.d.component(1);
    let n = grid.len();
    let mut r0 = vec![0.0; n];
    let mut r1 = vec![0.0; n];
    for i in 0..n {
        let (a, b) = (d0.values()[i], d1.values()[i]);
        r0[i] = c.values()[i] * a - s.values()[i] * b;
        r1[i] = s.values()[i] * a + c.values()[i] * b;
    }
    let mut comps = vec![Field::from_values(grid, r0)?, Field::from_values(grid, r1)?];
    if dim == 3 {
        comps.push(base.d.component(2).clone());
    }
    other.d = VectorField::from_components(comps)?;
    Ok((base, other))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::divergence;

    #[test]
    fn names_roundtrip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!("vortex".parse::<Scenario>().is_err());
        assert_eq!(Scenario::SmallData3d.default_dim(), 3);
    }

    #[test]
    fn presets_respect_bounds() {
        let p = Params::default();
        let opts = ScenarioOptions::default();
        for s in Scenario::ALL {
            let grid = Grid::torus(s.default_dim(), 16).unwrap();
            let st = initial_state(s, grid, &p, &opts).unwrap();
            assert!(st.rho.min() >= p.m1 && st.rho.max() <= p.m2);
            assert!(divergence(&st.u).max_abs() < 1e-12);
            assert!((st.d.max_magnitude() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn blob_attains_both_bounds_approximately() {
        let g = Grid::torus(2, 32).unwrap();
        let rho = density_blob(g, 1.0, 2.0);
        assert!((rho.max() - 2.0).abs() < 1e-14);
        assert!(rho.min() < 1.01);
    }

    #[test]
    fn presets_are_seed_deterministic() {
        let p = Params::default();
        let g = Grid::torus(2, 16).unwrap();
        let a = initial_state(Scenario::VariableDensity2d, g, &p, &ScenarioOptions::default()).unwrap();
        let b = initial_state(Scenario::VariableDensity2d, g, &p, &ScenarioOptions::default()).unwrap();
        let c = initial_state(Scenario::VariableDensity2d, g, &p, &ScenarioOptions { seed: 9, ..Default::default() })
            .unwrap();
        assert_eq!(a, b);
        assert_ne!(a.d, c.d);
    }

    #[test]
    fn twins_differ_by_epsilon() {
        let p = Params::default();
        let g = Grid::torus(2, 16).unwrap();
        let opts = ScenarioOptions { twin_epsilon: 1e-6, ..Default::default() };
        let (a, b) = twin_pair(g, &p, &opts).unwrap();
        let du = a.u.zip_map(&b.u, |x, y| x - y).max_magnitude();
        assert!(du > 0.5e-6 && du < 2e-6);
        assert_eq!(a.rho, b.rho);
        assert!((b.d.max_magnitude() - 1.0).abs() < 1e-14);
        assert!(divergence(&b.u).max_abs() < 1e-12);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let p = Params::default();
        let g = Grid::torus(3, 8).unwrap();
        assert!(initial_state(Scenario::TaylorGreen2d, g, &p, &ScenarioOptions::default()).is_err());
    }

    #[test]
    fn amplitude_scales_velocity() {
        let p = Params::default();
        let g = Grid::torus(3, 16).unwrap();
        let full = initial_state(Scenario::SmallData3d, g, &p, &ScenarioOptions::default()).unwrap();
        let half =
            initial_state(Scenario::SmallData3d, g, &p, &ScenarioOptions { amplitude: 0.5, ..Default::default() })
                .unwrap();
        assert!((full.u.max_magnitude() - 2.0 * half.u.max_magnitude()).abs() < 1e-14);
        assert_eq!(full.rho, half.rho);
    }
}
