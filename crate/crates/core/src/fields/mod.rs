//! Periodic grids and the fields sampled on them.
//!
//! Every field lives on a [`Grid`]: a periodic box `[0, L)^dim` with `n` nodes
//! per axis, stored row-major with axis 0 (x) slowest. Spectral views and the
//! differential operators built on them are in [`spectral`].

mod fft;
pub mod spectral;

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub use spectral::{
    dealias, derivative, divergence, gradient, h2_norm, h_seminorm, laplacian, leray_project,
    lp_norm, to_spectral, vector_h_seminorm, vector_lp_norm, Spectrum,
};
pub(crate) use spectral::{project_spectra, wavenumber_sq};

/// Periodic box descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(Self { dim, n, length })
    }

    /// The standard `[0, 2π)^dim` torus.
    pub fn torus(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, 2.0 * PI)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Multi-index of a linear node index; unused trailing axes are zero.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dim {
            2 => [idx / n, idx % n, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    pub fn linear_index(&self, mi: [usize; 3]) -> usize {
        let n = self.n;
        match self.dim {
            2 => mi[0] * n + mi[1],
            _ => (mi[0] * n + mi[1]) * n + mi[2],
        }
    }

    /// Linear index of a node shifted by integer offsets, wrapped periodically.
    pub fn wrapped_index(&self, mi: [usize; 3], offset: [i64; 3]) -> usize {
        let n = self.n as i64;
        let mut out = [0usize; 3];
        for a in 0..self.dim {
            out[a] = (mi[a] as i64 + offset[a]).rem_euclid(n) as usize;
        }
        self.linear_index(out)
    }

    /// Physical coordinates of a node.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let mi = self.multi_index(idx);
        [mi[0] as f64 * h, mi[1] as f64 * h, mi[2] as f64 * h]
    }

    /// Signed integer wavenumber for FFT index `j` along one axis.
    pub fn mode_number(&self, j: usize) -> i64 {
        if j <= self.n / 2 {
            j as i64
        } else {
            j as i64 - self.n as i64
        }
    }

    /// Integer wavevector of a spectral index.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let mi = self.multi_index(idx);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = self.mode_number(mi[a]);
        }
        k
    }

    /// Spectral index of an integer wavevector, if representable.
    pub fn spectral_index(&self, k: [i64; 3]) -> Option<usize> {
        let n = self.n as i64;
        let mut mi = [0usize; 3];
        for a in 0..self.dim {
            if k[a].abs() > n / 2 {
                return None;
            }
            mi[a] = k[a].rem_euclid(n) as usize;
        }
        Some(self.linear_index(mi))
    }

    /// Conversion factor from integer to physical wavenumbers, `2π / L`.
    pub fn wave_scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Whether a mode survives 2/3-rule dealiasing.
    pub fn is_resolved(&self, k: [i64; 3]) -> bool {
        k.iter().take(self.dim).all(|&c| 3 * c.unsigned_abs() < self.n as u64)
    }

    /// Largest per-axis integer wavenumber kept by dealiasing.
    pub fn resolved_cutoff(&self) -> i64 {
        (self.n as i64 - 1) / 3
    }
}

/// Real samples of a scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Trapezoid quadrature over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    ///
    /// Panics if the grids differ.
    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "zip_map over different grids");
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// A `dim`-tuple of scalar fields on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<Field>,
}

/// The director `d` is stored like any other vector field.
pub type DirectorField = VectorField;

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { comps: (0..grid.dim()).map(|_| Field::zeros(grid)).collect() }
    }

    /// Constant vector; entries beyond the grid dimension are ignored.
    pub fn constant(grid: Grid, c: [f64; 3]) -> Self {
        Self { comps: (0..grid.dim()).map(|a| Field::constant(grid, c[a])).collect() }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let samples: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        let comps = (0..grid.dim())
            .map(|a| Field { grid, values: samples.iter().map(|s| s[a]).collect() })
            .collect();
        Self { comps }
    }

    pub fn from_components(comps: Vec<Field>) -> Result<Self> {
        let first = comps
            .first()
            .ok_or_else(|| Error::GridMismatch("vector field needs components".into()))?;
        let grid = *first.grid();
        if comps.len() != grid.dim() {
            return Err(Error::GridMismatch(format!(
                "{} components on a {}-dimensional grid",
                comps.len(),
                grid.dim()
            )));
        }
        if comps.iter().any(|c| *c.grid() != grid) {
            return Err(Error::GridMismatch("components live on different grids".into()));
        }
        Ok(Self { comps })
    }

    pub fn grid(&self) -> &Grid {
        self.comps[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, a: usize) -> &Field {
        &self.comps[a]
    }

    pub fn components(&self) -> &[Field] {
        &self.comps
    }

    pub fn components_mut(&mut self) -> &mut [Field] {
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Field> {
        self.comps
    }

    /// Vector value at a node.
    pub fn at(&self, idx: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (a, c) in self.comps.iter().enumerate() {
            v[a] = c.values[idx];
        }
        v
    }

    /// Pointwise `|v|^2`.
    pub fn norm_sq(&self) -> Field {
        let grid = *self.grid();
        let mut out = vec![0.0; grid.len()];
        for c in &self.comps {
            for (o, v) in out.iter_mut().zip(&c.values) {
                *o += v * v;
            }
        }
        Field { grid, values: out }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.norm_sq().max().sqrt()
    }

    /// Pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> Field {
        let grid = *self.grid();
        let mut out = Field::zeros(grid);
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, x), y) in out.values.iter_mut().zip(&a.values).zip(&b.values) {
                *o += x * y;
            }
        }
        out
    }

    pub fn map_components(&self, f: impl Fn(&Field) -> Field) -> Self {
        Self { comps: self.comps.iter().map(f).collect() }
    }

    /// Componentwise combination; panics if the grids differ.
    pub fn zip_map(&self, other: &VectorField, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.zip_map(b, f)).collect() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_components(|c| c.scaled(s))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Field::is_finite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(Grid::torus(2, 8).is_ok());
        assert!(Grid::torus(1, 8).is_err());
        assert!(Grid::torus(4, 8).is_err());
        assert!(Grid::torus(2, 4).is_err());
        assert!(Grid::torus(2, 24).is_err());
        assert!(Grid::new(2, 16, -1.0).is_err());
        assert!(Grid::new(3, 16, f64::NAN).is_err());
    }

    #[test]
    fn index_roundtrip() {
        for dim in [2, 3] {
            let g = Grid::torus(dim, 8).unwrap();
            for i in 0..g.len() {
                assert_eq!(g.linear_index(g.multi_index(i)), i);
                let k = g.wavevector(i);
                assert_eq!(g.spectral_index(k), Some(i));
            }
        }
    }

    #[test]
    fn wrapped_offsets() {
        let g = Grid::torus(2, 8).unwrap();
        assert_eq!(g.wrapped_index([0, 0, 0], [-1, 0, 0]), g.linear_index([7, 0, 0]));
        assert_eq!(g.wrapped_index([7, 7, 0], [1, 2, 0]), g.linear_index([0, 1, 0]));
    }

    #[test]
    fn dealias_cutoff() {
        let g = Grid::torus(2, 32).unwrap();
        assert_eq!(g.resolved_cutoff(), 10);
        assert!(g.is_resolved([10, -10, 0]));
        assert!(!g.is_resolved([11, 0, 0]));
        let g = Grid::torus(2, 64).unwrap();
        assert_eq!(g.resolved_cutoff(), 21);
    }

    #[test]
    fn quadrature_of_constant() {
        let g = Grid::torus(2, 16).unwrap();
        let f = Field::constant(g, 3.0);
        assert!((f.integral() - 3.0 * 4.0 * PI * PI).abs() < 1e-12);
    }
}
