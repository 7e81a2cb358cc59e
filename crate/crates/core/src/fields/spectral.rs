//! Fourier coefficients and the spectral operators built on them.
//!
//! Forward transforms divide by the node count, so the zero mode of a field is
//! its mean and `f(x) = Σ_k c_k exp(i k·x)`. Odd derivatives drop the Nyquist
//! mode; the Laplacian keeps it.

use rustfft::num_complex::Complex64;

use super::{fft, Field, Grid, VectorField};
use crate::error::{Error, Result};

/// Fourier coefficients of a real field.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, coeffs: vec![Complex64::default(); grid.len()] }
    }

    /// Transform without validating the samples.
    pub(crate) fn of(field: &Field) -> Self {
        let grid = *field.grid();
        let mut coeffs: Vec<Complex64> =
            field.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft::forward(&grid, &mut coeffs);
        Self { grid, coeffs }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of an integer wavevector.
    pub fn coefficient(&self, k: [i64; 3]) -> Option<Complex64> {
        self.grid.spectral_index(k).map(|i| self.coeffs[i])
    }

    /// Back to samples; the imaginary part (roundoff for real fields) is dropped.
    pub fn to_physical(&self) -> Field {
        let mut data = self.coeffs.clone();
        fft::inverse(&self.grid, &mut data);
        Field { grid: self.grid, values: data.iter().map(|c| c.re).collect() }
    }

    /// Zero every mode outside the 2/3-rule box.
    pub fn truncate(&mut self) {
        let grid = self.grid;
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            if !grid.is_resolved(grid.wavevector(i)) {
                *c = Complex64::default();
            }
        }
    }

    pub fn truncated(mut self) -> Self {
        self.truncate();
        self
    }

    pub fn derivative(&self, axis: usize) -> Spectrum {
        let grid = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, &c)| c * Complex64::new(0.0, derivative_multiplier(&grid, i, axis)))
            .collect();
        Spectrum { grid, coeffs }
    }

    pub fn laplacian(&self) -> Spectrum {
        let grid = self.grid;
        let coeffs =
            self.coeffs.iter().enumerate().map(|(i, &c)| c * -wavenumber_sq(&grid, i)).collect();
        Spectrum { grid, coeffs }
    }

    /// Multiply every coefficient by a real per-mode factor.
    pub fn apply(&mut self, mut factor: impl FnMut(usize) -> f64) {
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c *= factor(i);
        }
    }

    /// `∫ f^2` via Parseval.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.volume()
    }

    pub fn add_assign(&mut self, other: &Spectrum) {
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += b;
        }
    }
}

/// Physical wavenumber along `axis` used for odd derivatives (Nyquist zeroed).
pub(crate) fn derivative_multiplier(grid: &Grid, idx: usize, axis: usize) -> f64 {
    let j = grid.multi_index(idx)[axis];
    if 2 * j == grid.n() {
        0.0
    } else {
        grid.mode_number(j) as f64 * grid.wave_scale()
    }
}

/// `|k|^2` in physical units.
pub(crate) fn wavenumber_sq(grid: &Grid, idx: usize) -> f64 {
    let k = grid.wavevector(idx);
    let s = grid.wave_scale();
    k.iter().take(grid.dim()).map(|&c| (c as f64 * s).powi(2)).sum()
}

/// Fourier coefficients of a field, rejecting non-finite samples.
pub fn to_spectral(f: &Field) -> Result<Spectrum> {
    if let Some(index) = f.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(Spectrum::of(f))
}

pub fn derivative(f: &Field, axis: usize) -> Result<Field> {
    let dim = f.grid().dim();
    if axis >= dim {
        return Err(Error::AxisOutOfRange { axis, dim });
    }
    Ok(Spectrum::of(f).derivative(axis).to_physical())
}

pub fn laplacian(f: &Field) -> Field {
    Spectrum::of(f).laplacian().to_physical()
}

pub fn gradient(f: &Field) -> VectorField {
    let s = Spectrum::of(f);
    let comps = (0..f.grid().dim()).map(|a| s.derivative(a).to_physical()).collect();
    VectorField { comps }
}

pub fn divergence(v: &VectorField) -> Field {
    let grid = *v.grid();
    let mut acc = Spectrum::zeros(grid);
    for (a, c) in v.components().iter().enumerate() {
        acc.add_assign(&Spectrum::of(c).derivative(a));
    }
    acc.to_physical()
}

/// 2/3-rule truncation of a field.
pub fn dealias(f: &Field) -> Field {
    Spectrum::of(f).truncated().to_physical()
}

/// Project spectra of a vector field onto divergence-free modes, in place.
pub(crate) fn project_spectra(spectra: &mut [Spectrum]) {
    let grid = *spectra[0].grid();
    let dim = grid.dim();
    for i in 0..grid.len() {
        let mut k = [0.0; 3];
        for (a, ka) in k.iter_mut().enumerate().take(dim) {
            *ka = derivative_multiplier(&grid, i, a);
        }
        let k2: f64 = k.iter().map(|c| c * c).sum();
        if k2 == 0.0 {
            continue;
        }
        let mut kv = Complex64::default();
        for a in 0..dim {
            kv += spectra[a].coeffs[i] * k[a];
        }
        let kv = kv / k2;
        for a in 0..dim {
            spectra[a].coeffs[i] -= kv * k[a];
        }
    }
}

/// L2-orthogonal projection onto divergence-free fields.
pub fn leray_project(v: &VectorField) -> VectorField {
    let mut spectra: Vec<Spectrum> = v.components().iter().map(Spectrum::of).collect();
    project_spectra(&mut spectra);
    VectorField { comps: spectra.iter().map(Spectrum::to_physical).collect() }
}

fn pointwise_lp(values: impl Iterator<Item = f64>, p: f64, cell: f64) -> Result<f64> {
    if p == 2.0 {
        Ok((values.map(|v| v * v).sum::<f64>() * cell).sqrt())
    } else if p == 4.0 {
        Ok((values.map(|v| v.powi(4)).sum::<f64>() * cell).powf(0.25))
    } else if p == f64::INFINITY {
        Ok(values.fold(0.0, |m, v| m.max(v.abs())))
    } else {
        Err(Error::UnsupportedNorm(format!("L^{p}")))
    }
}

/// `‖f‖_{L^p}` for `p ∈ {2, 4, ∞}` by trapezoid quadrature.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    pointwise_lp(f.values().iter().copied(), p, f.grid().cell_volume())
}

/// `‖ |v| ‖_{L^p}` of a vector field.
pub fn vector_lp_norm(v: &VectorField, p: f64) -> Result<f64> {
    let mag = v.norm_sq();
    pointwise_lp(mag.values().iter().map(|s| s.sqrt()), p, v.grid().cell_volume())
}

fn seminorm_sq(s: &Spectrum, order: u32) -> Result<f64> {
    let grid = *s.grid();
    let weight = |i: usize| -> f64 {
        match order {
            1 => (0..grid.dim()).map(|a| derivative_multiplier(&grid, i, a).powi(2)).sum(),
            _ => wavenumber_sq(&grid, i).powi(2),
        }
    };
    if order != 1 && order != 2 {
        return Err(Error::UnsupportedNorm(format!("H^{order} seminorm")));
    }
    Ok(s.coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| weight(i) * c.norm_sqr())
        .sum::<f64>()
        * grid.volume())
}

/// `‖∇f‖_{L^2}` (order 1) or `‖Δf‖_{L^2}` (order 2) via spectral multipliers.
pub fn h_seminorm(f: &Field, order: u32) -> Result<f64> {
    Ok(seminorm_sq(&Spectrum::of(f), order)?.sqrt())
}

pub fn vector_h_seminorm(v: &VectorField, order: u32) -> Result<f64> {
    let mut total = 0.0;
    for c in v.components() {
        total += seminorm_sq(&Spectrum::of(c), order)?;
    }
    Ok(total.sqrt())
}

/// Full `H^2` norm: `(Σ_{|β| ≤ 2} ‖D^β v‖^2)^{1/2}`.
pub fn h2_norm(v: &VectorField) -> f64 {
    let grid = *v.grid();
    let mut total = 0.0;
    for c in v.components() {
        let s = Spectrum::of(c);
        total += s
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k2 = wavenumber_sq(&grid, i);
                (1.0 + k2 + k2 * k2) * z.norm_sqr()
            })
            .sum::<f64>();
    }
    (total * grid.volume()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn g2(n: usize) -> Grid {
        Grid::torus(2, n).unwrap()
    }

    fn random_band_limited(grid: Grid, band: i64, seed: u64) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes = Vec::new();
        for kx in -band..=band {
            for ky in -band..=band {
                let kz_range = if grid.dim() == 3 { -band..=band } else { 0..=0 };
                for kz in kz_range {
                    modes.push(([kx, ky, kz], rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)));
                }
            }
        }
        Field::from_fn(grid, |x| {
            modes
                .iter()
                .map(|(k, a, ph)| a * (k[0] as f64 * x[0] + k[1] as f64 * x[1] + k[2] as f64 * x[2] + ph).cos())
                .sum()
        })
    }

    #[test]
    fn constant_field_has_only_mean_mode() {
        let g = g2(16);
        let s = to_spectral(&Field::constant(g, 2.5)).unwrap();
        assert!((s.coeffs()[0].re - 2.5).abs() < 1e-14);
        assert!(s.coeffs()[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn sine_has_two_conjugate_modes() {
        let g = g2(16);
        let s = to_spectral(&Field::from_fn(g, |x| x[0].sin())).unwrap();
        let plus = s.coefficient([1, 0, 0]).unwrap();
        let minus = s.coefficient([-1, 0, 0]).unwrap();
        assert!((plus - Complex64::new(0.0, -0.5)).norm() < 1e-14);
        assert!((minus - plus.conj()).norm() < 1e-14);
        let others = s
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let k = g.wavevector(*i);
                k != [1, 0, 0] && k != [-1, 0, 0]
            })
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max);
        assert!(others < 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let g = g2(8);
        let mut f = Field::zeros(g);
        f.values_mut()[5] = f64::NAN;
        assert_eq!(to_spectral(&f), Err(Error::NonFinite { index: 5 }));
    }

    #[test]
    fn roundtrip_random_band_limited() {
        for dim in [2, 3] {
            let g = Grid::torus(dim, 16).unwrap();
            let f = random_band_limited(g, 4, 7);
            let back = to_spectral(&f).unwrap().to_physical();
            let scale = f.max_abs();
            let err = f.zip_map(&back, |a, b| a - b).max_abs();
            assert!(err <= 1e-12 * scale, "dim {dim}: {err}");
        }
    }

    #[test]
    fn hermitian_symmetry() {
        let g = Grid::torus(3, 8).unwrap();
        let s = to_spectral(&random_band_limited(g, 2, 3)).unwrap();
        for i in 0..g.len() {
            let k = g.wavevector(i);
            if let Some(c) = s.coefficient([-k[0], -k[1], -k[2]]) {
                assert!((c - s.coeffs()[i].conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = g2(32);
        let f = Field::from_fn(g, |x| x[0].sin());
        let df = derivative(&f, 0).unwrap();
        let exact = Field::from_fn(g, |x| x[0].cos());
        assert!(df.zip_map(&exact, |a, b| a - b).max_abs() <= 1e-10);
        assert_eq!(derivative(&f, 2), Err(Error::AxisOutOfRange { axis: 2, dim: 2 }));
    }

    #[test]
    fn laplacian_cases() {
        let g = g2(32);
        assert!(laplacian(&Field::constant(g, 4.0)).max_abs() < 1e-14);
        let f = Field::from_fn(g, |x| (2.0 * x[0]).sin() * x[1].sin());
        let lap = laplacian(&f);
        assert!(lap.zip_map(&f, |a, b| a + 5.0 * b).max_abs() < 1e-10);
    }

    #[test]
    fn leray_examples() {
        let g = g2(32);
        let grad = VectorField::from_fn(g, |x| [x[0].cos(), 0.0, 0.0]);
        assert!(leray_project(&grad).max_magnitude() < 1e-12);

        let shear = VectorField::from_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let p = leray_project(&shear);
        assert!(p.zip_map(&shear, |a, b| a - b).max_magnitude() < 1e-12);

        let mixed = VectorField::from_fn(g, |x| [x[0].cos(), x[1].cos(), 0.0]);
        assert!(leray_project(&mixed).max_magnitude() < 1e-12);
    }

    #[test]
    fn leray_result_is_divergence_free_and_idempotent() {
        let g = Grid::torus(3, 16).unwrap();
        let v = VectorField::from_components(vec![
            random_band_limited(g, 3, 1),
            random_band_limited(g, 3, 2),
            random_band_limited(g, 3, 3),
        ])
        .unwrap();
        let p = leray_project(&v);
        assert!(divergence(&p).max_abs() < 1e-10);
        let pp = leray_project(&p);
        assert!(pp.zip_map(&p, |a, b| a - b).max_magnitude() < 1e-12);
    }

    #[test]
    fn derivative_commutes_with_projection_on_solenoidal_fields() {
        let g = g2(32);
        let psi = random_band_limited(g, 5, 11);
        let s = Spectrum::of(&psi);
        // Stream function: u = (∂y ψ, -∂x ψ).
        let u = VectorField::from_components(vec![
            s.derivative(1).to_physical(),
            s.derivative(0).to_physical().scaled(-1.0),
        ])
        .unwrap();
        for axis in 0..2 {
            let du = u.map_components(|c| derivative(c, axis).unwrap());
            let pdu = leray_project(&du);
            let dpu = leray_project(&u).map_components(|c| derivative(c, axis).unwrap());
            assert!(pdu.zip_map(&dpu, |a, b| a - b).max_magnitude() < 1e-10);
        }
    }

    #[test]
    fn norm_examples() {
        let g = g2(32);
        let s = Field::from_fn(g, |x| x[0].sin());
        assert!((lp_norm(&s, 2.0).unwrap().powi(2) - 2.0 * PI * PI).abs() < 1e-10);
        let ss = Field::from_fn(g, |x| x[0].sin() * x[1].sin());
        assert!((lp_norm(&ss, 4.0).unwrap().powi(4) - 9.0 * PI * PI / 16.0).abs() < 1e-10);
        let z = Field::zeros(g);
        for p in [2.0, 4.0, f64::INFINITY] {
            assert_eq!(lp_norm(&z, p).unwrap(), 0.0);
        }
        assert_eq!(h_seminorm(&z, 1).unwrap(), 0.0);
        assert_eq!(h_seminorm(&z, 2).unwrap(), 0.0);
        assert!(lp_norm(&z, 3.0).is_err());
        assert!(h_seminorm(&z, 3).is_err());
        // ‖∇ sin x sin y‖² = 2π², ‖Δ sin x sin y‖² = 4π².
        assert!((h_seminorm(&ss, 1).unwrap().powi(2) - 2.0 * PI * PI).abs() < 1e-10);
        assert!((h_seminorm(&ss, 2).unwrap().powi(2) - 4.0 * PI * PI).abs() < 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn parseval(seed in 0u64..10_000) {
            let g = g2(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f = Field::from_values(g, values).unwrap();
            let grid_sum = lp_norm(&f, 2.0).unwrap().powi(2);
            let spectral = to_spectral(&f).unwrap().l2_sq();
            prop_assert!((grid_sum - spectral).abs() <= 1e-10 * grid_sum.max(1.0));
        }

        #[test]
        fn projection_is_idempotent(seed in 0u64..10_000) {
            let g = g2(16);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut comp = || {
                let v: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                Field::from_values(g, v).unwrap()
            };
            let v = VectorField::from_components(vec![comp(), comp()]).unwrap();
            let p = leray_project(&v);
            let pp = leray_project(&p);
            prop_assert!(pp.zip_map(&p, |a, b| a - b).max_magnitude() <= 1e-12);
            prop_assert!(divergence(&p).max_abs() <= 1e-10);
        }
    }
}
