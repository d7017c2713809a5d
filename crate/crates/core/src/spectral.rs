//! Quadrature transfer matrices over a frequency grid, vacuum noise ports,
//! and spectral covariance assembly.
//!
//! The quadrature basis is fixed throughout the crate as
//! `(X_s,1, X_s,2, X_i,1, X_i,2)`: amplitude and phase quadratures of the
//! signal field, then of the idler field. Every element emits 4x4 transfer
//! matrices in this basis. Each noise port represents one independent
//! vacuum input with unit spectral variance per quadrature, so the shot
//! noise level of a single field readout is exactly 1.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// 4x4 complex matrix acting on the `(X_s,1, X_s,2, X_i,1, X_i,2)` basis.
pub type Mat4 = Matrix4<Complex64>;
/// 2x2 complex matrix acting on a single field's `(X_1, X_2)` pair.
pub type Mat2 = Matrix2<Complex64>;

fn check_finite(mats: &[Mat4]) -> Result<()> {
    for m in mats {
        for e in m.iter() {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(Error::NumericalSingularity(
                    "transfer matrix contains a non-finite entry".into(),
                ));
            }
        }
    }
    Ok(())
}

/// One 4x4 transfer matrix per grid point.
#[derive(Debug, Clone)]
pub struct QuadratureTransfer {
    grid: FrequencyGrid,
    matrices: Vec<Mat4>,
}

impl QuadratureTransfer {
    pub fn new(grid: FrequencyGrid, matrices: Vec<Mat4>) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::InconsistentState(format!(
                "expected {} matrices for the grid, got {}",
                grid.len(),
                matrices.len()
            )));
        }
        check_finite(&matrices)?;
        Ok(Self { grid, matrices })
    }

    /// The do-nothing element.
    pub fn identity(grid: &FrequencyGrid) -> Self {
        Self {
            grid: grid.clone(),
            matrices: vec![Mat4::identity(); grid.len()],
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &Mat4 {
        &self.matrices[idx]
    }

    pub fn matrices(&self) -> &[Mat4] {
        &self.matrices
    }
}

/// A labelled vacuum input port and its transfer to the output.
#[derive(Debug, Clone)]
pub struct NoisePort {
    label: String,
    matrices: Vec<Mat4>,
}

impl NoisePort {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn matrices(&self) -> &[Mat4] {
        &self.matrices
    }
}

/// The state of a noise network: one transfer per independent vacuum input,
/// all sharing one frequency grid.
#[derive(Debug, Clone)]
pub struct NoisePortSet {
    grid: FrequencyGrid,
    ports: Vec<NoisePort>,
}

impl NoisePortSet {
    pub fn new(grid: FrequencyGrid) -> Self {
        Self { grid, ports: Vec::new() }
    }

    /// Append a port. Labels must be unique and the matrix list must match
    /// the grid length.
    pub fn push_port(&mut self, label: impl Into<String>, matrices: Vec<Mat4>) -> Result<()> {
        let label = label.into();
        if self.ports.iter().any(|p| p.label == label) {
            return Err(Error::InconsistentState(format!(
                "duplicate port label `{label}`"
            )));
        }
        if matrices.len() != self.grid.len() {
            return Err(Error::InconsistentState(format!(
                "port `{label}`: expected {} matrices, got {}",
                self.grid.len(),
                matrices.len()
            )));
        }
        check_finite(&matrices)?;
        self.ports.push(NoisePort { label, matrices });
        Ok(())
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn ports(&self) -> &[NoisePort] {
        &self.ports
    }

    pub fn is_empty(&self) -> bool {
        self.ports.is_empty()
    }

    /// Quadrature noise spectrum with every port driven by uncorrelated
    /// unit-variance vacuum: `S(Ω) = Σ_k T_k(Ω) T_k(Ω)^†`.
    pub fn covariance(&self) -> Result<SpectralCovariance> {
        covariance_from_ports(self)
    }
}

/// Assemble the output covariance from a port set.
pub fn covariance_from_ports(ports: &NoisePortSet) -> Result<SpectralCovariance> {
    if ports.is_empty() {
        return Err(Error::InvalidArgument(
            "covariance of an empty port set is undefined".into(),
        ));
    }
    let n = ports.grid.len();
    let mut mats = vec![Mat4::zeros(); n];
    for port in &ports.ports {
        for (acc, t) in mats.iter_mut().zip(port.matrices.iter()) {
            *acc += t * t.adjoint();
        }
    }
    SpectralCovariance::new(ports.grid.clone(), mats)
}

/// Per-frequency 4x4 Hermitian covariance of the quadrature vector, in
/// shot-noise units (vacuum variance = 1 on the diagonal).
#[derive(Debug, Clone)]
pub struct SpectralCovariance {
    grid: FrequencyGrid,
    matrices: Vec<Mat4>,
}

impl SpectralCovariance {
    /// Validates Hermiticity (1e-12 absolute, entrywise) and positive
    /// semidefiniteness (eigenvalues above -1e-10) at every grid point.
    pub fn new(grid: FrequencyGrid, matrices: Vec<Mat4>) -> Result<Self> {
        if matrices.len() != grid.len() {
            return Err(Error::InconsistentState(format!(
                "expected {} covariance matrices, got {}",
                grid.len(),
                matrices.len()
            )));
        }
        check_finite(&matrices)?;
        for (idx, m) in matrices.iter().enumerate() {
            let defect = (m - m.adjoint()).iter().map(|e| e.norm()).fold(0.0, f64::max);
            if defect > 1e-12 {
                return Err(Error::InconsistentState(format!(
                    "covariance at grid index {idx} is not Hermitian (defect {defect:.3e})"
                )));
            }
            if !is_positive_semidefinite(m, 1e-10) {
                return Err(Error::InconsistentState(format!(
                    "covariance at grid index {idx} is not positive semidefinite"
                )));
            }
        }
        Ok(Self { grid, matrices })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn at(&self, idx: usize) -> &Mat4 {
        &self.matrices[idx]
    }

    pub fn matrices(&self) -> &[Mat4] {
        &self.matrices
    }
}

/// Cholesky-based check that all eigenvalues exceed `-tol`. Hand-rolled:
/// the factorization must pivot on the real part of the diagonal, which a
/// generic complex Cholesky does not enforce.
fn is_positive_semidefinite(m: &Mat4, tol: f64) -> bool {
    let mut a = m + Mat4::identity() * Complex64::new(tol, 0.0);
    let n = 4;
    for j in 0..n {
        let d = a[(j, j)].re;
        if d <= 0.0 {
            return false;
        }
        let l = d.sqrt();
        a[(j, j)] = Complex64::new(l, 0.0);
        for i in j + 1..n {
            a[(i, j)] /= l;
        }
        for k in j + 1..n {
            let f = a[(k, j)].conj();
            for i in k..n {
                let update = a[(i, j)] * f;
                a[(i, k)] -= update;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridScale;

    fn grid3() -> FrequencyGrid {
        FrequencyGrid::new(1e5, 1e7, 3, GridScale::Log).unwrap()
    }

    #[test]
    fn identity_port_gives_vacuum_covariance() {
        let g = grid3();
        let mut set = NoisePortSet::new(g.clone());
        set.push_port("in", vec![Mat4::identity(); g.len()]).unwrap();
        let s = set.covariance().unwrap();
        for m in s.matrices() {
            let defect = (m - Mat4::identity())
                .iter()
                .map(|e| e.norm())
                .fold(0.0, f64::max);
            assert!(defect < 1e-14);
        }
    }

    #[test]
    fn empty_port_set_rejected() {
        let set = NoisePortSet::new(grid3());
        assert!(matches!(set.covariance(), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn duplicate_labels_rejected() {
        let g = grid3();
        let mut set = NoisePortSet::new(g.clone());
        set.push_port("in", vec![Mat4::identity(); g.len()]).unwrap();
        let err = set.push_port("in", vec![Mat4::identity(); g.len()]);
        assert!(matches!(err, Err(Error::InconsistentState(_))));
    }

    #[test]
    fn grid_length_mismatch_rejected() {
        let g = grid3();
        let mut set = NoisePortSet::new(g);
        let err = set.push_port("in", vec![Mat4::identity(); 2]);
        assert!(matches!(err, Err(Error::InconsistentState(_))));
    }

    #[test]
    fn non_hermitian_covariance_rejected() {
        let g = grid3();
        let mut m = Mat4::identity();
        m[(0, 1)] = Complex64::new(0.5, 0.0);
        let err = SpectralCovariance::new(g.clone(), vec![m; g.len()]);
        assert!(err.is_err());
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let g = grid3();
        let mut m = Mat4::identity();
        m[(3, 3)] = Complex64::new(-1.0, 0.0);
        let err = SpectralCovariance::new(g.clone(), vec![m; g.len()]);
        assert!(err.is_err());
    }

    #[test]
    fn non_finite_transfer_rejected() {
        let g = grid3();
        let mut m = Mat4::identity();
        m[(0, 0)] = Complex64::new(f64::NAN, 0.0);
        assert!(QuadratureTransfer::new(g.clone(), vec![m; g.len()]).is_err());
    }
}
