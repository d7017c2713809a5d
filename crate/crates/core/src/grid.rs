//! Sideband analysis frequency grids.
//!
//! All spectral quantities in this crate are evaluated on a shared grid of
//! sideband frequencies Ω (rad/s). Grids are built from boundary values in
//! Hz and converted once; everything downstream works in rad/s.

use crate::error::{Error, Result};

/// Spacing rule for a frequency grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridScale {
    Linear,
    Log,
}

impl std::fmt::Display for GridScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GridScale::Linear => write!(f, "linear"),
            GridScale::Log => write!(f, "log"),
        }
    }
}

/// Ordered set of sideband frequencies Ω (rad/s), strictly increasing and
/// strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    omegas: Vec<f64>,
    scale: GridScale,
}

impl FrequencyGrid {
    /// Build a grid of `n` points between `f_min_hz` and `f_max_hz`
    /// (inclusive), spaced per `scale`. Internally stored as Ω = 2π f.
    pub fn new(f_min_hz: f64, f_max_hz: f64, n: usize, scale: GridScale) -> Result<Self> {
        if !(f_min_hz.is_finite() && f_max_hz.is_finite()) || f_min_hz <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "frequency bounds must be finite and positive, got [{f_min_hz}, {f_max_hz}]"
            )));
        }
        if f_min_hz >= f_max_hz {
            return Err(Error::InvalidArgument(format!(
                "f_min must be strictly below f_max, got [{f_min_hz}, {f_max_hz}]"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {n}"
            )));
        }
        let mut freqs = Vec::with_capacity(n);
        match scale {
            GridScale::Linear => {
                let step = (f_max_hz - f_min_hz) / (n - 1) as f64;
                for k in 0..n {
                    freqs.push(f_min_hz + k as f64 * step);
                }
            }
            GridScale::Log => {
                let l0 = f_min_hz.log10();
                let l1 = f_max_hz.log10();
                let step = (l1 - l0) / (n - 1) as f64;
                for k in 0..n {
                    freqs.push(10f64.powf(l0 + k as f64 * step));
                }
            }
        }
        // Pin the endpoints exactly; powf/accumulation may drift in the last ulp.
        freqs[0] = f_min_hz;
        freqs[n - 1] = f_max_hz;
        let omegas = freqs.iter().map(|f| 2.0 * std::f64::consts::PI * f).collect();
        Self::from_omegas(omegas, scale)
    }

    /// Wrap an explicit list of Ω values (rad/s).
    pub fn from_omegas(omegas: Vec<f64>, scale: GridScale) -> Result<Self> {
        if omegas.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 2 points, got {}",
                omegas.len()
            )));
        }
        for w in &omegas {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "grid frequencies must be finite and positive, got {w}"
                )));
            }
        }
        if !omegas.windows(2).all(|p| p[0] < p[1]) {
            return Err(Error::InvalidArgument(
                "grid frequencies must be strictly increasing".into(),
            ));
        }
        Ok(Self { omegas, scale })
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    /// Grid points converted back to Hz.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.omegas
            .iter()
            .map(|w| w / (2.0 * std::f64::consts::PI))
            .collect()
    }

    pub fn scale(&self) -> GridScale {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_decades() {
        let g = FrequencyGrid::new(1e5, 1e7, 3, GridScale::Log).unwrap();
        let f = g.frequencies_hz();
        assert!((f[0] - 1e5).abs() / 1e5 < 1e-12);
        assert!((f[1] - 1e6).abs() / 1e6 < 1e-12);
        assert!((f[2] - 1e7).abs() / 1e7 < 1e-12);
    }

    #[test]
    fn linear_grid_endpoints() {
        let g = FrequencyGrid::new(2e5, 3e5, 2, GridScale::Linear).unwrap();
        let f = g.frequencies_hz();
        assert_eq!(f.len(), 2);
        assert!((f[0] - 2e5).abs() < 1e-6);
        assert!((f[1] - 3e5).abs() < 1e-6);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(FrequencyGrid::new(1e5, 1e5, 2, GridScale::Linear).is_err());
        assert!(FrequencyGrid::new(1e6, 1e5, 3, GridScale::Log).is_err());
        assert!(FrequencyGrid::new(-1.0, 1e5, 3, GridScale::Log).is_err());
        assert!(FrequencyGrid::new(0.0, 1e5, 3, GridScale::Log).is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(FrequencyGrid::new(1e5, 1e6, 1, GridScale::Linear).is_err());
        assert!(FrequencyGrid::from_omegas(vec![1.0], GridScale::Linear).is_err());
    }

    #[test]
    fn unsorted_omegas_rejected() {
        assert!(FrequencyGrid::from_omegas(vec![2.0, 1.0], GridScale::Linear).is_err());
        assert!(FrequencyGrid::from_omegas(vec![1.0, 1.0], GridScale::Linear).is_err());
    }

    #[test]
    fn omega_is_two_pi_f() {
        let g = FrequencyGrid::new(1.0, 2.0, 2, GridScale::Linear).unwrap();
        assert!((g.omegas()[0] - 2.0 * std::f64::consts::PI).abs() < 1e-15);
    }
}
