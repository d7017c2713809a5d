//! Homodyne projection of the spectral covariance, electronic combination
//! of the two readouts (fixed gain and Wiener-optimal), readout-angle
//! sweeps and dB conversion.
//!
//! "Readout angle" throughout this crate is the idler LO phase with the
//! signal LO phase held fixed; sweeps ramp the idler phase the way the
//! measurement does. Combined variances are normalized by
//! `g_s² + g_i²`, so a vacuum input reads exactly 1 for any gains.

use nalgebra::{Vector2, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::spectral::SpectralCovariance;

/// Fixed-gain two-detector readout configuration.
///
/// The measured combination is `g_s X_s(phi_s) + sign * g_i X_i(phi_i)`;
/// `combiner_sign = -1` (the default) subtracts the idler readout.
#[derive(Debug, Clone, Copy)]
pub struct ReadoutConfig {
    pub phi_s: f64,
    pub phi_i: f64,
    pub gain_s: f64,
    pub gain_i: f64,
    pub combiner_sign: f64,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            phi_s: 0.0,
            phi_i: 0.0,
            gain_s: 1.0,
            gain_i: 1.0,
            combiner_sign: -1.0,
        }
    }
}

impl ReadoutConfig {
    fn validate(&self) -> Result<()> {
        if self.gain_s == 0.0 && self.gain_i == 0.0 {
            return Err(Error::InvalidArgument(
                "readout projection has zero norm (both gains are zero)".into(),
            ));
        }
        if self.combiner_sign != 1.0 && self.combiner_sign != -1.0 {
            return Err(Error::InvalidArgument(format!(
                "combiner sign must be +1 or -1, got {}",
                self.combiner_sign
            )));
        }
        Ok(())
    }

    fn projection(&self) -> Vector4<Complex64> {
        let c = |v: f64| Complex64::new(v, 0.0);
        Vector4::new(
            c(self.gain_s * self.phi_s.cos()),
            c(self.gain_s * self.phi_s.sin()),
            c(self.combiner_sign * self.gain_i * self.phi_i.cos()),
            c(self.combiner_sign * self.gain_i * self.phi_i.sin()),
        )
    }
}

/// Normalized variance of the combined readout at each grid point
/// (vacuum = 1).
pub fn homodyne_variance(s: &SpectralCovariance, cfg: &ReadoutConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let u = cfg.projection();
    let norm = cfg.gain_s * cfg.gain_s + cfg.gain_i * cfg.gain_i;
    Ok(s.matrices()
        .iter()
        .map(|m| (u.adjoint() * m * u)[(0, 0)].re / norm)
        .collect())
}

/// Variance versus frequency and readout angle.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub grid: FrequencyGrid,
    /// Idler LO phases (rad).
    pub angles: Vec<f64>,
    /// `variance[freq_idx][angle_idx]`, shot noise = 1.
    pub variance: Vec<Vec<f64>>,
    /// `10 log10` of the same.
    pub variance_db: Vec<Vec<f64>>,
}

/// Sweep the idler LO phase at a fixed signal LO phase.
pub fn angle_sweep(
    s: &SpectralCovariance,
    phi_s: f64,
    angles: &[f64],
    gain_s: f64,
    gain_i: f64,
    combiner_sign: f64,
) -> Result<SpectrumResult> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("angle list is empty".into()));
    }
    let n = s.grid().len();
    let mut variance = vec![Vec::with_capacity(angles.len()); n];
    for &phi_i in angles {
        let cfg = ReadoutConfig { phi_s, phi_i, gain_s, gain_i, combiner_sign };
        let col = homodyne_variance(s, &cfg)?;
        for (row, v) in variance.iter_mut().zip(col) {
            row.push(v);
        }
    }
    let mut variance_db = Vec::with_capacity(n);
    for row in &variance {
        let mut out = Vec::with_capacity(row.len());
        for &v in row {
            out.push(to_db(v)?);
        }
        variance_db.push(out);
    }
    Ok(SpectrumResult { grid: s.grid().clone(), angles: angles.to_vec(), variance, variance_db })
}

/// Per-frequency Wiener-optimal combination of the idler readout with the
/// signal readout.
#[derive(Debug, Clone)]
pub struct WienerSpectrum {
    /// Optimal complex filter gain applied to the idler readout.
    pub gains: Vec<Complex64>,
    /// Conditioned variance, normalized so that vacuum reads 1.
    pub variance: Vec<f64>,
    /// Idler LO phase of the optimal readout (rad, in [0, π)).
    pub idler_angles: Vec<f64>,
}

/// Minimize `Var(X_s(phi_s) - g X_i(phi))/(1 + |g|²)` over the idler angle
/// and the complex gain, per frequency.
///
/// For each angle the gain minimization reduces to the smallest eigenvalue
/// of the 2x2 form `[[S_aa, -|S_ab|], [-|S_ab|, S_bb]]`; the angle is then
/// minimized numerically (the objective is smooth and π-periodic).
pub fn wiener_conditional(s: &SpectralCovariance, phi_s: f64) -> Result<WienerSpectrum> {
    let c = |v: f64| Complex64::new(v, 0.0);
    let a = Vector2::new(c(phi_s.cos()), c(phi_s.sin()));
    let n = s.grid().len();
    let mut gains = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    let mut idler_angles = Vec::with_capacity(n);

    for (idx, m) in s.matrices().iter().enumerate() {
        let s_ss = m.fixed_view::<2, 2>(0, 0).into_owned();
        let s_si = m.fixed_view::<2, 2>(0, 2).into_owned();
        let s_ii = m.fixed_view::<2, 2>(2, 2).into_owned();

        let alpha = (a.adjoint() * s_ss * a)[(0, 0)].re;
        // Cross row (a† S_si) and the idler quadratic form.
        let w_row = a.adjoint() * s_si;
        let (w1, w2) = (w_row[(0, 0)], w_row[(0, 1)]);
        let b11 = s_ii[(0, 0)].re;
        let b22 = s_ii[(1, 1)].re;
        let b12 = s_ii[(0, 1)];

        if b11.min(b22) < 0.0 || b11 + b22 <= 1e-14 {
            return Err(Error::DegenerateConditioning(format!(
                "idler auto-spectrum vanishes at grid index {idx}"
            )));
        }

        let sigma_of = |phi: f64| -> f64 {
            let (sn, cs) = phi.sin_cos();
            b11 * cs * cs + b22 * sn * sn + 2.0 * (b12.re * cs * sn)
        };
        let beta2_of = |phi: f64| -> f64 {
            let (sn, cs) = phi.sin_cos();
            (w1 * c(cs) + w2 * c(sn)).norm_sqr()
        };
        let value_of = |phi: f64| -> f64 {
            let sigma = sigma_of(phi);
            let half_gap = 0.5 * (alpha - sigma);
            0.5 * (alpha + sigma) - (half_gap * half_gap + beta2_of(phi)).sqrt()
        };

        // Coarse scan over [0, pi) (the objective is pi-periodic), then a
        // golden-section refinement around the best sample.
        let samples = 256;
        let step = std::f64::consts::PI / samples as f64;
        let mut best_phi = 0.0;
        let mut best_val = f64::INFINITY;
        for k in 0..samples {
            let phi = k as f64 * step;
            let v = value_of(phi);
            if v < best_val {
                best_val = v;
                best_phi = phi;
            }
        }
        let (mut lo, mut hi) = (best_phi - step, best_phi + step);
        let golden = 0.618_033_988_749_894_8;
        let mut p1 = hi - golden * (hi - lo);
        let mut p2 = lo + golden * (hi - lo);
        let mut f1 = value_of(p1);
        let mut f2 = value_of(p2);
        for _ in 0..80 {
            if f1 <= f2 {
                hi = p2;
                p2 = p1;
                f2 = f1;
                p1 = hi - golden * (hi - lo);
                f1 = value_of(p1);
            } else {
                lo = p1;
                p1 = p2;
                f1 = f2;
                p2 = lo + golden * (hi - lo);
                f2 = value_of(p2);
            }
        }
        let phi_opt = 0.5 * (lo + hi);
        let val = value_of(phi_opt);

        // Gain realizing the minimum at the chosen angle.
        let (sn, cs) = phi_opt.sin_cos();
        let s_ab = w1 * c(cs) + w2 * c(sn);
        let sigma = sigma_of(phi_opt);
        let beta = s_ab.norm();
        let gain = if beta < 1e-14 * alpha.max(sigma).max(1.0) {
            Complex64::new(0.0, 0.0)
        } else {
            let gap = alpha - sigma;
            let t = (gap + (gap * gap + 4.0 * beta * beta).sqrt()) / (2.0 * beta);
            Complex64::from_polar(t.min(1e12), -s_ab.arg())
        };

        let phi_norm = phi_opt.rem_euclid(std::f64::consts::PI);
        gains.push(gain);
        variance.push(val);
        idler_angles.push(phi_norm);
    }
    Ok(WienerSpectrum { gains, variance, idler_angles })
}

/// `10 log10(variance)`; rejects non-positive input.
pub fn to_db(variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dB conversion needs a positive variance, got {variance}"
        )));
    }
    Ok(10.0 * variance.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{cavity_ports, compose, opo_ports, CavityParams, OpoParams};
    use crate::grid::{FrequencyGrid, GridScale};
    use crate::spectral::{Mat4, NoisePortSet};

    const PI: f64 = std::f64::consts::PI;

    fn dc_grid() -> FrequencyGrid {
        FrequencyGrid::from_omegas(vec![1e-6, 1.0], GridScale::Linear).unwrap()
    }

    fn vacuum_cov(grid: &FrequencyGrid) -> SpectralCovariance {
        let mut set = NoisePortSet::new(grid.clone());
        set.push_port("in", vec![Mat4::identity(); grid.len()]).unwrap();
        set.covariance().unwrap()
    }

    fn opo_cov(x: f64, theta_b: f64) -> SpectralCovariance {
        let p = OpoParams::new(x, theta_b, 1.0, 0.0).unwrap();
        opo_ports(&p, &dc_grid()).unwrap().covariance().unwrap()
    }

    #[test]
    fn vacuum_reads_one_for_any_configuration() {
        let s = vacuum_cov(&dc_grid());
        for cfg in [
            ReadoutConfig::default(),
            ReadoutConfig { phi_s: 0.3, phi_i: 2.1, gain_s: 0.7, gain_i: 1.9, combiner_sign: 1.0 },
            ReadoutConfig { gain_i: 0.0, ..Default::default() },
        ] {
            for v in homodyne_variance(&s, &cfg).unwrap() {
                assert!((v - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn difference_combination_frozen_values() {
        let v_pi = homodyne_variance(&opo_cov(0.5, PI), &ReadoutConfig::default()).unwrap();
        assert!((v_pi[0] - 1.0 / 9.0).abs() < 1e-9, "v = {}", v_pi[0]);
        assert!((to_db(v_pi[0]).unwrap() + 9.5424).abs() < 1e-3);

        let v_zero = homodyne_variance(&opo_cov(0.5, 0.0), &ReadoutConfig::default()).unwrap();
        assert!((v_zero[0] - 9.0).abs() < 1e-9, "v = {}", v_zero[0]);
    }

    #[test]
    fn single_field_readout_never_beats_shot_noise() {
        for &theta in &[0.0, 0.9, PI] {
            let s = opo_cov(0.7, theta);
            for &phi in &[0.0, 0.4, 1.2, 2.8] {
                let cfg = ReadoutConfig { phi_s: phi, gain_i: 0.0, ..Default::default() };
                for v in homodyne_variance(&s, &cfg).unwrap() {
                    assert!(v >= 1.0 - 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_norm_projection_rejected() {
        let s = vacuum_cov(&dc_grid());
        let cfg = ReadoutConfig { gain_s: 0.0, gain_i: 0.0, ..Default::default() };
        assert!(homodyne_variance(&s, &cfg).is_err());
    }

    #[test]
    fn global_sign_shift_invariance() {
        let s = opo_cov(0.6, 1.1);
        let base = ReadoutConfig { phi_s: 0.4, phi_i: 0.9, ..Default::default() };
        let shifted = ReadoutConfig { phi_s: 0.4 + PI, phi_i: 0.9 + PI, ..base };
        let a = homodyne_variance(&s, &base).unwrap();
        let b = homodyne_variance(&s, &shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_is_two_pi_periodic_and_positive() {
        let s = opo_cov(0.5, PI);
        let angles: Vec<f64> = (0..=16).map(|k| k as f64 / 16.0 * 2.0 * PI).collect();
        let result = angle_sweep(&s, 0.0, &angles, 1.0, 1.0, -1.0).unwrap();
        for row in &result.variance {
            assert!((row[0] - row[16]).abs() < 1e-12);
            for &v in row {
                assert!(v > 0.0);
            }
        }
        for (rv, rd) in result.variance.iter().zip(&result.variance_db) {
            for (&v, &d) in rv.iter().zip(rd) {
                assert!((d - 10.0 * v.log10()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sweep_extrema_match_supplementary_variances() {
        // Lossless cavity-free EPR source: min over angle = V-/2, max = V+/2.
        let x = 0.5;
        let s = opo_cov(x, PI);
        let angles: Vec<f64> = (0..4096).map(|k| k as f64 / 4096.0 * 2.0 * PI).collect();
        let result = angle_sweep(&s, 0.0, &angles, 1.0, 1.0, -1.0).unwrap();
        let (vp, vm) = crate::analysis::v_pm_oracle(x, 1.0, 0.0);
        let row = &result.variance[0];
        let min = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((min - vm / 2.0).abs() / (vm / 2.0) < 1e-6);
        assert!((max - vp / 2.0).abs() / (vp / 2.0) < 1e-6);
    }

    #[test]
    fn sweep_argmin_frequency_independent_without_cavity() {
        let grid = FrequencyGrid::new(1e4, 1e8, 24, GridScale::Log).unwrap();
        let p = OpoParams::new(0.45, PI, 2.0 * PI * 12.1e6, 0.0).unwrap();
        let s = opo_ports(&p, &grid).unwrap().covariance().unwrap();
        let angles: Vec<f64> = (0..8192).map(|k| k as f64 / 8192.0 * 2.0 * PI).collect();
        let result = angle_sweep(&s, 0.0, &angles, 1.0, 1.0, -1.0).unwrap();
        let argmins: Vec<f64> = result
            .variance
            .iter()
            .map(|row| {
                let (k, _) = row
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap();
                angles[k]
            })
            .collect();
        for w in argmins.windows(2) {
            let d = (w[1] - w[0]).abs();
            let d = d.min(2.0 * PI - d);
            assert!(d < 1e-6 + 2.0 * PI / 8192.0, "drift {d}");
        }
    }

    #[test]
    fn wiener_uncorrelated_fields_do_nothing() {
        let s = opo_cov(0.0, 0.0);
        let w = wiener_conditional(&s, 0.0).unwrap();
        for (g, v) in w.gains.iter().zip(&w.variance) {
            assert!(g.norm() < 1e-9);
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wiener_matches_equal_combination_for_symmetric_source() {
        let s = opo_cov(0.5, PI);
        let w = wiener_conditional(&s, 0.0).unwrap();
        let (_, vm) = crate::analysis::v_pm_oracle(0.5, 1.0, 0.0);
        assert!((w.variance[0] - vm / 2.0).abs() < 1e-9, "v = {}", w.variance[0]);
        assert!((w.gains[0].norm() - 1.0).abs() < 1e-6);
        assert!((w.gains[0].arg()).abs() < 1e-6);
    }

    #[test]
    fn wiener_never_beaten_by_fixed_combinations() {
        let grid = dc_grid();
        let opo = OpoParams::new(0.55, 0.8, 1.0, 0.3).unwrap();
        let net = opo_ports(&opo, &grid).unwrap();
        let (t, ports) =
            cavity_ports(&CavityParams::new(0.9, 0.95, 0.0, 1.0).unwrap(), &grid).unwrap();
        let s = compose(&net, &t, &ports).unwrap().covariance().unwrap();
        let phi_s = 0.37;
        let w = wiener_conditional(&s, phi_s).unwrap();
        for k in 0..60 {
            let phi_i = k as f64 / 60.0 * 2.0 * PI;
            for &g in &[0.2, 0.5, 1.0, 1.7, 3.0] {
                let cfg = ReadoutConfig {
                    phi_s,
                    phi_i,
                    gain_s: 1.0,
                    gain_i: g,
                    combiner_sign: -1.0,
                };
                let fixed = homodyne_variance(&s, &cfg).unwrap();
                for (wv, fv) in w.variance.iter().zip(fixed) {
                    assert!(*wv <= fv + 1e-12, "wiener {wv} vs fixed {fv}");
                }
            }
        }
        for v in &w.variance {
            assert!(*v >= 0.0);
        }
    }

    #[test]
    fn to_db_values_and_errors() {
        assert_eq!(to_db(1.0).unwrap(), 0.0);
        assert!((to_db(0.6310).unwrap() + 2.0).abs() < 5e-3);
        assert!((to_db(0.1111).unwrap() + 9.54).abs() < 5e-3);
        assert!(to_db(0.0).is_err());
        assert!(to_db(-1.0).is_err());
    }
}
