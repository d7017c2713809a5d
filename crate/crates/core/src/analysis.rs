//! Closed-form variance oracles, the detection-loss fit, and the coherent
//! locking field (CLF) error signals.
//!
//! The oracles evaluate the below-threshold OPO output variances directly
//! from the cavity parameters, with no matrix algebra involved. They serve
//! as an independent cross-check of the transfer-matrix pipeline in
//! [`crate::elements`] and as the model function for the detection-loss fit.
//!
//! Two normalization conventions coexist and are both exposed:
//! [`v_pm_oracle`] references the *combined* shot noise of the signal and
//! idler readouts (vacuum level 2), while [`methods_loss_oracle`] references
//! a single readout (vacuum level 1). They are related by
//! `methods_loss_oracle(x, 1 - eta, w) == v_pm_oracle(x, eta, w) / 2`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Single-field output variance of a below-threshold OPO, in single-field
/// shot-noise units. Identical for both quadratures of both fields; never
/// drops below 1.
///
/// `omega_over_gamma` is the sideband frequency normalized to the OPO
/// total decay rate.
pub fn v_out_oracle(x: f64, eta_esc: f64, omega_over_gamma: f64) -> f64 {
    let w2 = omega_over_gamma * omega_over_gamma;
    let x2 = x * x;
    let denom = x2 * x2 + 2.0 * x2 * (w2 - 1.0) + (w2 + 1.0) * (w2 + 1.0);
    1.0 + 8.0 * x2 * eta_esc / denom
}

/// Anti-squeezed and squeezed variances `(V_plus, V_minus)` of the equal
/// signal/idler combination, referenced to the combined shot noise
/// (vacuum level 2).
pub fn v_pm_oracle(x: f64, eta_esc: f64, omega_over_gamma: f64) -> (f64, f64) {
    let w2 = omega_over_gamma * omega_over_gamma;
    let plus = 2.0 * (1.0 + 4.0 * x * eta_esc / ((1.0 - x) * (1.0 - x) + w2));
    let minus = 2.0 * (1.0 - 4.0 * x * eta_esc / ((1.0 + x) * (1.0 + x) + w2));
    (plus, minus)
}

/// Variance of the difference combination `X_s,1 - X_i,1` as a function of
/// the pump phase, referenced to the combined shot noise:
/// `V_+ cos²(θ_b/2) + V_- sin²(θ_b/2)`. Minimal (= V_-) at `theta_b = π`.
pub fn v_cond_oracle(x: f64, eta_esc: f64, omega_over_gamma: f64, theta_b: f64) -> f64 {
    let (plus, minus) = v_pm_oracle(x, eta_esc, omega_over_gamma);
    let c = (theta_b / 2.0).cos();
    let s = (theta_b / 2.0).sin();
    plus * c * c + minus * s * s
}

/// Loss-model variances `(v_plus, v_minus)` in single-readout shot-noise
/// units: `1 ± 4x(1-l) / ((1 ∓ x)² + (Ω/γ_opo)²)` with total detection
/// loss `l`.
pub fn methods_loss_oracle(x: f64, l: f64, omega_over_gamma: f64) -> (f64, f64) {
    let w2 = omega_over_gamma * omega_over_gamma;
    let t = 1.0 - l;
    let plus = 1.0 + 4.0 * x * t / ((1.0 - x) * (1.0 - x) + w2);
    let minus = 1.0 - 4.0 * x * t / ((1.0 + x) * (1.0 + x) + w2);
    (plus, minus)
}

/// One squeezing/anti-squeezing measurement at a given pump power.
///
/// Variances are linear, in single-readout shot-noise units (the
/// convention of [`methods_loss_oracle`]).
#[derive(Debug, Clone)]
pub struct LossRecord {
    pub pump_power_mw: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    /// Sideband frequency of the measurement (rad/s).
    pub omega: f64,
}

/// Input bundle for [`fit_detection_loss`].
#[derive(Debug, Clone)]
pub struct LossFitInput {
    pub records: Vec<LossRecord>,
    /// Fixed OPO threshold power. When `None` the threshold is floated as a
    /// second fit parameter.
    pub threshold_mw: Option<f64>,
    /// OPO half-linewidth (rad/s), used to normalize the record frequencies.
    pub gamma_opo: f64,
}

/// Default OPO threshold power (mW) when neither the input nor the fit
/// provides one.
pub const DEFAULT_THRESHOLD_MW: f64 = 66.3;

/// Result of the detection-loss fit.
#[derive(Debug, Clone)]
pub struct LossFit {
    /// Fitted total detection loss, in [0, 1).
    pub loss: f64,
    /// Threshold power used by the final model (fitted or fixed).
    pub threshold_mw: f64,
    pub threshold_fitted: bool,
    /// Pump parameter per record, `x_k = sqrt(P_k / P_th)`.
    pub x_values: Vec<f64>,
    /// Root-mean-square residual in dB over all 2N model points.
    pub rms_residual_db: f64,
    pub iterations: usize,
}

fn validate_fit_input(input: &LossFitInput) -> Result<()> {
    if input.records.is_empty() {
        return Err(Error::InvalidArgument("loss fit needs at least one record".into()));
    }
    if input.threshold_mw.is_none() && input.records.len() < 2 {
        return Err(Error::InvalidArgument(
            "floating the threshold needs at least two records".into(),
        ));
    }
    if !(input.gamma_opo > 0.0) {
        return Err(Error::InvalidArgument("gamma_opo must be positive".into()));
    }
    for (k, r) in input.records.iter().enumerate() {
        if !(r.pump_power_mw > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "record {k}: pump power must be positive"
            )));
        }
        if !(r.v_minus > 0.0 && r.v_minus <= 1.0 && r.v_plus >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "record {k}: requires v_plus >= 1 >= v_minus > 0, got ({}, {})",
                r.v_plus, r.v_minus
            )));
        }
        if let Some(th) = input.threshold_mw {
            if r.pump_power_mw >= th {
                return Err(Error::InvalidArgument(format!(
                    "record {k}: pump power {} mW is not below the threshold {} mW",
                    r.pump_power_mw, th
                )));
            }
        }
    }
    Ok(())
}

fn db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Residual vector (model - data, in dB) for a given parameter vector.
/// `p[0]` is the loss; `p[1]`, when present, is the floated threshold.
fn fit_residuals(input: &LossFitInput, p: &[f64]) -> Vec<f64> {
    let loss = p[0];
    let threshold = if p.len() > 1 {
        p[1]
    } else {
        input.threshold_mw.unwrap_or(DEFAULT_THRESHOLD_MW)
    };
    let mut r = Vec::with_capacity(2 * input.records.len());
    for rec in &input.records {
        let x = (rec.pump_power_mw / threshold).sqrt().min(0.999_999);
        let w = rec.omega / input.gamma_opo;
        let (mp, mm) = methods_loss_oracle(x, loss, w);
        r.push(db(mp) - db(rec.v_plus));
        r.push(db(mm) - db(rec.v_minus));
    }
    r
}

/// Least-squares fit of the loss model to squeezing/anti-squeezing records,
/// performed in the dB domain with uniform weights.
///
/// The pump parameter of record `k` is tied to its pump power through
/// `x_k = sqrt(P_k / P_th)`. The threshold `P_th` is fixed when provided,
/// otherwise floated alongside the loss.
pub fn fit_detection_loss(input: &LossFitInput) -> Result<LossFit> {
    validate_fit_input(input)?;

    let max_power = input
        .records
        .iter()
        .map(|r| r.pump_power_mw)
        .fold(f64::NEG_INFINITY, f64::max);
    let float_threshold = input.threshold_mw.is_none();

    let lower: Vec<f64>;
    let upper: Vec<f64>;
    let mut p: Vec<f64>;
    if float_threshold {
        p = vec![0.5, (1.5 * max_power).max(DEFAULT_THRESHOLD_MW)];
        lower = vec![0.0, max_power * (1.0 + 1e-9)];
        upper = vec![0.999_999, 1e9];
    } else {
        p = vec![0.5];
        lower = vec![0.0];
        upper = vec![0.999_999];
    }

    let max_iter = 200;
    let mut lambda = 1e-3;
    let mut cost = sum_sq(&fit_residuals(input, &p));
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let r = fit_residuals(input, &p);
        let jac = numeric_jacobian(input, &p, &lower, &upper);
        let n = p.len();

        // Normal equations J'J + lambda*diag(J'J), solved at 1 or 2 unknowns.
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for (row, ri) in r.iter().enumerate() {
            for a in 0..n {
                jtr[a] += jac[row][a] * ri;
                for b in 0..n {
                    jtj[a * n + b] += jac[row][a] * jac[row][b];
                }
            }
        }

        let mut stepped = false;
        for _ in 0..12 {
            let step = match n {
                1 => {
                    let d = jtj[0] * (1.0 + lambda);
                    if d.abs() < 1e-300 {
                        break;
                    }
                    vec![-jtr[0] / d]
                }
                _ => {
                    let m = Matrix2::new(
                        jtj[0] * (1.0 + lambda),
                        jtj[1],
                        jtj[2],
                        jtj[3] * (1.0 + lambda),
                    );
                    let rhs = Vector2::new(-jtr[0], -jtr[1]);
                    match m.try_inverse() {
                        Some(inv) => {
                            let s = inv * rhs;
                            vec![s[0], s[1]]
                        }
                        None => break,
                    }
                }
            };
            let trial: Vec<f64> = p
                .iter()
                .zip(step.iter())
                .enumerate()
                .map(|(k, (pk, sk))| (pk + sk).clamp(lower[k], upper[k]))
                .collect();
            let trial_cost = sum_sq(&fit_residuals(input, &trial));
            if trial_cost <= cost {
                let rel_drop = (cost - trial_cost) / cost.max(1e-30);
                let step_norm: f64 = trial
                    .iter()
                    .zip(p.iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                p = trial;
                cost = trial_cost;
                lambda = (lambda * 0.3).max(1e-12);
                stepped = true;
                if rel_drop < 1e-12 || step_norm < 1e-12 || cost < 1e-24 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged || !stepped {
            converged = converged || !stepped && cost.is_finite();
            break;
        }
    }

    let residuals = fit_residuals(input, &p);
    let rms = (sum_sq(&residuals) / residuals.len() as f64).sqrt();
    if !converged || !rms.is_finite() {
        return Err(Error::FitFailure {
            iterations,
            residual_db: rms,
        });
    }

    let threshold = if float_threshold {
        p[1]
    } else {
        input.threshold_mw.unwrap_or(DEFAULT_THRESHOLD_MW)
    };
    let x_values = input
        .records
        .iter()
        .map(|r| (r.pump_power_mw / threshold).sqrt())
        .collect();
    Ok(LossFit {
        loss: p[0],
        threshold_mw: threshold,
        threshold_fitted: float_threshold,
        x_values,
        rms_residual_db: rms,
        iterations,
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn numeric_jacobian(
    input: &LossFitInput,
    p: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<Vec<f64>> {
    let base = fit_residuals(input, p);
    let m = base.len();
    let n = p.len();
    let mut jac = vec![vec![0.0; n]; m];
    for k in 0..n {
        let h = 1e-7 * (1.0 + p[k].abs());
        let mut hi = p.to_vec();
        let mut lo = p.to_vec();
        hi[k] = (p[k] + h).clamp(lower[k], upper[k]);
        lo[k] = (p[k] - h).clamp(lower[k], upper[k]);
        let span = hi[k] - lo[k];
        let rh = fit_residuals(input, &hi);
        let rl = fit_residuals(input, &lo);
        for row in 0..m {
            jac[row][k] = if span.abs() > 0.0 {
                (rh[row] - rl[row]) / span
            } else {
                0.0
            };
        }
    }
    jac
}

/// Parameters of the coherent locking field error signals.
///
/// All optical amplitudes enter only through an overall proportionality,
/// lumped into `amplitude_gain`.
#[derive(Debug, Clone)]
pub struct ClfParams {
    /// Pump phase (rad).
    pub theta_b: f64,
    /// CLF injection phase (rad).
    pub phi_c: f64,
    /// Local-oscillator phase (rad).
    pub phi_lo: f64,
    /// Normalized pump parameter; `x = 1` is a pole of both signals.
    pub x: f64,
    /// Decay rate of the CLF injection mirror (rad/s).
    pub gamma_clf: f64,
    /// Decay rate of the output coupler (rad/s).
    pub gamma_in: f64,
    /// Total cavity decay rate (rad/s).
    pub gamma_tot: f64,
    /// Lumped proportionality constant.
    pub amplitude_gain: f64,
}

impl ClfParams {
    fn validate(&self) -> Result<()> {
        if self.x == 1.0 {
            return Err(Error::InvalidArgument(
                "x = 1 is a pole of the CLF error signals".into(),
            ));
        }
        if !(self.gamma_clf > 0.0 && self.gamma_in > 0.0 && self.gamma_tot > 0.0) {
            return Err(Error::InvalidArgument("decay rates must be positive".into()));
        }
        Ok(())
    }
}

/// Error signal demodulated from the CLF reflection:
/// `gain · x/(x²-1) · (γ_clf/γ_tot) · sin(θ_b - 2φ_c)`.
///
/// Zero crossings at `θ_b = 2φ_c`, where the lock holds the CLF phase to
/// the pump phase.
pub fn clf_reflection_error(p: &ClfParams) -> Result<f64> {
    p.validate()?;
    Ok(p.amplitude_gain * p.x / (p.x * p.x - 1.0) * (p.gamma_clf / p.gamma_tot)
        * (p.theta_b - 2.0 * p.phi_c).sin())
}

/// Error signal demodulated from the transmitted CLF/LO beat.
///
/// Unlocked form:
/// `gain · 1/(x²-1) · (sqrt(γ_clf γ_in)/γ_tot) · (x sin(θ_b - φ_lo - φ_c) + sin(φ_lo - φ_c))`.
/// With `locked = true` the reflection lock condition `θ_b = 2φ_c` is
/// enforced (the stored `phi_c` is ignored), which collapses the unlocked
/// form to `gain · (sqrt(γ_clf γ_in)/γ_tot) · sin(θ_b/2 - φ_lo)/(1+x)`.
pub fn clf_transmission_error(p: &ClfParams, locked: bool) -> Result<f64> {
    p.validate()?;
    let pref = p.amplitude_gain * (p.gamma_clf * p.gamma_in).sqrt() / p.gamma_tot;
    if locked {
        Ok(pref * (p.theta_b / 2.0 - p.phi_lo).sin() / (1.0 + p.x))
    } else {
        Ok(pref / (p.x * p.x - 1.0)
            * (p.x * (p.theta_b - p.phi_lo - p.phi_c).sin() + (p.phi_lo - p.phi_c).sin()))
    }
}
