//! Quadrature transfer matrices for the optical elements: non-degenerate
//! OPO, detuned cavity, loss channel, and the cascade composition rule.
//!
//! Conventions used by every element:
//!
//! * Basis `(X_s,1, X_s,2, X_i,1, X_i,2)`, see [`crate::spectral`].
//! * Pump phase: `theta_b = π` squeezes the difference combination
//!   `X_s,1 - X_i,1` and anti-squeezes it at `theta_b = 0`.
//! * Cavity detuning: positive `delta` means the field sits above the
//!   cavity resonance; the reflection block for `+delta` is the transpose
//!   of the block for `-delta`.
//! * Propagation phases between elements are absorbed into the readout
//!   angles; elements are cascaded back to back.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;
use crate::spectral::{Mat2, Mat4, NoisePortSet, QuadratureTransfer};

/// Below-threshold non-degenerate OPO parameters.
#[derive(Debug, Clone, Copy)]
pub struct OpoParams {
    /// Normalized pump parameter, `0 <= x < 1`.
    pub x: f64,
    /// Pump phase (rad).
    pub theta_b: f64,
    /// Input-coupler decay rate (rad/s).
    pub gamma_in: f64,
    /// Intracavity-loss decay rate (rad/s).
    pub gamma_l: f64,
}

impl OpoParams {
    pub fn new(x: f64, theta_b: f64, gamma_in: f64, gamma_l: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&x) {
            return Err(Error::AboveThreshold { x });
        }
        if !(gamma_in > 0.0) || gamma_l < 0.0 || !gamma_l.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "decay rates must satisfy gamma_in > 0 and gamma_l >= 0, got ({gamma_in}, {gamma_l})"
            )));
        }
        Ok(Self { x, theta_b, gamma_in, gamma_l })
    }

    /// Build from the total decay rate and the escape efficiency
    /// `eta_esc = gamma_in / gamma_tot`.
    pub fn from_escape(x: f64, theta_b: f64, gamma_tot: f64, eta_esc: f64) -> Result<Self> {
        if !(eta_esc > 0.0 && eta_esc <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "escape efficiency must lie in (0, 1], got {eta_esc}"
            )));
        }
        if !(gamma_tot > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_tot must be positive, got {gamma_tot}"
            )));
        }
        Self::new(x, theta_b, eta_esc * gamma_tot, (1.0 - eta_esc) * gamma_tot)
    }

    pub fn gamma_tot(&self) -> f64 {
        self.gamma_in + self.gamma_l
    }

    pub fn eta_esc(&self) -> f64 {
        self.gamma_in / self.gamma_tot()
    }
}

/// Detuned two-field cavity parameters. Signal and idler see independent
/// detunings; cross-field coupling inside the cavity is zero because the
/// fields are separated by far more than the linewidth.
#[derive(Debug, Clone, Copy)]
pub struct CavityParams {
    /// Total half-linewidth decay rate (rad/s).
    pub gamma_tc: f64,
    /// Input-coupling ratio `gamma_in / gamma_tc`, in (0, 1].
    pub eta_tc: f64,
    /// Signal detuning in units of `gamma_tc`.
    pub delta_sig: f64,
    /// Idler detuning in units of `gamma_tc`.
    pub delta_idl: f64,
}

impl CavityParams {
    pub fn new(gamma_tc: f64, eta_tc: f64, delta_sig: f64, delta_idl: f64) -> Result<Self> {
        if !(gamma_tc > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma_tc must be positive, got {gamma_tc}"
            )));
        }
        if !(eta_tc > 0.0 && eta_tc <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eta_tc must lie in (0, 1], got {eta_tc}"
            )));
        }
        if !delta_sig.is_finite() || !delta_idl.is_finite() {
            return Err(Error::InvalidArgument("detunings must be finite".into()));
        }
        Ok(Self { gamma_tc, eta_tc, delta_sig, delta_idl })
    }
}

/// Power efficiencies of independent signal/idler propagation paths.
#[derive(Debug, Clone, Copy)]
pub struct LossChannel {
    pub eta_sig: f64,
    pub eta_idl: f64,
}

impl LossChannel {
    pub fn new(eta_sig: f64, eta_idl: f64) -> Result<Self> {
        for eta in [eta_sig, eta_idl] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::InvalidArgument(format!(
                    "path efficiency must lie in [0, 1], got {eta}"
                )));
            }
        }
        Ok(Self { eta_sig, eta_idl })
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Basis change from `(a_s, a_s†, a_i, a_i†)` to the quadrature vector.
fn gamma_matrix() -> Mat4 {
    let i = Complex64::i();
    Matrix4::new(
        c(1.0), c(1.0), c(0.0), c(0.0),
        -i, i, c(0.0), c(0.0),
        c(0.0), c(0.0), c(1.0), c(1.0),
        c(0.0), c(0.0), -i, i,
    )
}

fn gamma_inverse() -> Mat4 {
    let i = Complex64::i();
    let h = c(0.5);
    Matrix4::new(
        h, h * i, c(0.0), c(0.0),
        h, -h * i, c(0.0), c(0.0),
        c(0.0), c(0.0), h, h * i,
        c(0.0), c(0.0), h, -h * i,
    )
}

/// Output ports of the OPO: `opo.input` (reflection of the input-coupler
/// vacuum) plus `opo.loss` when the intracavity loss rate is nonzero.
pub fn opo_ports(p: &OpoParams, grid: &FrequencyGrid) -> Result<NoisePortSet> {
    // Re-validate; the struct can be built literal.
    let p = OpoParams::new(p.x, p.theta_b, p.gamma_in, p.gamma_l)?;
    let gamma_tot = p.gamma_tot();
    let phase = Complex64::from_polar(1.0, p.theta_b);
    // Parametric coupling with the phase that puts the squeezed joint
    // quadrature at theta_b = pi (see module docs).
    let k = -c(p.x) * phase;
    let kc = -c(p.x) * phase.conj();
    let m = Matrix4::new(
        c(-1.0), c(0.0), c(0.0), k,
        c(0.0), c(-1.0), kc, c(0.0),
        c(0.0), k, c(-1.0), c(0.0),
        kc, c(0.0), c(0.0), c(-1.0),
    );

    let g = gamma_matrix();
    let g_inv = gamma_inverse();
    let two_gamma_in = c(2.0 * p.gamma_in);
    let loss_coupling = c(2.0 * (p.gamma_l * p.gamma_in).sqrt());
    let emit_loss = p.gamma_l > 0.0;

    let mut input = Vec::with_capacity(grid.len());
    let mut loss = Vec::with_capacity(if emit_loss { grid.len() } else { 0 });
    for &omega in grid.omegas() {
        let d = Mat4::identity() * Complex64::new(0.0, omega) - m * c(gamma_tot);
        let d_inv = d.try_inverse().ok_or_else(|| {
            Error::NumericalSingularity(format!(
                "OPO response singular at omega = {omega} rad/s"
            ))
        })?;
        input.push(g * (d_inv * two_gamma_in - Mat4::identity()) * g_inv);
        if emit_loss {
            loss.push(g * (d_inv * loss_coupling) * g_inv);
        }
    }

    let mut set = NoisePortSet::new(grid.clone());
    set.push_port("opo.input", input)?;
    if emit_loss {
        set.push_port("opo.loss", loss)?;
    }
    Ok(set)
}

/// Single-field reflection and loss blocks of a detuned cavity at one
/// normalized frequency `w = omega / gamma_tc`.
fn cavity_blocks(delta: f64, eta: f64, w: f64) -> (Mat2, Mat2) {
    let one_iw = Complex64::new(1.0, w);
    let chi = (one_iw * one_iw + c(delta * delta)).inv();
    let d = c(2.0 * eta) * chi * one_iw - c(1.0);
    let o = c(2.0 * eta * delta) * chi;
    let refl = Matrix2::new(d, -o, o, d);
    let lc = c(2.0 * (eta * (1.0 - eta)).sqrt()) * chi;
    let loss = Matrix2::new(lc * one_iw, -lc * c(delta), lc * c(delta), lc * one_iw);
    (refl, loss)
}

fn block_diag(sig: &Mat2, idl: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(sig);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(idl);
    m
}

/// Reflection transfer of the detuned cavity plus its `cavity.loss` port
/// (omitted for a lossless cavity, `eta_tc = 1`).
pub fn cavity_ports(
    p: &CavityParams,
    grid: &FrequencyGrid,
) -> Result<(QuadratureTransfer, NoisePortSet)> {
    let p = CavityParams::new(p.gamma_tc, p.eta_tc, p.delta_sig, p.delta_idl)?;
    let emit_loss = p.eta_tc < 1.0;
    let mut refl = Vec::with_capacity(grid.len());
    let mut loss = Vec::with_capacity(if emit_loss { grid.len() } else { 0 });
    for &omega in grid.omegas() {
        let w = omega / p.gamma_tc;
        let (rs, ls) = cavity_blocks(p.delta_sig, p.eta_tc, w);
        let (ri, li) = cavity_blocks(p.delta_idl, p.eta_tc, w);
        refl.push(block_diag(&rs, &ri));
        if emit_loss {
            loss.push(block_diag(&ls, &li));
        }
    }
    let transfer = QuadratureTransfer::new(grid.clone(), refl)?;
    let mut ports = NoisePortSet::new(grid.clone());
    if emit_loss {
        ports.push_port("cavity.loss", loss)?;
    }
    Ok((transfer, ports))
}

/// Beamsplitter loss on each path: transmission `sqrt(eta)` per quadrature
/// and one vacuum port with coupling `sqrt(1 - eta)` per lossy field
/// (`path.loss.signal`, `path.loss.idler`).
pub fn loss_ports(
    ch: &LossChannel,
    grid: &FrequencyGrid,
) -> Result<(QuadratureTransfer, NoisePortSet)> {
    let ch = LossChannel::new(ch.eta_sig, ch.eta_idl)?;
    let n = grid.len();
    let mut t = Mat4::zeros();
    let ts = c(ch.eta_sig.sqrt());
    let ti = c(ch.eta_idl.sqrt());
    t[(0, 0)] = ts;
    t[(1, 1)] = ts;
    t[(2, 2)] = ti;
    t[(3, 3)] = ti;
    let transfer = QuadratureTransfer::new(grid.clone(), vec![t; n])?;

    let mut ports = NoisePortSet::new(grid.clone());
    if ch.eta_sig < 1.0 {
        let mut m = Mat4::zeros();
        let k = c((1.0 - ch.eta_sig).sqrt());
        m[(0, 0)] = k;
        m[(1, 1)] = k;
        ports.push_port("path.loss.signal", vec![m; n])?;
    }
    if ch.eta_idl < 1.0 {
        let mut m = Mat4::zeros();
        let k = c((1.0 - ch.eta_idl).sqrt());
        m[(2, 2)] = k;
        m[(3, 3)] = k;
        ports.push_port("path.loss.idler", vec![m; n])?;
    }
    Ok((transfer, ports))
}

/// Cascade an element onto an existing network: every upstream port is
/// left-multiplied by the element transfer and the element's own vacuum
/// ports are appended unchanged.
pub fn compose(
    upstream: &NoisePortSet,
    element_transfer: &QuadratureTransfer,
    new_ports: &NoisePortSet,
) -> Result<NoisePortSet> {
    if upstream.grid() != element_transfer.grid() || upstream.grid() != new_ports.grid() {
        return Err(Error::InconsistentState(
            "compose requires all operands to share one frequency grid".into(),
        ));
    }
    let mut out = NoisePortSet::new(upstream.grid().clone());
    for port in upstream.ports() {
        let mapped: Vec<Mat4> = port
            .matrices()
            .iter()
            .enumerate()
            .map(|(k, t)| element_transfer.at(k) * t)
            .collect();
        out.push_port(port.label(), mapped)?;
    }
    for port in new_ports.ports() {
        out.push_port(port.label(), port.matrices().to_vec())?;
    }
    Ok(out)
}
