//! The five commands: spectrum, sweep, fit-loss, clf and validate.
//!
//! Every command is deterministic: the same inputs produce byte-identical
//! output. CSV documents are UTF-8 with LF line endings, one leading
//! comment line carrying the tool version and a hash of the inputs, then a
//! header row. Numbers are serialized with 6 significant digits
//! (`d.dddddEn`), so golden files stay stable.

use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use eprsim_core::analysis::{
    clf_reflection_error, clf_transmission_error, fit_detection_loss, ClfParams, LossFitInput,
    LossRecord, DEFAULT_THRESHOLD_MW,
};
use eprsim_core::elements::{
    cavity_ports, compose, loss_ports, opo_ports, CavityParams, LossChannel, OpoParams,
};
use eprsim_core::readout::{homodyne_variance, to_db, wiener_conditional, ReadoutConfig};
use eprsim_core::{FrequencyGrid, NoisePortSet, SpectralCovariance};

use crate::config::{Combiner, ExperimentConfig};
use crate::CliError;

const TAU: f64 = std::f64::consts::TAU;

/// 6-significant-digit rendering used for every CSV number.
pub fn sig6(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.5e}")
}

/// dB rendering: residue below a nano-dB is float noise from the matrix
/// pipeline (1e-9 dB ~ 2e-10 relative variance), snapped so vacuum reads
/// exactly 0.
fn db6(x: f64) -> String {
    sig6(if x.abs() < 1e-9 { 0.0 } else { x })
}

/// First 16 hex characters of the SHA-256 over the given parts.
pub fn short_hash(parts: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(16);
    for byte in digest.iter().take(8) {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

fn csv_document(hash: &str, header: &str, rows: &[String]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# eprsim {} config={hash}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "{header}");
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

/// Assemble the OPO -> (cavity) -> loss network described by a config.
pub fn build_port_network(cfg: &ExperimentConfig) -> Result<NoisePortSet, CliError> {
    let grid = FrequencyGrid::new(
        cfg.grid.f_min_hz,
        cfg.grid.f_max_hz,
        cfg.grid.points,
        cfg.grid.scale,
    )?;
    let gamma_tot = TAU * cfg.opo.hwhm_hz;
    let opo = OpoParams::from_escape(
        cfg.pump_parameter(),
        cfg.opo.pump_phase_rad,
        gamma_tot,
        cfg.opo.escape_efficiency,
    )?;
    let mut net = opo_ports(&opo, &grid)?;
    if cfg.cavity.enabled {
        let cav = CavityParams::new(
            TAU * cfg.cavity.hwhm_hz,
            cfg.cavity.eta_in,
            cfg.cavity.detuning_signal_hwhm,
            cfg.cavity.detuning_idler_hwhm,
        )?;
        let (t, ports) = cavity_ports(&cav, &grid)?;
        net = compose(&net, &t, &ports)?;
    }
    let loss = LossChannel::new(cfg.losses.signal_efficiency, cfg.losses.idler_efficiency)?;
    let (t, ports) = loss_ports(&loss, &grid)?;
    Ok(compose(&net, &t, &ports)?)
}

pub fn build_covariance(cfg: &ExperimentConfig) -> Result<SpectralCovariance, CliError> {
    Ok(build_port_network(cfg)?.covariance()?)
}

fn numerical(e: eprsim_core::Error) -> CliError {
    CliError::Numerical(e.to_string())
}

/// Variance-vs-frequency CSV, one dB column per requested readout angle
/// (fixed combiner) or a single conditioned column (wiener combiner).
pub fn cmd_spectrum(cfg: &ExperimentConfig, angles: &[f64]) -> Result<String, CliError> {
    let s = build_covariance(cfg)?;
    let hash = short_hash(&[cfg.serialize().as_bytes()]);
    let freqs = s.grid().frequencies_hz();

    match cfg.readout.combiner {
        Combiner::Fixed => {
            if angles.is_empty() {
                return Err(CliError::Usage("spectrum needs at least one angle".into()));
            }
            let mut header = String::from("frequency_hz");
            let mut columns = Vec::with_capacity(angles.len());
            for &phi_i in angles {
                let _ = write!(header, ",variance_db_phi_{}", sig6(phi_i));
                let readout = ReadoutConfig {
                    phi_s: cfg.readout.signal_lo_phase_rad,
                    phi_i,
                    gain_s: cfg.readout.gain_signal,
                    gain_i: cfg.readout.gain_idler,
                    combiner_sign: cfg.readout.combiner_sign,
                };
                let variances = homodyne_variance(&s, &readout).map_err(numerical)?;
                let mut db = Vec::with_capacity(variances.len());
                for v in variances {
                    db.push(to_db(v).map_err(numerical)?);
                }
                columns.push(db);
            }
            let rows: Vec<String> = freqs
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let mut row = sig6(*f);
                    for col in &columns {
                        let _ = write!(row, ",{}", db6(col[k]));
                    }
                    row
                })
                .collect();
            Ok(csv_document(&hash, &header, &rows))
        }
        Combiner::Wiener => {
            let w =
                wiener_conditional(&s, cfg.readout.signal_lo_phase_rad).map_err(numerical)?;
            let header = "frequency_hz,variance_db,wiener_gain_abs,wiener_gain_phase_rad";
            let rows: Vec<String> = freqs
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let db = to_db(w.variance[k].max(1e-300)).unwrap_or(f64::NEG_INFINITY);
                    format!(
                        "{},{},{},{}",
                        sig6(*f),
                        db6(db),
                        sig6(w.gains[k].norm()),
                        sig6(w.gains[k].arg())
                    )
                })
                .collect();
            Ok(csv_document(&hash, header, &rows))
        }
    }
}

/// Long-format sweep CSV over the config's readout-angle grid
/// (`frequency_hz,readout_angle_rad,variance_db`, frequency-major order).
/// With `band`, emit the band-averaged variance per angle instead.
pub fn cmd_sweep(cfg: &ExperimentConfig, band: Option<(f64, f64)>) -> Result<String, CliError> {
    let s = build_covariance(cfg)?;
    let angles = cfg.angle_grid();
    let freqs = s.grid().frequencies_hz();

    let mut per_angle = Vec::with_capacity(angles.len());
    for &phi_i in &angles {
        let readout = ReadoutConfig {
            phi_s: cfg.readout.signal_lo_phase_rad,
            phi_i,
            gain_s: cfg.readout.gain_signal,
            gain_i: cfg.readout.gain_idler,
            combiner_sign: cfg.readout.combiner_sign,
        };
        per_angle.push(homodyne_variance(&s, &readout).map_err(numerical)?);
    }

    match band {
        None => {
            let hash = short_hash(&[cfg.serialize().as_bytes()]);
            let mut rows = Vec::with_capacity(freqs.len() * angles.len());
            for (k, f) in freqs.iter().enumerate() {
                for (a, phi) in angles.iter().enumerate() {
                    let db = to_db(per_angle[a][k]).map_err(numerical)?;
                    rows.push(format!("{},{},{}", sig6(*f), sig6(*phi), db6(db)));
                }
            }
            Ok(csv_document(&hash, "frequency_hz,readout_angle_rad,variance_db", &rows))
        }
        Some((lo, hi)) => {
            if !(lo > 0.0 && lo < hi) {
                return Err(CliError::Usage(format!(
                    "band bounds must satisfy 0 < lo < hi, got {lo}:{hi}"
                )));
            }
            let selected: Vec<usize> = freqs
                .iter()
                .enumerate()
                .filter(|(_, f)| **f >= lo && **f <= hi)
                .map(|(k, _)| k)
                .collect();
            if selected.is_empty() {
                return Err(CliError::Usage(format!(
                    "band {lo}:{hi} Hz contains no grid points"
                )));
            }
            let band_line = format!("band = {}:{}\n", sig6(lo), sig6(hi));
            let hash = short_hash(&[cfg.serialize().as_bytes(), band_line.as_bytes()]);
            let mut rows = Vec::with_capacity(angles.len());
            for (a, phi) in angles.iter().enumerate() {
                let mean: f64 =
                    selected.iter().map(|&k| per_angle[a][k]).sum::<f64>() / selected.len() as f64;
                rows.push(format!(
                    "{},{}",
                    sig6(*phi),
                    db6(to_db(mean).map_err(numerical)?)
                ));
            }
            Ok(csv_document(&hash, "readout_angle_rad,band_mean_variance_db", &rows))
        }
    }
}

/// Options for [`cmd_fit_loss`].
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Fixed threshold power; `None` floats it as a fit parameter.
    pub threshold_mw: Option<f64>,
    pub gamma_opo_hz: f64,
    /// Dark-noise level relative to shot noise (dB), subtracted from the
    /// measured variances before fitting.
    pub dark_noise_db: Option<f64>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            threshold_mw: Some(DEFAULT_THRESHOLD_MW),
            gamma_opo_hz: 12.1e6,
            dark_noise_db: None,
        }
    }
}

/// Parse the measurement CSV (`pump_power_mw,v_plus_db,v_minus_db`),
/// run the loss fit, and render a plain-text report plus a fit-curve CSV.
pub fn cmd_fit_loss(
    csv_text: &str,
    origin: &str,
    opts: &FitOptions,
) -> Result<(String, String), CliError> {
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in csv_text.lines().enumerate() {
        let line = raw.trim();
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "pump_power_mw,v_plus_db,v_minus_db" {
                return Err(CliError::Config {
                    path: origin.to_string(),
                    line: Some(lineno),
                    message: format!(
                        "expected header `pump_power_mw,v_plus_db,v_minus_db`, got `{line}`"
                    ),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(CliError::Config {
                path: origin.to_string(),
                line: Some(lineno),
                message: format!("expected 3 comma-separated fields, got {}", fields.len()),
            });
        }
        let mut nums = [0.0f64; 3];
        for (slot, field) in nums.iter_mut().zip(&fields) {
            *slot = field.trim().parse().map_err(|_| CliError::Config {
                path: origin.to_string(),
                line: Some(lineno),
                message: format!("`{field}` is not a number"),
            })?;
        }
        let dark = opts.dark_noise_db.map(|d| 10f64.powf(d / 10.0)).unwrap_or(0.0);
        let v_plus = 10f64.powf(nums[1] / 10.0) - dark;
        let v_minus = 10f64.powf(nums[2] / 10.0) - dark;
        if v_plus <= 0.0 || v_minus <= 0.0 {
            return Err(CliError::Config {
                path: origin.to_string(),
                line: Some(lineno),
                message: "dark-noise subtraction left a non-positive variance".into(),
            });
        }
        records.push(LossRecord {
            pump_power_mw: nums[0],
            v_plus,
            v_minus,
            omega: 0.0,
        });
    }
    if !saw_header || records.is_empty() {
        return Err(CliError::Config {
            path: origin.to_string(),
            line: None,
            message: "no data records found".into(),
        });
    }

    let input = LossFitInput {
        records,
        threshold_mw: opts.threshold_mw,
        gamma_opo: TAU * opts.gamma_opo_hz,
    };
    let fit = fit_detection_loss(&input)?;

    let mut report = String::new();
    let _ = writeln!(report, "detection-loss fit");
    let _ = writeln!(report, "  records:          {}", input.records.len());
    let _ = writeln!(
        report,
        "  threshold_mw:     {:.6} ({})",
        fit.threshold_mw,
        if fit.threshold_fitted { "fitted" } else { "fixed" }
    );
    let _ = writeln!(report, "  loss:             {:.6}", fit.loss);
    let _ = writeln!(report, "  rms_residual_db:  {:.6}", fit.rms_residual_db);
    let _ = writeln!(report, "  iterations:       {}", fit.iterations);

    let opts_line = format!(
        "threshold={:?} gamma_opo_hz={} dark={:?}\n",
        opts.threshold_mw, opts.gamma_opo_hz, opts.dark_noise_db
    );
    let hash = short_hash(&[csv_text.as_bytes(), opts_line.as_bytes()]);
    let header =
        "pump_power_mw,x,v_plus_db_data,v_minus_db_data,v_plus_db_fit,v_minus_db_fit";
    let mut rows = Vec::with_capacity(input.records.len());
    for (rec, &x) in input.records.iter().zip(&fit.x_values) {
        let (mp, mm) = eprsim_core::analysis::methods_loss_oracle(
            x.min(0.999_999),
            fit.loss,
            rec.omega / input.gamma_opo,
        );
        rows.push(format!(
            "{},{},{},{},{},{}",
            sig6(rec.pump_power_mw),
            sig6(x),
            sig6(10.0 * rec.v_plus.log10()),
            sig6(10.0 * rec.v_minus.log10()),
            sig6(10.0 * mp.log10()),
            sig6(10.0 * mm.log10()),
        ));
    }
    Ok((report, csv_document(&hash, header, &rows)))
}

/// Which CLF phase a sweep ramps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    PhiC,
    PhiLo,
    ThetaB,
}

impl std::fmt::Display for SweepVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepVar::PhiC => write!(f, "phi-c"),
            SweepVar::PhiLo => write!(f, "phi-lo"),
            SweepVar::ThetaB => write!(f, "theta-b"),
        }
    }
}

/// Options for [`cmd_clf`].
#[derive(Debug, Clone)]
pub struct ClfOptions {
    pub x: f64,
    pub theta_b: f64,
    pub phi_c: f64,
    pub phi_lo: f64,
    pub gamma_clf_hz: f64,
    pub gamma_in_hz: f64,
    pub gamma_tot_hz: f64,
    pub gain: f64,
    pub locked: bool,
    pub sweep: SweepVar,
    pub sweep_start: f64,
    pub sweep_stop: f64,
    pub sweep_points: usize,
}

impl Default for ClfOptions {
    fn default() -> Self {
        Self {
            x: 0.29,
            theta_b: 0.0,
            phi_c: 0.0,
            phi_lo: 0.0,
            gamma_clf_hz: 1.21e6,
            gamma_in_hz: 12.1e6,
            gamma_tot_hz: 12.1e6,
            gain: 1.0,
            locked: false,
            sweep: SweepVar::PhiC,
            sweep_start: 0.0,
            sweep_stop: TAU,
            sweep_points: 361,
        }
    }
}

/// Reflection and transmission error signals versus one swept phase
/// (`swept_phase_rad,e_reflection,e_transmission`).
pub fn cmd_clf(opts: &ClfOptions) -> Result<String, CliError> {
    if opts.sweep_points < 2 {
        return Err(CliError::Usage("sweep needs at least 2 points".into()));
    }
    let step = (opts.sweep_stop - opts.sweep_start) / (opts.sweep_points - 1) as f64;
    let descriptor = format!(
        "clf x={} theta_b={} phi_c={} phi_lo={} gclf={} gin={} gtot={} gain={} locked={} sweep={} {}..{} n={}\n",
        opts.x, opts.theta_b, opts.phi_c, opts.phi_lo, opts.gamma_clf_hz, opts.gamma_in_hz,
        opts.gamma_tot_hz, opts.gain, opts.locked, opts.sweep, opts.sweep_start,
        opts.sweep_stop, opts.sweep_points,
    );
    let hash = short_hash(&[descriptor.as_bytes()]);

    let mut rows = Vec::with_capacity(opts.sweep_points);
    for k in 0..opts.sweep_points {
        let value = if k == opts.sweep_points - 1 {
            opts.sweep_stop
        } else {
            opts.sweep_start + k as f64 * step
        };
        let mut params = ClfParams {
            theta_b: opts.theta_b,
            phi_c: opts.phi_c,
            phi_lo: opts.phi_lo,
            x: opts.x,
            gamma_clf: TAU * opts.gamma_clf_hz,
            gamma_in: TAU * opts.gamma_in_hz,
            gamma_tot: TAU * opts.gamma_tot_hz,
            amplitude_gain: opts.gain,
        };
        match opts.sweep {
            SweepVar::PhiC => params.phi_c = value,
            SweepVar::PhiLo => params.phi_lo = value,
            SweepVar::ThetaB => params.theta_b = value,
        }
        let refl = clf_reflection_error(&params)?;
        let trans = clf_transmission_error(&params, opts.locked)?;
        rows.push(format!("{},{},{}", sig6(value), sig6(refl), sig6(trans)));
    }
    Ok(csv_document(&hash, "swept_phase_rad,e_reflection,e_transmission", &rows))
}

/// Human-readable summary of a parsed config.
pub fn cmd_validate(cfg: &ExperimentConfig, origin: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "config ok: {origin}");
    let x = cfg.pump_parameter();
    let route = if cfg.opo.x.is_some() { "direct" } else { "pump power" };
    let _ = writeln!(
        out,
        "  opo:     x = {:.6} ({route}), hwhm = {} Hz, escape = {}, pump phase = {:.6} rad",
        x, cfg.opo.hwhm_hz, cfg.opo.escape_efficiency, cfg.opo.pump_phase_rad
    );
    if cfg.cavity.enabled {
        let _ = writeln!(
            out,
            "  cavity:  hwhm = {} Hz, eta_in = {}, detuning (signal, idler) = ({}, {}) hwhm units",
            cfg.cavity.hwhm_hz,
            cfg.cavity.eta_in,
            cfg.cavity.detuning_signal_hwhm,
            cfg.cavity.detuning_idler_hwhm
        );
    } else {
        let _ = writeln!(out, "  cavity:  disabled");
    }
    let _ = writeln!(
        out,
        "  losses:  signal = {}, idler = {}",
        cfg.losses.signal_efficiency, cfg.losses.idler_efficiency
    );
    let _ = writeln!(
        out,
        "  readout: phi_s = {} rad, angles {}..{} rad ({} points), gains ({}, {}), combiner {} (sign {})",
        cfg.readout.signal_lo_phase_rad,
        cfg.readout.angle_start_rad,
        cfg.readout.angle_stop_rad,
        cfg.readout.angle_count,
        cfg.readout.gain_signal,
        cfg.readout.gain_idler,
        cfg.readout.combiner,
        cfg.readout.combiner_sign
    );
    let _ = writeln!(
        out,
        "  grid:    {}..{} Hz, {} points, {}",
        cfg.grid.f_min_hz, cfg.grid.f_max_hz, cfg.grid.points, cfg.grid.scale
    );
    let mut ports = vec!["opo.input"];
    if cfg.opo.escape_efficiency < 1.0 {
        ports.push("opo.loss");
    }
    if cfg.cavity.enabled && cfg.cavity.eta_in < 1.0 {
        ports.push("cavity.loss");
    }
    if cfg.losses.signal_efficiency < 1.0 {
        ports.push("path.loss.signal");
    }
    if cfg.losses.idler_efficiency < 1.0 {
        ports.push("path.loss.idler");
    }
    let _ = writeln!(out, "  ports:   {}", ports.join(", "));
    out
}

/// Parse a comma-separated list of angles in radians.
pub fn parse_angles(list: &str) -> Result<Vec<f64>, CliError> {
    let mut out = Vec::new();
    for part in list.split(',') {
        let part = part.trim();
        out.push(part.parse::<f64>().map_err(|_| {
            CliError::Usage(format!("--angles: `{part}` is not a number"))
        })?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("--angles: empty list".into()));
    }
    Ok(out)
}

/// Parse a `lo:hi` frequency band in Hz.
pub fn parse_band(spec: &str) -> Result<(f64, f64), CliError> {
    let (lo, hi) = spec
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("--band: expected `lo:hi`, got `{spec}`")))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--band: `{lo}` is not a number")))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--band: `{hi}` is not a number")))?;
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, "test").unwrap()
    }

    fn vacuum_config() -> ExperimentConfig {
        parse("opo.x = 0\ngrid.points = 4\n")
    }

    #[test]
    fn sig6_is_stable() {
        assert_eq!(sig6(0.0), "0.00000e0");
        assert_eq!(sig6(-0.0), "0.00000e0");
        assert_eq!(sig6(125000.0), "1.25000e5");
        assert_eq!(sig6(-2.00331), "-2.00331e0");
    }

    #[test]
    fn vacuum_spectrum_is_zero_db() {
        let csv = cmd_spectrum(&vacuum_config(), &[0.0, 1.0]).unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("# eprsim "));
        assert_eq!(
            lines.next().unwrap(),
            "frequency_hz,variance_db_phi_0.00000e0,variance_db_phi_1.00000e0"
        );
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[1], "0.00000e0");
            assert_eq!(fields[2], "0.00000e0");
        }
    }

    #[test]
    fn vacuum_sweep_is_uniform_and_periodic() {
        let cfg = parse("opo.x = 0\ngrid.points = 3\nreadout.angle_count = 9\n");
        let csv = cmd_sweep(&cfg, None).unwrap();
        let data: Vec<&str> = csv.lines().skip(2).collect();
        assert_eq!(data.len(), 3 * 9);
        for line in &data {
            assert!(line.ends_with(",0.00000e0"), "{line}");
        }
    }

    #[test]
    fn band_average_selects_points() {
        let cfg = parse("opo.x = 0\ngrid.points = 10\nreadout.angle_count = 4\n");
        let csv = cmd_sweep(&cfg, Some((1e5, 1e6))).unwrap();
        assert!(csv.lines().nth(1).unwrap().starts_with("readout_angle_rad"));
        assert_eq!(csv.lines().count(), 2 + 4);
        assert!(cmd_sweep(&cfg, Some((1e9, 2e9))).is_err());
        assert!(cmd_sweep(&cfg, Some((2e5, 1e5))).is_err());
    }

    #[test]
    fn fit_loss_round_trip_via_csv() {
        let mut csv = String::from("pump_power_mw,v_plus_db,v_minus_db\n");
        for x in [0.2f64, 0.4, 0.6] {
            let (p, m) = eprsim_core::analysis::methods_loss_oracle(x, 0.49, 0.0);
            let _ = writeln!(
                csv,
                "{},{},{}",
                x * x * 66.3,
                10.0 * p.log10(),
                10.0 * m.log10()
            );
        }
        let (report, curve) = cmd_fit_loss(&csv, "mem", &FitOptions::default()).unwrap();
        assert!(report.contains("loss:             0.49000"), "{report}");
        assert!(report.contains("(fixed)"));
        assert_eq!(curve.lines().count(), 2 + 3);
    }

    #[test]
    fn fit_loss_dark_noise_subtraction_recovers_clean_fit() {
        // Contaminate with a dark floor 10 dB below shot noise (0.1 linear).
        let mut csv = String::from("pump_power_mw,v_plus_db,v_minus_db\n");
        for x in [0.2f64, 0.4, 0.6] {
            let (p, m) = eprsim_core::analysis::methods_loss_oracle(x, 0.49, 0.0);
            let _ = writeln!(
                csv,
                "{},{},{}",
                x * x * 66.3,
                10.0 * (p + 0.1).log10(),
                10.0 * (m + 0.1).log10()
            );
        }
        let opts = FitOptions {
            dark_noise_db: Some(-10.0),
            ..Default::default()
        };
        let (report, _) = cmd_fit_loss(&csv, "mem", &opts).unwrap();
        let loss: f64 = report
            .lines()
            .find(|l| l.contains("loss:"))
            .and_then(|l| l.split_whitespace().last())
            .unwrap()
            .parse()
            .unwrap();
        assert!((loss - 0.49).abs() < 0.01, "loss = {loss}");
    }

    #[test]
    fn fit_loss_rejects_malformed_csv_with_line_numbers() {
        let err = cmd_fit_loss("bogus header\n", "mem", &FitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");

        let err = cmd_fit_loss(
            "pump_power_mw,v_plus_db,v_minus_db\n1.0,2.0\n",
            "mem",
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");

        let err = cmd_fit_loss(
            "pump_power_mw,v_plus_db,v_minus_db\n1.0,abc,0.0\n",
            "mem",
            &FitOptions::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("not a number"), "{err}");

        let err = cmd_fit_loss("", "mem", &FitOptions::default()).unwrap_err();
        assert!(err.to_string().contains("no data records"), "{err}");
    }

    #[test]
    fn clf_reflection_zeros_on_half_pi_grid() {
        let opts = ClfOptions {
            sweep_points: 9,
            ..Default::default()
        };
        let csv = cmd_clf(&opts).unwrap();
        // theta_b = 0: reflection zeros wherever 2*phi_c is a multiple of pi.
        for line in csv.lines().skip(2).step_by(2) {
            let refl: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
            assert!(refl.abs() < 1e-12, "{line}");
        }
    }

    #[test]
    fn clf_locked_sweep_zero_at_half_pump_phase() {
        let opts = ClfOptions {
            theta_b: 1.3,
            locked: true,
            sweep: SweepVar::PhiLo,
            sweep_start: 0.0,
            sweep_stop: TAU,
            sweep_points: 1001,
            ..Default::default()
        };
        let csv = cmd_clf(&opts).unwrap();
        let mut zero_crossings = 0;
        let values: Vec<(f64, f64)> = csv
            .lines()
            .skip(2)
            .map(|l| {
                let mut it = l.split(',');
                let phase: f64 = it.next().unwrap().parse().unwrap();
                let trans: f64 = it.nth(1).unwrap().parse().unwrap();
                (phase, trans)
            })
            .collect();
        for pair in values.windows(2) {
            if pair[0].1.signum() != pair[1].1.signum() {
                zero_crossings += 1;
                let mid = 0.5 * (pair[0].0 + pair[1].0);
                let dist = (mid - 1.3 / 2.0).rem_euclid(std::f64::consts::PI);
                let dist = dist.min(std::f64::consts::PI - dist);
                assert!(dist < 0.01, "crossing at {mid}");
            }
        }
        assert_eq!(zero_crossings, 2);
    }

    #[test]
    fn clf_pole_is_reported() {
        let opts = ClfOptions {
            x: 1.0,
            ..Default::default()
        };
        assert!(cmd_clf(&opts).is_err());
    }

    #[test]
    fn validate_lists_ports() {
        let cfg = parse(
            "opo.x = 0.29\nopo.escape_efficiency = 0.9\ncavity.enabled = true\ncavity.eta_in = 0.95\nlosses.signal_efficiency = 0.53\n",
        );
        let text = cmd_validate(&cfg, "test");
        assert!(text.contains("opo.input"));
        assert!(text.contains("opo.loss"));
        assert!(text.contains("cavity.loss"));
        assert!(text.contains("path.loss.signal"));
        assert!(!text.contains("path.loss.idler"));
    }

    #[test]
    fn angle_and_band_parsers() {
        assert_eq!(parse_angles("0, 3.14 ,1e-2").unwrap(), vec![0.0, 3.14, 0.01]);
        assert!(parse_angles("0,abc").is_err());
        assert_eq!(parse_band("2e5:3e5").unwrap(), (2e5, 3e5));
        assert!(parse_band("2e5").is_err());
    }

    #[test]
    fn wiener_spectrum_dips_below_shot_noise() {
        let cfg = parse(
            "opo.x = 0.29\nlosses.signal_efficiency = 0.53\nlosses.idler_efficiency = 0.53\nreadout.combiner = wiener\ngrid.points = 5\ngrid.f_min_hz = 1e4\ngrid.f_max_hz = 1e6\n",
        );
        let csv = cmd_spectrum(&cfg, &[]).unwrap();
        let first = csv.lines().nth(2).unwrap();
        let db: f64 = first.split(',').nth(1).unwrap().parse().unwrap();
        assert!(db < -1.5, "conditioned variance {db} dB");
    }
}
