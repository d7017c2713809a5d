//! Experiment configuration: a flat key/value text format with dotted
//! section keys, a canonical serializer, and validation that re-checks the
//! model invariants at parse time.
//!
//! Grammar: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored. Keys are dotted (`opo.x`, `grid.scale`); values
//! are decimal numbers (`1.25e6`), booleans (`true`/`false`) or the
//! enumerated words documented per key. Serialization emits every key in a
//! fixed order with Rust's shortest-round-trip float formatting, so a
//! canonical file reserializes byte-identically.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use eprsim_core::GridScale;

use crate::CliError;

/// How the two homodyne readouts are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Combiner {
    /// Fixed electronic gains at a fixed idler LO phase (or a sweep of it).
    Fixed,
    /// Per-frequency optimal complex filter on the idler readout.
    Wiener,
}

impl std::fmt::Display for Combiner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Combiner::Fixed => write!(f, "fixed"),
            Combiner::Wiener => write!(f, "wiener"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpoSection {
    /// Normalized pump parameter. Mutually exclusive with `pump_power_mw`.
    pub x: Option<f64>,
    pub pump_power_mw: Option<f64>,
    pub threshold_mw: Option<f64>,
    /// OPO half-linewidth in Hz.
    pub hwhm_hz: f64,
    pub escape_efficiency: f64,
    pub pump_phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavitySection {
    pub enabled: bool,
    /// Cavity half-linewidth in Hz.
    pub hwhm_hz: f64,
    pub eta_in: f64,
    /// Detunings in units of the cavity half-linewidth.
    pub detuning_signal_hwhm: f64,
    pub detuning_idler_hwhm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSection {
    pub signal_efficiency: f64,
    pub idler_efficiency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutSection {
    pub signal_lo_phase_rad: f64,
    pub angle_start_rad: f64,
    pub angle_stop_rad: f64,
    pub angle_count: usize,
    pub gain_signal: f64,
    pub gain_idler: f64,
    pub combiner: Combiner,
    pub combiner_sign: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSection {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
    pub scale: GridScale,
}

/// Full experiment description as read from a config file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub opo: OpoSection,
    pub cavity: CavitySection,
    pub losses: LossSection,
    pub readout: ReadoutSection,
    pub grid: GridSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            opo: OpoSection {
                x: None,
                pump_power_mw: None,
                threshold_mw: None,
                hwhm_hz: 12.1e6,
                escape_efficiency: 1.0,
                pump_phase_rad: std::f64::consts::PI,
            },
            cavity: CavitySection {
                enabled: false,
                hwhm_hz: 1.25e6,
                eta_in: 1.0,
                detuning_signal_hwhm: 0.0,
                detuning_idler_hwhm: 0.0,
            },
            losses: LossSection { signal_efficiency: 1.0, idler_efficiency: 1.0 },
            readout: ReadoutSection {
                signal_lo_phase_rad: 0.0,
                angle_start_rad: 0.0,
                angle_stop_rad: 2.0 * std::f64::consts::PI,
                angle_count: 181,
                gain_signal: 1.0,
                gain_idler: 1.0,
                combiner: Combiner::Fixed,
                combiner_sign: -1.0,
            },
            grid: GridSection {
                f_min_hz: 1e4,
                f_max_hz: 1e8,
                points: 200,
                scale: GridScale::Log,
            },
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "opo.x",
    "opo.pump_power_mw",
    "opo.threshold_mw",
    "opo.hwhm_hz",
    "opo.escape_efficiency",
    "opo.pump_phase_rad",
    "cavity.enabled",
    "cavity.hwhm_hz",
    "cavity.eta_in",
    "cavity.detuning_signal_hwhm",
    "cavity.detuning_idler_hwhm",
    "losses.signal_efficiency",
    "losses.idler_efficiency",
    "readout.signal_lo_phase_rad",
    "readout.angle_start_rad",
    "readout.angle_stop_rad",
    "readout.angle_count",
    "readout.gain_signal",
    "readout.gain_idler",
    "readout.combiner",
    "readout.combiner_sign",
    "grid.f_min_hz",
    "grid.f_max_hz",
    "grid.points",
    "grid.scale",
];

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut row = vec![i + 1];
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            row.push(sub.min(prev[j + 1] + 1).min(row[j] + 1));
        }
        prev = row;
    }
    prev[b.len()]
}

fn nearest_key(key: &str) -> &'static str {
    KNOWN_KEYS
        .iter()
        .min_by_key(|k| levenshtein(key, k))
        .copied()
        .unwrap_or("opo.x")
}

fn config_err(path: &str, line: Option<usize>, msg: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.to_string(),
        line,
        message: msg.into(),
    }
}

impl ExperimentConfig {
    /// Parse and validate a config file from disk.
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parse and validate config text. `origin` labels error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut pairs: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line.split_once('=').ok_or_else(|| {
                config_err(origin, Some(lineno), format!("expected `key = value`, got `{line}`"))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(config_err(
                    origin,
                    Some(lineno),
                    format!("unknown key `{key}` (did you mean `{}`?)", nearest_key(key)),
                ));
            }
            if pairs.insert(key, (lineno, value)).is_some() {
                return Err(config_err(origin, Some(lineno), format!("duplicate key `{key}`")));
            }
        }

        let mut cfg = ExperimentConfig::default();
        let get_f64 = |pairs: &BTreeMap<&str, (usize, &str)>, key: &str| -> Result<Option<f64>, CliError> {
            match pairs.get(key) {
                None => Ok(None),
                Some((lineno, v)) => v.parse::<f64>().map(Some).map_err(|_| {
                    config_err(origin, Some(*lineno), format!("key `{key}`: `{v}` is not a number"))
                }),
            }
        };
        let get_usize = |pairs: &BTreeMap<&str, (usize, &str)>, key: &str| -> Result<Option<usize>, CliError> {
            match pairs.get(key) {
                None => Ok(None),
                Some((lineno, v)) => v.parse::<usize>().map(Some).map_err(|_| {
                    config_err(origin, Some(*lineno), format!("key `{key}`: `{v}` is not a non-negative integer"))
                }),
            }
        };
        let get_bool = |pairs: &BTreeMap<&str, (usize, &str)>, key: &str| -> Result<Option<bool>, CliError> {
            match pairs.get(key) {
                None => Ok(None),
                Some((lineno, v)) => match *v {
                    "true" => Ok(Some(true)),
                    "false" => Ok(Some(false)),
                    other => Err(config_err(
                        origin,
                        Some(*lineno),
                        format!("key `{key}`: expected `true` or `false`, got `{other}`"),
                    )),
                },
            }
        };

        cfg.opo.x = get_f64(&pairs, "opo.x")?;
        cfg.opo.pump_power_mw = get_f64(&pairs, "opo.pump_power_mw")?;
        cfg.opo.threshold_mw = get_f64(&pairs, "opo.threshold_mw")?;
        if let Some(v) = get_f64(&pairs, "opo.hwhm_hz")? {
            cfg.opo.hwhm_hz = v;
        }
        if let Some(v) = get_f64(&pairs, "opo.escape_efficiency")? {
            cfg.opo.escape_efficiency = v;
        }
        if let Some(v) = get_f64(&pairs, "opo.pump_phase_rad")? {
            cfg.opo.pump_phase_rad = v;
        }
        if let Some(v) = get_bool(&pairs, "cavity.enabled")? {
            cfg.cavity.enabled = v;
        }
        if let Some(v) = get_f64(&pairs, "cavity.hwhm_hz")? {
            cfg.cavity.hwhm_hz = v;
        }
        if let Some(v) = get_f64(&pairs, "cavity.eta_in")? {
            cfg.cavity.eta_in = v;
        }
        if let Some(v) = get_f64(&pairs, "cavity.detuning_signal_hwhm")? {
            cfg.cavity.detuning_signal_hwhm = v;
        }
        if let Some(v) = get_f64(&pairs, "cavity.detuning_idler_hwhm")? {
            cfg.cavity.detuning_idler_hwhm = v;
        }
        if let Some(v) = get_f64(&pairs, "losses.signal_efficiency")? {
            cfg.losses.signal_efficiency = v;
        }
        if let Some(v) = get_f64(&pairs, "losses.idler_efficiency")? {
            cfg.losses.idler_efficiency = v;
        }
        if let Some(v) = get_f64(&pairs, "readout.signal_lo_phase_rad")? {
            cfg.readout.signal_lo_phase_rad = v;
        }
        if let Some(v) = get_f64(&pairs, "readout.angle_start_rad")? {
            cfg.readout.angle_start_rad = v;
        }
        if let Some(v) = get_f64(&pairs, "readout.angle_stop_rad")? {
            cfg.readout.angle_stop_rad = v;
        }
        if let Some(v) = get_usize(&pairs, "readout.angle_count")? {
            cfg.readout.angle_count = v;
        }
        if let Some(v) = get_f64(&pairs, "readout.gain_signal")? {
            cfg.readout.gain_signal = v;
        }
        if let Some(v) = get_f64(&pairs, "readout.gain_idler")? {
            cfg.readout.gain_idler = v;
        }
        if let Some((lineno, v)) = pairs.get("readout.combiner") {
            cfg.readout.combiner = match *v {
                "fixed" => Combiner::Fixed,
                "wiener" => Combiner::Wiener,
                other => {
                    return Err(config_err(
                        origin,
                        Some(*lineno),
                        format!("key `readout.combiner`: expected `fixed` or `wiener`, got `{other}`"),
                    ))
                }
            };
        }
        if let Some(v) = get_f64(&pairs, "readout.combiner_sign")? {
            cfg.readout.combiner_sign = v;
        }
        if let Some(v) = get_f64(&pairs, "grid.f_min_hz")? {
            cfg.grid.f_min_hz = v;
        }
        if let Some(v) = get_f64(&pairs, "grid.f_max_hz")? {
            cfg.grid.f_max_hz = v;
        }
        if let Some(v) = get_usize(&pairs, "grid.points")? {
            cfg.grid.points = v;
        }
        if let Some((lineno, v)) = pairs.get("grid.scale") {
            cfg.grid.scale = match *v {
                "linear" => GridScale::Linear,
                "log" => GridScale::Log,
                other => {
                    return Err(config_err(
                        origin,
                        Some(*lineno),
                        format!("key `grid.scale`: expected `linear` or `log`, got `{other}`"),
                    ))
                }
            };
        }

        cfg.validate(origin)?;
        Ok(cfg)
    }

    /// Re-check every model invariant the sections feed into.
    pub fn validate(&self, origin: &str) -> Result<(), CliError> {
        let e = |msg: String| config_err(origin, None, msg);

        match (self.opo.x, self.opo.pump_power_mw) {
            (Some(_), Some(_)) => {
                return Err(e("opo.x and opo.pump_power_mw are mutually exclusive".into()))
            }
            (None, None) => {
                return Err(e("one of opo.x or opo.pump_power_mw must be set".into()))
            }
            (Some(x), None) => {
                if !(0.0..1.0).contains(&x) {
                    return Err(e(format!(
                        "opo.x = {x} violates the below-threshold invariant 0 <= x < 1"
                    )));
                }
            }
            (None, Some(p)) => {
                let th = self.opo.threshold_mw.ok_or_else(|| {
                    config_err(
                        origin,
                        None,
                        "opo.pump_power_mw requires opo.threshold_mw".to_string(),
                    )
                })?;
                if !(p > 0.0 && th > 0.0 && p < th) {
                    return Err(e(format!(
                        "pump power must satisfy 0 < pump_power_mw < threshold_mw, got {p} vs {th}"
                    )));
                }
            }
        }
        if !(self.opo.hwhm_hz > 0.0) {
            return Err(e(format!(
                "opo.hwhm_hz = {} violates hwhm_hz > 0",
                self.opo.hwhm_hz
            )));
        }
        if !(self.opo.escape_efficiency > 0.0 && self.opo.escape_efficiency <= 1.0) {
            return Err(e(format!(
                "opo.escape_efficiency = {} violates 0 < eta_esc <= 1",
                self.opo.escape_efficiency
            )));
        }
        if self.cavity.enabled {
            if !(self.cavity.hwhm_hz > 0.0) {
                return Err(e(format!(
                    "cavity.hwhm_hz = {} violates hwhm_hz > 0",
                    self.cavity.hwhm_hz
                )));
            }
            if !(self.cavity.eta_in > 0.0 && self.cavity.eta_in <= 1.0) {
                return Err(e(format!(
                    "cavity.eta_in = {} violates 0 < eta_in <= 1",
                    self.cavity.eta_in
                )));
            }
            if !self.cavity.detuning_signal_hwhm.is_finite()
                || !self.cavity.detuning_idler_hwhm.is_finite()
            {
                return Err(e("cavity detunings must be finite".into()));
            }
        }
        for (name, eta) in [
            ("losses.signal_efficiency", self.losses.signal_efficiency),
            ("losses.idler_efficiency", self.losses.idler_efficiency),
        ] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(e(format!("{name} = {eta} violates 0 <= efficiency <= 1")));
            }
        }
        if self.readout.gain_signal == 0.0 && self.readout.gain_idler == 0.0 {
            return Err(e("readout gains must not both be zero".into()));
        }
        if self.readout.combiner_sign != 1.0 && self.readout.combiner_sign != -1.0 {
            return Err(e(format!(
                "readout.combiner_sign = {} must be +1 or -1",
                self.readout.combiner_sign
            )));
        }
        if self.readout.angle_count == 0 {
            return Err(e("readout.angle_count must be at least 1".into()));
        }
        if !(self.grid.f_min_hz > 0.0 && self.grid.f_min_hz < self.grid.f_max_hz) {
            return Err(e(format!(
                "grid bounds violate 0 < f_min_hz < f_max_hz, got [{}, {}]",
                self.grid.f_min_hz, self.grid.f_max_hz
            )));
        }
        if self.grid.points < 2 {
            return Err(e(format!(
                "grid.points = {} violates points >= 2",
                self.grid.points
            )));
        }
        Ok(())
    }

    /// Effective pump parameter, from `opo.x` or the pump-power route
    /// `x = sqrt(P / P_th)`.
    pub fn pump_parameter(&self) -> f64 {
        match (self.opo.x, self.opo.pump_power_mw, self.opo.threshold_mw) {
            (Some(x), _, _) => x,
            (None, Some(p), Some(th)) => (p / th).sqrt(),
            _ => unreachable!("validated at parse time"),
        }
    }

    /// Inclusive readout-angle grid.
    pub fn angle_grid(&self) -> Vec<f64> {
        let n = self.readout.angle_count;
        if n == 1 {
            return vec![self.readout.angle_start_rad];
        }
        let step = (self.readout.angle_stop_rad - self.readout.angle_start_rad) / (n - 1) as f64;
        let mut angles: Vec<f64> = (0..n)
            .map(|k| self.readout.angle_start_rad + k as f64 * step)
            .collect();
        angles[n - 1] = self.readout.angle_stop_rad;
        angles
    }

    /// Canonical text form: every key, fixed order, shortest-round-trip
    /// float formatting. `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        if let Some(x) = self.opo.x {
            let _ = writeln!(out, "opo.x = {x}");
        }
        if let Some(p) = self.opo.pump_power_mw {
            let _ = writeln!(out, "opo.pump_power_mw = {p}");
        }
        if let Some(th) = self.opo.threshold_mw {
            let _ = writeln!(out, "opo.threshold_mw = {th}");
        }
        let _ = writeln!(out, "opo.hwhm_hz = {}", self.opo.hwhm_hz);
        let _ = writeln!(out, "opo.escape_efficiency = {}", self.opo.escape_efficiency);
        let _ = writeln!(out, "opo.pump_phase_rad = {}", self.opo.pump_phase_rad);
        let _ = writeln!(out, "cavity.enabled = {}", self.cavity.enabled);
        let _ = writeln!(out, "cavity.hwhm_hz = {}", self.cavity.hwhm_hz);
        let _ = writeln!(out, "cavity.eta_in = {}", self.cavity.eta_in);
        let _ = writeln!(out, "cavity.detuning_signal_hwhm = {}", self.cavity.detuning_signal_hwhm);
        let _ = writeln!(out, "cavity.detuning_idler_hwhm = {}", self.cavity.detuning_idler_hwhm);
        let _ = writeln!(out, "losses.signal_efficiency = {}", self.losses.signal_efficiency);
        let _ = writeln!(out, "losses.idler_efficiency = {}", self.losses.idler_efficiency);
        let _ = writeln!(out, "readout.signal_lo_phase_rad = {}", self.readout.signal_lo_phase_rad);
        let _ = writeln!(out, "readout.angle_start_rad = {}", self.readout.angle_start_rad);
        let _ = writeln!(out, "readout.angle_stop_rad = {}", self.readout.angle_stop_rad);
        let _ = writeln!(out, "readout.angle_count = {}", self.readout.angle_count);
        let _ = writeln!(out, "readout.gain_signal = {}", self.readout.gain_signal);
        let _ = writeln!(out, "readout.gain_idler = {}", self.readout.gain_idler);
        let _ = writeln!(out, "readout.combiner = {}", self.readout.combiner);
        let _ = writeln!(out, "readout.combiner_sign = {}", self.readout.combiner_sign);
        let _ = writeln!(out, "grid.f_min_hz = {}", self.grid.f_min_hz);
        let _ = writeln!(out, "grid.f_max_hz = {}", self.grid.f_max_hz);
        let _ = writeln!(out, "grid.points = {}", self.grid.points);
        let _ = writeln!(out, "grid.scale = {}", self.grid.scale);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        "opo.x = 0.29\n".to_string()
    }

    #[test]
    fn defaults_fill_unset_keys() {
        let cfg = ExperimentConfig::parse(&minimal(), "test").unwrap();
        assert_eq!(cfg.pump_parameter(), 0.29);
        assert!(!cfg.cavity.enabled);
        assert_eq!(cfg.grid.points, 200);
        assert_eq!(cfg.readout.combiner, Combiner::Fixed);
    }

    #[test]
    fn serialization_round_trips_value_identically() {
        let text = "\
opo.x = 0.29
cavity.enabled = true
cavity.detuning_idler_hwhm = 1
losses.signal_efficiency = 0.53
losses.idler_efficiency = 0.53
grid.points = 50
";
        let cfg = ExperimentConfig::parse(text, "test").unwrap();
        let reparsed = ExperimentConfig::parse(&cfg.serialize(), "test").unwrap();
        assert_eq!(cfg, reparsed);
        // Canonical text is a fixed point of serialize(parse(...)).
        assert_eq!(cfg.serialize(), reparsed.serialize());
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let err = ExperimentConfig::parse("opo.hwmh_hz = 1\nopo.x = 0.1\n", "test").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key"), "{msg}");
        assert!(msg.contains("opo.hwhm_hz"), "{msg}");
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn above_threshold_x_rejected() {
        let err = ExperimentConfig::parse("opo.x = 1.2\n", "test").unwrap_err();
        assert!(err.to_string().contains("below-threshold"), "{err}");
    }

    #[test]
    fn mutual_exclusion_enforced() {
        let err = ExperimentConfig::parse(
            "opo.x = 0.3\nopo.pump_power_mw = 10\nopo.threshold_mw = 66.3\n",
            "test",
        )
        .unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"), "{err}");
    }

    #[test]
    fn pump_power_route_derives_x() {
        let cfg = ExperimentConfig::parse(
            "opo.pump_power_mw = 16.575\nopo.threshold_mw = 66.3\n",
            "test",
        )
        .unwrap();
        assert!((cfg.pump_parameter() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pump_power_requires_threshold() {
        let err = ExperimentConfig::parse("opo.pump_power_mw = 10\n", "test").unwrap_err();
        assert!(err.to_string().contains("threshold"), "{err}");
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = ExperimentConfig::parse("opo.x = 0.2\ngarbage line\n", "test").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn duplicate_key_rejected() {
        let err = ExperimentConfig::parse("opo.x = 0.2\nopo.x = 0.3\n", "test").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn invariant_violations_cite_the_invariant() {
        let err = ExperimentConfig::parse("opo.x = 0.2\nlosses.signal_efficiency = 1.4\n", "test")
            .unwrap_err();
        assert!(err.to_string().contains("0 <= efficiency <= 1"), "{err}");
        let err =
            ExperimentConfig::parse("opo.x = 0.2\ngrid.points = 1\n", "test").unwrap_err();
        assert!(err.to_string().contains("points >= 2"), "{err}");
    }

    #[test]
    fn angle_grid_is_inclusive() {
        let cfg = ExperimentConfig::parse(
            "opo.x = 0.1\nreadout.angle_start_rad = 0\nreadout.angle_stop_rad = 6.283185307179586\nreadout.angle_count = 5\n",
            "test",
        )
        .unwrap();
        let grid = cfg.angle_grid();
        assert_eq!(grid.len(), 5);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid[4], 2.0 * std::f64::consts::PI);
    }
}
