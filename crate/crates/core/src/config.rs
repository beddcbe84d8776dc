//! JSON run configuration. Every section is optional; missing keys take the
//! defaults of the reference 16×128 system and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::LinkConfig;
use crate::circuits::{OAModel, OaKind, SolverConfig};
use crate::costmodel::{DigitalReference, PowerBudget};
use crate::crossbar::DeviceModel;
use crate::error::{Error, Result};
use crate::modem::ModemConfig;
use crate::precoder::{AmcMode, AmcSettings, PrecoderSettings};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Dimensions {
    #[serde(rename = "K")]
    pub users: usize,
    #[serde(rename = "M")]
    pub antennas: usize,
}

impl Default for Dimensions {
    fn default() -> Self {
        Self {
            users: 16,
            antennas: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    #[serde(rename = "rho_T")]
    pub rho_t: f64,
    pub snr_db: Vec<f64>,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            rho_t: 1.0,
            snr_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModemSection {
    pub beta: f64,
}

impl Default for ModemSection {
    fn default() -> Self {
        Self {
            beta: ModemConfig::default().beta(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceSection {
    pub g_hrs_us: f64,
    pub level_min_us: f64,
    pub level_max_us: f64,
    pub level_count: usize,
    pub sigma_prog_us: f64,
    pub quantization: bool,
    /// Clip targets at the top level. Turning it off together with
    /// quantization and noise gives the ideal device.
    pub bounded: bool,
}

impl Default for DeviceSection {
    fn default() -> Self {
        Self {
            g_hrs_us: 0.1,
            level_min_us: 2.0,
            level_max_us: 30.0,
            level_count: 15,
            sigma_prog_us: 0.15,
            quantization: true,
            bounded: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OaSection {
    pub gain_db: f64,
    pub gbw_mhz: f64,
    pub vdd_v: f64,
    /// Replaces the finite gain by an ideal amplifier (static solves only).
    pub infinite_gain: bool,
    pub buffer_gain_db: f64,
    pub buffer_gbw_mhz: f64,
}

impl Default for OaSection {
    fn default() -> Self {
        let fb = OAModel::feedback();
        let buf = OAModel::rail_to_rail();
        Self {
            gain_db: fb.gain_db,
            gbw_mhz: fb.gbw_hz / 1e6,
            vdd_v: fb.vdd,
            infinite_gain: false,
            buffer_gain_db: buf.gain_db,
            buffer_gbw_mhz: buf.gbw_hz / 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub mode: String,
    pub dt_ps: f64,
    pub t_end_ns: f64,
    pub settle_tol_mv: f64,
    pub settle_rel: f64,
    pub strict: bool,
    pub droop_mv_per_ns: f64,
    pub record_every: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            mode: AmcMode::default().tag().to_string(),
            dt_ps: s.dt_ps,
            t_end_ns: s.t_end_ns,
            settle_tol_mv: s.settle_abs_v * 1e3,
            settle_rel: s.settle_rel,
            strict: s.strict,
            droop_mv_per_ns: s.droop_v_per_ns * 1e3,
            record_every: s.record_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// QAM symbols per (SNR, scheme) point before stopping.
    pub max_symbols: u64,
    /// Stop early once this many bit errors are seen; 0 disables.
    pub min_errors: u64,
    /// Trials for constellation dumps.
    pub trials: u64,
    /// Program the crossbars once per channel and send several vectors.
    pub reuse_h: bool,
    /// Symbol vectors per channel draw when `reuse_h` is set.
    pub vectors_per_channel: usize,
    /// Channel blocks handed to the worker pool between stop checks.
    pub batch_blocks: usize,
    pub schemes: Vec<String>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            max_symbols: 2_000_000,
            min_errors: 100,
            trials: 1000,
            reuse_h: true,
            vectors_per_channel: 100,
            batch_blocks: 64,
            schemes: vec!["digital".to_string(), "amc".to_string()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub unit_power_mw: PowerBudget,
    pub digital: DigitalReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecoderSection {
    pub neumann_terms: usize,
}

impl Default for PrecoderSection {
    fn default() -> Self {
        Self {
            neumann_terms: PrecoderSettings::default().neumann_terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dimensions: Dimensions,
    pub link: LinkSection,
    pub modem: ModemSection,
    pub device: DeviceSection,
    pub oa: OaSection,
    pub solver: SolverSection,
    pub sweep: SweepSection,
    pub cost: CostSection,
    pub precoder: PrecoderSection,
    pub master_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dimensions: Dimensions::default(),
            link: LinkSection::default(),
            modem: ModemSection::default(),
            device: DeviceSection::default(),
            oa: OaSection::default(),
            solver: SolverSection::default(),
            sweep: SweepSection::default(),
            cost: CostSection::default(),
            precoder: PrecoderSection::default(),
            master_seed: 2024,
        }
    }
}

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(field_error(field, format!("must be non-negative, got {v}")))
    }
}

impl SimConfig {
    /// Parses and validates JSON text.
    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json messages carry the line and column.
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.dimensions;
        if d.users == 0 {
            return Err(field_error("dimensions.K", "must be at least 1"));
        }
        if d.antennas < d.users {
            return Err(field_error(
                "dimensions.M",
                format!("must be >= K = {}, got {}", d.users, d.antennas),
            ));
        }
        positive("link.rho_T", self.link.rho_t)?;
        if self.link.snr_db.is_empty() {
            return Err(field_error("link.snr_db", "must list at least one SNR"));
        }
        if let Some(bad) = self.link.snr_db.iter().find(|v| !v.is_finite()) {
            return Err(field_error("link.snr_db", format!("entries must be finite, got {bad}")));
        }
        positive("modem.beta", self.modem.beta)?;

        let dev = &self.device;
        positive("device.g_hrs_us", dev.g_hrs_us)?;
        positive("device.level_min_us", dev.level_min_us)?;
        positive("device.level_max_us", dev.level_max_us)?;
        non_negative("device.sigma_prog_us", dev.sigma_prog_us)?;
        if dev.level_count == 0 {
            return Err(field_error("device.level_count", "must be at least 1"));
        }
        if dev.level_count > 1 && dev.level_max_us <= dev.level_min_us {
            return Err(field_error("device.level_max_us", "must exceed device.level_min_us"));
        }
        if dev.level_min_us <= dev.g_hrs_us {
            return Err(field_error("device.level_min_us", "must exceed device.g_hrs_us"));
        }

        positive("oa.gain_db", self.oa.gain_db)?;
        positive("oa.gbw_mhz", self.oa.gbw_mhz)?;
        positive("oa.vdd_v", self.oa.vdd_v)?;
        positive("oa.buffer_gain_db", self.oa.buffer_gain_db)?;
        positive("oa.buffer_gbw_mhz", self.oa.buffer_gbw_mhz)?;

        let s = &self.solver;
        let mode = AmcMode::parse(&s.mode).map_err(|_| {
            field_error(
                "solver.mode",
                format!("must be `static` or `transient`, got `{}`", s.mode),
            )
        })?;
        if !(s.dt_ps > 0.0 && s.dt_ps <= 50.0) {
            return Err(field_error(
                "solver.dt_ps",
                format!("must lie in (0, 50], got {}", s.dt_ps),
            ));
        }
        positive("solver.t_end_ns", s.t_end_ns)?;
        non_negative("solver.settle_tol_mv", s.settle_tol_mv)?;
        non_negative("solver.settle_rel", s.settle_rel)?;
        non_negative("solver.droop_mv_per_ns", s.droop_mv_per_ns)?;
        if s.record_every == 0 {
            return Err(field_error("solver.record_every", "must be at least 1"));
        }
        if mode == AmcMode::Transient && self.oa.infinite_gain {
            return Err(field_error(
                "oa.infinite_gain",
                "an ideal amplifier has no dynamics; use solver.mode = static",
            ));
        }

        let sw = &self.sweep;
        if sw.max_symbols == 0 {
            return Err(field_error("sweep.max_symbols", "must be at least 1"));
        }
        if sw.trials == 0 {
            return Err(field_error("sweep.trials", "must be at least 1"));
        }
        if sw.vectors_per_channel == 0 {
            return Err(field_error("sweep.vectors_per_channel", "must be at least 1"));
        }
        if sw.batch_blocks == 0 {
            return Err(field_error("sweep.batch_blocks", "must be at least 1"));
        }
        if sw.schemes.is_empty() {
            return Err(field_error("sweep.schemes", "must name at least one scheme"));
        }

        self.cost.unit_power_mw.validate()?;
        positive("cost.digital.power_mw", self.cost.digital.power_mw)?;
        positive("cost.digital.latency_ns", self.cost.digital.latency_ns)?;
        if self.precoder.neumann_terms == 0 {
            return Err(field_error("precoder.neumann_terms", "must be at least 1"));
        }
        Ok(())
    }

    pub fn modem(&self) -> ModemConfig {
        ModemConfig::new(self.modem.beta).expect("validated")
    }

    pub fn device_model(&self) -> Result<DeviceModel> {
        let d = &self.device;
        let mut m = DeviceModel::uniform(
            d.g_hrs_us,
            d.level_min_us,
            d.level_max_us,
            d.level_count,
            d.sigma_prog_us,
            d.quantization,
        )
        .map_err(|e| field_error("device", e))?;
        m.bounded = d.bounded;
        Ok(m)
    }

    pub fn oa_model(&self) -> OAModel {
        OAModel {
            gain_db: if self.oa.infinite_gain {
                f64::INFINITY
            } else {
                self.oa.gain_db
            },
            gbw_hz: self.oa.gbw_mhz * 1e6,
            vdd: self.oa.vdd_v,
            kind: OaKind::Feedback,
        }
    }

    pub fn buffer_model(&self) -> OAModel {
        OAModel {
            gain_db: self.oa.buffer_gain_db,
            gbw_hz: self.oa.buffer_gbw_mhz * 1e6,
            vdd: self.oa.vdd_v,
            kind: OaKind::RailToRail,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            dt_ps: s.dt_ps,
            t_end_ns: s.t_end_ns,
            settle_abs_v: s.settle_tol_mv * 1e-3,
            settle_rel: s.settle_rel,
            strict: s.strict,
            droop_v_per_ns: s.droop_mv_per_ns * 1e-3,
            record_every: s.record_every,
        }
    }

    pub fn amc_settings(&self) -> Result<AmcSettings> {
        Ok(AmcSettings {
            device: self.device_model()?,
            oa: self.oa_model(),
            solver: self.solver_config(),
            mode: AmcMode::parse(&self.solver.mode)?,
        })
    }

    pub fn precoder_settings(&self) -> Result<PrecoderSettings> {
        Ok(PrecoderSettings {
            amc: self.amc_settings()?,
            neumann_terms: self.precoder.neumann_terms,
        })
    }

    pub fn link_config(&self, snr_db: f64) -> Result<LinkConfig> {
        LinkConfig::new(self.dimensions.users, self.dimensions.antennas, self.link.rho_t, snr_db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crossbar::gram_scale;

    #[test]
    fn empty_object_gives_reference_system() {
        let cfg = SimConfig::from_json("{}").unwrap();
        assert_eq!(cfg, SimConfig::default());
        assert_eq!((cfg.dimensions.users, cfg.dimensions.antennas), (16, 128));
        let dev = cfg.device_model().unwrap();
        assert_eq!(dev.levels().len(), 15);
        assert_eq!(dev.levels()[0], 2.0);
        assert_eq!(dev.g_max(), 30.0);
        assert_eq!(dev.g_hrs, 0.1);
        let oa = cfg.oa_model();
        assert_eq!((oa.gain_db, oa.gbw_hz, oa.vdd), (50.5, 157e6, 0.6));
    }

    #[test]
    fn invalid_field_is_named() {
        let err = SimConfig::from_json(r#"{"device":{"sigma_prog_us":-1}}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("device.sigma_prog_us"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = SimConfig::from_json(r#"{"device":{"sigma":0.1}}"#).unwrap_err();
        assert!(err.to_string().contains("sigma"), "{err}");
        assert!(SimConfig::from_json(r#"{"extra":1}"#).is_err());
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = SimConfig::from_json("{\n  \"link\": }").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn antenna_override_changes_scale() {
        let cfg = SimConfig::from_json(r#"{"dimensions":{"M":64}}"#).unwrap();
        assert_eq!(cfg.dimensions.users, 16);
        assert_eq!(gram_scale(cfg.dimensions.antennas), 1.0 / 32.0);
    }

    #[test]
    fn round_trip_through_json() {
        let mut cfg = SimConfig::default();
        cfg.master_seed = 9;
        cfg.solver.mode = "transient".to_string();
        let back = SimConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.amc_settings().unwrap().mode, AmcMode::Transient);
    }

    #[test]
    fn cross_field_checks() {
        assert!(SimConfig::from_json(r#"{"dimensions":{"K":200}}"#).is_err());
        assert!(SimConfig::from_json(r#"{"solver":{"mode":"spice"}}"#).is_err());
        assert!(SimConfig::from_json(r#"{"oa":{"infinite_gain":true},"solver":{"mode":"transient"}}"#).is_err());
        let ideal = SimConfig::from_json(r#"{"oa":{"infinite_gain":true}}"#).unwrap();
        assert!(ideal.oa_model().is_ideal());
    }
}
