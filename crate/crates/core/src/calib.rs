//! Per-(style, slice) cost constants standing in for vendor-tool
//! measurements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pe::PEFamily;

pub const CALIBRATION_SCHEMA_VERSION: u32 = 1;

const DEFAULT_CALIBRATION: &str = include_str!("../data/default_calibration.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationEntry {
    pub style: PEFamily,
    pub k: u32,
    pub lut_per_pe: f64,
    pub f_mhz: f64,
    /// Energy of one PPG operation, keyed by weight word-length.
    pub energy_pj_per_ppg_op: BTreeMap<u32, f64>,
    /// Optional cap on the PE count, combined with the LUT bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_pes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CalibrationEntry {
    pub fn energy_per_ppg_op(&self, family: PEFamily, wq: u32) -> Result<f64> {
        self.energy_pj_per_ppg_op.get(&wq).copied().ok_or_else(|| {
            Error::MissingCalibration(format!(
                "{family}/k{}: energy_pj_per_ppg_op[{wq}]",
                self.k
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub schema_version: u32,
    pub bram_energy_pj_per_bit: f64,
    /// Reference anchor: DSP-based MAC efficiency relative to LUT-based.
    pub dsp_vs_lut_efficiency: f64,
    /// Reference anchor: DSP energy at 1-bit weights relative to 8 bit.
    pub dsp_8to1_energy_ratio: f64,
    #[serde(default)]
    pub notes: Vec<String>,
    pub entries: Vec<CalibrationEntry>,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration::from_json(DEFAULT_CALIBRATION).expect("embedded calibration is valid")
    }
}

impl Calibration {
    /// Parses and validates a calibration document. A missing required
    /// field is reported as [`Error::MissingCalibration`].
    pub fn from_json(text: &str) -> Result<Self> {
        let calib: Calibration = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.starts_with("missing field") {
                Error::MissingCalibration(msg)
            } else {
                Error::from_json(&e)
            }
        })?;
        calib.validate()?;
        Ok(calib)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != CALIBRATION_SCHEMA_VERSION {
            return Err(Error::Precondition(format!(
                "calibration schema_version {} (expected {CALIBRATION_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let positive = |what: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Precondition(format!(
                    "calibration {what} must be > 0, got {v}"
                )))
            }
        };
        positive("bram_energy_pj_per_bit", self.bram_energy_pj_per_bit)?;
        positive("dsp_vs_lut_efficiency", self.dsp_vs_lut_efficiency)?;
        positive("dsp_8to1_energy_ratio", self.dsp_8to1_energy_ratio)?;
        for (i, e) in self.entries.iter().enumerate() {
            let tag = format!("{}/k{}", e.style, e.k);
            positive(&format!("{tag} lut_per_pe"), e.lut_per_pe)?;
            positive(&format!("{tag} f_mhz"), e.f_mhz)?;
            for (&wq, &v) in &e.energy_pj_per_ppg_op {
                positive(&format!("{tag} energy_pj_per_ppg_op[{wq}]"), v)?;
            }
            if self.entries[..i]
                .iter()
                .any(|o| o.style == e.style && o.k == e.k)
            {
                return Err(Error::Precondition(format!(
                    "duplicate calibration entry {tag}"
                )));
            }
        }
        Ok(())
    }

    pub fn entry(&self, family: PEFamily, k: u32) -> Result<&CalibrationEntry> {
        self.entries
            .iter()
            .find(|e| e.style == family && e.k == k)
            .ok_or_else(|| Error::MissingCalibration(format!("{family}/k{k}")))
    }

    pub fn entry_mut(&mut self, family: PEFamily, k: u32) -> Result<&mut CalibrationEntry> {
        self.entries
            .iter_mut()
            .find(|e| e.style == family && e.k == k)
            .ok_or_else(|| Error::MissingCalibration(format!("{family}/k{k}")))
    }
}
