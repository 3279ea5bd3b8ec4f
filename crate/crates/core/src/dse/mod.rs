//! Design-space exploration: PE ranking, array-shape search and design
//! evaluation.

mod evaluate;
mod flow;
mod rank;
mod search;

use serde::{Deserialize, Serialize};

use crate::calib::Calibration;
use crate::dataflow::PsumTraffic;
use crate::error::{Error, Result};
use crate::pe::PEConfig;

pub use evaluate::{
    dram_traffic_bits, evaluate, DesignPoint, DesignReport, EnergyBreakdown, UtilizationSummary,
};
pub use flow::{full_flow, FlowOptions, FlowResult};
pub use rank::{pe_dse, PeRankEntry, PeRanking};
pub use search::{array_dse, enumerate_candidates, pareto_front, ArraySearch, Candidate, SearchSpace};

/// Resource and bandwidth budget of the target device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareConstraints {
    pub lut_budget: u64,
    /// BRAM blocks.
    pub bram_budget: u64,
    /// Off-chip bandwidth in bits/s.
    pub dram_bw: f64,
    /// On-chip bandwidth of one BRAM port in bits/s.
    pub onchip_bw_per_port: f64,
    /// Reference only.
    pub dsp_count: u64,
    /// pJ per transferred DRAM bit.
    pub dram_energy: f64,
    /// Fraction of LUTs reserved for control and buffers.
    pub lut_overhead: f64,
}

impl Default for HardwareConstraints {
    fn default() -> Self {
        Self {
            lut_budget: 470_000,
            bram_budget: 2560,
            dram_bw: 102.4e9,
            onchip_bw_per_port: 20e9,
            dsp_count: 256,
            dram_energy: 70.0,
            lut_overhead: 0.2,
        }
    }
}

impl HardwareConstraints {
    pub fn from_json(text: &str) -> Result<Self> {
        let hwc: Self = serde_json::from_str(text).map_err(|e| Error::from_json(&e))?;
        hwc.validate()?;
        Ok(hwc)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Precondition(format!("constraint {what} must be > 0")));
        if self.lut_budget == 0 {
            return bad("lut_budget");
        }
        if self.bram_budget == 0 {
            return bad("bram_budget");
        }
        if self.dsp_count == 0 {
            return bad("dsp_count");
        }
        for (name, v) in [
            ("dram_bw", self.dram_bw),
            ("onchip_bw_per_port", self.onchip_bw_per_port),
            ("dram_energy", self.dram_energy),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name);
            }
        }
        if !(0.0..1.0).contains(&self.lut_overhead) {
            return Err(Error::Precondition(
                "constraint lut_overhead must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// LUTs left for PEs after the overhead reservation.
    pub fn pe_lut_budget(&self) -> f64 {
        self.lut_budget as f64 * (1.0 - self.lut_overhead)
    }
}

/// Accounting knobs of design evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    /// Bits per BRAM block.
    pub block_bits: u64,
    /// Extra DRAM traffic per frame in bits.
    pub base_traffic_bits: u64,
    /// Frames sharing one weight fetch.
    pub batch: u32,
    pub psum_traffic: PsumTraffic,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            block_bits: 20_000,
            base_traffic_bits: 0,
            batch: 1,
            psum_traffic: PsumTraffic::ReadWrite,
        }
    }
}

impl EvalOptions {
    pub fn validate(&self) -> Result<()> {
        if self.block_bits == 0 {
            return Err(Error::ZeroDenominator("BRAM block size"));
        }
        if self.batch == 0 {
            return Err(Error::ZeroDenominator("batch size"));
        }
        Ok(())
    }
}

/// PE-count threshold: LUT budget after overhead divided by the per-PE
/// cost, further capped by the calibrated `max_pes` when present.
pub fn max_pe_count(pe: &PEConfig, hwc: &HardwareConstraints, calib: &Calibration) -> Result<u64> {
    let entry = calib.entry(pe.style.family, pe.style.slice)?;
    let by_luts = (hwc.pe_lut_budget() / entry.lut_per_pe).floor() as u64;
    Ok(entry.max_pes.map_or(by_luts, |cap| by_luts.min(cap)))
}
