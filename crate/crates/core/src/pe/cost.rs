use serde::{Deserialize, Serialize};

use super::{PEConfig, PEStyle, Processing, Scaling};
use crate::calib::Calibration;
use crate::error::Result;

/// Independent activation/weight pairs one PE consumes per issue.
pub fn pairs_per_issue(cfg: &PEConfig, wq: u32) -> u32 {
    let style = cfg.style;
    let per_weight = style.weight_slices(wq.max(1));
    match (style.family.processing, style.family.scaling) {
        (Processing::BitSerial, _) => 1,
        (Processing::BitParallel, Scaling::OneD) => (cfg.ppg_count() / per_weight).max(1),
        (Processing::BitParallel, Scaling::TwoD) => {
            (style.activation_bits / style.slice / per_weight).max(1)
        }
    }
}

/// Cycles one issue occupies: 1 for bit-parallel, `ceil(w_q/k)` for
/// bit-serial.
pub fn cycles_per_issue(cfg: &PEConfig, wq: u32) -> u32 {
    match cfg.style.family.processing {
        Processing::BitParallel => 1,
        Processing::BitSerial => cfg.style.weight_slices(wq.max(1)),
    }
}

/// PPG operations spent on one multiply-accumulate.
pub fn ppg_ops_per_mac(style: &PEStyle, wq: u32) -> u32 {
    style.weight_slices(wq.max(1)) * style.activation_slices()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeCost {
    pub luts: f64,
    pub energy_pj_per_ppg_op: f64,
    pub f_mhz: f64,
}

pub fn pe_cost(cfg: &PEConfig, wq: u32, calib: &Calibration) -> Result<PeCost> {
    let entry = calib.entry(cfg.style.family, cfg.style.slice)?;
    Ok(PeCost {
        luts: entry.lut_per_pe,
        energy_pj_per_ppg_op: entry.energy_per_ppg_op(cfg.style.family, wq)?,
        f_mhz: entry.f_mhz,
    })
}

/// Processed bits per second per LUT, counting `N + w_q` bits per MAC.
pub fn pe_efficiency(cfg: &PEConfig, wq: u32, calib: &Calibration) -> Result<f64> {
    let entry = calib.entry(cfg.style.family, cfg.style.slice)?;
    let bits = f64::from(cfg.style.activation_bits + wq);
    let pairs = f64::from(pairs_per_issue(cfg, wq));
    let cycles = f64::from(cycles_per_issue(cfg, wq));
    Ok(bits * pairs * entry.f_mhz * 1e6 / (cycles * entry.lut_per_pe))
}
