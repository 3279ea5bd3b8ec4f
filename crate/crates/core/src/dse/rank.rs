use serde::{Deserialize, Serialize};

use crate::calib::Calibration;
use crate::error::{Error, Result};
use crate::pe::{pe_efficiency, PEConfig, PEStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeRankEntry {
    pub style: PEStyle,
    pub wq: u32,
    /// Processed bits/s/LUT.
    pub efficiency: f64,
    pub luts: f64,
    pub f_mhz: f64,
}

/// Candidates ranked per weight word-length, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeRanking {
    pub per_wq: Vec<(u32, Vec<PeRankEntry>)>,
}

impl PeRanking {
    pub fn winner(&self, wq: u32) -> Option<&PeRankEntry> {
        self.per_wq
            .iter()
            .find(|(w, _)| *w == wq)
            .and_then(|(_, list)| list.first())
    }

    pub fn entries(&self) -> impl Iterator<Item = &PeRankEntry> {
        self.per_wq.iter().flat_map(|(_, list)| list.iter())
    }
}

/// Ranks `styles` by bits/s/LUT at every `wq`. Ties go to fewer LUTs, then
/// to the earlier candidate. Styles narrower than `wq` are skipped.
pub fn pe_dse(
    styles: &[PEStyle],
    wqs: &[u32],
    calib: &Calibration,
    accumulator_bits: u32,
) -> Result<PeRanking> {
    if styles.is_empty() {
        return Err(Error::Precondition("no PE candidates".into()));
    }
    let mut per_wq = Vec::with_capacity(wqs.len());
    for &wq in wqs {
        let mut scored: Vec<(usize, PeRankEntry)> = Vec::new();
        for (idx, style) in styles.iter().enumerate() {
            if wq == 0 || wq > style.activation_bits {
                continue;
            }
            let cfg = PEConfig::new(*style, accumulator_bits)?;
            let entry = calib.entry(style.family, style.slice)?;
            scored.push((
                idx,
                PeRankEntry {
                    style: *style,
                    wq,
                    efficiency: pe_efficiency(&cfg, wq, calib)?,
                    luts: entry.lut_per_pe,
                    f_mhz: entry.f_mhz,
                },
            ));
        }
        scored.sort_by(|(ia, a), (ib, b)| {
            b.efficiency
                .total_cmp(&a.efficiency)
                .then(a.luts.total_cmp(&b.luts))
                .then(ia.cmp(ib))
        });
        per_wq.push((wq, scored.into_iter().map(|(_, e)| e).collect()));
    }
    Ok(PeRanking { per_wq })
}
