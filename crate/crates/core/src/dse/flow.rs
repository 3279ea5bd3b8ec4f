use super::evaluate::evaluate;
use super::{array_dse, pe_dse, ArraySearch, DesignPoint, DesignReport, EvalOptions};
use super::{HardwareConstraints, PeRanking};
use crate::calib::Calibration;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::pe::{PEConfig, PEStyle, DEFAULT_ACCUMULATOR_BITS};
use crate::workload::NetworkSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowOptions {
    /// PE candidates for the ranking step.
    pub styles: Vec<PEStyle>,
    /// Skip the ranking step and use this PE.
    pub style: Option<PEStyle>,
    pub accumulator_bits: u32,
    pub eval: EvalOptions,
    pub exec: Exec,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            styles: PEStyle::taxonomy(&[1, 2, 4], 8).expect("default taxonomy is valid"),
            style: None,
            accumulator_bits: DEFAULT_ACCUMULATOR_BITS,
            eval: EvalOptions::default(),
            exec: Exec::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub ranking: Option<PeRanking>,
    pub pe: PEConfig,
    pub search: ArraySearch,
    pub design: DesignPoint,
    pub report: DesignReport,
    /// Pareto points skipped for exceeding the network-level DRAM bandwidth.
    pub fallbacks: usize,
}

/// PE ranking, array search and evaluation in sequence. A design whose
/// per-frame DRAM traffic exceeds the off-chip bandwidth at its frame rate
/// is discarded and the next Pareto point is tried.
pub fn full_flow(
    net: &NetworkSpec,
    hwc: &HardwareConstraints,
    calib: &Calibration,
    options: &FlowOptions,
) -> Result<FlowResult> {
    let (style, ranking) = match options.style {
        Some(style) => (style, None),
        None => {
            let wq = net
                .dominant_weight_bits()
                .ok_or_else(|| Error::EmptyNetwork(net.name.clone()))?;
            let ranking = pe_dse(&options.styles, &[wq], calib, options.accumulator_bits)?;
            let winner = ranking
                .winner(wq)
                .ok_or_else(|| Error::Infeasible(format!("no PE candidate handles {wq}-bit weights")))?;
            (winner.style, Some(ranking))
        }
    };
    let pe = PEConfig::new(style, options.accumulator_bits)?;
    let search = array_dse(net, &pe, hwc, calib, &options.eval, options.exec)?;
    for (i, cand) in search.pareto.iter().enumerate() {
        let design = if i == 0 {
            search.best.clone()
        } else {
            match DesignPoint::build(net, pe, cand.dims, hwc, calib, options.eval) {
                Ok(d) => d,
                Err(Error::Infeasible(_)) => continue,
                Err(e) => return Err(e),
            }
        };
        let report = evaluate(&design, net, hwc, calib)?;
        if report.dram_traffic_bits * report.frames_per_s > hwc.dram_bw {
            continue;
        }
        return Ok(FlowResult {
            ranking,
            pe,
            search,
            design,
            report,
            fallbacks: i,
        });
    }
    Err(Error::Infeasible(format!(
        "every Pareto point for `{}` exceeds the DRAM bandwidth",
        net.name
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pe::PEFamily;
    use crate::workload::ConvLayerSpec;

    fn toy() -> NetworkSpec {
        NetworkSpec::new(
            "toy",
            vec![
                ConvLayerSpec::new("a", 14, 16, 32, 3, 1, 2),
                ConvLayerSpec::new("b", 14, 32, 32, 3, 1, 2),
            ],
        )
    }

    #[test]
    fn flow_is_deterministic() {
        let hwc = HardwareConstraints::default();
        let calib = Calibration::default();
        let a = full_flow(&toy(), &hwc, &calib, &FlowOptions::default()).unwrap();
        let b = full_flow(
            &toy(),
            &hwc,
            &calib,
            &FlowOptions {
                exec: Exec::Sequential,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.pe.style.family, PEFamily::BP_ST_1D);
        assert_eq!(a.fallbacks, 0);
    }

    #[test]
    fn bandwidth_feedback_walks_pareto() {
        let calib = Calibration::default();
        let base = full_flow(&toy(), &HardwareConstraints::default(), &calib, &FlowOptions::default())
            .unwrap();
        let needed = base.report.dram_traffic_bits * base.report.frames_per_s;
        let hwc = HardwareConstraints {
            dram_bw: needed * 0.999,
            ..Default::default()
        };
        match full_flow(&toy(), &hwc, &calib, &FlowOptions::default()) {
            Ok(r) => {
                assert!(r.fallbacks > 0);
                assert!(r.report.dram_traffic_bits * r.report.frames_per_s <= hwc.dram_bw);
            }
            Err(e) => assert!(matches!(e, Error::Infeasible(_))),
        }
    }
}
