use mpdse::dataflow::{utilization, ArrayDims};
use mpdse::dse::{evaluate, DesignPoint, EvalOptions};
use mpdse::pe::{dot_product, finalize_partials, pairs_per_issue, PEFamily};
use mpdse::quant::{footprint, footprint_at, quantize, FootprintPolicy, QuantParams, Signedness};
use mpdse::workload::{parse_workload, resnet, ConvLayerSpec, ResNetVariant, WeightPrecision};
use mpdse::{Calibration, Error, HardwareConstraints, NetworkSpec, PEConfig, PEStyle};
use proptest::prelude::*;

fn wq_strategy() -> impl Strategy<Value = u32> {
    prop_oneof![Just(1u32), Just(2), Just(4), Just(8)]
}

fn k_strategy() -> impl Strategy<Value = u32> {
    prop_oneof![Just(1u32), Just(2), Just(4)]
}

fn layer_strategy() -> impl Strategy<Value = ConvLayerSpec> {
    (1u32..=64, 1u32..=256, 1u32..=256, prop_oneof![Just(1u32), Just(3), Just(7)], 1u32..=2, wq_strategy())
        .prop_map(|(ih, iw, od, k, s, wq)| ConvLayerSpec::new("l", ih, iw, od, k, s, wq))
}

fn family_strategy() -> impl Strategy<Value = PEFamily> {
    (0usize..8).prop_map(|i| PEFamily::all()[i])
}

/// Operands valid for `wq`-bit weights and 8-bit activations.
fn operands(len: std::ops::RangeInclusive<usize>, wq: u32) -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    let half = 1i64 << (wq - 1);
    len.prop_flat_map(move |n| {
        (
            prop::collection::vec(0i64..256, n),
            prop::collection::vec(-half..half, n),
        )
    })
}

proptest! {
    #[test]
    fn macs_scale_with_channels(layer in layer_strategy(), f in 1u32..=4) {
        let scaled = ConvLayerSpec { input_channels: layer.input_channels * f, ..layer.clone() };
        prop_assert_eq!(scaled.macs(), layer.macs() * u64::from(f));
        let scaled = ConvLayerSpec { output_channels: layer.output_channels * f, ..layer.clone() };
        prop_assert_eq!(scaled.macs(), layer.macs() * u64::from(f));
    }

    #[test]
    fn resnet_shapes_ignore_precision(a in wq_strategy(), b in wq_strategy()) {
        for v in [ResNetVariant::ResNet18, ResNetVariant::ResNet50] {
            let x = resnet(v, a).unwrap();
            let y = resnet(v, b).unwrap();
            prop_assert_eq!(x.layers.len(), y.layers.len());
            prop_assert_eq!(x.total_macs(), y.total_macs());
            for (p, q) in x.layers.iter().zip(&y.layers) {
                prop_assert_eq!(
                    (p.input_height, p.input_channels, p.output_channels, p.kernel, p.stride),
                    (q.input_height, q.input_channels, q.output_channels, q.kernel, q.stride)
                );
            }
        }
    }

    #[test]
    fn workload_round_trips(layers in prop::collection::vec(layer_strategy(), 1..6)) {
        let net = NetworkSpec::new("rt", layers);
        let back = parse_workload(&net.to_json()).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn quantizer_laws(v in -1e3f64..1e3, dv in 0f64..1e3, step in 1e-3f64..10.0, bits in 1u32..=16, signed in any::<bool>()) {
        let p = QuantParams::new(step, bits, if signed { Signedness::Signed } else { Signedness::Unsigned }).unwrap();
        let (i, q) = quantize(v, &p);
        prop_assert_eq!(quantize(q, &p), (i, q));
        prop_assert!(quantize(v + dv, &p).0 >= i);
        prop_assert!((p.qn()..=p.qp()).contains(&i));
        prop_assert_eq!(q, i as f64 * step);
    }

    #[test]
    fn footprint_is_linear_in_width(layers in prop::collection::vec(layer_strategy(), 1..6), bits in 1u32..=8) {
        let net = NetworkSpec::new("fp", layers);
        let policy = FootprintPolicy::default();
        let one = footprint_at(&net, &policy, 1);
        prop_assert_eq!(footprint_at(&net, &policy, bits), one * u64::from(bits));
        let expected: u64 = net.layers.iter().map(|l| l.weight_bits()).sum();
        prop_assert_eq!(footprint(&net, &policy), expected);
    }

    #[test]
    fn sum_apart_matches_sum_together(
        k in k_strategy(),
        twod in any::<bool>(),
        (wq, a, w) in wq_strategy()
            .prop_flat_map(|wq| (Just(wq), operands(1..=4608, wq)))
            .prop_map(|(wq, (a, w))| (wq, a, w))
            .no_shrink(),
    ) {
        let family = |c: &str| -> PEFamily {
            format!("bp-{c}-{}", if twod { "2d" } else { "1d" }).parse().unwrap()
        };
        let sa = PEConfig::with_default_accumulator(PEStyle::new(family("sa"), k, 8).unwrap());
        let st = PEConfig::with_default_accumulator(PEStyle::new(family("st"), k, 8).unwrap());
        let x = dot_product(&sa, wq, &a, &w).unwrap();
        let y = dot_product(&st, wq, &a, &w).unwrap();
        let oracle: i64 = a.iter().zip(&w).map(|(p, q)| p * q).sum();
        prop_assert_eq!(finalize_partials(k, &x.partials), y.result);
        prop_assert_eq!(y.result, oracle);
    }

    #[test]
    fn accumulator_holds_at_boundary(family in family_strategy(), k in k_strategy(), wq in wq_strategy(), seed in any::<u64>()) {
        let cfg = PEConfig::with_default_accumulator(PEStyle::new(family, k, 8).unwrap());
        let len = 1usize << 14;
        prop_assert!(cfg.accumulator_suffices(wq, len as u64));
        let lo = -(1i64 << (wq - 1));
        let a: Vec<i64> = (0..len).map(|i| if (seed >> (i % 64)) & 1 == 0 { 255 } else { 254 }).collect();
        let w = vec![lo; len];
        let out = dot_product(&cfg, wq, &a, &w).unwrap();
        prop_assert_eq!(out.result, a.iter().map(|x| x * lo).sum::<i64>());
    }

    #[test]
    fn cycles_never_grow_with_the_array(layer in layer_strategy(), h in 1u32..=8, w in 1u32..=8, d in 1u32..=8, axis in 0usize..3, k in k_strategy()) {
        let pe = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(k).unwrap());
        let small = ArrayDims::new(h, w, d).unwrap();
        let big = match axis {
            0 => ArrayDims::new(h + 1, w, d),
            1 => ArrayDims::new(h, w + 1, d),
            _ => ArrayDims::new(h, w, d + 1),
        }.unwrap();
        let a = utilization(&layer, small, &pe).unwrap();
        let b = utilization(&layer, big, &pe).unwrap();
        prop_assert!(b.p_actual <= a.p_actual);
        prop_assert!(a.p_ideal <= num_rational::Ratio::from_integer(a.p_actual));
        prop_assert!(a.utilization() > 0.0 && a.utilization() <= 1.0);
    }

    #[test]
    fn packing_acts_as_width_multiplier(layer in layer_strategy(), h in 1u32..=8, w in 1u32..=8, d in 1u32..=8, k in k_strategy()) {
        let pe = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(k).unwrap());
        let wq = layer.max_weight_bits();
        let pack = pairs_per_issue(&pe, wq);
        let eight = ConvLayerSpec { weights: WeightPrecision::Uniform(8), ..layer.clone() };
        let packed = utilization(&layer, ArrayDims::new(h, w, d).unwrap(), &pe).unwrap();
        let widened = utilization(&eight, ArrayDims::new(h, w * pack, d).unwrap(), &pe).unwrap();
        prop_assert_eq!(packed.p_actual, widened.p_actual);
    }

    #[test]
    fn constant_bit_work_per_cycle(k in k_strategy(), wq in wq_strategy()) {
        prop_assume!(k <= wq);
        let pe = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(k).unwrap());
        prop_assert_eq!(pairs_per_issue(&pe, wq) * wq, 8);
    }
}

#[test]
fn accumulator_overflow_detected_past_boundary() {
    let cfg = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(1).unwrap());
    let len = 16_449;
    assert!(!cfg.accumulator_suffices(8, len as u64));
    let err = dot_product(&cfg, 8, &vec![255; len], &vec![-128; len]).unwrap_err();
    assert!(matches!(err, Error::AccumulatorOverflow { .. }), "{err:?}");
}

#[test]
fn evaluation_is_deterministic() {
    let net = resnet(ResNetVariant::ResNet18, 2).unwrap();
    let calib = Calibration::default();
    let hwc = HardwareConstraints::default();
    let pe = PEConfig::with_default_accumulator(PEStyle::bp_st_1d(2).unwrap());
    let dims = ArrayDims::new(7, 5, 37).unwrap();
    let run = || {
        let d = DesignPoint::build(&net, pe, dims, &hwc, &calib, EvalOptions::default()).unwrap();
        serde_json::to_string(&evaluate(&d, &net, &hwc, &calib).unwrap()).unwrap()
    };
    assert_eq!(run(), run());
}
