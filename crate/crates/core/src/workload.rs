//! CONV-layer workloads: layer shapes, word-lengths, ResNet generators and
//! the JSON workload file format.
//!
//! Feature maps are square (`I_H x I_H`) and kernels are square (`K x K`).
//! Output side uses same-padding, `ceil(I_H / S)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight word-lengths accepted unless a caller supplies its own set.
pub const DEFAULT_WORD_LENGTHS: [u32; 4] = [1, 2, 4, 8];

/// Role of a layer inside a generated network. Accounting policies use it
/// to include or exclude stems and shortcut projections.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerTag {
    Stem,
    #[default]
    Block,
    Projection,
}

/// A contiguous block of output channels sharing one weight word-length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecisionGroup {
    pub channels: u32,
    pub bits: u32,
}

/// Layer-wise (`Uniform`) or channel-wise (`Grouped`) weight precision.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightPrecision {
    Uniform(u32),
    Grouped(Vec<PrecisionGroup>),
}

impl WeightPrecision {
    /// Normalizes an arbitrary per-output-channel assignment into contiguous
    /// groups, ordered by ascending word-length. Output channels are
    /// permutable, so only the per-width channel counts matter.
    pub fn from_per_channel(bits: &[u32]) -> Self {
        let mut widths: Vec<u32> = bits.to_vec();
        widths.sort_unstable();
        let mut groups: Vec<PrecisionGroup> = Vec::new();
        for b in widths {
            match groups.last_mut() {
                Some(g) if g.bits == b => g.channels += 1,
                _ => groups.push(PrecisionGroup { channels: 1, bits: b }),
            }
        }
        if groups.len() == 1 {
            WeightPrecision::Uniform(groups[0].bits)
        } else {
            WeightPrecision::Grouped(groups)
        }
    }
}

fn default_activation_bits() -> u32 {
    8
}

/// One convolutional layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvLayerSpec {
    pub name: String,
    /// Input feature-map side `I_H`.
    #[serde(rename = "ih")]
    pub input_height: u32,
    /// Input channel count `I_W`.
    #[serde(rename = "iw")]
    pub input_channels: u32,
    /// Output channel count `O_D`.
    #[serde(rename = "od")]
    pub output_channels: u32,
    #[serde(rename = "k")]
    pub kernel: u32,
    #[serde(rename = "s")]
    pub stride: u32,
    #[serde(rename = "n_bits", default = "default_activation_bits")]
    pub activation_bits: u32,
    #[serde(rename = "wq")]
    pub weights: WeightPrecision,
    #[serde(default)]
    pub tag: LayerTag,
}

impl ConvLayerSpec {
    pub fn new(
        name: impl Into<String>,
        input_height: u32,
        input_channels: u32,
        output_channels: u32,
        kernel: u32,
        stride: u32,
        weight_bits: u32,
    ) -> Self {
        Self {
            name: name.into(),
            input_height,
            input_channels,
            output_channels,
            kernel,
            stride,
            activation_bits: 8,
            weights: WeightPrecision::Uniform(weight_bits),
            tag: LayerTag::Block,
        }
    }

    pub fn with_tag(mut self, tag: LayerTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn with_weights(mut self, weights: WeightPrecision) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_activation_bits(mut self, bits: u32) -> Self {
        self.activation_bits = bits;
        self
    }

    /// Output side under same padding.
    pub fn output_side(&self) -> u64 {
        u64::from(self.input_height).div_ceil(u64::from(self.stride))
    }

    /// Multiply-accumulates for one frame.
    pub fn macs(&self) -> u64 {
        let o = self.output_side();
        let k = u64::from(self.kernel);
        o * o * k * k * u64::from(self.input_channels) * u64::from(self.output_channels)
    }

    /// Precision groups as `(channels, bits)`; a uniform layer is one group.
    pub fn groups(&self) -> Vec<PrecisionGroup> {
        match &self.weights {
            WeightPrecision::Uniform(bits) => vec![PrecisionGroup {
                channels: self.output_channels,
                bits: *bits,
            }],
            WeightPrecision::Grouped(groups) => groups.clone(),
        }
    }

    pub fn is_channelwise(&self) -> bool {
        matches!(self.weights, WeightPrecision::Grouped(_))
    }

    pub fn max_weight_bits(&self) -> u32 {
        self.groups().iter().map(|g| g.bits).max().unwrap_or(0)
    }

    /// Weight parameters (no biases).
    pub fn weight_count(&self) -> u64 {
        let k = u64::from(self.kernel);
        k * k * u64::from(self.input_channels) * u64::from(self.output_channels)
    }

    /// Weight storage in bits at the declared word-lengths.
    pub fn weight_bits(&self) -> u64 {
        let per_channel = u64::from(self.kernel).pow(2) * u64::from(self.input_channels);
        self.groups()
            .iter()
            .map(|g| per_channel * u64::from(g.channels) * u64::from(g.bits))
            .sum()
    }

    /// Output feature-map elements.
    pub fn output_elements(&self) -> u64 {
        let o = self.output_side();
        o * o * u64::from(self.output_channels)
    }

    /// Input feature-map elements.
    pub fn input_elements(&self) -> u64 {
        let i = u64::from(self.input_height);
        i * i * u64::from(self.input_channels)
    }

    /// Human-readable word-length label: `8` or `32@1+32@4`.
    pub fn weight_label(&self) -> String {
        match &self.weights {
            WeightPrecision::Uniform(b) => b.to_string(),
            WeightPrecision::Grouped(groups) => groups
                .iter()
                .map(|g| format!("{}@{}", g.channels, g.bits))
                .collect::<Vec<_>>()
                .join("+"),
        }
    }

    pub fn validate(&self, supported_bits: &[u32]) -> Result<()> {
        let positive: [(&'static str, u32); 6] = [
            ("ih", self.input_height),
            ("iw", self.input_channels),
            ("od", self.output_channels),
            ("k", self.kernel),
            ("s", self.stride),
            ("n_bits", self.activation_bits),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(self.invalid(field, "must be >= 1"));
            }
        }
        let groups = self.groups();
        if groups.is_empty() {
            return Err(self.invalid("wq", "channel groups must not be empty"));
        }
        for g in &groups {
            if !supported_bits.contains(&g.bits) {
                return Err(Error::UnsupportedWordLength {
                    layer: self.name.clone(),
                    bits: g.bits,
                });
            }
            if g.bits > self.activation_bits {
                return Err(self.invalid(
                    "wq",
                    &format!(
                        "weight word-length {} exceeds activation word-length {}",
                        g.bits, self.activation_bits
                    ),
                ));
            }
            if g.channels == 0 {
                return Err(self.invalid("wq", "channel group of size 0"));
            }
        }
        let total: u64 = groups.iter().map(|g| u64::from(g.channels)).sum();
        if total != u64::from(self.output_channels) {
            return Err(self.invalid(
                "wq",
                &format!(
                    "channel groups sum to {total}, expected od = {}",
                    self.output_channels
                ),
            ));
        }
        Ok(())
    }

    fn invalid(&self, field: &'static str, reason: &str) -> Error {
        Error::InvalidLayer {
            layer: self.name.clone(),
            field,
            reason: reason.to_string(),
        }
    }
}

/// An ordered list of CONV layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<ConvLayerSpec>,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<ConvLayerSpec>) -> Self {
        Self {
            name: name.into(),
            layers,
        }
    }

    pub fn validate(&self, supported_bits: &[u32]) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::EmptyNetwork(self.name.clone()));
        }
        self.layers
            .iter()
            .try_for_each(|l| l.validate(supported_bits))
    }

    pub fn total_macs(&self) -> u64 {
        self.layers.iter().map(ConvLayerSpec::macs).sum()
    }

    pub fn first(&self) -> Option<&ConvLayerSpec> {
        self.layers.first()
    }

    pub fn last(&self) -> Option<&ConvLayerSpec> {
        self.layers.last()
    }

    /// MAC-weighted most common weight word-length (ties go to the narrower
    /// width). `None` for an empty network.
    pub fn dominant_weight_bits(&self) -> Option<u32> {
        let mut per_bits: Vec<(u32, u64)> = Vec::new();
        for layer in &self.layers {
            let per_channel = layer.macs() / u64::from(layer.output_channels.max(1));
            for g in layer.groups() {
                let work = per_channel * u64::from(g.channels);
                match per_bits.iter_mut().find(|(b, _)| *b == g.bits) {
                    Some((_, w)) => *w += work,
                    None => per_bits.push((g.bits, work)),
                }
            }
        }
        per_bits.sort_by_key(|&(b, _)| b);
        per_bits
            .iter()
            .fold(None::<(u32, u64)>, |best, &(b, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((b, w)),
            })
            .map(|(b, _)| b)
    }

    /// Copy with every non-stem layer at `bits` (stem keeps its width).
    pub fn with_inner_bits(&self, bits: u32) -> Self {
        let mut net = self.clone();
        for layer in &mut net.layers {
            if layer.tag != LayerTag::Stem {
                layer.weights = WeightPrecision::Uniform(bits);
            }
        }
        net
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }
}

/// Parses and validates a workload file with the default word-length set.
pub fn parse_workload(text: &str) -> Result<NetworkSpec> {
    parse_workload_with(text, &DEFAULT_WORD_LENGTHS)
}

pub fn parse_workload_with(text: &str, supported_bits: &[u32]) -> Result<NetworkSpec> {
    let net: NetworkSpec = serde_json::from_str(text).map_err(|e| Error::from_json(&e))?;
    net.validate(supported_bits)?;
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResNetVariant {
    ResNet18,
    ResNet50,
    ResNet152,
}

impl ResNetVariant {
    pub fn depth(self) -> u32 {
        match self {
            ResNetVariant::ResNet18 => 18,
            ResNetVariant::ResNet50 => 50,
            ResNetVariant::ResNet152 => 152,
        }
    }

    fn stages(self) -> [u32; 4] {
        match self {
            ResNetVariant::ResNet18 => [2, 2, 2, 2],
            ResNetVariant::ResNet50 => [3, 4, 6, 3],
            ResNetVariant::ResNet152 => [3, 8, 36, 3],
        }
    }

    fn bottleneck(self) -> bool {
        !matches!(self, ResNetVariant::ResNet18)
    }
}

impl fmt::Display for ResNetVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "resnet{}", self.depth())
    }
}

impl FromStr for ResNetVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().to_ascii_lowercase();
        let digits = digits
            .strip_prefix("resnet")
            .unwrap_or(&digits)
            .trim_start_matches('-');
        match digits {
            "18" => Ok(ResNetVariant::ResNet18),
            "50" => Ok(ResNetVariant::ResNet50),
            "152" => Ok(ResNetVariant::ResNet152),
            other => Err(Error::Precondition(format!(
                "unknown ResNet variant `{other}` (expected 18, 50 or 152)"
            ))),
        }
    }
}

/// CONV layers of a ResNet for 224x224 input. The stem is 8 bit, every other
/// layer carries `wq_inner`. Bottleneck blocks put the stride on the 3x3
/// convolution; shortcut projections are tagged [`LayerTag::Projection`].
pub fn resnet(variant: ResNetVariant, wq_inner: u32) -> Result<NetworkSpec> {
    if !DEFAULT_WORD_LENGTHS.contains(&wq_inner) {
        return Err(Error::UnsupportedWordLength {
            layer: format!("{variant}"),
            bits: wq_inner,
        });
    }
    let mut layers =
        vec![ConvLayerSpec::new("conv1", 224, 3, 64, 7, 2, 8).with_tag(LayerTag::Stem)];
    let widths = [64u32, 128, 256, 512];
    let mut side = 56u32;
    let mut in_ch = 64u32;
    for (stage, (&width, &blocks)) in widths.iter().zip(variant.stages().iter()).enumerate() {
        for block in 0..blocks {
            let stride = if block == 0 && stage > 0 { 2 } else { 1 };
            let prefix = format!("layer{}.{}", stage + 1, block);
            let out_side = side.div_ceil(stride);
            let out_ch = if variant.bottleneck() { width * 4 } else { width };
            if variant.bottleneck() {
                layers.push(ConvLayerSpec::new(
                    format!("{prefix}.conv1"),
                    side,
                    in_ch,
                    width,
                    1,
                    1,
                    wq_inner,
                ));
                layers.push(ConvLayerSpec::new(
                    format!("{prefix}.conv2"),
                    side,
                    width,
                    width,
                    3,
                    stride,
                    wq_inner,
                ));
                layers.push(ConvLayerSpec::new(
                    format!("{prefix}.conv3"),
                    out_side,
                    width,
                    out_ch,
                    1,
                    1,
                    wq_inner,
                ));
            } else {
                layers.push(ConvLayerSpec::new(
                    format!("{prefix}.conv1"),
                    side,
                    in_ch,
                    width,
                    3,
                    stride,
                    wq_inner,
                ));
                layers.push(ConvLayerSpec::new(
                    format!("{prefix}.conv2"),
                    out_side,
                    width,
                    width,
                    3,
                    1,
                    wq_inner,
                ));
            }
            if stride != 1 || in_ch != out_ch {
                layers.push(
                    ConvLayerSpec::new(
                        format!("{prefix}.downsample"),
                        side,
                        in_ch,
                        out_ch,
                        1,
                        stride,
                        wq_inner,
                    )
                    .with_tag(LayerTag::Projection),
                );
            }
            in_ch = out_ch;
            side = out_side;
        }
    }
    Ok(NetworkSpec::new(format!("{variant}"), layers))
}
