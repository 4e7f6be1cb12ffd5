//! Workload description: layer specs, the network file format, shape
//! inference and the built-in VGG-16 convolutional trunk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Pool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: u64,
    pub height: u64,
    pub width: u64,
}

/// A layer as declared, before shape inference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    /// Output channels; `None` for pools.
    pub out_channels: Option<u64>,
    pub kernel: [u64; 2],
    pub stride: [u64; 2],
    /// Always `[0, 0]` for pools.
    pub padding: [u64; 2],
}

/// A network as parsed from a document; layer shapes are not yet resolved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawNetwork {
    pub name: String,
    pub input: InputShape,
    pub bytes_per_element: u64,
    pub layers: Vec<LayerSpec>,
}

/// A layer with every tensor dimension resolved.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConvLayer {
    pub id: usize,
    pub name: String,
    pub kind: LayerKind,
    pub in_channels: u64,
    pub out_channels: u64,
    pub in_h: u64,
    pub in_w: u64,
    pub kernel_h: u64,
    pub kernel_w: u64,
    pub stride_h: u64,
    pub stride_w: u64,
    pub pad_h: u64,
    pub pad_w: u64,
    pub out_h: u64,
    pub out_w: u64,
}

impl ConvLayer {
    pub fn is_pool(&self) -> bool {
        self.kind == LayerKind::Pool
    }

    /// `N·N_kh·N_kw·M`; zero for pools.
    pub fn weight_elems(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.in_channels * self.kernel_h * self.kernel_w * self.out_channels,
            LayerKind::Pool => 0,
        }
    }

    /// `N·N_ih·N_iw` (unpadded).
    pub fn input_elems(&self) -> u64 {
        self.in_channels * self.in_h * self.in_w
    }

    /// `M·N_oh·N_ow`.
    pub fn output_elems(&self) -> u64 {
        self.out_channels * self.out_h * self.out_w
    }
}

/// A resolved network. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkModel {
    pub name: String,
    pub input: InputShape,
    pub bytes_per_element: u64,
    pub layers: Vec<ConvLayer>,
}

impl NetworkModel {
    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Recovers the declaration this model was resolved from.
    pub fn to_raw(&self) -> RawNetwork {
        RawNetwork {
            name: self.name.clone(),
            input: self.input,
            bytes_per_element: self.bytes_per_element,
            layers: self
                .layers
                .iter()
                .map(|l| LayerSpec {
                    name: l.name.clone(),
                    kind: l.kind,
                    out_channels: (l.kind == LayerKind::Conv).then_some(l.out_channels),
                    kernel: [l.kernel_h, l.kernel_w],
                    stride: [l.stride_h, l.stride_w],
                    padding: [l.pad_h, l.pad_w],
                })
                .collect(),
        }
    }

    pub fn to_document(&self) -> String {
        self.to_raw().to_document()
    }
}

fn out_dim(input: u64, pad: u64, kernel: u64, stride: u64) -> Option<u64> {
    let padded = input + 2 * pad;
    if kernel > padded {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

impl RawNetwork {
    pub fn new(name: impl Into<String>, channels: u64, height: u64, width: u64) -> Self {
        RawNetwork {
            name: name.into(),
            input: InputShape {
                channels,
                height,
                width,
            },
            bytes_per_element: 1,
            layers: Vec::new(),
        }
    }

    pub fn with_bytes_per_element(mut self, bytes: u64) -> Self {
        self.bytes_per_element = bytes;
        self
    }

    /// Appends a conv layer with square kernel, stride and padding.
    pub fn conv(self, out_channels: u64, kernel: u64, stride: u64, pad: u64) -> Self {
        let name = format!("conv{}", self.layers.len());
        self.conv_named(name, out_channels, [kernel; 2], [stride; 2], [pad; 2])
    }

    pub fn conv_named(
        mut self,
        name: impl Into<String>,
        out_channels: u64,
        kernel: [u64; 2],
        stride: [u64; 2],
        padding: [u64; 2],
    ) -> Self {
        self.layers.push(LayerSpec {
            name: name.into(),
            kind: LayerKind::Conv,
            out_channels: Some(out_channels),
            kernel,
            stride,
            padding,
        });
        self
    }

    pub fn pool(self, kernel: u64, stride: u64) -> Self {
        let name = format!("pool{}", self.layers.len());
        self.pool_named(name, [kernel; 2], [stride; 2])
    }

    pub fn pool_named(
        mut self,
        name: impl Into<String>,
        kernel: [u64; 2],
        stride: [u64; 2],
    ) -> Self {
        self.layers.push(LayerSpec {
            name: name.into(),
            kind: LayerKind::Pool,
            out_channels: None,
            kernel,
            stride,
            padding: [0, 0],
        });
        self
    }

    fn check_schema(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::SchemaViolation(msg));
        let InputShape {
            channels,
            height,
            width,
        } = self.input;
        if channels == 0 || height == 0 || width == 0 {
            return bad("input dimensions must be positive".into());
        }
        if self.bytes_per_element == 0 {
            return bad("bytes_per_element must be positive".into());
        }
        if self.layers.is_empty() {
            return bad("layers must not be empty".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel.contains(&0) || l.stride.contains(&0) {
                return bad(format!("layer {i}: kernel and stride must be positive"));
            }
            match l.kind {
                LayerKind::Conv => {
                    if l.out_channels.unwrap_or(0) == 0 {
                        return bad(format!("layer {i}: out_channels must be positive"));
                    }
                }
                LayerKind::Pool => {
                    if l.out_channels.is_some() || l.padding != [0, 0] {
                        return bad(format!("layer {i}: pools take no out_channels or padding"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Infers every layer's tensor shapes, chaining each layer's output into
    /// the next layer's input.
    pub fn resolve(&self) -> Result<NetworkModel> {
        self.check_schema()?;
        let (mut c, mut h, mut w) = (self.input.channels, self.input.height, self.input.width);
        let mut layers = Vec::with_capacity(self.layers.len());
        for (id, spec) in self.layers.iter().enumerate() {
            let [kh, kw] = spec.kernel;
            let [sh, sw] = spec.stride;
            let [ph, pw] = spec.padding;
            let degenerate =
                |axis: &str, input: u64, pad: u64, kernel: u64| Error::DegenerateShape {
                    layer: id,
                    name: spec.name.clone(),
                    detail: format!(
                        "{axis}: kernel {kernel} exceeds padded input {}",
                        input + 2 * pad
                    ),
                };
            let oh = out_dim(h, ph, kh, sh).ok_or_else(|| degenerate("height", h, ph, kh))?;
            let ow = out_dim(w, pw, kw, sw).ok_or_else(|| degenerate("width", w, pw, kw))?;
            let m = match spec.kind {
                LayerKind::Conv => spec.out_channels.unwrap_or(c),
                LayerKind::Pool => c,
            };
            layers.push(ConvLayer {
                id,
                name: spec.name.clone(),
                kind: spec.kind,
                in_channels: c,
                out_channels: m,
                in_h: h,
                in_w: w,
                kernel_h: kh,
                kernel_w: kw,
                stride_h: sh,
                stride_w: sw,
                pad_h: ph,
                pad_w: pw,
                out_h: oh,
                out_w: ow,
            });
            (c, h, w) = (m, oh, ow);
        }
        Ok(NetworkModel {
            name: self.name.clone(),
            input: self.input,
            bytes_per_element: self.bytes_per_element,
            layers,
        })
    }

    /// Serializes to the canonical network document.
    pub fn to_document(&self) -> String {
        let doc = NetworkDoc {
            name: self.name.clone(),
            input: self.input,
            bytes_per_element: Some(self.bytes_per_element),
            layers: self
                .layers
                .iter()
                .map(|l| match l.kind {
                    LayerKind::Conv => LayerDoc::Conv {
                        name: Some(l.name.clone()),
                        out_channels: l.out_channels.unwrap_or(0),
                        kernel: l.kernel,
                        stride: l.stride,
                        padding: l.padding,
                    },
                    LayerKind::Pool => LayerDoc::Pool {
                        name: Some(l.name.clone()),
                        kernel: l.kernel,
                        stride: l.stride,
                    },
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("network document serializes");
        s.push('\n');
        s
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    name: String,
    input: InputShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bytes_per_element: Option<u64>,
    layers: Vec<LayerDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum LayerDoc {
    Conv {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        out_channels: u64,
        kernel: [u64; 2],
        stride: [u64; 2],
        padding: [u64; 2],
    },
    Pool {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        kernel: [u64; 2],
        stride: [u64; 2],
    },
}

pub(crate) fn json_error(e: serde_json::Error) -> Error {
    use serde_json::error::Category;
    match e.classify() {
        Category::Data => Error::SchemaViolation(e.to_string()),
        Category::Syntax | Category::Eof | Category::Io => Error::MalformedDocument(e.to_string()),
    }
}

/// Parses a network document. Shapes are left unresolved.
pub fn parse_network(text: &str) -> Result<RawNetwork> {
    let doc: NetworkDoc = serde_json::from_str(text).map_err(json_error)?;
    let layers = doc
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| match l {
            LayerDoc::Conv {
                name,
                out_channels,
                kernel,
                stride,
                padding,
            } => LayerSpec {
                name: name.unwrap_or_else(|| format!("conv{i}")),
                kind: LayerKind::Conv,
                out_channels: Some(out_channels),
                kernel,
                stride,
                padding,
            },
            LayerDoc::Pool {
                name,
                kernel,
                stride,
            } => LayerSpec {
                name: name.unwrap_or_else(|| format!("pool{i}")),
                kind: LayerKind::Pool,
                out_channels: None,
                kernel,
                stride,
                padding: [0, 0],
            },
        })
        .collect();
    let raw = RawNetwork {
        name: doc.name,
        input: doc.input,
        bytes_per_element: doc.bytes_per_element.unwrap_or(1),
        layers,
    };
    raw.check_schema()?;
    Ok(raw)
}

pub fn resolve_shapes(raw: &RawNetwork) -> Result<NetworkModel> {
    raw.resolve()
}

/// VGG-16 trunk without the fully-connected head.
pub fn vgg16_raw() -> RawNetwork {
    let blocks: [&[u64]; 5] = [
        &[64, 64],
        &[128, 128],
        &[256, 256, 256],
        &[512, 512, 512],
        &[512, 512, 512],
    ];
    let mut net = RawNetwork::new("vgg16", 3, 224, 224);
    for (b, widths) in blocks.iter().enumerate() {
        for (i, &w) in widths.iter().enumerate() {
            net = net.conv_named(
                format!("conv{}_{}", b + 1, i + 1),
                w,
                [3, 3],
                [1, 1],
                [1, 1],
            );
        }
        net = net.pool_named(format!("pool{}", b + 1), [2, 2], [2, 2]);
    }
    net
}

pub fn build_vgg16() -> NetworkModel {
    vgg16_raw().resolve().expect("VGG-16 trunk resolves")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_CONV: &str = r#"{
        "name": "tiny",
        "input": {"channels": 3, "height": 224, "width": 224},
        "layers": [
            {"type": "conv", "out_channels": 64, "kernel": [3, 3], "stride": [1, 1], "padding": [1, 1]}
        ]
    }"#;

    #[test]
    fn parses_minimal_document() {
        let raw = parse_network(ONE_CONV).unwrap();
        assert_eq!(raw.layers.len(), 1);
        assert_eq!(raw.bytes_per_element, 1);
        assert_eq!(raw.layers[0].out_channels, Some(64));
        assert_eq!(raw.input.height, 224);
    }

    #[test]
    fn rejects_fc_layer() {
        let doc = ONE_CONV.replace("\"conv\"", "\"fc\"");
        assert!(matches!(
            parse_network(&doc),
            Err(Error::SchemaViolation(_))
        ));
    }

    #[test]
    fn rejects_unknown_and_missing_fields() {
        let extra = ONE_CONV.replace("\"out_channels\"", "\"dilation\": [1,1], \"out_channels\"");
        assert!(matches!(
            parse_network(&extra),
            Err(Error::SchemaViolation(_))
        ));
        let missing = ONE_CONV
            .replace("\"padding\": [1, 1]", "\"stride2\": 1")
            .replace(", \"stride2\": 1", "");
        assert!(matches!(
            parse_network(&missing),
            Err(Error::SchemaViolation(_))
        ));
        let top = ONE_CONV.replace("\"name\": \"tiny\"", "\"name\": \"tiny\", \"extra\": 1");
        assert!(matches!(
            parse_network(&top),
            Err(Error::SchemaViolation(_))
        ));
        let pool_pad = r#"{"name":"p","input":{"channels":1,"height":4,"width":4},
            "layers":[{"type":"pool","kernel":[2,2],"stride":[2,2],"padding":[0,0]}]}"#;
        assert!(matches!(
            parse_network(pool_pad),
            Err(Error::SchemaViolation(_))
        ));
    }

    #[test]
    fn rejects_non_positive_dimensions() {
        let zero = ONE_CONV.replace("\"out_channels\": 64", "\"out_channels\": 0");
        assert!(matches!(
            parse_network(&zero),
            Err(Error::SchemaViolation(_))
        ));
        let neg = ONE_CONV.replace("\"stride\": [1, 1]", "\"stride\": [-1, 1]");
        assert!(matches!(
            parse_network(&neg),
            Err(Error::SchemaViolation(_))
        ));
        let zk = ONE_CONV.replace("\"kernel\": [3, 3]", "\"kernel\": [0, 3]");
        assert!(matches!(parse_network(&zk), Err(Error::SchemaViolation(_))));
        let empty = r#"{"name":"e","input":{"channels":1,"height":1,"width":1},"layers":[]}"#;
        assert!(matches!(
            parse_network(empty),
            Err(Error::SchemaViolation(_))
        ));
    }

    #[test]
    fn rejects_malformed_syntax() {
        assert!(matches!(
            parse_network("{\"name\": "),
            Err(Error::MalformedDocument(_))
        ));
        assert!(matches!(
            parse_network("not json"),
            Err(Error::MalformedDocument(_))
        ));
    }

    #[test]
    fn floor_formula_examples() {
        let m = RawNetwork::new("c", 1, 224, 224)
            .conv(1, 3, 1, 1)
            .resolve()
            .unwrap();
        assert_eq!((m.layers[0].out_h, m.layers[0].out_w), (224, 224));
        let m = RawNetwork::new("p", 1, 224, 224)
            .pool(2, 2)
            .resolve()
            .unwrap();
        assert_eq!(m.layers[0].out_h, 112);
        assert_eq!(m.layers[0].out_channels, 1);
        let err = RawNetwork::new("d", 1, 2, 2)
            .conv(1, 5, 1, 0)
            .resolve()
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateShape { layer: 0, .. }));
    }

    #[test]
    fn strided_conv_floors() {
        let m = RawNetwork::new("s", 1, 7, 8)
            .conv(1, 3, 2, 0)
            .resolve()
            .unwrap();
        assert_eq!((m.layers[0].out_h, m.layers[0].out_w), (3, 3));
    }

    #[test]
    fn vgg16_structure() {
        let vgg = build_vgg16();
        assert_eq!(vgg.len(), 18);
        assert_eq!(vgg.layers.iter().filter(|l| l.is_pool()).count(), 5);
        let l0 = &vgg.layers[0];
        assert_eq!(
            (l0.in_channels, l0.out_channels, l0.in_h, l0.out_h),
            (3, 64, 224, 224)
        );
        assert_eq!(l0.weight_elems(), 1_728);
        let total: u64 = vgg.layers.iter().map(ConvLayer::weight_elems).sum();
        assert_eq!(total, 14_710_464);
        let last = vgg.layers.last().unwrap();
        assert_eq!((last.out_channels, last.out_h, last.out_w), (512, 7, 7));
    }

    #[test]
    fn vgg16_document_round_trips() {
        let raw = vgg16_raw();
        let doc = raw.to_document();
        assert_eq!(parse_network(&doc).unwrap(), raw);
        assert_eq!(
            parse_network(&doc).unwrap().resolve().unwrap(),
            build_vgg16()
        );
    }

    #[test]
    fn resolve_is_idempotent_on_vgg() {
        let vgg = build_vgg16();
        assert_eq!(vgg.to_raw().resolve().unwrap(), vgg);
    }
}
