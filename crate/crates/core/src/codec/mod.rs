//! Lossy coding of layer stacks, views and prediction residuals.
//!
//! Every payload starts with a 16-byte header:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 2    | payload version (u16 LE)                |
//! | 2      | 1    | codec id                                |
//! | 3      | 1    | payload kind (layers / views / residual)|
//! | 4      | 1    | flags                                   |
//! | 5      | 1    | qp                                      |
//! | 6      | 2    | frame count (u16 LE)                    |
//! | 8      | 2    | view height (u16 LE)                    |
//! | 10     | 2    | view width (u16 LE)                     |
//! | 12     | 1    | layer padding s                         |
//! | 13     | 1    | layer padding t                         |
//! | 14     | 2    | reserved                                |
//!
//! followed by the codec-specific body. Frames are `(height + 2 pad_s) x
//! (width + 2 pad_t)`; padding is zero except for layer payloads.

pub mod container;
pub mod hevc;
pub mod qdct;

use std::fmt;

use crate::error::{Error, Result};
use crate::layers::LayerStack;
use crate::lightfield::View;

pub use container::{ContainerHeader, LfcBitstream};
pub use hevc::HevcCommands;

pub const PAYLOAD_VERSION: u16 = 1;
pub const PAYLOAD_HEADER_LEN: usize = 16;

/// Flag: frames were coded in BT.709 YCbCr rather than RGB.
pub const FLAG_YCBCR: u8 = 0b01;
/// Flag: samples carry a +0.5 offset that the decoder removes.
pub const FLAG_OFFSET_HALF: u8 = 0b10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodecId {
    FallbackQdct,
    HevcExternal,
}

impl CodecId {
    pub fn to_u8(self) -> u8 {
        match self {
            CodecId::FallbackQdct => 0,
            CodecId::HevcExternal => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(CodecId::FallbackQdct),
            1 => Some(CodecId::HevcExternal),
            _ => None,
        }
    }
}

impl fmt::Display for CodecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CodecId::FallbackQdct => "fallback",
            CodecId::HevcExternal => "hevc-ext",
        })
    }
}

/// Quantization parameter in `[0, 51]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuantParam(u8);

impl QuantParam {
    pub fn new(qp: i64) -> Result<Self> {
        if !(0..=51).contains(&qp) {
            return Err(Error::BadQp(qp));
        }
        Ok(Self(qp as u8))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Quantizer step on the 8-bit sample scale, `2^((qp - 4) / 6)`.
    pub fn step(self) -> f64 {
        2f64.powf((self.0 as f64 - 4.0) / 6.0)
    }
}

impl fmt::Display for QuantParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A concrete codec: the built-in transform coder or an external HEVC tool.
#[derive(Debug, Clone, PartialEq)]
pub enum Codec {
    Fallback,
    HevcExternal(HevcCommands),
}

impl Codec {
    pub fn id(&self) -> CodecId {
        match self {
            Codec::Fallback => CodecId::FallbackQdct,
            Codec::HevcExternal(_) => CodecId::HevcExternal,
        }
    }

    /// External codec configured from `LFC_HEVC_ENCODE` / `LFC_HEVC_DECODE`.
    pub fn hevc_from_env() -> Result<Self> {
        HevcCommands::from_env().map(Codec::HevcExternal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayloadKind {
    Layers,
    Views,
    Residual,
}

impl PayloadKind {
    fn to_u8(self) -> u8 {
        match self {
            PayloadKind::Layers => 0,
            PayloadKind::Views => 1,
            PayloadKind::Residual => 2,
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(PayloadKind::Layers),
            1 => Some(PayloadKind::Views),
            2 => Some(PayloadKind::Residual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadHeader {
    pub version: u16,
    pub codec: CodecId,
    pub kind: PayloadKind,
    pub flags: u8,
    pub qp: QuantParam,
    pub frames: u16,
    pub height: u16,
    pub width: u16,
    pub pad_s: u8,
    pub pad_t: u8,
}

impl PayloadHeader {
    pub fn frame_dims(&self) -> (usize, usize) {
        (self.height as usize + 2 * self.pad_s as usize, self.width as usize + 2 * self.pad_t as usize)
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.version.to_le_bytes());
        out.push(self.codec.to_u8());
        out.push(self.kind.to_u8());
        out.push(self.flags);
        out.push(self.qp.value());
        out.extend_from_slice(&self.frames.to_le_bytes());
        out.extend_from_slice(&self.height.to_le_bytes());
        out.extend_from_slice(&self.width.to_le_bytes());
        out.push(self.pad_s);
        out.push(self.pad_t);
        out.extend_from_slice(&[0, 0]);
    }

    pub fn parse(payload: &[u8]) -> Result<Self> {
        if payload.len() < PAYLOAD_HEADER_LEN {
            return Err(Error::CorruptPayload(format!("{} bytes is shorter than the payload header", payload.len())));
        }
        let u16_at = |i: usize| u16::from_le_bytes([payload[i], payload[i + 1]]);
        let version = u16_at(0);
        if version != PAYLOAD_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: PAYLOAD_VERSION });
        }
        let codec = CodecId::from_u8(payload[2])
            .ok_or_else(|| Error::CorruptPayload(format!("unknown codec id {}", payload[2])))?;
        let kind = PayloadKind::from_u8(payload[3])
            .ok_or_else(|| Error::CorruptPayload(format!("unknown payload kind {}", payload[3])))?;
        let qp = QuantParam::new(payload[5] as i64).map_err(|e| Error::CorruptPayload(e.to_string()))?;
        Ok(Self {
            version,
            codec,
            kind,
            flags: payload[4],
            qp,
            frames: u16_at(6),
            height: u16_at(8),
            width: u16_at(10),
            pad_s: payload[12],
            pad_t: payload[13],
        })
    }
}

/// Decoded frames together with the header they were read from.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrames {
    pub header: PayloadHeader,
    pub frames: Vec<View>,
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} does not fit in 16 bits")))
}

fn to_u8(v: usize, what: &str) -> Result<u8> {
    u8::try_from(v).map_err(|_| Error::DimensionMismatch(format!("{what} {v} does not fit in 8 bits")))
}

/// Encodes a frame sequence. `view_dims` and `padding` describe how the
/// frame size relates to the light-field view size.
pub fn encode_frames(
    frames: &[View],
    kind: PayloadKind,
    view_dims: (usize, usize),
    padding: (usize, usize),
    qp: QuantParam,
    codec: &Codec,
) -> Result<Vec<u8>> {
    let dims = (view_dims.0 + 2 * padding.0, view_dims.1 + 2 * padding.1);
    if frames.iter().any(|f| f.dims() != dims) {
        return Err(Error::DimensionMismatch(format!("all frames must be {}x{}", dims.0, dims.1)));
    }
    let offset = kind == PayloadKind::Residual;
    let header = PayloadHeader {
        version: PAYLOAD_VERSION,
        codec: codec.id(),
        kind,
        flags: if offset { FLAG_OFFSET_HALF } else { 0 }
            | if matches!(codec, Codec::Fallback) { FLAG_YCBCR } else { 0 },
        qp,
        frames: to_u16(frames.len(), "frame count")?,
        height: to_u16(view_dims.0, "height")?,
        width: to_u16(view_dims.1, "width")?,
        pad_s: to_u8(padding.0, "padding")?,
        pad_t: to_u8(padding.1, "padding")?,
    };
    let shifted: Vec<View>;
    let input = if offset {
        shifted = frames.iter().map(|f| f.map(|x| x + 0.5)).collect();
        &shifted
    } else {
        frames
    };
    let mut out = Vec::new();
    header.write(&mut out);
    match codec {
        Codec::Fallback => qdct::encode(input, &header, &mut out)?,
        Codec::HevcExternal(cmds) => hevc::encode(cmds, input, &header, &mut out)?,
    }
    Ok(out)
}

/// Decodes a payload produced by [`encode_frames`]. `codec` must match the
/// codec id recorded in the payload.
pub fn decode_frames(payload: &[u8], codec: &Codec) -> Result<DecodedFrames> {
    let header = PayloadHeader::parse(payload)?;
    if header.codec != codec.id() {
        return Err(Error::CodecMismatch { declared: codec.id().to_u8(), found: header.codec.to_u8() });
    }
    let body = &payload[PAYLOAD_HEADER_LEN..];
    let mut frames = match codec {
        Codec::Fallback => qdct::decode(body, &header)?,
        Codec::HevcExternal(cmds) => hevc::decode(cmds, body, &header)?,
    };
    let (lo, hi, shift) = if header.flags & FLAG_OFFSET_HALF != 0 { (-1.0, 1.0, 0.5) } else { (0.0, 1.0, 0.0) };
    for f in &mut frames {
        for x in f.data_mut() {
            *x = (*x - shift).clamp(lo, hi);
        }
    }
    Ok(DecodedFrames { header, frames })
}

/// Codes the three layers as a 3-frame sequence in depth order -1, 0, 1.
pub fn encode_layers(stack: &LayerStack, qp: QuantParam, codec: &Codec) -> Result<Vec<u8>> {
    encode_frames(stack.layers(), PayloadKind::Layers, stack.view_dims(), stack.padding(), qp, codec)
}

pub fn decode_layers(payload: &[u8], codec: &Codec) -> Result<LayerStack> {
    let DecodedFrames { header, frames } = decode_frames(payload, codec)?;
    if header.kind != PayloadKind::Layers || frames.len() != 3 {
        return Err(Error::CorruptPayload("payload does not hold a three-layer stack".into()));
    }
    let [a, b, c]: [View; 3] = frames.try_into().expect("three frames");
    LayerStack::from_layers(
        header.height as usize,
        header.width as usize,
        header.pad_s as usize,
        header.pad_t as usize,
        [a, b, c],
    )
}

/// Codes full views (values in `[0, 1]`) as a frame sequence.
pub fn encode_views(views: &[View], qp: QuantParam, codec: &Codec) -> Result<Vec<u8>> {
    let dims = views.first().map(View::dims).ok_or_else(|| Error::InvalidConfig("no views to encode".into()))?;
    encode_frames(views, PayloadKind::Views, dims, (0, 0), qp, codec)
}

pub fn decode_views(payload: &[u8], codec: &Codec) -> Result<Vec<View>> {
    let d = decode_frames(payload, codec)?;
    if d.header.kind != PayloadKind::Views {
        return Err(Error::CorruptPayload("payload does not hold views".into()));
    }
    Ok(d.frames)
}

/// Codes signed residual views (values in `[-1, 1]`), offset by +0.5.
pub fn encode_residual(residuals: &[View], qp: QuantParam, codec: &Codec) -> Result<Vec<u8>> {
    let dims = residuals.first().map(View::dims).ok_or_else(|| Error::InvalidConfig("no residuals to encode".into()))?;
    encode_frames(residuals, PayloadKind::Residual, dims, (0, 0), qp, codec)
}

pub fn decode_residual(payload: &[u8], codec: &Codec) -> Result<Vec<View>> {
    let d = decode_frames(payload, codec)?;
    if d.header.kind != PayloadKind::Residual {
        return Err(Error::CorruptPayload("payload does not hold residuals".into()));
    }
    Ok(d.frames)
}
