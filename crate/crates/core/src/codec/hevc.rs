//! Adapter for an external HEVC encoder/decoder pair.
//!
//! Frames are written as planar 8-bit YUV 4:4:4 (BT.709, full range), padded
//! to a multiple of 8 by edge replication, and handed to user-supplied shell
//! command templates. Templates may use `{input}`, `{output}`, `{qp}`, `{w}`,
//! `{h}` and `{frames}`. Body layout: `u32` bitstream length then the
//! bitstream.

use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::PayloadHeader;
use crate::error::{Error, Result};
use crate::lightfield::View;

pub const ENV_ENCODE: &str = "LFC_HEVC_ENCODE";
pub const ENV_DECODE: &str = "LFC_HEVC_DECODE";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HevcCommands {
    pub encode: String,
    pub decode: String,
}

impl HevcCommands {
    pub fn from_env() -> Result<Self> {
        let get = |k: &str| {
            std::env::var(k)
                .ok()
                .filter(|v| !v.trim().is_empty())
                .ok_or_else(|| Error::CodecUnavailable(format!("set {ENV_ENCODE} and {ENV_DECODE} to use the external HEVC codec ({k} is unset)")))
        };
        Ok(Self { encode: get(ENV_ENCODE)?, decode: get(ENV_DECODE)? })
    }
}

fn padded(x: usize) -> usize {
    x.div_ceil(8).max(1) * 8
}

fn quant8(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

fn write_yuv(frames: &[View], path: &Path) -> Result<()> {
    let (fh, fw) = frames[0].dims();
    let (h, w) = (padded(fh), padded(fw));
    let mut buf = Vec::with_capacity(frames.len() * 3 * h * w);
    for f in frames {
        let mut planes = [vec![0u8; h * w], vec![0u8; h * w], vec![0u8; h * w]];
        for y in 0..h {
            for x in 0..w {
                let (sy, sx) = (y.min(fh - 1), x.min(fw - 1));
                let (r, g, b) = (f.get(0, sy, sx), f.get(1, sy, sx), f.get(2, sy, sx));
                let luma = 0.2126 * r + 0.7152 * g + 0.0722 * b;
                planes[0][y * w + x] = quant8(luma);
                planes[1][y * w + x] = quant8((b - luma) / 1.8556 + 0.5);
                planes[2][y * w + x] = quant8((r - luma) / 1.5748 + 0.5);
            }
        }
        for p in &planes {
            buf.extend_from_slice(p);
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

fn read_yuv(path: &Path, frames: usize, fh: usize, fw: usize) -> Result<Vec<View>> {
    let (h, w) = (padded(fh), padded(fw));
    let bytes = std::fs::read(path)?;
    let frame_len = 3 * h * w;
    if bytes.len() < frames * frame_len {
        return Err(Error::ExternalCodec(format!("decoder produced {} bytes, expected {}", bytes.len(), frames * frame_len)));
    }
    let mut out = Vec::with_capacity(frames);
    for k in 0..frames {
        let base = &bytes[k * frame_len..(k + 1) * frame_len];
        let mut v = View::new(fh, fw);
        for y in 0..fh {
            for x in 0..fw {
                let i = y * w + x;
                let luma = base[i] as f64 / 255.0;
                let cb = base[h * w + i] as f64 / 255.0 - 0.5;
                let cr = base[2 * h * w + i] as f64 / 255.0 - 0.5;
                let r = luma + 1.5748 * cr;
                let b = luma + 1.8556 * cb;
                let g = (luma - 0.2126 * r - 0.0722 * b) / 0.7152;
                v.set(0, y, x, r);
                v.set(1, y, x, g);
                v.set(2, y, x, b);
            }
        }
        out.push(v);
    }
    Ok(out)
}

fn run(template: &str, input: &Path, output: &Path, header: &PayloadHeader) -> Result<()> {
    let (fh, fw) = header.frame_dims();
    let cmd = template
        .replace("{input}", &input.display().to_string())
        .replace("{output}", &output.display().to_string())
        .replace("{qp}", &header.qp.to_string())
        .replace("{w}", &padded(fw).to_string())
        .replace("{h}", &padded(fh).to_string())
        .replace("{frames}", &header.frames.to_string());
    let result = Command::new("sh").arg("-c").arg(&cmd).output().map_err(|e| Error::CodecUnavailable(format!("cannot spawn shell: {e}")))?;
    match result.status.code() {
        Some(0) => Ok(()),
        Some(127) => Err(Error::CodecUnavailable(format!("command not found: {cmd}"))),
        _ => Err(Error::ExternalCodec(format!(
            "`{cmd}` exited with {}: {}",
            result.status,
            String::from_utf8_lossy(&result.stderr).trim()
        ))),
    }
}

pub(super) fn encode(cmds: &HevcCommands, frames: &[View], header: &PayloadHeader, out: &mut Vec<u8>) -> Result<()> {
    if frames.is_empty() {
        out.extend_from_slice(&0u32.to_le_bytes());
        return Ok(());
    }
    let dir = tempfile::tempdir()?;
    let yuv = dir.path().join("input.yuv");
    let bits = dir.path().join("stream.bin");
    write_yuv(frames, &yuv)?;
    run(&cmds.encode, &yuv, &bits, header)?;
    let stream = std::fs::read(&bits).map_err(|e| Error::ExternalCodec(format!("encoder wrote no bitstream: {e}")))?;
    out.extend_from_slice(&(stream.len() as u32).to_le_bytes());
    out.extend_from_slice(&stream);
    Ok(())
}

pub(super) fn decode(cmds: &HevcCommands, body: &[u8], header: &PayloadHeader) -> Result<Vec<View>> {
    if body.len() < 4 {
        return Err(Error::CorruptPayload("missing bitstream length".into()));
    }
    let len = u32::from_le_bytes([body[0], body[1], body[2], body[3]]) as usize;
    if body.len() != 4 + len {
        return Err(Error::CorruptPayload(format!("bitstream has {} bytes, header says {len}", body.len() - 4)));
    }
    if header.frames == 0 {
        return Ok(Vec::new());
    }
    let dir = tempfile::tempdir()?;
    let bits = dir.path().join("stream.bin");
    let yuv = dir.path().join("output.yuv");
    std::fs::write(&bits, &body[4..])?;
    run(&cmds.decode, &bits, &yuv, header)?;
    let (fh, fw) = header.frame_dims();
    read_yuv(&yuv, header.frames as usize, fh, fw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{decode_views, encode_views, Codec, QuantParam};

    fn copy_codec() -> Codec {
        Codec::HevcExternal(HevcCommands { encode: "cp {input} {output}".into(), decode: "cp {input} {output}".into() })
    }

    #[test]
    fn passthrough_commands_round_trip_to_8_bits() {
        let mut v = View::new(6, 10);
        for (i, x) in v.data_mut().iter_mut().enumerate() {
            *x = 0.2 + 0.6 * ((i * 7) % 13) as f64 / 12.0;
        }
        let qp = QuantParam::new(22).unwrap();
        let payload = encode_views(&[v.clone(), v.clone()], qp, &copy_codec()).unwrap();
        let back = decode_views(&payload, &copy_codec()).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in v.data().iter().zip(back[1].data()) {
            assert!((a - b).abs() < 4.0 / 255.0, "{a} vs {b}");
        }
    }

    #[test]
    fn missing_tool_is_unavailable() {
        let codec = Codec::HevcExternal(HevcCommands {
            encode: "definitely-not-a-real-hevc-encoder {input}".into(),
            decode: "true".into(),
        });
        let err = encode_views(&[View::filled(8, 8, 0.5)], QuantParam::new(30).unwrap(), &codec).unwrap_err();
        assert!(matches!(err, Error::CodecUnavailable(_)), "{err}");
    }

    #[test]
    fn failing_tool_is_reported() {
        let codec = Codec::HevcExternal(HevcCommands { encode: "exit 3".into(), decode: "true".into() });
        let err = encode_views(&[View::filled(8, 8, 0.5)], QuantParam::new(30).unwrap(), &codec).unwrap_err();
        assert!(matches!(err, Error::ExternalCodec(_)), "{err}");
    }
}
