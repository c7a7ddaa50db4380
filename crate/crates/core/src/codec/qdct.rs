//! Built-in transform coder.
//!
//! Per frame: optional BT.709 YCbCr conversion, 8x8 orthonormal DCT-II,
//! uniform quantization with step `2^((qp - 4) / 6)` on the 8-bit scale,
//! zigzag scan and run-length coding, the whole symbol stream then deflated.
//! Frames after the first may be coded as a difference from the previous
//! reconstructed frame when that is cheaper.
//!
//! Body layout: `u32` symbol-stream length followed by the deflate stream.

use std::io::{Read, Write};
use std::sync::OnceLock;

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::{PayloadHeader, FLAG_YCBCR};
use crate::error::{Error, Result};
use crate::lightfield::View;

const N: usize = 8;
const LEVEL_SHIFT: f64 = 127.5;

const MODE_INTRA: u8 = 0;
const MODE_INTER: u8 = 1;

#[rustfmt::skip]
const ZIGZAG: [usize; 64] = [
     0,  1,  8, 16,  9,  2,  3, 10,
    17, 24, 32, 25, 18, 11,  4,  5,
    12, 19, 26, 33, 40, 48, 41, 34,
    27, 20, 13,  6,  7, 14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36,
    29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46,
    53, 60, 61, 54, 47, 55, 62, 63,
];

fn dct_basis() -> &'static [[f64; N]; N] {
    static BASIS: OnceLock<[[f64; N]; N]> = OnceLock::new();
    BASIS.get_or_init(|| {
        let mut c = [[0.0; N]; N];
        for (k, row) in c.iter_mut().enumerate() {
            let alpha = if k == 0 { (1.0 / N as f64).sqrt() } else { (2.0 / N as f64).sqrt() };
            for (n, x) in row.iter_mut().enumerate() {
                *x = alpha * (std::f64::consts::PI * (2 * n + 1) as f64 * k as f64 / (2 * N) as f64).cos();
            }
        }
        c
    })
}

pub fn forward_dct(block: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0; 64];
    for r in 0..N {
        for k in 0..N {
            tmp[r * N + k] = (0..N).map(|n| c[k][n] * block[r * N + n]).sum();
        }
    }
    let mut out = [0.0; 64];
    for k in 0..N {
        for col in 0..N {
            out[k * N + col] = (0..N).map(|r| c[k][r] * tmp[r * N + col]).sum();
        }
    }
    out
}

pub fn inverse_dct(coef: &[f64; 64]) -> [f64; 64] {
    let c = dct_basis();
    let mut tmp = [0.0; 64];
    for r in 0..N {
        for col in 0..N {
            tmp[r * N + col] = (0..N).map(|k| c[k][r] * coef[k * N + col]).sum();
        }
    }
    let mut out = [0.0; 64];
    for r in 0..N {
        for n in 0..N {
            out[r * N + n] = (0..N).map(|k| c[k][n] * tmp[r * N + k]).sum();
        }
    }
    out
}

/// Working-domain planes of one frame, padded to a multiple of 8.
#[derive(Clone)]
struct Planes {
    h: usize,
    w: usize,
    data: [Vec<f64>; 3],
}

fn padded(x: usize) -> usize {
    x.div_ceil(N).max(1) * N
}

fn to_working(frame: &View, ycbcr: bool) -> Planes {
    let (fh, fw) = frame.dims();
    let (h, w) = (padded(fh), padded(fw));
    let mut data = [vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w]];
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = (y.min(fh - 1), x.min(fw - 1));
            let (r, g, b) = (frame.get(0, sy, sx) * 255.0, frame.get(1, sy, sx) * 255.0, frame.get(2, sy, sx) * 255.0);
            let px = if ycbcr {
                let luma = 0.2126 * r + 0.7152 * g + 0.0722 * b;
                [luma - LEVEL_SHIFT, (b - luma) / 1.8556, (r - luma) / 1.5748]
            } else {
                [r - LEVEL_SHIFT, g - LEVEL_SHIFT, b - LEVEL_SHIFT]
            };
            for ch in 0..3 {
                data[ch][y * w + x] = px[ch];
            }
        }
    }
    Planes { h, w, data }
}

fn from_working(p: &Planes, fh: usize, fw: usize, ycbcr: bool) -> View {
    let mut out = View::new(fh, fw);
    for y in 0..fh {
        for x in 0..fw {
            let i = y * p.w + x;
            let (a, b, c) = (p.data[0][i], p.data[1][i], p.data[2][i]);
            let rgb = if ycbcr {
                let luma = a + LEVEL_SHIFT;
                let r = luma + 1.5748 * c;
                let bl = luma + 1.8556 * b;
                let g = (luma - 0.2126 * r - 0.0722 * bl) / 0.7152;
                [r, g, bl]
            } else {
                [a + LEVEL_SHIFT, b + LEVEL_SHIFT, c + LEVEL_SHIFT]
            };
            for ch in 0..3 {
                out.set(ch, y, x, rgb[ch] / 255.0);
            }
        }
    }
    out
}

fn load_block(plane: &[f64], w: usize, by: usize, bx: usize) -> [f64; 64] {
    let mut b = [0.0; 64];
    for r in 0..N {
        b[r * N..(r + 1) * N].copy_from_slice(&plane[(by + r) * w + bx..(by + r) * w + bx + N]);
    }
    b
}

fn quantize(block: &[f64; 64], step: f64) -> [i32; 64] {
    let coef = forward_dct(block);
    let mut q = [0i32; 64];
    for (i, &z) in ZIGZAG.iter().enumerate() {
        q[i] = (coef[z] / step).round() as i32;
    }
    q
}

/// Shared by encoder and decoder so both reconstruct identically.
fn reconstruct(q: &[i32; 64], step: f64) -> [f64; 64] {
    let mut coef = [0.0; 64];
    for (i, &z) in ZIGZAG.iter().enumerate() {
        coef[z] = q[i] as f64 * step;
    }
    inverse_dct(&coef)
}

fn block_cost(q: &[i32; 64]) -> f64 {
    q.iter().filter(|&&v| v != 0).map(|&v| 2.0 + (1.0 + v.unsigned_abs() as f64).log2()).sum()
}

fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

fn put_signed(out: &mut Vec<u8>, v: i32) {
    put_varint(out, ((v << 1) ^ (v >> 31)) as u32 as u64);
}

fn put_block(out: &mut Vec<u8>, q: &[i32; 64]) {
    let nnz = q.iter().filter(|&&v| v != 0).count();
    put_varint(out, nnz as u64);
    let mut run = 0u64;
    for &v in q {
        if v == 0 {
            run += 1;
        } else {
            put_varint(out, run);
            put_signed(out, v);
            run = 0;
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn byte(&mut self) -> Result<u8> {
        let b = *self.buf.get(self.pos).ok_or_else(|| Error::CorruptPayload("symbol stream truncated".into()))?;
        self.pos += 1;
        Ok(b)
    }

    fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.byte()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::CorruptPayload("varint overflow".into()))
    }

    fn signed(&mut self) -> Result<i32> {
        let u = self.varint()?;
        let u = u32::try_from(u).map_err(|_| Error::CorruptPayload("coefficient out of range".into()))?;
        Ok(((u >> 1) as i32) ^ -((u & 1) as i32))
    }

    fn block(&mut self) -> Result<[i32; 64]> {
        let nnz = self.varint()? as usize;
        if nnz > 64 {
            return Err(Error::CorruptPayload("block with more than 64 coefficients".into()));
        }
        let mut q = [0i32; 64];
        let mut pos = 0usize;
        for _ in 0..nnz {
            pos += self.varint()? as usize;
            if pos >= 64 {
                return Err(Error::CorruptPayload("coefficient run past block end".into()));
            }
            q[pos] = self.signed()?;
            pos += 1;
        }
        Ok(q)
    }
}

/// Quantized blocks of one frame plus its reconstruction, given a predictor.
fn code_frame(cur: &Planes, pred: Option<&Planes>, step: f64) -> (Vec<[i32; 64]>, Planes, f64) {
    let mut blocks = Vec::with_capacity(3 * cur.h * cur.w / 64);
    let mut recon = cur.clone();
    let mut cost = 0.0;
    for ch in 0..3 {
        for by in (0..cur.h).step_by(N) {
            for bx in (0..cur.w).step_by(N) {
                let mut blk = load_block(&cur.data[ch], cur.w, by, bx);
                let p = pred.map(|p| load_block(&p.data[ch], p.w, by, bx));
                if let Some(p) = &p {
                    for i in 0..64 {
                        blk[i] -= p[i];
                    }
                }
                let q = quantize(&blk, step);
                cost += block_cost(&q);
                let mut rec = reconstruct(&q, step);
                if let Some(p) = &p {
                    for i in 0..64 {
                        rec[i] += p[i];
                    }
                }
                for r in 0..N {
                    recon.data[ch][(by + r) * cur.w + bx..(by + r) * cur.w + bx + N].copy_from_slice(&rec[r * N..(r + 1) * N]);
                }
                blocks.push(q);
            }
        }
    }
    (blocks, recon, cost)
}

pub(super) fn encode(frames: &[View], header: &PayloadHeader, out: &mut Vec<u8>) -> Result<()> {
    let ycbcr = header.flags & FLAG_YCBCR != 0;
    let step = header.qp.step();
    let mut symbols = Vec::new();
    let mut reference: Option<Planes> = None;
    for frame in frames {
        let cur = to_working(frame, ycbcr);
        let (intra, intra_rec, intra_cost) = code_frame(&cur, None, step);
        let chosen = match &reference {
            Some(prev) => {
                let (inter, inter_rec, inter_cost) = code_frame(&cur, Some(prev), step);
                if inter_cost < intra_cost {
                    (MODE_INTER, inter, inter_rec)
                } else {
                    (MODE_INTRA, intra, intra_rec)
                }
            }
            None => (MODE_INTRA, intra, intra_rec),
        };
        symbols.push(chosen.0);
        for q in &chosen.1 {
            put_block(&mut symbols, q);
        }
        reference = Some(chosen.2);
    }
    let mut enc = DeflateEncoder::new(Vec::new(), Compression::best());
    enc.write_all(&symbols)?;
    let packed = enc.finish()?;
    out.extend_from_slice(&(symbols.len() as u32).to_le_bytes());
    out.extend_from_slice(&packed);
    Ok(())
}

pub(super) fn decode(body: &[u8], header: &PayloadHeader) -> Result<Vec<View>> {
    if body.len() < 4 {
        return Err(Error::CorruptPayload("missing symbol-stream length".into()));
    }
    let raw_len = u32::from_le_bytes([body[0], body[1], body[2], body[3]]) as usize;
    let (fh, fw) = header.frame_dims();
    let (h, w) = (padded(fh), padded(fw));
    let max_len = header.frames as usize * (1 + 3 * (h * w / 64) * (1 + 64 * 10));
    if raw_len > max_len {
        return Err(Error::CorruptPayload("declared symbol stream too long".into()));
    }
    let mut symbols = Vec::with_capacity(raw_len);
    DeflateDecoder::new(&body[4..])
        .take(raw_len as u64 + 1)
        .read_to_end(&mut symbols)
        .map_err(|e| Error::CorruptPayload(format!("entropy stage: {e}")))?;
    if symbols.len() != raw_len {
        return Err(Error::CorruptPayload(format!("symbol stream has {} bytes, expected {raw_len}", symbols.len())));
    }

    let ycbcr = header.flags & FLAG_YCBCR != 0;
    let step = header.qp.step();
    let mut rd = Reader { buf: &symbols, pos: 0 };
    let mut reference: Option<Planes> = None;
    let mut out = Vec::with_capacity(header.frames as usize);
    for _ in 0..header.frames {
        let mode = rd.byte()?;
        let pred = match (mode, &reference) {
            (MODE_INTRA, _) => None,
            (MODE_INTER, Some(p)) => Some(p),
            _ => return Err(Error::CorruptPayload(format!("bad frame mode {mode}"))),
        };
        let mut recon = Planes { h, w, data: [vec![0.0; h * w], vec![0.0; h * w], vec![0.0; h * w]] };
        for ch in 0..3 {
            for by in (0..h).step_by(N) {
                for bx in (0..w).step_by(N) {
                    let q = rd.block()?;
                    let mut rec = reconstruct(&q, step);
                    if let Some(p) = pred {
                        let pb = load_block(&p.data[ch], w, by, bx);
                        for i in 0..64 {
                            rec[i] += pb[i];
                        }
                    }
                    for r in 0..N {
                        recon.data[ch][(by + r) * w + bx..(by + r) * w + bx + N].copy_from_slice(&rec[r * N..(r + 1) * N]);
                    }
                }
            }
        }
        out.push(from_working(&recon, fh, fw, ycbcr));
        reference = Some(recon);
    }
    if rd.pos != symbols.len() {
        return Err(Error::CorruptPayload("trailing symbols".into()));
    }
    Ok(out)
}
