// The external HEVC adapter with stand-in commands. Any encoder/decoder
// pair reading and writing planar 8-bit YUV 4:4:4 can be plugged in, e.g.
//
// ```text
// LFC_HEVC_ENCODE='ffmpeg -y -f rawvideo -pix_fmt yuv444p -s {w}x{h} -i {input} -c:v libx265 -x265-params qp={qp} -f hevc {output}'
// LFC_HEVC_DECODE='ffmpeg -y -i {input} -f rawvideo -pix_fmt yuv444p {output}'
// ```

use lfc::codec::{decode_views, encode_views, Codec, HevcCommands, QuantParam};
use lfc::metrics::mean_view_psnr;
use lfc::synthetic::fixture_3x3;

pub fn run_example() -> lfc::Result<()> {
    // a lossless "codec" that just copies the YUV file
    let codec = Codec::HevcExternal(HevcCommands {
        encode: "cp {input} {output}".into(),
        decode: "cp {input} {output}".into(),
    });
    let views = fixture_3x3(2).views().to_vec();
    let payload = encode_views(&views, QuantParam::new(30)?, &codec)?;
    let back = decode_views(&payload, &codec)?;
    println!("{} frames, {} bytes, {:.1} dB", back.len(), payload.len(), mean_view_psnr(views.iter().zip(&back)));

    match Codec::hevc_from_env() {
        Ok(_) => println!("external commands configured in the environment"),
        Err(e) => println!("{e}"),
    }
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
