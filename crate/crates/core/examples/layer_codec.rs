// Code a layer stack with the built-in transform codec across qps and wrap
// the payload in a container.

use lfc::codec::container::{read_container, write_container, ContainerHeader, CONTAINER_VERSION};
use lfc::codec::{decode_layers, encode_layers, Codec, CodecId, QuantParam};
use lfc::pattern::PatternKind;
use lfc::synthetic::random_layer_stack;

pub fn run_example() -> lfc::Result<()> {
    let stack = random_layer_stack(32, 32, 1, 1, 4);
    let raw = 3 * 3 * 34 * 34;
    let mut last = None;
    for qp in [0, 2, 14, 26, 38] {
        let payload = encode_layers(&stack, QuantParam::new(qp)?, &Codec::Fallback)?;
        let back = decode_layers(&payload, &Codec::Fallback)?;
        let err = stack
            .layers()
            .iter()
            .zip(back.layers())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        println!("qp {qp:2}: {:6} bytes ({:5.1}% of 8-bit raw), max error {:.4}", payload.len(), 100.0 * payload.len() as f64 / raw as f64, err);
        last = Some(payload);
    }

    let header = ContainerHeader {
        version: CONTAINER_VERSION,
        pattern: PatternKind::Circular2,
        codec: CodecId::FallbackQdct,
        grid_rows: 1,
        grid_cols: 1,
        height: 32,
        width: 32,
        rank: 0,
        qp: 38,
        flags: 0,
        lambda: 0.0,
    };
    let bytes = write_container(&header, &[last.unwrap_or_default()]);
    assert_eq!(read_container(&bytes)?.to_bytes(), bytes);
    println!("container: {} bytes, round trip exact", bytes.len());
    Ok(())
}

fn main() -> lfc::Result<()> {
    run_example()
}
