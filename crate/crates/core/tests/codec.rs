use lfc::codec::container::{read_container, SECTION_METADATA};
use lfc::codec::{decode_layers, decode_residual, decode_views, encode_layers, encode_residual, encode_views, Codec, QuantParam};
use lfc::layers::LayerStack;
use lfc::lightfield::View;
use lfc::synthetic::{fixture_3x3, random_layer_stack};
use lfc::Error;

fn qp(q: i64) -> QuantParam {
    QuantParam::new(q).unwrap()
}

fn max_abs_diff(a: &View, b: &View) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn qp_zero_is_near_lossless_on_flat_layers() {
    let stack = LayerStack::constant(24, 24, 1, 1, 0.5);
    let back = decode_layers(&encode_layers(&stack, qp(0), &Codec::Fallback).unwrap(), &Codec::Fallback).unwrap();
    for (a, b) in stack.layers().iter().zip(back.layers()) {
        assert!(max_abs_diff(a, b) <= 1.0 / 255.0);
    }
    assert_eq!(back.view_dims(), stack.view_dims());
    assert_eq!(back.padding(), stack.padding());
}

#[test]
fn coarse_qp_never_costs_more() {
    for seed in 0..10 {
        let stack = random_layer_stack(24, 24, 1, 1, seed);
        let fine = encode_layers(&stack, qp(2), &Codec::Fallback).unwrap().len();
        let coarse = encode_layers(&stack, qp(38), &Codec::Fallback).unwrap().len();
        assert!(coarse <= fine, "seed {seed}: {coarse} > {fine}");
    }
}

#[test]
fn black_layers_are_almost_free() {
    let stack = LayerStack::constant(64, 64, 1, 1, 0.0);
    let raw = 3 * 3 * 66 * 66;
    let bytes = encode_layers(&stack, qp(20), &Codec::Fallback).unwrap().len();
    assert!(bytes * 100 <= raw, "{bytes} bytes");
}

#[test]
fn truncated_payload_is_corrupt() {
    let views = fixture_3x3(0).views().to_vec();
    let payload = encode_views(&views, qp(20), &Codec::Fallback).unwrap();
    for cut in [payload.len() / 2, payload.len() - 1, 17] {
        let r = decode_views(&payload[..cut], &Codec::Fallback);
        assert!(matches!(r, Err(Error::CorruptPayload(_))), "cut at {cut}: {r:?}");
    }
    assert!(decode_views(&payload[..8], &Codec::Fallback).is_err());
}

#[test]
fn residual_bytes_fall_with_qp() {
    let lf = fixture_3x3(2);
    let center = lf.views()[4].clone();
    let res: Vec<View> = lf
        .views()
        .iter()
        .map(|v| View::from_planar(v.height(), v.width(), v.data().iter().zip(center.data()).map(|(a, b)| a - b).collect()).unwrap())
        .collect();
    let mut last = usize::MAX;
    for q in [2, 6, 10, 14, 20, 26, 38] {
        let payload = encode_residual(&res, qp(q), &Codec::Fallback).unwrap();
        assert!(payload.len() as f64 <= last as f64 * 1.05, "qp {q}: {} after {last}", payload.len());
        last = payload.len();
        let back = decode_residual(&payload, &Codec::Fallback).unwrap();
        assert!(back.iter().flat_map(|v| v.data()).all(|x| (-1.0..=1.0).contains(x)));
    }
}

#[test]
fn repeated_frames_are_cheap() {
    // inter prediction from the previous reconstruction
    let v = fixture_3x3(4).views()[0].clone();
    let one = encode_views(&[v.clone()], qp(14), &Codec::Fallback).unwrap().len();
    let five = encode_views(&vec![v; 5], qp(14), &Codec::Fallback).unwrap().len();
    assert!((five as f64) < 1.5 * one as f64, "{five} vs {one}");
}

#[test]
fn decoding_is_deterministic() {
    let views = fixture_3x3(5).views().to_vec();
    let payload = encode_views(&views, qp(26), &Codec::Fallback).unwrap();
    assert_eq!(payload, encode_views(&views, qp(26), &Codec::Fallback).unwrap());
    assert_eq!(decode_views(&payload, &Codec::Fallback).unwrap(), decode_views(&payload, &Codec::Fallback).unwrap());
}

#[test]
fn container_sections_survive_a_file() {
    use lfc::config::PipelineConfig;
    use lfc::pattern::{PatternKind, PredictionPattern};
    use lfc::pipeline::Encoder;

    let lf = fixture_3x3(1);
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid()).unwrap();
    let mut cfg = PipelineConfig::default();
    cfg.layers.max_iters = 100;
    cfg.fdl.n = 8;
    let enc = Encoder::new(&lf, pattern, Codec::Fallback, cfg).unwrap().encode(4, qp(26)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.lfc");
    std::fs::write(&path, enc.to_bytes()).unwrap();
    let bs = read_container(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(bs, enc.bitstream);
    assert_eq!(bs.sections[SECTION_METADATA].len(), (8 + 2 * 9) * 8);
}
