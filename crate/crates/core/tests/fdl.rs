use lfc::codec::container::{read_container, write_container, SECTION_METADATA};
use lfc::codec::{Codec, QuantParam};
use lfc::config::PipelineConfig;
use lfc::codec::decode_views;
use lfc::fdl::{calibrate, fit_fdl, hierarchical_encode, synthesize_view, FdlConfig, Fft2, Subset1Base};
use lfc::metrics::{mean_view_psnr, yuv_psnr};
use lfc::lightfield::View;
use lfc::pattern::{PatternKind, PredictionPattern};
use lfc::pipeline::{decode_lightfield, Encoder};
use lfc::synthetic::{constant_scene, fixture_3x3, planted_fdl_views};

fn grid3() -> Vec<[f64; 2]> {
    (-1..=1).flat_map(|s| (-1..=1).map(move |t| [s as f64, t as f64])).collect()
}

#[test]
fn synthesis_is_linear_in_the_views() {
    let coords = grid3();
    let a = planted_fdl_views(16, 20, &[-0.5, 0.4], &coords, 1);
    let b = planted_fdl_views(16, 20, &[0.2, 0.9], &coords, 2);
    let sum: Vec<View> = a
        .iter()
        .zip(&b)
        .map(|(x, y)| View::from_planar(16, 20, x.data().iter().zip(y.data()).map(|(p, q)| p + 2.0 * q).collect()).unwrap())
        .collect();
    let d = [-1.0, -0.3, 0.3, 1.0];
    let fit = |v: &[View]| fit_fdl(&v.iter().collect::<Vec<_>>(), &coords, &d, 1e-3).unwrap();
    let (ma, mb, ms) = (fit(&a), fit(&b), fit(&sum));
    let u = [0.3, -0.7];
    let (va, vb, vs) = (ma.synthesize_unclamped(u), mb.synthesize_unclamped(u), ms.synthesize_unclamped(u));
    for i in 0..vs.data().len() {
        assert!((vs.data()[i] - va.data()[i] - 2.0 * vb.data()[i]).abs() < 1e-9);
    }
}

#[test]
fn fft_preserves_energy_on_odd_sizes() {
    let (h, w) = (15, 9);
    let plane: Vec<f64> = (0..h * w).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
    let spec = Fft2::new(h, w).forward_real(&plane);
    let e_space: f64 = plane.iter().map(|x| x * x).sum();
    let e_freq: f64 = spec.iter().map(|z| z.norm_sqr()).sum::<f64>() / (h * w) as f64;
    assert!((e_space - e_freq).abs() < 1e-9 * e_space);
    let back = Fft2::new(h, w).inverse_real(spec);
    assert!(plane.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn calibration_recovers_two_planted_disparities() {
    let planted = [-0.7, 0.6];
    let coords = grid3();
    let views = planted_fdl_views(40, 40, &planted, &coords, 9);
    let cfg = FdlConfig { n: 2, ..Default::default() };
    let r = calibrate(&views.iter().collect::<Vec<_>>(), &coords, &cfg, None).unwrap();
    for (got, want) in r.disparities.iter().zip(planted) {
        assert!((got - want).abs() < 0.05, "{:?}", r.disparities);
    }
}

#[test]
fn training_residual_shrinks_with_more_layers() {
    let coords = grid3();
    let views = fixture_3x3(6).views().to_vec();
    let refs: Vec<&View> = views.iter().collect();
    let all = [0.0, 0.6, -0.6, 1.2, -1.2, 0.3];
    let mut last = f64::INFINITY;
    for n in 1..=all.len() {
        let mut d = all[..n].to_vec();
        d.sort_by(f64::total_cmp);
        let model = fit_fdl(&refs, &coords, &d, 1e-9).unwrap();
        let err: f64 = views
            .iter()
            .zip(&coords)
            .map(|(v, &u)| v.data().iter().zip(model.synthesize_unclamped(u).data()).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .sum();
        assert!(err <= last * (1.0 + 1e-9), "n {n}: {err} after {last}");
        last = err;
    }
}

fn small_cfg() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.layers.max_iters = 150;
    cfg.fdl.n = 6;
    cfg
}

#[test]
fn h2_stream_layout() {
    let lf = fixture_3x3(2);
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid()).unwrap();
    let enc = Encoder::new(&lf, pattern, Codec::Fallback, small_cfg()).unwrap().encode(4, QuantParam::new(20).unwrap()).unwrap();
    assert_eq!(enc.bitstream.residuals().len(), 4);
    assert_eq!(enc.bitstream.metadata().len(), (6 + 9 * 2) * 8);
    assert!(enc.bitstream.subset2().is_empty());
}

#[test]
fn parallax_free_scene_predicts_well() {
    let lf = constant_scene(3, 3, 32, 32, 3).unwrap();
    let pattern = PredictionPattern::builtin(PatternKind::Hierarchical2, lf.grid()).unwrap();
    let cfg = FdlConfig { n: 6, ..Default::default() };
    let qp = QuantParam::new(14).unwrap();
    let enc = hierarchical_encode(&lf, &pattern, qp, &Codec::Fallback, &cfg, Subset1Base::Views, None).unwrap();
    let s2: usize = enc.residuals.iter().map(Vec::len).sum();
    assert!(s2 * 5 < enc.subset1.len(), "subset 2 {s2} bytes vs subset 1 {}", enc.subset1.len());

    let alone: Vec<View> = decode_views(&enc.subset1, &Codec::Fallback).unwrap();
    let subset1_psnr = mean_view_psnr(pattern.order1().iter().map(|&c| lf.view(c).unwrap()).zip(&alone));
    let full = yuv_psnr(&lf, &enc.reconstruction).unwrap();
    let full_mean = mean_view_psnr(lf.views().iter().zip(enc.reconstruction.views()));
    assert!(full_mean >= subset1_psnr - 0.05, "{full_mean} vs {subset1_psnr} ({})", full.aggregate);
}

#[test]
fn decoder_follows_the_metadata() {
    let lf = fixture_3x3(3);
    let pattern = PredictionPattern::builtin(PatternKind::Circular2, lf.grid()).unwrap();
    let enc = Encoder::new(&lf, pattern, Codec::Fallback, small_cfg()).unwrap().encode(4, QuantParam::new(20).unwrap()).unwrap();
    let bytes = enc.to_bytes();
    let clean = decode_lightfield(&bytes, None, None).unwrap();

    let mut bs = read_container(&bytes).unwrap();
    let meta = &mut bs.sections[SECTION_METADATA];
    let d0 = f64::from_le_bytes(meta[..8].try_into().unwrap());
    meta[..8].copy_from_slice(&(d0 - 0.25).to_le_bytes());
    let tampered = decode_lightfield(&write_container(&bs.header, &bs.sections), None, None).unwrap();
    assert_ne!(clean, tampered);
}

#[test]
fn held_out_view_of_planted_scene() {
    let coords = grid3();
    let truth = planted_fdl_views(24, 24, &[0.5], &coords, 4);
    let refs: Vec<&View> = truth.iter().take(8).collect();
    let model = fit_fdl(&refs, &coords[..8], &[0.5], 0.0).unwrap();
    let v = synthesize_view(&model, coords[8]);
    assert!(v.data().iter().zip(truth[8].data()).all(|(a, b)| (a - b).abs() < 1e-6));
}
