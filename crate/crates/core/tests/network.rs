mod common;

use veloxseg::jlc::jlc_param_count;
use veloxseg::network::{build, NetworkConfig};
use veloxseg::Tensor5;

use common::*;

fn small(attention: bool) -> NetworkConfig {
    NetworkConfig {
        input_extent: [32; 3],
        stage_widths: [8, 16, 16, 16],
        group_sizes: [4, 4, 8, 8],
        attention_depth: if attention { [1; 4] } else { [0; 4] },
        big_window_minima: [[2; 3], [2; 3], [1; 3], [1; 3]],
        ..NetworkConfig::autopet()
    }
}

#[test]
fn param_count_matches_hand_tally() {
    let mut configs = vec![
        NetworkConfig::autopet(),
        NetworkConfig::conv_only(),
        NetworkConfig::early_fusion4(),
        NetworkConfig::hecktor(),
        small(true),
        small(false),
    ];
    configs.push(NetworkConfig {
        attention_depth: [2, 0, 1, 3],
        qkv_bias: true,
        expansion_ratios: [2, 0, 4, 1],
        ..small(true)
    });
    for cfg in configs {
        let net = build(&cfg, 0).unwrap();
        assert_eq!(net.param_count(), tally_params(&cfg), "{cfg:?}");
        assert_eq!(net.cost_report(cfg.input_extent).unwrap().params(), net.param_count() as u64);
    }
}

#[test]
fn preset_envelopes() {
    let p = |cfg: NetworkConfig| build(&cfg, 0).unwrap().param_count();
    assert!((1_330_000..=2_000_000).contains(&p(NetworkConfig::autopet())));
    assert!((940_000..=1_420_000).contains(&p(NetworkConfig::conv_only())));
    let fused = p(NetworkConfig::early_fusion4());
    assert!((1_168_000..=1_752_000).contains(&fused), "{fused}");
}

#[test]
fn zero_input_gives_spatially_constant_logits() {
    let net = build(&small(true), 2).unwrap();
    let y = net.forward(&Tensor5::zeros([2, 1, 32, 32, 32])).unwrap();
    for c in 0..y.channels() {
        let plane = y.plane(0, c);
        assert!(plane.iter().all(|&v| v == plane[0]));
    }
}

#[test]
fn modality_order_matters() {
    let net = build(&small(true), 5).unwrap();
    let mut r = rng(1);
    let a = random_tensor(&mut r, [1, 1, 32, 32, 32], 1.0);
    let b = random_tensor(&mut r, [1, 1, 32, 32, 32], 1.0);
    let ab = net.forward(&Tensor5::stack_modalities(&[a.clone(), b.clone()]).unwrap()).unwrap();
    let ba = net.forward(&Tensor5::stack_modalities(&[b, a]).unwrap()).unwrap();
    assert_ne!(ab, ba);
}

#[test]
fn forward_is_deterministic_across_builds() {
    let cfg = small(true);
    let x = random_tensor(&mut rng(2), [2, 1, 32, 32, 32], 1.0);
    let y1 = build(&cfg, 9).unwrap().forward(&x).unwrap();
    let y2 = build(&cfg, 9).unwrap().forward(&x).unwrap();
    assert_eq!(y1, y2);
    assert!(y1.is_finite());
}

#[test]
fn encoder_skips_halve_and_decoder_restores() {
    let cfg = small(true);
    let net = build(&cfg, 0).unwrap();
    let skips = net.encode(&random_tensor(&mut rng(3), [2, 1, 32, 32, 32], 1.0)).unwrap();
    let extents: Vec<_> = skips.iter().map(|s| s.spatial()).collect();
    assert_eq!(extents, vec![[8; 3], [4; 3], [2; 3], [1; 3]]);
    for (s, c) in skips.iter().zip(cfg.stage_widths) {
        assert_eq!(s.channels(), c);
        assert_eq!(s.modalities(), 1);
    }
    assert_eq!(net.decoder().len(), 3);
}

#[test]
fn conv_only_shares_conv_stream_shapes() {
    let with = build(&small(true), 0).unwrap();
    let without = build(&small(false), 0).unwrap();
    assert!(without.attention_slots().is_empty() || without.attention_stages().count() == 0);
    assert!(with.param_count() > without.param_count());
    for (a, b) in with.conv_stages().iter().zip(without.conv_stages()) {
        assert_eq!(jlc_param_count(&a.block), jlc_param_count(&b.block));
    }
}

#[test]
fn early_fusion_uses_one_sequence_per_window() {
    let cfg = NetworkConfig {
        modalities: 4,
        early_fusion: true,
        ..small(true)
    };
    let net = build(&cfg, 0).unwrap();
    assert_eq!(net.param_count(), tally_params(&cfg));
    let y = net.forward(&random_tensor(&mut rng(4), [4, 1, 32, 32, 32], 1.0)).unwrap();
    assert_eq!(y.dims(), [1, 2, 32, 32, 32]);
}

#[test]
fn wrong_modality_count_is_rejected() {
    let net = build(&small(true), 0).unwrap();
    assert!(net.forward(&Tensor5::zeros([3, 1, 32, 32, 32])).is_err());
    assert!(net.forward(&Tensor5::zeros([2, 1, 48, 48, 48])).is_err());
}

#[test]
fn cost_report_is_consistent() {
    let cfg = NetworkConfig::autopet();
    let net = build(&cfg, 0).unwrap();
    let f96 = net.total_flops([96; 3]).unwrap();
    let report = net.cost_report([96; 3]).unwrap();
    assert_eq!(report.flops(), f96);
    let shares: f64 = report.shares().iter().map(|(_, s)| s).sum();
    assert!((shares - 1.0).abs() < 1e-9);
    assert!(report.attention_flops() > 0 && report.attention_flops() < f96);
}
