mod common;

use common::tiny_model;
use proptest::prelude::*;
use sdl_net::{init_params, ModelConfig};
use sdl_train::*;

fn meta(model: ModelConfig) -> ModelMeta {
    ModelMeta {
        model,
        train: TrainConfig::default(),
        metrics: MetricsSnapshot {
            epochs_run: 3,
            best_epoch: 1,
            best_val_loss: 0.125,
            final_val_loss: 0.2,
            final_train_loss: 0.3,
        },
    }
}

#[test]
fn model_checkpoint_roundtrip() {
    let cfg = tiny_model(2);
    let params = init_params::<f32>(&cfg, 3).unwrap();
    let ck = model_checkpoint(&params, &meta(cfg.clone())).unwrap();
    let bytes = ck.to_bytes().unwrap();
    let back = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);
    let (m, p) = load_model::<f32>(&back).unwrap();
    assert_eq!(m, meta(cfg));
    for (a, b) in p.tensors().iter().zip(params.tensors()) {
        assert_eq!(a.data(), b.data());
    }
    assert!(load_model::<f64>(&back).is_err());
}

#[test]
fn unknown_and_missing_tensors_are_rejected() {
    let cfg = tiny_model(2);
    let params = init_params::<f32>(&cfg, 3).unwrap();
    let mut ck = model_checkpoint(&params, &meta(cfg)).unwrap();
    ck.tensors.push(NamedTensor::f64("extra.weight", &[1], vec![0.0]));
    assert!(matches!(load_model::<f32>(&ck), Err(TrainError::Format(m)) if m.contains("extra.weight")));
    ck.tensors.pop();
    let gone = ck.tensors.remove(0);
    assert!(matches!(load_model::<f32>(&ck), Err(TrainError::Format(m)) if m.contains(&gone.name)));
}

#[test]
fn corrupt_files_are_rejected() {
    let cfg = tiny_model(1);
    let ck = model_checkpoint(&init_params::<f32>(&cfg, 1).unwrap(), &meta(cfg)).unwrap();
    let bytes = ck.to_bytes().unwrap();
    for cut in [0, 3, 11, bytes.len() / 2, bytes.len() - 1] {
        assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(Checkpoint::from_bytes(&bad).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(Checkpoint::from_bytes(&long).is_err());
    // dtype code of the first tensor
    let mut bad = bytes;
    let name_len = u16::from_le_bytes([bad[12], bad[13]]) as usize;
    bad[14 + name_len] = 7;
    assert!(Checkpoint::from_bytes(&bad).is_err());
}

#[test]
fn header_layout() {
    let ck = Checkpoint {
        tensors: vec![NamedTensor::f64("a", &[2], vec![1.0, -0.5])],
        meta: "k = 1\n".into(),
    };
    let b = ck.to_bytes().unwrap();
    let mut want = b"SDLC".to_vec();
    want.extend(1u32.to_le_bytes());
    want.extend(1u32.to_le_bytes());
    want.extend(1u16.to_le_bytes());
    want.push(b'a');
    want.extend([1u8, 1]);
    want.extend(2u32.to_le_bytes());
    want.extend(1.0f64.to_le_bytes());
    want.extend((-0.5f64).to_le_bytes());
    want.extend(6u32.to_le_bytes());
    want.extend(b"k = 1\n");
    assert_eq!(b, want);
}

fn tensor_strategy() -> impl Strategy<Value = NamedTensor> {
    (
        "[a-z][a-z0-9._]{0,12}",
        prop::collection::vec(0usize..4, 0..4),
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(name, shape, wide, seed)| {
            let n: usize = shape.iter().product();
            // arbitrary bit patterns, including NaNs and infinities
            let bits = (0..n as u64).map(|i| seed.rotate_left(i as u32 * 7) ^ i.wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let data = if wide {
                TensorData::F64(bits.map(f64::from_bits).collect())
            } else {
                TensorData::F32(bits.map(|b| f32::from_bits(b as u32)).collect())
            };
            NamedTensor { name, shape, data }
        })
}

proptest! {
    #[test]
    fn archive_roundtrip_is_bitwise(tensors in prop::collection::vec(tensor_strategy(), 0..5), meta in "[ -~\n]{0,40}") {
        let mut seen = std::collections::HashSet::new();
        let tensors: Vec<NamedTensor> = tensors.into_iter().filter(|t| seen.insert(t.name.clone())).collect();
        let ck = Checkpoint { tensors, meta };
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
        prop_assert_eq!(back.meta, ck.meta);
    }
}
