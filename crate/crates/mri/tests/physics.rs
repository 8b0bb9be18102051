use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdl_mri::*;
use sdl_tensor::Tensor;

fn rand_image(seed: u64, h: usize, w: usize) -> ComplexImage {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..2 * h * w).map(|_| r.gen_range(-1.0..1.0)).collect();
    ComplexImage::new(Tensor::from_vec(&[2, h, w], data).unwrap()).unwrap()
}

fn unit_coil(h: usize, w: usize) -> CoilSensitivities {
    let mut d = vec![0.0; 2 * h * w];
    d[..h * w].iter_mut().for_each(|v| *v = 1.0);
    CoilSensitivities::new(Tensor::from_vec(&[1, 2, h, w], d).unwrap()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn single_unit_coil_full_mask_is_plain_fft() {
    let x = rand_image(1, 8, 6);
    let y = apply_forward(&x, &unit_coil(8, 6), &SamplingMask::full(6)).unwrap();
    assert_eq!(y.tensor().data(), x.tensor().fft2c().unwrap().data());
    let back = coil_combine(&y, &unit_coil(8, 6)).unwrap();
    assert_eq!(back.tensor().data(), y.tensor().ifft2c().unwrap().data());
}

#[test]
fn empty_mask_gives_zero_kspace_and_zero_image() {
    let x = rand_image(2, 8, 8);
    let s = make_coils(3, 8, 8, 5).unwrap();
    let y = apply_forward(&x, &s, &SamplingMask::empty(8)).unwrap();
    assert!(y.tensor().data().iter().all(|&v| v == 0.0));
    assert!(zero_filled(&y, &s).unwrap().tensor().data().iter().all(|&v| v == 0.0));
}

#[test]
fn full_sampling_roundtrip_recovers_image() {
    for (nc, h, w, seed) in [(4, 16, 16, 3), (2, 12, 10, 4), (8, 9, 11, 5)] {
        let x = rand_image(seed, h, w);
        let s = make_coils(nc, h, w, seed).unwrap();
        let y = apply_forward(&x, &s, &SamplingMask::full(w)).unwrap();
        let back = coil_combine(&y, &s).unwrap();
        assert!(max_diff(back.tensor().data(), x.tensor().data()) < 1e-6);
    }
}

#[test]
fn forward_model_is_linear() {
    let s = make_coils(4, 12, 12, 9).unwrap();
    let m = make_mask(12, 4, 0.25, 3).unwrap();
    let (x1, x2) = (rand_image(10, 12, 12), rand_image(11, 12, 12));
    let (a, b) = (0.7, -1.3);
    let combo = x1.tensor().scale(a).add(&x2.tensor().scale(b)).unwrap();
    let lhs = apply_forward(&ComplexImage::new(combo).unwrap(), &s, &m).unwrap();
    let y1 = apply_forward(&x1, &s, &m).unwrap();
    let y2 = apply_forward(&x2, &s, &m).unwrap();
    let rhs = y1.tensor().scale(a).add(&y2.tensor().scale(b)).unwrap();
    assert!(max_diff(lhs.tensor().data(), rhs.data()) < 1e-10);
}

#[test]
fn mask_counts_at_4x() {
    let m = make_mask(64, 4, 0.125, 42).unwrap();
    assert_eq!(m.count(), 16);
    assert_eq!(m.acs, 8);
    assert_eq!(m.acs_range(), 28..36);
    assert!(m.cols[28..36].iter().all(|&c| c));
    assert_eq!(make_mask(64, 4, 0.125, 42).unwrap(), m);
    assert_ne!(make_mask(64, 4, 0.125, 43).unwrap(), m);
}

#[test]
fn mask_acceleration_within_tolerance() {
    for w in [32, 48, 64, 100, 368] {
        for accel in [4, 5] {
            let m = make_mask(w, accel, default_acs_frac(accel), 7).unwrap();
            let achieved = m.achieved_accel();
            assert!((achieved / accel as f64 - 1.0).abs() <= 0.15, "w={w} accel={accel} got {achieved}");
            assert!(m.cols[m.acs_range()].iter().all(|&c| c));
        }
    }
}

#[test]
fn mask_without_acceleration_is_full() {
    assert_eq!(make_mask(20, 1, 0.125, 1).unwrap().count(), 20);
}

#[test]
fn mask_config_errors() {
    assert!(matches!(make_mask(64, 0, 0.125, 1), Err(MriError::Config(_))));
    // acs block of 2 needs 0.03 * 64 >= 2
    assert!(matches!(make_mask(64, 4, 0.02, 1), Err(MriError::Config(_))));
    // 64 / 16 = 4 sampled columns cannot hold 8 ACS columns
    assert!(matches!(make_mask(64, 16, 0.125, 1), Err(MriError::Config(_))));
}

#[test]
fn split_expected_holdout_size() {
    let m = make_mask(64, 4, 0.125, 1).unwrap();
    let mut total = 0usize;
    let mut n = 0usize;
    for seed in 0..1000u64 {
        match split_mask(&m, 0.6, seed) {
            Ok(s) => {
                total += s.m2.count();
                n += 1;
            }
            Err(MriError::EmptySplit { .. }) => n += 1,
            Err(e) => panic!("{e}"),
        }
    }
    let mean = total as f64 / n as f64;
    let expected = 0.4 * 8.0;
    assert!((mean / expected - 1.0).abs() < 0.10, "mean |m2| = {mean}");
}

#[test]
fn split_of_acs_only_mask_fails() {
    let m = SamplingMask {
        cols: [vec![false; 4], vec![true; 8], vec![false; 4]].concat(),
        accel: 2,
        acs: 8,
    };
    assert!(matches!(split_mask(&m, 0.6, 3), Err(MriError::EmptySplit { .. })));
    assert!(split_mask_retry(&m, 0.6, 3).is_err());
    assert!(split_mask(&SamplingMask::full(16), 0.6, 3).is_err());
}

#[test]
fn split_is_deterministic_and_keeps_acs_in_m1() {
    let m = make_mask(64, 5, 0.10, 8).unwrap();
    let a = split_mask_retry(&m, 0.6, 99).unwrap();
    assert_eq!(a, split_mask_retry(&m, 0.6, 99).unwrap());
    for c in m.acs_range() {
        assert!(a.m1.cols[c] && !a.m2.cols[c]);
    }
}

#[test]
fn dc_kspace_matches_measurements_bitwise() {
    let (nc, h, w) = (4, 16, 16);
    let s = make_coils(nc, h, w, 1).unwrap();
    let m = make_mask(w, 4, 0.125, 2).unwrap();
    let y = apply_forward(&rand_image(3, h, w), &s, &m).unwrap();
    let k = data_consistency_kspace(&rand_image(4, h, w), &y, &s, &m).unwrap();
    for (i, &on) in m.expand(nc, h).iter().enumerate() {
        if on {
            assert_eq!(k.tensor().data()[i].to_bits(), y.tensor().data()[i].to_bits());
        }
    }
}

#[test]
fn dc_reprojection_exact_for_single_phase_coil() {
    let (h, w) = (16, 12);
    let phase = make_coils(1, h, w, 4).unwrap();
    assert!(phase.normalization_error() < 1e-12);
    let m = make_mask(w, 4, 0.25, 5).unwrap();
    let y = apply_forward(&rand_image(6, h, w), &phase, &m).unwrap();
    let x = data_consistency(&rand_image(7, h, w), &y, &phase, &m).unwrap();
    let re = apply_forward(&x, &phase, &m).unwrap();
    assert!(max_diff(re.tensor().data(), y.tensor().data()) < 1e-12);
}

#[test]
fn dc_with_empty_mask_or_consistent_input_is_identity() {
    let (nc, h, w) = (3, 12, 12);
    let s = make_coils(nc, h, w, 2).unwrap();
    let x = rand_image(8, h, w);
    let y0 = KSpace::new(Tensor::zeros(&[nc, 2, h, w])).unwrap();
    let out = data_consistency(&x, &y0, &s, &SamplingMask::empty(w)).unwrap();
    assert!(max_diff(out.tensor().data(), x.tensor().data()) < 1e-6);

    let m = make_mask(w, 4, 0.25, 1).unwrap();
    let y = apply_forward(&x, &s, &m).unwrap();
    let out = data_consistency(&x, &y, &s, &m).unwrap();
    assert!(max_diff(out.tensor().data(), x.tensor().data()) < 1e-6);
}

#[test]
fn dc_gradient_only_through_unsampled_entries() {
    let (h, w) = (8, 8);
    let s = unit_coil(h, w);
    let m = make_mask(w, 4, 0.25, 1).unwrap();
    let y = apply_forward(&rand_image(1, h, w), &s, &m).unwrap();
    let x = ComplexImage::new(rand_image(2, h, w).into_tensor().requires_grad()).unwrap();
    let k = data_consistency_kspace(&x, &y, &s, &m).unwrap();
    // loss only on sampled entries: all replaced, so no gradient reaches x
    let w_sampled: Vec<f64> = m.weights(1, h);
    k.tensor().mul_const(&w_sampled).unwrap().sum().backward().unwrap();
    let g = x.tensor().grad().unwrap_or_default();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn coils_are_normalized_and_deterministic() {
    for (nc, h, w, seed) in [(1, 8, 8, 0), (4, 64, 64, 1), (8, 17, 23, 2), (15, 32, 20, 3)] {
        let s = make_coils(nc, h, w, seed).unwrap();
        assert!(s.normalization_error() < 1e-6);
        assert_eq!(s.tensor().data(), make_coils(nc, h, w, seed).unwrap().tensor().data());
    }
    assert!(make_coils(0, 8, 8, 0).is_err());
}

#[test]
fn phantom_magnitude_in_unit_range() {
    for seed in 0..10 {
        let x = make_phantom(64, 64, seed).unwrap();
        let mag = magnitude_image(&x);
        let peak = mag.iter().cloned().fold(0.0, f64::max);
        assert!(mag.iter().all(|&v| v >= 0.0));
        assert!((peak - 1.0).abs() < 1e-12);
        assert_eq!(x.tensor().data(), make_phantom(64, 64, seed).unwrap().tensor().data());
    }
}

#[test]
fn zero_filled_at_full_sampling_equals_ground_truth() {
    let slice = SliceFile::synthesize(4, 32, 32, 5).unwrap();
    let zf = zero_filled(&slice.kspace, &slice.maps).unwrap();
    let gt = slice.gt.as_ref().unwrap();
    assert!(max_diff(zf.tensor().data(), gt.tensor().data()) < 1e-6);

    // the single-precision path reproduces the stored ground truth exactly
    let zf32 = zero_filled(&slice.kspace.cast::<f32>(), &slice.maps.cast::<f32>()).unwrap();
    assert_eq!(zf32.cast::<f64>().tensor().data(), gt.tensor().data());
}

#[test]
fn zero_filled_of_masked_kspace() {
    let slice = SliceFile::synthesize(2, 16, 16, 1).unwrap();
    let m = make_mask(16, 4, 0.25, 1).unwrap();
    let y = mask_kspace(&slice.kspace, &m).unwrap();
    let zf = zero_filled(&y, &slice.maps).unwrap();
    let direct = coil_combine(&y, &slice.maps).unwrap();
    assert_eq!(zf.tensor().data(), direct.tensor().data());
}

#[test]
fn slice_file_roundtrip_and_errors() {
    let slice = SliceFile::synthesize(3, 12, 10, 2).unwrap();
    let bytes = slice.to_bytes();
    assert_eq!(&bytes[..4], b"SDLK");
    assert_eq!(bytes.len(), 4 + 16 + 3 * 120 * 8 * 2 + 1 + 120 * 8);
    let back = SliceFile::from_bytes(&bytes).unwrap();
    assert_eq!(back.to_bytes(), bytes);
    assert_eq!(back.kspace.tensor().data(), slice.kspace.tensor().data());

    let mut no_gt = slice.clone();
    no_gt.gt = None;
    let b2 = no_gt.to_bytes();
    assert!(SliceFile::from_bytes(&b2).unwrap().gt.is_none());

    assert!(matches!(SliceFile::from_bytes(&bytes[..bytes.len() - 3]), Err(MriError::Format(_))));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(SliceFile::from_bytes(&bad), Err(MriError::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(SliceFile::from_bytes(&extra), Err(MriError::Format(_))));
}
