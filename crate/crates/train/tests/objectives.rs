use sdl_mri::*;
use sdl_net::ParamStore;
use sdl_tensor::Tensor;
use sdl_train::*;

#[test]
fn learning_rate_schedule() {
    let cfg = TrainConfig::default();
    assert_eq!(lr_at(0, &cfg), 1e-3);
    assert_eq!(lr_at(39, &cfg), 1e-3);
    assert!((lr_at(40, &cfg) - 1e-4).abs() < 1e-18);
    assert!((lr_at(80, &cfg) / 1e-5 - 1.0).abs() < 1e-12);
}

#[test]
fn config_parsing_rejects_unknown_keys() {
    let cfg: TrainConfig = toml::from_str("epochs = 3\nmode = \"supervised\"").unwrap();
    assert_eq!((cfg.epochs, cfg.mode, cfg.lr), (3, Mode::Supervised, 1e-3));
    assert!(toml::from_str::<TrainConfig>("epoch = 3").is_err());
    assert!(TrainConfig {
        epochs: 0,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(TrainConfig {
        rho: 1.0,
        ..Default::default()
    }
    .validate()
    .is_err());
}

fn store(values: &[f64]) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    s.insert("p", Tensor::from_vec(&[values.len()], values.to_vec()).unwrap()).unwrap();
    s
}

#[test]
fn adam_first_step_moves_by_the_learning_rate() {
    let mut p = store(&[0.5, -2.0]);
    let mut st = OptimState::new(&p);
    p.get("p").unwrap().sum().backward().unwrap();
    adam_step(&mut p, &mut st, 1e-3).unwrap();
    for (after, before) in p.get("p").unwrap().data().iter().zip([0.5, -2.0]) {
        assert!((after - before + 1e-3).abs() < 1e-6);
    }
    assert_eq!(st.step, 1);
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let mut p = store(&[0.5, -2.0]);
    let mut st = OptimState::new(&p);
    let t = p.get("p").unwrap();
    t.mul(&Tensor::zeros(&[2])).unwrap().sum().backward().unwrap();
    adam_step(&mut p, &mut st, 1e-3).unwrap();
    assert_eq!(p.get("p").unwrap().data(), &[0.5, -2.0]);
}

#[test]
fn adam_skips_parameters_without_gradients() {
    let mut p = store(&[1.0]);
    let mut st = OptimState::new(&p);
    adam_step(&mut p, &mut st, 1.0).unwrap();
    assert_eq!(p.get("p").unwrap().data(), &[1.0]);
}

#[test]
fn adam_is_deterministic() {
    let run = || {
        let mut p = store(&[0.3, 0.7, -0.1]);
        let mut st = OptimState::new(&p);
        for k in 0..20 {
            let t = p.get("p").unwrap();
            t.square().scale(1.0 + k as f64).sum().backward().unwrap();
            adam_step(&mut p, &mut st, 1e-2).unwrap();
        }
        p.get("p").unwrap().to_vec()
    };
    let (a, b) = (run(), run());
    assert_eq!(
        a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

/// Full acquisition whose centre block is only part of the mask, so that the
/// split has room for a loss set.
fn wide_mask(w: usize) -> SamplingMask {
    SamplingMask {
        cols: vec![true; w],
        accel: 1,
        acs: w / 4,
    }
}

#[test]
fn ssl_loss_of_the_truth_vanishes() {
    let (x, s) = (make_phantom(16, 16, 1).unwrap(), make_coils(3, 16, 16, 2).unwrap());
    let m = wide_mask(16);
    let y = apply_forward(&x, &s, &m).unwrap();
    let sp = split_mask(&m, 0.6, 3).unwrap();
    let y2 = mask_kspace(&y, &sp.m2).unwrap();
    assert!(ssl_loss(&x, &s, &sp.m2, &y2).unwrap().item() < 1e-6);
}

#[test]
fn ssl_loss_of_zero_is_the_mean_target_magnitude() {
    let (x, s) = (make_phantom(16, 12, 4).unwrap(), make_coils(2, 16, 12, 5).unwrap());
    let m = wide_mask(12);
    let y = apply_forward(&x, &s, &m).unwrap();
    let sp = split_mask(&m, 0.5, 6).unwrap();
    let y2 = mask_kspace(&y, &sp.m2).unwrap();
    let got = ssl_loss(&ComplexImage::zeros(16, 12), &s, &sp.m2, &y2).unwrap().item();
    let sel = sp.m2.expand(2, 16);
    let vals: Vec<f64> = y2
        .tensor()
        .data()
        .iter()
        .zip(&sel)
        .filter(|(_, &b)| b)
        .map(|(v, _)| v.abs())
        .collect();
    let want = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn ssl_gradient_lives_on_the_loss_columns() {
    // one phase-only coil: the k-space of the image gradient is the masked residual
    let (x, s) = (make_phantom(16, 16, 7).unwrap(), make_coils(1, 16, 16, 8).unwrap());
    let m = wide_mask(16);
    let y = apply_forward(&make_phantom(16, 16, 9).unwrap(), &s, &m).unwrap();
    let sp = split_mask(&m, 0.6, 10).unwrap();
    let y2 = mask_kspace(&y, &sp.m2).unwrap();
    let leaf = ComplexImage::new(x.tensor().detach().requires_grad()).unwrap();
    ssl_loss(&leaf, &s, &sp.m2, &y2).unwrap().backward().unwrap();
    let g = ComplexImage::new(Tensor::from_vec(&[2, 16, 16], leaf.tensor().grad().unwrap()).unwrap()).unwrap();
    let gk = apply_forward(&g, &s, &SamplingMask::full(16)).unwrap();
    let mut on_m2 = 0.0f64;
    for (i, v) in gk.tensor().data().iter().enumerate() {
        if sp.m2.cols[i % 16] {
            on_m2 = on_m2.max(v.abs());
        } else {
            assert!(v.abs() < 1e-12, "gradient reaches column {}", i % 16);
        }
    }
    assert!(on_m2 > 0.0);
}

#[test]
fn ssl_loss_needs_a_loss_mask() {
    let s = make_coils(1, 8, 8, 1).unwrap();
    let y = KSpace::new(Tensor::zeros(&[1, 2, 8, 8])).unwrap();
    assert!(ssl_loss(&ComplexImage::zeros(8, 8), &s, &SamplingMask::empty(8), &y).is_err());
}

#[test]
fn supervised_loss_examples() {
    let a = ComplexImage::<f64>::new(Tensor::from_vec(&[2, 2, 2], vec![1.0, -2.0, 3.0, 0.5, 0.0, 1.0, -1.0, 2.0]).unwrap()).unwrap();
    assert_eq!(supervised_loss(&a, &a).unwrap().item(), 0.0);
    let shifted = ComplexImage::new(a.tensor().add_scalar(0.25)).unwrap();
    assert!((supervised_loss(&shifted, &a).unwrap().item() - 0.25).abs() < 1e-15);
    let b = ComplexImage::<f64>::new(Tensor::from_vec(&[2, 2, 2], vec![0.0, 0.0, 1.0, 1.0, 2.0, -1.0, 0.0, 0.0]).unwrap()).unwrap();
    let hand: f64 = a
        .tensor()
        .data()
        .iter()
        .zip(b.tensor().data())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
        / 8.0;
    assert_eq!(supervised_loss(&a, &b).unwrap().item(), hand);
}
