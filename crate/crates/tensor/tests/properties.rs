use proptest::prelude::*;
use sdl_tensor::Tensor;

proptest! {
    #[test]
    fn softmax_rows_are_distributions(
        (rows, cols, data) in (1usize..5, 1usize..9).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(-10.0f64..10.0, r * c))),
        shift in -50.0f64..50.0,
    ) {
        let x = Tensor::from_vec(&[rows, cols], data.clone()).unwrap();
        let s = x.softmax_last().unwrap();
        for row in s.data().chunks(cols) {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let shifted = Tensor::from_vec(&[rows, cols], data.iter().map(|v| v + shift).collect()).unwrap();
        let s2 = shifted.softmax_last().unwrap();
        for (a, b) in s.data().iter().zip(s2.data()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_evaluation_is_bitwise_identical(c in 1usize..4, h in 3usize..8, w in 3usize..8) {
        let n = c * h * w;
        let x = Tensor::from_vec(&[c, h, w], (0..n).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let k = Tensor::from_vec(&[c, 1, 3, 3], (0..c * 9).map(|i| (i as f64 * 0.11).cos()).collect()).unwrap();
        let run = || {
            let y = x.conv2d(&k, &Tensor::zeros(&[c]), 1, c).unwrap().gelu();
            y.reshape(&[c * h, w]).unwrap().softmax_last().unwrap().to_vec()
        };
        prop_assert_eq!(run(), run());
    }
}
