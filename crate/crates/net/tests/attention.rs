mod common;

use common::{max_abs_diff, rand_tensor, rng};
use rand::Rng;
use sdl_net::{lew_msa, AttnPlan, MsaParams};
use sdl_tensor::Tensor;

fn random_params(seed: u64, c: usize, m: usize, heads: usize, locality: bool) -> MsaParams<f64> {
    let mut r = rng(seed);
    let span = 2 * m - 1;
    MsaParams {
        qkv_w: rand_tensor(&mut r, &[c, 3 * c], 1.0),
        qkv_b: rand_tensor(&mut r, &[3 * c], 1.0),
        rel_bias: rand_tensor(&mut r, &[span * span, heads], 1.0),
        lcm: locality.then(|| (rand_tensor(&mut r, &[c, 1, 3, 3], 1.0), rand_tensor(&mut r, &[c], 1.0))),
        proj_w: rand_tensor(&mut r, &[c, c], 1.0),
        proj_b: rand_tensor(&mut r, &[c], 1.0),
    }
}

/// Per-window, per-head softmax attention with explicit loops.
fn brute_force(x: &[f64], nw: usize, m: usize, c: usize, heads: usize, p: &MsaParams<f64>) -> Vec<f64> {
    let (l, d) = (m * m, c / heads);
    let (wq, bq) = (p.qkv_w.data(), p.qkv_b.data());
    let table = p.rel_bias.data();
    let mut out = vec![0.0; nw * l * c];
    for w in 0..nw {
        let tok = |t: usize| &x[(w * l + t) * c..(w * l + t + 1) * c];
        // qkv[t][j] for j in 0..3c
        let qkv: Vec<Vec<f64>> = (0..l)
            .map(|t| {
                (0..3 * c)
                    .map(|j| bq[j] + (0..c).map(|i| tok(t)[i] * wq[i * 3 * c + j]).sum::<f64>())
                    .collect()
            })
            .collect();
        let mut concat = vec![vec![0.0; c]; l];
        for hd in 0..heads {
            for i in 0..l {
                let mut scores: Vec<f64> = (0..l)
                    .map(|j| {
                        let dot: f64 = (0..d).map(|e| qkv[i][hd * d + e] * qkv[j][c + hd * d + e]).sum();
                        let (dr, dc) = (i / m + m - 1 - j / m, i % m + m - 1 - j % m);
                        dot / (d as f64).sqrt() + table[(dr * (2 * m - 1) + dc) * heads + hd]
                    })
                    .collect();
                let mx = scores.iter().cloned().fold(f64::MIN, f64::max);
                scores.iter_mut().for_each(|s| *s = (*s - mx).exp());
                let z: f64 = scores.iter().sum();
                for e in 0..d {
                    concat[i][hd * d + e] = (0..l).map(|j| scores[j] / z * qkv[j][2 * c + hd * d + e]).sum();
                }
            }
        }
        if let Some((k, b)) = &p.lcm {
            let (k, b) = (k.data(), b.data());
            for ch in 0..c {
                for a in 0..m {
                    for bb in 0..m {
                        let mut acc = b[ch];
                        for di in 0..3 {
                            for dj in 0..3 {
                                let (ra, cb) = (a as isize + di as isize - 1, bb as isize + dj as isize - 1);
                                if ra >= 0 && cb >= 0 && (ra as usize) < m && (cb as usize) < m {
                                    acc += k[ch * 9 + di * 3 + dj] * qkv[ra as usize * m + cb as usize][2 * c + ch];
                                }
                            }
                        }
                        concat[a * m + bb][ch] += acc;
                    }
                }
            }
        }
        for t in 0..l {
            for j in 0..c {
                out[(w * l + t) * c + j] = p.proj_b.data()[j] + (0..c).map(|i| concat[t][i] * p.proj_w.data()[i * c + j]).sum::<f64>();
            }
        }
    }
    out
}

#[test]
fn matches_brute_force_attention() {
    let mut r = rng(100);
    for case in 0..20u64 {
        let nw = r.gen_range(1..4);
        let m = r.gen_range(1..4);
        let heads = r.gen_range(1..4);
        let c = heads * r.gen_range(1..4);
        let x = rand_tensor(&mut r, &[nw, m * m, c], 1.0);
        let plan = AttnPlan::new(nw, m, c, heads).unwrap();
        for locality in [false, true] {
            let p = random_params(case, c, m, heads, locality);
            let got = lew_msa(&x, &p, &plan, locality).unwrap();
            let want = brute_force(x.data(), nw, m, c, heads, &p);
            let err = max_abs_diff(got.data(), &want);
            assert!(err < 1e-10, "case {case} (nw={nw} m={m} h={heads} c={c} loc={locality}): {err:e}");
        }
    }
}

#[test]
fn four_token_window_single_head() {
    let x = rand_tensor(&mut rng(7), &[1, 4, 3], 1.0);
    let p = random_params(8, 3, 2, 1, false);
    let got = lew_msa(&x, &p, &AttnPlan::new(1, 2, 3, 1).unwrap(), false).unwrap();
    assert!(max_abs_diff(got.data(), &brute_force(x.data(), 1, 2, 3, 1, &p)) < 1e-10);
}

#[test]
fn single_token_windows_reduce_to_projected_values() {
    let (nw, c) = (5, 4);
    let x = rand_tensor(&mut rng(3), &[nw, 1, c], 1.0);
    let mut p = random_params(4, c, 1, 2, false);
    p.rel_bias = Tensor::zeros(&[1, 2]);
    let got = lew_msa(&x, &p, &AttnPlan::new(nw, 1, c, 2).unwrap(), false).unwrap();
    let flat = x.reshape(&[nw, c]).unwrap();
    let v = flat.linear(&p.qkv_w, &p.qkv_b).unwrap().to_vec();
    let v: Vec<f64> = v.chunks(3 * c).flat_map(|row| row[2 * c..].to_vec()).collect();
    let want = Tensor::from_vec(&[nw, c], v).unwrap().linear(&p.proj_w, &p.proj_b).unwrap();
    assert!(max_abs_diff(got.data(), want.data()) < 1e-12);
}

#[test]
fn constant_logit_shift_is_invisible() {
    let (nw, m, c, heads) = (2, 3, 4, 2);
    let x = rand_tensor(&mut rng(5), &[nw, m * m, c], 1.0);
    let plan = AttnPlan::new(nw, m, c, heads).unwrap();
    let p = random_params(6, c, m, heads, true);
    let base = lew_msa(&x, &p, &plan, true).unwrap();
    let mut shifted = p.clone();
    shifted.rel_bias = p.rel_bias.add_scalar(17.5);
    let out = lew_msa(&x, &shifted, &plan, true).unwrap();
    assert!(max_abs_diff(base.data(), out.data()) < 1e-12);
}

#[test]
fn rejects_mismatched_heads_and_shapes() {
    assert!(AttnPlan::new(1, 2, 5, 2).is_err());
    let plan = AttnPlan::new(1, 2, 4, 2).unwrap();
    let p = random_params(1, 4, 2, 2, false);
    assert!(lew_msa(&Tensor::zeros(&[2, 4, 4]), &p, &plan, false).is_err());
    assert!(lew_msa(&Tensor::zeros(&[1, 4, 4]), &p, &plan, true).is_err());
}
