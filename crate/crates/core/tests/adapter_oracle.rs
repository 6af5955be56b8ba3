mod common;

use claimspan::descnet::{coda, coda_interact, dpa_interact, fuse_descriptions, igm_trace};
use claimspan::encoder::{encoder_block, Block, Mode};
use claimspan::Mat;
use common::*;
use rand::Rng;

#[test]
fn coda_matches_scalar_loops_and_stays_open_interval() {
    let mut r = rng(21);
    for _ in 0..100 {
        let d = r.random_range(2..=8);
        let (n, m) = (r.random_range(1..=6), r.random_range(1..=5));
        let z = random_mat(&mut r, n, d, 1.0);
        let desc = random_mat(&mut r, m, d, 1.0);
        let a = coda(&z, &desc);
        assert!(max_abs_diff(&a, &coda_scalar(&z, &desc)) < 1e-12);
        assert!(a.iter().all(|v| v.abs() < 1.0));
        let out = coda_interact(&z, &desc);
        assert!(max_abs_diff(&out, &coda_interact_scalar(&z, &desc)) < 1e-12);
        let out = dpa_interact(&z, &desc);
        assert!(max_abs_diff(&out, &dpa_interact_scalar(&z, &desc)) < 1e-12);
    }
}

#[test]
fn coda_stays_open_for_large_inputs() {
    let q = Mat::from_elem((1, 4), 50.0);
    let a = coda(&q, &q);
    assert!(a[[0, 0]] < 1.0 && a[[0, 0]] > 0.0);
}

#[test]
fn fuse_matches_scalar_loops() {
    let mut r = rng(22);
    for _ in 0..100 {
        let d = r.random_range(2..=6);
        let n = r.random_range(1..=5);
        let m = r.random_range(1..=4);
        let parts: Vec<Mat> = (0..m).map(|_| random_mat(&mut r, n, d, 1.0)).collect();
        let w = random_mat(&mut r, m * d, d, 0.5);
        let b = random_mat(&mut r, 1, d, 0.5);
        let got = fuse_descriptions(&parts, &w, &b, 0.1, &mut Mode::Eval);
        assert!(max_abs_diff(&got, &fuse_scalar(&parts, &w, &b)) < 1e-12);
    }
}

#[test]
fn gating_matches_scalar_loops_and_shrinks() {
    let mut r = rng(23);
    for _ in 0..100 {
        let d = r.random_range(2..=8);
        let n = r.random_range(1..=6);
        let z = random_mat(&mut r, n, d, 1.0);
        let zp = random_mat(&mut r, n, d, 1.0);
        let w = random_igm(&mut r, d, 0.7);
        let got = igm_trace(&zp, &z, &w);
        let want = igm_scalar(&zp, &z, &w);
        let row = |v: &Vec<f64>| Mat::from_shape_vec((1, v.len()), v.clone()).unwrap();
        assert!(max_abs_diff(&got.mu_c, &row(&want.mu_c)) < 1e-12);
        assert!(max_abs_diff(&got.conflict, &row(&want.conflict)) < 1e-12);
        assert!(max_abs_diff(&got.mu_r, &row(&want.mu_r)) < 1e-12);
        assert!(max_abs_diff(&got.refine, &row(&want.refine)) < 1e-12);
        assert!(max_abs_diff(&got.gate, &row(&want.gate)) < 1e-12);
        assert!(max_abs_diff(&got.output, &want.output) < 1e-12);
        for (o, i) in got.output.iter().zip(z.iter()) {
            assert!(o.abs() <= i.abs());
        }
    }
}

#[test]
fn encoder_block_matches_scalar_loops() {
    let mut r = rng(24);
    for heads in [1, 2, 4] {
        let d = 8;
        let b = Block {
            wq: random_mat(&mut r, d, d, 0.5),
            wk: random_mat(&mut r, d, d, 0.5),
            wv: random_mat(&mut r, d, d, 0.5),
            wo: random_mat(&mut r, d, d, 0.5),
            w1: random_mat(&mut r, d, 12, 0.5),
            w2: random_mat(&mut r, 12, d, 0.5),
            ln1_gain: random_mat(&mut r, 1, d, 1.0),
            ln1_bias: random_mat(&mut r, 1, d, 1.0),
            ln2_gain: random_mat(&mut r, 1, d, 1.0),
            ln2_bias: random_mat(&mut r, 1, d, 1.0),
        };
        let z = random_mat(&mut r, 5, d, 1.0);
        let got = encoder_block(&z, &b, heads, 0.1, &mut Mode::Eval);
        assert!(max_abs_diff(&got, &encoder_block_scalar(&z, &b, heads)) < 1e-12);
    }
}
