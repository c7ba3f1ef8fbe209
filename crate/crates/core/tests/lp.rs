mod common;

use common::{fd_rel_error, rand_vec};
use hetgnn::lp::{
    bce_with_logits, loss_contrastive, loss_cross_entropy, loss_weighted_ce, sample_inbatch, sample_joint, sample_local_joint, sample_negatives,
    sample_uniform, DrawUniverse, LossOutput, LpScores, Negatives,
};
use hetgnn::schema::SamplerKind;
use hetgnn::synth::random_graph;
use hetgnn::util::DrawRng;

fn flat(scores: &LpScores) -> Vec<f64> {
    scores.pos.iter().copied().chain(scores.neg.iter().flatten().copied()).collect()
}

fn unflat(shape: &LpScores, x: &[f64]) -> LpScores {
    let n = shape.pos.len();
    let mut k = n;
    LpScores {
        pos: x[..n].to_vec(),
        neg: shape
            .neg
            .iter()
            .map(|r| {
                let row = x[k..k + r.len()].to_vec();
                k += r.len();
                row
            })
            .collect(),
    }
}

fn grad_flat(out: &LossOutput) -> Vec<f64> {
    out.d_pos.iter().copied().chain(out.d_neg.iter().flatten().copied()).collect()
}

fn random_scores(rng: &mut DrawRng) -> LpScores {
    let n = 1 + rng.index(4);
    let k = 1 + rng.index(5);
    LpScores {
        pos: rand_vec(n, rng).iter().map(|x| 3.0 * x).collect(),
        neg: (0..n).map(|_| rand_vec(k, rng).iter().map(|x| 3.0 * x).collect()).collect(),
    }
}

#[test]
fn uniform_draw_count_and_degenerate_universe() {
    let mut rng = DrawRng::new(1);
    let negs = sample_uniform(3, 2, 50, &mut rng).unwrap();
    assert_eq!(rng.draws(), 6);
    assert!(negs.iter().all(|r| r.len() == 2));
    let negs = sample_uniform(4, 3, 1, &mut rng).unwrap();
    assert!(negs.iter().flatten().all(|&v| v == 0));
}

#[test]
fn uniform_frequencies_within_three_sigma() {
    let mut rng = DrawRng::new(2);
    let m = 10;
    let negs = sample_uniform(1000, 100, m, &mut rng).unwrap();
    let mut counts = vec![0f64; m];
    for &v in negs.iter().flatten() {
        counts[v as usize] += 1.0;
    }
    let n = 1e5;
    let p = 1.0 / m as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for c in counts {
        assert!((c - n * p).abs() <= 3.0 * sigma, "{c}");
    }
}

#[test]
fn joint_groups_share_sets() {
    let mut rng = DrawRng::new(3);
    let negs = sample_joint(4, 2, 1000, &mut rng).unwrap();
    assert_eq!(rng.draws(), 4);
    assert_eq!(negs[0], negs[1]);
    assert_eq!(negs[2], negs[3]);
    assert_ne!(negs[0], negs[2]);

    let mut rng = DrawRng::new(3);
    let negs = sample_joint(3, 3, 1000, &mut rng).unwrap();
    assert_eq!(rng.draws(), 3);
    assert!(negs.iter().all(|r| *r == negs[0]));

    let mut rng = DrawRng::new(3);
    let negs = sample_joint(5, 2, 1000, &mut rng).unwrap();
    assert_eq!(rng.draws(), 6);
    assert_eq!(negs.len(), 5);
}

#[test]
fn draw_count_laws() {
    let mut rng = DrawRng::new(0);
    for _ in 0..50 {
        let n = 1 + rng.index(40);
        let k = 1 + rng.index(10);
        let mut r = DrawRng::new(9);
        sample_uniform(n, k, 77, &mut r).unwrap();
        assert_eq!(r.draws(), (n * k) as u64);
        let mut r = DrawRng::new(9);
        sample_joint(n, k, 77, &mut r).unwrap();
        assert_eq!(r.draws(), (n.div_ceil(k) * k) as u64);
    }
}

#[test]
fn inbatch_exchanges_destinations() {
    // (u1,v1),(u2,v2),(u3,v3) with v_i = 10 + i.
    let negs = sample_inbatch(&[11, 12, 13], 2, None).unwrap();
    assert_eq!(negs, vec![vec![12, 13], vec![11, 13], vec![11, 12]]);

    let negs = sample_inbatch(&[5, 6], 1, None).unwrap();
    assert_eq!(negs, vec![vec![6], vec![5]]);

    assert!(sample_inbatch(&[5], 1, None).is_err());

    let mut rng = DrawRng::new(4);
    let negs = sample_negatives(
        SamplerKind::InBatch,
        Some(SamplerKind::Joint),
        &[11, 12, 13],
        5,
        DrawUniverse { num_dst: 100, local_dst: &[] },
        &mut rng,
    )
    .unwrap();
    assert_eq!(rng.draws(), 3);
    assert_eq!(&negs[0][..2], &[12, 13]);
    assert_eq!(&negs[1][..2], &[11, 13]);
    assert!(negs.iter().all(|r| r.len() == 5));
    // The joint fallback shares one 3-set across the group of 3.
    assert_eq!(negs[0][2..], negs[1][2..]);

    let mut rng = DrawRng::new(4);
    let batch: Vec<u64> = (0..40).collect();
    let negs = sample_negatives(SamplerKind::InBatch, Some(SamplerKind::Uniform), &batch, 8, DrawUniverse { num_dst: 100, local_dst: &[] }, &mut rng).unwrap();
    assert_eq!(rng.draws(), 0);
    assert!(negs.iter().enumerate().all(|(i, r)| r.len() == 8 && !r.contains(&(i as u64))));
}

#[test]
fn local_joint_stays_on_partition() {
    let graph = random_graph(400, 2000, 2, [0.8, 0.1, 0.1], 5);
    let parts = common::partitions(&graph, 2, 1);
    let mut rng = DrawRng::new(6);
    for part in &parts {
        let local = part.global_ids(0);
        let other = &parts[1 - part.part_id];
        let negs: Negatives = sample_local_joint(10_000, 10, local, &mut rng).unwrap();
        assert_eq!(negs.iter().flatten().count(), 100_000);
        for &v in negs.iter().flatten() {
            assert_eq!(part.owner(0, v), Some(part.part_id));
            assert!(other.local_id(0, v).is_none());
        }
    }
    assert!(sample_local_joint(3, 2, &[], &mut rng).is_err());

    // A single partition owns everything, so the draws match plain joint.
    let single = common::partitions(&graph, 1, 0);
    let (mut a, mut b) = (DrawRng::new(8), DrawRng::new(8));
    let ids: Vec<u64> = single[0].global_ids(0).to_vec();
    assert_eq!(ids, (0..400).collect::<Vec<u64>>());
    assert_eq!(sample_local_joint(20, 4, &ids, &mut a).unwrap(), sample_joint(20, 4, 400, &mut b).unwrap());
}

#[test]
fn cross_entropy_values() {
    assert!((bce_with_logits(0.0, 1.0).0 - 2f64.ln()).abs() <= 1e-9);
    assert!((bce_with_logits(0.0, 0.0).0 - 2f64.ln()).abs() <= 1e-9);
    // -ln sigmoid(2) from a 40-digit decimal evaluation.
    assert!((bce_with_logits(2.0, 1.0).0 - 0.126_928_011_042_972_496_4).abs() <= 1e-15);
    assert!(bce_with_logits(800.0, 1.0).0 >= 0.0);
    assert!(bce_with_logits(-800.0, 1.0).0.is_finite());
}

#[test]
fn weighted_reductions() {
    let mut rng = DrawRng::new(7);
    for _ in 0..20 {
        let s = random_scores(&mut rng);
        let ones = vec![1.0; s.pos.len()];
        assert_eq!(loss_weighted_ce(&s, &ones, 1.0).unwrap(), loss_cross_entropy(&s));

        let mut w = ones.clone();
        w[0] = 0.0;
        let mut dropped = s.clone();
        dropped.pos[0] += 5.0;
        let a = loss_weighted_ce(&s, &w, 1.0).unwrap();
        let b = loss_weighted_ce(&dropped, &w, 1.0).unwrap();
        assert!((a.loss - b.loss).abs() < 1e-15);
        assert_eq!(a.d_pos[0], 0.0);

        let strict = loss_weighted_ce(&s, &ones, 0.0).unwrap();
        assert!(strict.d_neg.iter().flatten().all(|&d| d == 0.0));
        let mut moved = s.clone();
        moved.neg.iter_mut().flatten().for_each(|x| *x -= 7.0);
        assert_eq!(loss_weighted_ce(&moved, &ones, 0.0).unwrap().loss, strict.loss);
    }
    let s = LpScores { pos: vec![0.0], neg: vec![vec![0.0]] };
    assert!(loss_weighted_ce(&s, &[-1.0], 1.0).is_err());
}

#[test]
fn contrastive_values() {
    for n in [1usize, 4, 32, 1024] {
        let s = LpScores { pos: vec![0.3], neg: vec![vec![0.3; n]] };
        assert!((loss_contrastive(&s, 1.0).loss - ((n + 1) as f64).ln()).abs() <= 1e-9, "{n}");
    }
    let s = LpScores { pos: vec![100.0], neg: vec![vec![0.0; 8]] };
    assert!(loss_contrastive(&s, 1.0).loss < 1e-40);
    // -ln(e / (e + 2)) from a 40-digit decimal evaluation.
    let s = LpScores { pos: vec![1.0], neg: vec![vec![0.0, 0.0]] };
    assert!((loss_contrastive(&s, 1.0).loss - 0.551_444_713_932_051_089).abs() <= 1e-15);

    let mut rng = DrawRng::new(8);
    for _ in 0..20 {
        let s = random_scores(&mut rng);
        let mut shifted = s.clone();
        let c = 10.0 * rng.uniform() - 5.0;
        shifted.pos.iter_mut().chain(shifted.neg.iter_mut().flatten()).for_each(|x| *x += c);
        assert!((loss_contrastive(&s, 0.7).loss - loss_contrastive(&shifted, 0.7).loss).abs() < 1e-12);
    }
}

#[test]
fn loss_gradients_match_finite_differences() {
    let mut rng = DrawRng::new(11);
    for case in 0..20 {
        let s = random_scores(&mut rng);
        let x = flat(&s);
        let w: Vec<f64> = (0..s.pos.len()).map(|_| rng.uniform() * 2.0).collect();
        let tau = 0.5 + rng.uniform();

        let e = fd_rel_error(|x| loss_cross_entropy(&unflat(&s, x)).loss, &x, &grad_flat(&loss_cross_entropy(&s)), 1e-6);
        assert!(e <= 1e-4, "ce case {case}: {e}");
        let neg_w = if case % 2 == 0 { 1.0 } else { 0.0 };
        let g = grad_flat(&loss_weighted_ce(&s, &w, neg_w).unwrap());
        let e = fd_rel_error(|x| loss_weighted_ce(&unflat(&s, x), &w, neg_w).unwrap().loss, &x, &g, 1e-6);
        assert!(e <= 1e-4, "weighted case {case}: {e}");
        let g = grad_flat(&loss_contrastive(&s, tau));
        let e = fd_rel_error(|x| loss_contrastive(&unflat(&s, x), tau).loss, &x, &g, 1e-6);
        assert!(e <= 1e-4, "contrastive case {case}: {e}");
    }
}
