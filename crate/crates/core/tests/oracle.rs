mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;

use tbn::analysis::{brute_force_query, select_then_infer};
use tbn::circuit::SlotId;
use tbn::{compile, EvalContext, Evidence, SelectionMode, TbnModel};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn compiled_bn_matches_enumeration(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, &ModelShape::BN);
        let (q, ev_vars) = random_query(&mut rng, &model);
        let c = compile(&model, &q, &refs(&ev_vars), SelectionMode::Threshold).unwrap();
        prop_assert_eq!(c.stats().tests, 0);
        for _ in 0..3 {
            let ev = random_evidence(&mut rng, &model, &ev_vars);
            let got = tbn::evaluate(&c, &ev).unwrap();
            let want = brute_force_query(&model, &ev, &q).unwrap().joint;
            prop_assert!(close(&got, &want, 1e-9), "{:?} vs {:?}", got, want);
        }
    }

    #[test]
    fn compiled_tbn_matches_select_then_infer(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, &ModelShape::TBN);
        let (q, ev_vars) = random_query(&mut rng, &model);
        let c = compile(&model, &q, &refs(&ev_vars), SelectionMode::Threshold).unwrap();
        for _ in 0..3 {
            let ev = random_evidence(&mut rng, &model, &ev_vars);
            let got = tbn::evaluate(&c, &ev).unwrap();
            let want = select_then_infer(&model, &ev, &q).unwrap().joint;
            prop_assert!(close(&got, &want, 1e-9), "{:?} vs {:?}", got, want);
        }
    }

    /// With every other slot fixed, a BN circuit is affine in each slot.
    #[test]
    fn bn_circuits_are_affine_per_slot(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let model = random_model(&mut rng, &ModelShape::BN);
        let (q, ev_vars) = random_query(&mut rng, &model);
        prop_assume!(!ev_vars.is_empty());
        let c = compile(&model, &q, &refs(&ev_vars), SelectionMode::Threshold).unwrap();
        let mut ctx = EvalContext::new(&c);
        let slots = c.evidence_slots().len();
        let base: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.0..1.0)).collect();
        for s in 0..slots {
            let mut at = |v: f64| {
                for (i, b) in base.iter().enumerate() {
                    ctx.set_slot(SlotId(i as u32), if i == s { v } else { *b });
                }
                c.evaluate(&mut ctx).unwrap()[0]
            };
            let (a, m, b) = (at(0.1), at(0.4), at(0.7));
            prop_assert!((m - (a + b) / 2.0).abs() <= 1e-9);
        }
    }
}

/// Three causes with a noisy-or effect `H`, and testing `Y` that reads off
/// the decision `P(h | x1,x2,x3) ≥ t`.
fn noisy_or(t: f64) -> TbnModel {
    let leak = 0.05;
    let strength = [0.6, 0.7, 0.8];
    let mut h = Vec::new();
    for mask in 0..8usize {
        // Parent states: index 0 is the cause being present, last parent fastest.
        let present = [mask & 4 == 0, mask & 2 == 0, mask & 1 == 0];
        let off: f64 = (1.0 - leak) * present.iter().zip(strength).filter(|(p, _)| **p).map(|(_, s)| 1.0 - s).product::<f64>();
        h.extend([1.0 - off, off]);
    }
    TbnModel::builder()
        .binary("X1")
        .binary("X2")
        .binary("X3")
        .binary("H")
        .binary("Y")
        .regular("X1", &[], &[0.3, 0.7])
        .regular("X2", &[], &[0.4, 0.6])
        .regular("X3", &[], &[0.2, 0.8])
        .regular("H", &["X1", "X2", "X3"], &h)
        .testing("Y", &["H"], &[t, 1.0 - t], &[1.0, 0.0, 0.0, 1.0], &[0.0, 1.0, 1.0, 0.0])
        .build()
        .unwrap()
}

#[test]
fn noisy_or_classifier() {
    for t in [0.5, 0.75, 0.9] {
        let model = noisy_or(t);
        let c = compile(&model, "Y", &["X1", "X2", "X3"], SelectionMode::Threshold).unwrap();
        let mut positives = 0;
        for mask in 0..8 {
            let mut ev = Evidence::new();
            for (i, x) in ["X1", "X2", "X3"].iter().enumerate() {
                ev = ev.binary(x, if mask >> (2 - i) & 1 == 0 { 1.0 } else { 0.0 }).unwrap();
            }
            let p_h = select_then_infer(&model, &ev, "H").unwrap().posterior.unwrap()[0];
            let want = if p_h >= t { 1.0 } else { 0.0 };
            positives += want as usize;
            let reference = select_then_infer(&model, &ev, "Y").unwrap().posterior.unwrap();
            let compiled = tbn::posterior(&c, &ev).unwrap();
            assert_eq!(reference[0], want, "t={t} instance {mask:03b}");
            assert!((compiled[0] - want).abs() < 1e-12, "t={t} instance {mask:03b}");
        }
        // Each threshold splits the instances non-trivially.
        assert!(positives > 0 && positives < 8, "t={t}");
    }
}

#[test]
fn hard_evidence_is_conditioning() {
    let m = TbnModel::builder()
        .binary("A")
        .binary("B")
        .regular("A", &[], &[0.6, 0.4])
        .regular("B", &["A"], &[0.9, 0.1, 0.2, 0.8])
        .build()
        .unwrap();
    let c = compile(&m, "B", &["A"], SelectionMode::Threshold).unwrap();
    let p = tbn::posterior(&c, &Evidence::new().binary("A", 0.0).unwrap()).unwrap();
    assert!((p[0] - 0.2).abs() < 1e-15);
}

/// Uniform parameters and λ = (1,1) give the prior mass of each query state.
#[test]
fn unit_likelihoods_give_the_prior() {
    let m = TbnModel::builder()
        .binary("A")
        .binary("B")
        .regular("A", &[], &[0.5, 0.5])
        .regular("B", &["A"], &[0.5, 0.5, 0.5, 0.5])
        .build()
        .unwrap();
    let c = compile(&m, "B", &["A"], SelectionMode::Threshold).unwrap();
    let mut ctx = EvalContext::new(&c);
    for s in c.slots_of("A") {
        ctx.set_slot(s, 1.0);
    }
    assert_eq!(c.evaluate(&mut ctx).unwrap(), vec![0.5, 0.5]);
}
