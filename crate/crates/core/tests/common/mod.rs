//! Random models and evidence shared by the integration suites.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use tbn::model::{Cpt, ModelBuilder, Variable};
use tbn::{Evidence, TbnModel};

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A probability vector with entries bounded away from 0.
pub fn distribution(rng: &mut TestRng, card: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn table(rng: &mut TestRng, rows: usize, card: usize) -> Vec<f64> {
    (0..rows).flat_map(|_| distribution(rng, card)).collect()
}

pub struct ModelShape {
    pub max_nodes: usize,
    pub max_card: usize,
    pub max_parents: usize,
    pub testing: usize,
}

impl ModelShape {
    pub const BN: ModelShape = ModelShape { max_nodes: 8, max_card: 3, max_parents: 3, testing: 0 };
    pub const TBN: ModelShape = ModelShape { max_nodes: 7, max_card: 3, max_parents: 3, testing: 2 };
}

/// A random DAG over `X0..`, parents drawn from earlier nodes. Up to
/// `shape.testing` non-root nodes get testing CPTs.
pub fn random_model(rng: &mut TestRng, shape: &ModelShape) -> TbnModel {
    let n = rng.gen_range(2..=shape.max_nodes);
    let cards: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=shape.max_card)).collect();
    let parents: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut earlier: Vec<usize> = (0..i).collect();
            earlier.shuffle(rng);
            let k = rng.gen_range(0..=shape.max_parents.min(i));
            let mut ps = earlier[..k].to_vec();
            ps.sort_unstable();
            ps
        })
        .collect();
    let mut non_roots: Vec<usize> = (0..n).filter(|i| !parents[*i].is_empty()).collect();
    non_roots.shuffle(rng);
    let testing_count = rng.gen_range(0..=shape.testing.min(non_roots.len()));
    let testing = &non_roots[..testing_count];

    let mut b = ModelBuilder::default();
    for (i, card) in cards.iter().enumerate() {
        let states: Vec<String> = (0..*card).map(|s| format!("s{s}")).collect();
        let refs: Vec<&str> = states.iter().map(|s| s.as_str()).collect();
        b.add_variable(Variable::new(format!("X{i}"), &refs));
    }
    for i in 0..n {
        let rows: usize = parents[i].iter().map(|p| cards[*p]).product();
        let names: Vec<String> = parents[i].iter().map(|p| format!("X{p}")).collect();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let cpt = if testing.contains(&i) {
            Cpt::Testing {
                thresholds: (0..rows).map(|_| rng.gen_range(0.0..1.0)).collect(),
                pos: table(rng, rows, cards[i]),
                neg: table(rng, rows, cards[i]),
            }
        } else {
            Cpt::Regular { probs: table(rng, rows, cards[i]) }
        };
        b.set_cpt(&format!("X{i}"), &refs, cpt).unwrap();
    }
    b.build().unwrap()
}

/// A query variable and a random set of other variables to observe.
pub fn random_query(rng: &mut TestRng, model: &TbnModel) -> (String, Vec<String>) {
    let mut names: Vec<String> = model.ids().map(|v| model.name(v).to_string()).collect();
    names.shuffle(rng);
    let query = names.pop().unwrap();
    let k = rng.gen_range(0..=names.len());
    let mut evidence = names[..k].to_vec();
    evidence.sort();
    (query, evidence)
}

/// Soft evidence on `vars` with random normalized likelihoods.
pub fn random_evidence(rng: &mut TestRng, model: &TbnModel, vars: &[String]) -> Evidence {
    let mut ev = Evidence::new();
    for v in vars {
        let card = model.card(model.var(v).unwrap());
        let raw: Vec<f64> = (0..card).map(|_| rng.gen_range(0.0..1.0)).collect();
        let total: f64 = raw.iter().sum();
        ev.set(v, raw.iter().map(|x| x / total).collect()).unwrap();
    }
    ev
}

pub fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

/// Step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Compares reverse-mode gradients of `Σ_j w_j·out_j` with respect to every
/// parameter and evidence slot against central differences. Returns the
/// first disagreement: relative error above 1e-4, or absolute error above
/// 1e-7 for gradients smaller than 1e-3.
pub fn gradient_mismatch(c: &tbn::Circuit, params: &[f64], slots: &[f64], weights: &[f64]) -> Option<String> {
    use tbn::circuit::SlotId;
    let mut ctx = tbn::EvalContext::new(c);
    let load = |ctx: &mut tbn::EvalContext, p: &[f64], s: &[f64]| {
        ctx.set_param_values(p);
        for (i, v) in s.iter().enumerate() {
            ctx.set_slot(SlotId(i as u32), *v);
        }
    };
    let mut value = |p: &[f64], s: &[f64]| -> f64 {
        load(&mut ctx, p, s);
        let out = c.evaluate(&mut ctx).unwrap();
        out.iter().zip(weights).map(|(o, w)| o * w).sum()
    };
    let mut numeric = Vec::new();
    for i in 0..params.len() {
        let (mut up, mut down) = (params.to_vec(), params.to_vec());
        up[i] += FD_STEP;
        down[i] -= FD_STEP;
        numeric.push((format!("param {}", c.params()[i].name), (value(&up, slots) - value(&down, slots)) / (2.0 * FD_STEP)));
    }
    for i in 0..slots.len() {
        let (mut up, mut down) = (slots.to_vec(), slots.to_vec());
        up[i] += FD_STEP;
        down[i] -= FD_STEP;
        numeric.push((format!("slot {i}"), (value(params, &up) - value(params, &down)) / (2.0 * FD_STEP)));
    }
    let mut ctx = tbn::EvalContext::new(c);
    load(&mut ctx, params, slots);
    c.evaluate(&mut ctx).unwrap();
    c.backward(&mut ctx, weights);
    let analytic: Vec<f64> = c.param_gradient(&ctx).into_iter().chain(c.slot_gradient(&ctx)).collect();
    for ((what, fd), g) in numeric.iter().zip(&analytic) {
        let ok = if g.abs() < 1e-3 {
            (fd - g).abs() <= 1e-7
        } else {
            (fd - g).abs() <= 1e-4 * g.abs()
        };
        if !ok {
            return Some(format!("{what}: reverse {g} vs central {fd}"));
        }
    }
    None
}

/// A random sigmoid-mode circuit with at least one testing node, plus a
/// random context (parameters, slot values, output weights).
pub fn random_sigmoid_case(rng: &mut TestRng) -> (tbn::Circuit, Vec<f64>, Vec<f64>, Vec<f64>) {
    let shape = ModelShape { max_nodes: 6, max_card: 3, max_parents: 2, testing: 2 };
    loop {
        let model = random_model(rng, &shape);
        if model.testing_nodes().is_empty() {
            continue;
        }
        let (q, ev) = random_query(rng, &model);
        let gamma = rng.gen_range(2.0..16.0);
        let c = tbn::compile(&model, &q, &refs(&ev), tbn::SelectionMode::Sigmoid { gamma }).unwrap();
        if c.stats().sigsels == 0 {
            continue;
        }
        let params = random_context(rng, &c).0;
        let slots = random_context(rng, &c).1;
        let weights = (0..c.outputs().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        return (c, params, slots, weights);
    }
}

/// Parameter values and slot values drawn from `(0.05, 0.95)`.
pub fn random_context(rng: &mut TestRng, c: &tbn::Circuit) -> (Vec<f64>, Vec<f64>) {
    let params = (0..c.params().len()).map(|_| rng.gen_range(0.05..0.95)).collect();
    let slots = (0..c.evidence_slots().len()).map(|_| rng.gen_range(0.05..0.95)).collect();
    (params, slots)
}

/// A random dense net with 1..=3 layers of at most 8 units, ReLU or step
/// hidden layers and a linear or ReLU output layer.
pub fn random_net(rng: &mut TestRng) -> tbn::analysis::ReluNet {
    use tbn::analysis::{Activation, Layer, ReluNet};
    let inputs = rng.gen_range(1..=4);
    let depth = rng.gen_range(1..=3);
    let mut width = inputs;
    let mut layers = Vec::with_capacity(depth);
    for l in 0..depth {
        let out = if l + 1 == depth { rng.gen_range(1..=2) } else { rng.gen_range(1..=8) };
        let activation = if l + 1 == depth {
            *[Activation::Linear, Activation::Relu].choose(rng).unwrap()
        } else {
            *[Activation::Relu, Activation::Relu, Activation::Step].choose(rng).unwrap()
        };
        layers.push(Layer {
            weights: (0..out).map(|_| (0..width).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect(),
            bias: (0..out).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            activation,
        });
        width = out;
    }
    ReluNet::new(inputs, layers).unwrap()
}

/// `E → T → Q` with testing `T`: prior `θ_e` on `E`, threshold `t` on both
/// rows of `T`. Row `e` is selected positive iff `P(e | λ) ≥ t`, which holds
/// iff `λ ≥ chain_boundary(θ_e, t)`; row `ē` flips at the same point.
pub fn chain_model(theta_e: f64, t: f64) -> TbnModel {
    TbnModel::builder()
        .binary("E")
        .binary("T")
        .binary("Q")
        .regular("E", &[], &[theta_e, 1.0 - theta_e])
        .testing("T", &["E"], &[t, 1.0 - t], &[0.9, 0.1, 0.3, 0.7], &[0.2, 0.8, 0.6, 0.4])
        .regular("Q", &["T"], &[0.8, 0.2, 0.1, 0.9])
        .build()
        .unwrap()
}

/// Solves `θλ / (θλ + (1−θ)(1−λ)) = t` for `λ`.
pub fn chain_boundary(theta_e: f64, t: f64) -> f64 {
    t * (1.0 - theta_e) / (theta_e * (1.0 - t) + t * (1.0 - theta_e))
}
