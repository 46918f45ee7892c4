//! Analytic gradients against central differences for every primitive and layer.

use rand::Rng;
use scenegraph_core::autodiff::{gradcheck, gradcheck_params, ParamStore, Tape, Tensor, Var};
use scenegraph_core::models::layers::{
    Lstm, Mlp, MrgcnLayer, MrginLayer, SagPool, TemporalAttention, TopKPool,
};
use scenegraph_core::models::{GraphInput, Model, ModelConfig, PoolKind, TemporalKind, Vocab};
use scenegraph_core::rng::{seeded_rng, SeededRng};
use scenegraph_core::Result;

const H: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn rand_t(rng: &mut SeededRng, r: usize, c: usize) -> Tensor {
    Tensor::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Random weighted projection to a scalar so every output entry matters.
fn project(tape: &mut Tape, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(v).dims();
    let w = rand_t(&mut seeded_rng(seed), r, c);
    let w = tape.constant(w);
    let m = tape.mul(v, w)?;
    tape.sum(m, None)
}

fn check<F>(inputs: Vec<Tensor>, f: F)
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let res = gradcheck(&inputs, H, f).unwrap();
    assert!(res.rel_error < TOL, "rel error {}", res.rel_error);
    assert!(res.analytic_norm > 0.0);
}

#[test]
fn primitives() {
    let mut rng = seeded_rng(1);
    let a = rand_t(&mut rng, 3, 4);
    let b = rand_t(&mut rng, 4, 2);
    let c = rand_t(&mut rng, 3, 4);
    let row = rand_t(&mut rng, 1, 4);
    let col = rand_t(&mut rng, 3, 1);
    let s = rand_t(&mut rng, 1, 1);

    check(vec![a.clone(), b.clone()], |t, v| {
        let m = t.matmul(v[0], v[1])?;
        project(t, m, 9)
    });
    check(vec![a.clone(), c.clone()], |t, v| {
        let x = t.add(v[0], v[1])?;
        let y = t.mul(x, v[1])?;
        let z = t.sub(y, v[0])?;
        project(t, z, 9)
    });
    check(vec![a.clone(), row.clone()], |t, v| {
        let x = t.add_row(v[0], v[1])?;
        project(t, x, 9)
    });
    check(vec![a.clone(), s.clone(), col.clone()], |t, v| {
        let x = t.mul_scalar(v[0], v[1])?;
        let y = t.mul_col(x, v[2])?;
        let y = t.scale(y, 1.7);
        project(t, y, 9)
    });
    check(vec![a.clone()], |t, v| {
        let x = t.tanh(v[0]);
        let y = t.sigmoid(v[0]);
        let z = t.relu(v[0]);
        let xy = t.add(x, y)?;
        let xyz = t.add(xy, z)?;
        project(t, xyz, 9)
    });
    for axis in 0..2 {
        check(vec![a.clone()], move |t, v| {
            let x = t.softmax(v[0], axis)?;
            project(t, x, 9)
        });
        check(vec![a.clone(), c.clone()], move |t, v| {
            let x = t.concat(&[v[0], v[1]], axis)?;
            project(t, x, 9)
        });
        check(vec![a.clone()], move |t, v| {
            let s = t.sum(v[0], Some(axis))?;
            let m = t.mean(v[0], Some(axis))?;
            let x = t.max(v[0], axis)?;
            let sm = t.add(s, m)?;
            let all = t.add(sm, x)?;
            project(t, all, 9)
        });
    }
    check(vec![a.clone()], |t, v| {
        let s = t.sum(v[0], None)?;
        let m = t.mean(v[0], None)?;
        let x = t.mul(s, m)?;
        project(t, x, 9)
    });
    check(vec![a.clone()], |t, v| {
        let g = t.gather_rows(v[0], vec![2, 0, 2])?;
        let s = t.scatter_add_rows(g, vec![1, 1, 0], 2)?;
        let r = t.scale_rows(s, vec![0.5, -2.0])?;
        project(t, r, 9)
    });
    check(vec![a.clone()], |t, v| {
        let x = t.slice_cols(v[0], 1, 3)?;
        let y = t.transpose(x);
        project(t, y, 9)
    });
    check(vec![col.clone()], |t, v| {
        let n = t.normalize(v[0])?;
        project(t, n, 9)
    });
    let logits = rand_t(&mut rng, 5, 2);
    check(vec![logits], |t, v| t.cross_entropy(v[0], &[1, 0, 0, 1, 1], [0.625, 2.5]));
}

fn graph(rng: &mut SeededRng, n: usize, f: usize, r: usize) -> GraphInput {
    let mut edges = Vec::new();
    for s in 0..n {
        for d in 0..n {
            if s != d && rng.random::<f64>() < 0.5 {
                edges.push((s, d, rng.random_range(0..r)));
            }
        }
    }
    GraphInput::from_edges(rand_t(rng, n, f), r, &edges).unwrap()
}

fn check_params<F>(store: &ParamStore, f: F)
where
    F: Fn(&mut Tape) -> Result<Var>,
{
    let res = gradcheck_params(store, H, f).unwrap();
    assert!(res.rel_error < TOL, "rel error {}", res.rel_error);
    assert!(res.analytic_norm > 0.0);
}

#[test]
fn layers() {
    let mut rng = seeded_rng(5);
    let g = graph(&mut rng, 5, 3, 3);
    let x = g.features.clone();

    let mut store = ParamStore::new();
    let gcn = MrgcnLayer::new(&mut store, "gcn", 3, 4, 3, true, &mut rng).unwrap();
    check_params(&store, |t| {
        let xv = t.constant(x.clone());
        let o = gcn.forward(t, xv, &g)?;
        project(t, o, 3)
    });
    let mut store = ParamStore::new();
    let gin = MrginLayer::new(&mut store, "gin", 3, 4, 3, &mut rng).unwrap();
    store.by_name_mut("gin.eps").unwrap().value = Tensor::scalar(0.3);
    check_params(&store, |t| {
        let xv = t.constant(x.clone());
        let o = gin.forward(t, xv, &g)?;
        project(t, o, 3)
    });

    let mut store = ParamStore::new();
    let sag = SagPool::new(&mut store, "sag", 3, 3, 0.5, &mut rng).unwrap();
    check_params(&store, |t| {
        let xv = t.constant(x.clone());
        let o = sag.forward(t, xv, &g)?;
        project(t, o.x, 3)
    });

    let mut store = ParamStore::new();
    let topk = TopKPool::new(&mut store, "topk", 3, 0.6, &mut rng).unwrap();
    check_params(&store, |t| {
        let xv = t.constant(x.clone());
        let o = topk.forward(t, xv)?;
        project(t, o.x, 3)
    });

    let mut store = ParamStore::new();
    let lstm = Lstm::new(&mut store, "lstm", 3, 4, &mut rng).unwrap();
    let xs: Vec<Tensor> = (0..3).map(|_| rand_t(&mut rng, 1, 3)).collect();
    check_params(&store, |t| {
        let (mut p, mut c) = lstm.initial_state(t);
        for x in &xs {
            let xv = t.constant(x.clone());
            (p, c) = lstm.step(t, xv, p, c)?;
        }
        let pc = t.concat(&[p, c], 1)?;
        project(t, pc, 3)
    });

    let mut store = ParamStore::new();
    let att = TemporalAttention::new(&mut store, "att", 4, &mut rng).unwrap();
    let p = rand_t(&mut rng, 5, 4);
    check_params(&store, |t| {
        let pv = t.constant(p.clone());
        let (z, _) = att.forward(t, pv)?;
        project(t, z, 3)
    });

    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", &[4, 5, 2], &mut rng).unwrap();
    check_params(&store, |t| {
        let pv = t.constant(p.clone());
        let o = mlp.forward(t, pv)?;
        t.cross_entropy(o, &[0, 1, 1, 0, 1], [1.0, 1.0])
    });
}

fn tiny_inputs(vocab: &Vocab, seed: u64) -> Vec<GraphInput> {
    let mut rng = seeded_rng(seed);
    (0..2)
        .map(|_| {
            let f = vocab.feature_dim(false);
            let mut g = graph(&mut rng, 3, f, vocab.num_relations());
            let n = g.num_nodes();
            let mut onehot = Tensor::zeros(&[n, f]);
            for i in 0..n {
                onehot.data[i * f + rng.random_range(0..f)] = 1.0;
            }
            g.features = onehot;
            g
        })
        .collect()
}

fn tiny_vocab() -> Vocab {
    Vocab {
        actor_names: vec!["car".into(), "lane".into(), "bicycle".into()],
        relation_names: vec!["isIn".into(), "Near".into()],
    }
}

#[test]
fn full_sequence_model() {
    let vocab = tiny_vocab();
    for conv in ["mrgcn", "mrgin"] {
        for pool in [PoolKind::Sagpool { ratio: 0.5 }, PoolKind::Topk { ratio: 0.7 }, PoolKind::None] {
            for temporal in [TemporalKind::LstmAttn, TemporalKind::LstmSum, TemporalKind::None] {
                let mut cfg: ModelConfig =
                    serde_json::from_str(&format!(r#"{{"conv_kind": "{conv}"}}"#)).unwrap();
                cfg.layer_sizes = vec![3, 3];
                cfg.lstm_hidden = 3;
                cfg.mlp_sizes = vec![3];
                cfg.pool = pool;
                cfg.temporal = temporal;
                cfg.seed = 4;
                let mut model = Model::new(cfg, vocab.clone()).unwrap();
                if let Some(p) = model.store.by_name_mut("conv0.eps") {
                    p.value = Tensor::scalar(0.2);
                }
                let inputs = tiny_inputs(&vocab, 8);
                let res = gradcheck_params(&model.store, H, |t| {
                    let tr = model.seq_trace(t, &inputs, None)?;
                    t.cross_entropy(tr.logits, &[1], [0.625, 2.5])
                })
                .unwrap();
                assert!(
                    res.rel_error < 1e-5,
                    "{conv} {pool:?} {temporal:?}: rel error {}",
                    res.rel_error
                );
            }
        }
    }
}

#[test]
fn full_frame_model() {
    let vocab = tiny_vocab();
    let cfg = ModelConfig {
        layer_sizes: vec![3, 3],
        lstm_hidden: 3,
        mlp_sizes: vec![3],
        task: scenegraph_core::models::TaskKind::PerFrame,
        temporal: TemporalKind::LstmLast,
        seed: 2,
        ..ModelConfig::default()
    };
    let model = Model::new(cfg, vocab.clone()).unwrap();
    let inputs = tiny_inputs(&vocab, 3);
    let res = gradcheck_params(&model.store, H, |t| {
        let tr = model.frame_trace(t, &inputs, None)?;
        t.cross_entropy(tr.logits, &[1, 1], [1.0, 1.0])
    })
    .unwrap();
    assert!(res.rel_error < 1e-5, "rel error {}", res.rel_error);
}
