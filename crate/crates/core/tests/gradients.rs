//! Analytic gradients against central finite differences.

mod common;

use cer_core::annotations::Dimension;
use cer_core::ccc::{ccc_batch_loss, ccc_loss, Pooling, WantGrads};
use cer_core::consensus::{Acn, AcnConfig};
use cer_core::nn::Activation;
use cer_core::predictor::{Heads, Predictor, PredictorConfig};
use cer_core::trainer::{ConsensusModel, DimensionSet, Mode, Objective, TrainConfig, WindowData};
use cer_core::annotations::PerDimension;
use common::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const ATOL: f64 = 1e-7;
const TOL: f64 = 1e-4;
const CCC_TOL: f64 = 1e-5;
/// Finite-difference roundoff on an O(1) loss is about `eps / H`; entries whose
/// magnitude puts that noise above `CCC_TOL` are judged absolutely.
const CCC_ATOL: f64 = f64::EPSILON / H / CCC_TOL;
const INSTANCES: usize = 50;

#[test]
fn ccc_loss_gradients_both_arguments() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let n = rng.random_range(10..=200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.5 * v + rng.random_range(-0.5..0.5) + 0.2).collect();
        let r = ccc_loss(&x, &y, WantGrads::BOTH).unwrap();
        let gx = numeric_grad(&x, H, |p| ccc_loss(p, &y, WantGrads::NONE).unwrap().loss);
        let gy = numeric_grad(&y, H, |p| ccc_loss(&x, p, WantGrads::NONE).unwrap().loss);
        worst = worst.max(max_rel_err(r.grad_x.as_ref().unwrap(), &gx, CCC_ATOL));
        worst = worst.max(max_rel_err(r.grad_y.as_ref().unwrap(), &gy, CCC_ATOL));
    }
    assert!(worst < CCC_TOL, "max relative error {worst:e}");
}

#[test]
fn batch_pooling_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for pooling in [Pooling::Pooled, Pooling::PerWindowMean] {
        for _ in 0..10 {
            let (b, n) = (rng.random_range(1..5), rng.random_range(10..40));
            let xs: Vec<Vec<f64>> = (0..b).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let ys: Vec<Vec<f64>> = (0..b).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let r = ccc_batch_loss(&xs, &ys, pooling, WantGrads::BOTH).unwrap();
            let flat: Vec<f64> = ys.concat();
            let num = numeric_grad(&flat, H, |p| {
                let ys: Vec<&[f64]> = p.chunks(n).collect();
                ccc_batch_loss(&xs, &ys, pooling, WantGrads::NONE).unwrap().loss
            });
            let err = max_rel_err(&r.grad_y.unwrap().concat(), &num, ATOL);
            assert!(err < TOL, "{pooling:?}: {err:e}");
        }
    }
}

#[test]
fn acn_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..INSTANCES {
        let u = rng.random_range(2..=6);
        let n = rng.random_range(10..=200);
        let cfg = AcnConfig {
            annotators: u,
            hidden_dims: vec![rng.random_range(3..=8), rng.random_range(3..=8)],
            activation: Activation::Tanh,
            output_activation: Activation::Tanh,
        };
        let mut acn = Acn::new(cfg, &mut rng).unwrap();
        assert!(acn.net().trainable_param_count() <= 500);
        let a = random_matrix(&mut rng, n, u, -1.0, 1.0);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();

        let out = acn.forward_frames(&a).unwrap();
        let r = ccc_loss(&y, &out, WantGrads::Y).unwrap();
        acn.net_mut().zero_grads();
        acn.backward(r.grad_y.as_ref().unwrap()).unwrap();
        let analytic = acn.net().grads_flat();
        let p0 = acn.net().params_flat();
        let mut probe = acn.clone();
        let num = numeric_grad(&p0, H, |p| {
            probe.net_mut().set_params_flat(p).unwrap();
            ccc_loss(&y, &probe.forward_frames(&a).unwrap(), WantGrads::NONE).unwrap().loss
        });
        worst = worst.max(max_rel_err(&analytic, &num, ATOL));
    }
    assert!(worst < TOL, "max relative error {worst:e}");
}

#[test]
fn predictor_parameter_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let fd = rng.random_range(2..=6);
        let n = rng.random_range(10..=200);
        let dual = i % 2 == 1;
        let mut cfg = PredictorConfig::new(fd, if dual { Heads::Dual } else { Heads::Single });
        cfg.encoder_dims = vec![rng.random_range(4..=10), rng.random_range(4..=10)];
        if i % 3 == 0 {
            cfg.context_frames = Some(5);
        }
        let dims = if dual { Dimension::ALL.to_vec() } else { vec![Dimension::Valence] };
        let mut pred = Predictor::new(cfg, dims, &mut rng).unwrap();
        assert!(pred.net().trainable_param_count() <= 500);
        let rows = random_matrix(&mut rng, n, pred.net().in_dim(), -1.0, 1.0);
        let targets = random_matrix(&mut rng, n, pred.dimensions().len(), -1.0, 1.0);
        let loss_of = |out: &Array2<f64>| -> (f64, Array2<f64>) {
            let mut up = Array2::zeros(out.raw_dim());
            let mut total = 0.0;
            for j in 0..out.ncols() {
                let r = ccc_loss(&targets.column(j).to_vec(), &out.column(j).to_vec(), WantGrads::Y).unwrap();
                total += r.loss;
                up.column_mut(j).assign(&ndarray::Array1::from(r.grad_y.unwrap()));
            }
            (total, up)
        };
        let out = pred.forward_rows(&rows).unwrap();
        let (_, up) = loss_of(&out);
        pred.net_mut().zero_grads();
        pred.backward(&up).unwrap();
        let analytic = pred.net().grads_flat();
        let p0 = pred.net().params_flat();
        let mut probe = pred.clone();
        let num = numeric_grad(&p0, H, |p| {
            probe.net_mut().set_params_flat(p).unwrap();
            loss_of(&probe.forward_rows(&rows).unwrap()).0
        });
        worst = worst.max(max_rel_err(&analytic, &num, ATOL));
    }
    assert!(worst < TOL, "max relative error {worst:e}");
}

fn tiny_config(dims: DimensionSet, detach: bool, pooling: Pooling) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.mode = Mode::Acn;
    cfg.dimensions = dims;
    cfg.alpha = 0.3;
    cfg.beta = 0.7;
    cfg.pooling = pooling;
    cfg.detach_consensus_in_second_term = detach;
    cfg.predictor.encoder_dims = vec![6];
    cfg.acn.hidden_dims = vec![4, 4];
    cfg
}

fn flat(model: &ConsensusModel, grads: bool) -> Vec<f64> {
    let f = |n: &cer_core::nn::Network| if grads { n.grads_flat() } else { n.params_flat() };
    let mut v = f(model.predictor.net());
    for d in Dimension::ALL {
        if let Some(a) = model.acns.get(d) {
            v.extend(f(a.net()));
        }
    }
    v
}

fn set_flat(model: &mut ConsensusModel, p: &[f64]) {
    let mut off = model.predictor.net().params_flat().len();
    model.predictor.net_mut().set_params_flat(&p[..off]).unwrap();
    for d in Dimension::ALL {
        if let Some(a) = model.acns.get_mut(d) {
            let n = a.net().params_flat().len();
            a.net_mut().set_params_flat(&p[off..off + n]).unwrap();
            off += n;
        }
    }
}

#[test]
fn composite_objective_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for i in 0..INSTANCES {
        let dims = [DimensionSet::Arousal, DimensionSet::Valence, DimensionSet::Both][i % 3];
        let pooling = if i % 2 == 0 { Pooling::PerWindowMean } else { Pooling::Pooled };
        // the detached objective is not a gradient field for the ACN, so only
        // the attached reading is checked against finite differences
        let mut cfg = tiny_config(dims, false, pooling);
        cfg.seed = i as u64;
        let fd = 3;
        let u = 3;
        let mut ann = PerDimension::default();
        for d in dims.dims() {
            ann.set(d, u);
        }
        let mut model = ConsensusModel::init(&cfg, fd, &ann).unwrap();
        let total_params = flat(&model, false).len();
        assert!(total_params <= 300, "{total_params} parameters");
        let len = rng.random_range(10..=60);
        let windows: Vec<WindowData> = (0..rng.random_range(1..=4))
            .map(|k| {
                let seg = random_segment(&mut rng, &format!("s{k}"), len, fd, u, &dims.dims());
                WindowData::from_segment(&model.predictor, &seg).unwrap()
            })
            .collect();
        let batch: Vec<&WindowData> = windows.iter().collect();
        let obj = Objective {
            mode: Mode::Acn,
            alpha: cfg.alpha,
            beta: cfg.beta,
            pooling,
            detach: false,
        };
        let l = model.batch_loss(&obj, &batch, true).unwrap();
        assert!((l.total - joint_total(&model, &obj, &batch)).abs() < 1e-12);
        let analytic = flat(&model, true);
        let p0 = flat(&model, false);
        let mut probe = model.clone();
        let num = numeric_grad(&p0, H, |p| {
            set_flat(&mut probe, p);
            probe.batch_loss(&obj, &batch, false).unwrap().total
        });
        worst = worst.max(max_rel_err(&analytic, &num, ATOL));
    }
    assert!(worst < TOL, "max relative error {worst:e}");
}

fn joint_total(model: &ConsensusModel, obj: &Objective, batch: &[&WindowData]) -> f64 {
    model.clone().batch_loss(obj, batch, false).unwrap().total
}

#[test]
fn detached_objective_drops_second_term_from_acn() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = tiny_config(DimensionSet::Valence, true, Pooling::PerWindowMean);
    let mut ann = PerDimension::default();
    ann.set(Dimension::Valence, 3);
    let model = ConsensusModel::init(&cfg, 3, &ann).unwrap();
    let windows: Vec<WindowData> = (0..3)
        .map(|k| {
            let seg = random_segment(&mut rng, &format!("s{k}"), 30, 3, 3, &[Dimension::Valence]);
            WindowData::from_segment(&model.predictor, &seg).unwrap()
        })
        .collect();
    let batch: Vec<&WindowData> = windows.iter().collect();
    let obj = |alpha, beta, detach| Objective {
        mode: Mode::Acn,
        alpha,
        beta,
        pooling: Pooling::PerWindowMean,
        detach,
    };
    let acn_grads = |o: Objective| {
        let mut m = model.clone();
        m.batch_loss(&o, &batch, true).unwrap();
        m.acns.get(Dimension::Valence).unwrap().net().grads_flat()
    };
    let detached = acn_grads(obj(0.3, 0.7, true));
    let first_only = acn_grads(obj(0.3, 0.0, false));
    for (a, b) in detached.iter().zip(&first_only) {
        assert!((a - b).abs() < 1e-14);
    }
    assert!(acn_grads(obj(0.0, 1.0, true)).iter().all(|g| *g == 0.0));
}
