use ndarray::{Array2, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::Features;
use super::model::{spin_singles_adjoint, spin_doubles_adjoint, Head, Inputs, Mode, SurrogateModel};
use crate::error::{Error, Result};
use crate::gauge::AmplitudeSet;

/// Per-head loss weights in `T1, T2, Λ1, Λ2` order.
pub type LossWeights = [f64; 4];
pub const UNIT_WEIGHTS: LossWeights = [1.0; 4];

fn check_same_gauge(pred: &AmplitudeSet, reference: &AmplitudeSet) -> Result<()> {
    if pred.gauge != reference.gauge || pred.basis_id != reference.basis_id {
        return Err(Error::GaugeMismatch(format!(
            "prediction in {}:{} but reference in {}:{}",
            pred.gauge.as_str(),
            pred.basis_id,
            reference.gauge.as_str(),
            reference.basis_id
        )));
    }
    if pred.t1.dim() != reference.t1.dim() || pred.t2.dim() != reference.t2.dim() {
        return Err(Error::Dimension("prediction and reference shapes differ".into()));
    }
    Ok(())
}

/// `Σ_X w_X Σ_n (X̂ − X_ref)²` for one molecule.
pub fn amplitude_loss(pred: &AmplitudeSet, reference: &AmplitudeSet, w: &LossWeights) -> Result<f64> {
    check_same_gauge(pred, reference)?;
    let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
    let s = |x: &Array2<f64>| x.as_slice().expect("standard layout").to_vec();
    let s4 = |x: &Array4<f64>| x.as_standard_layout().iter().copied().collect::<Vec<_>>();
    Ok(w[0] * sq(&s(&pred.t1), &s(&reference.t1))
        + w[1] * sq(&s4(&pred.t2), &s4(&reference.t2))
        + w[2] * sq(&s(&pred.l1), &s(&reference.l1))
        + w[3] * sq(&s4(&pred.l2), &s4(&reference.l2)))
}

/// Batch average of [`amplitude_loss`].
pub fn batch_loss(pairs: &[(AmplitudeSet, AmplitudeSet)], w: &LossWeights) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Invalid("empty batch".into()));
    }
    let mut total = 0.0;
    for (p, r) in pairs {
        total += amplitude_loss(p, r, w)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Features of one molecule with its localized-gauge labels.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub id: String,
    pub features: Features,
    pub labels: AmplitudeSet,
}

impl TrainingExample {
    pub fn new(id: impl Into<String>, features: Features, labels: AmplitudeSet) -> Result<Self> {
        if labels.basis_id != features.basis_id {
            return Err(Error::GaugeMismatch(format!(
                "labels belong to orbitals {} but features to {}",
                labels.basis_id, features.basis_id
            )));
        }
        if labels.n_occ() != 2 * features.n_occ || labels.n_virt() != 2 * features.n_virt {
            return Err(Error::Dimension("labels and features describe different orbital spaces".into()));
        }
        Ok(Self {
            id: id.into(),
            features,
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub epochs: usize,
    pub lr: f64,
    /// Mini-batch size; `None` is full batch.
    pub batch: Option<usize>,
    pub seed: u64,
    pub weights: LossWeights,
    /// Parameters probed by the finite-difference check at initialization; 0 skips it.
    pub check_params: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 2000,
            lr: 0.05,
            batch: None,
            seed: 0,
            weights: UNIT_WEIGHTS,
            check_params: 10,
        }
    }
}

struct Prepared<'a> {
    ex: &'a TrainingExample,
    pair: Inputs,
    quad: Inputs,
}

fn prepare<'a>(model: &SurrogateModel, data: &'a [TrainingExample]) -> Result<Vec<Prepared<'a>>> {
    data.iter()
        .map(|ex| {
            let (pair, quad) = model.inputs(&ex.features)?;
            Ok(Prepared { ex, pair, quad })
        })
        .collect()
}

/// Loss over `batch` and, when `grad` is given, its gradient with respect
/// to every model parameter (flattened as in [`SurrogateModel::parameters`]).
fn loss_and_gradient(model: &SurrogateModel, batch: &[&Prepared], w: &LossWeights, mut grad: Option<&mut [f64]>) -> Result<f64> {
    let scale = 1.0 / batch.len() as f64;
    let offsets: Vec<usize> = model
        .heads
        .iter()
        .scan(0, |acc, h| {
            let o = *acc;
            *acc += h.n_params();
            Some(o)
        })
        .collect();
    if let Some(g) = grad.as_deref_mut() {
        g.iter_mut().for_each(|x| *x = 0.0);
    }
    let mut total = 0.0;
    for p in batch {
        let f = &p.ex.features;
        let (o, v) = (f.n_occ, f.n_virt);
        let pred = model.assemble(f, &p.pair, &p.quad);
        total += scale * amplitude_loss(&pred, &p.ex.labels, w)?;
        let Some(g) = grad.as_deref_mut() else { continue };
        let refs = &p.ex.labels;
        for head in Head::ALL {
            let k = head as usize;
            let c = 2.0 * w[k] * scale;
            // dJ/d(raw row output)
            let (rows, inputs): (Vec<f64>, &Inputs) = if head.is_doubles() {
                let (x, r) = if head == Head::T2 { (&pred.t2, &refs.t2) } else { (&pred.l2, &refs.l2) };
                let gs = spin_doubles_adjoint(&((x - r) * c));
                let mut gq = vec![0.0; o * o * v * v];
                let idx = |i, j, a, b| ((i * o + j) * v + a) * v + b;
                for ((i, j, a, b), &val) in gs.indexed_iter() {
                    if p.quad.mask[idx(i, j, a, b)] {
                        gq[idx(i, j, a, b)] += 0.5 * val;
                        gq[idx(j, i, b, a)] += 0.5 * val;
                    }
                }
                (gq, &p.quad)
            } else {
                let (x, r) = if head == Head::T1 { (&pred.t1, &refs.t1) } else { (&pred.l1, &refs.l1) };
                let gs = spin_singles_adjoint(&((x - r) * c));
                (gs.iter().copied().collect(), &p.pair)
            };
            backprop(model, head, inputs, &rows, &mut g[offsets[k]..offsets[k] + model.heads[k].n_params()]);
        }
    }
    Ok(total)
}

fn backprop(model: &SurrogateModel, head: Head, x: &Inputs, gout: &[f64], g: &mut [f64]) {
    let net = &model.heads[head as usize];
    let (n_in, hidden) = (net.n_in, net.hidden);
    let (mut ap, mut am) = (Vec::new(), Vec::new());
    for (k, &r) in x.kept.iter().enumerate() {
        let go = gout[r];
        if go == 0.0 {
            continue;
        }
        let xp = x.plus.row(k);
        let xm = x.minus.row(k);
        let (xp, xm) = (xp.as_slice().unwrap(), xm.as_slice().unwrap());
        net.activations(xp, &mut ap);
        net.activations(xm, &mut am);
        for h in 0..hidden {
            g[hidden * (n_in + 1) + h] += go * (ap[h] - am[h]);
            let w2 = net.w2(h);
            let dp = go * w2 * (1.0 - ap[h] * ap[h]);
            let dm = -go * w2 * (1.0 - am[h] * am[h]);
            g[hidden * n_in + h] += dp + dm;
            let base = h * n_in;
            for k in 0..n_in {
                g[base + k] += dp * xp[k] + dm * xm[k];
            }
        }
    }
}

/// Mean training loss of `model` on `data`.
pub fn dataset_loss(model: &SurrogateModel, data: &[TrainingExample], w: &LossWeights) -> Result<f64> {
    let prep = prepare(model, data)?;
    let refs: Vec<&Prepared> = prep.iter().collect();
    loss_and_gradient(model, &refs, w, None)
}

/// Analytic gradient of [`dataset_loss`].
pub fn dataset_gradient(model: &SurrogateModel, data: &[TrainingExample], w: &LossWeights) -> Result<Vec<f64>> {
    let prep = prepare(model, data)?;
    let refs: Vec<&Prepared> = prep.iter().collect();
    let mut g = vec![0.0; model.n_params()];
    loss_and_gradient(model, &refs, w, Some(&mut g))?;
    Ok(g)
}

/// Denominator floor of the relative gradient error; differences below
/// `GRADIENT_FLOOR · 1e−5` count as agreement for vanishing components.
pub const GRADIENT_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    /// `(parameter index, analytic, central difference)`.
    pub entries: Vec<(usize, f64, f64)>,
    pub max_rel_error: f64,
}

/// Central finite differences of step `h` on `n` distinct random parameters.
pub fn gradient_check(model: &SurrogateModel, data: &[TrainingExample], w: &LossWeights, n: usize, h: f64, seed: u64) -> Result<GradientCheck> {
    let analytic = dataset_gradient(model, data, w)?;
    let np = model.n_params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = rand::seq::index::sample(&mut rng, np, n.min(np)).into_vec();
    let base = model.parameters();
    let mut probe = model.clone();
    let mut entries = Vec::with_capacity(picks.len());
    let mut worst = 0.0_f64;
    for k in picks {
        let mut p = base.clone();
        p[k] = base[k] + h;
        probe.set_parameters(&p)?;
        let lp = dataset_loss(&probe, data, w)?;
        p[k] = base[k] - h;
        probe.set_parameters(&p)?;
        let lm = dataset_loss(&probe, data, w)?;
        let fd = (lp - lm) / (2.0 * h);
        let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(GRADIENT_FLOOR);
        worst = worst.max(rel);
        entries.push((k, analytic[k], fd));
    }
    Ok(GradientCheck {
        entries,
        max_rel_error: worst,
    })
}

/// Gradient descent with a fixed learning rate. Batches are drawn in a
/// seeded order, so identical inputs give bitwise-identical weights.
pub fn train(model: &SurrogateModel, data: &[TrainingExample], opts: &TrainOptions) -> Result<SurrogateModel> {
    if data.is_empty() {
        return Err(Error::Invalid("training set is empty".into()));
    }
    if !(opts.lr > 0.0) {
        return Err(Error::Invalid(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let mut model = model.clone();
    if !model.config.is_fitted() {
        let feats: Vec<Features> = data.iter().map(|e| e.features.clone()).collect();
        model.config.fit(&feats)?;
    }
    if opts.check_params > 0 {
        let gc = gradient_check(&model, data, &opts.weights, opts.check_params, 1e-6, opts.seed)?;
        if gc.max_rel_error > 1e-5 {
            return Err(Error::Invariant(format!(
                "analytic gradient disagrees with finite differences (max relative error {:.3e})",
                gc.max_rel_error
            )));
        }
    }
    let prep = prepare(&model, data)?;
    let bs = opts.batch.unwrap_or(prep.len()).clamp(1, prep.len());
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<usize> = (0..prep.len()).collect();
    let mut params = model.parameters();
    let mut grad = vec![0.0; params.len()];
    for epoch in 0..opts.epochs {
        if bs < prep.len() {
            order.shuffle(&mut rng);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(bs) {
            let batch: Vec<&Prepared> = chunk.iter().map(|&k| &prep[k]).collect();
            let loss = loss_and_gradient(&model, &batch, &opts.weights, Some(&mut grad))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NotFinite(format!(
                    "training loss {loss} at epoch {epoch} (lr {}, batch {bs}, mode {})",
                    opts.lr,
                    model.mode.as_str()
                )));
            }
            epoch_loss += loss * chunk.len() as f64 / prep.len() as f64;
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= opts.lr * g;
            }
            model.set_parameters(&params)?;
        }
        model.loss_trace.push(epoch_loss);
    }
    let refs: Vec<&Prepared> = prep.iter().collect();
    model.loss_trace.push(loss_and_gradient(&model, &refs, &opts.weights, None)?);
    model.epochs += opts.epochs;
    Ok(model)
}

/// Training loss a model would start from in each mode (same weights).
pub fn initial_losses(model: &SurrogateModel, data: &[TrainingExample], w: &LossWeights) -> Result<(f64, f64)> {
    let mut m = model.clone();
    if !m.config.is_fitted() {
        let feats: Vec<Features> = data.iter().map(|e| e.features.clone()).collect();
        m.config.fit(&feats)?;
    }
    m.mode = Mode::Direct;
    let direct = dataset_loss(&m, data, w)?;
    m.mode = Mode::Residual;
    let residual = dataset_loss(&m, data, w)?;
    Ok((direct, residual))
}
