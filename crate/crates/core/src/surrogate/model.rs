use ndarray::{Array1, Array2, Array4, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::features::{FeatureBlock, FeatureConfig, Features, Normalization};
use crate::error::{Error, Result};
use crate::gauge::{AmplitudeSet, Gauge};

/// Whether the doubles heads predict the amplitudes or their deviation from MP2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Residual,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Mode::Direct),
            "residual" => Ok(Mode::Residual),
            other => Err(Error::Invalid(format!("unknown surrogate mode `{other}`"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Direct => "direct",
            Mode::Residual => "residual",
        }
    }
}

/// Readout heads in parameter order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    T1 = 0,
    T2 = 1,
    L1 = 2,
    L2 = 3,
}

impl Head {
    pub const ALL: [Head; 4] = [Head::T1, Head::T2, Head::L1, Head::L2];

    pub fn is_doubles(self) -> bool {
        matches!(self, Head::T2 | Head::L2)
    }

    pub fn name(self) -> &'static str {
        ["t1", "t2", "l1", "l2"][self as usize]
    }
}

/// `g(x) = w2 · tanh(W1 x + b1)`; parameters stored as `[W1 (row-major), b1, w2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Perceptron {
    pub n_in: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

impl Perceptron {
    pub fn random(n_in: usize, hidden: usize, out_scale: f64, rng: &mut ChaCha8Rng) -> Self {
        let w_scale = 1.0 / (n_in as f64).sqrt();
        let mut params = Vec::with_capacity(hidden * (n_in + 2));
        params.extend((0..hidden * n_in).map(|_| rng.random_range(-w_scale..w_scale)));
        params.extend((0..hidden).map(|_| rng.random_range(-0.5..0.5)));
        params.extend((0..hidden).map(|_| out_scale * rng.random_range(-1.0..1.0)));
        Self { n_in, hidden, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub(crate) fn b1(&self, h: usize) -> f64 {
        self.params[self.hidden * self.n_in + h]
    }

    pub(crate) fn w2(&self, h: usize) -> f64 {
        self.params[self.hidden * (self.n_in + 1) + h]
    }

    /// Hidden activations for one input row.
    pub(crate) fn activations(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for h in 0..self.hidden {
            let row = &self.params[h * self.n_in..(h + 1) * self.n_in];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1(h);
            out.push(z.tanh());
        }
    }

    /// Row-wise [`Perceptron::odd`] over input matrices.
    pub fn odd_rows(&self, xp: &Array2<f64>, xm: &Array2<f64>) -> Array1<f64> {
        let nw = self.hidden * self.n_in;
        let w1 = ArrayView2::from_shape((self.hidden, self.n_in), &self.params[..nw]).expect("W1 shape");
        let b1 = ArrayView1::from(&self.params[nw..nw + self.hidden]);
        let w2 = ArrayView1::from(&self.params[nw + self.hidden..]);
        let act = |x: &Array2<f64>| (x.dot(&w1.t()) + b1).mapv_into(f64::tanh);
        (act(xp) - act(xm)).dot(&w2)
    }

    /// `R(e, s) = g(e, s) − g(e, −s)` with `x± = [e, ±s]`.
    pub fn odd(&self, xp: &[f64], xm: &[f64]) -> f64 {
        let (mut ap, mut am) = (Vec::new(), Vec::new());
        self.activations(xp, &mut ap);
        self.activations(xm, &mut am);
        (0..self.hidden).map(|h| self.w2(h) * (ap[h] - am[h])).sum()
    }
}

/// Normalized `x± = [(e − m)/σ, ±s/σ_s]` for the unmasked rows of a feature
/// block; row `k` of `plus` and `minus` belongs to block row `kept[k]`.
#[derive(Debug, Clone)]
pub(crate) struct Inputs {
    pub plus: Array2<f64>,
    pub minus: Array2<f64>,
    pub kept: Vec<usize>,
    pub mask: Vec<bool>,
}

pub(crate) fn normalized_inputs(block: &FeatureBlock, norm: &Normalization) -> Inputs {
    let ne = block.even.ncols();
    let ns = block.signed.ncols();
    let kept: Vec<usize> = (0..block.mask.len()).filter(|&r| block.mask[r]).collect();
    let mut plus = Array2::zeros((kept.len(), ne + ns));
    let mut minus = Array2::zeros((kept.len(), ne + ns));
    let (mean, scale, sscale) = (&norm.even_mean, &norm.even_scale, &norm.signed_scale);
    for (k, &r) in kept.iter().enumerate() {
        let (e, sg) = (block.even.row(r), block.signed.row(r));
        let (mut xp, mut xm) = (plus.row_mut(k), minus.row_mut(k));
        for c in 0..ne {
            let x = (e[c] - mean[c]) / scale[c];
            xp[c] = x;
            xm[c] = x;
        }
        for c in 0..ns {
            let x = sg[c] / sscale[c];
            xp[ne + c] = x;
            xm[ne + c] = -x;
        }
    }
    Inputs {
        plus,
        minus,
        kept,
        mask: block.mask.clone(),
    }
}

/// `t[2i+σ, 2a+σ] = T_ia`.
pub fn spin_singles(t: &Array2<f64>) -> Array2<f64> {
    let (o, v) = t.dim();
    Array2::from_shape_fn((2 * o, 2 * v), |(p, q)| if p % 2 == q % 2 { t[[p / 2, q / 2]] } else { 0.0 })
}

/// Adjoint of [`spin_singles`].
pub fn spin_singles_adjoint(g: &Array2<f64>) -> Array2<f64> {
    let (o, v) = (g.nrows() / 2, g.ncols() / 2);
    Array2::from_shape_fn((o, v), |(i, a)| g[[2 * i, 2 * a]] + g[[2 * i + 1, 2 * a + 1]])
}

/// Closed-shell doubles: `t[iσ, jτ, aσ', bτ'] = δ_σσ' δ_ττ' T_ijab − δ_τσ' δ_στ' T_ijba`.
pub fn spin_doubles(t: &Array4<f64>) -> Array4<f64> {
    let (o, _, v, _) = t.dim();
    let mut x = Array4::zeros((2 * o, 2 * o, 2 * v, 2 * v));
    for ((i, j, a, b), &direct) in t.indexed_iter() {
        let exchange = t[[i, j, b, a]];
        for si in 0..2 {
            for sj in 0..2 {
                let (p, q) = (2 * i + si, 2 * j + sj);
                if si == sj {
                    x[[p, q, 2 * a + si, 2 * b + sj]] = direct - exchange;
                } else {
                    x[[p, q, 2 * a + si, 2 * b + sj]] = direct;
                    x[[p, q, 2 * a + sj, 2 * b + si]] = -exchange;
                }
            }
        }
    }
    x
}

/// Adjoint of [`spin_doubles`].
pub fn spin_doubles_adjoint(g: &Array4<f64>) -> Array4<f64> {
    let (o, v) = (g.dim().0 / 2, g.dim().2 / 2);
    Array4::from_shape_fn((o, o, v, v), |(i, j, a, b)| {
        let mut x = 0.0;
        for si in 0..2 {
            for sj in 0..2 {
                x += g[[2 * i + si, 2 * j + sj, 2 * a + si, 2 * b + sj]];
                x -= g[[2 * i + si, 2 * j + sj, 2 * b + sj, 2 * a + si]];
            }
        }
        x
    })
}

/// Four odd-readout perceptron heads over shared pair and quadruple features.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel {
    pub heads: [Perceptron; 4],
    pub mode: Mode,
    pub config: FeatureConfig,
    pub hidden: usize,
    pub seed: u64,
    pub epochs: usize,
    pub loss_trace: Vec<f64>,
}

/// Output-layer scale at initialization.
pub const INIT_OUTPUT_SCALE: f64 = 1e-2;

impl SurrogateModel {
    pub fn new(config: FeatureConfig, mode: Mode, hidden: usize, seed: u64) -> Result<Self> {
        Self::with_output_scale(config, mode, hidden, seed, INIT_OUTPUT_SCALE)
    }

    pub fn with_output_scale(config: FeatureConfig, mode: Mode, hidden: usize, seed: u64, out_scale: f64) -> Result<Self> {
        if hidden == 0 {
            return Err(Error::Invalid("hidden width must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (ep, eq) = config.n_even_channels();
        let (sp, sq) = config.n_signed_channels();
        let heads = Head::ALL.map(|h| {
            let n_in = if h.is_doubles() { eq + sq } else { ep + sp };
            Perceptron::random(n_in, hidden, out_scale, &mut rng)
        });
        Ok(Self {
            heads,
            mode,
            config,
            hidden,
            seed,
            epochs: 0,
            loss_trace: Vec::new(),
        })
    }

    pub fn n_params(&self) -> usize {
        self.heads.iter().map(Perceptron::n_params).sum()
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.heads.iter().flat_map(|h| h.params.iter().copied()).collect()
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::Dimension(format!(
                "expected {} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        let mut k = 0;
        for h in &mut self.heads {
            let n = h.params.len();
            h.params.copy_from_slice(&p[k..k + n]);
            k += n;
        }
        Ok(())
    }

    pub(crate) fn check_features(&self, f: &Features) -> Result<()> {
        if f.r_cut != self.config.r_cut || f.radial_bins != self.config.radial_bins {
            return Err(Error::Invalid(format!(
                "features use r_cut={} radial_bins={}, model expects r_cut={} radial_bins={}",
                f.r_cut, f.radial_bins, self.config.r_cut, self.config.radial_bins
            )));
        }
        Ok(())
    }

    pub(crate) fn inputs(&self, f: &Features) -> Result<(Inputs, Inputs)> {
        self.check_features(f)?;
        let (ep, eq) = self.config.n_even_channels();
        let (sp, sq) = self.config.n_signed_channels();
        let pn = self.config.pair_norm.clone().unwrap_or_else(|| Normalization::identity(ep, sp));
        let qn = self.config.quad_norm.clone().unwrap_or_else(|| Normalization::identity(eq, sq));
        Ok((normalized_inputs(&f.pair, &pn), normalized_inputs(&f.quad, &qn)))
    }

    /// Raw head outputs per block row, zero on masked rows.
    pub(crate) fn raw_outputs(&self, head: Head, x: &Inputs) -> Vec<f64> {
        let y = self.heads[head as usize].odd_rows(&x.plus, &x.minus);
        let mut out = vec![0.0; x.mask.len()];
        for (&r, &v) in x.kept.iter().zip(&y) {
            out[r] = v;
        }
        out
    }

    /// Spatial amplitudes `(T1, T2, Λ1, Λ2)` before spin expansion.
    pub(crate) fn spatial(&self, f: &Features, pair: &Inputs, quad: &Inputs) -> [SpatialOut; 4] {
        let (o, v) = (f.n_occ, f.n_virt);
        Head::ALL.map(|h| {
            if h.is_doubles() {
                let q = self.raw_outputs(h, quad);
                let idx = |i, j, a, b| ((i * o + j) * v + a) * v + b;
                let t = Array4::from_shape_fn((o, o, v, v), |(i, j, a, b)| {
                    let r = idx(i, j, a, b);
                    if !quad.mask[r] {
                        return 0.0;
                    }
                    // pair-symmetric to the last bit, so the spin expansion is antisymmetric
                    let base = match self.mode {
                        Mode::Residual => 0.5 * (f.t2_mp2[[i, j, a, b]] + f.t2_mp2[[j, i, b, a]]),
                        Mode::Direct => 0.0,
                    };
                    0.5 * (q[r] + q[idx(j, i, b, a)]) + base
                });
                SpatialOut::Doubles(t)
            } else {
                let p = self.raw_outputs(h, pair);
                SpatialOut::Singles(Array2::from_shape_vec((o, v), p).expect("pair rows"))
            }
        })
    }

    /// Localized-gauge amplitudes.
    pub fn predict(&self, f: &Features) -> Result<AmplitudeSet> {
        let (pair, quad) = self.inputs(f)?;
        Ok(self.assemble(f, &pair, &quad))
    }

    pub(crate) fn assemble(&self, f: &Features, pair: &Inputs, quad: &Inputs) -> AmplitudeSet {
        let [t1, t2, l1, l2] = self.spatial(f, pair, quad);
        AmplitudeSet {
            t1: t1.singles_spin(),
            t2: t2.doubles_spin(),
            l1: l1.singles_spin(),
            l2: l2.doubles_spin(),
            gauge: Gauge::Localized,
            basis_id: f.basis_id.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum SpatialOut {
    Singles(Array2<f64>),
    Doubles(Array4<f64>),
}

impl SpatialOut {
    fn singles_spin(&self) -> Array2<f64> {
        match self {
            SpatialOut::Singles(t) => spin_singles(t),
            SpatialOut::Doubles(_) => unreachable!("singles head"),
        }
    }

    fn doubles_spin(&self) -> Array4<f64> {
        match self {
            SpatialOut::Doubles(t) => spin_doubles(t),
            SpatialOut::Singles(_) => unreachable!("doubles head"),
        }
    }
}
