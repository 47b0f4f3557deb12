use ndarray::{s, Array2, Array4};

use crate::error::{Error, Result};
use crate::gauge::{matrix_id, GaugeSpec};
use crate::scf::{mo_transform, MoIntegrals, ScfResult};
use crate::chem::IntegralSet;
use crate::tensor::einsum;

/// Invariant and sign-covariant channel counts for pair and quadruple rows.
pub const PAIR_FIXED_EVEN: usize = 7;
pub const PAIR_SIGNED: usize = 4;
pub const QUAD_FIXED_EVEN: usize = 12;
pub const QUAD_SIGNED: usize = 6;

/// Per-channel affine map fitted on training rows. Signed channels are
/// only scaled, so `normalize(−s) = −normalize(s)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub even_mean: Vec<f64>,
    pub even_scale: Vec<f64>,
    pub signed_scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(n_even: usize, n_signed: usize) -> Self {
        Self {
            even_mean: vec![0.0; n_even],
            even_scale: vec![1.0; n_even],
            signed_scale: vec![1.0; n_signed],
        }
    }

    /// Mean/std of even channels and RMS of signed channels over unmasked rows.
    /// Channels with spread below 1e−12 keep unit scale.
    pub fn fit<'a>(blocks: impl IntoIterator<Item = &'a FeatureBlock>, n_even: usize, n_signed: usize) -> Self {
        let mut sum = vec![0.0; n_even];
        let mut sq = vec![0.0; n_even];
        let mut ssq = vec![0.0; n_signed];
        let mut n = 0usize;
        let mut rows = Vec::new();
        for b in blocks {
            for r in 0..b.mask.len() {
                if b.mask[r] {
                    rows.push((b, r));
                }
            }
        }
        for &(b, r) in &rows {
            n += 1;
            for c in 0..n_even {
                sum[c] += b.even[[r, c]];
            }
            for c in 0..n_signed {
                ssq[c] += b.signed[[r, c]].powi(2);
            }
        }
        if n == 0 {
            return Self::identity(n_even, n_signed);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        for &(b, r) in &rows {
            for c in 0..n_even {
                sq[c] += (b.even[[r, c]] - mean[c]).powi(2);
            }
        }
        let guard = |x: f64| if x < 1e-12 { 1.0 } else { x };
        Self {
            even_scale: sq.iter().map(|v| guard((v / n as f64).sqrt())).collect(),
            signed_scale: ssq.iter().map(|v| guard((v / n as f64).sqrt())).collect(),
            even_mean: mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Locality cutoff on orbital-centroid distances, bohr.
    pub r_cut: f64,
    pub radial_bins: usize,
    pub pair_norm: Option<Normalization>,
    pub quad_norm: Option<Normalization>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            r_cut: 10.0,
            radial_bins: 6,
            pair_norm: None,
            quad_norm: None,
        }
    }
}

impl FeatureConfig {
    pub fn new(r_cut: f64, radial_bins: usize) -> Result<Self> {
        if !(r_cut > 0.0) || !r_cut.is_finite() {
            return Err(Error::Invalid(format!("r_cut must be positive, got {r_cut}")));
        }
        if radial_bins == 0 {
            return Err(Error::Invalid("radial_bins must be at least 1".into()));
        }
        Ok(Self {
            r_cut,
            radial_bins,
            ..Self::default()
        })
    }

    pub fn n_even_pair(&self) -> usize {
        self.radial_bins + PAIR_FIXED_EVEN
    }

    pub fn n_even_quad(&self) -> usize {
        6 * self.radial_bins + QUAD_FIXED_EVEN
    }

    pub fn n_even_channels(&self) -> (usize, usize) {
        (self.n_even_pair(), self.n_even_quad())
    }

    pub fn n_signed_channels(&self) -> (usize, usize) {
        (PAIR_SIGNED, QUAD_SIGNED)
    }

    pub fn is_fitted(&self) -> bool {
        self.pair_norm.is_some() && self.quad_norm.is_some()
    }

    /// Fits both normalizations on a training set.
    pub fn fit(&mut self, feats: &[Features]) -> Result<()> {
        if let Some(f) = feats.iter().find(|f| f.r_cut != self.r_cut || f.radial_bins != self.radial_bins) {
            return Err(Error::Invalid(format!(
                "features for {} were built with a different configuration",
                f.basis_id
            )));
        }
        self.pair_norm = Some(Normalization::fit(feats.iter().map(|f| &f.pair), self.n_even_pair(), PAIR_SIGNED));
        self.quad_norm = Some(Normalization::fit(feats.iter().map(|f| &f.quad), self.n_even_quad(), QUAD_SIGNED));
        Ok(())
    }

    /// Smooth Gaussian expansion of a distance on `radial_bins` centres spanning `[0, r_cut]`.
    fn radial(&self, d: f64, out: &mut Vec<f64>) {
        let n = self.radial_bins;
        let width = if n == 1 { self.r_cut } else { self.r_cut / (n - 1) as f64 };
        for k in 0..n {
            let mu = k as f64 * width;
            out.push((-((d - mu) / width).powi(2)).exp());
        }
    }
}

/// Rows of raw features with a locality mask (`true` = kept). Masked
/// quadruple rows are left at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBlock {
    pub even: Array2<f64>,
    pub signed: Array2<f64>,
    pub mask: Vec<bool>,
}

pub type PairFeatures = FeatureBlock;
pub type QuadFeatures = FeatureBlock;

/// Features of one molecule in its canonicalized localized gauge.
/// Pair rows are `i·n_virt + a`; quadruple rows are `((i·n_occ + j)·n_virt + a)·n_virt + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub n_occ: usize,
    pub n_virt: usize,
    pub pair: PairFeatures,
    pub quad: QuadFeatures,
    /// Spatial MP2 amplitudes `T_ij^ab` (αβ block) in the localized gauge.
    pub t2_mp2: Array4<f64>,
    /// Identifier of the localized orbitals the features describe.
    pub basis_id: String,
    pub r_cut: f64,
    pub radial_bins: usize,
}

impl Features {
    pub fn quad_row(&self, i: usize, j: usize, a: usize, b: usize) -> usize {
        ((i * self.n_occ + j) * self.n_virt + a) * self.n_virt + b
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Block-diagonal `U_occ ⊕ U_virt` over spatial orbitals.
pub fn gauge_rotation(g: &GaugeSpec) -> Array2<f64> {
    let (o, v) = (g.n_occ(), g.n_virt());
    let mut u = Array2::zeros((o + v, o + v));
    u.slice_mut(s![..o, ..o]).assign(&g.u_occ);
    u.slice_mut(s![o.., o..]).assign(&g.u_virt);
    u
}

/// Closed-shell Fock matrix `f_pq = h_pq + Σ_k [2(pq|kk) − (pk|kq)]`.
pub fn spatial_fock(mo: &MoIntegrals, n_occ: usize) -> Array2<f64> {
    let n = mo.n_mo;
    Array2::from_shape_fn((n, n), |(p, q)| {
        mo.h[[p, q]]
            + (0..n_occ)
                .map(|k| 2.0 * mo.eri[[p, q, k, k]] - mo.eri[[p, k, k, q]])
                .sum::<f64>()
    })
}

/// Canonical spatial MP2 amplitudes `T_ij^ab = (ia|jb) / (ε_i + ε_j − ε_a − ε_b)`.
pub fn spatial_mp2(mo: &MoIntegrals, n_occ: usize) -> Result<Array4<f64>> {
    let f = spatial_fock(mo, n_occ);
    let v = mo.n_mo - n_occ;
    let mut t = Array4::zeros((n_occ, n_occ, v, v));
    for ((i, j, a, b), x) in t.indexed_iter_mut() {
        let d = f[[i, i]] + f[[j, j]] - f[[n_occ + a, n_occ + a]] - f[[n_occ + b, n_occ + b]];
        if d.abs() < 1e-10 {
            return Err(Error::DegenerateDenominator(d));
        }
        *x = mo.eri[[i, n_occ + a, j, n_occ + b]] / d;
    }
    Ok(t)
}

/// Rotates spatial doubles with `U_occ` on `i, j` and `U_virt` on `a, b`.
pub fn rotate_spatial_doubles(t: &Array4<f64>, uo: &Array2<f64>, uv: &Array2<f64>) -> Array4<f64> {
    let (uo, uv) = (uo.clone().into_dyn(), uv.clone().into_dyn());
    let x = t.clone().into_dyn();
    let x = einsum("ijab,ik->kjab", &[&x, &uo]);
    let x = einsum("kjab,jl->klab", &[&x, &uo]);
    let x = einsum("klab,ac->klcb", &[&x, &uv]);
    let x = einsum("klcb,bd->klcd", &[&x, &uv]);
    x.into_dimensionality().expect("rank 4")
}

/// Features from the SCF orbitals, the canonicalized localized gauge and the AO integrals.
pub fn build_features(scf: &ScfResult, gauge: &GaugeSpec, ints: &IntegralSet, cfg: &FeatureConfig) -> Result<Features> {
    if gauge.parent_id != matrix_id(&scf.c) {
        return Err(Error::GaugeMismatch("gauge was built from different SCF orbitals".into()));
    }
    let mo = mo_transform(ints, &scf.c)?;
    features_from_mo(&mo, scf.n_occ, gauge, cfg)
}

/// Features from canonical-orbital MO integrals and a localized gauge over them.
pub fn features_from_mo(mo: &MoIntegrals, n_occ: usize, gauge: &GaugeSpec, cfg: &FeatureConfig) -> Result<Features> {
    let (o, v) = (gauge.n_occ(), gauge.n_virt());
    if !gauge.canonicalized {
        return Err(Error::Invalid("features need a canonicalized localized gauge".into()));
    }
    if o != n_occ || o + v != mo.n_mo {
        return Err(Error::Dimension("gauge and integral dimensions differ".into()));
    }
    let t2_mp2 = rotate_spatial_doubles(&spatial_mp2(mo, n_occ)?, &gauge.u_occ, &gauge.u_virt);
    let loc = mo.rotated(&gauge_rotation(gauge))?;
    let f = spatial_fock(&loc, n_occ);
    let (h, g) = (&loc.h, &loc.eri);
    let cen = &gauge.centroids;
    let spr = &gauge.spreads;
    let va = |a: usize| o + a;

    let n_even_p = cfg.n_even_pair();
    let mut pe = Array2::zeros((o * v, n_even_p));
    let mut ps = Array2::zeros((o * v, PAIR_SIGNED));
    let mut pm = vec![true; o * v];
    let mut row = Vec::with_capacity(n_even_p);
    for i in 0..o {
        for a in 0..v {
            let r = i * v + a;
            let (ci, ca) = (&cen[i], &cen[va(a)]);
            let d = dist(ci, ca);
            pm[r] = d <= cfg.r_cut;
            let mp2_norm = t2_mp2
                .slice(s![i, .., a, ..])
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt();
            let (fia, hia) = (f[[i, va(a)]], h[[i, va(a)]]);
            row.clear();
            cfg.radial(d, &mut row);
            row.extend([spr[i], spr[va(a)], f[[i, i]], f[[va(a), va(a)]], fia.abs(), hia.abs(), mp2_norm]);
            pe.row_mut(r).assign(&ndarray::ArrayView1::from(&row[..]));
            let coul: f64 = (0..o).map(|j| g[[i, va(a), j, j]]).sum();
            let exch: f64 = (0..o).map(|j| g[[i, j, j, va(a)]]).sum();
            ps.row_mut(r).assign(&ndarray::arr1(&[fia, hia, coul, exch]));
        }
    }

    let n_even_q = cfg.n_even_quad();
    let nq = o * o * v * v;
    let mut qe = Array2::zeros((nq, n_even_q));
    let mut qs = Array2::zeros((nq, QUAD_SIGNED));
    let mut qm = vec![true; nq];
    let mut row = Vec::with_capacity(n_even_q);
    for i in 0..o {
        for j in 0..o {
            for a in 0..v {
                for b in 0..v {
                    let r = ((i * o + j) * v + a) * v + b;
                    let (pa, pb) = (va(a), va(b));
                    let ds = [
                        dist(&cen[i], &cen[j]),
                        dist(&cen[pa], &cen[pb]),
                        dist(&cen[i], &cen[pa]),
                        dist(&cen[j], &cen[pb]),
                        dist(&cen[i], &cen[pb]),
                        dist(&cen[j], &cen[pa]),
                    ];
                    qm[r] = ds.iter().all(|&d| d <= cfg.r_cut);
                    if !qm[r] {
                        continue;
                    }
                    let t = t2_mp2[[i, j, a, b]];
                    let (iajb, ibja) = (g[[i, pa, j, pb]], g[[i, pb, j, pa]]);
                    row.clear();
                    for d in ds {
                        cfg.radial(d, &mut row);
                    }
                    let denom = f[[i, i]] + f[[j, j]] - f[[pa, pa]] - f[[pb, pb]];
                    row.extend([
                        spr[i], spr[j], spr[pa], spr[pb],
                        f[[i, i]], f[[j, j]], f[[pa, pa]], f[[pb, pb]],
                        denom, t.abs(), iajb.abs(), ibja.abs(),
                    ]);
                    qe.row_mut(r).assign(&ndarray::ArrayView1::from(&row[..]));
                    let signed = [
                        t,
                        f[[i, pa]] * f[[j, pb]],
                        f[[i, pb]] * f[[j, pa]],
                        iajb,
                        ibja,
                        h[[i, pa]] * h[[j, pb]],
                    ];
                    qs.row_mut(r).assign(&ndarray::ArrayView1::from(&signed[..]));
                }
            }
        }
    }
    Ok(Features {
        n_occ: o,
        n_virt: v,
        pair: FeatureBlock { even: pe, signed: ps, mask: pm },
        quad: FeatureBlock { even: qe, signed: qs, mask: qm },
        t2_mp2,
        basis_id: gauge.basis_id.clone(),
        r_cut: cfg.r_cut,
        radial_bins: cfg.radial_bins,
    })
}
