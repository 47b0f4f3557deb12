use ndarray::{s, Array2, Array4};

use super::amplitudes::{AmplitudeSet, Gauge};
use super::localize::{localize, LocalizeOptions, OrbitalSpace};
use crate::chem::{BasisSet, IntegralSet, Molecule};
use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::scf::ScfResult;
use crate::tensor::einsum;

const ORDER_TOL: f64 = 1e-6;

/// Principal axes of the nuclear charge distribution. Reduces centroids to
/// coordinates that do not depend on the orientation of the molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub origin: [f64; 3],
    /// Rows are the axes, largest second moment first.
    pub axes: [[f64; 3]; 3],
}

impl Frame {
    pub fn of(mol: &Molecule) -> Self {
        let origin = mol.charge_center();
        let mut m = Array2::<f64>::zeros((3, 3));
        for a in &mol.atoms {
            let r: Vec<f64> = (0..3).map(|k| a.pos[k] - origin[k]).collect();
            for i in 0..3 {
                for j in 0..3 {
                    m[[i, j]] += a.z as f64 * r[i] * r[j];
                }
            }
        }
        let (_, vecs) = eigh(&m);
        let mut axes = [[0.0; 3]; 3];
        for k in 0..3 {
            let col = vecs.column(2 - k);
            let mut axis = [col[0], col[1], col[2]];
            let first = mol.atoms.iter().map(|a| {
                (0..3).map(|i| (a.pos[i] - origin[i]) * axis[i]).sum::<f64>()
            });
            if let Some(p) = first.into_iter().find(|p| p.abs() > ORDER_TOL) {
                if p < 0.0 {
                    axis.iter_mut().for_each(|x| *x = -*x);
                }
            }
            axes[k] = axis;
        }
        Self { origin, axes }
    }

    pub fn coordinates(&self, r: [f64; 3]) -> [f64; 3] {
        let d: Vec<f64> = (0..3).map(|k| r[k] - self.origin[k]).collect();
        self.axes.map(|ax| ax.iter().zip(&d).map(|(a, b)| a * b).sum())
    }
}

/// Localized gauge of both orbital spaces. `u_occ`/`u_virt` map canonical to
/// localized orbitals (`C̃ = C U`) including any phase and order fixing.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeSpec {
    pub u_occ: Array2<f64>,
    pub u_virt: Array2<f64>,
    /// Sign applied to each raw Boys orbital, listed in final order, occupied first.
    pub phase: Vec<f64>,
    /// Raw Boys index of the orbital now at each position.
    pub order: Vec<usize>,
    pub centroids: Vec<[f64; 3]>,
    pub spreads: Vec<f64>,
    /// Canonical MO coefficients the rotations act on.
    pub c_canonical: Array2<f64>,
    pub frame: Frame,
    pub converged: bool,
    pub sweeps: usize,
    pub canonicalized: bool,
    /// Identifier of the canonical orbitals.
    pub parent_id: String,
    /// Identifier of the localized orbitals.
    pub basis_id: String,
}

impl GaugeSpec {
    pub fn n_occ(&self) -> usize {
        self.u_occ.nrows()
    }

    pub fn n_virt(&self) -> usize {
        self.u_virt.nrows()
    }

    /// Localized AO coefficients, occupied columns first.
    pub fn c_localized(&self) -> Array2<f64> {
        let o = self.n_occ();
        let co = self.c_canonical.slice(s![.., ..o]).dot(&self.u_occ);
        let cv = self.c_canonical.slice(s![.., o..]).dot(&self.u_virt);
        ndarray::concatenate(ndarray::Axis(1), &[co.view(), cv.view()]).expect("same rows")
    }

    /// The same gauge with localized orbital `k` multiplied by `signs[k]`
    /// (occupied first), without re-canonicalizing.
    pub fn with_phases(&self, signs: &[f64]) -> Result<GaugeSpec> {
        let (o, v) = (self.n_occ(), self.n_virt());
        if signs.len() != o + v || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::Invalid("phase vector must hold ±1 per localized orbital".into()));
        }
        let mut out = self.clone();
        for k in 0..o + v {
            if signs[k] < 0.0 {
                let col = if k < o { out.u_occ.column_mut(k) } else { out.u_virt.column_mut(k - o) };
                col.into_iter().for_each(|x| *x = -*x);
                out.phase[k] = -out.phase[k];
            }
        }
        out.basis_id = matrix_id(&out.c_localized());
        Ok(out)
    }

    /// Spin-orbital rotation blocks `(U_occ ⊗ 1₂, U_virt ⊗ 1₂)`.
    pub fn spin_blocks(&self) -> (Array2<f64>, Array2<f64>) {
        (spin_expand(&self.u_occ), spin_expand(&self.u_virt))
    }
}

/// `U[p,q]` on both spin blocks of interleaved spin orbitals.
pub fn spin_expand(u: &Array2<f64>) -> Array2<f64> {
    let (r, c) = u.dim();
    Array2::from_shape_fn((2 * r, 2 * c), |(p, q)| if p % 2 == q % 2 { u[[p / 2, q / 2]] } else { 0.0 })
}

/// FNV-1a digest of a matrix, printed as hex.
pub fn matrix_id(m: &Array2<f64>) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(m.nrows() as u64).to_le_bytes());
    eat(&(m.ncols() as u64).to_le_bytes());
    for x in m.iter() {
        eat(&x.to_le_bytes());
    }
    format!("{h:016x}")
}

/// Foster–Boys localization of both spaces followed by [`canonicalize`].
pub fn localized_gauge(
    scf: &ScfResult,
    ints: &IntegralSet,
    mol: &Molecule,
    opts: &LocalizeOptions,
) -> Result<GaugeSpec> {
    let occ = localize(scf, ints, OrbitalSpace::Occupied, opts)?;
    let virt = localize(scf, ints, OrbitalSpace::Virtual, opts)?;
    let n = scf.n_occ + scf.n_virt;
    let g = GaugeSpec {
        u_occ: occ.u,
        u_virt: virt.u,
        phase: vec![1.0; n],
        order: (0..n).collect(),
        centroids: occ.centroids.into_iter().chain(virt.centroids).collect(),
        spreads: occ.spreads.into_iter().chain(virt.spreads).collect(),
        c_canonical: scf.c.clone(),
        frame: Frame::of(mol),
        converged: occ.converged && virt.converged,
        sweeps: occ.sweeps.max(virt.sweeps),
        canonicalized: false,
        parent_id: matrix_id(&scf.c),
        basis_id: String::new(),
    };
    canonicalize(&g)
}

fn compare(a: &([f64; 3], f64), b: &([f64; 3], f64)) -> Option<std::cmp::Ordering> {
    for k in 0..3 {
        if (a.0[k] - b.0[k]).abs() > ORDER_TOL {
            return a.0[k].partial_cmp(&b.0[k]);
        }
    }
    if (a.1 - b.1).abs() > ORDER_TOL {
        return a.1.partial_cmp(&b.1);
    }
    None
}

/// Phase: largest-magnitude AO coefficient positive (lowest AO index on ties).
/// Order: lexicographic in principal-axis centroid coordinates, spread last.
pub fn canonicalize(g: &GaugeSpec) -> Result<GaugeSpec> {
    let (o, v) = (g.n_occ(), g.n_virt());
    let mut out = g.clone();
    let c_loc = g.c_localized();
    let mut phase = vec![1.0; o + v];
    for (k, col) in c_loc.columns().into_iter().enumerate() {
        let big = col.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let lead = col.iter().copied().find(|x| x.abs() >= big - 1e-8 * big).unwrap_or(0.0);
        if lead < 0.0 {
            phase[k] = -1.0;
        }
    }
    let mut order = Vec::with_capacity(o + v);
    for range in [0..o, o..o + v] {
        let mut idx: Vec<usize> = range.collect();
        let keys: Vec<([f64; 3], f64)> = (0..o + v)
            .map(|k| (g.frame.coordinates(g.centroids[k]), g.spreads[k]))
            .collect();
        for (x, &a) in idx.iter().enumerate() {
            for &b in &idx[x + 1..] {
                if compare(&keys[a], &keys[b]).is_none() {
                    return Err(Error::CanonicalTie(a, b));
                }
            }
        }
        idx.sort_by(|&a, &b| compare(&keys[a], &keys[b]).expect("ties rejected above"));
        order.extend(idx);
    }
    let remap = |u: &Array2<f64>, offset: usize| {
        let n = u.ncols();
        Array2::from_shape_fn((u.nrows(), n), |(r, k)| {
            let src = order[offset + k] - offset;
            u[[r, src]] * phase[order[offset + k]]
        })
    };
    out.u_occ = remap(&g.u_occ, 0);
    out.u_virt = remap(&g.u_virt, o);
    out.phase = order.iter().map(|&k| g.phase[k] * phase[k]).collect();
    out.centroids = order.iter().map(|&k| g.centroids[k]).collect();
    out.spreads = order.iter().map(|&k| g.spreads[k]).collect();
    out.order = order.iter().map(|&k| g.order[k]).collect();
    out.canonicalized = true;
    out.basis_id = matrix_id(&out.c_localized());
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ToLocalized,
    ToCanonical,
}

fn rotate2(x: &Array2<f64>, uo: &Array2<f64>, uv: &Array2<f64>) -> Array2<f64> {
    uo.t().dot(x).dot(uv)
}

fn rotate4(x: &Array4<f64>, uo: &Array2<f64>, uv: &Array2<f64>) -> Array4<f64> {
    let (uo, uv) = (uo.clone().into_dyn(), uv.clone().into_dyn());
    let t = x.clone().into_dyn();
    let t = einsum("ijab,ik->kjab", &[&t, &uo]);
    let t = einsum("kjab,jl->klab", &[&t, &uo]);
    let t = einsum("klab,ac->klcb", &[&t, &uv]);
    let t = einsum("klcb,bd->klcd", &[&t, &uv]);
    super::amplitudes::antisymmetrize(&t.into_dimensionality().expect("rank 4"))
}

/// Contracts every occupied index with `U_occ` and every virtual index with
/// `U_virt` (spin-expanded), or with their transposes for the reverse map.
pub fn transform_amplitudes(amps: &AmplitudeSet, g: &GaugeSpec, dir: Direction) -> Result<AmplitudeSet> {
    let (from, to, want_id, new_id) = match dir {
        Direction::ToLocalized => (Gauge::Canonical, Gauge::Localized, &g.parent_id, &g.basis_id),
        Direction::ToCanonical => (Gauge::Localized, Gauge::Canonical, &g.basis_id, &g.parent_id),
    };
    if amps.gauge != from {
        return Err(Error::GaugeMismatch(format!(
            "amplitudes are already in the {} gauge",
            amps.gauge.as_str()
        )));
    }
    if !amps.basis_id.is_empty() && amps.basis_id != *want_id {
        return Err(Error::GaugeMismatch(format!(
            "amplitudes belong to orbitals {} but the gauge expects {}",
            amps.basis_id, want_id
        )));
    }
    let (mut uo, mut uv) = g.spin_blocks();
    if amps.n_occ() != uo.nrows() || amps.n_virt() != uv.nrows() {
        return Err(Error::Dimension("amplitude and gauge dimensions differ".into()));
    }
    if dir == Direction::ToCanonical {
        uo = uo.t().to_owned();
        uv = uv.t().to_owned();
    }
    Ok(AmplitudeSet {
        t1: rotate2(&amps.t1, &uo, &uv),
        t2: rotate4(&amps.t2, &uo, &uv),
        l1: rotate2(&amps.l1, &uo, &uv),
        l2: rotate4(&amps.l2, &uo, &uv),
        gauge: to,
        basis_id: new_id.clone(),
    })
}

/// Mulliken population of every column of `c` on every atom (`[orbital][atom]`).
pub fn mulliken_populations(c: &Array2<f64>, s: &Array2<f64>, basis: &BasisSet, n_atoms: usize) -> Vec<Vec<f64>> {
    let sc = s.dot(c);
    (0..c.ncols())
        .map(|p| {
            let mut pop = vec![0.0; n_atoms];
            for (mu, sh) in basis.shells.iter().enumerate() {
                pop[sh.center] += c[[mu, p]] * sc[[mu, p]];
            }
            pop
        })
        .collect()
}
