use ndarray::{s, Array2, Array4, IxDyn};

use crate::cc::equations::{self, Blocks, Leaves};
use crate::cc::SpinOrbitalSystem;
use crate::error::{Error, Result};
use crate::gauge::{antisymmetrize, AmplitudeSet};
use crate::linalg::eigh;
use crate::tensor::{einsum, Tape, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdmKind {
    Hf,
    Mp2,
    Xccsd,
    CcResponse,
    Fci,
}

impl RdmKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RdmKind::Hf => "hf",
            RdmKind::Mp2 => "mp2",
            RdmKind::Xccsd => "xccsd",
            RdmKind::CcResponse => "cc_response",
            RdmKind::Fci => "fci",
        }
    }
}

/// Spin-orbital `γ_pq = ⟨p†q⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm1 {
    pub gamma: Array2<f64>,
    pub kind: RdmKind,
    pub symmetrized: bool,
}

/// Spin-orbital `Γ_pq,rs = ⟨p†q†sr⟩`, so that `E₂ = ¼ Σ ⟨pq||rs⟩ Γ_pq,rs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rdm2 {
    pub gamma: Array4<f64>,
    pub kind: RdmKind,
}

impl Rdm1 {
    pub fn trace(&self) -> f64 {
        self.gamma.diag().sum()
    }

    pub fn symmetrized(&self) -> Rdm1 {
        Rdm1 {
            gamma: (&self.gamma + &self.gamma.t()) * 0.5,
            kind: self.kind,
            symmetrized: true,
        }
    }

    /// Sums the two spin blocks of interleaved spin orbitals.
    pub fn spatial(&self) -> Array2<f64> {
        let n = self.gamma.nrows() / 2;
        Array2::from_shape_fn((n, n), |(p, q)| {
            self.gamma[[2 * p, 2 * q]] + self.gamma[[2 * p + 1, 2 * q + 1]]
        })
    }
}

impl Rdm2 {
    /// `Σ_pq Γ_pq,pq`.
    pub fn pair_trace(&self) -> f64 {
        let n = self.gamma.dim().0;
        let mut s = 0.0;
        for p in 0..n {
            for q in 0..n {
                s += self.gamma[[p, q, p, q]];
            }
        }
        s
    }

    /// `Σ_q Γ_pq,rq`.
    pub fn partial_trace(&self) -> Array2<f64> {
        let n = self.gamma.dim().0;
        Array2::from_shape_fn((n, n), |(p, r)| (0..n).map(|q| self.gamma[[p, q, r, q]]).sum())
    }

    /// `Σ_{σσ'} Γ_{pσ qσ', rσ sσ'}` over interleaved spin orbitals.
    pub fn spatial(&self) -> Array4<f64> {
        let n = self.gamma.dim().0 / 2;
        Array4::from_shape_fn((n, n, n, n), |(p, q, r, t)| {
            let mut x = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    x += self.gamma[[2 * p + a, 2 * q + b, 2 * r + a, 2 * t + b]];
                }
            }
            x
        })
    }
}

pub fn hf_rdm1(n_so: usize, n_occ: usize) -> Rdm1 {
    let mut gamma = Array2::zeros((n_so, n_so));
    for i in 0..n_occ {
        gamma[[i, i]] = 1.0;
    }
    Rdm1 {
        gamma,
        kind: RdmKind::Hf,
        symmetrized: false,
    }
}

pub fn hf_rdm2(n_so: usize, n_occ: usize) -> Rdm2 {
    let mut gamma = Array4::zeros((n_so, n_so, n_so, n_so));
    for i in 0..n_occ {
        for j in 0..n_occ {
            if i != j {
                gamma[[i, j, i, j]] = 1.0;
                gamma[[i, j, j, i]] = -1.0;
            }
        }
    }
    Rdm2 { gamma, kind: RdmKind::Hf }
}

fn e(spec: &str, a: &Tensor, b: &Tensor) -> Tensor {
    einsum(spec, &[a, b])
}

/// Block formulas for `γ` with every term tagged by its total amplitude
/// degree; terms above `max_degree` are dropped.
fn rdm1_blocks(
    t1: &Array2<f64>,
    t2: &Array4<f64>,
    l1: &Array2<f64>,
    l2: &Array4<f64>,
    max_degree: usize,
) -> Array2<f64> {
    let (o, v) = t1.dim();
    let (t1, t2) = (t1.clone().into_dyn(), t2.clone().into_dyn());
    let (l1, l2) = (l1.clone().into_dyn(), l2.clone().into_dyn());
    let keep = |deg: usize| deg <= max_degree;
    let mut g = Array2::<f64>::zeros((o + v, o + v));

    let mut oo = Array2::<f64>::eye(o).into_dyn();
    if keep(2) {
        oo -= &e("je,ie->ij", &l1, &t1);
        oo -= &(e("jmef,imef->ij", &l2, &t2) * 0.5);
    }
    let mut vv = Tensor::zeros(IxDyn(&[v, v]));
    if keep(2) {
        vv += &e("mb,ma->ab", &t1, &l1);
        vv += &(e("mneb,mnea->ab", &t2, &l2) * 0.5);
    }
    let mut ov = Tensor::zeros(IxDyn(&[o, v]));
    if keep(1) {
        ov += &t1;
    }
    if keep(2) {
        ov += &e("imae,me->ia", &t2, &l1);
    }
    if keep(3) {
        let xt1 = e("mnef,inef->mi", &l2, &t2) * 0.5;
        let xt2 = e("mnfa,mnfe->ae", &t2, &l2) * 0.5 + e("ma,me->ae", &t1, &l1);
        ov -= &e("mi,ma->ia", &xt1, &t1);
        ov -= &e("ie,ae->ia", &t1, &xt2);
    }
    let mut vo = Tensor::zeros(IxDyn(&[v, o]));
    if keep(1) {
        vo += &einsum("ia->ai", &[&l1]);
    }
    let as2 = |t: Tensor| -> Array2<f64> { t.into_dimensionality().expect("rank 2") };
    g.slice_mut(s![..o, ..o]).assign(&as2(oo));
    g.slice_mut(s![o.., o..]).assign(&as2(vv));
    g.slice_mut(s![..o, o..]).assign(&as2(ov));
    g.slice_mut(s![o.., ..o]).assign(&as2(vo));
    g
}

fn check_shapes(amps: &AmplitudeSet) -> Result<()> {
    let (o, v) = amps.t1.dim();
    if amps.l1.dim() != (o, v) || amps.t2.dim() != (o, o, v, v) || amps.l2.dim() != (o, o, v, v) {
        return Err(Error::Dimension("amplitude shapes disagree".into()));
    }
    Ok(())
}

/// Λ-state one-particle density `⟨0|(1+Λ)e^{−T} p†q e^{T}|0⟩`.
pub fn cc_rdm1(amps: &AmplitudeSet) -> Result<Rdm1> {
    check_shapes(amps)?;
    Ok(Rdm1 {
        gamma: rdm1_blocks(&amps.t1, &amps.t2, &amps.l1, &amps.l2, usize::MAX),
        kind: RdmKind::CcResponse,
        symmetrized: false,
    })
}

/// Expectation-value CC density from `T` alone: the Λ-state density with
/// `Λ = T`, truncated at total amplitude degree `order` (1, 2 or 3).
pub fn xccsd_rdm1(amps: &AmplitudeSet, order: usize) -> Result<Rdm1> {
    check_shapes(amps)?;
    if !(1..=3).contains(&order) {
        return Err(Error::Invalid(format!("XCCSD order {order} not supported (1, 2 or 3)")));
    }
    Ok(Rdm1 {
        gamma: rdm1_blocks(&amps.t1, &amps.t2, &amps.t1, &amps.t2, order),
        kind: RdmKind::Xccsd,
        symmetrized: false,
    })
}

/// Derivatives of the Lagrangian with respect to `f` (all blocks) and `⟨pq||rs⟩`
/// as it enters the residuals directly. Independent of the integral values
/// because the Lagrangian is linear in the Hamiltonian.
fn lagrangian_integral_gradients(amps: &AmplitudeSet) -> (Array2<f64>, Array4<f64>) {
    let (o, v) = amps.t1.dim();
    let n = o + v;
    let zero = SpinOrbitalSystem::new(Array2::zeros((n, n)), Array4::zeros((n, n, n, n)), o, 0.0);
    let mut tape = Tape::new();
    let x = Leaves::record(&mut tape, Blocks::new(&zero));
    let v1 = tape.leaf(amps.t1.clone().into_dyn());
    let v2 = tape.leaf(amps.t2.clone().into_dyn());
    let eq = equations::record(&mut tape, &x, v1, v2);
    let one = Tensor::from_elem(IxDyn(&[]), 1.0);
    let s1 = amps.l1.clone().into_dyn();
    let s2 = amps.l2.clone().into_dyn() * 0.25;
    let g = tape.backward(&[(eq.e_corr, &one), (eq.r1, &s1), (eq.r2, &s2)]);

    let (ro, rv) = (0..o, o..n);
    let mut gf = Array2::<f64>::zeros((n, n));
    let put2 = |gf: &mut Array2<f64>, var, r0: std::ops::Range<usize>, r1: std::ops::Range<usize>| {
        let shape = [r0.len(), r1.len()];
        let t: Array2<f64> = g.get(var, &shape).into_dimensionality().expect("rank 2");
        let mut dst = gf.slice_mut(s![r0, r1]);
        dst += &t;
    };
    put2(&mut gf, x.f_oo, ro.clone(), ro.clone());
    put2(&mut gf, x.f_ov, ro.clone(), rv.clone());
    put2(&mut gf, x.f_vo, rv.clone(), ro.clone());
    put2(&mut gf, x.f_vv, rv.clone(), rv.clone());

    let mut gv = Array4::<f64>::zeros((n, n, n, n));
    let rng = |c: char| if c == 'o' { ro.clone() } else { rv.clone() };
    for (var, pat) in [
        (x.oovv, "oovv"),
        (x.vvoo, "vvoo"),
        (x.vvvo, "vvvo"),
        (x.ovoo, "ovoo"),
        (x.ovov, "ovov"),
        (x.ovvv, "ovvv"),
        (x.oovo, "oovo"),
        (x.ovvo, "ovvo"),
        (x.vvvv, "vvvv"),
        (x.vovv, "vovv"),
        (x.oooo, "oooo"),
        (x.ooov, "ooov"),
    ] {
        let c: Vec<char> = pat.chars().collect();
        let r: Vec<_> = c.iter().map(|&k| rng(k)).collect();
        let shape: Vec<usize> = r.iter().map(|x| x.len()).collect();
        let t: Array4<f64> = g.get(var, &shape).into_dimensionality().expect("rank 4");
        let mut dst = gv.slice_mut(s![r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone()]);
        dst += &t;
    }
    (gf, gv)
}

/// Λ-state densities from the adjoint of the Lagrangian with respect to the
/// one- and two-electron integrals, including the reference contributions
/// and the dependence of `f` on `⟨pi||qi⟩`.
pub fn cc_rdms(amps: &AmplitudeSet) -> Result<(Rdm1, Rdm2)> {
    check_shapes(amps)?;
    let o = amps.n_occ();
    let (gf, mut gv) = lagrangian_integral_gradients(amps);
    let n = gf.nrows();
    let mut gamma = gf.clone();
    for i in 0..o {
        gamma[[i, i]] += 1.0;
    }
    for p in 0..n {
        for q in 0..n {
            let x = gf[[p, q]];
            if x != 0.0 {
                for i in 0..o {
                    gv[[p, i, q, i]] += x;
                }
            }
        }
    }
    for i in 0..o {
        for j in 0..o {
            gv[[i, j, i, j]] += 0.5;
        }
    }
    Ok((
        Rdm1 {
            gamma,
            kind: RdmKind::CcResponse,
            symmetrized: false,
        },
        Rdm2 {
            gamma: antisymmetrize(&gv) * 4.0,
            kind: RdmKind::CcResponse,
        },
    ))
}

/// Two-particle Λ-state density; see [`cc_rdms`].
pub fn cc_rdm2(amps: &AmplitudeSet) -> Result<Rdm2> {
    cc_rdms(amps).map(|(_, g2)| g2)
}

/// `Σ_pq o_pq γ_pq` with the raw (non-symmetric) density.
pub fn one_body_expectation(rdm: &Rdm1, o: &Array2<f64>) -> Result<f64> {
    if o.dim() != rdm.gamma.dim() {
        return Err(Error::Dimension("operator and density dimensions differ".into()));
    }
    Ok((o * &rdm.gamma).sum())
}

/// `Σ h γ + ¼ Σ ⟨pq||rs⟩ Γ + e_nuc`.
pub fn energy_from_rdms(sys: &SpinOrbitalSystem, g1: &Rdm1, g2: &Rdm2) -> f64 {
    (&sys.h * &g1.gamma).sum() + 0.25 * (&sys.eri * &g2.gamma).sum() + sys.e_nuc
}

/// Eigenvalues of the symmetrized spin-traced density, descending.
pub fn natural_occupations(rdm: &Rdm1) -> Vec<f64> {
    let g = rdm.symmetrized().spatial();
    let (w, _) = eigh(&g);
    let mut out: Vec<f64> = w.to_vec();
    out.reverse();
    out
}
