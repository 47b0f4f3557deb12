//! Spin-orbital CCSD energy and residuals recorded on a [`Tape`].
//!
//! Every integral block is an independent leaf so that the same expressions
//! deliver the Λ equations (adjoints with respect to the amplitudes) and the
//! response densities (adjoints with respect to the integrals). Integral
//! indices keep creators on the left and annihilators on the right, which
//! keeps the expressions valid for a non-Hermitian Hamiltonian.

use super::system::{Space, SpinOrbitalSystem};
use crate::tensor::{Tape, Tensor, Var};

use Space::{Occ as O, Virt as V};

/// Integral blocks in the orientation consumed by the residuals.
pub(crate) struct Blocks {
    pub f_oo: Tensor,
    pub f_ov: Tensor,
    pub f_vo: Tensor,
    pub f_vv: Tensor,
    pub oovv: Tensor,
    pub vvoo: Tensor,
    pub vvvo: Tensor,
    pub ovoo: Tensor,
    pub ovov: Tensor,
    pub ovvv: Tensor,
    pub oovo: Tensor,
    pub ovvo: Tensor,
    pub vvvv: Tensor,
    pub vovv: Tensor,
    pub oooo: Tensor,
    pub ooov: Tensor,
}

impl Blocks {
    pub fn new(sys: &SpinOrbitalSystem) -> Self {
        Self {
            f_oo: sys.f_block(O, O),
            f_ov: sys.f_block(O, V),
            f_vo: sys.f_block(V, O),
            f_vv: sys.f_block(V, V),
            oovv: sys.eri_block(O, O, V, V),
            vvoo: sys.eri_block(V, V, O, O),
            vvvo: sys.eri_block(V, V, V, O),
            ovoo: sys.eri_block(O, V, O, O),
            ovov: sys.eri_block(O, V, O, V),
            ovvv: sys.eri_block(O, V, V, V),
            oovo: sys.eri_block(O, O, V, O),
            ovvo: sys.eri_block(O, V, V, O),
            vvvv: sys.eri_block(V, V, V, V),
            vovv: sys.eri_block(V, O, V, V),
            oooo: sys.eri_block(O, O, O, O),
            ooov: sys.eri_block(O, O, O, V),
        }
    }
}

/// Tape handles of the integral blocks.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Leaves {
    pub f_oo: Var,
    pub f_ov: Var,
    pub f_vo: Var,
    pub f_vv: Var,
    pub oovv: Var,
    pub vvoo: Var,
    pub vvvo: Var,
    pub ovoo: Var,
    pub ovov: Var,
    pub ovvv: Var,
    pub oovo: Var,
    pub ovvo: Var,
    pub vvvv: Var,
    pub vovv: Var,
    pub oooo: Var,
    pub ooov: Var,
}

impl Leaves {
    pub fn record(tape: &mut Tape, b: Blocks) -> Self {
        Self {
            f_oo: tape.leaf(b.f_oo),
            f_ov: tape.leaf(b.f_ov),
            f_vo: tape.leaf(b.f_vo),
            f_vv: tape.leaf(b.f_vv),
            oovv: tape.leaf(b.oovv),
            vvoo: tape.leaf(b.vvoo),
            vvvo: tape.leaf(b.vvvo),
            ovoo: tape.leaf(b.ovoo),
            ovov: tape.leaf(b.ovov),
            ovvv: tape.leaf(b.ovvv),
            oovo: tape.leaf(b.oovo),
            ovvo: tape.leaf(b.ovvo),
            vvvv: tape.leaf(b.vvvv),
            vovv: tape.leaf(b.vovv),
            oooo: tape.leaf(b.oooo),
            ooov: tape.leaf(b.ooov),
        }
    }
}

/// Correlation energy and the singles/doubles residuals `⟨μ|e^{−T}He^{T}|0⟩`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Equations {
    pub e_corr: Var,
    pub r1: Var,
    pub r2: Var,
}

pub(crate) fn record(tape: &mut Tape, x: &Leaves, t1: Var, t2: Var) -> Equations {
    let tt = tape.ein("ia,jb->ijab", &[t1, t1], 1.0);
    let tt_a = tape.antisym(tt, "ijab", "ijba");
    let tau_t = tape.lin(&[(t2, 1.0), (tt_a, 0.5)]);
    let tau = tape.lin(&[(t2, 1.0), (tt_a, 1.0)]);

    // energy
    let e1 = tape.ein("ia,ia->", &[x.f_ov, t1], 1.0);
    let e2 = tape.ein("ijab,ijab->", &[x.oovv, t2], 0.25);
    let e3 = tape.ein("ijab,ijab->", &[x.oovv, tt], 0.5);
    let e_corr = tape.lin(&[(e1, 1.0), (e2, 1.0), (e3, 1.0)]);

    // two-index intermediates
    let a1 = tape.ein("ma,me->ae", &[t1, x.f_ov], -0.5);
    let a2 = tape.ein("mf,mafe->ae", &[t1, x.ovvv], 1.0);
    let a3 = tape.ein("mnaf,mnef->ae", &[tau_t, x.oovv], -0.5);
    let fae = tape.lin(&[(x.f_vv, 1.0), (a1, 1.0), (a2, 1.0), (a3, 1.0)]);

    let m1 = tape.ein("ie,me->mi", &[t1, x.f_ov], 0.5);
    let m2 = tape.ein("ne,mnie->mi", &[t1, x.ooov], 1.0);
    let m3 = tape.ein("inef,mnef->mi", &[tau_t, x.oovv], 0.5);
    let fmi = tape.lin(&[(x.f_oo, 1.0), (m1, 1.0), (m2, 1.0), (m3, 1.0)]);

    let e_ = tape.ein("nf,mnef->me", &[t1, x.oovv], 1.0);
    let fme = tape.add(x.f_ov, e_);

    // four-index intermediates
    let w1 = tape.ein("je,mnie->mnij", &[t1, x.ooov], 1.0);
    let w1 = tape.antisym(w1, "mnij", "mnji");
    let w2 = tape.ein("ijef,mnef->mnij", &[tau, x.oovv], 0.25);
    let wmnij = tape.lin(&[(x.oooo, 1.0), (w1, 1.0), (w2, 1.0)]);

    let w1 = tape.ein("mb,amef->abef", &[t1, x.vovv], 1.0);
    let w1 = tape.antisym(w1, "abef", "baef");
    let w2 = tape.ein("mnab,mnef->abef", &[tau, x.oovv], 0.25);
    let wabef = tape.lin(&[(x.vvvv, 1.0), (w1, -1.0), (w2, 1.0)]);

    let w1 = tape.ein("jf,mbef->mbej", &[t1, x.ovvv], 1.0);
    let w2 = tape.ein("nb,mnej->mbej", &[t1, x.oovo], -1.0);
    let w3 = tape.ein("jnfb,mnef->mbej", &[t2, x.oovv], -0.5);
    let z = tape.ein("jf,mnef->mnej", &[t1, x.oovv], 1.0);
    let w4 = tape.ein("nb,mnej->mbej", &[t1, z], -1.0);
    let wmbej = tape.lin(&[(x.ovvo, 1.0), (w1, 1.0), (w2, 1.0), (w3, 1.0), (w4, 1.0)]);

    // singles
    let s0 = tape.ein("ai->ia", &[x.f_vo], 1.0);
    let s1 = tape.ein("ie,ae->ia", &[t1, fae], 1.0);
    let s2 = tape.ein("ma,mi->ia", &[t1, fmi], -1.0);
    let s3 = tape.ein("imae,me->ia", &[t2, fme], 1.0);
    let s4 = tape.ein("nf,naif->ia", &[t1, x.ovov], -1.0);
    let s5 = tape.ein("imef,maef->ia", &[t2, x.ovvv], -0.5);
    let s6 = tape.ein("mnae,nmei->ia", &[t2, x.oovo], -0.5);
    let r1 = tape.lin(&[(s0, 1.0), (s1, 1.0), (s2, 1.0), (s3, 1.0), (s4, 1.0), (s5, 1.0), (s6, 1.0)]);

    // doubles
    let d0 = tape.ein("abij->ijab", &[x.vvoo], 1.0);

    let fb = tape.ein("mb,me->be", &[t1, fme], -0.5);
    let fb = tape.add(fae, fb);
    let d1 = tape.ein("ijae,be->ijab", &[t2, fb], 1.0);
    let d1 = tape.antisym(d1, "ijab", "ijba");

    let fj = tape.ein("je,me->mj", &[t1, fme], 0.5);
    let fj = tape.add(fmi, fj);
    let d2 = tape.ein("imab,mj->ijab", &[t2, fj], 1.0);
    let d2 = tape.antisym(d2, "ijab", "jiab");

    let d3 = tape.ein("mnab,mnij->ijab", &[tau, wmnij], 0.5);
    let d4 = tape.ein("ijef,abef->ijab", &[tau, wabef], 0.5);

    let p1 = tape.ein("imae,mbej->ijab", &[t2, wmbej], 1.0);
    let q = tape.ein("ie,mbej->imbj", &[t1, x.ovvo], 1.0);
    let p2 = tape.ein("ma,imbj->ijab", &[t1, q], -1.0);
    let p = tape.add(p1, p2);
    let p = tape.antisym(p, "ijab", "jiab");
    let d5 = tape.antisym(p, "ijab", "ijba");

    let d6 = tape.ein("ie,abej->ijab", &[t1, x.vvvo], 1.0);
    let d6 = tape.antisym(d6, "ijab", "jiab");
    let d7 = tape.ein("ma,mbij->ijab", &[t1, x.ovoo], 1.0);
    let d7 = tape.antisym(d7, "ijab", "ijba");

    let r2 = tape.lin(&[
        (d0, 1.0),
        (d1, 1.0),
        (d2, -1.0),
        (d3, 1.0),
        (d4, 1.0),
        (d5, 1.0),
        (d6, 1.0),
        (d7, -1.0),
    ]);

    Equations { e_corr, r1, r2 }
}

/// Energy and residuals on a fresh tape, returned as plain tensors.
pub(crate) fn evaluate(sys: &SpinOrbitalSystem, t1: &Tensor, t2: &Tensor) -> (f64, Tensor, Tensor) {
    let mut tape = Tape::new();
    let x = Leaves::record(&mut tape, Blocks::new(sys));
    let v1 = tape.leaf(t1.clone());
    let v2 = tape.leaf(t2.clone());
    let eq = record(&mut tape, &x, v1, v2);
    (
        tape.value(eq.e_corr)[[]],
        tape.value(eq.r1).clone(),
        tape.value(eq.r2).clone(),
    )
}
