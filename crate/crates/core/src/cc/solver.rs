use ndarray::{Array2, Array4, IxDyn};

use super::equations::{self, Blocks, Leaves};
use super::system::SpinOrbitalSystem;
use crate::error::{Error, Result};
use crate::gauge::{antisymmetrize, AmplitudeSet, Gauge};
use crate::linalg::Diis;
use crate::tensor::{Tape, Tensor};

const DENOMINATOR_GUARD: f64 = 1e-8;
const BLOWUP: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcOptions {
    pub max_iter: usize,
    /// Residual max-norm threshold.
    pub tol: f64,
    pub diis_depth: usize,
}

impl Default for CcOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-10,
            diis_depth: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcResult {
    pub amps: AmplitudeSet,
    pub e_ref: f64,
    pub e_corr: f64,
    pub e_total: f64,
    pub t_residual_norm: f64,
    pub lambda_residual_norm: f64,
    pub n_iter_t: usize,
    pub n_iter_lambda: usize,
    pub lambda_solved: bool,
}

fn max_norm(x: &Tensor) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

struct Denominators {
    d1: Array2<f64>,
    d2: Array4<f64>,
}

fn denominators(sys: &SpinOrbitalSystem) -> Result<Denominators> {
    let (o, v) = (sys.n_occ, sys.n_virt);
    let e = &sys.eps;
    let d1 = Array2::from_shape_fn((o, v), |(i, a)| e[i] - e[o + a]);
    let d2 = Array4::from_shape_fn((o, o, v, v), |(i, j, a, b)| e[i] + e[j] - e[o + a] - e[o + b]);
    let smallest = d1.iter().chain(&d2).fold(f64::INFINITY, |m, x| m.min(x.abs()));
    if smallest < DENOMINATOR_GUARD {
        return Err(Error::DegenerateDenominator(smallest));
    }
    Ok(Denominators { d1, d2 })
}

fn mp2_guess(sys: &SpinOrbitalSystem, d: &Denominators) -> Array4<f64> {
    let o = sys.n_occ;
    Array4::from_shape_fn(d.d2.dim(), |(i, j, a, b)| {
        sys.eri[[i, j, o + a, o + b]] / d.d2[[i, j, a, b]]
    })
}

/// Canonical first-order doubles `⟨ij||ab⟩ / (ε_i+ε_j−ε_a−ε_b)` and
/// `E_MP2 = ¼ Σ t ⟨ij||ab⟩`.
pub fn mp2_amplitudes(sys: &SpinOrbitalSystem) -> Result<(Array4<f64>, f64)> {
    if sys.max_offdiag_fock() > 1e-6 {
        return Err(Error::GaugeMismatch(format!(
            "MP2 amplitudes need a diagonal Fock matrix (max off-diagonal {:e})",
            sys.max_offdiag_fock()
        )));
    }
    let d = denominators(sys)?;
    let t2 = mp2_guess(sys, &d);
    let o = sys.n_occ;
    let e = t2
        .indexed_iter()
        .map(|((i, j, a, b), t)| 0.25 * t * sys.eri[[i, j, o + a, o + b]])
        .sum();
    Ok((t2, e))
}

/// First-order multipliers: `Λ1 = 0`, `Λ2 = T2`.
pub fn mp2_lambda(t2_mp2: &Array4<f64>) -> (Array2<f64>, Array4<f64>) {
    let (o, _, v, _) = t2_mp2.dim();
    (Array2::zeros((o, v)), t2_mp2.clone())
}

fn flatten(a: &Array2<f64>, b: &Array4<f64>) -> Vec<f64> {
    a.iter().chain(b.iter()).copied().collect()
}

fn unflatten(x: &[f64], d1: (usize, usize), d2: (usize, usize, usize, usize)) -> (Array2<f64>, Array4<f64>) {
    let n1 = d1.0 * d1.1;
    (
        Array2::from_shape_vec(d1, x[..n1].to_vec()).expect("shape"),
        Array4::from_shape_vec(d2, x[n1..].to_vec()).expect("shape"),
    )
}

fn as2(t: Tensor) -> Array2<f64> {
    t.into_dimensionality().expect("rank 2")
}

fn as4(t: Tensor) -> Array4<f64> {
    t.into_dimensionality().expect("rank 4")
}

fn check_blowup(t1: &Array2<f64>, t2: &Array4<f64>) -> Result<()> {
    let m = t1.iter().chain(t2).fold(0.0_f64, |m, x| m.max(x.abs()));
    if !m.is_finite() {
        return Err(Error::NotFinite("CC amplitudes".into()));
    }
    if m > BLOWUP {
        return Err(Error::Divergence(m));
    }
    Ok(())
}

/// Correlation energy and residuals at the given amplitudes.
pub fn ccsd_residuals(sys: &SpinOrbitalSystem, t1: &Array2<f64>, t2: &Array4<f64>) -> (f64, Array2<f64>, Array4<f64>) {
    let (e, r1, r2) = equations::evaluate(sys, &t1.clone().into_dyn(), &t2.clone().into_dyn());
    (e, as2(r1), as4(r2))
}

/// Jacobi iterations on the CCSD residuals from the MP2 guess with DIIS on
/// the amplitude updates.
pub fn solve_ccsd(sys: &SpinOrbitalSystem, opts: &CcOptions) -> Result<CcResult> {
    let d = denominators(sys)?;
    let (o, v) = (sys.n_occ, sys.n_virt);
    let mut t1 = Array2::zeros((o, v));
    let mut t2 = mp2_guess(sys, &d);
    let mut diis = Diis::new(opts.diis_depth);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (e, r1, r2) = ccsd_residuals(sys, &t1, &t2);
        residual = max_norm(&r1.clone().into_dyn()).max(max_norm(&r2.clone().into_dyn()));
        if !residual.is_finite() {
            return Err(Error::NotFinite("CCSD residual".into()));
        }
        if residual < opts.tol {
            let mut amps = AmplitudeSet::zeros(o, v, Gauge::Canonical, "");
            amps.t1 = t1;
            amps.t2 = t2;
            return Ok(CcResult {
                amps,
                e_ref: sys.e_ref,
                e_corr: e,
                e_total: sys.e_ref + e,
                t_residual_norm: residual,
                lambda_residual_norm: f64::NAN,
                n_iter_t: it,
                n_iter_lambda: 0,
                lambda_solved: false,
            });
        }
        let s1 = &r1 / &d.d1;
        let s2 = &r2 / &d.d2;
        let new = flatten(&(&t1 + &s1), &(&t2 + &s2));
        let x = diis.extrapolate(new, flatten(&s1, &s2));
        let (a, b) = unflatten(&x, t1.dim(), t2.dim());
        t1 = a;
        t2 = antisymmetrize(&b);
        check_blowup(&t1, &t2)?;
    }
    Err(Error::NotConverged {
        what: "CCSD",
        iterations: opts.max_iter,
        residual,
    })
}

pub(crate) fn seed(x: &Tensor, scale: f64) -> Tensor {
    x * scale
}

/// Stationarity conditions `∂L/∂t_μ` with respect to singles and unique doubles.
pub fn lambda_residuals(
    sys: &SpinOrbitalSystem,
    t1: &Array2<f64>,
    t2: &Array4<f64>,
    l1: &Array2<f64>,
    l2: &Array4<f64>,
) -> (Array2<f64>, Array4<f64>) {
    let mut tape = Tape::new();
    let x = Leaves::record(&mut tape, Blocks::new(sys));
    let v1 = tape.leaf(t1.clone().into_dyn());
    let v2 = tape.leaf(t2.clone().into_dyn());
    let eq = equations::record(&mut tape, &x, v1, v2);
    let one = Tensor::from_elem(IxDyn(&[]), 1.0);
    let s1 = l1.clone().into_dyn();
    let s2 = seed(&l2.clone().into_dyn(), 0.25);
    let g = tape.backward(&[(eq.e_corr, &one), (eq.r1, &s1), (eq.r2, &s2)]);
    let g1 = as2(g.get(v1, t1.shape()));
    let g2 = as4(g.get(v2, t2.shape()));
    // derivative with respect to a unique doubles amplitude
    (g1, antisymmetrize(&g2) * 4.0)
}

/// Solves the linear Λ equations from `Λ = T`, DIIS-accelerated.
pub fn solve_lambda(sys: &SpinOrbitalSystem, cc: &CcResult, opts: &CcOptions) -> Result<CcResult> {
    if !(cc.t_residual_norm < opts.tol.max(1e-6)) {
        return Err(Error::Invalid("Λ equations need converged T amplitudes".into()));
    }
    let d = denominators(sys)?;
    let t1 = &cc.amps.t1;
    let t2 = &cc.amps.t2;
    let mut l1 = t1.clone();
    let mut l2 = t2.clone();
    let mut diis = Diis::new(opts.diis_depth);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        let (g1, g2) = lambda_residuals(sys, t1, t2, &l1, &l2);
        residual = g1.iter().chain(&g2).fold(0.0_f64, |m, x| m.max(x.abs()));
        if !residual.is_finite() {
            return Err(Error::NotFinite("Λ residual".into()));
        }
        if residual < opts.tol {
            let mut out = cc.clone();
            out.amps.l1 = l1;
            out.amps.l2 = l2;
            out.lambda_residual_norm = residual;
            out.n_iter_lambda = it;
            out.lambda_solved = true;
            return Ok(out);
        }
        let s1 = &g1 / &d.d1;
        let s2 = &g2 / &d.d2;
        let new = flatten(&(&l1 + &s1), &(&l2 + &s2));
        let x = diis.extrapolate(new, flatten(&s1, &s2));
        let (a, b) = unflatten(&x, l1.dim(), l2.dim());
        l1 = a;
        l2 = antisymmetrize(&b);
    }
    Err(Error::NotConverged {
        what: "Λ",
        iterations: opts.max_iter,
        residual,
    })
}

/// `L = E_ref + E_corr(T) + Σ λ1 R1 + ¼ Σ λ2 R2`.
pub fn lagrangian_value(sys: &SpinOrbitalSystem, amps: &AmplitudeSet) -> f64 {
    let (e, r1, r2) = ccsd_residuals(sys, &amps.t1, &amps.t2);
    sys.e_ref + e + (&amps.l1 * &r1).sum() + 0.25 * (&amps.l2 * &r2).sum()
}
