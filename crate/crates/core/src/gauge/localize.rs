use ndarray::{s, Array2};

use crate::chem::IntegralSet;
use crate::error::{Error, Result};
use crate::scf::ScfResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitalSpace {
    Occupied,
    Virtual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizeOptions {
    /// Converged once the best single-rotation gain falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LocalizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_sweeps: 500,
        }
    }
}

/// Foster–Boys rotation of one orbital space.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizedBlock {
    pub u: Array2<f64>,
    /// Absolute centroids `⟨r⟩` in bohr.
    pub centroids: Vec<[f64; 3]>,
    /// `⟨r²⟩ − |⟨r⟩|²` in bohr².
    pub spreads: Vec<f64>,
    /// Boys objective after every sweep, starting with the unrotated value.
    pub objective: Vec<f64>,
    pub converged: bool,
    pub sweeps: usize,
}

fn boys_objective(d: &[Array2<f64>; 3]) -> f64 {
    let n = d[0].nrows();
    (0..n).map(|p| d.iter().map(|m| m[[p, p]].powi(2)).sum::<f64>()).sum()
}

fn rotate(m: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    // columns, then rows: m ← Rᵀ m R with φ_p' = cφ_p + sφ_q, φ_q' = −sφ_p + cφ_q
    let n = m.nrows();
    for k in 0..n {
        let (a, b) = (m[[k, p]], m[[k, q]]);
        m[[k, p]] = c * a + s * b;
        m[[k, q]] = -s * a + c * b;
    }
    for k in 0..m.ncols() {
        let (a, b) = (m[[p, k]], m[[q, k]]);
        m[[p, k]] = c * a + s * b;
        m[[q, k]] = -s * a + c * b;
    }
}

fn rotate_columns(u: &mut Array2<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..u.nrows() {
        let (a, b) = (u[[k, p]], u[[k, q]]);
        u[[k, p]] = c * a + s * b;
        u[[k, q]] = -s * a + c * b;
    }
}

/// Maximizes `Σ_p |⟨r⟩_p|²` by 2×2 Jacobi sweeps in fixed `p < q` order.
pub fn localize(
    scf: &ScfResult,
    ints: &IntegralSet,
    space: OrbitalSpace,
    opts: &LocalizeOptions,
) -> Result<LocalizedBlock> {
    if !ints.has_multipoles {
        return Err(Error::Invalid("localization needs dipole integrals".into()));
    }
    let c = match space {
        OrbitalSpace::Occupied => scf.c.slice(s![.., ..scf.n_occ]).to_owned(),
        OrbitalSpace::Virtual => scf.c.slice(s![.., scf.n_occ..]).to_owned(),
    };
    let n = c.ncols();
    let mut d = ints.dipole.clone().map(|m| c.t().dot(&m).dot(&c));
    let mut u = Array2::eye(n);
    let mut objective = vec![boys_objective(&d)];
    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut best = 0.0_f64;
        for p in 0..n {
            for q in p + 1..n {
                let (mut a, mut b) = (0.0, 0.0);
                for m in &d {
                    let (dpq, diff) = (m[[p, q]], m[[p, p]] - m[[q, q]]);
                    a += dpq * dpq - 0.25 * diff * diff;
                    b += dpq * diff;
                }
                let r = a.hypot(b);
                let gain = a + r;
                if r < 1e-300 || gain <= 0.0 {
                    continue;
                }
                best = best.max(gain);
                let theta = 0.25 * b.atan2(-a);
                let (sn, cs) = theta.sin_cos();
                for m in d.iter_mut() {
                    rotate(m, p, q, cs, sn);
                }
                rotate_columns(&mut u, p, q, cs, sn);
            }
        }
        objective.push(boys_objective(&d));
        converged = best < opts.tol;
    }
    let origin = ints.origin;
    let centroids: Vec<[f64; 3]> = (0..n)
        .map(|p| [d[0][[p, p]] + origin[0], d[1][[p, p]] + origin[1], d[2][[p, p]] + origin[2]])
        .collect();
    let cl = c.dot(&u);
    let spreads = (0..n)
        .map(|p| {
            let col = cl.column(p);
            let r2: f64 = [0, 3, 5].iter().map(|&k| col.dot(&ints.quadrupole[k].dot(&col))).sum();
            let rel = [d[0][[p, p]], d[1][[p, p]], d[2][[p, p]]];
            r2 - rel.iter().map(|x| x * x).sum::<f64>()
        })
        .collect();
    Ok(LocalizedBlock {
        u,
        centroids,
        spreads,
        objective,
        converged,
        sweeps,
    })
}
