//! Wall-clock comparison of the CCSD+Λ solve against surrogate inference on
//! hydrogen chains.
//!
//! Both timings start from the same converged RHF reference and its canonical
//! MO integrals. The solver leg runs CCSD followed by the Λ equations; the
//! surrogate leg localizes the orbitals, builds the features and evaluates all
//! four readouts.

use std::time::Instant;

use crate::cc::{solve_ccsd, solve_lambda};
use crate::chem::{Atom, Molecule};
use crate::error::{Error, Result};
use crate::gauge::localized_gauge;
use crate::pipeline::{prepare, PipelineOptions};
use crate::surrogate::{features_from_mo, SurrogateModel};

pub const CSV_HEADER: &str = "system,n_orbitals,t_solver_s,t_surrogate_s";

/// Bond lengths of the dimerized chains, in bohr.
pub const CHAIN_BONDS: (f64, f64) = (1.4, 2.0);

/// Each timing sample repeats its leg until this much wall time has passed
/// and reports the mean per call.
pub const MIN_SAMPLE_S: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub system: String,
    /// Spatial orbitals.
    pub n_orbitals: usize,
    pub t_solver_s: f64,
    pub t_surrogate_s: f64,
}

impl BenchRow {
    pub fn ratio(&self) -> f64 {
        self.t_solver_s / self.t_surrogate_s
    }
}

/// Linear H_n with alternating short and long bonds along z.
pub fn h_chain(n: usize) -> Result<Molecule> {
    if n == 0 {
        return Err(Error::Invalid("empty chain".into()));
    }
    let mut z = 0.0;
    let atoms = (0..n)
        .map(|k| {
            let a = Atom { z: 1, pos: [0.0, 0.0, z] };
            z += if k % 2 == 0 { CHAIN_BONDS.0 } else { CHAIN_BONDS.1 };
            a
        })
        .collect();
    Ok(Molecule::new(atoms, 0)?.with_id(format!("H{n}")))
}

fn sample<F: FnMut() -> Result<()>>(mut leg: F) -> Result<f64> {
    let start = Instant::now();
    let mut calls = 0u32;
    loop {
        leg()?;
        calls += 1;
        let t = start.elapsed().as_secs_f64();
        if t >= MIN_SAMPLE_S {
            return Ok(t / calls as f64);
        }
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

/// Times `sizes` chains with `repeats` samples per leg and reports the medians.
pub fn run_bench(sizes: &[usize], model: &SurrogateModel, repeats: usize, opts: &PipelineOptions) -> Result<Vec<BenchRow>> {
    if repeats == 0 {
        return Err(Error::Invalid("at least one repeat is needed".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mol = h_chain(n)?;
        let prep = prepare(&mol, "sto-3g", &opts.scf)?;
        let mut solver = Vec::with_capacity(repeats);
        let mut surrogate = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            solver.push(sample(|| {
                let cc = solve_ccsd(&prep.sys, &opts.cc)?;
                solve_lambda(&prep.sys, &cc, &opts.cc).map(drop)
            })?);
            surrogate.push(sample(|| {
                let gauge = localized_gauge(&prep.scf, &prep.ints, &mol, &opts.localize)?;
                let f = features_from_mo(&prep.mo, prep.scf.n_occ, &gauge, &model.config)?;
                model.predict(&f).map(drop)
            })?);
        }
        rows.push(BenchRow {
            system: mol.id.clone(),
            n_orbitals: prep.scf.n_occ + prep.scf.n_virt,
            t_solver_s: median(solver),
            t_surrogate_s: median(surrogate),
        });
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in rows {
        s.push_str(&format!("{},{},{:.6e},{:.6e}\n", r.system, r.n_orbitals, r.t_solver_s, r.t_surrogate_s));
    }
    s
}

/// True when the solver/surrogate ratio strictly increases along `rows`.
pub fn ratio_increasing(rows: &[BenchRow]) -> bool {
    rows.windows(2).all(|w| w[1].ratio() > w[0].ratio())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_geometry() {
        let m = h_chain(4).unwrap();
        let z: Vec<f64> = m.atoms.iter().map(|a| a.pos[2]).collect();
        assert_eq!(z, vec![0.0, 1.4, 3.4, 4.8]);
        assert!(matches!(h_chain(3), Err(Error::OddElectrons(3))));
    }

    #[test]
    fn median_and_ratio() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        let row = |t: f64| BenchRow {
            system: "x".into(),
            n_orbitals: 2,
            t_solver_s: t,
            t_surrogate_s: 1.0,
        };
        assert!(ratio_increasing(&[row(1.0), row(2.0), row(5.0)]));
        assert!(!ratio_increasing(&[row(1.0), row(3.0), row(2.0)]));
        assert_eq!(to_csv(&[row(2.0)]), format!("{CSV_HEADER}\nx,2,2.000000e0,1.000000e0\n"));
    }
}
