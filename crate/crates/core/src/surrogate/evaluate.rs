use rayon::prelude::*;

use super::features::{build_features, FeatureConfig, Features};
use super::model::SurrogateModel;
use crate::cc::ccsd_residuals;
use crate::chem::Molecule;
use crate::datastore::DatasetRecord;
use crate::error::Result;
use crate::gauge::{localized_gauge, transform_amplitudes, AmplitudeSet, Direction};
use crate::pipeline::{prepare, PipelineOptions};
use crate::response::{cc_rdm1, forces_from_energy, system_dipole};

pub const CSV_HEADER: &str = "molecule_id,e_mae,f_mae,dip_mae,t1_mae,t2_mae,l1_mae,l2_mae";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Compare forces when the record carries force labels.
    pub forces: bool,
    pub force_step: f64,
    pub pipeline: PipelineOptions,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            forces: true,
            force_step: 1e-3,
            pipeline: PipelineOptions::default(),
        }
    }
}

/// Absolute errors of one molecule in atomic units; `f_mae` is `None`
/// without force labels.
#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeMetrics {
    pub molecule_id: String,
    pub e_mae: f64,
    pub f_mae: Option<f64>,
    pub dip_mae: f64,
    pub t1_mae: f64,
    pub t2_mae: f64,
    pub l1_mae: f64,
    pub l2_mae: f64,
    pub e_corr_pred: f64,
    pub e_corr_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Evaluation {
    pub rows: Vec<MoleculeMetrics>,
    /// `(molecule_id, reason)` for records that could not be reconstructed.
    pub failures: Vec<(String, String)>,
}

fn mae<'a>(a: impl IntoIterator<Item = &'a f64>, b: impl IntoIterator<Item = &'a f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for (x, y) in a.into_iter().zip(b) {
        s += (x - y).abs();
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn mean_of(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.9e}")
    } else {
        "nan".into()
    }
}

impl Evaluation {
    /// Mean over molecules; `f_mae` averages only molecules with force labels.
    pub fn aggregate(&self) -> MoleculeMetrics {
        let r = &self.rows;
        let forces: Vec<f64> = r.iter().filter_map(|m| m.f_mae).collect();
        MoleculeMetrics {
            molecule_id: "mean".into(),
            e_mae: mean_of(r.iter().map(|m| m.e_mae)),
            f_mae: (!forces.is_empty()).then(|| mean_of(forces.into_iter())),
            dip_mae: mean_of(r.iter().map(|m| m.dip_mae)),
            t1_mae: mean_of(r.iter().map(|m| m.t1_mae)),
            t2_mae: mean_of(r.iter().map(|m| m.t2_mae)),
            l1_mae: mean_of(r.iter().map(|m| m.l1_mae)),
            l2_mae: mean_of(r.iter().map(|m| m.l2_mae)),
            e_corr_pred: mean_of(r.iter().map(|m| m.e_corr_pred)),
            e_corr_ref: mean_of(r.iter().map(|m| m.e_corr_ref)),
        }
    }

    /// One row per molecule plus a final `mean` row.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for m in self.rows.iter().chain(std::iter::once(&self.aggregate())) {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                m.molecule_id,
                fmt(m.e_mae),
                fmt(m.f_mae.unwrap_or(f64::NAN)),
                fmt(m.dip_mae),
                fmt(m.t1_mae),
                fmt(m.t2_mae),
                fmt(m.l1_mae),
                fmt(m.l2_mae)
            ));
        }
        out
    }
}

/// Anything that maps localized-orbital features to localized amplitudes.
pub trait Predictor: Sync {
    fn feature_config(&self) -> &FeatureConfig;
    fn predict_amplitudes(&self, f: &Features) -> Result<AmplitudeSet>;
}

impl Predictor for SurrogateModel {
    fn feature_config(&self) -> &FeatureConfig {
        &self.config
    }

    fn predict_amplitudes(&self, f: &Features) -> Result<AmplitudeSet> {
        self.predict(f)
    }
}

/// `E_hf + E_corr` from predicted amplitudes at a new geometry.
pub fn surrogate_energy<P: Predictor>(model: &P, mol: &Molecule, basis: &str, opts: &PipelineOptions) -> Result<f64> {
    let prep = prepare(mol, basis, &opts.scf)?;
    let gauge = localized_gauge(&prep.scf, &prep.ints, mol, &opts.localize)?;
    let feats = build_features(&prep.scf, &gauge, &prep.ints, model.feature_config())?;
    let loc = model.predict_amplitudes(&feats)?;
    let can = transform_amplitudes(&loc, &gauge, Direction::ToCanonical)?;
    Ok(prep.scf.e_hf + ccsd_residuals(&prep.sys, &can.t1, &can.t2).0)
}

fn evaluate_one<P: Predictor>(model: &P, rec: &DatasetRecord, opts: &EvalOptions) -> Result<MoleculeMetrics> {
    let l = rec.labels()?;
    let mol = rec.molecule()?;
    let feats = rec.features(model.feature_config())?;
    let loc = model.predict_amplitudes(&feats)?;
    let can = transform_amplitudes(&loc, &l.gauge, Direction::ToCanonical)?;
    let sys = l.system(&mol);
    let e_corr = ccsd_residuals(&sys, &can.t1, &can.t2).0;
    let dip = system_dipole(&cc_rdm1(&can)?, &sys)?;
    let f_mae = match (&l.forces, opts.forces) {
        (Some(reference), true) => {
            let f = forces_from_energy(&mol, opts.force_step, |m| surrogate_energy(model, m, &rec.basis, &opts.pipeline))?;
            Some(mae(f.iter().flatten(), reference.iter().flatten()))
        }
        _ => None,
    };
    let r: &AmplitudeSet = &l.localized;
    Ok(MoleculeMetrics {
        molecule_id: rec.molecule_id.clone(),
        e_mae: (e_corr - l.e_corr).abs(),
        f_mae,
        dip_mae: mae(&dip, &l.dipole),
        t1_mae: mae(&loc.t1, &r.t1),
        t2_mae: mae(&loc.t2, &r.t2),
        l1_mae: mae(&loc.l1, &r.l1),
        l2_mae: mae(&loc.l2, &r.l2),
        e_corr_pred: e_corr,
        e_corr_ref: l.e_corr,
    })
}

/// Reconstructs energy, dipole and forces from predicted amplitudes through
/// the canonical gauge. Failed records and reconstruction errors are listed
/// in `failures` instead of aborting.
pub fn evaluate<P: Predictor>(model: &P, records: &[DatasetRecord], opts: &EvalOptions) -> Evaluation {
    let results: Vec<(String, Result<MoleculeMetrics>)> = records
        .par_iter()
        .map(|r| (r.molecule_id.clone(), evaluate_one(model, r, opts)))
        .collect();
    let mut ev = Evaluation::default();
    for (id, res) in results {
        match res {
            Ok(m) => ev.rows.push(m),
            Err(e) => ev.failures.push((id, e.to_string())),
        }
    }
    ev
}
