use std::time::{SystemTime, UNIX_EPOCH};

use ndarray::{Array1, Array4};
use rayon::prelude::*;

use super::container::Container;
use super::persist::{get_points, join, join_list, parse_list, put_points, Persist};
use crate::cc::{ccsd_residuals, mp2_amplitudes, SpinOrbitalSystem};
use crate::chem::{Atom, Geometry, Molecule};
use crate::error::{Error, Result};
use crate::gauge::{transform_amplitudes, AmplitudeSet, Direction, GaugeSpec};
use crate::pipeline::{prepare, solve_prepared, Method, PipelineOptions};
use crate::response::{cc_rdm1, forces_fd, system_dipole};
use crate::scf::{spin_orbital_expand, MoIntegrals};
use crate::surrogate::{features_from_mo, FeatureConfig, Features, TrainingExample};

/// Tolerance of the stored-label gauge round trip checked on load.
pub const ROUND_TRIP_TOL: f64 = 1e-12;
/// Tolerance of the stored correlation energy against its amplitudes.
pub const ENERGY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum RecordStatus {
    Converged,
    Failed(String),
}

/// Everything the pipeline produced for one converged geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub e_hf: f64,
    /// Canonical spatial orbital energies.
    pub eps: Array1<f64>,
    /// Doubly occupied spatial orbitals.
    pub n_occ: usize,
    pub gauge: GaugeSpec,
    pub canonical: AmplitudeSet,
    pub localized: AmplitudeSet,
    /// Spin-orbital MP2 doubles in both gauges.
    pub mp2_canonical: Array4<f64>,
    pub mp2_localized: Array4<f64>,
    pub e_mp2: f64,
    pub e_corr: f64,
    pub e_total: f64,
    pub dipole: [f64; 3],
    pub forces: Option<Vec<[f64; 3]>>,
    /// Canonical-orbital integrals, kept so energies and features rebuild without SCF.
    pub mo: MoIntegrals,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub molecule_id: String,
    pub geometry: Geometry,
    pub basis: String,
    pub status: RecordStatus,
    pub labels: Option<Labels>,
    pub provenance: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetOptions {
    pub pipeline: PipelineOptions,
    /// Also label CCSD forces by central differences (12·n_atoms extra solves).
    pub forces: bool,
    pub force_step: f64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            pipeline: PipelineOptions::default(),
            forces: false,
            force_step: 1e-3,
        }
    }
}

fn failure_reason(e: &Error) -> String {
    let category = match e {
        Error::OddElectrons(_)
        | Error::UnknownElement(_)
        | Error::UnsupportedBasis(_)
        | Error::UnsupportedElement { .. }
        | Error::Invalid(_) => "precondition",
        Error::NotConverged { .. } | Error::Divergence(_) | Error::NotFinite(_) => "convergence",
        _ => "solver",
    };
    format!("{category}: {e}")
}

fn label(mol: &Molecule, basis: &str, opts: &DatasetOptions) -> Result<Labels> {
    let prep = prepare(mol, basis, &opts.pipeline.scf)?;
    let (mp2, e_mp2) = mp2_amplitudes(&prep.sys)?;
    let solved = solve_prepared(prep, true, &opts.pipeline)?;
    let gauge = solved
        .gauge
        .clone()
        .ok_or_else(|| Error::Invalid("no localized gauge (multipole integrals missing)".into()))?;
    let localized = solved.localized.clone().expect("gauge implies localized labels");
    let mp2_amps = AmplitudeSet {
        t2: mp2.clone(),
        ..AmplitudeSet::zeros(mp2.dim().0, mp2.dim().2, crate::gauge::Gauge::Canonical, gauge.parent_id.clone())
    };
    let mp2_localized = transform_amplitudes(&mp2_amps, &gauge, Direction::ToLocalized)?.t2;
    let dipole = system_dipole(&cc_rdm1(&solved.cc.amps)?, &solved.prep.sys)?;
    let forces = if opts.forces {
        Some(forces_fd(mol, basis, Method::Ccsd, opts.force_step, &opts.pipeline)?)
    } else {
        None
    };
    Ok(Labels {
        e_hf: solved.prep.scf.e_hf,
        eps: solved.prep.scf.eps.clone(),
        n_occ: solved.prep.scf.n_occ,
        gauge,
        canonical: solved.cc.amps.clone(),
        localized,
        mp2_canonical: mp2,
        mp2_localized,
        e_mp2,
        e_corr: solved.cc.e_corr,
        e_total: solved.cc.e_total,
        dipole,
        forces,
        mo: solved.prep.mo.clone(),
    })
}

fn provenance(basis: &str, opts: &DatasetOptions) -> Vec<(String, String)> {
    let p = &opts.pipeline;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    vec![
        ("basis".into(), basis.to_string()),
        ("scf_e_tol".into(), format!("{:e}", p.scf.e_tol)),
        ("scf_d_tol".into(), format!("{:e}", p.scf.d_tol)),
        ("cc_tol".into(), format!("{:e}", p.cc.tol)),
        ("localize_tol".into(), format!("{:e}", p.localize.tol)),
        ("force_step".into(), if opts.forces { format!("{:e}", opts.force_step) } else { "none".into() }),
        ("code_version".into(), env!("CARGO_PKG_VERSION").to_string()),
        ("timestamp".into(), stamp.to_string()),
    ]
}

/// Runs HF → localize → MP2 → CCSD → Λ on every geometry in parallel.
/// Records keep the input order; unsolvable geometries become failed records.
pub fn generate_dataset(geometries: &[Geometry], basis: &str, opts: &DatasetOptions) -> Result<Vec<DatasetRecord>> {
    if geometries.is_empty() {
        return Err(Error::Invalid("empty geometry list".into()));
    }
    Ok(geometries
        .par_iter()
        .map(|g| {
            let outcome = g.molecule().and_then(|m| label(&m, basis, opts));
            let (status, labels) = match outcome {
                Ok(l) => (RecordStatus::Converged, Some(l)),
                Err(e) => (RecordStatus::Failed(failure_reason(&e)), None),
            };
            DatasetRecord {
                molecule_id: g.id.clone(),
                geometry: g.clone(),
                basis: basis.to_string(),
                status,
                labels,
                provenance: provenance(basis, opts),
            }
        })
        .collect())
}

impl Labels {
    /// Canonical spin-orbital Hamiltonian with dipole integrals and nuclear dipole.
    pub fn system(&self, mol: &Molecule) -> SpinOrbitalSystem {
        let mut sys = spin_orbital_expand(&self.mo, self.n_occ);
        sys.nuc_dipole = mol.nuclear_dipole(self.mo.origin);
        sys
    }
}

impl DatasetRecord {
    pub fn is_converged(&self) -> bool {
        self.status == RecordStatus::Converged
    }

    pub fn labels(&self) -> Result<&Labels> {
        self.labels.as_ref().ok_or_else(|| match &self.status {
            RecordStatus::Failed(r) => Error::Invalid(format!("record {} failed: {r}", self.molecule_id)),
            RecordStatus::Converged => Error::Invariant(format!("record {} has no labels", self.molecule_id)),
        })
    }

    pub fn molecule(&self) -> Result<Molecule> {
        self.geometry.molecule()
    }

    pub fn features(&self, cfg: &FeatureConfig) -> Result<Features> {
        let l = self.labels()?;
        features_from_mo(&l.mo, l.n_occ, &l.gauge, cfg)
    }

    pub fn training_example(&self, cfg: &FeatureConfig) -> Result<TrainingExample> {
        TrainingExample::new(self.molecule_id.clone(), self.features(cfg)?, self.labels()?.localized.clone())
    }

    /// Replaces the timestamp, for byte-level comparisons of regenerated data.
    pub fn with_timestamp(mut self, stamp: &str) -> Self {
        for (k, v) in &mut self.provenance {
            if k == "timestamp" {
                *v = stamp.to_string();
            }
        }
        self
    }

    fn check(&self) -> Result<()> {
        match (&self.status, &self.labels) {
            (RecordStatus::Converged, Some(l)) => l.check(&self.molecule_id),
            (RecordStatus::Failed(_), None) => Ok(()),
            _ => Err(Error::Invariant(format!(
                "record {} status and labels disagree",
                self.molecule_id
            ))),
        }
    }
}

impl Labels {
    fn check(&self, id: &str) -> Result<()> {
        let fail = |what: String| Err(Error::Invariant(format!("record {id}: {what}")));
        self.canonical.validate()?;
        self.localized.validate()?;
        self.gauge.validate()?;
        self.mo.validate()?;
        if self.canonical.basis_id != self.gauge.parent_id {
            return fail("canonical labels and gauge refer to different orbitals".into());
        }
        let back = transform_amplitudes(&self.canonical, &self.gauge, Direction::ToLocalized)?;
        let d = back.max_abs_diff(&self.localized);
        if d > ROUND_TRIP_TOL || back.basis_id != self.localized.basis_id {
            return fail(format!("localized labels differ from transformed canonical labels by {d:.2e}"));
        }
        let sys = spin_orbital_expand(&self.mo, self.n_occ);
        if sys.n_occ != self.canonical.n_occ() || sys.n_virt != self.canonical.n_virt() {
            return fail("integrals and amplitudes describe different spaces".into());
        }
        let (e, _, _) = ccsd_residuals(&sys, &self.canonical.t1, &self.canonical.t2);
        if (e - self.e_corr).abs() > ENERGY_TOL {
            return fail(format!("stored E_corr {} but amplitudes give {e}", self.e_corr));
        }
        if (self.e_hf + self.e_corr - self.e_total).abs() > ENERGY_TOL {
            return fail("E_hf + E_corr differs from E_total".into());
        }
        Ok(())
    }
}

fn write_record(r: &DatasetRecord, c: &mut Container, p: &str) {
    c.set(join(p, "id"), &r.molecule_id);
    c.set(join(p, "basis"), &r.basis);
    c.set(join(p, "charge"), r.geometry.charge);
    let z: Vec<u32> = r.geometry.atoms.iter().map(|a| a.z).collect();
    c.set(join(p, "z"), join_list(&z));
    let pos: Vec<[f64; 3]> = r.geometry.atoms.iter().map(|a| a.pos).collect();
    put_points(c, join(p, "positions"), &pos);
    match &r.status {
        RecordStatus::Converged => c.set(join(p, "status"), "converged"),
        RecordStatus::Failed(why) => {
            c.set(join(p, "status"), "failed");
            c.set(join(p, "reason"), why);
        }
    }
    c.set(join(p, "n_provenance"), r.provenance.len());
    for (k, (key, value)) in r.provenance.iter().enumerate() {
        c.set(join(p, &format!("provenance{k}.key")), key);
        c.set(join(p, &format!("provenance{k}.value")), value);
    }
    if let Some(l) = &r.labels {
        c.put_scalar(join(p, "e_hf"), l.e_hf);
        c.put_vec(join(p, "eps"), l.eps.as_slice().expect("contiguous"));
        c.set(join(p, "n_occ"), l.n_occ);
        l.gauge.write(c, &join(p, "gauge."));
        l.canonical.write(c, &join(p, "canonical."));
        l.localized.write(c, &join(p, "localized."));
        c.put(join(p, "mp2_canonical"), l.mp2_canonical.clone().into_dyn());
        c.put(join(p, "mp2_localized"), l.mp2_localized.clone().into_dyn());
        c.put_scalar(join(p, "e_mp2"), l.e_mp2);
        c.put_scalar(join(p, "e_corr"), l.e_corr);
        c.put_scalar(join(p, "e_total"), l.e_total);
        c.put_vec(join(p, "dipole"), &l.dipole);
        if let Some(f) = &l.forces {
            put_points(c, join(p, "forces"), f);
        }
        l.mo.write(c, &join(p, "mo."));
    }
}

fn read_record(c: &Container, p: &str) -> Result<DatasetRecord> {
    let z: Vec<u32> = parse_list(c, &join(p, "z"))?;
    let pos = get_points(c, &join(p, "positions"))?;
    if z.len() != pos.len() {
        return Err(Error::Corrupt("atom count and positions disagree".into()));
    }
    let geometry = Geometry {
        id: c.get(&join(p, "id"))?.to_string(),
        atoms: z.into_iter().zip(pos).map(|(z, pos)| Atom { z, pos }).collect(),
        charge: c.parse(&join(p, "charge"))?,
    };
    let status = match c.get(&join(p, "status"))? {
        "converged" => RecordStatus::Converged,
        "failed" => RecordStatus::Failed(c.get(&join(p, "reason"))?.to_string()),
        other => return Err(Error::Corrupt(format!("unknown record status `{other}`"))),
    };
    let n: usize = c.parse(&join(p, "n_provenance"))?;
    let provenance = (0..n)
        .map(|k| {
            Ok((
                c.get(&join(p, &format!("provenance{k}.key")))?.to_string(),
                c.get(&join(p, &format!("provenance{k}.value")))?.to_string(),
            ))
        })
        .collect::<Result<_>>()?;
    let labels = if status == RecordStatus::Converged {
        let forces_key = join(p, "forces");
        Some(Labels {
            e_hf: c.scalar(&join(p, "e_hf"))?,
            eps: Array1::from(c.vec(&join(p, "eps"))?),
            n_occ: c.parse(&join(p, "n_occ"))?,
            gauge: GaugeSpec::read(c, &join(p, "gauge."))?,
            canonical: AmplitudeSet::read(c, &join(p, "canonical."))?,
            localized: AmplitudeSet::read(c, &join(p, "localized."))?,
            mp2_canonical: c.array4(&join(p, "mp2_canonical"))?,
            mp2_localized: c.array4(&join(p, "mp2_localized"))?,
            e_mp2: c.scalar(&join(p, "e_mp2"))?,
            e_corr: c.scalar(&join(p, "e_corr"))?,
            e_total: c.scalar(&join(p, "e_total"))?,
            dipole: super::persist::get3(c, &join(p, "dipole"))?,
            forces: if c.has_tensor(&forces_key) { Some(get_points(c, &forces_key)?) } else { None },
            mo: MoIntegrals::read(c, &join(p, "mo."))?,
        })
    } else {
        None
    };
    Ok(DatasetRecord {
        molecule_id: geometry.id.clone(),
        basis: c.get(&join(p, "basis"))?.to_string(),
        geometry,
        status,
        labels,
        provenance,
    })
}

impl Persist for DatasetRecord {
    const KIND: &'static str = "record";

    fn write(&self, c: &mut Container, p: &str) {
        write_record(self, c, p);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        read_record(c, p)
    }

    fn validate(&self) -> Result<()> {
        self.check()
    }
}

impl Persist for Vec<DatasetRecord> {
    const KIND: &'static str = "dataset";

    fn write(&self, c: &mut Container, p: &str) {
        c.set(join(p, "n_records"), self.len());
        for (k, r) in self.iter().enumerate() {
            write_record(r, c, &join(p, &format!("r{k}.")));
        }
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        let n: usize = c.parse(&join(p, "n_records"))?;
        (0..n).map(|k| read_record(c, &join(p, &format!("r{k}.")))).collect()
    }

    fn validate(&self) -> Result<()> {
        self.par_iter().try_for_each(DatasetRecord::check)
    }
}
