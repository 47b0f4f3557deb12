use std::path::Path;

use ndarray::{Array1, Array2};

use super::container::Container;
use crate::cc::CcResult;
use crate::chem::IntegralSet;
use crate::error::{Error, Result};
use crate::gauge::{AmplitudeSet, Frame, Gauge, GaugeSpec};
use crate::response::{Polarizability, PropertyReport};
use crate::scf::{MoIntegrals, ScfResult};
use crate::surrogate::{FeatureConfig, Head, Mode, Normalization, Perceptron, SurrogateModel};

/// A type stored under a name prefix inside a [`Container`].
pub trait Persist: Sized {
    const KIND: &'static str;
    fn write(&self, c: &mut Container, prefix: &str);
    fn read(c: &Container, prefix: &str) -> Result<Self>;
    /// Type invariants re-checked after every load.
    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

pub fn to_container<T: Persist>(x: &T) -> Container {
    let mut c = Container::new(T::KIND);
    x.write(&mut c, "");
    c
}

pub fn from_container<T: Persist>(c: &Container) -> Result<T> {
    c.expect_kind(T::KIND)?;
    let x = T::read(c, "")?;
    x.validate()?;
    Ok(x)
}

pub fn save<T: Persist>(x: &T, path: impl AsRef<Path>) -> Result<()> {
    to_container(x).save(path)
}

pub fn load<T: Persist>(path: impl AsRef<Path>) -> Result<T> {
    from_container(&Container::load(path)?)
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    format!("{prefix}{name}")
}

pub(crate) fn put2(c: &mut Container, key: String, m: &Array2<f64>) {
    c.put(key, m.clone().into_dyn());
}

pub(crate) fn put_points(c: &mut Container, key: String, pts: &[[f64; 3]]) {
    c.put(key, Array2::from_shape_fn((pts.len(), 3), |(i, k)| pts[i][k]).into_dyn());
}

pub(crate) fn get_points(c: &Container, key: &str) -> Result<Vec<[f64; 3]>> {
    let m = c.array2(key)?;
    if m.ncols() != 3 {
        return Err(Error::Corrupt(format!("`{key}` is not an n×3 table")));
    }
    Ok(m.rows().into_iter().map(|r| [r[0], r[1], r[2]]).collect())
}

pub(crate) fn get3(c: &Container, key: &str) -> Result<[f64; 3]> {
    let v = c.vec(key)?;
    v.try_into().map_err(|_| Error::Corrupt(format!("`{key}` is not a 3-vector")))
}

fn mat3(c: &Container, key: &str) -> Result<[[f64; 3]; 3]> {
    let pts = get_points(c, key)?;
    pts.try_into().map_err(|_| Error::Corrupt(format!("`{key}` is not 3×3")))
}

fn list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| x.parse().map_err(|_| Error::Corrupt(format!("bad entry `{x}` in {what}"))))
        .collect()
}

pub(crate) fn join_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_list<T: std::str::FromStr>(c: &Container, key: &str) -> Result<Vec<T>> {
    list(c.get(key)?, key)
}

impl Persist for AmplitudeSet {
    const KIND: &'static str = "amplitudes";

    fn write(&self, c: &mut Container, p: &str) {
        put2(c, join(p, "t1"), &self.t1);
        c.put(join(p, "t2"), self.t2.clone().into_dyn());
        put2(c, join(p, "l1"), &self.l1);
        c.put(join(p, "l2"), self.l2.clone().into_dyn());
        c.set(join(p, "gauge"), self.gauge.as_str());
        c.set(join(p, "basis_id"), &self.basis_id);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        Ok(Self {
            t1: c.array2(&join(p, "t1"))?,
            t2: c.array4(&join(p, "t2"))?,
            l1: c.array2(&join(p, "l1"))?,
            l2: c.array4(&join(p, "l2"))?,
            gauge: Gauge::parse(c.get(&join(p, "gauge"))?).map_err(|e| Error::Corrupt(e.to_string()))?,
            basis_id: c.get(&join(p, "basis_id"))?.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        AmplitudeSet::validate(self)
    }
}

impl Persist for GaugeSpec {
    const KIND: &'static str = "gauge";

    fn write(&self, c: &mut Container, p: &str) {
        put2(c, join(p, "u_occ"), &self.u_occ);
        put2(c, join(p, "u_virt"), &self.u_virt);
        c.put_vec(join(p, "phase"), &self.phase);
        c.set(join(p, "order"), join_list(&self.order));
        put_points(c, join(p, "centroids"), &self.centroids);
        c.put_vec(join(p, "spreads"), &self.spreads);
        put2(c, join(p, "c_canonical"), &self.c_canonical);
        c.put_vec(join(p, "frame_origin"), &self.frame.origin);
        put_points(c, join(p, "frame_axes"), &self.frame.axes);
        c.set(join(p, "converged"), self.converged);
        c.set(join(p, "sweeps"), self.sweeps);
        c.set(join(p, "canonicalized"), self.canonicalized);
        c.set(join(p, "parent_id"), &self.parent_id);
        c.set(join(p, "basis_id"), &self.basis_id);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        Ok(Self {
            u_occ: c.array2(&join(p, "u_occ"))?,
            u_virt: c.array2(&join(p, "u_virt"))?,
            phase: c.vec(&join(p, "phase"))?,
            order: parse_list(c, &join(p, "order"))?,
            centroids: get_points(c, &join(p, "centroids"))?,
            spreads: c.vec(&join(p, "spreads"))?,
            c_canonical: c.array2(&join(p, "c_canonical"))?,
            frame: Frame {
                origin: get3(c, &join(p, "frame_origin"))?,
                axes: mat3(c, &join(p, "frame_axes"))?,
            },
            converged: c.parse(&join(p, "converged"))?,
            sweeps: c.parse(&join(p, "sweeps"))?,
            canonicalized: c.parse(&join(p, "canonicalized"))?,
            parent_id: c.get(&join(p, "parent_id"))?.to_string(),
            basis_id: c.get(&join(p, "basis_id"))?.to_string(),
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_occ() + self.n_virt();
        if self.phase.len() != n || self.order.len() != n || self.centroids.len() != n || self.spreads.len() != n {
            return Err(Error::Invariant("gauge arrays disagree in length".into()));
        }
        for u in [&self.u_occ, &self.u_virt] {
            let e = (u.t().dot(u) - Array2::<f64>::eye(u.ncols())).iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            if e > 1e-10 {
                return Err(Error::Invariant(format!("gauge rotation not orthogonal ({e:.2e})")));
            }
        }
        if crate::gauge::matrix_id(&self.c_canonical) != self.parent_id
            || crate::gauge::matrix_id(&self.c_localized()) != self.basis_id
        {
            return Err(Error::Invariant("gauge identifiers do not match its coefficients".into()));
        }
        Ok(())
    }
}

impl Persist for MoIntegrals {
    const KIND: &'static str = "mo_integrals";

    fn write(&self, c: &mut Container, p: &str) {
        put2(c, join(p, "h"), &self.h);
        c.put(join(p, "eri"), self.eri.clone().into_dyn());
        put2(c, join(p, "overlap"), &self.overlap);
        c.put_scalar(join(p, "e_nuc"), self.e_nuc);
        c.put_vec(join(p, "origin"), &self.origin);
        if let Some(d) = &self.dipole {
            for (k, m) in d.iter().enumerate() {
                put2(c, join(p, &format!("dipole{k}")), m);
            }
        }
        if let Some(q) = &self.quadrupole {
            for (k, m) in q.iter().enumerate() {
                put2(c, join(p, &format!("quadrupole{k}")), m);
            }
        }
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        let h = c.array2(&join(p, "h"))?;
        let dipole = if c.has_tensor(&join(p, "dipole0")) {
            Some([0, 1, 2].map(|k| c.array2(&join(p, &format!("dipole{k}")))).into_iter().collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        let quadrupole = if c.has_tensor(&join(p, "quadrupole0")) {
            Some((0..6).map(|k| c.array2(&join(p, &format!("quadrupole{k}")))).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        Ok(Self {
            n_mo: h.nrows(),
            h,
            eri: c.array4(&join(p, "eri"))?,
            dipole: dipole.map(|d| d.try_into().expect("three components")),
            quadrupole: quadrupole.map(|q| q.try_into().expect("six components")),
            overlap: c.array2(&join(p, "overlap"))?,
            e_nuc: c.scalar(&join(p, "e_nuc"))?,
            origin: get3(c, &join(p, "origin"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_mo;
        if self.h.dim() != (n, n) || self.eri.dim() != (n, n, n, n) || self.overlap.dim() != (n, n) {
            return Err(Error::Invariant("MO integral shapes disagree".into()));
        }
        Ok(())
    }
}

impl Persist for IntegralSet {
    const KIND: &'static str = "integrals";

    fn write(&self, c: &mut Container, p: &str) {
        put2(c, join(p, "s"), &self.s);
        put2(c, join(p, "hcore"), &self.hcore);
        c.put(join(p, "eri"), self.eri.clone().into_dyn());
        for (k, m) in self.dipole.iter().enumerate() {
            put2(c, join(p, &format!("dipole{k}")), m);
        }
        for (k, m) in self.quadrupole.iter().enumerate() {
            put2(c, join(p, &format!("quadrupole{k}")), m);
        }
        c.put_scalar(join(p, "e_nuc"), self.e_nuc);
        c.put_vec(join(p, "origin"), &self.origin);
        c.set(join(p, "has_multipoles"), self.has_multipoles);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        let s = c.array2(&join(p, "s"))?;
        let dipole: Vec<Array2<f64>> = (0..3).map(|k| c.array2(&join(p, &format!("dipole{k}")))).collect::<Result<_>>()?;
        let quadrupole: Vec<Array2<f64>> = (0..6)
            .map(|k| c.array2(&join(p, &format!("quadrupole{k}"))))
            .collect::<Result<_>>()?;
        Ok(Self {
            n_ao: s.nrows(),
            s,
            hcore: c.array2(&join(p, "hcore"))?,
            eri: c.array4(&join(p, "eri"))?,
            dipole: dipole.try_into().expect("three components"),
            quadrupole: quadrupole.try_into().expect("six components"),
            e_nuc: c.scalar(&join(p, "e_nuc"))?,
            origin: get3(c, &join(p, "origin"))?,
            has_multipoles: c.parse(&join(p, "has_multipoles"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_ao;
        if self.hcore.dim() != (n, n) || self.eri.dim() != (n, n, n, n) {
            return Err(Error::Invariant("integral shapes disagree".into()));
        }
        let asym = (&self.s - &self.s.t()).iter().chain((&self.hcore - &self.hcore.t()).iter()).fold(0.0_f64, |m, x| m.max(x.abs()));
        if asym > 1e-12 {
            return Err(Error::Invariant("one-electron integrals are not symmetric".into()));
        }
        Ok(())
    }
}

impl Persist for ScfResult {
    const KIND: &'static str = "scf";

    fn write(&self, c: &mut Container, p: &str) {
        put2(c, join(p, "c"), &self.c);
        c.put_vec(join(p, "eps"), self.eps.as_slice().expect("contiguous"));
        c.put_scalar(join(p, "e_hf"), self.e_hf);
        put2(c, join(p, "density"), &self.density);
        c.set(join(p, "n_occ"), self.n_occ);
        c.set(join(p, "n_virt"), self.n_virt);
        c.set(join(p, "converged"), self.converged);
        c.set(join(p, "n_iter"), self.n_iter);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        Ok(Self {
            c: c.array2(&join(p, "c"))?,
            eps: Array1::from(c.vec(&join(p, "eps"))?),
            e_hf: c.scalar(&join(p, "e_hf"))?,
            n_occ: c.parse(&join(p, "n_occ"))?,
            n_virt: c.parse(&join(p, "n_virt"))?,
            density: c.array2(&join(p, "density"))?,
            converged: c.parse(&join(p, "converged"))?,
            n_iter: c.parse(&join(p, "n_iter"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.c.ncols() != self.n_occ + self.n_virt || self.eps.len() != self.c.ncols() {
            return Err(Error::Invariant("SCF dimensions disagree".into()));
        }
        if self.eps.windows(2).into_iter().any(|w| w[1] < w[0]) {
            return Err(Error::Invariant("orbital energies not ascending".into()));
        }
        Ok(())
    }
}

impl Persist for CcResult {
    const KIND: &'static str = "ccsd";

    fn write(&self, c: &mut Container, p: &str) {
        self.amps.write(c, &join(p, "amps."));
        c.put_scalar(join(p, "e_ref"), self.e_ref);
        c.put_scalar(join(p, "e_corr"), self.e_corr);
        c.put_scalar(join(p, "e_total"), self.e_total);
        c.put_scalar(join(p, "t_residual_norm"), self.t_residual_norm);
        c.put_scalar(join(p, "lambda_residual_norm"), self.lambda_residual_norm);
        c.set(join(p, "n_iter_t"), self.n_iter_t);
        c.set(join(p, "n_iter_lambda"), self.n_iter_lambda);
        c.set(join(p, "lambda_solved"), self.lambda_solved);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        Ok(Self {
            amps: AmplitudeSet::read(c, &join(p, "amps."))?,
            e_ref: c.scalar(&join(p, "e_ref"))?,
            e_corr: c.scalar(&join(p, "e_corr"))?,
            e_total: c.scalar(&join(p, "e_total"))?,
            t_residual_norm: c.scalar(&join(p, "t_residual_norm"))?,
            lambda_residual_norm: c.scalar(&join(p, "lambda_residual_norm"))?,
            n_iter_t: c.parse(&join(p, "n_iter_t"))?,
            n_iter_lambda: c.parse(&join(p, "n_iter_lambda"))?,
            lambda_solved: c.parse(&join(p, "lambda_solved"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        self.amps.validate()?;
        if (self.e_ref + self.e_corr - self.e_total).abs() > 1e-10 {
            return Err(Error::Invariant("E_ref + E_corr differs from E_total".into()));
        }
        Ok(())
    }
}

impl Persist for PropertyReport {
    const KIND: &'static str = "report";

    fn write(&self, c: &mut Container, p: &str) {
        c.put_scalar(join(p, "e_total"), self.e_total);
        if let Some(d) = &self.dipole {
            c.put_vec(join(p, "dipole"), d);
        }
        if let Some(q) = &self.quadrupole {
            put_points(c, join(p, "quadrupole"), q);
        }
        if let Some(a) = &self.polarizability {
            put_points(c, join(p, "polarizability"), &a.alpha);
            c.put_scalar(join(p, "polarizability_asymmetry"), a.asymmetry);
            c.put_scalar(join(p, "polarizability_step"), a.step);
        }
        if let Some(f) = &self.forces {
            put_points(c, join(p, "forces"), f);
        }
        c.put_vec(join(p, "natural_occupations"), &self.natural_occupations);
        c.set(join(p, "n_provenance"), self.provenance.len());
        for (k, (key, value)) in self.provenance.iter().enumerate() {
            c.set(join(p, &format!("provenance{k}.key")), key);
            c.set(join(p, &format!("provenance{k}.value")), value);
        }
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        let has = |n: &str| c.has_tensor(&join(p, n));
        let polarizability = if has("polarizability") {
            Some(Polarizability {
                alpha: mat3(c, &join(p, "polarizability"))?,
                asymmetry: c.scalar(&join(p, "polarizability_asymmetry"))?,
                step: c.scalar(&join(p, "polarizability_step"))?,
            })
        } else {
            None
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
        Ok(Self {
            e_total: c.scalar(&join(p, "e_total"))?,
            dipole: if has("dipole") { Some(get3(c, &join(p, "dipole"))?) } else { None },
            quadrupole: if has("quadrupole") { Some(mat3(c, &join(p, "quadrupole"))?) } else { None },
            polarizability,
            forces: if has("forces") { Some(get_points(c, &join(p, "forces"))?) } else { None },
            natural_occupations: c.vec(&join(p, "natural_occupations"))?,
            provenance,
        })
    }
}

fn write_norm(c: &mut Container, p: &str, n: &Normalization) {
    c.put_vec(join(p, "even_mean"), &n.even_mean);
    c.put_vec(join(p, "even_scale"), &n.even_scale);
    c.put_vec(join(p, "signed_scale"), &n.signed_scale);
}

fn read_norm(c: &Container, p: &str) -> Result<Option<Normalization>> {
    if !c.has_tensor(&join(p, "even_mean")) {
        return Ok(None);
    }
    Ok(Some(Normalization {
        even_mean: c.vec(&join(p, "even_mean"))?,
        even_scale: c.vec(&join(p, "even_scale"))?,
        signed_scale: c.vec(&join(p, "signed_scale"))?,
    }))
}

impl Persist for SurrogateModel {
    const KIND: &'static str = "model";

    fn write(&self, c: &mut Container, p: &str) {
        c.set(join(p, "mode"), self.mode.as_str());
        c.set(join(p, "hidden"), self.hidden);
        c.set(join(p, "seed"), self.seed);
        c.set(join(p, "epochs"), self.epochs);
        c.set(join(p, "radial_bins"), self.config.radial_bins);
        c.put_scalar(join(p, "r_cut"), self.config.r_cut);
        if let Some(n) = &self.config.pair_norm {
            write_norm(c, &join(p, "pair_norm."), n);
        }
        if let Some(n) = &self.config.quad_norm {
            write_norm(c, &join(p, "quad_norm."), n);
        }
        for h in Head::ALL {
            let net = &self.heads[h as usize];
            c.set(join(p, &format!("{}.n_in", h.name())), net.n_in);
            c.put_vec(join(p, &format!("{}.params", h.name())), &net.params);
        }
        c.put_vec(join(p, "loss_trace"), &self.loss_trace);
    }

    fn read(c: &Container, p: &str) -> Result<Self> {
        let hidden: usize = c.parse(&join(p, "hidden"))?;
        let heads: Vec<Perceptron> = Head::ALL
            .iter()
            .map(|h| {
                Ok(Perceptron {
                    n_in: c.parse(&join(p, &format!("{}.n_in", h.name())))?,
                    hidden,
                    params: c.vec(&join(p, &format!("{}.params", h.name())))?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            heads: heads.try_into().expect("four heads"),
            mode: Mode::parse(c.get(&join(p, "mode"))?).map_err(|e| Error::Corrupt(e.to_string()))?,
            config: FeatureConfig {
                r_cut: c.scalar(&join(p, "r_cut"))?,
                radial_bins: c.parse(&join(p, "radial_bins"))?,
                pair_norm: read_norm(c, &join(p, "pair_norm."))?,
                quad_norm: read_norm(c, &join(p, "quad_norm."))?,
            },
            hidden,
            seed: c.parse(&join(p, "seed"))?,
            epochs: c.parse(&join(p, "epochs"))?,
            loss_trace: c.vec(&join(p, "loss_trace"))?,
        })
    }

    fn validate(&self) -> Result<()> {
        let (ep, eq) = self.config.n_even_channels();
        let (sp, sq) = self.config.n_signed_channels();
        for h in Head::ALL {
            let net = &self.heads[h as usize];
            let want = if h.is_doubles() { eq + sq } else { ep + sp };
            if net.n_in != want || net.params.len() != net.hidden * (net.n_in + 2) {
                return Err(Error::Invariant(format!("head {} has inconsistent dimensions", h.name())));
            }
        }
        if !(self.config.r_cut > 0.0) {
            return Err(Error::Invariant("model r_cut must be positive".into()));
        }
        Ok(())
    }
}
