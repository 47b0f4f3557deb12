use ndarray::{Array2, Array4};

use crate::error::{Error, Result};

/// Orbital gauge in which amplitude tensors are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gauge {
    Canonical,
    Localized,
}

impl Gauge {
    pub fn as_str(self) -> &'static str {
        match self {
            Gauge::Canonical => "canonical",
            Gauge::Localized => "localized",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Gauge::Canonical),
            "localized" => Ok(Gauge::Localized),
            other => Err(Error::Parse(format!("unknown gauge `{other}`"))),
        }
    }
}

/// Spin-orbital `T1, T2, Λ1, Λ2` with the occupied index first in every tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSet {
    pub t1: Array2<f64>,
    pub t2: Array4<f64>,
    pub l1: Array2<f64>,
    pub l2: Array4<f64>,
    pub gauge: Gauge,
    pub basis_id: String,
}

/// Projection onto the part antisymmetric in `(i,j)` and in `(a,b)`. The
/// grouping makes the result exactly antisymmetric in floating point.
pub fn antisymmetrize(x: &Array4<f64>) -> Array4<f64> {
    Array4::from_shape_fn(x.dim(), |(i, j, a, b)| {
        0.25 * ((x[[i, j, a, b]] - x[[j, i, a, b]]) - (x[[i, j, b, a]] - x[[j, i, b, a]]))
    })
}

impl AmplitudeSet {
    pub fn zeros(n_occ: usize, n_virt: usize, gauge: Gauge, basis_id: impl Into<String>) -> Self {
        Self {
            t1: Array2::zeros((n_occ, n_virt)),
            t2: Array4::zeros((n_occ, n_occ, n_virt, n_virt)),
            l1: Array2::zeros((n_occ, n_virt)),
            l2: Array4::zeros((n_occ, n_occ, n_virt, n_virt)),
            gauge,
            basis_id: basis_id.into(),
        }
    }

    pub fn n_occ(&self) -> usize {
        self.t1.nrows()
    }

    pub fn n_virt(&self) -> usize {
        self.t1.ncols()
    }

    /// Checks shapes, finiteness, the divergence bound and exact antisymmetry.
    pub fn validate(&self) -> Result<()> {
        let (o, v) = self.t1.dim();
        if self.l1.dim() != (o, v) || self.t2.dim() != (o, o, v, v) || self.l2.dim() != (o, o, v, v) {
            return Err(Error::Invariant("amplitude tensor shapes disagree".into()));
        }
        let all = self.t1.iter().chain(&self.t2).chain(&self.l1).chain(&self.l2);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(Error::NotFinite("amplitudes".into()));
        }
        if self.t1.iter().chain(&self.t2).any(|x| x.abs() > 10.0) {
            return Err(Error::Invariant("T amplitude exceeds divergence bound 10".into()));
        }
        for x in [&self.t2, &self.l2] {
            for ((i, j, a, b), &val) in x.indexed_iter() {
                if val != -x[[j, i, a, b]] || val != -x[[i, j, b, a]] {
                    return Err(Error::Invariant(format!(
                        "doubles tensor not antisymmetric at ({i},{j},{a},{b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Largest absolute difference over all four tensors.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = |a: f64, b: f64| (a - b).abs();
        let mut m = 0.0_f64;
        for (x, y) in self.t1.iter().zip(&other.t1).chain(self.l1.iter().zip(&other.l1)) {
            m = m.max(d(*x, *y));
        }
        for (x, y) in self.t2.iter().zip(&other.t2).chain(self.l2.iter().zip(&other.l2)) {
            m = m.max(d(*x, *y));
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn projection_is_exactly_antisymmetric_and_idempotent_on_antisymmetric_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array4::from_shape_fn((3, 3, 4, 4), |_| rng.random_range(-1.0..1.0));
        let a = antisymmetrize(&x);
        for ((i, j, p, q), &v) in a.indexed_iter() {
            assert_eq!(v, -a[[j, i, p, q]]);
            assert_eq!(v, -a[[i, j, q, p]]);
        }
        let b = antisymmetrize(&a);
        assert!((&a - &b).iter().all(|d| d.abs() < 1e-15));
    }

    #[test]
    fn validation_catches_bad_tensors() {
        let mut s = AmplitudeSet::zeros(2, 2, Gauge::Canonical, "x");
        assert!(s.validate().is_ok());
        s.t2[[0, 1, 0, 1]] = 0.1;
        assert!(s.validate().is_err());
        let mut s = AmplitudeSet::zeros(2, 2, Gauge::Canonical, "x");
        s.t1[[0, 0]] = f64::NAN;
        assert!(s.validate().is_err());
        assert_eq!(Gauge::parse("localized").unwrap(), Gauge::Localized);
    }
}
