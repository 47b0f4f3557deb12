//! FCIDUMP reader and writer.
//!
//! Integrals are taken to be in an orthonormal orbital basis; the overlap is
//! the identity and no multipole integrals are available.

use ndarray::{Array2, Array4};

use super::integrals::IntegralSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FcidumpSystem {
    pub ints: IntegralSet,
    pub n_electrons: usize,
    pub n_orbitals: usize,
}

fn header_value(header: &str, key: &str) -> Option<String> {
    let upper = header.to_ascii_uppercase();
    let mut search = 0;
    while let Some(off) = upper[search..].find(key) {
        let start = search + off;
        let before_ok = start == 0
            || !upper.as_bytes()[start - 1].is_ascii_alphanumeric();
        let rest = upper[start + key.len()..].trim_start();
        if before_ok {
            if let Some(val) = rest.strip_prefix('=') {
                let v: String = val
                    .trim_start()
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '-' || *c == '+')
                    .collect();
                return Some(v);
            }
        }
        search = start + key.len();
    }
    None
}

pub fn ingest_fcidump(text: &str) -> Result<FcidumpSystem> {
    let upper = text.to_ascii_uppercase();
    let start = upper
        .find("&FCI")
        .ok_or_else(|| Error::Parse("missing &FCI header".into()))?;
    let end_rel = ["&END", "/"]
        .iter()
        .filter_map(|m| upper[start..].find(m))
        .min()
        .ok_or_else(|| Error::Parse("unterminated &FCI header".into()))?;
    let header = &text[start..start + end_rel];
    let body_start = start + end_rel + if upper[start + end_rel..].starts_with("&END") { 4 } else { 1 };

    let get = |key: &str| -> Result<i64> {
        let v = header_value(header, key)
            .ok_or_else(|| Error::Parse(format!("FCIDUMP header lacks {key}")))?;
        v.parse()
            .map_err(|_| Error::Parse(format!("bad {key} value `{v}`")))
    };
    let norb = get("NORB")?;
    let nelec = get("NELEC")?;
    let ms2 = header_value(header, "MS2").map(|v| v.parse::<i64>()).transpose()
        .map_err(|_| Error::Parse("bad MS2 value".into()))?
        .unwrap_or(0);
    if ms2 != 0 {
        return Err(Error::Invalid(format!("MS2 = {ms2}; only closed-shell input supported")));
    }
    if norb <= 0 || nelec < 0 || nelec % 2 != 0 || nelec > 2 * norb {
        return Err(Error::Invalid(format!("NORB={norb}, NELEC={nelec}")));
    }
    let n = norb as usize;
    let mut h = Array2::zeros((n, n));
    let mut eri = Array4::zeros((n, n, n, n));
    let mut core = 0.0;
    for line in text[body_start..].lines() {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(Error::Parse(format!("malformed FCIDUMP record `{line}`")));
        }
        let val: f64 = toks[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| Error::Parse(format!("bad value in `{line}`")))?;
        let mut idx = [0usize; 4];
        for k in 0..4 {
            let v: i64 = toks[k + 1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in `{line}`")))?;
            if v < 0 || v > norb {
                return Err(Error::IndexOutOfRange(format!("`{line}` with NORB={norb}")));
            }
            idx[k] = v as usize;
        }
        match idx {
            [0, 0, 0, 0] => core += val,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                h[[i - 1, j - 1]] = val;
                h[[j - 1, i - 1]] = val;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for (a, b, c, d) in [
                    (i, j, k, l),
                    (j, i, k, l),
                    (i, j, l, k),
                    (j, i, l, k),
                    (k, l, i, j),
                    (l, k, i, j),
                    (k, l, j, i),
                    (l, k, j, i),
                ] {
                    eri[[a, b, c, d]] = val;
                }
            }
            _ => return Err(Error::Parse(format!("unsupported index pattern in `{line}`"))),
        }
    }
    Ok(FcidumpSystem {
        ints: IntegralSet {
            n_ao: n,
            s: Array2::eye(n),
            hcore: h,
            eri,
            dipole: std::array::from_fn(|_| Array2::zeros((n, n))),
            quadrupole: std::array::from_fn(|_| Array2::zeros((n, n))),
            e_nuc: core,
            origin: [0.0; 3],
            has_multipoles: false,
        },
        n_electrons: nelec as usize,
        n_orbitals: n,
    })
}

/// Writes orthonormal-basis integrals, unique elements only, `|x| > cutoff`.
pub fn write_fcidump(h: &Array2<f64>, eri: &Array4<f64>, e_core: f64, n_electrons: usize, cutoff: f64) -> String {
    let n = h.nrows();
    let mut s = format!(
        "&FCI NORB={n},NELEC={n_electrons},MS2=0,\n ORBSYM={}\n ISYM=1,\n&END\n",
        "1,".repeat(n)
    );
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    if k * (k + 1) / 2 + l > i * (i + 1) / 2 + j {
                        continue;
                    }
                    let v = eri[[i, j, k, l]];
                    if v.abs() > cutoff {
                        s.push_str(&format!("{v:.16e} {} {} {} {}\n", i + 1, j + 1, k + 1, l + 1));
                    }
                }
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            let v = h[[i, j]];
            if v.abs() > cutoff {
                s.push_str(&format!("{v:.16e} {} {} 0 0\n", i + 1, j + 1));
            }
        }
    }
    s.push_str(&format!("{e_core:.16e} 0 0 0 0\n"));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_echo() {
        let f = ingest_fcidump("&FCI NORB=2,NELEC=2,MS2=0,\n&END\n0.5 1 1 1 1\n-1.2 1 1 0 0\n").unwrap();
        assert_eq!(f.n_orbitals, 2);
        assert_eq!(f.n_electrons, 2);
        assert_eq!(f.ints.hcore[[0, 0]], -1.2);
        assert_eq!(f.ints.eri[[0, 0, 0, 0]], 0.5);
    }

    #[test]
    fn core_only() {
        let f = ingest_fcidump("&FCI NORB=2,NELEC=2,MS2=0\n/\n 0.75 0 0 0 0\n").unwrap();
        assert!(f.ints.hcore.iter().all(|&x| x == 0.0));
        assert!(f.ints.eri.iter().all(|&x| x == 0.0));
        assert_eq!(f.ints.e_nuc, 0.75);
        assert_eq!(f.ints.s, Array2::eye(2));
    }

    #[test]
    fn rejections() {
        let bad = ingest_fcidump("&FCI NORB=2,NELEC=2,MS2=0\n&END\n0.5 3 1 1 1\n");
        assert!(matches!(bad, Err(Error::IndexOutOfRange(_))));
        assert!(matches!(
            ingest_fcidump("&FCI NORB=2,NELEC=2,MS2=2\n&END\n"),
            Err(Error::Invalid(_))
        ));
        assert!(matches!(ingest_fcidump("&FCI NELEC=2\n&END\n"), Err(Error::Parse(_))));
        assert!(matches!(ingest_fcidump("0.1 1 1 1 1"), Err(Error::Parse(_))));
    }

    #[test]
    fn symmetry_is_reconstructed() {
        let f = ingest_fcidump("&FCI NORB=3,NELEC=2,MS2=0,ORBSYM=1,1,1,ISYM=1\n&END\n0.25 3 1 2 1\n").unwrap();
        let e = &f.ints.eri;
        for (a, b, c, d) in [(2, 0, 1, 0), (0, 2, 1, 0), (2, 0, 0, 1), (1, 0, 2, 0), (0, 1, 0, 2)] {
            assert_eq!(e[[a, b, c, d]], 0.25);
        }
    }

    #[test]
    fn writer_round_trips() {
        let mut h = Array2::zeros((2, 2));
        h[[0, 0]] = -1.5;
        h[[0, 1]] = 0.1;
        h[[1, 0]] = 0.1;
        h[[1, 1]] = -0.4;
        let mut eri = Array4::zeros((2, 2, 2, 2));
        eri[[0, 0, 0, 0]] = 0.7;
        eri[[1, 1, 1, 1]] = 0.6;
        for (a, b, c, d) in [(0, 0, 1, 1), (1, 1, 0, 0)] {
            eri[[a, b, c, d]] = 0.5;
        }
        for (a, b, c, d) in [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)] {
            eri[[a, b, c, d]] = 0.2;
        }
        let text = write_fcidump(&h, &eri, 0.3, 2, 0.0);
        let f = ingest_fcidump(&text).unwrap();
        assert_eq!(f.ints.hcore, h);
        assert_eq!(f.ints.eri, eri);
        assert_eq!(f.ints.e_nuc, 0.3);
    }
}
