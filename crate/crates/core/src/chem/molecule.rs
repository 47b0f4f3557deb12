use crate::error::{Error, Result};

pub const ANGSTROM_TO_BOHR: f64 = 1.8897259886;

const SYMBOLS: [&str; 10] = ["H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne"];

pub fn element_symbol(z: u32) -> &'static str {
    SYMBOLS.get(z as usize - 1).copied().unwrap_or("X")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub z: u32,
    /// Position in bohr.
    pub pos: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub atoms: Vec<Atom>,
    pub charge: i32,
    pub n_electrons: usize,
    pub id: String,
}

impl Molecule {
    /// Positions in bohr. Rejects odd electron counts and coincident nuclei.
    pub fn new(atoms: Vec<Atom>, charge: i32) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Invalid("molecule without atoms".into()));
        }
        for (k, a) in atoms.iter().enumerate() {
            if a.pos.iter().any(|x| !x.is_finite()) {
                return Err(Error::Invalid(format!("atom {k} has a non-finite position")));
            }
            for b in &atoms[..k] {
                if dist(&a.pos, &b.pos) < 1e-8 {
                    return Err(Error::Invalid(format!("atom {k} coincides with another atom")));
                }
            }
        }
        let n = atoms.iter().map(|a| a.z as i64).sum::<i64>() - charge as i64;
        if n < 0 || n % 2 != 0 {
            return Err(Error::OddElectrons(n));
        }
        Ok(Self {
            atoms,
            charge,
            n_electrons: n as usize,
            id: String::new(),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn nuclear_repulsion(&self) -> f64 {
        let mut e = 0.0;
        for (k, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[..k] {
                e += (a.z * b.z) as f64 / dist(&a.pos, &b.pos);
            }
        }
        e
    }

    /// Center of nuclear charge, the default multipole origin.
    pub fn charge_center(&self) -> [f64; 3] {
        let zt: f64 = self.atoms.iter().map(|a| a.z as f64).sum();
        let mut c = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                c[k] += a.z as f64 * a.pos[k] / zt;
            }
        }
        c
    }

    /// `Σ_A Z_A (R_A − O)`.
    pub fn nuclear_dipole(&self, origin: [f64; 3]) -> [f64; 3] {
        let mut d = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                d[k] += a.z as f64 * (a.pos[k] - origin[k]);
            }
        }
        d
    }

    /// `Σ_A Z_A (R_A − O)_α (R_A − O)_β`.
    pub fn nuclear_second_moment(&self, origin: [f64; 3]) -> [[f64; 3]; 3] {
        let mut q = [[0.0; 3]; 3];
        for a in &self.atoms {
            for i in 0..3 {
                for j in 0..3 {
                    q[i][j] += a.z as f64 * (a.pos[i] - origin[i]) * (a.pos[j] - origin[j]);
                }
            }
        }
        q
    }

    pub fn translated(&self, d: [f64; 3]) -> Self {
        let mut m = self.clone();
        for a in &mut m.atoms {
            for k in 0..3 {
                a.pos[k] += d[k];
            }
        }
        m
    }

    /// Applies `r -> rot · r` (row-major 3×3) to every nucleus.
    pub fn rotated(&self, rot: &[[f64; 3]; 3]) -> Self {
        let mut m = self.clone();
        for a in &mut m.atoms {
            let p = a.pos;
            for i in 0..3 {
                a.pos[i] = (0..3).map(|j| rot[i][j] * p[j]).sum();
            }
        }
        m
    }

    pub fn displaced(&self, atom: usize, axis: usize, h: f64) -> Self {
        let mut m = self.clone();
        m.atoms[atom].pos[axis] += h;
        m
    }

    pub fn to_xyz(&self) -> String {
        let mut s = format!("{}\ncharge={}", self.atoms.len(), self.charge);
        if !self.id.is_empty() {
            s.push_str(&format!(" id={}", self.id));
        }
        s.push('\n');
        for a in &self.atoms {
            let p = a.pos.map(|x| x / ANGSTROM_TO_BOHR);
            s.push_str(&format!(
                "{} {:.10} {:.10} {:.10}\n",
                element_symbol(a.z),
                p[0],
                p[1],
                p[2]
            ));
        }
        s
    }
}

pub(crate) fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

fn parse_comment_key<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    comment
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
}

/// Nuclei and charge as read, before the closed-shell checks of [`Molecule::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub id: String,
    pub atoms: Vec<Atom>,
    pub charge: i32,
}

impl Geometry {
    pub fn molecule(&self) -> Result<Molecule> {
        Ok(Molecule::new(self.atoms.clone(), self.charge)?.with_id(self.id.clone()))
    }
}

impl From<&Molecule> for Geometry {
    fn from(m: &Molecule) -> Self {
        Self {
            id: m.id.clone(),
            atoms: m.atoms.clone(),
            charge: m.charge,
        }
    }
}

fn parse_frame(lines: &[&str]) -> Result<Molecule> {
    parse_geometry_frame(lines)?.molecule()
}

fn parse_geometry_frame(lines: &[&str]) -> Result<Geometry> {
    let count: usize = lines[0]
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad atom count line `{}`", lines[0].trim())))?;
    if lines.len() < count + 2 {
        return Err(Error::Parse(format!(
            "expected {count} atom lines, found {}",
            lines.len().saturating_sub(2)
        )));
    }
    let comment = lines[1];
    let charge = match parse_comment_key(comment, "charge") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Parse(format!("bad charge `{v}`")))?,
        None => 0,
    };
    let mut atoms = Vec::with_capacity(count);
    for line in &lines[2..2 + count] {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 4 {
            return Err(Error::Parse(format!("malformed atom line `{line}`")));
        }
        let z = match toks[0] {
            "H" | "h" => 1,
            "He" | "HE" | "he" => 2,
            other => return Err(Error::UnknownElement(other.to_string())),
        };
        let mut pos = [0.0; 3];
        for k in 0..3 {
            let v: f64 = toks[k + 1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad coordinate `{}`", toks[k + 1])))?;
            pos[k] = v * ANGSTROM_TO_BOHR;
        }
        atoms.push(Atom { z, pos });
    }
    Ok(Geometry {
        id: parse_comment_key(comment, "id").unwrap_or("").to_string(),
        atoms,
        charge,
    })
}

/// Single-frame XYZ (Å). Element symbols limited to H and He.
pub fn parse_xyz(text: &str) -> Result<Molecule> {
    let lines: Vec<&str> = text.lines().collect();
    if lines.len() < 2 {
        return Err(Error::Parse("XYZ text needs a count and a comment line".into()));
    }
    let mol = parse_frame(&lines)?;
    let count = lines[0].trim().parse::<usize>().unwrap_or(0);
    if lines[count + 2..].iter().any(|l| !l.trim().is_empty()) {
        return Err(Error::Parse(
            "trailing lines after the declared atom count".into(),
        ));
    }
    Ok(mol)
}

/// Multi-frame XYZ; frames without an `id=` get `mol{index}`.
pub fn parse_xyz_frames(text: &str) -> Result<Vec<Molecule>> {
    parse_geometries(text)?.iter().map(Geometry::molecule).collect()
}

/// Multi-frame XYZ without the closed-shell checks, for batch runs that
/// record unsolvable frames instead of aborting.
pub fn parse_geometries(text: &str) -> Result<Vec<Geometry>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < lines.len() {
        if lines[k].trim().is_empty() {
            k += 1;
            continue;
        }
        let count: usize = lines[k]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad atom count line `{}`", lines[k].trim())))?;
        let end = (k + count + 2).min(lines.len());
        let mut geom = parse_geometry_frame(&lines[k..end])?;
        if geom.id.is_empty() {
            geom.id = format!("mol{}", out.len());
        }
        out.push(geom);
        k = end;
    }
    Ok(out)
}
