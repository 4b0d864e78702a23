//! Labeled PAM, square QAM and PSK signal sets and their difference
//! constellations.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::lattice::GaussianInt;

/// Tolerance used when comparing floating (PSK) points.
pub const PSK_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Kind {
    Pam,
    Qam,
    Psk,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Pam => "PAM",
            Kind::Qam => "QAM",
            Kind::Psk => "PSK",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pam" => Ok(Kind::Pam),
            "qam" => Ok(Kind::Qam),
            "psk" => Ok(Kind::Psk),
            other => domain(format!("unknown constellation family '{other}'")),
        }
    }
}

/// A signal set whose points are indexed by their label `0..M`.
///
/// PAM and QAM points are kept on the unnormalized odd-integer lattice;
/// `energy_scale` maps them to unit average energy.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    kind: Kind,
    points: Vec<Complex64>,
    lattice: Option<Vec<GaussianInt>>,
    energy_scale: f64,
}

impl Constellation {
    fn from_lattice(kind: Kind, lattice: Vec<GaussianInt>) -> Self {
        let points: Vec<Complex64> = lattice.iter().map(|p| p.to_complex()).collect();
        let energy_scale = unit_energy_scale(&points);
        Constellation { kind, points, lattice: Some(lattice), energy_scale }
    }

    pub fn build(kind: Kind, size: usize) -> Result<Self> {
        match kind {
            Kind::Pam => build_pam(size),
            Kind::Qam => build_qam(size),
            Kind::Psk => build_psk(size),
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.points.len()
    }

    /// Label bits, `log2(M)` rounded up.
    pub fn bits_per_symbol(&self) -> u32 {
        usize::BITS - (self.size() - 1).leading_zeros()
    }

    /// Unnormalized points indexed by label.
    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn point(&self, label: usize) -> Complex64 {
        self.points[label]
    }

    /// Exact lattice points (PAM/QAM only).
    pub fn lattice(&self) -> Option<&[GaussianInt]> {
        self.lattice.as_deref()
    }

    pub fn is_exact(&self) -> bool {
        self.lattice.is_some()
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    /// Points scaled to unit average energy.
    pub fn normalized_points(&self) -> Vec<Complex64> {
        self.points.iter().map(|p| p * self.energy_scale).collect()
    }

    /// Label of the point equal to `p` (exact for lattices, tolerance for PSK).
    pub fn label_of(&self, p: Complex64) -> Option<usize> {
        self.points.iter().position(|q| (q - p).norm() < PSK_TOL)
    }

    pub fn label_of_lattice(&self, p: GaussianInt) -> Option<usize> {
        self.lattice.as_ref()?.iter().position(|&q| q == p)
    }

    /// Order and generator of the rotational symmetry `p -> p * e^{j 2π/order}`
    /// that maps the signal set onto itself.
    pub fn rotation_order(&self) -> usize {
        match self.kind {
            Kind::Pam => 2,
            Kind::Qam => 4,
            Kind::Psk => self.size(),
        }
    }

    /// Column permutation induced by rotating the points by `-2π/order`:
    /// `perm[j]` is the label of `point(j) * e^{-j 2π/order}`.
    pub fn rotation_permutation(&self) -> Vec<usize> {
        let order = self.rotation_order();
        match &self.lattice {
            Some(lat) => lat
                .iter()
                .map(|&p| {
                    let q = match order {
                        2 => -p,
                        // multiplication by -j
                        4 => GaussianInt::new(p.im, -p.re),
                        _ => unreachable!(),
                    };
                    self.label_of_lattice(q).expect("lattice is rotation invariant")
                })
                .collect(),
            None => {
                let w = Complex64::from_polar(1.0, -2.0 * PI / order as f64);
                self.points.iter().map(|&p| self.label_of(p * w).expect("PSK is rotation invariant")).collect()
            }
        }
    }

    pub fn to_json(&self) -> ConstellationJson {
        ConstellationJson {
            kind: self.kind,
            m: self.size(),
            points: self.points.iter().map(|p| [p.re, p.im]).collect(),
            energy_scale: self.energy_scale,
        }
    }
}

/// JSON form `{kind, M, points: [[re, im], ...] (by label), energy_scale}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstellationJson {
    pub kind: Kind,
    #[serde(rename = "M")]
    pub m: usize,
    pub points: Vec<[f64; 2]>,
    pub energy_scale: f64,
}

fn unit_energy_scale(points: &[Complex64]) -> f64 {
    let mean = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len() as f64;
    1.0 / mean.sqrt()
}

fn pam_levels(m: usize) -> impl Iterator<Item = i64> {
    let m = m as i64;
    (0..m).map(move |n| -(m - 1) + 2 * n)
}

/// `m`-point PAM with points `-(m-1) + 2n`, labeled left to right.
pub fn build_pam(m: usize) -> Result<Constellation> {
    if m < 2 {
        return domain(format!("PAM needs at least 2 points, got {m}"));
    }
    Ok(Constellation::from_lattice(Kind::Pam, pam_levels(m).map(|a| GaussianInt::new(a, 0)).collect()))
}

/// Side `sqrt(M)` if `M = 2^(2λ)`, λ ≥ 1.
pub fn qam_side(m: usize) -> Result<usize> {
    if m < 4 || !m.is_power_of_two() || !m.trailing_zeros().is_multiple_of(2) {
        return domain(format!("square QAM size must be 4^k with k >= 1, got {m}"));
    }
    Ok(1 << (m.trailing_zeros() / 2))
}

/// Square `M`-QAM on the odd-integer lattice.
///
/// The point `a + jb` carries label `((s-1+a)s + (s-1+b)) / 2` with `s = sqrt(M)`.
pub fn build_qam(m: usize) -> Result<Constellation> {
    let s = qam_side(m)?;
    let mut lattice = Vec::with_capacity(m);
    for a in pam_levels(s) {
        for b in pam_levels(s) {
            lattice.push(GaussianInt::new(a, b));
        }
    }
    debug_assert!(lattice.iter().enumerate().all(|(k, &p)| qam_label(s, p) == k));
    Ok(Constellation::from_lattice(Kind::Qam, lattice))
}

/// The QAM labeling map for side `s`.
pub fn qam_label(s: usize, p: GaussianInt) -> usize {
    let s = s as i64;
    (((s - 1 + p.re) * s + (s - 1 + p.im)) / 2) as usize
}

/// `M`-PSK with points `e^{j 2πk/M}`, label `k`.
pub fn build_psk(m: usize) -> Result<Constellation> {
    if m < 2 || !m.is_power_of_two() {
        return domain(format!("PSK size must be a power of two >= 2, got {m}"));
    }
    let points: Vec<Complex64> = (0..m).map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / m as f64)).collect();
    let energy_scale = unit_energy_scale(&points);
    Ok(Constellation { kind: Kind::Psk, points, lattice: None, energy_scale })
}

/// One point of a difference constellation with every ordered label pair
/// `(k, k')` such that `point(k) - point(k') = value`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffEntry {
    pub exact: Option<GaussianInt>,
    pub value: Complex64,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferenceConstellation {
    entries: Vec<DiffEntry>,
    /// `index[k][k']` is the entry holding `point(k) - point(k')`.
    index: Vec<Vec<usize>>,
}

impl DifferenceConstellation {
    pub fn entries(&self) -> &[DiffEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry_index(&self, k: usize, k2: usize) -> usize {
        self.index[k][k2]
    }

    /// Index of the entry `-d` for entry `i`.
    pub fn negation(&self, i: usize) -> usize {
        let (k, k2) = self.entries[i].pairs[0];
        self.index[k2][k]
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &DiffEntry> {
        self.entries.iter().filter(|e| e.value.norm() > PSK_TOL)
    }
}

/// Tolerance-based dedup of complex values on a hash grid.
///
/// Values closer than `tol` to an earlier representative map to it.
pub(crate) struct ApproxIndex {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    values: Vec<Complex64>,
}

impl ApproxIndex {
    pub(crate) fn new(tol: f64) -> Self {
        ApproxIndex { tol, cells: HashMap::new(), values: Vec::new() }
    }

    fn cell(&self, v: Complex64) -> (i64, i64) {
        ((v.re / self.tol).floor() as i64, (v.im / self.tol).floor() as i64)
    }

    pub(crate) fn find(&self, v: Complex64) -> Option<usize> {
        let (cx, cy) = self.cell(v);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &i in ids {
                        if (self.values[i] - v).norm() <= self.tol {
                            return Some(i);
                        }
                    }
                }
            }
        }
        None
    }

    /// Index of the representative for `v`, inserting it if new.
    pub(crate) fn insert(&mut self, v: Complex64) -> (usize, bool) {
        if let Some(i) = self.find(v) {
            return (i, false);
        }
        let i = self.values.len();
        self.values.push(v);
        let c = self.cell(v);
        self.cells.entry(c).or_default().push(i);
        (i, true)
    }

    pub(crate) fn into_values(self) -> Vec<Complex64> {
        self.values
    }
}

/// All pairwise differences `point(k) - point(k')` with their label pairs.
///
/// Entries are sorted by `(re, im)`; exact for PAM/QAM.
pub fn difference_constellation(c: &Constellation) -> DifferenceConstellation {
    let m = c.size();
    let mut entries: Vec<DiffEntry> = Vec::new();
    match c.lattice() {
        Some(lat) => {
            let mut by_value: HashMap<GaussianInt, usize> = HashMap::new();
            for k in 0..m {
                for k2 in 0..m {
                    let d = lat[k] - lat[k2];
                    let i = *by_value.entry(d).or_insert_with(|| {
                        entries.push(DiffEntry { exact: Some(d), value: d.to_complex(), pairs: vec![] });
                        entries.len() - 1
                    });
                    entries[i].pairs.push((k, k2));
                }
            }
        }
        None => {
            let mut idx = ApproxIndex::new(PSK_TOL);
            for k in 0..m {
                for k2 in 0..m {
                    let d = c.point(k) - c.point(k2);
                    let (i, fresh) = idx.insert(d);
                    if fresh {
                        entries.push(DiffEntry { exact: None, value: d, pairs: vec![] });
                    }
                    entries[i].pairs.push((k, k2));
                }
            }
        }
    }
    // Snap values within tolerance of zero so sorting is stable for PSK.
    entries.sort_by(|a, b| {
        let key = |e: &DiffEntry| (snap(e.value.re), snap(e.value.im));
        key(a).partial_cmp(&key(b)).expect("finite values")
    });
    let mut index = vec![vec![0; m]; m];
    for (i, e) in entries.iter().enumerate() {
        for &(k, k2) in &e.pairs {
            index[k][k2] = i;
        }
    }
    DifferenceConstellation { entries, index }
}

fn snap(x: f64) -> f64 {
    (x / PSK_TOL).round() * PSK_TOL
}

/// The entries with `re > 0, im >= 0`.
pub fn delta_plus(d: &DifferenceConstellation) -> Vec<&DiffEntry> {
    d.entries
        .iter()
        .filter(|e| match e.exact {
            Some(x) => x.re > 0 && x.im >= 0,
            None => e.value.re > PSK_TOL && e.value.im > -PSK_TOL,
        })
        .collect()
}
