//! Singular fade states: enumeration, closed-form counts and the
//! singularity-removal constraints they impose on the relay map.
//!
//! A fade state `z = H_B / H_A` is singular when two distinct transmitted
//! pairs `(x_A, x_B)` land on the same point `x_A + z x_B` at the relay.
//! Equating two such points shows that every singular fade state is a ratio
//! of two nonzero points of the difference constellation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constellation::{delta_plus, difference_constellation, qam_side, ApproxIndex, Constellation, Kind, PSK_TOL};
use crate::error::{domain, Result};
use crate::lattice::{gi_relatively_prime, gr_reduce, restricted_totient, GaussianInt, GaussianRational, J};

/// Tolerance used to merge floating fade states and effective points.
pub const FADE_TOL: f64 = 1e-9;

/// A channel ratio `z = H_B / H_A`, exact when it is a ratio of Gaussian integers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FadeState {
    exact: Option<GaussianRational>,
    approx: Complex64,
}

impl FadeState {
    pub fn exact(r: GaussianRational) -> Self {
        FadeState { exact: Some(r), approx: r.to_complex() }
    }

    pub fn approx(z: Complex64) -> Self {
        FadeState { exact: None, approx: z }
    }

    pub fn one() -> Self {
        FadeState::exact(GaussianRational::from_int(crate::lattice::ONE))
    }

    pub fn exact_value(&self) -> Option<GaussianRational> {
        self.exact
    }

    pub fn value(&self) -> Complex64 {
        self.approx
    }

    pub fn key(&self) -> FadeKey {
        match self.exact {
            Some(r) => FadeKey::Exact(r),
            None => {
                FadeKey::Grid((self.approx.re / FADE_TOL).round() as i64, (self.approx.im / FADE_TOL).round() as i64)
            }
        }
    }

    /// Canonical ordering: magnitude, then argument in `[0, 2π)`, then key.
    pub fn canonical_order(&self) -> (i64, i64, FadeKey) {
        let mut arg = self.approx.arg();
        if arg < -1e-12 {
            arg += 2.0 * std::f64::consts::PI;
        }
        let quant = |x: f64| (x / FADE_TOL).round() as i64;
        (quant(self.approx.norm()), quant(arg.max(0.0)), self.key())
    }

    pub fn recip(&self) -> Self {
        match self.exact {
            Some(r) => FadeState::exact(r.recip().expect("fade states are nonzero")),
            None => FadeState::approx(self.approx.inv()),
        }
    }

    /// `z * e^{j 2π/order}`; exact for `order` 1, 2 and 4.
    pub fn rotate(&self, order: usize) -> Self {
        match (self.exact, order) {
            (Some(r), 1) => FadeState::exact(r),
            (Some(r), 2) => FadeState::exact(r.scale(GaussianInt::new(-1, 0))),
            (Some(r), 4) => FadeState::exact(r.scale(J)),
            _ => {
                let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / order as f64);
                FadeState::approx(self.approx * w)
            }
        }
    }

    pub fn to_json(&self) -> FadeJson {
        FadeJson {
            re: self.approx.re,
            im: self.approx.im,
            exact_num: self.exact.map(|r| [r.num().re, r.num().im]),
            exact_den: self.exact.map(|r| [r.den().re, r.den().im]),
        }
    }

    pub fn from_json(j: &FadeJson) -> Result<Self> {
        match (j.exact_num, j.exact_den) {
            (Some([a, b]), Some([c, d])) => {
                Ok(FadeState::exact(gr_reduce(GaussianInt::new(a, b), GaussianInt::new(c, d))?))
            }
            (None, None) => Ok(FadeState::approx(Complex64::new(j.re, j.im))),
            _ => domain("fade state needs both exact_num and exact_den or neither"),
        }
    }
}

impl fmt::Display for FadeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "{:.9}{:+.9}j", self.approx.re, self.approx.im),
        }
    }
}

/// Hashable, totally ordered identity of a fade state.
///
/// Exact states use their canonical rational; floating ones a `1e-9` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FadeKey {
    Exact(GaussianRational),
    Grid(i64, i64),
}

/// `{re, im, exact_num: [a, b], exact_den: [c, d]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FadeJson {
    pub re: f64,
    pub im: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_num: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_den: Option<[i64; 2]>,
}

/// All distinct singular fade states of `c`, ordered by [`FadeKey`].
pub fn enumerate_singular_fades(c: &Constellation) -> Vec<FadeState> {
    if c.is_exact() {
        enumerate_exact(c)
    } else {
        enumerate_approx(c, true)
    }
}

fn enumerate_exact(c: &Constellation) -> Vec<FadeState> {
    let d = difference_constellation(c);
    let nz: Vec<GaussianInt> = d.nonzero().map(|e| e.exact.expect("lattice constellation")).collect();
    let mut set = BTreeSet::new();
    for &a in &nz {
        for &b in &nz {
            set.insert(gr_reduce(a, b).expect("nonzero denominator"));
        }
    }
    set.into_iter().map(FadeState::exact).collect()
}

// With `use_rotation`, denominators are restricted to one representative per
// orbit of the signal set's rotation: d1 / (w d2) = (d1 / w) / d2 and the
// difference set is closed under w, so the ratio set is unchanged.
pub(crate) fn enumerate_approx(c: &Constellation, use_rotation: bool) -> Vec<FadeState> {
    let d = difference_constellation(c);
    let nz: Vec<Complex64> = d.nonzero().map(|e| e.value).collect();
    let denominators: Vec<Complex64> = if use_rotation {
        let order = c.rotation_order();
        let w = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI / order as f64);
        let mut idx = ApproxIndex::new(PSK_TOL);
        for &v in &nz {
            idx.insert(v);
        }
        let mut seen = vec![false; nz.len()];
        let mut reps = Vec::new();
        for i in 0..nz.len() {
            if seen[i] {
                continue;
            }
            reps.push(nz[i]);
            let mut v = nz[i];
            for _ in 0..order {
                if let Some(j) = idx.find(v) {
                    seen[j] = true;
                }
                v *= w;
            }
        }
        reps
    } else {
        nz.clone()
    };
    let mut idx = ApproxIndex::new(FADE_TOL);
    for &a in &nz {
        for &b in &denominators {
            idx.insert(a / b);
        }
    }
    let mut out: Vec<FadeState> = idx.into_values().into_iter().map(FadeState::approx).collect();
    out.sort_by_key(|f| f.key());
    out
}

/// `2 + 4 Σ_{n=1}^{m-1} ψ(n)` for `m`-PAM.
pub fn count_pam(m: usize) -> Result<u64> {
    if m < 2 {
        return domain(format!("PAM needs at least 2 points, got {m}"));
    }
    let mut sum = 0;
    for n in 1..m as u64 {
        sum += restricted_totient(n)?;
    }
    Ok(2 + 4 * sum)
}

/// Scaled first-quadrant differences `ΔS⁺ / 2` with, for each, the number of
/// other elements it is relatively prime to.
pub fn qam_coprime_partners(m: usize) -> Result<Vec<(GaussianInt, usize)>> {
    qam_side(m)?;
    let c = Constellation::build(Kind::Qam, m)?;
    let d = difference_constellation(&c);
    let elems: Vec<GaussianInt> = delta_plus(&d)
        .iter()
        .map(|e| {
            let x = e.exact.expect("lattice");
            GaussianInt::new(x.re / 2, x.im / 2)
        })
        .collect();
    let mut out = Vec::with_capacity(elems.len());
    for (i, &a) in elems.iter().enumerate() {
        let mut n = 0;
        for (k, &b) in elems.iter().enumerate() {
            if i != k && !a.is_associate(b) && gi_relatively_prime(a, b)? {
                n += 1;
            }
        }
        out.push((a, n));
    }
    Ok(out)
}

/// Number of unordered relatively prime pairs of distinct, non-associate
/// elements of the scaled `ΔS⁺`.
pub fn qam_coprime_pairs(m: usize) -> Result<u64> {
    let partners = qam_coprime_partners(m)?;
    Ok(partners.iter().map(|&(_, n)| n as u64).sum::<u64>() / 2)
}

/// `4 + 8 φ(ΔS⁺)` for square `M`-QAM.
pub fn count_qam(m: usize) -> Result<u64> {
    Ok(4 + 8 * qam_coprime_pairs(m)?)
}

/// `4(n² - n + 1)` with `n = ((2√M - 1)² - 1) / 4`.
pub fn count_qam_upper_bound(m: usize) -> Result<u64> {
    let s = qam_side(m)? as u64;
    let n = ((2 * s - 1).pow(2) - 1) / 4;
    Ok(4 * (n * n - n + 1))
}

/// `M (M²/4 - M/2 + 1)` for `M`-PSK.
pub fn count_psk(m: usize) -> Result<u64> {
    if m < 4 || !m.is_power_of_two() {
        return domain(format!("PSK count needs M = 2^k >= 4, got {m}"));
    }
    let m = m as u64;
    Ok(m * (m * m / 4 - m / 2 + 1))
}

/// Closed-form count for any supported family.
pub fn count_formula(kind: Kind, m: usize) -> Result<u64> {
    match kind {
        Kind::Pam => count_pam(m),
        Kind::Qam => count_qam(m),
        Kind::Psk => count_psk(m),
    }
}

/// Groups of label pairs `(k, l)` that collide at the relay for a fade state.
///
/// Only groups with at least two pairs are kept; each group is sorted and the
/// groups are ordered by their first pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSet {
    pub fade: FadeState,
    pub groups: Vec<Vec<(usize, usize)>>,
}

impl ConstraintSet {
    pub fn is_singular(&self) -> bool {
        !self.groups.is_empty()
    }

    /// Number of lost effective points, `M² - |S_R(z)|`.
    pub fn collisions(&self) -> usize {
        self.groups.iter().map(|g| g.len() - 1).sum()
    }
}

// Partition of all M² label pairs by their effective point.
fn effective_classes(c: &Constellation, z: &FadeState) -> (Vec<Vec<(usize, usize)>>, Vec<Complex64>) {
    let m = c.size();
    let mut classes: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut values = Vec::new();
    match (c.lattice(), z.exact_value()) {
        (Some(lat), Some(r)) => {
            // x_A + (p/q) x_B collide iff q x_A + p x_B collide.
            let (p, q) = (r.num(), r.den());
            let mut by_key: HashMap<GaussianInt, usize> = HashMap::new();
            for k in 0..m {
                for l in 0..m {
                    let key = q * lat[k] + p * lat[l];
                    let i = *by_key.entry(key).or_insert_with(|| {
                        classes.push(Vec::new());
                        values.push(c.point(k) + z.value() * c.point(l));
                        classes.len() - 1
                    });
                    classes[i].push((k, l));
                }
            }
        }
        _ => {
            let mut idx = ApproxIndex::new(FADE_TOL);
            for k in 0..m {
                for l in 0..m {
                    let (i, fresh) = idx.insert(c.point(k) + z.value() * c.point(l));
                    if fresh {
                        classes.push(Vec::new());
                    }
                    classes[i].push((k, l));
                }
            }
            values = idx.into_values();
        }
    }
    (classes, values)
}

/// Singularity-removal constraints of `z` for signal set `c`.
pub fn constraints_for_fade(c: &Constellation, z: &FadeState) -> ConstraintSet {
    let (classes, _) = effective_classes(c, z);
    let mut groups: Vec<Vec<(usize, usize)>> = classes.into_iter().filter(|g| g.len() >= 2).collect();
    for g in &mut groups {
        g.sort_unstable();
    }
    groups.sort();
    ConstraintSet { fade: *z, groups }
}

/// The distinct points `x_i + z x_j` (unnormalized coordinates), sorted.
pub fn effective_constellation(c: &Constellation, z: &FadeState) -> Vec<Complex64> {
    let (_, mut values) = effective_classes(c, z);
    values.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap_or(Ordering::Equal));
    values
}
