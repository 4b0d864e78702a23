//! One removing Latin square per singular fade state.
//!
//! Only one representative per symmetry orbit is solved. The orbit of `h`
//! under `z -> 1/z` (transpose) and `z -> ω z` (column permutation, with `ω`
//! the rotational symmetry of the signal set) reuses its square.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::complete::{complete_cpls, CompletionOptions, PartialSquare};
use super::square::{rotate_for_symmetry, standard_square, transpose, LatinSquare};
use crate::constellation::{ApproxIndex, Constellation, Kind};
use crate::error::{domain, Error, Result};
use crate::singular_fade::{constraints_for_fade, enumerate_singular_fades, FadeJson, FadeKey, FadeState, FADE_TOL};

/// How an entry's square was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// The family's standard square (removes `z = 1`).
    Standard,
    /// Constrained completion.
    Solved,
    /// From the entry with key `from` by an optional transpose followed by `rotations`
    /// column rotations.
    Derived { from: FadeKey, transposed: bool, rotations: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodebookEntry {
    pub fade: FadeState,
    pub square: LatinSquare,
    pub origin: Origin,
    /// The symbol count is proven minimal for this fade state.
    pub minimal: bool,
}

/// Removing squares for every singular fade state, in
/// [`FadeState::canonical_order`].
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    kind: Kind,
    order: usize,
    entries: Vec<CodebookEntry>,
}

#[derive(Clone, Debug)]
pub struct CodebookOptions {
    pub completion: CompletionOptions,
}

impl CodebookOptions {
    pub fn for_order(order: usize) -> Self {
        CodebookOptions { completion: CompletionOptions::for_order(order) }
    }
}

/// Summary numbers of a built codebook.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CodebookStats {
    pub entries: usize,
    pub solved_directly: usize,
    pub non_minimal: usize,
    pub max_symbols: usize,
    pub unproven: usize,
}

impl Codebook {
    pub fn new(kind: Kind, order: usize, mut entries: Vec<CodebookEntry>) -> Result<Self> {
        if entries.iter().any(|e| e.square.order() != order) {
            return domain("codebook squares must match the constellation order");
        }
        entries.sort_by_key(|e| e.fade.canonical_order());
        Ok(Codebook { kind, order, entries })
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &[CodebookEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, fade: &FadeState) -> Option<&CodebookEntry> {
        let key = fade.canonical_order();
        self.entries.binary_search_by_key(&key, |e| e.fade.canonical_order()).ok().map(|i| &self.entries[i])
    }

    pub fn stats(&self) -> CodebookStats {
        CodebookStats {
            entries: self.entries.len(),
            solved_directly: self.entries.iter().filter(|e| !matches!(e.origin, Origin::Derived { .. })).count(),
            non_minimal: self.entries.iter().filter(|e| !e.square.is_minimal()).count(),
            max_symbols: self.entries.iter().map(|e| e.square.symbols()).max().unwrap_or(0),
            unproven: self.entries.iter().filter(|e| !e.minimal).count(),
        }
    }

    /// Fade states (if any) whose square does not remove them.
    pub fn verify(&self, c: &Constellation) -> Vec<FadeState> {
        self.entries.par_iter().filter(|e| !e.square.removes(c, &e.fade)).map(|e| e.fade).collect()
    }

    pub fn to_json(&self) -> Vec<CodebookEntryJson> {
        self.entries
            .iter()
            .map(|e| CodebookEntryJson { fade: e.fade.to_json(), square: e.square.to_text(), minimal: e.minimal })
            .collect()
    }

    pub fn from_json(kind: Kind, order: usize, items: &[CodebookEntryJson]) -> Result<Self> {
        let entries = items
            .iter()
            .map(|j| {
                Ok(CodebookEntry {
                    fade: FadeState::from_json(&j.fade)?,
                    square: LatinSquare::parse(&j.square)?,
                    origin: Origin::Solved,
                    minimal: j.minimal,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Codebook::new(kind, order, entries)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_json())?)
    }

    pub fn from_json_str(kind: Kind, order: usize, text: &str) -> Result<Self> {
        let items: Vec<CodebookEntryJson> = serde_json::from_str(text)?;
        Codebook::from_json(kind, order, &items)
    }
}

/// `{fade: {...}, square: "<M t / rows text>", minimal}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodebookEntryJson {
    pub fade: FadeJson,
    pub square: String,
    #[serde(default)]
    pub minimal: bool,
}

// Lookup of enumerated fade states, exact or within tolerance.
enum FadeIndex {
    Exact(HashMap<FadeKey, usize>),
    Approx(ApproxIndex),
}

impl FadeIndex {
    fn new(fades: &[FadeState]) -> Self {
        if fades.iter().all(|f| f.exact_value().is_some()) {
            FadeIndex::Exact(fades.iter().enumerate().map(|(i, f)| (f.key(), i)).collect())
        } else {
            let mut idx = ApproxIndex::new(FADE_TOL);
            for f in fades {
                idx.insert(f.value());
            }
            FadeIndex::Approx(idx)
        }
    }

    fn find(&self, f: &FadeState) -> Option<usize> {
        match self {
            FadeIndex::Exact(map) => map.get(&f.key()).copied(),
            FadeIndex::Approx(idx) => idx.find(f.value()),
        }
    }
}

// Preferred orbit representatives: inside the unit disc, then smallest
// argument in [0, 2π), then smallest magnitude.
fn representative_order(f: &FadeState) -> (bool, i64, i64) {
    let z = f.value();
    let mut arg = z.arg();
    if arg < -1e-12 {
        arg += 2.0 * PI;
    }
    let quant = |x: f64| (x / 1e-9).round() as i64;
    (z.norm() > 1.0 + 1e-12, quant(arg.max(0.0)), quant(z.norm()))
}

struct OrbitMember {
    index: usize,
    transposed: bool,
    rotations: usize,
}

/// Build a removing square for every singular fade state of `c`.
///
/// Representatives are solved in parallel; the result does not depend on the
/// number of worker threads.
pub fn build_codebook(c: &Constellation, opts: &CodebookOptions) -> Result<Codebook> {
    let fades = enumerate_singular_fades(c);
    let index = FadeIndex::new(&fades);
    let order = c.rotation_order();

    let mut visit: Vec<usize> = (0..fades.len()).collect();
    visit.sort_by_key(|&i| representative_order(&fades[i]));

    let mut owner: Vec<Option<usize>> = vec![None; fades.len()];
    let mut orbits: Vec<(usize, Vec<OrbitMember>)> = Vec::new();
    for &rep in &visit {
        if owner[rep].is_some() {
            continue;
        }
        let mut members = Vec::new();
        for transposed in [false, true] {
            let mut z = if transposed { fades[rep].recip() } else { fades[rep] };
            for rotations in 0..order {
                let Some(i) = index.find(&z) else {
                    return Err(Error::Completion {
                        fade: fades[rep].to_string(),
                        reason: "orbit leaves the singular fade set".into(),
                    });
                };
                if owner[i].is_none() {
                    owner[i] = Some(rep);
                    members.push(OrbitMember { index: i, transposed, rotations });
                }
                z = z.rotate(order);
            }
        }
        orbits.push((rep, members));
    }

    log::debug!("{} fade states in {} orbits", fades.len(), orbits.len());
    let one = FadeState::one();
    let solved: Vec<Result<(LatinSquare, bool, Origin)>> = orbits
        .par_iter()
        .map(|&(rep, _)| {
            let h = &fades[rep];
            if index.find(&one) == Some(rep) {
                return Ok((standard_square(c)?, true, Origin::Standard));
            }
            let cs = constraints_for_fade(c, h);
            let p = PartialSquare::from_constraints(c.size(), &cs)?;
            let done = complete_cpls(&p, &opts.completion).map_err(|e| match e {
                Error::Completion { reason, .. } => Error::Completion { fade: h.to_string(), reason },
                other => other,
            })?;
            Ok((done.square, done.minimal, Origin::Solved))
        })
        .collect();

    let mut entries: Vec<Option<CodebookEntry>> = vec![None; fades.len()];
    for ((rep, members), solved) in orbits.iter().zip(solved) {
        let (base, minimal, origin) = solved?;
        let transposed_base = transpose(&base);
        for m in members {
            let mut sq = if m.transposed { transposed_base.clone() } else { base.clone() };
            for _ in 0..m.rotations {
                sq = rotate_for_symmetry(&sq, c)?;
            }
            let origin = if m.index == *rep {
                origin
            } else {
                Origin::Derived { from: fades[*rep].key(), transposed: m.transposed, rotations: m.rotations }
            };
            entries[m.index] = Some(CodebookEntry { fade: fades[m.index], square: sq, origin, minimal });
        }
    }
    let entries: Vec<CodebookEntry> = entries.into_iter().map(|e| e.expect("every fade is in an orbit")).collect();
    let book = Codebook::new(c.kind(), c.size(), entries)?;
    if let Some(bad) = book.verify(c).first() {
        return Err(Error::Completion {
            fade: bad.to_string(),
            reason: "square does not remove the fade state".into(),
        });
    }
    Ok(book)
}
