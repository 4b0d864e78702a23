//! Distances on the effective constellation and selection of the clustering
//! that maximises the minimum cluster distance at a given fade.
//!
//! All distances use energy-normalised points, so constellations of the same
//! size but different families compare on equal footing.

use std::collections::BTreeSet;

use num_complex::Complex64;

use crate::constellation::{difference_constellation, Constellation, DifferenceConstellation};
use crate::latin::{Codebook, LatinSquare};

/// Relative tolerance when comparing minimum cluster distances.
pub const TIE_TOL: f64 = 1e-9;

/// The partition of label pairs induced by a Latin square.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    square: LatinSquare,
    blocks: Vec<Vec<(usize, usize)>>,
}

impl Clustering {
    pub fn new(square: LatinSquare) -> Self {
        let m = square.order();
        let mut blocks = vec![Vec::new(); square.symbols()];
        for k in 0..m {
            for l in 0..m {
                blocks[square.get(k, l)].push((k, l));
            }
        }
        Clustering { square, blocks }
    }

    pub fn square(&self) -> &LatinSquare {
        &self.square
    }

    /// `blocks[s]` lists the `(row, col)` label pairs mapped to symbol `s`.
    pub fn blocks(&self) -> &[Vec<(usize, usize)>] {
        &self.blocks
    }

    pub fn cluster_of(&self, k: usize, l: usize) -> usize {
        self.square.get(k, l)
    }
}

/// Minimum distance of the effective constellation `x_A + z x_B`.
pub fn dmin_effective(c: &Constellation, z: Complex64) -> f64 {
    let d = difference_constellation(c);
    let scale = c.energy_scale();
    let mut best = f64::INFINITY;
    for a in d.entries() {
        for b in d.entries() {
            if a.pairs[0].0 == a.pairs[0].1 && b.pairs[0].0 == b.pairs[0].1 {
                continue;
            }
            best = best.min((a.value + z * b.value).norm());
        }
    }
    best * scale
}

/// Minimum over label pairs in different clusters of `|Δ_A + z Δ_B|`,
/// evaluated directly over all `M^4` ordered pairs.
pub fn min_cluster_distance(c: &Constellation, cl: &Clustering, z: Complex64) -> f64 {
    min_cluster_distance_points(&c.normalized_points(), cl, z)
}

fn min_cluster_distance_points(pts: &[Complex64], cl: &Clustering, z: Complex64) -> f64 {
    let m = pts.len();
    let mut best = f64::INFINITY;
    for k in 0..m {
        for l in 0..m {
            let s = cl.cluster_of(k, l);
            for k2 in 0..m {
                for l2 in 0..m {
                    if cl.cluster_of(k2, l2) != s {
                        best = best.min((pts[k] - pts[k2] + z * (pts[l] - pts[l2])).norm());
                    }
                }
            }
        }
    }
    best
}

// Index pairs into a difference constellation that occur between distinct
// clusters. `(a, b)` and `(-a, -b)` have equal magnitude; only the smaller
// index pair is kept.
fn cross_pairs(d: &DifferenceConstellation, sq: &LatinSquare) -> BTreeSet<(usize, usize)> {
    let m = sq.order();
    let mut out = BTreeSet::new();
    for k in 0..m {
        for l in 0..m {
            let s = sq.get(k, l);
            for k2 in 0..m {
                let a = d.entry_index(k, k2);
                for l2 in 0..m {
                    if sq.get(k2, l2) != s {
                        let b = d.entry_index(l, l2);
                        out.insert((a, b).min((d.negation(a), d.negation(b))));
                    }
                }
            }
        }
    }
    out
}

/// Cross-cluster difference pairs of one clustering; a distance query is a
/// single pass over them.
#[derive(Clone, Debug)]
pub struct CrossPairCache {
    pairs: Vec<(Complex64, Complex64)>,
}

impl CrossPairCache {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Complex64, Complex64)] {
        &self.pairs
    }

    pub fn min_distance(&self, z: Complex64) -> f64 {
        self.pairs.iter().map(|(a, b)| (a + z * b).norm()).fold(f64::INFINITY, f64::min)
    }
}

pub fn pair_partition_cache(c: &Constellation, cl: &Clustering) -> CrossPairCache {
    let d = difference_constellation(c);
    let scale = c.energy_scale();
    let entries = d.entries();
    let pairs = cross_pairs(&d, cl.square())
        .into_iter()
        .map(|(a, b)| (entries[a].value * scale, entries[b].value * scale))
        .collect();
    CrossPairCache { pairs }
}

/// Result of a selection: the codebook entry index and its distance at `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub distance: f64,
}

fn pick(distances: impl Iterator<Item = f64> + Clone) -> Selection {
    let max = distances.clone().fold(f64::NEG_INFINITY, f64::max);
    let threshold = max - TIE_TOL * max.abs();
    let index = distances.clone().position(|d| d >= threshold).expect("nonempty codebook");
    Selection { index, distance: distances.clone().nth(index).expect("index in range") }
}

/// Evaluate every entry and return the argmax; ties within [`TIE_TOL`] go
/// to the entry first in canonical order.
pub fn select_clustering(c: &Constellation, book: &Codebook, z: Complex64) -> Selection {
    let caches: Vec<CrossPairCache> =
        book.entries().iter().map(|e| pair_partition_cache(c, &Clustering::new(e.square.clone()))).collect();
    pick(caches.iter().map(|cache| cache.min_distance(z)))
}

/// Precomputed selector over a whole codebook.
///
/// Every distinct difference pair carries the set of entries for which it is
/// a cross-cluster pair. A query sorts the pair distances and removes
/// entries in increasing order; the last ones standing are the maximisers.
#[derive(Clone, Debug)]
pub struct CodebookSelector {
    entries: usize,
    words: usize,
    pairs: Vec<(Complex64, Complex64)>,
    masks: Vec<u64>,
    caches: Vec<CrossPairCache>,
}

impl CodebookSelector {
    pub fn new(c: &Constellation, book: &Codebook) -> Self {
        assert!(!book.is_empty(), "selector needs a nonempty codebook");
        let d = difference_constellation(c);
        let scale = c.energy_scale();
        let n = book.len();
        let words = n.div_ceil(64);
        let dn = d.len();
        let mut slot: Vec<Option<usize>> = vec![None; dn * dn];
        let mut pairs = Vec::new();
        let mut masks: Vec<u64> = Vec::new();
        let mut caches = Vec::with_capacity(n);
        for (e, entry) in book.entries().iter().enumerate() {
            let set = cross_pairs(&d, &entry.square);
            let mut own = Vec::with_capacity(set.len());
            for (a, b) in set {
                let value = (d.entries()[a].value * scale, d.entries()[b].value * scale);
                own.push(value);
                let p = *slot[a * dn + b].get_or_insert_with(|| {
                    pairs.push(value);
                    masks.extend(std::iter::repeat_n(0, words));
                    pairs.len() - 1
                });
                masks[p * words + e / 64] |= 1 << (e % 64);
            }
            caches.push(CrossPairCache { pairs: own });
        }
        CodebookSelector { entries: n, words, pairs, masks, caches }
    }

    pub fn len(&self) -> usize {
        self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries == 0
    }

    /// Number of distinct cross-cluster pairs over the codebook.
    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn distance(&self, index: usize, z: Complex64) -> f64 {
        self.caches[index].min_distance(z)
    }

    /// Same result as [`select_clustering`] by evaluating each entry.
    pub fn select_brute(&self, z: Complex64) -> Selection {
        pick(self.caches.iter().map(|cache| cache.min_distance(z)))
    }

    pub fn select(&self, z: Complex64) -> Selection {
        let dist: Vec<f64> = self.pairs.iter().map(|(a, b)| (a + z * b).norm()).collect();
        let mut order: Vec<u32> = (0..dist.len() as u32).collect();
        let cmp = |x: &u32, y: &u32| dist[*x as usize].total_cmp(&dist[*y as usize]).then(x.cmp(y));

        let mut alive = vec![!0u64; self.words];
        if !self.entries.is_multiple_of(64) {
            alive[self.words - 1] = (1u64 << (self.entries % 64)) - 1;
        }
        let mut killed_at = vec![f64::INFINITY; self.entries];
        let mut remaining = self.entries;
        let mut last = 0.0;

        let head = 64.min(order.len());
        if head < order.len() {
            order.select_nth_unstable_by(head, cmp);
        }
        order[..head].sort_unstable_by(cmp);
        let mut sorted_tail = false;
        let mut i = 0;
        while remaining > 0 {
            if i == head && !sorted_tail {
                order[head..].sort_unstable_by(cmp);
                sorted_tail = true;
            }
            let p = order[i] as usize;
            let d = dist[p];
            let mask = &self.masks[p * self.words..(p + 1) * self.words];
            for w in 0..self.words {
                let mut hit = alive[w] & mask[w];
                if hit == 0 {
                    continue;
                }
                alive[w] &= !hit;
                while hit != 0 {
                    let b = hit.trailing_zeros() as usize;
                    killed_at[w * 64 + b] = d;
                    remaining -= 1;
                    hit &= hit - 1;
                }
            }
            last = d;
            i += 1;
        }
        let threshold = last - TIE_TOL * last.abs();
        let index = killed_at.iter().position(|&d| d >= threshold).expect("some entry survives longest");
        Selection { index, distance: killed_at[index] }
    }
}
