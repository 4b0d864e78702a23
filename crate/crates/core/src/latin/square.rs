use std::fmt;

use crate::constellation::{qam_side, Constellation, Kind};
use crate::error::{domain, Error, Result};
use crate::singular_fade::{constraints_for_fade, ConstraintSet, FadeState};

/// An `M × M` array over the symbols `0..t` with no symbol repeated in any
/// row or column. Rows are indexed by node-A labels, columns by node-B labels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LatinSquare {
    order: usize,
    symbols: usize,
    cells: Vec<usize>,
}

impl LatinSquare {
    /// Validates the Latin property and that every symbol in `0..t` is used.
    pub fn from_cells(order: usize, cells: Vec<usize>) -> Result<Self> {
        if order == 0 || cells.len() != order * order {
            return domain(format!("expected {0}×{0} cells, got {1}", order, cells.len()));
        }
        if !is_latin(order, &cells) {
            return domain("array repeats a symbol in a row or column");
        }
        let symbols = cells.iter().max().map_or(0, |&s| s + 1);
        let mut used = vec![false; symbols];
        for &s in &cells {
            used[s] = true;
        }
        if let Some(s) = used.iter().position(|u| !u) {
            return domain(format!("symbol {s} is unused"));
        }
        Ok(LatinSquare { order, symbols, cells })
    }

    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return domain("rows must all have length M");
        }
        Self::from_cells(order, rows.concat())
    }

    // Caller guarantees validity.
    pub(crate) fn from_cells_unchecked(order: usize, symbols: usize, cells: Vec<usize>) -> Self {
        debug_assert!(is_latin(order, &cells));
        LatinSquare { order, symbols, cells }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of symbols `t`.
    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn is_minimal(&self) -> bool {
        self.symbols == self.order
    }

    pub fn get(&self, row: usize, col: usize) -> usize {
        self.cells[row * self.order + col]
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// Column `c` holding symbol `s` in row `r`, if any.
    pub fn col_of(&self, row: usize, symbol: usize) -> Option<usize> {
        self.cells[row * self.order..(row + 1) * self.order].iter().position(|&x| x == symbol)
    }

    /// Row holding symbol `s` in column `c`, if any.
    pub fn row_of(&self, col: usize, symbol: usize) -> Option<usize> {
        (0..self.order).find(|&r| self.get(r, col) == symbol)
    }

    /// Relabel symbols in order of first appearance, scanning row-major.
    pub fn canonical(&self) -> LatinSquare {
        let cells = relabel_first_occurrence(&self.cells);
        let symbols = cells.iter().max().map_or(0, |&s| s + 1);
        LatinSquare { order: self.order, symbols, cells }
    }

    /// True if every constraint group is monochromatic, i.e. the square
    /// removes the fade state the constraints came from.
    pub fn satisfies(&self, constraints: &ConstraintSet) -> bool {
        constraints.groups.iter().all(|g| {
            let (k, l) = g[0];
            let s = self.get(k, l);
            g.iter().all(|&(k2, l2)| self.get(k2, l2) == s)
        })
    }

    /// True if this square removes the singular fade state `z` for `c`.
    pub fn removes(&self, c: &Constellation, z: &FadeState) -> bool {
        self.order == c.size() && self.satisfies(&constraints_for_fade(c, z))
    }

    /// Text form: `"M t"` then `M` lines of space-separated symbols.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.order, self.symbols);
        for row in self.cells.chunks(self.order) {
            let line: Vec<String> = row.iter().map(|s| s.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty Latin square".into()))?;
        let nums = |l: &str| -> Result<Vec<usize>> {
            l.split_whitespace().map(|t| t.parse().map_err(|_| Error::Parse(format!("bad integer '{t}'")))).collect()
        };
        let h = nums(header)?;
        let [m, t] = h[..] else {
            return Err(Error::Parse("header must be 'M t'".into()));
        };
        let mut cells = Vec::with_capacity(m * m);
        for _ in 0..m {
            let line = lines.next().ok_or_else(|| Error::Parse("too few rows".into()))?;
            let row = nums(line)?;
            if row.len() != m {
                return Err(Error::Parse(format!("row has {} entries, expected {m}", row.len())));
            }
            cells.extend(row);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing rows".into()));
        }
        let sq = LatinSquare::from_cells(m, cells)?;
        if sq.symbols != t {
            return Err(Error::Parse(format!("header says t={t}, square uses {}", sq.symbols)));
        }
        Ok(sq)
    }
}

impl fmt::Debug for LatinSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LatinSquare({})", self.to_text().trim_end().replace('\n', " / "))
    }
}

impl fmt::Display for LatinSquare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

pub(crate) fn relabel_first_occurrence(cells: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    cells
        .iter()
        .map(|&s| {
            let next = map.len();
            *map.entry(s).or_insert(next)
        })
        .collect()
}

/// Row/column uniqueness of an `order × order` array in row-major order.
pub fn is_latin(order: usize, cells: &[usize]) -> bool {
    if cells.len() != order * order {
        return false;
    }
    let mut seen = std::collections::HashSet::new();
    for r in 0..order {
        seen.clear();
        if !(0..order).all(|c| seen.insert(cells[r * order + c])) {
            return false;
        }
    }
    for c in 0..order {
        seen.clear();
        if !(0..order).all(|r| seen.insert(cells[r * order + c])) {
            return false;
        }
    }
    true
}

/// Exclusive law for a relay map `map[x_A][x_B]`: distinct inputs of either
/// node with the other fixed give distinct outputs. This is exactly the Latin
/// property of the map's table.
pub fn exclusive_law_holds(map: &[Vec<usize>]) -> bool {
    let m = map.len();
    if map.iter().any(|r| r.len() != m) {
        return false;
    }
    for a in 0..m {
        for a2 in 0..m {
            for b in 0..m {
                if a != a2 && map[a][b] == map[a2][b] {
                    return false;
                }
                if a == a2 {
                    for b2 in 0..m {
                        if b != b2 && map[a][b] == map[a][b2] {
                            return false;
                        }
                    }
                }
            }
        }
    }
    true
}

/// `L(i, j) = i XOR j`.
pub fn xor_square(m: usize) -> Result<LatinSquare> {
    if !m.is_power_of_two() {
        return domain(format!("XOR map needs a power-of-two order, got {m}"));
    }
    let cells = (0..m * m).map(|x| (x / m) ^ (x % m)).collect();
    Ok(LatinSquare::from_cells_unchecked(m, m, cells))
}

/// Left-cyclic square `L(i, j) = (i + j) mod m`; removes `z = 1` for `m`-PAM.
pub fn pam_standard(m: usize) -> Result<LatinSquare> {
    if m < 2 {
        return domain(format!("PAM order must be at least 2, got {m}"));
    }
    let cells = (0..m * m).map(|x| (x / m + x % m) % m).collect();
    Ok(LatinSquare::from_cells_unchecked(m, m, cells))
}

/// Block left-cyclic square removing `z = 1` for square `M`-QAM.
///
/// With `s = √M`, block `(I, J)` is the left-cyclic `s × s` square over the
/// symbols `q s .. q s + s - 1`, `q = (I + J) mod s`.
pub fn qam_standard(m: usize) -> Result<LatinSquare> {
    let s = qam_side(m)?;
    let cells = (0..m * m)
        .map(|x| {
            let (r, c) = (x / m, x % m);
            let (bi, i) = (r / s, r % s);
            let (bj, j) = (c / s, c % s);
            ((bi + bj) % s) * s + (i + j) % s
        })
        .collect();
    Ok(LatinSquare::from_cells_unchecked(m, m, cells))
}

/// Standard square for the family: removes `z = 1`.
pub fn standard_square(c: &Constellation) -> Result<LatinSquare> {
    match c.kind() {
        Kind::Pam => pam_standard(c.size()),
        Kind::Qam => qam_standard(c.size()),
        Kind::Psk => xor_square(c.size()),
    }
}

/// `L^T(i, j) = L(j, i)`. If `L` removes `z`, `L^T` removes `1/z`.
pub fn transpose(l: &LatinSquare) -> LatinSquare {
    let m = l.order;
    let cells = (0..m * m).map(|x| l.get(x % m, x / m)).collect();
    LatinSquare::from_cells_unchecked(m, l.symbols, cells)
}

/// Move column `j` to column `perm[j]`.
pub fn permute_columns(l: &LatinSquare, perm: &[usize]) -> LatinSquare {
    let m = l.order;
    let mut cells = vec![0; m * m];
    for r in 0..m {
        for (j, &pj) in perm.iter().enumerate() {
            cells[r * m + pj] = l.get(r, j);
        }
    }
    LatinSquare::from_cells_unchecked(m, l.symbols, cells)
}

/// Column permutation for the signal set's rotational symmetry `ω`: column `j`
/// moves to the label of `point(j) ω⁻¹`. If `L` removes `z`, the result removes `z ω`.
pub fn rotate_for_symmetry(l: &LatinSquare, c: &Constellation) -> Result<LatinSquare> {
    if l.order != c.size() {
        return domain("square order does not match the constellation");
    }
    Ok(permute_columns(l, &c.rotation_permutation()))
}

/// Quarter-turn column permutation for square QAM: if `L` removes `z`, the
/// result removes `z e^{jπ/2}`.
pub fn rotate_columns(l: &LatinSquare, c: &Constellation) -> Result<LatinSquare> {
    if c.kind() != Kind::Qam {
        return domain("column rotation is defined for square QAM only");
    }
    rotate_for_symmetry(l, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_pam, build_psk, build_qam};
    use crate::lattice::GaussianInt;

    #[test]
    fn latin_checks() {
        let cyc = pam_standard(4).unwrap();
        assert!(is_latin(4, cyc.cells()));
        assert!(!is_latin(2, &[0, 0, 1, 0]));
        assert!(is_latin(1, &[0]));
        assert!(LatinSquare::from_cells(2, vec![0, 0, 1, 0]).is_err());
        // symbol 2 unused
        assert!(LatinSquare::from_cells(2, vec![0, 1, 1, 3]).is_err());
    }

    #[test]
    fn exclusive_law_is_latin() {
        let xor: Vec<Vec<usize>> = (0..8).map(|i| (0..8).map(|j| i ^ j).collect()).collect();
        assert!(exclusive_law_holds(&xor));
        assert!(!exclusive_law_holds(&vec![vec![3; 4]; 4]));
        assert!(exclusive_law_holds(&qam_standard(16).unwrap().rows()));
        // agreement with is_latin on every 3×3 array over 3 symbols
        for code in 0..3usize.pow(9) {
            let cells: Vec<usize> = (0..9).map(|i| (code / 3usize.pow(i)) % 3).collect();
            let rows: Vec<Vec<usize>> = cells.chunks(3).map(|r| r.to_vec()).collect();
            assert_eq!(exclusive_law_holds(&rows), is_latin(3, &cells));
        }
    }

    #[test]
    fn xor_values() {
        assert_eq!(xor_square(2).unwrap().rows(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(xor_square(4).unwrap().get(1, 3), 2);
        assert_eq!(xor_square(16).unwrap().get(5, 9), 12);
        assert!(xor_square(6).is_err());
    }

    #[test]
    fn pam_standard_values() {
        assert_eq!(
            pam_standard(4).unwrap().rows(),
            vec![vec![0, 1, 2, 3], vec![1, 2, 3, 0], vec![2, 3, 0, 1], vec![3, 0, 1, 2]]
        );
        assert_eq!(pam_standard(2).unwrap().rows(), vec![vec![0, 1], vec![1, 0]]);
        assert_eq!(pam_standard(8).unwrap().get(3, 7), 2);
    }

    #[test]
    fn pam_standard_structure_and_removal() {
        for m in [2, 4, 8] {
            let l = pam_standard(m).unwrap();
            for i in 0..m {
                for j in 0..m {
                    assert_eq!(l.get(i, j), l.get(j, i));
                    if i + 1 < m && j >= 1 {
                        assert_eq!(l.get(i + 1, j - 1), l.get(i, j));
                    }
                }
            }
            assert!(l.removes(&build_pam(m).unwrap(), &FadeState::one()));
            assert_eq!(transpose(&l), l);
        }
    }

    #[test]
    fn qam_standard_values() {
        let l = qam_standard(16).unwrap();
        assert_eq!(l.rows()[0], (0..16).collect::<Vec<_>>());
        assert_eq!(l.get(4, 12), 0);
        assert_eq!(
            qam_standard(4).unwrap().rows(),
            vec![vec![0, 1, 2, 3], vec![1, 0, 3, 2], vec![2, 3, 0, 1], vec![3, 2, 1, 0]]
        );
        assert!(qam_standard(8).is_err());
    }

    #[test]
    fn qam_standard_blocks_are_cyclic() {
        for m in [4, 16, 64] {
            let s = qam_side(m).unwrap();
            let l = qam_standard(m).unwrap();
            assert!(is_latin(m, l.cells()));
            assert_eq!(l.symbols(), m);
            for r in 0..m {
                for c in 0..m {
                    let q = (r / s + c / s) % s;
                    assert_eq!(l.get(r, c), q * s + (r % s + c % s) % s);
                }
            }
            assert!(l.removes(&build_qam(m).unwrap(), &FadeState::one()));
        }
    }

    #[test]
    fn xor_fails_for_qam16_but_not_psk() {
        let q = build_qam(16).unwrap();
        assert!(!xor_square(16).unwrap().removes(&q, &FadeState::one()));
        // the witness triple a, a + jb, a - jb
        let a = q.label_of_lattice(GaussianInt::new(1, 1)).unwrap();
        let b = q.label_of_lattice(GaussianInt::new(1, 3)).unwrap();
        let c = q.label_of_lattice(GaussianInt::new(1, -1)).unwrap();
        assert_ne!(a ^ a, b ^ c);
        for m in [2, 4, 16] {
            assert!(xor_square(m).unwrap().removes(&build_psk(m).unwrap(), &FadeState::one()));
        }
        assert!(xor_square(4).unwrap().removes(&build_qam(4).unwrap(), &FadeState::one()));
    }

    #[test]
    fn rotation_moves_columns() {
        let c = build_qam(4).unwrap();
        let l = qam_standard(4).unwrap();
        let r = rotate_columns(&l, &c).unwrap();
        let a = c.label_of_lattice(GaussianInt::new(1, 1)).unwrap();
        let b = c.label_of_lattice(GaussianInt::new(1, -1)).unwrap();
        for row in 0..4 {
            assert_eq!(r.get(row, b), l.get(row, a));
        }
        let mut x = l.clone();
        for _ in 0..4 {
            x = rotate_columns(&x, &c).unwrap();
        }
        assert_eq!(x, l);
        assert!(rotate_columns(&l, &build_psk(4).unwrap()).is_err());
    }

    #[test]
    fn rotated_standard_removes_j() {
        let c = build_qam(16).unwrap();
        let r = rotate_columns(&qam_standard(16).unwrap(), &c).unwrap();
        assert!(r.removes(&c, &FadeState::one().rotate(4)));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let l = qam_standard(16).unwrap();
        assert_eq!(LatinSquare::parse(&l.to_text()).unwrap(), l);
        assert!(LatinSquare::parse("2 2\n0 1\n").is_err());
        assert!(LatinSquare::parse("2 3\n0 1\n1 0\n").is_err());
        assert!(LatinSquare::parse("2 2\n0 1\n0 1\n").is_err());
        assert!(LatinSquare::parse("").is_err());
    }

    #[test]
    fn canonical_relabel() {
        let l = LatinSquare::from_rows(&[vec![2, 0, 1], vec![0, 1, 2], vec![1, 2, 0]]).unwrap();
        let c = l.canonical();
        assert_eq!(c.rows()[0], vec![0, 1, 2]);
        assert_eq!(c.rows()[1], vec![1, 2, 0]);
    }
}
