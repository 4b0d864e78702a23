//! Completion of constrained partial Latin squares.
//!
//! Cells that must share a symbol are merged into one vertex; two vertices
//! conflict when they share a row or a column. Completing the square with `t`
//! symbols is then a proper `t`-colouring of the vertex conflict graph, which
//! is searched with DSatur-style backtracking for increasing `t`.

use std::time::{Duration, Instant};

use super::square::{relabel_first_occurrence, LatinSquare};
use crate::error::{domain, Error, Result};
use crate::singular_fade::ConstraintSet;

/// An `M × M` array with optional pre-filled symbols and groups of cells that
/// must all carry the same symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialSquare {
    order: usize,
    cells: Vec<Option<usize>>,
    groups: Vec<Vec<(usize, usize)>>,
}

impl PartialSquare {
    pub fn empty(order: usize) -> Self {
        PartialSquare { order, cells: vec![None; order * order], groups: Vec::new() }
    }

    /// The constrained partial square of a fade state: every constraint group
    /// becomes a same-symbol group.
    pub fn from_constraints(order: usize, constraints: &ConstraintSet) -> Result<Self> {
        let mut p = PartialSquare::empty(order);
        for g in &constraints.groups {
            p.add_group(g.clone())?;
        }
        Ok(p)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn groups(&self) -> &[Vec<(usize, usize)>] {
        &self.groups
    }

    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        self.cells[row * self.order + col]
    }

    pub fn set(&mut self, row: usize, col: usize, symbol: usize) -> Result<()> {
        if row >= self.order || col >= self.order {
            return domain(format!("cell ({row}, {col}) outside {0}×{0}", self.order));
        }
        self.cells[row * self.order + col] = Some(symbol);
        Ok(())
    }

    pub fn add_group(&mut self, group: Vec<(usize, usize)>) -> Result<()> {
        if let Some(&(r, c)) = group.iter().find(|&&(r, c)| r >= self.order || c >= self.order) {
            return domain(format!("cell ({r}, {c}) outside {0}×{0}", self.order));
        }
        self.groups.push(group);
        Ok(())
    }
}

/// Search limits for [`complete_cpls`].
#[derive(Clone, Debug)]
pub struct CompletionOptions {
    /// Largest symbol count accepted.
    pub t_max: usize,
    /// Backtracking nodes allowed per symbol count; `None` searches exhaustively.
    pub node_budget: Option<u64>,
    /// Optional wall-clock limit for the whole completion. Results then depend
    /// on machine speed, so it is off by default.
    pub time_budget: Option<Duration>,
}

impl CompletionOptions {
    /// Exhaustive search for `M <= 4`, node-budgeted search above.
    pub fn for_order(order: usize) -> Self {
        CompletionOptions {
            t_max: order + 4,
            node_budget: if order <= 4 { None } else { Some(200_000) },
            time_budget: None,
        }
    }
}

/// A completed square and whether its symbol count is proven minimal.
#[derive(Clone, Debug, PartialEq)]
pub struct Completion {
    pub square: LatinSquare,
    /// Every smaller symbol count was refuted by exhaustive search.
    pub minimal: bool,
    pub nodes: u64,
}

struct Vertex {
    rows: u64,
    cols: u64,
    cells: Vec<(usize, usize)>,
    fixed: Option<usize>,
}

struct Graph {
    order: usize,
    vertices: Vec<Vertex>,
    // vertices touching each row and column
    by_row: Vec<Vec<usize>>,
    by_col: Vec<Vec<usize>>,
}

fn find(parent: &mut [usize], x: usize) -> usize {
    let mut r = x;
    while parent[r] != r {
        r = parent[r];
    }
    let mut y = x;
    while parent[y] != r {
        let next = parent[y];
        parent[y] = r;
        y = next;
    }
    r
}

impl Graph {
    fn build(p: &PartialSquare) -> Result<Graph> {
        let m = p.order;
        if m == 0 || m > 64 {
            return domain(format!("completion supports orders 1..=64, got {m}"));
        }
        let mut parent: Vec<usize> = (0..m * m).collect();
        for g in &p.groups {
            for w in g.windows(2) {
                let a = find(&mut parent, w[0].0 * m + w[0].1);
                let b = find(&mut parent, w[1].0 * m + w[1].1);
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut vid = vec![usize::MAX; m * m];
        let mut vertices: Vec<Vertex> = Vec::new();
        for x in 0..m * m {
            let root = find(&mut parent, x);
            if vid[root] == usize::MAX {
                vid[root] = vertices.len();
                vertices.push(Vertex { rows: 0, cols: 0, cells: Vec::new(), fixed: None });
            }
            let v = &mut vertices[vid[root]];
            let (r, c) = (x / m, x % m);
            if v.rows & (1 << r) != 0 || v.cols & (1 << c) != 0 {
                return domain(format!("constraint group puts two cells in one line at ({r}, {c})"));
            }
            v.rows |= 1 << r;
            v.cols |= 1 << c;
            v.cells.push((r, c));
            if let Some(s) = p.cells[x] {
                match v.fixed {
                    Some(f) if f != s => return domain(format!("group containing ({r}, {c}) has symbols {f} and {s}")),
                    _ => v.fixed = Some(s),
                }
            }
        }
        let n = vertices.len();
        let mut by_row = vec![Vec::new(); m];
        let mut by_col = vec![Vec::new(); m];
        for (i, v) in vertices.iter().enumerate() {
            for &(r, c) in &v.cells {
                by_row[r].push(i);
                by_col[c].push(i);
            }
        }
        let mut neighbours = vec![Vec::new(); n];
        for (i, v) in vertices.iter().enumerate() {
            let mut adj: Vec<usize> = v
                .cells
                .iter()
                .flat_map(|&(r, c)| by_row[r].iter().chain(by_col[c].iter()).copied())
                .filter(|&u| u != i)
                .collect();
            adj.sort_unstable();
            adj.dedup();
            neighbours[i] = adj;
        }
        // pre-filled symbols must not clash
        for (i, v) in vertices.iter().enumerate() {
            if let Some(s) = v.fixed {
                if neighbours[i].iter().any(|&u| vertices[u].fixed == Some(s)) {
                    return domain(format!("pre-filled symbol {s} repeats in a row or column"));
                }
            }
        }
        Ok(Graph { order: m, vertices, by_row, by_col })
    }
}

enum Outcome {
    Found(Vec<usize>),
    Refuted,
    OutOfBudget,
}

struct Search<'a> {
    g: &'a Graph,
    t: usize,
    color: Vec<Option<usize>>,
    row_used: Vec<u128>,
    col_used: Vec<u128>,
    uses: Vec<usize>,
    nodes: u64,
    node_budget: Option<u64>,
    deadline: Option<Instant>,
    aborted: bool,
}

impl<'a> Search<'a> {
    fn new(g: &'a Graph, t: usize, node_budget: Option<u64>, deadline: Option<Instant>) -> Self {
        let m = g.order;
        Search {
            g,
            t,
            color: vec![None; g.vertices.len()],
            row_used: vec![0; m],
            col_used: vec![0; m],
            uses: vec![0; t],
            nodes: 0,
            node_budget,
            deadline,
            aborted: false,
        }
    }

    fn mask(&self) -> u128 {
        if self.t >= 128 {
            u128::MAX
        } else {
            (1u128 << self.t) - 1
        }
    }

    fn available(&self, v: usize) -> u128 {
        let mut used = 0;
        for &(r, c) in &self.g.vertices[v].cells {
            used |= self.row_used[r] | self.col_used[c];
        }
        !used & self.mask()
    }

    fn assign(&mut self, v: usize, s: usize) {
        for &(r, c) in &self.g.vertices[v].cells {
            self.row_used[r] |= 1 << s;
            self.col_used[c] |= 1 << s;
        }
        self.color[v] = Some(s);
        self.uses[s] += 1;
    }

    fn unassign(&mut self, v: usize, s: usize) {
        for &(r, c) in &self.g.vertices[v].cells {
            self.row_used[r] &= !(1 << s);
            self.col_used[c] &= !(1 << s);
        }
        self.color[v] = None;
        self.uses[s] -= 1;
    }

    // With t = M every line holds every symbol exactly once; a symbol missing
    // from a line that no open vertex on it can take is a dead end.
    fn lines_coverable(&self, v: usize) -> bool {
        let full = self.mask();
        for &(r, c) in &self.g.vertices[v].cells {
            for (used, line) in [(self.row_used[r], &self.g.by_row[r]), (self.col_used[c], &self.g.by_col[c])] {
                let mut cover = used;
                for &u in line {
                    if self.color[u].is_none() {
                        cover |= self.available(u);
                    }
                }
                if cover != full {
                    return false;
                }
            }
        }
        true
    }

    fn pick(&self) -> Option<(usize, u128)> {
        let mut best: Option<(usize, u128, u32, usize)> = None;
        for v in 0..self.g.vertices.len() {
            if self.color[v].is_some() {
                continue;
            }
            let avail = self.available(v);
            let n = avail.count_ones();
            let size = self.g.vertices[v].cells.len();
            let better = match best {
                None => true,
                Some((_, _, bn, bs)) => n < bn || (n == bn && size > bs),
            };
            if better {
                best = Some((v, avail, n, size));
                if n == 0 {
                    break;
                }
            }
        }
        best.map(|(v, a, _, _)| (v, a))
    }

    fn out_of_budget(&mut self) -> bool {
        if self.node_budget.is_some_and(|b| self.nodes >= b) {
            self.aborted = true;
        }
        if self.nodes.is_multiple_of(1024) && self.deadline.is_some_and(|d| Instant::now() >= d) {
            self.aborted = true;
        }
        self.aborted
    }

    fn run(&mut self) -> bool {
        let Some((v, avail)) = self.pick() else {
            return true;
        };
        if avail == 0 {
            return false;
        }
        self.nodes += 1;
        if self.out_of_budget() {
            return false;
        }
        let exact_lines = self.t == self.g.order;
        let mut tried_new = false;
        for s in 0..self.t {
            if avail & (1 << s) == 0 {
                continue;
            }
            // Unused symbols are interchangeable: try only the first one.
            if self.uses[s] == 0 {
                if tried_new {
                    continue;
                }
                tried_new = true;
            }
            self.assign(v, s);
            let ok = (!exact_lines || self.lines_coverable(v)) && self.run();
            if ok {
                return true;
            }
            self.unassign(v, s);
            if self.aborted {
                return false;
            }
        }
        false
    }

    fn solve(mut self) -> (Outcome, u64) {
        for (v, vert) in self.g.vertices.iter().enumerate() {
            if let Some(s) = vert.fixed {
                if s >= self.t {
                    return (Outcome::Refuted, 0);
                }
                self.assign(v, s);
            }
        }
        let found = self.run();
        let outcome = if found {
            let m = self.g.order;
            let mut cells = vec![0; m * m];
            for (v, vert) in self.g.vertices.iter().enumerate() {
                let s = self.color[v].expect("complete colouring");
                for &(r, c) in &vert.cells {
                    cells[r * m + c] = s;
                }
            }
            Outcome::Found(cells)
        } else if self.aborted {
            Outcome::OutOfBudget
        } else {
            Outcome::Refuted
        };
        (outcome, self.nodes)
    }
}

// Single DSatur pass with an unbounded palette.
fn greedy(g: &Graph) -> Vec<usize> {
    let m = g.order;
    let t = g.vertices.len().min(128);
    let mut s = Search::new(g, t, None, None);
    for (v, vert) in g.vertices.iter().enumerate() {
        if let Some(x) = vert.fixed {
            s.assign(v, x);
        }
    }
    while let Some((v, avail)) = s.pick() {
        let sym = avail.trailing_zeros() as usize;
        s.assign(v, sym);
    }
    let mut cells = vec![0; m * m];
    for (v, vert) in g.vertices.iter().enumerate() {
        for &(r, c) in &vert.cells {
            cells[r * m + c] = s.color[v].expect("greedy colours every vertex");
        }
    }
    cells
}

/// Complete `p` to a Latin square with as few symbols as the search can
/// establish, keeping every group monochromatic.
///
/// Symbol counts `M, M+1, ..., t_max` are tried in turn; the first success is
/// returned in canonical symbol order. A final greedy pass is used when every
/// budgeted search runs out.
pub fn complete_cpls(p: &PartialSquare, opts: &CompletionOptions) -> Result<Completion> {
    let g = Graph::build(p)?;
    let m = p.order;
    let deadline = opts.time_budget.map(|d| Instant::now() + d);
    let fixed_max = g.vertices.iter().filter_map(|v| v.fixed).max().map_or(0, |s| s + 1);
    let mut minimal = true;
    let mut total = 0;
    let t_max = opts.t_max.min(128);
    for t in m.max(fixed_max)..=t_max {
        let (outcome, nodes) = Search::new(&g, t, opts.node_budget, deadline).solve();
        total += nodes;
        match outcome {
            Outcome::Found(cells) => {
                let square = LatinSquare::from_cells(m, relabel_first_occurrence(&cells))?;
                return Ok(Completion { minimal: minimal && square.symbols() == t, square, nodes: total });
            }
            Outcome::Refuted => {}
            Outcome::OutOfBudget => minimal = false,
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            break;
        }
    }
    let cells = greedy(&g);
    let square = LatinSquare::from_cells(m, relabel_first_occurrence(&cells))?;
    if square.symbols() <= t_max {
        return Ok(Completion { square, minimal: false, nodes: total });
    }
    Err(Error::Completion {
        fade: String::from("<unspecified>"),
        reason: format!("no completion with at most {t_max} symbols (greedy needs {})", square.symbols()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::{build_pam, build_qam};
    use crate::latin::square::pam_standard;
    use crate::singular_fade::{constraints_for_fade, enumerate_singular_fades, FadeState};

    #[test]
    fn bpsk_z1() {
        let c = build_pam(2).unwrap();
        let cs = constraints_for_fade(&c, &FadeState::one());
        let p = PartialSquare::from_constraints(2, &cs).unwrap();
        let done = complete_cpls(&p, &CompletionOptions::for_order(2)).unwrap();
        assert_eq!(done.square.rows(), vec![vec![0, 1], vec![1, 0]]);
        assert!(done.minimal);
        // clusters {(0,1),(1,0)} and {(0,0),(1,1)}
        assert_eq!(done.square.get(0, 1), done.square.get(1, 0));
        assert_eq!(done.square.get(0, 0), done.square.get(1, 1));
    }

    #[test]
    fn pam4_z1_gives_cyclic_square() {
        let c = build_pam(4).unwrap();
        let cs = constraints_for_fade(&c, &FadeState::one());
        let p = PartialSquare::from_constraints(4, &cs).unwrap();
        let done = complete_cpls(&p, &CompletionOptions::for_order(4)).unwrap();
        assert_eq!(done.square, pam_standard(4).unwrap());
        assert!(done.minimal);
    }

    #[test]
    fn empty_constraints() {
        let p = PartialSquare::empty(4);
        let done = complete_cpls(&p, &CompletionOptions::for_order(4)).unwrap();
        assert_eq!(done.square.symbols(), 4);
        assert!(done.minimal);
    }

    #[test]
    fn prefilled_cells_respected() {
        let mut p = PartialSquare::empty(3);
        p.set(0, 0, 2).unwrap();
        p.set(1, 1, 2).unwrap();
        let done = complete_cpls(&p, &CompletionOptions::for_order(3)).unwrap();
        let l = &done.square;
        assert_eq!(l.get(0, 0), l.get(1, 1));
        assert_eq!(l.symbols(), 3);
    }

    #[test]
    fn inconsistent_inputs_rejected() {
        let mut p = PartialSquare::empty(3);
        p.add_group(vec![(0, 0), (0, 1)]).unwrap();
        assert!(complete_cpls(&p, &CompletionOptions::for_order(3)).is_err());
        let mut p = PartialSquare::empty(3);
        p.set(0, 0, 1).unwrap();
        p.set(0, 2, 1).unwrap();
        assert!(complete_cpls(&p, &CompletionOptions::for_order(3)).is_err());
        assert!(p.set(3, 0, 0).is_err());
    }

    #[test]
    fn needs_extra_symbol() {
        // Rows 0 and 1 read [a b x] and [b a y]; x and y must differ from a, b
        // and from each other, so three symbols cannot work.
        let mut p = PartialSquare::empty(3);
        p.add_group(vec![(0, 0), (1, 1)]).unwrap();
        p.add_group(vec![(0, 1), (1, 0)]).unwrap();
        let done = complete_cpls(&p, &CompletionOptions::for_order(3)).unwrap();
        assert!(done.square.symbols() > 3);
        assert!(done.minimal);
        let l = &done.square;
        assert_eq!(l.get(0, 0), l.get(1, 1));
        assert_eq!(l.get(0, 1), l.get(1, 0));
    }

    #[test]
    fn qam4_every_fade_minimal() {
        let c = build_qam(4).unwrap();
        for f in enumerate_singular_fades(&c) {
            let cs = constraints_for_fade(&c, &f);
            let p = PartialSquare::from_constraints(4, &cs).unwrap();
            let done = complete_cpls(&p, &CompletionOptions::for_order(4)).unwrap();
            assert!(done.square.satisfies(&cs), "{f}");
            assert!(done.minimal);
        }
    }
}
