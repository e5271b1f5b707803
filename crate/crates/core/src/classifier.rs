//! Transitivity, orthogonal splittings, transverseness and block counting.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::config::TOL_CONTAIN;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::geometry::{numerical_rank, singular_values, RankTolerance, Subspace};
use crate::system::CylindricBilliardSystem;

/// Threshold on `‖P_i P_j‖` above which two base spaces are joined by an edge.
pub const EDGE_TOL: f64 = 1e-9;

/// Largest cylinder count accepted by [`is_transverse`].
pub const ENUMERATION_LIMIT: usize = 24;

/// Undirected graph on `n` vertices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    /// Connected components, each sorted, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let adj = self.adjacency();
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.n > 0 && self.components().len() == 1
    }
}

pub fn non_orthogonality_graph(bases: &[Subspace]) -> Result<Graph> {
    if let Some(first) = bases.first() {
        let d = first.ambient_dim();
        for b in bases {
            crate::geometry::check_dim(d, b.ambient_dim())?;
        }
    }
    let mut edges = Vec::new();
    for i in 0..bases.len() {
        for j in i + 1..bases.len() {
            if bases[i].overlap(&bases[j]) > EDGE_TOL {
                edges.push((i, j));
            }
        }
    }
    Ok(Graph { n: bases.len(), edges })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Part {
    B1,
    B2,
}

/// A non-trivial orthogonal splitting `B1 ⊕ B2` together with the part each
/// base space lies in.
#[derive(Debug, Clone)]
pub struct SplittingWitness {
    pub b1: Subspace,
    pub b2: Subspace,
    pub assignment: BTreeMap<usize, Part>,
    /// Set when no base space pinned the splitting down (free flight).
    pub degenerate: bool,
}

impl SplittingWitness {
    /// Checks `B1 ⟂ B2`, `dim B1 + dim B2 = d`, both non-trivial, and
    /// `L_i ⊆ B_part(i)` for every assigned `i` (indices into `bases`).
    pub fn check(&self, bases: &[Subspace]) -> Result<()> {
        let d = self.b1.ambient_dim();
        if self.b1.dim() == 0 || self.b2.dim() == 0 || self.b1.dim() + self.b2.dim() != d {
            return Err(Error::Numerical(format!(
                "splitting dimensions {} + {} do not form a non-trivial splitting of {d}",
                self.b1.dim(),
                self.b2.dim()
            )));
        }
        if self.b1.overlap(&self.b2) > TOL_CONTAIN {
            return Err(Error::Numerical("splitting parts are not orthogonal".into()));
        }
        for (&i, &part) in &self.assignment {
            let target = match part {
                Part::B1 => &self.b1,
                Part::B2 => &self.b2,
            };
            let l = bases.get(i).ok_or(Error::IndexOutOfRange { index: i, len: bases.len() })?;
            if target.containment_residual(l) >= TOL_CONTAIN {
                return Err(Error::Numerical(format!("base space {i} is not inside its assigned part")));
            }
        }
        Ok(())
    }

    fn coordinate_split(d: usize) -> Self {
        let b1 = Subspace::coordinate(d, &[0]);
        let b2 = b1.complement();
        Self { b1, b2, assignment: BTreeMap::new(), degenerate: true }
    }
}

#[derive(Debug, Clone)]
pub struct Transitivity {
    pub transitive: bool,
    pub witness: Option<SplittingWitness>,
}

/// Decides transitivity of `bases` in `d`-space: connected non-orthogonality
/// graph and full span. A non-transitive answer carries a checked witness.
pub fn is_transitive(d: usize, bases: &[Subspace]) -> Result<Transitivity> {
    for b in bases {
        crate::geometry::check_dim(d, b.ambient_dim())?;
    }
    if bases.is_empty() {
        return Ok(Transitivity { transitive: false, witness: Some(SplittingWitness::coordinate_split(d)) });
    }
    let span = Subspace::span_of(d, bases)?;
    let graph = non_orthogonality_graph(bases)?;
    let components = graph.components();
    if span.is_full() && components.len() == 1 {
        return Ok(Transitivity { transitive: true, witness: None });
    }
    let witness = if !span.is_full() {
        if span.is_zero() {
            SplittingWitness::coordinate_split(d)
        } else {
            let assignment = (0..bases.len()).map(|i| (i, Part::B1)).collect();
            let b2 = span.complement();
            SplittingWitness { b1: span, b2, assignment, degenerate: false }
        }
    } else {
        let first: Vec<Subspace> = components[0].iter().map(|&i| bases[i].clone()).collect();
        let b1 = Subspace::span_of(d, &first)?;
        let b2 = b1.complement();
        let mut assignment = BTreeMap::new();
        for (c, comp) in components.iter().enumerate() {
            for &i in comp {
                assignment.insert(i, if c == 0 { Part::B1 } else { Part::B2 });
            }
        }
        SplittingWitness { b1, b2, assignment, degenerate: false }
    };
    witness.check(bases)?;
    Ok(Transitivity { transitive: false, witness: Some(witness) })
}

/// Dimension of the space of symmetric matrices commuting with every
/// infinitesimal rotation of every `L_i` (rotations fixing `A_i`). The value
/// is 1 exactly when the generated rotation group acts irreducibly.
pub fn commutant_dimension(d: usize, bases: &[Subspace]) -> Result<usize> {
    let mut generators: Vec<DMatrix<f64>> = Vec::new();
    for l in bases {
        crate::geometry::check_dim(d, l.ambient_dim())?;
        let b = l.basis();
        for a in 0..l.dim() {
            for c in a + 1..l.dim() {
                let u = b.column(a);
                let w = b.column(c);
                generators.push(u * w.transpose() - w * u.transpose());
            }
        }
    }
    // Symmetric unknowns X_pq, p <= q.
    let index: Vec<(usize, usize)> = (0..d).flat_map(|p| (p..d).map(move |q| (p, q))).collect();
    let n = index.len();
    if generators.is_empty() {
        return Ok(n);
    }
    let mut rows = DMatrix::<f64>::zeros(generators.len() * d * d, n);
    for (g_idx, g) in generators.iter().enumerate() {
        for (col, &(p, q)) in index.iter().enumerate() {
            // X = E_pq + E_qp (or E_pp); contribution of X to XG - GX.
            let mut x = DMatrix::<f64>::zeros(d, d);
            x[(p, q)] = 1.0;
            x[(q, p)] = 1.0;
            let c = &x * g - g * &x;
            for r in 0..d * d {
                rows[(g_idx * d * d + r, col)] = c[(r / d, r % d)];
            }
        }
    }
    Ok(n - numerical_rank(&rows, RankTolerance::EXACT))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transverseness {
    pub transverse: bool,
    /// Lexicographically smallest violating index set.
    pub counterexample: Option<Vec<usize>>,
}

/// Enumerates every non-empty index set `I`; a non-transitive `I` must admit
/// some `j0` with `P_{E+}(A_j0) = E+`, where `E+ = span{L_i : i ∈ I}`.
pub fn is_transverse(system: &CylindricBilliardSystem, exec: Exec) -> Result<Transverseness> {
    let k = system.num_cylinders();
    if k > ENUMERATION_LIMIT {
        return Err(Error::EnumerationGuard { k, limit: ENUMERATION_LIMIT });
    }
    let ctx = TransverseCtx::new(system);
    // Tasks in lexicographic order: {i} alone, then every subtree rooted at
    // (i, j). The first task that reports a violation holds the smallest one.
    let mut tasks: Vec<(usize, Option<usize>)> = Vec::new();
    for i in 0..k {
        tasks.push((i, None));
        for j in i + 1..k {
            tasks.push((i, Some(j)));
        }
    }
    let results = exec.map_slice(&tasks, |&(i, j)| ctx.search(i, j));
    for r in results {
        if let Some(ce) = r? {
            return Ok(Transverseness { transverse: false, counterexample: Some(ce) });
        }
    }
    Ok(Transverseness { transverse: true, counterexample: None })
}

struct TransverseCtx<'a> {
    d: usize,
    bases: &'a [Subspace],
    generators: &'a [Subspace],
    adjacency: Vec<u32>,
}

impl<'a> TransverseCtx<'a> {
    fn new(system: &'a CylindricBilliardSystem) -> Self {
        let bases = system.base_spaces();
        let k = bases.len();
        let mut adjacency = vec![0u32; k];
        for i in 0..k {
            for j in 0..k {
                if i != j && bases[i].overlap(&bases[j]) > EDGE_TOL {
                    adjacency[i] |= 1 << j;
                }
            }
        }
        Self { d: system.dim(), bases, generators: system.generator_spaces(), adjacency }
    }

    fn connected(&self, mask: u32) -> bool {
        let start = mask & mask.wrapping_neg();
        let mut seen = start;
        let mut frontier = start;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = self.adjacency[v] & mask & !seen;
            seen |= new;
            frontier |= new;
        }
        seen == mask
    }

    /// `P_{E+}(A_j) = E+` for some `j`.
    fn covered(&self, e_plus: &Subspace) -> bool {
        let m = e_plus.dim();
        self.generators.iter().any(|a| {
            if a.dim() < m {
                return false;
            }
            let c = e_plus.basis().transpose() * a.basis();
            let s = singular_values(&c);
            // Singular values of a product of orthonormal frames are cosines.
            s.len() >= m && s[m - 1] > 1e-9
        })
    }

    fn extend(&self, span: &Subspace, i: usize) -> Subspace {
        let mut v = span.basis_vectors();
        v.extend(self.bases[i].basis_vectors());
        Subspace::orthonormalize(self.d, &v).expect("dimensions checked at construction")
    }

    fn search(&self, i: usize, j: Option<usize>) -> Result<Option<Vec<usize>>> {
        let mut memo: HashMap<Vec<i64>, bool> = HashMap::new();
        let span_i = self.bases[i].clone();
        match j {
            None => Ok(self.violates(&[i], 1 << i, &span_i, &mut memo).then(|| vec![i])),
            Some(j) => {
                let span = self.extend(&span_i, j);
                let mut stack = vec![i, j];
                Ok(self.dfs(&mut stack, (1 << i) | (1 << j), &span, &mut memo))
            }
        }
    }

    fn dfs(
        &self,
        current: &mut Vec<usize>,
        mask: u32,
        span: &Subspace,
        memo: &mut HashMap<Vec<i64>, bool>,
    ) -> Option<Vec<usize>> {
        if self.violates(current, mask, span, memo) {
            return Some(current.clone());
        }
        let last = *current.last().expect("non-empty");
        for next in last + 1..self.bases.len() {
            let s = self.extend(span, next);
            current.push(next);
            let found = self.dfs(current, mask | (1 << next), &s, memo);
            current.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }

    fn violates(&self, _set: &[usize], mask: u32, span: &Subspace, memo: &mut HashMap<Vec<i64>, bool>) -> bool {
        if span.is_full() {
            // Transitive iff connected; a non-transitive full-span set can never
            // be covered since every L_j meets E+ = R^d.
            return !self.connected(mask);
        }
        let key = fingerprint(span);
        !*memo.entry(key).or_insert_with(|| self.covered(span))
    }
}

fn fingerprint(s: &Subspace) -> Vec<i64> {
    s.projector().iter().map(|x| (x * 1e9).round() as i64).collect()
}

/// Transitivity of the distinct base spaces visited by `labels`.
pub fn is_transitive_sequence(labels: &[usize], system: &CylindricBilliardSystem) -> Result<bool> {
    let mut uniq: Vec<usize> = labels.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    let bases = collect_bases(&uniq, system)?;
    Ok(is_transitive(system.dim(), &bases)?.transitive)
}

fn collect_bases(labels: &[usize], system: &CylindricBilliardSystem) -> Result<Vec<Subspace>> {
    labels.iter().map(|&i| system.base_space(i).cloned()).collect()
}

/// Greedy left-to-right count of consecutive minimal transitive blocks.
/// Transitivity is monotone under adding base spaces, so the greedy count is
/// the largest possible number of disjoint consecutive transitive blocks.
pub fn count_transitive_blocks(labels: &[usize], system: &CylindricBilliardSystem) -> Result<usize> {
    let mut cache: HashMap<Vec<usize>, bool> = HashMap::new();
    let mut blocks = 0;
    let mut set: Vec<usize> = Vec::new();
    for &l in labels {
        system.base_space(l)?;
        if let Err(pos) = set.binary_search(&l) {
            set.insert(pos, l);
        } else {
            continue;
        }
        let t = match cache.get(&set) {
            Some(&t) => t,
            None => {
                let t = is_transitive(system.dim(), &collect_bases(&set, system)?)?.transitive;
                cache.insert(set.clone(), t);
                t
            }
        };
        if t {
            blocks += 1;
            set.clear();
        }
    }
    Ok(blocks)
}

/// True iff every collided base space lies in `b1` or in `b2`.
pub fn splits_according_to(
    collided: &[usize],
    b1: &Subspace,
    b2: &Subspace,
    system: &CylindricBilliardSystem,
) -> Result<bool> {
    let d = system.dim();
    if b1.ambient_dim() != d || b2.ambient_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: b1.ambient_dim().max(b2.ambient_dim()) });
    }
    if b1.dim() + b2.dim() != d || b1.overlap(b2) > TOL_CONTAIN {
        return Err(Error::InvalidInput("B1 and B2 must be orthogonal and sum to the whole space".into()));
    }
    for &i in collided {
        let l = system.base_space(i)?;
        if b1.containment_residual(l) >= TOL_CONTAIN && b2.containment_residual(l) >= TOL_CONTAIN {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Lattice;
    use crate::system::{CylinderSpec, Generator};

    fn coord(d: usize, axes: &[usize]) -> Subspace {
        Subspace::coordinate(d, axes)
    }

    /// Integer system on Z^d whose base spaces are coordinate subspaces.
    fn coordinate_system(d: usize, bases: &[&[usize]]) -> CylindricBilliardSystem {
        let cylinders = bases
            .iter()
            .map(|axes| {
                let gens = (0..d)
                    .filter(|a| !axes.contains(a))
                    .map(|a| (0..d).map(|b| i64::from(a == b)).collect())
                    .collect();
                CylinderSpec::new(Generator::Lattice(gens), 0.1, vec![0.0; d])
            })
            .collect();
        CylindricBilliardSystem::new(Lattice::integer(d), cylinders).unwrap()
    }

    #[test]
    fn graph_edges() {
        let g = non_orthogonality_graph(&[coord(3, &[0, 1]), coord(3, &[1, 2])]).unwrap();
        assert_eq!(g.edges, vec![(0, 1)]);
        let g = non_orthogonality_graph(&[coord(4, &[0, 1]), coord(4, &[2, 3])]).unwrap();
        assert!(g.edges.is_empty());
    }

    #[test]
    fn transitivity_examples() {
        let t = is_transitive(3, &[coord(3, &[0, 1]), coord(3, &[1, 2])]).unwrap();
        assert!(t.transitive);
        assert_eq!(commutant_dimension(3, &[coord(3, &[0, 1]), coord(3, &[1, 2])]).unwrap(), 1);

        let bases = [coord(4, &[0, 1]), coord(4, &[2, 3])];
        let t = is_transitive(4, &bases).unwrap();
        assert!(!t.transitive);
        let w = t.witness.unwrap();
        assert!(w.b1.same_as(&bases[0], 1e-12));
        assert!(w.b2.same_as(&bases[1], 1e-12));
        assert_eq!(w.assignment[&1], Part::B2);

        assert!(is_transitive(3, &[Subspace::full(3)]).unwrap().transitive);
    }

    #[test]
    fn empty_list_is_not_transitive() {
        let t = is_transitive(3, &[]).unwrap();
        assert!(!t.transitive);
        assert!(t.witness.unwrap().degenerate);
    }

    #[test]
    fn span_deficient_witness() {
        let t = is_transitive(4, &[coord(4, &[0, 1]), coord(4, &[1, 2])]).unwrap();
        assert!(!t.transitive);
        let w = t.witness.unwrap();
        assert_eq!(w.b2.dim(), 1);
        assert!(w.b2.same_as(&coord(4, &[3]), 1e-12));
    }

    #[test]
    fn commutant_examples() {
        assert_eq!(commutant_dimension(3, &[Subspace::full(3)]).unwrap(), 1);
        assert!(commutant_dimension(4, &[coord(4, &[0, 1]), coord(4, &[2, 3])]).unwrap() >= 2);
        assert_eq!(commutant_dimension(2, &[]).unwrap(), 3);
    }

    #[test]
    fn orthogonal_blocks_are_not_transverse() {
        let s = coordinate_system(4, &[&[0, 1], &[2, 3]]);
        for exec in [Exec::Sequential, Exec::Parallel] {
            let t = is_transverse(&s, exec).unwrap();
            assert!(!t.transverse);
            assert_eq!(t.counterexample, Some(vec![0, 1]));
        }
    }

    #[test]
    fn tilted_planes_are_transverse() {
        // L1 = span(e0, e1), L2 = span(e0 - e2, e1 - e3): a connected direct sum.
        let cylinders = vec![
            CylinderSpec::new(Generator::Lattice(vec![vec![0, 0, 1, 0], vec![0, 0, 0, 1]]), 0.1, vec![0.0; 4]),
            CylinderSpec::new(Generator::Lattice(vec![vec![1, 0, 1, 0], vec![0, 1, 0, 1]]), 0.1, vec![0.0; 4]),
        ];
        let s = CylindricBilliardSystem::new(Lattice::integer(4), cylinders).unwrap();
        assert!(is_transverse(&s, Exec::Sequential).unwrap().transverse);
        assert!(is_transverse(&sphere(), Exec::Sequential).unwrap().transverse);
    }

    fn sphere() -> CylindricBilliardSystem {
        coordinate_system(3, &[&[0, 1, 2]])
    }

    #[test]
    fn coordinate_triangle_is_not_transverse() {
        // E+ = L1 is 2-dimensional while every generator is a line.
        let s = coordinate_system(3, &[&[0, 1], &[1, 2], &[0, 2]]);
        let t = is_transverse(&s, Exec::Parallel).unwrap();
        assert_eq!(t.counterexample, Some(vec![0]));
    }

    #[test]
    fn enumeration_guard_refuses() {
        let axes: Vec<&[usize]> = vec![&[0, 1]; 25];
        let s = coordinate_system(3, &axes);
        assert!(matches!(is_transverse(&s, Exec::Sequential), Err(Error::EnumerationGuard { k: 25, .. })));
    }

    #[test]
    fn sequences_and_blocks() {
        let one = coordinate_system(3, &[&[0, 1, 2]]);
        assert!(is_transitive_sequence(&[0, 0, 0], &one).unwrap());

        let two = coordinate_system(4, &[&[0, 1], &[2, 3]]);
        assert!(!is_transitive_sequence(&[0, 0], &two).unwrap());
        assert_eq!(count_transitive_blocks(&[0, 0, 0], &two).unwrap(), 0);

        let tri = coordinate_system(3, &[&[0, 1], &[1, 2], &[0, 2]]);
        let sigma0 = [0, 1];
        let five: Vec<usize> = sigma0.iter().copied().cycle().take(10).collect();
        assert_eq!(count_transitive_blocks(&five, &tri).unwrap(), 5);
    }

    #[test]
    fn splitting_membership() {
        let two = coordinate_system(4, &[&[0, 1], &[2, 3]]);
        let b1 = coord(4, &[0, 1]);
        let b2 = coord(4, &[2, 3]);
        assert!(splits_according_to(&[0], &b1, &b2, &two).unwrap());
        let straddle = coordinate_system(4, &[&[0, 1], &[1, 2]]);
        assert!(!splits_according_to(&[1], &b1, &b2, &straddle).unwrap());
        assert!(splits_according_to(&[0], &b1, &b1, &two).is_err());
    }
}
