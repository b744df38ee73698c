//! Truncated bosonic Fock space over a finite mode set.
//!
//! A basis state is a multiset of mode indices with at most `n_max`
//! elements, stored as a nondecreasing tuple. States are ordered by
//! (total phonon number, lexicographic tuple); the vacuum is index 0.
//! Ranking within a sector is combinatorial (stars-and-bars prefix
//! counting), so index lookups never touch a hash map and enumeration
//! and ranking can be cross-validated as a bijection.
//!
//! The Hamiltonian at total momentum `P` is diagonal in everything except
//! the coupling term: each state carries `1/2 (P - K)^2 + sum omega(k_j)
//! + kappa N` with `K` the summed mode momentum, and `phi(v)` connects a
//! state to its single-creation successors with element
//! `g_j sqrt(n_j + 1)`. Off-diagonal elements are stored once (upper
//! triangle); a prebuilt symmetrized index makes row-parallel matvec
//! deterministic with a fixed per-row accumulation order.

use crate::error::{CoreError, Result};
use crate::grid::Grid;
use crate::model::ModelParams;
use crate::vec3::{self, Vec3};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Representation cap for occupation tuples; desk-scale runs use 2 or 3.
pub const MAX_NMAX: usize = 8;

/// Default ceiling on the number of basis states.
pub const DEFAULT_STATE_BUDGET: usize = 4_000_000;

/// Nondecreasing tuple of occupied mode indices (with multiplicity).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct State {
    modes: [u32; MAX_NMAX],
    len: u8,
}

impl State {
    pub const VACUUM: State = State { modes: [0; MAX_NMAX], len: 0 };

    pub fn phonons(&self) -> usize {
        self.len as usize
    }

    pub fn modes(&self) -> &[u32] {
        &self.modes[..self.len as usize]
    }

    /// Occupation of mode `j`.
    pub fn occupation(&self, j: u32) -> u32 {
        self.modes().iter().filter(|&&m| m == j).count() as u32
    }

    /// Tuple with one extra `j`, still sorted. Panics past the cap.
    fn with_added(&self, j: u32) -> State {
        let mut out = *self;
        let n = self.len as usize;
        assert!(n < MAX_NMAX);
        let mut pos = n;
        while pos > 0 && out.modes[pos - 1] > j {
            out.modes[pos] = out.modes[pos - 1];
            pos -= 1;
        }
        out.modes[pos] = j;
        out.len += 1;
        out
    }
}

#[derive(Debug, Clone)]
pub struct FockBasis {
    pub n_modes: usize,
    pub n_max: usize,
    states: Vec<State>,
    /// First index of each phonon-number sector; `offsets[n_max + 1] == dim`.
    offsets: Vec<usize>,
}

/// `C(n, k)` without overflow for the sizes the budget admits.
fn binom(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Dimension of the truncated space: sum of `C(M + n - 1, n)` over sectors.
pub fn fock_dimension(n_modes: usize, n_max: usize) -> u64 {
    (0..=n_max as u64)
        .map(|n| binom(n_modes as u64 + n - 1, n))
        .sum()
}

pub fn enumerate_basis(n_modes: usize, n_max: usize, budget: usize) -> Result<FockBasis> {
    if n_modes == 0 {
        return Err(CoreError::InvalidParams("basis needs at least one mode".into()));
    }
    if n_max > MAX_NMAX {
        return Err(CoreError::InvalidParams(format!(
            "n_max={n_max} exceeds the representation cap {MAX_NMAX}"
        )));
    }
    let dim = fock_dimension(n_modes, n_max);
    if dim > budget as u64 {
        return Err(CoreError::ResourceBudget {
            what: format!("fock basis M={n_modes} n_max={n_max}"),
            needed: dim,
            budget: budget as u64,
        });
    }
    let mut states = Vec::with_capacity(dim as usize);
    let mut offsets = Vec::with_capacity(n_max + 2);
    for n in 0..=n_max {
        offsets.push(states.len());
        emit_sector(n_modes as u32, n, 0, State::VACUUM, &mut states);
    }
    offsets.push(states.len());
    debug_assert_eq!(states.len() as u64, dim);
    Ok(FockBasis { n_modes, n_max, states, offsets })
}

fn emit_sector(m: u32, remaining: usize, start: u32, prefix: State, out: &mut Vec<State>) {
    if remaining == 0 {
        out.push(prefix);
        return;
    }
    for j in start..m {
        emit_sector(m, remaining - 1, j, prefix.with_added(j), out);
    }
}

impl FockBasis {
    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, idx: usize) -> &State {
        &self.states[idx]
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn sector_range(&self, n: usize) -> std::ops::Range<usize> {
        self.offsets[n]..self.offsets[n + 1]
    }

    /// Index of a state tuple: sector offset plus the count of
    /// lexicographically smaller tuples of the same length
    /// (prefix counting with the hockey-stick identity).
    pub fn index_of(&self, s: &State) -> usize {
        let n = s.phonons();
        let m = self.n_modes as u64;
        let mut rank: u64 = 0;
        let mut lo: u64 = 0;
        for (i, &c) in s.modes().iter().enumerate() {
            let r = (n - 1 - i) as u64;
            let c = c as u64;
            if c > lo {
                rank += binom(m - lo + r, r + 1) - binom(m - c + r, r + 1);
            }
            lo = c;
        }
        self.offsets[n] + rank as usize
    }
}

/// Symmetric sparse Hamiltonian: cached diagonal plus strictly-upper
/// triplets sorted by (row, col), with a CSR-style symmetrized adjacency
/// index into the shared value array.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub diag: Vec<f64>,
    rows: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
    row_ptr: Vec<usize>,
    adj_col: Vec<u32>,
    adj_val: Vec<u32>,
}

impl SparseHamiltonian {
    /// Build from a diagonal and strictly-upper triplets; the triplets must
    /// be sorted by (row, col) with no duplicates. Public so tests and the
    /// eigensolver comparisons can wrap arbitrary symmetric matrices.
    pub fn from_parts(diag: Vec<f64>, rows: Vec<u32>, cols: Vec<u32>, vals: Vec<f64>) -> Self {
        let dim = diag.len();
        assert_eq!(rows.len(), cols.len());
        assert_eq!(rows.len(), vals.len());
        let nnz = rows.len();
        let mut degree = vec![0usize; dim];
        for i in 0..nnz {
            let (r, c) = (rows[i] as usize, cols[i] as usize);
            assert!(r < c && c < dim, "strictly upper triplet expected");
            if i > 0 {
                assert!(
                    (rows[i - 1], cols[i - 1]) < (rows[i], cols[i]),
                    "triplets must be sorted with no duplicates"
                );
            }
            degree[r] += 1;
            degree[c] += 1;
        }
        let mut row_ptr = vec![0usize; dim + 1];
        for r in 0..dim {
            row_ptr[r + 1] = row_ptr[r] + degree[r];
        }
        let total = row_ptr[dim];
        let mut adj_col = vec![0u32; total];
        let mut adj_val = vec![0u32; total];
        let mut cursor = row_ptr.clone();
        // Filling in triplet order leaves every row's neighbor list sorted
        // by column: transposed partners (col < row) all come from earlier
        // triplets, direct partners follow in column order.
        for i in 0..nnz {
            let (r, c) = (rows[i] as usize, cols[i] as usize);
            adj_col[cursor[r]] = c as u32;
            adj_val[cursor[r]] = i as u32;
            cursor[r] += 1;
            adj_col[cursor[c]] = r as u32;
            adj_val[cursor[c]] = i as u32;
            cursor[c] += 1;
        }
        SparseHamiltonian { dim, diag, rows, cols, vals, row_ptr, adj_col, adj_val }
    }

    /// Stored off-diagonal triplets (upper triangle).
    pub fn upper_triplets(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        (0..self.rows.len()).map(move |i| (self.rows[i], self.cols[i], self.vals[i]))
    }

    pub fn nnz_stored(&self) -> usize {
        self.dim + self.rows.len()
    }

    fn row_apply(&self, r: usize, x: &[f64]) -> f64 {
        let mut acc = self.diag[r] * x[r];
        for t in self.row_ptr[r]..self.row_ptr[r + 1] {
            acc += self.vals[self.adj_val[t] as usize] * x[self.adj_col[t] as usize];
        }
        acc
    }

    /// `y = H x`, parallel over rows when the feature is enabled. The
    /// per-row accumulation order is fixed, so the result is bit-identical
    /// to the sequential path at any thread count.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        {
            self.matvec_par(x)
        }
        #[cfg(not(feature = "parallel"))]
        {
            self.matvec_seq(x)
        }
    }

    pub fn matvec_seq(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).map(|r| self.row_apply(r, x)).collect()
    }

    #[cfg(feature = "parallel")]
    pub fn matvec_par(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim).into_par_iter().map(|r| self.row_apply(r, x)).collect()
    }

    /// Dense symmetric copy, for oracle comparisons. Row-major `dim x dim`.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            a[r * n + r] = self.diag[r];
        }
        for (r, c, v) in self.upper_triplets() {
            a[r as usize * n + c as usize] = v;
            a[c as usize * n + r as usize] = v;
        }
        a
    }

    /// Little-endian binary dump: `dim: u64`, `nnz: u64`, then `nnz`
    /// triples `(row: u64, col: u64, value: f64)`, diagonal first and the
    /// strictly-upper entries after, both in ascending (row, col) order.
    pub fn dump_binary(&self) -> Vec<u8> {
        let nnz = self.nnz_stored() as u64;
        let mut out = Vec::with_capacity(16 + nnz as usize * 24);
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&nnz.to_le_bytes());
        for r in 0..self.dim {
            out.extend_from_slice(&(r as u64).to_le_bytes());
            out.extend_from_slice(&(r as u64).to_le_bytes());
            out.extend_from_slice(&self.diag[r].to_le_bytes());
        }
        for (r, c, v) in self.upper_triplets() {
            out.extend_from_slice(&(r as u64).to_le_bytes());
            out.extend_from_slice(&(c as u64).to_le_bytes());
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }
}

/// Momentum carried by a state: sum of its mode momenta.
pub fn state_momentum(s: &State, grid: &Grid) -> Vec3 {
    let mut k = vec3::ZERO;
    for &j in s.modes() {
        k = vec3::add(k, grid.modes[j as usize].k);
    }
    k
}

fn diagonal_element(s: &State, grid: &Grid, params: &ModelParams) -> f64 {
    let k = state_momentum(s, grid);
    let mut w_bare = 0.0;
    for &j in s.modes() {
        w_bare += params.omega_bare_r(vec3::norm(grid.modes[j as usize].k));
    }
    // kappa enters once per phonon, added separately so that the shift
    // by kappa * N is exact in floating point.
    0.5 * vec3::norm2(vec3::sub(params.p_total, k)) + w_bare + params.kappa * s.phonons() as f64
}

struct RowPiece {
    diag: f64,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

fn build_row(s_idx: usize, basis: &FockBasis, grid: &Grid, params: &ModelParams) -> RowPiece {
    let s = basis.state(s_idx);
    let diag = diagonal_element(s, grid, params);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    if s.phonons() < basis.n_max {
        for (j, mode) in grid.modes.iter().enumerate() {
            if mode.coupling == 0.0 {
                continue;
            }
            let t = s.with_added(j as u32);
            let elem = mode.coupling * ((s.occupation(j as u32) + 1) as f64).sqrt();
            cols.push(basis.index_of(&t) as u32);
            vals.push(elem);
        }
    }
    RowPiece { diag, cols, vals }
}

fn assemble_from_pieces(pieces: Vec<RowPiece>) -> SparseHamiltonian {
    let dim = pieces.len();
    let mut diag = Vec::with_capacity(dim);
    let nnz: usize = pieces.iter().map(|p| p.cols.len()).sum();
    let mut rows = Vec::with_capacity(nnz);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for (r, p) in pieces.into_iter().enumerate() {
        diag.push(p.diag);
        for (c, v) in p.cols.into_iter().zip(p.vals) {
            rows.push(r as u32);
            cols.push(c);
            vals.push(v);
        }
    }
    SparseHamiltonian::from_parts(diag, rows, cols, vals)
}

/// Assemble `H(P)` on the truncated space. Creation targets always live in
/// a later sector, so every stored entry is strictly upper.
pub fn assemble(grid: &Grid, basis: &FockBasis, params: &ModelParams) -> Result<SparseHamiltonian> {
    if grid.len() != basis.n_modes {
        return Err(CoreError::DimensionMismatch(format!(
            "grid has {} modes, basis expects {}",
            grid.len(),
            basis.n_modes
        )));
    }
    params.validate()?;
    #[cfg(feature = "parallel")]
    let pieces: Vec<RowPiece> = (0..basis.dim())
        .into_par_iter()
        .map(|s| build_row(s, basis, grid, params))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let pieces: Vec<RowPiece> = (0..basis.dim()).map(|s| build_row(s, basis, grid, params)).collect();
    Ok(assemble_from_pieces(pieces))
}

/// Sequential assembly regardless of features; used by the benches to
/// compare against the parallel path.
pub fn assemble_seq(
    grid: &Grid,
    basis: &FockBasis,
    params: &ModelParams,
) -> Result<SparseHamiltonian> {
    if grid.len() != basis.n_modes {
        return Err(CoreError::DimensionMismatch(format!(
            "grid has {} modes, basis expects {}",
            grid.len(),
            basis.n_modes
        )));
    }
    params.validate()?;
    let pieces: Vec<RowPiece> = (0..basis.dim()).map(|s| build_row(s, basis, grid, params)).collect();
    Ok(assemble_from_pieces(pieces))
}

/// Coefficients of `a_j psi` in the same truncated basis:
/// `(a_j psi)[t] = sqrt(n_j(t) + 1) * psi[t + 1_j]`.
pub fn annihilation_amplitudes(basis: &FockBasis, psi: &[f64], j: u32) -> Result<Vec<f64>> {
    if psi.len() != basis.dim() {
        return Err(CoreError::DimensionMismatch(format!(
            "vector has length {}, basis dimension is {}",
            psi.len(),
            basis.dim()
        )));
    }
    if j as usize >= basis.n_modes {
        return Err(CoreError::InvalidParams(format!(
            "mode index {j} out of range (n_modes={})",
            basis.n_modes
        )));
    }
    let mut out = vec![0.0; basis.dim()];
    for t in 0..basis.offsets[basis.n_max] {
        let s = basis.state(t);
        let target = s.with_added(j);
        let idx = basis.index_of(&target);
        out[t] = ((s.occupation(j) + 1) as f64).sqrt() * psi[idx];
    }
    Ok(out)
}
