//! Adaptive multidimensional quadrature over axis-aligned boxes.
//!
//! One dimension uses the embedded Gauss-Kronrod 7/15 pair; two and more
//! use the Genz-Malik degree-7 rule with its embedded degree-5 companion
//! and fourth-difference direction selection. Subdivision always splits the
//! selected region in half along one axis. Regions are ranked by
//! (error, id) in a heap, so the refinement sequence is a deterministic
//! function of the integrand and tolerances; parallel batch evaluation of
//! children cannot change it, and results are reproducible bit-for-bit at
//! any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Highest dimension the engine accepts. The public `quad` contract is
/// d <= 3; internal reductions go higher.
pub(crate) const DMAX: usize = 6;

#[derive(Debug, Clone)]
pub struct QuadOpts {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Ceiling on the number of active regions before giving up.
    pub max_regions: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { rel_tol: 1e-6, abs_tol: 1e-12, max_regions: 300_000 }
    }
}

impl QuadOpts {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        QuadOpts { rel_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    /// Embedded-rule error estimate summed over leaf regions.
    pub error: f64,
    /// Number of region evaluations performed.
    pub subdivisions: usize,
    pub converged: bool,
}

impl QuadResult {
    pub(crate) fn exact(value: f64) -> Self {
        QuadResult { value, error: 0.0, subdivisions: 0, converged: true }
    }

    /// Negation and scaling keep the attached error estimate meaningful.
    pub fn scaled(self, s: f64) -> Self {
        QuadResult { value: s * self.value, error: s.abs() * self.error, ..self }
    }

    pub fn combined(self, other: QuadResult) -> Self {
        QuadResult {
            value: self.value + other.value,
            error: self.error + other.error,
            subdivisions: self.subdivisions + other.subdivisions,
            converged: self.converged && other.converged,
        }
    }
}

#[derive(Clone)]
struct Region {
    id: u64,
    lo: [f64; DMAX],
    hi: [f64; DMAX],
    value: f64,
    error: f64,
    split_dim: usize,
}

struct HeapEntry {
    error: f64,
    id: u64,
    idx: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        // larger error first; ties broken by older region
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Adaptive integral of `f` over the box `lo..hi`, `d <= 3`.
pub fn quad<F>(f: &F, lo: &[f64], hi: &[f64], opts: &QuadOpts) -> QuadResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    assert!(lo.len() <= 3, "public quadrature contract covers d <= 3");
    adaptive(f, lo, hi, opts)
}

/// The engine behind `quad`, without the public dimension cap.
pub(crate) fn adaptive<F>(f: &F, lo: &[f64], hi: &[f64], opts: &QuadOpts) -> QuadResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let d = lo.len();
    assert_eq!(d, hi.len());
    assert!(d >= 1 && d <= DMAX);
    assert!(lo.iter().chain(hi.iter()).all(|x| x.is_finite()), "finite box required");
    if lo.iter().zip(hi).any(|(a, b)| a >= b) {
        return QuadResult::exact(0.0);
    }

    let mut rlo = [0.0; DMAX];
    let mut rhi = [0.0; DMAX];
    rlo[..d].copy_from_slice(lo);
    rhi[..d].copy_from_slice(hi);
    let root = evaluate_region(f, d, 0, rlo, rhi);

    let mut regions: Vec<Region> = vec![root];
    let mut heap = BinaryHeap::new();
    heap.push(HeapEntry { error: regions[0].error, id: 0, idx: 0 });
    let mut total_value = regions[0].value;
    let mut total_error = regions[0].error;
    let mut next_id = 1u64;
    let mut evals = 1usize;
    let mut converged = true;

    let batch = 32usize;
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total_value.abs());
        if total_error <= target {
            break;
        }
        if regions.len() + 2 * batch > opts.max_regions {
            converged = false;
            break;
        }
        // worst regions, deterministically ordered by (error, id)
        let mut picked = Vec::with_capacity(batch);
        while picked.len() < batch {
            match heap.pop() {
                Some(e) => {
                    if e.error == 0.0 {
                        heap.push(e);
                        break;
                    }
                    picked.push(e.idx);
                }
                None => break,
            }
        }
        if picked.is_empty() {
            converged = total_error <= target;
            break;
        }
        // halve each picked region along its selected axis
        let mut jobs: Vec<(usize, [f64; DMAX], [f64; DMAX], u64)> = Vec::with_capacity(2 * picked.len());
        for &idx in &picked {
            let r = &regions[idx];
            let s = r.split_dim;
            let mid = 0.5 * (r.lo[s] + r.hi[s]);
            let mut hi_left = r.hi;
            hi_left[s] = mid;
            let mut lo_right = r.lo;
            lo_right[s] = mid;
            jobs.push((idx, r.lo, hi_left, next_id));
            jobs.push((idx, lo_right, r.hi, next_id + 1));
            next_id += 2;
        }
        #[cfg(feature = "parallel")]
        let children: Vec<Region> = jobs
            .par_iter()
            .map(|&(_, lo, hi, id)| evaluate_region(f, d, id, lo, hi))
            .collect();
        #[cfg(not(feature = "parallel"))]
        let children: Vec<Region> = jobs
            .iter()
            .map(|&(_, lo, hi, id)| evaluate_region(f, d, id, lo, hi))
            .collect();
        evals += children.len();
        // replace parents in deterministic order
        for (pair, &parent_idx) in children.chunks(2).zip(&picked) {
            let parent = regions[parent_idx].clone();
            total_value += pair[0].value + pair[1].value - parent.value;
            total_error += pair[0].error + pair[1].error - parent.error;
            regions[parent_idx] = pair[0].clone();
            heap.push(HeapEntry { error: pair[0].error, id: pair[0].id, idx: parent_idx });
            regions.push(pair[1].clone());
            heap.push(HeapEntry { error: pair[1].error, id: pair[1].id, idx: regions.len() - 1 });
        }
    }

    // Recompute the totals in id order: independent of refinement history
    // bookkeeping and of thread count.
    let mut order: Vec<usize> = (0..regions.len()).collect();
    order.sort_by_key(|&i| regions[i].id);
    let mut value = 0.0;
    let mut error = 0.0;
    for i in order {
        value += regions[i].value;
        error += regions[i].error;
    }
    let target = opts.abs_tol.max(opts.rel_tol * value.abs());
    QuadResult { value, error, subdivisions: evals, converged: converged && error <= target }
}

fn evaluate_region<F>(f: &F, d: usize, id: u64, lo: [f64; DMAX], hi: [f64; DMAX]) -> Region
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if d == 1 {
        let (value, error) = gauss_kronrod_15(f, lo[0], hi[0]);
        Region { id, lo, hi, value, error, split_dim: 0 }
    } else {
        let (value, error, split_dim) = genz_malik(f, d, &lo, &hi);
        Region { id, lo, hi, value, error, split_dim }
    }
}

// Gauss-Kronrod 7/15 nodes (positive half) and weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gauss_kronrod_15<F: Fn(&[f64]) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(&[mid]);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let dx = half * XGK[i];
        let fsum = f(&[mid - dx]) + f(&[mid + dx]);
        kron += WGK[i] * fsum;
        if i % 2 == 1 {
            gauss += WG[i / 2] * fsum;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    (value, error)
}

// Genz-Malik degree 7 rule with embedded degree 5 estimate.
const GM_L2: f64 = 0.358568582800318073; // sqrt(9/70)
const GM_L4: f64 = 0.948683298050513800; // sqrt(9/10)
const GM_L5: f64 = 0.688247201611685289; // sqrt(9/19)

fn genz_malik<F: Fn(&[f64]) -> f64>(f: &F, d: usize, lo: &[f64; DMAX], hi: &[f64; DMAX]) -> (f64, f64, usize) {
    let df = d as f64;
    let w1 = (12824.0 - 9120.0 * df + 400.0 * df * df) / 19683.0;
    let w2 = 980.0 / 6561.0;
    let w3 = (1820.0 - 400.0 * df) / 19683.0;
    let w4 = 200.0 / 19683.0;
    let w5 = 6859.0 / 19683.0 / (1u64 << d) as f64;
    let we1 = (729.0 - 950.0 * df + 50.0 * df * df) / 729.0;
    let we2 = 245.0 / 486.0;
    let we3 = (265.0 - 100.0 * df) / 1458.0;
    let we4 = 25.0 / 729.0;

    let mut center = [0.0; DMAX];
    let mut h = [0.0; DMAX];
    let mut volume = 1.0;
    for i in 0..d {
        center[i] = 0.5 * (lo[i] + hi[i]);
        h[i] = 0.5 * (hi[i] - lo[i]);
        volume *= hi[i] - lo[i];
    }

    let fc = f(&center[..d]);
    let mut sum2 = 0.0;
    let mut sum3 = 0.0;
    let mut best_dim = 0usize;
    let mut best_diff = -1.0;
    let ratio = (GM_L2 * GM_L2) / (GM_L4 * GM_L4);
    let mut pt = center;
    for i in 0..d {
        pt[i] = center[i] - GM_L2 * h[i];
        let f2m = f(&pt[..d]);
        pt[i] = center[i] + GM_L2 * h[i];
        let f2p = f(&pt[..d]);
        pt[i] = center[i] - GM_L4 * h[i];
        let f3m = f(&pt[..d]);
        pt[i] = center[i] + GM_L4 * h[i];
        let f3p = f(&pt[..d]);
        pt[i] = center[i];
        sum2 += f2m + f2p;
        sum3 += f3m + f3p;
        // fourth divided difference drives the split direction
        let diff = ((f2m + f2p - 2.0 * fc) - ratio * (f3m + f3p - 2.0 * fc)).abs();
        let scaled = diff * h[i];
        if scaled > best_diff {
            best_diff = scaled;
            best_dim = i;
        }
    }
    let mut sum4 = 0.0;
    for i in 0..d {
        for j in (i + 1)..d {
            for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                pt[i] = center[i] + si * GM_L4 * h[i];
                pt[j] = center[j] + sj * GM_L4 * h[j];
                sum4 += f(&pt[..d]);
            }
            pt[i] = center[i];
            pt[j] = center[j];
        }
    }
    let mut sum5 = 0.0;
    let corners = 1usize << d;
    for mask in 0..corners {
        for i in 0..d {
            let s = if mask & (1 << i) != 0 { 1.0 } else { -1.0 };
            pt[i] = center[i] + s * GM_L5 * h[i];
        }
        sum5 += f(&pt[..d]);
    }

    let res7 = volume * (w1 * fc + w2 * sum2 + w3 * sum3 + w4 * sum4 + w5 * sum5);
    let res5 = volume * (we1 * fc + we2 * sum2 + we3 * sum3 + we4 * sum4);
    (res7, (res7 - res5).abs(), best_dim)
}
