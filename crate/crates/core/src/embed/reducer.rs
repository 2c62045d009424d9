//! Truncated SVD of the mean-centered TF-IDF matrix (latent semantic
//! reduction).
//!
//! The centered matrix `Ã = A - 1μᵀ` is never materialized: every product
//! works on the sparse rows plus a rank-one correction, so memory stays at
//! `O(nnz + N·l + F·k)` for `l = k + oversample` sketch columns.
//!
//! Small problems (sketch width reaching `min(N, F)`) go through an exact
//! dense SVD instead. Directions with (numerically) zero singular value are
//! completed to an orthonormal set with seeded Gram-Schmidt, so the
//! projection rows are always orthonormal.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducerConfig {
    pub k: usize,
    pub oversample: usize,
    pub power_iterations: usize,
    pub seed: u64,
}

impl Default for ReducerConfig {
    fn default() -> Self {
        Self {
            k: 768,
            oversample: 10,
            power_iterations: 2,
            seed: 0x5eed,
        }
    }
}

/// Relative singular value below which a direction counts as null.
const RANK_TOL: f64 = 1e-10;

/// Orthonormal projection from the F-dim centered TF-IDF space onto k dims.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedBasis {
    k: usize,
    features: usize,
    /// Term-major: entries `[t*k .. t*k + k]` are column `t` of the k×F
    /// projection matrix.
    components: Vec<f64>,
    centering: Vec<f64>,
    projected_center: Vec<f64>,
    singular_values: Vec<f64>,
}

impl ReducedBasis {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn centering(&self) -> &[f64] {
        &self.centering
    }

    /// Singular values of the centered matrix, descending; zero for
    /// completed null directions.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Row `r` of the projection matrix as a dense F-vector.
    pub fn component(&self, r: usize) -> Vec<f64> {
        (0..self.features).map(|t| self.components[t * self.k + r]).collect()
    }

    /// Dot product of projection rows `a` and `b`.
    pub fn row_dot(&self, a: usize, b: usize) -> f64 {
        self.components
            .chunks_exact(self.k)
            .map(|col| col[a] * col[b])
            .sum()
    }

    /// `P (x - μ)` for a sparse TF-IDF row.
    pub fn project(&self, x: &SparseVector) -> Vec<f64> {
        let mut out: Vec<f64> = self.projected_center.iter().map(|c| -c).collect();
        for (t, v) in x.iter() {
            let col = &self.components[t * self.k..(t + 1) * self.k];
            for (o, c) in out.iter_mut().zip(col) {
                *o += v * c;
            }
        }
        out
    }

    /// `Pᵀ y`: maps reduced coordinates back into the centered feature space.
    pub fn reconstruct_centered(&self, y: &[f64]) -> Vec<f64> {
        self.components
            .chunks_exact(self.k)
            .map(|col| col.iter().zip(y).map(|(c, v)| c * v).sum())
            .collect()
    }
}

/// Column-oriented view of the sparse document matrix plus its column means.
struct Columns {
    n_docs: usize,
    /// postings[t] = (doc, value) pairs for term t.
    postings: Vec<Vec<(u32, f64)>>,
    mean: Vec<f64>,
}

impl Columns {
    fn new(rows: &[SparseVector], features: usize) -> Result<Self> {
        let mut postings: Vec<Vec<(u32, f64)>> = vec![Vec::new(); features];
        let mut mean = vec![0.0; features];
        for (d, row) in rows.iter().enumerate() {
            for (t, v) in row.iter() {
                if t >= features {
                    return Err(Error::DimensionMismatch {
                        expected: features,
                        actual: t + 1,
                    });
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite("tf-idf matrix"));
                }
                postings[t].push((d as u32, v));
                mean[t] += v;
            }
        }
        let n = rows.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Ok(Self {
            n_docs: rows.len(),
            postings,
            mean,
        })
    }

    fn features(&self) -> usize {
        self.postings.len()
    }

    /// `r_t = ã_tᵀ Q` for a row-major N×l matrix, given `1ᵀQ`.
    fn column_times(&self, t: usize, q: &[f64], l: usize, q_colsum: &[f64], r: &mut [f64]) {
        let mu = self.mean[t];
        for (ri, s) in r.iter_mut().zip(q_colsum) {
            *ri = -mu * s;
        }
        for &(d, v) in &self.postings[t] {
            let row = &q[d as usize * l..(d as usize + 1) * l];
            for (ri, qi) in r.iter_mut().zip(row) {
                *ri += v * qi;
            }
        }
    }

    /// `Ã Ãᵀ Q` for a row-major N×l matrix.
    fn gram_times(&self, q: &[f64], l: usize) -> Vec<f64> {
        let colsum = col_sums(q, l);
        let mut z = vec![0.0; self.n_docs * l];
        let mut shift = vec![0.0; l];
        let mut r = vec![0.0; l];
        for t in 0..self.features() {
            self.column_times(t, q, l, &colsum, &mut r);
            for &(d, v) in &self.postings[t] {
                let row = &mut z[d as usize * l..(d as usize + 1) * l];
                for (zi, ri) in row.iter_mut().zip(&r) {
                    *zi += v * ri;
                }
            }
            let mu = self.mean[t];
            if mu != 0.0 {
                for (si, ri) in shift.iter_mut().zip(&r) {
                    *si += mu * ri;
                }
            }
        }
        for row in z.chunks_exact_mut(l) {
            for (zi, si) in row.iter_mut().zip(&shift) {
                *zi -= si;
            }
        }
        z
    }

    fn dense_centered(&self) -> DMatrix<f64> {
        let f = self.features();
        let mut m = DMatrix::from_fn(self.n_docs, f, |_, t| -self.mean[t]);
        for (t, col) in self.postings.iter().enumerate() {
            for &(d, v) in col {
                m[(d as usize, t)] += v;
            }
        }
        m
    }
}

fn col_sums(q: &[f64], l: usize) -> Vec<f64> {
    let mut s = vec![0.0; l];
    for row in q.chunks_exact(l) {
        for (si, qi) in s.iter_mut().zip(row) {
            *si += qi;
        }
    }
    s
}

/// Smallest `min(diag R) / max(diag R)` accepted from a Cholesky factor
/// before falling back to Householder QR.
const CHOLQR_MIN_RATIO: f64 = 1e-5;

/// Orthonormal basis (row-major N×l) for the column span of a row-major N×l
/// matrix. Two rounds of Cholesky QR when the matrix is well conditioned,
/// Householder QR otherwise.
fn orthonormalize(y: &[f64], n: usize, l: usize) -> Vec<f64> {
    let q = cholesky_qr2(DMatrix::from_row_slice(n, l, y))
        .unwrap_or_else(|| DMatrix::from_row_slice(n, l, y).qr().q());
    let mut out = vec![0.0; n * l];
    for i in 0..n {
        for j in 0..l {
            out[i * l + j] = q[(i, j)];
        }
    }
    out
}

fn cholesky_qr2(mut m: DMatrix<f64>) -> Option<DMatrix<f64>> {
    for _ in 0..2 {
        let r = (m.transpose() * &m).cholesky()?.l().transpose();
        let d = r.diagonal();
        if !(d.min() > d.max() * CHOLQR_MIN_RATIO) {
            return None;
        }
        m *= r.try_inverse()?;
    }
    Some(m)
}

/// Fit a k-dimensional reduction of the centered matrix whose rows are
/// `rows` (each over `features` columns).
pub fn fit_reducer(
    rows: &[SparseVector],
    features: usize,
    config: ReducerConfig,
) -> Result<ReducedBasis> {
    let n = rows.len();
    let limit = n.min(features);
    if config.k == 0 || config.k > limit {
        return Err(Error::RankTooLarge { k: config.k, limit });
    }
    let cols = Columns::new(rows, features)?;
    let l = (config.k + config.oversample).min(limit);
    let (mut components, singular_values) = if l >= limit {
        exact_components(&cols, config.k)
    } else {
        randomized_components(&cols, config, l)
    };
    complete_null_directions(&mut components, &singular_values, config.k, features, config.seed);
    fix_signs(&mut components, config.k, features);

    let projected_center = (0..config.k)
        .map(|r| {
            cols.mean
                .iter()
                .enumerate()
                .map(|(t, m)| m * components[t * config.k + r])
                .sum()
        })
        .collect();
    Ok(ReducedBasis {
        k: config.k,
        features,
        components,
        centering: cols.mean,
        projected_center,
        singular_values,
    })
}

/// Dense SVD; returns term-major components and singular values.
fn exact_components(cols: &Columns, k: usize) -> (Vec<f64>, Vec<f64>) {
    let f = cols.features();
    let m = cols.dense_centered();
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = vec![0.0; f * k];
    let mut sv = Vec::with_capacity(k);
    for (r, &src) in order.iter().take(k).enumerate() {
        sv.push(svd.singular_values[src]);
        for t in 0..f {
            components[t * k + r] = v_t[(src, t)];
        }
    }
    (components, sv)
}

fn randomized_components(cols: &Columns, config: ReducerConfig, l: usize) -> (Vec<f64>, Vec<f64>) {
    let n = cols.n_docs;
    let k = config.k;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Sketch Y = Ã Ω with Ω drawn term by term.
    let mut y = vec![0.0; n * l];
    let mut shift = vec![0.0; l];
    let mut omega = vec![0.0; l];
    for t in 0..cols.features() {
        for o in omega.iter_mut() {
            *o = StandardNormal.sample(&mut rng);
        }
        for &(d, v) in &cols.postings[t] {
            let row = &mut y[d as usize * l..(d as usize + 1) * l];
            for (yi, oi) in row.iter_mut().zip(&omega) {
                *yi += v * oi;
            }
        }
        let mu = cols.mean[t];
        for (si, oi) in shift.iter_mut().zip(&omega) {
            *si += mu * oi;
        }
    }
    for row in y.chunks_exact_mut(l) {
        for (yi, si) in row.iter_mut().zip(&shift) {
            *yi -= si;
        }
    }
    let mut q = orthonormalize(&y, n, l);
    for _ in 0..config.power_iterations {
        let z = cols.gram_times(&q, l);
        q = orthonormalize(&z, n, l);
    }

    // Small symmetric problem G = Qᵀ Ã Ãᵀ Q = Û Σ² Ûᵀ.
    let z = cols.gram_times(&q, l);
    let qm = DMatrix::from_row_slice(n, l, &q);
    let g = qm.transpose() * DMatrix::from_row_slice(n, l, &z);
    let g = (&g + g.transpose()) * 0.5;
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let sv: Vec<f64> = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvalues[i].max(0.0).sqrt())
        .collect();
    let top = sv.first().copied().unwrap_or(0.0);

    // M = Q Û_k Σ_k⁻¹ (N×k); components are then ã_tᵀ M.
    let u = DMatrix::from_fn(l, k, |j, r| {
        if sv[r] <= top * RANK_TOL || sv[r] == 0.0 {
            0.0
        } else {
            eig.eigenvectors[(j, order[r])] / sv[r]
        }
    });
    let mm = qm * u;
    let mut m = vec![0.0; n * k];
    for d in 0..n {
        for r in 0..k {
            m[d * k + r] = mm[(d, r)];
        }
    }
    let m_colsum = col_sums(&m, k);
    let mut components = vec![0.0; cols.features() * k];
    for (t, col) in components.chunks_exact_mut(k).enumerate() {
        cols.column_times(t, &m, k, &m_colsum, col);
    }
    (components, sv)
}

/// Replace rows whose singular value is (numerically) zero with seeded
/// random directions orthogonalized against all other rows.
fn complete_null_directions(components: &mut [f64], sv: &[f64], k: usize, f: usize, seed: u64) {
    let top = sv.first().copied().unwrap_or(0.0);
    let null: Vec<usize> = (0..k)
        .filter(|&r| sv[r] == 0.0 || sv[r] <= top * RANK_TOL)
        .collect();
    if null.is_empty() {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let row = |c: &[f64], r: usize| -> Vec<f64> { (0..f).map(|t| c[t * k + r]).collect() };
    let mut basis: Vec<Vec<f64>> = (0..k)
        .filter(|r| !null.contains(r))
        .map(|r| row(components, r))
        .collect();
    for &r in &null {
        let v = loop {
            let mut v: Vec<f64> = (0..f).map(|_| StandardNormal.sample(&mut rng)).collect();
            for _ in 0..2 {
                for b in &basis {
                    let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                    v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
                }
            }
            let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-8 {
                v.iter_mut().for_each(|x| *x /= n);
                break v;
            }
        };
        for t in 0..f {
            components[t * k + r] = v[t];
        }
        basis.push(v);
    }
}

/// Make each row's largest-magnitude entry positive (first index on ties).
fn fix_signs(components: &mut [f64], k: usize, f: usize) {
    let mut best = vec![0.0f64; k];
    let mut sign = vec![1.0f64; k];
    for row in components.chunks_exact(k).take(f) {
        for r in 0..k {
            if row[r].abs() > best[r] {
                best[r] = row[r].abs();
                sign[r] = row[r].signum();
            }
        }
    }
    for row in components.chunks_exact_mut(k).take(f) {
        for (v, s) in row.iter_mut().zip(&sign) {
            *v *= s;
        }
    }
}
