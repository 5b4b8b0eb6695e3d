use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::linalg::{self, CMat};
use crate::quantizer::QuantizerSpec;
use crate::{Error, Result};

/// One column's real-valued integer least-squares problem
/// `min ‖e − R a‖²` over `a ∈ 𝓛^{2M}`.
///
/// Coordinates are interleaved per antenna: `(Re a₁, Im a₁, Re a₂, …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemInstance {
    /// Upper-triangular `2M × 2M`, row-major.
    r: Vec<f64>,
    dim: usize,
    pub e: Vec<f64>,
    pub labels: Vec<f64>,
    /// 0-based column (UE) index.
    pub column: usize,
}

impl SubproblemInstance {
    /// Validate and wrap a real upper-triangular system.
    pub fn new(r: DMatrix<f64>, e: Vec<f64>, labels: Vec<f64>, column: usize) -> Result<Self> {
        let dim = r.nrows();
        if r.ncols() != dim || e.len() != dim || dim == 0 {
            return Err(Error::DimensionMismatch(format!(
                "R is {:?}, e has {} entries",
                r.shape(),
                e.len()
            )));
        }
        if labels.is_empty() || labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(
                "labels must be non-empty and strictly increasing",
            ));
        }
        for i in 0..dim {
            if !(r[(i, i)] > 0.0) {
                return Err(Error::invalid(format!(
                    "R[{i},{i}] = {} is not positive",
                    r[(i, i)]
                )));
            }
            for j in 0..i {
                if r[(i, j)] != 0.0 {
                    return Err(Error::invalid("R must be upper triangular"));
                }
            }
        }
        let mut flat = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                flat.push(r[(i, j)]);
            }
        }
        Ok(Self {
            r: flat,
            dim,
            e,
            labels,
            column,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn r(&self, i: usize, j: usize) -> f64 {
        self.r[i * self.dim + j]
    }

    /// Entries of row `i` strictly right of the diagonal.
    #[inline]
    pub fn r_row_tail(&self, i: usize) -> &[f64] {
        &self.r[i * self.dim + i + 1..(i + 1) * self.dim]
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.r)
    }

    /// `‖e − R a‖²` evaluated directly.
    pub fn residual(&self, a: &[f64]) -> f64 {
        (0..self.dim)
            .map(|i| {
                let ra: f64 = (i..self.dim).map(|j| self.r(i, j) * a[j]).sum();
                (self.e[i] - ra).powi(2)
            })
            .sum()
    }

    pub fn e_norm_sq(&self) -> f64 {
        self.e.iter().map(|x| x * x).sum()
    }
}

/// Cholesky factor of `V̂ = Hᴴ Bᴴ B H + λ I` and the per-column targets.
#[derive(Debug, Clone)]
pub struct Factorization {
    /// Upper-triangular `R` with `V̂ = Rᴴ R`.
    pub r: CMat,
    /// Column `i` is `e_i = R⁻ᴴ conj(h_i)` where `h_i = β_i · (row i of H)ᵀ`.
    pub e: CMat,
    pub lambda: f64,
}

/// `V̂ = Hᴴ Bᴴ B H + λ I` for diagonal `B = diag(β)`.
pub fn regularized_precoder_gram(h: &CMat, beta: &[Complex64], lambda: f64) -> CMat {
    let bh = scaled_rows(h, beta);
    let mut v = bh.adjoint() * &bh;
    for i in 0..v.nrows() {
        v[(i, i)] += Complex64::new(lambda, 0.0);
    }
    v
}

/// `B H`: row `k` of `H` multiplied by `β_k`.
pub fn scaled_rows(h: &CMat, beta: &[Complex64]) -> CMat {
    CMat::from_fn(h.nrows(), h.ncols(), |k, m| beta[k] * h[(k, m)])
}

pub fn factorize(h: &CMat, beta: &[Complex64], lambda: f64) -> Result<Factorization> {
    if beta.len() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} receiver factors for {} UEs",
            beta.len(),
            h.nrows()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let v = regularized_precoder_gram(h, beta, lambda);
    let chol = linalg::cholesky(v, lambda)?;
    let lower = chol.l();
    if (0..lower.nrows()).any(|i| !(lower[(i, i)].re > 0.0)) {
        return Err(Error::CholeskyFailure { lambda });
    }
    // h = vec((BH)ᵀ): column i is row i of BH, not conjugated.
    let targets = scaled_rows(h, beta).transpose().map(|z| z.conj());
    let e = lower
        .solve_lower_triangular(&targets)
        .ok_or(Error::CholeskyFailure { lambda })?;
    Ok(Factorization {
        r: lower.adjoint(),
        e,
        lambda,
    })
}

/// Interleaved real expansion of a complex upper-triangular matrix.
pub fn real_expand_upper(r: &CMat) -> DMatrix<f64> {
    let m = r.nrows();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for i in 0..m {
        for j in i..m {
            let z = if i == j {
                // Cholesky diagonals are real; drop roundoff imaginary parts.
                Complex64::new(r[(i, i)].re, 0.0)
            } else {
                r[(i, j)]
            };
            out[(2 * i, 2 * j)] = z.re;
            out[(2 * i, 2 * j + 1)] = -z.im;
            out[(2 * i + 1, 2 * j)] = z.im;
            out[(2 * i + 1, 2 * j + 1)] = z.re;
        }
    }
    out
}

pub fn interleave(v: impl IntoIterator<Item = Complex64>) -> Vec<f64> {
    v.into_iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn deinterleave(a: &[f64]) -> Vec<Complex64> {
    a.chunks_exact(2)
        .map(|c| Complex64::new(c[0], c[1]))
        .collect()
}

/// Real-valued subproblems, one per column of `P`.
pub fn build_subproblems(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<Vec<SubproblemInstance>> {
    let f = factorize(h, beta, lambda)?;
    subproblems_from(&f, spec)
}

/// Antenna order for the tree search, root last: `order[p]` is the antenna
/// placed at position `p`.
///
/// Greedy on the covariance `V̂⁻¹`: the root is the antenna with the smallest
/// marginal variance, and each next level down picks the smallest variance
/// conditioned on the antennas already placed above it. Putting the
/// best-determined coordinates at the top of the tree prunes far earlier
/// than the natural order when `V̂` has a large near-null space (`M ≫ K`).
pub fn antenna_order(h: &CMat, beta: &[Complex64], lambda: f64) -> Result<Vec<usize>> {
    let v = regularized_precoder_gram(h, beta, lambda);
    let mut cov = linalg::cholesky(v, lambda)?.inverse();
    let m = cov.nrows();
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut order = vec![0; m];
    for pos in (0..m).rev() {
        let (slot, &pick) = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| cov[(a, a)].re.total_cmp(&cov[(b, b)].re))
            .expect("remaining antennas");
        remaining.remove(slot);
        order[pos] = pick;
        let pivot = cov[(pick, pick)].re;
        let col: Vec<Complex64> = (0..m).map(|i| cov[(i, pick)]).collect();
        for &i in &remaining {
            for &j in &remaining {
                cov[(i, j)] -= col[i] * col[j].conj() / pivot;
            }
        }
    }
    Ok(order)
}

/// Column-specific antenna order that accounts for the label box, root last.
///
/// At each step, working from the root down, the continuous minimizer over
/// the still-free antennas is computed with the already placed antennas
/// fixed at their rounded values. The antenna whose rounding to the nearest
/// label costs the most (distance times precision) goes next, so levels near
/// the root carry large partial distances when the target lies outside the
/// box.
pub fn box_aware_order(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
    column: usize,
) -> Result<Vec<usize>> {
    let v = regularized_precoder_gram(h, beta, lambda);
    let m = v.nrows();
    let b: Vec<Complex64> = (0..m)
        .map(|j| (beta[column] * h[(column, j)]).conj())
        .collect();
    let mut free: Vec<usize> = (0..m).collect();
    let mut fixed: Vec<(usize, Complex64)> = Vec::with_capacity(m);
    let mut order = vec![0; m];
    for pos in (0..m).rev() {
        let n = free.len();
        let v_ff = CMat::from_fn(n, n, |i, j| v[(free[i], free[j])]);
        let rhs = CMat::from_fn(n, 1, |i, _| {
            let mut t = b[free[i]];
            for &(j, x) in &fixed {
                t -= v[(free[i], j)] * x;
            }
            t
        });
        let chol = linalg::cholesky(v_ff, lambda)?;
        let center = chol.solve(&rhs);
        let cov = chol.inverse();
        let mut best = (f64::NEG_INFINITY, 0, Complex64::new(0.0, 0.0));
        for i in 0..n {
            let c = center[(i, 0)];
            let q = Complex64::new(spec.quantize_real(c.re), spec.quantize_real(c.im));
            let score = (c - q).norm_sqr() / cov[(i, i)].re;
            if score > best.0 {
                best = (score, i, q);
            }
        }
        let (_, slot, q) = best;
        order[pos] = free.remove(slot);
        fixed.push((order[pos], q));
    }
    Ok(order)
}

/// Subproblems over the antennas permuted by [`antenna_order`]. Solutions
/// map back through the returned order.
pub fn build_subproblems_sorted(
    h: &CMat,
    beta: &[Complex64],
    lambda: f64,
    spec: &QuantizerSpec,
) -> Result<(Vec<SubproblemInstance>, Vec<usize>)> {
    let order = antenna_order(h, beta, lambda)?;
    let permuted = CMat::from_fn(h.nrows(), h.ncols(), |k, p| h[(k, order[p])]);
    let subs = build_subproblems(&permuted, beta, lambda, spec)?;
    Ok((subs, order))
}

pub(crate) fn subproblems_from(
    f: &Factorization,
    spec: &QuantizerSpec,
) -> Result<Vec<SubproblemInstance>> {
    let r_real = real_expand_upper(&f.r);
    (0..f.e.ncols())
        .map(|i| {
            SubproblemInstance::new(
                r_real.clone(),
                interleave(f.e.column(i).iter().copied()),
                spec.labels().to_vec(),
                i,
            )
        })
        .collect()
}
