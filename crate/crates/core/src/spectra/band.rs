//! Eigenvalues of banded symmetric matrices.
//!
//! The band is reduced to tridiagonal form with Givens rotations, chasing
//! each bulge down the band (Rutishauser–Schwarz), which costs O(n²b)
//! instead of the O(n³) of a dense Householder reduction. The tridiagonal
//! eigenvalues then come from implicit QL with Wilkinson shifts.

use faer::Mat;

/// Lower band of a symmetric matrix with one extra diagonal of room for the
/// bulge created during reduction. Column `c` is stored contiguously:
/// `data[c * stride + (r - c)]` holds A[r][c] for `0 <= r - c <= width`.
pub(crate) struct SymmetricBand {
    n: usize,
    width: usize,
    stride: usize,
    data: Vec<f64>,
}

impl SymmetricBand {
    pub(crate) fn from_dense(a: &Mat<f64>, bandwidth: usize) -> Self {
        let n = a.nrows();
        let width = bandwidth + 1;
        let stride = width + 1;
        let mut data = vec![0.0; n * stride];
        for c in 0..n {
            for r in c..n.min(c + bandwidth + 1) {
                data[c * stride + (r - c)] = a[(r, c)];
            }
        }
        SymmetricBand { n, width, stride, data }
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> usize {
        debug_assert!(r >= c && r - c <= self.width);
        c * self.stride + (r - c)
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[self.at(r, c)]
    }

    #[inline]
    fn set(&mut self, r: usize, c: usize, v: f64) {
        let i = self.at(r, c);
        self.data[i] = v;
    }

    /// A ← G A Gᵀ for the rotation acting on rows/columns (p, p+1) with
    /// x'_p = c x_p + s x_q, x'_q = −s x_p + c x_q.
    fn rotate(&mut self, p: usize, c: f64, s: f64) {
        let q = p + 1;
        let n = self.n;
        let w = self.width;
        let stride = self.stride;
        // entries left of the 2x2 block: rows p and q, column i
        for i in q.saturating_sub(w)..p {
            let base = i * stride;
            let ap = self.data[base + (p - i)];
            let aq = self.data[base + (q - i)];
            self.data[base + (p - i)] = c * ap + s * aq;
            self.data[base + (q - i)] = -s * ap + c * aq;
        }
        // entries below the block: column p and q, row i
        let hi = (n - 1).min(p + w);
        for i in q + 1..=hi {
            let ap = self.data[p * stride + (i - p)];
            let aq = if i - q <= w { self.data[q * stride + (i - q)] } else { 0.0 };
            self.data[p * stride + (i - p)] = c * ap + s * aq;
            if i - q <= w {
                self.data[q * stride + (i - q)] = -s * ap + c * aq;
            }
        }
        let app = self.get(p, p);
        let aqq = self.get(q, q);
        let apq = self.get(q, p);
        let cs = c * s;
        self.set(p, p, c * c * app + 2.0 * cs * apq + s * s * aqq);
        self.set(q, q, s * s * app - 2.0 * cs * apq + c * c * aqq);
        self.set(q, p, cs * (aqq - app) + (c * c - s * s) * apq);
    }

    /// Zero A[p+1][col] against A[p][col] with a rotation in plane (p, p+1).
    /// Returns false when the entry is already zero.
    fn annihilate(&mut self, p: usize, col: usize) -> bool {
        let y = self.get(p + 1, col);
        if y == 0.0 {
            return false;
        }
        let x = self.get(p, col);
        let r = x.hypot(y);
        self.rotate(p, x / r, y / r);
        self.set(p + 1, col, 0.0);
        true
    }

    /// Orthogonal reduction to tridiagonal form; returns (diagonal, subdiagonal).
    pub(crate) fn tridiagonalize(mut self, bandwidth: usize) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let b = bandwidth;
        if b > 1 {
            for k in 0..n.saturating_sub(2) {
                for r in (2..=b).rev() {
                    let q = k + r;
                    if q >= n {
                        continue;
                    }
                    if !self.annihilate(q - 1, k) {
                        continue;
                    }
                    // bulge at (q + b, q - 1); chase it off the end
                    let mut col = q - 1;
                    let mut row = q + b;
                    while row < n {
                        if !self.annihilate(row - 1, col) {
                            break;
                        }
                        col = row - 1;
                        row += b;
                    }
                }
            }
        }
        let diag = (0..n).map(|i| self.get(i, i)).collect();
        let sub = (0..n.saturating_sub(1)).map(|i| self.get(i + 1, i)).collect();
        (diag, sub)
    }
}

/// Eigenvalues of the symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e`, in ascending order. `None` if QL fails to converge.
pub(crate) fn tridiagonal_eigenvalues(mut d: Vec<f64>, sub: &[f64]) -> Option<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Some(d);
    }
    // e[i] couples d[i] and d[i+1]; trailing zero as workspace
    let mut e: Vec<f64> = sub.to_vec();
    e.resize(n, 0.0);
    for l in 0..n {
        let mut iterations = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iterations += 1;
            if iterations > 60 {
                return None;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            let mut underflow = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Some(d)
}

/// Ascending eigenvalues of a symmetric matrix whose nonzeros satisfy
/// |i − j| <= `bandwidth`.
pub(crate) fn banded_eigenvalues(a: &Mat<f64>, bandwidth: usize) -> Option<Vec<f64>> {
    let band = SymmetricBand::from_dense(a, bandwidth);
    let (d, e) = band.tridiagonalize(bandwidth);
    tridiagonal_eigenvalues(d, &e)
}
