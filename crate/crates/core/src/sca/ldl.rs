//! Sparse LDLᵀ for symmetric quasi-definite matrices (up-looking,
//! elimination-tree based, no pivoting).
//!
//! Quasi-definite matrices `[P Aᵀ; A −D]` with `P, D` positive definite
//! factor stably in any symmetric ordering, which lets the interior-point
//! solver choose a time-staged ordering with fill confined to a band.

const NONE: usize = usize::MAX;

/// Upper triangle (diagonal included) of a symmetric matrix in compressed
/// sparse column form.
#[derive(Debug, Clone, Default)]
pub struct UpperCsc {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl UpperCsc {
    /// Build from `(row, col, value)` triplets; entries below the diagonal
    /// are mirrored, duplicates summed. Every diagonal entry is stored.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Self {
        for t in triplets.iter_mut() {
            if t.0 > t.1 {
                *t = (t.1, t.0, t.2);
            }
        }
        triplets.extend((0..n).map(|i| (i, i, 0.0)));
        triplets.sort_unstable_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last = (NONE, NONE);
        for &(r, c, v) in triplets.iter() {
            if (r, c) == last {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = (r, c);
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        Self {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// `y = A x` for the full symmetric matrix.
    pub fn sym_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            for p in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[p];
                let v = self.values[p];
                y[r] += v * x[c];
                if r != c {
                    y[c] += v * x[r];
                }
            }
        }
        y
    }
}

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    l_ptr: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    d: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LdlError {
    ZeroPivot(usize),
    NonFinite(usize),
}

impl LdlFactor {
    pub fn factor(a: &UpperCsc) -> Result<Self, LdlError> {
        let n = a.n;
        // elimination tree and column counts of L
        let mut etree = vec![NONE; n];
        let mut l_nz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in a.col_ptr[j]..a.col_ptr[j + 1] {
                let mut i = a.row_idx[p];
                if i >= j {
                    continue;
                }
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    l_nz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut l_ptr = vec![0usize; n + 1];
        for i in 0..n {
            l_ptr[i + 1] = l_ptr[i] + l_nz[i];
        }
        let nnz = l_ptr[n];
        let mut l_idx = vec![0usize; nnz];
        let mut l_val = vec![0.0; nnz];
        let mut d = vec![0.0; n];
        let mut d_inv = vec![0.0; n];

        let mut y_marked = vec![false; n];
        let mut y_vals = vec![0.0; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = l_ptr[..n].to_vec();

        for k in 0..n {
            let mut nnz_y = 0;
            for p in a.col_ptr[k]..a.col_ptr[k + 1] {
                let i = a.row_idx[p];
                if i == k {
                    d[k] = a.values[p];
                    continue;
                }
                y_vals[i] = a.values[p];
                if !y_marked[i] {
                    y_marked[i] = true;
                    elim[0] = i;
                    let mut nnz_e = 1;
                    let mut next = etree[i];
                    while next != NONE && next < k {
                        if y_marked[next] {
                            break;
                        }
                        y_marked[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in l_ptr[c]..tmp {
                    y_vals[l_idx[j]] -= l_val[j] * yc;
                }
                l_idx[tmp] = k;
                l_val[tmp] = yc * d_inv[c];
                d[k] -= yc * l_val[tmp];
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_marked[c] = false;
            }
            if d[k] == 0.0 {
                return Err(LdlError::ZeroPivot(k));
            }
            if !d[k].is_finite() {
                return Err(LdlError::NonFinite(k));
            }
            d_inv[k] = 1.0 / d[k];
        }
        Ok(Self {
            n,
            l_ptr,
            l_idx,
            l_val,
            d,
        })
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        for i in 0..self.n {
            let xi = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                x[self.l_idx[j]] -= self.l_val[j] * xi;
            }
        }
        for i in 0..self.n {
            x[i] /= self.d[i];
        }
        for i in (0..self.n).rev() {
            let mut xi = x[i];
            for j in self.l_ptr[i]..self.l_ptr[i + 1] {
                xi -= self.l_val[j] * x[self.l_idx[j]];
            }
            x[i] = xi;
        }
    }

    /// Number of strictly negative pivots (the inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn fill(&self) -> usize {
        self.l_idx.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        // Gaussian elimination with partial pivoting, the reference.
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
        let mut x = b.to_vec();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
            m.swap(c, p);
            x.swap(c, p);
            for r in c + 1..n {
                let f = m[r][c] / m[c][c];
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                x[r] -= f * x[c];
            }
        }
        for c in (0..n).rev() {
            for k in c + 1..n {
                x[c] -= m[c][k] * x[k];
            }
            x[c] /= m[c][c];
        }
        x
    }

    #[test]
    fn quasi_definite_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..50 {
            let np = rng.gen_range(2..15);
            let nd = rng.gen_range(0..6);
            let n = np + nd;
            let mut dense = vec![vec![0.0; n]; n];
            // P = BᵀB + I (sparse B), A random sparse, D = diag > 0
            for _ in 0..2 * np {
                let (i, j) = (rng.gen_range(0..np), rng.gen_range(0..np));
                let v: f64 = rng.gen_range(-1.0..1.0);
                dense[i][i] += v * v;
                dense[j][j] += v * v;
                dense[i][j] += v * v * 0.5;
                dense[j][i] += v * v * 0.5;
            }
            for i in 0..np {
                dense[i][i] += 1.0;
            }
            for r in np..n {
                dense[r][r] = -rng.gen_range(0.1..2.0);
                for c in 0..np {
                    if rng.gen_bool(0.3) {
                        let v = rng.gen_range(-1.0..1.0);
                        dense[r][c] = v;
                        dense[c][r] = v;
                    }
                }
            }
            // random symmetric permutation
            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let mut trip = Vec::new();
            for i in 0..n {
                for j in i..n {
                    if dense[i][j] != 0.0 {
                        trip.push((perm[i], perm[j], dense[i][j]));
                    }
                }
            }
            let a = UpperCsc::from_triplets(n, &mut trip);
            let f = LdlFactor::factor(&a).unwrap();
            assert_eq!(f.negative_pivots(), nd, "trial {trial}");
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut pb = vec![0.0; n];
            for i in 0..n {
                pb[perm[i]] = b[i];
            }
            f.solve_in_place(&mut pb);
            let reference = dense_solve(&dense, &b);
            for i in 0..n {
                assert!((pb[perm[i]] - reference[i]).abs() < 1e-9, "trial {trial}");
            }
            let back = a.sym_mul(&pb);
            for i in 0..n {
                assert!((back[perm[i]] - b[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let mut trip = vec![(0, 0, 0.0), (1, 1, 1.0)];
        let a = UpperCsc::from_triplets(2, &mut trip);
        assert_eq!(LdlFactor::factor(&a).unwrap_err(), LdlError::ZeroPivot(0));
    }

    #[test]
    fn tridiagonal_has_no_fill() {
        let n = 100;
        let mut trip = Vec::new();
        for i in 0..n {
            trip.push((i, i, 4.0));
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let a = UpperCsc::from_triplets(n, &mut trip);
        let f = LdlFactor::factor(&a).unwrap();
        assert_eq!(f.fill(), n - 1);
    }
}
