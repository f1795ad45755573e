//! Exact vertex enumeration for small polytopes `{x >= 0 : A x = b}`.
//!
//! The constraint matrix is fixed at construction and every nonsingular
//! basis is inverted once; vertices for a given right-hand side are then
//! the basic solutions that come out nonnegative. This is exhaustive, so
//! any linear (or block-bilinear) objective attains its optimum on the
//! returned set.

/// Pivots smaller than this mark a basis as singular.
const PIVOT_TOLERANCE: f64 = 1e-10;
/// Basic variables above `-FEASIBILITY_TOLERANCE` count as nonnegative.
const FEASIBILITY_TOLERANCE: f64 = 1e-10;
/// Maximum constraint residual accepted for a vertex.
const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Vertices closer than this (max-norm) are merged.
const DEDUP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Basis {
    columns: Vec<usize>,
    /// Row-major `rank x rank` inverse of the basis matrix.
    inverse: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Polytope {
    rows: Vec<Vec<f64>>,
    independent_rows: Vec<usize>,
    bases: Vec<Basis>,
}

impl Polytope {
    /// `rows` is the constraint matrix `A`; all rows must have equal length.
    pub fn new(rows: Vec<Vec<f64>>) -> Self {
        let n = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == n), "ragged constraint matrix");
        let independent_rows = independent_rows(&rows);
        let rank = independent_rows.len();
        let mut bases = Vec::new();
        for columns in Combinations::new(n, rank) {
            let mut m = vec![0.0; rank * rank];
            for (i, &row) in independent_rows.iter().enumerate() {
                for (j, &col) in columns.iter().enumerate() {
                    m[i * rank + j] = rows[row][col];
                }
            }
            if let Some(inverse) = invert(&m, rank) {
                bases.push(Basis { columns, inverse });
            }
        }
        Polytope {
            rows,
            independent_rows,
            bases,
        }
    }

    pub fn dimension(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn rank(&self) -> usize {
        self.independent_rows.len()
    }

    pub fn basis_count(&self) -> usize {
        self.bases.len()
    }

    /// Largest absolute constraint violation of `x`.
    pub fn residual(&self, x: &[f64], rhs: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(rhs)
            .map(|(row, b)| (row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() - b).abs())
            .fold(0.0, f64::max)
    }

    /// All vertices for right-hand side `rhs`, in basis enumeration order.
    /// An empty result means the polytope is empty.
    pub fn vertices(&self, rhs: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(rhs.len(), self.rows.len(), "rhs length must match row count");
        let rank = self.rank();
        let n = self.dimension();
        let b: Vec<f64> = self.independent_rows.iter().map(|&i| rhs[i]).collect();
        let mut out: Vec<Vec<f64>> = Vec::new();
        'bases: for basis in &self.bases {
            let mut x = vec![0.0; n];
            for i in 0..rank {
                let v: f64 = (0..rank).map(|j| basis.inverse[i * rank + j] * b[j]).sum();
                if v < -FEASIBILITY_TOLERANCE {
                    continue 'bases;
                }
                x[basis.columns[i]] = v.max(0.0);
            }
            if self.residual(&x, rhs) > RESIDUAL_TOLERANCE {
                continue;
            }
            let duplicate = out.iter().any(|v| {
                v.iter()
                    .zip(&x)
                    .all(|(a, b)| (a - b).abs() <= DEDUP_TOLERANCE)
            });
            if !duplicate {
                out.push(x);
            }
        }
        out
    }
}

/// Greedy row basis by Gaussian elimination against previously kept rows.
fn independent_rows(rows: &[Vec<f64>]) -> Vec<usize> {
    let mut echelon: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut kept = Vec::new();
    for (idx, row) in rows.iter().enumerate() {
        let mut r = row.clone();
        for (pivot, e) in &echelon {
            let f = r[*pivot] / e[*pivot];
            if f != 0.0 {
                r.iter_mut().zip(e).for_each(|(a, b)| *a -= f * b);
            }
        }
        let pivot = (0..r.len())
            .max_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()));
        if let Some(p) = pivot.filter(|&p| r[p].abs() > PIVOT_TOLERANCE) {
            echelon.push((p, r));
            kept.push(idx);
        }
    }
    kept
}

/// Gauss-Jordan inverse with partial pivoting; `None` when singular.
fn invert(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if a[pivot * n + col].abs() < PIVOT_TOLERANCE {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(pivot * n + k, col * n + k);
                inv.swap(pivot * n + k, col * n + k);
            }
        }
        let d = a[col * n + col];
        for k in 0..n {
            a[col * n + k] /= d;
            inv[col * n + k] /= d;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row * n + col];
            if f != 0.0 {
                for k in 0..n {
                    a[row * n + k] -= f * a[col * n + k];
                    inv[row * n + k] -= f * inv[col * n + k];
                }
            }
        }
    }
    Some(inv)
}

/// k-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_count() {
        assert_eq!(Combinations::new(5, 2).count(), 10);
        assert_eq!(Combinations::new(16, 5).count(), 4368);
        assert_eq!(Combinations::new(3, 0).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
        assert_eq!(Combinations::new(4, 2).last(), Some(vec![2, 3]));
    }

    #[test]
    fn invert_round_trip() {
        let m = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let inv = invert(&m, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| m[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn dependent_rows_are_dropped() {
        let rows = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 1.0]];
        assert_eq!(independent_rows(&rows), vec![0, 1]);
    }

    #[test]
    fn simplex_vertices_are_unit_vectors() {
        let p = Polytope::new(vec![vec![1.0; 3]]);
        let v = p.vertices(&[1.0]);
        assert_eq!(v, vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    }

    #[test]
    fn two_by_two_table_with_margins() {
        // Atoms (0,0), (1,0), (0,1), (1,1); Pr(first=1) = 0.12, Pr(second=1) = 0.3.
        let p = Polytope::new(vec![
            vec![1.0; 4],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ]);
        let v = p.vertices(&[1.0, 0.12, 0.3]);
        assert_eq!(v.len(), 2);
        let mut cells: Vec<f64> = v.iter().map(|x| x[2]).collect();
        cells.sort_by(f64::total_cmp);
        assert!((cells[0] - 0.18).abs() < 1e-12);
        assert!((cells[1] - 0.30).abs() < 1e-12);
    }

    #[test]
    fn degenerate_margins_collapse_to_one_vertex() {
        let p = Polytope::new(vec![
            vec![1.0; 4],
            vec![0.0, 1.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 1.0],
        ]);
        let v = p.vertices(&[1.0, 1.0, 0.0]);
        assert_eq!(v, vec![vec![0.0, 1.0, 0.0, 0.0]]);
    }

    #[test]
    fn inconsistent_rhs_gives_no_vertices() {
        let p = Polytope::new(vec![vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert_eq!(p.rank(), 1);
        assert!(p.vertices(&[1.0, 3.0]).is_empty());
        assert_eq!(p.vertices(&[1.0, 2.0]).len(), 2);
    }
}
