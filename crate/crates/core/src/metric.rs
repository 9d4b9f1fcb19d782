//! Finite labeled metric spaces.
//!
//! The harness and the feasibility checker consume plain distance
//! matrices; the tree reconstruction consumes matrices that pass the
//! four-point condition. Validation and the additivity test share one
//! tolerance convention: an inequality `a <= b` holds within `tol` iff
//! `a <= b + tol`.

use crate::num::Scalar;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A finite metric space: point labels plus a square distance matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetric<S> {
    pub labels: Vec<String>,
    pub dist: Vec<Vec<S>>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricError {
    #[error("matrix is {rows}x{cols} but {n} labels were given")]
    Shape { n: usize, rows: usize, cols: usize },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("d({i},{j}) != d({j},{i})")]
    NotSymmetric { i: usize, j: usize },
    #[error("d({i},{i}) != 0")]
    NonzeroDiagonal { i: usize },
    #[error("d({i},{j}) < 0")]
    Negative { i: usize, j: usize },
    #[error("triangle inequality fails: d({i},{k}) > d({i},{j}) + d({j},{k})")]
    TriangleViolated { i: usize, j: usize, k: usize },
    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },
}

impl<S: Scalar> FiniteMetric<S> {
    pub fn new(labels: Vec<String>, dist: Vec<Vec<S>>) -> Self {
        FiniteMetric { labels, dist }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn d(&self, i: usize, j: usize) -> &S {
        &self.dist[i][j]
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Restriction to the given point indices, in the given order.
    /// Lossy float view of the space, for the numerical solver.
    pub fn to_f64(&self) -> FiniteMetric<f64> {
        FiniteMetric {
            labels: self.labels.clone(),
            dist: self
                .dist
                .iter()
                .map(|row| row.iter().map(|d| d.to_f64()).collect())
                .collect(),
        }
    }

    pub fn restrict(&self, indices: &[usize]) -> Result<FiniteMetric<S>, MetricError> {
        let n = self.len();
        for &i in indices {
            if i >= n {
                return Err(MetricError::IndexOutOfRange { index: i, n });
            }
        }
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        let dist = indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.dist[i][j].clone()).collect())
            .collect();
        Ok(FiniteMetric { labels, dist })
    }
}

/// Check shape, symmetry, zero diagonal, nonnegativity, and all
/// triangle inequalities within `tol`.
pub fn validate_metric<S: Scalar>(m: &FiniteMetric<S>, tol: &S) -> Result<(), MetricError> {
    let n = m.labels.len();
    if m.dist.len() != n || m.dist.iter().any(|row| row.len() != n) {
        return Err(MetricError::Shape {
            n,
            rows: m.dist.len(),
            cols: m.dist.iter().map(|r| r.len()).max().unwrap_or(0),
        });
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m.labels[i] == m.labels[j] {
                return Err(MetricError::DuplicateLabel(m.labels[i].clone()));
            }
        }
    }
    let zero = S::zero();
    for i in 0..n {
        if !m.dist[i][i].eq_within(&zero, tol) {
            return Err(MetricError::NonzeroDiagonal { i });
        }
        for j in 0..n {
            if !m.dist[i][j].eq_within(&m.dist[j][i], tol) {
                return Err(MetricError::NotSymmetric { i, j });
            }
            if !zero.le_within(&m.dist[i][j], tol) {
                return Err(MetricError::Negative { i, j });
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if j == i {
                continue;
            }
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let via = m.dist[i][j].clone() + m.dist[j][k].clone();
                if !m.dist[i][k].le_within(&via, tol) {
                    return Err(MetricError::TriangleViolated { i, j, k });
                }
            }
        }
    }
    Ok(())
}

/// Four-point condition: for every quadruple, the two largest of the
/// three pairings `d(i,j)+d(k,l)`, `d(i,k)+d(j,l)`, `d(i,l)+d(j,k)`
/// agree within `tol`. Quadruples with repeats reduce to the triangle
/// inequality, so only distinct indices are checked.
pub fn is_additive<S: Scalar>(m: &FiniteMetric<S>, tol: &S) -> bool {
    let n = m.len();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                for l in (k + 1)..n {
                    let s1 = m.dist[i][j].clone() + m.dist[k][l].clone();
                    let s2 = m.dist[i][k].clone() + m.dist[j][l].clone();
                    let s3 = m.dist[i][l].clone() + m.dist[j][k].clone();
                    let mut sums = [s1, s2, s3];
                    sums.sort_by(|a, b| a.partial_cmp(b).expect("comparable distances"));
                    if !sums[2].le_within(&sums[1], tol) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{rat, Rat};
    use num_traits::Zero;

    fn label_vec(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn path_metric(coords: &[i64]) -> FiniteMetric<Rat> {
        let labels = (0..coords.len()).map(|i| format!("p{i}")).collect();
        let dist = coords
            .iter()
            .map(|&a| coords.iter().map(|&b| rat((a - b).abs(), 1)).collect())
            .collect();
        FiniteMetric::new(labels, dist)
    }

    #[test]
    fn validates_line_metric() {
        let m = path_metric(&[0, 2, 5, 9]);
        assert_eq!(validate_metric(&m, &Rat::zero()), Ok(()));
        assert!(is_additive(&m, &Rat::zero()));
    }

    #[test]
    fn rejects_triangle_violation() {
        let m = FiniteMetric::new(
            label_vec(&["a", "b", "c"]),
            vec![
                vec![rat(0, 1), rat(1, 1), rat(5, 1)],
                vec![rat(1, 1), rat(0, 1), rat(1, 1)],
                vec![rat(5, 1), rat(1, 1), rat(0, 1)],
            ],
        );
        assert!(matches!(
            validate_metric(&m, &Rat::zero()),
            Err(MetricError::TriangleViolated { .. })
        ));
    }

    #[test]
    fn rejects_asymmetry_and_shape() {
        let bad = FiniteMetric::new(
            label_vec(&["a", "b"]),
            vec![vec![rat(0, 1), rat(1, 1)], vec![rat(2, 1), rat(0, 1)]],
        );
        assert!(matches!(validate_metric(&bad, &Rat::zero()), Err(MetricError::NotSymmetric { .. })));
        let short = FiniteMetric::new(label_vec(&["a", "b"]), vec![vec![rat(0, 1)]]);
        assert!(matches!(validate_metric(&short, &Rat::zero()), Err(MetricError::Shape { .. })));
    }

    #[test]
    fn unit_square_is_metric_but_not_additive() {
        // Vertices of the unit square with Euclidean distances, scaled
        // by 12 to keep entries rational except the diagonal, which we
        // replace by 17/12 (< sqrt(2)): still a metric, still fails the
        // four-point condition.
        let s = rat(17, 12);
        let one = rat(1, 1);
        let m = FiniteMetric::new(
            label_vec(&["a", "b", "c", "d"]),
            vec![
                vec![rat(0, 1), one.clone(), s.clone(), one.clone()],
                vec![one.clone(), rat(0, 1), one.clone(), s.clone()],
                vec![s.clone(), one.clone(), rat(0, 1), one.clone()],
                vec![one.clone(), s.clone(), one.clone(), rat(0, 1)],
            ],
        );
        assert_eq!(validate_metric(&m, &Rat::zero()), Ok(()));
        assert!(!is_additive(&m, &Rat::zero()));
    }

    #[test]
    fn restriction_keeps_order() {
        let m = path_metric(&[0, 2, 5, 9]);
        let r = m.restrict(&[3, 0]).unwrap();
        assert_eq!(r.labels, label_vec(&["p3", "p0"]));
        assert_eq!(r.dist[0][1], rat(9, 1));
        assert!(m.restrict(&[4]).is_err());
    }

    #[test]
    fn float_tolerance_absorbs_noise() {
        let m = FiniteMetric::new(
            label_vec(&["a", "b", "c"]),
            vec![
                vec![0.0, 1.0, 2.0 + 5e-10],
                vec![1.0, 0.0, 1.0],
                vec![2.0 + 5e-10, 1.0, 0.0],
            ],
        );
        assert_eq!(validate_metric(&m, &1e-9), Ok(()));
        assert!(is_additive(&m, &1e-9));
    }
}
