use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dist, norm};

/// Tolerance used when testing membership of sampled control values.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Compact convex control set `U`.
///
/// Every supported kind is convex, so straight segments are admissible bridges
/// and the Whitney constant is `C = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlSet {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ u : normals[i] . u <= offsets[i] }`, required to be bounded.
    Polytope { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl ControlSet {
    /// Closed unit disc in the plane, the control set of the R^3 example.
    pub fn unit_disc() -> Self {
        ControlSet::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ControlSet::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Invariant("box bounds have mismatched dimensions".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::Invariant("box requires finite lower <= upper".into()));
                }
            }
            ControlSet::Ball { center, radius } => {
                if center.is_empty() || !(*radius >= 0.0) || !radius.is_finite() {
                    return Err(Error::Invariant("ball requires a center and a finite radius >= 0".into()));
                }
            }
            ControlSet::Polytope { normals, offsets } => {
                let m = normals.first().map(Vec::len).unwrap_or(0);
                if m == 0 || normals.len() != offsets.len() || normals.iter().any(|a| a.len() != m) {
                    return Err(Error::Invariant("polytope rows have inconsistent dimensions".into()));
                }
                if self.vertices().is_empty() {
                    return Err(Error::Invariant("polytope is empty or has no vertices".into()));
                }
                if has_recession_direction(normals) {
                    return Err(Error::Invariant("polytope is unbounded".into()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Box { lower, .. } => lower.len(),
            ControlSet::Ball { center, .. } => center.len(),
            ControlSet::Polytope { normals, .. } => normals.first().map(Vec::len).unwrap_or(0),
        }
    }

    /// Whitney constant of the set. Convexity gives `C = 1`.
    pub fn whitney_constant(&self) -> f64 {
        1.0
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.contains_tol(p, MEMBERSHIP_TOL)
    }

    pub fn contains_tol(&self, p: &[f64], tol: f64) -> bool {
        if p.len() != self.dim() {
            return false;
        }
        match self {
            ControlSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol),
            ControlSet::Ball { center, radius } => dist(p, center) <= radius + tol,
            ControlSet::Polytope { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .all(|(a, b)| dot(a, p) <= b + tol),
        }
    }

    /// Euclidean distance to the set; for polytopes the largest facet
    /// violation (exact when a single facet is active).
    pub fn distance(&self, p: &[f64]) -> f64 {
        match self {
            ControlSet::Box { lower, upper } => p
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(x, (l, u))| (l - x).max(x - u).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt(),
            ControlSet::Ball { center, radius } => (dist(p, center) - radius).max(0.0),
            ControlSet::Polytope { normals, offsets } => normals
                .iter()
                .zip(offsets)
                .map(|(a, b)| (dot(a, p) - b) / dot(a, a).sqrt())
                .fold(0.0, f64::max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ControlSet::Box { lower, upper } => {
                let d: Vec<f64> = upper.iter().zip(lower).map(|(u, l)| u - l).collect();
                norm(&d)
            }
            ControlSet::Ball { radius, .. } => 2.0 * radius,
            ControlSet::Polytope { .. } => {
                let v = self.vertices();
                let mut best = 0.0f64;
                for i in 0..v.len() {
                    for j in i + 1..v.len() {
                        best = best.max(dist(&v[i], &v[j]));
                    }
                }
                best
            }
        }
    }

    /// Vertices of a polytope by brute-force enumeration of active sets.
    /// Empty for the other kinds.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let ControlSet::Polytope { normals, offsets } = self else {
            return Vec::new();
        };
        let m = normals.first().map(Vec::len).unwrap_or(0);
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut subset = Vec::with_capacity(m);
        enumerate_subsets(normals.len(), m, 0, &mut subset, &mut |rows| {
            let a: Vec<Vec<f64>> = rows.iter().map(|&r| normals[r].clone()).collect();
            let b: Vec<f64> = rows.iter().map(|&r| offsets[r]).collect();
            if let Some(x) = solve(a, b) {
                let feasible = normals
                    .iter()
                    .zip(offsets)
                    .all(|(a, b)| dot(a, &x) <= b + 1e-9);
                if feasible && !out.iter().any(|y| dist(y, &x) < 1e-12) {
                    out.push(x);
                }
            }
        });
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn enumerate_subsets(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    if cur.len() == k {
        f(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        enumerate_subsets(n, k, i + 1, cur, f);
        cur.pop();
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Probes axis and fixed pseudo-random directions for `A d <= 0`.
/// A sufficient test only: it catches the usual "missing facet" mistakes.
fn has_recession_direction(normals: &[Vec<f64>]) -> bool {
    use rand::{Rng, SeedableRng};
    let m = normals[0].len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..m {
        for sgn in [1.0, -1.0] {
            let mut d = vec![0.0; m];
            d[k] = sgn;
            dirs.push(d);
        }
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..512 {
        dirs.push((0..m).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    dirs.iter()
        .any(|d| norm(d) > 0.0 && normals.iter().all(|a| dot(a, d) <= 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> ControlSet {
        ControlSet::Polytope {
            normals: vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            offsets: vec![1.0, 1.0, 1.0, 1.0],
        }
    }

    #[test]
    fn disc_membership_and_diameter() {
        let u = ControlSet::unit_disc();
        u.validate().unwrap();
        assert!(u.contains(&[1.0, 0.0]));
        assert!(u.contains(&[0.6, 0.8]));
        assert!(!u.contains(&[0.8, 0.8]));
        assert_eq!(u.diameter(), 2.0);
        assert_eq!(u.whitney_constant(), 1.0);
    }

    #[test]
    fn polytope_vertices_and_diameter() {
        let p = square();
        p.validate().unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert!((p.diameter() - 8f64.sqrt()).abs() < 1e-12);
        assert!(p.contains(&[1.0, -1.0]));
        assert!(!p.contains(&[1.1, 0.0]));
    }

    #[test]
    fn unbounded_polytope_rejected() {
        let half = ControlSet::Polytope {
            normals: vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]],
            offsets: vec![1.0, 1.0, 1.0],
        };
        assert!(matches!(half.validate(), Err(Error::Invariant(_))));
    }

    #[test]
    fn box_checks() {
        let b = ControlSet::Box {
            lower: vec![0.0, -1.0],
            upper: vec![2.0, 1.0],
        };
        b.validate().unwrap();
        assert!((b.diameter() - 8f64.sqrt()).abs() < 1e-15);
        assert!(b.contains(&[2.0, 1.0]));
        assert!(!b.contains(&[2.0, 1.0, 0.0]));
        let bad = ControlSet::Box {
            lower: vec![1.0],
            upper: vec![0.0],
        };
        assert!(bad.validate().is_err());
    }
}
