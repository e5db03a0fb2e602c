//! Small dense-vector helpers. Dimensions here are tiny (n, m <= 4 in practice),
//! so plain slices beat pulling in a linear-algebra crate.

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `(1 - lambda) a + lambda b`, written so that `lambda = 0` and `lambda = 1`
/// reproduce the endpoints bitwise.
pub fn lerp(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            if lambda == 1.0 {
                y
            } else {
                x + (y - x) * lambda
            }
        })
        .collect()
}

pub fn lerp_into(a: &[f64], b: &[f64], lambda: f64, out: &mut [f64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = if lambda == 1.0 { y } else { x + (y - x) * lambda };
    }
}

/// Index `i` with `grid[i] <= x < grid[i + 1]`, clamped to a valid cell.
/// `grid` must be nondecreasing with at least two entries.
pub fn locate(grid: &[f64], x: f64) -> usize {
    debug_assert!(grid.len() >= 2);
    let n = grid.len();
    if x <= grid[0] {
        return 0;
    }
    if x >= grid[n - 1] {
        return n - 2;
    }
    // first index with grid[idx] > x
    let idx = grid.partition_point(|&g| g <= x);
    (idx - 1).min(n - 2)
}

/// Bisection for the root of an increasing function on `[lo, hi]`.
/// Returns the midpoint of the final bracket.
pub fn bisect_increasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, target: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_cells() {
        let g = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(locate(&g, -1.0), 0);
        assert_eq!(locate(&g, 0.0), 0);
        assert_eq!(locate(&g, 0.5), 0);
        assert_eq!(locate(&g, 1.0), 1);
        assert_eq!(locate(&g, 2.9), 2);
        assert_eq!(locate(&g, 3.0), 2);
        assert_eq!(locate(&g, 7.0), 2);
        // duplicated abscissa (a vertical step) resolves to the right cell
        let d = [0.0, 1.0, 1.0, 2.0];
        assert_eq!(locate(&d, 1.0), 2);
    }

    #[test]
    fn lerp_endpoints_exact() {
        let a = [0.1, 0.7];
        let b = [0.3, -0.2];
        assert_eq!(lerp(&a, &b, 0.0), a.to_vec());
        assert_eq!(lerp(&a, &b, 1.0), b.to_vec());
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect_increasing(|x| x * x * x, 0.0, 2.0, 2.0);
        assert!((r - 2f64.cbrt()).abs() < 1e-14);
    }
}
