use rand::Rng;

use crate::bv::{ControlPath, ControlPathSpec, ControlSet, Jump, Segment};
use crate::error::Result;

/// Uniform point in the unit disc.
pub fn disc_point<R: Rng>(rng: &mut R) -> Vec<f64> {
    let r = rng.gen::<f64>().sqrt();
    let th = rng.gen_range(0.0..std::f64::consts::TAU);
    vec![r * th.cos(), r * th.sin()]
}

fn sorted_times<R: Rng>(rng: &mut R, horizon: f64, count: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..count).map(|_| rng.gen_range(0.05..0.95) * horizon).collect();
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * horizon);
    let mut out = vec![0.0];
    out.extend(ts);
    out.push(horizon);
    out
}

/// Continuous polyline in the unit disc with `pieces` affine pieces at random times.
pub fn random_polyline<R: Rng>(rng: &mut R, horizon: f64, pieces: usize) -> Result<ControlPath> {
    let times = sorted_times(rng, horizon, pieces.max(1) - 1);
    let values = times.iter().map(|_| disc_point(rng)).collect();
    ControlPath::polyline(ControlSet::unit_disc(), times, values)
}

/// Piecewise-affine control in the unit disc with up to `max_jumps` jumps,
/// each with an arbitrary value `u(τ)` in the disc.
pub fn random_bv_control<R: Rng>(rng: &mut R, horizon: f64, max_jumps: usize) -> Result<ControlPath> {
    let jumps = rng.gen_range(0..=max_jumps);
    let extra = rng.gen_range(0..3);
    let breakpoints = sorted_times(rng, horizon, jumps + extra);
    let inner = breakpoints.len() - 2;
    let mut jump_at: Vec<bool> = (0..inner).map(|i| i < jumps).collect();
    // shuffle which inner breakpoints jump
    for i in (1..jump_at.len()).rev() {
        let j = rng.gen_range(0..=i);
        jump_at.swap(i, j);
    }
    let mut segments = Vec::with_capacity(breakpoints.len() - 1);
    let mut records = Vec::new();
    let mut start = disc_point(rng);
    let initial = start.clone();
    for j in 0..breakpoints.len() - 1 {
        let end = disc_point(rng);
        segments.push(Segment::Affine {
            start: start.clone(),
            end: end.clone(),
        });
        start = end.clone();
        if j < inner && jump_at[j] {
            let right = disc_point(rng);
            records.push(Jump {
                time: breakpoints[j + 1],
                left: end,
                value: disc_point(rng),
                right: right.clone(),
            });
            start = right;
        }
    }
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial,
        breakpoints,
        segments,
        jumps: records,
        terminal: None,
    })
}

/// `(cos θ, sin θ)` with a random cubic angle, `θ(0) = 0`.
pub fn random_circle_control<R: Rng>(rng: &mut R, horizon: f64) -> Result<ControlPath> {
    let coeffs: Vec<f64> = std::iter::once(0.0)
        .chain((1..=3).map(|k| rng.gen_range(-6.0..6.0) / horizon.powi(k)))
        .collect();
    ControlPath::new(ControlPathSpec {
        horizon,
        set: ControlSet::unit_disc(),
        initial: vec![1.0, 0.0],
        breakpoints: vec![0.0, horizon],
        segments: vec![Segment::CircleAngle {
            center: vec![0.0, 0.0],
            radius: 1.0,
            coeffs,
        }],
        jumps: Vec::new(),
        terminal: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_produce_valid_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let u = random_bv_control(&mut rng, 1.0, 5).unwrap();
            assert!(u.jumps().len() <= 5);
            let p = random_polyline(&mut rng, 1.0, 6).unwrap();
            assert!(!p.has_jumps());
            let c = random_circle_control(&mut rng, 1.0).unwrap();
            assert_eq!(c.value(0.0), vec![1.0, 0.0]);
        }
    }

    #[test]
    fn same_seed_same_path() {
        let a = random_bv_control(&mut ChaCha8Rng::seed_from_u64(9), 1.0, 5).unwrap();
        let b = random_bv_control(&mut ChaCha8Rng::seed_from_u64(9), 1.0, 5).unwrap();
        assert_eq!(a, b);
    }
}
