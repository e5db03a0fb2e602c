use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::norm;

/// Evaluators of the vector fields of `ẋ = g₀(x,u,v) + Σ gᵢ(x,u) u̇ᵢ (+ g_r(x,u)|u̇|)`.
pub trait VectorFields: Send + Sync {
    /// `g₀(x, u, v)`. The default is the zero field.
    fn drift(&self, _x: &[f64], _u: &[f64], _v: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    /// `gᵢ(x, u)` for `i < m`.
    fn control_field(&self, i: usize, x: &[f64], u: &[f64], out: &mut [f64]);

    /// Optional field multiplied by `|u̇|` (`|φ'|` in pseudo-time).
    /// Returns `false` when absent.
    fn rate_field(&self, _x: &[f64], _u: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

/// Vector fields plus the metadata the integrators and bounds rely on.
#[derive(Clone)]
pub struct Dynamics {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    /// sublinearity constant: `|(g₀, …, g_m)| <= M (1 + |(x, u)|)`
    pub sublinear: f64,
    /// Lipschitz constant in `(x, u)` on the declared box
    pub lipschitz: f64,
    /// states leaving the ball of this radius abort integration
    pub box_radius: f64,
    fields: Arc<dyn VectorFields>,
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dynamics")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("q", &self.q)
            .field("sublinear", &self.sublinear)
            .field("lipschitz", &self.lipschitz)
            .field("box_radius", &self.box_radius)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublinearityReport {
    pub samples: usize,
    pub max_ratio: f64,
    pub holds: bool,
}

/// Scratch buffers for right-hand-side evaluation.
pub struct Workspace {
    g: Vec<f64>,
}

impl Dynamics {
    pub fn new(
        n: usize,
        m: usize,
        q: usize,
        sublinear: f64,
        lipschitz: f64,
        box_radius: f64,
        fields: Arc<dyn VectorFields>,
    ) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::Config("dynamics need n >= 1 and m >= 1".into()));
        }
        if !(sublinear > 0.0 && lipschitz >= 0.0 && box_radius > 0.0) {
            return Err(Error::Config("dynamics constants must be positive".into()));
        }
        Ok(Dynamics {
            n,
            m,
            q,
            sublinear,
            lipschitz,
            box_radius,
            fields,
        })
    }

    pub fn fields(&self) -> &dyn VectorFields {
        self.fields.as_ref()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace { g: vec![0.0; self.n] }
    }

    /// `out = w₀ g₀ + Σ u̇ᵢ gᵢ + |u̇| g_r`.
    pub fn rhs(&self, x: &[f64], u: &[f64], v: &[f64], w0: f64, udot: &[f64], out: &mut [f64], ws: &mut Workspace) {
        let g = &mut ws.g;
        out.fill(0.0);
        if w0 != 0.0 {
            self.fields.drift(x, u, v, g);
            for (o, gi) in out.iter_mut().zip(g.iter()) {
                *o += w0 * gi;
            }
        }
        for (i, &ud) in udot.iter().enumerate() {
            if ud != 0.0 {
                self.fields.control_field(i, x, u, g);
                for (o, gi) in out.iter_mut().zip(g.iter()) {
                    *o += ud * gi;
                }
            }
        }
        let speed = norm(udot);
        if speed != 0.0 && self.fields.rate_field(x, u, g) {
            for (o, gi) in out.iter_mut().zip(g.iter()) {
                *o += speed * gi;
            }
        }
    }

    /// Random spot check of `|(g₀, …, g_m)| <= M (1 + |(x, u)|)` on the box
    /// `|x|_∞ <= box_radius`, `|u|_∞ <= u_radius`.
    pub fn check_sublinearity(&self, samples: usize, u_radius: f64, seed: u64) -> SublinearityReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = vec![0.0; self.n];
        let mut u = vec![0.0; self.m];
        let v = vec![0.0; self.q];
        let mut g = vec![0.0; self.n];
        let mut max_ratio = 0.0f64;
        for _ in 0..samples {
            for xi in x.iter_mut() {
                *xi = rng.gen_range(-self.box_radius..=self.box_radius);
            }
            for ui in u.iter_mut() {
                *ui = rng.gen_range(-u_radius..=u_radius);
            }
            let mut sq = 0.0;
            self.fields.drift(&x, &u, &v, &mut g);
            sq += g.iter().map(|a| a * a).sum::<f64>();
            for i in 0..self.m {
                self.fields.control_field(i, &x, &u, &mut g);
                sq += g.iter().map(|a| a * a).sum::<f64>();
            }
            let xu = (norm(&x).powi(2) + norm(&u).powi(2)).sqrt();
            max_ratio = max_ratio.max(sq.sqrt() / (1.0 + xu));
        }
        SublinearityReport {
            samples,
            max_ratio,
            holds: max_ratio <= self.sublinear,
        }
    }

    pub(crate) fn check_box(&self, x: &[f64], at: f64) -> Result<()> {
        let r = norm(x);
        if !(r <= self.box_radius) {
            return Err(Error::Diagnostic(format!(
                "state norm {r} left the declared box (radius {}) at parameter {at}; enlarge the box",
                self.box_radius
            )));
        }
        Ok(())
    }
}
