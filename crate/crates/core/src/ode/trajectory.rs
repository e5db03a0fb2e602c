use crate::error::{Error, Result};
use crate::linalg::{dist, locate, norm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Param {
    Time,
    PseudoTime,
}

/// Grid-sampled state curve with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    param: Param,
    grid: Vec<f64>,
    states: Vec<f64>,
    n: usize,
}

impl Trajectory {
    pub fn new(param: Param, grid: Vec<f64>, states: Vec<f64>, n: usize) -> Result<Self> {
        if grid.is_empty() || states.len() != grid.len() * n {
            return Err(Error::Invariant("trajectory sample count does not match its grid".into()));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invariant("trajectory grid must increase strictly".into()));
        }
        Ok(Trajectory {
            param,
            grid,
            states,
            n,
        })
    }

    pub fn param(&self) -> Param {
        self.param
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.n..(i + 1) * self.n]
    }

    pub fn first(&self) -> &[f64] {
        self.state(0)
    }

    pub fn last(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn end(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// Linear interpolation, clamped to the grid span.
    pub fn eval(&self, p: f64) -> Vec<f64> {
        if self.len() == 1 {
            return self.state(0).to_vec();
        }
        let i = locate(&self.grid, p);
        let (a, b) = (self.grid[i], self.grid[i + 1]);
        let lam = ((p - a) / (b - a)).clamp(0.0, 1.0);
        crate::linalg::lerp(self.state(i), self.state(i + 1), lam)
    }

    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.state(i))).fold(0.0, f64::max)
    }

    /// `max_i |self(p_i) - other(p_i)|` over this trajectory's nodes in `[lo, hi]`.
    pub fn sup_distance(&self, other: &Trajectory, lo: f64, hi: f64) -> f64 {
        let mut d = 0.0f64;
        for (i, &p) in self.grid.iter().enumerate() {
            if p >= lo && p <= hi {
                d = d.max(dist(self.state(i), &other.eval(p)));
            }
        }
        d
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::bv::path::fmt;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![match self.param {
            Param::Time => "t".to_string(),
            Param::PseudoTime => "s".to_string(),
        }];
        header.extend((1..=self.n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![fmt(self.grid[i])];
            row.extend(self.state(i).iter().map(|&x| fmt(x)));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
