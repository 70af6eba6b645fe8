//! Thermally averaged extinction cross section.
//!
//! For moving atoms the extinction at laboratory frequency ω is the Lorentzian
//! cross section averaged over the velocity component along the propagation
//! direction, a Voigt profile. The average is computed with the trapezoidal
//! rule on a uniform velocity grid, which converges geometrically for this
//! analytic integrand, and optionally tabulated for fast lookup.

use std::f64::consts::PI;

/// Velocity nodes (units of v0) and weights for averages over the 1-D Maxwell distribution.
fn maxwell_nodes(kv0: f64) -> Vec<(f64, f64)> {
    if kv0 == 0.0 {
        return vec![(0.0, 1.0)];
    }
    // Poles of the Lorentzian lie 1/(2 kv0) from the real axis in velocity.
    let h = (0.09 / kv0).min(0.5);
    let j = (6.2 / h).ceil() as i64;
    let norm = h / PI.sqrt();
    (-j..=j)
        .map(|i| {
            let v = i as f64 * h;
            (v, norm * (-v * v).exp())
        })
        .collect()
}

#[derive(Debug, Clone)]
struct Table {
    start: f64,
    step: f64,
    values: Vec<f64>,
}

impl Table {
    /// Four-point Lagrange interpolation, `None` outside the tabulated range.
    fn lookup(&self, omega: f64) -> Option<f64> {
        let x = (omega - self.start) / self.step;
        let i = x.floor() as i64;
        if i < 1 || i + 2 >= self.values.len() as i64 {
            return None;
        }
        let t = x - i as f64;
        let i = i as usize;
        let [a, b, c, d] = [self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]];
        Some(
            -a * t * (t - 1.0) * (t - 2.0) / 6.0 + b * (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
                - c * (t + 1.0) * t * (t - 2.0) / 2.0
                + d * (t + 1.0) * t * (t - 1.0) / 6.0,
        )
    }
}

/// Extinction cross section σ(ω) in cm^2 for a sum of Lorentzian lines.
#[derive(Debug, Clone)]
pub struct Extinction {
    /// (centre in units of gamma, peak cross section in cm^2).
    lines: Vec<(f64, f64)>,
    kv0: f64,
    nodes: Vec<(f64, f64)>,
    table: Option<Table>,
}

const TABLE_STEP: f64 = 0.01;

impl Extinction {
    pub fn new(lines: Vec<(f64, f64)>, kv0: f64) -> Self {
        let nodes = maxwell_nodes(kv0);
        Extinction { lines, kv0, nodes, table: None }
    }

    /// Tabulate σ on [lo, hi]; lookups outside fall back to direct evaluation.
    /// Without thermal motion direct evaluation is already cheap and no table is built.
    pub fn with_table(mut self, lo: f64, hi: f64) -> Self {
        if self.kv0 == 0.0 || !(hi > lo) {
            return self;
        }
        let start = lo - 2.0 * TABLE_STEP;
        let n = ((hi - lo) / TABLE_STEP).ceil() as usize + 5;
        let values = (0..n).map(|i| self.exact(start + i as f64 * TABLE_STEP)).collect();
        self.table = Some(Table { start, step: TABLE_STEP, values });
        self
    }

    pub fn kv0(&self) -> f64 {
        self.kv0
    }

    /// Direct evaluation of the velocity average.
    pub fn exact(&self, omega: f64) -> f64 {
        let mut total = 0.0;
        for &(v, w) in &self.nodes {
            let shifted = omega - self.kv0 * v;
            let mut s = 0.0;
            for &(center, peak) in &self.lines {
                let x = 2.0 * (shifted - center);
                s += peak / (1.0 + x * x);
            }
            total += w * s;
        }
        total
    }

    pub fn sigma(&self, omega: f64) -> f64 {
        match self.table.as_ref().and_then(|t| t.lookup(omega)) {
            Some(v) => v,
            None => self.exact(omega),
        }
    }
}
