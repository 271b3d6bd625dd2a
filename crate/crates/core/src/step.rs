//! Piecewise-constant functions of time on a uniform grid over `[0, horizon]`.
//!
//! Integrands of the insider variable are stored this way so that every
//! deterministic time integral appearing in a density exponent is an exact
//! finite sum.

#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    horizon: f64,
    values: Vec<f64>,
}

impl StepFunction {
    /// Constant function on a single cell.
    pub fn constant(value: f64, horizon: f64) -> Self {
        Self { horizon, values: vec![value] }
    }

    /// Cell values on `values.len()` equal cells covering `[0, horizon]`.
    pub fn from_values(values: Vec<f64>, horizon: f64) -> Self {
        assert!(!values.is_empty(), "step function needs at least one cell");
        Self { horizon, values }
    }

    /// Samples `f` at the midpoints of `cells` equal cells.
    pub fn sample<F: Fn(f64) -> f64>(f: F, horizon: f64, cells: usize) -> Self {
        let dt = horizon / cells as f64;
        let values = (0..cells).map(|k| f((k as f64 + 0.5) * dt)).collect();
        Self::from_values(values, horizon)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cell_width(&self) -> f64 {
        self.horizon / self.values.len() as f64
    }

    fn cell_index(&self, s: f64) -> usize {
        let k = (s / self.cell_width()).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.values.len() - 1)
        }
    }

    /// Right-continuous value at time `s`.
    pub fn value_at(&self, s: f64) -> f64 {
        self.values[self.cell_index(s)]
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// Maximal runs `(start, end, value)` of equal values intersected with
    /// `[a, b]`, in increasing time order.
    pub fn runs(&self, a: f64, b: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        if b <= a {
            return out;
        }
        if self.is_constant() {
            out.push((a, b, self.values[0]));
            return out;
        }
        let w = self.cell_width();
        let mut k = self.cell_index(a);
        let mut start = a;
        while start < b && k < self.values.len() {
            let v = self.values[k];
            let mut j = k;
            while j + 1 < self.values.len() && self.values[j + 1] == v {
                j += 1;
            }
            let end = if j + 1 == self.values.len() { b } else { ((j + 1) as f64 * w).min(b) };
            if end > start {
                out.push((start, end, v));
            }
            start = end;
            k = j + 1;
        }
        out
    }

    /// Exact `∫_a^b f(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.runs(a, b).iter().map(|&(s, e, v)| v * (e - s)).sum()
    }

    /// Exact `∫_a^b f(s)² ds`.
    pub fn integral_sq(&self, a: f64, b: f64) -> f64 {
        self.runs(a, b).iter().map(|&(s, e, v)| v * v * (e - s)).sum()
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}
