/// Absolute plus relative tolerance pair used across the crate.
///
/// A quantity `x` is treated as negligible against a scale `s` when
/// `|x| <= abs + rel * |s|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tol {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            abs: 1e-10,
            rel: 1e-9,
        }
    }
}

impl Tol {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tol { abs, rel }
    }

    /// Threshold for a residual measured against the scale `s`.
    pub fn threshold(&self, s: f64) -> f64 {
        self.abs + self.rel * s.abs()
    }

    pub fn ok(&self, residual: f64, scale: f64) -> bool {
        residual <= self.threshold(scale)
    }
}
