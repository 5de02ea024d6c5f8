//! Laurent polynomials over the complex numbers.
//!
//! Everything downstream lives in this ring: transfer-matrix eigenvalues,
//! the separated coefficient functions, their products over root-of-unity
//! orbits. Polynomials carry an optional parity flag because almost every
//! object in the model is either even or odd in the spectral variable, and
//! honoring that structure halves the linear systems and keeps root finding
//! in the squared variable.

use crate::{C64, SgError, Tol};
use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, SVD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
    None,
}

/// e^{2 pi i num/den} with the angle reduced exactly before evaluation.
pub fn unit_phase(num: i64, den: i64) -> C64 {
    assert!(den > 0);
    let m = num.rem_euclid(den);
    let angle = 2.0 * std::f64::consts::PI * (m as f64) / (den as f64);
    C64::new(angle.cos(), angle.sin())
}

/// f(lambda) = sum c_k lambda^k with k running over a finite integer window.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentPoly {
    k_min: i64,
    coeffs: Vec<C64>,
    parity: Parity,
}

fn infer_parity(k_min: i64, coeffs: &[C64]) -> Parity {
    let mut even = true;
    let mut odd = true;
    let mut any = false;
    for (i, c) in coeffs.iter().enumerate() {
        if c.norm_sqr() > 0.0 {
            any = true;
            let k = k_min + i as i64;
            if k.rem_euclid(2) == 0 {
                odd = false;
            } else {
                even = false;
            }
        }
    }
    if !any || even {
        Parity::Even
    } else if odd {
        Parity::Odd
    } else {
        Parity::None
    }
}

impl LaurentPoly {
    pub fn zero() -> Self {
        LaurentPoly {
            k_min: 0,
            coeffs: vec![C64::new(0.0, 0.0)],
            parity: Parity::Even,
        }
    }

    pub fn one() -> Self {
        Self::monomial(0, C64::new(1.0, 0.0))
    }

    pub fn monomial(k: i64, c: C64) -> Self {
        Self::new(k, vec![c])
    }

    /// Coefficients are given in ascending exponent order starting at `k_min`.
    /// Exact zeros at the ends of the window are trimmed.
    pub fn new(k_min: i64, coeffs: Vec<C64>) -> Self {
        let mut k_min = k_min;
        let mut coeffs = coeffs;
        while coeffs.last().map(|c| c.norm_sqr() == 0.0) == Some(true) {
            coeffs.pop();
        }
        let lead_zeros = coeffs
            .iter()
            .take_while(|c| c.norm_sqr() == 0.0)
            .count();
        if lead_zeros > 0 {
            coeffs.drain(..lead_zeros);
            k_min += lead_zeros as i64;
        }
        if coeffs.is_empty() {
            return Self::zero();
        }
        let parity = infer_parity(k_min, &coeffs);
        LaurentPoly {
            k_min,
            coeffs,
            parity,
        }
    }

    pub fn from_pairs(pairs: &[(i64, C64)]) -> Self {
        if pairs.is_empty() {
            return Self::zero();
        }
        let k_min = pairs.iter().map(|&(k, _)| k).min().unwrap();
        let k_max = pairs.iter().map(|&(k, _)| k).max().unwrap();
        let mut coeffs = vec![C64::new(0.0, 0.0); (k_max - k_min + 1) as usize];
        for &(k, c) in pairs {
            coeffs[(k - k_min) as usize] += c;
        }
        Self::new(k_min, coeffs)
    }

    /// lambda/a - a/lambda, the odd degree-1 factor vanishing at +-a.
    pub fn vanishing_pair(a: C64) -> Self {
        Self::from_pairs(&[(-1, -a), (1, a.inv())])
    }

    pub fn k_min(&self) -> i64 {
        self.k_min
    }

    pub fn k_max(&self) -> i64 {
        self.k_min + self.coeffs.len() as i64 - 1
    }

    pub fn window(&self) -> (i64, i64) {
        (self.k_min(), self.k_max())
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn coeff(&self, k: i64) -> C64 {
        if k < self.k_min || k > self.k_max() {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k - self.k_min) as usize]
        }
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn max_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    /// Horner evaluation. Evaluating at the origin is only allowed when the
    /// polynomial has no pole there.
    pub fn eval(&self, x: C64) -> C64 {
        if x.norm_sqr() == 0.0 {
            assert!(
                self.k_min >= 0,
                "evaluation at the origin of a Laurent polynomial with poles"
            );
            return if self.k_min == 0 {
                self.coeffs[0]
            } else {
                C64::new(0.0, 0.0)
            };
        }
        let mut acc = C64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc * x.powi(self.k_min as i32)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let k_min = self.k_min.min(other.k_min);
        let k_max = self.k_max().max(other.k_max());
        let mut coeffs = vec![C64::new(0.0, 0.0); (k_max - k_min + 1) as usize];
        for (i, c) in self.coeffs.iter().enumerate() {
            coeffs[(self.k_min - k_min) as usize + i] += c;
        }
        for (i, c) in other.coeffs.iter().enumerate() {
            coeffs[(other.k_min - k_min) as usize + i] += c;
        }
        Self::new(k_min, coeffs)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut coeffs =
            vec![C64::new(0.0, 0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.norm_sqr() == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(self.k_min + other.k_min, coeffs)
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::new(self.k_min, self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Multiply by lambda^m.
    pub fn shift(&self, m: i64) -> Self {
        Self::new(self.k_min + m, self.coeffs.clone())
    }

    /// f(c lambda).
    pub fn subst_scaled(&self, c: C64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * c.powi((self.k_min + i as i64) as i32))
            .collect();
        Self::new(self.k_min, coeffs)
    }

    /// f(e^{2 pi i j/p} lambda), with the phases reduced exactly so that
    /// orbit products cancel to machine precision.
    pub fn subst_unit_root(&self, j: i64, p: i64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * unit_phase(j * (self.k_min + i as i64), p))
            .collect();
        Self::new(self.k_min, coeffs)
    }

    /// Polynomial with conjugated coefficients; equals (f(x*))* as a function.
    pub fn conj_coeffs(&self) -> Self {
        Self::new(self.k_min, self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// True when all coefficients are real within tolerance, which for a
    /// Laurent polynomial is the same as (f(x))* = f(x*).
    pub fn is_real(&self, tol: Tol) -> bool {
        let scale = self.max_coeff_norm();
        self.coeffs
            .iter()
            .all(|c| c.im.abs() <= tol.threshold(scale))
    }

    /// The product of f over the full orbit { q^k lambda } of the p-th roots
    /// of unity, returned as a polynomial in Lambda = lambda^p.
    ///
    /// The product only involves exponents divisible by p; any stray
    /// coefficient beyond float noise is reported as an error rather than
    /// silently dropped.
    pub fn average(&self, p: i64) -> Result<LaurentPoly, SgError> {
        assert!(p >= 1);
        if self.is_zero() {
            return Ok(Self::zero());
        }
        let mut g = Self::one();
        for k in 1..=p {
            g = g.mul(&self.subst_unit_root(k, p));
        }
        g.collapse_cycle(p)
    }

    /// Divide every exponent by p, for polynomials supported on multiples of
    /// p. Stray coefficients beyond float noise are an error.
    pub fn collapse_cycle(&self, p: i64) -> Result<LaurentPoly, SgError> {
        let scale = self.max_coeff_norm();
        let tol = 1e-10 * (1.0 + scale);
        let mut stray = 0.0f64;
        let mut pairs = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.k_min + i as i64;
            if k.rem_euclid(p) == 0 {
                pairs.push((k.div_euclid(p), *c));
            } else {
                stray = stray.max(c.norm());
            }
        }
        if stray > tol {
            return Err(SgError::NotCyclic { stray, scale });
        }
        Ok(Self::from_pairs(&pairs))
    }

    /// Largest coefficient difference relative to the larger of the two
    /// coefficient scales. Zero polynomials compare equal to each other.
    pub fn rel_distance(&self, other: &Self) -> f64 {
        let scale = self.max_coeff_norm().max(other.max_coeff_norm());
        if scale == 0.0 {
            return 0.0;
        }
        let lo = self.k_min.min(other.k_min);
        let hi = self.k_max().max(other.k_max());
        (lo..=hi)
            .map(|k| (self.coeff(k) - other.coeff(k)).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// Least-squares reconstruction of a Laurent polynomial from point samples.
#[derive(Debug, Clone)]
pub struct SampleFit {
    pub poly: LaurentPoly,
    pub residual: f64,
    pub condition: f64,
}

fn admissible_exponents(window: (i64, i64), parity: Parity) -> Vec<i64> {
    let (lo, hi) = window;
    (lo..=hi)
        .filter(|k| match parity {
            Parity::Even => k.rem_euclid(2) == 0,
            Parity::Odd => k.rem_euclid(2) == 1,
            Parity::None => true,
        })
        .collect()
}

/// Sample points for fitting a polynomial with `count` free coefficients whose
/// exponents step by `spacing` (1 for a dense window, 2 under a parity
/// constraint). Points are spread so the powers stay distinct after the
/// spacing is applied, with a fixed angular offset to stay away from the real
/// and imaginary axes.
pub fn interpolation_grid(count: usize, spacing: u32, radius: f64, phase: f64) -> Vec<C64> {
    let full = count as f64 * spacing as f64;
    (0..count)
        .map(|j| {
            let angle = phase + 2.0 * std::f64::consts::PI * (j as f64) / full;
            C64::new(radius * angle.cos(), radius * angle.sin())
        })
        .collect()
}

pub const MAX_FIT_CONDITION: f64 = 1e12;

pub fn from_samples(
    xs: &[C64],
    ys: &[C64],
    window: (i64, i64),
    parity: Parity,
) -> Result<SampleFit, SgError> {
    assert_eq!(xs.len(), ys.len());
    let exps = admissible_exponents(window, parity);
    let n = exps.len();
    let m = xs.len();
    if m < n {
        return Err(SgError::TooFewSamples { got: m, need: n });
    }
    let mut a = Array2::<C64>::zeros((m, n));
    for (i, &x) in xs.iter().enumerate() {
        for (j, &e) in exps.iter().enumerate() {
            a[[i, j]] = x.powi(e as i32);
        }
    }
    let y = Array1::from_vec(ys.to_vec());
    let (u, s, vt) = a.svd(true, true)?;
    let u = u.expect("svd with u requested");
    let vt = vt.expect("svd with vt requested");
    let s_max = s.iter().cloned().fold(0.0f64, f64::max);
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !cond.is_finite() || cond > MAX_FIT_CONDITION {
        return Err(SgError::IllConditioned { cond });
    }
    let mut x = Array1::<C64>::zeros(n);
    for i in 0..n {
        let mut uy = C64::new(0.0, 0.0);
        for r in 0..m {
            uy += u[[r, i]].conj() * y[r];
        }
        let w = uy / s[i];
        for j in 0..n {
            x[j] += vt[[i, j]].conj() * w;
        }
    }
    let mut res_sq = 0.0f64;
    for r in 0..m {
        let mut ax = C64::new(0.0, 0.0);
        for j in 0..n {
            ax += a[[r, j]] * x[j];
        }
        res_sq += (ax - y[r]).norm_sqr();
    }
    let pairs: Vec<(i64, C64)> = exps.iter().cloned().zip(x.iter().cloned()).collect();
    Ok(SampleFit {
        poly: LaurentPoly::from_pairs(&pairs),
        residual: res_sq.sqrt(),
        condition: cond,
    })
}

/// Nonzero roots with multiplicities, plus the order of vanishing at the
/// origin (negative for a pole).
#[derive(Debug, Clone)]
pub struct RootMultiset {
    pub zero_order: i64,
    pub roots: Vec<(C64, usize)>,
}

impl RootMultiset {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|&(_, m)| m).sum()
    }

    pub fn flatten(&self) -> Vec<C64> {
        let mut out = Vec::new();
        for &(r, m) in &self.roots {
            for _ in 0..m {
                out.push(r);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RootOpts {
    /// Relative distance below which computed roots merge into one cluster.
    pub cluster_rel: f64,
    /// Residual bound for accepting a root, relative to the evaluation scale.
    pub check_rel: f64,
    /// Edge coefficients below this relative size are treated as fit noise.
    pub trim_rel: f64,
}

impl Default for RootOpts {
    fn default() -> Self {
        RootOpts {
            cluster_rel: 1e-7,
            check_rel: 1e-9,
            trim_rel: 1e-12,
        }
    }
}

fn companion_eigvals(poly: &[C64]) -> Result<Vec<C64>, SgError> {
    let d = poly.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = poly[d];
    let mut m = Array2::<C64>::zeros((d, d));
    for i in 1..d {
        m[[i, i - 1]] = C64::new(1.0, 0.0);
    }
    for i in 0..d {
        m[[i, d - 1]] = -poly[i] / lead;
    }
    let vals = m
        .eigvals()
        .map_err(|e| SgError::RootFinding(format!("companion eigensolve: {e}")))?;
    Ok(vals.to_vec())
}

fn cluster(values: &[C64], rel: f64) -> Vec<(C64, usize)> {
    let n = values.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let r = find(parent, parent[i]);
            parent[i] = r;
        }
        parent[i]
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = values[i].norm().max(values[j].norm());
            if (values[i] - values[j]).norm() <= rel * scale {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut groups: std::collections::HashMap<usize, Vec<C64>> = std::collections::HashMap::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(values[i]);
    }
    let mut out: Vec<(C64, usize)> = groups
        .into_values()
        .map(|g| {
            let m = g.len();
            let mean = g.iter().sum::<C64>() / C64::new(m as f64, 0.0);
            (mean, m)
        })
        .collect();
    out.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    out
}

/// Scale of |f| at radius r, used to normalize the residual check.
fn eval_scale(k_min: i64, coeffs: &[C64], r: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| c.norm() * r.powi((k_min + i as i64) as i32))
        .sum()
}

pub fn roots(f: &LaurentPoly) -> Result<RootMultiset, SgError> {
    roots_with(f, RootOpts::default())
}

pub fn roots_with(f: &LaurentPoly, opts: RootOpts) -> Result<RootMultiset, SgError> {
    if f.is_zero() {
        return Err(SgError::RootFinding(
            "zero polynomial has no root multiset".into(),
        ));
    }
    let scale = f.max_coeff_norm();
    let thr = opts.trim_rel * scale;
    let mut k_min = f.k_min;
    let mut coeffs = f.coeffs.clone();
    while coeffs.last().map(|c| c.norm() <= thr) == Some(true) {
        coeffs.pop();
    }
    let lead = coeffs.iter().take_while(|c| c.norm() <= thr).count();
    coeffs.drain(..lead);
    k_min += lead as i64;
    if coeffs.is_empty() {
        return Err(SgError::RootFinding(
            "all coefficients below the trim threshold".into(),
        ));
    }

    let spaced = matches!(infer_parity(k_min, &coeffs), Parity::Even | Parity::Odd)
        && coeffs.len() > 1;
    let raw: Vec<C64> = if spaced {
        let half: Vec<C64> = coeffs.iter().step_by(2).cloned().collect();
        let w_roots = companion_eigvals(&half)?;
        let clustered = cluster(&w_roots, opts.cluster_rel);
        let mut out = Vec::new();
        for (w, m) in clustered {
            let s = w.sqrt();
            for _ in 0..m {
                out.push(s);
                out.push(-s);
            }
        }
        out
    } else {
        companion_eigvals(&coeffs)?
    };

    let clustered = cluster(&raw, opts.cluster_rel);
    for &(r, _) in &clustered {
        let s = eval_scale(k_min, &coeffs, r.norm());
        let v = f.eval(r).norm();
        if v > opts.check_rel * s.max(f64::MIN_POSITIVE) {
            return Err(SgError::RootFinding(format!(
                "computed root {r} fails the residual check: |f| = {v:.3e} vs scale {s:.3e}"
            )));
        }
    }
    Ok(RootMultiset {
        zero_order: k_min,
        roots: clustered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eval_symmetric_pair() {
        let f = LaurentPoly::from_pairs(&[(1, c(1.0, 0.0)), (-1, c(1.0, 0.0))]);
        assert!((f.eval(c(1.0, 0.0)) - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_quadratic_at_i() {
        let f = LaurentPoly::from_pairs(&[(2, c(1.0, 0.0)), (0, c(-1.0, 0.0))]);
        assert!((f.eval(c(0.0, 1.0)) - c(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_single_site_b_average_at_one() {
        // (1/i^3)(L - 1/L) vanishes at L = 1
        let scale = C64::new(0.0, 1.0); // 1/i^3 = i
        let f = LaurentPoly::vanishing_pair(c(1.0, 0.0)).scale(scale);
        assert!(f.eval(c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn fit_even_window() {
        let target = LaurentPoly::from_pairs(&[(2, c(1.0, 0.0)), (-2, c(1.0, 0.0))]);
        let xs = interpolation_grid(3, 2, 1.0, 0.3);
        let ys: Vec<C64> = xs.iter().map(|&x| target.eval(x)).collect();
        let fit = from_samples(&xs, &ys, (-2, 2), Parity::Even).unwrap();
        assert!(fit.residual < 1e-12);
        assert!((fit.poly.coeff(2) - c(1.0, 0.0)).norm() < 1e-12);
        assert!(fit.poly.coeff(0).norm() < 1e-12);
        assert!((fit.poly.coeff(-2) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn fit_zero_samples_give_zero_poly() {
        let xs = interpolation_grid(5, 1, 1.0, 0.1);
        let ys = vec![c(0.0, 0.0); 5];
        let fit = from_samples(&xs, &ys, (-2, 2), Parity::None).unwrap();
        assert!(fit.poly.max_coeff_norm() < 1e-14);
    }

    #[test]
    fn fit_rejects_underdetermined() {
        let xs = interpolation_grid(2, 1, 1.0, 0.1);
        let ys = vec![c(1.0, 0.0); 2];
        assert!(matches!(
            from_samples(&xs, &ys, (-2, 2), Parity::None),
            Err(SgError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn roots_of_shifted_square() {
        let f = LaurentPoly::from_pairs(&[(2, c(1.0, 0.0)), (0, c(-4.0, 0.0))]);
        let rs = roots(&f).unwrap();
        assert_eq!(rs.zero_order, 0);
        assert_eq!(rs.total_multiplicity(), 2);
        let mut vals = rs.flatten();
        vals.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((vals[0] - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((vals[1] - c(2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn roots_of_odd_laurent() {
        let f = LaurentPoly::vanishing_pair(c(1.0, 0.0));
        let rs = roots(&f).unwrap();
        assert_eq!(rs.zero_order, -1);
        assert_eq!(rs.total_multiplicity(), 2);
        for (r, m) in rs.roots {
            assert_eq!(m, 1);
            assert!((r.norm() - 1.0).abs() < 1e-10);
            assert!(r.im.abs() < 1e-10);
        }
    }

    #[test]
    fn average_of_monomial() {
        let f = LaurentPoly::monomial(1, c(1.0, 0.0));
        let g = f.average(3).unwrap();
        assert_eq!(g.window(), (1, 1));
        assert!((g.coeff(1) - c(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn average_of_linear_shift() {
        let cc = c(0.7, 0.4);
        let f = LaurentPoly::from_pairs(&[(1, c(1.0, 0.0)), (0, -cc)]);
        let g = f.average(3).unwrap();
        assert!((g.coeff(1) - c(1.0, 0.0)).norm() < 1e-13);
        assert!((g.coeff(0) + cc * cc * cc).norm() < 1e-13);
    }

    #[test]
    fn reality_flags() {
        let f = LaurentPoly::from_pairs(&[(2, c(1.0, 0.0)), (0, c(1.0, 0.0))]);
        assert!(f.is_real(Tol::default()));
        let g = LaurentPoly::monomial(2, c(0.0, 1.0));
        assert!(!g.is_real(Tol::default()));
    }

    #[test]
    fn parity_inference() {
        let f = LaurentPoly::from_pairs(&[(2, c(1.0, 0.0)), (-2, c(1.0, 0.0))]);
        assert_eq!(f.parity(), Parity::Even);
        let g = LaurentPoly::vanishing_pair(c(2.0, 1.0));
        assert_eq!(g.parity(), Parity::Odd);
        let h = f.add(&g);
        assert_eq!(h.parity(), Parity::None);
    }
}
