//! Orbit products over the q-cycle. Every monodromy entry, multiplied over
//! the full orbit lambda -> q^k lambda, collapses to a scalar Laurent
//! polynomial in Lambda = lambda^p. Those scalars obey a closed 2x2 product
//! structure over subchains, carry the zero data that anchors the separated
//! variables, and the diagonal ones are the polynomials from which the
//! separated coefficient pair a(lambda), d(lambda) is built.

use crate::laurent::{roots, unit_phase, LaurentPoly};
use crate::model::{build_monodromy_range, rel_comm, Monodromy, OpLaurent};
use crate::params::ModelParams;
use crate::tol::Tol;
use crate::{C64, SgError};
use serde_json::json;

fn i_pow(n: u32) -> C64 {
    match n % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    }
}

/// 2x2 matrix of scalar Laurent polynomials in Lambda.
#[derive(Clone)]
pub struct AverageMatrix {
    pub a: LaurentPoly,
    pub b: LaurentPoly,
    pub c: LaurentPoly,
    pub d: LaurentPoly,
}

impl AverageMatrix {
    pub fn mul(&self, rhs: &Self) -> Self {
        AverageMatrix {
            a: self.a.mul(&rhs.a).add(&self.b.mul(&rhs.c)),
            b: self.a.mul(&rhs.b).add(&self.b.mul(&rhs.d)),
            c: self.c.mul(&rhs.a).add(&self.d.mul(&rhs.c)),
            d: self.c.mul(&rhs.b).add(&self.d.mul(&rhs.d)),
        }
    }

    pub fn det(&self) -> LaurentPoly {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }
}

/// Site average written directly in the p-th powers K = kappa^p, X = xi^p,
/// U = u^p, V = v^p. Every entry, divided by K, has window [-1, 1] in each of
/// the four powers separately, which is what the finite-difference degree
/// test below exploits.
pub fn average_lax_powers(p: i64, kp: C64, x: C64, u: C64, v: C64) -> AverageMatrix {
    let ip = i_pow((p % 4) as u32);
    let k2 = kp * kp;
    let off = kp / ip;
    AverageMatrix {
        a: LaurentPoly::from_pairs(&[(0, u * (k2 * v + v.inv()))]),
        b: LaurentPoly::from_pairs(&[(-1, -off * x / v), (1, off * v / x)]),
        c: LaurentPoly::from_pairs(&[(-1, -off * x * v), (1, off / (x * v))]),
        d: LaurentPoly::from_pairs(&[(0, (v + k2 / v) / u)]),
    }
}

/// Closed form of the orbit product of one site matrix. The Weyl generators
/// enter only through their p-th powers, which are scalars on the cyclic
/// representation, so the result is an ordinary 2x2 Laurent matrix in Lambda.
pub fn average_lax(params: &ModelParams, site: usize) -> AverageMatrix {
    let p = params.p();
    let s = &params.sites[site];
    average_lax_powers(
        p,
        s.kappa.powi(p as i32),
        s.xi.powi(p as i32),
        s.u.powi(p as i32),
        s.v.powi(p as i32),
    )
}

/// Product of the averaged site matrices for sites lo..hi, highest site
/// leftmost, matching the operator ordering.
pub fn average_matrix_range(params: &ModelParams, lo: usize, hi: usize) -> AverageMatrix {
    assert!(lo < hi && hi <= params.n_sites as usize);
    let mut m = average_lax(params, hi - 1);
    for site in (lo..hi - 1).rev() {
        m = m.mul(&average_lax(params, site));
    }
    m
}

/// Averaged monodromy of a chain segment together with the scalar data the
/// separated variables live on: the zero pairs of the off-diagonal entry, the
/// diagonal values there, and on even segments the extra scale and the two
/// shift weights of the extra coordinate.
pub struct AverageMonodromy {
    pub m: AverageMatrix,
    /// One representative per +-Z zero pair of the off-diagonal average,
    /// multiplicity expanded. The p-th powers of the separated coordinates
    /// are these values, each up to a sign the polynomial alone cannot fix.
    pub z_list: Vec<C64>,
    /// Smallest relative distance between two entries of z_list.
    pub zero_margin: f64,
    /// Even segments: overall scale of the off-diagonal eigenvalue family
    /// (p-th power of the extra coordinate), extracted from the leading
    /// coefficient in the sign convention of z_list.
    pub z_extra: Option<C64>,
    /// Even segments: p-th powers of the weights multiplying the raising and
    /// lowering shifts of the extra coordinate, fixed by the charge average
    /// together with the zero products (same sign convention as z_list).
    pub z_raise: Option<C64>,
    pub z_lower: Option<C64>,
    pub a_at_zeros: Vec<C64>,
    pub d_at_zeros: Vec<C64>,
    /// Per-site p-th powers of coupling, anchor and the two weights; every
    /// closed identity on the averages is written in these.
    pub k_pow: Vec<C64>,
    pub x_pow: Vec<C64>,
    pub u_pow: Vec<C64>,
    pub v_pow: Vec<C64>,
}

/// Averaged monodromy of sites lo..hi with its zero data. Fails when the
/// off-diagonal average degenerates (identically zero, a missing zero pair,
/// or two zeros colliding); those all call for resampled site parameters.
pub fn average_monodromy_range(
    params: &ModelParams,
    lo: usize,
    hi: usize,
) -> Result<AverageMonodromy, SgError> {
    let p = params.p();
    let m = average_matrix_range(params, lo, hi);
    if m.b.is_zero() {
        return Err(SgError::Degenerate(
            "the off-diagonal average vanished identically; resample the site parameters".into(),
        ));
    }
    let len = hi - lo;
    let n_sep = len - (len + 1) % 2;
    let reps = fold_sign_pairs(&roots(&m.b)?.roots)?;
    let mut z_list = Vec::new();
    for &(z, mult) in &reps {
        for _ in 0..mult {
            z_list.push(z);
        }
    }
    if z_list.len() != n_sep {
        return Err(SgError::RootFinding(format!(
            "expected {n_sep} zero pairs of the off-diagonal average, found {}",
            z_list.len()
        )));
    }
    let mut zero_margin = f64::INFINITY;
    for i in 0..z_list.len() {
        for j in 0..i {
            let scale = z_list[i].norm().max(z_list[j].norm());
            zero_margin = zero_margin.min((z_list[i] - z_list[j]).norm() / scale);
        }
    }
    if zero_margin < 1e-6 {
        return Err(SgError::Degenerate(format!(
            "two zeros of the off-diagonal average collide (margin {zero_margin:e}); resample"
        )));
    }
    let pw = |f: fn(&crate::params::SiteParams) -> C64| -> Vec<C64> {
        params.sites[lo..hi]
            .iter()
            .map(|s| f(s).powi(p as i32))
            .collect()
    };
    let k_pow = pw(|s| s.kappa);
    let x_pow = pw(|s| s.xi);
    let u_pow = pw(|s| s.u);
    let v_pow = pw(|s| s.v);
    let (z_extra, z_raise, z_lower) = if len % 2 == 0 {
        let ipn = i_pow(((p * len as i64) % 4) as u32);
        let k_prod: C64 = k_pow.iter().product();
        let z_prod: C64 = z_list.iter().product();
        let extra = m.b.coeff(n_sep as i64) * z_prod * ipn / k_prod;
        // the charge average alternates site weights, first site of the
        // segment on top
        let theta: C64 = v_pow
            .iter()
            .enumerate()
            .map(|(i, v)| if i % 2 == 0 { *v } else { v.inv() })
            .product();
        let x_prod: C64 = x_pow.iter().product();
        let raise = theta * x_prod / z_prod;
        (Some(extra), Some(raise), Some(raise / (theta * theta)))
    } else {
        (None, None, None)
    };
    let a_at_zeros = z_list.iter().map(|&z| m.a.eval(z)).collect();
    let d_at_zeros = z_list.iter().map(|&z| m.d.eval(z)).collect();
    Ok(AverageMonodromy {
        m,
        z_list,
        zero_margin,
        z_extra,
        z_raise,
        z_lower,
        a_at_zeros,
        d_at_zeros,
        k_pow,
        x_pow,
        u_pow,
        v_pow,
    })
}

pub fn average_monodromy(params: &ModelParams) -> Result<AverageMonodromy, SgError> {
    average_monodromy_range(params, 0, params.n_sites as usize)
}

pub struct OperatorAverage {
    pub poly: LaurentPoly,
    /// Largest relative deviation of any orbit-product coefficient from a
    /// multiple of the identity.
    pub off_scalar: f64,
}

/// Direct orbit product of an operator valued Laurent polynomial, computed
/// as the ordered matrix product over lambda -> q^k lambda, k = 1..p, then
/// read off as a scalar polynomial in Lambda. The product only makes sense
/// for a commuting family, which is checked on two separated sample points,
/// and the result must be central, which is checked on the coefficients.
pub fn operator_average(params: &ModelParams, op: &OpLaurent) -> Result<OperatorAverage, SgError> {
    let p = params.p();
    let lp = params.lprime;
    let m1 = op.eval(C64::new(1.03, 0.29));
    let m2 = op.eval(C64::new(0.77, -0.61));
    let comm = rel_comm(&m1, &m2);
    if comm > 1e-8 {
        return Err(SgError::Functional(format!(
            "family entries at distinct spectral points fail to commute ({comm:e}); \
             the orbit product needs a commuting family"
        )));
    }
    let mut prod: Option<OpLaurent> = None;
    for k in 1..=p {
        let f = op.subst_unit_root(-lp * k, p);
        prod = Some(match prod {
            Some(g) => g.mul(&f),
            None => f,
        });
    }
    let (tr, off_scalar) = prod.expect("p >= 1").scalar_part();
    if off_scalar > 1e-8 {
        return Err(SgError::Functional(format!(
            "orbit product is not central: off-scalar part {off_scalar:e}"
        )));
    }
    Ok(OperatorAverage {
        poly: tr.collapse_cycle(p)?,
        off_scalar,
    })
}

/// Entrywise operator averages of a monodromy block, with the worst
/// off-scalar deviation across the four entries.
pub fn entry_averages(
    params: &ModelParams,
    m: &Monodromy,
) -> Result<(AverageMatrix, f64), SgError> {
    let a = operator_average(params, &m.a)?;
    let b = operator_average(params, &m.b)?;
    let c = operator_average(params, &m.c)?;
    let d = operator_average(params, &m.d)?;
    let off = a
        .off_scalar
        .max(b.off_scalar)
        .max(c.off_scalar)
        .max(d.off_scalar);
    Ok((
        AverageMatrix {
            a: a.poly,
            b: b.poly,
            c: c.poly,
            d: d.poly,
        },
        off,
    ))
}

/// Orbit product of the quantum determinant over sites lo..hi: each site
/// contributes K_n^2 (Lambda/M - M/Lambda) factors at the p-th powers of the
/// two zero lines.
pub fn average_quantum_determinant_range(
    params: &ModelParams,
    lo: usize,
    hi: usize,
) -> LaurentPoly {
    let p = params.p() as i32;
    let mut f = LaurentPoly::one();
    for n in lo..hi {
        let k2 = params.sites[n].kappa.powi(2 * p);
        let mp = params.mu(n, true).powi(p);
        let mm = params.mu(n, false).powi(p);
        f = f
            .mul(&LaurentPoly::vanishing_pair(mp))
            .mul(&LaurentPoly::vanishing_pair(mm))
            .scale(k2);
    }
    f
}

pub fn average_quantum_determinant(params: &ModelParams) -> LaurentPoly {
    average_quantum_determinant_range(params, 0, params.n_sites as usize)
}

/// Smallest relative gap between the two diagonal averages across the zeros
/// of the off-diagonal one. Zero exactly when the weight class makes the
/// diagonals coincide; the separated spectrum is simple only when this is
/// clear of zero.
pub fn a_neq_d_gap(avg: &AverageMonodromy) -> f64 {
    let scale = avg
        .a_at_zeros
        .iter()
        .zip(&avg.d_at_zeros)
        .map(|(a, d)| a.norm() + d.norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    avg.a_at_zeros
        .iter()
        .zip(&avg.d_at_zeros)
        .map(|(a, d)| (a - d).norm() / scale)
        .fold(f64::INFINITY, f64::min)
}

/// Even chains only: the lowering weight of the extra coordinate is already
/// determined by the zero data of the two halves of any cut, with each even
/// half closing its coordinate tuple by its own shift weight (lowering for
/// the lower block, raising for the upper one). Returns the relative
/// mismatch of that closure, None on odd chains. Matching is done on squares
/// because each zero representative carries an undetermined sign.
pub fn shift_weight_split_residual(
    params: &ModelParams,
    m_split: usize,
) -> Result<Option<f64>, SgError> {
    let n = params.n_sites as usize;
    assert!(m_split >= 1 && m_split < n, "the cut must leave sites on both sides");
    if n % 2 == 1 {
        return Ok(None);
    }
    let full = average_monodromy(params)?;
    let top = average_monodromy_range(params, n - m_split, n)?;
    let bot = average_monodromy_range(params, 0, n - m_split)?;
    // product over the coordinate tuple of a segment, closed by the given
    // shift weight when the segment is even
    let tuple = |seg: &AverageMonodromy, close: Option<C64>| -> C64 {
        let z: C64 = seg.z_list.iter().product();
        z * close.unwrap_or(C64::new(1.0, 0.0))
    };
    let x_top_sq: C64 = top.x_pow.iter().map(|x| x * x).product();
    let inv_full: C64 = full.z_list.iter().map(|z| z.inv()).product();
    let rhs = inv_full * tuple(&bot, bot.z_lower) * x_top_sq / tuple(&top, top.z_raise);
    let lhs = full.z_lower.expect("even chain");
    let (l2, r2) = (lhs * lhs, rhs * rhs);
    Ok(Some((l2 - r2).norm() / l2.norm().max(r2.norm())))
}

pub struct RecursionReport {
    /// Worst relative coefficient error across the four subchain product
    /// identities at this cut.
    pub entry_residual: f64,
    /// Worst relative error of the diagonal values forced at the zeros of
    /// the off-diagonal average by the determinant ratios of the halves.
    pub value_residual: f64,
    /// Off-diagonal average against its rebuilt zero-pair form.
    pub factor_residual: f64,
    /// Normalization of the zero-pair form against the couplings, compared
    /// on squares since zero representatives are fixed only up to sign.
    pub norm_residual: f64,
    /// Even chains: closure of the lowering weight across this cut.
    pub shift_residual: Option<f64>,
    /// det of the averaged monodromy against the averaged quantum
    /// determinant.
    pub det_residual: f64,
    pub max_off_scalar: f64,
}

/// Check, at one cut of the chain, that the entrywise operator averages
/// multiply like a 2x2 transfer of scalars, that at the zeros of the full
/// off-diagonal average the diagonal averages reduce to determinant ratios
/// of the two halves, and that the off-diagonal average is exactly its
/// zero-pair product with the coupling normalization.
pub fn recursion_residual(params: &ModelParams, m_split: usize) -> Result<RecursionReport, SgError> {
    let n = params.n_sites as usize;
    assert!(m_split >= 1 && m_split < n, "the cut must leave sites on both sides");
    let (full, off_full) = entry_averages(params, &build_monodromy_range(params, 0, n)?)?;
    // top block of m_split sites acts as the left factor
    let (top, off_top) = entry_averages(params, &build_monodromy_range(params, n - m_split, n)?)?;
    let (bot, off_bot) = entry_averages(params, &build_monodromy_range(params, 0, n - m_split)?)?;
    let max_off_scalar = off_full.max(off_top).max(off_bot);
    let prod = top.mul(&bot);
    let mut entry_residual = 0.0f64;
    for (lhs, rhs) in [
        (&full.a, &prod.a),
        (&full.b, &prod.b),
        (&full.c, &prod.c),
        (&full.d, &prod.d),
    ] {
        entry_residual = entry_residual.max(lhs.rel_distance(rhs));
    }
    let det_top = average_quantum_determinant_range(params, n - m_split, n);
    let det_bot = average_quantum_determinant_range(params, 0, n - m_split);
    let mut value_residual = 0.0f64;
    for &z in &roots(&full.b)?.flatten() {
        let bt = top.b.eval(z);
        let bb = bot.b.eval(z);
        let guard = 1e-8 * top.b.max_coeff_norm().max(bot.b.max_coeff_norm());
        if bt.norm() < guard || bb.norm() < guard {
            continue;
        }
        let d_lhs = full.d.eval(z);
        let d_rhs = -det_top.eval(z) * bb / bt;
        let a_lhs = full.a.eval(z);
        let a_rhs = -det_bot.eval(z) * bt / bb;
        let scale_d = d_lhs.norm().max(d_rhs.norm()).max(f64::MIN_POSITIVE);
        let scale_a = a_lhs.norm().max(a_rhs.norm()).max(f64::MIN_POSITIVE);
        value_residual = value_residual
            .max((d_lhs - d_rhs).norm() / scale_d)
            .max((a_lhs - a_rhs).norm() / scale_a);
    }
    let rich = average_monodromy(params)?;
    let z_prod: C64 = rich.z_list.iter().product();
    let c0 = rich.m.b.coeff(params.n_sep()) * z_prod;
    let mut rebuilt = LaurentPoly::from_pairs(&[(0, c0)]);
    for &z in &rich.z_list {
        rebuilt = rebuilt.mul(&LaurentPoly::vanishing_pair(z));
    }
    let factor_residual = rebuilt.rel_distance(&full.b);
    let k_prod: C64 = rich.k_pow.iter().product();
    let ipn = i_pow(((params.p() * n as i64) % 4) as u32);
    let want = rich.z_extra.unwrap_or(C64::new(1.0, 0.0)) * k_prod / ipn;
    let (c2, w2) = (c0 * c0, want * want);
    let norm_residual = (c2 - w2).norm() / c2.norm().max(w2.norm());
    let shift_residual = shift_weight_split_residual(params, m_split)?;
    let det_residual = full.det().rel_distance(&average_quantum_determinant(params));
    Ok(RecursionReport {
        entry_residual,
        value_residual,
        factor_residual,
        norm_residual,
        shift_residual,
        det_residual,
        max_off_scalar,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootRule {
    /// Z^2 real: the p-th root is picked so that z^2/q is real.
    RealSquare,
    /// Second member of a conjugate pair: z_m = (z_n/q)*.
    ConjugatePair,
    /// Repeated zero sharing the z of its cluster.
    Repeated,
    /// No structure matched: deterministic principal p-th root.
    Principal,
}

impl RootRule {
    fn name(self) -> &'static str {
        match self {
            RootRule::RealSquare => "real-square",
            RootRule::ConjugatePair => "conjugate-pair",
            RootRule::Repeated => "repeated",
            RootRule::Principal => "principal",
        }
    }
}

/// The separated coefficient pair a(lambda), d(lambda): a carries one p-th
/// root per zero pair of the diagonal average, d is its coefficient
/// conjugate, and the orbit products give back the two diagonal averages.
pub struct GaugeCoefficients {
    pub a: LaurentPoly,
    pub d: LaurentPoly,
    pub a_norm: C64,
    /// Zeros of a, multiplicity expanded.
    pub z: Vec<C64>,
    pub rules: Vec<RootRule>,
    /// Phase applied to one root so the root product meets the even-chain
    /// asymptotics; None when no adjustment was needed.
    pub pinning_shift: Option<C64>,
    /// Set when the pinning had to touch a root that a structural rule had
    /// already fixed.
    pub pinning_forced: bool,
    pub avg_a_residual: f64,
    pub avg_d_residual: f64,
    /// Smallest relative distance between a zero of a and any cycle shift
    /// (either sign, shift 1..p-1) of a zero of a.
    pub pair_separation: f64,
    /// Smallest relative distance between a zero of a and the zeros of the
    /// shifted products of d entering the transfer expansion.
    pub cross_separation: f64,
    /// Even chains: worst relative error of the two boundary coefficients
    /// against their pinned values.
    pub asymptotic_residual: f64,
}

struct RootCluster {
    z: C64,
    mult: usize,
    rule: RootRule,
}

/// Fold the +-Z zero pairs of an even Laurent polynomial to one
/// representative each: the member with positive real part (positive
/// imaginary part on the axis).
fn fold_sign_pairs(clusters: &[(C64, usize)]) -> Result<Vec<(C64, usize)>, SgError> {
    let mut used = vec![false; clusters.len()];
    let mut reps = Vec::new();
    for i in 0..clusters.len() {
        if used[i] {
            continue;
        }
        let (zi, mi) = clusters[i];
        let mut partner = None;
        for j in (i + 1)..clusters.len() {
            if used[j] {
                continue;
            }
            let (zj, mj) = clusters[j];
            if mj == mi && (zi + zj).norm() <= 1e-6 * zi.norm() {
                partner = Some(j);
                break;
            }
        }
        let j = partner.ok_or_else(|| {
            SgError::RootFinding("zeros of an even polynomial did not pair up under sign".into())
        })?;
        used[i] = true;
        used[j] = true;
        let rep = if zi.re > 1e-12 * zi.norm() || (zi.re.abs() <= 1e-12 * zi.norm() && zi.im > 0.0)
        {
            zi
        } else {
            clusters[j].0
        };
        reps.push((rep, mi));
    }
    Ok(reps)
}

/// p-th root of Z with argument taken in (-pi, pi] before division.
fn principal_root(z: C64, p: i64) -> C64 {
    C64::from_polar(z.norm().powf(1.0 / p as f64), z.arg() / p as f64)
}

/// For Z with Z^2 real, the p-th root of +-Z whose square over q is real,
/// picked by smallest nonnegative argument. The quadrant of Z and the branch
/// index are solved exactly in integers.
fn real_square_root(z: C64, params: &ModelParams) -> C64 {
    let p = params.p();
    let lp = params.lprime;
    let quad = (z.arg() / std::f64::consts::FRAC_PI_2).round() as i64;
    let radius = z.norm().powf(1.0 / p as f64);
    let mut best: Option<(f64, C64)> = None;
    for s in 0..2i64 {
        let t = quad + 2 * s;
        // need t + 4m + 2 l' = 0 mod p so that (z^2/q) lands on the real axis
        for m in 0..p {
            if (t + 4 * m + 2 * lp).rem_euclid(p) != 0 {
                continue;
            }
            let arg = (t as f64 * std::f64::consts::FRAC_PI_2
                + std::f64::consts::TAU * m as f64)
                / p as f64;
            let arg = arg.rem_euclid(std::f64::consts::TAU);
            if best.as_ref().map(|(a, _)| arg < *a).unwrap_or(true) {
                best = Some((arg, C64::from_polar(radius, arg)));
            }
            break;
        }
    }
    best.expect("4m is invertible mod an odd p").1
}

/// Build the separated coefficient pair from a full-chain average: a(lambda)
/// with the p-th powers of its zeros sitting on the zeros of the diagonal
/// average, d fixed by conjugate coefficients, root branches chosen by the
/// structural prescriptions, and the root product pinned to the boundary
/// asymptotics on even chains. Only defined for twisted weights; with
/// coinciding diagonal averages there is no split to make and the
/// construction refuses the input.
pub fn gauge_coefficients(
    params: &ModelParams,
    avg: &AverageMonodromy,
) -> Result<GaugeCoefficients, SgError> {
    let tol = Tol::default();
    let p = params.p();
    let n = params.n_sites as usize;
    if !params.is_twisted(tol) {
        return Err(SgError::BadParams(
            "separated coefficients need the two diagonal averages to differ; \
             untwisted weights make them identical"
                .into(),
        ));
    }
    let gap = a_neq_d_gap(avg);
    if gap < 1e-8 {
        return Err(SgError::Degenerate(format!(
            "diagonal averages nearly coincide at a zero of the off-diagonal \
             average (gap {gap:e}); resample"
        )));
    }
    let pa = avg.m.a.clone();
    let pd = avg.m.d.clone();
    let nbar = params.n_bar() as usize;

    let mut clusters: Vec<RootCluster> = Vec::new();
    if nbar > 0 {
        let reps = fold_sign_pairs(&roots(&pa)?.roots)?;
        if reps.iter().map(|&(_, m)| m).sum::<usize>() != nbar {
            return Err(SgError::RootFinding(format!(
                "expected {} zero pairs of the diagonal average, found {}",
                nbar,
                reps.len()
            )));
        }
        // structural rules first: real squares, then conjugate pairs
        let mut rules = vec![None; reps.len()];
        for (i, &(z, _)) in reps.iter().enumerate() {
            let z2 = z * z;
            if z2.im.abs() <= 1e-8 * z2.norm() {
                rules[i] = Some((RootRule::RealSquare, real_square_root(z, params)));
            }
        }
        for i in 0..reps.len() {
            if rules[i].is_some() {
                continue;
            }
            for j in (i + 1)..reps.len() {
                if rules[j].is_some() {
                    continue;
                }
                if (reps[i].0.conj() - reps[j].0).norm() <= 1e-8 * reps[i].0.norm() {
                    let zi = principal_root(reps[i].0, p);
                    rules[i] = Some((RootRule::Principal, zi));
                    // partner fixed by (z_i/q)^* so that the conjugated pair
                    // of coefficients stays clear of the shifted zero sets
                    rules[j] = Some((RootRule::ConjugatePair, (zi / params.q()).conj()));
                    break;
                }
            }
        }
        for (i, &(z, m)) in reps.iter().enumerate() {
            let (rule, zr) = match rules[i] {
                Some(pair) => pair,
                None => (RootRule::Principal, principal_root(z, p)),
            };
            let rule = if m > 1 && rule == RootRule::Principal {
                RootRule::Repeated
            } else {
                rule
            };
            clusters.push(RootCluster {
                z: zr,
                mult: m,
                rule,
            });
        }
    }

    // boundary pinning on even chains: the product of the zeros carries the
    // charge branch theta
    let mut pinning_shift = None;
    let mut pinning_forced = false;
    let even = n % 2 == 0;
    let kappa_prod: C64 = params.sites.iter().map(|s| s.kappa).product();
    let xi_prod: C64 = params.sites.iter().map(|s| s.xi).product();
    let a_norm;
    if even {
        let theta = params.theta_root();
        let target = xi_prod * theta * params.q_pow(-(n as i64));
        let current: C64 = clusters
            .iter()
            .map(|c| c.z.powu(c.mult as u32))
            .product();
        let rho = target / current;
        if (rho.norm() - 1.0).abs() > 1e-6 {
            return Err(SgError::Functional(format!(
                "root product off the unit relation by {:e}",
                (rho.norm() - 1.0).abs()
            )));
        }
        let rho_p = rho.powu(p as u32);
        if (rho_p - 1.0).norm().min((rho_p + 1.0).norm()) > 1e-6 {
            return Err(SgError::Functional(
                "root product phase is not a cycle multiple".into(),
            ));
        }
        if (rho - 1.0).norm() > 1e-9 {
            let sign_only = (rho + 1.0).norm() < 1e-9;
            let pick = |rule: RootRule| {
                clusters
                    .iter()
                    .rposition(|c| c.mult == 1 && c.rule == rule)
            };
            let idx = match pick(RootRule::Principal) {
                Some(i) => Some(i),
                None if sign_only => pick(RootRule::RealSquare),
                None => None,
            };
            let idx = match idx {
                Some(i) => i,
                None => {
                    pinning_forced = true;
                    clusters
                        .iter()
                        .rposition(|c| c.mult == 1)
                        .ok_or_else(|| {
                            SgError::Degenerate(
                                "every zero of the diagonal average is repeated".into(),
                            )
                        })?
                }
            };
            clusters[idx].z *= rho;
            pinning_shift = Some(rho);
        }
        a_norm = i_pow(n as u32) * kappa_prod * params.q_pow(n as i64);
    } else {
        let z_pow_prod: C64 = clusters
            .iter()
            .map(|c| c.z.powu((p as usize * c.mult) as u32))
            .product();
        a_norm = principal_root(pa.coeff(nbar as i64) * z_pow_prod, p);
    }

    let mut a = LaurentPoly::from_pairs(&[(0, a_norm)]);
    let mut z = Vec::new();
    let mut rules = Vec::new();
    for cl in &clusters {
        for _ in 0..cl.mult {
            a = a.mul(&LaurentPoly::vanishing_pair(cl.z));
            z.push(cl.z);
            rules.push(cl.rule);
        }
    }
    let d = a.conj_coeffs();

    let avg_a_residual = a.average(p)?.rel_distance(&pa);
    let avg_d_residual = d.average(p)?.rel_distance(&pd);
    if avg_a_residual.max(avg_d_residual) > 1e-8 {
        return Err(SgError::Functional(format!(
            "orbit products of the separated pair miss the diagonal averages \
             ({avg_a_residual:e}, {avg_d_residual:e})"
        )));
    }

    // genericity of the zero branches: the zero sets are closed under sign,
    // so both signs of every shift have to stay separated
    let mut pair_separation = f64::INFINITY;
    let mut pair_worst = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0i64);
    let mut cross_separation = f64::INFINITY;
    let mut cross_worst = (C64::new(0.0, 0.0), C64::new(0.0, 0.0), 0i64);
    for &zi in &z {
        for &zj in &z {
            let scale = zi.norm().max(zj.norm());
            for k in 1..p {
                let w = zj * unit_phase(-params.lprime * k, p);
                let gap = (zi - w).norm().min((zi + w).norm()) / scale;
                if gap < pair_separation {
                    pair_separation = gap;
                    pair_worst = (zi, zj, k);
                }
            }
            // zeros of d are the conjugates of the zeros of a
            for h in 0..p - 1 {
                let w = zj.conj() * unit_phase(params.lprime * h, p);
                let gap = (zi - w).norm().min((zi + w).norm()) / scale;
                if gap < cross_separation {
                    cross_separation = gap;
                    cross_worst = (zi, zj, h);
                }
            }
        }
    }
    if pair_separation < 1e-6 {
        let (zi, zj, k) = pair_worst;
        return Err(SgError::Degenerate(format!(
            "zero branches collide under the cycle: {zi} meets shift {k} of {zj} \
             (separation {pair_separation:e}); resample"
        )));
    }
    if cross_separation < 1e-6 {
        let (zi, zj, h) = cross_worst;
        return Err(SgError::Degenerate(format!(
            "zero branch {zi} collides with conjugate shift {h} of {zj} \
             (separation {cross_separation:e}); resample"
        )));
    }

    let mut asymptotic_residual = 0.0;
    if even {
        let theta = params.theta_root();
        let trail = i_pow(n as u32) * kappa_prod * xi_prod * theta;
        let lead = i_pow(n as u32) * kappa_prod / xi_prod * theta.inv() * params.q_pow(2 * n as i64);
        let et = (a.coeff(-(nbar as i64)) - trail).norm() / trail.norm();
        let el = (a.coeff(nbar as i64) - lead).norm() / lead.norm();
        asymptotic_residual = et.max(el);
        if asymptotic_residual > 1e-8 {
            return Err(SgError::Functional(format!(
                "boundary coefficients miss the pinned values by {asymptotic_residual:e}"
            )));
        }
    }

    Ok(GaugeCoefficients {
        a,
        d,
        a_norm,
        z,
        rules,
        pinning_shift,
        pinning_forced,
        avg_a_residual,
        avg_d_residual,
        pair_separation,
        cross_separation,
        asymptotic_residual,
    })
}

fn c64_json(z: C64) -> serde_json::Value {
    json!([z.re, z.im])
}

fn opt_c64_json(z: Option<C64>) -> serde_json::Value {
    match z {
        Some(z) => c64_json(z),
        None => serde_json::Value::Null,
    }
}

fn poly_json(f: &LaurentPoly) -> serde_json::Value {
    json!({
        "k_min": f.k_min(),
        "coeffs": f.coeffs().iter().map(|&c| c64_json(c)).collect::<Vec<_>>(),
    })
}

impl AverageMonodromy {
    pub fn to_json(&self) -> serde_json::Value {
        let list = |v: &[C64]| -> Vec<serde_json::Value> {
            v.iter().map(|&z| c64_json(z)).collect()
        };
        json!({
            "a": poly_json(&self.m.a),
            "b": poly_json(&self.m.b),
            "c": poly_json(&self.m.c),
            "d": poly_json(&self.m.d),
            "zeros": list(&self.z_list),
            "zero_margin": self.zero_margin,
            "z_extra": opt_c64_json(self.z_extra),
            "z_raise": opt_c64_json(self.z_raise),
            "z_lower": opt_c64_json(self.z_lower),
            "a_at_zeros": list(&self.a_at_zeros),
            "d_at_zeros": list(&self.d_at_zeros),
            "k_pow": list(&self.k_pow),
            "x_pow": list(&self.x_pow),
            "u_pow": list(&self.u_pow),
            "v_pow": list(&self.v_pow),
        })
    }
}

impl GaugeCoefficients {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "a": poly_json(&self.a),
            "d": poly_json(&self.d),
            "a_norm": c64_json(self.a_norm),
            "z": self.z.iter().map(|&z| c64_json(z)).collect::<Vec<_>>(),
            "rules": self.rules.iter().map(|r| r.name()).collect::<Vec<_>>(),
            "pinning_shift": opt_c64_json(self.pinning_shift),
            "pinning_forced": self.pinning_forced,
            "avg_a_residual": self.avg_a_residual,
            "avg_d_residual": self.avg_d_residual,
            "pair_separation": self.pair_separation,
            "cross_separation": self.cross_separation,
            "asymptotic_residual": self.asymptotic_residual,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laurent::Parity;
    use crate::model::build_monodromy;
    use crate::params::{sample_twisted, sample_untwisted, SiteParams};

    fn site(kappa: C64, xi: C64, u: C64, v: C64) -> SiteParams {
        SiteParams { kappa, xi, u, v }
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn unit_parameters_give_the_textbook_site_average() {
        let one = re(1.0);
        let params = ModelParams {
            l: 1,
            lprime: 1,
            n_sites: 1,
            sites: vec![site(one, one, one, one)],
            seed: 0,
        };
        let m = average_lax(&params, 0);
        let i = C64::new(0.0, 1.0);
        assert!((m.a.coeff(0) - 2.0).norm() < 1e-15);
        assert!((m.d.coeff(0) - 2.0).norm() < 1e-15);
        for f in [&m.b, &m.c] {
            assert_eq!(f.window(), (-1, 1));
            assert!((f.coeff(1) - i).norm() < 1e-15);
            assert!((f.coeff(-1) + i).norm() < 1e-15);
        }
        // flipping the sign of the coupling is conjugation by the diagonal
        // sign matrix: off-diagonals flip, diagonals stay
        let params2 = ModelParams {
            sites: vec![site(-one, one, one, one)],
            ..params
        };
        let m2 = average_lax(&params2, 0);
        assert!(m2.a.rel_distance(&m.a) < 1e-15);
        assert!(m2.d.rel_distance(&m.d) < 1e-15);
        assert!(m2.b.add(&m.b).max_coeff_norm() < 1e-15);
        assert!(m2.c.add(&m.c).max_coeff_norm() < 1e-15);
    }

    #[test]
    fn special_couplings_annihilate_diagonals() {
        // kappa^p on either side of the weight kills one diagonal entry; both
        // go only when the weight square is trivial too
        let one = re(1.0);
        let i = C64::new(0.0, 1.0);
        let v = C64::from_polar(1.0, 0.83);
        let mk = |kappa: C64, v: C64| {
            let params = ModelParams {
                l: 1,
                lprime: 1,
                n_sites: 1,
                sites: vec![site(kappa, re(1.1), C64::from_polar(1.0, 0.37), v)],
                seed: 0,
            };
            average_lax(&params, 0)
        };
        let lower = mk(i * v, v);
        assert!(lower.d.max_coeff_norm() < 1e-12);
        assert!(lower.a.max_coeff_norm() > 1e-2);
        let upper = mk(i / v, v);
        assert!(upper.a.max_coeff_norm() < 1e-12);
        assert!(upper.d.max_coeff_norm() > 1e-2);
        let both = mk(i, one);
        assert!(both.a.max_coeff_norm() < 1e-12);
        assert!(both.d.max_coeff_norm() < 1e-12);
    }

    #[test]
    fn entries_have_unit_degree_in_each_site_parameter() {
        // t * (entry / product of couplings) is an exact quadratic in every
        // single site power, so its third difference over four equally spaced
        // points vanishes
        let p = 3i64;
        let base: Vec<[C64; 4]> = vec![
            [
                C64::new(1.3, 0.2),
                C64::new(0.8, -0.1),
                C64::new(0.6, 0.5),
                C64::new(1.1, -0.3),
            ],
            [
                C64::new(0.9, -0.4),
                C64::new(1.2, 0.3),
                C64::new(-0.2, 0.9),
                C64::new(0.7, 0.6),
            ],
        ];
        let lam = C64::new(1.21, 0.37);
        let h = 0.17;
        let build = |vals: &[[C64; 4]]| {
            average_lax_powers(p, vals[1][0], vals[1][1], vals[1][2], vals[1][3]).mul(
                &average_lax_powers(p, vals[0][0], vals[0][1], vals[0][2], vals[0][3]),
            )
        };
        for s in 0..2 {
            for slot in 0..4 {
                let mut g = [[C64::new(0.0, 0.0); 4]; 4];
                for j in 0..4 {
                    let mut vals = base.clone();
                    vals[s][slot] += re(h * j as f64);
                    let m = build(&vals);
                    let k_prod = vals[0][0] * vals[1][0];
                    let t = vals[s][slot];
                    for (e, f) in [&m.a, &m.b, &m.c, &m.d].into_iter().enumerate() {
                        g[e][j] = t * f.eval(lam) / k_prod;
                    }
                }
                for (e, ge) in g.iter().enumerate() {
                    let scale = ge.iter().map(|w| w.norm()).fold(1e-30, f64::max);
                    let third = ge[0] - 3.0 * ge[1] + 3.0 * ge[2] - ge[3];
                    assert!(
                        third.norm() < 1e-10 * scale,
                        "site {s} slot {slot} entry {e}: {:e}",
                        third.norm() / scale
                    );
                }
            }
        }
    }

    #[test]
    fn single_site_average_matches_closed_form() {
        let params = sample_twisted(1, 1, 1, 11);
        let m = build_monodromy(&params).unwrap();
        let (ops, off) = entry_averages(&params, &m).unwrap();
        assert!(off < 1e-13);
        let lax = average_lax(&params, 0);
        assert!(ops.a.rel_distance(&lax.a) < 1e-13);
        assert!(ops.b.rel_distance(&lax.b) < 1e-13);
        assert!(ops.c.rel_distance(&lax.c) < 1e-13);
        assert!(ops.d.rel_distance(&lax.d) < 1e-13);
    }

    #[test]
    fn chain_averages_collapse_to_the_matrix_product() {
        let params = sample_twisted(1, 1, 2, 23);
        let m = build_monodromy(&params).unwrap();
        let (ops, off) = entry_averages(&params, &m).unwrap();
        assert!(off < 1e-12);
        let closed = average_matrix_range(&params, 0, 2);
        assert!(ops.a.rel_distance(&closed.a) < 1e-12);
        assert!(ops.b.rel_distance(&closed.b) < 1e-12);
        assert!(ops.c.rel_distance(&closed.c) < 1e-12);
        assert!(ops.d.rel_distance(&closed.d) < 1e-12);
        // degree bookkeeping: diagonals fill the even window, off-diagonals
        // stop one short on an even chain
        assert_eq!(closed.a.window(), (-2, 2));
        assert_eq!(closed.a.parity(), Parity::Even);
        assert_eq!(closed.b.window(), (-1, 1));
        assert_eq!(closed.b.parity(), Parity::Odd);
    }

    #[test]
    fn averaged_determinant_is_the_averaged_quantum_determinant() {
        for (n, seed) in [(1i64, 29u64), (2, 31), (3, 33)] {
            let params = sample_twisted(1, 1, n, seed);
            let avg = average_matrix_range(&params, 0, n as usize);
            let qd = average_quantum_determinant(&params);
            assert!(
                avg.det().rel_distance(&qd) < 1e-12,
                "site count {n}: determinant mismatch"
            );
        }
    }

    #[test]
    fn conjugation_carries_across_the_average() {
        let params = sample_twisted(1, 1, 2, 35);
        let avg = average_matrix_range(&params, 0, 2);
        assert!(avg.a.conj_coeffs().rel_distance(&avg.d) < 1e-12);
        let eps = C64::new(params.epsilon(), 0.0);
        let c_eps = avg.c.subst_scaled(eps);
        assert!(avg.b.conj_coeffs().rel_distance(&c_eps) < 1e-12);
    }

    #[test]
    fn off_diagonal_factorizes_when_one_site_kills_a_diagonal() {
        // site one has kappa^p matching its weight, so its lower diagonal
        // average dies and the chain off-diagonal collapses to the single
        // site factor: one zero pair on the site anchor over its weight, and
        // the even-chain scale carried entirely by the surviving diagonal of
        // site two
        let v1 = C64::from_polar(1.0, 0.53);
        let i = C64::new(0.0, 1.0);
        let params = ModelParams {
            l: 1,
            lprime: 1,
            n_sites: 2,
            sites: vec![
                site(i * v1, re(1.17), C64::from_polar(1.0, 0.31), v1),
                site(re(0.85), re(1.31), C64::from_polar(1.0, 1.1), C64::from_polar(1.0, -0.4)),
            ],
            seed: 0,
        };
        assert!(average_lax(&params, 0).d.max_coeff_norm() < 1e-12);
        let avg = average_monodromy(&params).unwrap();
        assert_eq!(avg.z_list.len(), 1);
        let z = avg.z_list[0];
        let want = avg.x_pow[0] / avg.v_pow[0];
        // zero representatives carry an undetermined sign, compare squares
        assert!((z * z - want * want).norm() < 1e-10 * want.norm().powi(2));
        let ip = i_pow(3);
        let (k2, v2, u2) = (avg.k_pow[1], avg.v_pow[1], avg.u_pow[1]);
        let want_extra = ip * u2 * (k2 * k2 * v2 + v2.inv()) / k2;
        let got = avg.z_extra.unwrap();
        assert!((got * got - want_extra * want_extra).norm() < 1e-9 * want_extra.norm().powi(2));
    }

    #[test]
    fn anti_diagonal_chain_puts_zeros_on_the_anchors() {
        // every site purely off-diagonal: the chain off-diagonal is the
        // product of the anchor pairs with unit normalization, so the zero
        // set is exactly the p-th powers of the anchors and the charge
        // relation holds with the true signs
        let i = C64::new(0.0, 1.0);
        let one = re(1.0);
        let params = ModelParams {
            l: 1,
            lprime: 1,
            n_sites: 3,
            sites: vec![
                site(i, re(1.1), C64::from_polar(1.0, 0.4), one),
                site(i, re(0.8), C64::from_polar(1.0, -0.9), one),
                site(i, re(1.27), C64::from_polar(1.0, 1.7), one),
            ],
            seed: 0,
        };
        let avg = average_monodromy(&params).unwrap();
        assert_eq!(avg.z_list.len(), 3);
        for &x in &avg.x_pow {
            let close = avg.z_list.iter().any(|&z| (z - x).norm() < 1e-10 * x.norm());
            assert!(close, "anchor power {x} missing from the zero set");
        }
        let r: C64 = avg.x_pow.iter().product::<C64>() / avg.z_list.iter().product::<C64>();
        let th = params.theta_average();
        assert!((r - th).norm() < 1e-10);
        // both diagonal averages vanish identically here
        assert!(avg.m.a.max_coeff_norm() < 1e-12);
        assert!(avg.m.d.max_coeff_norm() < 1e-12);
    }

    #[test]
    fn boundary_coefficients_carry_the_charge() {
        // the two boundary coefficients of each diagonal average are fixed by
        // the couplings, the anchors and the charge average alone
        for (n, seed) in [(2i64, 31u64), (4, 61)] {
            let params = sample_twisted(1, 1, n, seed);
            let avg = average_monodromy(&params).unwrap();
            let nbar = params.n_bar();
            let th = params.theta_average();
            let xq: C64 = avg.x_pow.iter().product();
            let kq: C64 = avg.k_pow.iter().product();
            let ipn = i_pow(((params.p() * n) % 4) as u32);
            let checks = [
                (avg.m.a.coeff(nbar), kq / (ipn * th * xq)),
                (avg.m.a.coeff(-nbar), kq * th * xq / ipn),
                (avg.m.d.coeff(nbar), kq * th / (ipn * xq)),
                (avg.m.d.coeff(-nbar), kq * xq / (th * ipn)),
            ];
            for (i, (got, want)) in checks.into_iter().enumerate() {
                assert!(
                    (got - want).norm() < 1e-10 * want.norm(),
                    "n={n} check {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn odd_chains_tie_zero_products_to_the_charge() {
        let params = sample_twisted(1, 1, 3, 33);
        let avg = average_monodromy(&params).unwrap();
        let th = params.theta_average();
        let r: C64 = avg.x_pow.iter().product::<C64>() / avg.z_list.iter().product::<C64>();
        // squares again: each zero representative has a free sign
        assert!((r * r - th * th).norm() < 1e-9 * th.norm().powi(2));
    }

    #[test]
    fn lowering_weight_respects_every_cut() {
        let p2 = sample_twisted(1, 1, 2, 31);
        assert!(shift_weight_split_residual(&p2, 1).unwrap().unwrap() < 1e-10);
        let p4 = sample_twisted(1, 1, 4, 61);
        for m in 1..4 {
            let r = shift_weight_split_residual(&p4, m).unwrap().unwrap();
            assert!(r < 1e-9, "cut {m}: {r}");
        }
        let p3 = sample_twisted(1, 1, 3, 33);
        assert!(shift_weight_split_residual(&p3, 1).unwrap().is_none());
    }

    #[test]
    fn recursion_over_every_cut() {
        let params = sample_twisted(1, 1, 3, 37);
        for m in 1..3 {
            let rep = recursion_residual(&params, m).unwrap();
            assert!(rep.entry_residual < 1e-11, "cut {m}: {}", rep.entry_residual);
            assert!(rep.value_residual < 1e-9, "cut {m}: {}", rep.value_residual);
            assert!(rep.factor_residual < 1e-10, "cut {m}: {}", rep.factor_residual);
            assert!(rep.norm_residual < 1e-10, "cut {m}: {}", rep.norm_residual);
            assert!(rep.shift_residual.is_none());
            assert!(rep.det_residual < 1e-12, "cut {m}: {}", rep.det_residual);
            assert!(rep.max_off_scalar < 1e-11, "cut {m}: {}", rep.max_off_scalar);
        }
        let params = sample_twisted(1, 1, 2, 23);
        let rep = recursion_residual(&params, 1).unwrap();
        assert!(rep.entry_residual < 1e-11, "{}", rep.entry_residual);
        assert!(rep.factor_residual < 1e-10, "{}", rep.factor_residual);
        assert!(rep.shift_residual.unwrap() < 1e-9, "{:?}", rep.shift_residual);
    }

    #[test]
    fn gap_is_carried_by_a_single_twisted_weight() {
        // with all weights trivial except one u, the diagonal gap at every
        // zero is one explicit multiple of the remaining chain average
        let one = re(1.0);
        let u1 = C64::from_polar(1.0, 0.7);
        let params = ModelParams {
            l: 1,
            lprime: 1,
            n_sites: 3,
            sites: vec![
                site(re(1.1), re(1.2), u1, one),
                site(re(0.9), re(0.8), one, one),
                site(re(1.3), re(1.05), one, one),
            ],
            seed: 0,
        };
        let avg = average_monodromy(&params).unwrap();
        let sub = average_matrix_range(&params, 1, 3);
        let k1 = avg.k_pow[0];
        let w = avg.u_pow[0];
        let c = (one + k1 * k1) * (w - w.inv());
        for (i, &z) in avg.z_list.iter().enumerate() {
            let want = c * sub.a.eval(z);
            let got = avg.a_at_zeros[i] - avg.d_at_zeros[i];
            let scale = want.norm().max(got.norm());
            assert!((got - want).norm() < 1e-9 * scale, "zero {i}");
        }
        assert!(a_neq_d_gap(&avg) > 1e-6);
    }

    #[test]
    fn diagonal_gap_separates_weight_classes() {
        let twisted = sample_twisted(1, 1, 2, 53);
        let avg = average_monodromy(&twisted).unwrap();
        assert!(a_neq_d_gap(&avg) > 1e-6);
        let untwisted = sample_untwisted(1, 1, 2, 53);
        let avg = average_monodromy(&untwisted).unwrap();
        assert!(a_neq_d_gap(&avg) < 1e-12);
    }

    #[test]
    fn gauge_pair_reproduces_the_averages() {
        for (n, seed) in [(1i64, 41u64), (2, 43), (3, 45)] {
            let params = sample_twisted(1, 1, n, seed);
            let avg = average_monodromy(&params).unwrap();
            let g = gauge_coefficients(&params, &avg).unwrap();
            assert_eq!(g.z.len(), params.n_bar() as usize);
            assert!(g.avg_a_residual < 1e-9, "n={n}: {}", g.avg_a_residual);
            assert!(g.avg_d_residual < 1e-9, "n={n}: {}", g.avg_d_residual);
            assert!(g.pair_separation > 1e-3);
            assert!(g.cross_separation > 1e-3);
            assert!(!g.pinning_forced);
            if n % 2 == 0 {
                assert!(g.asymptotic_residual < 1e-9, "{}", g.asymptotic_residual);
            }
        }
    }

    #[test]
    fn untwisted_weights_are_refused_a_gauge_pair() {
        let params = sample_untwisted(1, 1, 2, 47);
        let avg = average_monodromy(&params).unwrap();
        // the two diagonal averages coincide and are real, so there is no
        // split to make
        assert!(avg.m.a.rel_distance(&avg.m.d) < 1e-12);
        assert!(avg.m.a.is_real(Tol::default()));
        match gauge_coefficients(&params, &avg) {
            Err(SgError::BadParams(_)) => {}
            Err(e) => panic!("wrong refusal: {e}"),
            Ok(_) => panic!("untwisted weights must not produce a gauge pair"),
        }
    }

    #[test]
    fn averages_serialize_with_split_complex_parts() {
        let params = sample_twisted(1, 1, 2, 23);
        let avg = average_monodromy(&params).unwrap();
        let v = avg.to_json();
        assert_eq!(v["zeros"].as_array().unwrap().len(), 1);
        assert_eq!(v["z_extra"].as_array().unwrap().len(), 2);
        let g = gauge_coefficients(&params, &avg).unwrap();
        let gv = g.to_json();
        assert_eq!(gv["z"].as_array().unwrap().len(), 2);
        assert!(gv["a"]["coeffs"]
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c.as_array().unwrap().len() == 2));
        let text = serde_json::to_string(&gv).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back, gv);
    }
}
