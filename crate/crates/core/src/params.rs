//! Representation parameters and the root-of-unity coupling.
//!
//! The coupling q = exp(-i pi p'/p) with p = 2l+1, p' = 2l' is kept as an
//! exact rational fraction of the circle; every power of q is reduced mod p
//! before any trigonometry happens, so long products of q-phases do not
//! accumulate error.

use crate::laurent::unit_phase;
use crate::{C64, SgError, Tol};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

mod c64_pair {
    use crate::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(c: &C64, s: S) -> Result<S::Ok, S::Error> {
        [c.re, c.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        Ok(C64::new(re, im))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    #[serde(with = "c64_pair")]
    pub kappa: C64,
    #[serde(with = "c64_pair")]
    pub xi: C64,
    #[serde(with = "c64_pair")]
    pub u: C64,
    #[serde(with = "c64_pair")]
    pub v: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub l: i64,
    pub lprime: i64,
    #[serde(rename = "N")]
    pub n_sites: i64,
    pub sites: Vec<SiteParams>,
    #[serde(default)]
    pub seed: u64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl ModelParams {
    pub fn p(&self) -> i64 {
        2 * self.l + 1
    }

    pub fn pprime(&self) -> i64 {
        2 * self.lprime
    }

    /// q = exp(-i pi p'/p) = exp(-2 pi i l'/p).
    pub fn q(&self) -> C64 {
        self.q_pow(1)
    }

    /// q^k with the exponent reduced mod p exactly.
    pub fn q_pow(&self, k: i64) -> C64 {
        unit_phase(-self.lprime * k, self.p())
    }

    /// The square root of q used throughout: q^{(p+1)/2}, which squares to q
    /// because q^p = 1. This is the branch on which the p-th powers of the
    /// quantum determinant zeros land on the averaged determinant zeros.
    pub fn q_half(&self) -> C64 {
        self.q_pow((self.p() + 1) / 2)
    }

    /// q^{k/2} on the same branch.
    pub fn q_half_pow(&self, k: i64) -> C64 {
        self.q_pow(((self.p() + 1) / 2) * k)
    }

    pub fn n(&self) -> i64 {
        self.n_sites
    }

    /// 1 for an even chain, 0 for odd.
    pub fn e_n(&self) -> i64 {
        if self.n_sites % 2 == 0 {
            1
        } else {
            0
        }
    }

    /// N + e_N - 1, the degree of the even monodromy entries.
    pub fn n_bar(&self) -> i64 {
        self.n_sites + self.e_n() - 1
    }

    /// N - e_N, the degree of the odd monodromy entries and the number of
    /// separated variables living on q-lattices.
    pub fn n_sep(&self) -> i64 {
        self.n_sites - self.e_n()
    }

    pub fn dim(&self) -> usize {
        (self.p() as usize).pow(self.n_sites as u32)
    }

    /// Sign relating B and C under conjugation; -1 when all kappa xi are real.
    pub fn epsilon(&self) -> f64 {
        let s = &self.sites[0];
        let w = s.kappa * s.xi;
        let e = -(w / w.conj());
        if e.re > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Zeros of the quantum determinant for site n (0-based): +-i k^{+-1} q^{1/2} xi.
    pub fn mu(&self, n: usize, plus: bool) -> C64 {
        let s = &self.sites[n];
        let k = if plus { s.kappa } else { s.kappa.inv() };
        let sgn = if plus { 1.0 } else { -1.0 };
        C64::new(0.0, sgn) * k * self.q_half() * s.xi
    }

    /// Average of the grading charge, Prod_a V_a^{(-1)^{1+a}} (even chains).
    pub fn theta_average(&self) -> C64 {
        let p = self.p() as i32;
        let mut t = C64::new(1.0, 0.0);
        for (i, s) in self.sites.iter().enumerate() {
            let vp = s.v.powi(p);
            // site numbering starts at 1, so odd sites carry +1
            if (i + 1) % 2 == 1 {
                t *= vp;
            } else {
                t /= vp;
            }
        }
        t
    }

    /// The p-th root of the charge average with the smallest nonnegative
    /// argument. Fixing this branch once keeps every later grading-sensitive
    /// quantity deterministic.
    pub fn theta_root(&self) -> C64 {
        let avg = self.theta_average();
        let mut arg = avg.arg();
        if arg < 0.0 {
            arg += std::f64::consts::TAU;
        }
        let p = self.p() as f64;
        C64::from_polar(avg.norm().powf(1.0 / p), arg / p)
    }

    pub fn is_twisted(&self, tol: Tol) -> bool {
        let tp = 2 * self.p() as i32;
        self.sites.iter().any(|s| {
            (s.u.powi(tp) - 1.0).norm() > tol.threshold(1.0)
                || (s.v.powi(tp) - 1.0).norm() > tol.threshold(1.0)
        })
    }

    pub fn validate(&self, tol: Tol) -> Result<(), SgError> {
        if self.l < 1 || self.lprime < 1 {
            return Err(SgError::BadParams(format!(
                "l and lprime must be positive, got l = {}, lprime = {}",
                self.l, self.lprime
            )));
        }
        if gcd(self.lprime, self.p()) != 1 {
            return Err(SgError::CouplingNotPrimitive {
                pprime: self.pprime(),
                p: self.p(),
            });
        }
        if self.n_sites < 1 {
            return Err(SgError::BadParams("chain length must be at least 1".into()));
        }
        if self.sites.len() != self.n_sites as usize {
            return Err(SgError::BadParams(format!(
                "N = {} but {} site parameter blocks given",
                self.n_sites,
                self.sites.len()
            )));
        }
        let mut eps: Option<f64> = None;
        for (i, s) in self.sites.iter().enumerate() {
            if s.kappa.norm() == 0.0 || s.xi.norm() == 0.0 {
                return Err(SgError::BadParams(format!("site {}: kappa, xi must be nonzero", i + 1)));
            }
            let k2 = s.kappa * s.kappa;
            if k2.im.abs() > tol.threshold(k2.norm()) {
                return Err(SgError::BadParams(format!(
                    "site {}: kappa^2 = {} is not real",
                    i + 1,
                    k2
                )));
            }
            let x2 = s.xi * s.xi;
            if x2.im.abs() > tol.threshold(x2.norm()) {
                return Err(SgError::BadParams(format!(
                    "site {}: xi^2 = {} is not real",
                    i + 1,
                    x2
                )));
            }
            if (s.u.norm() - 1.0).abs() > tol.threshold(1.0) {
                return Err(SgError::BadParams(format!("site {}: |u| != 1", i + 1)));
            }
            if (s.v.norm() - 1.0).abs() > tol.threshold(1.0) {
                return Err(SgError::BadParams(format!("site {}: |v| != 1", i + 1)));
            }
            let w = s.kappa * s.xi;
            let e = -(w / w.conj());
            if e.im.abs() > tol.threshold(1.0) || (e.re.abs() - 1.0).abs() > tol.threshold(1.0) {
                return Err(SgError::BadParams(format!(
                    "site {}: kappa xi is neither real nor imaginary",
                    i + 1
                )));
            }
            match eps {
                None => eps = Some(e.re.signum()),
                Some(prev) => {
                    if prev != e.re.signum() {
                        return Err(SgError::BadParams(
                            "conjugation sign differs between sites".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, SgError> {
        let p: ModelParams =
            serde_json::from_str(s).map_err(|e| SgError::ParamsFile(e.to_string()))?;
        p.validate(Tol::default())?;
        Ok(p)
    }
}

fn phase(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.0..std::f64::consts::TAU)
}

/// Positive reals for kappa, xi (uniform conjugation sign -1), generic unit
/// phases for u, v with the 2p-th power kept away from 1, all pairwise
/// margins enforced by resampling. Deterministic in the seed.
pub fn sample_twisted(l: i64, lprime: i64, n: i64, seed: u64) -> ModelParams {
    let p = 2 * l + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sites = Vec::with_capacity(n as usize);
    let mut xps: Vec<C64> = Vec::new();
    for _ in 0..n {
        let kappa = loop {
            let k: f64 = rng.random_range(0.65..1.45);
            if (k * k - 1.0).abs() > 0.05 {
                break C64::new(k, 0.0);
            }
        };
        let xi = loop {
            let x: f64 = rng.random_range(0.7..1.4);
            let xp = C64::new(x, 0.0).powi(p as i32);
            if xps.iter().all(|&y| (y - xp).norm() > 1e-2 * xp.norm()) {
                xps.push(xp);
                break C64::new(x, 0.0);
            }
        };
        let u = twisted_phase(&mut rng, p);
        let v = twisted_phase(&mut rng, p);
        sites.push(SiteParams { kappa, xi, u, v });
    }
    ModelParams {
        l,
        lprime,
        n_sites: n,
        sites,
        seed,
    }
}

fn twisted_phase(rng: &mut ChaCha8Rng, p: i64) -> C64 {
    loop {
        let ph = phase(rng);
        let c = C64::new(ph.cos(), ph.sin());
        if (c.powi(2 * p as i32) - 1.0).norm() > 0.3 {
            return c;
        }
    }
}

/// Same kappa, xi statistics but u = v = 1 on every site.
pub fn sample_untwisted(l: i64, lprime: i64, n: i64, seed: u64) -> ModelParams {
    let mut m = sample_twisted(l, lprime, n, seed);
    for s in &mut m.sites {
        s.u = C64::new(1.0, 0.0);
        s.v = C64::new(1.0, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_powers_are_exact_mod_p() {
        let m = sample_twisted(1, 1, 1, 7);
        assert_eq!(m.q_pow(5), m.q_pow(5 + 3));
        assert_eq!(m.q_pow(-1), m.q_pow(2));
        assert!((m.q_pow(3) - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn half_power_squares_to_q() {
        for (l, lp) in [(1, 1), (2, 1), (1, 2), (3, 2)] {
            let m = sample_twisted(l, lp, 1, 3);
            let h = m.q_half();
            assert!((h * h - m.q()).norm() < 1e-14);
        }
    }

    #[test]
    fn shared_factor_is_rejected() {
        let mut m = sample_twisted(1, 1, 1, 1);
        m.lprime = 3; // gcd(3, 3) = 3
        assert!(matches!(
            m.validate(Tol::default()),
            Err(SgError::CouplingNotPrimitive { .. })
        ));
    }

    #[test]
    fn samplers_are_deterministic_and_valid() {
        let a = sample_twisted(1, 1, 2, 42);
        let b = sample_twisted(1, 1, 2, 42);
        assert_eq!(a, b);
        a.validate(Tol::default()).unwrap();
        assert!(a.is_twisted(Tol::default()));
        assert_eq!(a.epsilon(), -1.0);
        let u = sample_untwisted(1, 1, 2, 42);
        u.validate(Tol::default()).unwrap();
        assert!(!u.is_twisted(Tol::default()));
    }

    #[test]
    fn json_round_trip() {
        let a = sample_twisted(2, 1, 3, 9);
        let s = a.to_json();
        let b = ModelParams::from_json(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degree_bookkeeping() {
        let modd = sample_twisted(1, 1, 3, 5);
        assert_eq!(modd.e_n(), 0);
        assert_eq!(modd.n_bar(), 2);
        assert_eq!(modd.n_sep(), 3);
        let mev = sample_twisted(1, 1, 2, 5);
        assert_eq!(mev.e_n(), 1);
        assert_eq!(mev.n_bar(), 2);
        assert_eq!(mev.n_sep(), 1);
    }
}
