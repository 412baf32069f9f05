use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Exponents entering the sup-norm bounds, derived from `a`, the Sobolev
/// exponent `r` and the free parameters `r1`, `r2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentPack {
    pub a: f64,
    pub r: f64,
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// Conjugate exponents `r'`, `r1'`, `r2'`.
    pub r_conj: f64,
    pub r1_conj: f64,
    pub r2_conj: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub kappa4: f64,
    pub kappa5: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub delta1: f64,
    pub delta2: f64,
}

fn conj(p: f64) -> f64 {
    p / (p - 1.0)
}

impl ExponentPack {
    /// `r0 = 2 + (2 - a)(1 - 2/r)`.
    pub fn r0_for(a: f64, r: f64) -> f64 {
        2.0 + (2.0 - a) * (1.0 - 2.0 / r)
    }

    /// Midpoint of `(1, r0/2)`.
    pub fn default_r1(r0: f64) -> f64 {
        0.5 * (1.0 + 0.5 * r0)
    }

    /// Twice the lower limit `2(r-1)/(r-2)`.
    pub fn default_r2(r: f64) -> f64 {
        4.0 * (r - 1.0) / (r - 2.0)
    }

    pub fn with_defaults(a: f64, r: f64) -> Result<Self> {
        let r0 = Self::r0_for(a, r);
        Self::new(a, r, Self::default_r1(r0), Self::default_r2(r))
    }

    pub fn new(a: f64, r: f64, r1: f64, r2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::validation(
                "exponents.a",
                format!("need 0 <= a < 1, got {a}"),
            ));
        }
        if !(r > 2.0 && r.is_finite()) {
            return Err(Error::validation(
                "exponents.r",
                format!("need r > 2, got {r}"),
            ));
        }
        let r0 = Self::r0_for(a, r);
        if !(r1 > 1.0 && r1 < 0.5 * r0) {
            return Err(Error::validation(
                "exponents.r1",
                format!("need 1 < r1 < r0/2 = {}, got {r1}", 0.5 * r0),
            ));
        }
        let r2_min = 2.0 * (r - 1.0) / (r - 2.0);
        if !(r2 > r2_min && r2.is_finite()) {
            return Err(Error::validation(
                "exponents.r2",
                format!("need r2 > {r2_min}, got {r2}"),
            ));
        }
        let q = 2.0 - a;
        let kappa1 = r0 / (r0 - 2.0);
        let kappa2 = r0 * (r1 - 1.0) / (2.0 * r0 + (r0 - 2.0) * r1 * q);
        let nu1 = (r0 - 2.0 * r1) / (r0 + (r0 - 2.0) * r1);
        let nu2 = 2.0 * (r0 - 2.0 + a) / (q * (r0 - 2.0));
        let r_conj = conj(r);
        let r2_conj = conj(r2);
        let delta1 = 1.0 - 0.5 * r_conj;
        let delta2 = 1.0 / r2_conj - 0.5 * r_conj;
        Ok(Self {
            a,
            r,
            r0,
            r1,
            r2,
            r_conj,
            r1_conj: conj(r1),
            r2_conj,
            kappa1,
            kappa2,
            kappa3: kappa1 / q - 0.5 * nu1,
            kappa4: 0.5 + a * r / (2.0 * q * (r - 2.0)),
            kappa5: a * r_conj / (4.0 * q) / delta1,
            nu1,
            nu2,
            delta1,
            delta2,
        })
    }

    /// Random admissible pack: `a` in (0, 1), `r - 2` log-uniform over
    /// four decades, `r1` and `r2` uniform inside their ranges.
    pub fn random(rng: &mut impl Rng) -> Self {
        let a = rng.gen_range(0.01..0.99);
        let r = 2.0 + 10f64.powf(rng.gen_range(-2.0..2.0));
        let r0 = Self::r0_for(a, r);
        let r1 = 1.0 + (0.5 * r0 - 1.0) * rng.gen_range(0.01..0.99);
        let r2 = 2.0 * (r - 1.0) / (r - 2.0) * rng.gen_range(1.01..3.0);
        Self::new(a, r, r1, r2).expect("sampled inside the admissible ranges")
    }

    /// Excess exponents `e1..e4` of the four recurrence terms.
    pub fn excess(&self) -> [f64; 4] {
        let (a, r0, r1) = (self.a, self.r0, self.r1);
        [
            1.0 - 2.0 / r0,
            1.0 / r1 - 2.0 / r0,
            2.0 / (2.0 - a) - 2.0 / r0,
            2.0 / (r1 * (2.0 - a)) - 2.0 / r0,
        ]
    }

    /// Powers of the space-time norm in the four lower bounds for the
    /// truncation level; the largest is `nu2` and the smallest `nu1`.
    pub fn nu_candidates(&self) -> [f64; 4] {
        let [e1, e2, e3, e4] = self.excess();
        let (a, r0, r1) = (self.a, self.r0, self.r1);
        [
            e1 * r0 / (r0 - 2.0),
            e2 * r1 * r0 / (r0 + (r0 - 2.0) * r1),
            e3 * r0 / (r0 - 2.0),
            e4 * r1 * r0 * (2.0 - a) / (2.0 * r0 + (r0 - 2.0) * r1 * (2.0 - a)),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn spot_values() {
        let p = ExponentPack::new(0.5, 4.0, 1.1, 4.0).unwrap();
        assert!((p.r0 - 2.75).abs() < 1e-12);
        assert!((p.kappa1 - 11.0 / 3.0).abs() < 1e-12);
        assert!((p.nu2 - 20.0 / 9.0).abs() < 1e-12);
        assert!((p.delta1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((p.delta2 - 1.0 / 12.0).abs() < 1e-12);
        assert!((p.kappa4 - 5.0 / 6.0).abs() < 1e-12);
        assert!((p.kappa5 - (p.kappa4 - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(ExponentPack::new(0.5, 2.0, 1.1, 4.0).is_err());
        assert!(ExponentPack::new(0.5, 4.0, 1.5, 4.0).is_err());
        assert!(ExponentPack::new(0.5, 4.0, 1.1, 3.0).is_err());
        assert!(ExponentPack::new(1.0, 4.0, 1.1, 4.0).is_err());
        let e = ExponentPack::new(0.5, 4.0, 1.1, 3.0).unwrap_err();
        assert!(e.to_string().contains("exponents.r2"));
    }

    #[test]
    fn defaults_are_admissible() {
        let p = ExponentPack::with_defaults(0.5, 4.0).unwrap();
        assert!((p.r1 - 0.5 * (1.0 + 1.375)).abs() < 1e-15);
        assert!((p.r2 - 6.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn orderings_hold(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = ExponentPack::random(&mut rng);
            prop_assert!(p.kappa3 > 0.0);
            prop_assert!(p.nu2 >= p.nu1 && p.nu1 > 0.0);
            prop_assert!(1.0 + p.delta2 > p.delta1 && p.delta1 > 0.0);
            prop_assert!(p.excess().iter().all(|e| *e > 0.0));
            let c = p.nu_candidates();
            prop_assert!((c[2] - p.nu2).abs() <= 1e-12 * p.nu2);
            prop_assert!((c[1] - p.nu1).abs() <= 1e-12 * p.nu1.max(1e-300));
            prop_assert!(c.iter().all(|v| *v <= c[2] && *v >= c[1]));
        }
    }
}
