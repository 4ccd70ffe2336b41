//! Recovery bounds for a union of two orthonormal bases.
//!
//! Coherence enters only through `mu^2`, kept as an exact rational, so the
//! predicates below are decided without rounding even for `mu = 1/sqrt(N)`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::Serialize;

use crate::bases::SegmentCapability;
use crate::error::{Error, Result};

/// Mutual coherence `mu`, stored as `mu^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coherence {
    squared: BigRational,
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

fn int(v: usize) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// `"p/q"`, `"p"` or a plain decimal such as `"0.125"`, exactly.
fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Malformed(format!("not a rational number: {s:?}"));
    if s.contains('/') {
        let r = BigRational::from_str(s).map_err(|_| bad())?;
        return Ok(r);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (whole, frac) = body.split_once('.').unwrap_or((body, ""));
    if whole.is_empty() && frac.is_empty()
        || !(whole
            .chars()
            .chain(frac.chars())
            .all(|c| c.is_ascii_digit()))
    {
        return Err(bad());
    }
    let digits: BigInt = format!("0{whole}{frac}").parse().map_err(|_| bad())?;
    let scale = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(digits, scale);
    Ok(if neg { -r } else { r })
}

impl Coherence {
    /// `mu` given exactly.
    pub fn new(mu: BigRational) -> Result<Self> {
        Self::from_squared(&mu * &mu).and_then(|c| {
            if mu.is_positive() {
                Ok(c)
            } else {
                Err(Error::InvalidParameter("coherence must be positive".into()))
            }
        })
    }

    /// `mu = sqrt(squared)`.
    pub fn from_squared(squared: BigRational) -> Result<Self> {
        if !squared.is_positive() || squared > BigRational::one() {
            return Err(Error::InvalidParameter(format!(
                "coherence squared {squared} is outside (0, 1]"
            )));
        }
        Ok(Self { squared })
    }

    /// `mu = 1/sqrt(n)`, the Fourier + canonical value.
    pub fn inverse_sqrt(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        Self::from_squared(ratio(1, n as i64))
    }

    /// The exact binary value of a float.
    pub fn from_f64(mu: f64) -> Result<Self> {
        let r = BigRational::from_float(mu).ok_or(Error::NonFinite("coherence"))?;
        Self::new(r)
    }

    pub fn squared(&self) -> &BigRational {
        &self.squared
    }

    pub fn value(&self) -> f64 {
        self.squared.to_f64().unwrap_or(f64::NAN).sqrt()
    }
}

/// Accepts `p/q`, a decimal, `sqrt(r)` or `1/sqrt(r)` with `r` rational.
impl FromStr for Coherence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        fn inner(t: &str) -> Option<&str> {
            t.strip_prefix("sqrt(")?.strip_suffix(')')
        }
        if let Some(r) = s.strip_prefix("1/").and_then(inner) {
            let r = parse_rational(r)?;
            if !r.is_positive() {
                return Err(Error::InvalidParameter("coherence must be positive".into()));
            }
            return Self::from_squared(r.recip());
        }
        if let Some(r) = inner(s) {
            return Self::from_squared(parse_rational(r)?);
        }
        Self::new(parse_rational(s)?)
    }
}

impl fmt::Display for Coherence {
    /// `mu` itself when it is rational, `sqrt(mu^2)` otherwise.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (n, d) = (self.squared.numer(), self.squared.denom());
        match (n.sqrt(), d.sqrt()) {
            (a, b) if &(&a * &a) == n && &(&b * &b) == d => write!(f, "{}", BigRational::new(a, b)),
            _ => write!(f, "sqrt({})", self.squared),
        }
    }
}

/// Parameters of the generalized bound `(S(K_p) + L - 1)(K_q + tau) < N + tau L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedParams {
    pub capability: SegmentCapability,
    pub support_length: usize,
}

/// A strict inequality `lhs < rhs` and whether it was met with equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Outcome {
    pub holds: bool,
    pub equality: bool,
}

impl Outcome {
    fn compare<T: PartialOrd>(lhs: T, rhs: T) -> Self {
        Self {
            holds: lhs < rhs,
            equality: lhs == rhs,
        }
    }

    /// `sqrt(a2) < b` for `a2 >= 0`.
    fn sqrt_below(a2: &BigRational, b: &BigRational) -> Self {
        if b.is_negative() {
            return Self {
                holds: false,
                equality: false,
            };
        }
        let b2 = b * b;
        Self::compare(a2, &b2)
    }
}

/// Every predicate at one `(K_p, K_q)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundRow {
    pub n: usize,
    pub kp: usize,
    pub kq: usize,
    /// `K < 1/mu`.
    pub p0_unique: Outcome,
    /// `2 mu^2 K_p K_q + mu max(K_p, K_q) - 1 < 0`.
    pub bp_tight: Outcome,
    /// `K < (sqrt(2) - 1/2)/mu`.
    pub bp_simple: Outcome,
    /// `K_p K_q < N/2`.
    pub prosparse_product: Outcome,
    /// `K < sqrt(2N)`.
    pub prosparse_total: Outcome,
    pub generalized: Option<Outcome>,
}

impl BoundRow {
    pub fn total(&self) -> usize {
        self.kp + self.kq
    }

    /// Names of the predicates met with equality.
    pub fn equality_hits(&self) -> Vec<&'static str> {
        let mut hits = Vec::new();
        let named = [
            ("p0_unique", Some(self.p0_unique)),
            ("bp_tight", Some(self.bp_tight)),
            ("bp_simple", Some(self.bp_simple)),
            ("prosparse_product", Some(self.prosparse_product)),
            ("prosparse_total", Some(self.prosparse_total)),
            ("generalized", self.generalized),
        ];
        for (name, o) in named {
            if o.is_some_and(|o| o.equality) {
                hits.push(name);
            }
        }
        hits
    }
}

pub fn evaluate_bounds(
    n: usize,
    mu: &Coherence,
    kp: usize,
    kq: usize,
    gen: Option<&GeneralizedParams>,
) -> BoundRow {
    let mu2 = mu.squared();
    let k = kp + kq;
    let k2mu2 = int(k * k) * mu2;

    let p0_unique = Outcome::compare(&k2mu2, &BigRational::one());

    // mu M < 1 - 2 mu^2 K_p K_q
    let a = BigRational::one() - int(2 * kp * kq) * mu2;
    let m = kp.max(kq);
    let bp_tight = Outcome::sqrt_below(&(int(m * m) * mu2), &a);

    // K mu + 1/2 < sqrt(2)  <=>  K mu < 7/4 - K^2 mu^2
    let b = ratio(7, 4) - &k2mu2;
    let bp_simple = Outcome::sqrt_below(&k2mu2, &b);

    let prosparse_product = Outcome::compare(2 * kp * kq, n);
    let prosparse_total = Outcome::compare(k * k, 2 * n);

    let generalized = gen.map(|g| {
        let s = g.capability.sampling_factor(n, kp);
        let tau = g.capability.tau;
        let l = g.support_length;
        Outcome::compare((s + l - 1) * (kq + tau), n + tau * l)
    });

    BoundRow {
        n,
        kp,
        kq,
        p0_unique,
        bp_tight,
        bp_simple,
        prosparse_product,
        prosparse_total,
        generalized,
    }
}

/// Rows for `0 <= K_p, K_q <= k_max`, `K_p` major.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub mu: Coherence,
    pub rows: Vec<BoundRow>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    n: usize,
    mu: &'a str,
    kp: usize,
    kq: usize,
    p0_unique: bool,
    bp_tight: bool,
    bp_simple: bool,
    prosparse_product: bool,
    prosparse_total: bool,
    generalized: Option<bool>,
    equality: String,
}

impl BoundReport {
    pub fn evaluate(
        n: usize,
        mu: Coherence,
        k_max: usize,
        gen: Option<&GeneralizedParams>,
    ) -> Self {
        let mut rows = Vec::with_capacity((k_max + 1) * (k_max + 1));
        for kp in 0..=k_max {
            for kq in 0..=k_max {
                rows.push(evaluate_bounds(n, &mu, kp, kq, gen));
            }
        }
        Self { n, mu, rows }
    }

    /// Largest `K` such that every row with `K_p + K_q <= K` satisfies `pred`.
    pub fn max_total(&self, pred: impl Fn(&BoundRow) -> bool) -> Option<usize> {
        let first_fail = self
            .rows
            .iter()
            .filter(|r| !pred(r))
            .map(BoundRow::total)
            .min();
        match first_fail {
            Some(0) => None,
            Some(k) => Some(k - 1),
            None => self.rows.iter().map(BoundRow::total).max(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mu = self.mu.to_string();
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(CsvRow {
                n: r.n,
                mu: &mu,
                kp: r.kp,
                kq: r.kq,
                p0_unique: r.p0_unique.holds,
                bp_tight: r.bp_tight.holds,
                bp_simple: r.bp_simple.holds,
                prosparse_product: r.prosparse_product.holds,
                prosparse_total: r.prosparse_total.holds,
                generalized: r.generalized.map(|g| g.holds),
                equality: r.equality_hits().join(";"),
            })
            .map_err(|e| Error::Malformed(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Boundary `K_q` as a function of `K_p` for each bound; `None` where the
/// boundary is unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub kp: usize,
    pub p0_unique: f64,
    pub bp_tight: f64,
    pub bp_simple: f64,
    pub prosparse_product: Option<f64>,
    pub prosparse_total: f64,
}

pub fn bound_curves(n: usize, mu: &Coherence, kp_max: usize) -> Vec<CurvePoint> {
    let mu = mu.value();
    let nf = n as f64;
    (0..=kp_max)
        .map(|kp| {
            let p = kp as f64;
            let bp_tight = if kp == 0 {
                1.0 / mu
            } else if 2.0 * mu * mu * p * p + mu * p - 1.0 < 0.0 {
                // K_q >= K_p on the boundary.
                1.0 / (mu * (2.0 * mu * p + 1.0))
            } else {
                ((1.0 - mu * p) / (2.0 * mu * mu * p)).max(0.0)
            };
            CurvePoint {
                kp,
                p0_unique: 1.0 / mu - p,
                bp_tight,
                bp_simple: (2f64.sqrt() - 0.5) / mu - p,
                prosparse_product: (kp > 0).then(|| nf / (2.0 * p)),
                prosparse_total: (2.0 * nf).sqrt() - p,
            }
        })
        .collect()
}

pub fn write_curves_csv<W: std::io::Write>(points: &[CurvePoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)
            .map_err(|e| Error::Malformed(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bases::SamplingRule;

    fn mu(s: &str) -> Coherence {
        s.parse().unwrap()
    }

    #[test]
    fn parses_exact_forms() {
        assert_eq!(mu("1/12").squared(), &ratio(1, 144));
        assert_eq!(mu("0.125").squared(), &ratio(1, 64));
        assert_eq!(mu("1/sqrt(128)"), Coherence::inverse_sqrt(128).unwrap());
        assert_eq!(mu("sqrt(2/64)").squared(), &ratio(1, 32));
        assert_eq!(mu("1/sqrt(128)").to_string(), "sqrt(1/128)");
        assert_eq!(mu("1/12").to_string(), "1/12");
        assert!("0".parse::<Coherence>().is_err());
        assert!("1.5".parse::<Coherence>().is_err());
        assert!("abc".parse::<Coherence>().is_err());
    }

    #[test]
    fn thresholds_at_144() {
        let report = BoundReport::evaluate(144, mu("1/12"), 24, None);
        assert_eq!(report.max_total(|r| r.p0_unique.holds), Some(11));
        assert_eq!(report.max_total(|r| r.bp_simple.holds), Some(10));
        assert_eq!(report.max_total(|r| r.prosparse_total.holds), Some(16));
        // K = 12 sits exactly on 1/mu.
        let r = evaluate_bounds(144, &mu("1/12"), 5, 7, None);
        assert!(!r.p0_unique.holds && r.p0_unique.equality);
        assert_eq!(r.equality_hits(), vec!["p0_unique"]);
    }

    #[test]
    fn counterexample_sparsity() {
        let r = evaluate_bounds(128, &Coherence::inverse_sqrt(128).unwrap(), 8, 3, None);
        assert!(r.prosparse_product.holds && r.p0_unique.holds);
        assert!(!r.bp_tight.holds);
    }

    #[test]
    fn generalized_matches_examples() {
        let lf = GeneralizedParams {
            capability: SegmentCapability {
                tau: 0,
                rule: SamplingRule::Linear { per_atom: 2 },
            },
            support_length: 8,
        };
        let r = evaluate_bounds(64, &mu("sqrt(8/64)"), 2, 5, Some(&lf));
        // (4 + 7) 5 = 55 < 64
        assert!(r.generalized.unwrap().holds);
        let dct = GeneralizedParams {
            capability: SegmentCapability {
                tau: 1,
                rule: SamplingRule::Linear { per_atom: 4 },
            },
            support_length: 1,
        };
        // 4 * 4 * (3 + 1) = 64 < 65, 4 * 4 * 5 = 80 > 65
        assert!(
            evaluate_bounds(64, &mu("sqrt(2/64)"), 4, 3, Some(&dct))
                .generalized
                .unwrap()
                .holds
        );
        assert!(
            !evaluate_bounds(64, &mu("sqrt(2/64)"), 4, 4, Some(&dct))
                .generalized
                .unwrap()
                .holds
        );
    }

    #[test]
    fn curves_at_144() {
        let c = bound_curves(144, &mu("1/12"), 12);
        assert!((c[0].p0_unique - 12.0).abs() < 1e-12);
        assert_eq!(c[0].prosparse_product, None);
        assert!((c[8].prosparse_product.unwrap() - 9.0).abs() < 1e-12);
        assert!((c[4].prosparse_total - (288f64.sqrt() - 4.0)).abs() < 1e-12);
        // On the tight boundary the expression vanishes.
        for p in &c[1..] {
            let (kp, kq, m) = (p.kp as f64, p.bp_tight, 1.0 / 12.0);
            if kq > 0.0 {
                let f = 2.0 * m * m * kp * kq + m * kp.max(kq) - 1.0;
                assert!(f.abs() < 1e-12, "{kp} {kq} {f}");
            }
        }
    }
}
