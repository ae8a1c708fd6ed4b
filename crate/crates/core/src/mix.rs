//! Time-sharing between schemes and the rate/load-ratio algebra.
//!
//! `lambda` is the fraction of every message served by the *first* scheme of
//! a [`MixPlan`]; for the classic plan that is the pairwise baseline, with
//! the central-heavy scheme on the remaining `1 - lambda`.
//!
//! All arithmetic is exact over `Ratio<i128>`.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::access::{AttributeVector, SystemParams};
use crate::error::{Error, Result};
use crate::harness::{run_segments, RunOptions, RunOutput};
use crate::protocol::SchemeKind;
use crate::store::MessageStore;

pub type Rational = Ratio<i128>;

pub fn rat(n: i128, d: i128) -> Rational {
    Rational::new(n, d)
}

fn int(n: usize) -> Rational {
    Rational::from_integer(n as i128)
}

/// Parses `"3/7"`, `"0.25"` or `"1"`.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::InvalidParams(format!("not a rational number: {s:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i128 = n.trim().parse().map_err(|_| bad())?;
        let d: i128 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((w, f)) = s.split_once('.') {
        let digits = f.len() as u32;
        let scale = 10i128.checked_pow(digits).ok_or_else(bad)?;
        let whole: i128 = if w.is_empty() { 0 } else { w.parse().map_err(|_| bad())? };
        let frac: i128 = f.parse().map_err(|_| bad())?;
        return Ok(Rational::new(whole * scale + frac, scale));
    }
    Ok(Rational::from_integer(s.parse().map_err(|_| bad())?))
}

pub fn ratio_to_string(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn ratio_to_f64(r: &Rational) -> f64 {
    r.numer().to_f64().unwrap_or(f64::NAN) / r.denom().to_f64().unwrap_or(f64::NAN)
}

/// Dedicated-to-central download ratio; infinite when the central server
/// sends nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoadRatio {
    Finite(Rational),
    Infinite,
}

impl LoadRatio {
    pub fn from_counts(dedicated: Rational, central: Rational) -> Self {
        if central.is_zero() {
            LoadRatio::Infinite
        } else {
            LoadRatio::Finite(dedicated / central)
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            LoadRatio::Finite(r) => ratio_to_f64(r),
            LoadRatio::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<Rational> {
        match self {
            LoadRatio::Finite(r) => Some(*r),
            LoadRatio::Infinite => None,
        }
    }
}

impl PartialOrd for LoadRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for LoadRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (LoadRatio::Finite(a), LoadRatio::Finite(b)) => a.cmp(b),
            (LoadRatio::Finite(_), LoadRatio::Infinite) => Ordering::Less,
            (LoadRatio::Infinite, LoadRatio::Finite(_)) => Ordering::Greater,
            (LoadRatio::Infinite, LoadRatio::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for LoadRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadRatio::Finite(r) => f.write_str(&ratio_to_string(r)),
            LoadRatio::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for LoadRatio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for LoadRatio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            return Ok(LoadRatio::Infinite);
        }
        parse_rational(&s)
            .map(LoadRatio::Finite)
            .map_err(serde::de::Error::custom)
    }
}

fn check_lambda(lambda: Rational) -> Result<()> {
    if lambda < Rational::zero() || lambda > Rational::one() {
        return Err(Error::LambdaOutOfRange(ratio_to_string(&lambda)));
    }
    Ok(())
}

/// Rate of the baseline/central-heavy mix with baseline fraction `lambda`.
pub fn rate_of_lambda(lambda: Rational, k: usize) -> Result<Rational> {
    check_lambda(lambda)?;
    let k = int(k);
    let one = Rational::one();
    Ok(one / (k * (one + lambda) + (one - lambda)))
}

pub fn load_ratio_of_lambda(lambda: Rational, d: usize, k: usize) -> Result<LoadRatio> {
    check_lambda(lambda)?;
    let one = Rational::one();
    if lambda == one {
        return Ok(LoadRatio::Infinite);
    }
    let (d, k) = (int(d), int(k));
    Ok(LoadRatio::Finite(one / (k * d) + int(2) * lambda / (d * (one - lambda))))
}

/// The time-sharing curve written as rate against load ratio.
pub fn rate_of_load(ell: LoadRatio, d: usize, k: usize) -> Result<Rational> {
    let (dr, kr) = (int(d), int(k));
    let one = Rational::one();
    let ell = match ell {
        LoadRatio::Infinite => return Ok(one / (int(2) * kr)),
        LoadRatio::Finite(l) => l,
    };
    let min = one / (kr * dr);
    if ell < min {
        return Err(Error::LoadRatioOutOfRange(ratio_to_string(&ell), ratio_to_string(&min)));
    }
    let inner = (ell * kr * kr * dr + kr) / (ell * kr * dr + int(2) * kr - one);
    Ok(one / (kr + inner))
}

pub fn randomness_of_lambda(lambda: Rational, k: usize, l: usize) -> Result<Rational> {
    check_lambda(lambda)?;
    Ok(int(k) * int(l) * (lambda * (int(k) - Rational::one()) + Rational::one()))
}

/// Downloads `(per dedicated server, central)` of the baseline/central-heavy
/// mix for a length-`l` message.
pub fn mixed_downloads(lambda: Rational, d: usize, k: usize, l: usize) -> Result<(Rational, Rational)> {
    check_lambda(lambda)?;
    let one = Rational::one();
    let ded = ((int(2 * k) - one) * lambda + one) * int(l) / int(d);
    let cen = (one - lambda) * int(k) * int(l);
    Ok((ded, cen))
}

/// Downloads and randomness per message symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Costs {
    pub dedicated: Rational,
    pub central: Rational,
    pub randomness: Rational,
}

impl Costs {
    pub fn of(kind: SchemeKind, d: usize, k: usize) -> Self {
        let (dr, kr) = (int(d), int(k));
        match kind {
            SchemeKind::Het1 => Costs {
                dedicated: Rational::one() / dr,
                central: kr,
                randomness: kr,
            },
            SchemeKind::Het2 => Costs {
                dedicated: int(2 * k * (d - 1)) / (dr * int(d + 1)),
                central: int(2 * k) / int(d + 1),
                randomness: int(d - 1) * kr * kr / int(d + 1),
            },
            SchemeKind::Dapac => Costs {
                dedicated: int(2 * k) / dr,
                central: Rational::zero(),
                randomness: kr * kr,
            },
        }
    }

    /// `(1 - mu) * self + mu * other`.
    pub fn blend(&self, other: &Costs, mu: Rational) -> Costs {
        let a = Rational::one() - mu;
        Costs {
            dedicated: a * self.dedicated + mu * other.dedicated,
            central: a * self.central + mu * other.central,
            randomness: a * self.randomness + mu * other.randomness,
        }
    }

    pub fn rate(&self, d: usize) -> Rational {
        Rational::one() / (int(d) * self.dedicated + self.central)
    }

    pub fn load_ratio(&self) -> LoadRatio {
        LoadRatio::from_counts(self.dedicated, self.central)
    }
}

/// Best known rate at load ratio `ell`: mixes of the central-heavy and
/// balanced schemes below `(D-1)/D`, of the balanced scheme and the
/// baseline above it.
pub fn frontier_rate_at(ell: LoadRatio, d: usize, k: usize) -> Result<Rational> {
    if d < 3 {
        return Err(Error::SchemeInapplicable {
            scheme: SchemeKind::Het2,
            min_d: 3,
            d,
        });
    }
    let s1 = Costs::of(SchemeKind::Het1, d, k);
    let s2 = Costs::of(SchemeKind::Het2, d, k);
    let base = Costs::of(SchemeKind::Dapac, d, k);
    let ell = match ell {
        LoadRatio::Infinite => return Ok(base.rate(d)),
        LoadRatio::Finite(l) => l,
    };
    let min = Rational::one() / (int(k) * int(d));
    if ell < min {
        return Err(Error::LoadRatioOutOfRange(ratio_to_string(&ell), ratio_to_string(&min)));
    }
    let knee = int(d - 1) / int(d);
    let (a, b) = if ell <= knee { (s1, s2) } else { (s2, base) };
    // Solve ded(mu) = ell * cen(mu) for the blend fraction mu.
    let mu = (ell * a.central - a.dedicated)
        / ((b.dedicated - a.dedicated) - ell * (b.central - a.central));
    Ok(a.blend(&b, mu).rate(d))
}

/// One row of the curve table.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    /// `timeshare`, `het1-het2` or `het2-dapac`.
    pub family: &'static str,
    /// Fraction of the second family member (`lambda` for `timeshare`).
    pub fraction: Rational,
    pub load_ratio: LoadRatio,
    pub rate_timeshare: Rational,
    pub rate_frontier: Rational,
    pub costs: Costs,
}

impl CurveRow {
    pub fn label(&self) -> String {
        format!("{}:{}", self.family, ratio_to_string(&self.fraction))
    }
}

/// Points of the time-sharing curve and, for `D >= 3`, of the improved
/// frontier, each family sampled at `fraction = i / grid`. Rows are sorted
/// by load ratio.
pub fn frontier(d: usize, k: usize, grid: usize) -> Result<Vec<CurveRow>> {
    if grid == 0 {
        return Err(Error::InvalidParams("grid must be positive".into()));
    }
    let with_frontier = d >= 3;
    let mut rows = Vec::new();
    let s1 = Costs::of(SchemeKind::Het1, d, k);
    let s2 = Costs::of(SchemeKind::Het2, d, k);
    let base = Costs::of(SchemeKind::Dapac, d, k);
    for i in 0..=grid {
        let lambda = rat(i as i128, grid as i128);
        let costs = s1.blend(&base, lambda);
        let ell = load_ratio_of_lambda(lambda, d, k)?;
        let ts = rate_of_lambda(lambda, k)?;
        let fr = if with_frontier { frontier_rate_at(ell, d, k)? } else { ts };
        rows.push(CurveRow {
            family: "timeshare",
            fraction: lambda,
            load_ratio: ell,
            rate_timeshare: ts,
            rate_frontier: fr,
            costs,
        });
    }
    if with_frontier {
        for (family, a, b) in [("het1-het2", s1, s2), ("het2-dapac", s2, base)] {
            for i in 0..=grid {
                let mu = rat(i as i128, grid as i128);
                let costs = a.blend(&b, mu);
                let ell = costs.load_ratio();
                rows.push(CurveRow {
                    family,
                    fraction: mu,
                    load_ratio: ell,
                    rate_timeshare: rate_of_load(ell, d, k)?,
                    rate_frontier: costs.rate(d),
                    costs,
                });
            }
        }
    }
    rows.sort_by_key(|a| a.load_ratio);
    Ok(rows)
}

/// Writes the curve as CSV. Floats for plotting, exact rationals alongside.
pub fn write_curve_csv<W: std::io::Write>(mut w: W, d: usize, k: usize, grid: usize, rows: &[CurveRow]) -> Result<()> {
    writeln!(w, "# curve D={d} K={k} grid={grid}; downloads and randomness per message symbol")?;
    writeln!(
        w,
        "lambda_or_mix,load_ratio,rate_timeshare,rate_frontier,downloads_dedicated,downloads_central,randomness_symbols,load_ratio_exact,rate_timeshare_exact,rate_frontier_exact"
    )?;
    for r in rows {
        let ell = match r.load_ratio {
            LoadRatio::Infinite => "inf".to_string(),
            LoadRatio::Finite(x) => format!("{:.6}", ratio_to_f64(&x)),
        };
        writeln!(
            w,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            r.label(),
            ell,
            ratio_to_f64(&r.rate_timeshare),
            ratio_to_f64(&r.rate_frontier),
            ratio_to_f64(&r.costs.dedicated),
            ratio_to_f64(&r.costs.central),
            ratio_to_f64(&r.costs.randomness),
            r.load_ratio,
            ratio_to_string(&r.rate_timeshare),
            ratio_to_string(&r.rate_frontier),
        )?;
    }
    Ok(())
}

/// Two schemes sharing every message: the first serves the leading
/// `lambda * L` symbols, the second the rest.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixPlan {
    #[serde(with = "ratio_serde")]
    pub lambda: Rational,
    pub first: SchemeKind,
    pub second: SchemeKind,
}

pub(crate) mod ratio_serde {
    use super::{parse_rational, ratio_to_string, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&ratio_to_string(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

impl MixPlan {
    pub fn new(lambda: Rational, first: SchemeKind, second: SchemeKind) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(MixPlan { lambda, first, second })
    }

    /// Baseline on `lambda`, central-heavy scheme on `1 - lambda`.
    pub fn baseline_het1(lambda: Rational) -> Result<Self> {
        Self::new(lambda, SchemeKind::Dapac, SchemeKind::Het1)
    }

    fn split(&self, params: &SystemParams) -> Option<(usize, usize)> {
        let l = params.l as i128;
        let first = self.lambda * Rational::from_integer(l);
        if !first.is_integer() {
            return None;
        }
        let a = first.to_integer() as usize;
        let b = params.l - a;
        let ok = |kind: SchemeKind, len: usize| {
            len == 0 || (params.d >= kind.min_d() && len.is_multiple_of(kind.parts(params.d)))
        };
        (ok(self.first, a) && ok(self.second, b)).then_some((a, b))
    }

    /// Smallest message length the plan can split, if any below a sane bound.
    pub fn min_length(&self, params: &SystemParams) -> Option<usize> {
        (1..=100_000).find(|&l| self.split(&params.with_length(l)).is_some())
    }

    /// Non-empty `(scheme, length)` segments in message order.
    pub fn segments(&self, params: &SystemParams) -> Result<Vec<(SchemeKind, usize)>> {
        for (kind, share) in [(self.first, self.lambda), (self.second, Rational::one() - self.lambda)] {
            if !share.is_zero() && params.d < kind.min_d() {
                return Err(Error::SchemeInapplicable {
                    scheme: kind,
                    min_d: kind.min_d(),
                    d: params.d,
                });
            }
        }
        let (a, b) = self.split(params).ok_or_else(|| Error::MixLength {
            lambda: ratio_to_string(&self.lambda),
            length: params.l,
            min_length: self.min_length(params).unwrap_or(0),
        })?;
        Ok([(self.first, a), (self.second, b)]
            .into_iter()
            .filter(|&(_, len)| len > 0)
            .collect())
    }
}

/// Runs each component scheme on its segment and concatenates the results.
pub fn run_time_shared(
    plan: &MixPlan,
    params: &SystemParams,
    v_star: &AttributeVector,
    store: &MessageStore,
    seed: u64,
) -> Result<RunOutput> {
    let segments = plan.segments(params)?;
    let opts = RunOptions {
        lambda: Some(plan.lambda),
        ..RunOptions::default()
    };
    run_segments(params, &segments, v_star, store, seed, &opts)
}
