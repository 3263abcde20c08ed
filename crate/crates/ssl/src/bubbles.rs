//! Curvature-concentration certificates: the Θ value carried by each
//! concentration site and exhaustive enumeration of the certificate families
//! allowed by the convergence alternatives, plus a brute-force oracle.
//!
//! All Θ values are exact rational multiples of π and every emitted collapse
//! certificate balances to Σθ = 4π exactly. Smooth one-level bubbles are kept
//! aggregate (a single anonymous free pool) because the identities constrain
//! only counts, never placements; `refine_placements` expands a pooled
//! certificate into explicit placements when those are wanted.

use std::collections::BTreeSet;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::divisor::{chi_pair, Divisor};
use crate::error::{Result, SslError};
use crate::rat::{big_to_i64, ceil_int, format_rat, parse_rat, rat, Rat};

/// Guard for the targeted enumerators (subset scans are 2^m).
pub const MAX_MARKED_FOR_ENUM: usize = 16;
/// Guard for the brute-force oracle.
pub const MAX_ORACLE_WORK: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Site {
    /// 1-based marked-point index.
    Marked(usize),
    /// Anonymous free site (or pool of free sites).
    Free,
}

/// Per-site bubble content. `level1_smooth` at a free site is the pooled
/// count of anonymous one-bubble sites.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteConfig {
    pub site: Site,
    pub level1_smooth: u32,
    pub level1_singular: bool,
    pub level2_smooth: u32,
    /// Exact Θ as a rational multiple of π, serialized as `"p/q π"`.
    #[serde(with = "theta_pi")]
    pub theta_pi: Rat,
}

mod theta_pi {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Rat, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{} π", format_rat(v)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rat, D::Error> {
        let s = String::deserialize(d)?;
        let trimmed = s.trim().trim_end_matches('π').trim_end_matches("pi").trim();
        parse_rat(trimmed).map_err(serde::de::Error::custom)
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Noncollapse,
    CollapseOneLevel,
    CollapseTwoLevel,
    CollapseC1,
}

/// A curvature-concentration certificate: bubble content for every marked
/// point (unbubbled points carry θ = −2πβᵢ) plus an optional free pool.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BubbleConfig {
    pub regime: Regime,
    pub sites: Vec<SiteConfig>,
    /// Total 1-level bubbles.
    pub s1: u32,
    /// Total 2-level bubbles.
    pub s2: u32,
    /// 1-based indices of the marked points carrying a singular bubble.
    pub singular_sites: Vec<usize>,
    /// Set when the certificate uses structure the convergence analysis does
    /// not explicitly cover (several sites carrying 2-level trees at once).
    pub beyond_paper: bool,
}

impl BubbleConfig {
    /// Σθ over all sites, as a rational multiple of π.
    pub fn theta_total(&self) -> Rat {
        self.sites
            .iter()
            .fold(Rat::zero(), |a, s| a + s.theta_pi.clone())
    }

    /// Residual (non-concentrated) curvature mass, in units of π: 4 − Σθ.
    pub fn residual_mass_pi(&self) -> Rat {
        rat(4, 1) - self.theta_total()
    }

    /// Pooled free smooth-bubble count, 0 when no free site is present.
    pub fn free_pool(&self) -> u32 {
        self.sites
            .iter()
            .find(|s| s.site == Site::Free)
            .map_or(0, |s| s.level1_smooth)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serialize certificate")
    }
}

/// Θ carried by one site, as a rational multiple of π.
///
/// `beta`: the site's coefficient (`None` for a free site); `s`: 1-level
/// bubble count (including the singular one when present); `singular`:
/// whether one of the 1-level bubbles is singular; `s_prime`: 2-level count.
pub fn theta_of_site(beta: Option<&Rat>, s: u32, singular: bool, s_prime: u32) -> Result<Rat> {
    if singular && beta.is_none() {
        return Err(SslError::Domain(
            "a singular bubble requires a marked site".into(),
        ));
    }
    if s_prime > 0 && !singular {
        return Err(SslError::Domain(
            "2-level bubbles sit on top of a singular 1-level bubble".into(),
        ));
    }
    if singular && s == 0 {
        return Err(SslError::Domain(
            "singular flag with zero 1-level bubbles".into(),
        ));
    }
    let s = rat(s as i64, 1);
    let sp = rat(s_prime as i64, 1);
    Ok(match beta {
        None => rat(4, 1) * s,
        Some(b) => {
            let two_b = rat(2, 1) * b;
            if !singular {
                if s.is_zero() {
                    -two_b
                } else {
                    rat(4, 1) * s - two_b
                }
            } else {
                rat(4, 1) * (s - sp) + two_b
            }
        }
    })
}

fn assert_balanced(cfg: &BubbleConfig) -> bool {
    cfg.theta_total() == rat(4, 1)
}

fn marked_site(idx1: usize, beta: &Rat, smooth: u32, singular: bool, s2: u32) -> SiteConfig {
    SiteConfig {
        site: Site::Marked(idx1),
        level1_smooth: smooth,
        level1_singular: singular,
        level2_smooth: s2,
        theta_pi: theta_of_site(Some(beta), smooth + singular as u32, singular, s2)
            .expect("consistent site"),
    }
}

fn free_pool_site(t: u32) -> SiteConfig {
    SiteConfig {
        site: Site::Free,
        level1_smooth: t,
        level1_singular: false,
        level2_smooth: 0,
        theta_pi: theta_of_site(None, t, false, 0).expect("free site"),
    }
}

fn guard_enum(d: &Divisor) -> Result<()> {
    if d.len() > MAX_MARKED_FOR_ENUM {
        return Err(SslError::Guard(format!(
            "certificate enumeration over {} marked points exceeds the {} cap",
            d.len(),
            MAX_MARKED_FOR_ENUM
        )));
    }
    Ok(())
}

fn require_positive_half_chi(d: &Divisor) -> Result<Rat> {
    let half = chi_pair(d).half_chi;
    if !half.is_positive() {
        return Err(SslError::Domain(format!(
            "half Euler characteristic {} is not positive",
            format_rat(&half)
        )));
    }
    Ok(half)
}

/// All one-level collapse certificates: pairs (I, t) with
/// t + |I| = ½χ − Σ_{i∈I} βᵢ an exact nonnegative integer,
/// βᵢ ≤ ½χ − 1 on I, and t ≤ ½χ.
pub fn enumerate_collapse_one_level(d: &Divisor) -> Result<Vec<BubbleConfig>> {
    guard_enum(d)?;
    let half = require_positive_half_chi(d)?;
    let m = d.len();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let sum_i: Rat = subset
            .iter()
            .fold(Rat::zero(), |a, i| a + d.beta()[*i].clone());
        let s1 = &half - &sum_i;
        if !s1.is_integer() {
            continue;
        }
        let s1_int = big_to_i64(&s1.to_integer());
        let t = s1_int - subset.len() as i64;
        if t < 0 {
            continue;
        }
        // t <= half-chi and the per-site cap beta_i <= half-chi - 1 follow
        // from the identity, but they are the stated contract: check exactly.
        if rat(t, 1) > half {
            continue;
        }
        let cap = &half - rat(1, 1);
        if subset.iter().any(|i| d.beta()[*i] > cap) {
            continue;
        }
        let mut sites: Vec<SiteConfig> = (0..m)
            .map(|i| marked_site(i + 1, &d.beta()[i], 0, subset.contains(&i), 0))
            .collect();
        if t > 0 {
            sites.push(free_pool_site(t as u32));
        }
        let cfg = BubbleConfig {
            regime: Regime::CollapseOneLevel,
            sites,
            s1: s1_int as u32,
            s2: 0,
            singular_sites: subset.iter().map(|i| i + 1).collect(),
            beyond_paper: false,
        };
        if assert_balanced(&cfg) {
            out.insert(cfg);
        }
    }
    Ok(out.into_iter().collect())
}

/// All noncollapse certificates: per-site smooth counts nᵢ (nᵢ ≥ 1 only where
/// βᵢ > 1) with Σnᵢ ≤ ⌊½χ⌋, positive residual mass, and residual coefficients
/// βᵢ − 2nᵢ > −1. The all-zero assignment is plain convergence.
pub fn enumerate_noncollapse(d: &Divisor) -> Result<Vec<BubbleConfig>> {
    guard_enum(d)?;
    let half = require_positive_half_chi(d)?;
    let cap = big_to_i64(&half.floor().to_integer()).max(0) as u32;
    let m = d.len();
    let one = rat(1, 1);
    let mut out = Vec::new();
    let mut counts = vec![0u32; m];
    loop {
        let total: u32 = counts.iter().sum();
        let eligible = counts
            .iter()
            .enumerate()
            .all(|(i, n)| *n == 0 || d.beta()[i] > one);
        if total <= cap && eligible {
            let residual_ok = counts.iter().enumerate().all(|(i, n)| {
                &d.beta()[i] - rat(2 * *n as i64, 1) > -one.clone()
            });
            // residual mass 4π + 2πΣβ − 4πΣn > 0, in units of π
            let residual_mass = rat(4, 1) + rat(2, 1) * d.sum_beta() - rat(4 * total as i64, 1);
            if residual_ok && residual_mass.is_positive() {
                let sites: Vec<SiteConfig> = (0..m)
                    .map(|i| marked_site(i + 1, &d.beta()[i], counts[i], false, 0))
                    .collect();
                let cfg = BubbleConfig {
                    regime: Regime::Noncollapse,
                    sites,
                    s1: total,
                    s2: 0,
                    singular_sites: vec![],
                    beyond_paper: false,
                };
                debug_assert_eq!(cfg.residual_mass_pi(), residual_mass);
                out.push(cfg);
            }
        }
        if !advance(&mut counts, cap) {
            break;
        }
    }
    out.sort();
    Ok(out)
}

fn advance(counts: &mut [u32], cap: u32) -> bool {
    for c in counts.iter_mut() {
        *c += 1;
        if *c <= cap {
            return true;
        }
        *c = 0;
    }
    false
}

/// Search bound for the two-level enumerator: ⌈½χ⌉ + Σ_{βᵢ>1} ⌈βᵢ⌉.
pub fn two_level_bound(d: &Divisor) -> Result<u32> {
    let half = require_positive_half_chi(d)?;
    let one = rat(1, 1);
    let mut b = big_to_i64(&ceil_int(&half)).max(0);
    for beta in d.beta() {
        if *beta > one {
            b += big_to_i64(&ceil_int(beta));
        }
    }
    Ok(b as u32)
}

/// All two-level collapse certificates (s₂ ≥ 1): at most one singular bubble
/// per site; s′ᵢ ≥ 1 only where 2s′ᵢ < 1 + βᵢ (the hosting singular bubble
/// must keep positive area, which forces βᵢ > 1); global identity
/// s₁ − s₂ = ½χ − Σ_{i∈I} βᵢ; search bounded by s₁ ≤ [`two_level_bound`].
pub fn enumerate_collapse_two_level(d: &Divisor) -> Result<Vec<BubbleConfig>> {
    guard_enum(d)?;
    let half = require_positive_half_chi(d)?;
    let bound = two_level_bound(d)?;
    let m = d.len();
    let mut out = BTreeSet::new();
    for mask in 0u64..(1u64 << m) {
        let subset: Vec<usize> = (0..m).filter(|i| mask >> i & 1 == 1).collect();
        let v = subset
            .iter()
            .fold(half.clone(), |a, i| a - d.beta()[*i].clone());
        if !v.is_integer() {
            continue;
        }
        let v = big_to_i64(&v.to_integer());
        // per-site 2-level caps from positive residual area: 2s' < 1 + beta
        let caps: Vec<u32> = subset
            .iter()
            .map(|i| {
                let lim = (rat(1, 1) + &d.beta()[*i]) / rat(2, 1);
                (big_to_i64(&ceil_int(&lim)) - 1).max(0) as u32
            })
            .collect();
        let mut sprimes = vec![0u32; subset.len()];
        loop {
            let s2: u32 = sprimes.iter().sum();
            if s2 >= 1 {
                let s1 = v + s2 as i64;
                let t = s1 - subset.len() as i64;
                if t >= 0 && s1 <= bound as i64 {
                    let mut sites: Vec<SiteConfig> = (0..m)
                        .map(|i| {
                            if let Some(k) = subset.iter().position(|j| *j == i) {
                                marked_site(i + 1, &d.beta()[i], 0, true, sprimes[k])
                            } else {
                                marked_site(i + 1, &d.beta()[i], 0, false, 0)
                            }
                        })
                        .collect();
                    if t > 0 {
                        sites.push(free_pool_site(t as u32));
                    }
                    let cfg = BubbleConfig {
                        regime: Regime::CollapseTwoLevel,
                        sites,
                        s1: s1 as u32,
                        s2,
                        singular_sites: subset.iter().map(|i| i + 1).collect(),
                        beyond_paper: sprimes.iter().filter(|s| **s >= 1).count() >= 2,
                    };
                    if assert_balanced(&cfg) {
                        out.insert(cfg);
                    }
                }
            }
            if !advance_capped(&mut sprimes, &caps) {
                break;
            }
        }
    }
    Ok(out.into_iter().collect())
}

fn advance_capped(counts: &mut [u32], caps: &[u32]) -> bool {
    for (c, cap) in counts.iter_mut().zip(caps) {
        *c += 1;
        if *c <= *cap {
            return true;
        }
        *c = 0;
    }
    false
}

/// Certificates built from the three site kinds available when the curvature
/// data converges with one more derivative: βᵢ+1 smooth bubbles at a marked
/// point with integer βᵢ ≥ 0, one singular bubble at a marked point, or one
/// smooth bubble at a free site (pooled). Balance selects the free count.
pub fn enumerate_collapse_c1(d: &Divisor) -> Result<Vec<BubbleConfig>> {
    guard_enum(d)?;
    let half = require_positive_half_chi(d)?;
    let _ = half;
    let m = d.len();
    let budget = rat(1, 1) + d.beta().iter().fold(Rat::zero(), |a, b| a + b.abs()) / rat(2, 1);
    let mut out = BTreeSet::new();
    // per-site choices: 0 = unbubbled, 1 = smooth stack (integer beta >= 0), 2 = singular
    let mut choice = vec![0u8; m];
    loop {
        let mut ok = true;
        let mut theta_marked = Rat::zero();
        let mut bubbles = Rat::zero();
        for i in 0..m {
            let b = &d.beta()[i];
            match choice[i] {
                0 => theta_marked += theta_of_site(Some(b), 0, false, 0).unwrap(),
                1 => {
                    if !(b.is_integer() && !b.is_negative()) {
                        ok = false;
                        break;
                    }
                    let s = big_to_i64(&b.to_integer()) as u32 + 1;
                    theta_marked += theta_of_site(Some(b), s, false, 0).unwrap();
                    bubbles += rat(s as i64, 1);
                }
                _ => {
                    theta_marked += theta_of_site(Some(b), 1, true, 0).unwrap();
                    bubbles += rat(1, 1);
                }
            }
        }
        if ok {
            // remaining mass must be carried by f free bubbles of 4π each
            let f = (rat(4, 1) - &theta_marked) / rat(4, 1);
            if f.is_integer() && !f.is_negative() {
                let f = big_to_i64(&f.to_integer()) as u32;
                let total_bubbles = bubbles + rat(f as i64, 1);
                if total_bubbles <= budget {
                    let mut sites: Vec<SiteConfig> = (0..m)
                        .map(|i| {
                            let b = &d.beta()[i];
                            match choice[i] {
                                0 => marked_site(i + 1, b, 0, false, 0),
                                1 => {
                                    let s = big_to_i64(&b.to_integer()) as u32 + 1;
                                    marked_site(i + 1, b, s, false, 0)
                                }
                                _ => marked_site(i + 1, b, 0, true, 0),
                            }
                        })
                        .collect();
                    if f > 0 {
                        sites.push(free_pool_site(f));
                    }
                    let s1 = big_to_i64(&total_bubbles.to_integer()) as u32;
                    let singular_sites: Vec<usize> = (0..m)
                        .filter(|i| choice[*i] == 2)
                        .map(|i| i + 1)
                        .collect();
                    let cfg = BubbleConfig {
                        regime: Regime::CollapseC1,
                        sites,
                        s1,
                        s2: 0,
                        singular_sites,
                        beyond_paper: false,
                    };
                    if assert_balanced(&cfg) {
                        out.insert(cfg);
                    }
                }
            }
        }
        // next choice vector
        let mut advanced = false;
        for c in choice.iter_mut() {
            *c += 1;
            if *c <= 2 {
                advanced = true;
                break;
            }
            *c = 0;
        }
        if !advanced {
            break;
        }
    }
    Ok(out.into_iter().collect())
}

/// Erase a certificate to (singular set, pooled smooth count). Every
/// C¹ certificate must reappear in the one-level enumerator under this map.
pub fn erase_to_one_level(cfg: &BubbleConfig) -> (Vec<usize>, u32) {
    let mut smooth = 0u32;
    for s in &cfg.sites {
        smooth += s.level1_smooth;
    }
    (cfg.singular_sites.clone(), smooth)
}

/// Exhaustive brute-force search with per-site counts capped by `bound`,
/// filtered only by the Θ formulas, exact balance, positivity, and the
/// structural flags. Canonicalized to the same pooled form as the targeted
/// enumerators; used to validate them.
pub fn oracle_enumerate(d: &Divisor, bound: u32) -> Result<Vec<BubbleConfig>> {
    if bound < 1 {
        return Err(SslError::Domain("oracle bound must be at least 1".into()));
    }
    let work = d.len() as u32 * bound;
    if work > MAX_ORACLE_WORK {
        return Err(SslError::Guard(format!(
            "oracle rejected: m * bound = {work} exceeds {MAX_ORACLE_WORK}"
        )));
    }
    let half = require_positive_half_chi(d)?;
    let m = d.len();
    let one = rat(1, 1);
    let four = rat(4, 1);
    let mut out: BTreeSet<BubbleConfig> = BTreeSet::new();

    // Noncollapse: raw per-site smooth counts.
    let mut counts = vec![0u32; m];
    loop {
        let total: u32 = counts.iter().sum();
        let eligible = counts
            .iter()
            .enumerate()
            .all(|(i, n)| *n == 0 || d.beta()[i] > one);
        if eligible && rat(total as i64, 1) <= half {
            let residual_ok = counts
                .iter()
                .enumerate()
                .all(|(i, n)| &d.beta()[i] - rat(2 * *n as i64, 1) > -one.clone());
            let mass = &four + rat(2, 1) * d.sum_beta() - rat(4 * total as i64, 1);
            if residual_ok && mass.is_positive() {
                let sites = (0..m)
                    .map(|i| marked_site(i + 1, &d.beta()[i], counts[i], false, 0))
                    .collect();
                out.insert(BubbleConfig {
                    regime: Regime::Noncollapse,
                    sites,
                    s1: total,
                    s2: 0,
                    singular_sites: vec![],
                    beyond_paper: false,
                });
            }
        }
        if !advance(&mut counts, bound) {
            break;
        }
    }

    // Collapse: raw (smooth count, singular flag, 2-level count) per site plus
    // a raw free pool, filtered by exact balance, then pooled. The raw scan is
    // hot, so Θ values are pre-tabulated as integers over a common denominator.
    let scale = common_denominator(d)?;
    let four_scaled: i128 = 4 * scale;
    // per-site state table: (a, sing, sp, theta * scale)
    let mut tables: Vec<Vec<(u32, bool, u32, i128)>> = Vec::with_capacity(m);
    for i in 0..m {
        let beta = &d.beta()[i];
        let beta_scaled = scaled_value(beta, scale)?;
        let mut table = Vec::new();
        for a in 0..=bound {
            // no singular bubble
            let s = a;
            let theta = if s == 0 {
                -2 * beta_scaled
            } else {
                4 * s as i128 * scale - 2 * beta_scaled
            };
            table.push((a, false, 0, theta));
            // one singular bubble; 2-level bubbles need positive residual
            // area of the host: 2 s' < 1 + beta
            for sp in 0..=bound {
                if sp > 0 && 2 * sp as i128 * scale >= scale + beta_scaled {
                    break;
                }
                let s = a + 1;
                let theta = 4 * (s as i128 - sp as i128) * scale + 2 * beta_scaled;
                table.push((a, true, sp, theta));
            }
        }
        tables.push(table);
    }
    let mut idx = vec![0usize; m];
    loop {
        let mut site_sum: i128 = 0;
        for i in 0..m {
            site_sum += tables[i][idx[i]].3;
        }
        // remaining mass carried by the free pool: 4 t_free = 4 - site_sum
        let rem = four_scaled - site_sum;
        if rem >= 0 && rem % four_scaled == 0 {
            let t_free = (rem / four_scaled) as u32;
            if t_free <= bound {
                let raw: Vec<(u32, bool, u32)> = (0..m)
                    .map(|i| {
                        let (a, sing, sp, _) = tables[i][idx[i]];
                        (a, sing, sp)
                    })
                    .collect();
                let s2: u32 = raw.iter().map(|r| r.2).sum();
                let pooled_smooth: u32 = raw.iter().map(|r| r.0).sum::<u32>() + t_free;
                let singular: Vec<usize> = raw
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.1)
                    .map(|(i, _)| i + 1)
                    .collect();
                let s1 = pooled_smooth + singular.len() as u32;
                let mut sites: Vec<SiteConfig> = (0..m)
                    .map(|i| marked_site(i + 1, &d.beta()[i], 0, raw[i].1, raw[i].2))
                    .collect();
                if pooled_smooth > 0 {
                    sites.push(free_pool_site(pooled_smooth));
                }
                let regime = if s2 == 0 {
                    Regime::CollapseOneLevel
                } else {
                    Regime::CollapseTwoLevel
                };
                let cfg = BubbleConfig {
                    regime,
                    sites,
                    s1,
                    s2,
                    singular_sites: singular,
                    beyond_paper: raw.iter().filter(|r| r.2 >= 1).count() >= 2,
                };
                if assert_balanced(&cfg) {
                    out.insert(cfg);
                }
            }
        }
        // odometer over per-site table states
        let mut advanced = false;
        for i in 0..m {
            idx[i] += 1;
            if idx[i] < tables[i].len() {
                advanced = true;
                break;
            }
            idx[i] = 0;
        }
        if !advanced {
            break;
        }
    }
    Ok(out.into_iter().collect())
}

/// True when a certificate lies within the oracle's raw search reach for the
/// given bound (used when comparing targeted enumerators against the oracle).
pub fn within_oracle_reach(cfg: &BubbleConfig, m: usize, bound: u32) -> bool {
    let pool_reach = (m as u32 + 1) * bound;
    cfg.sites.iter().all(|s| match s.site {
        Site::Marked(_) => s.level1_smooth <= bound && s.level2_smooth <= bound,
        Site::Free => s.level1_smooth <= pool_reach,
    })
}

/// Least common denominator of the coefficients, for scaled integer Θ sums.
fn common_denominator(d: &Divisor) -> Result<i128> {
    use num_integer::Integer;
    let mut l = num_bigint::BigInt::from(1);
    for b in d.beta() {
        l = l.lcm(b.denom());
    }
    let l_i128: i128 = l
        .try_into()
        .map_err(|_| SslError::Guard("oracle requires moderate denominators".into()))?;
    if l_i128 > 1 << 32 {
        return Err(SslError::Guard(
            "oracle requires denominators with lcm below 2^32".into(),
        ));
    }
    Ok(l_i128)
}

fn scaled_value(b: &Rat, scale: i128) -> Result<i128> {
    let num: i128 = b
        .numer()
        .try_into()
        .map_err(|_| SslError::Guard("oracle requires moderate numerators".into()))?;
    let den: i128 = b.denom().try_into().expect("denominator divides lcm");
    Ok(num * (scale / den))
}

/// Expand a pooled one-level certificate into explicit placements of its
/// free-pool bubbles over the marked points and one anonymous free site.
pub fn refine_placements(cfg: &BubbleConfig, d: &Divisor) -> Result<Vec<BubbleConfig>> {
    if cfg.regime != Regime::CollapseOneLevel {
        return Err(SslError::Domain(
            "placement refinement is defined for one-level certificates".into(),
        ));
    }
    let t = cfg.free_pool();
    let m = d.len();
    if (t as usize + 1).saturating_mul(m + 1) > 4096 {
        return Err(SslError::Guard("refinement space too large".into()));
    }
    let singular: BTreeSet<usize> = cfg.singular_sites.iter().copied().collect();
    let mut out = Vec::new();
    let mut alloc = vec![0u32; m + 1]; // last slot = free site
    loop {
        if alloc.iter().sum::<u32>() == t {
            let mut sites: Vec<SiteConfig> = (0..m)
                .map(|i| {
                    marked_site(
                        i + 1,
                        &d.beta()[i],
                        alloc[i],
                        singular.contains(&(i + 1)),
                        0,
                    )
                })
                .collect();
            if alloc[m] > 0 {
                sites.push(free_pool_site(alloc[m]));
            }
            let refined = BubbleConfig {
                regime: Regime::CollapseOneLevel,
                sites,
                s1: cfg.s1,
                s2: 0,
                singular_sites: cfg.singular_sites.clone(),
                beyond_paper: false,
            };
            debug_assert!(assert_balanced(&refined));
            out.push(refined);
        }
        if !advance(&mut alloc, t) {
            break;
        }
    }
    out.sort();
    Ok(out)
}

/// Union of the targeted enumerators, deduplicated and sorted.
pub fn enumerate_all(d: &Divisor) -> Result<Vec<BubbleConfig>> {
    let mut set: BTreeSet<BubbleConfig> = BTreeSet::new();
    set.extend(enumerate_noncollapse(d)?);
    set.extend(enumerate_collapse_one_level(d)?);
    set.extend(enumerate_collapse_two_level(d)?);
    set.extend(enumerate_collapse_c1(d)?);
    Ok(set.into_iter().collect())
}
