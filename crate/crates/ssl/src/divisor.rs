//! Divisors on the unit sphere with exact rational cone coefficients, and
//! the exact integer geometry attached to them: the Euler characteristic of
//! the pair, the half-space index set, and the ℓ¹ distance to the odd
//! integer lattice.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SslError};
use crate::rat::{
    self, big_to_i64, dist_to_int, format_rat, is_odd, parse_rat, rat, round_half_up,
    second_nearest, to_f64, Rat,
};

/// Minimum chordal separation accepted between marked points.
pub const MIN_POINT_SEPARATION: f64 = 1e-12;
/// Tolerance on |p| = 1 before a point is rejected (values inside are renormalised).
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Optional floating view of the coefficients, for callers whose true
/// parameters are irrational and only represented by rational stand-ins.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FloatView {
    pub values: Vec<f64>,
    pub radii: Vec<f64>,
}

/// A formal sum Σ βᵢ pᵢ of marked unit-sphere points with exact rational
/// coefficients. All βᵢ > −1 (cone angles stay positive; cusps rejected).
#[derive(Debug, Clone, PartialEq)]
pub struct Divisor {
    points: Vec<[f64; 3]>,
    beta: Vec<Rat>,
    float_view: Option<FloatView>,
}

impl Divisor {
    pub fn new(points: Vec<[f64; 3]>, beta: Vec<Rat>) -> Result<Self> {
        Self::with_float_view(points, beta, None)
    }

    pub fn with_float_view(
        points: Vec<[f64; 3]>,
        beta: Vec<Rat>,
        float_view: Option<FloatView>,
    ) -> Result<Self> {
        if points.len() != beta.len() {
            return Err(SslError::Domain(format!(
                "{} points but {} coefficients",
                points.len(),
                beta.len()
            )));
        }
        let minus_one = rat(-1, 1);
        for (i, b) in beta.iter().enumerate() {
            if *b <= minus_one {
                return Err(SslError::Domain(format!(
                    "cusp or worse: beta_{} = {} must exceed -1",
                    i + 1,
                    format_rat(b)
                )));
            }
        }
        let mut normalized = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            if (n - 1.0).abs() > UNIT_NORM_TOL {
                return Err(SslError::Domain(format!(
                    "point {} has norm {n}, not a unit vector",
                    i + 1
                )));
            }
            normalized.push([p[0] / n, p[1] / n, p[2] / n]);
        }
        for i in 0..normalized.len() {
            for j in (i + 1)..normalized.len() {
                if chordal(&normalized[i], &normalized[j]) <= MIN_POINT_SEPARATION {
                    return Err(SslError::Domain(format!(
                        "marked points {} and {} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        if let Some(fv) = &float_view {
            if fv.values.len() != beta.len() || fv.radii.len() != beta.len() {
                return Err(SslError::Domain(
                    "float view length differs from coefficient count".into(),
                ));
            }
            for (i, b) in beta.iter().enumerate() {
                if (to_f64(b) - fv.values[i]).abs() > fv.radii[i] {
                    return Err(SslError::Domain(format!(
                        "float view entry {} disagrees with exact beta beyond its radius",
                        i + 1
                    )));
                }
            }
        }
        Ok(Divisor {
            points: normalized,
            beta,
            float_view,
        })
    }

    /// Divisor with no marked points (the round sphere).
    pub fn empty() -> Self {
        Divisor {
            points: Vec::new(),
            beta: Vec::new(),
            float_view: None,
        }
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn beta(&self) -> &[Rat] {
        &self.beta
    }

    pub fn beta_f64(&self) -> Vec<f64> {
        self.beta.iter().map(to_f64).collect()
    }

    pub fn float_view(&self) -> Option<&FloatView> {
        self.float_view.as_ref()
    }

    pub fn sum_beta(&self) -> Rat {
        self.beta.iter().fold(Rat::zero(), |a, b| a + b)
    }

    /// Same coefficients on rotated points.
    pub fn rotated(&self, r: &[[f64; 3]; 3]) -> Divisor {
        let points = self
            .points
            .iter()
            .map(|p| {
                [
                    r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2],
                    r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2],
                    r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2],
                ]
            })
            .collect();
        Divisor {
            points,
            beta: self.beta.clone(),
            float_view: self.float_view.clone(),
        }
    }

    /// Divisor with the same points and coefficients scaled by an exact factor.
    pub fn scaled(&self, factor: &Rat) -> Divisor {
        Divisor {
            points: self.points.clone(),
            beta: self.beta.iter().map(|b| b * factor).collect(),
            float_view: None,
        }
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let raw: DivisorJson = serde_json::from_str(text)?;
        raw.into_divisor()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DivisorJson::from_divisor(self)).expect("serialize divisor")
    }
}

pub fn chordal(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
}

/// Wire format: `{"points": [[x,y,z],...], "beta": ["p/q",...]}`.
#[derive(Serialize, Deserialize)]
struct DivisorJson {
    points: Vec<[f64; 3]>,
    beta: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    float_view: Option<FloatView>,
}

impl DivisorJson {
    fn into_divisor(self) -> Result<Divisor> {
        let beta = self
            .beta
            .iter()
            .map(|s| parse_rat(s))
            .collect::<Result<Vec<_>>>()?;
        Divisor::with_float_view(self.points, beta, self.float_view)
    }

    fn from_divisor(d: &Divisor) -> Self {
        DivisorJson {
            points: d.points.clone(),
            beta: d.beta.iter().map(format_rat).collect(),
            float_view: d.float_view.clone(),
        }
    }
}

/// Euler characteristic of the pair: χ = 2 + Σβᵢ, kept exact, together with
/// ½χ and ⌊½χ⌋ (the latter defined only when ½χ > 0).
#[derive(Debug, Clone, PartialEq)]
pub struct PairEuler {
    pub chi: Rat,
    pub half_chi: Rat,
    pub floor_half_chi: Option<BigInt>,
}

pub fn chi_pair(d: &Divisor) -> PairEuler {
    let chi = rat(2, 1) + d.sum_beta();
    let half_chi = &chi / rat(2, 1);
    let floor_half_chi = if chi.is_positive() {
        Some(rat::floor_int(&half_chi))
    } else {
        None
    };
    PairEuler {
        chi,
        half_chi,
        floor_half_chi,
    }
}

/// Half-space index set: the 1-based indices i with βᵢ ≤ ½ Σ β_k.
/// These are the sites eligible to host singular bubbles in a collapse.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    pub members: BTreeSet<usize>,
}

pub fn index_set(d: &Divisor) -> IndexSet {
    let threshold = d.sum_beta() / rat(2, 1);
    let members = d
        .beta()
        .iter()
        .enumerate()
        .filter(|(_, b)| **b <= threshold)
        .map(|(i, _)| i + 1)
        .collect();
    IndexSet { members }
}

/// Exact ℓ¹ distance from β to the odd integer lattice, with one minimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeWitness {
    pub distance: Rat,
    pub witness: Vec<BigInt>,
}

impl LatticeWitness {
    pub fn witness_i64(&self) -> Vec<i64> {
        self.witness.iter().map(big_to_i64).collect()
    }
}

/// Exact minimum of Σ|βᵢ − nᵢ| over integer vectors n with Σnᵢ odd.
///
/// Rounds each coordinate to the nearest integer (halves up); if the sum
/// comes out even, flips the single coordinate with the smallest parity-flip
/// surcharge to its second-nearest integer, ties broken by lowest index.
pub fn d1_odd_lattice(d: &Divisor) -> Result<LatticeWitness> {
    if d.is_empty() {
        return Err(SslError::Domain(
            "empty divisor: the odd-sum lattice in dimension 0 is empty".into(),
        ));
    }
    let mut witness: Vec<BigInt> = d.beta().iter().map(round_half_up).collect();
    let mut distance = d
        .beta()
        .iter()
        .zip(&witness)
        .fold(Rat::zero(), |acc, (b, n)| acc + dist_to_int(b, n));
    let sum: BigInt = witness.iter().sum();
    if !is_odd(&sum) {
        // surcharge of flipping coordinate i = (second-nearest dist) - (nearest dist)
        let mut best: Option<(Rat, usize)> = None;
        for (i, b) in d.beta().iter().enumerate() {
            let near = dist_to_int(b, &witness[i]);
            let far = dist_to_int(b, &second_nearest(b));
            let surcharge = far - near;
            match &best {
                Some((s, _)) if *s <= surcharge => {}
                _ => best = Some((surcharge, i)),
            }
        }
        let (surcharge, idx) = best.expect("nonempty divisor");
        witness[idx] = second_nearest(&d.beta()[idx]);
        distance += surcharge;
    }
    debug_assert!(is_odd(&witness.iter().sum::<BigInt>()));
    Ok(LatticeWitness { distance, witness })
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chi_of_empty_divisor_is_two() {
        let e = chi_pair(&Divisor::empty());
        assert_eq!(e.chi, rat(2, 1));
        assert_eq!(e.half_chi, rat(1, 1));
        assert_eq!(e.floor_half_chi, Some(BigInt::from(1)));
    }

    #[test]
    fn chi_direct_sum() {
        let d = divisor_from_strs(&["1/2", "1/2"]);
        assert_eq!(chi_pair(&d).chi, rat(3, 1));
    }

    #[test]
    fn chi_of_reference_divisor() {
        // half chi = 1 + 2k + (alpha-1)/5; for k = 1 this is 3 - 127/640
        let d = reference_divisor(1);
        let e = chi_pair(&d);
        assert_eq!(e.half_chi, rat(3, 1) - rat(127, 640));
        assert_eq!(e.floor_half_chi, Some(BigInt::from(2)));
        let d0 = reference_divisor(0);
        assert_eq!(chi_pair(&d0).floor_half_chi, Some(BigInt::from(0)));
    }

    #[test]
    fn index_set_of_reference_divisor() {
        let f0 = index_set(&reference_divisor(0));
        assert_eq!(f0.members.iter().copied().collect::<Vec<_>>(), vec![1]);
        let f1 = index_set(&reference_divisor(1));
        assert_eq!(f1.members.iter().copied().collect::<Vec<_>>(), vec![1, 3]);
    }

    #[test]
    fn index_set_includes_equality() {
        let d = divisor_from_strs(&["1", "1"]);
        let f = index_set(&d);
        assert_eq!(f.members.iter().copied().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn d1_reference_divisor() {
        for k in [0i64, 1] {
            let w = d1_odd_lattice(&reference_divisor(k)).unwrap();
            assert_eq!(w.distance, rat(1, 1));
            assert_eq!(w.witness_i64(), vec![-1, 2 * k, 0, 2 * k]);
        }
    }

    #[test]
    fn d1_half_integer() {
        let w = d1_odd_lattice(&divisor_from_strs(&["1/2"])).unwrap();
        assert_eq!(w.distance, rat(1, 2));
        assert_eq!(w.witness_i64(), vec![1]);
    }

    #[test]
    fn d1_two_coordinates() {
        // brute force over {-3..3}^2 odd-sum gives 9/10 at (0,1)
        let d = divisor_from_strs(&["1/5", "3/10"]);
        let w = d1_odd_lattice(&d).unwrap();
        assert_eq!(w.distance, rat(9, 10));
        assert_eq!(w.witness_i64(), vec![0, 1]);
        assert_eq!(brute_force_d1(&d), w.distance);
    }

    #[test]
    fn d1_empty_divisor_is_domain_error() {
        assert!(matches!(
            d1_odd_lattice(&Divisor::empty()),
            Err(SslError::Domain(_))
        ));
    }

    #[test]
    fn cusp_rejected() {
        let b = vec![rat(-1, 1)];
        assert!(Divisor::new(generic_points(1), b).is_err());
    }

    #[test]
    fn coincident_points_rejected() {
        let p = generic_points(1)[0];
        assert!(Divisor::new(vec![p, p], vec![rat(1, 2), rat(1, 3)]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = reference_divisor(0);
        let d2 = Divisor::parse_json(&d.to_json()).unwrap();
        assert_eq!(d.beta(), d2.beta());
    }

    #[test]
    fn float_view_must_agree() {
        let p = generic_points(1);
        let fv = FloatView {
            values: vec![0.6],
            radii: vec![1e-3],
        };
        assert!(Divisor::with_float_view(p.clone(), vec![rat(1, 2)], Some(fv)).is_err());
        let fv = FloatView {
            values: vec![0.5],
            radii: vec![1e-12],
        };
        assert!(Divisor::with_float_view(p, vec![rat(1, 2)], Some(fv)).is_ok());
    }

    /// Independent oracle: scan the full integer box of radius 3 around the
    /// rounded vector, keeping odd-sum points only.
    pub(crate) fn brute_force_d1(d: &Divisor) -> Rat {
        let center: Vec<i64> = d
            .beta()
            .iter()
            .map(|b| big_to_i64(&round_half_up(b)))
            .collect();
        let m = center.len();
        let mut best: Option<Rat> = None;
        let mut idx = vec![0i64; m];
        let radius = 3i64;
        loop {
            let n: Vec<i64> = center
                .iter()
                .zip(&idx)
                .map(|(c, o)| c + o - radius)
                .collect();
            if n.iter().sum::<i64>().rem_euclid(2) == 1 {
                let dist = d
                    .beta()
                    .iter()
                    .zip(&n)
                    .fold(Rat::zero(), |acc, (b, ni)| {
                        acc + dist_to_int(b, &BigInt::from(*ni))
                    });
                if best.as_ref().map_or(true, |b| dist < *b) {
                    best = Some(dist);
                }
            }
            let mut k = 0;
            loop {
                if k == m {
                    return best.expect("box nonempty");
                }
                idx[k] += 1;
                if idx[k] <= 2 * radius {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
        }
    }

    fn beta_strategy() -> impl Strategy<Value = Rat> {
        (1i64..=8, -24i64..=24).prop_map(|(q, p)| rat(p, q))
    }

    proptest! {
        #[test]
        fn d1_matches_brute_force(betas in proptest::collection::vec(beta_strategy(), 1..4)) {
            prop_assume!(betas.iter().all(|b| *b > rat(-1,1)));
            let d = Divisor::new(generic_points(betas.len()), betas).unwrap();
            let w = d1_odd_lattice(&d).unwrap();
            // witness distance identity
            let recomputed = d.beta().iter().zip(&w.witness)
                .fold(Rat::zero(), |acc, (b, n)| acc + dist_to_int(b, n));
            prop_assert_eq!(&recomputed, &w.distance);
            // no odd-sum point in the box does better
            prop_assert_eq!(brute_force_d1(&d), w.distance);
        }

        #[test]
        fn d1_permutation_invariant(betas in proptest::collection::vec(beta_strategy(), 2..4)) {
            prop_assume!(betas.iter().all(|b| *b > rat(-1,1)));
            let d = Divisor::new(generic_points(betas.len()), betas.clone()).unwrap();
            let mut rev = betas;
            rev.reverse();
            let dr = Divisor::new(generic_points(rev.len()), rev).unwrap();
            let (a, b) = (d1_odd_lattice(&d).unwrap(), d1_odd_lattice(&dr).unwrap());
            prop_assert_eq!(a.distance, b.distance);
        }

        #[test]
        fn chi_is_linear_in_beta(betas in proptest::collection::vec(beta_strategy(), 0..5)) {
            prop_assume!(betas.iter().all(|b| *b > rat(-1,1)));
            let d = Divisor::new(generic_points(betas.len()), betas).unwrap();
            let e = chi_pair(&d);
            prop_assert_eq!(e.chi - rat(2,1), d.sum_beta());
            // recomputation is exact and idempotent
            prop_assert_eq!(index_set(&d), index_set(&d));
        }
    }
}
