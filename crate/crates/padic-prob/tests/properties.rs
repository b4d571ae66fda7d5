//! Property tests over arbitrary rational inputs: the valuation axioms,
//! the field embedding, ball geometry, and serialization round-trips.

use num::{BigInt, BigRational};
use proptest::prelude::*;

use padic_prob::expectation::linfty_norm;
use padic_prob::padic::{rational_magnitude, smallest_ball, Magnitude, PadicNumber};
use padic_prob::space::{FiniteProbSpace, Partition, RandomVariableK};

const PRECISION: u32 = 12;

fn primes() -> impl Strategy<Value = u64> {
    prop_oneof![Just(2u64), Just(3), Just(5)]
}

/// Rationals `(a/b) * p^e` with `b` coprime to every prime we use.
fn rationals() -> impl Strategy<Value = (i64, i64, i64)> {
    (-50i64..=50, prop_oneof![Just(1i64), Just(7), Just(11)], -3i64..=3)
}

fn to_rational((a, b, e): (i64, i64, i64), p: u64) -> BigRational {
    let q = BigRational::new(BigInt::from(a), BigInt::from(b));
    let pb = BigInt::from(p);
    if e >= 0 {
        q * BigRational::from_integer(pb.pow(e as u32))
    } else {
        q / BigRational::from_integer(pb.pow((-e) as u32))
    }
}

proptest! {
    /// |x+y| <= |x| v |y|, with equality whenever |x| != |y|.
    #[test]
    fn ultrametric_and_isosceles(p in primes(), x in rationals(), y in rationals()) {
        let qx = to_rational(x, p);
        let qy = to_rational(y, p);
        let ax = rational_magnitude(&qx, p);
        let ay = rational_magnitude(&qy, p);
        let sum = rational_magnitude(&(&qx + &qy), p);
        prop_assert!(sum <= ax.max(ay));
        if ax != ay {
            prop_assert_eq!(sum, ax.max(ay));
        }
    }

    /// |xy| = |x| |y| through the embedding.
    #[test]
    fn multiplicative_magnitude(p in primes(), x in rationals(), y in rationals()) {
        let qx = to_rational(x, p);
        let qy = to_rational(y, p);
        let a = PadicNumber::from_big_rational(&qx, p, PRECISION).unwrap();
        let b = PadicNumber::from_big_rational(&qy, p, PRECISION).unwrap();
        let prod = a.mul(&b).unwrap();
        prop_assert_eq!(prod.abs(), a.abs() * b.abs());
        prop_assert_eq!(prod.abs(), rational_magnitude(&(&qx * &qy), p));
    }

    /// The embedding is a ring homomorphism whenever no cancellation digs
    /// below working precision.
    #[test]
    fn embedding_is_additive(p in primes(), x in rationals(), y in rationals()) {
        let qx = to_rational(x, p);
        let qy = to_rational(y, p);
        let a = PadicNumber::from_big_rational(&qx, p, PRECISION).unwrap();
        let b = PadicNumber::from_big_rational(&qy, p, PRECISION).unwrap();
        let direct = PadicNumber::from_big_rational(&(&qx + &qy), p, PRECISION).unwrap();
        match a.add(&b) {
            Ok(sum) => prop_assert!(sum.eq_at_precision(&direct)),
            Err(_) => {
                // the exact sum must really be deep below the summand scale
                let mag = rational_magnitude(&(&qx + &qy), p);
                prop_assert!(mag < a.abs().max(b.abs()));
            }
        }
    }

    /// Nonzero values invert: x * x^(-1) = 1.
    #[test]
    fn inverse_round_trip(p in primes(), x in rationals()) {
        let qx = to_rational(x, p);
        prop_assume!(qx != BigRational::from_integer(BigInt::from(0)));
        let a = PadicNumber::from_big_rational(&qx, p, PRECISION).unwrap();
        let one = a.mul(&a.inv().unwrap()).unwrap();
        prop_assert_eq!(one.valuation(), Some(0));
        prop_assert_eq!(one.mantissa(), Some(1));
    }

    /// Magnitude order agrees with the real values it denotes.
    #[test]
    fn magnitude_order_embedding(p in primes(), e1 in -10i64..=10, e2 in -10i64..=10) {
        let m1 = Magnitude::Finite(e1);
        let m2 = Magnitude::Finite(e2);
        prop_assert_eq!(m1.cmp(&m2), m1.to_rational(p).cmp(&m2.to_rational(p)));
        prop_assert!(Magnitude::Zero < m1);
    }

    /// The smallest enclosing ball contains every point, some pair attains
    /// the radius, and no candidate support center does strictly better.
    #[test]
    fn smallest_ball_is_minimal(p in primes(), pts in prop::collection::vec(rationals(), 1..6)) {
        let values: Vec<PadicNumber> = pts
            .iter()
            .map(|&t| PadicNumber::from_big_rational(&to_rational(t, p), p, PRECISION).unwrap())
            .collect();
        let ball = smallest_ball(&values).unwrap();
        for v in &values {
            prop_assert!(ball.contains(v));
        }
        // any candidate center from the support must reach the radius
        for c in &values {
            let worst = values
                .iter()
                .map(|v| match c.dist(v) {
                    Ok(d) => d,
                    Err(_) => Magnitude::Zero,
                })
                .max()
                .unwrap();
            prop_assert!(worst >= ball.radius());
        }
    }

    /// ||cX||_inf = |c| ||X||_inf.
    #[test]
    fn norm_scales(p in primes(), c in rationals(), pts in prop::collection::vec(rationals(), 1..6)) {
        let space = FiniteProbSpace::uniform(pts.len()).unwrap();
        let qc = to_rational(c, p);
        let scale = PadicNumber::from_big_rational(&qc, p, PRECISION).unwrap();
        let values: Vec<PadicNumber> = pts
            .iter()
            .map(|&t| PadicNumber::from_big_rational(&to_rational(t, p), p, PRECISION).unwrap())
            .collect();
        let x = RandomVariableK::new(space.clone(), values.clone()).unwrap();
        let scaled_values: Vec<PadicNumber> =
            values.iter().map(|v| v.mul(&scale).unwrap()).collect();
        let cx = RandomVariableK::new(space, scaled_values).unwrap();
        prop_assert_eq!(linfty_norm(&cx), scale.abs() * linfty_norm(&x));
    }

    /// Partitions survive the id-list serialization round-trip.
    #[test]
    fn partition_roundtrip(n in 2usize..8, assignment in prop::collection::vec(0usize..4, 2..8)) {
        let n = n.min(assignment.len());
        let space = FiniteProbSpace::uniform(n).unwrap();
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for (i, &slot) in assignment.iter().enumerate().take(n) {
            groups.entry(slot % n).or_default().push(i);
        }
        let part = Partition::new(space.clone(), groups.into_values().collect()).unwrap();
        let again = Partition::from_ids(space, &part.atoms_as_ids()).unwrap();
        prop_assert_eq!(again, part);
    }
}

/// The digit law of truncated Haar samples, at the sample count used in the
/// operation contract.
#[test]
fn haar_digit_law_large_sample() {
    let p = 5u64;
    let precision = 8u32;
    let count = 10_000usize;
    let samples = padic_prob::space::haar_sample(0, p, precision, count, 20240717).unwrap();
    assert!(samples
        .iter()
        .all(|x| x.abs() <= padic_prob::padic::Magnitude::Finite(0)));
    let n = count as f64;
    let q = 1.0 / p as f64;
    let sigma = (n * q * (1.0 - q)).sqrt();
    for pos in 0..precision as i64 {
        let mut counts = vec![0usize; p as usize];
        for x in &samples {
            counts[x.digit(pos).unwrap_or(0) as usize] += 1;
        }
        for &c in &counts {
            assert!(
                (c as f64 - n * q).abs() <= 5.0 * sigma,
                "digit frequency at position {pos} outside 5 sigma"
            );
        }
    }
}
