//! Independent brute-force evaluations of the definitional formulas, used
//! to certify the closed forms in [`crate::padic`] and
//! [`crate::expectation`].
//!
//! These routines never reuse the closed-form routes they certify: spreads
//! come from explicit min-max enumeration over support candidates, Hausdorff
//! distances from exhaustive digit-truncated member enumeration, and the
//! conditional essential supremum from floating-point power means. They may
//! be exponential in instance size and are meant for desk-scale instances.

use num::ToPrimitive;

use crate::expectation::{cond_expectation, ExpectationError, ExpectationResult};
use crate::padic::{Ball, Magnitude, PadicError, PadicNumber, PadicResult};
use crate::space::{Partition, RandomVariableK, RandomVariableR, SpaceError};

fn dist_floor(a: &PadicNumber, b: &PadicNumber) -> Magnitude {
    // distances below working precision count as zero
    match a.dist(b) {
        Ok(d) => d,
        Err(_) => Magnitude::Zero,
    }
}

/// Largest distance from `c` to any value of `x` over the given outcomes.
fn max_dist_from(c: &PadicNumber, x: &RandomVariableK, outcomes: &[usize]) -> Magnitude {
    outcomes
        .iter()
        .map(|&i| dist_floor(c, x.value(i)))
        .max()
        .unwrap_or(Magnitude::Zero)
}

/// Definitional spread: the minimum over support candidates `c` of the
/// worst-case distance `max_w |X(w) - c|`. Restricting candidates to the
/// support is sound because the minimizing ball contains the support and
/// any support point attains the diameter.
pub fn oracle_epsilon(x: &RandomVariableK) -> Magnitude {
    let all: Vec<usize> = (0..x.space().len()).collect();
    all.iter()
        .map(|&i| max_dist_from(x.value(i), x, &all))
        .min()
        .expect("spaces are nonempty")
}

/// Minimizing support center and its worst-case distance, for certifying
/// enclosing balls. Deterministic: the first support point attaining the
/// minimum wins.
pub fn oracle_enclosing_center(
    x: &RandomVariableK,
    outcomes: &[usize],
) -> (PadicNumber, Magnitude) {
    let mut best: Option<(PadicNumber, Magnitude)> = None;
    for &i in outcomes {
        let c = *x.value(i);
        let r = max_dist_from(&c, x, outcomes);
        if best.as_ref().is_none_or(|(_, br)| r < *br) {
            best = Some((c, r));
        }
    }
    best.expect("outcome set is nonempty")
}

/// Single floating-point power mean `E[S^q | G]^(1/q)` per outcome,
/// evaluated stably in the scale of each atom's maximum.
pub fn power_mean_cond(
    s: &RandomVariableR,
    g: &Partition,
    q: f64,
) -> Result<Vec<f64>, SpaceError> {
    if s.space() != g.space() {
        return Err(SpaceError::SpaceMismatch);
    }
    let space = s.space();
    let mut per_atom = Vec::with_capacity(g.atoms().len());
    for atom in g.atoms() {
        let mass = space.mass(atom).to_f64().expect("finite rational");
        let values: Vec<f64> = atom
            .iter()
            .map(|&i| s.value(i).to_f64().expect("finite rational"))
            .collect();
        let m = values.iter().cloned().fold(0.0, f64::max);
        if m == 0.0 {
            per_atom.push(0.0);
            continue;
        }
        let mut sum = 0.0;
        for (&i, &v) in atom.iter().zip(&values) {
            let w = space.prob(i).to_f64().expect("finite rational") / mass;
            sum += w * (v / m).powf(q);
        }
        per_atom.push(m * sum.powf(1.0 / q));
    }
    Ok((0..space.len()).map(|i| per_atom[g.atom_of(i)]).collect())
}

/// Definitional conditional essential supremum, evaluated numerically as
/// the limit of power means: starting at exponent `p_max`, the exponent is
/// doubled until successive evaluations agree within `tol` relatively. The
/// stopping rule is reliable when distinct values have a ratio margin away
/// from one.
pub fn oracle_cond_ess_sup(
    s: &RandomVariableR,
    g: &Partition,
    p_max: f64,
    tol: f64,
) -> Result<Vec<f64>, SpaceError> {
    let mut q = p_max.max(1.0);
    let mut prev = power_mean_cond(s, g, q)?;
    for _ in 0..64 {
        q *= 2.0;
        let next = power_mean_cond(s, g, q)?;
        let converged = prev.iter().zip(&next).all(|(&a, &b)| {
            let scale = a.abs().max(b.abs());
            scale == 0.0 || (a - b).abs() <= 0.5 * tol * scale
        });
        prev = next;
        if converged {
            break;
        }
    }
    Ok(prev)
}

/// All members of a ball truncated at digit position `depth`: the finite
/// set of canonical representatives modulo `p^depth` inside the ball.
pub fn ball_members(ball: &Ball, depth: i64, p: u64, precision: u32) -> PadicResult<Vec<PadicNumber>> {
    let span = match ball.radius() {
        Magnitude::Zero => 0,
        Magnitude::Finite(k) => (depth - k).max(0),
    };
    assert!(
        span as u32 <= precision,
        "enumeration depth exceeds the available digits"
    );
    let count = (p as u128).pow(span as u32);
    assert!(count <= 1 << 20, "truncated member enumeration too large");
    let mut members = Vec::with_capacity(count as usize);
    for m in 0..count {
        let t = PadicNumber::from_integer(m as i64, p, precision)?;
        members.push(ball.member_at_offset(&t)?);
    }
    Ok(members)
}

/// Exact Hausdorff distance between the digit-truncated member sets of two
/// balls: all members are enumerated up to digit position `depth` and the
/// sup-inf distances are taken literally. Agrees with the closed form
/// whenever `depth` exceeds both radius exponents.
pub fn oracle_hausdorff(b: &Ball, c: &Ball, depth: i64) -> PadicResult<Magnitude> {
    let p = b.center().prime();
    if c.center().prime() != p {
        return Err(PadicError::InvalidParameter("balls must share the prime"));
    }
    let precision = b.center().precision().max(c.center().precision());
    let bs = ball_members(b, depth, p, precision)?;
    let cs = ball_members(c, depth, p, precision)?;
    let one_sided = |from: &[PadicNumber], to: &[PadicNumber]| -> Magnitude {
        from.iter()
            .map(|a| {
                to.iter()
                    .map(|b| dist_floor(a, b))
                    .min()
                    .expect("member sets are nonempty")
            })
            .max()
            .expect("member sets are nonempty")
    };
    Ok(one_sided(&bs, &cs).max(one_sided(&cs, &bs)))
}

/// Certifies that the per-atom conditional expectation balls are minimal in
/// the definitional sense: on each atom, no candidate constant achieves a
/// smaller atom norm than the computed radius, and the support is covered.
///
/// The candidate set is the atom's support values (whose minimum attains
/// the true spread) plus one canonical point in each strictly smaller
/// sub-ball of the achieved ball, which rules out any strictly smaller
/// enclosing ball.
pub fn oracle_cond_expectation_minimality(
    x: &RandomVariableK,
    g: &Partition,
) -> ExpectationResult<bool> {
    if x.space() != g.space() {
        return Err(ExpectationError::Space(SpaceError::SpaceMismatch));
    }
    let field = cond_expectation(x, g)?;
    let p = x.prime();
    for (a, atom) in g.atoms().iter().enumerate() {
        let ball = field.ball(a);
        // support must be covered
        if !atom.iter().all(|&i| ball.contains(x.value(i))) {
            return Ok(false);
        }
        // independent minimum over support candidates
        let (center, oracle_radius) = oracle_enclosing_center(x, atom);
        if ball.radius() != oracle_radius {
            return Ok(false);
        }
        // no strictly smaller sub-ball admits a better constant
        if let Magnitude::Finite(k) = oracle_radius {
            let sub = Ball::new(center, Magnitude::Finite(k))?;
            for d in 0..p {
                let t = PadicNumber::from_integer(d as i64, p, center.precision().max(1))?;
                let cand = sub.member_at_offset(&t)?;
                if max_dist_from(&cand, x, atom) < oracle_radius {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteProbSpace;
    use num::{BigInt, BigRational};
    use std::sync::Arc;

    fn rational(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn q5(a: i64) -> PadicNumber {
        PadicNumber::from_integer(a, 5, 8).unwrap()
    }

    fn abc() -> Arc<FiniteProbSpace> {
        FiniteProbSpace::new(vec![
            ("a".into(), rational(1, 3)),
            ("b".into(), rational(1, 3)),
            ("c".into(), rational(1, 3)),
        ])
        .unwrap()
    }

    #[test]
    fn oracle_epsilon_examples() {
        let space = abc();
        let constant = RandomVariableK::constant(space.clone(), q5(7));
        assert_eq!(oracle_epsilon(&constant), Magnitude::Zero);
        let remark = RandomVariableK::new(space, vec![q5(1), q5(0), q5(0)]).unwrap();
        assert_eq!(oracle_epsilon(&remark), Magnitude::Finite(0));
    }

    #[test]
    fn float_oracle_matches_atom_maxima() {
        let space = abc();
        let s = RandomVariableR::new(
            space.clone(),
            vec![rational(3, 1), rational(1, 1), rational(2, 1)],
        )
        .unwrap();
        let g = Partition::from_ids(space, &[vec!["a".into(), "b".into()], vec!["c".into()]])
            .unwrap();
        let est = oracle_cond_ess_sup(&s, &g, 64.0, 1e-6).unwrap();
        for (e, want) in est.iter().zip([3.0, 3.0, 2.0]) {
            assert!((e - want).abs() <= 1e-6 * want, "{e} vs {want}");
        }
        let exact = power_mean_cond(
            &RandomVariableR::new(s.space().clone(), vec![rational(4, 1); 3]).unwrap(),
            &Partition::trivial(s.space().clone()),
            64.0,
        )
        .unwrap();
        assert!(exact.iter().all(|&v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn power_mean_monotone_in_exponent() {
        let space = abc();
        let s = RandomVariableR::new(
            space.clone(),
            vec![rational(3, 1), rational(1, 1), rational(2, 1)],
        )
        .unwrap();
        let g = Partition::trivial(space);
        let low = power_mean_cond(&s, &g, 8.0).unwrap();
        let high = power_mean_cond(&s, &g, 64.0).unwrap();
        for (l, h) in low.iter().zip(&high) {
            assert!(h >= l);
        }
    }

    #[test]
    fn discrete_hausdorff_examples() {
        let z = Ball::centered_at_zero(0, 5, 8).unwrap();
        let five_z = Ball::centered_at_zero(1, 5, 8).unwrap();
        assert_eq!(oracle_hausdorff(&z, &five_z, 2).unwrap(), Magnitude::Finite(0));
        assert_eq!(oracle_hausdorff(&z, &z, 2).unwrap(), Magnitude::Zero);
        let shifted = Ball::new(
            PadicNumber::from_rational(1, 5, 5, 8).unwrap(),
            Magnitude::Finite(0),
        )
        .unwrap();
        assert_eq!(
            oracle_hausdorff(&z, &shifted, 2).unwrap(),
            Magnitude::Finite(-1)
        );
    }

    #[test]
    fn minimality_on_remark_fixture() {
        let space = abc();
        let x = RandomVariableK::new(space.clone(), vec![q5(1), q5(0), q5(0)]).unwrap();
        let g = Partition::from_ids(space.clone(), &[
            vec!["a".into(), "b".into()],
            vec!["c".into()],
        ])
        .unwrap();
        assert!(oracle_cond_expectation_minimality(&x, &g).unwrap());
        let discrete = Partition::discrete(space);
        assert!(oracle_cond_expectation_minimality(&x, &discrete).unwrap());
    }
}
