//! Expectation and conditional expectation for `Q_p`-valued random
//! variables on finite spaces.
//!
//! The expectation of `X` is the smallest closed ball containing its
//! support; its radius is the spread. Conditioning on a finite partition
//! assigns one such ball per atom; the resulting [`BallField`] is the full
//! solution set of measurable variables within the conditional spread of
//! `X`, not a single selection.

use num::BigRational;
use thiserror::Error;

use crate::padic::{smallest_ball, Ball, Magnitude, PadicError, PadicNumber, PadicResult};
use crate::space::{Partition, RandomVariableK, RandomVariableR, SpaceError};

/// Errors from expectation operators.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpectationError {
    /// Space or partition mismatch.
    #[error(transparent)]
    Space(#[from] SpaceError),
    /// Precision failure in the underlying arithmetic.
    #[error(transparent)]
    Padic(#[from] PadicError),
}

/// Result alias for expectation operators.
pub type ExpectationResult<T> = Result<T, ExpectationError>;

/// `||X||_inf`: the maximum magnitude over outcomes (no null outcomes, so
/// the essential supremum is the maximum).
pub fn linfty_norm(x: &RandomVariableK) -> Magnitude {
    x.values()
        .iter()
        .map(PadicNumber::abs)
        .max()
        .unwrap_or(Magnitude::Zero)
}

/// `||X - Y||_inf`. Differences below working precision count as zero.
pub fn linfty_distance(x: &RandomVariableK, y: &RandomVariableK) -> ExpectationResult<Magnitude> {
    if x.space() != y.space() {
        return Err(SpaceError::SpaceMismatch.into());
    }
    let mut norm = Magnitude::Zero;
    for (a, b) in x.values().iter().zip(y.values()) {
        match a.dist(b) {
            Ok(d) => norm = norm.max(d),
            Err(PadicError::IndistinguishableAtPrecision) => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(norm)
}

/// Conditional essential supremum of a nonnegative variable given a finite
/// partition: on each atom, the maximum over the atom.
pub fn cond_ess_sup(
    s: &RandomVariableR,
    g: &Partition,
) -> Result<RandomVariableR, SpaceError> {
    if s.space() != g.space() {
        return Err(SpaceError::SpaceMismatch);
    }
    let mut atom_max: Vec<BigRational> = Vec::with_capacity(g.atoms().len());
    for atom in g.atoms() {
        let m = atom
            .iter()
            .map(|&i| s.value(i))
            .max()
            .expect("atoms are nonempty")
            .clone();
        atom_max.push(m);
    }
    let values = (0..s.space().len())
        .map(|i| atom_max[g.atom_of(i)].clone())
        .collect();
    RandomVariableR::new(s.space().clone(), values)
}

/// Conditional L-infinity norm `||X||_G`: the conditional essential
/// supremum of the magnitude of `X`, as an exact-rational variable.
pub fn cond_linfty_norm(
    x: &RandomVariableK,
    g: &Partition,
) -> Result<RandomVariableR, SpaceError> {
    if x.space() != g.space() {
        return Err(SpaceError::SpaceMismatch);
    }
    let p = x.prime();
    let values = x.values().iter().map(|v| v.abs().to_rational(p)).collect();
    let s = RandomVariableR::new(x.space().clone(), values)?;
    cond_ess_sup(&s, g)
}

/// The expectation of `X`: the smallest closed ball containing the support.
pub fn expectation(x: &RandomVariableK) -> PadicResult<Ball> {
    smallest_ball(x.values())
}

/// The spread of `X`: the radius (= diameter) of the expectation ball.
pub fn epsilon(x: &RandomVariableK) -> PadicResult<Magnitude> {
    Ok(expectation(x)?.radius())
}

/// A measurable assignment of one ball per atom of a partition: the
/// concrete representation of a conditional expectation. The set it
/// denotes is all partition-measurable variables whose per-atom constant
/// lies in the atom's ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallField {
    partition: Partition,
    balls: Vec<Ball>,
}

impl BallField {
    /// One ball per atom, in atom order; all balls must share one prime.
    pub fn new(partition: Partition, balls: Vec<Ball>) -> Result<Self, SpaceError> {
        if balls.len() != partition.atoms().len() {
            return Err(SpaceError::PartitionMismatch);
        }
        if let Some(first) = balls.first() {
            let p = first.center().prime();
            if balls.iter().any(|b| b.center().prime() != p) {
                return Err(SpaceError::PartitionMismatch);
            }
        }
        Ok(BallField { partition, balls })
    }

    /// The conditioning partition.
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    /// Ball of atom `a`.
    pub fn ball(&self, a: usize) -> &Ball {
        &self.balls[a]
    }

    /// Balls in atom order.
    pub fn balls(&self) -> &[Ball] {
        &self.balls
    }

    /// Ball at the atom of outcome `i`.
    pub fn ball_at_outcome(&self, i: usize) -> &Ball {
        &self.balls[self.partition.atom_of(i)]
    }

    /// Apply a ball transformation atom by atom.
    pub fn map_balls<F>(&self, mut f: F) -> PadicResult<BallField>
    where
        F: FnMut(usize, &Ball) -> PadicResult<Ball>,
    {
        let balls = self
            .balls
            .iter()
            .enumerate()
            .map(|(a, b)| f(a, b))
            .collect::<PadicResult<Vec<_>>>()?;
        Ok(BallField {
            partition: self.partition.clone(),
            balls,
        })
    }

    /// Per-atom Minkowski sum of two fields over the same partition.
    pub fn minkowski_sum(&self, other: &BallField) -> ExpectationResult<BallField> {
        if self.partition != other.partition {
            return Err(SpaceError::PartitionMismatch.into());
        }
        let balls = self
            .balls
            .iter()
            .zip(&other.balls)
            .map(|(a, b)| a.minkowski_sum(b))
            .collect::<PadicResult<Vec<_>>>()?;
        Ok(BallField {
            partition: self.partition.clone(),
            balls,
        })
    }

    /// The measurable selection that picks each atom's canonical center.
    pub fn select_canonical(&self) -> RandomVariableK {
        let values = (0..self.partition.space().len())
            .map(|i| *self.ball_at_outcome(i).center())
            .collect();
        RandomVariableK::new(self.partition.space().clone(), values)
            .expect("selection is total on the space")
    }

    /// A measurable selection built from one member per atom.
    pub fn select_with<F>(&self, mut pick: F) -> PadicResult<RandomVariableK>
    where
        F: FnMut(usize, &Ball) -> PadicResult<PadicNumber>,
    {
        let mut per_atom = Vec::with_capacity(self.balls.len());
        for (a, ball) in self.balls.iter().enumerate() {
            let member = pick(a, ball)?;
            debug_assert!(ball.contains(&member));
            per_atom.push(member);
        }
        let values = (0..self.partition.space().len())
            .map(|i| per_atom[self.partition.atom_of(i)])
            .collect();
        Ok(RandomVariableK::new(self.partition.space().clone(), values)
            .expect("selection is total on the space"))
    }
}

/// Conditional expectation of `X` given a finite partition: per atom, the
/// smallest ball containing the values of `X` on the atom.
pub fn cond_expectation(
    x: &RandomVariableK,
    g: &Partition,
) -> ExpectationResult<BallField> {
    if x.space() != g.space() {
        return Err(SpaceError::SpaceMismatch.into());
    }
    let mut balls = Vec::with_capacity(g.atoms().len());
    for atom in g.atoms() {
        let pts: Vec<PadicNumber> = atom.iter().map(|&i| *x.value(i)).collect();
        balls.push(smallest_ball(&pts)?);
    }
    Ok(BallField {
        partition: g.clone(),
        balls,
    })
}

/// Conditional spread `eps(X, G)`: outcome-wise radius of the conditional
/// expectation ball of the outcome's atom, as an exact rational.
pub fn cond_epsilon(
    x: &RandomVariableK,
    g: &Partition,
) -> ExpectationResult<RandomVariableR> {
    let field = cond_expectation(x, g)?;
    let p = x.prime();
    let values = (0..x.space().len())
        .map(|i| field.ball_at_outcome(i).radius().to_rational(p))
        .collect();
    Ok(RandomVariableR::new(x.space().clone(), values)?)
}

/// Membership test for the conditional expectation set: `Y` belongs iff it
/// is constant on each atom (at working precision) and each constant lies
/// in the atom's ball.
pub fn member_of_cond_expectation(
    y: &RandomVariableK,
    x: &RandomVariableK,
    g: &Partition,
) -> ExpectationResult<bool> {
    if y.space() != x.space() || x.space() != g.space() {
        return Err(SpaceError::SpaceMismatch.into());
    }
    let field = cond_expectation(x, g)?;
    for (a, atom) in g.atoms().iter().enumerate() {
        let rep = y.value(atom[0]);
        if !atom.iter().all(|&i| y.value(i).eq_at_precision(rep)) {
            return Ok(false);
        }
        if !field.ball(a).contains(rep) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Hausdorff distance between two ball fields over the same partition in
/// the sup metric: the maximum over atoms of the ball Hausdorff distances.
pub fn hausdorff_ballfields(
    f1: &BallField,
    f2: &BallField,
) -> ExpectationResult<Magnitude> {
    if f1.partition != f2.partition {
        return Err(SpaceError::PartitionMismatch.into());
    }
    let mut d = Magnitude::Zero;
    for (a, b) in f1.balls.iter().zip(&f2.balls) {
        d = d.max(a.hausdorff_distance(b)?);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::FiniteProbSpace;
    use num::BigInt;
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

    /// The three-point fixture with X = (1, 0, 0) and G = {{a,b},{c}} whose
    /// conditional expectation is (Z_p, {0}).
    fn remark_fixture() -> (RandomVariableK, Partition) {
        let space = abc();
        let x = RandomVariableK::new(space.clone(), vec![q5(1), q5(0), q5(0)]).unwrap();
        let g = Partition::from_ids(space, &[vec!["a".into(), "b".into()], vec!["c".into()]])
            .unwrap();
        (x, g)
    }

    #[test]
    fn linfty_norm_examples() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let zero = RandomVariableK::new(space.clone(), vec![q5(0), q5(0)]).unwrap();
        assert_eq!(linfty_norm(&zero), Magnitude::Zero);
        let x = RandomVariableK::new(space, vec![q5(5), q5(1)]).unwrap();
        assert_eq!(linfty_norm(&x), Magnitude::Finite(0));
    }

    #[test]
    fn cond_ess_sup_atomwise_max() {
        let space = abc();
        let s = RandomVariableR::new(
            space.clone(),
            vec![rational(3, 1), rational(1, 1), rational(2, 1)],
        )
        .unwrap();
        let g = Partition::from_ids(space.clone(), &[
            vec!["a".into(), "b".into()],
            vec!["c".into()],
        ])
        .unwrap();
        let out = cond_ess_sup(&s, &g).unwrap();
        assert_eq!(
            out.values(),
            &[rational(3, 1), rational(3, 1), rational(2, 1)]
        );

        let trivial = Partition::trivial(space.clone());
        let global = cond_ess_sup(&s, &trivial).unwrap();
        assert!(global.values().iter().all(|v| *v == rational(3, 1)));

        let constant = RandomVariableR::new(space, vec![rational(7, 2); 3]).unwrap();
        let g2 = Partition::trivial(constant.space().clone());
        assert_eq!(cond_ess_sup(&constant, &g2).unwrap(), constant);
    }

    #[test]
    fn expectation_of_uniform_units() {
        let space = FiniteProbSpace::uniform(4).unwrap();
        let x = RandomVariableK::new(space, vec![q5(1), q5(2), q5(3), q5(4)]).unwrap();
        let ball = expectation(&x).unwrap();
        assert!(ball.center().is_zero());
        assert_eq!(ball.radius(), Magnitude::Finite(0));
    }

    #[test]
    fn expectation_of_constant_is_point() {
        let space = FiniteProbSpace::uniform(3).unwrap();
        let x = RandomVariableK::constant(space, q5(7));
        let ball = expectation(&x).unwrap();
        assert!(ball.is_point());
        assert_eq!(epsilon(&x).unwrap(), Magnitude::Zero);
    }

    #[test]
    fn remark_fixture_expectation_and_spread() {
        let (x, g) = remark_fixture();
        let ball = expectation(&x).unwrap();
        assert!(ball.center().is_zero());
        assert_eq!(ball.radius(), Magnitude::Finite(0));
        assert_eq!(epsilon(&x).unwrap(), Magnitude::Finite(0));

        let field = cond_expectation(&x, &g).unwrap();
        assert_eq!(field.ball(0).radius(), Magnitude::Finite(0));
        assert!(field.ball(0).center().is_zero());
        assert!(field.ball(1).is_point());
        assert!(field.ball(1).center().is_zero());

        let eps = cond_epsilon(&x, &g).unwrap();
        assert_eq!(
            eps.values(),
            &[rational(1, 1), rational(1, 1), rational(0, 1)]
        );
    }

    #[test]
    fn cond_expectation_degenerate_partitions() {
        let (x, _) = remark_fixture();
        let discrete = Partition::discrete(x.space().clone());
        let field = cond_expectation(&x, &discrete).unwrap();
        for (i, ball) in field.balls().iter().enumerate() {
            assert!(ball.is_point());
            assert_eq!(ball.center(), x.value(i));
        }
        let eps = cond_epsilon(&x, &discrete).unwrap();
        assert!(eps.values().iter().all(|v| v == &rational(0, 1)));

        let trivial = Partition::trivial(x.space().clone());
        let field = cond_expectation(&x, &trivial).unwrap();
        assert_eq!(field.ball(0), &expectation(&x).unwrap());
    }

    #[test]
    fn membership_characterization() {
        let (x, g) = remark_fixture();
        let field = cond_expectation(&x, &g).unwrap();
        let canonical = field.select_canonical();
        assert!(member_of_cond_expectation(&canonical, &x, &g).unwrap());

        // not measurable: differs inside the atom {a,b}
        let not_measurable =
            RandomVariableK::new(x.space().clone(), vec![q5(1), q5(0), q5(0)]).unwrap();
        assert!(!member_of_cond_expectation(&not_measurable, &x, &g).unwrap());

        // measurable but outside the second atom's point ball
        let outside =
            RandomVariableK::new(x.space().clone(), vec![q5(0), q5(0), q5(1)]).unwrap();
        assert!(!member_of_cond_expectation(&outside, &x, &g).unwrap());
    }

    #[test]
    fn hausdorff_between_fields() {
        let (x, g) = remark_fixture();
        let f1 = cond_expectation(&x, &g).unwrap();
        assert_eq!(hausdorff_ballfields(&f1, &f1).unwrap(), Magnitude::Zero);

        // (Z_5, {0}) vs (5 Z_5, {0}): distance from the larger radius
        let shrunk = f1
            .map_balls(|a, b| {
                if a == 0 {
                    Ball::centered_at_zero(1, 5, 8)
                } else {
                    Ok(*b)
                }
            })
            .unwrap();
        assert_eq!(
            hausdorff_ballfields(&f1, &shrunk).unwrap(),
            Magnitude::Finite(0)
        );
    }
}
