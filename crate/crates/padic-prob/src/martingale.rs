//! Martingales for `Q_p`-valued targets: a sequence is a martingale when
//! every term is a measurable selection from the conditional expectation of
//! one fixed target. Includes the classical constructions (sums and
//! products of independent variables, harmonic functions of Markov chains),
//! optional sampling, and convergence traces.

use num::{BigRational, One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expectation::{
    cond_expectation, linfty_distance, member_of_cond_expectation, BallField, ExpectationError,
};
use crate::padic::{smallest_ball, Ball, Magnitude, PadicError, PadicNumber, PadicResult};
use crate::space::{
    Filtration, FiniteProbSpace, Partition, ProductSpace, RandomVariableK, SpaceError,
    StoppingTime,
};

/// Errors from martingale construction and sampling.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MartingaleError {
    /// Space or partition mismatch.
    #[error(transparent)]
    Space(#[from] SpaceError),
    /// Precision failure in the underlying arithmetic.
    #[error(transparent)]
    Padic(#[from] PadicError),
    /// A summand's expectation ball misses zero.
    #[error("zero is not in the expectation ball of summand {index}")]
    ZeroNotInExpectation {
        /// Offending summand.
        index: usize,
    },
    /// A factor's expectation ball misses one.
    #[error("one is not in the expectation ball of factor {index}")]
    OneNotInExpectation {
        /// Offending factor.
        index: usize,
    },
    /// The state function fails the harmonicity test for the chain.
    #[error("the state function is not harmonic for the chain")]
    NotHarmonic,
    /// Malformed Markov chain data.
    #[error("invalid transition matrix: {0}")]
    InvalidTransitionMatrix(String),
    /// A stopping time takes a value past the last selection.
    #[error("stopping time exceeds the martingale horizon")]
    HorizonExceeded,
    /// A proposed selection is not in the target's conditional expectation.
    #[error("selection at time {time} is not in the conditional expectation of the target")]
    NotAMartingale {
        /// First offending time index.
        time: usize,
    },
}

impl From<ExpectationError> for MartingaleError {
    fn from(e: ExpectationError) -> Self {
        match e {
            ExpectationError::Space(s) => MartingaleError::Space(s),
            ExpectationError::Padic(p) => MartingaleError::Padic(p),
        }
    }
}

/// How a single member is chosen from each conditional-expectation ball.
/// Any choice yields a martingale; none is canonical, so the policy is an
/// explicit, reproducible tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionPolicy {
    /// The ball's canonical (digit-truncated) center.
    CanonicalCenter,
    /// The target's value at the first outcome of the atom.
    FirstSupportPoint,
    /// A seed-randomized member of the ball.
    SeededMember(u64),
    /// Selections supplied by the caller.
    Explicit,
}

/// Select one member per atom of a conditional-expectation field.
fn select(
    field: &BallField,
    target: &RandomVariableK,
    policy: SelectionPolicy,
    level: usize,
) -> PadicResult<RandomVariableK> {
    match policy {
        SelectionPolicy::CanonicalCenter | SelectionPolicy::Explicit => {
            Ok(field.select_canonical())
        }
        SelectionPolicy::FirstSupportPoint => {
            let partition = field.partition();
            field.select_with(|a, _| Ok(*target.value(partition.atoms()[a][0])))
        }
        SelectionPolicy::SeededMember(seed) => {
            let p = target.prime();
            field.select_with(|a, ball: &Ball| {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed ^ (level as u64).wrapping_mul(0x9e3779b9) ^ a as u64);
                let prec = ball.center().precision().max(1);
                let digits: Vec<u64> = (0..prec).map(|_| rng.gen_range(0..p)).collect();
                let t = PadicNumber::from_digits(&digits, 0, p, prec)?;
                ball.member_at_offset(&t)
            })
        }
    }
}

/// A martingale: a filtration, a target in `L^inf`, and one measurable
/// selection from the target's conditional expectation per time index.
#[derive(Debug, Clone)]
pub struct Martingale {
    filtration: Filtration,
    target: RandomVariableK,
    selections: Vec<RandomVariableK>,
    policy: SelectionPolicy,
}

impl Martingale {
    /// Assemble a martingale from explicit parts, verifying the defining
    /// membership at every time.
    pub fn from_parts(
        filtration: Filtration,
        target: RandomVariableK,
        selections: Vec<RandomVariableK>,
        policy: SelectionPolicy,
    ) -> Result<Self, MartingaleError> {
        if target.space() != filtration.space() {
            return Err(SpaceError::SpaceMismatch.into());
        }
        if selections.len() != filtration.levels().len() {
            return Err(SpaceError::InvalidFiltration(format!(
                "{} selections for {} filtration levels",
                selections.len(),
                filtration.levels().len()
            ))
            .into());
        }
        for (n, sel) in selections.iter().enumerate() {
            if !member_of_cond_expectation(sel, &target, filtration.level(n))? {
                return Err(MartingaleError::NotAMartingale { time: n });
            }
        }
        Ok(Martingale {
            filtration,
            target,
            selections,
            policy,
        })
    }

    /// Martingale of conditional expectations of a fixed target along a
    /// filtration, under the given selection policy.
    pub fn from_target(
        target: RandomVariableK,
        filtration: Filtration,
        policy: SelectionPolicy,
    ) -> Result<Self, MartingaleError> {
        if target.space() != filtration.space() {
            return Err(SpaceError::SpaceMismatch.into());
        }
        let mut selections = Vec::with_capacity(filtration.levels().len());
        for (n, level) in filtration.levels().iter().enumerate() {
            let field = cond_expectation(&target, level)?;
            selections.push(select(&field, &target, policy, n)?);
        }
        Martingale::from_parts(filtration, target, selections, policy)
    }

    /// The filtration.
    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    /// The target the selections track.
    pub fn target(&self) -> &RandomVariableK {
        &self.target
    }

    /// Selection at time `n`.
    pub fn selection(&self, n: usize) -> &RandomVariableK {
        &self.selections[n]
    }

    /// All selections in time order.
    pub fn selections(&self) -> &[RandomVariableK] {
        &self.selections
    }

    /// The policy tag the selections were built under.
    pub fn policy(&self) -> SelectionPolicy {
        self.policy
    }

    /// Largest time index.
    pub fn horizon(&self) -> usize {
        self.selections.len() - 1
    }

    /// The stopped variable `X_T(w) = X_{T(w)}(w)`, verified to lie in the
    /// conditional expectation of the target given the stopping sigma-field.
    pub fn optional_sample(
        &self,
        t: &StoppingTime,
    ) -> Result<RandomVariableK, MartingaleError> {
        let space = self.filtration.space();
        if t.values().len() != space.len() {
            return Err(SpaceError::SpaceMismatch.into());
        }
        if t.values().iter().any(|&n| n > self.horizon()) {
            return Err(MartingaleError::HorizonExceeded);
        }
        let values = (0..space.len())
            .map(|i| *self.selections[t.value(i)].value(i))
            .collect();
        let sampled = RandomVariableK::new(space.clone(), values)?;
        let sigma = self.filtration.sigma_of(t)?;
        if !member_of_cond_expectation(&sampled, &self.target, &sigma)? {
            return Err(MartingaleError::NotAMartingale {
                time: self.horizon(),
            });
        }
        Ok(sampled)
    }

    /// The trace `n -> ||X_n - X||_inf`; differences below working
    /// precision report as zero.
    pub fn convergence_trace(&self) -> Result<Vec<Magnitude>, MartingaleError> {
        self.selections
            .iter()
            .map(|sel| linfty_distance(sel, &self.target).map_err(Into::into))
            .collect()
    }

    /// First time the selection's magnitude drops to `threshold` or below
    /// (the horizon when it never does). This is a stopping time because
    /// each selection is measurable at its own level.
    pub fn hitting_time(&self, threshold: Magnitude) -> Result<StoppingTime, MartingaleError> {
        let space = self.filtration.space();
        let values = (0..space.len())
            .map(|i| {
                (0..=self.horizon())
                    .find(|&n| self.selections[n].value(i).abs() <= threshold)
                    .unwrap_or(self.horizon())
            })
            .collect();
        Ok(self.filtration.stopping_time(values)?)
    }
}

/// Partial sums of independent summands with `0` in every expectation ball,
/// on the product space with the coordinate filtration. The target is the
/// full sum and the selection at time `n` is the sum of the first `n+1`
/// summands.
pub fn sum_martingale(summands: &[RandomVariableK]) -> Result<Martingale, MartingaleError> {
    build_cumulative(summands, false)
}

/// Partial products of independent factors with `1` in every expectation
/// ball, on the product space with the coordinate filtration.
pub fn product_martingale(factors: &[RandomVariableK]) -> Result<Martingale, MartingaleError> {
    build_cumulative(factors, true)
}

fn build_cumulative(
    parts: &[RandomVariableK],
    multiplicative: bool,
) -> Result<Martingale, MartingaleError> {
    assert!(!parts.is_empty(), "need at least one summand or factor");
    let p = parts[0].prime();
    for (k, y) in parts.iter().enumerate() {
        let ball = smallest_ball(y.values())?;
        let unit = if multiplicative {
            PadicNumber::one(p, y.value(0).precision())?
        } else {
            PadicNumber::zero(p, y.value(0).precision())?
        };
        if !ball.contains(&unit) {
            return Err(if multiplicative {
                MartingaleError::OneNotInExpectation { index: k }
            } else {
                MartingaleError::ZeroNotInExpectation { index: k }
            });
        }
    }
    let product = ProductSpace::new(parts.iter().map(|y| y.space().clone()).collect())?;
    let lifted: Vec<RandomVariableK> = parts
        .iter()
        .enumerate()
        .map(|(k, y)| product.lift_k(k, y))
        .collect::<Result<_, _>>()?;
    let mut partials = Vec::with_capacity(lifted.len());
    let mut acc = lifted[0].clone();
    partials.push(acc.clone());
    for y in &lifted[1..] {
        acc = if multiplicative {
            acc.mul(y)??
        } else {
            acc.add(y)??
        };
        partials.push(acc.clone());
    }
    let target = partials.last().expect("nonempty").clone();
    let filtration = product.coordinate_filtration();
    Martingale::from_parts(filtration, target, partials, SelectionPolicy::Explicit)
}

/// A finite-state Markov chain with exact rational transition rows and an
/// initial distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    states: Vec<String>,
    transition: Vec<Vec<BigRational>>,
    initial: Vec<BigRational>,
}

impl MarkovChain {
    /// Validate state names, row stochasticity, and the initial law.
    pub fn new(
        states: Vec<String>,
        transition: Vec<Vec<BigRational>>,
        initial: Vec<BigRational>,
    ) -> Result<Self, MartingaleError> {
        let n = states.len();
        if n == 0 {
            return Err(MartingaleError::InvalidTransitionMatrix(
                "no states".into(),
            ));
        }
        if transition.len() != n || initial.len() != n {
            return Err(MartingaleError::InvalidTransitionMatrix(
                "dimension mismatch".into(),
            ));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != n {
                return Err(MartingaleError::InvalidTransitionMatrix(format!(
                    "row {i} has wrong length"
                )));
            }
            if row.iter().any(|q| q < &BigRational::zero()) {
                return Err(MartingaleError::InvalidTransitionMatrix(format!(
                    "row {i} has a negative entry"
                )));
            }
            if row.iter().sum::<BigRational>() != BigRational::one() {
                return Err(MartingaleError::InvalidTransitionMatrix(format!(
                    "row {i} does not sum to 1"
                )));
            }
        }
        if initial.iter().any(|q| q < &BigRational::zero())
            || initial.iter().sum::<BigRational>() != BigRational::one()
        {
            return Err(MartingaleError::InvalidTransitionMatrix(
                "initial distribution is not a probability vector".into(),
            ));
        }
        Ok(MarkovChain {
            states,
            transition,
            initial,
        })
    }

    /// State names.
    pub fn states(&self) -> &[String] {
        &self.states
    }

    /// Transition probability from `i` to `j`.
    pub fn prob(&self, i: usize, j: usize) -> &BigRational {
        &self.transition[i][j]
    }
}

/// True when `f(i)` lies in the smallest ball containing the one-step
/// values `{f(j) : P(i,j) > 0}` for every state `i`.
pub fn harmonic_check(f: &[PadicNumber], chain: &MarkovChain) -> Result<bool, MartingaleError> {
    let n = chain.states.len();
    if f.len() != n {
        return Err(MartingaleError::InvalidTransitionMatrix(
            "state function has wrong length".into(),
        ));
    }
    for i in 0..n {
        let support: Vec<PadicNumber> = (0..n)
            .filter(|&j| chain.transition[i][j] > BigRational::zero())
            .map(|j| f[j])
            .collect();
        let ball = smallest_ball(&support)?;
        if !ball.contains(&f[i]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The martingale `f(Z_n)` of a harmonic function along the chain stopped
/// at the horizon, realized exactly on the finite space of positive-
/// probability paths with the path-generated filtration.
pub fn stopped_chain_martingale(
    chain: &MarkovChain,
    f: &[PadicNumber],
    horizon: usize,
) -> Result<Martingale, MartingaleError> {
    if !harmonic_check(f, chain)? {
        return Err(MartingaleError::NotHarmonic);
    }
    let n = chain.states.len();
    // enumerate positive-probability paths of length horizon+1
    let mut paths: Vec<(Vec<usize>, BigRational)> = (0..n)
        .filter(|&s| chain.initial[s] > BigRational::zero())
        .map(|s| (vec![s], chain.initial[s].clone()))
        .collect();
    for _ in 0..horizon {
        let mut next = Vec::with_capacity(paths.len() * n);
        for (path, weight) in &paths {
            let last = *path.last().expect("paths are nonempty");
            for j in 0..n {
                let step = &chain.transition[last][j];
                if step > &BigRational::zero() {
                    let mut longer = path.clone();
                    longer.push(j);
                    next.push((longer, weight * step));
                }
            }
        }
        paths = next;
    }
    let entries = paths
        .iter()
        .map(|(path, weight)| {
            let id = path
                .iter()
                .map(|&s| chain.states[s].clone())
                .collect::<Vec<_>>()
                .join(">");
            (id, weight.clone())
        })
        .collect();
    let space = FiniteProbSpace::new(entries)?;

    let levels = (0..=horizon)
        .map(|t| {
            let mut groups: std::collections::BTreeMap<Vec<usize>, Vec<usize>> =
                std::collections::BTreeMap::new();
            for (i, (path, _)) in paths.iter().enumerate() {
                groups.entry(path[..=t].to_vec()).or_default().push(i);
            }
            Partition::new(space.clone(), groups.into_values().collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let filtration = Filtration::new(levels)?;

    let selections = (0..=horizon)
        .map(|t| {
            let values = paths.iter().map(|(path, _)| f[path[t]]).collect();
            RandomVariableK::new(space.clone(), values)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let target = selections.last().expect("nonempty").clone();
    Martingale::from_parts(filtration, target, selections, SelectionPolicy::Explicit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::BigInt;

    fn rational(a: i64, b: i64) -> BigRational {
        BigRational::new(BigInt::from(a), BigInt::from(b))
    }

    fn qp(a: i64, p: u64) -> PadicNumber {
        PadicNumber::from_integer(a, p, 8).unwrap()
    }

    /// Uniform two-point space carrying the values `{0, c}`.
    fn two_point_var(c: i64, p: u64, tag: &str) -> RandomVariableK {
        let space = FiniteProbSpace::new(vec![
            (format!("{tag}0"), rational(1, 2)),
            (format!("{tag}1"), rational(1, 2)),
        ])
        .unwrap();
        RandomVariableK::new(space, vec![qp(0, p), qp(c, p)]).unwrap()
    }

    fn three_state_chain() -> MarkovChain {
        MarkovChain::new(
            vec!["s0".into(), "s1".into(), "s2".into()],
            vec![
                vec![rational(1, 1), rational(0, 1), rational(0, 1)],
                vec![rational(1, 2), rational(0, 1), rational(1, 2)],
                vec![rational(0, 1), rational(0, 1), rational(1, 1)],
            ],
            vec![rational(0, 1), rational(1, 1), rational(0, 1)],
        )
        .unwrap()
    }

    #[test]
    fn trivial_filtration_selections_are_constant() {
        let space = FiniteProbSpace::uniform(3).unwrap();
        let x = RandomVariableK::new(
            space.clone(),
            vec![qp(1, 5), qp(0, 5), qp(0, 5)],
        )
        .unwrap();
        let levels = vec![Partition::trivial(space.clone()); 3];
        let filtration = Filtration::new(levels).unwrap();
        let m = Martingale::from_target(x.clone(), filtration, SelectionPolicy::CanonicalCenter)
            .unwrap();
        for n in 0..=2 {
            let sel = m.selection(n);
            assert!(sel.values().iter().all(|v| v.is_zero()));
        }
    }

    #[test]
    fn discrete_filtration_reproduces_target() {
        let space = FiniteProbSpace::uniform(3).unwrap();
        let x = RandomVariableK::new(
            space.clone(),
            vec![qp(1, 5), qp(2, 5), qp(3, 5)],
        )
        .unwrap();
        let levels = vec![Partition::discrete(space.clone()); 2];
        let filtration = Filtration::new(levels).unwrap();
        let m = Martingale::from_target(x.clone(), filtration, SelectionPolicy::CanonicalCenter)
            .unwrap();
        for n in 0..=1 {
            assert_eq!(m.selection(n), &x);
        }
        let trace = m.convergence_trace().unwrap();
        assert!(trace.iter().all(Magnitude::is_zero));
    }

    #[test]
    fn sum_martingale_single_summand() {
        let y = two_point_var(5, 5, "y");
        let m = sum_martingale(std::slice::from_ref(&y)).unwrap();
        assert_eq!(m.horizon(), 0);
        assert_eq!(m.selection(0), m.target());
    }

    #[test]
    fn sum_martingale_rejects_nonzero_center() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let y = RandomVariableK::new(space, vec![qp(1, 5), qp(6, 5)]).unwrap();
        // expectation ball is 1 + 5 Z_5, which misses zero
        assert_eq!(
            sum_martingale(&[y]).unwrap_err(),
            MartingaleError::ZeroNotInExpectation { index: 0 }
        );
    }

    #[test]
    fn product_martingale_all_ones() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let one = RandomVariableK::constant(space, qp(1, 5));
        let m = product_martingale(&[one.clone(), one]).unwrap();
        let trace = m.convergence_trace().unwrap();
        assert!(trace.iter().all(Magnitude::is_zero));
    }

    #[test]
    fn product_martingale_rejects_center_without_one() {
        let space = FiniteProbSpace::uniform(2).unwrap();
        let y = RandomVariableK::new(space, vec![qp(5, 5), qp(10, 5)]).unwrap();
        assert_eq!(
            product_martingale(&[y]).unwrap_err(),
            MartingaleError::OneNotInExpectation { index: 0 }
        );
    }

    #[test]
    fn harmonic_depends_on_the_prime() {
        let chain = three_state_chain();
        let f5: Vec<_> = [0, 1, 2].iter().map(|&a| qp(a, 5)).collect();
        assert!(harmonic_check(&f5, &chain).unwrap());
        let f2: Vec<_> = [0, 1, 2].iter().map(|&a| qp(a, 2)).collect();
        assert!(!harmonic_check(&f2, &chain).unwrap());
    }

    #[test]
    fn stopped_chain_is_a_martingale() {
        let chain = three_state_chain();
        let f: Vec<_> = [0, 1, 2].iter().map(|&a| qp(a, 5)).collect();
        let m = stopped_chain_martingale(&chain, &f, 2).unwrap();
        assert_eq!(m.horizon(), 2);

        let f2: Vec<_> = [0, 1, 2].iter().map(|&a| qp(a, 2)).collect();
        assert_eq!(
            stopped_chain_martingale(&chain, &f2, 2).unwrap_err(),
            MartingaleError::NotHarmonic
        );

        let zero_horizon = stopped_chain_martingale(&chain, &f, 0).unwrap();
        assert_eq!(zero_horizon.horizon(), 0);
        let trace = zero_horizon.convergence_trace().unwrap();
        assert!(trace.iter().all(Magnitude::is_zero));
    }

    #[test]
    fn optional_sample_constant_time() {
        let summands: Vec<_> = (0..3)
            .map(|k| {
                let space = FiniteProbSpace::new(vec![
                    (format!("y{k}a"), rational(1, 2)),
                    (format!("y{k}b"), rational(1, 2)),
                ])
                .unwrap();
                RandomVariableK::new(
                    space,
                    vec![
                        qp(0, 5),
                        PadicNumber::from_integer(5i64.pow(k), 5, 8).unwrap(),
                    ],
                )
                .unwrap()
            })
            .collect();
        let m = sum_martingale(&summands).unwrap();
        let n = 1;
        let t = m
            .filtration()
            .stopping_time(vec![n; m.filtration().space().len()])
            .unwrap();
        let sampled = m.optional_sample(&t).unwrap();
        assert_eq!(&sampled, m.selection(n));

        let horizon_t = m
            .filtration()
            .stopping_time(vec![m.horizon(); m.filtration().space().len()])
            .unwrap();
        let at_horizon = m.optional_sample(&horizon_t).unwrap();
        assert_eq!(&at_horizon, m.selection(m.horizon()));
    }

    #[test]
    fn hitting_time_sampling_holds() {
        let summands: Vec<_> = (0..3)
            .map(|k| {
                let space = FiniteProbSpace::new(vec![
                    (format!("y{k}a"), rational(1, 2)),
                    (format!("y{k}b"), rational(1, 2)),
                ])
                .unwrap();
                RandomVariableK::new(
                    space,
                    vec![
                        qp(0, 5),
                        PadicNumber::from_integer(5i64.pow(k), 5, 8).unwrap(),
                    ],
                )
                .unwrap()
            })
            .collect();
        let m = sum_martingale(&summands).unwrap();
        let t = m.hitting_time(Magnitude::Finite(1)).unwrap();
        // optional_sample verifies the membership postcondition internally
        m.optional_sample(&t).unwrap();
    }

    #[test]
    fn sum_martingale_tail_decay() {
        // Y_k supported on 5^k Z_5 with norm 5^(-k)
        let summands: Vec<_> = (0..4)
            .map(|k| {
                let space = FiniteProbSpace::new(vec![
                    (format!("y{k}a"), rational(1, 2)),
                    (format!("y{k}b"), rational(1, 2)),
                ])
                .unwrap();
                RandomVariableK::new(
                    space,
                    vec![
                        qp(0, 5),
                        PadicNumber::from_integer(5i64.pow(k), 5, 12).unwrap(),
                    ],
                )
                .unwrap()
            })
            .collect();
        let m = sum_martingale(&summands).unwrap();
        let trace = m.convergence_trace().unwrap();
        for (n, norm) in trace.iter().enumerate() {
            if n < m.horizon() {
                assert!(*norm <= Magnitude::Finite(n as i64 + 1));
            }
        }
        assert_eq!(trace.last(), Some(&Magnitude::Zero));
        for w in trace.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}
