//! Seeded verification suite: every law the library promises, run as a
//! named check over randomly generated finite instances and certified
//! against the independent oracles.
//!
//! Instances are generated deterministically from the configured seed, so
//! reports are reproducible byte for byte, and each failure carries the
//! offending instance in schema form for replay.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expectation::{
    cond_epsilon, cond_ess_sup, cond_expectation, cond_linfty_norm, epsilon, expectation,
    hausdorff_ballfields, member_of_cond_expectation, BallField, ExpectationError,
};
use crate::martingale::{
    harmonic_check, stopped_chain_martingale, MarkovChain, Martingale, MartingaleError,
    SelectionPolicy,
};
use crate::oracle::{
    ball_members, oracle_cond_ess_sup, oracle_cond_expectation_minimality, oracle_enclosing_center,
    oracle_epsilon, oracle_hausdorff,
};
use crate::padic::{
    rational_magnitude, smallest_ball, Ball, BallRelation, Magnitude, PadicError, PadicNumber,
};
use crate::space::{
    haar_sample, Filtration, FiniteProbSpace, Partition, ProductSpace, RandomVariableK,
    RandomVariableR, StoppingTime,
};

/// Optional deliberate defect, used to prove the suite catches violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    /// Faithful closed forms.
    #[default]
    None,
    /// Shrink every expectation radius by one exponent step.
    WrongRadius,
}

impl Mutation {
    /// Parse a CLI mutation name.
    pub fn parse(name: &str) -> Option<Mutation> {
        match name {
            "none" => Some(Mutation::None),
            "wrong-radius" => Some(Mutation::WrongRadius),
            _ => None,
        }
    }
}

/// Configuration for a verification run.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    /// Base seed; every instance seed derives from it.
    pub seed: u64,
    /// Instances per check per prime.
    pub instances: u32,
    /// Primes to instantiate.
    pub primes: Vec<u64>,
    /// Largest sample-space size generated.
    pub max_outcomes: usize,
    /// Working precision.
    pub precision: u32,
    /// Deliberate defect to inject (for harness self-tests).
    pub mutation: Mutation,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 42,
            instances: 200,
            primes: vec![2, 3, 5],
            max_outcomes: 16,
            precision: 12,
            mutation: Mutation::None,
        }
    }
}

/// A failing instance, serialized for replay.
#[derive(Debug, Clone)]
pub struct Failure {
    /// The derived instance seed.
    pub seed: u64,
    /// The prime the instance was built over.
    pub prime: u64,
    /// What went wrong.
    pub detail: String,
    /// The instance in schema form.
    pub instance: serde_json::Value,
}

/// Aggregate result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    /// Stable name of the law being checked.
    pub name: &'static str,
    /// Passing instances.
    pub passes: u64,
    /// Failing instances.
    pub failures: u64,
    /// Instances unresolvable at working precision (full cancellation).
    pub skips: u64,
    /// First failure, for replay.
    pub first_failure: Option<Failure>,
}

/// Full report of a verification run.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    /// Base seed of the run.
    pub seed: u64,
    /// Instances per check per prime.
    pub instances: u32,
    /// Primes instantiated.
    pub primes: Vec<u64>,
    /// Outcome per check, sorted by name.
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    /// True when no check failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.failures == 0)
    }

    /// Names of checks with failures.
    pub fn failed_names(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.failures > 0)
            .map(|c| c.name)
            .collect()
    }

    /// Machine-readable report.
    pub fn to_json(&self) -> serde_json::Value {
        let checks: Vec<serde_json::Value> = self
            .checks
            .iter()
            .map(|c| {
                let mut entry = serde_json::json!({
                    "name": c.name,
                    "passes": c.passes,
                    "failures": c.failures,
                    "skips": c.skips,
                });
                if let Some(f) = &c.first_failure {
                    entry["first_failure"] = serde_json::json!({
                        "seed": f.seed,
                        "p": f.prime,
                        "detail": f.detail,
                        "instance": f.instance,
                    });
                }
                entry
            })
            .collect();
        serde_json::json!({
            "seed": self.seed,
            "instances": self.instances,
            "primes": self.primes,
            "checks": checks,
            "passes": self.checks.iter().map(|c| c.passes).sum::<u64>(),
            "failures": self.checks.iter().map(|c| c.failures).sum::<u64>(),
            "failed_checks": self.failed_names(),
        })
    }
}

/// Deterministic per-instance seed derivation (splitmix-style).
fn derive_seed(base: u64, check: u64, prime: u64, instance: u64) -> u64 {
    let mut z = base
        .wrapping_add(check.wrapping_mul(0x9e3779b97f4a7c15))
        .wrapping_add(prime.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(instance.wrapping_mul(0x94d049bb133111eb));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic instance generator for one check run.
struct Gen {
    rng: ChaCha8Rng,
    p: u64,
    precision: u32,
    max_outcomes: usize,
}

/// A `Q_p`-valued variable together with the exact rationals behind it, so
/// sums and products can be rebuilt exactly with no additive precision
/// loss.
#[derive(Clone)]
struct RatVar {
    var: RandomVariableK,
    rats: Vec<BigRational>,
}

impl RatVar {
    fn from_rats(
        space: &Arc<FiniteProbSpace>,
        rats: Vec<BigRational>,
        p: u64,
        precision: u32,
    ) -> RatVar {
        let values = rats
            .iter()
            .map(|q| PadicNumber::from_big_rational(q, p, precision).expect("valid parameters"))
            .collect();
        RatVar {
            var: RandomVariableK::new(space.clone(), values).expect("total assignment"),
            rats,
        }
    }

    fn add(&self, other: &RatVar, p: u64, precision: u32) -> RatVar {
        let rats: Vec<BigRational> = self
            .rats
            .iter()
            .zip(&other.rats)
            .map(|(a, b)| a + b)
            .collect();
        RatVar::from_rats(self.var.space(), rats, p, precision)
    }

    fn mul(&self, other: &RatVar, p: u64, precision: u32) -> RatVar {
        let rats: Vec<BigRational> = self
            .rats
            .iter()
            .zip(&other.rats)
            .map(|(a, b)| a * b)
            .collect();
        RatVar::from_rats(self.var.space(), rats, p, precision)
    }

    /// Exact `||self - other||_inf` from the rational backing.
    fn linfty_dist(&self, other: &RatVar, p: u64) -> Magnitude {
        self.rats
            .iter()
            .zip(&other.rats)
            .map(|(a, b)| rational_magnitude(&(a - b), p))
            .max()
            .unwrap_or(Magnitude::Zero)
    }
}

impl Gen {
    fn new(seed: u64, p: u64, precision: u32, max_outcomes: usize) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            p,
            precision,
            max_outcomes,
        }
    }

    fn space(&mut self) -> Arc<FiniteProbSpace> {
        let n = self.rng.gen_range(2..=self.max_outcomes);
        self.space_of(n)
    }

    fn space_of(&mut self, n: usize) -> Arc<FiniteProbSpace> {
        let weights: Vec<i64> = (0..n).map(|_| self.rng.gen_range(1..=6)).collect();
        let total: i64 = weights.iter().sum();
        FiniteProbSpace::new(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    (
                        format!("w{i}"),
                        BigRational::new(BigInt::from(w), BigInt::from(total)),
                    )
                })
                .collect(),
        )
        .expect("weights are positive and sum to 1")
    }

    /// A random exact rational with p-adic magnitude spread over several
    /// scales: `(a/b) * p^e` with `b` coprime to `p`.
    fn rational_value(&mut self) -> BigRational {
        let a = self.rng.gen_range(-9i64..=9);
        if a == 0 {
            return BigRational::zero();
        }
        let denoms: [i64; 5] = [1, 1, 2, 3, 7];
        let mut b = denoms[self.rng.gen_range(0..denoms.len())];
        if b % self.p as i64 == 0 {
            b = 1;
        }
        let e = self.rng.gen_range(-2i64..=3);
        let q = BigRational::new(BigInt::from(a), BigInt::from(b));
        let pb = BigInt::from(self.p);
        let scale = if e >= 0 {
            BigRational::from_integer(pb.pow(e as u32))
        } else {
            BigRational::new(BigInt::one(), pb.pow((-e) as u32))
        };
        q * scale
    }

    fn var(&mut self, space: &Arc<FiniteProbSpace>) -> RatVar {
        let rats = (0..space.len()).map(|_| self.rational_value()).collect();
        RatVar::from_rats(space, rats, self.p, self.precision)
    }

    /// A variable constant on each atom of the partition.
    fn measurable_var(&mut self, g: &Partition) -> RatVar {
        let per_atom: Vec<BigRational> =
            (0..g.atoms().len()).map(|_| self.rational_value()).collect();
        let rats = (0..g.space().len())
            .map(|i| per_atom[g.atom_of(i)].clone())
            .collect();
        RatVar::from_rats(g.space(), rats, self.p, self.precision)
    }

    /// A nonnegative rational variable.
    fn var_r(&mut self, space: &Arc<FiniteProbSpace>) -> RandomVariableR {
        let values = (0..space.len())
            .map(|_| {
                let v = self.rng.gen_range(0i64..=40);
                BigRational::new(BigInt::from(v), BigInt::from(self.rng.gen_range(1i64..=4)))
            })
            .collect();
        RandomVariableR::new(space.clone(), values).expect("nonnegative by construction")
    }

    /// A nonnegative integer variable; distinct values are automatically
    /// separated by a relative margin of at least 1/200 (for the float
    /// oracle).
    fn margin_var_r(&mut self, space: &Arc<FiniteProbSpace>) -> RandomVariableR {
        let values = (0..space.len())
            .map(|_| BigRational::from_integer(BigInt::from(self.rng.gen_range(0i64..=200))))
            .collect();
        RandomVariableR::new(space.clone(), values).expect("nonnegative by construction")
    }

    fn partition(&mut self, space: &Arc<FiniteProbSpace>) -> Partition {
        let n = space.len();
        let k = self.rng.gen_range(1..=n);
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            groups.entry(self.rng.gen_range(0..k)).or_default().push(i);
        }
        Partition::new(space.clone(), groups.into_values().collect())
            .expect("groups partition the space")
    }

    /// A pair `(coarse, fine)` with the coarse sigma-field contained in the
    /// fine one, built by merging atoms of the fine partition.
    fn refining_pair(&mut self, space: &Arc<FiniteProbSpace>) -> (Partition, Partition) {
        let fine = self.partition(space);
        let m = self.rng.gen_range(1..=fine.atoms().len());
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for atom in fine.atoms() {
            groups
                .entry(self.rng.gen_range(0..m))
                .or_default()
                .extend(atom.iter().copied());
        }
        let coarse = Partition::new(space.clone(), groups.into_values().collect())
            .expect("merged atoms partition the space");
        (coarse, fine)
    }

    /// A refining filtration of the given depth, splitting one atom per
    /// step when possible.
    fn filtration(&mut self, space: &Arc<FiniteProbSpace>, depth: usize) -> Filtration {
        let mut levels = vec![self.partition(space)];
        for _ in 1..depth {
            let prev = levels.last().expect("nonempty");
            let mut atoms: Vec<Vec<usize>> = prev.atoms().to_vec();
            let candidates: Vec<usize> = atoms
                .iter()
                .enumerate()
                .filter(|(_, a)| a.len() > 1)
                .map(|(i, _)| i)
                .collect();
            if !candidates.is_empty() {
                let target = candidates[self.rng.gen_range(0..candidates.len())];
                let atom = atoms.remove(target);
                let cut = self.rng.gen_range(1..atom.len());
                atoms.push(atom[..cut].to_vec());
                atoms.push(atom[cut..].to_vec());
            }
            levels.push(
                Partition::new(space.clone(), atoms).expect("split atoms partition the space"),
            );
        }
        Filtration::new(levels).expect("each level refines the previous")
    }

    /// A random stopping time for the filtration: march through time and
    /// stop whole atoms with probability 1/2, everything by the horizon.
    fn stopping_time(&mut self, filtration: &Filtration) -> StoppingTime {
        let n = filtration.space().len();
        let horizon = filtration.horizon();
        let mut values = vec![usize::MAX; n];
        for t in 0..=horizon {
            for atom in filtration.level(t).atoms() {
                if atom.iter().all(|&i| values[i] == usize::MAX)
                    && (t == horizon || self.rng.gen_bool(0.5))
                {
                    for &i in atom {
                        values[i] = t;
                    }
                }
            }
        }
        filtration
            .stopping_time(values)
            .expect("atom-wise stopping is measurable")
    }
}

/// Serialize an instance (space plus named variables and partitions) in
/// schema form for replay.
fn instance_json(
    space: &Arc<FiniteProbSpace>,
    p: u64,
    precision: u32,
    vars: &[(&str, &RandomVariableK)],
    partitions: &[(&str, &Partition)],
) -> serde_json::Value {
    let outcomes: Vec<serde_json::Value> = space
        .outcome_ids()
        .iter()
        .enumerate()
        .map(|(i, id)| serde_json::json!({"id": id, "prob": space.prob(i).to_string()}))
        .collect();
    let vars: BTreeMap<String, BTreeMap<String, String>> = vars
        .iter()
        .map(|(name, var)| {
            let table = space
                .outcome_ids()
                .iter()
                .enumerate()
                .map(|(i, id)| (id.clone(), var.value(i).to_string()))
                .collect();
            (name.to_string(), table)
        })
        .collect();
    let partitions: BTreeMap<String, Vec<Vec<String>>> = partitions
        .iter()
        .map(|(name, g)| (name.to_string(), g.atoms_as_ids()))
        .collect();
    serde_json::json!({
        "p": p,
        "precision": precision,
        "outcomes": outcomes,
        "vars": vars,
        "partitions": partitions,
    })
}

/// A check either certifies the law on the instance or reports that the
/// instance cannot be resolved at working precision (full cancellation is
/// a hard error under the precision policy, never a silent zero).
#[derive(Clone, Copy, PartialEq, Eq)]
enum Checked {
    Pass,
    Skip,
}

type CheckResult = Result<Checked, String>;

trait PrecisionLimited {
    fn precision_limited(&self) -> bool;
}

impl PrecisionLimited for PadicError {
    fn precision_limited(&self) -> bool {
        matches!(
            self,
            PadicError::PrecisionUnderflow { .. } | PadicError::IndistinguishableAtPrecision
        )
    }
}

impl PrecisionLimited for ExpectationError {
    fn precision_limited(&self) -> bool {
        matches!(self, ExpectationError::Padic(p) if p.precision_limited())
    }
}

/// Unwrap, skipping the instance when working precision ran out and
/// failing the check on any other error.
macro_rules! try_prec {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => {
                if err.precision_limited() {
                    return Ok(Checked::Skip);
                }
                return Err(err.to_string());
            }
        }
    };
}

struct Check {
    name: &'static str,
    run: fn(&mut Gen, Mutation) -> CheckResult,
}

fn expectation_under(x: &RandomVariableK, mutation: Mutation) -> Result<Ball, String> {
    let ball = expectation(x).map_err(|e| e.to_string())?;
    match (mutation, ball.radius()) {
        (Mutation::WrongRadius, Magnitude::Finite(k)) => {
            Ball::new(*ball.center(), Magnitude::Finite(k + 1)).map_err(|e| e.to_string())
        }
        _ => Ok(ball),
    }
}

fn fail(detail: impl Into<String>) -> CheckResult {
    Err(detail.into())
}

/// Set equality of two ball fields at working precision.
fn fields_same_at_precision(a: &BallField, b: &BallField) -> bool {
    a.partition() == b.partition()
        && a.balls()
            .iter()
            .zip(b.balls())
            .all(|(x, y)| x.same_set_at_precision(y))
}

// ---------------------------------------------------------------------------
// valuation and ball layer
// ---------------------------------------------------------------------------

fn check_valuation_axioms(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let y = g.var(&space);
    for i in 0..space.len() {
        let (a, b) = (x.var.value(i), y.var.value(i));
        let sum_mag = rational_magnitude(&(&x.rats[i] + &y.rats[i]), g.p);
        if sum_mag > a.abs().max(b.abs()) {
            return fail(format!("|x+y| > |x| v |y| at outcome {i}"));
        }
        if a.abs() != b.abs() && sum_mag != a.abs().max(b.abs()) {
            return fail(format!("isosceles equality fails at outcome {i}"));
        }
        let prod = a.mul(b).map_err(|e| e.to_string())?;
        if prod.abs() != a.abs() * b.abs() {
            return fail(format!("|xy| != |x||y| at outcome {i}"));
        }
    }
    Ok(Checked::Pass)
}

fn check_rational_embedding(g: &mut Gen, _m: Mutation) -> CheckResult {
    for _ in 0..8 {
        let qa = g.rational_value();
        let qb = g.rational_value();
        let a = PadicNumber::from_big_rational(&qa, g.p, g.precision).map_err(|e| e.to_string())?;
        let b = PadicNumber::from_big_rational(&qb, g.p, g.precision).map_err(|e| e.to_string())?;
        let direct = PadicNumber::from_big_rational(&(&qa + &qb), g.p, g.precision)
            .map_err(|e| e.to_string())?;
        match a.add(&b) {
            Ok(sum) => {
                if !sum.eq_at_precision(&direct) {
                    return fail(format!("embedding not additive on {qa} + {qb}"));
                }
            }
            // cancellation beyond working precision: the exact sum must
            // really be deep in the ball scale
            Err(_) => {
                let mag = rational_magnitude(&(&qa + &qb), g.p);
                if mag > Magnitude::Finite(0) {
                    return fail(format!("spurious underflow on {qa} + {qb}"));
                }
            }
        }
        let direct_prod = PadicNumber::from_big_rational(&(&qa * &qb), g.p, g.precision)
            .map_err(|e| e.to_string())?;
        let prod = a.mul(&b).map_err(|e| e.to_string())?;
        if !prod.eq_at_precision(&direct_prod) {
            return fail(format!("embedding not multiplicative on {qa} * {qb}"));
        }
    }
    Ok(Checked::Pass)
}

/// Two random balls from random support sets, compared member by member.
fn check_ball_trichotomy(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let b1 = smallest_ball(g.var(&space).var.values()).map_err(|e| e.to_string())?;
    let b2 = smallest_ball(g.var(&space).var.values()).map_err(|e| e.to_string())?;
    let rel = try_prec!(b1.relation(&b2));
    // one digit past the coarser radius captures the pair's structure
    let depth = [b1.radius(), b2.radius()]
        .iter()
        .filter_map(Magnitude::exponent)
        .max()
        .map_or(0, |k| k + 1);
    let m1 = ball_members(&b1, depth, g.p, g.precision).map_err(|e| e.to_string())?;
    let m2 = ball_members(&b2, depth, g.p, g.precision).map_err(|e| e.to_string())?;
    let in_2 = m1.iter().filter(|x| b2.contains(x)).count();
    let in_1 = m2.iter().filter(|x| b1.contains(x)).count();
    let ok = match rel {
        BallRelation::Disjoint => in_2 == 0 && in_1 == 0,
        BallRelation::Equal => b1 == b2 && in_2 == m1.len() && in_1 == m2.len(),
        BallRelation::FirstInsideSecond => in_2 == m1.len() && in_1 < m2.len(),
        BallRelation::SecondInsideFirst => in_1 == m2.len() && in_2 < m1.len(),
    };
    if !ok {
        return fail(format!(
            "relation {rel:?} contradicts membership counts {in_2}/{} and {in_1}/{}",
            m1.len(),
            m2.len()
        ));
    }
    Ok(Checked::Pass)
}

fn check_ball_affine(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let ball = smallest_ball(x.var.values()).map_err(|e| e.to_string())?;
    let scale = PadicNumber::from_big_rational(&g.rational_value(), g.p, g.precision)
        .map_err(|e| e.to_string())?;
    let shift = PadicNumber::from_big_rational(&g.rational_value(), g.p, g.precision)
        .map_err(|e| e.to_string())?;
    let image = try_prec!(ball.affine(&scale, &shift));
    if scale.is_zero() {
        if !(image.is_point() && image.center().eq_at_precision(&shift)) {
            return fail("zero scale must collapse to the shift point");
        }
        return Ok(Checked::Pass);
    }
    if image.radius() != scale.abs() * ball.radius() {
        return fail("affine image radius is not |k| * r");
    }
    let depth = match ball.radius() {
        Magnitude::Zero => return Ok(Checked::Pass),
        Magnitude::Finite(k) => k + 1,
    };
    let members = ball_members(&ball, depth, g.p, g.precision).map_err(|e| e.to_string())?;
    let mut mapped = Vec::with_capacity(members.len());
    for x in &members {
        mapped.push(try_prec!(x.mul(&scale).and_then(|y| y.add(&shift))));
    }
    for y in &mapped {
        if !image.contains(y) {
            return fail("affine image misses a mapped member");
        }
    }
    let hull = smallest_ball(&mapped).map_err(|e| e.to_string())?;
    if !hull.same_set_at_precision(&image) {
        return fail("affine image differs from the hull of mapped members");
    }
    Ok(Checked::Pass)
}

fn check_ball_product(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let b1 = smallest_ball(g.var(&space).var.values()).map_err(|e| e.to_string())?;
    let b2 = smallest_ball(g.var(&space).var.values()).map_err(|e| e.to_string())?;
    let prod = b1.product(&b2).map_err(|e| e.to_string())?;
    let members_of = |b: &Ball| -> Result<Vec<PadicNumber>, String> {
        match b.radius() {
            Magnitude::Zero => Ok(vec![*b.center()]),
            Magnitude::Finite(k) => {
                ball_members(b, k + 1, g.p, g.precision).map_err(|e| e.to_string())
            }
        }
    };
    let m1 = members_of(&b1)?;
    let m2 = members_of(&b2)?;
    let mut products = Vec::with_capacity(m1.len() * m2.len());
    for a in &m1 {
        for b in &m2 {
            let ab = a.mul(b).map_err(|e| e.to_string())?;
            if !prod.contains(&ab) {
                return fail("product ball misses a member product");
            }
            products.push(ab);
        }
    }
    let hull = smallest_ball(&products).map_err(|e| e.to_string())?;
    if !hull.same_set_at_precision(&prod) {
        return fail("product ball differs from the hull of member products");
    }
    Ok(Checked::Pass)
}

fn check_hausdorff_oracle(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let balls: Vec<Ball> = (0..3)
        .map(|_| smallest_ball(g.var(&space).var.values()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    // agreement with the enumeration oracle one digit past the pair's radii
    let pair_depth = |a: &Ball, b: &Ball| {
        [a.radius(), b.radius()]
            .iter()
            .filter_map(Magnitude::exponent)
            .max()
            .map_or(0, |k| k + 1)
    };
    for a in &balls {
        for b in &balls {
            let fast = try_prec!(a.hausdorff_distance(b));
            let depth = pair_depth(a, b);
            let slow = oracle_hausdorff(a, b, depth).map_err(|e| e.to_string())?;
            if fast != slow {
                return fail(format!(
                    "closed form {} disagrees with enumeration {} at depth {depth}",
                    fast.repr(g.p),
                    slow.repr(g.p)
                ));
            }
            if fast != try_prec!(b.hausdorff_distance(a)) {
                return fail("hausdorff distance is not symmetric");
            }
            if (fast == Magnitude::Zero) != (a == b) {
                return fail("hausdorff distance vanishes iff balls are equal");
            }
            for c in &balls {
                let ac = try_prec!(a.hausdorff_distance(c));
                let bc = try_prec!(b.hausdorff_distance(c));
                if ac > fast.max(bc) {
                    return fail("hausdorff distance violates the ultrametric triangle");
                }
            }
        }
    }
    Ok(Checked::Pass)
}

// ---------------------------------------------------------------------------
// expectation layer
// ---------------------------------------------------------------------------

fn check_expectation_smallest_ball(g: &mut Gen, m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let ball = expectation_under(&x.var, m)?;
    let all: Vec<usize> = (0..space.len()).collect();
    let (oracle_center, oracle_radius) = oracle_enclosing_center(&x.var, &all);
    if ball.radius() != oracle_radius {
        return fail(format!(
            "radius {} differs from oracle minimum {}",
            ball.radius().repr(g.p),
            oracle_radius.repr(g.p)
        ));
    }
    if epsilon(&x.var).map_err(|e| e.to_string())? != oracle_epsilon(&x.var) {
        return fail("spread differs from the definitional minimum");
    }
    for v in x.var.values() {
        if !ball.contains(v) {
            return fail("expectation ball misses a support point");
        }
    }
    if !ball.contains(&oracle_center) {
        return fail("expectation ball misses the oracle center");
    }
    Ok(Checked::Pass)
}

fn check_expectation_continuity(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    // mix independent draws and nearby perturbations
    let y = if g.rng.gen_bool(0.5) {
        g.var(&space)
    } else {
        let noise = g.var(&space);
        let scale = BigRational::new(BigInt::one(), BigInt::from(g.p).pow(2));
        let rats = x
            .rats
            .iter()
            .zip(&noise.rats)
            .map(|(a, n)| a + n * &scale)
            .collect();
        RatVar::from_rats(&space, rats, g.p, g.precision)
    };
    let ex = expectation(&x.var).map_err(|e| e.to_string())?;
    let ey = expectation(&y.var).map_err(|e| e.to_string())?;
    let dh = try_prec!(ex.hausdorff_distance(&ey));
    if dh > x.linfty_dist(&y, g.p) {
        return fail("d_H(E[X], E[Y]) exceeds ||X - Y||_inf");
    }
    Ok(Checked::Pass)
}

fn check_expectation_affine(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let qk = g.rational_value();
    let qb = g.rational_value();
    let scale =
        PadicNumber::from_big_rational(&qk, g.p, g.precision).map_err(|e| e.to_string())?;
    let shift =
        PadicNumber::from_big_rational(&qb, g.p, g.precision).map_err(|e| e.to_string())?;
    let mapped_rats: Vec<BigRational> = x.rats.iter().map(|r| r * &qk + &qb).collect();
    let mapped = RatVar::from_rats(&space, mapped_rats, g.p, g.precision);
    let lhs = expectation(&mapped.var).map_err(|e| e.to_string())?;
    let base = expectation(&x.var).map_err(|e| e.to_string())?;
    let rhs = try_prec!(base.affine(&scale, &shift));
    if !lhs.same_set_at_precision(&rhs) {
        return fail("E[kX+b] differs from k E[X] + b");
    }
    Ok(Checked::Pass)
}

fn check_expectation_independence(g: &mut Gen, _m: Mutation) -> CheckResult {
    let na = g.rng.gen_range(2..=4);
    let nb = g.rng.gen_range(2..=4);
    let sa = g.space_of(na);
    let sb = g.space_of(nb);
    let xa = g.var(&sa);
    let xb = g.var(&sb);
    let product = ProductSpace::new(vec![sa.clone(), sb.clone()]).map_err(|e| e.to_string())?;
    let lift = |f: usize, v: &RatVar| -> RatVar {
        let rats = (0..product.space().len())
            .map(|i| v.rats[product.coords(i)[f]].clone())
            .collect();
        RatVar::from_rats(product.space(), rats, g.p, g.precision)
    };
    let x = lift(0, &xa);
    let y = lift(1, &xb);

    // independent: sum expectation is the Minkowski sum of the factor balls
    let sum = x.add(&y, g.p, g.precision);
    let e_sum = expectation(&sum.var).map_err(|e| e.to_string())?;
    let ex = expectation(&x.var).map_err(|e| e.to_string())?;
    let ey = expectation(&y.var).map_err(|e| e.to_string())?;
    let minkowski = try_prec!(ex.minkowski_sum(&ey));
    if !e_sum.same_set_at_precision(&minkowski) {
        return fail("independent sum expectation is not the Minkowski sum");
    }

    // independent: product expectation is the product ball
    let prod = x.mul(&y, g.p, g.precision);
    let e_prod = expectation(&prod.var).map_err(|e| e.to_string())?;
    let ball_prod = try_prec!(ex.product(&ey));
    if !e_prod.same_set_at_precision(&ball_prod) {
        return fail("independent product expectation is not the product ball");
    }

    // dependent: only the inclusion E[X+Y] within E[X] + E[Y]
    let space = g.space();
    let u = g.var(&space);
    let w = g.var(&space);
    let uw = u.add(&w, g.p, g.precision);
    let e_uw = expectation(&uw.var).map_err(|e| e.to_string())?;
    let eu = expectation(&u.var).map_err(|e| e.to_string())?;
    let ew = expectation(&w.var).map_err(|e| e.to_string())?;
    let mink = try_prec!(eu.minkowski_sum(&ew));
    match try_prec!(e_uw.relation(&mink)) {
        BallRelation::Equal | BallRelation::FirstInsideSecond => Ok(Checked::Pass),
        rel => fail(format!("E[X+Y] not contained in E[X]+E[Y]: {rel:?}")),
    }
}

// ---------------------------------------------------------------------------
// conditional essential supremum and conditional norm
// ---------------------------------------------------------------------------

fn check_cond_ess_sup_dominates(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let s = g.var_r(&space);
    let part = g.partition(&space);
    let sup = cond_ess_sup(&s, &part).map_err(|e| e.to_string())?;
    if !s.le_pointwise(&sup).map_err(|e| e.to_string())? {
        return fail("S exceeds its conditional essential supremum");
    }
    Ok(Checked::Pass)
}

fn check_cond_ess_sup_least_bound(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let s = g.var_r(&space);
    let part = g.partition(&space);
    let sup = cond_ess_sup(&s, &part).map_err(|e| e.to_string())?;
    // any measurable dominator of S dominates the sup
    let slack: Vec<BigRational> = (0..part.atoms().len())
        .map(|_| BigRational::from_integer(BigInt::from(g.rng.gen_range(0i64..=5))))
        .collect();
    let t_values: Vec<BigRational> = (0..space.len())
        .map(|i| sup.value(i) + &slack[part.atom_of(i)])
        .collect();
    let t = RandomVariableR::new(space.clone(), t_values).map_err(|e| e.to_string())?;
    if !s.le_pointwise(&t).map_err(|e| e.to_string())? {
        return fail("generated dominator fails to dominate S");
    }
    if !sup.le_pointwise(&t).map_err(|e| e.to_string())? {
        return fail("conditional essential supremum exceeds a measurable dominator");
    }
    Ok(Checked::Pass)
}

fn check_cond_ess_sup_join(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let s1 = g.var_r(&space);
    let s2 = g.var_r(&space);
    let part = g.partition(&space);
    let lhs = cond_ess_sup(&s1.join(&s2).map_err(|e| e.to_string())?, &part)
        .map_err(|e| e.to_string())?;
    let rhs = cond_ess_sup(&s1, &part)
        .map_err(|e| e.to_string())?
        .join(&cond_ess_sup(&s2, &part).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if lhs != rhs {
        return fail("join rule fails for the conditional essential supremum");
    }
    Ok(Checked::Pass)
}

fn check_cond_ess_sup_refinement(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let s = g.var_r(&space);
    let (coarse, fine) = g.refining_pair(&space);
    let sup_fine = cond_ess_sup(&s, &fine).map_err(|e| e.to_string())?;
    let sup_coarse = cond_ess_sup(&s, &coarse).map_err(|e| e.to_string())?;
    if !sup_fine
        .le_pointwise(&sup_coarse)
        .map_err(|e| e.to_string())?
    {
        return fail("refinement increases the conditional essential supremum");
    }
    Ok(Checked::Pass)
}

fn check_cond_ess_sup_float_oracle(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let s = g.margin_var_r(&space);
    let part = g.partition(&space);
    let exact = cond_ess_sup(&s, &part).map_err(|e| e.to_string())?;
    let approx = oracle_cond_ess_sup(&s, &part, 64.0, 1e-6).map_err(|e| e.to_string())?;
    for (i, &got) in approx.iter().enumerate() {
        let want = exact.value(i).to_f64().expect("small integer");
        let scale = want.abs().max(1.0);
        if (want - got).abs() > 1e-6 * scale {
            return fail(format!(
                "float oracle {got} deviates from the closed form {want} at outcome {i}"
            ));
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_norm_scaling(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let w = g.measurable_var(&part);
    let x = g.var(&space);
    let wx = w.mul(&x, g.p, g.precision);
    let lhs = cond_linfty_norm(&wx.var, &part).map_err(|e| e.to_string())?;
    let norm_x = cond_linfty_norm(&x.var, &part).map_err(|e| e.to_string())?;
    let abs_w_values: Vec<BigRational> = (0..space.len())
        .map(|i| rational_magnitude(&w.rats[i], g.p).to_rational(g.p))
        .collect();
    let abs_w = RandomVariableR::new(space.clone(), abs_w_values).map_err(|e| e.to_string())?;
    let rhs = abs_w.mul(&norm_x).map_err(|e| e.to_string())?;
    if lhs != rhs {
        return fail("||WX||_G differs from |W| ||X||_G");
    }
    Ok(Checked::Pass)
}

fn check_cond_norm_locality(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let x = g.var(&space);
    // y agrees with x on a measurable union of atoms
    let keep: Vec<bool> = (0..part.atoms().len())
        .map(|_| g.rng.gen_bool(0.5))
        .collect();
    let other = g.var(&space);
    let rats: Vec<BigRational> = (0..space.len())
        .map(|i| {
            if keep[part.atom_of(i)] {
                x.rats[i].clone()
            } else {
                other.rats[i].clone()
            }
        })
        .collect();
    let y = RatVar::from_rats(&space, rats, g.p, g.precision);
    let nx = cond_linfty_norm(&x.var, &part).map_err(|e| e.to_string())?;
    let ny = cond_linfty_norm(&y.var, &part).map_err(|e| e.to_string())?;
    for i in 0..space.len() {
        if keep[part.atom_of(i)] && nx.value(i) != ny.value(i) {
            return fail("conditional norm differs on an event where the variables agree");
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_norm_patching(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    // disjoint measurable pieces: assign each atom to one of several variables
    let pieces: Vec<RatVar> = (0..3).map(|_| g.var(&space)).collect();
    let assign: Vec<usize> = (0..part.atoms().len())
        .map(|_| g.rng.gen_range(0..pieces.len()))
        .collect();
    let rats: Vec<BigRational> = (0..space.len())
        .map(|i| pieces[assign[part.atom_of(i)]].rats[i].clone())
        .collect();
    let patched = RatVar::from_rats(&space, rats, g.p, g.precision);
    let patched_norm = cond_linfty_norm(&patched.var, &part).map_err(|e| e.to_string())?;
    for i in 0..space.len() {
        let piece_norm = cond_linfty_norm(&pieces[assign[part.atom_of(i)]].var, &part)
            .map_err(|e| e.to_string())?;
        if patched_norm.value(i) != piece_norm.value(i) {
            return fail("patched conditional norm differs from the piece norm on its event");
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_norm_ultrametric(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let x = g.var(&space);
    let y = g.var(&space);
    let sum = x.add(&y, g.p, g.precision);
    let n_sum = cond_linfty_norm(&sum.var, &part).map_err(|e| e.to_string())?;
    let bound = cond_linfty_norm(&x.var, &part)
        .map_err(|e| e.to_string())?
        .join(&cond_linfty_norm(&y.var, &part).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    if !n_sum.le_pointwise(&bound).map_err(|e| e.to_string())? {
        return fail("||X+Y||_G exceeds ||X||_G v ||Y||_G");
    }
    Ok(Checked::Pass)
}

fn check_cond_norm_refinement(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let (coarse, fine) = g.refining_pair(&space);
    let nf = cond_linfty_norm(&x.var, &fine).map_err(|e| e.to_string())?;
    let nc = cond_linfty_norm(&x.var, &coarse).map_err(|e| e.to_string())?;
    if !nf.le_pointwise(&nc).map_err(|e| e.to_string())? {
        return fail("refining the sigma-field increased the conditional norm");
    }
    Ok(Checked::Pass)
}

fn check_stopping_norm_locality(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let depth = g.rng.gen_range(2..=4);
    let filtration = g.filtration(&space, depth);
    let t = g.stopping_time(&filtration);
    let sigma = filtration.sigma_of(&t).map_err(|e| e.to_string())?;
    let norm_sigma = cond_linfty_norm(&x.var, &sigma).map_err(|e| e.to_string())?;
    for n in 0..=filtration.horizon() {
        let norm_n = cond_linfty_norm(&x.var, filtration.level(n)).map_err(|e| e.to_string())?;
        // restriction of x to {T=n}, zero elsewhere
        let masked_rats: Vec<BigRational> = (0..space.len())
            .map(|i| {
                if t.value(i) == n {
                    x.rats[i].clone()
                } else {
                    BigRational::zero()
                }
            })
            .collect();
        let masked = RatVar::from_rats(&space, masked_rats, g.p, g.precision);
        let masked_sigma = cond_linfty_norm(&masked.var, &sigma).map_err(|e| e.to_string())?;
        let masked_n =
            cond_linfty_norm(&masked.var, filtration.level(n)).map_err(|e| e.to_string())?;
        for i in 0..space.len() {
            if t.value(i) == n {
                if norm_sigma.value(i) != norm_n.value(i) {
                    return fail(format!(
                        "||X||_(F_T) differs from ||X||_(F_{n}) on {{T={n}}}"
                    ));
                }
                if masked_sigma.value(i) != norm_sigma.value(i)
                    || masked_n.value(i) != norm_n.value(i)
                {
                    return fail("indicator form of the stopping locality fails on {T=n}");
                }
            }
        }
    }
    Ok(Checked::Pass)
}

// ---------------------------------------------------------------------------
// conditional expectation
// ---------------------------------------------------------------------------

fn check_cond_exp_minimality(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let part = g.partition(&space);
    if !oracle_cond_expectation_minimality(&x.var, &part).map_err(|e| e.to_string())? {
        return fail("a conditional expectation ball is not minimal for its atom");
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_membership(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let part = g.partition(&space);
    let field = cond_expectation(&x.var, &part).map_err(|e| e.to_string())?;

    // the canonical selection is a member
    let canonical = field.select_canonical();
    if !member_of_cond_expectation(&canonical, &x.var, &part).map_err(|e| e.to_string())? {
        return fail("canonical centers rejected from their own conditional expectation");
    }
    // the first-support selection is a member
    let support = field
        .select_with(|a, _| Ok(*x.var.value(part.atoms()[a][0])))
        .map_err(|e| e.to_string())?;
    if !member_of_cond_expectation(&support, &x.var, &part).map_err(|e| e.to_string())? {
        return fail("support-point selection rejected");
    }

    // perturbing one atom's constant past its radius breaks membership
    let a = g.rng.gen_range(0..part.atoms().len());
    let bump = match field.ball(a).radius() {
        Magnitude::Zero => PadicNumber::one(g.p, g.precision).map_err(|e| e.to_string())?,
        Magnitude::Finite(k) => {
            PadicNumber::p_power(k - 1, g.p, g.precision).map_err(|e| e.to_string())?
        }
    };
    let mut values = canonical.values().to_vec();
    for &i in &part.atoms()[a] {
        values[i] = try_prec!(values[i].add(&bump));
    }
    let pushed = RandomVariableK::new(space.clone(), values).map_err(|e| e.to_string())?;
    if member_of_cond_expectation(&pushed, &x.var, &part).map_err(|e| e.to_string())? {
        return fail("a constant beyond the atom radius was accepted");
    }

    // breaking measurability breaks membership
    if let Some(atom) = part.atoms().iter().find(|atom| atom.len() > 1) {
        let mut values = canonical.values().to_vec();
        let one = PadicNumber::one(g.p, g.precision).map_err(|e| e.to_string())?;
        values[atom[1]] = try_prec!(values[atom[1]].add(&one));
        let broken = RandomVariableK::new(space.clone(), values).map_err(|e| e.to_string())?;
        if member_of_cond_expectation(&broken, &x.var, &part).map_err(|e| e.to_string())? {
            return fail("a non-measurable variable was accepted");
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_mult_add(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let w = g.measurable_var(&part);
    let x = g.var(&space);
    let field = cond_expectation(&x.var, &part).map_err(|e| e.to_string())?;

    // E[WX | G] = W E[X | G] atom by atom
    let wx = w.mul(&x, g.p, g.precision);
    let lhs = cond_expectation(&wx.var, &part).map_err(|e| e.to_string())?;
    let zero = PadicNumber::zero(g.p, g.precision).map_err(|e| e.to_string())?;
    let rhs = try_prec!(field.map_balls(|a, ball| {
        let w_a = w.var.value(part.atoms()[a][0]);
        ball.affine(w_a, &zero)
    }));
    if !fields_same_at_precision(&lhs, &rhs) {
        return fail("E[WX|G] differs from W E[X|G]");
    }

    // E[W + X | G] = W + E[X | G]
    let wpx = w.add(&x, g.p, g.precision);
    let lhs = cond_expectation(&wpx.var, &part).map_err(|e| e.to_string())?;
    let one = PadicNumber::one(g.p, g.precision).map_err(|e| e.to_string())?;
    let rhs = try_prec!(field.map_balls(|a, ball| {
        let w_a = w.var.value(part.atoms()[a][0]);
        ball.affine(&one, w_a)
    }));
    if !fields_same_at_precision(&lhs, &rhs) {
        return fail("E[W+X|G] differs from W + E[X|G]");
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_locality(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let x = g.var(&space);
    let other = g.var(&space);
    let keep: Vec<bool> = (0..part.atoms().len())
        .map(|_| g.rng.gen_bool(0.5))
        .collect();
    let rats: Vec<BigRational> = (0..space.len())
        .map(|i| {
            if keep[part.atom_of(i)] {
                x.rats[i].clone()
            } else {
                other.rats[i].clone()
            }
        })
        .collect();
    let y = RatVar::from_rats(&space, rats, g.p, g.precision);
    let fx = cond_expectation(&x.var, &part).map_err(|e| e.to_string())?;
    let fy = cond_expectation(&y.var, &part).map_err(|e| e.to_string())?;
    for (a, &kept) in keep.iter().enumerate() {
        if kept && fx.ball(a) != fy.ball(a) {
            return fail("conditional expectation differs on an event where the variables agree");
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_patching(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let pieces: Vec<RatVar> = (0..3).map(|_| g.var(&space)).collect();
    let assign: Vec<usize> = (0..part.atoms().len())
        .map(|_| g.rng.gen_range(0..pieces.len()))
        .collect();
    let rats: Vec<BigRational> = (0..space.len())
        .map(|i| pieces[assign[part.atom_of(i)]].rats[i].clone())
        .collect();
    let patched = RatVar::from_rats(&space, rats, g.p, g.precision);
    let f_patched = cond_expectation(&patched.var, &part).map_err(|e| e.to_string())?;
    for a in 0..part.atoms().len() {
        let f_piece =
            cond_expectation(&pieces[assign[a]].var, &part).map_err(|e| e.to_string())?;
        if f_patched.ball(a) != f_piece.ball(a) {
            return fail("patched conditional expectation differs from the piece on its event");
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_independence(g: &mut Gen, _m: Mutation) -> CheckResult {
    let na = g.rng.gen_range(2..=4);
    let nb = g.rng.gen_range(2..=4);
    let sa = g.space_of(na);
    let sb = g.space_of(nb);
    let xa = g.var(&sa);
    let product = ProductSpace::new(vec![sa.clone(), sb.clone()]).map_err(|e| e.to_string())?;
    let rats: Vec<BigRational> = (0..product.space().len())
        .map(|i| xa.rats[product.coords(i)[0]].clone())
        .collect();
    let x = RatVar::from_rats(product.space(), rats, g.p, g.precision);
    // sigma-field generated by the second coordinate: independent of X
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..product.space().len() {
        groups.entry(product.coords(i)[1]).or_default().push(i);
    }
    let part = Partition::new(product.space().clone(), groups.into_values().collect())
        .map_err(|e| e.to_string())?;
    let field = cond_expectation(&x.var, &part).map_err(|e| e.to_string())?;
    let e_x = expectation(&x.var).map_err(|e| e.to_string())?;
    for ball in field.balls() {
        if ball != &e_x {
            return fail("an atom ball of an independent variable differs from E[X]");
        }
    }
    Ok(Checked::Pass)
}

fn selection(
    field: &BallField,
    x: &RandomVariableK,
    policy: SelectionPolicy,
    g: &mut Gen,
) -> Result<RandomVariableK, String> {
    match policy {
        SelectionPolicy::CanonicalCenter | SelectionPolicy::Explicit => {
            Ok(field.select_canonical())
        }
        SelectionPolicy::FirstSupportPoint => field
            .select_with(|a, _| Ok(*x.value(field.partition().atoms()[a][0])))
            .map_err(|e| e.to_string()),
        SelectionPolicy::SeededMember(_) => {
            let p = g.p;
            let precision = g.precision;
            let digits: Vec<u64> = (0..precision).map(|_| g.rng.gen_range(0..p)).collect();
            field
                .select_with(|_, ball| {
                    let t = PadicNumber::from_digits(&digits, 0, p, precision)?;
                    ball.member_at_offset(&t)
                })
                .map_err(|e| e.to_string())
        }
    }
}

const POLICIES: [SelectionPolicy; 3] = [
    SelectionPolicy::CanonicalCenter,
    SelectionPolicy::FirstSupportPoint,
    SelectionPolicy::SeededMember(0),
];

fn check_spread_refinement(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let (coarse, fine) = g.refining_pair(&space);
    let eps_fine = cond_epsilon(&x.var, &fine).map_err(|e| e.to_string())?;
    let eps_coarse = cond_epsilon(&x.var, &coarse).map_err(|e| e.to_string())?;
    if !eps_fine
        .le_pointwise(&eps_coarse)
        .map_err(|e| e.to_string())?
    {
        return fail("eps(X, H) exceeds eps(X, G) for G contained in H");
    }
    Ok(Checked::Pass)
}

fn check_tower_property(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let (coarse, fine) = g.refining_pair(&space);
    let field_fine = cond_expectation(&x.var, &fine).map_err(|e| e.to_string())?;
    for policy in POLICIES {
        let y = selection(&field_fine, &x.var, policy, g)?;
        // tower spread: eps(Y, G) <= eps(X, G)
        let eps_y = cond_epsilon(&y, &coarse).map_err(|e| e.to_string())?;
        let eps_x = cond_epsilon(&x.var, &coarse).map_err(|e| e.to_string())?;
        if !eps_y.le_pointwise(&eps_x).map_err(|e| e.to_string())? {
            return fail(format!("tower spread fails under {policy:?}"));
        }
        // tower property: selections of E[Y | G] belong to E[X | G]
        let field_coarse = cond_expectation(&y, &coarse).map_err(|e| e.to_string())?;
        for inner in POLICIES {
            let z = selection(&field_coarse, &y, inner, g)?;
            if !member_of_cond_expectation(&z, &x.var, &coarse).map_err(|e| e.to_string())? {
                return fail(format!(
                    "tower property fails under {policy:?} then {inner:?}"
                ));
            }
        }
    }
    Ok(Checked::Pass)
}

fn check_cond_exp_continuity(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let x = g.var(&space);
    let y = if g.rng.gen_bool(0.5) {
        g.var(&space)
    } else {
        let noise = g.var(&space);
        let scale = BigRational::new(BigInt::one(), BigInt::from(g.p).pow(2));
        let rats = x
            .rats
            .iter()
            .zip(&noise.rats)
            .map(|(a, n)| a + n * &scale)
            .collect();
        RatVar::from_rats(&space, rats, g.p, g.precision)
    };
    let fx = cond_expectation(&x.var, &part).map_err(|e| e.to_string())?;
    let fy = cond_expectation(&y.var, &part).map_err(|e| e.to_string())?;
    let dh = try_prec!(hausdorff_ballfields(&fx, &fy));
    if dh > x.linfty_dist(&y, g.p) {
        return fail("D_H(E[X|G], E[Y|G]) exceeds ||X - Y||_inf");
    }
    Ok(Checked::Pass)
}

fn check_minkowski_contraction(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let fa = cond_expectation(&g.var(&space).var, &part).map_err(|e| e.to_string())?;
    let fb = cond_expectation(&g.var(&space).var, &part).map_err(|e| e.to_string())?;
    let fc = cond_expectation(&g.var(&space).var, &part).map_err(|e| e.to_string())?;
    let ac = try_prec!(fa.minkowski_sum(&fc));
    let bc = try_prec!(fb.minkowski_sum(&fc));
    let lhs = try_prec!(hausdorff_ballfields(&ac, &bc));
    let rhs = try_prec!(hausdorff_ballfields(&fa, &fb));
    if lhs > rhs {
        return fail("Minkowski sum expanded the Hausdorff distance");
    }
    Ok(Checked::Pass)
}

/// The three-point fixture separating this conditional expectation from the
/// L-infinity projection onto measurable variables.
fn check_projection_counterexample(g: &mut Gen, _m: Mutation) -> CheckResult {
    let p = g.p;
    let precision = g.precision;
    let space = FiniteProbSpace::new(vec![
        (
            "alpha".into(),
            BigRational::new(BigInt::from(1), BigInt::from(2)),
        ),
        (
            "beta".into(),
            BigRational::new(BigInt::from(1), BigInt::from(4)),
        ),
        (
            "gamma".into(),
            BigRational::new(BigInt::from(1), BigInt::from(4)),
        ),
    ])
    .map_err(|e| e.to_string())?;
    let one = PadicNumber::one(p, precision).map_err(|e| e.to_string())?;
    let zero = PadicNumber::zero(p, precision).map_err(|e| e.to_string())?;
    let x =
        RandomVariableK::new(space.clone(), vec![one, zero, zero]).map_err(|e| e.to_string())?;
    let part = Partition::from_ids(
        space.clone(),
        &[vec!["alpha".into(), "beta".into()], vec!["gamma".into()]],
    )
    .map_err(|e| e.to_string())?;
    let field = cond_expectation(&x, &part).map_err(|e| e.to_string())?;
    if field.ball(0).radius() != Magnitude::Finite(0) || !field.ball(0).center().is_zero() {
        return fail("first atom ball is not the unit ball around zero");
    }
    if !field.ball(1).is_point() || !field.ball(1).center().is_zero() {
        return fail("second atom ball is not the zero point");
    }

    // the projection-minimal candidate Y = (0, 0, 1): same global norm as
    // any admissible member, but not in E[X | G]
    let y = RandomVariableK::new(space, vec![zero, zero, one]).map_err(|e| e.to_string())?;
    let canonical = field.select_canonical();
    let diff_norm = |a: &RandomVariableK, b: &RandomVariableK| -> Result<Magnitude, String> {
        crate::expectation::linfty_distance(a, b).map_err(|e| e.to_string())
    };
    let proj_norm = diff_norm(&x, &y)?;
    let member_norm = diff_norm(&x, &canonical)?;
    if proj_norm != member_norm {
        return fail("projection candidate does not reach the minimal global norm");
    }
    if member_of_cond_expectation(&y, &x, &part).map_err(|e| e.to_string())? {
        return fail("projection candidate wrongly accepted into E[X | G]");
    }
    Ok(Checked::Pass)
}

// ---------------------------------------------------------------------------
// martingales
// ---------------------------------------------------------------------------

fn check_martingale_membership(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let depth = g.rng.gen_range(2..=4);
    let filtration = g.filtration(&space, depth);
    for policy in POLICIES {
        // from_target revalidates the defining membership at every level
        Martingale::from_target(x.var.clone(), filtration.clone(), policy)
            .map_err(|e| format!("construction failed under {policy:?}: {e}"))?;
    }
    Ok(Checked::Pass)
}

fn check_optional_sampling(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let x = g.var(&space);
    let depth = g.rng.gen_range(2..=4);
    let filtration = g.filtration(&space, depth);
    let m = Martingale::from_target(x.var.clone(), filtration, SelectionPolicy::CanonicalCenter)
        .map_err(|e| e.to_string())?;
    for _ in 0..5 {
        let t = g.stopping_time(m.filtration());
        // optional_sample verifies membership in E[X | F_T] internally
        let sampled = m.optional_sample(&t).map_err(|e| e.to_string())?;
        for i in 0..space.len() {
            if sampled.value(i) != m.selection(t.value(i)).value(i) {
                return fail("stopped variable disagrees with the selection at T");
            }
        }
    }
    Ok(Checked::Pass)
}

fn check_martingale_convergence(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let depth = g.rng.gen_range(2..=4);
    let filtration = g.filtration(&space, depth);
    // a target measurable at the horizon: constant on final atoms
    let x = g.measurable_var(filtration.level(filtration.horizon()));
    let m = Martingale::from_target(
        x.var.clone(),
        filtration.clone(),
        SelectionPolicy::CanonicalCenter,
    )
    .map_err(|e| e.to_string())?;
    let trace = m.convergence_trace().map_err(|e| e.to_string())?;
    for w in trace.windows(2) {
        if w[1] > w[0] {
            return fail("convergence trace increased");
        }
    }
    if trace.last() != Some(&Magnitude::Zero) {
        return fail("terminal trace entry is not zero for a measurable target");
    }
    for (n, norm) in trace.iter().enumerate() {
        let field_n = cond_expectation(&x.var, filtration.level(n)).map_err(|e| e.to_string())?;
        let eps_sup = field_n
            .balls()
            .iter()
            .map(Ball::radius)
            .max()
            .unwrap_or(Magnitude::Zero);
        if *norm > eps_sup {
            return fail(format!("trace entry {n} exceeds the conditional spread"));
        }
    }
    Ok(Checked::Pass)
}

/// A valid martingale need not satisfy the one-step relation
/// `X_n in E[X_{n+1} | F_n]`: two different constants in `E[X]` under the
/// trivial filtration give a counterexample.
fn check_martingale_counterexample(g: &mut Gen, _m: Mutation) -> CheckResult {
    let p = g.p;
    let precision = g.precision;
    let space = FiniteProbSpace::uniform(3).map_err(|e| e.to_string())?;
    let one = PadicNumber::one(p, precision).map_err(|e| e.to_string())?;
    let zero = PadicNumber::zero(p, precision).map_err(|e| e.to_string())?;
    let x =
        RandomVariableK::new(space.clone(), vec![one, zero, zero]).map_err(|e| e.to_string())?;
    let trivial = Partition::trivial(space.clone());
    let filtration =
        Filtration::new(vec![trivial.clone(), trivial]).map_err(|e| e.to_string())?;
    // E[X] is the unit ball: both 0 and 1 are admissible constants
    let x0 = RandomVariableK::constant(space.clone(), zero);
    let x1 = RandomVariableK::constant(space, one);
    let m = Martingale::from_parts(
        filtration,
        x,
        vec![x0.clone(), x1.clone()],
        SelectionPolicy::Explicit,
    )
    .map_err(|e| format!("fixture is a valid martingale but was rejected: {e}"))?;
    // yet X_0 is not in E[X_1 | F_0] = {1}
    if member_of_cond_expectation(&x0, &x1, m.filtration().level(0)).map_err(|e| e.to_string())? {
        return fail("one-step membership unexpectedly holds");
    }
    Ok(Checked::Pass)
}

fn check_harmonic_chain(g: &mut Gen, _m: Mutation) -> CheckResult {
    let p = g.p;
    let precision = g.precision;
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let chain = MarkovChain::new(
        vec!["s0".into(), "s1".into(), "s2".into()],
        vec![
            vec![BigRational::one(), BigRational::zero(), BigRational::zero()],
            vec![half.clone(), BigRational::zero(), half],
            vec![BigRational::zero(), BigRational::zero(), BigRational::one()],
        ],
        vec![BigRational::zero(), BigRational::one(), BigRational::zero()],
    )
    .map_err(|e| e.to_string())?;
    let f: Vec<PadicNumber> = [0i64, 1, 2]
        .iter()
        .map(|&a| PadicNumber::from_integer(a, p, precision))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    if p == 2 {
        // |0 - 2| = 1/2 in Q_2, so the midpoint value 1 falls outside
        if harmonic_check(&f, &chain).map_err(|e| e.to_string())? {
            return fail("f = (0,1,2) must not be harmonic in Q_2");
        }
        return match stopped_chain_martingale(&chain, &f, 2) {
            Err(MartingaleError::NotHarmonic) => Ok(Checked::Pass),
            other => fail(format!("expected NotHarmonic, got {other:?}")),
        };
    }
    if !harmonic_check(&f, &chain).map_err(|e| e.to_string())? {
        return fail("f = (0,1,2) must be harmonic away from p = 2");
    }
    let horizon = g.rng.gen_range(1..=3);
    let m = stopped_chain_martingale(&chain, &f, horizon).map_err(|e| e.to_string())?;
    let t = g.stopping_time(m.filtration());
    m.optional_sample(&t).map_err(|e| e.to_string())?;
    Ok(Checked::Pass)
}

// ---------------------------------------------------------------------------
// probability-space plumbing
// ---------------------------------------------------------------------------

fn check_sigma_t_laws(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let depth = g.rng.gen_range(2..=4);
    let filtration = g.filtration(&space, depth);
    let t = g.stopping_time(&filtration);
    let sigma = filtration.sigma_of(&t).map_err(|e| e.to_string())?;
    if !sigma
        .refines(filtration.level(0))
        .map_err(|e| e.to_string())?
    {
        return fail("sigma_T does not refine the time-0 partition");
    }
    if !filtration
        .level(filtration.horizon())
        .refines(&sigma)
        .map_err(|e| e.to_string())?
    {
        return fail("the horizon partition does not refine sigma_T");
    }
    let n = g.rng.gen_range(0..=filtration.horizon());
    let constant = filtration
        .stopping_time(vec![n; space.len()])
        .map_err(|e| e.to_string())?;
    if filtration.sigma_of(&constant).map_err(|e| e.to_string())? != *filtration.level(n) {
        return fail("sigma of a constant time differs from that level");
    }
    Ok(Checked::Pass)
}

fn check_product_space_independence(g: &mut Gen, _m: Mutation) -> CheckResult {
    let na = g.rng.gen_range(2..=4);
    let nb = g.rng.gen_range(2..=4);
    let sa = g.space_of(na);
    let sb = g.space_of(nb);
    let product = ProductSpace::new(vec![sa.clone(), sb.clone()]).map_err(|e| e.to_string())?;
    for a in 0..sa.len() {
        for b in 0..sb.len() {
            let joint: BigRational = (0..product.space().len())
                .filter(|&i| product.coords(i) == [a, b])
                .map(|i| product.space().prob(i).clone())
                .sum();
            if joint != sa.prob(a) * sb.prob(b) {
                return fail("joint weight does not factorize over coordinates");
            }
        }
    }
    Ok(Checked::Pass)
}

fn check_serialization_roundtrip(g: &mut Gen, _m: Mutation) -> CheckResult {
    let space = g.space();
    let part = g.partition(&space);
    let ids = part.atoms_as_ids();
    let again = Partition::from_ids(space.clone(), &ids).map_err(|e| e.to_string())?;
    if again != part {
        return fail("partition changed across an id round-trip");
    }
    let x = g.var(&space);
    let json = instance_json(&space, g.p, g.precision, &[("X", &x.var)], &[("G", &part)]);
    let file: crate::schema::SpaceFile =
        serde_json::from_value(json).map_err(|e| e.to_string())?;
    let loaded = file.load().map_err(|e| e.to_string())?;
    if loaded.vars["X"] != x.var {
        return fail("variable changed across a schema round-trip");
    }
    if loaded.partitions["G"] != part {
        return fail("partition changed across a schema round-trip");
    }
    Ok(Checked::Pass)
}

fn check_haar_digits(g: &mut Gen, _m: Mutation) -> CheckResult {
    let p = g.p;
    let precision = 6u32.min(g.precision);
    let k = g.rng.gen_range(-2i64..=2);
    let seed = g.rng.gen::<u64>();
    let count = 2000usize;
    let samples = haar_sample(k, p, precision, count, seed).map_err(|e| e.to_string())?;
    if samples != haar_sample(k, p, precision, count, seed).map_err(|e| e.to_string())? {
        return fail("sampling is not deterministic under the seed");
    }
    let bound = Magnitude::Finite(k);
    if samples.iter().any(|x| x.abs() > bound) {
        return fail("a sample escapes the ball");
    }
    // digit frequencies within 5 sigma of uniform, position by position
    let n = count as f64;
    let q = 1.0 / p as f64;
    let sigma = (n * q * (1.0 - q)).sqrt();
    for pos in 0..precision as i64 {
        let mut counts = vec![0usize; p as usize];
        for x in &samples {
            let d = x.digit(k + pos).unwrap_or(0);
            counts[d as usize] += 1;
        }
        for (d, &c) in counts.iter().enumerate() {
            if (c as f64 - n * q).abs() > 5.0 * sigma {
                return fail(format!(
                    "digit {d} at position {pos} deviates beyond 5 sigma"
                ));
            }
        }
    }
    // truncation to fewer digits keeps the retained digits intact
    for x in samples.iter().take(50) {
        for pos in 1..precision as i64 {
            let t = x.truncate_below(k + pos).map_err(|e| e.to_string())?;
            for j in 0..pos {
                if t.digit(k + j) != x.digit(k + j) {
                    return fail("truncation altered retained digits");
                }
            }
        }
    }
    Ok(Checked::Pass)
}

// ---------------------------------------------------------------------------
// runner
// ---------------------------------------------------------------------------

fn checks() -> Vec<Check> {
    vec![
        Check { name: "valuation_axioms", run: check_valuation_axioms },
        Check { name: "rational_embedding", run: check_rational_embedding },
        Check { name: "ball_trichotomy", run: check_ball_trichotomy },
        Check { name: "ball_affine_enumeration", run: check_ball_affine },
        Check { name: "ball_product_support", run: check_ball_product },
        Check { name: "hausdorff_ball_oracle", run: check_hausdorff_oracle },
        Check { name: "expectation_smallest_ball", run: check_expectation_smallest_ball },
        Check { name: "expectation_continuity", run: check_expectation_continuity },
        Check { name: "expectation_affine", run: check_expectation_affine },
        Check { name: "expectation_independence", run: check_expectation_independence },
        Check { name: "cond_ess_sup_dominates", run: check_cond_ess_sup_dominates },
        Check { name: "cond_ess_sup_least_bound", run: check_cond_ess_sup_least_bound },
        Check { name: "cond_ess_sup_join", run: check_cond_ess_sup_join },
        Check { name: "cond_ess_sup_refinement", run: check_cond_ess_sup_refinement },
        Check { name: "cond_ess_sup_float_oracle", run: check_cond_ess_sup_float_oracle },
        Check { name: "cond_norm_scaling", run: check_cond_norm_scaling },
        Check { name: "cond_norm_locality", run: check_cond_norm_locality },
        Check { name: "cond_norm_patching", run: check_cond_norm_patching },
        Check { name: "cond_norm_ultrametric", run: check_cond_norm_ultrametric },
        Check { name: "cond_norm_refinement", run: check_cond_norm_refinement },
        Check { name: "stopping_norm_locality", run: check_stopping_norm_locality },
        Check { name: "cond_exp_minimality", run: check_cond_exp_minimality },
        Check { name: "cond_exp_membership", run: check_cond_exp_membership },
        Check { name: "cond_exp_mult_add", run: check_cond_exp_mult_add },
        Check { name: "cond_exp_locality", run: check_cond_exp_locality },
        Check { name: "cond_exp_patching", run: check_cond_exp_patching },
        Check { name: "cond_exp_independence", run: check_cond_exp_independence },
        Check { name: "spread_refinement", run: check_spread_refinement },
        Check { name: "tower_property", run: check_tower_property },
        Check { name: "cond_exp_continuity", run: check_cond_exp_continuity },
        Check { name: "minkowski_contraction", run: check_minkowski_contraction },
        Check { name: "projection_counterexample", run: check_projection_counterexample },
        Check { name: "martingale_membership", run: check_martingale_membership },
        Check { name: "optional_sampling", run: check_optional_sampling },
        Check { name: "martingale_convergence", run: check_martingale_convergence },
        Check { name: "martingale_counterexample", run: check_martingale_counterexample },
        Check { name: "harmonic_chain", run: check_harmonic_chain },
        Check { name: "sigma_t_laws", run: check_sigma_t_laws },
        Check { name: "product_space_independence", run: check_product_space_independence },
        Check { name: "serialization_roundtrip", run: check_serialization_roundtrip },
        Check { name: "haar_digit_uniformity", run: check_haar_digits },
    ]
}

/// Names of all checks the suite runs.
pub fn check_names() -> Vec<&'static str> {
    checks().iter().map(|c| c.name).collect()
}

/// Run the full suite under the given configuration.
pub fn run(config: &VerifyConfig) -> VerifyReport {
    run_subset(config, &check_names())
}

/// Run only the named checks; unknown names are ignored. Instance seeds
/// match the full run (they derive from each check's position in the full
/// list), so results replay identically.
pub fn run_subset(config: &VerifyConfig, names: &[&str]) -> VerifyReport {
    let mut outcomes = Vec::new();
    for (idx, check) in checks().into_iter().enumerate() {
        if !names.contains(&check.name) {
            continue;
        }
        let mut passes = 0u64;
        let mut failures = 0u64;
        let mut skips = 0u64;
        let mut first_failure = None;
        for &p in &config.primes {
            for i in 0..config.instances {
                let seed = derive_seed(config.seed, idx as u64, p, i as u64);
                let mut gen = Gen::new(seed, p, config.precision, config.max_outcomes);
                match (check.run)(&mut gen, config.mutation) {
                    Ok(Checked::Pass) => passes += 1,
                    Ok(Checked::Skip) => skips += 1,
                    Err(detail) => {
                        failures += 1;
                        if first_failure.is_none() {
                            // regenerate representative instance data for replay
                            let mut replay =
                                Gen::new(seed, p, config.precision, config.max_outcomes);
                            let space = replay.space();
                            let x = replay.var(&space);
                            let part = replay.partition(&space);
                            first_failure = Some(Failure {
                                seed,
                                prime: p,
                                detail,
                                instance: instance_json(
                                    &space,
                                    p,
                                    config.precision,
                                    &[("X", &x.var)],
                                    &[("G", &part)],
                                ),
                            });
                        }
                    }
                }
            }
        }
        outcomes.push(CheckOutcome {
            name: check.name,
            passes,
            failures,
            skips,
            first_failure,
        });
    }
    outcomes.sort_by_key(|c| c.name);
    VerifyReport {
        seed: config.seed,
        instances: config.instances,
        primes: config.primes.clone(),
        checks: outcomes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let config = VerifyConfig {
            instances: 5,
            ..VerifyConfig::default()
        };
        let report = run(&config);
        assert!(report.all_passed(), "failed: {:?}", report.failed_names());
    }

    #[test]
    fn mutation_is_caught_by_name() {
        let config = VerifyConfig {
            instances: 5,
            mutation: Mutation::WrongRadius,
            ..VerifyConfig::default()
        };
        let report = run(&config);
        assert!(!report.all_passed());
        assert!(report
            .failed_names()
            .contains(&"expectation_smallest_ball"));
    }

    #[test]
    fn reports_are_reproducible() {
        let config = VerifyConfig {
            instances: 3,
            ..VerifyConfig::default()
        };
        let a = run(&config).to_json();
        let b = run(&config).to_json();
        assert_eq!(a, b);
    }
}
