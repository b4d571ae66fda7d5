//! Finite probability spaces with exact rational weights, random variables
//! valued in `Q_p` or in the nonnegative rationals, partitions as finitely
//! generated sigma-fields, refining filtrations, stopping times, product
//! spaces, and Haar sampling on balls.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{BigInt, BigRational, One, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::padic::{PadicNumber, PadicResult};

/// Errors from probability-space construction and combination.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    /// Two objects live on different sample spaces.
    #[error("objects are defined on different probability spaces")]
    SpaceMismatch,
    /// Two ball fields live on different partitions.
    #[error("ball fields are defined on different partitions")]
    PartitionMismatch,
    /// Outcome weights are not positive rationals summing to one.
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    /// Malformed outcome list or unknown outcome id.
    #[error("invalid outcomes: {0}")]
    InvalidOutcomes(String),
    /// Atoms fail to be a disjoint cover by nonempty sets.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    /// A later partition fails to refine an earlier one.
    #[error("invalid filtration: {0}")]
    InvalidFiltration(String),
    /// `{T=n}` is not a union of time-n atoms, or the horizon is exceeded.
    #[error("invalid stopping time: {0}")]
    InvalidStoppingTime(String),
    /// A random variable is not total or mixes primes.
    #[error("invalid random variable: {0}")]
    InvalidRandomVariable(String),
}

/// A finite outcome set with exact positive rational weights summing to one.
/// Null outcomes are rejected at construction, so essential suprema over
/// events reduce to plain maxima.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteProbSpace {
    outcomes: Vec<String>,
    probs: Vec<BigRational>,
    index: BTreeMap<String, usize>,
}

impl FiniteProbSpace {
    /// Build a space from `(id, probability)` pairs.
    pub fn new(entries: Vec<(String, BigRational)>) -> Result<Arc<Self>, SpaceError> {
        if entries.is_empty() {
            return Err(SpaceError::InvalidOutcomes("empty outcome list".into()));
        }
        let mut outcomes = Vec::with_capacity(entries.len());
        let mut probs = Vec::with_capacity(entries.len());
        let mut index = BTreeMap::new();
        let mut total = BigRational::zero();
        for (id, prob) in entries {
            if prob <= BigRational::zero() {
                return Err(SpaceError::InvalidProbabilities(format!(
                    "outcome {id} has non-positive probability"
                )));
            }
            if index.insert(id.clone(), outcomes.len()).is_some() {
                return Err(SpaceError::InvalidOutcomes(format!(
                    "duplicate outcome id {id}"
                )));
            }
            total += &prob;
            outcomes.push(id);
            probs.push(prob);
        }
        if total != BigRational::one() {
            return Err(SpaceError::InvalidProbabilities(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Arc::new(FiniteProbSpace {
            outcomes,
            probs,
            index,
        }))
    }

    /// Uniform space over `n` outcomes named `w0..w{n-1}`.
    pub fn uniform(n: usize) -> Result<Arc<Self>, SpaceError> {
        let w = BigRational::new(BigInt::one(), BigInt::from(n as i64));
        Self::new((0..n).map(|i| (format!("w{i}"), w.clone())).collect())
    }

    /// Number of outcomes.
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    /// True when the space has no outcomes (never constructible).
    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// Outcome ids in order.
    pub fn outcome_ids(&self) -> &[String] {
        &self.outcomes
    }

    /// Weight of outcome `i`.
    pub fn prob(&self, i: usize) -> &BigRational {
        &self.probs[i]
    }

    /// Position of an outcome id.
    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Total mass of a set of outcome indices.
    pub fn mass(&self, indices: &[usize]) -> BigRational {
        indices.iter().map(|&i| self.probs[i].clone()).sum()
    }
}

fn ensure_same_space(a: &Arc<FiniteProbSpace>, b: &Arc<FiniteProbSpace>) -> Result<(), SpaceError> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(SpaceError::SpaceMismatch)
    }
}

/// A `Q_p`-valued random variable: a total map from outcomes to exact
/// p-adic numbers sharing one prime.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariableK {
    space: Arc<FiniteProbSpace>,
    values: Vec<PadicNumber>,
}

impl RandomVariableK {
    /// Total assignment of values to outcomes, in outcome order.
    pub fn new(
        space: Arc<FiniteProbSpace>,
        values: Vec<PadicNumber>,
    ) -> Result<Self, SpaceError> {
        if values.len() != space.len() {
            return Err(SpaceError::InvalidRandomVariable(format!(
                "{} values for {} outcomes",
                values.len(),
                space.len()
            )));
        }
        let p = values[0].prime();
        if values.iter().any(|v| v.prime() != p) {
            return Err(SpaceError::InvalidRandomVariable(
                "values mix different primes".into(),
            ));
        }
        Ok(RandomVariableK { space, values })
    }

    /// Constant random variable.
    pub fn constant(space: Arc<FiniteProbSpace>, value: PadicNumber) -> Self {
        let n = space.len();
        RandomVariableK {
            space,
            values: vec![value; n],
        }
    }

    /// The underlying space.
    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    /// The shared prime.
    pub fn prime(&self) -> u64 {
        self.values[0].prime()
    }

    /// Value at outcome `i`.
    pub fn value(&self, i: usize) -> &PadicNumber {
        &self.values[i]
    }

    /// All values in outcome order.
    pub fn values(&self) -> &[PadicNumber] {
        &self.values
    }

    /// Pointwise sum; additive cancellation errors propagate.
    pub fn add(&self, other: &Self) -> Result<PadicResult<Self>, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        let values: PadicResult<Vec<_>> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.add(b))
            .collect();
        Ok(values.map(|values| RandomVariableK {
            space: self.space.clone(),
            values,
        }))
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<PadicResult<Self>, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        let values: PadicResult<Vec<_>> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.mul(b))
            .collect();
        Ok(values.map(|values| RandomVariableK {
            space: self.space.clone(),
            values,
        }))
    }
}

/// A nonnegative exact-rational random variable (magnitudes, norms,
/// spreads).
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariableR {
    space: Arc<FiniteProbSpace>,
    values: Vec<BigRational>,
}

impl RandomVariableR {
    /// Total nonnegative assignment in outcome order.
    pub fn new(
        space: Arc<FiniteProbSpace>,
        values: Vec<BigRational>,
    ) -> Result<Self, SpaceError> {
        if values.len() != space.len() {
            return Err(SpaceError::InvalidRandomVariable(format!(
                "{} values for {} outcomes",
                values.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| v < &BigRational::zero()) {
            return Err(SpaceError::InvalidRandomVariable(
                "negative value in nonnegative variable".into(),
            ));
        }
        Ok(RandomVariableR { space, values })
    }

    /// The underlying space.
    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    /// Value at outcome `i`.
    pub fn value(&self, i: usize) -> &BigRational {
        &self.values[i]
    }

    /// All values in outcome order.
    pub fn values(&self) -> &[BigRational] {
        &self.values
    }

    /// Pointwise join (maximum).
    pub fn join(&self, other: &Self) -> Result<Self, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.max(b).clone())
            .collect();
        Ok(RandomVariableR {
            space: self.space.clone(),
            values,
        })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self) -> Result<Self, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Ok(RandomVariableR {
            space: self.space.clone(),
            values,
        })
    }

    /// True when `self <= other` everywhere.
    pub fn le_pointwise(&self, other: &Self) -> Result<bool, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        Ok(self.values.iter().zip(&other.values).all(|(a, b)| a <= b))
    }
}

/// A finite partition of the outcome set: the atoms of a finitely generated
/// sigma-field.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    space: Arc<FiniteProbSpace>,
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    /// Partition from atoms given as outcome-index sets; must be a disjoint
    /// cover by nonempty sets. Atom order is preserved, indices are sorted.
    pub fn new(
        space: Arc<FiniteProbSpace>,
        mut atoms: Vec<Vec<usize>>,
    ) -> Result<Self, SpaceError> {
        let n = space.len();
        let mut atom_of = vec![usize::MAX; n];
        for (a, atom) in atoms.iter_mut().enumerate() {
            if atom.is_empty() {
                return Err(SpaceError::InvalidPartition(format!("atom {a} is empty")));
            }
            atom.sort_unstable();
            for &i in atom.iter() {
                if i >= n {
                    return Err(SpaceError::InvalidPartition(format!(
                        "outcome index {i} out of range"
                    )));
                }
                if atom_of[i] != usize::MAX {
                    return Err(SpaceError::InvalidPartition(format!(
                        "outcome {} appears in two atoms",
                        space.outcome_ids()[i]
                    )));
                }
                atom_of[i] = a;
            }
        }
        if atom_of.contains(&usize::MAX) {
            return Err(SpaceError::InvalidPartition(
                "atoms do not cover the space".into(),
            ));
        }
        Ok(Partition {
            space,
            atoms,
            atom_of,
        })
    }

    /// Partition from atoms given as outcome-id sets.
    pub fn from_ids(
        space: Arc<FiniteProbSpace>,
        atoms: &[Vec<String>],
    ) -> Result<Self, SpaceError> {
        let mut idx_atoms = Vec::with_capacity(atoms.len());
        for atom in atoms {
            let mut ids = Vec::with_capacity(atom.len());
            for id in atom {
                let i = space
                    .position(id)
                    .ok_or_else(|| SpaceError::InvalidOutcomes(format!("unknown outcome {id}")))?;
                ids.push(i);
            }
            idx_atoms.push(ids);
        }
        Partition::new(space, idx_atoms)
    }

    /// The trivial sigma-field `{∅, Ω}`.
    pub fn trivial(space: Arc<FiniteProbSpace>) -> Self {
        let all = (0..space.len()).collect();
        Partition::new(space, vec![all]).expect("trivial partition is valid")
    }

    /// The discrete sigma-field (every outcome its own atom).
    pub fn discrete(space: Arc<FiniteProbSpace>) -> Self {
        let atoms = (0..space.len()).map(|i| vec![i]).collect();
        Partition::new(space, atoms).expect("discrete partition is valid")
    }

    /// The underlying space.
    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    /// Atoms as sorted outcome-index sets.
    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    /// Index of the atom containing outcome `i`.
    pub fn atom_of(&self, i: usize) -> usize {
        self.atom_of[i]
    }

    /// True when every atom of `self` lies inside one atom of `coarse`:
    /// the sigma-field of `coarse` is contained in that of `self`.
    pub fn refines(&self, coarse: &Partition) -> Result<bool, SpaceError> {
        ensure_same_space(&self.space, &coarse.space)?;
        Ok(self
            .atoms
            .iter()
            .all(|atom| atom.iter().all(|&i| coarse.atom_of[i] == coarse.atom_of[atom[0]])))
    }

    /// Atoms rendered as id sets (for serialization and reports).
    pub fn atoms_as_ids(&self) -> Vec<Vec<String>> {
        self.atoms
            .iter()
            .map(|atom| {
                atom.iter()
                    .map(|&i| self.space.outcome_ids()[i].clone())
                    .collect()
            })
            .collect()
    }

    /// Common refinement of two partitions.
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition, SpaceError> {
        ensure_same_space(&self.space, &other.space)?;
        let mut groups: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for i in 0..self.space.len() {
            groups
                .entry((self.atom_of[i], other.atom_of[i]))
                .or_default()
                .push(i);
        }
        Partition::new(self.space.clone(), groups.into_values().collect())
    }
}

/// True when every atom of `fine` lies inside a single atom of `coarse`.
pub fn refine_check(coarse: &Partition, fine: &Partition) -> Result<bool, SpaceError> {
    fine.refines(coarse)
}

/// A non-decreasing sequence of finitely generated sigma-fields, stored as
/// partitions in which each level refines the previous one.
#[derive(Debug, Clone, PartialEq)]
pub struct Filtration {
    levels: Vec<Partition>,
}

impl Filtration {
    /// Levels in time order; each must refine its predecessor.
    pub fn new(levels: Vec<Partition>) -> Result<Self, SpaceError> {
        if levels.is_empty() {
            return Err(SpaceError::InvalidFiltration("no levels".into()));
        }
        for w in levels.windows(2) {
            if !w[1].refines(&w[0])? {
                return Err(SpaceError::InvalidFiltration(
                    "a level fails to refine its predecessor".into(),
                ));
            }
        }
        Ok(Filtration { levels })
    }

    /// The underlying space.
    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        self.levels[0].space()
    }

    /// Partition at time `n`.
    pub fn level(&self, n: usize) -> &Partition {
        &self.levels[n]
    }

    /// All levels in time order.
    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    /// Largest time index.
    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    /// A stopping time for this filtration: `{T=n}` must be a union of
    /// time-n atoms and every value must be within the horizon.
    pub fn stopping_time(&self, values: Vec<usize>) -> Result<StoppingTime, SpaceError> {
        if values.len() != self.space().len() {
            return Err(SpaceError::InvalidStoppingTime(format!(
                "{} values for {} outcomes",
                values.len(),
                self.space().len()
            )));
        }
        if let Some(&t) = values.iter().find(|&&t| t > self.horizon()) {
            return Err(SpaceError::InvalidStoppingTime(format!(
                "value {t} exceeds horizon {}",
                self.horizon()
            )));
        }
        for (n, level) in self.levels.iter().enumerate() {
            for atom in level.atoms() {
                let hit = atom.iter().filter(|&&i| values[i] == n).count();
                if hit != 0 && hit != atom.len() {
                    return Err(SpaceError::InvalidStoppingTime(format!(
                        "{{T={n}}} splits an atom of the time-{n} partition"
                    )));
                }
            }
        }
        Ok(StoppingTime { values })
    }

    /// The sigma-field of a stopping time: for each `n`, the time-n atoms
    /// contained in `{T=n}`.
    pub fn sigma_of(&self, t: &StoppingTime) -> Result<Partition, SpaceError> {
        if t.values.len() != self.space().len() {
            return Err(SpaceError::InvalidStoppingTime(
                "stopping time is for a different space".into(),
            ));
        }
        let mut atoms = Vec::new();
        for (n, level) in self.levels.iter().enumerate() {
            for atom in level.atoms() {
                if t.values[atom[0]] == n && atom.iter().all(|&i| t.values[i] == n) {
                    atoms.push(atom.clone());
                }
            }
        }
        Partition::new(self.space().clone(), atoms)
    }
}

/// A bounded stopping time, stored as its value on every outcome.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoppingTime {
    values: Vec<usize>,
}

impl StoppingTime {
    /// Time at outcome `i`.
    pub fn value(&self, i: usize) -> usize {
        self.values[i]
    }

    /// All values in outcome order.
    pub fn values(&self) -> &[usize] {
        &self.values
    }
}

/// Draw `count` samples of the normalized Haar measure on the ball
/// `p^k * Z_p`, truncated to `precision` base-p digits at positions
/// `k .. k+precision-1`. Deterministic for a fixed seed.
pub fn haar_sample(
    k: i64,
    p: u64,
    precision: u32,
    count: usize,
    seed: u64,
) -> PadicResult<Vec<PadicNumber>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut digits = vec![0u64; precision as usize];
    for _ in 0..count {
        for d in digits.iter_mut() {
            *d = rng.gen_range(0..p);
        }
        out.push(PadicNumber::from_digits(&digits, k, p, precision)?);
    }
    Ok(out)
}

/// The product of finitely many finite probability spaces, with coordinate
/// maps for lifting per-factor data.
#[derive(Debug, Clone)]
pub struct ProductSpace {
    space: Arc<FiniteProbSpace>,
    factors: Vec<Arc<FiniteProbSpace>>,
    coords: Vec<Vec<usize>>,
}

impl ProductSpace {
    /// Product with product weights; outcome ids join factor ids with `|`.
    pub fn new(factors: Vec<Arc<FiniteProbSpace>>) -> Result<Self, SpaceError> {
        if factors.is_empty() {
            return Err(SpaceError::InvalidOutcomes("empty factor list".into()));
        }
        let mut coords: Vec<Vec<usize>> = vec![Vec::new()];
        for factor in &factors {
            let mut next = Vec::with_capacity(coords.len() * factor.len());
            for tuple in &coords {
                for i in 0..factor.len() {
                    let mut t = tuple.clone();
                    t.push(i);
                    next.push(t);
                }
            }
            coords = next;
        }
        let entries = coords
            .iter()
            .map(|tuple| {
                let id = tuple
                    .iter()
                    .enumerate()
                    .map(|(f, &i)| factors[f].outcome_ids()[i].clone())
                    .collect::<Vec<_>>()
                    .join("|");
                let prob = tuple
                    .iter()
                    .enumerate()
                    .map(|(f, &i)| factors[f].prob(i).clone())
                    .product();
                (id, prob)
            })
            .collect();
        let space = FiniteProbSpace::new(entries)?;
        Ok(ProductSpace {
            space,
            factors,
            coords,
        })
    }

    /// The product space.
    pub fn space(&self) -> &Arc<FiniteProbSpace> {
        &self.space
    }

    /// The factor spaces.
    pub fn factors(&self) -> &[Arc<FiniteProbSpace>] {
        &self.factors
    }

    /// Factor-coordinate tuple of product outcome `i`.
    pub fn coords(&self, i: usize) -> &[usize] {
        &self.coords[i]
    }

    /// Lift a variable on factor `f` to the product (composition with the
    /// coordinate projection).
    pub fn lift_k(&self, f: usize, var: &RandomVariableK) -> Result<RandomVariableK, SpaceError> {
        ensure_same_space(var.space(), &self.factors[f])?;
        let values = self
            .coords
            .iter()
            .map(|tuple| *var.value(tuple[f]))
            .collect();
        RandomVariableK::new(self.space.clone(), values)
    }

    /// Sigma-field generated by the coordinates `0..=upto`.
    pub fn coordinate_partition(&self, upto: usize) -> Partition {
        let mut groups: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (i, tuple) in self.coords.iter().enumerate() {
            groups.entry(tuple[..=upto].to_vec()).or_default().push(i);
        }
        Partition::new(self.space.clone(), groups.into_values().collect())
            .expect("coordinate groups partition the product")
    }

    /// The filtration revealing one coordinate per step.
    pub fn coordinate_filtration(&self) -> Filtration {
        let levels = (0..self.factors.len())
            .map(|n| self.coordinate_partition(n))
            .collect();
        Filtration::new(levels).expect("coordinate partitions refine in sequence")
    }
}
