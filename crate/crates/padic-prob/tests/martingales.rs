//! Integration: conditional expectations of a uniform digit variable along
//! the digit-revealing filtration converge one scale per step.

use num::{BigInt, BigRational};
use padic_prob::expectation::cond_epsilon;
use padic_prob::martingale::{Martingale, SelectionPolicy};
use padic_prob::padic::{Magnitude, PadicNumber};
use padic_prob::space::{Filtration, FiniteProbSpace, Partition, RandomVariableK};

/// The uniform law on {0, ..., p^digits - 1}: exactly the truncated Haar
/// measure on `Z_p`, realized as a finite space with X(w) = w.
fn digit_space(p: u64, digits: u32) -> (RandomVariableK, Filtration) {
    let n = (p as usize).pow(digits);
    let space = FiniteProbSpace::new(
        (0..n)
            .map(|i| {
                (
                    format!("w{i}"),
                    BigRational::new(BigInt::from(1), BigInt::from(n as i64)),
                )
            })
            .collect(),
    )
    .unwrap();
    let values: Vec<PadicNumber> = (0..n)
        .map(|i| PadicNumber::from_integer(i as i64, p, 12).unwrap())
        .collect();
    let x = RandomVariableK::new(space.clone(), values).unwrap();
    // level t reveals digits 0..=t: atoms group outcomes by value mod p^(t+1)
    let levels: Vec<Partition> = (0..digits as usize)
        .map(|t| {
            let modulus = (p as usize).pow(t as u32 + 1);
            let mut atoms: Vec<Vec<usize>> = vec![Vec::new(); modulus];
            for i in 0..n {
                atoms[i % modulus].push(i);
            }
            Partition::new(space.clone(), atoms).unwrap()
        })
        .collect();
    (x, Filtration::new(levels).unwrap())
}

#[test]
fn digit_revealing_trace_decays_one_scale_per_step() {
    let (x, filtration) = digit_space(5, 3);
    let m = Martingale::from_target(x.clone(), filtration, SelectionPolicy::CanonicalCenter)
        .unwrap();
    let trace = m.convergence_trace().unwrap();
    // revealing digits 0..=n leaves uncertainty exactly at scale p^-(n+1),
    // until every digit is known
    assert_eq!(
        trace,
        vec![Magnitude::Finite(1), Magnitude::Finite(2), Magnitude::Zero]
    );
    for (n, level) in m.filtration().levels().iter().enumerate().take(2) {
        let eps = cond_epsilon(&x, level).unwrap();
        let expected = Magnitude::Finite(n as i64 + 1).to_rational(5);
        assert!(eps.values().iter().all(|q| *q == expected));
    }
}

#[test]
fn digit_revealing_selections_are_prefixes() {
    let (x, filtration) = digit_space(3, 3);
    let m = Martingale::from_target(x.clone(), filtration, SelectionPolicy::CanonicalCenter)
        .unwrap();
    for n in 0..=m.horizon() {
        for i in 0..x.space().len() {
            let selected = m.selection(n).value(i);
            // the canonical center keeps exactly the revealed digits
            for pos in 0..=(n as i64) {
                assert_eq!(selected.digit(pos), x.value(i).digit(pos));
            }
            if n < m.horizon() {
                for pos in (n as i64 + 1)..3 {
                    assert_eq!(selected.digit(pos), Some(0));
                }
            }
        }
    }
}
