//! Tabular Q-learning against value iteration computed here.

use mogan_core::controller::{learn_mdp, QTable};
use mogan_core::oracle::TabularMdp;
use mogan_core::selfcheck::reference_mdps;

const GAMMA: f64 = 0.9;

/// Bellman optimality backups until the largest change is below `tol`.
fn value_iteration(mdp: &TabularMdp, gamma: f64, tol: f64) -> Vec<Vec<f64>> {
    let (s_count, a_count) = (mdp.next.len(), mdp.next[0].len());
    let mut q = vec![vec![0.0f64; a_count]; s_count];
    loop {
        let mut next_q = q.clone();
        let mut change = 0.0f64;
        for s in 0..s_count {
            for a in 0..a_count {
                let bootstrap =
                    mdp.next[s][a].map_or(0.0, |n| q[n].iter().copied().fold(f64::MIN, f64::max));
                next_q[s][a] = mdp.reward[s][a] + gamma * bootstrap;
                change = change.max((next_q[s][a] - q[s][a]).abs());
            }
        }
        q = next_q;
        if change < tol {
            return q;
        }
    }
}

#[test]
fn three_state_chain_values() {
    let chain = TabularMdp {
        next: vec![vec![Some(1)], vec![Some(2)], vec![None]],
        reward: vec![vec![0.0], vec![0.0], vec![1.0]],
    };
    let q = learn_mdp(&chain, 0.5, GAMMA, 200).unwrap();
    for (got, want) in q.iter().zip([0.81, 0.9, 1.0]) {
        assert!((got[0] - want).abs() < 1e-6, "{got:?} vs {want}");
    }
}

#[test]
fn reference_mdps_match_value_iteration() {
    let mdps = reference_mdps();
    assert_eq!(mdps.len(), 3);
    for (i, mdp) in mdps.iter().enumerate() {
        assert!(mdp.next.len() <= 10);
        let want = value_iteration(mdp, GAMMA, 1e-12);
        let got = learn_mdp(mdp, 0.5, GAMMA, 1000).unwrap();
        for (g, w) in got.iter().flatten().zip(want.iter().flatten()) {
            assert!((g - w).abs() < 1e-3, "mdp {i}: {g} vs {w}");
        }
    }
}

#[test]
fn single_update_follows_the_rule() {
    let mut t = QTable::new(2, 0.2, GAMMA).unwrap();
    t.update(&1u8, 1, 0.5, Some(&2u8)).unwrap();
    assert!((t.value(&1, 1) - 0.1).abs() < 1e-15);
    t.update(&2u8, 0, 1.0, None).unwrap();
    t.update(&1u8, 1, 0.5, Some(&2u8)).unwrap();
    let expected = 0.1 + 0.2 * (0.5 + GAMMA * 0.2 - 0.1);
    assert!((t.value(&1, 1) - expected).abs() < 1e-15);
}

#[test]
fn invalid_rates_are_rejected() {
    assert!(QTable::<u8>::new(2, 0.0, 0.9).is_err());
    assert!(QTable::<u8>::new(2, 0.5, 1.5).is_err());
    let mut t = QTable::new(2, 0.5, 0.9).unwrap();
    assert!(t.update(&0u8, 0, f64::NAN, None).is_err());
}
