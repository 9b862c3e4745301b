use std::collections::BTreeSet;

use oparl::neural::Rng;
use oparl::replay::{ReplayBuffer, ReplayError, Transition};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn tr(tag: usize) -> Transition {
    Transition {
        state: vec![tag as f64, -(tag as f64)],
        action: vec![0.5 * tag as f64],
        reward: tag as f64,
        next_state: vec![tag as f64 + 1.0, 0.0],
        done: tag.is_multiple_of(3),
    }
}

fn tag_of(t: &Transition) -> usize {
    t.reward as usize
}

/// Upper-tail p-value of Pearson's statistic against a uniform expectation.
fn chi_square_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn sampling_is_uniform_over_ten_items() {
    let mut buf = ReplayBuffer::new(10, 2, 1).unwrap();
    for i in 0..10 {
        buf.push(tr(i)).unwrap();
    }
    let mut rng = Rng::new(2024);
    let mut counts = [0u64; 10];
    for t in buf.sample(100_000, &mut rng).unwrap() {
        counts[tag_of(t)] += 1;
    }
    let p = chi_square_p(&counts);
    assert!(p > 0.001, "counts {counts:?} p {p}");
}

#[test]
fn sampling_is_uniform_after_wraparound() {
    let mut buf = ReplayBuffer::new(10, 2, 1).unwrap();
    for i in 0..27 {
        buf.push(tr(i)).unwrap();
    }
    let mut rng = Rng::new(9);
    let mut counts = [0u64; 10];
    for t in buf.sample(100_000, &mut rng).unwrap() {
        let tag = tag_of(t);
        assert!((17..27).contains(&tag));
        counts[tag - 17] += 1;
    }
    assert!(chi_square_p(&counts) > 0.001, "{counts:?}");
}

#[test]
fn chi_square_rejects_a_skewed_sampler() {
    let mut counts = [10_000u64; 10];
    counts[0] += 600;
    counts[9] -= 600;
    assert!(chi_square_p(&counts) < 0.001);
}

#[test]
fn fifo_overwrite_exhaustive_at_capacity_four() {
    let cap = 4;
    for pushes in 0..=20 {
        let mut buf = ReplayBuffer::new(cap, 2, 1).unwrap();
        for i in 0..pushes {
            buf.push(tr(i)).unwrap();
        }
        let retained: Vec<usize> = (pushes.saturating_sub(cap)..pushes).collect();
        assert_eq!(buf.len(), retained.len());
        let order: Vec<usize> = buf.iter_fifo().map(tag_of).collect();
        assert_eq!(order, retained, "after {pushes} pushes");
        for t in buf.iter_fifo() {
            assert_eq!(t, &tr(tag_of(t)));
        }
        if pushes == 0 {
            continue;
        }
        let mut rng = Rng::new(pushes as u64);
        let seen: BTreeSet<usize> = buf.sample(400, &mut rng).unwrap().into_iter().map(tag_of).collect();
        let want: BTreeSet<usize> = retained.into_iter().collect();
        assert_eq!(seen, want, "after {pushes} pushes");
    }
}

#[test]
fn capacity_two_keeps_the_two_newest() {
    let mut buf = ReplayBuffer::new(2, 2, 1).unwrap();
    for i in [1, 2, 3] {
        buf.push(tr(i)).unwrap();
    }
    let kept: BTreeSet<usize> = buf.iter_fifo().map(tag_of).collect();
    assert_eq!(kept, BTreeSet::from([2, 3]));
}

#[test]
fn batch_columns_follow_sampled_rows() {
    let mut buf = ReplayBuffer::new(8, 2, 1).unwrap();
    for i in 0..8 {
        buf.push(tr(i)).unwrap();
    }
    let b = buf.sample_batch(32, &mut Rng::new(3)).unwrap();
    let rows = buf.sample(32, &mut Rng::new(3)).unwrap();
    assert_eq!(b.size, 32);
    for (k, t) in rows.iter().enumerate() {
        assert_eq!(&b.states[2 * k..2 * k + 2], &t.state[..]);
        assert_eq!(&b.next_states[2 * k..2 * k + 2], &t.next_state[..]);
        assert_eq!(b.actions[k], t.action[0]);
        assert_eq!(b.rewards[k], t.reward);
        assert_eq!(b.dones[k], t.done);
    }
}

#[test]
fn invalid_use_is_reported() {
    assert_eq!(ReplayBuffer::new(0, 2, 1).unwrap_err(), ReplayError::ZeroCapacity);
    let mut buf = ReplayBuffer::new(4, 2, 1).unwrap();
    assert_eq!(buf.sample(1, &mut Rng::new(0)).unwrap_err(), ReplayError::Empty);
    let mut bad = tr(1);
    bad.action = vec![0.0, 0.0];
    assert!(matches!(buf.push(bad), Err(ReplayError::Shape { field: "action", .. })));
    let mut nan = tr(1);
    nan.reward = f64::NAN;
    assert!(matches!(buf.push(nan), Err(ReplayError::NonFiniteReward(_))));
    buf.push(tr(1)).unwrap();
    assert_eq!(buf.sample(0, &mut Rng::new(0)).unwrap_err(), ReplayError::ZeroBatch);
}
