//! Group-relative advantages and the clipped surrogate.

use std::collections::BTreeMap;

use super::SegmentRecord;

pub const ADVANTAGE_EPSILON: f64 = 1e-8;

/// `(R_i − mean) / (std + ε)` with the population standard deviation.
///
/// The mean is accumulated as an offset from the first reward, so a group of
/// identical rewards yields exactly zero advantages.
pub fn group_advantages(rewards: &[f64]) -> Vec<f64> {
    let Some(&base) = rewards.first() else {
        return Vec::new();
    };
    let n = rewards.len() as f64;
    let mean = base + rewards.iter().map(|r| r - base).sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + ADVANTAGE_EPSILON;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

/// `min(ρ·A, clip(ρ, 1−η, 1+η)·A)`.
pub fn clipped_surrogate_term(ratio: f64, advantage: f64, eta: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eta, 1.0 + eta);
    (ratio * advantage).min(clipped * advantage)
}

/// `(1/G) Σ_g Σ_t term(ρ_{g,t}, A_g)` over one group's per-token ratios.
pub fn group_objective(ratios: &[Vec<f64>], advantages: &[f64], eta: f64) -> f64 {
    assert_eq!(ratios.len(), advantages.len(), "one ratio sequence per trajectory");
    if ratios.is_empty() {
        return 0.0;
    }
    let sum: f64 = ratios
        .iter()
        .zip(advantages)
        .map(|(rs, &a)| rs.iter().map(|&r| clipped_surrogate_term(r, a, eta)).sum::<f64>())
        .sum();
    sum / ratios.len() as f64
}

/// Advantage for every `(traj_id, segment_idx)`, computed per group over
/// trajectory rewards. Segments of one trajectory share its advantage.
pub fn segment_advantages(segments: &[SegmentRecord]) -> BTreeMap<(String, usize), f64> {
    let mut groups: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for s in segments {
        groups.entry(&s.group_id).or_default().insert(&s.traj_id, s.reward);
    }
    let mut per_traj = BTreeMap::new();
    for trajs in groups.values() {
        let rewards: Vec<f64> = trajs.values().copied().collect();
        for ((traj, _), a) in trajs.iter().zip(group_advantages(&rewards)) {
            per_traj.insert(*traj, a);
        }
    }
    segments
        .iter()
        .map(|s| ((s.traj_id.clone(), s.segment_idx), per_traj[s.traj_id.as_str()]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_group() {
        let a = group_advantages(&[1.0, 0.0, 0.5, 0.5]);
        // mean 0.5, population std sqrt(0.125)
        let std = 0.125f64.sqrt();
        assert!((a[0] - 0.5 / (std + 1e-8)).abs() < 1e-12);
        assert!((a[1] + 0.5 / (std + 1e-8)).abs() < 1e-12);
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn identical_rewards_give_zero() {
        for r in [0.1, -0.7333333333333333, 1.0, 0.3] {
            assert!(group_advantages(&[r; 8]).iter().all(|&a| a == 0.0));
        }
        assert!(group_advantages(&[]).is_empty());
    }

    #[test]
    fn surrogate_clips() {
        assert_eq!(clipped_surrogate_term(1.5, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate_term(0.5, 1.0, 0.2), 0.5);
        assert_eq!(clipped_surrogate_term(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_surrogate_term(1.5, -1.0, 0.2), -1.5);
    }

    #[test]
    fn objective_averages_over_group() {
        let ratios = vec![vec![1.0, 1.0], vec![1.0]];
        assert_eq!(group_objective(&ratios, &[1.0, -2.0], 0.2), 0.0);
    }

    proptest! {
        #[test]
        fn advantages_centered(rewards in prop::collection::vec(-2.0f64..2.0, 1..16)) {
            let a = group_advantages(&rewards);
            let sum: f64 = a.iter().sum();
            prop_assert!(sum.abs() < 1e-6);
        }

        #[test]
        fn advantages_shift_invariant(rewards in prop::collection::vec(-1.0f64..1.0, 2..10), shift in -1.0f64..1.0) {
            let base = group_advantages(&rewards);
            let shifted: Vec<f64> = rewards.iter().map(|r| r + shift).collect();
            for (x, y) in base.iter().zip(group_advantages(&shifted)) {
                prop_assert!((x - y).abs() < 1e-5);
            }
        }
    }
}
