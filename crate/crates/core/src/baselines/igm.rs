use alloc::vec;
use alloc::vec::Vec;

use crate::dueling::{argmax, DuelingNetwork};
use crate::{Error, Result};

/// Largest joint action space [`igm_check`] will enumerate.
pub const ENUMERATION_CAP: u128 = 1_000_000;

/// `sum_i q[i][joint[i]]`.
pub fn additive_joint_q(individual: &[Vec<f64>], joint: &[usize]) -> f64 {
    individual.iter().zip(joint).map(|(q, &a)| q[a]).sum()
}

/// True iff the joint argmax of `joint` over every action tuple equals the
/// tuple of per-agent argmaxes of `individual`. Ties go to the lowest index
/// on both sides (lexicographic order for tuples).
pub fn igm_check<F>(individual: &[Vec<f64>], mut joint: F) -> Result<bool>
where
    F: FnMut(&[usize]) -> f64,
{
    if individual.is_empty() || individual.iter().any(|q| q.is_empty()) {
        return Err(Error::Config("igm check needs non-empty action sets".into()));
    }
    let size = individual.iter().map(|q| q.len() as u128).product::<u128>();
    if size > ENUMERATION_CAP {
        return Err(Error::EnumerationCap {
            size,
            cap: ENUMERATION_CAP,
        });
    }
    let mut tuple = vec![0usize; individual.len()];
    let mut best = tuple.clone();
    let mut best_q = f64::NEG_INFINITY;
    loop {
        let q = joint(&tuple);
        if q > best_q {
            best_q = q;
            best.copy_from_slice(&tuple);
        }
        // odometer with the last agent fastest
        let mut k = tuple.len();
        loop {
            if k == 0 {
                let greedy: Vec<usize> = individual.iter().map(|q| argmax(q)).collect();
                return Ok(best == greedy);
            }
            k -= 1;
            tuple[k] += 1;
            if tuple[k] < individual[k].len() {
                break;
            }
            tuple[k] = 0;
        }
    }
}

/// IGM check of the additive factorization for one action branch.
pub fn vdn_igm_check(nets: &[&DuelingNetwork], observations: &[Vec<f64>], branch: usize) -> Result<bool> {
    let individual = nets
        .iter()
        .zip(observations)
        .map(|(n, o)| Ok(n.q_values(o)?.swap_remove(branch)))
        .collect::<Result<Vec<_>>>()?;
    igm_check(&individual, |a| additive_joint_q(&individual, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dueling::{ActionSpec, NetArch};
    use crate::rng::seeded;

    #[test]
    fn additive_sum() {
        let q = [vec![1.0, 2.0], vec![0.0, 3.0]];
        assert_eq!(additive_joint_q(&q, &[1, 1]), 5.0);
        assert_eq!(additive_joint_q(&q[..1], &[0]), 1.0);
    }

    #[test]
    fn xor_payoff_breaks_igm() {
        // Q_G(a1, a2) = a1 XOR a2; independent greedy agents see the uniform
        // marginal, tie at index 0, and pick (0, 0), which pays 0.
        let payoff = [[0.0, 1.0], [1.0, 0.0]];
        let marginal = |agent: usize| -> Vec<f64> {
            (0..2)
                .map(|a| (0..2).map(|o| if agent == 0 { payoff[a][o] } else { payoff[o][a] }).sum::<f64>() / 2.0)
                .collect()
        };
        let individual = [marginal(0), marginal(1)];
        assert!(!igm_check(&individual, |a| payoff[a[0]][a[1]]).unwrap());
    }

    #[test]
    fn single_agent_always_holds() {
        let q = [vec![0.3, 0.9, 0.9, -1.0]];
        assert!(igm_check(&q, |a| q[0][a[0]]).unwrap());
    }

    #[test]
    fn refuses_large_spaces() {
        let q: Vec<Vec<f64>> = (0..9).map(|_| vec![0.0; 5]).collect();
        assert!(matches!(igm_check(&q, |_| 0.0), Err(Error::EnumerationCap { .. })));
    }

    #[test]
    fn additive_networks_satisfy_igm() {
        let spec = ActionSpec::differential_drive();
        let mut rng = seeded(3, 0);
        let nets: Vec<DuelingNetwork> = (0..3)
            .map(|_| DuelingNetwork::new(3, &spec, &NetArch::particle(), &mut rng).unwrap())
            .collect();
        let refs: Vec<&DuelingNetwork> = nets.iter().collect();
        let obs = vec![vec![0.1, 0.2, 0.3], vec![-0.4, 0.0, 0.9], vec![1.0, -1.0, 0.5]];
        for b in 0..2 {
            assert!(vdn_igm_check(&refs, &obs, b).unwrap());
        }
    }
}
