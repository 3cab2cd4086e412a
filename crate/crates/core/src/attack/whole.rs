use super::{LocalDeltaBank, DIVISION_GUARD};
use crate::cluster::{cluster, Cut, Linkage, Partition};
use crate::error::Result;

/// Value used for a ratio whose denominator is below the division guard.
pub const RATIO_CAP: f64 = 1e6;

/// Ratios of label `i`'s own inputting-weight growth to the change the same
/// weights get from each other label, ordered by the other label's id:
/// `|mean update(i, i)| / |mean update(j, i)|` for `j != i`.
pub fn ratio_vector(bank: &LocalDeltaBank, label: usize) -> Vec<f64> {
    let own = bank.update(label, label).mean().unwrap_or(0.0).abs();
    (0..bank.labels())
        .filter(|&j| j != label)
        .map(|j| {
            let other = bank.update(j, label).mean().unwrap_or(0.0).abs();
            if other < DIVISION_GUARD {
                RATIO_CAP
            } else {
                (own / other).min(RATIO_CAP)
            }
        })
        .collect()
}

pub fn ratio_vectors(bank: &LocalDeltaBank) -> Vec<Vec<f64>> {
    (0..bank.labels()).map(|i| ratio_vector(bank, i)).collect()
}

/// Groups labels whose ratio vectors lie close together; members of a group
/// are taken to have similar training-sample counts.
pub fn whole_determination(bank: &LocalDeltaBank, linkage: Linkage, cut: Cut) -> Result<Partition> {
    cluster(&ratio_vectors(bank), linkage, cut)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, Network, UpdateDelta};

    fn bank(own: f64, cross: &[f64]) -> LocalDeltaBank {
        let k = cross.len();
        let net = Network::zeros(&Architecture::new(2, vec![3], k)).unwrap();
        let deltas = (0..k)
            .map(|j| {
                let mut d = UpdateDelta::zeros_like(&net);
                for (i, &c) in cross.iter().enumerate() {
                    let v = if i == j { own } else { c };
                    d.output_layer_mut().weights.row_mut(i).fill(v);
                }
                d
            })
            .collect();
        LocalDeltaBank::from_deltas(0, deltas).unwrap()
    }

    #[test]
    fn two_label_toy() {
        let b = bank(2.0, &[-1.0, -1.0]);
        assert_eq!(ratio_vector(&b, 0), vec![2.0]);
        assert_eq!(ratio_vector(&b, 1), vec![2.0]);
    }

    #[test]
    fn zero_denominator_is_capped() {
        let b = bank(2.0, &[0.0, -1.0, -1.0]);
        assert_eq!(ratio_vector(&b, 0), vec![RATIO_CAP, RATIO_CAP]);
        assert_eq!(ratio_vector(&b, 1), vec![2.0, 2.0]);
    }

    #[test]
    fn symmetric_bank_is_one_cluster() {
        let b = bank(3.0, &[-0.5; 5]);
        let p = whole_determination(&b, Linkage::Complete, Cut::default()).unwrap();
        assert_eq!(p.len(), 1);
    }

    #[test]
    fn ten_fold_gap_gives_two_clusters() {
        let b = bank(3.0, &[-0.1, -0.1, -1.0, -1.0, -0.1]);
        let p = whole_determination(&b, Linkage::Complete, Cut::default()).unwrap();
        assert_eq!(p.to_string(), "0 1 4|2 3");
    }
}
