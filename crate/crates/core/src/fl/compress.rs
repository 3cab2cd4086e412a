use crate::nn::UpdateDelta;

/// Top-magnitude sparsification of the output layer's inputting weights.
///
/// In every output row the `floor(rate · n)` entries with the smallest
/// magnitude are zeroed (ties go to the lower column index), leaving the
/// largest `n - floor(rate · n)`. Hidden layers and output biases pass
/// through unchanged. `rate = 0` is the identity.
pub fn compress_update(update: &UpdateDelta, rate: f64) -> UpdateDelta {
    let mut out = update.clone();
    if rate <= 0.0 {
        return out;
    }
    let weights = &mut out.output_layer_mut().weights;
    let n = weights.ncols();
    let dropped = ((rate * n as f64).floor() as usize).min(n);
    if dropped == 0 {
        return out;
    }
    let mut order: Vec<usize> = (0..n).collect();
    for mut row in weights.rows_mut() {
        order.sort_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()).then(a.cmp(&b)));
        for &col in &order[..dropped] {
            row[col] = 0.0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, Network};
    use ndarray::array;
    use proptest::prelude::*;

    fn with_output_row(row: &[f64]) -> UpdateDelta {
        let net = Network::zeros(&Architecture::new(2, vec![row.len()], 2)).unwrap();
        let mut d = UpdateDelta::zeros_like(&net);
        for (i, &v) in row.iter().enumerate() {
            d.output_layer_mut().weights[[0, i]] = v;
        }
        d.layers_mut()[0].weights.fill(0.5);
        d
    }

    #[test]
    fn zero_rate_is_identity() {
        let d = with_output_row(&[3.0, -1.0, 0.5, -4.0]);
        assert_eq!(compress_update(&d, 0.0), d);
    }

    #[test]
    fn half_rate_keeps_two_largest() {
        let d = with_output_row(&[3.0, -1.0, 0.5, -4.0]);
        let c = compress_update(&d, 0.5);
        assert_eq!(c.output_layer().weights.row(0), array![3.0, 0.0, 0.0, -4.0]);
        assert_eq!(c.layers()[0], d.layers()[0]);
        assert_eq!(c.output_layer().bias, d.output_layer().bias);
    }

    proptest! {
        #[test]
        fn retained_entries_are_the_largest(
            row in proptest::collection::vec(-10.0f64..10.0, 1..40),
            rate in 0.0f64..0.99,
        ) {
            prop_assume!(row.iter().all(|v| *v != 0.0));
            let n = row.len();
            let c = compress_update(&with_output_row(&row), rate);
            let kept: Vec<f64> = c.output_layer().weights.row(0).iter().copied().filter(|v| *v != 0.0).collect();
            let expected = n - (rate * n as f64).floor() as usize;
            prop_assert_eq!(kept.len(), expected);
            let min_kept = kept.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let dropped_max = row
                .iter()
                .zip(c.output_layer().weights.row(0))
                .filter(|(_, k)| **k == 0.0)
                .fold(0.0f64, |m, (v, _)| m.max(v.abs()));
            prop_assert!(dropped_max <= min_kept);
        }
    }
}
