use crate::error::{shape_err, Error, Result};
use crate::numkernel::Mat;

fn check(logits: &Mat, labels: &[usize], mask: &[bool]) -> Result<usize> {
    if logits.rows() != labels.len() || labels.len() != mask.len() {
        return Err(shape_err(
            "masked loss",
            format!(
                "{} logit rows, {} labels, {} mask entries",
                logits.rows(),
                labels.len(),
                mask.len()
            ),
        ));
    }
    let k = logits.cols();
    if let Some(&bad) = labels
        .iter()
        .zip(mask)
        .filter(|&(_, &m)| m)
        .map(|(l, _)| l)
        .find(|&&l| l >= k)
    {
        return Err(Error::Input(format!("label {bad} outside 0..{k}")));
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count == 0 {
        return Err(Error::EmptyMask);
    }
    Ok(count)
}

/// Mean softmax cross-entropy over the masked rows and its gradient with
/// respect to the logits (zero on unmasked rows).
pub fn cross_entropy_masked(logits: &Mat, labels: &[usize], mask: &[bool]) -> Result<(f64, Mat)> {
    let count = check(logits, labels, mask)?;
    let scale = 1.0 / count as f64;
    let mut grad = Mat::zeros(logits.rows(), logits.cols());
    let mut total = 0.0;
    for i in (0..logits.rows()).filter(|&i| mask[i]) {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        total += lse - row[labels[i]];
        let g = grad.row_mut(i);
        for (gj, &v) in g.iter_mut().zip(row) {
            *gj = (v - lse).exp() * scale;
        }
        g[labels[i]] -= scale;
    }
    Ok((total * scale, grad))
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of masked rows whose argmax equals the label.
pub fn evaluate(logits: &Mat, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let count = check(logits, labels, mask)?;
    let hits = (0..logits.rows())
        .filter(|&i| mask[i] && argmax(logits.row(i)) == labels[i])
        .count();
    Ok(hits as f64 / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::Rng as _;

    #[test]
    fn loss_examples() {
        let (l, _) = cross_entropy_masked(&Mat::zeros(3, 4), &[0, 1, 3], &[true; 3]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        let (l, _) = cross_entropy_masked(&Mat::from_rows(&[[50.0, 0.0]]), &[0], &[true]).unwrap();
        assert!(l < 1e-20 && l >= 0.0);
        let (l, _) = cross_entropy_masked(&Mat::from_rows(&[[0.0, 3f64.ln()]]), &[0], &[true]).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!(matches!(
            cross_entropy_masked(&Mat::zeros(2, 2), &[0, 1], &[false, false]),
            Err(Error::EmptyMask)
        ));
        assert!(cross_entropy_masked(&Mat::zeros(2, 2), &[0, 2], &[true, true]).is_err());
    }

    #[test]
    fn unmasked_rows_get_no_gradient() {
        let logits = Mat::from_rows(&[[1.0, 2.0], [3.0, -1.0]]);
        let (_, g) = cross_entropy_masked(&logits, &[0, 1], &[true, false]).unwrap();
        assert_eq!(g.row(1), &[0.0, 0.0]);
        assert!((g.row(0).iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        for seed in 0..20 {
            let mut r = rng::indexed_stream(3, "test/ce", seed);
            let logits = Mat::from_fn(6, 4, |_, _| r.random_range(-3.0..3.0));
            let labels: Vec<usize> = (0..6).map(|_| r.random_range(0..4)).collect();
            let mask: Vec<bool> = (0..6).map(|i| i % 3 != 1).collect();
            let (_, g) = cross_entropy_masked(&logits, &labels, &mask).unwrap();
            let step = 1e-6;
            for idx in 0..24 {
                let mut p = logits.clone();
                p.as_mut_slice()[idx] += step;
                let mut m = logits.clone();
                m.as_mut_slice()[idx] -= step;
                let num = (cross_entropy_masked(&p, &labels, &mask).unwrap().0
                    - cross_entropy_masked(&m, &labels, &mask).unwrap().0)
                    / (2.0 * step);
                let a = g.as_slice()[idx];
                let err = (a - num).abs();
                assert!(err <= 1e-9 || err <= 1e-6 * a.abs().max(num.abs()), "{a} vs {num}");
            }
        }
    }

    #[test]
    fn accuracy_examples() {
        let labels = [2, 0, 1];
        let one_hot = Mat::from_fn(3, 3, |i, j| if labels[i] == j { 1.0 } else { 0.0 });
        assert_eq!(evaluate(&one_hot, &labels, &[true; 3]).unwrap(), 1.0);
        assert_eq!(evaluate(&Mat::zeros(3, 3), &[0, 0, 0], &[true; 3]).unwrap(), 1.0);
        assert!(matches!(evaluate(&Mat::zeros(1, 2), &[0], &[false]), Err(Error::EmptyMask)));

        let mut r = rng::stream(4, "test/acc");
        let logits = Mat::from_fn(10, 3, |_, _| r.random_range(-1.0..1.0));
        let labels: Vec<usize> = (0..10).map(|_| r.random_range(0..3)).collect();
        let mask: Vec<bool> = (0..10).map(|i| i != 4).collect();
        let mut hits = 0;
        for i in 0..10 {
            if !mask[i] {
                continue;
            }
            let row = logits.row(i);
            let mut best = 0;
            for j in 1..3 {
                if row[j] > row[best] {
                    best = j;
                }
            }
            hits += (best == labels[i]) as usize;
        }
        assert_eq!(evaluate(&logits, &labels, &mask).unwrap(), hits as f64 / 9.0);
    }

    proptest! {
        #[test]
        fn prop_loss_is_nonnegative_and_finite(vals in proptest::collection::vec(-1e3f64..1e3, 12), label in 0usize..3) {
            let logits = Mat::from_vec(4, 3, vals).unwrap();
            let (l, g) = cross_entropy_masked(&logits, &[label; 4], &[true; 4]).unwrap();
            prop_assert!(l >= 0.0 && l.is_finite());
            prop_assert!(g.is_finite());
        }
    }
}
