use rand::seq::SliceRandom;

use super::{Masks, Split};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= num_classes) {
        Some(l) => Err(Error::Input(format!("label {l} outside 0..{num_classes}"))),
        None => Ok(()),
    }
}

/// Semi-supervised split: `per_class` training nodes from every class, then
/// `val_size` validation and `test_size` test nodes from the rest. Nodes are
/// visited in id order for seed 0 and in a seeded random order otherwise.
pub fn make_semi_split(
    labels: &[usize],
    num_classes: usize,
    per_class: usize,
    val_size: usize,
    test_size: usize,
    seed: u64,
) -> Result<Masks> {
    check_labels(labels, num_classes)?;
    let n = labels.len();
    let mut order: Vec<usize> = (0..n).collect();
    if seed != 0 {
        order.shuffle(&mut rng::stream(seed, rng::SPLITS));
    }
    let mut masks = Masks::empty(n);
    let mut taken = vec![0usize; num_classes];
    for &i in &order {
        let c = labels[i];
        if taken[c] < per_class {
            taken[c] += 1;
            masks.train[i] = true;
        }
    }
    if let Some((class, &available)) = taken.iter().enumerate().find(|&(_, &t)| t < per_class) {
        return Err(Error::InsufficientNodes {
            class,
            available,
            required: per_class,
        });
    }
    let rest: Vec<usize> = order.into_iter().filter(|&i| !masks.train[i]).collect();
    if rest.len() < val_size + test_size {
        return Err(Error::Param(format!(
            "{} nodes remain after the training split, {} validation + {} test requested",
            rest.len(),
            val_size,
            test_size
        )));
    }
    for &i in &rest[..val_size] {
        masks.val[i] = true;
    }
    for &i in &rest[val_size..val_size + test_size] {
        masks.test[i] = true;
    }
    Ok(masks)
}

/// Per-class split assignment: each class's members are shuffled and the
/// first `round(train_frac·n_c)` go to training, the next
/// `round(val_frac·n_c)` to validation, the rest to test.
pub fn stratified_assignment(
    labels: &[usize],
    num_classes: usize,
    train_frac: f64,
    val_frac: f64,
    rng: &mut Rng,
) -> Result<Vec<Split>> {
    check_labels(labels, num_classes)?;
    let ok = |f: f64| f.is_finite() && (0.0..=1.0).contains(&f);
    if !ok(train_frac) || !ok(val_frac) || train_frac + val_frac >= 1.0 {
        return Err(Error::Param(format!(
            "split fractions must be non-negative with sum below 1, got {train_frac} and {val_frac}"
        )));
    }
    let mut out = vec![Split::Test; labels.len()];
    for c in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(rng);
        let m = members.len();
        let n_train = ((train_frac * m as f64).round() as usize).min(m);
        let n_val = ((val_frac * m as f64).round() as usize).min(m - n_train);
        for &i in &members[..n_train] {
            out[i] = Split::Train;
        }
        for &i in &members[n_train..n_train + n_val] {
            out[i] = Split::Val;
        }
    }
    Ok(out)
}

/// Stratified full-supervised split.
pub fn make_full_split(
    labels: &[usize],
    num_classes: usize,
    train_frac: f64,
    val_frac: f64,
    seed: u64,
) -> Result<Masks> {
    let assign = stratified_assignment(
        labels,
        num_classes,
        train_frac,
        val_frac,
        &mut rng::stream(seed, rng::SPLITS),
    )?;
    let mut masks = Masks::empty(labels.len());
    for (i, s) in assign.into_iter().enumerate() {
        match s {
            Split::Train => masks.train[i] = true,
            Split::Val => masks.val[i] = true,
            Split::Test => masks.test[i] = true,
        }
    }
    Ok(masks)
}
