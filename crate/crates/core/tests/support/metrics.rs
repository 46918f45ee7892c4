//! Reference metric implementations by direct enumeration.

use rand::Rng;

/// AUC by counting every (positive, negative) pair; ties count one half.
pub fn auc_pairs(scores: &[f64], labels: &[u8]) -> f64 {
    let mut halves = 0u64;
    let (mut p, mut n) = (0u64, 0u64);
    for (i, &yi) in labels.iter().enumerate() {
        if yi == 1 {
            p += 1;
        } else {
            n += 1;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yi == 1 && yj == 0 {
                halves += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    halves as f64 / (2 * p * n) as f64
}

/// Textbook MCC over the four confusion counts.
pub fn mcc_formula(tp: u64, tn: u64, fp: u64, fn_: u64) -> f64 {
    let (tp, tn, fp, fn_) = (tp as f64, tn as f64, fp as f64, fn_ as f64);
    let den = ((tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / den
    }
}

/// Pearson correlation of two 0/1 vectors.
pub fn pearson(a: &[u8], b: &[u8]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().map(|&v| v as f64).sum::<f64>() / n;
    let mb = b.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (dx, dy) = (x as f64 - ma, y as f64 - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// 100 scores on a coarse grid (so ties occur) with both classes present.
pub fn random_auc_instance(rng: &mut impl Rng) -> (Vec<f64>, Vec<u8>) {
    loop {
        let labels: Vec<u8> = (0..100).map(|_| rng.random_range(0..=1)).collect();
        if labels.contains(&0) && labels.contains(&1) {
            let scores = (0..100).map(|_| rng.random_range(0..20) as f64 / 19.0).collect();
            return (scores, labels);
        }
    }
}
