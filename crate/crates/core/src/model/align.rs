//! Matching components of two Θ estimates (components are exchangeable, so
//! fitted columns come back in arbitrary order).

/// `perm[c]` is the column of `estimate` matched to column `c` of `reference`,
/// minimizing total absolute difference. Exhaustive for `K ≤ 8`, greedy above.
pub fn best_permutation(reference: &[f64], estimate: &[f64], k: usize) -> Vec<usize> {
    let j = reference.len() / k.max(1);
    let mut cost = vec![0.0; k * k];
    for w in 0..j {
        for a in 0..k {
            for b in 0..k {
                cost[a * k + b] += (reference[w * k + a] - estimate[w * k + b]).abs();
            }
        }
    }
    if k <= 8 {
        let mut best = (f64::INFINITY, (0..k).collect::<Vec<_>>());
        let mut perm: Vec<usize> = (0..k).collect();
        permute(&mut perm, 0, &cost, k, &mut best);
        best.1
    } else {
        let mut used = vec![false; k];
        let mut perm = vec![0; k];
        let mut pairs: Vec<(f64, usize, usize)> = (0..k * k).map(|i| (cost[i], i / k, i % k)).collect();
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut done = vec![false; k];
        for (_, a, b) in pairs {
            if !done[a] && !used[b] {
                perm[a] = b;
                done[a] = true;
                used[b] = true;
            }
        }
        perm
    }
}

fn permute(perm: &mut Vec<usize>, i: usize, cost: &[f64], k: usize, best: &mut (f64, Vec<usize>)) {
    if i == k {
        let c: f64 = perm.iter().enumerate().map(|(a, &b)| cost[a * k + b]).sum();
        if c < best.0 {
            *best = (c, perm.clone());
        }
        return;
    }
    for s in i..k {
        perm.swap(i, s);
        permute(perm, i + 1, cost, k, best);
        perm.swap(i, s);
    }
}

/// Reorder the columns of a row-major `J × K` matrix: output column `c` is input column `perm[c]`.
pub fn permute_columns(theta: &[f64], k: usize, perm: &[usize]) -> Vec<f64> {
    theta
        .chunks(k)
        .flat_map(|row| perm.iter().map(move |&c| row[c]))
        .collect()
}

/// Mean absolute difference between two Θ after the best column matching.
pub fn aligned_mae(reference: &[f64], estimate: &[f64], k: usize) -> f64 {
    let perm = best_permutation(reference, estimate, k);
    let aligned = permute_columns(estimate, k, &perm);
    reference
        .iter()
        .zip(&aligned)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / reference.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_a_shuffle() {
        let reference = [0.1, 0.5, 0.4, 0.3, 0.2, 0.3, 0.6, 0.3, 0.3];
        let perm = [2, 0, 1];
        let shuffled: Vec<f64> = reference
            .chunks(3)
            .flat_map(|r| {
                let mut out = [0.0; 3];
                for (c, &p) in perm.iter().enumerate() {
                    out[p] = r[c];
                }
                out
            })
            .collect();
        assert_eq!(best_permutation(&reference, &shuffled, 3), perm.to_vec());
        assert_eq!(aligned_mae(&reference, &shuffled, 3), 0.0);
    }
}
