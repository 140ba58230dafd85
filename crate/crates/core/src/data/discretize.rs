//! Supervised entropy/MDL discretization (recursive minimal-entropy binary
//! splits with the minimum-description-length stopping rule).

/// Cut points for `values`, sorted ascending. Labels are class indices.
///
/// Candidate cuts are midpoints between adjacent distinct values at class
/// boundaries. A split is kept only when its information gain exceeds
/// `(log2(N - 1) + delta) / N`; accepted halves are split recursively.
pub fn discretize_entropy_mdl(values: &[f64], labels: &[usize]) -> Vec<f64> {
    assert_eq!(values.len(), labels.len(), "values and labels differ in length");
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let blocks = value_blocks(&pairs, n_classes);
    let mut cuts = Vec::new();
    split(&blocks, n_classes, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

/// Bin index of `x`: number of cut points strictly below it.
pub fn apply_cuts(cuts: &[f64], x: f64) -> usize {
    cuts.partition_point(|&c| c < x)
}

/// Sorted run of equal values with its class histogram.
struct Block {
    value: f64,
    counts: Vec<usize>,
}

fn value_blocks(sorted: &[(f64, usize)], n_classes: usize) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for &(v, c) in sorted {
        match blocks.last_mut() {
            Some(b) if b.value == v => b.counts[c] += 1,
            _ => {
                let mut counts = vec![0; n_classes];
                counts[c] = 1;
                blocks.push(Block { value: v, counts });
            }
        }
    }
    blocks
}

fn entropy(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn n_present(counts: &[usize]) -> usize {
    counts.iter().filter(|&&c| c > 0).count()
}

/// Single pure class of a block, if any.
fn pure_class(counts: &[usize]) -> Option<usize> {
    let mut present = counts.iter().enumerate().filter(|(_, &c)| c > 0);
    let first = present.next()?.0;
    present.next().is_none().then_some(first)
}

fn split(blocks: &[Block], n_classes: usize, cuts: &mut Vec<f64>) {
    if blocks.len() < 2 {
        return;
    }
    let mut total = vec![0; n_classes];
    for b in blocks {
        for (t, c) in total.iter_mut().zip(&b.counts) {
            *t += c;
        }
    }
    let n: usize = total.iter().sum();

    let mut left = vec![0; n_classes];
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for i in 0..blocks.len() - 1 {
        for (l, c) in left.iter_mut().zip(&blocks[i].counts) {
            *l += c;
        }
        // A boundary lies between blocks unless both are pure in the same class.
        let boundary = match (pure_class(&blocks[i].counts), pure_class(&blocks[i + 1].counts)) {
            (Some(a), Some(b)) => a != b,
            _ => true,
        };
        if !boundary {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let nl: usize = left.iter().sum();
        let e = (nl as f64 * entropy(&left) + (n - nl) as f64 * entropy(&right)) / n as f64;
        // ties within rounding keep the lowest cut
        if best.as_ref().is_none_or(|(be, _, _)| e < *be - 1e-12) {
            best = Some((e, i, left.clone()));
        }
    }
    let Some((split_entropy, at, left)) = best else {
        return;
    };
    let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();

    let h = entropy(&total);
    let gain = h - split_entropy;
    let k = n_present(&total) as f64;
    let k1 = n_present(&left) as f64;
    let k2 = n_present(&right) as f64;
    let delta = (3f64.powf(k) - 2.0).log2() - (k * h - k1 * entropy(&left) - k2 * entropy(&right));
    let nf = n as f64;
    if gain <= ((nf - 1.0).log2() + delta) / nf {
        return;
    }
    cuts.push((blocks[at].value + blocks[at + 1].value) / 2.0);
    split(&blocks[..=at], n_classes, cuts);
    split(&blocks[at + 1..], n_classes, cuts);
}
