//! Exhaustive merge oracle over set partitions of the input hyperedges.
//!
//! Node sets are plain index sets; Jaccard comparisons are done on exact
//! integer ratios so the 0.8 boundary is decided without floating point.

use std::collections::{BTreeSet, HashSet};

/// Indices of input hyperedges that ended up in one output hyperedge.
pub type Block = Vec<usize>;
/// Sorted list of sorted blocks.
pub type Partition = Vec<Block>;

fn union_of(sets: &[BTreeSet<usize>], block: &[usize]) -> BTreeSet<usize> {
    block.iter().flat_map(|&i| sets[i].iter().copied()).collect()
}

/// (|A ∩ B|, |A ∪ B|)
fn ratio(a: &BTreeSet<usize>, b: &BTreeSet<usize>) -> (usize, usize) {
    let inter = a.intersection(b).count();
    (inter, a.len() + b.len() - inter)
}

/// inter / union > 4/5
fn mergeable((inter, union): (usize, usize)) -> bool {
    union > 0 && inter * 5 > union * 4
}

fn normalize(mut p: Partition) -> Partition {
    for b in &mut p {
        b.sort_unstable();
    }
    p.sort();
    p
}

fn merged(p: &Partition, i: usize, j: usize) -> Partition {
    let mut out: Partition = p.iter().enumerate().filter(|(k, _)| *k != i && *k != j).map(|(_, b)| b.clone()).collect();
    let mut joined = p[i].clone();
    joined.extend(&p[j]);
    out.push(joined);
    normalize(out)
}

/// Every partition reachable by some sequence of above-threshold merges
/// from which no further merge applies.
pub fn reachable_fixpoints(sets: &[BTreeSet<usize>]) -> BTreeSet<Partition> {
    let start: Partition = (0..sets.len()).map(|i| vec![i]).collect();
    let mut seen: HashSet<Partition> = HashSet::new();
    let mut stack = vec![start];
    let mut fixpoints = BTreeSet::new();
    while let Some(p) = stack.pop() {
        if !seen.insert(p.clone()) {
            continue;
        }
        let unions: Vec<BTreeSet<usize>> = p.iter().map(|b| union_of(sets, b)).collect();
        let mut terminal = true;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if mergeable(ratio(&unions[i], &unions[j])) {
                    terminal = false;
                    stack.push(merged(&p, i, j));
                }
            }
        }
        if terminal {
            fixpoints.insert(p);
        }
    }
    fixpoints
}

/// Best pair so far: Jaccard as (intersection, union), id pair, block indices.
type Best = ((usize, usize), (String, String), usize, usize);

/// The deterministic rule: merge the pair with the largest Jaccard, ties to
/// the smallest (lower id, higher id) pair, until nothing exceeds 0.8.
/// `id_of` names a block the way the library names merged hyperedges.
pub fn rule_fixpoint(sets: &[BTreeSet<usize>], id_of: impl Fn(&Block) -> String) -> Partition {
    let mut p: Partition = (0..sets.len()).map(|i| vec![i]).collect();
    loop {
        let unions: Vec<BTreeSet<usize>> = p.iter().map(|b| union_of(sets, b)).collect();
        let ids: Vec<String> = p.iter().map(|b| {
            let mut b = b.clone();
            b.sort_unstable();
            id_of(&b)
        }).collect();
        let mut best: Option<Best> = None;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let r = ratio(&unions[i], &unions[j]);
                if !mergeable(r) {
                    continue;
                }
                let key = if ids[i] < ids[j] { (ids[i].clone(), ids[j].clone()) } else { (ids[j].clone(), ids[i].clone()) };
                let wins = match &best {
                    None => true,
                    Some((br, bk, _, _)) => {
                        let lhs = r.0 * br.1;
                        let rhs = br.0 * r.1;
                        lhs > rhs || (lhs == rhs && key < *bk)
                    }
                };
                if wins {
                    best = Some((r, key, i, j));
                }
            }
        }
        match best {
            Some((_, _, i, j)) => p = merged(&p, i, j),
            None => return normalize(p),
        }
    }
}
