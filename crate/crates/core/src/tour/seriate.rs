use crate::metric::EncodedRows;

/// Above this many points the O(n^2)-memory clustering gives way to a
/// nearest-neighbour path.
const CLUSTER_CAP: usize = 4000;

/// Sum of dissimilarities between consecutive points of `order`.
pub fn path_length(rows: &EncodedRows, order: &[usize]) -> f64 {
    order.windows(2).map(|w| rows.dissimilarity(w[0], w[1])).sum()
}

/// Orders points into a short path: average-linkage clustering whose
/// dendrogram leaves are flipped at each merge so the two joined ends are as
/// close as possible. The cluster holding the smaller index goes first and
/// reversals are only made when they shorten the join.
pub fn seriate(rows: &EncodedRows) -> Vec<usize> {
    let n = rows.len();
    if n <= 2 {
        return (0..n).collect();
    }
    if n > CLUSTER_CAP {
        return nearest_neighbour_path(rows);
    }
    let mut dist = Condensed::new(n);
    for i in 0..n {
        for j in i + 1..n {
            dist.set(i, j, rows.dissimilarity(i, j));
        }
    }
    // clusters live in the slot of one member; `leaves` keeps their path
    let mut leaves: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut chain: Vec<usize> = Vec::with_capacity(n);
    let mut remaining = n;

    while remaining > 1 {
        if chain.is_empty() {
            chain.push(active.iter().position(|&a| a).expect("clusters remain"));
        }
        loop {
            let a = *chain.last().expect("non-empty chain");
            let prev = chain.len().checked_sub(2).map(|i| chain[i]);
            // nearest active cluster; the previous chain element wins ties
            let mut best: Option<(usize, f64)> = prev.map(|p| (p, dist.get(a, p)));
            for (c, _) in active.iter().enumerate().filter(|(c, &on)| on && *c != a) {
                let d = dist.get(a, c);
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
            let (b, _) = best.expect("another cluster is active");
            if Some(b) == prev {
                chain.pop();
                chain.pop();
                // merge a and b into the lower slot
                let (keep, gone) = if a < b { (a, b) } else { (b, a) };
                let la = leaves[a].take().expect("active");
                let lb = leaves[b].take().expect("active");
                leaves[keep] = Some(join(rows, la, lb));
                for c in (0..n).filter(|&c| active[c] && c != a && c != b) {
                    let d = (size[a] as f64 * dist.get(c, a) + size[b] as f64 * dist.get(c, b))
                        / (size[a] + size[b]) as f64;
                    dist.set(c, keep, d);
                }
                size[keep] = size[a] + size[b];
                active[gone] = false;
                remaining -= 1;
                break;
            }
            chain.push(b);
        }
    }
    leaves.into_iter().flatten().next().expect("one cluster left")
}

/// Concatenates two leaf paths, reversing either only if that brings the
/// joined ends closer. The path containing the smallest index comes first.
fn join(rows: &EncodedRows, a: Vec<usize>, b: Vec<usize>) -> Vec<usize> {
    let (mut first, mut second) = if a.iter().min() < b.iter().min() { (a, b) } else { (b, a) };
    let (f0, f1) = (first[0], first[first.len() - 1]);
    let (s0, s1) = (second[0], second[second.len() - 1]);
    // candidates in order of preference: no flip, flip second, flip first, flip both
    let options = [(f1, s0), (f1, s1), (f0, s0), (f0, s1)];
    let mut pick = 0;
    let mut best = rows.dissimilarity(f1, s0);
    for (i, &(x, y)) in options.iter().enumerate().skip(1) {
        let d = rows.dissimilarity(x, y);
        if d < best {
            best = d;
            pick = i;
        }
    }
    if pick >= 2 {
        first.reverse();
    }
    if pick % 2 == 1 {
        second.reverse();
    }
    first.extend(second);
    first
}

fn nearest_neighbour_path(rows: &EncodedRows) -> Vec<usize> {
    let n = rows.len();
    let mut used = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut at = 0;
    used[0] = true;
    order.push(0);
    for _ in 1..n {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in (0..n).filter(|&j| !used[j]) {
            let d = rows.dissimilarity(at, j);
            if d < best.1 || best.0 == usize::MAX {
                best = (j, d);
            }
        }
        at = best.0;
        used[at] = true;
        order.push(at);
    }
    order
}

/// Upper-triangular distance storage.
struct Condensed {
    n: usize,
    d: Vec<f64>,
}

impl Condensed {
    fn new(n: usize) -> Self {
        Condensed { n, d: vec![0.0; n * (n - 1) / 2] }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.d[self.index(i, j)]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.d[k] = v;
    }
}
