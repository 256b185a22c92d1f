use crate::error::{Error, Result};
use crate::frame::DataFrame;

use super::{encode_inputs, FieldValues, InputField, Predictions, Predictor, Target};

/// Smallest impurity decrease accepted for a split.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
enum Rule {
    /// Go left when value <= threshold.
    LessEq(f64),
    /// Go left when code == level.
    Is(u32),
}

#[derive(Debug)]
enum Node {
    /// Mean (numeric) or class proportions.
    Leaf(Vec<f64>),
    Split { field: usize, rule: Rule, left: Box<Node>, right: Box<Node> },
}

#[derive(Debug)]
pub(crate) struct TreeModel {
    schema: Vec<InputField>,
    root: Node,
    levels: Option<Vec<String>>,
}

struct Builder<'a> {
    inputs: &'a [FieldValues<'a>],
    target: &'a Target,
    max_depth: usize,
    min_leaf: usize,
}

/// Sum of squared deviations (numeric) or count-weighted Gini (class),
/// maintained incrementally.
#[derive(Clone)]
enum Acc {
    Num { n: f64, sum: f64, sumsq: f64 },
    Class { n: f64, counts: Vec<f64> },
}

impl Acc {
    fn empty(target: &Target) -> Acc {
        match target {
            Target::Numeric(_) => Acc::Num { n: 0.0, sum: 0.0, sumsq: 0.0 },
            Target::Class { levels, .. } => Acc::Class { n: 0.0, counts: vec![0.0; levels.len()] },
        }
    }

    fn add(&mut self, target: &Target, row: usize, sign: f64) {
        match (self, target) {
            (Acc::Num { n, sum, sumsq }, Target::Numeric(y)) => {
                *n += sign;
                *sum += sign * y[row];
                *sumsq += sign * y[row] * y[row];
            }
            (Acc::Class { n, counts }, Target::Class { codes, .. }) => {
                *n += sign;
                counts[codes[row] as usize] += sign;
            }
            _ => unreachable!("accumulator matches target"),
        }
    }

    fn impurity(&self) -> f64 {
        match self {
            Acc::Num { n, sum, sumsq } => {
                if *n == 0.0 {
                    0.0
                } else {
                    (sumsq - sum * sum / n).max(0.0)
                }
            }
            Acc::Class { n, counts } => {
                if *n == 0.0 {
                    0.0
                } else {
                    n * (1.0 - counts.iter().map(|c| (c / n).powi(2)).sum::<f64>())
                }
            }
        }
    }

    fn count(&self) -> f64 {
        match self {
            Acc::Num { n, .. } | Acc::Class { n, .. } => *n,
        }
    }

    fn leaf(&self) -> Vec<f64> {
        match self {
            Acc::Num { n, sum, .. } => vec![sum / n],
            Acc::Class { n, counts } => counts.iter().map(|c| c / n).collect(),
        }
    }
}

impl Builder<'_> {
    fn grow(&self, rows: Vec<usize>, depth: usize) -> Node {
        let mut acc = Acc::empty(self.target);
        rows.iter().for_each(|&r| acc.add(self.target, r, 1.0));
        let parent = acc.impurity();
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf || parent <= MIN_GAIN {
            return Node::Leaf(acc.leaf());
        }
        let Some((field, rule, gain)) = self.best_split(&rows, &acc) else {
            return Node::Leaf(acc.leaf());
        };
        if gain <= MIN_GAIN {
            return Node::Leaf(acc.leaf());
        }
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| goes_left(&self.inputs[field], &rule, r));
        Node::Split {
            field,
            rule,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }

    /// Best (field, rule, impurity decrease); the first candidate wins ties.
    fn best_split(&self, rows: &[usize], total: &Acc) -> Option<(usize, Rule, f64)> {
        let parent = total.impurity();
        let min_leaf = self.min_leaf as f64;
        let mut best: Option<(usize, Rule, f64)> = None;
        let mut consider = |field: usize, rule: Rule, gain: f64| {
            if best.as_ref().is_none_or(|b| gain > b.2) {
                best = Some((field, rule, gain));
            }
        };
        for (field, values) in self.inputs.iter().enumerate() {
            match values {
                FieldValues::Num(x) => {
                    let mut order = rows.to_vec();
                    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
                    let mut left = Acc::empty(self.target);
                    let mut right = total.clone();
                    for w in 0..order.len() - 1 {
                        let r = order[w];
                        left.add(self.target, r, 1.0);
                        right.add(self.target, r, -1.0);
                        let (a, b) = (x[r], x[order[w + 1]]);
                        if a == b || left.count() < min_leaf || right.count() < min_leaf {
                            continue;
                        }
                        let gain = parent - left.impurity() - right.impurity();
                        consider(field, Rule::LessEq(a + (b - a) / 2.0), gain);
                    }
                }
                FieldValues::Cat(codes) => {
                    let nlevels = codes.iter().copied().max().map_or(0, |m| m + 1);
                    for level in 0..nlevels {
                        let mut left = Acc::empty(self.target);
                        let mut right = Acc::empty(self.target);
                        for &r in rows {
                            if codes[r] == level {
                                left.add(self.target, r, 1.0);
                            } else {
                                right.add(self.target, r, 1.0);
                            }
                        }
                        if left.count() < min_leaf || right.count() < min_leaf {
                            continue;
                        }
                        consider(field, Rule::Is(level), parent - left.impurity() - right.impurity());
                    }
                }
            }
        }
        best
    }
}

fn goes_left(values: &FieldValues<'_>, rule: &Rule, row: usize) -> bool {
    match (values, rule) {
        (FieldValues::Num(x), Rule::LessEq(t)) => x[row] <= *t,
        (FieldValues::Cat(c), Rule::Is(level)) => c[row] == *level,
        _ => unreachable!("rule matches field kind"),
    }
}

impl TreeModel {
    pub(crate) fn fit(
        schema: &[InputField],
        inputs: &[FieldValues<'_>],
        target: Target,
        max_depth: usize,
        min_leaf: usize,
    ) -> Result<Self> {
        if min_leaf == 0 {
            return Err(Error::InvalidModel("tree minLeaf must be >= 1".into()));
        }
        let n = match &target {
            Target::Numeric(y) => y.len(),
            Target::Class { codes, .. } => codes.len(),
        };
        let builder = Builder { inputs, target: &target, max_depth, min_leaf };
        let root = builder.grow((0..n).collect(), 0);
        let levels = match &target {
            Target::Class { levels, .. } => Some(levels.clone()),
            Target::Numeric(_) => None,
        };
        Ok(TreeModel { schema: schema.to_vec(), root, levels })
    }

    fn leaf_for(&self, inputs: &[FieldValues<'_>], row: usize) -> &[f64] {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(v) => return v,
                Node::Split { field, rule, left, right } => {
                    node = if goes_left(&inputs[*field], rule, row) { left } else { right };
                }
            }
        }
    }
}

impl Predictor for TreeModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let inputs = encode_inputs(&self.schema, rows)?;
        let leaves = (0..rows.nrows()).map(|r| self.leaf_for(&inputs, r));
        Ok(match &self.levels {
            None => Predictions::Numeric { values: leaves.map(|v| v[0]).collect() },
            Some(levels) => Predictions::ProbMatrix { levels: levels.clone(), probs: leaves.map(<[f64]>::to_vec).collect() },
        })
    }
}
