//! Randomized scenario checks that compare library output against the
//! reference implementations, one generated instance per call.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use slicevis_core::metric::{distance, distances, similarity, EncodedRows};
use slicevis_core::model::{InputField, ModelSource, Predictor};
use slicevis_core::section::{assemble_section, plot_type, SectionOptions};
use slicevis_core::session::{Mutation, Session, SessionSpec};
use slicevis_core::tour::{
    diffits_tour, interpolate, kmed_tour, lof_tour, occupancy, pam, seriate, CancelToken, PamOptions, TourKind,
    TourRequest, TourSpace,
};
use slicevis_core::{
    fit_builtin, BuiltinSpec, Column, ColumnKind, ConditioningSpace, DataFrame, DistanceKind, Error, ModelHandle,
    PredictionKind, Predictions, Roles, SectionPoint, SimilarityConfig, Value,
};

use super::*;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Canned predictions, so rankings see exactly the ties a test wants.
#[derive(Debug)]
struct Fixed(Predictions);

impl Predictor for Fixed {
    fn predict(&self, rows: &DataFrame) -> slicevis_core::Result<Predictions> {
        assert_eq!(rows.nrows(), self.0.len(), "canned predictions cover the training rows only");
        Ok(self.0.clone())
    }
}

fn fixed(id: &str, df: &DataFrame, inputs: &[String], p: Predictions) -> ModelHandle {
    let kind = p.kind();
    let schema = InputField::schema_of(df, inputs).unwrap();
    let source = ModelSource::External { endpoint: "memory://".into() };
    ModelHandle::new(id, kind, schema, source, Arc::new(Fixed(p)))
}

fn with_column(df: &DataFrame, col: Column) -> DataFrame {
    let mut cols = df.columns().to_vec();
    cols.push(col);
    DataFrame::new(cols).unwrap()
}

pub const SIGMAS: [f64; 3] = [0.25, 0.5, 1.0];
pub const DISTANCES: [DistanceKind; 3] = [DistanceKind::Maxnorm, DistanceKind::Euclidean, DistanceKind::Gower];

/// One random lack-of-fit / diffits instance with 1 to 3 models, a mix of
/// built-in learners and canned predictions drawn from a small grid so that
/// ties are common. Returns the number of models used.
pub fn check_ranking_case(seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let n = r.random_range(20..=500);
    let base = mixed_frame(&mut r, n, 2, 1, 3, true);
    let inputs = strings(&["x1", "x2", "g1"]);
    let categorical = r.random_bool(0.5);
    let labels = ["a", "b", "c"];
    let df = if categorical {
        let y: Vec<&str> = (0..n).map(|_| labels[r.random_range(0..3)]).collect();
        with_column(&base, Column::from_labels("y", &y))
    } else {
        let x1 = base.column("x1").unwrap().as_numeric().unwrap();
        let y: Vec<f64> = (0..n).map(|i| x1[i] + r.random_range(0..3) as f64).collect();
        with_column(&base, Column::numeric("y", y))
    };

    let m = r.random_range(1..=3);
    let mut models = Vec::new();
    for j in 0..m {
        let id = format!("m{j}");
        let choice = r.random_range(0..4);
        let handle = if categorical {
            match choice {
                0 => fit_builtin(&BuiltinSpec::Knn { k: r.random_range(1..6) }, &df, Some("y"), &inputs).map_err(err)?,
                1 => fit_builtin(&"tree:3".parse().unwrap(), &df, Some("y"), &inputs)
                    .map_err(err)?
                    .with_kind(PredictionKind::Class)
                    .map_err(err)?,
                2 => {
                    let levels = strings(&["a", "b", "c", "d"]);
                    let codes = (0..n).map(|_| r.random_range(0..4)).collect();
                    fixed(&id, &df, &inputs, Predictions::Class { levels, codes })
                }
                _ => {
                    // quarters: three levels, rows on a coarse simplex grid
                    let probs = (0..n)
                        .map(|_| {
                            let a = r.random_range(0..=4);
                            let b = r.random_range(0..=4 - a);
                            vec![a as f64 / 4.0, b as f64 / 4.0, (4 - a - b) as f64 / 4.0]
                        })
                        .collect();
                    fixed(&id, &df, &inputs, Predictions::ProbMatrix { levels: strings(&labels), probs })
                }
            }
        } else {
            match choice {
                0 => fit_builtin(&BuiltinSpec::Linear, &df, Some("y"), &inputs).map_err(err)?,
                1 => fit_builtin(&BuiltinSpec::Knn { k: r.random_range(1..6) }, &df, Some("y"), &inputs).map_err(err)?,
                2 => fit_builtin(&"tree:2".parse().unwrap(), &df, Some("y"), &inputs).map_err(err)?,
                _ => {
                    let values = (0..n).map(|_| r.random_range(0..6) as f64).collect();
                    fixed(&id, &df, &inputs, Predictions::Numeric { values })
                }
            }
        }
        .with_id(id);
        models.push(handle);
    }

    let ts = TourSpace::new(&df, &inputs, BTreeMap::new()).map_err(err)?;
    let l = r.random_range(1..=n.min(40));
    let fits: Vec<Predictions> = models.iter().map(|m| m.predict_native(&df)).collect::<Result<_, _>>().map_err(err)?;
    let response = df.column("y").unwrap();

    let check_tour = |name: &str, tour: slicevis_core::tour::Tour, want: Vec<usize>| -> Result<(), String> {
        ensure(tour.ranked == want, || format!("{name}: ranked {:?}, oracle {want:?}", tour.ranked))?;
        // seriation reorders and drops repeated points, but never adds one
        let want_set: BTreeSet<usize> = want.iter().copied().collect();
        let got: BTreeSet<usize> = tour.rows.iter().map(|r| r.expect("ranked tours stop at observations")).collect();
        ensure(got.is_subset(&want_set), || format!("{name}: tour rows {got:?} outside {want_set:?}"))?;
        for &row in &want {
            let p = ts.point_of_row(row);
            ensure(tour.points.contains(&p), || format!("{name}: row {row} missing from the tour"))?;
        }
        Ok(())
    };

    let want = top_by_scan(&lof_keys(response, &fits), l);
    match lof_tour(&ts, "y", &models, l) {
        Ok(t) => check_tour("lof", t, want)?,
        Err(e) => ensure(want.is_empty(), || format!("lof failed with {e} but the oracle ranks {want:?}"))?,
    }

    if m < 2 {
        let e = diffits_tour(&ts, &models, l).err();
        ensure(matches!(e, Some(Error::NeedTwoModels(_))), || format!("diffits with one model gave {e:?}"))?;
    } else {
        let want = top_by_scan(&diffits_keys(&fits), l);
        check_tour("diffits", diffits_tour(&ts, &models, l).map_err(err)?, want)?;
    }
    Ok(m)
}

/// Linear section against the closed-form plane on an independently built
/// grid, observation visibility and fading against the metric, row-order
/// invariance, and the probability and density normalizations.
pub fn check_section_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(30..=300);
    let base = mixed_frame(&mut r, n, 3, 1, 3, false);
    let beta: Vec<f64> = (0..6).map(|_| r.random_range(-2.0..2.0)).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let x = design_row(&base, &strings(&["x1", "x2", "x3", "g1"]), i);
            x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + r.random_range(-0.5..0.5)
        })
        .collect();
    let df = with_column(&base, Column::numeric("y", y));
    let inputs = strings(&["x1", "x2", "x3", "g1"]);

    let mut shuffled = inputs.clone();
    shuffled.shuffle(&mut r);
    let k = r.random_range(1..=2);
    let section: Vec<String> = shuffled[..k].to_vec();
    let roles = Roles::infer(&df, Some("y"), &section, &[]);
    let space = ConditioningSpace::new(&df, &roles.conditioning).map_err(err)?;

    let anchor = r.random_range(0..n);
    let mut point = SectionPoint::from_row(&df, &roles, anchor).map_err(err)?;
    for v in point.u_c.values_mut() {
        if let (Value::Num(x), true) = (&v, r.random_bool(0.5)) {
            *v = Value::Num(x + r.random_range(-1.0..1.0));
        }
    }
    let sigma = [0.3, 1.0, 2.0, f64::INFINITY][r.random_range(0..4)];
    let cfg = SimilarityConfig { distance: DISTANCES[r.random_range(0..3)], sigma, fade_bins: r.random_range(1..12) };
    let res: Vec<usize> = (0..k).map(|_| r.random_range(2..12)).collect();
    let opts = SectionOptions { resolution: Some(res.clone()), ..Default::default() };

    let lm = fit_builtin(&BuiltinSpec::Linear, &df, Some("y"), &inputs).map_err(err)?;
    let payload = assemble_section(&df, &roles, &space, std::slice::from_ref(&lm), &point, &cfg, &opts).map_err(err)?;

    // grid: first axis slowest
    let axes: Vec<Vec<Value>> = section
        .iter()
        .zip(&res)
        .map(|(v, &m)| {
            let c = df.column(v).unwrap();
            match c.levels() {
                Some(levels) => levels.iter().map(|l| Value::Level(l.clone())).collect(),
                None => {
                    let x = c.as_numeric().unwrap();
                    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    (0..m).map(|i| Value::Num(lo + (hi - lo) * i as f64 / (m - 1) as f64)).collect()
                }
            }
        })
        .collect();
    let mut cells: Vec<Vec<Value>> = vec![vec![]];
    for axis in &axes {
        cells = cells.into_iter().flat_map(|c| axis.iter().map(move |v| [c.clone(), vec![v.clone()]].concat())).collect();
    }
    for (a, axis) in axes.iter().enumerate() {
        let got = &payload.grid.axes[a].values;
        ensure(got.len() == axis.len(), || format!("axis {a} has {} values, want {}", got.len(), axis.len()))?;
        for (g, w) in got.iter().zip(axis) {
            let same = match (g, w) {
                (Value::Num(p), Value::Num(q)) => (p - q).abs() <= 1e-12 * q.abs().max(1.0),
                _ => g == w,
            };
            ensure(same, || format!("axis {a}: grid value {g:?}, want {w:?}"))?;
        }
    }
    let coef = normal_equations(&df, &inputs, "y");
    let got = payload.fits[0].predictions.values().ok_or("linear fit is not numeric")?;
    ensure(got.len() == cells.len(), || format!("{} predictions for {} cells", got.len(), cells.len()))?;
    for (cell, &g) in cells.iter().zip(got) {
        let mut values: BTreeMap<String, Value> = point.u_c.clone();
        for (v, x) in section.iter().zip(cell) {
            values.insert(v.clone(), x.clone());
        }
        let want = plane_at(&coef, &df, &inputs, &values);
        ensure((g - want).abs() <= 1e-8 * want.abs().max(1.0), || format!("section {g} vs plane {want} at {cell:?}"))?;
    }

    // visibility and fading straight from the metric
    let u = space.encode_point(&point.u_c).map_err(err)?;
    let s = similarity(&distances(&df, &space, &u, cfg.distance), cfg.sigma);
    let want: Vec<usize> = (0..n).filter(|&i| s[i] > 0.0).collect();
    let rows: Vec<usize> = payload.points.iter().map(|p| p.row).collect();
    ensure(rows == want, || format!("drawn rows {rows:?}, visible {want:?}"))?;
    ensure(payload.visible_count == want.len(), || "visible count".into())?;
    for p in &payload.points {
        let level = ((p.similarity * cfg.fade_bins as f64).ceil() as u32).clamp(1, cfg.fade_bins);
        ensure(p.similarity == s[p.row] && p.fade_level == level, || format!("fade of row {}", p.row))?;
        // image plots shrink markers instead of fading them
        let (alpha, shrink) = if payload.plot_type == slicevis_core::section::PlotType::Image {
            (1.0, p.similarity)
        } else {
            (level as f64 / cfg.fade_bins as f64, 1.0)
        };
        ensure((p.alpha - alpha).abs() < 1e-15 && p.shrink == shrink, || format!("alpha of row {}", p.row))?;
    }

    // permuting the rows changes nothing but the row labels
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut r);
    let pdf = df.take(&perm).map_err(err)?;
    let pspace = ConditioningSpace::new(&pdf, &roles.conditioning).map_err(err)?;
    let p2 = assemble_section(&pdf, &roles, &pspace, &[lm], &point, &cfg, &opts).map_err(err)?;
    ensure(p2.grid == payload.grid, || "grid depends on row order".into())?;
    let (a, b) = (payload.fits[0].predictions.values().unwrap(), p2.fits[0].predictions.values().unwrap());
    ensure(a == b, || "predictions depend on row order".into())?;
    let mut mapped: Vec<(usize, f64)> = p2.points.iter().map(|p| (perm[p.row], p.similarity)).collect();
    mapped.sort_by_key(|m| m.0);
    ensure(mapped.len() == payload.points.len(), || "visible set depends on row order".into())?;
    for ((row, s2), p) in mapped.iter().zip(&payload.points) {
        ensure(*row == p.row && (s2 - p.similarity).abs() < 1e-12, || format!("row {row} similarity moved"))?;
    }

    // class probabilities and densities
    let g1 = df.column("g1").unwrap();
    let class: Vec<String> = (0..n).map(|i| format!("c{}", g1.codes().unwrap()[i])).collect();
    let df_cls = with_column(&df, Column::from_labels("c", &class));
    let cls_inputs = strings(&["x1", "x2", "x3"]);
    let cls_section: Vec<String> = cls_inputs[..k].to_vec();
    let cls_roles = Roles::infer(&df_cls, Some("c"), &cls_section, &strings(&["g1", "y"]));
    let cls_space = ConditioningSpace::new(&df_cls, &cls_roles.conditioning).map_err(err)?;
    let cls_point = SectionPoint::from_row(&df_cls, &cls_roles, anchor).map_err(err)?;
    let spec: BuiltinSpec = if r.random_bool(0.5) { "knn:7".parse().unwrap() } else { "tree:4".parse().unwrap() };
    let clf = fit_builtin(&spec, &df_cls, Some("c"), &cls_inputs).map_err(err)?;
    let pc = assemble_section(&df_cls, &cls_roles, &cls_space, &[clf], &cls_point, &cfg, &opts).map_err(err)?;
    let Predictions::ProbMatrix { levels, probs } = &pc.fits[0].predictions else {
        return Err("classifier did not return probabilities".into());
    };
    let kinds = vec![ColumnKind::Numeric; k];
    let want_type = plot_type(&kinds, Some(PredictionKind::ProbMatrix), levels.len()).map_err(err)?;
    ensure(pc.plot_type == want_type, || format!("plot type {:?}, want {want_type:?}", pc.plot_type))?;
    for row in probs {
        let total: f64 = row.iter().sum();
        ensure((total - 1.0).abs() <= 1e-9, || format!("probabilities sum to {total}"))?;
    }

    let kde = fit_builtin(&BuiltinSpec::Kde { bandwidth: None }, &df_cls, None, &cls_inputs).map_err(err)?;
    let pd = assemble_section(&df_cls, &cls_roles, &cls_space, &[kde], &cls_point, &cfg, &opts).map_err(err)?;
    let Predictions::Density { values } = &pd.fits[0].predictions else {
        return Err("kde did not return densities".into());
    };
    let measure: f64 = cls_section
        .iter()
        .zip(&res)
        .map(|(v, &m)| range(df_cls.column(v).unwrap().as_numeric().unwrap()) / (m - 1) as f64)
        .product();
    let mass = values.iter().sum::<f64>() * measure;
    ensure((mass - 1.0).abs() <= 1e-9, || format!("density integrates to {mass}"))?;
    Ok(())
}

/// Every k-medoids tour point is an observation, so each slice shows at
/// least one observation at any threshold and distance.
pub fn check_kmed_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(20..=300);
    let num = r.random_range(0..=3);
    let cat = if num == 0 { r.random_range(1..=2) } else { r.random_range(0..=2) };
    let (levels, coarse) = (r.random_range(2..5), r.random_bool(0.5));
    let df = mixed_frame(&mut r, n, num, cat, levels, coarse);
    let vars: Vec<String> = df.names().map(str::to_string).collect();
    let ts = TourSpace::new(&df, &vars, BTreeMap::new()).map_err(err)?;
    if ts.space.is_empty() {
        return Ok(());
    }
    let l = r.random_range(1..=n.min(15));
    let tour = kmed_tour(&ts, l, seed, &CancelToken::new(), None).map_err(err)?;
    for (p, row) in tour.points.iter().zip(&tour.rows) {
        let row = row.ok_or("kmed point without an observation")?;
        ensure(p.u_c == df.row_values(row, &vars).unwrap(), || format!("point is not row {row}"))?;
        let u = ts.space.encode_point(&p.u_c).map_err(err)?;
        for kind in DISTANCES {
            let d = distance(&u, &ts.space.row(&df, row), &ts.space, kind);
            ensure(d == 0.0, || format!("{kind:?} distance {d} from a point to its own row"))?;
        }
    }
    for sigma in SIGMAS {
        for kind in DISTANCES {
            let occ = occupancy(&df, &ts.space, &tour.points, &SimilarityConfig::new(kind, sigma)).map_err(err)?;
            ensure(occ.visible.iter().all(|&v| v >= 1), || format!("empty slice at sigma {sigma}, {kind:?}"))?;
        }
    }
    Ok(())
}

fn random_points(r: &mut impl Rng, n: usize) -> (DataFrame, EncodedRows) {
    let num = r.random_range(1..=3);
    let cat = r.random_range(0..=1);
    let coarse = r.random_bool(0.3);
    let df = mixed_frame(r, n, num, cat, 3, coarse);
    let vars: Vec<String> = df.names().map(str::to_string).collect();
    let space = ConditioningSpace::new(&df, &vars).unwrap();
    let rows = EncodedRows::from_frame(&df, &space, &(0..n).collect::<Vec<_>>());
    (df, rows)
}

fn square(rows: &EncodedRows) -> Vec<Vec<f64>> {
    let n = rows.len();
    (0..n).map(|i| (0..n).map(|j| rows.dissimilarity(i, j)).collect()).collect()
}

/// Seriation of up to 8 points against the shortest open path; returns the
/// ratio of the two lengths.
pub fn check_seriation_small(seed: u64) -> Result<f64, String> {
    let mut r = rng(seed);
    let n = r.random_range(2..=8);
    let (_, rows) = random_points(&mut r, n);
    let order = seriate(&rows);
    let mut sorted = order.clone();
    sorted.sort_unstable();
    ensure(sorted == (0..n).collect::<Vec<_>>(), || format!("{order:?} is not a permutation"))?;
    let d = square(&rows);
    let (got, best) = (path_length(&d, &order), optimal_path_length(&d));
    if best == 0.0 {
        ensure(got == 0.0, || format!("path {got} where a zero-length path exists"))?;
        return Ok(1.0);
    }
    let ratio = got / best;
    ensure(ratio <= 1.5 + 1e-12, || format!("seriated path {got} is {ratio:.3} times the optimum {best}"))?;
    Ok(ratio)
}

/// Whether seriating 20 random points gives a path no longer than visiting
/// them in the order given.
pub fn seriation_beats_identity(seed: u64) -> bool {
    let mut r = rng(seed);
    let (_, rows) = random_points(&mut r, 20);
    let d = square(&rows);
    let identity: Vec<usize> = (0..20).collect();
    path_length(&d, &seriate(&rows)) <= path_length(&d, &identity) * (1.0 + 1e-12)
}

/// Dense paths: `(l - 1) m + 1` points, the stops in place, even numeric
/// steps and categorical switches at the segment midpoint.
pub fn check_interpolation_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let l = r.random_range(2..=10);
    let m = r.random_range(1..=8);
    let stops: Vec<SectionPoint> = (0..l)
        .map(|_| {
            let mut p = SectionPoint::default();
            p.u_c.insert("x".into(), Value::Num(r.random_range(-5.0..5.0)));
            p.u_c.insert("g".into(), Value::Level(format!("l{}", r.random_range(0..3))));
            p.u_f.insert("h".into(), Value::Num(r.random_range(-1.0..1.0)));
            p
        })
        .collect();
    let path = interpolate(&stops, m).map_err(err)?;
    ensure(path.len() == (l - 1) * m + 1, || format!("{} points for l = {l}, m = {m}", path.len()))?;
    for (i, stop) in stops.iter().enumerate() {
        ensure(&path[i * m] == stop, || format!("stop {i} moved"))?;
    }
    let num = |p: &SectionPoint, k: &str| match (p.u_c.get(k).or(p.u_f.get(k))).unwrap() {
        Value::Num(v) => *v,
        v => panic!("{v:?}"),
    };
    for seg in 0..l - 1 {
        let (a, b) = (&stops[seg], &stops[seg + 1]);
        for key in ["x", "h"] {
            let step = (num(b, key) - num(a, key)) / m as f64;
            for j in 0..m {
                let d = num(&path[seg * m + j + 1], key) - num(&path[seg * m + j], key);
                ensure((d - step).abs() <= 1e-12, || format!("uneven step {d} vs {step} on `{key}`"))?;
            }
        }
        for j in 0..m {
            let want = if (j as f64) < m as f64 / 2.0 { &a.u_c["g"] } else { &b.u_c["g"] };
            ensure(&path[seg * m + j].u_c["g"] == want, || format!("category at step {j} of {m}"))?;
        }
    }
    Ok(())
}

/// PAM ends in a swap-local optimum whose reported cost is the true
/// clustering cost, never below the global optimum.
pub fn check_pam_case(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let n = r.random_range(3..=14);
    let k = r.random_range(1..=n.min(4));
    let (_, rows) = random_points(&mut r, n);
    let fit = pam(&rows, k, PamOptions { max_swaps: 10_000 }, &CancelToken::new(), None).map_err(err)?;
    let d = square(&rows);
    let set: BTreeSet<usize> = fit.medoids.iter().copied().collect();
    ensure(set.len() == k, || format!("medoids {:?} are not {k} distinct rows", fit.medoids))?;
    let cost = clustering_cost(&d, &fit.medoids);
    ensure((cost - fit.cost).abs() <= 1e-9 * cost.max(1.0), || format!("reported cost {} vs {cost}", fit.cost))?;
    let best = optimal_medoid_cost(&d, k);
    ensure(cost >= best - 1e-9 * best.max(1.0), || format!("cost {cost} below the optimum {best}"))?;
    for slot in 0..k {
        for cand in (0..n).filter(|c| !set.contains(c)) {
            let mut alt = fit.medoids.clone();
            alt[slot] = cand;
            let c = clustering_cost(&d, &alt);
            ensure(c >= cost - 1e-9 * cost.max(1.0), || format!("swapping in {cand} lowers the cost to {c} from {cost}"))?;
        }
    }
    Ok(())
}

/// A random run of mutations, then a replay of the logged ones from scratch;
/// everything the session shows must serialize to the same bytes.
pub fn check_replay_case(seed: u64) -> Result<usize, String> {
    let mut r = rng(seed);
    let n = r.random_range(30..=120);
    let coarse = r.random_bool(0.3);
    let base = mixed_frame(&mut r, n, 3, 1, 3, coarse);
    let x1 = base.column("x1").unwrap().as_numeric().unwrap().to_vec();
    let y: Vec<f64> = x1.iter().map(|v| 2.0 * v + r.random_range(-1.0..1.0)).collect();
    let df = Arc::new(with_column(&base, Column::numeric("y", y)));
    let inputs = strings(&["x1", "x2", "x3", "g1"]);
    let models = vec![
        fit_builtin(&BuiltinSpec::Linear, &df, Some("y"), &inputs).map_err(err)?,
        fit_builtin(&BuiltinSpec::Knn { k: 5 }, &df, Some("y"), &inputs).map_err(err)?.with_id("knn"),
    ];
    let roles = Roles::infer(&df, Some("y"), &strings(&["x1"]), &[]);
    let mut spec = SessionSpec::new(roles);
    spec.seed = seed;
    spec.resolution = Some(vec![21]);
    let mut s = Session::new("a", "d", df.clone(), models.clone(), spec.clone()).map_err(err)?;

    let kinds = [TourKind::Random, TourKind::Kmeans, TourKind::Kmed, TourKind::Lof, TourKind::Diffits, TourKind::AlongVar];
    let steps = r.random_range(5..25);
    for _ in 0..steps {
        let m = match r.random_range(0..8) {
            0 => {
                let v = Value::Num(r.random_range(-3.0..3.0));
                Mutation::SetPoint { values: [("x2".to_string(), v)].into() }
            }
            1 => Mutation::SetSigma { sigma: [0.5, 1.0, 2.0, f64::INFINITY][r.random_range(0..4)] },
            2 => Mutation::SetDistance { distance: DISTANCES[r.random_range(0..3)] },
            3 => Mutation::SetSectionVars { vars: vec![["x1", "x2", "x3", "g1"][r.random_range(0..4)].to_string()] },
            4 => Mutation::StartTour(TourRequest {
                kind: kinds[r.random_range(0..kinds.len())],
                length: r.random_range(2..8),
                seed: r.random_bool(0.5).then(|| r.random()),
                var: Some(["x2", "x3", "g1"][r.random_range(0..3)].to_string()),
                interpolate: r.random_bool(0.3).then(|| r.random_range(1..4)),
            }),
            5 | 6 => Mutation::TourStep { step: r.random_range(0..10) },
            _ => Mutation::SelectObservation { row: r.random_range(0..n) },
        };
        // rejected mutations leave no trace in the log
        let _ = s.apply(m);
    }
    let again = Session::replay("b", "d", df, models, spec, s.log()).map_err(err)?;
    let bytes = |x: &Session| -> Result<Vec<String>, String> {
        Ok(vec![
            serde_json::to_string(x.section()).map_err(|e| e.to_string())?,
            serde_json::to_string(&x.conditions().map_err(err)?).map_err(|e| e.to_string())?,
            serde_json::to_string(&x.tour()).map_err(|e| e.to_string())?,
            serde_json::to_string(x.point()).map_err(|e| e.to_string())?,
            serde_json::to_string(&x.step()).map_err(|e| e.to_string())?,
            serde_json::to_string(x.log()).map_err(|e| e.to_string())?,
        ])
    };
    let (a, b) = (bytes(&s)?, bytes(&again)?);
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        ensure(x == y, || format!("replayed output {i} differs"))?;
    }
    Ok(s.log().len())
}
