mod oracles;

use proptest::prelude::*;
use slicevis_core::frame::{ingest_csv, medoid, SchemaOverride};
use slicevis_core::{Column, ColumnKind, DataFrame, Error};

fn names(df: &DataFrame) -> Vec<String> {
    df.names().map(str::to_string).collect()
}

fn rescaled(df: &DataFrame, col: usize, factor: f64) -> DataFrame {
    let cols = df
        .columns()
        .iter()
        .enumerate()
        .map(|(j, c)| match (j == col, c.as_numeric()) {
            (true, Some(x)) => Column::numeric(c.name(), x.iter().map(|v| v * factor).collect()),
            _ => c.clone(),
        })
        .collect();
    DataFrame::new(cols).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn medoid_matches_exhaustive_search(seed in any::<u64>(), n in 1usize..200, num in 0usize..4, cat in 0usize..3, coarse in any::<bool>()) {
        let num = num.max(usize::from(cat == 0));
        let df = oracles::mixed_frame(&mut oracles::rng(seed), n, num, cat, 3, coarse);
        let vars = names(&df);
        match medoid(&df, &vars, 4000, 0) {
            Ok(m) => prop_assert_eq!(m, oracles::medoid(&df, &vars)),
            Err(Error::AllConstant) => {
                // only when no variable varies
                let d = oracles::dissimilarity_matrix(&df, &vars);
                prop_assert!(n > 1 && d.iter().flatten().all(|&x| x == 0.0));
            }
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn medoid_ignores_column_scale(seed in any::<u64>(), n in 2usize..80, num in 1usize..4, cat in 0usize..2, factor in 0.001f64..1000.0) {
        let df = oracles::mixed_frame(&mut oracles::rng(seed), n, num, cat, 3, false);
        let vars = names(&df);
        let col = (seed % num as u64) as usize;
        let a = medoid(&df, &vars, 4000, 0);
        let b = medoid(&rescaled(&df, col, factor), &vars, 4000, 0);
        prop_assert_eq!(a.ok(), b.ok());
    }

    #[test]
    fn ingest_round_trip_is_idempotent(seed in any::<u64>(), n in 1usize..60, num in 0usize..4, cat in 0usize..3) {
        let num = num.max(usize::from(cat == 0));
        let df = oracles::mixed_frame(&mut oracles::rng(seed), n, num, cat, 4, seed % 2 == 0);
        let csv = df.to_csv().unwrap();
        let (once, _) = ingest_csv(csv.as_bytes(), &SchemaOverride::new()).unwrap();
        let (twice, _) = ingest_csv(once.to_csv().unwrap().as_bytes(), &SchemaOverride::new()).unwrap();
        prop_assert_eq!(&once, &twice);
        for (a, b) in df.columns().iter().zip(once.columns()) {
            prop_assert_eq!(a.kind(), b.kind());
            for i in 0..n {
                prop_assert_eq!(a.value(i), b.value(i));
            }
        }
    }
}

#[test]
fn medoid_subsamples_beyond_the_cap() {
    let df = oracles::mixed_frame(&mut oracles::rng(3), 500, 2, 1, 3, false);
    let vars = names(&df);
    let a = medoid(&df, &vars, 100, 7).unwrap();
    assert_eq!(a, medoid(&df, &vars, 100, 7).unwrap());
    assert!(a < 500);
    assert_eq!(df.column("g1").unwrap().kind(), ColumnKind::Categorical);
}
