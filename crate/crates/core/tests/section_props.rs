mod oracles;

use proptest::prelude::*;
use slicevis_core::section::{plot_type, PlotType};
use slicevis_core::{ColumnKind, PredictionKind};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn section_agrees_with_the_oracles(seed in any::<u64>()) {
        if let Err(e) = oracles::checks::check_section_case(seed) {
            return Err(TestCaseError::fail(format!("{e} (seed {seed})")));
        }
    }
}

const KINDS: [Option<PredictionKind>; 6] = [
    None,
    Some(PredictionKind::Numeric),
    Some(PredictionKind::Class),
    Some(PredictionKind::ProbMatrix),
    Some(PredictionKind::Density),
    Some(PredictionKind::ClusterId),
];

#[test]
fn every_layout_has_a_plot_type() {
    let cols = [ColumnKind::Numeric, ColumnKind::Categorical];
    for pred in KINDS {
        for levels in 0..6 {
            assert!(plot_type(&[], pred, levels).is_err());
            assert!(plot_type(&[ColumnKind::Numeric; 3], pred, levels).is_err());
            for a in cols {
                let one = plot_type(&[a], pred, levels).unwrap();
                assert!(matches!(one, PlotType::Curve | PlotType::ProbabilityCurve | PlotType::Bars));
                for b in cols {
                    let two = plot_type(&[a, b], pred, levels).unwrap();
                    let both_numeric = a == ColumnKind::Numeric && b == ColumnKind::Numeric;
                    assert_eq!(both_numeric, matches!(two, PlotType::Image | PlotType::BinnedBars), "{a:?} {b:?} {pred:?}");
                    let multiclass = pred == Some(PredictionKind::ProbMatrix) && levels > 2;
                    assert_eq!(two.is_bar_array(), multiclass);
                    assert_eq!(one.is_bar_array(), multiclass);
                }
            }
        }
    }
}
