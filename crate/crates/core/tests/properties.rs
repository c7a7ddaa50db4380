use lfc::codec::container::{read_container, write_container, ContainerHeader, CONTAINER_VERSION};
use lfc::codec::CodecId;
use lfc::lightfield::{AngularGrid, LightField, View};
use lfc::pattern::{partition_views, merge_subsets, PatternKind, PredictionPattern};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_then_merge_is_identity(rs in 0usize..4, ts in 0usize..4, h2 in any::<bool>()) {
        // C2 is bundled for square grids of side 3 and up
        prop_assume!(h2 || (rs == ts && rs > 0));
        let grid = AngularGrid::new(rs, ts);
        let lf = LightField::from_fn(grid, |c| View::filled(2, 3, (c.s * 10 + c.t) as f64 / 100.0 + 0.5)).unwrap();
        let kind = if h2 { PatternKind::Hierarchical2 } else { PatternKind::Circular2 };
        let pattern = PredictionPattern::builtin(kind, grid).unwrap();
        let (a, b) = partition_views(&lf, &pattern).unwrap();
        prop_assert_eq!(a.len() + b.len(), grid.len());
        prop_assert!(!a.is_empty());
        prop_assert_eq!(merge_subsets(&a, &b).unwrap(), lf);
    }

    #[test]
    fn container_round_trip(
        sections in prop::collection::vec(prop::collection::vec(any::<u8>(), 0..64), 0..6),
        rows in 0u8..8, cols in 0u8..8, rank in any::<u16>(), qp in 0u8..=51, flags in 0u8..4,
        lambda in 0.0f64..1.0, h2 in any::<bool>(),
    ) {
        let header = ContainerHeader {
            version: CONTAINER_VERSION,
            pattern: if h2 { PatternKind::Hierarchical2 } else { PatternKind::Circular2 },
            codec: CodecId::FallbackQdct,
            grid_rows: 2 * rows + 1,
            grid_cols: 2 * cols + 1,
            height: 16,
            width: 24,
            rank,
            qp,
            flags,
            lambda,
        };
        let bytes = write_container(&header, &sections);
        let bs = read_container(&bytes).unwrap();
        prop_assert_eq!(&bs.header, &header);
        prop_assert_eq!(&bs.sections, &sections);
        prop_assert!(read_container(&bytes[..bytes.len().saturating_sub(1)]).is_err() || sections.iter().all(Vec::is_empty));
    }
}
