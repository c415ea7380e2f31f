use proptest::prelude::*;
use servobench::batch::{parse_manifest, BatchReport, ManifestEntry, TaskCategory, TaskRecord};
use servobench_core::geometry::ConstraintKind;

fn category() -> impl Strategy<Value = TaskCategory> {
    prop_oneof![Just(TaskCategory::Food), Just(TaskCategory::MarkerPen), Just(TaskCategory::Utility), Just(TaskCategory::Custom)]
}

fn entry() -> impl Strategy<Value = ManifestEntry> {
    (
        "[a-z][a-z ]{0,15}",
        "[a-z]{1,8}\\.json",
        "[a-zA-Z][a-zA-Z ,.'-]{0,30}",
        prop::collection::vec(prop::sample::select(ConstraintKind::ALL.to_vec()), 1..4),
        category(),
    )
        .prop_map(|(name, scene, prompt, kinds, category)| ManifestEntry { name, scene: scene.into(), prompt, kinds, category })
}

proptest! {
    #[test]
    fn manifest_lines_round_trip(entries in prop::collection::vec(entry(), 0..12), comment in "# [ -~]{0,20}") {
        let mut text = format!("{comment}\n\n");
        for e in &entries {
            text.push_str(&serde_json::to_string(e).unwrap());
            text.push('\n');
        }
        prop_assert_eq!(parse_manifest(&text).unwrap(), entries);
    }

    #[test]
    fn report_rows_sum_to_records(records in prop::collection::vec((category(), 1u32..=3, any::<bool>()), 1..30)) {
        let tasks: Vec<TaskRecord> = records
            .iter()
            .enumerate()
            .map(|(i, &(category, attempts_used, success))| TaskRecord {
                task: format!("t{i}"),
                category,
                attempts_used,
                success,
                outcome: if success { "Converged" } else { "StepLimit" }.into(),
            })
            .collect();
        let r = BatchReport::from_records(tasks.clone());
        prop_assert_eq!(r.categories.iter().map(|c| c.tasks).sum::<usize>(), tasks.len());
        prop_assert_eq!(r.categories.iter().map(|c| c.successes).sum::<usize>(), tasks.iter().filter(|t| t.success).count());
        for c in &r.categories {
            prop_assert!(c.success_rate >= 0.0 && c.success_rate <= 1.0);
            prop_assert_eq!(c.success_rate, c.successes as f64 / c.tasks as f64);
        }
        prop_assert!(r.categories.windows(2).all(|w| w[0].category < w[1].category));
        prop_assert_eq!(r.to_csv().lines().count(), r.categories.len() + 1);
    }
}
