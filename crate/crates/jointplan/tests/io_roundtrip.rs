use jointplan::generate::{generate_workload, random_workload, RandomShape};
use jointplan::io::{load_profiles, load_workload, profiles_csv, save_workload, write_file};
use jointplan_core::{build_profile_table, SyntheticExecutor};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn workload_and_profiles_survive_files(seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let w = random_workload(seed, &RandomShape::default());
        let path = dir.path().join("w.json");
        save_workload(&path, &w).unwrap();
        prop_assert_eq!(load_workload(&path).unwrap(), w.clone());

        let table = build_profile_table(&w, &SyntheticExecutor::for_cluster(w.cluster())).unwrap();
        let csv = dir.path().join("p.csv");
        write_file(&csv, &profiles_csv(&table)).unwrap();
        let back = load_profiles(&csv).unwrap();
        prop_assert_eq!(back.len(), table.len());
        for (key, lat) in table.iter() {
            prop_assert_eq!(back.get(&key.job, &key.technique, key.gpus), Some(lat));
        }
    }
}

#[test]
fn preset_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let w = generate_workload("wikitext_mirror", 2, 7).unwrap();
    let path = dir.path().join("w.json");
    save_workload(&path, &w).unwrap();
    assert_eq!(load_workload(&path).unwrap(), w);
}
