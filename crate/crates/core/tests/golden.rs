use bevinst::sim::{format_scenario, parse_scenario, simulate, ScenarioConfig};

const GOLDEN: &str = include_str!("data/scenario_seed42.txt");

#[test]
fn seed_42_scenario_matches_golden_file() {
    let s = simulate(&ScenarioConfig::long_range(10, 20, 42)).unwrap();
    let text = format_scenario(&s);
    if std::env::var_os("BEVINST_BLESS").is_some() {
        std::fs::write(
            concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/tests/data/scenario_seed42.txt"
            ),
            &text,
        )
        .unwrap();
    }
    assert_eq!(text, GOLDEN);
    assert_eq!(parse_scenario(GOLDEN).unwrap(), s);
}
