//! Every experiment definition shipped under data/experiments parses,
//! validates cleanly, and expands to the expected run plan size.

use proctor_core::config::{parse_experiment_config, validate_config, ExperimentConfig};
use proctor_core::plan::enumerate_run_plan;
use proctor_core::questionnaire::invert_questionnaire_options;

fn load(name: &str) -> ExperimentConfig {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/experiments");
    let json = std::fs::read_to_string(format!("{dir}/{name}")).unwrap();
    parse_experiment_config(&json).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_shipped_config_validates_cleanly() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/experiments");
    let mut checked = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let name = path.file_name().unwrap().to_str().unwrap().to_owned();
        let config = load(&name);
        let violations = validate_config(&config);
        assert!(violations.is_empty(), "{name}: {violations:?}");
        checked += 1;
    }
    assert!(checked >= 7, "expected the full corpus, found {checked} configs");
}

#[test]
fn run_plans_have_the_documented_cardinalities() {
    // 250 personas, one seed, one repetition; tasks = questions x personas.
    for (name, expected) in [
        ("rfq.json", 11 * 250),
        ("bfi.json", 44 * 250),
        ("gsdb.json", 23 * 250),
        ("trolley.json", 3 * 250),
        ("bdi.json", 21 * 250),
        ("bdi_reversed.json", 21 * 250),
        ("rfq_mock_desk.json", 11 * 20),
        ("rfq_remote.json", 11 * 20),
    ] {
        let plan = enumerate_run_plan(&load(name)).unwrap();
        assert_eq!(plan.len(), expected, "{name}");
    }
}

#[test]
fn reversed_inventory_is_the_inversion_of_the_original() {
    let original = load("bdi.json");
    let reversed = load("bdi_reversed.json");
    let inverted = invert_questionnaire_options(&original.questionnaire).unwrap();
    assert_eq!(reversed.questionnaire, inverted);
    assert_eq!(reversed.name, "bdi-reversed");
}

#[test]
fn remote_config_never_embeds_credentials() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/experiments");
    let raw = std::fs::read_to_string(format!("{dir}/rfq_remote.json")).unwrap();
    let config = load("rfq_remote.json");
    let model = &config.models[0];
    assert_eq!(model.auth_env.as_deref(), Some("OPENAI_API_KEY"));
    // The config names the variable; the key itself must never appear.
    assert!(!raw.to_lowercase().contains("sk-"));
}
