//! File formats survive the round trip. The CSV writer is hand-rolled, so
//! the `csv` crate acts as the independent reader here.

use proctor_core::analysis::{aggregate, AggregateRow, AggregateTable};
use proctor_core::config::StatConfig;
use proctor_core::export::{read_jsonl, write_csv, write_jsonl, JsonlFile};
use proctor_core::judge::{JudgeMethod, Judgment, OptionScore, Verdict};
use proctor_core::persona::Persona;
use proctor_core::plan::RunTask;
use proctor_core::prompt::PromptVariant;
use proctor_core::record::ResponseRecord;
use proctor_core::scoring::ScoreRecord;
use proctor_core::validity::Validity;

fn record(surname: &str, seed: u64) -> ResponseRecord {
    ResponseRecord {
        task: RunTask {
            model_id: "mock-respondent".into(),
            persona: Persona::new("Ms.", surname, "asian").unwrap(),
            question_id: "q1".into(),
            seed,
            repetition_index: 0,
            prompt_variant: PromptVariant::Json,
        },
        raw_text: "{\"answer\": \"3. sometimes\"}".into(),
        cleaned_text: "{\"answer\": \"3. sometimes\"}".into(),
        extracted_answer: Some("3. sometimes".into()),
        validity: Validity::Valid,
        judgment: Some(Judgment {
            method: JudgeMethod::Rule,
            verdict: Verdict::Matched { option: "3".into() },
            scores: vec![OptionScore { option: "3".into(), score: 2.0 }],
            entropy: None,
        }),
    }
}

#[test]
fn response_records_round_trip_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("responses.jsonl");
    let records = vec![record("Kim", 42), record("Zhang", 43)];
    write_jsonl(&path, &records).unwrap();
    let back: JsonlFile<ResponseRecord> = read_jsonl(&path).unwrap();
    assert_eq!(back.records, records);
    assert!(!back.truncated);
}

fn score(group: &str, surname: &str, value: f64) -> ScoreRecord {
    ScoreRecord {
        model_id: "mock-respondent".into(),
        persona: Persona::new("Ms.", surname, group).unwrap(),
        seed: 42,
        repetition_index: 0,
        scale: "promotion".into(),
        value: Some(value),
        n_items: 6,
        n_missing: 0,
    }
}

#[test]
fn aggregate_csv_reads_back_with_an_independent_parser() {
    let scores = vec![
        score("asian", "Kim", 3.5),
        score("asian", "Zhang", 3.0),
        score("white", "Smith", 4.0),
        score("white", "Olson", 4.5),
    ];
    let stats = StatConfig { bootstrap_iterations: 200, confidence_level: 0.95, rng_seed: 7 };
    let table = aggregate(&scores, &["group".into()], &stats).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    write_csv(&path, &table).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(
        headers,
        vec!["group", "scale", "mean", "ci_low", "ci_high", "n", "n_missing_total"]
    );
    let rows: Vec<Vec<String>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "asian");
    assert_eq!(rows[0][1], "promotion");
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 3.25);
    assert_eq!(rows[1][0], "white");
    assert_eq!(rows[1][2].parse::<f64>().unwrap(), 4.25);
    for row in &rows {
        assert_eq!(row[5].parse::<usize>().unwrap(), 2);
        let low: f64 = row[3].parse().unwrap();
        let high: f64 = row[4].parse().unwrap();
        assert!(low <= high);
    }
}

#[test]
fn csv_escaping_survives_hostile_field_values() {
    let table = AggregateTable {
        key_names: vec!["group".into()],
        rows: vec![AggregateRow {
            keys: vec!["quoted \"name\", with comma\nand break".into()],
            scale: "total".into(),
            mean: 1.5,
            ci_low: 1.0,
            ci_high: 2.0,
            n: 3,
            n_missing_total: 0,
        }],
    };
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hostile.csv");
    write_csv(&path, &table).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][0], "quoted \"name\", with comma\nand break");
    assert_eq!(&rows[0][1], "total");
}
