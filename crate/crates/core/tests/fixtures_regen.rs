//! Regenerates the committed derived fixtures: the aqua-mini transcript
//! store and the prompt golden files.
//!
//! Run explicitly after intentional prompt or fixture changes:
//!
//! ```bash
//! REGEN_FIXTURES=1 cargo test -p divse-core --test fixtures_regen -- --ignored
//! ```

mod common;

use common::{aqua_fixture_gateway, compose_golden, fixtures_dir, golden_sources, render_golden};
use divse_core::compose::PromptMode;
use divse_core::gateway::{RecordingGateway, TranscriptStore};
use divse_core::runner::{run, RunConfig};
use divse_core::strategy::StrategyBundle;
use divse_core::task::{load_dataset, TaskId};

fn aqua_config(mode: PromptMode) -> RunConfig {
    let mut config = RunConfig::new(TaskId::Aqua, mode, "gpt-4");
    config.prices = divse_core::gateway::PriceTable::gpt4();
    config.ensemble_size = Some(5);
    config.few_shot = true;
    config
}

#[test]
#[ignore = "writes into fixtures/; run with REGEN_FIXTURES=1"]
fn regenerate_fixtures() {
    if std::env::var("REGEN_FIXTURES").as_deref() != Ok("1") {
        eprintln!("REGEN_FIXTURES not set; nothing regenerated");
        return;
    }

    // Transcripts: drive the real runner through a recording gateway backed
    // by the scripted fixture replies.
    let transcripts = fixtures_dir().join("aqua_mini/transcripts");
    if transcripts.exists() {
        std::fs::remove_dir_all(&transcripts).unwrap();
    }
    let store = TranscriptStore::open(&transcripts).unwrap();
    let gateway = RecordingGateway::new(aqua_fixture_gateway(), store);
    let items = load_dataset(TaskId::Aqua, fixtures_dir().join("aqua_mini/dataset.jsonl")).unwrap();
    let bundle = StrategyBundle::load(fixtures_dir().join("aqua_mini/bundle.json")).unwrap();

    for mode in [PromptMode::DivSe, PromptMode::IdivSe] {
        let output = run(&aqua_config(mode), &items, Some(&bundle), &gateway).unwrap();
        assert_eq!(
            output.summary.n_items, 5,
            "{mode:?} fixture run covers all items"
        );
        eprintln!(
            "{mode:?}: accuracy {}/{} cost {}",
            output.summary.n_correct, output.summary.n_items, output.summary.total_cost
        );
    }

    // Prompt golden files for every task fixture, both ensemble modes.
    let golden_dir = fixtures_dir().join("golden");
    std::fs::create_dir_all(&golden_dir).unwrap();
    for (task, dataset, bundle_path) in golden_sources() {
        for mode in [PromptMode::DivSe, PromptMode::IdivSe] {
            let prompts = compose_golden(task, &dataset, &bundle_path, mode);
            let path = golden_dir.join(format!("{}_{}.txt", task, mode.as_str()));
            std::fs::write(&path, render_golden(&prompts)).unwrap();
            eprintln!("wrote {}", path.display());
        }
    }
}
