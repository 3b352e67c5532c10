//! `eval`: build the mixed classifier over large and few-shot categories,
//! report top-1/top-5 per split next to the cosine nearest-neighbor
//! baseline.
//!
//! Every accuracy is computed against the full candidate set (large plus
//! few); "split" only selects which queries are counted. The baseline uses
//! the large store plus the few-shot references as its reference samples.

use std::fs;

use actpred_core::{
    build_classifier, compute_means, nn_cosine_baseline, top_k_accuracy, ActivationStore,
    EvalEntry, EvalReport,
};

use crate::config::{resolve_eval, EvalArgs};
use crate::error::{read_err, runtime, validation, write_err, CmdError};
use crate::format;

pub fn run(args: &EvalArgs) -> Result<(), CmdError> {
    let cfg = resolve_eval(args)?;

    let model = format::read_checkpoint(&cfg.checkpoint).map_err(read_err)?;
    let large = format::read_store_binary(&cfg.large).map_err(read_err)?;
    let few_train = format::read_store_binary(&cfg.few_train).map_err(read_err)?;
    let few_test = format::read_store_binary(&cfg.few_test).map_err(read_err)?;

    for (name, store) in [
        ("large", &large),
        ("few_train", &few_train),
        ("few_test", &few_test),
    ] {
        if store.dim() != model.dim() {
            return Err(validation(format!(
                "dimension mismatch: checkpoint dim {} vs {} store dim {}",
                model.dim(),
                name,
                store.dim()
            )));
        }
    }

    let references = match cfg.shots {
        None => few_train.clone(),
        Some(shots) => first_shots(&few_train, shots)?,
    };

    let means_large = compute_means(&large);
    let classifier = build_classifier(&model, &means_large, &references)?;

    // Baseline reference set: all large samples plus the few-shot
    // references actually in use.
    let mut baseline_samples = large.samples().to_vec();
    baseline_samples.extend_from_slice(references.samples());
    let baseline_refs = ActivationStore::from_samples(large.dim(), baseline_samples)?;

    let mut report = EvalReport::default();
    for (label, queries) in [("large", &large), ("few", &few_test)] {
        report.entries.push(EvalEntry {
            label: format!("model/{label}"),
            top1: top_k_accuracy(&classifier, queries, 1, None)?,
            top5: top_k_accuracy(&classifier, queries, 5, None)?,
        });
        report.entries.push(EvalEntry {
            label: format!("baseline/{label}"),
            top1: nn_cosine_baseline(&baseline_refs, queries, 1)?,
            top5: nn_cosine_baseline(&baseline_refs, queries, 5)?,
        });
    }

    fs::create_dir_all(&cfg.out_dir).map_err(runtime)?;
    let mut pairs = Vec::new();
    let mut records = Vec::new();
    for entry in &report.entries {
        for (metric, acc) in [("top1", entry.top1), ("top5", entry.top5)] {
            let key = format!("{}.{metric}", entry.label.replace('/', "."));
            pairs.push((key.clone(), format!("{:.6}", acc.value())));
            pairs.push((format!("{key}.correct"), acc.correct.to_string()));
            pairs.push((format!("{key}.count"), acc.count.to_string()));
            records.push((
                format!(
                    "{}_{metric}",
                    if entry.label.starts_with("baseline") {
                        "baseline"
                    } else {
                        "model"
                    }
                ),
                entry.label.split('/').nth(1).unwrap().to_string(),
                acc.value(),
            ));
        }
        println!(
            "{}: top1 {:.4} ({}/{}), top5 {:.4} ({}/{})",
            entry.label,
            entry.top1.value(),
            entry.top1.correct,
            entry.top1.count,
            entry.top5.value(),
            entry.top5.correct,
            entry.top5.count,
        );
    }

    let txt = cfg.out_dir.join("eval.txt");
    let csv = cfg.out_dir.join("eval.csv");
    format::write_key_values(&txt, &pairs).map_err(write_err)?;
    format::write_metric_records(&csv, &records).map_err(write_err)?;
    println!("wrote {}", txt.display());
    println!("wrote {}", csv.display());
    Ok(())
}

/// Keeps the first `shots` reference samples per category, in store order.
fn first_shots(store: &ActivationStore, shots: usize) -> Result<ActivationStore, CmdError> {
    if shots < 1 {
        return Err(validation("shots must be >= 1"));
    }
    let mut samples = Vec::new();
    for category in store.categories() {
        let positions = store.positions(category)?;
        if positions.len() < shots {
            return Err(validation(format!(
                "category {category} has {} reference samples, {shots} shots requested",
                positions.len()
            )));
        }
        for &p in positions.iter().take(shots) {
            samples.push((category, store.vector(p).to_vec()));
        }
    }
    Ok(ActivationStore::from_samples(store.dim(), samples)?)
}
