//! Localizability filtering and cold-start trajectory synthesis.
//!
//! Every processed entry is appended to a journal as soon as it finishes, so
//! an interrupted run resumes where it stopped. Final outputs are rebuilt
//! from the journal in manifest order on every run.

use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::thread;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use geovista_core::agent::Toolbox;
use geovista_core::chat::ImagePart;
use geovista_core::curation::{
    filter_localizability, lint_answers, propose_and_execute, sft_record, AnswerLint, ChatJudge, ChatProposer,
    FilterDecision, LocalizabilityJudge, ManifestEntry, Proposer, SftRecord,
};
use geovista_core::tools::{downsample_to_budget, load_image, ImageStore};

use super::{load_manifest, question};
use crate::config::RunConfig;
use crate::output::{header, write_atomic, write_json, write_jsonl};

pub const JOURNAL: &str = "curation_journal.jsonl";
pub const DROP_LOG: &str = "drop_log.jsonl";
pub const KEPT_MANIFEST: &str = "kept_manifest.jsonl";
pub const SFT: &str = "sft.jsonl";
pub const FAILURES: &str = "curation_failures.jsonl";
pub const LINT: &str = "answer_lint.jsonl";
pub const SUMMARY: &str = "curate_summary.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Dropped,
    Curated,
    /// Retried on the next run.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub sample_id: String,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<FilterDecision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_proposals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sft: Option<SftRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lint: Option<AnswerLint>,
}

#[derive(Debug, Serialize)]
struct Summary {
    entries: usize,
    processed_this_run: usize,
    kept: usize,
    dropped: usize,
    curated: usize,
    failed: usize,
    flagged: usize,
    lint_findings: usize,
}

/// Latest journal entry per sample id. A torn final line from an interrupted
/// run is ignored.
fn read_journal(path: &Path) -> Result<HashMap<String, JournalEntry>> {
    let mut latest = HashMap::new();
    let Ok(file) = std::fs::File::open(path) else { return Ok(latest) };
    for line in BufReader::new(file).lines() {
        let line = line?;
        match serde_json::from_str::<JournalEntry>(&line) {
            Ok(entry) => {
                latest.insert(entry.sample_id.clone(), entry);
            }
            Err(e) if !line.trim().is_empty() => log::warn!("skipping unreadable journal line: {e}"),
            Err(_) => {}
        }
    }
    Ok(latest)
}

struct Worker<'a> {
    config: &'a RunConfig,
    base: &'a Path,
    judge: &'a dyn LocalizabilityJudge,
    proposer: &'a dyn Proposer,
    toolbox: &'a Toolbox,
    question: &'a str,
}

impl Worker<'_> {
    fn process(&self, entry: &ManifestEntry) -> JournalEntry {
        let mut out = JournalEntry {
            sample_id: entry.sample_id.clone(),
            status: EntryStatus::Failed,
            decision: None,
            error: None,
            dropped_proposals: Vec::new(),
            sft: None,
            lint: None,
        };
        if let Err(e) = self.curate(entry, &mut out) {
            log::warn!("{}: {e:#}", entry.sample_id);
            out.status = EntryStatus::Failed;
            out.error = Some(format!("{e:#}"));
        }
        out
    }

    fn curate(&self, entry: &ManifestEntry, out: &mut JournalEntry) -> Result<()> {
        let path = self.base_path(entry);
        let image = Arc::new(load_image(&path)?);
        let budget = self.config.loop_config.pixel_budget;
        let shown = downsample_to_budget(path.display().to_string(), Arc::clone(&image), budget)?;
        let part = ImagePart::from_image(&shown.presented)?;
        let decision = filter_localizability(&entry.sample_id, &part, self.judge);
        let keep = decision.keep;
        out.decision = Some(decision);
        if !keep {
            out.status = EntryStatus::Dropped;
            return Ok(());
        }
        let curated = propose_and_execute(
            &entry.sample_id,
            image,
            self.proposer,
            self.toolbox,
            &self.config.loop_config,
            self.config.curation.turn_budget,
        )?;
        out.sft = Some(sft_record(&curated.trajectory, &curated.input_image.path, self.question)?);
        if self.config.curation.lint_answers {
            let label = entry.label()?;
            out.lint = lint_answers([(&curated.trajectory, &label)]).pop();
        }
        out.dropped_proposals = curated.dropped;
        out.status = EntryStatus::Curated;
        Ok(())
    }

    fn base_path(&self, entry: &ManifestEntry) -> PathBuf {
        entry.resolve_image(self.base)
    }
}

pub fn run(config: &RunConfig, limit: Option<usize>) -> Result<()> {
    let (entries, base) = load_manifest(config, limit)?;
    let judge_cfg = config.judge.as_ref().context("curation needs a [judge] section")?;
    let proposer_cfg = config.proposer.as_ref().context("curation needs a [proposer] section")?;
    let judge = ChatJudge::new(judge_cfg.client()?);
    let proposer = ChatProposer::new(proposer_cfg.client()?);
    let toolbox = Toolbox::new(config.search_provider()?, ImageStore::new(&config.paths.out));
    let q = question(config);

    let out_dir = &config.paths.out;
    std::fs::create_dir_all(out_dir)?;
    let journal_path = out_dir.join(JOURNAL);
    let mut journal = read_journal(&journal_path)?;
    let pending: Vec<&ManifestEntry> = entries
        .iter()
        .filter(|e| journal.get(&e.sample_id).is_none_or(|j| j.status == EntryStatus::Failed))
        .collect();
    log::info!("{} of {} entries to process", pending.len(), entries.len());

    let worker = Worker { config, base: &base, judge: &judge, proposer: &proposer, toolbox: &toolbox, question: &q };
    let mut sink = OpenOptions::new().create(true).append(true).open(&journal_path)?;
    let next = AtomicUsize::new(0);
    let processed = thread::scope(|scope| -> Result<usize> {
        let (tx, rx) = mpsc::sync_channel::<JournalEntry>(config.workers * 2);
        for _ in 0..config.workers.min(pending.len()) {
            let tx = tx.clone();
            let (worker, pending, next) = (&worker, &pending, &next);
            scope.spawn(move || {
                while let Some(entry) = pending.get(next.fetch_add(1, Ordering::Relaxed)) {
                    if tx.send(worker.process(entry)).is_err() {
                        break;
                    }
                }
            });
        }
        drop(tx);
        let mut n = 0;
        for record in rx {
            writeln!(sink, "{}", serde_json::to_string(&record)?)?;
            sink.flush()?;
            journal.insert(record.sample_id.clone(), record);
            n += 1;
        }
        Ok(n)
    })?;

    let ordered: Vec<(&ManifestEntry, &JournalEntry)> =
        entries.iter().filter_map(|e| journal.get(&e.sample_id).map(|j| (e, j))).collect();
    let drops: Vec<&FilterDecision> = ordered
        .iter()
        .filter(|(_, j)| j.status == EntryStatus::Dropped)
        .filter_map(|(_, j)| j.decision.as_ref())
        .collect();
    let kept: Vec<&ManifestEntry> = ordered
        .iter()
        .filter(|(_, j)| j.decision.as_ref().is_some_and(|d| d.keep))
        .map(|(e, _)| *e)
        .collect();
    let sft: Vec<&SftRecord> = ordered.iter().filter_map(|(_, j)| j.sft.as_ref()).collect();
    let failures: Vec<&JournalEntry> = ordered.iter().filter(|(_, j)| j.status == EntryStatus::Failed).map(|(_, j)| *j).collect();
    let lints: Vec<&AnswerLint> = ordered.iter().filter_map(|(_, j)| j.lint.as_ref()).collect();

    write_jsonl(&out_dir.join(DROP_LOG), &header("drop_log", config), &drops)?;
    write_jsonl(&out_dir.join(KEPT_MANIFEST), &header("kept_manifest", config), &kept)?;
    write_jsonl(&out_dir.join(FAILURES), &header("curation_failures", config), &failures)?;
    write_jsonl(&out_dir.join(LINT), &header("answer_lint", config), &lints)?;
    let mut sft_text = String::new();
    for r in &sft {
        sft_text.push_str(&serde_json::to_string(r)?);
        sft_text.push('\n');
    }
    write_atomic(&out_dir.join(SFT), sft_text.as_bytes())?;
    let summary = Summary {
        entries: entries.len(),
        processed_this_run: processed,
        kept: kept.len(),
        dropped: drops.len(),
        curated: sft.len(),
        failed: failures.len(),
        flagged: ordered.iter().filter(|(_, j)| j.decision.as_ref().is_some_and(|d| d.flag.is_some())).count(),
        lint_findings: lints.len(),
    };
    write_json(&out_dir.join(SUMMARY), &header("curate_summary", config), &summary)?;
    println!(
        "{} entries: {} dropped, {} curated, {} failed",
        summary.entries, summary.dropped, summary.curated, summary.failed
    );
    Ok(())
}
