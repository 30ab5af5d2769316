//! Subcommand implementations. Each returns a typed error that maps to
//! the documented exit codes: data problems exit 2, operational
//! failures exit 3 (usage problems never reach this module).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use preictal_core::deepnet::save_network;
use preictal_core::dimred::save_pipeline;
use preictal_core::eval::{
    fit_dataset, run_baseline, run_loocv, window_accuracy, ConfusionMatrix, EvalError,
    MetricsReport,
};
use preictal_core::signal::{segment_from_bytes, segment_to_bytes, EegSegment};
use preictal_core::Scalar;
use preictal_net::{
    rtt_bench, serve, stream_segments, ClientError, RttConfig, ServeConfig, StreamConfig,
};
use thiserror::Error;

use crate::config::RunConfig;

pub const MANIFEST_NAME: &str = "manifest.txt";
pub const MODEL_NAME: &str = "model.saen";
pub const DIMRED_NAME: &str = "reduction.dred";
pub const REPORT_TEXT_NAME: &str = "report.txt";
pub const REPORT_KV_NAME: &str = "report.kv";

#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Data(_) => 2,
            CmdError::Runtime(_) => 3,
        }
    }
}

/// Filesystem problems are operational, not data, errors.
fn io_err(what: &str, path: &Path, e: io::Error) -> CmdError {
    CmdError::Runtime(format!("cannot {what} {}: {e}", path.display()))
}

fn eval_err(e: EvalError) -> CmdError {
    match e {
        // Training failures are the one operational way the pipeline
        // itself can give up; everything else reflects the inputs.
        EvalError::Train(e) => CmdError::Runtime(e.to_string()),
        other => CmdError::Data(other.to_string()),
    }
}

fn client_err(e: ClientError) -> CmdError {
    match e {
        ClientError::SegmentFile { .. } | ClientError::SegmentFormat { .. } => {
            CmdError::Data(e.to_string())
        }
        other => CmdError::Runtime(other.to_string()),
    }
}

/// Writes the synthetic dataset and its manifest under `out`.
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> Result<(), CmdError> {
    let segments =
        preictal_core::signal::generate_synthetic_dataset(&cfg.gen).map_err(|e| CmdError::Data(e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| io_err("create directory", out, e))?;

    let mut manifest = String::new();
    for seg in &segments {
        let name = format!("{}.eeg", seg.segment_id);
        let bytes = segment_to_bytes(seg).map_err(|e| CmdError::Data(e.to_string()))?;
        let path = out.join(&name);
        fs::write(&path, bytes).map_err(|e| io_err("write", &path, e))?;
        manifest.push_str(&name);
        manifest.push('\n');
    }
    let manifest_path = out.join(MANIFEST_NAME);
    fs::write(&manifest_path, manifest).map_err(|e| io_err("write", &manifest_path, e))?;

    println!("wrote {} segments and {} to {}", segments.len(), MANIFEST_NAME, out.display());
    Ok(())
}

/// Loads every segment named by a dataset directory's manifest, in
/// manifest order.
pub fn load_dataset(dir: &Path) -> Result<Vec<EegSegment>, CmdError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let manifest = fs::read_to_string(&manifest_path)
        .map_err(|e| CmdError::Data(format!("cannot read {}: {e}", manifest_path.display())))?;

    let mut segments = Vec::new();
    for name in manifest.lines().filter(|l| !l.trim().is_empty()) {
        let path = dir.join(name.trim());
        let bytes = fs::read(&path)
            .map_err(|e| CmdError::Data(format!("cannot read {}: {e}", path.display())))?;
        let seg = segment_from_bytes(&bytes)
            .map_err(|e| CmdError::Data(format!("{}: {e}", path.display())))?;
        segments.push(seg);
    }
    Ok(segments)
}

/// Fits the reduction pipeline plus classifier on a dataset and
/// persists both artifacts with the effective config embedded.
pub fn cmd_train(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CmdError> {
    let segments = load_dataset(data)?;
    let (pipe, net, _, _) = fit_dataset::<Scalar>(&segments, &cfg.harness).map_err(eval_err)?;
    let accuracy = window_accuracy(&pipe, &net, &segments, &cfg.harness).map_err(eval_err)?;

    fs::create_dir_all(out).map_err(|e| io_err("create directory", out, e))?;
    let echo = cfg.to_text();
    let dimred_path = out.join(DIMRED_NAME);
    let model_path = out.join(MODEL_NAME);
    save_pipeline(&pipe, &echo, &dimred_path)
        .map_err(|e| CmdError::Runtime(format!("cannot write {}: {e}", dimred_path.display())))?;
    save_network(&net, &echo, &model_path)
        .map_err(|e| CmdError::Runtime(format!("cannot write {}: {e}", model_path.display())))?;

    println!("training window accuracy {accuracy:.3}");
    println!("wrote {} and {}", dimred_path.display(), model_path.display());
    Ok(())
}

/// Flat machine-readable lines for one metrics report.
fn kv_lines(prefix: &str, cm: &ConfusionMatrix, report: &MetricsReport) -> String {
    let shown = |v: Option<f64>| match v {
        Some(v) => v.to_string(),
        None => "n/a".to_string(),
    };
    format!(
        "{prefix}tp={}\n{prefix}fp={}\n{prefix}fn={}\n{prefix}tn={}\n\
         {prefix}accuracy={}\n{prefix}precision={}\n{prefix}sensitivity={}\n\
         {prefix}specificity={}\n{prefix}fpr={}\n{prefix}fnr={}\n",
        cm.true_pos,
        cm.false_pos,
        cm.false_neg,
        cm.true_neg,
        shown(report.accuracy),
        shown(report.precision),
        shown(report.sensitivity),
        shown(report.specificity),
        shown(report.fpr),
        shown(report.fnr),
    )
}

/// Cross-validates the learned pipeline and the handcrafted-feature
/// comparator on the same dataset, printing and persisting both.
pub fn cmd_eval(cfg: &RunConfig, data: &Path, out: &Path) -> Result<(), CmdError> {
    let segments = load_dataset(data)?;

    let (cm, report, records) = run_loocv::<Scalar>(&segments, &cfg.harness).map_err(eval_err)?;
    let (base_cm, base_report, _) =
        run_baseline::<Scalar>(&segments, &cfg.harness).map_err(eval_err)?;

    let mut human = String::new();
    human.push_str("== learned pipeline (leave-one-out) ==\n");
    human.push_str(&cm.table_text());
    human.push_str(&report.summary_text());
    human.push_str("\n== handcrafted-feature comparator ==\n");
    human.push_str(&base_cm.table_text());
    human.push_str(&base_report.summary_text());
    human.push_str("\n== folds ==\n");
    for r in &records {
        human.push_str(&format!("{r}\n"));
    }

    let mut kv = kv_lines("", &cm, &report);
    kv.push_str(&kv_lines("baseline_", &base_cm, &base_report));

    fs::create_dir_all(out).map_err(|e| io_err("create directory", out, e))?;
    let text_path = out.join(REPORT_TEXT_NAME);
    let kv_path = out.join(REPORT_KV_NAME);
    fs::write(&text_path, &human).map_err(|e| io_err("write", &text_path, e))?;
    fs::write(&kv_path, &kv).map_err(|e| io_err("write", &kv_path, e))?;

    print!("{human}");
    println!("wrote {} and {}", text_path.display(), kv_path.display());
    Ok(())
}

/// Runs the prediction server until the process is stopped.
pub fn cmd_serve(listen: &str, model: &Path, dimred: &Path) -> Result<(), CmdError> {
    let server = serve(&ServeConfig {
        listen: listen.to_string(),
        model_path: model.to_path_buf(),
        dimred_path: dimred.to_path_buf(),
    })
    .map_err(|e| match e {
        preictal_net::ServeError::Bind { .. } => CmdError::Runtime(e.to_string()),
        other => CmdError::Data(other.to_string()),
    })?;
    println!("listening on {}", server.local_addr());
    server.wait();
    Ok(())
}

pub fn cmd_stream(server: &str, timeout: Duration, files: &[PathBuf]) -> Result<(), CmdError> {
    let results = stream_segments(
        &StreamConfig { server: server.to_string(), timeout },
        files,
    )
    .map_err(client_err)?;
    for r in &results {
        println!(
            "{}  {}  preictal_probability={:.6}  rtt={:.3} ms",
            r.segment_id, r.label, r.probability, r.rtt_ms
        );
    }
    println!("streamed {} segments", results.len());
    Ok(())
}

pub fn cmd_rtt(
    server: &str,
    count: usize,
    payload: usize,
    timeout: Duration,
) -> Result<(), CmdError> {
    let stats = rtt_bench(&RttConfig {
        server: server.to_string(),
        payload_len: payload,
        repetitions: count,
        timeout,
    })
    .map_err(|e| CmdError::Runtime(e.to_string()))?;
    print!("{}", stats.report_text());
    Ok(())
}
