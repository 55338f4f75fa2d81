use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::Args;
use photoyear_core::catalog::{self, fetch_all, validate_catalog, HttpFetcher, DEFAULT_IMBALANCE_FACTOR, ResizeOptions};
use photoyear_core::{Catalog, IngestReport, LoadOptions};
use serde_json::json;

/// Exit status when the run finished but some rows or images were dropped.
const EXIT_PARTIAL: u8 = 2;

#[derive(Args)]
pub struct IngestArgs {
    /// Metadata file with header `img_id,gt_year,date_taken,date_granularity,url[,title]`.
    #[arg(long)]
    meta: PathBuf,
    /// Output directory for `meta.csv` and resized images.
    #[arg(long)]
    dest: PathBuf,
    /// Download and resize every accepted image into `dest`.
    #[arg(long)]
    fetch: bool,
    #[arg(long, default_value_t = 8)]
    workers: usize,
    #[arg(long)]
    allow_partial_years: bool,
    /// Where to write the JSON-lines report.
    #[arg(long)]
    report: PathBuf,
    /// Per-image download timeout in seconds.
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
}

pub fn run(args: &IngestArgs) -> ExitCode {
    let loaded = File::open(&args.meta)
        .with_context(|| format!("opening {}", args.meta.display()))
        .and_then(|f| {
            let opts = LoadOptions {
                allow_partial_years: args.allow_partial_years,
            };
            catalog::load_catalog(BufReader::new(f), &opts).with_context(|| format!("reading {}", args.meta.display()))
        });
    let (catalog, mut report) = match loaded {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };

    match finish(args, catalog, &mut report) {
        Ok(()) if report.is_clean() => ExitCode::SUCCESS,
        Ok(()) => ExitCode::from(EXIT_PARTIAL),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn finish(args: &IngestArgs, mut catalog: Catalog, report: &mut IngestReport) -> anyhow::Result<()> {
    std::fs::create_dir_all(&args.dest).with_context(|| format!("creating {}", args.dest.display()))?;
    if args.fetch {
        let fetcher = HttpFetcher::new(Duration::from_secs(args.timeout_secs))?;
        let (records, failures) = fetch_all(catalog.records(), &ResizeOptions::new(&args.dest), &fetcher, args.workers);
        catalog = Catalog::from_records(records)?;
        report.fetch_failures = failures;
    }

    let meta_out = args.dest.join("meta.csv");
    let file = File::create(&meta_out).with_context(|| format!("creating {}", meta_out.display()))?;
    catalog::write_catalog(&catalog, BufWriter::new(file))?;
    write_report(&args.report, &catalog, report)?;

    eprintln!(
        "{} of {} rows accepted, {} rejected, {} fetch failures",
        report.accepted,
        report.total_rows,
        report.rejected.len(),
        report.fetch_failures.len()
    );
    if !args.allow_partial_years && !report.missing_years.is_empty() {
        eprintln!("warning: {} years have no images", report.missing_years.len());
    }
    Ok(())
}

/// One line per rejected row and per failed fetch, then a summary line.
fn write_report(path: &Path, catalog: &Catalog, report: &IngestReport) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    for (row, reason) in &report.rejected {
        let line = json!({ "row": row, "reason": reason.code(), "detail": reason.to_string() });
        writeln!(out, "{line}")?;
    }
    for f in &report.fetch_failures {
        let line = json!({ "img_id": f.img_id, "reason": "FetchFailed", "detail": f.error.to_string() });
        writeln!(out, "{line}")?;
    }
    let coverage = validate_catalog(catalog, DEFAULT_IMBALANCE_FACTOR);
    let summary = json!({
        "summary": {
            "total_rows": report.total_rows,
            "accepted": report.accepted,
            "rejected": report.rejected.len(),
            "fetch_failures": report.fetch_failures.len(),
            "missing_years": report.missing_years.iter().map(|y| y.get()).collect::<Vec<_>>(),
            "needs_review": report.needs_review,
            "imbalanced_years": coverage.imbalanced.iter().map(|(y, _)| y.get()).collect::<Vec<_>>(),
        }
    });
    writeln!(out, "{summary}")?;
    out.flush()?;
    Ok(())
}
