use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use clap::{Args, ValueEnum};
use photoyear_core::analytics::{self, DecadeOptions, DecadeStats, ModeAccuracy, ModeCounts};
use photoyear_core::persistence::{CredentialHasher, HashCost, PlayFilter};
use photoyear_core::{catalog, LoadOptions, Repository, SqliteRepository};

#[derive(Clone, Copy, ValueEnum)]
pub enum Format {
    Table,
    Csv,
}

#[derive(Args)]
pub struct StatsArgs {
    /// First day included, `YYYY-MM-DD` (UTC).
    #[arg(long, value_parser = parse_day)]
    from: Option<NaiveDate>,
    /// Last day included, `YYYY-MM-DD` (UTC).
    #[arg(long, value_parser = parse_day)]
    to: Option<NaiveDate>,
    #[arg(long)]
    include_demo: bool,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Game database, `sqlite://<path>` or a bare path.
    #[arg(long, env = "STORAGE_URL")]
    db: String,
    /// The catalog the plays refer to.
    #[arg(long, env = "CATALOG_PATH")]
    catalog: PathBuf,
}

fn parse_day(s: &str) -> Result<NaiveDate, String> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("{s:?} is not YYYY-MM-DD: {e}"))
}

fn start_of(day: NaiveDate) -> DateTime<Utc> {
    day.and_time(NaiveTime::MIN).and_utc()
}

fn end_of(day: NaiveDate) -> DateTime<Utc> {
    day.and_hms_nano_opt(23, 59, 59, 999_999_999).expect("valid time").and_utc()
}

/// Never create a database just to report on it.
fn open_existing(url: &str) -> anyhow::Result<SqliteRepository> {
    let path = url.strip_prefix("sqlite://").or_else(|| url.strip_prefix("sqlite:")).unwrap_or(url);
    if path != ":memory:" && !Path::new(path).exists() {
        bail!("database {path} does not exist");
    }
    SqliteRepository::open_url(url, CredentialHasher::new(HashCost::DEFAULT)?).with_context(|| format!("opening {url}"))
}

pub fn run(args: &StatsArgs) -> anyhow::Result<()> {
    if let (Some(from), Some(to)) = (args.from, args.to) {
        if from > to {
            bail!("--from {from} is after --to {to}");
        }
    }
    let file = std::fs::File::open(&args.catalog).with_context(|| format!("opening {}", args.catalog.display()))?;
    let opts = LoadOptions {
        allow_partial_years: true,
    };
    let (catalog, _) = catalog::load_catalog(std::io::BufReader::new(file), &opts)?;
    let repo = open_existing(&args.db)?;

    let filter = PlayFilter {
        include_demo: args.include_demo,
        from: args.from.map(start_of),
        to: args.to.map(end_of),
        ..PlayFilter::default()
    };
    let plays = repo.plays(&filter)?;
    let abandoned = repo.abandoned_rounds(&filter)?;
    let decades = analytics::decade_stats(
        &plays,
        &abandoned,
        &catalog,
        DecadeOptions {
            include_demo: args.include_demo,
        },
    )?;
    let modes = analytics::mode_accuracy(&plays);

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match args.format {
        Format::Table => write_table(&mut out, &decades, &modes)?,
        Format::Csv => write_csv(&mut out, &decades, &modes)?,
    }
    out.flush()?;
    Ok(())
}

fn or_dash(v: Option<impl ToString>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| v.to_string())
}

fn mode_rows(modes: &ModeAccuracy) -> [(&'static str, ModeCounts); 2] {
    [("guess_the_year", modes.guess_year), ("timeline_challenge", modes.timeline)]
}

fn write_table(out: &mut impl Write, decades: &[DecadeStats], modes: &ModeAccuracy) -> std::io::Result<()> {
    writeln!(out, "{:<8} {:>8} {:>8} {:>8} {:>9}", "decade", "guesses", "shown", "correct", "correct%")?;
    for d in decades {
        writeln!(
            out,
            "{:<8} {:>8} {:>8} {:>8} {:>9}",
            d.decade.to_string(),
            d.total_guesses,
            d.total_images_shown,
            d.correct_guesses,
            or_dash(d.correct_pct)
        )?;
    }
    writeln!(out)?;
    writeln!(out, "{:<20} {:>8} {:>8} {:>9}", "mode", "plays", "correct", "accuracy")?;
    for (name, c) in mode_rows(modes) {
        writeln!(out, "{:<20} {:>8} {:>8} {:>9}", name, c.total, c.correct, or_dash(c.accuracy()))?;
    }
    Ok(())
}

/// A single table; decade rows fill `shown`, mode rows leave it empty.
fn write_csv(out: &mut impl Write, decades: &[DecadeStats], modes: &ModeAccuracy) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "key", "total", "shown", "correct", "pct"])?;
    for d in decades {
        w.write_record([
            "decade".to_owned(),
            d.decade.to_string(),
            d.total_guesses.to_string(),
            d.total_images_shown.to_string(),
            d.correct_guesses.to_string(),
            d.correct_pct.map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    for (name, c) in mode_rows(modes) {
        w.write_record([
            "mode".to_owned(),
            name.to_owned(),
            c.total.to_string(),
            String::new(),
            c.correct.to_string(),
            c.accuracy().map(|p| p.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
