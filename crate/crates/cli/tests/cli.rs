use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use photoyear_core::catalog::{write_catalog, YearSource};
use photoyear_core::persistence::{CredentialHasher, HashCost};
use photoyear_core::{Catalog, Engine, EngineConfig, ImageRecord, Identity, SqliteRepository, SteppingClock, Year};

fn photoyear(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_photoyear"))
        .args(args)
        .env_remove("STORAGE_URL")
        .env_remove("CATALOG_PATH")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn report_lines(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const HEADER: &str = "img_id,gt_year,date_taken,date_granularity,url,title\n";

#[test]
fn ingest_reports_rejections_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.csv");
    std::fs::write(
        &meta,
        format!(
            "{HEADER}a1,1944,1944-06-06,0,https://example.org/a1.jpg,Harbour\n\
             a2,1925,1925-01-01,0,https://example.org/a2.jpg,Too old\n\
             a3,,1951-02-03 10:00:00,4,https://example.org/a3.jpg,\n\
             ,1960,1960-01-01,0,https://example.org/x.jpg,No id\n\
             a1,1970,1970-01-01,0,https://example.org/dup.jpg,Again\n"
        ),
    )
    .unwrap();
    let dest = dir.path().join("out");
    let report = dir.path().join("report.jsonl");
    let o = photoyear(&[
        "ingest",
        "--meta",
        meta.to_str().unwrap(),
        "--dest",
        dest.to_str().unwrap(),
        "--allow-partial-years",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let lines = report_lines(&report);
    let rejections: Vec<(u64, &str)> = lines[..3]
        .iter()
        .map(|l| (l["row"].as_u64().unwrap(), l["reason"].as_str().unwrap()))
        .collect();
    assert_eq!(rejections, [(2, "YearOutOfRange"), (4, "MissingField"), (5, "DuplicateId")]);
    let summary = &lines[3]["summary"];
    assert_eq!(summary["total_rows"], 5);
    assert_eq!(summary["accepted"], 2);
    assert_eq!(summary["rejected"], 3);
    assert_eq!(summary["needs_review"], serde_json::json!(["a3"]));

    let written = std::fs::read_to_string(dest.join("meta.csv")).unwrap();
    assert_eq!(written.lines().count(), 3);
    assert!(written.lines().nth(2).unwrap().starts_with("a3,,1951-02-03"));
}

#[test]
fn clean_ingest_exits_0_and_unreadable_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta.csv");
    std::fs::write(&meta, format!("{HEADER}b1,1930,1930-01-01,0,https://example.org/b1.jpg,\n")).unwrap();
    let dest = dir.path().join("out");
    let report = dir.path().join("r.jsonl");
    let args = |meta: &str| {
        vec![
            "ingest".to_owned(),
            "--meta".into(),
            meta.to_owned(),
            "--dest".into(),
            dest.to_str().unwrap().into(),
            "--allow-partial-years".into(),
            "--report".into(),
            report.to_str().unwrap().into(),
        ]
    };
    let run = |a: Vec<String>| photoyear(&a.iter().map(String::as_str).collect::<Vec<_>>());

    let o = run(args(meta.to_str().unwrap()));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(report_lines(&report).len(), 1);

    let o = run(args(dir.path().join("absent.csv").to_str().unwrap()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent.csv"));

    let bad_header = dir.path().join("bad.csv");
    std::fs::write(&bad_header, "id,year\nb1,1930\n").unwrap();
    let o = run(args(bad_header.to_str().unwrap()));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("header"), "{}", stderr(&o));
}

#[test]
fn ingest_fetches_and_resizes_local_images() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    image::RgbImage::from_pixel(1600, 1200, image::Rgb([10, 200, 30]))
        .save(src.join("wide.png"))
        .unwrap();
    image::RgbImage::from_pixel(300, 900, image::Rgb([200, 10, 30]))
        .save(src.join("tall.png"))
        .unwrap();
    let url = |name: &str| format!("file://{}", src.join(name).display());
    let meta = dir.path().join("meta.csv");
    std::fs::write(
        &meta,
        format!(
            "{HEADER}w/1,1950,1950-01-01,0,{},\nt2,1960,1960-01-01,0,{},\ngone,1970,1970-01-01,0,{},\n",
            url("wide.png"),
            url("tall.png"),
            url("missing.png")
        ),
    )
    .unwrap();
    let dest = dir.path().join("out");
    let report = dir.path().join("r.jsonl");
    let o = photoyear(&[
        "ingest",
        "--meta",
        meta.to_str().unwrap(),
        "--dest",
        dest.to_str().unwrap(),
        "--fetch",
        "--workers",
        "2",
        "--allow-partial-years",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    assert_eq!(image::image_dimensions(dest.join("w_2F1.jpg")).unwrap(), (800, 600));
    assert_eq!(image::image_dimensions(dest.join("t2.jpg")).unwrap(), (200, 600));
    assert!(!dest.join("gone.jpg").exists());
    let lines = report_lines(&report);
    assert_eq!(lines[0]["img_id"], "gone");
    assert_eq!(lines[0]["reason"], "FetchFailed");
    assert_eq!(lines[1]["summary"]["fetch_failures"], 1);
}

fn record(id: &str, year: u16) -> ImageRecord {
    ImageRecord {
        img_id: id.to_owned(),
        gt_year: Year::new(year as i64).unwrap(),
        year_source: YearSource::GroundTruth,
        date_taken: String::new(),
        date_granularity: 0,
        url: format!("https://example.org/{id}.jpg"),
        title: None,
        asset: None,
    }
}

/// A database with one registered player who answers four year rounds
/// exactly and one demo session that answers two rounds far off.
fn seeded_db(dir: &Path) -> (String, String) {
    let catalog = Catalog::from_records(Year::all().map(|y| record(&format!("c{}", y.get() - 1900), y.get()))).unwrap();
    let catalog_path = dir.join("meta.csv");
    write_catalog(&catalog, std::fs::File::create(&catalog_path).unwrap()).unwrap();

    let db = dir.join("game.db");
    let repo = Arc::new(SqliteRepository::open(&db, CredentialHasher::new(HashCost::TESTING).unwrap()).unwrap());
    let config = EngineConfig {
        seed: Some(3),
        ..EngineConfig::default()
    };
    let engine = Engine::new(catalog.clone(), repo, Arc::new(SteppingClock::fixed_default()), config).unwrap();
    let year_of = |url: &str| catalog.get_by_asset_key(url.trim_start_matches("/images/")).unwrap().gt_year.get() as i64;

    let user = engine.register("ada", "long password", None).unwrap();
    let ticket = engine.create_session(Identity::User(user.user_id)).unwrap();
    for _ in 0..4 {
        let r = engine.next_year_round(&ticket.token).unwrap();
        engine.submit_year_guess(&ticket.token, &r.round_id, year_of(&r.image_url)).unwrap();
    }
    let demo = engine.start_demo().unwrap();
    for _ in 0..2 {
        let r = engine.next_year_round(&demo.token).unwrap();
        let far = if year_of(&r.image_url) < 1965 { 1999 } else { 1930 };
        engine.submit_year_guess(&demo.token, &r.round_id, far).unwrap();
    }
    (format!("sqlite://{}", db.display()), catalog_path.to_str().unwrap().to_owned())
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn stats_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let (db, catalog) = seeded_db(dir.path());
    let base = ["stats", "--db", db.as_str(), "--catalog", catalog.as_str()];

    let o = photoyear(&[&base[..], &["--format", "csv"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    let guesses: u64 = rows[..7].iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(guesses, 4);
    assert_eq!(rows[7][..3], ["mode", "guess_the_year", "4"]);
    assert_eq!(rows[7][5], "100.00");
    assert_eq!(rows[8][5], "");

    let o = photoyear(&[&base[..], &["--format", "csv", "--include-demo"]].concat());
    let rows = csv_rows(&stdout(&o));
    let guesses: u64 = rows[..7].iter().map(|r| r[2].parse::<u64>().unwrap()).sum();
    assert_eq!(guesses, 6);
    assert_eq!(rows[7][5], "66.67");

    let o = photoyear(&[&base[..], &["--from", "2030-01-01", "--to", "2030-12-31", "--format", "csv"]].concat());
    let rows = csv_rows(&stdout(&o));
    assert!(rows[..7].iter().all(|r| r[2] == "0" && r[5].is_empty()));

    let o = photoyear(&[&base[..], &["--from", "2025-01-20", "--to", "2025-01-20"]].concat());
    let table = stdout(&o);
    assert!(table.starts_with("decade"), "{table}");
    assert!(table.contains("1930s"));
    assert!(table.contains("guess_the_year"));
}

#[test]
fn stats_refuses_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let (db, catalog) = seeded_db(dir.path());
    let missing = format!("sqlite://{}", dir.path().join("nope.db").display());
    let o = photoyear(&["stats", "--db", &missing, "--catalog", &catalog]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nope.db"));
    assert!(!dir.path().join("nope.db").exists());

    let o = photoyear(&["stats", "--db", &db, "--catalog", &catalog, "--from", "2025-02-01", "--to", "2025-01-01"]);
    assert_eq!(o.status.code(), Some(1));
    let o = photoyear(&["stats", "--db", &db, "--catalog", &catalog, "--from", "yesterday"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn migrate_reports_schema_version() {
    let dir = tempfile::tempdir().unwrap();
    let url = format!("sqlite://{}", dir.path().join("fresh.db").display());
    let o = photoyear(&["migrate", "--db", &url]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("schema version "), "{}", stdout(&o));
}

#[test]
fn serve_names_missing_config() {
    let o = photoyear(&["serve", "--config", "/no/such/photoyear.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("/no/such/photoyear.toml"));
}
