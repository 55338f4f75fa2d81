//! Synthetic catalogs, metadata files and play logs for the benchmarks.

use std::fmt::Write;

use chrono::{DateTime, Duration, TimeZone, Utc};
use photoyear_core::catalog::YearSource;
use photoyear_core::persistence::UserId;
use photoyear_core::scoring::{score_timeline, score_year};
use photoyear_core::{Catalog, GamePlay, Identity, ImageRecord, PlayInput, TimelineChoice, Year, YearGuess};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn record(id: String, year: Year) -> ImageRecord {
    ImageRecord {
        url: format!("https://img.example.org/{id}.jpg"),
        title: Some(format!("Street scene {id}")),
        img_id: id,
        gt_year: year,
        year_source: YearSource::GroundTruth,
        date_taken: format!("{year}-05-01 12:00:00"),
        date_granularity: 0,
        asset: None,
    }
}

/// `per_year` images for each of the seventy years.
pub fn catalog(per_year: usize) -> Catalog {
    Catalog::from_records(Year::all().flat_map(|y| (0..per_year).map(move |i| record(format!("i{}n{i}", y.get()), y))))
        .expect("unique ids")
}

/// A metadata file with `rows` rows, every 50th one malformed.
pub fn meta_csv(rows: usize) -> Vec<u8> {
    let mut out = String::from("img_id,gt_year,date_taken,date_granularity,url,title\n");
    for i in 0..rows {
        let year = 1930 + (i % 70);
        if i % 50 == 49 {
            writeln!(out, "r{i},19x{},,0,https://img.example.org/r{i}.jpg,", i % 10).unwrap();
        } else {
            writeln!(
                out,
                "r{i},{year},{year}-07-0{} 09:30:00,0,https://img.example.org/r{i}.jpg,\"Market, stall {i}\"",
                1 + i % 9
            )
            .unwrap();
        }
    }
    out.into_bytes()
}

/// `n` scored plays over `users` registered players plus some demo plays,
/// one every ten minutes. Two thirds are year guesses.
pub fn plays(catalog: &Catalog, n: usize, users: i64, seed: u64) -> Vec<GamePlay> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = catalog.records();
    let start: DateTime<Utc> = Utc.with_ymd_and_hms(2025, 1, 20, 9, 0, 0).unwrap();
    (0..n)
        .map(|i| {
            let identity = if rng.random_ratio(1, 10) {
                Identity::Demo
            } else {
                Identity::User(UserId(rng.random_range(1..=users)))
            };
            let played_at = start + Duration::minutes(10 * i as i64);
            let a = &records[rng.random_range(0..records.len())];
            if i % 3 == 2 {
                let b = loop {
                    let b = &records[rng.random_range(0..records.len())];
                    if b.gt_year != a.gt_year {
                        break b;
                    }
                };
                let choice = if rng.random_bool(0.5) { TimelineChoice::Left } else { TimelineChoice::Right };
                let out = score_timeline(choice, a.gt_year, b.gt_year).expect("distinct years");
                GamePlay {
                    play_id: None,
                    identity,
                    session_id: format!("s{}", i / 20),
                    input: PlayInput::Timeline {
                        left_id: a.img_id.clone(),
                        right_id: b.img_id.clone(),
                        choice,
                    },
                    correct: out.correct,
                    static_points: out.points.static_points,
                    dynamic_points: out.points.dynamic_points,
                    played_at,
                }
            } else {
                let guess = YearGuess::new(rng.random_range(1930..=1999)).expect("in range");
                let points = score_year(guess, a.gt_year);
                GamePlay {
                    play_id: None,
                    identity,
                    session_id: format!("s{}", i / 20),
                    input: PlayInput::GuessYear {
                        img_id: a.img_id.clone(),
                        guess,
                    },
                    correct: points.static_points == 10,
                    static_points: points.static_points,
                    dynamic_points: points.dynamic_points,
                    played_at,
                }
            }
        })
        .collect()
}
