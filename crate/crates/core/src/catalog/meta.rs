//! `meta.csv` reading and writing.
//!
//! Header: `img_id,gt_year,date_taken,date_granularity,url[,title]`, comma
//! separated, UTF-8, standard quoting. Row-level problems never abort a
//! load; they are collected into the [`IngestReport`].

use std::collections::HashSet;
use std::io::{Read, Write};

use super::{Catalog, CatalogError, ImageRecord, IngestReport, LoadOptions, RowRejection, YearSource};
use crate::year::Year;

pub const META_HEADER: [&str; 6] = ["img_id", "gt_year", "date_taken", "date_granularity", "url", "title"];
const MANDATORY_FIELDS: usize = 5;

/// Parse one data row. Fields are trimmed; an empty or absent title is `None`.
pub fn parse_meta_row(fields: &[&str]) -> Result<ImageRecord, RowRejection> {
    if !(MANDATORY_FIELDS..=META_HEADER.len()).contains(&fields.len()) {
        return Err(RowRejection::FieldCount { found: fields.len() });
    }
    let field = |i: usize| fields[i].trim();

    let img_id = field(0);
    if img_id.is_empty() {
        return Err(RowRejection::MissingField("img_id"));
    }
    let (gt_year, year_source) = resolve_year(field(1), field(2))?;

    let granularity = field(3);
    if granularity.is_empty() {
        return Err(RowRejection::MissingField("date_granularity"));
    }
    let date_granularity: u32 = granularity
        .parse()
        .map_err(|_| RowRejection::BadGranularity(granularity.to_owned()))?;

    let url = field(4);
    if url.is_empty() {
        return Err(RowRejection::MissingField("url"));
    }
    match url::Url::parse(url) {
        Ok(u) if matches!(u.scheme(), "http" | "https" | "file") => {}
        _ => return Err(RowRejection::BadUrl(url.to_owned())),
    }

    let title = fields
        .get(5)
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(str::to_owned);

    Ok(ImageRecord {
        img_id: img_id.to_owned(),
        gt_year,
        year_source,
        date_taken: field(2).to_owned(),
        date_granularity,
        url: url.to_owned(),
        title,
        asset: None,
    })
}

/// Pick the authoritative year for a row.
///
/// A present `gt_year` wins and must be a valid in-range integer. A blank
/// `gt_year` falls back to a leading four-digit year in `date_taken`, and the
/// record is marked for review.
pub fn resolve_year(gt_year: &str, date_taken: &str) -> Result<(Year, YearSource), RowRejection> {
    let gt_year = gt_year.trim();
    if !gt_year.is_empty() {
        let value: i64 = gt_year
            .parse()
            .map_err(|_| RowRejection::NonIntegerYear(gt_year.to_owned()))?;
        let year = Year::new(value).map_err(|e| RowRejection::YearOutOfRange(e.0))?;
        return Ok((year, YearSource::GroundTruth));
    }

    let date_taken = date_taken.trim();
    if date_taken.is_empty() {
        return Err(RowRejection::MissingField("gt_year"));
    }
    leading_year(date_taken)
        .and_then(|y| Year::new(y).ok())
        .map(|y| (y, YearSource::DateTaken))
        .ok_or_else(|| RowRejection::UnresolvableYear(date_taken.to_owned()))
}

/// `"1957-03-01"`, `"1957"`, `"1957 03"` -> 1957; `"19570"` or `"57-03"` -> None.
fn leading_year(s: &str) -> Option<i64> {
    let bytes = s.as_bytes();
    if bytes.len() < 4 || !bytes[..4].iter().all(u8::is_ascii_digit) {
        return None;
    }
    if bytes.get(4).is_some_and(u8::is_ascii_digit) {
        return None;
    }
    s[..4].parse().ok()
}

/// Load a catalog from a header-bearing metadata stream.
///
/// Only an unreadable stream or a wrong header is an error. Duplicate ids
/// keep the first occurrence.
pub fn load_catalog<R: Read>(
    reader: R,
    options: &LoadOptions,
) -> Result<(Catalog, IngestReport), CatalogError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);

    let mut report = IngestReport::default();
    let mut catalog = Catalog::new();
    let mut seen = HashSet::new();
    let mut header_len = None;

    for (i, row) in rdr.byte_records().enumerate() {
        let row = match row {
            Ok(row) => row,
            Err(e) if e.is_io_error() => return Err(CatalogError::Unreadable(e.to_string())),
            Err(e) => {
                if header_len.is_none() {
                    return Err(CatalogError::Unreadable(e.to_string()));
                }
                report.total_rows += 1;
                report.rejected.push((i, RowRejection::Malformed(e.to_string())));
                continue;
            }
        };

        let Some(expected_len) = header_len else {
            header_len = Some(check_header(&row)?);
            continue;
        };

        report.total_rows += 1;
        let row_no = i;
        let fields: Result<Vec<&str>, _> = row.iter().map(std::str::from_utf8).collect();
        let parsed = match fields {
            Err(e) => Err(RowRejection::Malformed(e.to_string())),
            Ok(fields) if fields.len() > expected_len => {
                Err(RowRejection::FieldCount { found: fields.len() })
            }
            Ok(fields) => parse_meta_row(&fields),
        };
        let record = match parsed {
            Ok(r) if !seen.insert(r.img_id.clone()) => Err(RowRejection::DuplicateId(r.img_id)),
            other => other,
        };
        match record {
            Ok(r) => {
                if r.needs_review() {
                    report.needs_review.push(r.img_id.clone());
                }
                catalog.push(r)?;
                report.accepted += 1;
            }
            Err(reason) => report.rejected.push((row_no, reason)),
        }
    }

    report.missing_years = catalog.missing_years();
    if !options.allow_partial_years && !catalog.is_empty() && !report.missing_years.is_empty() {
        tracing::warn!(missing = report.missing_years.len(), "catalog does not cover every year");
    }
    Ok((catalog, report))
}

fn check_header(row: &csv::ByteRecord) -> Result<usize, CatalogError> {
    let names: Vec<String> = row
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let f = if i == 0 { f.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(f) } else { f };
            String::from_utf8_lossy(f).trim().to_ascii_lowercase()
        })
        .collect();
    let ok = (MANDATORY_FIELDS..=META_HEADER.len()).contains(&names.len())
        && names.iter().zip(META_HEADER).all(|(n, want)| n == want);
    if ok {
        Ok(names.len())
    } else {
        Err(CatalogError::BadHeader {
            found: names,
            expected: META_HEADER.join(","),
        })
    }
}

/// Write a catalog back in metadata form, title column included.
///
/// Records whose year came from `date_taken` are written with a blank
/// `gt_year`, so reloading resolves them the same way.
pub fn write_catalog<W: Write>(catalog: &Catalog, writer: W) -> Result<(), CatalogError> {
    let io = |e: csv::Error| CatalogError::Unreadable(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(META_HEADER).map_err(io)?;
    for r in catalog.records() {
        let year = match r.year_source {
            YearSource::GroundTruth => r.gt_year.to_string(),
            YearSource::DateTaken => String::new(),
        };
        w.write_record([
            r.img_id.as_str(),
            &year,
            &r.date_taken,
            &r.date_granularity.to_string(),
            &r.url,
            r.title.as_deref().unwrap_or(""),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CatalogError::Unreadable(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: [&str; 6] = [
        "10203/xyz",
        "1944",
        "1944-06-06",
        "0",
        "https://example.org/img.jpg",
        "Landing craft",
    ];

    fn with(idx: usize, value: &'static str) -> Vec<&'static str> {
        let mut row = GOOD.to_vec();
        row[idx] = value;
        row
    }

    #[test]
    fn well_formed_row() {
        let r = parse_meta_row(&GOOD).unwrap();
        assert_eq!(r.img_id, "10203/xyz");
        assert_eq!(r.gt_year.get(), 1944);
        assert_eq!(r.title.as_deref(), Some("Landing craft"));
        assert!(!r.needs_review());
        let five = parse_meta_row(&GOOD[..5]).unwrap();
        assert_eq!(five.title, None);
    }

    #[test]
    fn typed_rejections() {
        assert_eq!(parse_meta_row(&with(1, "1925")), Err(RowRejection::YearOutOfRange(1925)));
        assert_eq!(
            parse_meta_row(&["a", "", "", "0", "https://x.org/a.jpg"]),
            Err(RowRejection::MissingField("gt_year"))
        );
        assert_eq!(parse_meta_row(&with(0, " ")), Err(RowRejection::MissingField("img_id")));
        assert_eq!(
            parse_meta_row(&with(1, "19x4")),
            Err(RowRejection::NonIntegerYear("19x4".into()))
        );
        assert_eq!(parse_meta_row(&with(4, "not a url")), Err(RowRejection::BadUrl("not a url".into())));
        assert_eq!(
            parse_meta_row(&with(4, "ftp://example.org/a.jpg")),
            Err(RowRejection::BadUrl("ftp://example.org/a.jpg".into()))
        );
        assert_eq!(parse_meta_row(&with(3, "-1")), Err(RowRejection::BadGranularity("-1".into())));
        assert_eq!(parse_meta_row(&GOOD[..4]), Err(RowRejection::FieldCount { found: 4 }));
    }

    #[test]
    fn year_resolution() {
        assert_eq!(resolve_year("1944", "1950-01-01").unwrap(), (Year::new(1944).unwrap(), YearSource::GroundTruth));
        assert_eq!(resolve_year("", "1957-03-01").unwrap(), (Year::new(1957).unwrap(), YearSource::DateTaken));
        assert_eq!(resolve_year("", "1957").unwrap().0.get(), 1957);
        assert!(matches!(resolve_year("", "circa fifties"), Err(RowRejection::UnresolvableYear(_))));
        assert!(matches!(resolve_year("", "2004-01-01"), Err(RowRejection::UnresolvableYear(_))));
        assert!(matches!(resolve_year("", "19570101"), Err(RowRejection::UnresolvableYear(_))));
    }

    #[test]
    fn record_with_blank_year_is_flagged() {
        let r = parse_meta_row(&["b", "", "1957-03-01", "6", "https://x.org/b.jpg"]).unwrap();
        assert_eq!(r.gt_year.get(), 1957);
        assert!(r.needs_review());
        assert_eq!(r.date_granularity, 6);
    }

    #[test]
    fn header_only_file_is_empty_catalog() {
        let (cat, report) =
            load_catalog("img_id,gt_year,date_taken,date_granularity,url\n".as_bytes(), &LoadOptions::default()).unwrap();
        assert!(cat.is_empty());
        assert_eq!(report.accepted, 0);
        assert_eq!(report.total_rows, 0);
        let (cat, _) = load_catalog("".as_bytes(), &LoadOptions::default()).unwrap();
        assert!(cat.is_empty());
    }

    #[test]
    fn wrong_header_is_unreadable() {
        let err = load_catalog("id,year\n1,1950\n".as_bytes(), &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, CatalogError::BadHeader { .. }));
    }

    #[test]
    fn duplicates_keep_first_and_bom_is_ignored() {
        let text = "\u{feff}img_id,gt_year,date_taken,date_granularity,url,title\n\
                    a,1950,,0,https://x.org/a.jpg,first\n\
                    a,1951,,0,https://x.org/a2.jpg,second\n\
                    \"b,c\",1952,,0,https://x.org/b.jpg,\"quoted, title\"\n";
        let (cat, report) = load_catalog(text.as_bytes(), &LoadOptions { allow_partial_years: true }).unwrap();
        assert_eq!(cat.len(), 2);
        assert_eq!(cat.get("a").unwrap().title.as_deref(), Some("first"));
        assert_eq!(report.rejected, vec![(2, RowRejection::DuplicateId("a".into()))]);
        assert_eq!(cat.get("b,c").unwrap().title.as_deref(), Some("quoted, title"));
    }

    #[test]
    fn invalid_utf8_row_is_rejected_not_fatal() {
        let mut bytes = b"img_id,gt_year,date_taken,date_granularity,url\n".to_vec();
        bytes.extend_from_slice(b"a\xff,1950,,0,https://x.org/a.jpg\n");
        bytes.extend_from_slice(b"b,1950,,0,https://x.org/b.jpg\n");
        let (cat, report) = load_catalog(bytes.as_slice(), &LoadOptions::default()).unwrap();
        assert_eq!(cat.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].1.code(), "Malformed");
    }

    #[test]
    fn extra_columns_without_title_header_are_rejected() {
        let text = "img_id,gt_year,date_taken,date_granularity,url\na,1950,,0,https://x.org/a.jpg,extra\n";
        let (_, report) = load_catalog(text.as_bytes(), &LoadOptions::default()).unwrap();
        assert_eq!(report.rejected, vec![(1, RowRejection::FieldCount { found: 6 })]);
    }
}
