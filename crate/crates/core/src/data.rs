//! Price ingestion, alignment and log-return panels.
//!
//! Two CSV layouts are accepted:
//!
//! * `wide`: a date column followed by one price column per ticker.
//! * `long`: one `(date, ticker, close)` observation per row.
//!
//! Empty cells and `NA`/`NaN`/`null` mark a missing price. After parsing,
//! the panel is restricted to the dates on which every asset has a price.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_ASSETS: usize = 2;
pub const MIN_DATES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Layout {
    #[default]
    Wide,
    Long,
}

/// Column mapping for a price CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceFormat {
    pub layout: Layout,
    pub date_column: String,
    /// Long layout only.
    pub ticker_column: String,
    /// Long layout only.
    pub price_column: String,
}

impl Default for PriceFormat {
    fn default() -> Self {
        PriceFormat {
            layout: Layout::Wide,
            date_column: "date".into(),
            ticker_column: "ticker".into(),
            price_column: "close".into(),
        }
    }
}

/// Unaligned observations: one row per date, one optional price per ticker.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPrices {
    pub tickers: Vec<String>,
    pub rows: BTreeMap<NaiveDate, Vec<Option<f64>>>,
}

/// Aligned `d × (T+1)` panel of strictly positive closing prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePanel {
    pub tickers: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// `prices[i][t]` is the close of ticker `i` on `dates[t]`.
    pub prices: Vec<Vec<f64>>,
}

/// Aligned `d × T` panel of daily log-returns.
///
/// `dates[t]` is the date on which return `t` is realized; the return spans
/// the interval from the previous date (or `base_date` for `t = 0`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnPanel {
    pub tickers: Vec<String>,
    pub base_date: NaiveDate,
    pub dates: Vec<NaiveDate>,
    pub returns: Vec<Vec<f64>>,
}

impl ReturnPanel {
    pub fn n_assets(&self) -> usize {
        self.tickers.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Start date of the interval covered by return `t`.
    pub fn start_date(&self, t: usize) -> NaiveDate {
        if t == 0 {
            self.base_date
        } else {
            self.dates[t - 1]
        }
    }

    fn slice(&self, range: std::ops::Range<usize>) -> ReturnPanel {
        ReturnPanel {
            tickers: self.tickers.clone(),
            base_date: self.start_date(range.start),
            dates: self.dates[range.clone()].to_vec(),
            returns: self
                .returns
                .iter()
                .map(|row| row[range.clone()].to_vec())
                .collect(),
        }
    }
}

impl From<&PricePanel> for RawPrices {
    fn from(panel: &PricePanel) -> Self {
        let rows = panel
            .dates
            .iter()
            .enumerate()
            .map(|(t, date)| (*date, panel.prices.iter().map(|row| Some(row[t])).collect()))
            .collect();
        RawPrices {
            tickers: panel.tickers.clone(),
            rows,
        }
    }
}

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}

fn parse_price(cell: &str, line: usize) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() || ["na", "nan", "null"].contains(&cell.to_ascii_lowercase().as_str()) {
        return Ok(None);
    }
    cell.parse::<f64>().map(Some).map_err(|_| Error::Parse {
        line,
        message: format!("invalid price `{cell}`"),
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column `{name}`"),
        })
}

/// Parse CSV bytes into unaligned observations.
pub fn parse_raw_prices(bytes: &[u8], format: &PriceFormat) -> Result<RawPrices> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "input is not valid UTF-8".into(),
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(csv_error)?.clone();
    match format.layout {
        Layout::Wide => parse_wide(&mut reader, &headers, format),
        Layout::Long => parse_long(&mut reader, &headers, format),
    }
}

fn parse_wide(
    reader: &mut csv::Reader<&[u8]>,
    headers: &csv::StringRecord,
    format: &PriceFormat,
) -> Result<RawPrices> {
    let date_idx = column_index(headers, &format.date_column)?;
    let ticker_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != date_idx)
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let mut seen = HashMap::new();
    for (_, t) in &ticker_cols {
        if t.is_empty() {
            return Err(Error::Parse {
                line: 1,
                message: "empty ticker name in header".into(),
            });
        }
        if seen.insert(t.clone(), ()).is_some() {
            return Err(Error::Parse {
                line: 1,
                message: format!("duplicate ticker `{t}`"),
            });
        }
    }

    let mut rows = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let date = parse_date(&record[date_idx]).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid date `{}`", &record[date_idx]),
        })?;
        let values = ticker_cols
            .iter()
            .map(|(i, _)| parse_price(&record[*i], line))
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(date, values).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate date {date}"),
            });
        }
    }
    Ok(RawPrices {
        tickers: ticker_cols.into_iter().map(|(_, t)| t).collect(),
        rows,
    })
}

fn parse_long(
    reader: &mut csv::Reader<&[u8]>,
    headers: &csv::StringRecord,
    format: &PriceFormat,
) -> Result<RawPrices> {
    let date_idx = column_index(headers, &format.date_column)?;
    let ticker_idx = column_index(headers, &format.ticker_column)?;
    let price_idx = column_index(headers, &format.price_column)?;

    let mut tickers: Vec<String> = Vec::new();
    let mut ticker_pos: HashMap<String, usize> = HashMap::new();
    let mut cells: BTreeMap<NaiveDate, BTreeMap<usize, Option<f64>>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let date = parse_date(&record[date_idx]).ok_or_else(|| Error::Parse {
            line,
            message: format!("invalid date `{}`", &record[date_idx]),
        })?;
        let ticker = record[ticker_idx].trim();
        if ticker.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty ticker".into(),
            });
        }
        let pos = *ticker_pos.entry(ticker.to_string()).or_insert_with(|| {
            tickers.push(ticker.to_string());
            tickers.len() - 1
        });
        let price = parse_price(&record[price_idx], line)?;
        if cells.entry(date).or_default().insert(pos, price).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate observation for {ticker} on {date}"),
            });
        }
    }
    let d = tickers.len();
    let rows = cells
        .into_iter()
        .map(|(date, obs)| {
            let mut row = vec![None; d];
            for (i, p) in obs {
                row[i] = p;
            }
            (date, row)
        })
        .collect();
    Ok(RawPrices { tickers, rows })
}

/// Restrict raw observations to dates on which every asset has a price.
pub fn align(raw: RawPrices) -> Result<PricePanel> {
    let d = raw.tickers.len();
    if d < MIN_ASSETS {
        return Err(Error::InsufficientData(format!(
            "{d} asset(s); at least {MIN_ASSETS} required"
        )));
    }
    let mut dates = Vec::new();
    let mut prices = vec![Vec::new(); d];
    for (date, row) in raw.rows {
        if row.len() != d {
            return Err(Error::Data(format!("row for {date} has {} cells, expected {d}", row.len())));
        }
        if row.iter().any(Option::is_none) {
            continue;
        }
        for (i, p) in row.into_iter().enumerate() {
            let p = p.unwrap_or_default();
            if !(p.is_finite() && p > 0.0) {
                return Err(Error::Data(format!(
                    "non-positive price {p} for {} on {date}",
                    raw.tickers[i]
                )));
            }
            prices[i].push(p);
        }
        dates.push(date);
    }
    if dates.len() < MIN_DATES {
        return Err(Error::InsufficientData(format!(
            "{} common date(s); at least {MIN_DATES} required",
            dates.len()
        )));
    }
    Ok(PricePanel {
        tickers: raw.tickers,
        dates,
        prices,
    })
}

pub fn parse_prices(bytes: &[u8], format: &PriceFormat) -> Result<PricePanel> {
    align(parse_raw_prices(bytes, format)?)
}

pub fn load_prices(path: impl AsRef<Path>, format: &PriceFormat) -> Result<PricePanel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_prices(&bytes, format)
}

/// Wide-layout CSV with a `date` column.
pub fn prices_to_csv(panel: &PricePanel) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("date").chain(panel.tickers.iter().map(String::as_str));
    w.write_record(header).expect("in-memory write");
    for (k, d) in panel.dates.iter().enumerate() {
        let row = std::iter::once(d.to_string()).chain(panel.prices.iter().map(|p| p[k].to_string()));
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

pub fn to_log_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    if panel.dates.len() < 2 {
        return Err(Error::InsufficientData("need at least 2 dates for returns".into()));
    }
    let returns = panel
        .prices
        .iter()
        .map(|row| row.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
        .collect();
    Ok(ReturnPanel {
        tickers: panel.tickers.clone(),
        base_date: panel.dates[0],
        dates: panel.dates[1..].to_vec(),
        returns,
    })
}

/// Split into a training panel of returns realized strictly before
/// `split_date` and a testing panel of returns whose whole interval starts
/// on or after it. A return straddling the split belongs to neither side.
pub fn split_train_test(panel: &ReturnPanel, split_date: NaiveDate) -> Result<(ReturnPanel, ReturnPanel)> {
    let n_train = panel.dates.partition_point(|d| *d < split_date);
    let first_test = (0..panel.len())
        .find(|&t| panel.start_date(t) >= split_date)
        .unwrap_or(panel.len());
    if n_train == 0 || first_test >= panel.len() {
        return Err(Error::Range(format!(
            "split at {split_date} leaves an empty side (panel spans {} to {})",
            panel.base_date,
            panel.dates.last().map(ToString::to_string).unwrap_or_default()
        )));
    }
    Ok((panel.slice(0..n_train), panel.slice(first_test..panel.len())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    fn wide_csv(n_dates: usize, tickers: &[&str], hole: Option<(usize, usize)>) -> String {
        let mut s = format!("date,{}\n", tickers.join(","));
        for t in 0..n_dates {
            s.push_str(&day(t as i64).to_string());
            for i in 0..tickers.len() {
                if hole == Some((t, i)) {
                    s.push(',');
                } else {
                    s.push_str(&format!(",{}", 100.0 + (t * (i + 1)) as f64));
                }
            }
            s.push('\n');
        }
        s
    }

    #[test]
    fn missing_cell_drops_date_for_all() {
        let csv = wide_csv(40, &["A", "B", "C"], Some((7, 1)));
        let panel = parse_prices(csv.as_bytes(), &PriceFormat::default()).unwrap();
        assert_eq!(panel.dates.len(), 39);
        assert!(!panel.dates.contains(&day(7)));
        assert!(panel.prices.iter().all(|r| r.len() == 39));
    }

    #[test]
    fn zero_price_is_data_error() {
        let mut csv = wide_csv(40, &["A", "B"], None);
        csv = csv.replacen(",101,", ",0,", 1);
        let err = parse_prices(csv.as_bytes(), &PriceFormat::default()).unwrap_err();
        assert!(matches!(err, Error::Data(ref m) if m.contains('A')), "{err}");
    }

    #[test]
    fn malformed_cell_reports_line() {
        let csv = wide_csv(40, &["A", "B"], None).replacen(",105,", ",abc,", 1);
        match parse_prices(csv.as_bytes(), &PriceFormat::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn insufficient_assets_or_dates() {
        let one = wide_csv(40, &["A"], None);
        assert!(matches!(
            parse_prices(one.as_bytes(), &PriceFormat::default()),
            Err(Error::InsufficientData(_))
        ));
        let short = wide_csv(29, &["A", "B"], None);
        assert!(matches!(
            parse_prices(short.as_bytes(), &PriceFormat::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn long_layout_matches_wide() {
        let wide = wide_csv(35, &["A", "B"], Some((3, 0)));
        let mut long = String::from("ticker,date,close\n");
        for t in 0..35 {
            for (i, name) in ["A", "B"].iter().enumerate() {
                if (t, i) == (3, 0) {
                    continue;
                }
                long.push_str(&format!("{name},{},{}\n", day(t as i64), 100.0 + (t * (i + 1)) as f64));
            }
        }
        let fmt = PriceFormat {
            layout: Layout::Long,
            ..PriceFormat::default()
        };
        let a = parse_prices(wide.as_bytes(), &PriceFormat::default()).unwrap();
        let b = parse_prices(long.as_bytes(), &fmt).unwrap();
        assert_eq!(a, b);
    }

    fn panel_from(prices: Vec<Vec<f64>>) -> PricePanel {
        let n = prices[0].len();
        PricePanel {
            tickers: (0..prices.len()).map(|i| format!("T{i}")).collect(),
            dates: (0..n as i64).map(day).collect(),
            prices,
        }
    }

    #[test]
    fn log_return_examples() {
        let r = to_log_returns(&panel_from(vec![vec![100.0, 110.0], vec![5.0, 5.0]])).unwrap();
        assert!((r.returns[0][0] - 0.095_310_179_804_324_9).abs() < 1e-12);
        assert_eq!(r.returns[1][0], 0.0);

        let r = to_log_returns(&panel_from(vec![vec![100.0, 90.0, 99.0]])).unwrap();
        assert!((r.returns[0][0] - 0.9f64.ln()).abs() < 1e-15);
        assert!((r.returns[0][1] - 1.1f64.ln()).abs() < 1e-15);
        assert_eq!(r.base_date, day(0));
        assert_eq!(r.dates, vec![day(1), day(2)]);
    }

    fn return_panel(n_prices: usize) -> ReturnPanel {
        let row: Vec<f64> = (0..n_prices).map(|t| 100.0 + t as f64).collect();
        to_log_returns(&panel_from(vec![row.clone(), row])).unwrap()
    }

    #[test]
    fn split_boundaries() {
        let panel = return_panel(101);
        // 101 prices, split on the 61st price date: 59 returns end before it,
        // 40 start on or after it, and the straddling return is dropped.
        let (train, test) = split_train_test(&panel, day(60)).unwrap();
        assert_eq!((train.len(), test.len()), (59, 40));
        assert_eq!(test.base_date, day(60));
        assert_eq!(train.returns[0].len(), 59);

        let (train, _) = split_train_test(&panel, panel.dates[0] + chrono::Duration::days(1)).unwrap();
        assert_eq!(train.len(), 1);

        assert!(matches!(
            split_train_test(&panel, day(500)),
            Err(Error::Range(_))
        ));
        assert!(matches!(split_train_test(&panel, day(0)), Err(Error::Range(_))));
    }

    #[test]
    fn align_is_idempotent() {
        let csv = wide_csv(45, &["A", "B", "C"], Some((10, 2)));
        let panel = parse_prices(csv.as_bytes(), &PriceFormat::default()).unwrap();
        let again = align(RawPrices::from(&panel)).unwrap();
        assert_eq!(panel, again);
    }

    #[test]
    fn wide_csv_round_trip() {
        let panel = PricePanel {
            tickers: vec!["A,B".into(), "C".into()],
            dates: (0..40).map(day).collect(),
            prices: vec![(0..40).map(|k| 0.1 + 0.2 * k as f64).collect(), (0..40).map(|k| 1e-7 * (k + 1) as f64).collect()],
        };
        let back = parse_prices(prices_to_csv(&panel).as_bytes(), &PriceFormat::default()).unwrap();
        assert_eq!(back, panel);
    }
}
