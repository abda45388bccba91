//! Daily price ingestion, return and volatility series, and date-aligned panels.
//!
//! Returns are log-price differences between consecutive *observations*; gaps
//! for weekends or holidays are not filled. A [`Panel`] aligns several series
//! on the union of their dates and marks absent observations explicitly.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DATE_FORMAT: &str = "%Y-%m-%d";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AssetClass {
    #[serde(rename = "stock")]
    StockIndex,
    #[serde(rename = "currency")]
    CurrencyFuture,
    #[serde(rename = "commodity")]
    CommodityFuture,
}

impl AssetClass {
    pub const ALL: [AssetClass; 3] = [
        AssetClass::StockIndex,
        AssetClass::CurrencyFuture,
        AssetClass::CommodityFuture,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssetClass::StockIndex => "stock",
            AssetClass::CurrencyFuture => "currency",
            AssetClass::CommodityFuture => "commodity",
        }
    }
}

impl fmt::Display for AssetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AssetClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "stock" => Ok(AssetClass::StockIndex),
            "currency" => Ok(AssetClass::CurrencyFuture),
            "commodity" => Ok(AssetClass::CommodityFuture),
            other => Err(format!(
                "unknown asset class '{other}' (expected stock, currency or commodity)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetMeta {
    pub symbol: String,
    pub class: AssetClass,
    pub description: String,
}

impl AssetMeta {
    pub fn new(symbol: impl Into<String>, class: AssetClass) -> Self {
        AssetMeta {
            symbol: symbol.into(),
            class,
            description: String::new(),
        }
    }
}

/// Dated, strictly positive price observations for one asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    symbol: String,
    dates: Vec<NaiveDate>,
    prices: Vec<f64>,
}

impl PriceSeries {
    pub fn new(symbol: impl Into<String>, observations: Vec<(NaiveDate, f64)>) -> Result<Self> {
        let symbol = symbol.into();
        if symbol.is_empty() {
            return Err(Error::InvalidSeries {
                symbol,
                message: "empty symbol".into(),
            });
        }
        if observations.len() < 2 {
            return Err(Error::SeriesTooShort {
                symbol,
                len: observations.len(),
            });
        }
        for w in observations.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSeries {
                    symbol,
                    message: format!("dates not strictly increasing at {}", w[1].0),
                });
            }
        }
        if let Some(&(_, p)) = observations
            .iter()
            .find(|(_, p)| !(p.is_finite() && *p > 0.0))
        {
            return Err(Error::InvalidSeries {
                symbol,
                message: format!("price {p} is not finite and positive"),
            });
        }
        let (dates, prices) = observations.into_iter().unzip();
        Ok(PriceSeries {
            symbol,
            dates,
            prices,
        })
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Return,
    Volatility,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SeriesKind::Return => f.write_str("return"),
            SeriesKind::Volatility => f.write_str("volatility"),
        }
    }
}

/// A dated real-valued series derived from prices: returns or volatilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    symbol: String,
    kind: SeriesKind,
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
}

pub type ReturnSeries = Series;
pub type VolatilitySeries = Series;

impl Series {
    pub fn new(
        symbol: impl Into<String>,
        kind: SeriesKind,
        dates: Vec<NaiveDate>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let symbol = symbol.into();
        let invalid = |message: String| Error::InvalidSeries {
            symbol: symbol.clone(),
            message,
        };
        if dates.len() != values.len() {
            return Err(invalid(format!(
                "{} dates but {} values",
                dates.len(),
                values.len()
            )));
        }
        if values.is_empty() {
            return Err(Error::EmptySeries { symbol });
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(invalid(format!(
                "dates not strictly increasing at {}",
                w[1]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value {v}")));
        }
        if kind == SeriesKind::Volatility {
            if let Some(v) = values.iter().find(|v| **v < 0.0) {
                return Err(invalid(format!("negative volatility {v}")));
            }
        }
        Ok(Series {
            symbol,
            kind,
            dates,
            values,
        })
    }

    /// Builds a series on consecutive synthetic dates, handy for tests and simulations.
    pub fn from_values(
        symbol: impl Into<String>,
        kind: SeriesKind,
        start: NaiveDate,
        values: Vec<f64>,
    ) -> Result<Self> {
        let dates = start.iter_days().take(values.len()).collect();
        Series::new(symbol, kind, dates, values)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_symbol(mut self, symbol: impl Into<String>) -> Self {
        self.symbol = symbol.into();
        self
    }
}

/// Log returns between consecutive observations, dated at the later observation.
pub fn compute_returns(prices: &PriceSeries) -> ReturnSeries {
    let values = prices
        .prices
        .windows(2)
        .map(|w| w[1].ln() - w[0].ln())
        .collect();
    Series {
        symbol: prices.symbol.clone(),
        kind: SeriesKind::Return,
        dates: prices.dates[1..].to_vec(),
        values,
    }
}

/// Absolute value of each return.
pub fn compute_volatility(returns: &ReturnSeries) -> VolatilitySeries {
    Series {
        symbol: returns.symbol.clone(),
        kind: SeriesKind::Volatility,
        dates: returns.dates.clone(),
        values: returns.values.iter().map(|r| r.abs()).collect(),
    }
}

/// Series aligned on a shared calendar axis; `None` marks a missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    kind: SeriesKind,
    axis: Vec<NaiveDate>,
    meta: Vec<AssetMeta>,
    columns: Vec<Vec<Option<f64>>>,
}

/// Aligns series on the sorted union of their dates. Columns are ordered by
/// symbol so the result does not depend on input order.
pub fn build_panel(series: &[Series], meta: &[AssetMeta]) -> Result<Panel> {
    let first = series.first().ok_or(Error::EmptyPanel)?;
    let kind = first.kind;

    let mut meta_by_symbol: HashMap<&str, &AssetMeta> = HashMap::with_capacity(meta.len());
    for m in meta {
        if meta_by_symbol.insert(m.symbol.as_str(), m).is_some() {
            return Err(Error::DuplicateSymbol(m.symbol.clone()));
        }
    }

    let mut ordered: Vec<&Series> = series.iter().collect();
    ordered.sort_by(|a, b| a.symbol.cmp(&b.symbol));
    for w in ordered.windows(2) {
        if w[0].symbol == w[1].symbol {
            return Err(Error::DuplicateSymbol(w[0].symbol.clone()));
        }
    }

    let mut panel_meta = Vec::with_capacity(ordered.len());
    for s in &ordered {
        if s.kind != kind {
            return Err(Error::KindMismatch {
                symbol: s.symbol.clone(),
                expected: kind.to_string(),
                found: s.kind.to_string(),
            });
        }
        let m = meta_by_symbol
            .get(s.symbol.as_str())
            .ok_or_else(|| Error::UnknownSymbol(s.symbol.clone()))?;
        panel_meta.push((*m).clone());
    }

    let axis: Vec<NaiveDate> = ordered
        .iter()
        .flat_map(|s| s.dates.iter().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let columns = ordered
        .iter()
        .map(|s| {
            let mut column = vec![None; axis.len()];
            let mut cursor = 0;
            for (date, value) in s.dates.iter().zip(&s.values) {
                // both sequences are sorted, so a forward scan suffices
                while axis[cursor] < *date {
                    cursor += 1;
                }
                column[cursor] = Some(*value);
            }
            column
        })
        .collect();

    Ok(Panel {
        kind,
        axis,
        meta: panel_meta,
        columns,
    })
}

impl Panel {
    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn axis(&self) -> &[NaiveDate] {
        &self.axis
    }

    pub fn meta(&self) -> &[AssetMeta] {
        &self.meta
    }

    pub fn n_assets(&self) -> usize {
        self.columns.len()
    }

    pub fn symbols(&self) -> Vec<String> {
        self.meta.iter().map(|m| m.symbol.clone()).collect()
    }

    pub fn symbol(&self, index: usize) -> &str {
        &self.meta[index].symbol
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.meta.iter().position(|m| m.symbol == symbol)
    }

    pub fn column(&self, index: usize) -> &[Option<f64>] {
        &self.columns[index]
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    /// Present observations of one column as a standalone series.
    pub fn series(&self, index: usize) -> Result<Series> {
        let (dates, values) = self
            .axis
            .iter()
            .zip(&self.columns[index])
            .filter_map(|(d, v)| v.map(|v| (*d, v)))
            .unzip();
        Series::new(self.symbol(index), self.kind, dates, values)
    }

    /// Values of two columns on the dates where both are present.
    pub fn pair_overlap(&self, i: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
        self.columns[i]
            .iter()
            .zip(&self.columns[j])
            .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
            .unzip()
    }

    /// Restricts the axis to `[from, to]` (inclusive). Columns are kept even if
    /// they become entirely missing.
    pub fn window(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Panel {
        let keep: Vec<usize> = self
            .axis
            .iter()
            .enumerate()
            .filter(|(_, d)| from.is_none_or(|f| **d >= f) && to.is_none_or(|t| **d <= t))
            .map(|(k, _)| k)
            .collect();
        Panel {
            kind: self.kind,
            axis: keep.iter().map(|&k| self.axis[k]).collect(),
            meta: self.meta.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| keep.iter().map(|&k| c[k]).collect())
                .collect(),
        }
    }

    /// Writes the panel as wide CSV (`date,SYM1,...`), empty cells for missing values.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["date".to_string()];
        header.extend(self.symbols());
        writer.write_record(&header)?;
        for (k, date) in self.axis.iter().enumerate() {
            let mut row = vec![date.format(DATE_FORMAT).to_string()];
            row.extend(
                self.columns
                    .iter()
                    .map(|c| c[k].map(|v| v.to_string()).unwrap_or_default()),
            );
            writer.write_record(&row)?;
        }
        writer.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceFormat {
    /// `date,SYM1,SYM2,...`, one row per date, empty cell = missing.
    #[default]
    Wide,
    /// `symbol,date,price`, one row per observation.
    Long,
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn malformed(line: u64, message: impl Into<String>) -> Error {
    Error::MalformedInput {
        line,
        message: message.into(),
    }
}

fn map_csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    malformed(line, err.to_string())
}

fn parse_date(field: &str, line: u64) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field, DATE_FORMAT)
        .map_err(|_| malformed(line, format!("invalid date '{field}'")))
}

fn parse_price(field: &str, symbol: &str, line: u64) -> Result<f64> {
    let value: f64 = field
        .parse()
        .map_err(|_| malformed(line, format!("non-numeric price '{field}' for {symbol}")))?;
    if !value.is_finite() {
        return Err(malformed(
            line,
            format!("non-finite price '{field}' for {symbol}"),
        ));
    }
    if value <= 0.0 {
        return Err(Error::NonPositivePrice {
            line,
            symbol: symbol.to_string(),
            value,
        });
    }
    Ok(value)
}

/// Collected observations for one symbol, keyed by date to catch duplicates.
#[derive(Default)]
struct Observations(BTreeMap<NaiveDate, f64>);

impl Observations {
    fn insert(&mut self, symbol: &str, date: NaiveDate, price: f64, line: u64) -> Result<()> {
        if self.0.insert(date, price).is_some() {
            return Err(Error::DuplicateDate {
                line,
                symbol: symbol.to_string(),
                date,
            });
        }
        Ok(())
    }

    fn into_series(self, symbol: String) -> Result<PriceSeries> {
        if self.0.len() < 2 {
            return Err(Error::EmptySeries { symbol });
        }
        PriceSeries::new(symbol, self.0.into_iter().collect())
    }
}

/// Parses a price file into one series per asset.
pub fn parse_prices<R: Read>(input: R, format: PriceFormat) -> Result<Vec<PriceSeries>> {
    match format {
        PriceFormat::Wide => parse_wide(input),
        PriceFormat::Long => parse_long(input),
    }
}

fn parse_wide<R: Read>(input: R) -> Result<Vec<PriceSeries>> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(map_csv_error)?.clone();
    if header.is_empty() || !header[0].eq_ignore_ascii_case("date") {
        return Err(malformed(1, "header must start with 'date'"));
    }
    let symbols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if symbols.is_empty() {
        return Err(malformed(1, "header lists no symbols"));
    }
    let mut seen = HashSet::new();
    for s in &symbols {
        if s.is_empty() {
            return Err(malformed(1, "empty symbol in header"));
        }
        if !seen.insert(s.as_str()) {
            return Err(Error::DuplicateSymbol(s.clone()));
        }
    }

    let mut columns: Vec<Observations> = symbols.iter().map(|_| Observations::default()).collect();
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record_line(&record);
        let date = parse_date(&record[0], line)?;
        for ((symbol, column), field) in symbols.iter().zip(&mut columns).zip(record.iter().skip(1))
        {
            if field.is_empty() {
                continue;
            }
            let price = parse_price(field, symbol, line)?;
            column.insert(symbol, date, price, line)?;
        }
    }

    symbols
        .into_iter()
        .zip(columns)
        .map(|(symbol, column)| column.into_series(symbol))
        .collect()
}

fn parse_long<R: Read>(input: R) -> Result<Vec<PriceSeries>> {
    let mut reader = csv_reader(input);
    let header = reader.headers().map_err(map_csv_error)?.clone();
    let expected = ["symbol", "date", "price"];
    if header.len() != 3
        || !header
            .iter()
            .zip(expected)
            .all(|(h, e)| h.eq_ignore_ascii_case(e))
    {
        return Err(malformed(1, "header must be 'symbol,date,price'"));
    }

    let mut order: Vec<String> = Vec::new();
    let mut by_symbol: HashMap<String, Observations> = HashMap::new();
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record_line(&record);
        let symbol = &record[0];
        if symbol.is_empty() {
            return Err(malformed(line, "empty symbol"));
        }
        let date = parse_date(&record[1], line)?;
        let price = parse_price(&record[2], symbol, line)?;
        if !by_symbol.contains_key(symbol) {
            order.push(symbol.to_string());
        }
        by_symbol
            .entry(symbol.to_string())
            .or_default()
            .insert(symbol, date, price, line)?;
    }

    order
        .into_iter()
        .map(|symbol| {
            let obs = by_symbol.remove(&symbol).unwrap_or_default();
            obs.into_series(symbol)
        })
        .collect()
}

/// Parses `symbol,class,description` metadata.
pub fn parse_meta<R: Read>(input: R) -> Result<Vec<AssetMeta>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(input);
    let header = reader.headers().map_err(map_csv_error)?.clone();
    if header.len() < 2
        || !header[0].eq_ignore_ascii_case("symbol")
        || !header[1].eq_ignore_ascii_case("class")
    {
        return Err(malformed(1, "header must be 'symbol,class,description'"));
    }
    let mut seen = HashSet::new();
    let mut meta = Vec::new();
    for record in reader.records() {
        let record = record.map_err(map_csv_error)?;
        let line = record_line(&record);
        if record.len() < 2 || record.len() > 3 {
            return Err(malformed(line, "expected symbol,class[,description]"));
        }
        let symbol = record[0].to_string();
        if symbol.is_empty() {
            return Err(malformed(line, "empty symbol"));
        }
        let class = record[1].parse().map_err(|e: String| malformed(line, e))?;
        if !seen.insert(symbol.clone()) {
            return Err(Error::DuplicateSymbol(symbol));
        }
        meta.push(AssetMeta {
            symbol,
            class,
            description: record.get(2).unwrap_or("").to_string(),
        });
    }
    Ok(meta)
}
