//! CSV/JSON writers and the series reader.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nanonmr_core::{CorrelationSeries, CylinderGeometry, FluidParams, ModelTag, SeriesPoint};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Format;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance stamped into every artifact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: String,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: &str) -> Self {
        Provenance { config: config_hash.to_string(), version: VERSION.to_string() }
    }
}

/// 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    match s {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        "nan" => Ok(f64::NAN),
        _ => s.parse::<f64>().with_context(|| format!("bad number `{s}`")),
    }
}

/// Rounds to the precision the CSV format keeps.
pub fn round12(v: f64) -> f64 {
    parse_num(&fmt_num(v)).expect("formatted numbers parse")
}

fn tau_field(fluid: &FluidParams) -> String {
    fluid.tau_ev.map_or_else(|| "none".to_string(), fmt_num)
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeriesDoc {
    model: ModelTag,
    #[serde(rename = "R")]
    r: f64,
    #[serde(rename = "L")]
    l: f64,
    d: f64,
    tau_ev: Option<f64>,
    seed: Option<u64>,
    provenance: Provenance,
    #[serde(rename = "t_over_TD")]
    t_over_td: Vec<f64>,
    #[serde(rename = "G")]
    g: Vec<f64>,
    err: Vec<f64>,
}

pub fn render_series(series: &CorrelationSeries, format: Format, prov: &Provenance) -> Result<String> {
    if series.is_empty() {
        bail!("refusing to write an empty series");
    }
    let geom = &series.geometry;
    Ok(match format {
        Format::Csv => {
            let mut s = format!(
                "# model={} R={} L={} d={} tau_ev={} seed={} config={} version={}\nt_over_TD,G,err\n",
                series.model,
                fmt_num(geom.radius),
                fmt_num(geom.height),
                fmt_num(geom.depth),
                tau_field(&series.fluid),
                series.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
                prov.config,
                prov.version
            );
            for p in series.points() {
                writeln!(s, "{},{},{}", fmt_num(p.t), fmt_num(p.g), fmt_num(p.err)).unwrap();
            }
            s
        }
        Format::Json => {
            let doc = SeriesDoc {
                model: series.model,
                r: round12(geom.radius),
                l: round12(geom.height),
                d: round12(geom.depth),
                tau_ev: series.fluid.tau_ev.map(round12),
                seed: series.seed,
                provenance: prov.clone(),
                t_over_td: series.points().iter().map(|p| round12(p.t)).collect(),
                g: series.points().iter().map(|p| round12(p.g)).collect(),
                err: series.points().iter().map(|p| round12(p.err)).collect(),
            };
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    })
}

/// Writes one series. Nothing is created when the series is empty.
pub fn write_series(series: &CorrelationSeries, path: &Path, format: Format, prov: &Provenance) -> Result<()> {
    let text = render_series(series, format, prov)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn build_series(model: ModelTag, r: f64, l: f64, d: f64, tau_ev: Option<f64>, seed: Option<u64>, points: Vec<SeriesPoint>) -> Result<CorrelationSeries> {
    if points.is_empty() {
        bail!("series file has no data rows");
    }
    let geom = CylinderGeometry::new(r, l, d)?;
    let fluid = FluidParams::new(1.0, tau_ev)?;
    let s = CorrelationSeries::new(model, geom, fluid, points)?;
    Ok(match seed {
        Some(v) => s.with_seed(v),
        None => s,
    })
}

fn parse_csv_series(text: &str) -> Result<CorrelationSeries> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| anyhow!("empty series file"))?;
    let fields = header.strip_prefix("# ").ok_or_else(|| anyhow!("missing `# model=...` header line"))?;
    let get = |key: &str| -> Result<&str> {
        fields
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .ok_or_else(|| anyhow!("header lacks `{key}=`"))
    };
    let model: ModelTag = get("model")?.parse()?;
    let tau_ev = match get("tau_ev")? {
        "none" => None,
        s => Some(parse_num(s)?),
    };
    let seed = match get("seed")? {
        "none" => None,
        s => Some(s.parse::<u64>().context("bad seed")?),
    };
    let (r, l, d) = (parse_num(get("R")?)?, parse_num(get("L")?)?, parse_num(get("d")?)?);
    match lines.next() {
        Some((_, "t_over_TD,G,err")) => {}
        Some((n, other)) => bail!("line {}: expected column header `t_over_TD,G,err`, got `{other}`", n + 1),
        None => bail!("series file has no data rows"),
    }
    let mut points = Vec::new();
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(m) = rest.split_whitespace().find_map(|kv| kv.strip_prefix("model=")) {
                bail!("line {}: second series header (model={m}); one model per file", n + 1);
            }
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 3 {
            bail!("line {}: expected 3 columns, found {}", n + 1, cols.len());
        }
        let v = cols.iter().map(|c| parse_num(c)).collect::<Result<Vec<_>>>().with_context(|| format!("line {}", n + 1))?;
        points.push(SeriesPoint { t: v[0], g: v[1], err: v[2] });
    }
    build_series(model, r, l, d, tau_ev, seed, points)
}

fn parse_json_series(text: &str) -> Result<CorrelationSeries> {
    let value: Value = serde_json::from_str(text).context("parsing JSON series")?;
    if value.is_array() {
        let models: Vec<String> = value.as_array().unwrap().iter().filter_map(|v| v.get("model")?.as_str().map(String::from)).collect();
        if models.windows(2).any(|w| w[0] != w[1]) {
            bail!("file mixes models ({}); one model per file", models.join(", "));
        }
        bail!("expected a single series object, found an array");
    }
    let doc: SeriesDoc = serde_json::from_value(value).context("parsing JSON series")?;
    if doc.g.len() != doc.t_over_td.len() || doc.err.len() != doc.t_over_td.len() {
        bail!("column lengths differ");
    }
    let points = (0..doc.g.len()).map(|i| SeriesPoint { t: doc.t_over_td[i], g: doc.g[i], err: doc.err[i] }).collect();
    build_series(doc.model, doc.r, doc.l, doc.d, doc.tau_ev, doc.seed, points)
}

pub fn parse_series(text: &str) -> Result<CorrelationSeries> {
    if text.trim_start().starts_with('{') || text.trim_start().starts_with('[') {
        parse_json_series(text)
    } else {
        parse_csv_series(text)
    }
}

pub fn read_series(path: &Path) -> Result<CorrelationSeries> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_series(&text).with_context(|| format!("in {}", path.display()))
}

/// A generic table: column names and rows of numbers or strings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub command: String,
    /// Extra `key=value` pairs for the header line.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Table { command: command.into(), meta: Vec::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(v: f64) -> Value {
    // serde_json turns non-finite floats into null; keep them as strings instead
    if v.is_finite() {
        Value::from(round12(v))
    } else {
        Value::from(fmt_num(v))
    }
}

pub fn render_table(table: &Table, format: Format, prov: &Provenance) -> Result<String> {
    if table.rows.is_empty() {
        bail!("refusing to write an empty table");
    }
    Ok(match format {
        Format::Csv => {
            let mut s = format!("# command={}", table.command);
            for (k, v) in &table.meta {
                write!(s, " {k}={v}").unwrap();
            }
            writeln!(s, " config={} version={}", prov.config, prov.version).unwrap();
            s.push_str(&table.columns.join(","));
            s.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|v| match v {
                        Value::Number(n) if n.is_f64() => fmt_num(n.as_f64().unwrap_or(f64::NAN)),
                        Value::Number(n) => n.to_string(),
                        Value::String(t) => t.clone(),
                        Value::Bool(b) => b.to_string(),
                        Value::Null => "nan".into(),
                        other => other.to_string(),
                    })
                    .collect();
                s.push_str(&cells.join(","));
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let meta: serde_json::Map<String, Value> = table.meta.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
            let doc = serde_json::json!({
                "command": table.command,
                "meta": meta,
                "provenance": prov,
                "columns": table.columns,
                "rows": table.rows,
            });
            serde_json::to_string_pretty(&doc)? + "\n"
        }
    })
}

/// Gnuplot script plotting the third column over the (R, L) grid of a map CSV.
pub fn gnuplot_map(data_file: &str, title: &str, zcol: usize, contour_at: Option<f64>) -> String {
    let mut s = String::new();
    writeln!(s, "# gnuplot script for {data_file}").unwrap();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set logscale xy").unwrap();
    writeln!(s, "set xlabel 'R/d'").unwrap();
    writeln!(s, "set ylabel 'L/d'").unwrap();
    writeln!(s, "set title '{title}'").unwrap();
    writeln!(s, "set view map").unwrap();
    writeln!(s, "set dgrid3d").unwrap();
    if let Some(c) = contour_at {
        writeln!(s, "set contour base").unwrap();
        writeln!(s, "set cntrparam levels discrete {c}").unwrap();
    }
    writeln!(s, "splot '{data_file}' every ::2 using 1:2:{zcol} with pm3d notitle").unwrap();
    s
}

/// Gnuplot script overlaying analytic and Monte Carlo columns of a comparison CSV.
pub fn gnuplot_compare(data_file: &str, title: &str) -> String {
    format!(
        "# gnuplot script for {data_file}\nset datafile separator ','\nset logscale xy\nset xlabel 't/T_D'\nset ylabel 'G'\nset title '{title}'\n\
         plot '{data_file}' every ::2 using 1:2 with lines title 'analytic', \\\n     '' every ::2 using 1:4:5 with yerrorbars title 'Monte Carlo'\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(model: ModelTag) -> CorrelationSeries {
        let geom = CylinderGeometry::new(5.0, 5.0, 1.0).unwrap();
        let points = (0..8)
            .map(|i| {
                let t = 0.01 * 3f64.powi(i);
                SeriesPoint { t, g: 0.7 * (-t).exp() + 1.0 / 3.0, err: t * 1e-7 }
            })
            .collect();
        CorrelationSeries::new(model, geom, FluidParams::evaporating(1e3).unwrap(), points).unwrap().with_seed(7)
    }

    fn rounded(s: &CorrelationSeries) -> Vec<SeriesPoint> {
        s.points().iter().map(|p| SeriesPoint { t: round12(p.t), g: round12(p.g), err: round12(p.err) }).collect()
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt_num(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!(round12(1.0 / 3.0), 0.333333333333);
    }

    #[test]
    fn csv_round_trip() {
        let prov = Provenance::new("abc");
        let s = sample(ModelTag::Evaporating);
        let text = render_series(&s, Format::Csv, &prov).unwrap();
        assert!(text.starts_with("# model=evaporating R=5.00000000000e0 L=5.00000000000e0 d=1.00000000000e0 tau_ev=1.00000000000e3 seed=7 config=abc version="));
        assert_eq!(text.lines().nth(1), Some("t_over_TD,G,err"));
        let back = parse_series(&text).unwrap();
        assert_eq!(back.model, s.model);
        assert_eq!(back.geometry, s.geometry);
        assert_eq!(back.fluid, s.fluid);
        assert_eq!(back.seed, Some(7));
        assert_eq!(back.points(), &rounded(&s)[..]);
        assert_eq!(render_series(&back, Format::Csv, &prov).unwrap(), text);
    }

    #[test]
    fn json_round_trip() {
        let prov = Provenance::new("abc");
        let s = sample(ModelTag::MonteCarlo);
        let text = render_series(&s, Format::Json, &prov).unwrap();
        let back = parse_series(&text).unwrap();
        assert_eq!(back.model, ModelTag::MonteCarlo);
        assert_eq!(back.points(), &rounded(&s)[..]);
        assert_eq!(render_series(&back, Format::Json, &prov).unwrap(), text);
    }

    #[test]
    fn empty_series_not_written() {
        let geom = CylinderGeometry::new(5.0, 5.0, 1.0).unwrap();
        let s = CorrelationSeries::new(ModelTag::Sticky, geom, FluidParams::default(), vec![]).unwrap();
        let dir = std::env::temp_dir().join(format!("nanonmr-empty-{}", std::process::id()));
        let _ = fs::remove_file(&dir);
        assert!(write_series(&s, &dir, Format::Csv, &Provenance::new("x")).is_err());
        assert!(!dir.exists());
    }

    #[test]
    fn mixed_models_rejected() {
        let prov = Provenance::new("abc");
        let a = render_series(&sample(ModelTag::Sticky), Format::Csv, &prov).unwrap();
        let b = render_series(&sample(ModelTag::Reflective), Format::Csv, &prov).unwrap();
        let err = parse_series(&format!("{a}{b}")).unwrap_err();
        assert!(format!("{err:#}").contains("one model per file"));
        let ja = render_series(&sample(ModelTag::Sticky), Format::Json, &prov).unwrap();
        let jb = render_series(&sample(ModelTag::Reflective), Format::Json, &prov).unwrap();
        let err = parse_series(&format!("[{ja},{jb}]")).unwrap_err();
        assert!(format!("{err:#}").contains("mixes models"));
    }

    #[test]
    fn malformed_files() {
        assert!(parse_series("").is_err());
        assert!(parse_series("t_over_TD,G,err\n1,2,3\n").is_err());
        assert!(parse_series("# model=sticky R=5 L=5 d=1 tau_ev=none seed=none\nt_over_TD,G,err\n").is_err());
        assert!(parse_series("# model=sticky R=5 L=5 d=1 tau_ev=none seed=none\nt_over_TD,G,err\n1,2\n").is_err());
        assert!(parse_series("# model=sticky R=5 L=5 d=1 tau_ev=none seed=none\nt_over_TD,G,err\n2,1,0\n1,1,0\n").is_err());
        assert!(parse_series("# model=sticky R=5 L=5 d=1 tau_ev=none seed=none\nt_over_TD,G,err\n1,1,0\n2,1,0\n").is_ok());
    }

    #[test]
    fn table_rendering() {
        let prov = Provenance::new("h");
        let mut t = Table::new("demo", &["x", "label"]).meta("tau_ev", 10);
        t.push(vec![num(0.5), Value::from("a")]);
        t.push(vec![num(f64::INFINITY), Value::from("b")]);
        let csv = render_table(&t, Format::Csv, &prov).unwrap();
        assert_eq!(csv, format!("# command=demo tau_ev=10 config=h version={VERSION}\nx,label\n5.00000000000e-1,a\ninf,b\n"));
        let json: Value = serde_json::from_str(&render_table(&t, Format::Json, &prov).unwrap()).unwrap();
        assert_eq!(json["rows"][1][0], "inf");
        assert!(render_table(&Table::new("demo", &["x"]), Format::Csv, &prov).is_err());
    }
}
