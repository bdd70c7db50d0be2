//! CSV emission, parsing and the plain-text summary table.

use std::io::{Read, Write};
use std::path::Path;

use noisy_mc::samplers::{MixtureScaling, UpdateTiming};

use crate::config::{Experiment, ExperimentConfig};
use crate::runner::{ResultRow, RowKind};

pub const COLUMNS: [&str; 28] = [
    "kind",
    "experiment",
    "algorithm",
    "budget",
    "k",
    "t_surr",
    "rho_update",
    "ndis_t",
    "ndis_n",
    "ndis_l",
    "proposal_scale",
    "burn_in",
    "seed",
    "reps",
    "episodes",
    "abc_epsilon",
    "abc_n",
    "abc_y",
    "mhs_update",
    "ndis_mixture",
    "run",
    "oracle_units",
    "mean",
    "var",
    "mean_error",
    "var_error",
    "expected_return",
    "wall_ms",
];

/// Config echo occupies columns 1..CONFIG_END; results start at RUN.
const CONFIG_END: usize = 20;
const RUN: usize = CONFIG_END;

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}, column '{column}': {msg}")]
    Field { row: usize, column: &'static str, msg: String },
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";")
}

fn record(row: &ResultRow) -> Vec<String> {
    let c = &row.config;
    vec![
        match row.kind {
            RowKind::Run => "run".into(),
            RowKind::Aggregate => "aggregate".into(),
        },
        c.experiment.to_string(),
        c.algorithm.to_string(),
        c.budget.to_string(),
        c.k.to_string(),
        c.t_surr.to_string(),
        fmt_f64(c.rho_update),
        c.ndis_t.to_string(),
        c.ndis_n.to_string(),
        c.ndis_l.to_string(),
        fmt_f64(c.proposal_scale),
        fmt_f64(c.burn_in),
        c.seed.to_string(),
        c.reps.to_string(),
        c.episodes.to_string(),
        fmt_f64(c.abc_epsilon),
        c.abc_n.to_string(),
        fmt_vec(&c.abc_y),
        match c.mhs_update {
            UpdateTiming::BeforeTest => "before".into(),
            UpdateTiming::AfterTest => "after".into(),
        },
        match c.ndis_mixture {
            MixtureScaling::Raw => "raw".into(),
            MixtureScaling::Normalized => "normalized".into(),
        },
        row.run.map(|r| r.to_string()).unwrap_or_default(),
        row.oracle_units.to_string(),
        fmt_vec(&row.mean),
        fmt_vec(&row.var),
        fmt_f64(row.mean_error),
        fmt_f64(row.var_error),
        row.expected_return.map(fmt_f64).unwrap_or_default(),
        row.wall_ms.map(fmt_f64).unwrap_or_default(),
    ]
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<(), OutputError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(COLUMNS)?;
    for r in rows {
        out.write_record(record(r))?;
    }
    out.flush().map_err(|e| OutputError::Io { path: "<writer>".into(), source: e })?;
    Ok(())
}

/// Writes `rows` to `path`, header first.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), OutputError> {
    let io = |e| OutputError::Io { path: path.display().to_string(), source: e };
    let file = std::fs::File::create(path).map_err(io)?;
    let mut buf = std::io::BufWriter::new(file);
    write_csv(rows, &mut buf)?;
    buf.flush().map_err(io)
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>, OutputError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let get = |j: usize| rec.get(j).unwrap_or("");
        let field = |j: usize, msg: String| OutputError::Field { row, column: COLUMNS[j], msg };
        let vec_at = |j: usize| -> Result<Vec<f64>, OutputError> {
            let s = get(j);
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(';').map(|x| x.parse::<f64>().map_err(|e| field(j, e.to_string()))).collect()
        };
        let f_at = |j: usize| get(j).parse::<f64>().map_err(|e| field(j, e.to_string()));
        let opt_at = |j: usize| if get(j).is_empty() { Ok(None) } else { f_at(j).map(Some) };

        let experiment: Experiment = get(1).parse().map_err(|e: crate::config::ConfigError| field(1, e.to_string()))?;
        let mut cfg = ExperimentConfig::preset(experiment);
        for (j, key) in COLUMNS.iter().enumerate().take(CONFIG_END).skip(2) {
            cfg.set(key, &get(j).replace(';', " ")).map_err(|e| field(j, e.to_string()))?;
        }
        let kind = match get(0) {
            "run" => RowKind::Run,
            "aggregate" => RowKind::Aggregate,
            other => return Err(field(0, format!("unknown row kind '{other}'"))),
        };
        rows.push(ResultRow {
            kind,
            config: cfg,
            run: if get(RUN).is_empty() { None } else { Some(get(RUN).parse().map_err(|e: std::num::ParseIntError| field(RUN, e.to_string()))?) },
            oracle_units: get(RUN + 1).parse().map_err(|e: std::num::ParseIntError| field(RUN + 1, e.to_string()))?,
            mean: vec_at(RUN + 2)?,
            var: vec_at(RUN + 3)?,
            mean_error: f_at(RUN + 4)?,
            var_error: f_at(RUN + 5)?,
            expected_return: opt_at(RUN + 6)?,
            wall_ms: opt_at(RUN + 7)?,
        });
    }
    Ok(rows)
}

fn label(c: &ExperimentConfig) -> String {
    use crate::config::Algorithm::*;
    match c.algorithm {
        DaPmMh => format!("{} T_surr={} K={}", c.algorithm, c.t_surr, c.k),
        MhSAlways | MhSAccept => format!("{} K={}", c.algorithm, c.k),
        NDis => format!("{} T={} N={} K={}", c.algorithm, c.ndis_t, c.ndis_n, c.k),
        _ => c.algorithm.to_string(),
    }
}

/// Aligned table of the aggregate rows (or all rows if there are none),
/// sorted by mean error. Cart-pole rows show the six policy components
/// and the expected return instead of the error columns.
pub fn summarize(rows: &[ResultRow]) -> String {
    let mut sel: Vec<&ResultRow> = rows.iter().filter(|r| r.kind == RowKind::Aggregate).collect();
    if sel.is_empty() {
        sel = rows.iter().collect();
    }
    sel.sort_by(|a, b| a.mean_error.total_cmp(&b.mean_error));
    let cart = sel.iter().all(|r| r.config.experiment == Experiment::Cartpole);
    let header: Vec<String> = if cart {
        let mut h = vec!["algorithm".to_string()];
        h.extend((1..=6).map(|i| format!("theta{i}")));
        h.push("exp. return".into());
        h.push("oracle units".into());
        h
    } else {
        ["algorithm", "mean error", "var error", "oracle units"].iter().map(|s| s.to_string()).collect()
    };
    let body: Vec<Vec<String>> = sel
        .iter()
        .map(|r| {
            let mut line = vec![label(&r.config)];
            if cart {
                line.extend(r.mean.iter().map(|x| format!("{x:.4}")));
                line.push(r.expected_return.map_or("-".into(), |x| format!("{x:.1}")));
            } else {
                line.push(format!("{:.4e}", r.mean_error));
                line.push(format!("{:.4e}", r.var_error));
            }
            line.push(r.oracle_units.to_string());
            line
        })
        .collect();
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|j| body.iter().map(|l| l.get(j).map_or(0, |s| s.len())).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let fmt_line = |l: &[String]| {
        l.iter()
            .enumerate()
            .map(|(j, s)| if j == 0 { format!("{s:<w$}", w = width[j]) } else { format!("{s:>w$}", w = width[j]) })
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = fmt_line(&header);
    out.push('\n');
    for l in &body {
        out.push_str(&fmt_line(l));
        out.push('\n');
    }
    out
}
