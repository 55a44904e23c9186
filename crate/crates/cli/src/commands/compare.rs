use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use vastate::metrics::{parse_eval_csv, MetricReport};
use vastate::stats::{friedman_test, wilcoxon_signed_rank, ScoreMatrix};
use vastate::Error;

use crate::error::{usage, CliResult};
use crate::manifest::{create_dir, read_to_string, write, RunManifest};

pub const FRIEDMAN_FILE: &str = "friedman.csv";
pub const WILCOXON_FILE: &str = "wilcoxon.csv";
pub const REPORT_FILE: &str = "report.md";

const METRICS: [(&str, fn(&MetricReport) -> f64); 5] = [
    ("mse", |r| r.mse),
    ("esr", |r| r.esr),
    ("nrmse", |r| r.nrmse),
    ("m_sf", |r| r.m_sf),
    ("m_stft", |r| r.m_stft),
];

fn expand(inputs: &[String]) -> CliResult<Vec<PathBuf>> {
    let mut out = BTreeSet::new();
    for pat in inputs {
        let matches = glob::glob(pat).map_err(|e| usage(format!("bad pattern '{pat}': {e}")))?;
        let before = out.len();
        for m in matches {
            out.insert(m.map_err(|e| Error::io(e.path().to_path_buf(), e.into()))?);
        }
        if out.len() == before && Path::new(pat).exists() {
            out.insert(PathBuf::from(pat));
        }
    }
    if out.is_empty() {
        return Err(usage("no evaluation CSV matched"));
    }
    Ok(out.into_iter().collect())
}

/// dataset -> model -> composition -> mean report
type Table = BTreeMap<String, BTreeMap<String, BTreeMap<usize, MetricReport>>>;

fn collect(paths: &[PathBuf]) -> CliResult<Table> {
    let mut t: Table = BTreeMap::new();
    for p in paths {
        let rows = parse_eval_csv(&read_to_string(p)?).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", p.display())),
            other => other,
        })?;
        for r in rows.into_iter().filter(|r| r.combination == "mean") {
            let slot = t
                .entry(r.dataset.clone())
                .or_default()
                .entry(r.model.clone())
                .or_default();
            if slot.insert(r.composition, r.report).is_some() {
                return Err(Error::Input(format!(
                    "duplicate mean row for {}/{} composition {}",
                    r.dataset, r.model, r.composition
                ))
                .into());
            }
        }
    }
    if t.is_empty() {
        return Err(Error::Input("no mean rows found in the evaluation CSVs".into()).into());
    }
    Ok(t)
}

fn check_complete(t: &Table) -> CliResult<()> {
    let mut missing = Vec::new();
    for (ds, models) in t {
        let comps: BTreeSet<usize> = models.values().flat_map(|m| m.keys().copied()).collect();
        for (model, cells) in models {
            for c in comps.iter().filter(|c| !cells.contains_key(c)) {
                missing.push(format!("{ds}/{model}/composition {c}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Input(format!(
            "ragged inputs; missing cells: {}",
            missing.join(", ")
        ))
        .into());
    }
    Ok(())
}

fn fmt_p(p: f64) -> String {
    format!("{p:.4e}")
}

pub fn compare(inputs: &[String], out: &Path) -> CliResult<()> {
    let mut manifest = RunManifest::start("compare");
    let paths = expand(inputs)?;
    let table = collect(&paths)?;
    check_complete(&table)?;

    let mut friedman = String::from("dataset,metric,models,blocks,statistic,p_value,method\n");
    let mut wilcoxon =
        String::from("dataset,metric,model_a,model_b,n,statistic,p_value,method,note\n");
    let mut report = String::from("# Model comparison\n\n");
    let _ = writeln!(report, "Inputs: {} evaluation file(s).\n", paths.len());
    let _ = writeln!(report, "| dataset | {} |", METRICS.map(|m| m.0).join(" | "));
    let _ = writeln!(report, "|---|{}", "---|".repeat(METRICS.len()));
    let mut notes = Vec::new();

    for (ds, models) in &table {
        let names: Vec<&String> = models.keys().collect();
        let comps: Vec<usize> = models
            .values()
            .next()
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default();
        let mut cells = Vec::new();
        for (metric, get) in METRICS {
            let rows: Vec<Vec<f64>> = comps
                .iter()
                .map(|c| names.iter().map(|m| get(&models[*m][c])).collect())
                .collect();
            if names.len() >= 3 && comps.len() >= 2 {
                let r = friedman_test(&ScoreMatrix::new(rows.clone())?);
                let _ = writeln!(
                    friedman,
                    "{ds},{metric},{},{},{:.6},{:e},{}",
                    names.len(),
                    comps.len(),
                    r.statistic,
                    r.p_value,
                    r.method.name()
                );
                cells.push(fmt_p(r.p_value));
            } else {
                cells.push("n/a".into());
                if metric == METRICS[0].0 {
                    notes.push(format!(
                        "{ds}: {} model(s) over {} composition(s); Friedman skipped, Wilcoxon only",
                        names.len(),
                        comps.len()
                    ));
                }
            }
            for i in 0..names.len() {
                for j in i + 1..names.len() {
                    let a: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                    let b: Vec<f64> = rows.iter().map(|r| r[j]).collect();
                    let line = match wilcoxon_signed_rank(&a, &b) {
                        Ok(w) => format!(
                            "{},{:.1},{:e},{},",
                            w.n,
                            w.statistic,
                            w.p_value,
                            w.method.name()
                        ),
                        Err(e) => format!(",,,,{}", e.to_string().replace(',', ";")),
                    };
                    let _ = writeln!(wilcoxon, "{ds},{metric},{},{},{line}", names[i], names[j]);
                }
            }
        }
        let _ = writeln!(report, "| {ds} | {} |", cells.join(" | "));
    }
    report.push_str(
        "\nCells are Friedman p-values across compositions (lower metric ranks better).\n",
    );
    for n in &notes {
        let _ = writeln!(report, "\n- {n}");
    }

    create_dir(out)?;
    for (name, body) in [
        (FRIEDMAN_FILE, &friedman),
        (WILCOXON_FILE, &wilcoxon),
        (REPORT_FILE, &report),
    ] {
        let p = out.join(name);
        write(&p, body.as_bytes())?;
        manifest.add(out, &p);
    }
    manifest.finish(out)?;
    print!("{report}");
    Ok(())
}
