//! Render the summary CSVs into a plain Markdown report mirroring the
//! result-table layouts.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

fn fmt_ci(mean: &str, lo: &str, hi: &str) -> String {
    let p = |s: &str| s.parse::<f64>().unwrap_or(f64::NAN);
    format!("{:.4}; 95% CI: [{:.4}, {:.4}]", p(mean), p(lo), p(hi))
}

fn read_rows(path: &Path) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for record in reader.records() {
        out.push(record?.iter().map(str::to_string).collect());
    }
    Ok(out)
}

pub fn render(out_dir: &Path) -> Result<String> {
    let mut md = String::new();
    md.push_str("# Sweep report\n");

    let settings = out_dir.join("summary_settings.csv");
    if settings.exists() {
        md.push_str("\n## Average test AUC per setting value\n\n");
        md.push_str("| Setting | Value | Biopsy-based ROIs | Non-biopsy ROIs |\n");
        md.push_str("|---|---|---|---|\n");
        let rows = read_rows(&settings)?;
        // Rows alternate biopsy/nonbiopsy per (setting, value).
        for pair in rows.chunks(2) {
            if pair.len() != 2 {
                continue;
            }
            let (b, n) = (&pair[0], &pair[1]);
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} |",
                b[0],
                b[1],
                fmt_ci(&b[3], &b[4], &b[5]),
                fmt_ci(&n[3], &n[4], &n[5])
            );
        }
    }

    let top5 = out_dir.join("summary_top5.csv");
    if top5.exists() {
        md.push_str("\n## Five best configurations per ROI kind\n\n");
        md.push_str("| Test ROI | Normalization | Feature Selection | Model | Contrast | AUC |\n");
        md.push_str("|---|---|---|---|---|---|\n");
        for r in read_rows(&top5)? {
            let _ = writeln!(
                md,
                "| {} | {} | {} | {} | {} | {} |",
                r[0],
                r[2],
                r[3],
                r[4],
                r[5],
                fmt_ci(&r[6], &r[7], &r[8])
            );
        }
    }

    let mut model_tables: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for name in ["simple_models.csv", "baseline.csv", "audit.csv"] {
        let path = out_dir.join(name);
        if path.exists() {
            model_tables.push((name.to_string(), read_rows(&path)?));
        }
    }
    if !model_tables.is_empty() {
        md.push_str("\n## Model evaluations on held-out data\n\n");
        md.push_str("| Model | ROI side | Metric | Value |\n");
        md.push_str("|---|---|---|---|\n");
        for (_, rows) in &model_tables {
            for r in rows {
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} |",
                    r[0],
                    r[1],
                    r[2],
                    fmt_ci(&r[3], &r[4], &r[5])
                );
            }
        }
    }

    for name in ["rank_top5_biopsy.csv", "rank_top5_nonbiopsy.csv", "rank_all.csv"] {
        let path = out_dir.join(name);
        if !path.exists() {
            continue;
        }
        let _ = writeln!(md, "\n## Feature ranking: {name}\n");
        md.push_str("| Rank | Feature | Count |\n|---|---|---|\n");
        for r in read_rows(&path)? {
            let _ = writeln!(md, "| {} | {} | {} |", r[0], r[1], r[2]);
        }
    }
    Ok(md)
}
