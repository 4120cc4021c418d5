//! Report serialization: CSV and a field-for-field JSON mirror, both with
//! 12 significant digits, byte-identical across runs of the same config.

use crate::error::Result;
use crate::harness::config::OutputFormat;
use crate::harness::run::RunReport;
use crate::math::{fmt_sig12, round_sig12};

const HEADER: &str = "label,t,mean,stderr,n_paths,epsilon,H,K,seed,target,pass";

/// Serializes a report; the timestamp block appears only when the config's
/// timestamp flag was set.
pub fn emit_report(report: &RunReport, format: OutputFormat) -> Result<Vec<u8>> {
    let h = report.config.h;
    let k = report.config.k;
    let seed = report.config.seed;
    match format {
        OutputFormat::Csv => {
            let mut out = String::new();
            if let Some(ts) = report.generated_at_unix {
                out.push_str(&format!(
                    "# generated_at_unix={ts} wall_ms={}\n",
                    report.wall_ms
                ));
            }
            out.push_str(HEADER);
            out.push('\n');
            for row in &report.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    row.label,
                    fmt_sig12(row.t),
                    fmt_sig12(row.mean),
                    fmt_sig12(row.stderr),
                    row.n_paths,
                    fmt_sig12(row.epsilon),
                    fmt_sig12(h),
                    fmt_sig12(k),
                    seed,
                    row.target.map(fmt_sig12).unwrap_or_default(),
                    row.pass.map(|p| p.to_string()).unwrap_or_default(),
                ));
            }
            Ok(out.into_bytes())
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = report
                .rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "label": row.label,
                        "t": round_sig12(row.t),
                        "mean": round_sig12(row.mean),
                        "stderr": round_sig12(row.stderr),
                        "n_paths": row.n_paths,
                        "epsilon": round_sig12(row.epsilon),
                        "H": round_sig12(h),
                        "K": round_sig12(k),
                        "seed": seed,
                        "target": row.target.map(round_sig12),
                        "pass": row.pass,
                    })
                })
                .collect();
            let mut doc = serde_json::Map::new();
            if let Some(ts) = report.generated_at_unix {
                doc.insert("generated_at_unix".to_string(), ts.into());
                doc.insert("wall_ms".to_string(), (report.wall_ms as u64).into());
            }
            doc.insert("rows".to_string(), serde_json::Value::Array(rows));
            let mut bytes = serde_json::to_vec_pretty(&serde_json::Value::Object(doc))
                .expect("static shape");
            bytes.push(b'\n');
            Ok(bytes)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;
    use crate::harness::run::run_experiment;

    #[test]
    fn header_only_when_no_rows() {
        // hnorm with a zero-level step still emits one row; build an empty
        // report by hand instead
        let cfg = parse_config("experiment = \"qv\"\nsteps = 64\nepsilon_multiple = 4\npaths = 4\n").unwrap();
        let mut rep = run_experiment(&cfg).unwrap();
        rep.rows.clear();
        let bytes = emit_report(&rep, OutputFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), format!("{HEADER}\n"));
    }

    #[test]
    fn csv_and_json_values_match_field_for_field() {
        let cfg = parse_config(
            "experiment = \"qv\"\nsteps = 128\nepsilon_multiple = 8\npaths = 20\nseed = 4\n",
        )
        .unwrap();
        let rep = run_experiment(&cfg).unwrap();
        let csv = String::from_utf8(emit_report(&rep, OutputFormat::Csv).unwrap()).unwrap();
        let json: serde_json::Value =
            serde_json::from_slice(&emit_report(&rep, OutputFormat::Json).unwrap()).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], HEADER);
        let rows = json["rows"].as_array().unwrap();
        assert_eq!(lines.len() - 1, rows.len());
        for (line, jrow) in lines[1..].iter().zip(rows) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[0], jrow["label"].as_str().unwrap());
            for (i, key) in [
                (1usize, "t"),
                (2, "mean"),
                (3, "stderr"),
                (5, "epsilon"),
                (6, "H"),
                (7, "K"),
                (9, "target"),
            ] {
                let jv = &jrow[key];
                if jv.is_null() {
                    assert!(fields[i].is_empty());
                } else {
                    let c: f64 = fields[i].parse().unwrap();
                    assert_eq!(c, jv.as_f64().unwrap(), "field {key}");
                }
            }
            assert_eq!(
                fields[4].parse::<u64>().unwrap(),
                jrow["n_paths"].as_u64().unwrap()
            );
            assert_eq!(
                fields[8].parse::<u64>().unwrap(),
                jrow["seed"].as_u64().unwrap()
            );
            match jrow["pass"].as_bool() {
                Some(b) => assert_eq!(fields[10], b.to_string()),
                None => assert!(fields[10].is_empty()),
            }
        }
    }

    #[test]
    fn one_qv_row_has_qv_target() {
        let cfg = parse_config("experiment = \"qv\"\nsteps = 64\nepsilon_multiple = 4\npaths = 8\n").unwrap();
        let rep = run_experiment(&cfg).unwrap();
        let csv = String::from_utf8(emit_report(&rep, OutputFormat::Csv).unwrap()).unwrap();
        let line = csv.lines().nth(1).unwrap();
        let target: f64 = line.split(',').nth(9).unwrap().parse().unwrap();
        assert!((target - 2f64.powf(1.0 / 3.0)).abs() < 1e-10);
    }
}
