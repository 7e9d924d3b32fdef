use crate::error::{Error, Result};
use crate::series::Variable;

/// Held-out MSE per model (rows) and variable (columns). A failed run keeps
/// its error message.
#[derive(Debug, Clone, PartialEq)]
pub struct BacktestTable {
    pub variables: Vec<Variable>,
    pub models: Vec<String>,
    pub cells: Vec<Vec<std::result::Result<f64, String>>>,
}

fn cell_text(c: &std::result::Result<f64, String>) -> String {
    match c {
        Ok(v) => v.to_string(),
        Err(reason) => format!("FAIL({})", reason.replace(['\n', '\r'], " ")),
    }
}

impl BacktestTable {
    pub fn get(&self, model: &str, variable: Variable) -> Option<&std::result::Result<f64, String>> {
        let r = self.models.iter().position(|m| m == model)?;
        let c = self.variables.iter().position(|v| *v == variable)?;
        self.cells.get(r)?.get(c)
    }

    /// `model,<variable>...` with MSEs in shortest round-trip form.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| Error::Parse(e.to_string());
        let mut header = vec!["model".to_string()];
        header.extend(self.variables.iter().map(|v| v.column_name().to_string()));
        w.write_record(&header).map_err(err)?;
        for (m, row) in self.models.iter().zip(&self.cells) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(cell_text));
            w.write_record(&rec).map_err(err)?;
        }
        w.into_inner().map_err(|e| Error::Parse(e.to_string()))
    }

    /// Column-aligned table with two decimals.
    pub fn to_text(&self) -> String {
        let mut rows: Vec<Vec<String>> = vec![std::iter::once("MSE".to_string())
            .chain(self.variables.iter().map(|v| v.display_name().to_string()))
            .collect()];
        for (m, row) in self.models.iter().zip(&self.cells) {
            let mut r = vec![m.clone()];
            r.extend(row.iter().map(|c| match c {
                Ok(v) => format!("{v:.2}"),
                Err(_) => cell_text(c),
            }));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|k| rows.iter().map(|r| r[k].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(k, (s, w))| if k == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out
    }
}

/// Reads back the CSV written by [`BacktestTable::to_csv`].
pub fn parse_backtest_csv(text: &str) -> Result<BacktestTable> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let err = |e: csv::Error| Error::Parse(e.to_string());
    let header = reader.headers().map_err(err)?.clone();
    if header.get(0) != Some("model") {
        return Err(Error::Parse("backtest table must start with a model column".into()));
    }
    let variables = header
        .iter()
        .skip(1)
        .map(|h| h.parse::<Variable>().map_err(|_| Error::Parse(format!("unknown variable column {h:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let mut table = BacktestTable { variables, models: Vec::new(), cells: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(err)?;
        let mut fields = record.iter();
        table.models.push(fields.next().unwrap_or_default().to_string());
        let row = fields
            .map(|f| {
                if let Some(reason) = f.strip_prefix("FAIL(").and_then(|r| r.strip_suffix(')')) {
                    Ok(Err(reason.to_string()))
                } else {
                    f.parse::<f64>()
                        .map(Ok)
                        .map_err(|_| Error::Parse(format!("bad MSE cell {f:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        table.cells.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BacktestTable {
        BacktestTable {
            variables: vec![Variable::No2, Variable::Pm25, Variable::O3],
            models: vec!["sarima".into(), "lstm".into(), "gbt".into()],
            cells: vec![
                vec![Ok(161.19), Ok(546.49), Ok(719.02)],
                vec![Ok(160.62), Err("diverged, at epoch 3".into()), Ok(0.1 + 0.2)],
                vec![Ok(648.68), Ok(1.0 / 3.0), Ok(1e-20)],
            ],
        }
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let bytes = t.to_csv().unwrap();
        let back = parse_backtest_csv(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(t.cells.iter().flatten().count(), 9);
    }

    #[test]
    fn failures_are_rendered_inline() {
        let text = String::from_utf8(sample().to_csv().unwrap()).unwrap();
        assert!(text.contains("\"FAIL(diverged, at epoch 3)\""));
        let aligned = sample().to_text();
        assert!(aligned.contains("FAIL(diverged, at epoch 3)"));
        assert!(aligned.lines().next().unwrap().starts_with("MSE"));
        assert_eq!(aligned.lines().count(), 4);
    }

    #[test]
    fn lookup() {
        assert_eq!(sample().get("gbt", Variable::No2), Some(&Ok(648.68)));
        assert_eq!(sample().get("arima", Variable::No2), None);
    }
}
