use std::fs;
use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Renders a table with `write` and stores it as `<name>.csv` and/or
/// `<name>.json` according to the configured formats.
pub fn emit<F>(cfg: &RunConfig, name: &str, write: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> needlets::Result<()>,
{
    let dir = &cfg.output.dir;
    fs::create_dir_all(dir)?;
    let mut buf = Vec::new();
    write(&mut buf)?;
    if cfg.wants(Format::Csv) {
        fs::write(dir.join(format!("{name}.csv")), &buf)?;
    }
    if cfg.wants(Format::Json) {
        let text = String::from_utf8_lossy(&buf);
        let json = serde_json::to_string_pretty(&csv_to_json(&text)).expect("JSON values are finite or null");
        fs::write(dir.join(format!("{name}.json")), json + "\n")?;
    }
    eprintln!("wrote {}", dir.join(name).display());
    Ok(())
}

fn cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    match s.parse::<f64>() {
        Ok(x) => Number::from_f64(x).map_or(Value::Null, Value::Number),
        Err(_) => Value::String(s.to_string()),
    }
}

/// Array of header-keyed objects; numbers stay numbers, NaN becomes null.
pub fn csv_to_json(text: &str) -> Value {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().map(|h| h.split(',').collect()).unwrap_or_default();
    Value::Array(
        lines
            .filter(|l| !l.is_empty())
            .map(|l| {
                let obj: Map<String, Value> =
                    header.iter().zip(l.split(',')).map(|(k, v)| (k.to_string(), cell(v))).collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

/// Prints a CSV file as an aligned table.
pub fn print_table(path: &Path) -> Result<bool, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(false),
        Err(e) => return Err(e.into()),
    };
    let rows: Vec<Vec<String>> = text
        .lines()
        .map(|l| {
            l.split(',')
                .map(|c| match c.parse::<f64>() {
                    Ok(x) if c.contains('e') => format!("{x:.6e}"),
                    _ => c.to_string(),
                })
                .collect()
        })
        .collect();
    let ncol = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> =
        (0..ncol).map(|k| rows.iter().filter_map(|r| r.get(k)).map(String::len).max().unwrap_or(0)).collect();
    println!("== {}", path.display());
    for r in &rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        println!("{}", line.join("  "));
    }
    println!();
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_mirror_keeps_types() {
        let v = csv_to_json("j,route,x\n4,closed_q2,1.5e0\n5,bessel_q3,NaN\n");
        assert_eq!(v[0]["j"], Value::from(4));
        assert_eq!(v[0]["route"], Value::from("closed_q2"));
        assert_eq!(v[0]["x"], Value::from(1.5));
        assert_eq!(v[1]["x"], Value::Null);
    }
}
