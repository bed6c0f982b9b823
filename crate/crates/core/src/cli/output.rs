use serde::Serialize;
use serde_json::Value;

use super::CliError;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// What every output carries about how it was produced.
#[derive(Clone, Debug)]
pub struct Provenance {
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config: Value,
}

impl Provenance {
    pub fn new(command: &'static str, seed: Option<u64>, config: &impl Serialize) -> Result<Self, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Self { command, seed, config })
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn render_json(prov: &Provenance, result: &impl Serialize) -> Result<String, CliError> {
    let result = serde_json::to_value(result).map_err(|e| CliError::Runtime(e.to_string()))?;
    let doc = serde_json::json!({
        "tool": TOOL,
        "version": VERSION,
        "command": prov.command,
        "seed": prov.seed,
        "config": prov.config,
        "result": result,
    });
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// `#` comment lines with provenance and any `extra` key/value notes, then a
/// header row and the records. Comma separated, LF line endings.
pub fn render_csv(
    prov: &Provenance,
    extra: &[(&str, String)],
    header: &[&str],
    records: &[Vec<String>],
) -> Result<String, CliError> {
    let mut text = String::new();
    text.push_str(&format!("# tool: {TOOL} {VERSION}\n"));
    text.push_str(&format!("# command: {}\n", prov.command));
    let seed = prov.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    text.push_str(&format!("# seed: {seed}\n"));
    text.push_str(&format!("# config: {}\n", prov.config));
    for (k, v) in extra {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in records {
        w.write_record(r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
    text.push_str(&String::from_utf8(bytes).map_err(|e| CliError::Runtime(e.to_string()))?);
    Ok(text)
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_are_sorted() {
        let prov = Provenance::new("memory", Some(3), &serde_json::json!({"zeta": 1, "alpha": 2})).unwrap();
        let text = render_json(&prov, &serde_json::json!({"b": 1, "a": 2})).unwrap();
        let keys = ["\"command\"", "\"config\"", "\"result\"", "\"seed\"", "\"tool\"", "\"version\""];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
        assert!(text.ends_with("}\n"));
    }

    #[test]
    fn csv_layout() {
        let prov = Provenance::new("variance", None, &serde_json::json!({"k": 1})).unwrap();
        let text = render_csv(&prov, &[("note", "x".into())], &["a", "b"], &[vec!["1".into(), "2,5".into()]]).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines[0], format!("# tool: {TOOL} {VERSION}"));
        assert_eq!(lines[2], "# seed: none");
        assert_eq!(lines[3], "# config: {\"k\":1}");
        assert_eq!(lines[4], "# note: x");
        assert_eq!(lines[5], "a,b");
        assert_eq!(lines[6], "1,\"2,5\"");
        assert!(!text.contains('\r'));
    }
}
