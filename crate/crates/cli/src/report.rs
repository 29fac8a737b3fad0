use serde_json::{Map, Value};
use std::io::Write;
use std::path::Path;

/// Ordered key/value report. Text form is one `key = value` line per entry.
#[derive(Debug, Default)]
pub struct Report {
    entries: Map<String, Value>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.entries.insert(key.into(), value.into());
    }

    /// Non-finite floats have no JSON form and are stored as strings.
    pub fn float(&mut self, key: impl Into<String>, v: f64) {
        let value = serde_json::Number::from_f64(v).map_or_else(|| Value::String(format!("{v:?}")), Value::Number);
        self.set(key, value);
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            let mut s = serde_json::to_string_pretty(&self.entries).expect("report serializes");
            s.push('\n');
            return s;
        }
        let mut out = String::new();
        for (k, v) in &self.entries {
            let text = match v {
                Value::Number(n) if n.is_f64() => format!("{:?}", n.as_f64().unwrap_or(f64::NAN)),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {text}\n"));
        }
        out
    }

    pub fn emit(&self, json: bool, path: Option<&Path>) -> std::io::Result<()> {
        let text = self.render(json);
        match path {
            Some(p) => std::fs::write(p, text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())?;
                out.flush()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_keeps_insertion_order() {
        let mut r = Report::new();
        r.set("zeta", "a");
        r.float("alpha", 0.1);
        r.set("count", 3);
        r.set("ok", true);
        assert_eq!(r.render(false), "zeta = a\nalpha = 0.1\ncount = 3\nok = true\n");
    }

    #[test]
    fn json_round_trips() {
        let mut r = Report::new();
        r.float("psnr", 31.25);
        r.float("bad", f64::NAN);
        let v: Value = serde_json::from_str(&r.render(true)).unwrap();
        assert_eq!(v["psnr"], 31.25);
        assert_eq!(v["bad"], "NaN");
    }

    #[test]
    fn whole_floats_print_with_a_point() {
        let mut r = Report::new();
        r.float("x", 2.0);
        assert_eq!(r.render(false), "x = 2.0\n");
    }
}
