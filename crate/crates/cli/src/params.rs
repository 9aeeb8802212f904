//! Flat `k=v` parameters from the command line, nested into the object a
//! density spec expects.
//!
//! `g=power alpha=2` and `g.alpha=2` both set `{"g": {"family": "power",
//! "alpha": 2}}`; the conditional family takes `g1.` and `g2.` prefixes.
//! A base without an explicit family is inferred from its keys.

use serde_json::{Map, Value};

const BASES: [&str; 3] = ["g", "g1", "g2"];

pub fn split(raw: &str) -> Result<(String, String), String> {
    match raw.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("parameter {raw:?} is not of the form key=value")),
    }
}

pub fn nest(kind: &str, raw: &[String]) -> Result<Map<String, Value>, String> {
    let mut out: Map<String, Value> = Map::new();
    for item in raw {
        let (key, value) = split(item)?;
        let (base, field) = match key.split_once('.') {
            Some((b, f)) => (b.to_string(), Some(f.to_string())),
            None if BASES.contains(&key.as_str()) => (key.clone(), None),
            None if kind == "conditional-decreasing" => {
                return Err(format!("parameter {key:?} is ambiguous here; use g1.{key} or g2.{key}"))
            }
            None => ("g".to_string(), Some(key.clone())),
        };
        if !BASES.contains(&base.as_str()) {
            return Err(format!("unknown parameter {key:?}"));
        }
        let slot = out.entry(base).or_insert_with(|| Value::Object(Map::new()));
        let obj = slot.as_object_mut().expect("base parameters are objects");
        match field {
            None => obj.insert("family".into(), Value::String(value)),
            Some(f) => {
                let x: f64 = value.parse().map_err(|_| format!("parameter {key:?} needs a number, got {value:?}"))?;
                obj.insert(f, Value::from(x))
            }
        };
    }
    for slot in out.values_mut() {
        let obj = slot.as_object_mut().expect("base parameters are objects");
        if !obj.contains_key("family") {
            let family = if obj.contains_key("lambda") {
                "exponential"
            } else if obj.contains_key("beta") {
                "beta"
            } else {
                "power"
            };
            obj.insert("family".into(), Value::String(family.into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn strings(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn shorthand_and_prefixed_forms() {
        let want = json!({"g": {"family": "power", "alpha": 2.0}});
        assert_eq!(Value::Object(nest("ordered-decreasing", &strings(&["g=power", "alpha=2"])).unwrap()), want);
        assert_eq!(Value::Object(nest("ordered-decreasing", &strings(&["g.alpha=2"])).unwrap()), want);
        let cd = nest("conditional-decreasing", &strings(&["g1.alpha=2", "g2.lambda=1"])).unwrap();
        assert_eq!(Value::Object(cd), json!({"g1": {"family": "power", "alpha": 2.0}, "g2": {"family": "exponential", "lambda": 1.0}}));
    }

    #[test]
    fn rejects_malformed() {
        assert!(nest("ordered-decreasing", &strings(&["alpha"])).is_err());
        assert!(nest("ordered-decreasing", &strings(&["alpha=two"])).is_err());
        assert!(nest("conditional-decreasing", &strings(&["alpha=2"])).is_err());
        assert!(nest("ordered-decreasing", &strings(&["h.alpha=2"])).is_err());
    }
}
