//! Tiny `name(key=value, ...)` call parser shared by the kink and loss
//! config syntaxes.

use crate::error::{Error, Result};

pub(crate) struct Call {
    pub name: String,
    pub args: Vec<(String, f64)>,
}

pub(crate) fn parse_call(text: &str) -> Result<Call> {
    let text = text.trim();
    let Some(open) = text.find('(') else {
        if text.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') && !text.is_empty() {
            return Ok(Call {
                name: text.to_string(),
                args: Vec::new(),
            });
        }
        return Err(Error::Input(format!("malformed spec '{text}'")));
    };
    if !text.ends_with(')') {
        return Err(Error::Input(format!("missing ')' in '{text}'")));
    }
    let name = text[..open].trim().to_string();
    let inner = &text[open + 1..text.len() - 1];
    let mut args = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((k, v)) = part.split_once('=') else {
            return Err(Error::Input(format!(
                "expected key=value argument, got '{part}' in '{text}'"
            )));
        };
        let value: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::Input(format!("bad numeric value '{}' in '{text}'", v.trim())))?;
        args.push((k.trim().to_string(), value));
    }
    Ok(Call { name, args })
}

impl Call {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.args.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    pub fn require(&self, key: &str) -> Result<f64> {
        self.get(key)
            .ok_or_else(|| Error::Input(format!("'{}' requires argument {key}=...", self.name)))
    }
}
