use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use oneshot_core::json::SCHEMA;
use oneshot_core::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug)]
pub enum CliError {
    Core(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::CapExceeded { .. }) => 3,
            CliError::Core(Error::Solver(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Io(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(s) => write!(f, "{s}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

/// Read a UTF-8 input file and hash its bytes.
pub fn read_input(path: &Path) -> Result<(String, InputFile), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let digest = Sha256::digest(&bytes);
    let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Core(Error::Format(format!("{}: not valid UTF-8", path.display()))))?;
    Ok((text, InputFile { path: path.display().to_string(), sha256 }))
}

/// Parse with the file name prefixed to the line/column diagnostic.
pub fn parse_input<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<(T, InputFile), CliError> {
    let (text, input) = read_input(path)?;
    let value = oneshot_core::json::parse(&text).map_err(|e| match e {
        Error::Format(msg) => CliError::Core(Error::Format(format!("{}: {msg}", path.display()))),
        other => CliError::Core(other),
    })?;
    Ok((value, input))
}

#[derive(Serialize)]
pub struct Report<'a, P: Serialize, R: Serialize> {
    pub schema: &'static str,
    pub command: &'a str,
    pub version: &'static str,
    pub inputs: Vec<InputFile>,
    pub parameters: P,
    pub result: R,
}

impl<'a, P: Serialize, R: Serialize> Report<'a, P, R> {
    pub fn new(command: &'a str, inputs: Vec<InputFile>, parameters: P, result: R) -> Self {
        Self { schema: SCHEMA, command, version: env!("CARGO_PKG_VERSION"), inputs, parameters, result }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        serde_json::to_string_pretty(self)
            .map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))
    }
}

/// Write to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// `%.12g`: 12 significant digits, trailing zeros trimmed.
pub fn g12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-15.287_612_345_678_9), "-15.2876123457");
        assert_eq!(g12(0.600_876_000_1), "0.6008760001");
        assert_eq!(g12(1.5e-7), "1.5e-07");
        assert_eq!(g12(123_456_789_012_345.0), "1.23456789012e+14");
        assert_eq!(g12(0.1 + 0.2), "0.3");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Core(Error::Format("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::CapExceeded { dim: 9, cap: 8 }).exit_code(), 3);
        assert_eq!(CliError::Core(Error::Solver("x".into())).exit_code(), 4);
        assert_eq!(CliError::Io("x".into()).exit_code(), 5);
    }
}
