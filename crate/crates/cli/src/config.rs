//! Plain-text `key=value` scenario files.
//!
//! Lines are `key=value`; `#` starts a comment. Unknown and duplicate keys
//! are rejected with the offending line number. Omitted optional keys take
//! the documented defaults.

use std::collections::HashMap;
use std::fmt;

use cbf_opt::sim::{ControllerKind, LeadKind, ScenarioConfig};

/// Keys accepted in a config file, in emission order.
const KEYS: [&str; 15] = [
    "p0",
    "v0",
    "v_star",
    "gamma",
    "u_max",
    "c1",
    "cA",
    "cB",
    "dt",
    "T_end",
    "lead_kind",
    "delta0",
    "delta_dot0",
    "delta_ddot",
    "controller",
];

/// Keys that must appear explicitly.
const REQUIRED: [&str; 7] = ["p0", "v0", "v_star", "gamma", "u_max", "delta0", "delta_dot0"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

/// Parse a scenario from config text.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let mut values: HashMap<&str, (usize, String)> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(Some(line_no), format!("expected key=value, got '{line}'")))?;
        let key = key.trim();
        let value = value.trim();
        let canonical = KEYS
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| err(Some(line_no), format!("unknown key '{key}'")))?;
        if let Some((first, _)) = values.get(canonical) {
            return Err(err(
                Some(line_no),
                format!("duplicate key '{key}' (first set at line {first})"),
            ));
        }
        values.insert(canonical, (line_no, value.to_string()));
    }

    for key in REQUIRED {
        if !values.contains_key(key) {
            return Err(err(None, format!("missing required key '{key}'")));
        }
    }

    let number = |key: &str, default: f64| -> Result<f64, ConfigError> {
        match values.get(key) {
            None => Ok(default),
            Some((line, text)) => text
                .parse::<f64>()
                .map_err(|_| err(Some(*line), format!("cannot parse {key} value '{text}'"))),
        }
    };
    let required_number = |key: &str| -> Result<f64, ConfigError> {
        let (line, text) = &values[key];
        text.parse::<f64>()
            .map_err(|_| err(Some(*line), format!("cannot parse {key} value '{text}'")))
    };

    let lead_kind = match values.get("lead_kind") {
        None => LeadKind::ConstantSpeed,
        Some((line, text)) => {
            LeadKind::parse(text).map_err(|e| err(Some(*line), e.to_string()))?
        }
    };
    let controller = match values.get("controller") {
        None => ControllerKind::Optimal,
        Some((line, text)) => {
            ControllerKind::parse(text).map_err(|e| err(Some(*line), e.to_string()))?
        }
    };

    let cfg = ScenarioConfig {
        p0: required_number("p0")?,
        v0: required_number("v0")?,
        v_star: required_number("v_star")?,
        gamma: required_number("gamma")?,
        u_max: required_number("u_max")?,
        c1: number("c1", 3.0)?,
        c_a: number("cA", 100.0)?,
        c_b: number("cB", 1.0)?,
        dt: number("dt", 1e-3)?,
        t_end: number("T_end", 30.0)?,
        lead_kind,
        delta0: required_number("delta0")?,
        delta_dot0: required_number("delta_dot0")?,
        delta_ddot: number("delta_ddot", 0.0)?,
        controller,
    };
    cfg.validate().map_err(|e| err(None, e.to_string()))?;
    Ok(cfg)
}

/// Load a scenario from a file path.
pub fn load_config(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(None, format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Emit a config echo that parses back to an identical scenario.
pub fn write_config(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let num = |x: f64| format!("{x:.11e}");
    out.push_str(&format!("p0={}\n", num(cfg.p0)));
    out.push_str(&format!("v0={}\n", num(cfg.v0)));
    out.push_str(&format!("v_star={}\n", num(cfg.v_star)));
    out.push_str(&format!("gamma={}\n", num(cfg.gamma)));
    out.push_str(&format!("u_max={}\n", num(cfg.u_max)));
    out.push_str(&format!("c1={}\n", num(cfg.c1)));
    out.push_str(&format!("cA={}\n", num(cfg.c_a)));
    out.push_str(&format!("cB={}\n", num(cfg.c_b)));
    out.push_str(&format!("dt={}\n", num(cfg.dt)));
    out.push_str(&format!("T_end={}\n", num(cfg.t_end)));
    out.push_str(&format!("lead_kind={}\n", cfg.lead_kind.as_str()));
    out.push_str(&format!("delta0={}\n", num(cfg.delta0)));
    out.push_str(&format!("delta_dot0={}\n", num(cfg.delta_dot0)));
    out.push_str(&format!("delta_ddot={}\n", num(cfg.delta_ddot)));
    out.push_str(&format!("controller={}\n", cfg.controller.as_str()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE: &str = "\
# vehicle-following scenario
p0=0
v0=10
v_star=10
gamma=10
u_max=5
c1=3
cA=100
cB=1
delta0=1
delta_dot0=10
controller=optimal
";

    #[test]
    fn parses_defaults_and_values() {
        let cfg = parse_config(TABLE).unwrap();
        assert_eq!(cfg.u_max, 5.0);
        assert_eq!(cfg.c1, 3.0);
        assert_eq!(cfg.c_a, 100.0);
        assert_eq!(cfg.c_b, 1.0);
        assert_eq!(cfg.gamma, 10.0);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.t_end, 30.0);
        assert_eq!(cfg.lead_kind, LeadKind::ConstantSpeed);
        assert_eq!(cfg.controller, ControllerKind::Optimal);
    }

    #[test]
    fn missing_required_key_is_named() {
        let text = TABLE.replace("u_max=5\n", "");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("u_max"), "{e}");
    }

    #[test]
    fn negative_dt_is_rejected() {
        let text = format!("{TABLE}dt=-1\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("dt"), "{e}");
    }

    #[test]
    fn unknown_key_names_the_line() {
        let text = format!("{TABLE}warp_factor=9\n");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, Some(13));
        assert!(e.message.contains("warp_factor"));
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = format!("{TABLE}p0=5\n");
        let e = parse_config(&text).unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert!(e.message.contains("line 2"));
    }

    #[test]
    fn unparseable_number_is_rejected() {
        let text = TABLE.replace("v0=10", "v0=ten");
        let e = parse_config(&text).unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn round_trip_preserves_the_scenario() {
        let cfg = parse_config(TABLE).unwrap();
        let echoed = parse_config(&write_config(&cfg)).unwrap();
        assert_eq!(cfg, echoed);
    }

    #[test]
    fn round_trips_every_controller_and_lead_kind() {
        for controller in ["optimal", "linear", "none"] {
            let text = TABLE.replace("controller=optimal", &format!("controller={controller}"));
            let cfg = parse_config(&text).unwrap();
            assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg);
        }
        let text = format!(
            "{}lead_kind=worst-case-braking\ndelta_ddot=-2\n",
            TABLE
        );
        let cfg = parse_config(&text).unwrap();
        assert_eq!(parse_config(&write_config(&cfg)).unwrap(), cfg);
    }
}
