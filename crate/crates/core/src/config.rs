//! Flat `key = value` experiment configs.
//!
//! Each subcommand owns a fixed key table with defaults. A config file and the
//! command line can only set keys from that table; anything else is rejected.
//! Keys use the flag spelling with `-` replaced by `_` (`k-max` -> `k_max`).

use crate::error::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Real,
    Int,
    UInt,
    Text,
    Choice(&'static [&'static str]),
}

#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn key(name: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Key {
    Key { name, kind, default, help }
}

pub const FORMATS: &[&str] = &["csv", "json"];
pub const VARIANTS: &[&str] = &["lemma42", "w2"];

/// Keys every subcommand accepts.
pub const COMMON: &[Key] = &[
    key("seed", Kind::UInt, "0", "RNG seed"),
    key("output_dir", Kind::Text, "", "output directory (default out/<command>)"),
    key("format", Kind::Choice(FORMATS), "csv", "format of tabular outputs"),
];

#[derive(Debug, Clone, Copy)]
pub struct Schema {
    pub command: &'static str,
    pub about: &'static str,
    pub keys: &'static [Key],
}

pub const SCHEMAS: &[Schema] = &[
    Schema {
        command: "toy",
        about: "Weighted shift model: H_W membership of the U/V eigenvectors",
        keys: &[
            key("w0", Kind::Real, "0.5", "real part of w0"),
            key("w0_im", Kind::Real, "0", "imaginary part of w0"),
            key("w1", Kind::Real, "0.5", "real part of w1"),
            key("w1_im", Kind::Real, "0", "imaginary part of w1"),
            key("r", Kind::Real, "1", "weight exponent, W(j) = exp(-r j)"),
            key("window", Kind::UInt, "50", "half-width of the index window"),
            key("section_n", Kind::UInt, "0", "finite-section size for the eigen report (0 = skip)"),
        ],
    },
    Schema {
        command: "resolution-check",
        about: "Resolution of identity B*B = Id under phase-grid refinement",
        keys: &[
            key("dim", Kind::UInt, "2", "torus dimension n + 1"),
            key("grid", Kind::UInt, "128", "points per axis"),
            key("base", Kind::UInt, "64", "phase-grid base points per axis"),
            key("refinements", Kind::Text, "1,2,4", "comma-separated refinement levels"),
            key("eta_max", Kind::Real, "14", "frequency extent of the phase grid"),
            key("band", Kind::UInt, "4", "test-function band limit"),
            key("delta0", Kind::Real, "0.5", "metric scale delta_0"),
            key("alpha_perp", Kind::Real, "0.5", "transverse exponent"),
            key("alpha_par", Kind::Real, "0", "flow-direction exponent"),
        ],
    },
    Schema {
        command: "quantize-probes",
        about: "Composition, Egorov and micro-locality residual probes",
        keys: &[
            key("grid", Kind::UInt, "128", "points on the circle"),
            key("base", Kind::UInt, "64", "phase-grid base points"),
            key("refine", Kind::UInt, "2", "phase-grid refinement"),
            key("eta_max", Kind::Real, "24", "frequency extent of the phase grid"),
            key("band", Kind::UInt, "8", "test-function band limit"),
            key("weight_r", Kind::Real, "1", "Sobolev weight exponent, W = <omega>^r"),
            key("delta0", Kind::Real, "0.5", "metric scale delta_0"),
            key("alpha_perp", Kind::Real, "0.5", "transverse exponent"),
            key("alpha_par", Kind::Real, "0.5", "flow-direction exponent"),
        ],
    },
    Schema {
        command: "escape-sweep",
        about: "Escape function decay rates, orders and a weight field",
        keys: &[
            key("r_u", Kind::Real, "8", "unstable order R_u"),
            key("r_s", Kind::Real, "8", "stable order R_s"),
            key("gamma", Kind::Real, "0", "gamma"),
            key("gamma_prime", Kind::Real, "0", "gamma', at most gamma"),
            key("h0", Kind::Real, "1", "scale h0 in (0, 1]"),
            key("variant", Kind::Choice(VARIANTS), "lemma42", "escape function"),
            key("t_avg", Kind::Real, "4", "averaging time of the w2 variant"),
            key("w2_r", Kind::Real, "1", "order r of the w2 variant"),
            key("delta0", Kind::Real, "1", "metric scale delta_0"),
            key("alpha_perp", Kind::Real, "0.5", "transverse exponent"),
            key("alpha_par", Kind::Real, "0", "flow-direction exponent"),
            key("t_max", Kind::Real, "8", "time horizon of the decay fit"),
            key("field_size", Kind::UInt, "33", "points per axis of the exported (xi_u, xi_s) field"),
            key("field_extent", Kind::Real, "64", "half-width of the exported field"),
            key("omega", Kind::Real, "0", "omega of the exported field"),
        ],
    },
    Schema {
        command: "suspension",
        about: "Ruelle spectrum of the cat-map suspension with orbit certificates",
        keys: &[
            key("k_max", Kind::UInt, "5", "zero-sector modes |k| <= k_max"),
            key("nu_max", Kind::Int, "20", "largest orbit representative |nu|_inf"),
            key("R", Kind::Real, "8", "escape order R_u = R_s"),
            key("gamma", Kind::Real, "0", "gamma"),
            key("threshold", Kind::Real, "0.049787068367863944", "certificate threshold (e^-3)"),
            key("delta0", Kind::Real, "1", "metric scale delta_0"),
            key("alpha_perp", Kind::Real, "0.5", "transverse exponent"),
            key("alpha_par", Kind::Real, "0", "flow-direction exponent"),
            key("wf_k", Kind::Int, "1", "eigenfunction for the wave-front profile (0 = skip)"),
        ],
    },
    Schema {
        command: "weyl-boxes",
        about: "Box-counting exponent E(alpha) for a synthetic Hölder form",
        keys: &[
            key("beta0", Kind::Real, "0.5", "Hölder exponent of the form"),
            key("n", Kind::UInt, "1", "transverse dimension"),
            key("omega_min", Kind::Real, "64", "smallest omega of the dyadic sweep"),
            key("omega_max", Kind::Real, "16384", "largest omega of the dyadic sweep"),
            key("alpha_grid", Kind::Text, "0.5:0.95:0.025", "alpha sweep lo:hi:step"),
        ],
    },
    Schema {
        command: "verify-all",
        about: "Run the acceptance suite",
        keys: &[key("only", Kind::Text, "", "comma-separated criterion numbers (empty = all)")],
    },
];

pub fn schema(command: &str) -> Result<&'static Schema> {
    SCHEMAS
        .iter()
        .find(|s| s.command == command)
        .ok_or_else(|| Error::Config(format!("unknown command '{command}'")))
}

impl Schema {
    pub fn all_keys(&self) -> impl Iterator<Item = &'static Key> {
        self.keys.iter().chain(COMMON.iter())
    }

    pub fn find(&self, name: &str) -> Option<&'static Key> {
        self.all_keys().find(|k| k.name == name)
    }
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        out.push((normalize(k), v.trim().to_string()));
    }
    Ok(out)
}

fn normalize(key: &str) -> String {
    key.replace('-', "_")
}

fn validate(key: &Key, value: &str) -> Result<()> {
    let bad = |what: &str| Error::Config(format!("key '{}': expected {what}, got '{value}'", key.name));
    match key.kind {
        Kind::Real => {
            let x: f64 = value.parse().map_err(|_| bad("a real number"))?;
            if !x.is_finite() {
                return Err(bad("a finite real number"));
            }
        }
        Kind::Int => {
            value.parse::<i64>().map_err(|_| bad("an integer"))?;
        }
        Kind::UInt => {
            value.parse::<u64>().map_err(|_| bad("a nonnegative integer"))?;
        }
        Kind::Text => {}
        Kind::Choice(opts) => {
            if !opts.contains(&value) {
                return Err(bad(&format!("one of {opts:?}")));
            }
        }
    }
    Ok(())
}

/// A fully resolved config: defaults, then file values, then CLI overrides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn resolve(command: &str, file: Option<&str>, overrides: &[(String, String)]) -> Result<Self> {
        let schema = schema(command)?;
        let mut values: BTreeMap<String, String> =
            schema.all_keys().map(|k| (k.name.to_string(), k.default.to_string())).collect();
        let from_file = match file {
            Some(text) => parse_pairs(text)?,
            None => Vec::new(),
        };
        for (k, v) in from_file.iter().chain(overrides.iter()) {
            let k = normalize(k);
            let spec = schema
                .find(&k)
                .ok_or_else(|| Error::Config(format!("unknown key '{k}' for command '{command}'")))?;
            validate(spec, v)?;
            values.insert(k, v.clone());
        }
        if values["output_dir"].is_empty() {
            values.insert("output_dir".into(), format!("out/{command}"));
        }
        Ok(Self { command: command.to_string(), values })
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.values
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("no key '{key}' for command '{}'", self.command)))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("key '{key}': not a real number: '{v}'")))
    }

    pub fn i64(&self, key: &str) -> Result<i64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("key '{key}': not an integer: '{v}'")))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("key '{key}': not a nonnegative integer: '{v}'")))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key)?;
        v.parse().map_err(|_| Error::Config(format!("key '{key}': not a nonnegative integer: '{v}'")))
    }

    pub fn text(&self, key: &str) -> Result<&str> {
        self.raw(key)
    }

    /// Comma-separated list of `T`, empty string meaning an empty list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Vec<T>> {
        let v = self.raw(key)?;
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::Config(format!("key '{key}': bad list item '{s}'"))))
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn output_dir(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.raw("output_dir")?))
    }

    pub fn json_output(&self) -> bool {
        self.values.get("format").is_some_and(|f| f == "json")
    }

    /// Manifest echoing the resolved config and the library version.
    pub fn manifest_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Manifest<'a> {
            library: &'static str,
            version: &'static str,
            command: &'a str,
            config: &'a BTreeMap<String, String>,
        }
        let m = Manifest {
            library: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config: &self.values,
        };
        Ok(serde_json::to_string_pretty(&m)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_then_file_then_cli() {
        let file = "# suspension run\nk-max = 3\nR=4  # order\n\n";
        let c = ExperimentConfig::resolve("suspension", Some(file), &ov(&[("R", "8")])).unwrap();
        assert_eq!(c.usize("k_max").unwrap(), 3);
        assert_eq!(c.f64("R").unwrap(), 8.0);
        assert_eq!(c.i64("nu_max").unwrap(), 20);
        assert_eq!(c.output_dir().unwrap(), PathBuf::from("out/suspension"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(
            ExperimentConfig::resolve("toy", Some("w2 = 1"), &[]),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::resolve("toy", None, &ov(&[("k_max", "1")])).is_err());
        assert!(ExperimentConfig::resolve("nope", None, &[]).is_err());
    }

    #[test]
    fn values_are_type_checked() {
        assert!(ExperimentConfig::resolve("toy", Some("r = abc"), &[]).is_err());
        assert!(ExperimentConfig::resolve("toy", Some("window = -3"), &[]).is_err());
        assert!(ExperimentConfig::resolve("toy", Some("format = xml"), &[]).is_err());
        assert!(ExperimentConfig::resolve("toy", Some("r = inf"), &[]).is_err());
        assert!(parse_pairs("just a line").is_err());
        assert!(parse_pairs(" = 3").is_err());
    }

    #[test]
    fn manifest_echoes_config() {
        let c = ExperimentConfig::resolve("weyl-boxes", None, &ov(&[("beta0", "0.8")])).unwrap();
        let m: serde_json::Value = serde_json::from_str(&c.manifest_json().unwrap()).unwrap();
        assert_eq!(m["config"]["beta0"], "0.8");
        assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
        assert_eq!(m["command"], "weyl-boxes");
    }

    #[test]
    fn lists() {
        let c = ExperimentConfig::resolve("resolution-check", None, &[]).unwrap();
        assert_eq!(c.list::<usize>("refinements").unwrap(), vec![1, 2, 4]);
        let c = ExperimentConfig::resolve("verify-all", None, &[]).unwrap();
        assert!(c.list::<usize>("only").unwrap().is_empty());
    }
}
