//! Option values from flags, a `key=value` config file and the environment,
//! with range checks shared by all three sources.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use censcope::{ObservationScheme, TargetDistribution};

/// Every key accepted in a config file; each mirrors a flag.
pub const KEYS: &[&str] = &[
    "model", "scheme", "eps", "n", "seed", "out", "input", "method", "bandwidth", "t0", "k", "points", "table", "scale",
    "threads", "t", "grid",
];

pub const SEED_ENV: &str = "CENSCOPE_SEED";

#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn invalid(key: &str, value: &str, why: &str) -> Invalid {
    Invalid(format!("invalid value '{value}' for `{key}`: {why}"))
}

/// Parsed `key=value` file. Blank lines and `#` comments are skipped.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, Invalid> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Invalid(format!("config line {}: expected key=value, found '{line}'", i + 1)))?;
            let k = k.trim().replace('_', "-");
            if !KEYS.contains(&k.as_str()) {
                return Err(Invalid(format!("config line {}: unknown key `{k}`", i + 1)));
            }
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Invalid(format!("config line {}: duplicate key `{k}`", i + 1)));
            }
        }
        let cfg = ConfigFile { values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Invalid> {
        let text = std::fs::read_to_string(path).map_err(|e| Invalid(format!("cannot read config {}: {e}", path.display())))?;
        ConfigFile::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Range-checks every value, whether or not a subcommand uses it.
    fn validate(&self) -> Result<(), Invalid> {
        for (k, v) in &self.values {
            check(k, v)?;
        }
        Ok(())
    }
}

fn check(key: &str, v: &str) -> Result<(), Invalid> {
    match key {
        "model" => parse_model(key, v).map(drop),
        "scheme" => parse_scheme_name(key, v).map(drop),
        "eps" => parse_eps(key, v).map(drop),
        "n" => parse_usize(key, v, 1, usize::MAX).map(drop),
        "seed" => parse_u64(key, v).map(drop),
        "method" => parse_method(key, v).map(drop),
        "bandwidth" => parse_bandwidth(key, v).map(drop),
        "t0" => parse_t0_list(key, v).map(drop),
        "t" => parse_open_unit(key, v).map(drop),
        "k" => parse_usize(key, v, 2, usize::MAX).map(drop),
        "points" => parse_usize(key, v, 2, 1_000_000).map(drop),
        "table" => parse_usize(key, v, 1, 13).map(drop),
        "scale" => parse_scale(key, v).map(drop),
        "threads" => parse_usize(key, v, 1, 1024).map(drop),
        "grid" => parse_usize(key, v, 100, 5000).map(drop),
        "out" | "input" => {
            if v.is_empty() {
                Err(invalid(key, v, "path must not be empty"))
            } else {
                Ok(())
            }
        }
        other => Err(Invalid(format!("unknown key `{other}`"))),
    }
}

pub fn parse_f64(key: &str, v: &str) -> Result<f64, Invalid> {
    let x: f64 = v.trim().parse().map_err(|_| invalid(key, v, "not a number"))?;
    if !x.is_finite() {
        return Err(invalid(key, v, "must be finite"));
    }
    Ok(x)
}

pub fn parse_usize(key: &str, v: &str, lo: usize, hi: usize) -> Result<usize, Invalid> {
    let x: usize = v.trim().parse().map_err(|_| invalid(key, v, "not a non-negative integer"))?;
    if x < lo || x > hi {
        return Err(invalid(key, v, &format!("must lie in [{lo}, {hi}]")));
    }
    Ok(x)
}

pub fn parse_u64(key: &str, v: &str) -> Result<u64, Invalid> {
    v.trim().parse().map_err(|_| invalid(key, v, "not an unsigned 64-bit integer"))
}

pub fn parse_model(key: &str, v: &str) -> Result<TargetDistribution, Invalid> {
    v.trim().parse().map_err(|_| invalid(key, v, "expected uniform or pow<k> with k >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeName {
    NonSeparated,
    Separated,
}

pub fn parse_scheme_name(key: &str, v: &str) -> Result<SchemeName, Invalid> {
    match v.trim() {
        "nonsep" => Ok(SchemeName::NonSeparated),
        "sep" => Ok(SchemeName::Separated),
        _ => Err(invalid(key, v, "expected nonsep or sep")),
    }
}

pub fn parse_eps(key: &str, v: &str) -> Result<f64, Invalid> {
    let x = parse_f64(key, v)?;
    ObservationScheme::separated(x).map_err(|_| invalid(key, v, "must lie in (0, 1/2)"))?;
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Mle,
    Birge,
    Smle,
}

pub fn parse_method(key: &str, v: &str) -> Result<Method, Invalid> {
    match v.trim() {
        "mle" => Ok(Method::Mle),
        "birge" => Ok(Method::Birge),
        "smle" => Ok(Method::Smle),
        _ => Err(invalid(key, v, "expected mle, birge or smle")),
    }
}

pub fn parse_bandwidth(key: &str, v: &str) -> Result<f64, Invalid> {
    let b = parse_f64(key, v)?;
    if !(b > 0.0 && b < 0.5) {
        return Err(invalid(key, v, "must lie in (0, 1/2)"));
    }
    Ok(b)
}

pub fn parse_open_unit(key: &str, v: &str) -> Result<f64, Invalid> {
    let t = parse_f64(key, v)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid(key, v, "must lie in (0, 1)"));
    }
    Ok(t)
}

pub fn parse_t0_list(key: &str, v: &str) -> Result<Vec<f64>, Invalid> {
    v.split(',').map(|s| parse_open_unit(key, s)).collect()
}

pub fn parse_scale(key: &str, v: &str) -> Result<f64, Invalid> {
    let s = parse_f64(key, v)?;
    if !(s > 0.0 && s <= 10.0) {
        return Err(invalid(key, v, "must lie in (0, 10]"));
    }
    Ok(s)
}

/// Flag value if given, else the config value.
pub struct Resolver<'a> {
    pub config: &'a ConfigFile,
}

impl Resolver<'_> {
    pub fn raw<'b>(&'b self, key: &str, flag: &'b Option<String>) -> Option<&'b str> {
        flag.as_deref().or_else(|| self.config.get(key))
    }

    pub fn get<T>(
        &self,
        key: &str,
        flag: &Option<String>,
        parse: impl Fn(&str, &str) -> Result<T, Invalid>,
    ) -> Result<Option<T>, Invalid> {
        self.raw(key, flag).map(|v| parse(key, v)).transpose()
    }

    pub fn or<T>(
        &self,
        key: &str,
        flag: &Option<String>,
        parse: impl Fn(&str, &str) -> Result<T, Invalid>,
        default: T,
    ) -> Result<T, Invalid> {
        Ok(self.get(key, flag, parse)?.unwrap_or(default))
    }

    /// Flag, then config, then `CENSCOPE_SEED`, then `default`.
    pub fn seed(&self, flag: &Option<String>, default: u64) -> Result<u64, Invalid> {
        if let Some(s) = self.get("seed", flag, parse_u64)? {
            return Ok(s);
        }
        match std::env::var(SEED_ENV) {
            Ok(v) => parse_u64(SEED_ENV, &v),
            Err(_) => Ok(default),
        }
    }

    pub fn scheme(&self, scheme: &Option<String>, eps: &Option<String>) -> Result<ObservationScheme, Invalid> {
        let name = self.or("scheme", scheme, parse_scheme_name, SchemeName::NonSeparated)?;
        let eps = self.or("eps", eps, parse_eps, 0.1)?;
        Ok(match name {
            SchemeName::NonSeparated => ObservationScheme::NonSeparated,
            SchemeName::Separated => ObservationScheme::Separated(eps),
        })
    }
}
