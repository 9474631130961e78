//! Run settings from flat `key=value` files and command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

use super::{Activity, Scenario, Scheme};

/// Every field is optional so that file values and flags can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub types: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub nodes_per_type: Option<u64>,
    pub q: Option<f64>,
    pub counts: Option<Vec<u64>>,
    pub replicates: Option<u32>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub include_overhead: Option<bool>,
    pub schemes: Option<Vec<Scheme>>,
    pub ell: Option<u64>,
    pub m_prime: Option<u32>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

/// Counts as `b=count,...` with 1-based type numbers, or a plain comma list.
pub fn parse_counts(value: &str) -> Result<Vec<u64>> {
    let mut pairs = Vec::new();
    for (i, item) in value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .enumerate()
    {
        match item.split_once('=') {
            Some((b, c)) => {
                let b: usize = parse_value("n", b)?;
                if b == 0 {
                    return Err(Error::config("n", "type numbers start at 1"));
                }
                pairs.push((b - 1, parse_value("n", c)?));
            }
            None => pairs.push((i, parse_value("n", item)?)),
        }
    }
    if pairs.is_empty() {
        return Err(Error::config("n", "no counts given"));
    }
    let len = pairs.iter().map(|&(b, _)| b + 1).max().unwrap_or(0);
    let mut counts = vec![None; len];
    for (b, c) in pairs {
        if counts[b].replace(c).is_some() {
            return Err(Error::config("n", format!("type {} given twice", b + 1)));
        }
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, c)| c.ok_or_else(|| Error::config("n", format!("type {} missing", b + 1))))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::config(
            key,
            format!("expected a boolean, got `{value}`"),
        )),
    }
}

impl Settings {
    /// Parse `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}", lineno + 1), "expected key=value")
            })?;
            s.set(key.trim(), value.trim())?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "T" | "t" | "types" => self.types = Some(parse_value(key, value)?),
            "eps" | "epsilon" => self.epsilon = Some(parse_value(key, value)?),
            "delta" => self.delta = Some(parse_value(key, value)?),
            "D" | "d" => self.nodes_per_type = Some(parse_value(key, value)?),
            "q" => self.q = Some(parse_value(key, value)?),
            "n" => self.counts = Some(parse_counts(value)?),
            "replicates" => self.replicates = Some(parse_value(key, value)?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "out" => self.out = Some(PathBuf::from(value)),
            "include-overhead" | "include_overhead" => {
                self.include_overhead = Some(parse_bool(key, value)?)
            }
            "schemes" | "scheme" => {
                self.schemes = Some(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|s| !s.is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?,
                )
            }
            "ell" => self.ell = Some(parse_value(key, value)?),
            "m-prime" | "m_prime" => self.m_prime = Some(parse_value(key, value)?),
            _ => return Err(Error::config(key, "unknown setting")),
        }
        Ok(())
    }

    /// Fields set in `later` replace those in `self`.
    pub fn merge(self, later: Settings) -> Settings {
        Settings {
            types: later.types.or(self.types),
            epsilon: later.epsilon.or(self.epsilon),
            delta: later.delta.or(self.delta),
            nodes_per_type: later.nodes_per_type.or(self.nodes_per_type),
            q: later.q.or(self.q),
            counts: later.counts.or(self.counts),
            replicates: later.replicates.or(self.replicates),
            seed: later.seed.or(self.seed),
            out: later.out.or(self.out),
            include_overhead: later.include_overhead.or(self.include_overhead),
            schemes: later.schemes.or(self.schemes),
            ell: later.ell.or(self.ell),
            m_prime: later.m_prime.or(self.m_prime),
        }
    }

    /// Scenario described by these settings. Explicit counts win over `D` and `q`.
    pub fn scenario(&self) -> Result<Scenario> {
        let activity = match (&self.counts, self.nodes_per_type, self.q) {
            (Some(c), _, _) => Activity::Fixed(c.clone()),
            (None, Some(d), Some(q)) => Activity::Binomial {
                nodes_per_type: d,
                q,
            },
            _ => return Err(Error::config("n", "give either n or both D and q")),
        };
        let types = match (&activity, self.types) {
            (Activity::Fixed(c), Some(t)) if c.len() != t => {
                return Err(Error::config(
                    "T",
                    format!("T = {t} but {} counts given", c.len()),
                ))
            }
            (Activity::Fixed(c), _) => c.len(),
            (_, Some(t)) => t,
            _ => return Err(Error::config("T", "number of types not given")),
        };
        let mut s = Scenario::new(types, self.epsilon.unwrap_or(0.03), activity);
        if let Some(d) = self.delta {
            s.delta = d;
        }
        s.overrides.ell = self.ell;
        s.overrides.m_prime = self.m_prime;
        s.config()?;
        Ok(s)
    }
}
