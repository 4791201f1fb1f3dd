//! Flat `key = value` run configuration. Every key can also be given as a
//! `--key value` flag, which overrides the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Environment variable consulted when `workers` is not set.
pub const WORKERS_ENV: &str = "SPATIALGP_WORKERS";

pub struct KeySpec {
    pub name: &'static str,
    /// Shown in `--help`; `None` means "unset" (the command decides).
    pub default: Option<&'static str>,
    pub doc: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, doc: &'static str) -> KeySpec {
    KeySpec { name, default, doc }
}

pub const KEYS: &[KeySpec] = &[
    key("data", None, "dataset CSV with columns x, y, value"),
    key("sites", None, "prediction-site CSV with columns x, y"),
    key("fit", None, "fit report JSON written by `fit`"),
    key("output", None, "main output path (command-specific default)"),
    key("train_output", Some("train.csv"), "simulate: training rows"),
    key("test_output", Some("test.csv"), "simulate: held-out rows"),
    key("method", Some("vecchia"), "fit likelihood (exact, vecchia, bcl); crossval takes a comma list that may also name local_krige and local_gaussian"),
    key("mean_kind", Some("zero"), "mean structure: zero, constant or linear"),
    key("detrend", Some("false"), "fit: remove an OLS plane in x and y first and fit the residuals"),
    key("m_seq", Some("10,30,60"), "Vecchia neighbor counts, one stage each"),
    key("max_iter", Some("100"), "scoring iterations per stage"),
    key("rel_tol", Some("1e-6"), "relative log-likelihood change that stops a stage"),
    key("grad_tol", Some("1e-4"), "gradient norm that stops a stage"),
    key("n_blocks", None, "composite-likelihood blocks (default n/500)"),
    key("m_pred", Some("200"), "kriging neighbors per prediction site"),
    key("alpha", Some("0.05"), "interval level is 1 - alpha"),
    key("target", Some("response"), "predict the noisy response or the latent field"),
    key("allow_unconverged", Some("false"), "predict from a fit that did not converge"),
    key("delta", None, "local methods: half-width of the square neighborhood (default 4 x fitted range)"),
    key("cap", Some("500"), "local methods: neighborhood size cap"),
    key("n_reps", Some("1000"), "bootstrap replicates (at least 50)"),
    key("subsample_size", Some("10000"), "bootstrap subsample size (capped at n)"),
    key("weight_radius", None, "de-clustering radius (default 5% of the bounding-box diagonal)"),
    key("refit_m_seq", Some("10,30"), "bootstrap refit neighbor counts"),
    key("refit_max_iter", Some("50"), "bootstrap refit iterations per stage"),
    key("folds", Some("3"), "cross-validation folds"),
    key("timing", Some("false"), "crossval: record wall times (outputs then differ between runs)"),
    key("n_bins", Some("20"), "variogram bins"),
    key("max_dist", None, "variogram range (default half the bounding-box diagonal)"),
    key("max_pairs", Some("1000000"), "variogram pair budget before sampling"),
    key("n", Some("1000"), "simulate: number of sites"),
    key("pattern", Some("homogeneous"), "simulate: homogeneous, dense_subregion, nested_density, striped_gaps or circular_clusters"),
    key("sigma_sq", Some("1"), "simulate: partial sill"),
    key("range", Some("0.1"), "simulate: range"),
    key("smoothness", Some("1"), "simulate: smoothness"),
    key("nugget", Some("0.05"), "simulate: nugget"),
    key("beta", None, "simulate: mean coefficients matching mean_kind"),
    key("split", Some("0.9"), "simulate: training fraction"),
    key("seed", Some("0"), "master seed"),
    key("workers", None, "worker threads (default from SPATIALGP_WORKERS, else all cores)"),
];

fn spec(name: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == name)
}

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    File(usize),
    Flag,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, (String, Origin)>,
}

impl RunConfig {
    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config { line: line_no, msg: format!("expected `key = value`, got '{line}'") });
            };
            let k = k.trim();
            let Some(s) = spec(k) else {
                return Err(CliError::Config { line: line_no, msg: format!("unknown key '{k}'") });
            };
            if cfg.values.contains_key(s.name) {
                return Err(CliError::Config { line: line_no, msg: format!("key '{k}' given twice") });
            }
            cfg.values.insert(s.name, (v.trim().to_string(), Origin::File(line_no)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets a value from a command-line flag, replacing any file value.
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let s = spec(name).ok_or_else(|| CliError::Usage(format!("unknown key '{name}'")))?;
        self.values.insert(s.name, (value.trim().to_string(), Origin::Flag));
        Ok(())
    }

    pub fn raw(&self, name: &str) -> Option<&str> {
        debug_assert!(spec(name).is_some(), "undeclared key {name}");
        self.values.get(name).map(|(v, _)| v.as_str()).filter(|v| !v.is_empty())
    }

    fn invalid(&self, name: &str, msg: impl fmt::Display) -> CliError {
        match self.values.get(name) {
            Some((_, Origin::File(line))) => CliError::Config { line: *line, msg: format!("{name}: {msg}") },
            _ => CliError::Usage(format!("{name}: {msg}")),
        }
    }

    /// Value of `name`, falling back to the documented default.
    pub fn get<T: FromStr>(&self, name: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        let text = self.raw(name).or_else(|| spec(name).and_then(|s| s.default));
        text.map(|t| t.parse::<T>().map_err(|e| self.invalid(name, format!("cannot parse '{t}': {e}")))).transpose()
    }

    /// As [`get`](Self::get) for keys with a documented default.
    pub fn value<T: FromStr>(&self, name: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(name)?.ok_or_else(|| CliError::Usage(format!("missing value for '{name}'")))
    }

    pub fn list<T: FromStr>(&self, name: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let text = self.raw(name).or_else(|| spec(name).and_then(|s| s.default)).unwrap_or("");
        text.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<T>().map_err(|e| self.invalid(name, format!("cannot parse '{t}': {e}"))))
            .collect()
    }

    pub fn path(&self, name: &str) -> Result<&Path> {
        self.raw(name).map(Path::new).ok_or_else(|| CliError::Usage(format!("'{name}' is required (flag --{name})")))
    }

    /// Every key with its resolved value, one `key = value` line each, in
    /// key order. Unset keys without a default are omitted.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut names: Vec<&str> = KEYS.iter().map(|k| k.name).collect();
        names.sort_unstable();
        for name in names {
            if let Some(v) = self.raw(name).or_else(|| spec(name).and_then(|s| s.default)) {
                out.push_str(&format!("{name} = {v}\n"));
            }
        }
        out
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    /// `workers`, else the environment variable, else `None` (all cores).
    pub fn workers(&self) -> Result<Option<usize>> {
        let n = match self.get::<usize>("workers")? {
            Some(n) => Some(n),
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) if !v.trim().is_empty() => Some(
                    v.trim().parse().map_err(|e| CliError::Usage(format!("{WORKERS_ENV}: cannot parse '{v}': {e}")))?,
                ),
                _ => None,
            },
        };
        if n == Some(0) {
            return Err(CliError::Usage("workers must be at least 1".into()));
        }
        Ok(n)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
