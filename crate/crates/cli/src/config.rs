//! Flat `key = value` run configuration with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Every key a config file or flag may set.
pub const KEYS: &[&str] = &[
    "amplitudes",
    "cap-eps",
    "cap-mesh",
    "coarse-mesh",
    "eps",
    "family",
    "fractions",
    "k",
    "kind",
    "large",
    "level",
    "map",
    "measure",
    "mesh",
    "normalization",
    "out",
    "out-dir",
    "seed",
    "small",
    "tol",
    "ts",
    "vertex",
];

/// Mesh specs that are built in memory rather than read from disk.
const BUILTIN_MESHES: &[&str] = &["icosphere", "icosphere-unit", "torus", "square", "equilateral"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub values: BTreeMap<String, String>,
}

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_flat(text: &str, origin: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{origin}:{}: expected `key = value`, got `{line}`", no + 1)))?;
        let key = k.trim().to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("{origin}:{}: unknown key `{key}` (known: {})", no + 1, KEYS.join(", "))));
        }
        out.insert(key, v.trim().to_string());
    }
    Ok(out)
}

impl RunConfig {
    /// Config file values overridden by flags, then command defaults for anything unset.
    pub fn resolve(
        command: &str,
        file: Option<&Path>,
        flags: BTreeMap<String, String>,
        defaults: &[(&str, &str)],
    ) -> CliResult<Self> {
        let mut values = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_flat(&text, &p.display().to_string())?
            }
            None => BTreeMap::new(),
        };
        values.extend(flags);
        for (k, v) in defaults {
            values.entry(k.to_string()).or_insert_with(|| v.to_string());
        }
        let cfg = RunConfig { command: command.to_string(), values };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        if let Some(tol) = self.get::<f64>("tol")? {
            if !(tol > 0.0) {
                return Err(CliError::Usage(format!("tol = {tol} must be positive")));
            }
        }
        for key in ["mesh", "coarse-mesh", "cap-mesh"] {
            if let Some(spec) = self.values.get(key) {
                let head = spec.split(':').next().unwrap_or("");
                if !BUILTIN_MESHES.contains(&head) && !Path::new(spec).exists() {
                    return Err(CliError::Usage(format!("{key}: mesh file {spec} does not exist")));
                }
            }
        }
        if let Some(spec) = self.values.get("measure") {
            if spec.ends_with(".json") && !Path::new(spec).exists() {
                return Err(CliError::Usage(format!("measure: file {spec} does not exist")));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("{key}: cannot parse `{s}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.get(key)?.ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
    }

    /// Comma-separated list of numbers.
    pub fn list(&self, key: &str) -> CliResult<Option<Vec<f64>>> {
        match self.values.get(key) {
            None => Ok(None),
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{key}: bad number `{x}`"))))
                .collect::<CliResult<Vec<f64>>>()
                .map(Some),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("out-dir").unwrap_or("specgeom-out"))
    }

    /// The config in its own file format, keys sorted; this is what gets hashed.
    pub fn canonical_text(&self) -> String {
        let mut s = format!("# command: {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.canonical_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults_fill_gaps() {
        let dir = std::env::temp_dir().join(format!("specgeom-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("run.cfg");
        std::fs::write(&f, "# sweep\nmesh = icosphere:3\nk = 2\n").unwrap();
        let flags = BTreeMap::from([("k".to_string(), "4".to_string())]);
        let cfg = RunConfig::resolve("eig", Some(&f), flags, &[("measure", "uniform"), ("k", "1")]).unwrap();
        assert_eq!(cfg.raw("mesh"), Some("icosphere:3"));
        assert_eq!(cfg.get::<usize>("k").unwrap(), Some(4));
        assert_eq!(cfg.raw("measure"), Some("uniform"));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unknown_keys_and_bad_tolerances_are_rejected() {
        assert!(parse_flat("mesh = icosphere:2\nbogus = 1\n", "x").is_err());
        assert!(parse_flat("no equals sign\n", "x").is_err());
        let flags = BTreeMap::from([("tol".to_string(), "-1".to_string())]);
        assert!(RunConfig::resolve("eig", None, flags, &[]).is_err());
    }

    #[test]
    fn hash_depends_on_values_only_through_canonical_text() {
        let a = RunConfig { command: "eig".into(), values: BTreeMap::from([("k".into(), "3".into()), ("mesh".into(), "icosphere:2".into())]) };
        let mut b = a.clone();
        assert_eq!(a.sha256(), b.sha256());
        b.values.insert("k".into(), "4".into());
        assert_ne!(a.sha256(), b.sha256());
        assert_eq!(a.sha256().len(), 64);
    }
}
