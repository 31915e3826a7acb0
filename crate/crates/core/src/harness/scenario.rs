//! Scenario files: JSON objects with the keys below. Unknown keys are errors.
//!
//! ```json
//! {
//!   "K": 3, "n_t": 4, "n_r": [4, 4, 4],
//!   "alpha": 1.0, "kappa": 0.0, "theta_t": 0.5236, "theta_r": 0.5236,
//!   "snr_grid_db": [0, 10, 20], "trials": 100, "seed": 7,
//!   "algorithms": ["reconfigurable", "max_sinr"],
//!   "settings": {"max_iterations": 1000, "convergence_tol": 1e-4, "bisection_tol": 1e-6}
//! }
//! ```
//!
//! Only `K`, `n_t` and `n_r` are required.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{AlgorithmSettings, Variant};
use crate::channel::ChannelParams;
use crate::network::NetworkConfig;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

pub fn default_snr_grid_db() -> Vec<f64> {
    (-1..=6).map(|i| 5.0 * i as f64).collect()
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Antennas {
    Shared(usize),
    PerUser(Vec<usize>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawSettings {
    max_iterations: usize,
    convergence_tol: f64,
    bisection_tol: f64,
}

impl Default for RawSettings {
    fn default() -> Self {
        let d = AlgorithmSettings::default();
        Self {
            max_iterations: d.max_iterations,
            convergence_tol: d.convergence_tol,
            bisection_tol: d.bisection_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(rename = "K")]
    users: usize,
    n_t: Antennas,
    n_r: Antennas,
    alpha: Option<f64>,
    kappa: Option<f64>,
    theta_t: Option<f64>,
    theta_r: Option<f64>,
    snr_grid_db: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    algorithms: Option<Vec<Variant>>,
    #[serde(default)]
    settings: RawSettings,
}

/// A validated experiment description with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSpec {
    #[serde(rename = "K")]
    pub users: usize,
    pub n_t: Vec<usize>,
    pub n_r: Vec<usize>,
    pub alpha: f64,
    pub kappa: f64,
    pub theta_t: f64,
    pub theta_r: f64,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Variant>,
    /// Shared iteration settings; the variant field is set per algorithm.
    pub settings: AlgorithmSettings,
}

impl ScenarioSpec {
    /// Symmetric network with every default applied.
    pub fn symmetric(users: usize, n_t: usize, n_r: usize) -> Self {
        let angle = std::f64::consts::FRAC_PI_6;
        Self {
            users,
            n_t: vec![n_t; users],
            n_r: vec![n_r; users],
            alpha: 1.0,
            kappa: 0.0,
            theta_t: angle,
            theta_r: angle,
            snr_grid_db: default_snr_grid_db(),
            trials: DEFAULT_TRIALS,
            seed: DEFAULT_SEED,
            algorithms: Variant::ALL.to_vec(),
            settings: AlgorithmSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.users == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        for (field, list) in [("n_t", &self.n_t), ("n_r", &self.n_r)] {
            if list.len() != self.users {
                return Err(invalid(field, format!("expected {} entries, got {}", self.users, list.len())));
            }
            if list.contains(&0) {
                return Err(invalid(field, "antenna counts must be at least 1"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(invalid("kappa", format!("{} must be finite and nonnegative", self.kappa)));
        }
        for (field, v) in [("theta_t", self.theta_t), ("theta_r", self.theta_r)] {
            if !v.is_finite() {
                return Err(invalid(field, "must be finite"));
            }
        }
        if self.snr_grid_db.is_empty() {
            return Err(invalid("snr_grid_db", "must not be empty"));
        }
        if self.snr_grid_db.iter().any(|v| !v.is_finite()) {
            return Err(invalid("snr_grid_db", "entries must be finite"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("snr_grid_db", "must be strictly increasing"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(invalid("algorithms", "must name at least one algorithm"));
        }
        for (i, v) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(v) {
                return Err(invalid("algorithms", format!("`{v}` listed twice")));
            }
        }
        self.settings
            .validate()
            .map_err(|e| invalid("settings", e.to_string()))?;
        Ok(())
    }

    /// Network at the given SNR: `P = 10^(snr/10)` with unit noise.
    pub fn network_at(&self, snr_db: f64) -> Result<NetworkConfig<f64>, ScenarioError> {
        NetworkConfig::new(self.n_t.clone(), self.n_r.clone(), 10f64.powf(snr_db / 10.0))
            .map_err(|e| invalid("snr_grid_db", e.to_string()))
    }

    pub fn channel_params(&self) -> Result<ChannelParams<f64>, ScenarioError> {
        ChannelParams::new(self.alpha, self.kappa, self.theta_t, self.theta_r)
            .map_err(|e| invalid("alpha", e.to_string()))
    }

    /// Index of `snr_db` in the grid, if present.
    pub fn snr_index(&self, snr_db: f64) -> Option<usize> {
        self.snr_grid_db.iter().position(|&s| (s - snr_db).abs() < 1e-9)
    }
}

fn expand(field: &'static str, antennas: Antennas, users: usize) -> Result<Vec<usize>, ScenarioError> {
    match antennas {
        Antennas::Shared(n) => Ok(vec![n; users]),
        Antennas::PerUser(list) if list.len() == users => Ok(list),
        Antennas::PerUser(list) => Err(invalid(
            field,
            format!("expected {users} entries, got {}", list.len()),
        )),
    }
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut spec = ScenarioSpec::symmetric(raw.users, 1, 1);
    spec.n_t = expand("n_t", raw.n_t, raw.users)?;
    spec.n_r = expand("n_r", raw.n_r, raw.users)?;
    spec.alpha = raw.alpha.unwrap_or(spec.alpha);
    spec.kappa = raw.kappa.unwrap_or(spec.kappa);
    spec.theta_t = raw.theta_t.unwrap_or(spec.theta_t);
    spec.theta_r = raw.theta_r.unwrap_or(spec.theta_r);
    spec.snr_grid_db = raw.snr_grid_db.unwrap_or(spec.snr_grid_db);
    spec.trials = raw.trials.unwrap_or(spec.trials);
    spec.seed = raw.seed.unwrap_or(spec.seed);
    spec.algorithms = raw.algorithms.unwrap_or(spec.algorithms);
    spec.settings = AlgorithmSettings {
        max_iterations: raw.settings.max_iterations,
        convergence_tol: raw.settings.convergence_tol,
        bisection_tol: raw.settings.bisection_tol,
        ..spec.settings
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioSpec, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scenario_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: ScenarioError) -> &'static str {
        match err {
            ScenarioError::Invalid { field, .. } => field,
            other => panic!("expected a field error, got {other}"),
        }
    }

    #[test]
    fn minimal_file_gets_defaults() {
        let spec = parse_scenario_str(r#"{"K": 3, "n_t": 4, "n_r": 4}"#).unwrap();
        assert_eq!(spec.users, 3);
        assert_eq!(spec.n_t, vec![4, 4, 4]);
        assert_eq!(spec.alpha, 1.0);
        assert_eq!(spec.kappa, 0.0);
        assert_eq!(spec.trials, 100);
        assert_eq!(spec.settings.convergence_tol, 1e-4);
        assert_eq!(spec.settings.max_iterations, 1000);
        assert_eq!(spec.settings.bisection_tol, 1e-6);
        assert_eq!(spec.snr_grid_db, vec![-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        assert_eq!(spec.algorithms, Variant::ALL.to_vec());
        assert!((spec.theta_t - std::f64::consts::PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn full_file_round_trips() {
        let text = r#"{
            "K": 2, "n_t": [2, 3], "n_r": [4, 1], "alpha": 0.01, "kappa": 10,
            "theta_t": 0.1, "theta_r": 0.2, "snr_grid_db": [20, 25, 30], "trials": 7,
            "seed": 18446744073709551615, "algorithms": ["myopic", "max_sinr_genie"],
            "settings": {"max_iterations": 50}
        }"#;
        let spec = parse_scenario_str(text).unwrap();
        assert_eq!(spec.n_t, vec![2, 3]);
        assert_eq!(spec.n_r, vec![4, 1]);
        assert_eq!(spec.seed, u64::MAX);
        assert_eq!(spec.algorithms, vec![Variant::Myopic, Variant::MaxSinrGenie]);
        assert_eq!(spec.settings.max_iterations, 50);
        assert_eq!(spec.settings.convergence_tol, 1e-4);
    }

    #[test]
    fn trials_zero_names_field() {
        let err = parse_scenario_str(r#"{"K": 3, "n_t": 4, "n_r": 4, "trials": 0}"#).unwrap_err();
        assert_eq!(field_of(err), "trials");
    }

    #[test]
    fn grid_out_of_order() {
        let err = parse_scenario_str(r#"{"K": 1, "n_t": 1, "n_r": 1, "snr_grid_db": [10, 0]}"#).unwrap_err();
        assert_eq!(field_of(err), "snr_grid_db");
        let err = parse_scenario_str(r#"{"K": 1, "n_t": 1, "n_r": 1, "snr_grid_db": [0, 0]}"#).unwrap_err();
        assert_eq!(field_of(err), "snr_grid_db");
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = parse_scenario_str("{\"K\": 1,\n \"n_t\": 1, \"n_r\": 1,\n \"snr\": 3}").unwrap_err();
        match err {
            ScenarioError::Parse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("snr"), "{message}");
            }
            other => panic!("{other}"),
        }
        let err = parse_scenario_str(r#"{"K": 1, "n_t": 1, "n_r": 1, "settings": {"variant": "myopic"}}"#);
        assert!(matches!(err, Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn other_invariants() {
        let cases = [
            (r#"{"K": 0, "n_t": 1, "n_r": 1}"#, "K"),
            (r#"{"K": 2, "n_t": [1], "n_r": 1}"#, "n_t"),
            (r#"{"K": 1, "n_t": 1, "n_r": 0}"#, "n_r"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "alpha": 2}"#, "alpha"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "kappa": -1}"#, "kappa"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "snr_grid_db": []}"#, "snr_grid_db"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "algorithms": []}"#, "algorithms"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "algorithms": ["myopic", "myopic"]}"#, "algorithms"),
            (r#"{"K": 1, "n_t": 1, "n_r": 1, "settings": {"convergence_tol": 0}}"#, "settings"),
        ];
        for (text, field) in cases {
            assert_eq!(field_of(parse_scenario_str(text).unwrap_err()), field, "{text}");
        }
    }

    #[test]
    fn malformed_and_missing() {
        assert!(matches!(parse_scenario_str("{\"K\": 1,"), Err(ScenarioError::Parse { .. })));
        assert!(matches!(parse_scenario_str(r#"{"K": 1, "n_t": 1}"#), Err(ScenarioError::Parse { .. })));
        assert!(matches!(
            parse_scenario_str(r#"{"K": 1, "n_t": 1, "n_r": 1, "algorithms": ["ia"]}"#),
            Err(ScenarioError::Parse { .. })
        ));
        assert!(matches!(
            parse_scenario(Path::new("/nonexistent/scenario.json")),
            Err(ScenarioError::Io { .. })
        ));
    }

    #[test]
    fn network_power_from_snr() {
        let spec = ScenarioSpec::symmetric(2, 2, 2);
        let config = spec.network_at(20.0).unwrap();
        assert!((config.power - 100.0).abs() < 1e-9);
        assert_eq!(config.noise_var, vec![1.0, 1.0]);
        assert_eq!(spec.snr_index(15.0), Some(4));
        assert_eq!(spec.snr_index(12.0), None);
    }
}
