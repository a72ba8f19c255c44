//! Domain types shared by the analytical pipeline and the simulator.
//!
//! The topology is fixed: tasks arriving at the base station are routed to
//! either route 1 (`Q1 -> Q2 -> Q6`) or route 2 (`Q3 -> Q4 -> Q5 -> Q6`).
//! `Q1`, `Q4` and `Q6` are processing queues, `Q2`, `Q3` and `Q5` are
//! transmission queues. `Q1..Q5` have finite buffers; `Q6` is unbounded.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of queues in the chain.
pub const NUM_QUEUES: usize = 6;
/// Number of finite-buffer queues (`Q1..Q5`).
pub const NUM_FINITE: usize = 5;

/// Reason a [`SystemParams`] failed validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("{field} = {value} is outside [0, 1]")]
    Probability { field: &'static str, value: f64 },
    #[error("{field} = {value} must lie in (0, 1]")]
    ServiceRate { field: &'static str, value: f64 },
    #[error("{field} = {value} must be at least 1")]
    Buffer { field: &'static str, value: usize },
}

impl ParamError {
    /// Name of the offending field, using config-file key names.
    pub fn field(&self) -> &'static str {
        match self {
            ParamError::Probability { field, .. }
            | ParamError::ServiceRate { field, .. }
            | ParamError::Buffer { field, .. } => field,
        }
    }
}

/// Error reading or writing the text config format.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("serializing config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(#[from] ParamError),
}

const MU_KEYS: [&str; NUM_QUEUES] = ["mu1", "mu2", "mu3", "mu4", "mu5", "mu6"];
const BUFFER_KEYS: [&str; NUM_FINITE] = ["M1", "M2", "M3", "M4", "M5"];

/// Full parameterization of the six-queue chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Per-slot probability that a task reaches the base station.
    pub p: f64,
    /// Probability of routing a task to route 1 (Server 1).
    pub alpha: f64,
    /// Per-slot service completion probabilities `mu1..mu6`.
    pub mu: [f64; NUM_QUEUES],
    /// Buffer capacities `M1..M5`.
    pub buffer: [usize; NUM_FINITE],
}

impl SystemParams {
    /// Uniform parameterization: every finite queue gets service `mu` and
    /// capacity `buffer`; `Q6` gets `mu6`.
    pub fn uniform(p: f64, alpha: f64, mu: f64, mu6: f64, buffer: usize) -> Self {
        SystemParams {
            p,
            alpha,
            mu: [mu, mu, mu, mu, mu, mu6],
            buffer: [buffer; NUM_FINITE],
        }
    }

    /// Check every invariant, returning the parameters unchanged on success.
    /// The first violated field is reported.
    pub fn validate(self) -> Result<Self, ParamError> {
        check_probability("p", self.p)?;
        check_probability("alpha", self.alpha)?;
        for (key, &mu) in MU_KEYS.iter().zip(&self.mu) {
            // NaN fails the range test as well.
            if !(mu > 0.0 && mu <= 1.0) {
                return Err(ParamError::ServiceRate { field: key, value: mu });
            }
        }
        for (key, &m) in BUFFER_KEYS.iter().zip(&self.buffer) {
            if m < 1 {
                return Err(ParamError::Buffer { field: key, value: m });
            }
        }
        Ok(self)
    }

    /// External arrival probability into `Q1`.
    pub fn lambda1(&self) -> f64 {
        self.p * self.alpha
    }

    /// External arrival probability into `Q3`.
    pub fn lambda3(&self) -> f64 {
        self.p * (1.0 - self.alpha)
    }

    pub fn mu_of(&self, q: QueueId) -> f64 {
        self.mu[q.index()]
    }

    /// Capacity of `q`, or `None` for the unbounded `Q6`.
    pub fn buffer_of(&self, q: QueueId) -> Option<usize> {
        self.buffer.get(q.index()).copied()
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    /// Set a single field by its config key. Used for command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let float = || value.trim().parse::<f64>().map_err(|e| format!("{key}: {e}"));
        let int = || value.trim().parse::<usize>().map_err(|e| format!("{key}: {e}"));
        match key {
            "p" => self.p = float()?,
            "alpha" => self.alpha = float()?,
            _ => {
                if let Some(i) = MU_KEYS.iter().position(|k| *k == key) {
                    self.mu[i] = float()?;
                } else if let Some(i) = BUFFER_KEYS.iter().position(|k| *k == key) {
                    self.buffer[i] = int()?;
                } else {
                    return Err(format!("unknown parameter `{key}`"));
                }
            }
        }
        Ok(())
    }

    /// Parse and validate the text config format.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        Ok(SystemParams::from(file).validate()?)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(&ConfigFile::from(*self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// `(key, value)` pairs in config order, values formatted so they parse
    /// back to the identical number.
    pub fn key_values(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![("p", self.p.to_string()), ("alpha", self.alpha.to_string())];
        out.extend(MU_KEYS.iter().zip(&self.mu).map(|(k, v)| (*k, v.to_string())));
        out.extend(BUFFER_KEYS.iter().zip(&self.buffer).map(|(k, v)| (*k, v.to_string())));
        out
    }
}

impl fmt::Display for SystemParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .key_values()
            .into_iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

fn check_probability(field: &'static str, value: f64) -> Result<(), ParamError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ParamError::Probability { field, value })
    }
}

/// On-disk layout of the config file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    p: f64,
    alpha: f64,
    mu1: f64,
    mu2: f64,
    mu3: f64,
    mu4: f64,
    mu5: f64,
    mu6: f64,
    #[serde(rename = "M1")]
    m1: usize,
    #[serde(rename = "M2")]
    m2: usize,
    #[serde(rename = "M3")]
    m3: usize,
    #[serde(rename = "M4")]
    m4: usize,
    #[serde(rename = "M5")]
    m5: usize,
}

impl From<ConfigFile> for SystemParams {
    fn from(c: ConfigFile) -> Self {
        SystemParams {
            p: c.p,
            alpha: c.alpha,
            mu: [c.mu1, c.mu2, c.mu3, c.mu4, c.mu5, c.mu6],
            buffer: [c.m1, c.m2, c.m3, c.m4, c.m5],
        }
    }
}

impl From<SystemParams> for ConfigFile {
    fn from(s: SystemParams) -> Self {
        let [mu1, mu2, mu3, mu4, mu5, mu6] = s.mu;
        let [m1, m2, m3, m4, m5] = s.buffer;
        ConfigFile { p: s.p, alpha: s.alpha, mu1, mu2, mu3, mu4, mu5, mu6, m1, m2, m3, m4, m5 }
    }
}

/// What a queue does with a task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QueueRole {
    Processing,
    Transmission,
}

/// One of the six queues, `Q1..Q6`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QueueId(u8);

impl QueueId {
    pub const Q1: QueueId = QueueId(1);
    pub const Q2: QueueId = QueueId(2);
    pub const Q3: QueueId = QueueId(3);
    pub const Q4: QueueId = QueueId(4);
    pub const Q5: QueueId = QueueId(5);
    pub const Q6: QueueId = QueueId(6);

    pub const ALL: [QueueId; NUM_QUEUES] = [
        QueueId::Q1,
        QueueId::Q2,
        QueueId::Q3,
        QueueId::Q4,
        QueueId::Q5,
        QueueId::Q6,
    ];

    /// Route 1 path, in traversal order.
    pub const ROUTE_1: [QueueId; 3] = [QueueId::Q1, QueueId::Q2, QueueId::Q6];
    /// Route 2 path, in traversal order.
    pub const ROUTE_2: [QueueId; 4] = [QueueId::Q3, QueueId::Q4, QueueId::Q5, QueueId::Q6];

    /// Queue with 1-based number `n`.
    pub fn new(n: u8) -> Option<QueueId> {
        (1..=NUM_QUEUES as u8).contains(&n).then_some(QueueId(n))
    }

    /// 1-based queue number.
    pub fn number(self) -> u8 {
        self.0
    }

    /// 0-based array index.
    pub fn index(self) -> usize {
        usize::from(self.0 - 1)
    }

    pub fn role(self) -> QueueRole {
        match self.0 {
            2 | 3 | 5 => QueueRole::Transmission,
            _ => QueueRole::Processing,
        }
    }

    /// Queue a completed task moves to; `None` when it leaves the system.
    pub fn successor(self) -> Option<QueueId> {
        match self.0 {
            1 => Some(QueueId::Q2),
            2 | 5 => Some(QueueId::Q6),
            3 => Some(QueueId::Q4),
            4 => Some(QueueId::Q5),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        self.0 != 6
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", self.0)
    }
}

/// Per-queue and aggregate performance figures. Drop figures are expected
/// dropped tasks per slot.
///
/// Throughput and delay are derived quantities: throughput is the offered
/// load minus drops and delay is the in-network sojourn time (queues
/// `Q1..Q6` only) obtained from Little's law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SystemMetrics {
    pub drop_per_queue: [f64; NUM_FINITE],
    pub drop_total: f64,
    pub mean_len_finite: [f64; NUM_FINITE],
    /// `None` when `Q6` is unstable.
    pub mean_len_q6: Option<f64>,
    pub mean_total: Option<f64>,
    pub throughput: f64,
    /// `None` when throughput is zero or `Q6` is unstable.
    pub delay: Option<f64>,
}

impl SystemMetrics {
    /// Mean length of queue `q`.
    pub fn mean_len(&self, q: QueueId) -> Option<f64> {
        if q.is_finite() {
            Some(self.mean_len_finite[q.index()])
        } else {
            self.mean_len_q6
        }
    }

    /// Drop rate of `q`; always zero for `Q6`.
    pub fn drop_rate(&self, q: QueueId) -> f64 {
        self.drop_per_queue.get(q.index()).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn baseline() -> SystemParams {
        SystemParams {
            p: 0.8,
            alpha: 0.5,
            mu: [0.5, 0.5, 0.5, 0.5, 0.5, 0.9],
            buffer: [10; 5],
        }
    }

    #[test]
    fn accepts_reference_configuration() {
        let params = baseline();
        assert_eq!(params.validate(), Ok(params));
    }

    #[test]
    fn rejects_p_above_one() {
        let err = baseline().with_p(1.2).validate().unwrap_err();
        assert_eq!(err.field(), "p");
    }

    #[test]
    fn rejects_empty_buffer() {
        let mut params = baseline();
        params.buffer[1] = 0;
        assert_eq!(params.validate().unwrap_err().field(), "M2");
    }

    #[test]
    fn rejects_zero_service_and_nan() {
        let mut params = baseline();
        params.mu[3] = 0.0;
        assert_eq!(params.validate().unwrap_err().field(), "mu4");
        params.mu[3] = 0.5;
        params.alpha = f64::NAN;
        assert_eq!(params.validate().unwrap_err().field(), "alpha");
    }

    #[test]
    fn boundary_probabilities_are_valid() {
        assert!(baseline().with_alpha(0.0).with_p(1.0).validate().is_ok());
        assert!(baseline().with_alpha(1.0).with_p(0.0).validate().is_ok());
    }

    #[test]
    fn reports_first_violation() {
        let mut params = baseline().with_p(-0.1);
        params.buffer[4] = 0;
        assert_eq!(params.validate().unwrap_err().field(), "p");
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let mut text = baseline().to_toml_string().unwrap();
        text.push_str("mu7 = 0.5\n");
        assert!(matches!(SystemParams::from_toml_str(&text), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn config_rejects_missing_keys() {
        let text = "p = 0.8\nalpha = 0.5\n";
        assert!(SystemParams::from_toml_str(text).is_err());
    }

    #[test]
    fn config_reports_invalid_field() {
        let text = baseline().to_toml_string().unwrap().replace("p = 0.8", "p = 1.5");
        match SystemParams::from_toml_str(&text) {
            Err(ConfigError::Invalid(e)) => assert_eq!(e.field(), "p"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overrides_by_key() {
        let mut params = baseline();
        params.set("alpha", "1.0").unwrap();
        params.set("M3", "42").unwrap();
        params.set("mu6", "0.95").unwrap();
        assert_eq!(params.alpha, 1.0);
        assert_eq!(params.buffer[2], 42);
        assert_eq!(params.mu[5], 0.95);
        assert!(params.set("lambda", "0.1").is_err());
        assert!(params.set("M1", "x").is_err());
    }

    #[test]
    fn topology() {
        assert_eq!(QueueId::Q1.role(), QueueRole::Processing);
        assert_eq!(QueueId::Q3.role(), QueueRole::Transmission);
        assert_eq!(QueueId::Q6.role(), QueueRole::Processing);
        for route in [&QueueId::ROUTE_1[..], &QueueId::ROUTE_2[..]] {
            for pair in route.windows(2) {
                assert_eq!(pair[0].successor(), Some(pair[1]));
            }
            assert_eq!(route.last().unwrap().successor(), None);
        }
        assert_eq!(QueueId::new(7), None);
        assert_eq!(QueueId::new(4).unwrap().index(), 3);
    }
}
