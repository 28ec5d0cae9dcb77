use serde::{Deserialize, Deserializer, Serialize};

use super::{CruiseError, Result};

/// Model and controller parameters. JSON keys follow the usual symbols
/// (`d_min`, `Ts`, `M`, `Q_diag`, …); `M` is a number or a list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CruiseParams {
    pub d_min: f64,
    pub d_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub w_min: f64,
    pub w_max: f64,
    #[serde(rename = "Ts")]
    pub ts: f64,
    #[serde(rename = "M", deserialize_with = "one_or_many")]
    pub holds: Vec<usize>,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "Q_diag")]
    pub q_diag: Vec<f64>,
    /// Terminal weight; defaults to `Q_diag` when absent.
    #[serde(rename = "P_diag", skip_serializing_if = "Option::is_none")]
    pub p_diag: Option<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: f64,
    pub x0: Vec<f64>,
}

impl Default for CruiseParams {
    fn default() -> Self {
        CruiseParams {
            d_min: 5.0,
            d_max: 100.0,
            v_min: 0.0,
            v_max: 40.0,
            u_min: -4.0,
            u_max: 4.0,
            w_min: -4.0,
            w_max: 4.0,
            ts: 0.1,
            holds: vec![1, 5, 10],
            horizon: 10,
            q_diag: vec![10.0, 0.0, 0.0],
            p_diag: None,
            r: 1.0,
            x0: vec![70.0, 30.0, 25.0],
        }
    }
}

fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(usize),
        Many(Vec<usize>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(m) => vec![m],
        OneOrMany::Many(v) => v,
    })
}

impl CruiseParams {
    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let finite = [
            ("d_min", self.d_min),
            ("d_max", self.d_max),
            ("v_min", self.v_min),
            ("v_max", self.v_max),
            ("u_min", self.u_min),
            ("u_max", self.u_max),
            ("w_min", self.w_min),
            ("w_max", self.w_max),
            ("Ts", self.ts),
            ("R", self.r),
        ];
        for (k, v) in finite {
            if !v.is_finite() {
                bad.push(format!("{k}: not finite"));
            }
        }
        if !(self.d_min < self.d_max) {
            bad.push("d_min/d_max: need d_min < d_max".into());
        }
        if !(self.v_min < self.v_max) {
            bad.push("v_min/v_max: need v_min < v_max".into());
        }
        if !(self.u_min < 0.0 && 0.0 < self.u_max) {
            bad.push("u_min/u_max: need u_min < 0 < u_max".into());
        }
        if !(self.w_min < 0.0 && 0.0 < self.w_max) {
            bad.push("w_min/w_max: need w_min < 0 < w_max".into());
        }
        if !(self.ts >= 0.0) {
            bad.push("Ts: must be nonnegative".into());
        }
        if self.horizon == 0 {
            bad.push("N: must be positive".into());
        }
        if self.holds.is_empty() {
            bad.push("M: at least one hold length".into());
        }
        for &m in &self.holds {
            if m == 0 || (self.horizon > 0 && !self.horizon.is_multiple_of(m)) {
                bad.push(format!("M: {m} does not divide N = {}", self.horizon));
            }
        }
        if self.q_diag.len() != 3 || self.q_diag.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            bad.push("Q_diag: three nonnegative entries".into());
        }
        if let Some(pd) = &self.p_diag {
            if pd.len() != 3 || pd.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                bad.push("P_diag: three nonnegative entries".into());
            }
        }
        if !(self.r > 0.0) {
            bad.push("R: must be positive".into());
        }
        if self.x0.len() != 3 || self.x0.iter().any(|v| !v.is_finite()) {
            bad.push("x0: three finite entries [d, v1, v0]".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CruiseError::InvalidParams(bad.join("; ")))
        }
    }

    pub fn p_diag(&self) -> Vec<f64> {
        self.p_diag.clone().unwrap_or_else(|| self.q_diag.clone())
    }

    /// Steps in one second of simulated time (at least one).
    pub fn steps_per(&self, seconds: f64) -> usize {
        if self.ts <= 0.0 {
            return 1;
        }
        ((seconds / self.ts) - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `uniform_random`, `full_brake_after`, `constant_velocity` or `scripted`.
    pub kind: String,
    pub seed: u64,
    pub brake_after_s: f64,
    pub duration_s: f64,
    /// Accelerations for `scripted`; zero after the list ends.
    pub script: Vec<f64>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kind: "full_brake_after".into(),
            seed: 0,
            brake_after_s: 15.0,
            duration_s: 60.0,
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorConfig {
    pub ladder: Vec<usize>,
    pub trigger_pct: f64,
    pub window_s: f64,
    pub allow_increase: bool,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        SupervisorConfig { ladder: vec![10, 5, 1], trigger_pct: 1.0, window_s: 1.0, allow_increase: false }
    }
}

/// Top-level study configuration file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub params: CruiseParams,
    pub scenario: ScenarioConfig,
    pub supervisor: SupervisorConfig,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<StudyConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: StudyConfig = serde_path_to_error::deserialize(de)
            .map_err(|e| CruiseError::InvalidParams(format!("{}: {}", e.path(), e.inner())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let mut bad = Vec::new();
        if !["uniform_random", "full_brake_after", "constant_velocity", "scripted"].contains(&self.scenario.kind.as_str()) {
            bad.push(format!("scenario.kind: unknown {:?}", self.scenario.kind));
        }
        if !(self.scenario.duration_s >= 0.0) {
            bad.push("scenario.duration_s: must be nonnegative".into());
        }
        if !(self.scenario.brake_after_s >= 0.0) {
            bad.push("scenario.brake_after_s: must be nonnegative".into());
        }
        if self.supervisor.ladder.is_empty() {
            bad.push("supervisor.ladder: must not be empty".into());
        }
        for &m in &self.supervisor.ladder {
            if m == 0 || !self.params.horizon.is_multiple_of(m) {
                bad.push(format!("supervisor.ladder: {m} does not divide N = {}", self.params.horizon));
            }
        }
        if !(self.supervisor.trigger_pct > 0.0) {
            bad.push("supervisor.trigger_pct: must be positive".into());
        }
        if !(self.supervisor.window_s > 0.0) {
            bad.push("supervisor.window_s: must be positive".into());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(CruiseError::InvalidParams(bad.join("; ")))
        }
    }
}
