//! Versioned JSON snapshots of a training run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::policy::PolicyParams;
use super::ppo::Adam;
use super::train::{CurvePoint, TrainState};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub iteration: usize,
    /// Digest of the configuration the run was started with.
    pub config_digest: String,
    pub hidden: usize,
    pub width: usize,
    pub theta: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_t: u64,
    pub curve: Vec<CurvePoint>,
}

fn widen<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn narrow<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|x| T::lit(*x)).collect()
}

impl Checkpoint {
    pub fn from_state<T: Scalar>(state: &TrainState<T>, config_digest: &str) -> Self {
        Self {
            version: FORMAT_VERSION,
            iteration: state.iteration,
            config_digest: config_digest.to_string(),
            hidden: state.params.hidden(),
            width: state.params.width(),
            theta: widen(&state.params.theta),
            adam_m: widen(&state.adam.m),
            adam_v: widen(&state.adam.v),
            adam_t: state.adam.t,
            curve: state.curve.clone(),
        }
    }

    pub fn params<T: Scalar>(&self) -> Result<PolicyParams<T>> {
        let mut p = PolicyParams::<T>::zeroed(self.hidden, self.width, 0.0);
        if p.len() != self.theta.len() {
            return Err(Error::InvalidInput(format!(
                "checkpoint holds {} parameters, layout needs {}",
                self.theta.len(),
                p.len()
            )));
        }
        p.theta = narrow(&self.theta);
        if !p.is_finite() {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(p)
    }

    pub fn into_state<T: Scalar>(&self) -> Result<TrainState<T>> {
        let params = self.params()?;
        if self.adam_m.len() != params.len() || self.adam_v.len() != params.len() {
            return Err(Error::InvalidInput("optimizer state does not match parameters".into()));
        }
        Ok(TrainState {
            params,
            adam: Adam {
                m: narrow(&self.adam_m),
                v: narrow(&self.adam_v),
                t: self.adam_t,
            },
            iteration: self.iteration,
            curve: self.curve.clone(),
        })
    }

    /// Writes to a sibling temp file first so a crash never leaves a torn file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, json).map_err(|e| Error::InvalidInput(format!("{}: {e}", tmp.display())))?;
        fs::rename(&tmp, path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
        if ck.version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }
}
