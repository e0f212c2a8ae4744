//! Assembles the 66-entry descriptor bank from simulated trajectories.

use nalgebra::DMatrix;

use crate::catalog::{build_catalog, CatalogEntry, SCENARIOS};
use crate::dynamics::{
    sample_states, simulate_canonical, state_raw_features, Trajectory, TrajectoryState, RAW_FEATURE_LEN,
    STATES_PER_ENTRY,
};
use crate::error::{Error, Result};
use crate::matching::{encode, EncoderParams, ScenarioBank, StateDescriptorMatrix, DEFAULT_DESCRIPTOR_DIM};
use crate::store::{quantize, BankFile};

/// Canonical trajectory of every scenario, indexed by `scenario_id - 1`.
pub fn canonical_trajectories() -> Result<Vec<Trajectory>> {
    SCENARIOS.iter().map(|s| simulate_canonical(s.id)).collect()
}

/// Raw features of the sampled states of one entry, one row per state.
pub fn entry_raw_features(entry: &CatalogEntry, states: &[TrajectoryState]) -> Vec<[f64; RAW_FEATURE_LEN]> {
    let duration = states.last().map_or(0.0, |s| s.t);
    states
        .iter()
        .map(|s| state_raw_features(s, duration, &entry.viewpoint))
        .collect()
}

/// Encoder used when none is supplied: raw features copied into the leading
/// components of a 64-dimensional descriptor.
pub fn default_encoder() -> EncoderParams {
    EncoderParams::identity(RAW_FEATURE_LEN, DEFAULT_DESCRIPTOR_DIM, build_catalog().len())
}

/// Simulates, samples and encodes every catalog entry. Descriptors are
/// rounded to the `f32` precision of the bank payload so the in-memory bank
/// equals what a reader gets back.
pub fn build_bank(encoder: &EncoderParams) -> Result<BankFile> {
    if encoder.raw_dim() != RAW_FEATURE_LEN {
        return Err(Error::Param(format!(
            "bank encoder must take {RAW_FEATURE_LEN} raw features, got {}",
            encoder.raw_dim()
        )));
    }
    encoder.validate()?;
    let trajectories = canonical_trajectories()?;
    let catalog = build_catalog();
    let mut matrices = Vec::with_capacity(catalog.len());
    let mut sampled = Vec::with_capacity(catalog.len());
    for entry in &catalog {
        let traj = &trajectories[entry.scenario_id as usize - 1];
        let states = sample_states(traj, STATES_PER_ENTRY)?;
        let raw = entry_raw_features(entry, &states);
        let d = encoder.descriptor_dim();
        let mut columns = DMatrix::zeros(d, STATES_PER_ENTRY);
        for (i, r) in raw.iter().enumerate() {
            let x = encode(r, encoder)?;
            for (row, v) in x.as_slice().iter().enumerate() {
                columns[(row, i)] = quantize(*v);
            }
        }
        matrices.push(StateDescriptorMatrix {
            entry_id: entry.entry_id,
            columns,
        });
        sampled.push(states);
    }
    Ok(BankFile {
        bank: ScenarioBank::new(catalog, matrices)?,
        raw_dim: RAW_FEATURE_LEN,
        states: sampled,
    })
}
