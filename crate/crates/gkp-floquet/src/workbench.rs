//! Shared measurement context: operators, stabilizers and decoder for one
//! Fock space, and the linear observables every metric is built from.

use crate::error::Result;
use crate::fock::{self, FockSpace, StateVector};
use crate::linalg::{self, C64};
use crate::metrics::{Decoder, Generator, LogicalState, SqueezingReport, Stabilizers};
use crate::model::{ModelOperators, ModelParams};

/// Linear observables of a pure state, the ingredients of every metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub dx: C64,
    pub dp: C64,
    /// Undecoded-trace logical block of the normalized state.
    pub logical: [[C64; 2]; 2],
    pub photons: f64,
    pub top: f64,
}

impl Observation {
    pub const ZERO: Observation =
        Observation { dx: linalg::ZERO, dp: linalg::ZERO, logical: [[linalg::ZERO; 2]; 2], photons: 0.0, top: 0.0 };

    pub fn add_scaled(&mut self, other: &Observation, w: f64) {
        self.dx += other.dx * w;
        self.dp += other.dp * w;
        for i in 0..2 {
            for j in 0..2 {
                self.logical[i][j] += other.logical[i][j] * w;
            }
        }
        self.photons += other.photons * w;
        self.top += other.top * w;
    }

    pub fn squeezing(&self) -> Result<SqueezingReport> {
        SqueezingReport::from_expectations(self.dx, self.dp)
    }

    pub fn logical_state(&self) -> Result<LogicalState> {
        LogicalState::from_unnormalized(self.logical)
    }
}

/// Everything needed to propagate and measure in one Fock space.
#[derive(Debug, Clone)]
pub struct Workbench {
    space: FockSpace,
    ops: ModelOperators,
    stabilizers: Stabilizers,
    decoder: Decoder,
}

impl Workbench {
    pub fn new(params: ModelParams, dim: usize) -> Result<Self> {
        let space = FockSpace::new(dim)?;
        let ops = ModelOperators::new(&space, params)?;
        let stabilizers = Stabilizers::new(&space)?;
        let decoder = Decoder::new(dim)?;
        Ok(Self { space, ops, stabilizers, decoder })
    }

    pub fn space(&self) -> &FockSpace {
        &self.space
    }

    pub fn ops(&self) -> &ModelOperators {
        &self.ops
    }

    pub fn params(&self) -> &ModelParams {
        self.ops.params()
    }

    pub fn stabilizers(&self) -> &Stabilizers {
        &self.stabilizers
    }

    pub fn decoder(&self) -> &Decoder {
        &self.decoder
    }

    pub fn observe(&self, psi: &StateVector) -> Observation {
        let n2 = linalg::norm_sqr(psi);
        let raw = self.decoder.decode_unnormalized(psi);
        Observation {
            dx: self.stabilizers.expectation(psi, Generator::XType),
            dp: self.stabilizers.expectation(psi, Generator::PType),
            logical: raw.map(|row| row.map(|v| v / n2)),
            photons: fock::mean_photon_number(psi),
            top: fock::top_population(psi),
        }
    }
}
