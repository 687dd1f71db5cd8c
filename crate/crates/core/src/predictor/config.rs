use serde::{Deserialize, Serialize};

use crate::error::{MotionError, Result};
use crate::refiner::AffinityNorm;
use crate::skeleton::RelationRules;

/// Which pathways of the model are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationSpec {
    /// Explicit relation sets; when off every joint only sees itself.
    pub use_explicit: bool,
    /// Affinity refinement; when off the refined field is the raw prediction.
    pub use_implicit: bool,
    /// Displacement input channels; when off only positions are fed.
    pub use_displacement: bool,
}

impl AblationSpec {
    pub const FULL: AblationSpec = AblationSpec {
        use_explicit: true,
        use_implicit: true,
        use_displacement: true,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.use_explicit || self.use_implicit || self.use_displacement) {
            return Err(MotionError::Usage(
                "ablation disables every pathway; keep at least one of explicit, implicit, displacement".into(),
            ));
        }
        Ok(())
    }

    /// Short label such as `E+I+D` or `E+I`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.use_explicit {
            parts.push("E");
        }
        if self.use_implicit {
            parts.push("I");
        }
        if self.use_displacement {
            parts.push("D");
        }
        if parts.is_empty() {
            "none".into()
        } else {
            parts.join("+")
        }
    }
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec::FULL
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Output channels per convolution branch.
    pub channels: usize,
    pub dilations: Vec<usize>,
    pub kernel_size: usize,
    pub hidden: usize,
    /// `N`; windows carry `N + 1` observed frames.
    pub history: usize,
    /// `n` predicted frames.
    pub horizon: usize,
    /// Millimetres per model unit for position inputs.
    pub position_scale: f64,
    /// Millimetres per model unit for displacement inputs and outputs.
    pub displacement_scale: f64,
    pub relations: RelationRules,
    pub ablation: AblationSpec,
    pub affinity_norm: AffinityNorm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            channels: 1,
            dilations: vec![1, 2, 3],
            kernel_size: 3,
            hidden: 128,
            history: 9,
            horizon: 25,
            position_scale: 1000.0,
            displacement_scale: 10.0,
            relations: RelationRules::default(),
            ablation: AblationSpec::FULL,
            affinity_norm: AffinityNorm::Rows,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(MotionError::Config(msg));
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return fail(format!("dilations must be non-empty and >= 1, got {:?}", self.dilations));
        }
        if self.channels == 0 || self.kernel_size == 0 || self.hidden == 0 || self.horizon == 0 {
            return fail("channels, kernel size, hidden size and horizon must be positive".into());
        }
        let span = (self.kernel_size - 1) * self.max_dilation();
        if span >= self.history {
            return fail(format!(
                "(kernel_size-1)*max(dilation) = {span} must be < history N = {}",
                self.history
            ));
        }
        if !(self.position_scale > 0.0 && self.displacement_scale > 0.0) {
            return fail("input scales must be positive".into());
        }
        self.ablation.validate()
    }

    pub fn max_dilation(&self) -> usize {
        self.dilations.iter().copied().max().unwrap_or(1)
    }

    /// Observed frames per window (`N + 1`).
    pub fn observed_frames(&self) -> usize {
        self.history + 1
    }

    /// Per-joint input channels: position, plus displacement unless ablated.
    pub fn input_channels(&self) -> usize {
        if self.ablation.use_displacement {
            6
        } else {
            3
        }
    }

    /// Common feature length after cropping all branches (`N'`).
    pub fn feature_len(&self) -> usize {
        self.history - (self.kernel_size - 1) * self.max_dilation()
    }

    pub fn branch_channels(&self) -> usize {
        self.channels * self.dilations.len()
    }
}
