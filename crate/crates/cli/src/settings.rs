use std::path::Path;

use rrl_core::laf::{LafKind, NlafParams, NlafPreset};
use rrl_core::model::ModelConfig;
use rrl_core::trainer::{GraftingMode, TrainConfig};

use crate::args::{GraftingChoice, HyperArgs, LafChoice, PresetChoice};
use crate::CliError;

/// Everything needed to build and fit one model.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub bounds_k: usize,
}

fn nlaf(preset: NlafPreset) -> LafKind {
    LafKind::Nlaf(NlafParams::preset(preset))
}

impl Settings {
    /// Library defaults, used for datasets without a tuned entry.
    pub fn generic() -> Self {
        Self {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            bounds_k: 10,
        }
    }

    /// Defaults picked from the search grid (widths, k ∈ {5, 10, 50},
    /// learning rate, λ, preset, initial temperature) per benchmark dataset.
    /// All four are small datasets: 400 epochs with the rate decayed by 0.75
    /// every 100.
    pub fn tuned(dataset: &str) -> Self {
        let mut s = Self::generic();
        s.train.epochs = 400;
        s.train.learning_rate = 2e-3;
        s.train.lr_decay_factor = 0.75;
        s.train.lr_decay_every = 100;
        s.train.l2_lambda = 1e-6;
        s.train.grafting = GraftingMode::Hierarchical;
        s.model.laf = nlaf(NlafPreset::C);
        s.model.initial_temperature = 0.01;
        match dataset {
            "tic-tac-toe" => s.model.widths = vec![16],
            "banknote" | "wine" => {
                s.model.widths = vec![32];
                s.bounds_k = 50;
            }
            "magic04" => s.model.widths = vec![64],
            _ => return Self::generic(),
        }
        s
    }

    /// Tuned defaults for the dataset named by the stem of `data`.
    pub fn for_data_file(data: &Path) -> Self {
        let stem = data.file_stem().and_then(|s| s.to_str()).unwrap_or("");
        Self::tuned(stem)
    }

    /// Applies explicit flags on top of the defaults.
    pub fn apply(mut self, h: &HyperArgs, seed: u64) -> Result<Self, CliError> {
        if let Some(w) = &h.layers {
            self.model.widths = w.0.clone();
        }
        if h.no_skip {
            self.model.skip_connections = false;
        }
        if h.head_skip {
            self.model.head_skip = true;
        }
        let preset = h.nlaf_preset.map(|p| match p {
            PresetChoice::A => NlafPreset::A,
            PresetChoice::B => NlafPreset::B,
            PresetChoice::C => NlafPreset::C,
        });
        match (h.laf, preset) {
            (Some(LafChoice::Orig | LafChoice::Logexp), Some(_)) => {
                return Err(CliError::Usage("--nlaf-preset only applies with --laf nlaf".into()));
            }
            (Some(LafChoice::Orig), None) => self.model.laf = LafKind::Original,
            (Some(LafChoice::Logexp), None) => self.model.laf = LafKind::log_improved(),
            (Some(LafChoice::Nlaf), None) => self.model.laf = LafKind::default(),
            (_, Some(p)) => self.model.laf = nlaf(p),
            (None, None) => {}
        }
        if let Some(g) = h.grafting {
            self.train.grafting = match g {
                GraftingChoice::Single => GraftingMode::Single,
                GraftingChoice::Hier => GraftingMode::Hierarchical,
                GraftingChoice::Ste => GraftingMode::Ste,
            };
        }
        if let Some(k) = h.bounds_k {
            if k == 0 {
                return Err(CliError::Usage("--bounds-k must be at least 1".into()));
            }
            self.bounds_k = k;
        }
        if let Some(v) = h.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = h.batch {
            self.train.batch_size = v;
        }
        if let Some(v) = h.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = h.lr_decay {
            self.train.lr_decay_factor = v;
        }
        if let Some(v) = h.lr_decay_every {
            self.train.lr_decay_every = v;
        }
        if let Some(v) = h.l2 {
            self.train.l2_lambda = v;
        }
        if let Some(v) = h.temp_init {
            self.model.initial_temperature = v;
        }
        self.train.seed = seed;
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        if !(self.model.initial_temperature > 0.0 && self.model.initial_temperature.is_finite()) {
            return Err(CliError::Usage(format!(
                "--temp-init must be positive, got {}",
                self.model.initial_temperature
            )));
        }
        Ok(self)
    }
}
