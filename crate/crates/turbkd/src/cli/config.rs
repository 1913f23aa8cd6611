//! Scenario configuration: flat sectioned key=value text, diff-friendly and
//! echoed verbatim into every CSV the runner writes.
//!
//! Sections: channel, channel_assumed, receiver, protocol, security,
//! selection, simulation, study, probe, output. Unset keys keep the
//! documented defaults (the reference receiver at 15 dB mean loss,
//! sigma = 0.9, N = 3e10). `loss_db` and `eta0` are alternative spellings
//! of the mean transmittance: configs accept mean loss in dB and convert as
//! `eta0 = 10^(-dB/10)`.

use crate::channel::ChannelParams;
use crate::detection::{DetectorNoise, ProtocolState, ReceiverModel};
use crate::error::{Error, Result};
use crate::finitekey::SecurityParams;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSection {
    pub loss_db: Option<f64>,
    pub eta0: Option<f64>,
    pub sigma: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            loss_db: Some(15.0),
            eta0: None,
            sigma: 0.9,
        }
    }
}

impl ChannelSection {
    pub fn params(&self) -> Result<ChannelParams> {
        match (self.loss_db, self.eta0) {
            (Some(db), None) => ChannelParams::from_loss_db(db, self.sigma),
            (None, Some(eta0)) => ChannelParams::new(eta0, self.sigma),
            (Some(_), Some(_)) => Err(Error::domain(
                "set either channel loss_db or eta0, not both",
            )),
            (None, None) => Err(Error::domain("channel needs loss_db or eta0")),
        }
    }

    pub fn loss_db_value(&self) -> f64 {
        match (self.loss_db, self.eta0) {
            (Some(db), _) => db,
            (None, Some(eta0)) => -10.0 * eta0.log10(),
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSection {
    pub y0: [f64; 4],
    pub b: [f64; 4],
    pub eta_bob: f64,
    pub eta_d: f64,
    pub e_mis: f64,
    pub bob_x_prob: f64,
}

impl Default for ReceiverSection {
    fn default() -> Self {
        Self {
            y0: [7.6e-6, 3.1e-5, 6.7e-5, 6.7e-5],
            b: [2.6e-4, 1.8e-4, 2.7e-4, 1.8e-4],
            eta_bob: 0.42,
            eta_d: 0.1,
            e_mis: 0.003,
            bob_x_prob: 0.5,
        }
    }
}

impl ReceiverSection {
    pub fn model(&self) -> Result<ReceiverModel> {
        let noise: Result<Vec<DetectorNoise>> = (0..4)
            .map(|i| DetectorNoise::new(self.y0[i], self.b[i]))
            .collect();
        let noise = noise?;
        ReceiverModel::new(
            [noise[0], noise[1], noise[2], noise[3]],
            self.eta_bob,
            self.eta_d,
            self.e_mis,
            self.bob_x_prob,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolMode {
    /// Reference pre-optimized state for the assumed loss (11-19 dB, odd).
    Preset,
    /// Explicit q_x, p_mu1, p_mu2, mu1, mu2 from this section.
    Explicit,
    /// Run the optimizer against the assumed channel.
    Optimize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSection {
    pub mode: ProtocolMode,
    pub q_x: f64,
    pub p_mu1: f64,
    pub p_mu2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// Optimizer starts (mode = optimize).
    pub starts: usize,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        Self {
            mode: ProtocolMode::Preset,
            q_x: 0.844,
            p_mu1: 0.552,
            p_mu2: 0.287,
            mu1: 0.56,
            mu2: 0.23,
            mu3: 0.002,
            starts: 16,
        }
    }
}

impl ProtocolSection {
    pub fn explicit_state(&self) -> Result<ProtocolState> {
        ProtocolState::with_closure(
            self.q_x, self.p_mu1, self.p_mu2, self.mu1, self.mu2, self.mu3,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecuritySection {
    pub eps_sec: f64,
    pub eps_cor: f64,
    pub f_ec: f64,
    pub n_pulses: f64,
}

impl Default for SecuritySection {
    fn default() -> Self {
        Self {
            eps_sec: 1e-10,
            eps_cor: 1e-15,
            f_ec: 1.16,
            n_pulses: 3e10,
        }
    }
}

impl SecuritySection {
    pub fn params(&self) -> Result<SecurityParams> {
        SecurityParams::new(self.eps_sec, self.eps_cor, self.f_ec, self.n_pulses)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// ARTS threshold scan over the grid.
    Scan,
    /// Fixed threshold `eta_th`.
    Fixed,
    /// Prefixed threshold at the asymptotic critical transmittance.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSection {
    pub mode: SelectionMode,
    pub eta_th: f64,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_step: f64,
}

impl Default for SelectionSection {
    fn default() -> Self {
        Self {
            mode: SelectionMode::Scan,
            eta_th: 0.0275,
            grid_start: 0.0,
            grid_stop: 0.10,
            grid_step: 0.0025,
        }
    }
}

impl SelectionSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.grid_step > 0.0 && self.grid_stop >= self.grid_start) {
            return Err(Error::domain(
                "selection grid needs stop >= start and step > 0",
            ));
        }
        let n = ((self.grid_stop - self.grid_start) / self.grid_step).round() as usize;
        Ok((0..=n)
            .map(|i| self.grid_start + i as f64 * self.grid_step)
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSection {
    pub bin_size: u64,
    pub seed: u64,
    pub probe_noise: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            bin_size: 6250,
            seed: 1,
            probe_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySection {
    pub loss_list: Vec<f64>,
    pub n_list: Vec<f64>,
    pub sigma_list: Vec<f64>,
    pub y0_list: Vec<f64>,
    pub eta_d: f64,
    pub target_rate: f64,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            loss_list: vec![13.0, 14.0, 15.0, 16.0, 17.0],
            n_list: vec![3e9, 3e10, 3e11],
            sigma_list: vec![0.5, 0.7, 0.9, 1.1],
            y0_list: vec![1e-4, 1e-6],
            eta_d: 0.1,
            target_rate: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSection {
    pub noise: f64,
    pub points: usize,
    pub degree: usize,
    pub eta_min: f64,
    pub eta_max: f64,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            noise: 0.01,
            points: 50,
            degree: 3,
            eta_min: 0.01,
            eta_max: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputSection {
    pub plot: bool,
    /// Dump the per-bin session log (about 100 bytes per bin on disk).
    pub bins: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            plot: true,
            bins: true,
        }
    }
}

/// The full resolved scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    pub channel: ChannelSection,
    /// The channel the sender assumes when preparing the state; defaults to
    /// the true channel (mis-estimation studies set it differently).
    pub channel_assumed: Option<ChannelSection>,
    pub receiver: ReceiverSection,
    pub protocol: ProtocolSection,
    pub security: SecuritySection,
    pub selection: SelectionSection,
    pub simulation: SimulationSection,
    pub study: StudySection,
    pub probe: ProbeSection,
    pub output: OutputSection,
}

impl ScenarioConfig {
    pub fn channel_true(&self) -> Result<ChannelParams> {
        self.channel.params()
    }

    pub fn channel_assumed(&self) -> Result<ChannelParams> {
        self.channel_assumed.unwrap_or(self.channel).params()
    }

    pub fn assumed_loss_db(&self) -> f64 {
        self.channel_assumed.unwrap_or(self.channel).loss_db_value()
    }

    /// Parse a config file on top of the defaults.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config {
                path: path.to_path_buf(),
                line: idx + 1,
                message,
            };
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?;
                section = name.trim().to_string();
                if config.touch_section(&section).is_err() {
                    return Err(err(format!("unknown section '{section}'")));
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err("expected 'key = value'".into()))?;
            config
                .set(&section, key.trim(), value.trim())
                .map_err(|e| err(e.to_string()))?;
        }
        Ok(config)
    }

    /// Apply one `section.key=value` command-line override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key_path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::domain(format!("override '{spec}' is not key=value")))?;
        let (section, key) = key_path.trim().split_once('.').ok_or_else(|| {
            Error::domain(format!("override key '{key_path}' is not section.key"))
        })?;
        self.set(section.trim(), key.trim(), value.trim())
    }

    fn touch_section(&mut self, section: &str) -> Result<()> {
        match section {
            "channel" | "receiver" | "protocol" | "security" | "selection" | "simulation"
            | "study" | "probe" | "output" => Ok(()),
            "channel_assumed" => {
                if self.channel_assumed.is_none() {
                    self.channel_assumed = Some(self.channel);
                }
                Ok(())
            }
            other => Err(Error::domain(format!("unknown section '{other}'"))),
        }
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let bad_key = || Error::domain(format!("unknown key '{key}' in section [{section}]"));
        let f = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| Error::domain(format!("'{value}' is not a number (key '{key}')")))
        };
        let u = || -> Result<u64> {
            value
                .parse::<u64>()
                .map_err(|_| Error::domain(format!("'{value}' is not an integer (key '{key}')")))
        };
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::domain(format!("'{v}' is not a number in list (key '{key}')"))
                    })
                })
                .collect()
        };
        match section {
            "channel" | "channel_assumed" => {
                let target = if section == "channel" {
                    &mut self.channel
                } else {
                    self.channel_assumed.get_or_insert(self.channel)
                };
                match key {
                    "loss_db" => {
                        target.loss_db = Some(f()?);
                        target.eta0 = None;
                    }
                    "eta0" => {
                        target.eta0 = Some(f()?);
                        target.loss_db = None;
                    }
                    "sigma" => target.sigma = f()?,
                    _ => return Err(bad_key()),
                }
            }
            "receiver" => match key {
                "y0_h" => self.receiver.y0[0] = f()?,
                "y0_v" => self.receiver.y0[1] = f()?,
                "y0_d" => self.receiver.y0[2] = f()?,
                "y0_a" => self.receiver.y0[3] = f()?,
                "b_h" => self.receiver.b[0] = f()?,
                "b_v" => self.receiver.b[1] = f()?,
                "b_d" => self.receiver.b[2] = f()?,
                "b_a" => self.receiver.b[3] = f()?,
                "eta_bob" => self.receiver.eta_bob = f()?,
                "eta_d" => self.receiver.eta_d = f()?,
                "e_mis" => self.receiver.e_mis = f()?,
                "bob_x_prob" => self.receiver.bob_x_prob = f()?,
                _ => return Err(bad_key()),
            },
            "protocol" => match key {
                "mode" => {
                    self.protocol.mode = match value {
                        "preset" => ProtocolMode::Preset,
                        "explicit" => ProtocolMode::Explicit,
                        "optimize" => ProtocolMode::Optimize,
                        _ => {
                            return Err(Error::domain(format!(
                                "protocol mode '{value}' is not preset|explicit|optimize"
                            )))
                        }
                    }
                }
                "q_x" => self.protocol.q_x = f()?,
                "p_mu1" => self.protocol.p_mu1 = f()?,
                "p_mu2" => self.protocol.p_mu2 = f()?,
                "mu1" => self.protocol.mu1 = f()?,
                "mu2" => self.protocol.mu2 = f()?,
                "mu3" => self.protocol.mu3 = f()?,
                "starts" => self.protocol.starts = u()? as usize,
                _ => return Err(bad_key()),
            },
            "security" => match key {
                "eps_sec" => self.security.eps_sec = f()?,
                "eps_cor" => self.security.eps_cor = f()?,
                "f_ec" => self.security.f_ec = f()?,
                "n_pulses" => self.security.n_pulses = f()?,
                _ => return Err(bad_key()),
            },
            "selection" => match key {
                "mode" => {
                    self.selection.mode = match value {
                        "scan" => SelectionMode::Scan,
                        "fixed" => SelectionMode::Fixed,
                        "asymptotic" => SelectionMode::Asymptotic,
                        _ => {
                            return Err(Error::domain(format!(
                                "selection mode '{value}' is not scan|fixed|asymptotic"
                            )))
                        }
                    }
                }
                "eta_th" => self.selection.eta_th = f()?,
                "grid_start" => self.selection.grid_start = f()?,
                "grid_stop" => self.selection.grid_stop = f()?,
                "grid_step" => self.selection.grid_step = f()?,
                _ => return Err(bad_key()),
            },
            "simulation" => match key {
                "bin_size" => self.simulation.bin_size = u()?,
                "seed" => self.simulation.seed = u()?,
                "probe_noise" => self.simulation.probe_noise = f()?,
                _ => return Err(bad_key()),
            },
            "study" => match key {
                "loss_list" => self.study.loss_list = list()?,
                "n_list" => self.study.n_list = list()?,
                "sigma_list" => self.study.sigma_list = list()?,
                "y0_list" => self.study.y0_list = list()?,
                "eta_d" => self.study.eta_d = f()?,
                "target_rate" => self.study.target_rate = f()?,
                _ => return Err(bad_key()),
            },
            "probe" => match key {
                "noise" => self.probe.noise = f()?,
                "points" => self.probe.points = u()? as usize,
                "degree" => self.probe.degree = u()? as usize,
                "eta_min" => self.probe.eta_min = f()?,
                "eta_max" => self.probe.eta_max = f()?,
                _ => return Err(bad_key()),
            },
            "output" => {
                let parsed = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::domain(format!("'{value}' is not a boolean"))),
                };
                match key {
                    "plot" => self.output.plot = parsed,
                    "bins" => self.output.bins = parsed,
                    _ => return Err(bad_key()),
                }
            }
            "" => {
                return Err(Error::domain(format!(
                    "key '{key}' appears before any section"
                )))
            }
            other => return Err(Error::domain(format!("unknown section '{other}'"))),
        }
        Ok(())
    }
}

fn list_str(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl fmt::Display for ScenarioConfig {
    /// Canonical config text; written into every CSV as the audit trail.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[channel]")?;
        match (self.channel.loss_db, self.channel.eta0) {
            (Some(db), _) => writeln!(f, "loss_db = {db}")?,
            (None, Some(eta0)) => writeln!(f, "eta0 = {eta0}")?,
            _ => {}
        }
        writeln!(f, "sigma = {}", self.channel.sigma)?;
        if let Some(assumed) = &self.channel_assumed {
            writeln!(f, "[channel_assumed]")?;
            match (assumed.loss_db, assumed.eta0) {
                (Some(db), _) => writeln!(f, "loss_db = {db}")?,
                (None, Some(eta0)) => writeln!(f, "eta0 = {eta0}")?,
                _ => {}
            }
            writeln!(f, "sigma = {}", assumed.sigma)?;
        }
        writeln!(f, "[receiver]")?;
        for (label, i) in [("h", 0), ("v", 1), ("d", 2), ("a", 3)] {
            writeln!(f, "y0_{label} = {}", self.receiver.y0[i])?;
        }
        for (label, i) in [("h", 0), ("v", 1), ("d", 2), ("a", 3)] {
            writeln!(f, "b_{label} = {}", self.receiver.b[i])?;
        }
        writeln!(f, "eta_bob = {}", self.receiver.eta_bob)?;
        writeln!(f, "eta_d = {}", self.receiver.eta_d)?;
        writeln!(f, "e_mis = {}", self.receiver.e_mis)?;
        writeln!(f, "bob_x_prob = {}", self.receiver.bob_x_prob)?;
        writeln!(f, "[protocol]")?;
        let mode = match self.protocol.mode {
            ProtocolMode::Preset => "preset",
            ProtocolMode::Explicit => "explicit",
            ProtocolMode::Optimize => "optimize",
        };
        writeln!(f, "mode = {mode}")?;
        writeln!(f, "q_x = {}", self.protocol.q_x)?;
        writeln!(f, "p_mu1 = {}", self.protocol.p_mu1)?;
        writeln!(f, "p_mu2 = {}", self.protocol.p_mu2)?;
        writeln!(f, "mu1 = {}", self.protocol.mu1)?;
        writeln!(f, "mu2 = {}", self.protocol.mu2)?;
        writeln!(f, "mu3 = {}", self.protocol.mu3)?;
        writeln!(f, "starts = {}", self.protocol.starts)?;
        writeln!(f, "[security]")?;
        writeln!(f, "eps_sec = {:e}", self.security.eps_sec)?;
        writeln!(f, "eps_cor = {:e}", self.security.eps_cor)?;
        writeln!(f, "f_ec = {}", self.security.f_ec)?;
        writeln!(f, "n_pulses = {:e}", self.security.n_pulses)?;
        writeln!(f, "[selection]")?;
        let mode = match self.selection.mode {
            SelectionMode::Scan => "scan",
            SelectionMode::Fixed => "fixed",
            SelectionMode::Asymptotic => "asymptotic",
        };
        writeln!(f, "mode = {mode}")?;
        writeln!(f, "eta_th = {}", self.selection.eta_th)?;
        writeln!(f, "grid_start = {}", self.selection.grid_start)?;
        writeln!(f, "grid_stop = {}", self.selection.grid_stop)?;
        writeln!(f, "grid_step = {}", self.selection.grid_step)?;
        writeln!(f, "[simulation]")?;
        writeln!(f, "bin_size = {}", self.simulation.bin_size)?;
        writeln!(f, "seed = {}", self.simulation.seed)?;
        writeln!(f, "probe_noise = {}", self.simulation.probe_noise)?;
        writeln!(f, "[study]")?;
        writeln!(f, "loss_list = {}", list_str(&self.study.loss_list))?;
        writeln!(f, "n_list = {}", list_str(&self.study.n_list))?;
        writeln!(f, "sigma_list = {}", list_str(&self.study.sigma_list))?;
        writeln!(f, "y0_list = {}", list_str(&self.study.y0_list))?;
        writeln!(f, "eta_d = {}", self.study.eta_d)?;
        writeln!(f, "target_rate = {:e}", self.study.target_rate)?;
        writeln!(f, "[probe]")?;
        writeln!(f, "noise = {}", self.probe.noise)?;
        writeln!(f, "points = {}", self.probe.points)?;
        writeln!(f, "degree = {}", self.probe.degree)?;
        writeln!(f, "eta_min = {}", self.probe.eta_min)?;
        writeln!(f, "eta_max = {}", self.probe.eta_max)?;
        writeln!(f, "[output]")?;
        writeln!(f, "plot = {}", self.output.plot)?;
        writeln!(f, "bins = {}", self.output.bins)
    }
}

/// Where artifacts land; kept alongside the config so runners can echo it.
#[derive(Debug, Clone)]
pub struct OutputTarget {
    pub dir: PathBuf,
}
