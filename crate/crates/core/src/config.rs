//! Pipeline configuration: sectioned `key = value` text with strict key
//! checking.
//!
//! ```text
//! [data]       source = synthetic | csv, path, symbol
//! [synth]      n_bars, drift, volatility, regime_shift_period, signal_strength
//! [features]   horizon, vol_window, window, n_noise
//! [selection]  k, n_init, max_iter, tol, mi_threshold, top_m, grid_size,
//!              dynamic_reselect, reselect_window
//! [train]      epochs, batch_size, lr0, lr_halving_period, beta1, beta2,
//!              adam_eps, epsilon, lambda, prune_epochs, kernels
//! [bench]      reps, warmup
//! [run]        seed
//! ```
//!
//! `[run] seed` seeds every stochastic component.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kv::{self, Reader, Writer};
use crate::litenet::{ReselectConfig, TrainConfig};
use crate::market_data::{FeatureSpec, SynthConfig};
use crate::mutual_info::SelectionParams;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic,
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub reps: usize,
    pub warmup: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { reps: 10_000, warmup: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub data: DataSource,
    pub symbol: String,
    pub synth: SynthConfig,
    pub features: FeatureSpec,
    pub selection: SelectionParams,
    pub dynamic_reselect: bool,
    /// Trailing training rows used by each re-selection.
    pub reselect_window: usize,
    pub train: TrainConfig,
    pub bench: BenchConfig,
    seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut cfg = Self {
            data: DataSource::Synthetic,
            symbol: "SYNTH".into(),
            synth: SynthConfig::default(),
            features: FeatureSpec { horizon: 1, vol_window: 20, window: 8, n_noise: 5, noise_seed: 0 },
            selection: SelectionParams::default(),
            dynamic_reselect: false,
            reselect_window: 500,
            train: TrainConfig::default(),
            bench: BenchConfig::default(),
            seed: DEFAULT_SEED,
        };
        cfg.set_seed(DEFAULT_SEED);
        cfg
    }
}

impl PipelineConfig {
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sets the run seed and every component seed derived from it.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.synth.seed = seed;
        self.features.noise_seed = seed.wrapping_add(1);
        self.selection.seed = seed;
        self.train.seed = seed;
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.set_seed(seed);
        self
    }

    pub fn reselect(&self) -> Option<ReselectConfig> {
        self.dynamic_reselect
            .then(|| ReselectConfig { params: self.selection.clone(), recent_rows: self.reselect_window })
    }

    pub fn validate(&self) -> Result<()> {
        if let DataSource::Csv(p) = &self.data {
            if p.as_os_str().is_empty() {
                return Err(Error::config("path", "must name a CSV file"));
            }
        }
        self.synth.validate()?;
        let f = &self.features;
        if f.horizon < 1 {
            return Err(Error::config("horizon", "must be >= 1"));
        }
        if f.vol_window < 2 {
            return Err(Error::config("vol_window", "must be >= 2"));
        }
        if f.window < 1 {
            return Err(Error::config("window", "must be >= 1"));
        }
        let s = &self.selection;
        if s.k < 1 {
            return Err(Error::config("k", "must be >= 1"));
        }
        if s.n_init < 1 {
            return Err(Error::config("n_init", "must be >= 1"));
        }
        if s.max_iter < 1 {
            return Err(Error::config("max_iter", "must be >= 1"));
        }
        if !(s.tol.is_finite() && s.tol >= 0.0) {
            return Err(Error::config("tol", "must be finite and >= 0"));
        }
        if !s.mi_threshold.is_finite() {
            return Err(Error::config("mi_threshold", "must be finite"));
        }
        if s.top_m < 1 {
            return Err(Error::config("top_m", "must be >= 1"));
        }
        if s.grid_size < 2 {
            return Err(Error::config("grid_size", "must be >= 2"));
        }
        if self.reselect_window < 2 {
            return Err(Error::config("reselect_window", "must be >= 2"));
        }
        self.train.validate()?;
        if self.train.max_kernel() > f.window {
            return Err(Error::config("kernels", format!("largest kernel exceeds window {}", f.window)));
        }
        if self.train.max_kernel() > 6 + f.n_noise {
            return Err(Error::config("kernels", "largest kernel exceeds the candidate feature count"));
        }
        if self.bench.reps < 1 {
            return Err(Error::config("reps", "must be >= 1"));
        }
        Ok(())
    }

    /// Canonical text form; `load_config(&cfg.serialize())` reproduces `cfg`.
    pub fn serialize(&self) -> String {
        let mut w = Writer::new();
        w.section("data");
        match &self.data {
            DataSource::Synthetic => w.entry("source", "synthetic"),
            DataSource::Csv(p) => {
                w.entry("source", "csv");
                w.entry("path", p.display());
            }
        }
        w.entry("symbol", &self.symbol);

        let s = &self.synth;
        w.section("synth");
        w.entry("n_bars", s.n_bars);
        w.entry("drift", s.drift);
        w.entry("volatility", s.volatility);
        w.entry("regime_shift_period", s.regime_shift_period);
        w.entry("signal_strength", s.signal_strength);

        let f = &self.features;
        w.section("features");
        w.entry("horizon", f.horizon);
        w.entry("vol_window", f.vol_window);
        w.entry("window", f.window);
        w.entry("n_noise", f.n_noise);

        let p = &self.selection;
        w.section("selection");
        w.entry("k", p.k);
        w.entry("n_init", p.n_init);
        w.entry("max_iter", p.max_iter);
        w.entry("tol", p.tol);
        w.entry("mi_threshold", p.mi_threshold);
        w.entry("top_m", p.top_m);
        w.entry("grid_size", p.grid_size);
        w.entry("dynamic_reselect", self.dynamic_reselect);
        w.entry("reselect_window", self.reselect_window);

        w.section("train");
        write_train(&mut w, &self.train);

        w.section("bench");
        w.entry("reps", self.bench.reps);
        w.entry("warmup", self.bench.warmup);

        w.section("run");
        w.entry("seed", self.seed);
        w.finish()
    }
}

/// Writes every training key except the seed.
pub(crate) fn write_train(w: &mut Writer, t: &TrainConfig) {
    w.entry("epochs", t.epochs);
    w.entry("batch_size", t.batch_size);
    w.entry("lr0", t.lr0);
    w.entry("lr_halving_period", t.lr_halving_period);
    w.entry("beta1", t.beta1);
    w.entry("beta2", t.beta2);
    w.entry("adam_eps", t.adam_eps);
    w.entry("epsilon", t.epsilon);
    w.entry("lambda", t.lambda);
    w.list("prune_epochs", &t.prune_epochs);
    w.list("kernels", &t.kernel_sizes);
}

fn fill_train(r: &mut Reader, t: &mut TrainConfig) -> Result<()> {
    t.epochs = r.get("epochs", t.epochs)?;
    t.batch_size = r.get("batch_size", t.batch_size)?;
    t.lr0 = r.get("lr0", t.lr0)?;
    t.lr_halving_period = r.get("lr_halving_period", t.lr_halving_period)?;
    t.beta1 = r.get("beta1", t.beta1)?;
    t.beta2 = r.get("beta2", t.beta2)?;
    t.adam_eps = r.get("adam_eps", t.adam_eps)?;
    t.epsilon = r.get("epsilon", t.epsilon)?;
    t.lambda = r.get("lambda", t.lambda)?;
    if let Some(v) = r.list("prune_epochs")? {
        t.prune_epochs = v;
    }
    if let Some(v) = r.list("kernels")? {
        t.kernel_sizes = v;
    }
    Ok(())
}

pub(crate) fn read_train(mut r: Reader) -> Result<TrainConfig> {
    let mut t = TrainConfig::default();
    fill_train(&mut r, &mut t)?;
    t.seed = r.require("seed")?;
    r.finish()?;
    t.validate()?;
    Ok(t)
}

pub fn load_config(text: &str) -> Result<PipelineConfig> {
    let sections = kv::parse(text, 1)?;
    let names = ["data", "synth", "features", "selection", "train", "bench", "run"];
    let mut it = kv::take_sections(sections, &names)?.into_iter();
    let mut next = || it.next().expect("one reader per section");
    let (mut data, mut synth, mut feat, mut sel, mut train, mut bench, mut run) =
        (next(), next(), next(), next(), next(), next(), next());

    let mut cfg = PipelineConfig::default();

    let source: String = data.get("source", "synthetic".to_string())?;
    let path: Option<String> = data.opt("path")?;
    cfg.data = match (source.as_str(), path) {
        ("synthetic", None) => DataSource::Synthetic,
        ("synthetic", Some(_)) => return Err(Error::config("path", "only valid with source = csv")),
        ("csv", Some(p)) => DataSource::Csv(PathBuf::from(p)),
        ("csv", None) => return Err(Error::config("path", "required with source = csv")),
        (other, _) => return Err(Error::config("source", format!("expected synthetic or csv, got `{other}`"))),
    };
    cfg.symbol = data.get("symbol", cfg.symbol)?;
    data.finish()?;

    let s = &mut cfg.synth;
    s.n_bars = synth.get("n_bars", s.n_bars)?;
    s.drift = synth.get("drift", s.drift)?;
    s.volatility = synth.get("volatility", s.volatility)?;
    s.regime_shift_period = synth.get("regime_shift_period", s.regime_shift_period)?;
    s.signal_strength = synth.get("signal_strength", s.signal_strength)?;
    synth.finish()?;

    let f = &mut cfg.features;
    f.horizon = feat.get("horizon", f.horizon)?;
    f.vol_window = feat.get("vol_window", f.vol_window)?;
    f.window = feat.get("window", f.window)?;
    f.n_noise = feat.get("n_noise", f.n_noise)?;
    cfg.synth.n_noise_features = f.n_noise;
    feat.finish()?;

    let p = &mut cfg.selection;
    p.k = sel.get("k", p.k)?;
    p.n_init = sel.get("n_init", p.n_init)?;
    p.max_iter = sel.get("max_iter", p.max_iter)?;
    p.tol = sel.get("tol", p.tol)?;
    p.mi_threshold = sel.get("mi_threshold", p.mi_threshold)?;
    p.top_m = sel.get("top_m", p.top_m)?;
    p.grid_size = sel.get("grid_size", p.grid_size)?;
    cfg.dynamic_reselect = sel.get("dynamic_reselect", cfg.dynamic_reselect)?;
    cfg.reselect_window = sel.get("reselect_window", cfg.reselect_window)?;
    sel.finish()?;

    fill_train(&mut train, &mut cfg.train)?;
    train.finish()?;

    cfg.bench.reps = bench.get("reps", cfg.bench.reps)?;
    cfg.bench.warmup = bench.get("warmup", cfg.bench.warmup)?;
    bench.finish()?;

    let seed = run.get("seed", DEFAULT_SEED)?;
    run.finish()?;
    cfg.set_seed(seed);

    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    load_config(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: Error) -> String {
        match e {
            Error::Config { key, .. } => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_body_gives_defaults() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.selection.k, 10);
        assert_eq!(cfg.train.epsilon, 0.01);
        assert_eq!(cfg.train.lambda, 0.1);
        assert_eq!(cfg.train.lr0, 0.001);
        assert_eq!(cfg.train.batch_size, 128);
    }

    #[test]
    fn literal_defaults() {
        let t = TrainConfig::default();
        assert_eq!(t.lr0, 0.001);
        assert_eq!(t.lr_halving_period, 10);
        assert_eq!(t.batch_size, 128);
        assert_eq!(t.epsilon, 0.01);
        assert_eq!(t.lambda, 0.1);
        assert_eq!(t.kernel_sizes, vec![3, 5]);
        assert_eq!((t.beta1, t.beta2, t.adam_eps), (0.9, 0.999, 1e-8));
        assert_eq!(SelectionParams::default().k, 10);
    }

    #[test]
    fn negative_epochs_names_key() {
        assert_eq!(key_of(load_config("[train]\nepochs = -1\n").unwrap_err()), "epochs");
    }

    #[test]
    fn unknown_keys_and_sections() {
        assert_eq!(key_of(load_config("[train]\nepoch = 3\n").unwrap_err()), "epoch");
        assert_eq!(key_of(load_config("[trian]\n").unwrap_err()), "[trian]");
    }

    #[test]
    fn constraint_violations_name_key() {
        assert_eq!(key_of(load_config("[train]\nbatch_size = 0\n").unwrap_err()), "batch_size");
        assert_eq!(key_of(load_config("[train]\nlr0 = 0\n").unwrap_err()), "lr0");
        assert_eq!(key_of(load_config("[features]\nwindow = 4\n").unwrap_err()), "kernels");
        assert_eq!(key_of(load_config("[data]\nsource = csv\n").unwrap_err()), "path");
        assert_eq!(key_of(load_config("[bench]\nreps = 0\n").unwrap_err()), "reps");
    }

    #[test]
    fn kernels_round_trip() {
        let cfg = load_config("[train]\nkernels = 3,5\n").unwrap();
        assert!(cfg.serialize().contains("kernels = 3,5\n"));
        assert_eq!(load_config(&cfg.serialize()).unwrap(), cfg);
    }

    #[test]
    fn serialize_is_canonical() {
        let text = "[run]\nseed = 9\n[data]\nsource = csv\npath = /tmp/x.csv\n[selection]\nmi_threshold = 0.125\ndynamic_reselect = true\n";
        let cfg = load_config(text).unwrap();
        let once = cfg.serialize();
        let twice = load_config(&once).unwrap().serialize();
        assert_eq!(once, twice);
        assert_eq!(cfg.seed(), 9);
        assert_eq!(cfg.train.seed, 9);
        assert_eq!(cfg.data, DataSource::Csv("/tmp/x.csv".into()));
    }
}
