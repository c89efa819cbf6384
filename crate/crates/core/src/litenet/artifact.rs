//! `litenet-v1` model artifacts: sectioned text whose first line is the
//! format tag. Floats carry 17 significant digits, so a saved model predicts
//! bit-for-bit like the original.

use std::path::Path;

use crate::config::{read_train, write_train};
use crate::error::{Error, Result};
use crate::kv::{self, Reader, Writer};
use crate::market_data::FeatureSpec;
use crate::mutual_info::SelectionReport;

use super::conv::ConvModule;
use super::model::{FusedModel, FusedNet, Normalizer};

pub const ARTIFACT_TAG: &str = "litenet-v1";

fn bits(mask: &[bool]) -> Vec<u8> {
    mask.iter().map(|&m| m as u8).collect()
}

pub fn model_to_string(model: &FusedModel) -> String {
    let mut w = Writer::new();
    w.line(ARTIFACT_TAG);

    let f = &model.features;
    w.section("features");
    w.entry("horizon", f.horizon);
    w.entry("vol_window", f.vol_window);
    w.entry("window", f.window);
    w.entry("n_noise", f.n_noise);
    w.entry("noise_seed", f.noise_seed);

    w.section("train");
    write_train(&mut w, &model.train_config);
    w.entry("seed", model.train_config.seed);

    let s = &model.selection;
    w.section("selection");
    w.entry("cycle", s.cycle);
    w.list("names", &s.names);
    w.exact("mi", &s.mi);
    w.exact("weights", &s.weights);
    w.list("clamped", &s.clamped);
    w.exact("threshold", &[s.threshold]);
    w.entry("top_m", s.top_m);
    w.list("weight_rank", &s.weight_rank);
    w.list("selected", &s.selected);
    w.entry("fallback", s.fallback);
    w.exact("bandwidth_feature", &s.bandwidths.iter().map(|b| b.0).collect::<Vec<_>>());
    w.exact("bandwidth_target", &s.bandwidths.iter().map(|b| b.1).collect::<Vec<_>>());
    w.entry("grid_size", s.grid_size);

    let n = &model.normalizer;
    w.section("normalizer");
    w.exact("feature_mean", &n.feature_mean);
    w.exact("feature_std", &n.feature_std);
    w.exact("target_mean", &[n.target_mean]);
    w.exact("target_std", &[n.target_std]);

    let net = &model.net;
    w.section("network");
    w.entry("rows", net.rows());
    w.entry("cols", net.cols());
    w.list("inputs", &model.inputs);
    w.entry("modules", net.modules().len());
    w.exact("alpha", net.alpha());

    for (i, m) in net.modules().iter().enumerate() {
        w.section(&format!("module.{i}"));
        w.entry("size", m.size);
        w.exact("kernel", &m.kernel);
        w.list("mask", &bits(&m.mask));
        w.exact("bias", &[m.bias]);
        w.exact("head_w", &[m.head_w]);
        w.exact("head_b", &[m.head_b]);
    }
    w.finish()
}

fn scalar(r: &mut Reader, key: &str) -> Result<f64> {
    match r.require_list::<f64>(key)?.as_slice() {
        [v] => Ok(*v),
        _ => Err(Error::artifact(format!("`{key}` must hold one value"))),
    }
}

fn artifact_err(e: Error) -> Error {
    match e {
        Error::Artifact(_) => e,
        other => Error::artifact(other.to_string()),
    }
}

pub fn model_from_str(text: &str) -> Result<FusedModel> {
    let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
    if first.trim_end_matches('\r') != ARTIFACT_TAG {
        return Err(Error::artifact(format!("expected `{ARTIFACT_TAG}` on the first line")));
    }
    parse_body(rest).map_err(artifact_err)
}

fn parse_body(rest: &str) -> Result<FusedModel> {
    let mut sections = kv::parse(rest, 2)?;
    let module_sections: Vec<kv::Section> = {
        let (modules, others): (Vec<_>, Vec<_>) = sections.drain(..).partition(|s| s.name.starts_with("module."));
        sections = others;
        modules
    };
    let mut readers = kv::take_sections(sections, &["features", "train", "selection", "normalizer", "network"])?;
    let mut network = readers.pop().expect("five readers");
    let mut norm = readers.pop().expect("five readers");
    let mut sel = readers.pop().expect("five readers");
    let train = readers.pop().expect("five readers");
    let mut feat = readers.pop().expect("five readers");

    let features = FeatureSpec {
        horizon: feat.require("horizon")?,
        vol_window: feat.require("vol_window")?,
        window: feat.require("window")?,
        n_noise: feat.require("n_noise")?,
        noise_seed: feat.require("noise_seed")?,
    };
    feat.finish()?;

    let train_config = read_train(train)?;

    let bw_x: Vec<f64> = sel.require_list("bandwidth_feature")?;
    let bw_y: Vec<f64> = sel.require_list("bandwidth_target")?;
    let selection = SelectionReport {
        cycle: sel.require("cycle")?,
        names: sel.require_list("names")?,
        mi: sel.require_list("mi")?,
        weights: sel.require_list("weights")?,
        clamped: sel.require_list("clamped")?,
        threshold: scalar(&mut sel, "threshold")?,
        top_m: sel.require("top_m")?,
        weight_rank: sel.require_list("weight_rank")?,
        selected: sel.require_list("selected")?,
        fallback: sel.require("fallback")?,
        bandwidths: bw_x.into_iter().zip(bw_y).collect(),
        grid_size: sel.require("grid_size")?,
    };
    sel.finish()?;
    let d = selection.names.len();
    if [
        selection.mi.len(),
        selection.weights.len(),
        selection.clamped.len(),
        selection.weight_rank.len(),
        selection.bandwidths.len(),
    ]
    .iter()
    .any(|&l| l != d)
    {
        return Err(Error::artifact("selection arrays disagree in length"));
    }

    let normalizer = Normalizer {
        feature_mean: norm.require_list("feature_mean")?,
        feature_std: norm.require_list("feature_std")?,
        target_mean: scalar(&mut norm, "target_mean")?,
        target_std: scalar(&mut norm, "target_std")?,
    };
    norm.finish()?;
    if normalizer.feature_mean.len() != d || normalizer.feature_std.len() != d {
        return Err(Error::artifact("normalizer length differs from the feature count"));
    }

    let rows: usize = network.require("rows")?;
    let cols: usize = network.require("cols")?;
    let inputs: Vec<usize> = network.require_list("inputs")?;
    let n_modules: usize = network.require("modules")?;
    let alpha: Vec<f64> = network.require_list("alpha")?;
    network.finish()?;
    if inputs.len() != cols || inputs.iter().any(|&c| c >= d) {
        return Err(Error::artifact("input columns do not match the network width"));
    }
    if module_sections.len() != n_modules {
        return Err(Error::artifact(format!("expected {n_modules} module sections, found {}", module_sections.len())));
    }

    let mut modules = Vec::with_capacity(n_modules);
    for i in 0..n_modules {
        let name = format!("module.{i}");
        let section = module_sections
            .iter()
            .find(|s| s.name == name)
            .cloned()
            .ok_or_else(|| Error::artifact(format!("missing [{name}]")))?;
        let mut r = Reader::new(section);
        let size: usize = r.require("size")?;
        let kernel: Vec<f64> = r.require_list("kernel")?;
        let mask: Vec<u8> = r.require_list("mask")?;
        let mut m = ConvModule::new(
            size,
            kernel,
            scalar(&mut r, "bias")?,
            scalar(&mut r, "head_w")?,
            scalar(&mut r, "head_b")?,
        )?;
        r.finish()?;
        if mask.len() != m.kernel.len() || mask.iter().any(|&b| b > 1) {
            return Err(Error::artifact(format!("[{name}] mask must hold {} 0/1 flags", m.kernel.len())));
        }
        m.mask = mask.iter().map(|&b| b == 1).collect();
        modules.push(m);
    }
    let net = FusedNet::new(modules, alpha, rows, cols)?;
    if rows != features.window {
        return Err(Error::artifact("network rows differ from the feature window"));
    }

    Ok(FusedModel { net, inputs, normalizer, selection, features, train_config })
}

pub fn save_model(model: &FusedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FusedModel> {
    model_from_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::litenet::train::TrainConfig;

    fn sample_model() -> FusedModel {
        let mut a = ConvModule::new(2, vec![0.1, -1.0 / 3.0, 0.0, 2.5e-7], 0.125, -0.7, 1e-3).unwrap();
        a.mask[2] = false;
        let b = ConvModule::new(1, vec![std::f64::consts::PI], -0.5, 1.1, 0.0).unwrap();
        let net = FusedNet::new(vec![a, b], vec![0.6, 0.4000000000000001], 3, 2).unwrap();
        FusedModel {
            net,
            inputs: vec![2, 0],
            normalizer: Normalizer {
                feature_mean: vec![0.1, 0.2, 0.3],
                feature_std: vec![1.0, 0.5, 1.0 / 7.0],
                target_mean: 1e-5,
                target_std: 3e-3,
            },
            selection: SelectionReport {
                cycle: 2,
                names: vec!["ret".into(), "vol_z".into(), "noise_0".into()],
                mi: vec![0.01, 0.2, 0.0],
                weights: vec![1.5, 1e12, 0.75],
                clamped: vec![false, true, false],
                threshold: 0.05,
                top_m: 2,
                weight_rank: vec![1, 0, 2],
                selected: vec![1],
                fallback: false,
                bandwidths: vec![(0.1, 0.2), (0.3, 0.4), (0.0, 0.0)],
                grid_size: 64,
            },
            features: FeatureSpec { horizon: 1, vol_window: 20, window: 3, n_noise: 1, noise_seed: 9 },
            train_config: TrainConfig::default(),
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let m = sample_model();
        let text = model_to_string(&m);
        assert!(text.starts_with("litenet-v1\n"));
        let back = model_from_str(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_string(&back), text);
    }

    #[test]
    fn wrong_tag() {
        let text = model_to_string(&sample_model()).replacen("litenet-v1", "litenet-v0", 1);
        assert!(matches!(model_from_str(&text), Err(Error::Artifact(_))));
    }

    #[test]
    fn corrupted_arrays() {
        let text = model_to_string(&sample_model());
        let broken = text.replace("mask = 1,1,0,1", "mask = 1,1,0");
        assert!(matches!(model_from_str(&broken), Err(Error::Artifact(_))));
        let broken = text.replace("modules = 2", "modules = 3");
        assert!(matches!(model_from_str(&broken), Err(Error::Artifact(_))));
        let broken = text.replace("[network]", "[network]\nextra = 1");
        assert!(matches!(model_from_str(&broken), Err(Error::Artifact(_))));
    }
}
