//! INI run configuration.
//!
//! Every key is optional and falls back to the built-in default. Unknown
//! sections and keys are rejected so typos do not pass silently.
//!
//! ```ini
//! ; optimizer for the MNIST experiment
//! [training]
//! learning_rate = 0.1
//! ; multiplies the rate after every epoch
//! lr_decay = 0.955
//! batch_size = 32
//! ; cap applied to every stage
//! max_epochs = 100
//! patience = 40
//! l2 = 5e-6
//! hidden_keep = 1.0
//! seed = 1
//!
//! [mnist]
//! pretrain = true
//! input_dropout = true
//! moddrop = false
//! shared_init = true
//! input_keep = 0.8
//! moddrop_keep = 0.9
//! pretrain_epochs = 30
//! frozen_epochs = 5
//! relaxed_epochs = 80
//! validation_size = 5000
//! ; optional limits
//! train_limit = 60000
//! test_limit = 10000
//! noise_rate = 0.5
//!
//! [gesture]
//! classes = 4
//! gestures_per_sequence = 6
//! rest_frames = 20,35
//! gesture_frames = 28,40
//! noise = 0.004
//! template_seed = 7
//! train_sequences = 6
//! test_sequences = 3
//! strides = 2,3,4
//! scale_weights = 1,1,1
//! vicinity = 10
//! min_segment_frames = 5
//! train_subsample = 2
//! smoothing_sigma = 1.0
//! smoothing_window = 5
//! gesture_hidden = 64
//! gesture_epochs = 15
//! motion_hidden = 300
//! motion_epochs = 8
//! learning_rate = 0.05
//! seed = 1
//! ```

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use ini::{Ini, Properties};

use super::experiment::MnistExperimentConfig;
use super::gesture::GesturePipelineConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub mnist: MnistExperimentConfig,
    pub gesture: GesturePipelineConfig,
}

impl RunConfig {
    /// Sets every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.mnist.training.seed = seed;
        self.gesture.seed = seed;
        self
    }
}

struct Section<'a> {
    name: &'a str,
    props: Option<&'a Properties>,
    seen: BTreeSet<&'a str>,
}

impl<'a> Section<'a> {
    fn err(&self, key: &str, detail: impl Into<String>) -> Error {
        Error::ConfigKey {
            section: self.name.to_string(),
            key: key.to_string(),
            detail: detail.into(),
        }
    }

    fn raw(&mut self, key: &'a str) -> Option<&'a str> {
        self.seen.insert(key);
        self.props?.get(key)
    }

    fn set<T: FromStr>(&mut self, key: &'a str, target: &mut T) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *target = v.trim().parse().map_err(|_| self.err(key, format!("cannot parse `{v}`")))?;
        }
        Ok(())
    }

    fn set_opt<T: FromStr>(&mut self, key: &'a str, target: &mut Option<T>) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *target = Some(v.trim().parse().map_err(|_| self.err(key, format!("cannot parse `{v}`")))?);
        }
        Ok(())
    }

    fn set_list<T: FromStr>(&mut self, key: &'a str, target: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.raw(key) {
            *target = v
                .split(',')
                .map(|p| p.trim().parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| self.err(key, format!("cannot parse list `{v}`")))?;
        }
        Ok(())
    }

    fn set_pair(&mut self, key: &'a str, target: &mut (usize, usize)) -> Result<()> {
        let mut v = vec![target.0, target.1];
        self.set_list(key, &mut v)?;
        match v.as_slice() {
            [a, b] => {
                *target = (*a, *b);
                Ok(())
            }
            _ => Err(self.err(key, "expected two values `min,max`")),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some(props) = self.props {
            for (k, _) in props.iter() {
                if !self.seen.contains(k) {
                    return Err(self.err(k, "unknown key"));
                }
            }
        }
        Ok(())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let ini = Ini::load_from_str(text).map_err(|e| Error::Parse {
        line: e.line,
        detail: e.msg.to_string(),
    })?;
    for (name, props) in ini.iter() {
        match name {
            Some("training" | "mnist" | "gesture") => {}
            None if props.is_empty() => {}
            other => {
                return Err(Error::ConfigKey {
                    section: other.unwrap_or("").to_string(),
                    key: String::new(),
                    detail: "unknown section".into(),
                })
            }
        }
    }
    let section = |name: &'static str| Section {
        name,
        props: ini.section(Some(name)),
        seen: BTreeSet::new(),
    };
    let mut cfg = RunConfig::default();

    let mut s = section("training");
    let t = &mut cfg.mnist.training;
    s.set("learning_rate", &mut t.learning_rate)?;
    s.set("lr_decay", &mut t.lr_decay)?;
    s.set("batch_size", &mut t.batch_size)?;
    s.set("max_epochs", &mut t.max_epochs)?;
    s.set("patience", &mut t.patience)?;
    s.set("l2", &mut t.l2)?;
    s.set("hidden_keep", &mut t.hidden_keep)?;
    s.set("seed", &mut t.seed)?;
    s.finish()?;

    let mut s = section("mnist");
    let m = &mut cfg.mnist;
    s.set("pretrain", &mut m.pretrain)?;
    s.set("input_dropout", &mut m.input_dropout)?;
    s.set("moddrop", &mut m.moddrop)?;
    s.set("shared_init", &mut m.shared_init)?;
    s.set("input_keep", &mut m.input_keep)?;
    s.set("moddrop_keep", &mut m.moddrop_keep)?;
    s.set("pretrain_epochs", &mut m.pretrain_epochs)?;
    s.set("frozen_epochs", &mut m.frozen_epochs)?;
    s.set("relaxed_epochs", &mut m.relaxed_epochs)?;
    s.set("validation_size", &mut m.validation_size)?;
    s.set_opt("train_limit", &mut m.train_limit)?;
    s.set_opt("test_limit", &mut m.test_limit)?;
    s.set("noise_rate", &mut m.noise_rate)?;
    s.finish()?;

    let mut s = section("gesture");
    let g = &mut cfg.gesture;
    s.set("classes", &mut g.synthetic.classes)?;
    s.set("gestures_per_sequence", &mut g.synthetic.gestures_per_sequence)?;
    s.set_pair("rest_frames", &mut g.synthetic.rest_frames)?;
    s.set_pair("gesture_frames", &mut g.synthetic.gesture_frames)?;
    s.set("noise", &mut g.synthetic.noise)?;
    s.set("template_seed", &mut g.synthetic.template_seed)?;
    s.set("train_sequences", &mut g.train_sequences)?;
    s.set("test_sequences", &mut g.test_sequences)?;
    s.set_list("strides", &mut g.strides)?;
    s.set_list("scale_weights", &mut g.scale_weights)?;
    s.set("vicinity", &mut g.vicinity)?;
    s.set("min_segment_frames", &mut g.min_segment_frames)?;
    s.set("train_subsample", &mut g.train_subsample)?;
    s.set("smoothing_sigma", &mut g.descriptor.smoothing_sigma)?;
    s.set("smoothing_window", &mut g.descriptor.smoothing_window)?;
    s.set("gesture_hidden", &mut g.gesture.hidden)?;
    s.set("gesture_epochs", &mut g.gesture.epochs)?;
    s.set("motion_hidden", &mut g.motion.hidden)?;
    s.set("motion_epochs", &mut g.motion.epochs)?;
    let mut lr = g.gesture.training.learning_rate;
    s.set("learning_rate", &mut lr)?;
    g.gesture.training.learning_rate = lr;
    g.motion.training.learning_rate = lr;
    s.set("seed", &mut g.seed)?;
    s.finish()?;

    cfg.mnist.training.validate()?;
    cfg.gesture.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    parse_config(&std::fs::read_to_string(path)?)
}
