//! Flat `key=value` run configuration.
//!
//! Every key defaults to the values of [`TrainConfig::default`] and
//! [`InferenceConfig::default`]. Unknown keys are rejected.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::infer::{Aggregate, InferenceConfig};
use crate::record::Record;
use crate::train::TrainConfig;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub infer: InferenceConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected a boolean, got {value:?}"))),
    }
}

// One table drives both parsing and the echo.
macro_rules! keys {
    ($($key:literal => [$($path:tt)+]: $kind:ident;)*) => {
        /// Every accepted configuration key, in echo order.
        pub const KEYS: &[&str] = &[$($key),*];

        impl RunConfig {
            /// Sets one key from its text value.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                let value = value.trim();
                match key {
                    $($key => keys!(@set self.$($path)+, $kind, key, value),)*
                    _ => return Err(Error::Config(format!("unknown key {key:?}"))),
                }
                Ok(())
            }

            /// Every key with its current value.
            pub fn to_record(&self) -> Record {
                let mut r = Record::new();
                $(r.set($key, keys!(@show self.$($path)+, $kind));)*
                r
            }
        }
    };
    (@set $place:expr, bool, $key:ident, $value:ident) => { $place = parse_bool($key, $value)? };
    (@set $place:expr, aggregate, $key:ident, $value:ident) => {
        $place = match $value {
            "median" => Aggregate::Median,
            "mean" => Aggregate::Mean,
            _ => return Err(Error::Config(format!("{}: expected median or mean", $key))),
        }
    };
    (@set $place:expr, $kind:ident, $key:ident, $value:ident) => { $place = parse::<$kind>($key, $value)? };
    (@show $place:expr, aggregate) => {
        match $place {
            Aggregate::Median => "median",
            Aggregate::Mean => "mean",
        }
    };
    (@show $place:expr, $kind:ident) => { $place };
}

keys! {
    "scale" => [train.r]: usize;
    "patch_size" => [train.patch_size]: usize;
    "base_lr" => [train.base_lr]: f64;
    "min_lr" => [train.min_lr]: f64;
    "lr_factor_affine" => [train.lr_factors.affine]: f32;
    "lr_factor_cpab" => [train.lr_factors.cpab]: f32;
    "lr_factor_tps" => [train.lr_factors.tps]: f32;
    "p_alt" => [train.p_alt]: f64;
    "max_iters" => [train.max_iters]: usize;
    "plateau_window" => [train.plateau_window]: usize;
    "plateau_threshold" => [train.plateau_threshold]: f64;
    "aug_scale_min" => [train.augmentation.scale.0]: f32;
    "aug_scale_max" => [train.augmentation.scale.1]: f32;
    "aug_rotation_min" => [train.augmentation.rotation.0]: f32;
    "aug_rotation_max" => [train.augmentation.rotation.1]: f32;
    "aug_shear_min" => [train.augmentation.shear.0]: f32;
    "aug_shear_max" => [train.augmentation.shear.1]: f32;
    "aug_translation" => [train.augmentation.translation]: f32;
    "stage_cpab" => [train.stage_cpab]: f64;
    "stage_tps" => [train.stage_tps]: f64;
    "layer_affine" => [train.layers.affine]: bool;
    "layer_cpab" => [train.layers.cpab]: bool;
    "layer_tps" => [train.layers.tps]: bool;
    "train_deformation" => [train.train_deformation]: bool;
    "fe1_layers" => [train.net.fe1_layers]: usize;
    "fe1_channels" => [train.net.fe1_channels]: usize;
    "fe2_layers" => [train.net.fe2_layers]: usize;
    "fe2_channels" => [train.net.fe2_channels]: usize;
    "cpab_cells_x" => [train.deform.cells_x]: usize;
    "cpab_cells_y" => [train.deform.cells_y]: usize;
    "cpab_steps" => [train.deform.cpab_steps]: usize;
    "tps_side" => [train.deform.tps_side]: usize;
    "tps_lambda" => [train.deform.tps_lambda]: f64;
    "adam_beta1" => [train.adam.beta1]: f32;
    "adam_beta2" => [train.adam.beta2]: f32;
    "adam_eps" => [train.adam.eps]: f32;
    "seed" => [train.seed]: u64;
    "per_stage" => [infer.per_stage]: usize;
    "ensemble" => [infer.ensemble]: bool;
    "aggregate" => [infer.aggregate]: aggregate;
    "ibp_iters" => [infer.ibp_iters]: usize;
    "ibp_tol" => [infer.ibp_tol]: f64;
}

impl RunConfig {
    /// Applies every entry of `rec` on top of the current values.
    pub fn apply(&mut self, rec: &Record) -> Result<()> {
        for (k, v) in rec.entries() {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply(&Record::parse(text)?)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        crate::infer::stage_count(self.train.r, self.infer.per_stage)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.set("p_alt", "0.5").unwrap();
        cfg.set("aggregate", "mean").unwrap();
        cfg.set("layer_tps", "false").unwrap();
        cfg.set("aug_rotation_min", "-5").unwrap();
        let text = cfg.to_record().to_string();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn every_key_is_echoed() {
        let rec = RunConfig::default().to_record();
        assert_eq!(rec.entries().len(), KEYS.len());
        for k in KEYS {
            assert!(rec.get(k).is_some(), "{k}");
        }
    }

    #[test]
    fn defaults_parse_from_empty_text() {
        assert_eq!(RunConfig::parse("# nothing\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_and_malformed_keys_fail() {
        assert!(RunConfig::parse("learning_rate=1").is_err());
        assert!(RunConfig::parse("max_iters=many").is_err());
        assert!(RunConfig::parse("ensemble=maybe").is_err());
    }

    #[test]
    fn validation_checks_stage_factor() {
        let cfg = RunConfig::parse("scale=6").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse("scale=4").unwrap();
        cfg.validate().unwrap();
    }
}
