//! Trained-model directories: a `model.txt` manifest plus one parameter file
//! per learned network (`<field>.params`, see [`crate::diffnet::persist`]).

use std::fs;
use std::path::Path;

use super::model::{BaselineModel, FieldId, ModelSpec, SphnnModel};
use crate::diffnet::persist::{load_params, save_params};
use crate::error::{Error, Result};
use crate::kv::{read_kv, require, write_kv, KvMap};
use crate::structure::CoefficientSet;

pub const MODEL_FORMAT: &str = "sphnn-model-v1";
const MANIFEST: &str = "model.txt";
const BASELINE_PARAMS: &str = "baseline.params";

pub enum SavedModel {
    Sphnn(Box<SphnnModel>),
    Baseline(BaselineModel),
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn hidden_str(hidden: &[usize]) -> String {
    hidden.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(" ")
}

/// Writes the model; `extra` entries (objective, losses, seeds...) go into the manifest.
pub fn save_sphnn(model: &SphnnModel, dir: &Path, extra: &KvMap) -> Result<()> {
    prepare(dir)?;
    let spec = model.spec();
    let mut kv = extra.clone();
    kv.insert("format".into(), MODEL_FORMAT.into());
    kv.insert("kind".into(), "sphnn".into());
    kv.insert("h_source".into(), spec.h.to_string());
    kv.insert("j_source".into(), spec.j.to_string());
    kv.insert("r_source".into(), spec.r.to_string());
    kv.insert("sigma_source".into(), spec.sigma.to_string());
    kv.insert("sigma_cols".into(), spec.sigma_cols.to_string());
    kv.insert("hidden".into(), hidden_str(&spec.hidden));
    kv.insert("n".into(), model.n().to_string());
    for id in model.field_ids() {
        let params = model.params(id).expect("listed field");
        save_params(params, &dir.join(format!("{}.params", id.name())))?;
    }
    write_kv(&dir.join(MANIFEST), &kv)
}

pub fn save_baseline(model: &BaselineModel, dir: &Path, extra: &KvMap) -> Result<()> {
    prepare(dir)?;
    let mut kv = extra.clone();
    kv.insert("format".into(), MODEL_FORMAT.into());
    kv.insert("kind".into(), "baseline".into());
    kv.insert("hidden".into(), hidden_str(&model.params().arch().hidden_widths));
    kv.insert("n".into(), model.n().to_string());
    save_params(model.params(), &dir.join(BASELINE_PARAMS))?;
    write_kv(&dir.join(MANIFEST), &kv)
}

pub fn read_manifest(dir: &Path) -> Result<KvMap> {
    read_kv(&dir.join(MANIFEST))
}

/// Loads either model kind; analytic coefficients come from `template`.
pub fn load_model(dir: &Path, template: &CoefficientSet) -> Result<(SavedModel, KvMap)> {
    let path = dir.join(MANIFEST);
    let source = path.display().to_string();
    let kv = read_kv(&path)?;
    let format = require(&kv, "format", &source)?;
    if format != MODEL_FORMAT {
        return Err(Error::parse(&source, 0, format!("unsupported model format `{format}`")));
    }
    let n: usize = require(&kv, "n", &source)?
        .parse()
        .map_err(|e| Error::parse(&source, 0, format!("bad `n`: {e}")))?;
    if n != template.n() {
        return Err(Error::dim(format!("model {source} state dimension"), template.n(), n));
    }
    let model = match require(&kv, "kind", &source)? {
        "baseline" => SavedModel::Baseline(BaselineModel::from_params(load_params(&dir.join(BASELINE_PARAMS))?)?),
        "sphnn" => {
            let hidden = require(&kv, "hidden", &source)?
                .split_whitespace()
                .map(|w| w.parse::<usize>().map_err(|e| Error::parse(&source, 0, format!("bad hidden width: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let spec = ModelSpec {
                h: require(&kv, "h_source", &source)?.parse()?,
                j: require(&kv, "j_source", &source)?.parse()?,
                r: require(&kv, "r_source", &source)?.parse()?,
                sigma: require(&kv, "sigma_source", &source)?.parse()?,
                sigma_cols: require(&kv, "sigma_cols", &source)?
                    .parse()
                    .map_err(|e| Error::parse(&source, 0, format!("bad `sigma_cols`: {e}")))?,
                hidden,
            };
            let mut model = SphnnModel::new(spec, template.clone(), 0)?;
            let ids: Vec<FieldId> = model.field_ids();
            for id in ids {
                model.set_params(id, load_params(&dir.join(format!("{}.params", id.name())))?)?;
            }
            SavedModel::Sphnn(Box::new(model))
        }
        other => return Err(Error::parse(&source, 0, format!("unknown model kind `{other}`"))),
    };
    Ok((model, kv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::{van_der_pol_coefficients, NoiseAmplitude};
    use crate::training::{RSource, SigmaSource};
    use nalgebra::dvector;

    #[test]
    fn sphnn_round_trip() {
        let template = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1)).unwrap();
        let spec = ModelSpec {
            r: RSource::Learned,
            sigma: SigmaSource::Learned,
            hidden: vec![5, 3],
            ..ModelSpec::conservative(2)
        };
        let model = SphnnModel::new(spec, template.clone(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut extra = KvMap::new();
        extra.insert("objective".into(), "nll".into());
        save_sphnn(&model, dir.path(), &extra).unwrap();
        let (loaded, kv) = load_model(dir.path(), &template).unwrap();
        assert_eq!(kv["objective"], "nll");
        let SavedModel::Sphnn(loaded) = loaded else { panic!("wrong kind") };
        assert_eq!(loaded.spec(), model.spec());
        assert_eq!(loaded.all_params(), model.all_params());
        let x = dvector![0.2, 0.1];
        let u = dvector![0.0];
        assert_eq!(loaded.drift(&x, &u).unwrap(), model.drift(&x, &u).unwrap());
    }

    #[test]
    fn baseline_round_trip_and_dimension_check() {
        let template = van_der_pol_coefficients(-0.5, NoiseAmplitude::Constant(0.1)).unwrap();
        let model = BaselineModel::new(2, &[4], 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_baseline(&model, dir.path(), &KvMap::new()).unwrap();
        let (loaded, _) = load_model(dir.path(), &template).unwrap();
        let SavedModel::Baseline(loaded) = loaded else { panic!("wrong kind") };
        assert_eq!(loaded, model);

        let other = BaselineModel::new(3, &[4], 1).unwrap();
        let dir3 = tempfile::tempdir().unwrap();
        save_baseline(&other, dir3.path(), &KvMap::new()).unwrap();
        assert!(matches!(load_model(dir3.path(), &template), Err(Error::Dimension { .. })));
    }
}
