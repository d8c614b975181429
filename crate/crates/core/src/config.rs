//! Text documents describing models.
//!
//! A document is either a preset reference with optional parameter
//! overrides, a pointer to another model file, or a full interaction table:
//!
//! ```toml
//! d = 1
//! lambda = 2.0
//! sigma = 1.0
//! istar = ["1"]
//!
//! [[interaction]]
//! id = "1"
//! r = -1
//! h = -1
//! k = 0.5
//! pair = "2"
//! b = [1.0]
//!
//! [[interaction]]
//! id = "2"
//! r = 1
//! h = 0
//! k = -1.0
//! pair = "1"
//! b = [1.0]
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algebra::{BilinearMap, Interaction, ModelSpec, Preset};
use crate::error::{Error, ModelError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionDoc {
    pub id: String,
    pub r: i64,
    pub h: i64,
    pub k: f64,
    pub pair: String,
    /// Row-major `B^{a,b,c}`, `d^3` entries.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma1_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2_tilde: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub istar: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interaction: Option<Vec<InteractionDoc>>,
}

fn cfg(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ModelDoc {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            ..Self::default()
        }
    }

    pub fn parse(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| cfg(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut doc = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => cfg(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let (Some(f), Some(dir)) = (doc.file.as_mut(), path.parent()) {
            if f.is_relative() {
                *f = dir.join(&*f);
            }
        }
        Ok(doc)
    }

    /// Sets a named scalar parameter.
    pub fn set_param(&mut self, key: &str, value: f64) -> Result<(), Error> {
        let slot = match key {
            "a" => &mut self.a,
            "b" => &mut self.b,
            "c" => &mut self.c,
            "lambda" => &mut self.lambda,
            "sigma" => &mut self.sigma,
            "sigma_tilde" => &mut self.sigma_tilde,
            "sigma1_tilde" => &mut self.sigma1_tilde,
            "sigma2_tilde" => &mut self.sigma2_tilde,
            other => return Err(cfg(format!("unknown model parameter {other:?}"))),
        };
        *slot = Some(value);
        Ok(())
    }

    fn has_table(&self) -> bool {
        self.d.is_some() || self.istar.is_some() || self.interaction.is_some()
    }

    pub fn resolve(&self) -> Result<ModelSpec, Error> {
        if let Some(path) = &self.file {
            if self.preset.is_some() || self.has_table() {
                return Err(cfg("a model reference cannot combine `file` with other definitions"));
            }
            let mut inner = ModelDoc::load(path)?;
            for (key, v) in self.overrides() {
                inner.set_param(key, v)?;
            }
            return inner.resolve();
        }
        if let Some(name) = &self.preset {
            if self.has_table() {
                return Err(cfg("a preset model cannot also list interactions"));
            }
            return Ok(self.to_preset(name)?.build()?);
        }
        self.resolve_table()
    }

    fn overrides(&self) -> Vec<(&'static str, f64)> {
        [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("lambda", self.lambda),
            ("sigma", self.sigma),
            ("sigma_tilde", self.sigma_tilde),
            ("sigma1_tilde", self.sigma1_tilde),
            ("sigma2_tilde", self.sigma2_tilde),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k, v)))
        .collect()
    }

    pub fn to_preset(&self, name: &str) -> Result<Preset, Error> {
        let unused = |keys: &[&str]| -> Result<(), Error> {
            for (k, _) in self.overrides() {
                if !keys.contains(&k) {
                    return Err(cfg(format!("parameter {k:?} does not apply to preset {name:?}")));
                }
            }
            Ok(())
        };
        match name.to_ascii_lowercase().as_str() {
            "goy" => {
                unused(&["a", "b", "c", "lambda", "sigma_tilde"])?;
                let Preset::Goy {
                    a,
                    b,
                    c,
                    lambda,
                    sigma_tilde,
                } = Preset::default_goy()
                else {
                    unreachable!()
                };
                Ok(Preset::Goy {
                    a: self.a.unwrap_or(a),
                    b: self.b.unwrap_or(b),
                    c: self.c.unwrap_or(c),
                    lambda: self.lambda.unwrap_or(lambda),
                    sigma_tilde: self.sigma_tilde.unwrap_or(sigma_tilde),
                })
            }
            "sabra" => {
                unused(&["a", "b", "c", "lambda", "sigma1_tilde", "sigma2_tilde"])?;
                let Preset::Sabra {
                    a,
                    b,
                    c,
                    lambda,
                    sigma1_tilde,
                    ..
                } = Preset::default_sabra()
                else {
                    unreachable!()
                };
                let (a, b, c, lambda) = (
                    self.a.unwrap_or(a),
                    self.b.unwrap_or(b),
                    self.c.unwrap_or(c),
                    self.lambda.unwrap_or(lambda),
                );
                let s1 = self.sigma1_tilde.unwrap_or(sigma1_tilde);
                let s2 = self.sigma2_tilde.unwrap_or(s1 * c / (lambda * a));
                Ok(Preset::Sabra {
                    a,
                    b,
                    c,
                    lambda,
                    sigma1_tilde: s1,
                    sigma2_tilde: s2,
                })
            }
            "novikov" => {
                unused(&["lambda", "sigma"])?;
                Ok(Preset::Novikov {
                    lambda: self.lambda.unwrap_or(2.0),
                    sigma: self.sigma.unwrap_or(1.0),
                })
            }
            other => Err(cfg(format!("unknown preset {other:?}; expected goy, sabra or novikov"))),
        }
    }

    fn resolve_table(&self) -> Result<ModelSpec, Error> {
        let missing = |f: &str| cfg(format!("model table is missing field `{f}`"));
        let d = self.d.ok_or_else(|| missing("d"))?;
        let lambda = self.lambda.ok_or_else(|| missing("lambda"))?;
        let sigma = self.sigma.ok_or_else(|| missing("sigma"))?;
        let istar = self.istar.as_ref().ok_or_else(|| missing("istar"))?;
        let table = self.interaction.as_ref().ok_or_else(|| missing("interaction"))?;
        if self.a.is_some() || self.b.is_some() || self.c.is_some() {
            return Err(cfg("parameters a, b, c only apply to presets"));
        }
        let interactions = table
            .iter()
            .map(|it| Ok(Interaction::new(it.id.clone(), it.r, it.h, it.k, BilinearMap::new(d, it.b.clone())?)))
            .collect::<Result<Vec<_>, ModelError>>()?;
        let index = |id: &str| {
            table
                .iter()
                .position(|it| it.id == id)
                .ok_or_else(|| Error::Model(ModelError::Structural(format!("unknown interaction id {id:?}"))))
        };
        let pairing = table.iter().map(|it| index(&it.pair)).collect::<Result<Vec<_>, _>>()?;
        let istar = istar.iter().map(|id| index(id)).collect::<Result<Vec<_>, _>>()?;
        let spec = ModelSpec {
            d,
            lambda,
            sigma,
            interactions,
            pairing,
            istar,
            preset: None,
        };
        spec.check_structure()?;
        Ok(spec)
    }

    /// Full interaction table for an existing model.
    pub fn from_spec(spec: &ModelSpec) -> Self {
        Self {
            d: Some(spec.d),
            lambda: Some(spec.lambda),
            sigma: Some(spec.sigma),
            istar: Some(spec.istar.iter().map(|&i| spec.interactions[i].id.clone()).collect()),
            interaction: Some(
                spec.interactions
                    .iter()
                    .enumerate()
                    .map(|(i, it)| InteractionDoc {
                        id: it.id.clone(),
                        r: it.r,
                        h: it.h,
                        k: it.k,
                        pair: spec.interactions[spec.pairing[i]].id.clone(),
                        b: it.map.entries().to_vec(),
                    })
                    .collect(),
            ),
            ..Self::default()
        }
    }
}

/// Parses `--model` arguments: a preset name or a path to a model file.
pub fn model_ref(arg: &str) -> Result<ModelDoc, Error> {
    match arg.to_ascii_lowercase().as_str() {
        "goy" | "sabra" | "novikov" => Ok(ModelDoc::preset(&arg.to_ascii_lowercase())),
        _ => Ok(ModelDoc {
            file: Some(PathBuf::from(arg)),
            ..ModelDoc::default()
        }),
    }
}
