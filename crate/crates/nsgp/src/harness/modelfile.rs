//! Fitted-model files: a plain-text container holding the hyperparameters,
//! variant flags, normalization, training data, and the posterior draws
//! (a single row for a MAP fit) in the columnar sample format.

use std::path::Path;

use nalgebra::DVector;

use super::NormParams;
use crate::error::{NsgpError, Result};
use crate::infer_hmc::{PosteriorSample, SampleSet};
use crate::infer_map::MapResult;
use crate::model::{Hyperparams, VariantFlags};

const MAGIC: &str = "nsgp-model v1";

/// Everything needed to predict from a fit.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub method: String,
    pub theta: Hyperparams,
    pub flags: VariantFlags,
    pub norm: NormParams,
    /// Normalized training columns.
    pub x_train: DVector<f64>,
    pub y_train: DVector<f64>,
    pub samples: SampleSet,
}

impl FittedModel {
    pub fn from_map(
        fit: &MapResult,
        theta: Hyperparams,
        flags: VariantFlags,
        norm: NormParams,
        x_train: DVector<f64>,
        y_train: DVector<f64>,
    ) -> FittedModel {
        let samples = SampleSet {
            samples: vec![PosteriorSample {
                state: fit.state.clone(),
                mll: fit.mll.total,
                chain: 0,
                index: 0,
            }],
            chain_stats: Vec::new(),
        };
        FittedModel {
            method: "map".into(),
            theta,
            flags,
            norm,
            x_train,
            y_train,
            samples,
        }
    }

    pub fn from_samples(
        samples: SampleSet,
        theta: Hyperparams,
        flags: VariantFlags,
        norm: NormParams,
        x_train: DVector<f64>,
        y_train: DVector<f64>,
    ) -> FittedModel {
        FittedModel {
            method: "hmc".into(),
            theta,
            flags,
            norm,
            x_train,
            y_train,
            samples,
        }
    }

    pub fn to_text(&self) -> Result<String> {
        let t = &self.theta;
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("method {}\n", self.method));
        out.push_str(&format!(
            "mu_log {} {} {}\n",
            t.mu_ell, t.mu_sigma, t.mu_omega
        ));
        out.push_str(&format!(
            "alpha {} {} {}\n",
            t.alpha_ell, t.alpha_sigma, t.alpha_omega
        ));
        out.push_str(&format!("beta {} {} {}\n", t.beta_ell, t.beta_sigma, t.beta_omega));
        out.push_str(&format!(
            "nonstat {} {} {}\n",
            self.flags.nonstat_ell, self.flags.nonstat_sigma, self.flags.nonstat_omega
        ));
        out.push_str(&format!(
            "norm {} {} {} {}\n",
            self.norm.x_offset, self.norm.x_scale, self.norm.y_offset, self.norm.y_scale
        ));
        let join = |v: &DVector<f64>| {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("\t")
        };
        out.push_str(&format!("n_train {}\n", self.x_train.len()));
        out.push_str(&format!("x {}\n", join(&self.x_train)));
        out.push_str(&format!("y {}\n", join(&self.y_train)));
        out.push_str(&format!("samples {}\n", self.samples.len()));
        out.push_str(&self.samples.to_columnar()?);
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|source| NsgpError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_text(text: &str, path: &str) -> Result<FittedModel> {
        let err = |line: usize, msg: String| NsgpError::Parse {
            path: path.to_string(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate();
        let mut next = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i + 1, l.to_string())),
                None => Err(err(0, format!("unexpected end of file, expected {expect}"))),
            }
        };

        let (line, magic) = next("header")?;
        if magic.trim() != MAGIC {
            return Err(err(line, format!("expected '{MAGIC}'")));
        }

        let mut field = |name: &str| -> Result<Vec<String>> {
            let (line, text) = next(name)?;
            let mut parts = text.split_whitespace();
            if parts.next() != Some(name) {
                return Err(err(line, format!("expected '{name} ...', got '{text}'")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        let floats = |vals: &[String], want: usize, what: &str| -> Result<Vec<f64>> {
            if vals.len() != want {
                return Err(NsgpError::Parse {
                    path: path.to_string(),
                    line: 0,
                    msg: format!("{what}: expected {want} values, got {}", vals.len()),
                });
            }
            vals.iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|e| NsgpError::Parse {
                        path: path.to_string(),
                        line: 0,
                        msg: format!("{what}: {e}"),
                    })
                })
                .collect()
        };

        let method = field("method")?
            .first()
            .cloned()
            .ok_or_else(|| err(2, "missing method".into()))?;
        let mu = floats(&field("mu_log")?, 3, "mu_log")?;
        let alpha = floats(&field("alpha")?, 3, "alpha")?;
        let beta = floats(&field("beta")?, 3, "beta")?;
        let nonstat = field("nonstat")?;
        if nonstat.len() != 3 {
            return Err(err(6, "nonstat needs 3 booleans".into()));
        }
        let parse_bool = |s: &str| -> Result<bool> {
            s.parse::<bool>().map_err(|e| NsgpError::Parse {
                path: path.to_string(),
                line: 6,
                msg: format!("nonstat: {e}"),
            })
        };
        let flags = VariantFlags {
            nonstat_ell: parse_bool(&nonstat[0])?,
            nonstat_sigma: parse_bool(&nonstat[1])?,
            nonstat_omega: parse_bool(&nonstat[2])?,
        };
        let norm_vals = floats(&field("norm")?, 4, "norm")?;
        let n_train = field("n_train")?
            .first()
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| err(8, "bad n_train".into()))?;
        let x_vals = floats(&field("x")?, n_train, "x")?;
        let y_vals = floats(&field("y")?, n_train, "y")?;
        let n_samples = field("samples")?
            .first()
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| err(11, "bad sample count".into()))?;

        let rest: Vec<&str> = lines.map(|(_, l)| l).collect();
        let samples = SampleSet::from_columnar(&rest.join("\n"), path)?;
        if samples.len() != n_samples {
            return Err(err(
                11,
                format!("declared {n_samples} samples, found {}", samples.len()),
            ));
        }

        let theta = Hyperparams::from_log_means(
            mu[0],
            mu[1],
            mu[2],
            (alpha[0], alpha[1], alpha[2]),
            (beta[0], beta[1], beta[2]),
        )?;
        Ok(FittedModel {
            method,
            theta,
            flags,
            norm: NormParams {
                x_offset: norm_vals[0],
                x_scale: norm_vals[1],
                y_offset: norm_vals[2],
                y_scale: norm_vals[3],
            },
            x_train: DVector::from_column_slice(&x_vals),
            y_train: DVector::from_column_slice(&y_vals),
            samples,
        })
    }

    pub fn load(path: &Path) -> Result<FittedModel> {
        let text = std::fs::read_to_string(path).map_err(|source| NsgpError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text, &path.display().to_string())
    }

    /// Predictive mixture at raw-unit targets.
    pub fn predictive_mixture(
        &self,
        targets_raw: &DVector<f64>,
        s: usize,
        seed: u64,
    ) -> Result<crate::predict::PredictiveMixture> {
        let x_star = targets_raw.map(|v| self.norm.normalize_x(v));
        crate::predict::predict_hmc(
            &self.samples,
            &self.y_train,
            &self.x_train,
            &x_star,
            &self.theta,
            s,
            seed,
        )
    }

    /// Full prediction CSV in raw units:
    /// `x,mean,var,lower95,upper95,ell,sigma,omega`. Mean, variance, and
    /// the 95% band describe the latent function (noise excluded); the
    /// last three columns are the posterior means of the latents.
    pub fn predict_csv(&self, targets_raw: &DVector<f64>, s: usize, seed: u64) -> Result<String> {
        let x_star = targets_raw.map(|v| self.norm.normalize_x(v));
        let mix = self.predictive_mixture(targets_raw, s, seed)?;
        let (mean, var) = crate::predict::mixture_moments(&mix);
        let [ell, sigma, omega] = crate::predict::latent_target_means(
            &self.samples,
            &self.x_train,
            &x_star,
            &self.theta,
        )?;
        let mut out = String::from("x,mean,var,lower95,upper95,ell,sigma,omega\n");
        let n = &self.norm;
        for i in 0..targets_raw.len() {
            let sd = var[i].max(0.0).sqrt();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                targets_raw[i],
                n.denormalize_y(mean[i]),
                var[i] * n.y_scale * n.y_scale,
                n.denormalize_y(mean[i] - 1.96 * sd),
                n.denormalize_y(mean[i] + 1.96 * sd),
                ell[i] * n.x_scale,
                sigma[i] * n.y_scale,
                omega[i] * n.y_scale,
            ));
        }
        Ok(out)
    }
}
