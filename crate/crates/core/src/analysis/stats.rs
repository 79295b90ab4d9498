//! Path-gain distribution statistics and a 1-vs-2 component mixture test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HIST_MIN_DB: f64 = -160.0;
pub const HIST_MAX_DB: f64 = 0.0;
const EM_MAX_ITER: usize = 1000;
const EM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean_db: f64,
    pub max_db: f64,
    /// Population standard deviation.
    pub std_db: f64,
    pub finite: usize,
}

/// Mean, max and std over the finite values; `None` when there are none.
pub fn sample_stats(values: &[f32]) -> Option<SampleStats> {
    let finite: Vec<f64> = values.iter().filter(|v| v.is_finite()).map(|&v| v as f64).collect();
    if finite.is_empty() {
        return None;
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let max = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let var = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some(SampleStats {
        mean_db: mean.min(max),
        max_db: max,
        std_db: var.sqrt(),
        finite: finite.len(),
    })
}

/// Fixed-width histogram with under/overflow counters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub bin_width: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(min: f64, max: f64, bin_width: f64) -> Self {
        let bins = ((max - min) / bin_width).round() as usize;
        Histogram {
            min,
            max,
            bin_width,
            counts: vec![0; bins],
            underflow: 0,
            overflow: 0,
        }
    }

    /// 1 dB bins over [-160, 0] dB.
    pub fn db() -> Self {
        Histogram::new(HIST_MIN_DB, HIST_MAX_DB, 1.0)
    }

    /// Bins are half-open `[lo, lo + w)`; the top edge falls in the last bin.
    pub fn add(&mut self, x: f64) {
        if !x.is_finite() {
            return;
        }
        if x < self.min {
            self.underflow += 1;
        } else if x > self.max {
            self.overflow += 1;
        } else {
            let k = (((x - self.min) / self.bin_width) as usize).min(self.counts.len() - 1);
            self.counts[k] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }

    /// CSV rows `bin_lo,bin_hi,count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_lo,bin_hi,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            let lo = self.min + k as f64 * self.bin_width;
            s.push_str(&format!("{lo},{},{c}\n", lo + self.bin_width));
        }
        s
    }
}

/// One-dimensional Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gmm {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    /// `-2 ln L + (3k - 1) ln n`.
    pub bic: f64,
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + (x - mean).powi(2) / var)
}

fn log_sum_exp(a: &[f64]) -> f64 {
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + a.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// EM fit with `k` components. Components start at evenly spaced quantiles
/// with the pooled variance, so the fit is deterministic.
pub fn fit_gmm(data: &[f64], k: usize) -> Result<Gmm> {
    let n = data.len();
    if k == 0 || n < 2 || n < k {
        return Err(Error::EmptyInput(format!("cannot fit {k} components to {n} values")));
    }
    let nf = n as f64;
    let mean = data.iter().sum::<f64>() / nf;
    let var = data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    if !(var > 0.0) {
        return Err(Error::Undefined("mixture fit of constant data".into()));
    }
    let floor = var * 1e-6;
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut weights = vec![1.0 / k as f64; k];
    let mut means: Vec<f64> = (0..k)
        .map(|j| sorted[(((j as f64 + 0.5) / k as f64) * nf) as usize])
        .collect();
    let mut vars = vec![var; k];
    let mut resp = vec![0.0; n * k];
    let mut ll = f64::NEG_INFINITY;
    let mut terms = vec![0.0; k];
    for _ in 0..EM_MAX_ITER {
        let mut new_ll = 0.0;
        for (i, &x) in data.iter().enumerate() {
            for j in 0..k {
                terms[j] = weights[j].ln() + log_normal(x, means[j], vars[j]);
            }
            let lse = log_sum_exp(&terms);
            new_ll += lse;
            for j in 0..k {
                resp[i * k + j] = (terms[j] - lse).exp();
            }
        }
        for j in 0..k {
            let nj: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nj <= 0.0 {
                continue;
            }
            let mj = (0..n).map(|i| resp[i * k + j] * data[i]).sum::<f64>() / nj;
            let vj = (0..n).map(|i| resp[i * k + j] * (data[i] - mj).powi(2)).sum::<f64>() / nj;
            weights[j] = nj / nf;
            means[j] = mj;
            vars[j] = vj.max(floor);
        }
        let done = (new_ll - ll).abs() < EM_TOL * new_ll.abs().max(1.0);
        ll = new_ll;
        if done {
            break;
        }
    }
    // Log-likelihood of the final parameters.
    ll = data
        .iter()
        .map(|&x| {
            for j in 0..k {
                terms[j] = weights[j].ln() + log_normal(x, means[j], vars[j]);
            }
            log_sum_exp(&terms)
        })
        .sum();
    let p = (3 * k - 1) as f64;
    Ok(Gmm {
        weights,
        means,
        variances: vars,
        log_likelihood: ll,
        bic: -2.0 * ll + p * nf.ln(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bimodality {
    pub one: Gmm,
    pub two: Gmm,
}

impl Bimodality {
    pub fn is_bimodal(&self) -> bool {
        self.two.bic < self.one.bic
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainStats {
    /// Per input map; `None` when the map had no finite pixel.
    pub samples: Vec<Option<SampleStats>>,
    pub skipped: usize,
    pub mean_hist: Histogram,
    pub max_hist: Histogram,
    /// Over [0, 160] dB since a spread is non-negative.
    pub std_hist: Histogram,
    /// All finite pixel values of all maps.
    pub pixel_hist: Histogram,
    /// Mixture comparison on the per-sample maxima; `None` with fewer than
    /// two usable samples or identical maxima.
    pub bimodality: Option<Bimodality>,
}

/// Campaign statistics over path-gain rasters in dB.
pub fn gain_statistics(maps: &[&[f32]]) -> Result<GainStats> {
    let mut samples = Vec::with_capacity(maps.len());
    let mut mean_hist = Histogram::db();
    let mut max_hist = Histogram::db();
    let mut std_hist = Histogram::new(0.0, -HIST_MIN_DB, 1.0);
    let mut pixel_hist = Histogram::db();
    let mut skipped = 0;
    for m in maps {
        let s = sample_stats(m);
        match &s {
            Some(s) => {
                mean_hist.add(s.mean_db);
                max_hist.add(s.max_db);
                std_hist.add(s.std_db);
                for v in m.iter() {
                    pixel_hist.add(*v as f64);
                }
            }
            None => skipped += 1,
        }
        samples.push(s);
    }
    if skipped == maps.len() {
        return Err(Error::EmptyInput("no map has a finite pixel".into()));
    }
    if skipped > 0 {
        log::warn!("{skipped} maps without finite pixels skipped");
    }
    let maxima: Vec<f64> = samples.iter().flatten().map(|s| s.max_db).collect();
    let bimodality = match (fit_gmm(&maxima, 1), fit_gmm(&maxima, 2)) {
        (Ok(one), Ok(two)) => Some(Bimodality { one, two }),
        _ => None,
    };
    Ok(GainStats {
        samples,
        skipped,
        mean_hist,
        max_hist,
        std_hist,
        pixel_hist,
        bimodality,
    })
}
