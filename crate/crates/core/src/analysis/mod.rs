//! Statistical validation suite over simulated radio maps.

mod correlation;
mod metrics;
mod stats;

pub use correlation::{concept_mask, point_biserial, summarize, Concept, Summary};
pub use metrics::{image_metrics, ssim, ImageMetrics};
pub use stats::{fit_gmm, gain_statistics, sample_stats, Bimodality, GainStats, Gmm, Histogram, SampleStats};
