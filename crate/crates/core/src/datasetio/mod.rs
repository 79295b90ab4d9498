//! On-disk formats, per-sample export and the campaign driver.

mod campaign;
mod ply;
mod raster;
mod report;
mod scene;
mod validate;

pub use campaign::{
    export_sample, run_campaign, run_pipeline, CameraFile, CampaignConfig, CampaignReport, ErrorRecord, GraphFile,
    GraphNodeRecord, Manifest, SampleFiles, SampleInputs, SampleRecord, SceneRecord, Stage, TxFile, FORMAT_VERSION,
    MANIFEST,
};
pub use ply::{decode_ply, encode_ply, read_ply, write_ply, PlyMesh};
pub use raster::{
    decode_pfm, decode_pnm, encode_pfm, encode_pnm, quantize_rgb, read_pfm, read_pnm, read_raster, write_pfm, write_pnm,
    write_raster, Image8, Raster,
};
pub use report::{analyze_dataset, AnalysisReport, CorrelationRow};
pub use scene::{obj_group_counts, scene_to_obj, FootprintsFile, MaterialsFile, MaterialEntry};
pub use validate::{validate_dataset, ValidationReport};
