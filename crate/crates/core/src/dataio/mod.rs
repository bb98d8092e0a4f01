//! Files and fixtures: annotations, `TMAP` tensor files, PGM/PPM images and
//! the synthetic map generator.

pub mod annotation;
pub mod mapfile;
pub mod pnm;
pub mod synth;

pub use annotation::{
    format_annotations, parse_annotations, parse_annotations_bytes, parse_annotations_str,
    write_annotations, Annotation,
};
pub use mapfile::{decode_map, encode_map, read_map, write_map};
pub use pnm::{
    decode_pgm, decode_ppm, encode_pgm, encode_ppm, read_pgm, read_ppm, render_overlay, write_pgm,
    write_ppm, RgbImage,
};
pub use synth::{random_spec, synth_maps, BandSpec, Centerline, SynthKind, SynthOutput, SynthSpec};
