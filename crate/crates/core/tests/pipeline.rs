//! Cross-module properties of the shaping pipeline on synthetic maps.

use proptest::prelude::*;
use snaketext::dataio::{
    decode_map, encode_map, format_annotations, parse_annotations_str, random_spec, synth_maps,
};
use snaketext::dataio::{Annotation, SynthKind};
use snaketext::eval::{match_image, DEFAULT_IOU};
use snaketext::geom::rasterize;
use snaketext::tsr::morph::label_components;
use snaketext::tsr::shape_text;
use snaketext::{GeometryMaps, ShapingConfig};

const KINDS: [SynthKind; 3] = [SynthKind::Straight, SynthKind::Sinusoid, SynthKind::TwoBand];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every polygon covers text pixels of exactly one text component.
    #[test]
    fn each_polygon_sits_on_one_text_component(seed in 0u64..10_000, kind in 0usize..3) {
        let out = synth_maps(&random_spec(KINDS[kind], seed), seed).unwrap();
        let (h, w) = out.maps.dims().unwrap();
        let labels = label_components(&out.maps.text, 0.5).unwrap();
        for poly in shape_text(&out.maps, &ShapingConfig::default()).unwrap() {
            let mask = rasterize(&poly, h, w);
            let mut hit: Vec<u32> = (0..h * w)
                .filter(|&k| mask.data()[k] > 0.5)
                .map(|k| labels.labels[k])
                .filter(|&l| l != 0)
                .collect();
            hit.sort_unstable();
            hit.dedup();
            prop_assert_eq!(hit.len(), 1);
        }
    }

    /// Maps survive the file format bit for bit, and polygons survive the
    /// integer annotation format well enough to still match.
    #[test]
    fn file_round_trips_preserve_detections(seed in 0u64..10_000, kind in 0usize..3) {
        let out = synth_maps(&random_spec(KINDS[kind], seed), seed).unwrap();
        let bytes = encode_map(&out.maps.to_sections()).unwrap();
        let maps = GeometryMaps::from_sections(&decode_map(&bytes).unwrap()).unwrap();
        prop_assert_eq!(&maps, &out.maps);
        let polys = shape_text(&maps, &ShapingConfig::default()).unwrap();
        let text = format_annotations(&polys.iter().cloned().map(Annotation::new).collect::<Vec<_>>());
        let reread: Vec<_> = parse_annotations_str(&text).unwrap().into_iter().map(|a| a.polygon).collect();
        let counts = match_image(&reread, &out.polygons, DEFAULT_IOU);
        prop_assert_eq!((counts.tp as usize, counts.fp, counts.fn_), (out.polygons.len(), 0, 0));
    }
}

#[test]
fn output_scale_multiplies_coordinates() {
    let maps = synth_maps(&random_spec(SynthKind::Straight, 4), 4)
        .unwrap()
        .maps;
    let base = shape_text(&maps, &ShapingConfig::default()).unwrap();
    let scaled = shape_text(
        &maps,
        &ShapingConfig {
            output_scale: 4.0,
            ..ShapingConfig::default()
        },
    )
    .unwrap();
    assert_eq!(base.len(), scaled.len());
    for (a, b) in base.iter().zip(&scaled) {
        for (p, q) in a.vertices().iter().zip(b.vertices()) {
            assert_eq!((4.0 * p.x, 4.0 * p.y), (q.x, q.y));
        }
    }
}
