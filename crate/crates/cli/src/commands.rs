use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use log::{info, warn};
use snaketext::dataio::{
    parse_annotations, random_spec, read_map, read_pgm, render_overlay, synth_maps,
    write_annotations, write_map, write_pgm, write_ppm, Annotation, BandSpec, Centerline,
    SynthKind, SynthSpec,
};
use snaketext::dsf::{BackboneStub, Dsf, DsfConfig};
use snaketext::eval::{aggregate, match_image, match_image_with_ignore};
use snaketext::tsr::compare::{random_candidates, run_fps_path, run_nms_path};
use snaketext::tsr::shape_text;
use snaketext::{GeometryMaps, Grid, ImageCounts, Point, TextPolygon};

use crate::{BenchArgs, EvalArgs, RenderArgs, ShapeArgs, SynthArgs, SynthKindArg};

pub fn shape(args: &ShapeArgs) -> Result<ExitCode> {
    let cfg = args.shaping.config();
    cfg.validate()?;
    let polys = match (&args.maps, &args.image) {
        (Some(path), None) => {
            let maps = GeometryMaps::from_sections(&read_map(path)?)
                .with_context(|| format!("{}", path.display()))?;
            shape_text(&maps, &cfg)?
        }
        (None, Some(path)) => shape_image(path, args, &cfg)?,
        _ => bail!("exactly one of --maps and --image is required"),
    };
    info!("{} polygons", polys.len());
    let anns: Vec<Annotation> = polys.into_iter().map(Annotation::new).collect();
    write_annotations(&args.out, &anns)?;
    Ok(ExitCode::SUCCESS)
}

/// Bilinear resize of an `[H, W]` image to `[side, side]` (pixel-centre
/// aligned, edges clamped).
fn resize(image: &Grid, side: usize) -> Result<Grid> {
    let (h, w) = image.dims2("resize")?;
    let sample = |y: f64, x: f64| {
        let y = y.clamp(0.0, (h - 1) as f64);
        let x = x.clamp(0.0, (w - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let top = image.at2(y0, x0) * (1.0 - fx) + image.at2(y0, x1) * fx;
        let bottom = image.at2(y1, x0) * (1.0 - fx) + image.at2(y1, x1) * fx;
        top * (1.0 - fy) + bottom * fy
    };
    let (sy, sx) = (h as f64 / side as f64, w as f64 / side as f64);
    Ok(Grid::from_fn2(side, side, |i, j| {
        sample((i as f64 + 0.5) * sy - 0.5, (j as f64 + 0.5) * sx - 0.5)
    }))
}

fn shape_image(
    path: &Path,
    args: &ShapeArgs,
    cfg: &snaketext::ShapingConfig,
) -> Result<Vec<TextPolygon>> {
    warn!("--image runs an untrained stub network; polygons are not meaningful detections");
    if args.frame == 0 || args.frame % 32 != 0 {
        bail!("--frame {} must be a positive multiple of 32", args.frame);
    }
    if args.channels == 0 {
        bail!("--channels must be positive");
    }
    let image = read_pgm(path)?;
    let (h, w) = image.dims2("image")?;
    let input = resize(&image, args.frame)?.reshape(&[1, 1, args.frame, args.frame])?;
    let feats = BackboneStub::seeded(args.channels, args.seed).forward(&input)?;
    let net = Dsf::seeded(DsfConfig::new(args.channels), args.seed)?;
    let maps = net.forward(&feats)?.maps(0)?;
    let polys = shape_text(&maps, cfg)?;
    // map pixels are 1/4 of the frame, the frame is resized from h x w
    let (kx, ky) = (
        4.0 * w as f64 / args.frame as f64,
        4.0 * h as f64 / args.frame as f64,
    );
    polys
        .iter()
        .map(|p| {
            p.map(|v| Point::new(v.x * kx, v.y * ky))
                .map_err(Into::into)
        })
        .collect()
}

fn annotation_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("{}", dir.display()))? {
        let path = entry.with_context(|| format!("{}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                names.insert(name.to_string());
            }
        }
    }
    Ok(names)
}

fn load_or_empty(path: PathBuf) -> Result<Vec<Annotation>> {
    if path.exists() {
        Ok(parse_annotations(&path)?)
    } else {
        Ok(Vec::new())
    }
}

fn eval_one(args: &EvalArgs, name: &str) -> Result<ImageCounts> {
    let preds: Vec<TextPolygon> = load_or_empty(args.pred.join(name))?
        .into_iter()
        .map(|a| a.polygon)
        .collect();
    let gts = load_or_empty(args.gt.join(name))?;
    let gt_polys: Vec<TextPolygon> = gts.iter().map(|a| a.polygon.clone()).collect();
    Ok(if args.honor_ignore {
        let flags: Vec<bool> = gts.iter().map(|a| a.ignore).collect();
        match_image_with_ignore(&preds, &gt_polys, &flags, args.iou)
    } else {
        match_image(&preds, &gt_polys, args.iou)
    })
}

pub fn eval(args: &EvalArgs) -> Result<ExitCode> {
    if !(args.iou > 0.0 && args.iou <= 1.0) {
        bail!("--iou {} must lie in (0, 1]", args.iou);
    }
    if args.jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    let mut names = annotation_names(&args.gt)?;
    names.extend(annotation_names(&args.pred)?);
    let names: Vec<String> = names.into_iter().collect();
    info!("evaluating {} images with {} jobs", names.len(), args.jobs);

    let chunk = names.len().div_ceil(args.jobs).max(1);
    let results: Vec<Result<Vec<(String, ImageCounts)>>> = std::thread::scope(|s| {
        let handles: Vec<_> = names
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|n| Ok((n.clone(), eval_one(args, n)?)))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut per_image = Vec::with_capacity(names.len());
    for r in results {
        per_image.extend(r?);
    }
    let report = aggregate(per_image);
    print!("{}", report.to_table());
    print!("{}", report.to_key_values());
    if let Some(min) = args.assert_f1 {
        if report.f1 < min {
            eprintln!("F1 {:.6} is below --assert-f1 {min}", report.f1);
            return Ok(ExitCode::from(1));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

pub fn bench(args: &BenchArgs) -> Result<ExitCode> {
    if args.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let cfg = snaketext::ShapingConfig::default();
    let set = random_candidates(args.n_candidates, cfg.rect_width, args.seed)?;
    let (mut fps_t, mut nms_t) = (Vec::new(), Vec::new());
    let (mut fps_last, mut nms_last) = (None, None);
    for t in 0..args.trials {
        let f = run_fps_path(&set, &cfg)?;
        let n = run_nms_path(&set, &cfg, args.iou)?;
        println!(
            "trial={t} fps_ms={:.3} nms_ms={:.3} fps_overlap_ops={} nms_overlap_ops={}",
            f.elapsed.as_secs_f64() * 1e3,
            n.elapsed.as_secs_f64() * 1e3,
            f.overlap_ops,
            n.overlap_ops
        );
        fps_t.push(f.elapsed);
        nms_t.push(n.elapsed);
        fps_last = Some(f);
        nms_last = Some(n);
    }
    let (f, n) = (
        fps_last.expect("trials >= 1"),
        nms_last.expect("trials >= 1"),
    );
    let (mf, mn) = (median(fps_t), median(nms_t));
    println!("candidates={}", args.n_candidates);
    println!("trials={}", args.trials);
    println!("fps_median_ms={:.3}", mf.as_secs_f64() * 1e3);
    println!("nms_median_ms={:.3}", mn.as_secs_f64() * 1e3);
    println!("fps_overlap_ops={}", f.overlap_ops);
    println!("nms_overlap_ops={}", n.overlap_ops);
    println!("fps_components={}", f.components);
    println!("nms_survivors={}", n.components);
    println!("fps_polygons={}", f.polygons);
    println!("nms_polygons={}", n.polygons);
    Ok(ExitCode::SUCCESS)
}

fn synth_spec(args: &SynthArgs) -> SynthSpec {
    let mut spec = match args.kind {
        Some(kind) => {
            let kind = match kind {
                SynthKindArg::Straight => SynthKind::Straight,
                SynthKindArg::Sinusoid => SynthKind::Sinusoid,
                SynthKindArg::TwoBand => SynthKind::TwoBand,
            };
            random_spec(kind, args.seed)
        }
        None => SynthSpec {
            height: args.height,
            width: args.width,
            bands: vec![BandSpec {
                centerline: Centerline::Sinusoid {
                    x0: args.x0,
                    x1: args.x1,
                    y0: args.y0,
                    amplitude: args.amplitude,
                    period: args.period,
                    phase: args.phase,
                },
                height_start: args.band_height,
                height_end: args.band_height_end.unwrap_or(args.band_height),
            }],
            noise_sigma: 0.0,
            gamma: 1.0,
        },
    };
    spec.noise_sigma = args.noise;
    spec.gamma = args.gamma;
    spec
}

pub fn synth(args: &SynthArgs) -> Result<ExitCode> {
    let out = synth_maps(&synth_spec(args), args.seed)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("{}", args.out.display()))?;
    write_map(args.out.join("maps.tmap"), &out.maps.to_sections())?;
    let gt: Vec<Annotation> = out.polygons.iter().cloned().map(Annotation::new).collect();
    write_annotations(args.out.join("gt.txt"), &gt)?;
    write_pgm(args.out.join("image.pgm"), &out.image)?;
    info!("wrote {} bands to {}", gt.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn render(args: &RenderArgs) -> Result<ExitCode> {
    let image = read_pgm(&args.image)?;
    let polys: Vec<TextPolygon> = parse_annotations(&args.polys)?
        .into_iter()
        .map(|a| a.polygon)
        .collect();
    write_ppm(&args.out, &render_overlay(&image, &polys)?)?;
    Ok(ExitCode::SUCCESS)
}
