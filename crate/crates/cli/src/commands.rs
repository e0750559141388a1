use std::ffi::OsString;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use texmesh_core::features::{attach_elevation, attach_normals, ElevationParams, NormalKind};
use texmesh_core::geometry::{class_area, total_area};
use texmesh_core::labels::{confusion, face_logits, metrics, predict_faces};
use texmesh_core::mesh_io::{
    load_logits, load_mesh, load_point_cloud, load_subsets, write_face_labels, write_point_cloud,
    write_subsets,
};
use texmesh_core::sampling::{
    grid_subsample, poisson_disk_sample, texel_sample, GridParams, PoissonParams, TexelParams,
};
use texmesh_core::subsets::{
    draw_training_subsets, merge_tile_logits, tile_for_inference, SubsetParams,
};
use texmesh_core::{Alignment, ColorLookup, MeshOptions, PointCloud, TexturedMesh};

use crate::manifest::Manifest;
use crate::{
    BackprojectArgs, MeshArgs, Method, Mode, Normals, SampleArgs, StatsArgs, SubsetsArgs,
    UsageError,
};

fn load(path: &Path, args: &MeshArgs) -> Result<TexturedMesh> {
    let opts = MeshOptions {
        label_property: args.label_property.clone(),
        class_count: args.class_count,
    };
    load_mesh(path, &opts).with_context(|| format!("loading mesh {}", path.display()))
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn check_sample_flags(a: &SampleArgs) -> Result<()> {
    match a.method {
        Method::Texel => {
            if a.radius.is_some() || a.oversample.is_some() {
                return Err(usage("--radius and --oversample apply to --method poisson"));
            }
        }
        Method::Poisson => {
            if a.scale.is_some() {
                return Err(usage("--scale applies to --method texel"));
            }
            if a.radius.is_none() {
                return Err(usage("--method poisson needs --radius"));
            }
        }
    }
    if a.no_elevation && (a.elevation_radius.is_some() || a.elevation_cell.is_some()) {
        return Err(usage(
            "--no-elevation conflicts with --elevation-radius/--elevation-cell",
        ));
    }
    Ok(())
}

fn summarize(cloud: &PointCloud, mesh: &TexturedMesh) {
    let n = cloud.len() as f64;
    let area = total_area(mesh);
    let footprint = mesh.footprint_area();
    println!("points: {}", cloud.len());
    if area > 0.0 {
        println!("density: {:.3} pts/m2 of surface", n / area);
    }
    if footprint > 0.0 {
        println!("density: {:.3} pts/m2 of footprint", n / footprint);
    }
    let mut channels = vec!["xyz"];
    if cloud.colors.is_some() {
        channels.push("rgb");
    }
    if cloud.normals.is_some() {
        channels.push("normal");
    }
    if cloud.elevations.is_some() {
        channels.push("elevation");
    }
    channels.push("face_index");
    if cloud.labels.is_some() {
        channels.push("label");
    }
    println!("channels: {}", channels.join(" "));
}

pub fn sample(a: &SampleArgs, argv: &[OsString]) -> Result<()> {
    let start = Instant::now();
    check_sample_flags(a)?;
    let mesh = load(&a.input, &a.mesh)?;
    let color = if a.bilinear {
        ColorLookup::Bilinear
    } else {
        ColorLookup::Nearest
    };
    let mut params: Vec<(&'static str, String)> =
        vec![("method", format!("{:?}", a.method).to_lowercase())];

    let mut cloud = match a.method {
        Method::Texel => {
            if mesh.textures.is_empty() {
                return Err(usage(format!(
                    "{} has no texture; texel sampling needs one",
                    a.input.display()
                )));
            }
            let scale = a.scale.unwrap_or(1.0);
            params.push(("scale", scale.to_string()));
            let out = texel_sample(&mesh, &TexelParams { scale, color })?;
            let r = &out.report;
            if r.untextured_faces + r.degenerate_faces + r.degenerate_uv_faces > 0 {
                eprintln!(
                    "skipped {} untextured and {} degenerate faces; {} faces with collapsed UVs sampled once",
                    r.untextured_faces, r.degenerate_faces, r.degenerate_uv_faces
                );
            }
            out.cloud
        }
        Method::Poisson => {
            let mut p = PoissonParams::new(a.radius.unwrap_or_default(), a.seed);
            if let Some(o) = a.oversample {
                p.oversample = o;
            }
            p.color = color;
            params.push(("radius", p.radius.to_string()));
            params.push(("oversample", p.oversample.to_string()));
            let out = poisson_disk_sample(&mesh, &p)?;
            println!(
                "candidates: {}, kept: {}",
                out.candidates.len(),
                out.kept.len()
            );
            out.cloud
        }
    };

    match a.normals {
        Normals::None => {}
        Normals::Face | Normals::Interp => {
            let kind = if a.normals == Normals::Face {
                NormalKind::Face
            } else {
                NormalKind::Interpolated
            };
            let report = attach_normals(&mut cloud, &mesh, kind)?;
            if report.fallback_points > 0 {
                eprintln!("{} points took a fallback normal", report.fallback_points);
            }
        }
    }
    params.push(("normals", format!("{:?}", a.normals).to_lowercase()));
    if !a.no_elevation {
        let defaults = ElevationParams::default();
        let p = ElevationParams {
            radius: a.elevation_radius.unwrap_or(defaults.radius),
            cell: a.elevation_cell.unwrap_or(defaults.cell),
        };
        attach_elevation(&mut cloud, &p)?;
        params.push(("elevation_radius", p.radius.to_string()));
        params.push(("elevation_cell", p.cell.to_string()));
    }
    if let Some(step) = a.subsample_grid {
        let before = cloud.len();
        cloud = grid_subsample(&cloud, &GridParams { step, seed: a.seed })?;
        println!("grid {step}: {before} -> {} points", cloud.len());
        params.push(("subsample_grid", step.to_string()));
    }
    if a.no_color {
        cloud.colors = None;
    }
    params.push((
        "color",
        if a.no_color {
            "none"
        } else if a.bilinear {
            "bilinear"
        } else {
            "nearest"
        }
        .into(),
    ));

    write_point_cloud(&cloud, &a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    summarize(&cloud, &mesh);
    Manifest {
        command: "sample",
        seed: Some(a.seed),
        inputs: vec![&a.input],
        output: &a.output,
        params,
        argv,
    }
    .write(start.elapsed())?;
    Ok(())
}

pub fn subsets(a: &SubsetsArgs, argv: &[OsString]) -> Result<()> {
    let start = Instant::now();
    let cloud = load_point_cloud(&a.input)
        .with_context(|| format!("loading cloud {}", a.input.display()))?;
    let mut params = vec![
        ("k", a.k.to_string()),
        ("mode", format!("{:?}", a.mode).to_lowercase()),
    ];
    let list = match a.mode {
        Mode::Train => {
            if cloud.labels.is_none() {
                return Err(usage(format!(
                    "{} has no labels; train mode needs them",
                    a.input.display()
                )));
            }
            let p = SubsetParams {
                k: a.k,
                n_subsets: a.n,
                seed: a.seed,
            };
            params.push(("n", a.n.to_string()));
            let draw = draw_training_subsets(&cloud, &p)?;
            print_balance(&draw.center_labels);
            if draw.padded > 0 {
                eprintln!(
                    "{} subsets padded: cloud has fewer than {} points",
                    draw.padded, a.k
                );
            }
            draw.subsets
        }
        Mode::Tile => {
            let tiles = tile_for_inference(&cloud, a.k)?;
            println!(
                "tiles: {} of {} points over {} points",
                tiles.len(),
                a.k,
                cloud.len()
            );
            tiles
        }
    };
    write_subsets(&list, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    Manifest {
        command: "subsets",
        seed: (a.mode == Mode::Train).then_some(a.seed),
        inputs: vec![&a.input],
        output: &a.output,
        params,
        argv,
    }
    .write(start.elapsed())?;
    Ok(())
}

/// Center-class histogram and its chi-square statistic against a uniform
/// distribution over the classes drawn.
fn print_balance(labels: &[i32]) {
    let max = labels.iter().copied().max().unwrap_or(0).max(0) as usize;
    let mut counts = vec![0u64; max + 1];
    for &l in labels {
        counts[l as usize] += 1;
    }
    let present: Vec<(usize, u64)> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c))
        .collect();
    let expected = labels.len() as f64 / present.len() as f64;
    let chi2: f64 = present
        .iter()
        .map(|&(_, c)| (c as f64 - expected).powi(2) / expected)
        .sum();
    for (class, c) in &present {
        println!("class {class}: {c} centers");
    }
    println!(
        "chi2 vs uniform: {chi2:.3} ({} degrees of freedom)",
        present.len().saturating_sub(1)
    );
}

pub fn backproject(a: &BackprojectArgs, argv: &[OsString]) -> Result<()> {
    let start = Instant::now();
    if a.report.is_some() && !a.gt {
        return Err(usage("--report needs --gt"));
    }
    let mesh = load(&a.mesh_path, &a.mesh)?;
    let cloud = load_point_cloud(&a.cloud)
        .with_context(|| format!("loading cloud {}", a.cloud.display()))?;
    let tiles =
        load_subsets(&a.tiles).with_context(|| format!("loading tiles {}", a.tiles.display()))?;
    let blocks =
        load_logits(&a.logits).with_context(|| format!("loading logits {}", a.logits.display()))?;
    if blocks.alignment() != Alignment::Point {
        return Err(usage(format!(
            "{} holds per-face logits; expected per-tile point blocks",
            a.logits.display()
        )));
    }
    if a.gt && blocks.class_count() != mesh.class_count as usize {
        return Err(usage(format!(
            "logits have {} classes, mesh has {}",
            blocks.class_count(),
            mesh.class_count
        )));
    }
    let offset = (cloud.origin - mesh.origin).norm();
    if offset > 1e-3 {
        eprintln!("warning: cloud and mesh origins differ by {offset:.3} m");
    }

    let merged = merge_tile_logits(&tiles, &blocks, cloud.len()).with_context(|| {
        format!(
            "merging {} tiles against {} points",
            tiles.len(),
            cloud.len()
        )
    })?;
    let per_face = face_logits(&cloud, &merged, &mesh)?;
    if !per_face.fallback_faces.is_empty() {
        eprintln!(
            "{} faces had no sample and took the nearest one",
            per_face.fallback_faces.len()
        );
    }
    let pred = predict_faces(&per_face.table);
    write_face_labels(&mesh, &pred, &a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!("faces labeled: {}", pred.len());

    let mut params = vec![("gt", a.gt.to_string())];
    if a.gt {
        let m = metrics(&confusion(&pred, &mesh)?)?;
        print!("{}", m.to_text());
        if let Some(path) = &a.report {
            std::fs::write(path, m.to_key_values())
                .with_context(|| format!("writing {}", path.display()))?;
            params.push(("report", path.display().to_string()));
        }
    }
    Manifest {
        command: "backproject",
        seed: None,
        inputs: vec![&a.mesh_path, &a.cloud, &a.tiles, &a.logits],
        output: &a.output,
        params,
        argv,
    }
    .write(start.elapsed())?;
    Ok(())
}

pub fn stats(a: &StatsArgs) -> Result<()> {
    let mesh = load(&a.input, &a.mesh)?;
    println!("vertices: {}", mesh.vertices.len());
    println!("faces: {}", mesh.faces.len());
    println!("textures: {}", mesh.textures.len());
    let textured = mesh.faces.iter().filter(|f| f.texture.is_some()).count();
    println!("textured faces: {textured}");
    let total = total_area(&mesh);
    println!("surface: {total:.3} m2");
    println!("footprint: {:.3} m2", mesh.footprint_area());
    let areas = class_area(&mesh);
    let sum: f64 = areas.iter().sum();
    if sum > 0.0 {
        for (c, area) in areas.iter().enumerate() {
            println!("class {c}: {area:.3} m2 ({:.2}%)", 100.0 * area / sum);
        }
    }
    Ok(())
}
