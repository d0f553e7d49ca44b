#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ulcerbench_core::io::{
    write_ground_truth, write_manifest, write_mask, write_probmap, DatasetManifest, GroundTruthTable, ManifestRecord,
};
use ulcerbench_core::rng::XorShift64Star;
use ulcerbench_core::{BBox, BinaryMask, ProbMap};

pub fn ulcerbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulcerbench"))
        .args(args)
        .env_remove("ULCERBENCH_CONFIG")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub struct Dataset {
    pub manifest: PathBuf,
    pub gt: PathBuf,
    pub boxes: GroundTruthTable,
}

/// `n` square maps of side `size`: low background noise plus up to two
/// bright rectangles, each also written as a mask and a ground-truth box.
pub fn synthetic_dataset(dir: &Path, n: usize, size: usize, seed: u64) -> Dataset {
    let mut rng = XorShift64Star::new(seed);
    let mut gt = GroundTruthTable::new();
    let mut records = Vec::new();
    for i in 0..n {
        let id = format!("img{i:03}");
        let count = rng.int_inclusive(0, 2) as usize;
        let mut rects: Vec<BBox> = Vec::new();
        while rects.len() < count {
            let w = rng.int_inclusive(15, 35) as u32;
            let h = rng.int_inclusive(15, 35) as u32;
            let x = rng.int_inclusive(0, (size as u32 - w) as i64) as u32;
            let y = rng.int_inclusive(0, (size as u32 - h) as i64) as u32;
            let b = BBox::new(x, y, x + w, y + h).unwrap();
            // keep rectangles apart so each is its own region
            let apart = rects.iter().all(|r| {
                b.xmin() > r.xmax() + 1 || r.xmin() > b.xmax() + 1 || b.ymin() > r.ymax() + 1 || r.ymin() > b.ymax() + 1
            });
            if apart {
                rects.push(b);
            }
        }
        let inside = |x: usize, y: usize| rects.iter().any(|r| r.contains(x as u32, y as u32));
        let values: Vec<f64> = (0..size * size)
            .map(|k| {
                if inside(k % size, k / size) {
                    rng.uniform(0.7, 1.0)
                } else {
                    rng.uniform(0.0, 0.3)
                }
            })
            .collect();
        let map = ProbMap::new(size, size, values).unwrap();
        let mask = BinaryMask::from_fn(size, size, inside).unwrap();
        let map_name = format!("{id}.sdpm");
        let mask_name = format!("{id}.png");
        write_probmap(&map, dir.join(&map_name)).unwrap();
        write_mask(&mask, dir.join(&mask_name)).unwrap();
        gt.add_image(id.clone());
        for r in &rects {
            gt.add_box(id.clone(), *r);
        }
        records.push(ManifestRecord {
            image_id: id,
            map_path: map_name.into(),
            mask_path: Some(mask_name.into()),
            height: size as u32,
            width: size as u32,
        });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&DatasetManifest { records }, &manifest).unwrap();
    let gt_path = dir.join("gt.csv");
    write_ground_truth(&gt, &gt_path).unwrap();
    Dataset {
        manifest,
        gt: gt_path,
        boxes: gt,
    }
}
