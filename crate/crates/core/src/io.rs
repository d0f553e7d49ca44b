//! On-disk formats.
//!
//! | data | format |
//! |------|--------|
//! | probability map | SDPM: `"SDPM"`, version u32, height u32, width u32 (little-endian), then `h*w` f32 LE row-major |
//! | mask | 8-bit greyscale PNG, 0 = background, 255 = wound |
//! | ground truth | CSV `image_id,xmin,ymin,xmax,ymax`; a row with empty coordinates declares an image without wounds |
//! | detections | JSON Lines, one `{"confidence","image_id","xmax","xmin","ymax","ymin"}` object per line |
//! | score samples | one float per line, `#` comments, optional `# label: <name>` |
//! | manifest | CSV `image_id,map_path,mask_path,height,width`; `mask_path` may be empty |
//!
//! Text formats are UTF-8 with LF line endings. Writers are deterministic.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::preprocess::RgbImage;
use crate::stats::SampleSet;
use crate::types::{BBox, BinaryMask, Detection, ProbMap};

pub const SDPM_MAGIC: &[u8; 4] = b"SDPM";
pub const SDPM_VERSION: u32 = 1;
pub const SDPM_HEADER_LEN: usize = 16;
/// Largest accepted pixel count (a 2^28-pixel map is a 1 GiB payload).
pub const SDPM_MAX_PIXELS: u64 = 1 << 28;

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4-byte slice"))
}

/// Decodes an SDPM payload.
pub fn decode_probmap(bytes: &[u8]) -> Result<ProbMap, FormatError> {
    if bytes.len() < 4 || &bytes[..4] != SDPM_MAGIC {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(4)]).into_owned();
        return Err(FormatError::BadMagic { found });
    }
    if bytes.len() < SDPM_HEADER_LEN {
        return Err(FormatError::Truncated {
            what: "header",
            offset: 0,
            expected: SDPM_HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = read_u32(bytes, 4);
    if version != SDPM_VERSION {
        return Err(FormatError::UnsupportedVersion { version });
    }
    let height = read_u32(bytes, 8);
    let width = read_u32(bytes, 12);
    let pixels = height as u64 * width as u64;
    if height == 0 || width == 0 || pixels > SDPM_MAX_PIXELS {
        return Err(FormatError::DimensionOverflow { height, width });
    }
    let payload_len = pixels as usize * 4;
    let payload = &bytes[SDPM_HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(FormatError::Truncated {
            what: "payload",
            offset: SDPM_HEADER_LEN,
            expected: payload_len,
            found: payload.len(),
        });
    }
    if payload.len() > payload_len {
        return Err(FormatError::TrailingBytes {
            offset: SDPM_HEADER_LEN + payload_len,
            extra: payload.len() - payload_len,
        });
    }
    let mut values = Vec::with_capacity(pixels as usize);
    for (index, chunk) in payload.chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().expect("4-byte chunk"));
        if !(0.0..=1.0).contains(&v) {
            return Err(FormatError::ValueOutOfRange {
                index,
                offset: SDPM_HEADER_LEN + 4 * index,
                value: v,
            });
        }
        values.push(v as f64);
    }
    Ok(ProbMap::new(height as usize, width as usize, values).expect("validated above"))
}

/// Encodes a map as SDPM. Values are narrowed to `f32`, so the round trip
/// is exact for maps whose values are representable in single precision.
pub fn encode_probmap(map: &ProbMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(SDPM_HEADER_LEN + 4 * map.values().len());
    out.extend_from_slice(SDPM_MAGIC);
    out.extend_from_slice(&SDPM_VERSION.to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for &v in map.values() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_probmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    Ok(decode_probmap(&fs::read(path)?)?)
}

pub fn write_probmap(map: &ProbMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_probmap(map))?;
    Ok(())
}

fn image_err(e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::Io(io),
        other => FormatError::Mask(other.to_string()).into(),
    }
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(image_err)?;
    let gray = match img {
        image::DynamicImage::ImageLuma8(g) => g,
        other => return Err(FormatError::Mask(format!("expected 8-bit greyscale, found {:?}", other.color())).into()),
    };
    let (w, h) = gray.dimensions();
    let mut values = Vec::with_capacity(gray.as_raw().len());
    for (i, &v) in gray.as_raw().iter().enumerate() {
        values.push(match v {
            0 => 0,
            255 => 1,
            other => {
                return Err(FormatError::Mask(format!(
                    "pixel {i} (x={}, y={}) has value {other}; only 0 and 255 are allowed",
                    i % w as usize,
                    i / w as usize
                ))
                .into())
            }
        });
    }
    BinaryMask::new(h as usize, w as usize, values)
}

pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let raw: Vec<u8> = mask.values().iter().map(|&v| v * 255).collect();
    let buf =
        image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw).expect("buffer matches dimensions");
    let mut out = std::io::Cursor::new(Vec::new());
    buf.write_to(&mut out, image::ImageFormat::Png).map_err(image_err)?;
    Ok(out.into_inner())
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    decode_mask_png(&fs::read(path)?)
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask_png(mask)?)?;
    Ok(())
}

pub fn read_rgb_png(path: impl AsRef<Path>) -> Result<RgbImage> {
    let img = image::open(path).map_err(image_err)?.to_rgb8();
    let (w, h) = img.dimensions();
    RgbImage::new(h as usize, w as usize, img.into_raw())
}

pub fn write_rgb_png(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.data().to_vec())
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png).map_err(image_err)
}

/// Ground-truth boxes per image. Images listed without boxes are kept so
/// that healthy images take part in evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthTable {
    images: BTreeMap<String, Vec<BBox>>,
}

impl GroundTruthTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares an image, possibly without any wound.
    pub fn add_image(&mut self, image_id: impl Into<String>) {
        self.images.entry(image_id.into()).or_default();
    }

    /// Adds a box; returns false when the identical row was already present.
    pub fn add_box(&mut self, image_id: impl Into<String>, b: BBox) -> bool {
        let boxes = self.images.entry(image_id.into()).or_default();
        if boxes.contains(&b) {
            return false;
        }
        boxes.push(b);
        boxes.sort_by_key(|b| (b.ymin(), b.xmin(), b.ymax(), b.xmax()));
        true
    }

    pub fn images(&self) -> &BTreeMap<String, Vec<BBox>> {
        &self.images
    }

    pub fn boxes(&self, image_id: &str) -> Option<&[BBox]> {
        self.images.get(image_id).map(Vec::as_slice)
    }

    pub fn total_boxes(&self) -> usize {
        self.images.values().map(Vec::len).sum()
    }

    /// Checks every box against the image sizes in `manifest`.
    pub fn check_bounds(&self, manifest: &DatasetManifest) -> Result<()> {
        for rec in &manifest.records {
            for b in self.boxes(&rec.image_id).unwrap_or(&[]) {
                if !b.fits_within(rec.height as usize, rec.width as usize) {
                    return Err(Error::param(
                        "ground_truth",
                        format!(
                            "box {b:?} of image `{}` exceeds {}x{}",
                            rec.image_id, rec.height, rec.width
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}

const GT_HEADER: [&str; 5] = ["image_id", "xmin", "ymin", "xmax", "ymax"];

fn parse_coord(field: &str, name: &str, line: usize) -> Result<u32, FormatError> {
    field
        .trim()
        .parse::<u32>()
        .map_err(|e| FormatError::line(line, format!("bad {name} `{field}`: {e}")))
}

/// Parses ground-truth CSV. Duplicate identical rows are dropped and
/// reported through the returned warnings.
pub fn parse_ground_truth(text: &str) -> Result<(GroundTruthTable, Vec<String>), FormatError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| FormatError::line(1, e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(GT_HEADER) {
        return Err(FormatError::line(
            1,
            format!("expected header `{}`", GT_HEADER.join(",")),
        ));
    }
    let mut table = GroundTruthTable::new();
    let mut warnings = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            FormatError::line(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let id = rec[0].trim();
        if id.is_empty() {
            return Err(FormatError::line(line, "empty image_id"));
        }
        if (1..5).all(|i| rec[i].trim().is_empty()) {
            table.add_image(id);
            continue;
        }
        let c: Vec<u32> = (1..5)
            .map(|i| parse_coord(&rec[i], GT_HEADER[i], line))
            .collect::<Result<_, _>>()?;
        let b = BBox::new(c[0], c[1], c[2], c[3]).map_err(|e| FormatError::line(line, e.to_string()))?;
        if !table.add_box(id, b) {
            warnings.push(format!("line {line}: duplicate row for `{id}` removed"));
        }
    }
    Ok((table, warnings))
}

pub fn format_ground_truth(table: &GroundTruthTable) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let io = "writing to memory cannot fail";
    w.write_record(GT_HEADER).expect(io);
    for (id, boxes) in &table.images {
        if boxes.is_empty() {
            w.write_record([id.as_str(), "", "", "", ""]).expect(io);
        }
        for b in boxes {
            let c = [b.xmin(), b.ymin(), b.xmax(), b.ymax()].map(|v| v.to_string());
            w.write_record([id.as_str(), &c[0], &c[1], &c[2], &c[3]]).expect(io);
        }
    }
    String::from_utf8(w.into_inner().expect(io)).expect("inputs are UTF-8")
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<(GroundTruthTable, Vec<String>)> {
    let text = fs::read_to_string(path)?;
    let (table, warnings) = parse_ground_truth(&text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok((table, warnings))
}

pub fn write_ground_truth(table: &GroundTruthTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_ground_truth(table))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionRecordRef<'a> {
    pub image_id: &'a str,
    pub detection: &'a Detection,
}

// Field order is alphabetical so the serialized objects are key-sorted.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectionLine {
    confidence: f64,
    image_id: String,
    xmax: u32,
    xmin: u32,
    ymax: u32,
    ymin: u32,
}

/// Detections of a whole dataset, kept sorted by image id and then by
/// descending confidence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionTable {
    by_image: BTreeMap<String, Vec<Detection>>,
}

impl DetectionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, image_id: impl Into<String>, det: Detection) {
        let dets = self.by_image.entry(image_id.into()).or_default();
        dets.push(det);
        dets.sort_by(Detection::rank_cmp);
    }

    pub fn extend_image(&mut self, image_id: impl Into<String>, dets: impl IntoIterator<Item = Detection>) {
        let entry = self.by_image.entry(image_id.into()).or_default();
        entry.extend(dets);
        entry.sort_by(Detection::rank_cmp);
    }

    pub fn by_image(&self) -> &BTreeMap<String, Vec<Detection>> {
        &self.by_image
    }

    pub fn len(&self) -> usize {
        self.by_image.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = DetectionRecordRef<'_>> {
        self.by_image.iter().flat_map(|(id, dets)| {
            dets.iter().map(move |d| DetectionRecordRef {
                image_id: id,
                detection: d,
            })
        })
    }
}

/// Parses JSON Lines detections. Blank lines are not allowed; records may
/// come in any order and are re-sorted.
pub fn parse_detections(text: &str) -> Result<DetectionTable, FormatError> {
    let mut table = DetectionTable::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let n = i + 1;
        let rec: DetectionLine = serde_json::from_str(line).map_err(|e| FormatError::line(n, e.to_string()))?;
        if rec.image_id.is_empty() {
            return Err(FormatError::line(n, "empty image_id"));
        }
        let b = BBox::new(rec.xmin, rec.ymin, rec.xmax, rec.ymax).map_err(|e| FormatError::line(n, e.to_string()))?;
        if !(0.0..=1.0).contains(&rec.confidence) {
            return Err(FormatError::line(
                n,
                format!("confidence {} outside [0, 1]", rec.confidence),
            ));
        }
        table.push(
            rec.image_id,
            Detection::new(b, rec.confidence).expect("validated above"),
        );
    }
    Ok(table)
}

pub fn format_detections(table: &DetectionTable) -> String {
    let mut out = String::new();
    for r in table.iter() {
        let b = r.detection.bbox;
        let line = DetectionLine {
            confidence: r.detection.confidence(),
            image_id: r.image_id.to_owned(),
            xmax: b.xmax(),
            xmin: b.xmin(),
            ymax: b.ymax(),
            ymin: b.ymin(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain struct serializes"));
        out.push('\n');
    }
    out
}

pub fn read_detections(path: impl AsRef<Path>) -> Result<DetectionTable> {
    Ok(parse_detections(&fs::read_to_string(path)?)?)
}

pub fn write_detections(table: &DetectionTable, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_detections(table))?;
    Ok(())
}

/// Parses score samples. The label comes from a `# label: <name>` comment
/// or, failing that, from `default_label`.
pub fn parse_scores(text: &str, default_label: &str) -> Result<SampleSet, FormatError> {
    let mut label = None;
    let mut scores = Vec::new();
    for (i, line) in text.split_terminator('\n').enumerate() {
        let line = line.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(l) = comment.trim().strip_prefix("label:") {
                label = Some(l.trim().to_owned());
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| FormatError::line(i + 1, format!("bad score `{line}`: {e}")))?;
        if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
            return Err(FormatError::line(i + 1, format!("score {v} outside [0, 1]")));
        }
        scores.push(v);
    }
    let label = label.unwrap_or_else(|| default_label.to_owned());
    let n = scores.len();
    SampleSet::new(label, scores).map_err(|_| {
        FormatError::line(
            text.lines().count().max(1),
            format!("need at least 2 scores, found {n}"),
        )
    })
}

pub fn format_scores(set: &SampleSet) -> String {
    let mut out = format!("# label: {}\n", set.label());
    for s in set.scores() {
        out.push_str(&format!("{s:?}\n"));
    }
    out
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<SampleSet> {
    let path = path.as_ref();
    let default = path
        .file_stem()
        .map_or("samples".into(), |s| s.to_string_lossy().into_owned());
    Ok(parse_scores(&fs::read_to_string(path)?, &default)?)
}

pub fn write_scores(set: &SampleSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_scores(set))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    pub map_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub height: u32,
    pub width: u32,
}

/// Index over a dataset of probability maps and optional masks. Relative
/// paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
}

const MANIFEST_HEADER: [&str; 5] = ["image_id", "map_path", "mask_path", "height", "width"];

pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest, FormatError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| FormatError::line(1, e.to_string()))?.clone();
    if header.iter().map(str::trim).ne(MANIFEST_HEADER) {
        return Err(FormatError::line(
            1,
            format!("expected header `{}`", MANIFEST_HEADER.join(",")),
        ));
    }
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FormatError::line(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let image_id = rec[0].trim().to_owned();
        if image_id.is_empty() {
            return Err(FormatError::line(line, "empty image_id"));
        }
        if !seen.insert(image_id.clone()) {
            return Err(FormatError::line(line, format!("duplicate image id `{image_id}`")));
        }
        let resolve = |p: &str| base.join(p.trim());
        let dim = |i: usize, name: &str| -> Result<u32, FormatError> {
            let v = parse_coord(&rec[i], name, line)?;
            if v == 0 {
                return Err(FormatError::line(line, format!("{name} must be >= 1")));
            }
            Ok(v)
        };
        records.push(ManifestRecord {
            map_path: resolve(&rec[1]),
            mask_path: (!rec[2].trim().is_empty()).then(|| resolve(&rec[2])),
            height: dim(3, "height")?,
            width: dim(4, "width")?,
            image_id,
        });
    }
    Ok(DatasetManifest { records })
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&fs::read_to_string(path)?, base)?)
}

/// Writes a manifest; paths are written as given.
pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(MANIFEST_HEADER).map_err(csv_err)?;
    for r in &manifest.records {
        let mask = r.mask_path.as_ref().map_or(String::new(), |p| p.display().to_string());
        let map = r.map_path.display().to_string();
        let (h, wd) = (r.height.to_string(), r.width.to_string());
        w.write_record([r.image_id.as_str(), &map, &mask, &h, &wd])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Ids present in `table` but absent from the ground truth.
pub fn unknown_image_ids(table: &DetectionTable, gt: &GroundTruthTable) -> BTreeSet<String> {
    table
        .by_image()
        .keys()
        .filter(|id| !gt.images().contains_key(*id))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sdpm_minimal_and_size() {
        let m = ProbMap::new(1, 1, vec![0.5]).unwrap();
        let bytes = encode_probmap(&m);
        assert_eq!(bytes.len(), 16 + 4);
        assert_eq!(decode_probmap(&bytes).unwrap(), m);
        let zeros = ProbMap::filled(3, 5, 0.0).unwrap();
        assert_eq!(encode_probmap(&zeros).len(), 16 + 4 * 15);
    }

    #[test]
    fn sdpm_rejections() {
        let good = encode_probmap(&ProbMap::filled(2, 2, 0.25).unwrap());

        let mut bad = good.clone();
        bad[..4].copy_from_slice(b"XXXX");
        let e = decode_probmap(&bad).unwrap_err();
        assert!(e.to_string().contains("bad magic"), "{e}");

        let e = decode_probmap(&good[..good.len() - 1]).unwrap_err();
        assert!(e.to_string().starts_with("truncated"), "{e}");

        let e = decode_probmap(&good[..10]).unwrap_err();
        assert!(e.to_string().starts_with("truncated"), "{e}");

        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(matches!(
            decode_probmap(&v2),
            Err(FormatError::UnsupportedVersion { version: 2 })
        ));

        let mut huge = good.clone();
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(matches!(
            decode_probmap(&huge),
            Err(FormatError::DimensionOverflow { .. })
        ));

        let mut out_of_range = good.clone();
        out_of_range[16 + 4..16 + 8].copy_from_slice(&1.5f32.to_le_bytes());
        let e = decode_probmap(&out_of_range).unwrap_err();
        assert!(
            matches!(
                e,
                FormatError::ValueOutOfRange {
                    index: 1,
                    offset: 20,
                    ..
                }
            ),
            "{e}"
        );

        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            decode_probmap(&trailing),
            Err(FormatError::TrailingBytes { extra: 1, .. })
        ));
    }

    #[test]
    fn ground_truth_rows() {
        let (t, w) = parse_ground_truth("image_id,xmin,ymin,xmax,ymax\nimg1,10,20,110,220\n").unwrap();
        assert!(w.is_empty());
        assert_eq!(t.boxes("img1").unwrap(), &[BBox::new(10, 20, 110, 220).unwrap()]);

        let e = parse_ground_truth("image_id,xmin,ymin,xmax,ymax\nimg1,1,1,2,2\nimg2,5,0,5,9\n").unwrap_err();
        assert!(e.to_string().starts_with("line 3:"), "{e}");

        let (t, _) = parse_ground_truth("image_id,xmin,ymin,xmax,ymax\n").unwrap();
        assert_eq!(t.images().len(), 0);

        let (t, w) = parse_ground_truth("image_id,xmin,ymin,xmax,ymax\na,1,1,4,4\na,1,1,4,4\nhealthy,,,,\n").unwrap();
        assert_eq!(w.len(), 1);
        assert_eq!(t.total_boxes(), 1);
        assert_eq!(t.boxes("healthy"), Some(&[][..]));

        assert!(parse_ground_truth("id,a,b,c,d\n").is_err());
        assert!(parse_ground_truth("image_id,xmin,ymin,xmax,ymax\na,1,x,4,4\n").is_err());
        assert!(parse_ground_truth("image_id,xmin,ymin,xmax,ymax\na,1,1,4\n").is_err());
    }

    #[test]
    fn detections_format() {
        let mut t = DetectionTable::new();
        t.push("b", Detection::new(BBox::new(0, 0, 2, 2).unwrap(), 0.25).unwrap());
        t.push("a", Detection::new(BBox::new(1, 1, 3, 3).unwrap(), 0.5).unwrap());
        t.push("a", Detection::new(BBox::new(4, 4, 9, 9).unwrap(), 0.75).unwrap());
        let text = format_detections(&t);
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"confidence":0.75,"image_id":"a","xmax":9,"xmin":4,"ymax":9,"ymin":4}"#
        );
        assert_eq!(parse_detections(&text).unwrap(), t);
        assert_eq!(format_detections(&DetectionTable::new()), "");
        assert!(parse_detections("").unwrap().is_empty());

        let bad = "{\"confidence\":0.5,\"image_id\":\"a\",\"xmax\":2,\"xmin\":0,\"ymax\":2,\"ymin\":0}\n\
                   {\"confidence\":1.5,\"image_id\":\"a\",\"xmax\":2,\"xmin\":0,\"ymax\":2,\"ymin\":0}\n";
        let e = parse_detections(bad).unwrap_err();
        assert!(
            e.to_string().starts_with("line 2:") && e.to_string().contains("confidence"),
            "{e}"
        );
        assert!(parse_detections("not json\n").is_err());
    }

    #[test]
    fn scores_format() {
        let s = parse_scores("# label: effnet\n0.5\n# fold 2\n0.75\n\n", "x").unwrap();
        assert_eq!(s.label(), "effnet");
        assert_eq!(s.scores(), &[0.5, 0.75]);
        assert_eq!(parse_scores(&format_scores(&s), "y").unwrap(), s);
        assert!(parse_scores("0.5\n", "x").is_err());
        assert!(parse_scores("0.5\nabc\n", "x")
            .unwrap_err()
            .to_string()
            .starts_with("line 2"));
    }

    #[test]
    fn mask_png_rejects_grey_levels() {
        let img = image::GrayImage::from_raw(2, 1, vec![0, 128]).unwrap();
        let mut bytes = std::io::Cursor::new(Vec::new());
        img.write_to(&mut bytes, image::ImageFormat::Png).unwrap();
        let e = decode_mask_png(bytes.get_ref()).unwrap_err();
        assert!(e.to_string().contains("pixel 1"), "{e}");
        assert!(decode_mask_png(b"not a png").is_err());
    }

    #[test]
    fn manifest_parsing() {
        let m = parse_manifest(
            "image_id,map_path,mask_path,height,width\na,maps/a.sdpm,,4,5\nb,maps/b.sdpm,masks/b.png,4,5\n",
            Path::new("/data"),
        )
        .unwrap();
        assert_eq!(m.records[0].map_path, Path::new("/data/maps/a.sdpm"));
        assert_eq!(m.records[0].mask_path, None);
        assert_eq!(m.records[1].mask_path.as_deref(), Some(Path::new("/data/masks/b.png")));
        assert!(parse_manifest(
            "image_id,map_path,mask_path,height,width\na,x,,4,5\na,y,,4,5\n",
            Path::new(".")
        )
        .is_err());
        assert!(parse_manifest("image_id,map_path,mask_path,height,width\na,x,,0,5\n", Path::new(".")).is_err());
    }
}
