//! ASCII PLY point files, CSV point input and per-point region tags.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use facecloud_core::geometry::Region;
use facecloud_core::{PointCloud, Vec3};

use crate::error::{AppError, AppResult};

/// Renders `cloud` as ASCII PLY with `double` x, y, z. `comments` become
/// header comment lines.
pub fn to_ply_string(cloud: &PointCloud, comments: &[String]) -> String {
    let mut s = String::with_capacity(32 * cloud.len() + 128);
    s.push_str("ply\nformat ascii 1.0\n");
    for c in comments {
        writeln!(s, "comment {c}").unwrap();
    }
    writeln!(s, "element vertex {}", cloud.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud.points() {
        writeln!(s, "{} {} {}", p.x, p.y, p.z).unwrap();
    }
    s
}

pub fn write_ply(path: &Path, cloud: &PointCloud, comments: &[String]) -> AppResult<()> {
    fs::write(path, to_ply_string(cloud, comments)).map_err(|e| AppError::io(path, e))
}

/// Parses ASCII PLY. Only the `vertex` element is read; its `x`, `y` and `z`
/// properties may sit anywhere among other scalar properties.
pub fn parse_ply(text: &str) -> Result<Vec<Vec3>, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err("missing `ply` magic".into());
    }
    // (name, count, property names) per element, in file order.
    let mut elements: Vec<(String, usize, Vec<String>)> = Vec::new();
    let mut ascii = false;
    loop {
        let line = lines.next().ok_or("header has no end_header")?.trim();
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => ascii = tok.next() == Some("ascii"),
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or("element without name")?;
                let n = tok.next().and_then(|t| t.parse().ok()).ok_or("element without count")?;
                elements.push((name.to_string(), n, Vec::new()));
            }
            Some("property") => {
                let el = elements.last_mut().ok_or("property before element")?;
                let rest: Vec<&str> = tok.collect();
                if rest.first() == Some(&"list") {
                    if el.0 == "vertex" {
                        return Err("list properties on vertices are not supported".into());
                    }
                    el.2.push(String::new());
                } else {
                    el.2.push(rest.last().ok_or("property without name")?.to_string());
                }
            }
            Some("end_header") => break,
            Some(other) => return Err(format!("unknown header keyword `{other}`")),
        }
    }
    if !ascii {
        return Err("only `format ascii 1.0` is supported".into());
    }
    let mut out = Vec::new();
    for (name, n, props) in &elements {
        if name != "vertex" {
            // Elements after the vertices do not matter.
            if out.is_empty() {
                lines.by_ref().take(*n).for_each(drop);
                continue;
            }
            break;
        }
        let col = |axis: &str| props.iter().position(|p| p == axis).ok_or(format!("vertex has no `{axis}`"));
        let (cx, cy, cz) = (col("x")?, col("y")?, col("z")?);
        out.reserve(*n);
        for i in 0..*n {
            let line = lines.next().ok_or(format!("expected {n} vertices, found {i}"))?;
            let vals: Vec<&str> = line.split_whitespace().collect();
            if vals.len() != props.len() {
                return Err(format!("vertex {i}: expected {} values, found {}", props.len(), vals.len()));
            }
            let get = |c: usize| vals[c].parse::<f64>().map_err(|e| format!("vertex {i}: {e}"));
            out.push(Vec3::new(get(cx)?, get(cy)?, get(cz)?));
        }
    }
    Ok(out)
}

/// Parses `x,y,z` lines. Blank lines, `#` comments and a non-numeric first
/// line are skipped.
pub fn parse_csv(text: &str) -> Result<Vec<Vec3>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(|t| t.trim().parse::<f64>()).collect();
        match vals {
            Ok(v) if v.len() == 3 => out.push(Vec3::new(v[0], v[1], v[2])),
            Ok(v) => return Err(format!("line {}: expected 3 values, found {}", i + 1, v.len())),
            Err(_) if out.is_empty() => {}
            Err(e) => return Err(format!("line {}: {e}", i + 1)),
        }
    }
    Ok(out)
}

/// Reads a `.ply` or `.csv` point file.
pub fn read_points(path: &Path) -> AppResult<Vec<Vec3>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let pts = if is_csv { parse_csv(&text) } else { parse_ply(&text) };
    pts.map_err(|m| AppError::parse(path, m))
}

pub fn read_cloud(path: &Path) -> AppResult<PointCloud> {
    PointCloud::new(read_points(path)?).map_err(|e| AppError::parse(path, e))
}

fn tag_name(r: Region) -> &'static str {
    match r {
        Region::Face => "face",
        Region::Skull => "skull",
        Region::Neck => "neck",
    }
}

pub fn tags_to_string(tags: &[Region]) -> String {
    let mut s = String::with_capacity(6 * tags.len());
    for &t in tags {
        s.push_str(tag_name(t));
        s.push('\n');
    }
    s
}

pub fn write_tags(path: &Path, tags: &[Region]) -> AppResult<()> {
    fs::write(path, tags_to_string(tags)).map_err(|e| AppError::io(path, e))
}

pub fn read_tags(path: &Path) -> AppResult<Vec<Region>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| match l.trim() {
            "face" => Ok(Region::Face),
            "skull" => Ok(Region::Skull),
            "neck" => Ok(Region::Neck),
            other => Err(AppError::parse(path, format!("unknown tag `{other}`"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ply_round_trip_is_exact() {
        let pts = vec![Vec3::new(0.1, -2.5e-7, 3.0), Vec3::new(1.0 / 3.0, 1e300, -0.0)];
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let text = to_ply_string(&cloud, &["config abc".into()]);
        let back = parse_ply(&text).unwrap();
        for (a, b) in pts.iter().zip(&back) {
            assert_eq!(a.to_array().map(f64::to_bits), b.to_array().map(f64::to_bits));
        }
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\nelement vertex 2\nproperty float nx\nproperty float x\n\
                    property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\n\
                    end_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n";
        assert_eq!(parse_ply(text).unwrap(), vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn ply_rejects_binary_and_short_bodies() {
        let bin = "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
        assert!(parse_ply(bin).is_err());
        let short = "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n\
                     property double z\nend_header\n1 2 3\n";
        assert!(parse_ply(short).unwrap_err().contains("found 1"));
    }

    #[test]
    fn csv_with_header_and_comments() {
        let text = "x,y,z\n# scan 4\n1,2,3\n\n-1.5, 0, 2e1\n";
        assert_eq!(parse_csv(text).unwrap(), vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.5, 0.0, 20.0)]);
        assert!(parse_csv("1,2\n").is_err());
        assert!(parse_csv("1,2,3\n1,a,3\n").is_err());
    }

    #[test]
    fn tags_round_trip() {
        let tags = [Region::Face, Region::Neck, Region::Skull, Region::Face];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.tags");
        write_tags(&p, &tags).unwrap();
        assert_eq!(read_tags(&p).unwrap(), tags);
    }
}
