use std::fs;
use std::path::Path;

use facecloud_core::raster::BinaryImage;

use crate::error::{AppError, AppResult};

/// Binary P5 (8-bit, set = 255). Row 0 is written first.
pub fn to_pgm(img: &BinaryImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.pixels().iter().map(|&b| if b { 255u8 } else { 0 }));
    out
}

pub fn write_pgm(path: &Path, img: &BinaryImage) -> AppResult<()> {
    fs::write(path, to_pgm(img)).map_err(|e| AppError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_body() {
        let img = BinaryImage::from_fn(8, 9, |c, r| c == r).unwrap();
        let bytes = to_pgm(&img);
        let header = b"P5\n8 9\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        let body = &bytes[header.len()..];
        assert_eq!(body.len(), 72);
        assert_eq!(&body[..10], &[255, 0, 0, 0, 0, 0, 0, 0, 0, 255]);
    }
}
