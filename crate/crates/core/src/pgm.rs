// SPDX-License-Identifier: Apache-2.0

//! Plain (P2) PGM encoding shared by the map, mask and heatmap exporters.

use std::fmt::Write;

/// Encodes a grayscale image as ASCII PGM. `pixels` is row-major with row 0 at the top.
pub fn encode_p2(width: usize, height: usize, max_value: u16, pixels: &[u16]) -> String {
    assert_eq!(pixels.len(), width * height, "pixel buffer does not match dimensions");
    let mut out = String::with_capacity(16 + pixels.len() * 4);
    let _ = writeln!(out, "P2\n{width} {height}\n{max_value}");
    for row in pixels.chunks(width.max(1)) {
        let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}

/// Maps a row-major grid with row 0 = lowest y onto image rows (row 0 = top), scaling
/// values from `[0, 1]` to `[0, 255]`. Non-finite values become 0.
pub fn heatmap_p2(width: usize, height: usize, values: &[f64]) -> String {
    let mut pixels = Vec::with_capacity(values.len());
    for j in (0..height).rev() {
        for i in 0..width {
            let v = values[j * width + i];
            let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
            pixels.push((v * 255.0).round() as u16);
        }
    }
    encode_p2(width, height, 255, &pixels)
}

/// Tokenized P2 payload: `(width, height, max_value, pixels)` with row 0 at the top.
pub(crate) fn decode_p2(text: &str) -> Result<(usize, usize, u32, Vec<u32>), String> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    match tokens.next() {
        Some("P2") => {}
        Some(other) => return Err(format!("expected magic P2, found {other:?}")),
        None => return Err("empty file".into()),
    }
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let tok = tokens.next().ok_or_else(|| format!("missing {name}"))?;
        *slot = tok.parse().map_err(|_| format!("bad {name} {tok:?}"))?;
    }
    let pixels = tokens
        .map(|t| t.parse::<u32>().map_err(|_| format!("bad pixel value {t:?}")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((header[0], header[1], header[2] as u32, pixels))
}
