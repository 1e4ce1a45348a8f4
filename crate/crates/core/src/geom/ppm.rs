//! Binary PPM (P6, maxval 255) for overlay output.

use std::io::{BufRead, Write};

use super::GeomError;

pub fn write_ppm(mut w: impl Write, width: u32, height: u32, rgb: &[u8]) -> Result<(), GeomError> {
    if rgb.len() != width as usize * height as usize * 3 {
        return Err(GeomError::Ppm(format!("{} bytes for a {width}x{height} RGB image", rgb.len())));
    }
    write!(w, "P6\n{width} {height}\n255\n")?;
    w.write_all(rgb)?;
    Ok(())
}

/// Returns `(width, height, rgb)`.
pub fn read_ppm(mut r: impl BufRead) -> Result<(u32, u32, Vec<u8>), GeomError> {
    let mut fields = Vec::with_capacity(4);
    let mut token = String::new();
    while fields.len() < 4 {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let c = byte[0] as char;
        if c == '#' && token.is_empty() {
            let mut comment = Vec::new();
            r.read_until(b'\n', &mut comment)?;
        } else if c.is_ascii_whitespace() {
            if !token.is_empty() {
                fields.push(std::mem::take(&mut token));
            }
        } else {
            token.push(c);
        }
    }
    if fields[0] != "P6" {
        return Err(GeomError::Ppm(format!("magic {:?}", fields[0])));
    }
    let num = |s: &str| s.parse::<u32>().map_err(|_| GeomError::Ppm(format!("bad number {s:?}")));
    let (width, height, maxval) = (num(&fields[1])?, num(&fields[2])?, num(&fields[3])?);
    if maxval != 255 {
        return Err(GeomError::Ppm(format!("maxval {maxval}")));
    }
    let mut rgb = vec![0u8; width as usize * height as usize * 3];
    r.read_exact(&mut rgb)?;
    Ok((width, height, rgb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let rgb: Vec<u8> = (0..2 * 3 * 3).map(|v| v as u8 * 13).collect();
        let mut buf = Vec::new();
        write_ppm(&mut buf, 2, 3, &rgb).unwrap();
        assert!(buf.starts_with(b"P6\n2 3\n255\n"));
        assert_eq!(read_ppm(&buf[..]).unwrap(), (2, 3, rgb));
        let commented = b"P6 # c\n1 1 255\n\x01\x02\x03";
        assert_eq!(read_ppm(&commented[..]).unwrap(), (1, 1, vec![1, 2, 3]));
        assert_eq!(write_ppm(Vec::new(), 2, 2, &[0; 3]).unwrap_err().code(), "MALFORMED_PPM");
    }
}
