//! Tab-separated output with a fixed numeric format.

use fockforge_core::linalg::C64;

/// Significant digits of every number written.
pub const DIGITS: usize = 12;

/// `d.ddddddddddde±x`, with negative zero written as zero.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{:.*e}", DIGITS - 1, x)
}

pub fn occupation(occ: &[u32]) -> String {
    if occ.is_empty() {
        return "-".into();
    }
    occ.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

/// Accumulates sections of rows; `#` lines open a section.
#[derive(Default)]
pub struct Tsv {
    buf: String,
}

impl Tsv {
    pub fn new() -> Self {
        Tsv::default()
    }

    pub fn section(&mut self, name: &str, header: &[&str]) {
        self.buf.push_str("# ");
        self.buf.push_str(name);
        self.buf.push('\n');
        self.row(header.iter().map(|s| s.to_string()));
    }

    pub fn row<I, S>(&mut self, cells: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for c in cells {
            if !first {
                self.buf.push('\t');
            }
            first = false;
            self.buf.push_str(c.as_ref());
        }
        self.buf.push('\n');
    }

    pub fn kv(&mut self, key: &str, value: f64) {
        self.row([key.to_string(), num(value)]);
    }

    pub fn kv_text(&mut self, key: &str, value: impl AsRef<str>) {
        self.row([key, value.as_ref()]);
    }

    pub fn complex_row(&mut self, lead: &[String], z: C64) {
        self.row(lead.iter().cloned().chain([num(z.re), num(z.im)]));
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.0), "0.00000000000e0");
        assert_eq!(num(2.0f64.sqrt() * 1e-7), "1.41421356237e-7");
        assert_eq!(num(f64::NAN), "nan");
    }
}
