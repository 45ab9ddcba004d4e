//! Minimal SVG 1.1 writer with fixed number formatting so output bytes are
//! stable across runs and platforms.

use std::fmt::Write as _;

pub struct Svg {
    buf: String,
}

/// Two decimals, with negative zero printed as `0.00`.
pub fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

pub fn hex([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

pub fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

impl Svg {
    pub fn new(width: f64, height: f64) -> Self {
        let mut buf = String::new();
        let _ = writeln!(
            buf,
            r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
            w = num(width),
            h = num(height)
        );
        Self { buf }
    }

    pub fn raw(&mut self, line: &str) {
        self.buf.push_str(line);
        self.buf.push('\n');
    }

    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        let _ = writeln!(
            self.buf,
            r#"<rect x="{}" y="{}" width="{}" height="{}" {attrs}/>"#,
            num(x),
            num(y),
            num(w),
            num(h)
        );
    }

    pub fn polygon(&mut self, points: &[[f64; 2]], attrs: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|p| format!("{},{}", num(p[0]), num(p[1])))
            .collect();
        let _ = writeln!(self.buf, r#"<polygon points="{}" {attrs}/>"#, pts.join(" "));
    }

    pub fn polyline(&mut self, points: &[[f64; 2]], attrs: &str) {
        let pts: Vec<String> = points
            .iter()
            .map(|p| format!("{},{}", num(p[0]), num(p[1])))
            .collect();
        let _ = writeln!(
            self.buf,
            r#"<polyline points="{}" fill="none" {attrs}/>"#,
            pts.join(" ")
        );
    }

    pub fn path(&mut self, d: &str, attrs: &str) {
        let _ = writeln!(self.buf, r#"<path d="{d}" {attrs}/>"#);
    }

    pub fn line(&mut self, a: [f64; 2], b: [f64; 2], attrs: &str) {
        let _ = writeln!(
            self.buf,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" {attrs}/>"#,
            num(a[0]),
            num(a[1]),
            num(b[0]),
            num(b[1])
        );
    }

    pub fn circle(&mut self, c: [f64; 2], r: f64, attrs: &str) {
        let _ = writeln!(
            self.buf,
            r#"<circle cx="{}" cy="{}" r="{}" {attrs}/>"#,
            num(c[0]),
            num(c[1]),
            num(r)
        );
    }

    pub fn text(&mut self, at: [f64; 2], content: &str, attrs: &str) {
        let _ = writeln!(
            self.buf,
            r#"<text x="{}" y="{}" {attrs}>{}</text>"#,
            num(at[0]),
            num(at[1]),
            escape(content)
        );
    }

    pub fn finish(mut self) -> String {
        self.buf.push_str("</svg>\n");
        self.buf
    }
}
