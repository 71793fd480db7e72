//! Deterministic SVG stand-ins for product photographs.
//!
//! The background takes the colour token, the glyph shape comes from the
//! category's family, and the pattern token picks an overlay. Everything that
//! depends on the colour is expressed through `fill` attributes, so two
//! products that differ only in colour produce documents that differ only
//! there.

use std::fmt::Write as _;

use mmdialog_core::catalog::{Product, Vocabulary, COLOR, PATTERN};
use mmdialog_core::numerics::fnv1a64;

pub const WIDTH: u32 = 200;
pub const HEIGHT: u32 = 240;

const NAMED_COLORS: &[(&str, (u8, u8, u8))] = &[
    ("red", (0xd3, 0x2f, 0x2f)),
    ("blue", (0x19, 0x76, 0xd2)),
    ("black", (0x21, 0x21, 0x21)),
    ("white", (0xfa, 0xfa, 0xfa)),
    ("green", (0x38, 0x8e, 0x3c)),
    ("yellow", (0xfb, 0xc0, 0x2d)),
    ("pink", (0xf4, 0x8f, 0xb1)),
    ("grey", (0x9e, 0x9e, 0x9e)),
    ("brown", (0x6d, 0x4c, 0x41)),
    ("navy", (0x1a, 0x23, 0x7e)),
    ("sky blue", (0x87, 0xce, 0xeb)),
    ("peach", (0xff, 0xcc, 0xbc)),
    ("violet", (0x8e, 0x24, 0xaa)),
    ("orange", (0xf5, 0x7c, 0x00)),
    ("maroon", (0x80, 0x00, 0x00)),
    ("beige", (0xf5, 0xf5, 0xdc)),
    ("olive", (0x80, 0x80, 0x00)),
    ("purple", (0x6a, 0x1b, 0x9a)),
    ("teal", (0x00, 0x80, 0x80)),
    ("gold", (0xd4, 0xaf, 0x37)),
    ("silver", (0xc0, 0xc0, 0xc0)),
    ("cream", (0xff, 0xfd, 0xd0)),
    ("khaki", (0xc3, 0xb0, 0x91)),
    ("magenta", (0xff, 0x00, 0xff)),
    ("turquoise", (0x40, 0xe0, 0xd0)),
    ("lavender", (0xb5, 0x7e, 0xdc)),
    ("coral", (0xff, 0x7f, 0x50)),
    ("mustard", (0xff, 0xdb, 0x58)),
    ("rust", (0xb7, 0x41, 0x0e)),
    ("charcoal", (0x36, 0x45, 0x4f)),
    ("tan", (0xd2, 0xb4, 0x8c)),
    ("burgundy", (0x80, 0x00, 0x20)),
    ("mint", (0x98, 0xff, 0x98)),
    ("lime", (0xcd, 0xdc, 0x39)),
    ("off white", (0xf8, 0xf4, 0xe8)),
    ("copper", (0xb8, 0x73, 0x33)),
    ("bronze", (0xcd, 0x7f, 0x32)),
    ("fuchsia", (0xc2, 0x18, 0x5b)),
    ("indigo", (0x3f, 0x51, 0xb5)),
    ("aqua", (0x00, 0xbc, 0xd4)),
    ("nude", (0xe3, 0xbc, 0x9a)),
    ("taupe", (0x48, 0x3c, 0x32)),
    ("mauve", (0xe0, 0xb0, 0xff)),
    ("wine", (0x72, 0x2f, 0x37)),
    ("sea green", (0x2e, 0x8b, 0x57)),
    ("steel blue", (0x46, 0x82, 0xb4)),
];

type Rgb = (u8, u8, u8);

/// Display colour of a colour token; unknown tokens get a hashed hue.
pub fn color_rgb(token: &str) -> Rgb {
    if let Some(&(_, rgb)) = NAMED_COLORS.iter().find(|(n, _)| *n == token) {
        return rgb;
    }
    hsl_to_rgb((fnv1a64(token.as_bytes()) % 360) as f64, 0.55, 0.55)
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> Rgb {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    (to(r), to(g), to(b))
}

fn hex((r, g, b): Rgb) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn luminance((r, g, b): Rgb) -> f64 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
}

/// Glyph and caption colour that stays readable on `bg`.
fn contrast(bg: Rgb) -> Rgb {
    if luminance(bg) > 0.55 {
        (0x26, 0x26, 0x26)
    } else {
        (0xf5, 0xf5, 0xf5)
    }
}

pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn glyph_path(family: Option<&str>) -> &'static str {
    match family {
        Some("footwear") => "M30 150 L30 110 Q60 100 80 80 L110 80 Q115 115 170 128 Q178 140 170 150 Z",
        Some("topwear") => {
            "M70 50 L100 62 L130 50 L170 80 L155 105 L140 95 L140 170 L60 170 L60 95 L45 105 L30 80 Z"
        }
        Some("bottomwear") => "M65 45 L135 45 L145 180 L110 180 L100 90 L90 180 L55 180 Z",
        _ => "M60 80 Q60 50 100 50 Q140 50 140 80 L160 80 L150 175 L50 175 L40 80 Z",
    }
}

fn pattern_overlay(pattern: &str, out: &mut String) {
    let open = r##"<g class="pattern" fill="#000000" fill-opacity="0.16" stroke="#000000" stroke-opacity="0.16">"##;
    let body = match pattern {
        "solid" | "" => return,
        "striped" => (0..10)
            .map(|i| format!(r#"<rect x="0" y="{}" width="{WIDTH}" height="6"/>"#, i * 24))
            .collect(),
        "checkered" => {
            let mut s = String::new();
            for r in 0..12 {
                for c in 0..10 {
                    if (r + c) % 2 == 0 {
                        let _ = write!(s, r#"<rect x="{}" y="{}" width="20" height="20"/>"#, c * 20, r * 20);
                    }
                }
            }
            s
        }
        "polka dots" => {
            let mut s = String::new();
            for r in 0..8 {
                for c in 0..7 {
                    let _ = write!(s, r#"<circle cx="{}" cy="{}" r="5"/>"#, 14 + c * 28 + (r % 2) * 14, 14 + r * 30);
                }
            }
            s
        }
        _ => {
            // Other patterns get a hashed arrangement of diamonds.
            let h = fnv1a64(pattern.as_bytes());
            let step = 24 + (h % 4) as u32 * 6;
            let size = 4 + (h >> 8) % 6;
            let mut s = String::new();
            let mut y = step / 2;
            while y < HEIGHT {
                let mut x = (y / step % 2) * step / 2;
                while x < WIDTH {
                    let _ = write!(
                        s,
                        r#"<path d="M{x} {} L{} {y} L{x} {} L{} {y} Z"/>"#,
                        y as u64 - size,
                        x as u64 + size,
                        y as u64 + size,
                        x as u64 - size.min(x as u64),
                    );
                    x += step;
                }
                y += step;
            }
            s
        }
    };
    out.push_str(open);
    out.push_str(&body);
    out.push_str("</g>");
}

/// Caption lines: the id, then the category, then every non-colour attribute.
fn caption_lines(product: &Product) -> Vec<String> {
    let mut lines = vec![product.id.clone(), format!("{} {}", product.gender, product.category)];
    let attrs: Vec<&str> = product
        .attrs
        .iter()
        .filter(|(a, _)| a.as_str() != COLOR)
        .map(|(_, v)| v.as_str())
        .collect();
    for chunk in attrs.chunks(3) {
        lines.push(chunk.join(" · "));
    }
    lines
}

pub fn render_product_svg(product: &Product, vocab: &Vocabulary) -> String {
    let bg = product.value(COLOR).map(color_rgb).unwrap_or((0xe0, 0xe0, 0xe0));
    let fg = contrast(bg);
    let family = vocab.family(&product.category);
    let mut s = String::with_capacity(2048);
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = write!(s, "<title>{}</title>", escape_xml(&product.id));
    let _ = write!(s, r#"<rect class="background" x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="{}"/>"#, hex(bg));
    pattern_overlay(product.value(PATTERN).unwrap_or(""), &mut s);
    let _ = write!(
        s,
        r##"<path class="glyph" d="{}" fill="{}" fill-opacity="0.85" stroke="#555555" stroke-width="1.5"/>"##,
        glyph_path(family),
        hex(fg)
    );
    let lines = caption_lines(product);
    let top = HEIGHT - 8 - 12 * (lines.len() as u32 - 1);
    let _ = write!(
        s,
        r#"<g class="caption" font-family="sans-serif" font-size="10" text-anchor="middle" fill="{}">"#,
        hex(fg)
    );
    for (i, line) in lines.iter().enumerate() {
        let _ = write!(s, r#"<text x="{}" y="{}">{}</text>"#, WIDTH / 2, top + 12 * i as u32, escape_xml(line));
    }
    s.push_str("</g></svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmdialog_core::catalog::{build_vocabulary, generate_catalog, CatalogConfig, VocabConfig};
    use mmdialog_core::numerics::SeededRng;

    fn fixture() -> (Vocabulary, Vec<Product>) {
        let v = build_vocabulary(&VocabConfig::full(), &mut SeededRng::new(1, 0)).unwrap();
        let ps = generate_catalog(&v, &CatalogConfig { products: 200, family: None }, &mut SeededRng::new(2, 0))
            .unwrap();
        (v, ps)
    }

    #[test]
    fn deterministic_and_well_formed() {
        let (v, ps) = fixture();
        for p in &ps {
            let a = render_product_svg(p, &v);
            assert_eq!(a, render_product_svg(p, &v));
            let doc = roxmltree::Document::parse(&a).unwrap_or_else(|e| panic!("{}: {e}\n{a}", p.id));
            assert_eq!(doc.root_element().tag_name().name(), "svg");
            let text: String = doc.descendants().filter(|n| n.is_text()).map(|n| n.text().unwrap()).collect();
            assert!(text.contains(&p.id));
            assert!(text.contains(&p.category));
        }
    }

    #[test]
    fn markup_in_tokens_is_escaped() {
        let (v, mut ps) = fixture();
        ps[0].id = "P<&\"'>".into();
        let svg = render_product_svg(&ps[0], &v);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        assert!(doc.descendants().any(|n| n.text() == Some("P<&\"'>")));
    }

    #[test]
    fn color_change_touches_only_fills() {
        let (v, ps) = fixture();
        let p = ps.iter().find(|p| p.attrs.contains_key(COLOR)).unwrap();
        let colors = v.values(COLOR).unwrap();
        let other = colors.iter().find(|c| Some(c.as_str()) != p.value(COLOR)).unwrap();
        let mut q = p.clone();
        q.attrs.insert(COLOR.into(), other.clone());
        let (a, b) = (render_product_svg(p, &v), render_product_svg(&q, &v));
        assert_ne!(a, b);
        let (da, db) = (roxmltree::Document::parse(&a).unwrap(), roxmltree::Document::parse(&b).unwrap());
        let (na, nb): (Vec<_>, Vec<_>) = (da.descendants().collect(), db.descendants().collect());
        assert_eq!(na.len(), nb.len());
        for (x, y) in na.iter().zip(&nb) {
            assert_eq!(x.tag_name(), y.tag_name());
            assert_eq!(x.text(), y.text());
            let ax: Vec<_> = x.attributes().map(|a| (a.name(), a.value())).collect();
            let ay: Vec<_> = y.attributes().map(|a| (a.name(), a.value())).collect();
            assert_eq!(ax.len(), ay.len());
            for ((n1, v1), (n2, v2)) in ax.iter().zip(&ay) {
                assert_eq!(n1, n2);
                if v1 != v2 {
                    assert_eq!(*n1, "fill", "{n1} changed: {v1} vs {v2}");
                }
            }
        }
    }

    #[test]
    fn every_vocabulary_color_is_named() {
        let (v, _) = fixture();
        for c in v.values(COLOR).unwrap() {
            assert!(NAMED_COLORS.iter().any(|(n, _)| n == c), "{c}");
        }
        assert_eq!(color_rgb("not a colour"), color_rgb("not a colour"));
    }
}
