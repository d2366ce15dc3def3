use std::collections::BTreeMap;
use std::fmt::Write as _;

/// One drawable polyline tagged with its panel and layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    pub panel: usize,
    pub layer: String,
    pub points: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arrow {
    pub panel: usize,
    pub at: [f64; 2],
    pub delta: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Figure {
    pub titles: Vec<String>,
    pub polylines: Vec<Polyline>,
    pub arrows: Vec<Arrow>,
}

fn style(layer: &str) -> &'static str {
    match layer {
        "density" => r##"stroke="#c62828" stroke-width="1" fill="none""##,
        "levelset" => r##"stroke="#111111" stroke-width="1.2" fill="none""##,
        "potential" => r##"stroke="#9e9e9e" stroke-width="0.8" fill="none""##,
        "mfep" => r##"stroke="#6a1b9a" stroke-width="3" fill="none""##,
        "path" => r##"stroke="#ef6c00" stroke-width="2" stroke-dasharray="6 3" fill="none""##,
        _ => r##"stroke="#1565c0" stroke-width="1" fill="none""##,
    }
}

const PANEL: f64 = 400.0;
const MARGIN: f64 = 30.0;

impl Figure {
    pub fn panel_count(&self) -> usize {
        let from_lines = self.polylines.iter().map(|p| p.panel + 1).max().unwrap_or(0);
        let from_arrows = self.arrows.iter().map(|a| a.panel + 1).max().unwrap_or(0);
        from_lines.max(from_arrows).max(self.titles.len()).max(1)
    }

    fn bounds(&self, panel: usize) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut add = |p: [f64; 2]| {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        };
        for l in self.polylines.iter().filter(|l| l.panel == panel) {
            l.points.iter().for_each(|&p| add(p));
        }
        for a in self.arrows.iter().filter(|a| a.panel == panel) {
            add(a.at);
        }
        if !lo[0].is_finite() {
            return ([-1.0, -1.0], [1.0, 1.0]);
        }
        for d in 0..2 {
            if hi[d] - lo[d] < 1e-12 {
                lo[d] -= 1.0;
                hi[d] += 1.0;
            }
        }
        (lo, hi)
    }

    /// Renders all panels side by side with a shared pixel size.
    pub fn to_svg(&self) -> String {
        let n = self.panel_count();
        let width = n as f64 * (PANEL + 2.0 * MARGIN);
        let height = PANEL + 2.0 * MARGIN;
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
        )
        .unwrap();
        s.push_str(
            r##"<defs><marker id="head" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="#111"/></marker></defs>"##,
        );
        s.push('\n');
        for panel in 0..n {
            let (lo, hi) = self.bounds(panel);
            let scale = PANEL / (hi[0] - lo[0]).max(hi[1] - lo[1]);
            let ox = panel as f64 * (PANEL + 2.0 * MARGIN) + MARGIN;
            let map = |p: [f64; 2]| (ox + (p[0] - lo[0]) * scale, MARGIN + PANEL - (p[1] - lo[1]) * scale);
            writeln!(s, r#"<g id="panel-{panel}">"#).unwrap();
            writeln!(
                s,
                r##"<rect x="{ox}" y="{MARGIN}" width="{PANEL}" height="{PANEL}" fill="white" stroke="#444"/>"##
            )
            .unwrap();
            if let Some(t) = self.titles.get(panel) {
                writeln!(
                    s,
                    r#"<text x="{}" y="{}" font-size="14" font-family="sans-serif">{}</text>"#,
                    ox,
                    MARGIN - 8.0,
                    escape(t)
                )
                .unwrap();
            }
            let mut by_layer: BTreeMap<&str, Vec<&Polyline>> = BTreeMap::new();
            for l in self
                .polylines
                .iter()
                .filter(|l| l.panel == panel && l.points.len() >= 2)
            {
                by_layer.entry(l.layer.as_str()).or_default().push(l);
            }
            // draw order: background layers first
            let order = ["potential", "density", "levelset", "mfep", "path"];
            let mut layers: Vec<&str> = by_layer.keys().copied().collect();
            layers.sort_by_key(|l| order.iter().position(|o| o == l).unwrap_or(order.len()));
            for layer in layers {
                writeln!(s, r#"<g class="{}" {}>"#, escape(layer), style(layer)).unwrap();
                for l in &by_layer[layer] {
                    let pts: Vec<String> = l
                        .points
                        .iter()
                        .map(|&p| {
                            let (x, y) = map(p);
                            format!("{x:.2},{y:.2}")
                        })
                        .collect();
                    writeln!(s, r#"<polyline points="{}"/>"#, pts.join(" ")).unwrap();
                }
                s.push_str("</g>\n");
            }
            let arrows: Vec<&Arrow> = self.arrows.iter().filter(|a| a.panel == panel).collect();
            if !arrows.is_empty() {
                s.push_str(r##"<g class="arrows" stroke="#111" stroke-width="0.8" marker-end="url(#head)">"##);
                s.push('\n');
                for a in arrows {
                    let (x1, y1) = map(a.at);
                    let (x2, y2) = map([a.at[0] + a.delta[0], a.at[1] + a.delta[1]]);
                    writeln!(s, r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}"/>"#).unwrap();
                }
                s.push_str("</g>\n");
            }
            s.push_str("</g>\n");
        }
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// `panel,layer,id,x,y` rows, one per vertex.
pub fn polylines_csv(lines: &[Polyline]) -> String {
    let mut s = String::from("panel,layer,id,x,y\n");
    for (id, l) in lines.iter().enumerate() {
        for p in &l.points {
            writeln!(s, "{},{},{id},{},{}", l.panel, l.layer, p[0], p[1]).unwrap();
        }
    }
    s
}

pub fn arrows_csv(arrows: &[Arrow]) -> String {
    let mut s = String::from("panel,x,y,dx,dy\n");
    for a in arrows {
        writeln!(s, "{},{},{},{},{}", a.panel, a.at[0], a.at[1], a.delta[0], a.delta[1]).unwrap();
    }
    s
}

fn data_rows(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|(i, l)| (i + 1, l.split(',').collect()))
}

pub fn parse_polylines(text: &str) -> Result<Vec<Polyline>, String> {
    let mut out: Vec<Polyline> = Vec::new();
    let mut last_id: Option<usize> = None;
    for (line, f) in data_rows(text) {
        if f.len() != 5 {
            return Err(format!("line {line}: expected 5 fields"));
        }
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("line {line}: {e}"));
        let panel: usize = f[0].parse().map_err(|e| format!("line {line}: {e}"))?;
        let id: usize = f[2].parse().map_err(|e| format!("line {line}: {e}"))?;
        let p = [num(f[3])?, num(f[4])?];
        if last_id != Some(id) {
            out.push(Polyline {
                panel,
                layer: f[1].to_string(),
                points: Vec::new(),
            });
            last_id = Some(id);
        }
        out.last_mut().expect("pushed").points.push(p);
    }
    Ok(out)
}

pub fn parse_arrows(text: &str) -> Result<Vec<Arrow>, String> {
    data_rows(text)
        .map(|(line, f)| {
            if f.len() != 5 {
                return Err(format!("line {line}: expected 5 fields"));
            }
            let v: Result<Vec<f64>, _> = f[1..].iter().map(|v| v.parse::<f64>()).collect();
            let v = v.map_err(|e| format!("line {line}: {e}"))?;
            Ok(Arrow {
                panel: f[0].parse().map_err(|e| format!("line {line}: {e}"))?,
                at: [v[0], v[1]],
                delta: [v[2], v[3]],
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let lines = vec![
            Polyline {
                panel: 0,
                layer: "density".into(),
                points: vec![[0.0, 0.0], [1.0, 0.5]],
            },
            Polyline {
                panel: 1,
                layer: "levelset".into(),
                points: vec![[-1.0, 2.0], [0.25, 0.125], [3.0, 3.0]],
            },
        ];
        assert_eq!(
            parse_polylines(&format!("# header\n{}", polylines_csv(&lines))).unwrap(),
            lines
        );
        let arrows = vec![Arrow {
            panel: 1,
            at: [0.5, 0.5],
            delta: [-0.1, 0.2],
        }];
        assert_eq!(parse_arrows(&arrows_csv(&arrows)).unwrap(), arrows);
    }

    #[test]
    fn empty_level_sets_still_render() {
        let fig = Figure {
            titles: vec!["component 0".into(), "component 1".into()],
            polylines: vec![Polyline {
                panel: 0,
                layer: "density".into(),
                points: vec![[0.0, 0.0], [1.0, 1.0]],
            }],
            arrows: vec![],
        };
        let svg = fig.to_svg();
        assert!(svg.contains(r#"<g id="panel-0">"#) && svg.contains(r#"<g id="panel-1">"#));
        assert!(svg.contains(r#"class="density""#) && !svg.contains(r#"class="levelset""#));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn mfep_and_path_are_styled_differently() {
        let fig = Figure {
            titles: vec![],
            polylines: vec![
                Polyline {
                    panel: 0,
                    layer: "mfep".into(),
                    points: vec![[0.0, 0.0], [1.0, 1.0]],
                },
                Polyline {
                    panel: 0,
                    layer: "path".into(),
                    points: vec![[0.0, 0.1], [1.0, 1.1]],
                },
            ],
            arrows: vec![],
        };
        let svg = fig.to_svg();
        assert_ne!(style("mfep"), style("path"));
        assert!(svg.contains("#6a1b9a") && svg.contains("#ef6c00"));
    }
}
