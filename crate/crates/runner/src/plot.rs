//! Static SVG renderings of a run directory's CSVs.
//!
//! Output depends only on CSV content. Every input is parsed and every figure
//! built in memory before anything is written, so a bad file leaves no plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::artifacts::csv_error;
use crate::error::{Result, RunError};
use crate::output::PLOTS_DIR;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 64.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#17becf"];
const FLOOR_COLOR: &str = "#ff7f0e";

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
}

#[derive(Default)]
struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    series: Vec<Series>,
    /// Thin grey polylines drawn under the series (interpolation ribbon).
    ribbon: Vec<Vec<(f64, f64)>>,
    /// Dashed segments connecting valley floors.
    floor: Vec<((f64, f64), (f64, f64))>,
}

struct Csv {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Csv> {
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| csv_error(path, 0, e))?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(|h| h.is_empty()) {
            return Err(RunError::Csv {
                file: path.to_path_buf(),
                row: 0,
                message: "missing header".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, i + 1, e))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(RunError::Csv {
                file: path.to_path_buf(),
                row: 1,
                message: "no data rows".into(),
            });
        }
        Ok(Csv {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| RunError::Csv {
            file: self.path.clone(),
            row: 0,
            message: format!("missing column '{name}'"),
        })
    }

    /// Number in `row` (0-based data row) at column `c`; blank gives `None`.
    fn num(&self, row: usize, c: usize) -> Result<Option<f64>> {
        let text = self.rows[row][c].trim();
        if text.is_empty() {
            return Ok(None);
        }
        text.parse::<f64>().map(Some).map_err(|_| RunError::Csv {
            file: self.path.clone(),
            row: row + 1,
            message: format!("column '{}': '{text}' is not a number", self.header[c]),
        })
    }

    fn req(&self, row: usize, c: usize) -> Result<f64> {
        self.num(row, c)?.ok_or_else(|| RunError::Csv {
            file: self.path.clone(),
            row: row + 1,
            message: format!("column '{}' is blank", self.header[c]),
        })
    }

    fn text(&self, row: usize, c: usize) -> &str {
        &self.rows[row][c]
    }

    /// `(x, y)` pairs, skipping rows where `y` is blank.
    fn xy(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let (cx, cy) = (self.col(x)?, self.col(y)?);
        let mut out = Vec::new();
        for r in 0..self.rows.len() {
            if let Some(v) = self.num(r, cy)? {
                out.push((self.req(r, cx)?, v));
            }
        }
        Ok(out)
    }

    /// `(x, y)` pairs grouped by the text of column `key`, in first-seen order.
    fn grouped(&self, key: &str, x: &str, y: &str) -> Result<Vec<Series>> {
        let (ck, cx, cy) = (self.col(key)?, self.col(x)?, self.col(y)?);
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
        for r in 0..self.rows.len() {
            let k = self.text(r, ck).to_string();
            if !groups.contains_key(&k) {
                order.push(k.clone());
            }
            let entry = groups.entry(k).or_default();
            if let Some(v) = self.num(r, cy)? {
                entry.push((self.req(r, cx)?, v));
            }
        }
        Ok(order
            .into_iter()
            .map(|k| Series {
                points: groups.remove(&k).unwrap_or_default(),
                name: format!("{key} {k}"),
            })
            .collect())
    }
}

fn interp_chart(csv: &Csv) -> Result<Chart> {
    let (ct, ca, cl) = (csv.col("t")?, csv.col("alpha")?, csv.col("loss")?);
    let mut pairs: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
    for r in 0..csv.rows.len() {
        let t = csv.req(r, ct)?;
        let (a, l) = (csv.req(r, ca)?, csv.req(r, cl)?);
        match pairs.last_mut() {
            Some((last_t, pts)) if *last_t == t => {
                if a <= pts.last().unwrap().0 {
                    return Err(RunError::Csv {
                        file: csv.path.clone(),
                        row: r + 1,
                        message: "alpha must increase within a pair".into(),
                    });
                }
                pts.push((a, l));
            }
            _ => pairs.push((t, vec![(a, l)])),
        }
    }
    let mut chart = Chart {
        title: "Loss between consecutive iterates".into(),
        x_label: "iteration + alpha".into(),
        y_label: "loss".into(),
        ..Chart::default()
    };
    let mut prev: Option<(f64, f64)> = None;
    for (t, pts) in &pairs {
        if pts.len() < 3 {
            return Err(RunError::Csv {
                file: csv.path.clone(),
                row: 0,
                message: format!("pair at t = {t} has {} points, need at least 3", pts.len()),
            });
        }
        let interior = &pts[1..pts.len() - 1];
        let mut floor = interior[0];
        for p in interior {
            if p.1 < floor.1 {
                floor = *p;
            }
        }
        let floor = (t + floor.0, floor.1);
        let start = prev.unwrap_or((t + pts[0].0, pts[0].1));
        chart.floor.push((start, floor));
        prev = Some(floor);
        chart.ribbon.push(pts.iter().map(|(a, l)| (t + a, *l)).collect());
    }
    Ok(chart)
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: Vec<Series>) -> Chart {
    Chart {
        title: title.into(),
        x_label: x_label.into(),
        y_label: y_label.into(),
        series,
        ..Chart::default()
    }
}

fn single(name: &str, points: Vec<(f64, f64)>) -> Vec<Series> {
    vec![Series { name: name.into(), points }]
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-3..1e4).contains(&a) {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    } else {
        format!("{v:.2e}")
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn render(chart: &Chart) -> String {
    let all = || {
        chart
            .series
            .iter()
            .flat_map(|s| s.points.iter().copied())
            .chain(chart.ribbon.iter().flatten().copied())
    };
    let (x0, x1) = range(all().map(|p| p.0));
    let (y0, y1) = range(all().map(|p| p.1));
    let (pw, ph) = (WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph;
    let pts = |p: &[(f64, f64)]| {
        p.iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, chart.title);
    let (bx, by) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{bx},{MARGIN} V{by} H{}" fill="none" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(xv),
            by + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            bx - 6.0,
            sy(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 18.0, chart.x_label);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        chart.y_label
    );
    for r in &chart.ribbon {
        let _ = writeln!(s, r##"<polyline class="ribbon" fill="none" stroke="#9e9e9e" stroke-width="0.8" points="{}"/>"##, pts(r));
    }
    for (a, b) in &chart.floor {
        let _ = writeln!(
            s,
            r#"<line class="floor" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{FLOOR_COLOR}" stroke-width="1.5" stroke-dasharray="5 3"/>"#,
            sx(a.0),
            sy(a.1),
            sx(b.0),
            sy(b.1)
        );
    }
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="series" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts(&series.points)
        );
        if chart.series.len() > 1 {
            let y = MARGIN + 14.0 * i as f64;
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{y}" fill="{color}" text-anchor="end">{}</text>"#,
                WIDTH - MARGIN,
                series.name
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

fn figures_for(csv: &Csv, file_name: &str) -> Result<Vec<(&'static str, Chart)>> {
    Ok(match file_name {
        "interp.csv" => vec![("interp", interp_chart(csv)?)],
        "trajectory.csv" => vec![
            ("cosine", line_chart("Cosine of consecutive gradients", "iteration", "cosine", single("cosine", csv.xy("t", "cosine")?))),
            ("distance", line_chart("Distance from initialization", "iteration", "distance", single("dist_init", csv.xy("t", "dist_init")?))),
            ("lr", line_chart("Learning rate", "iteration", "lr", single("lr", csv.xy("t", "lr")?))),
        ],
        "schedules.csv" => vec![("lr-overlay", line_chart("Learning-rate schedules", "iteration", "lr", csv.grouped("schedule", "t", "lr")?))],
        "cosine.csv" => vec![(
            "cosine-smoothed",
            line_chart("Smoothed gradient cosine", "iteration", "cosine", csv.grouped("run", "t", "smoothed")?),
        )],
        "rates.csv" => vec![("rates", line_chart("GD contraction rate |1 - eta lambda|", "eta", "rate", csv.grouped("lambda", "eta", "rate")?))],
        "curvature.csv" => vec![
            ("spectral-norm", line_chart("Hessian spectral norm", "epoch", "spectral norm", single("spectral_norm", csv.xy("epoch", "spectral_norm")?))),
            ("val-accuracy", line_chart("Validation accuracy", "epoch", "accuracy", single("val_accuracy", csv.xy("epoch", "val_accuracy")?))),
        ],
        _ => Vec::new(),
    })
}

fn collect_csvs(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| RunError::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| RunError::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    for path in entries {
        if path.is_dir() {
            if path != root.join(PLOTS_DIR) {
                collect_csvs(root, &path, out)?;
            }
        } else if path.extension().is_some_and(|e| e == "csv") {
            out.push(path);
        }
    }
    Ok(())
}

/// Render every recognized CSV under `run_dir` into `run_dir/plots/`.
/// Returns the written paths.
pub fn render_plots(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut csvs = Vec::new();
    collect_csvs(run_dir, run_dir, &mut csvs)?;
    let mut rendered: Vec<(String, String)> = Vec::new();
    for path in &csvs {
        let file_name = path.file_name().unwrap().to_string_lossy().to_string();
        let rel_dir = path
            .parent()
            .unwrap()
            .strip_prefix(run_dir)
            .unwrap()
            .components()
            .map(|c| c.as_os_str().to_string_lossy().to_string())
            .collect::<Vec<_>>()
            .join("-");
        let probe = figures_for_name(&file_name);
        if !probe {
            continue;
        }
        let csv = Csv::read(path)?;
        for (kind, chart) in figures_for(&csv, &file_name)? {
            let name = if rel_dir.is_empty() { format!("{kind}.svg") } else { format!("{rel_dir}-{kind}.svg") };
            rendered.push((name, render(&chart)));
        }
    }
    if rendered.is_empty() {
        return Err(RunError::Csv {
            file: run_dir.to_path_buf(),
            row: 0,
            message: "no plottable CSV files found".into(),
        });
    }
    let plots = run_dir.join(PLOTS_DIR);
    std::fs::create_dir_all(&plots).map_err(|e| RunError::io(&plots, e))?;
    let mut written = Vec::new();
    for (name, svg) in rendered {
        let path = plots.join(name);
        std::fs::write(&path, svg).map_err(|e| RunError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

fn figures_for_name(file_name: &str) -> bool {
    matches!(
        file_name,
        "interp.csv" | "trajectory.csv" | "schedules.csv" | "cosine.csv" | "rates.csv" | "curvature.csv"
    )
}
