//! Plain-text grid format.
//!
//! A record is a header of `key = value` lines, a `---` separator, and one
//! sample per line in row-major order (x fastest). Reals are written in the
//! shortest form that parses back to the same bits. Nested payloads (sampled
//! exteriors, custom set exteriors) follow after a `--- exterior` line.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::graph::{axis_count, CoarseSamples, ExteriorSpec, GraphFunction, Plane};
use super::indicator::{IndicatorGrid, SetExterior};
use crate::error::{Error, Result};

const MAGIC: &str = "# nlms-grid v1";

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

fn write_plane(out: &mut String, prefix: &str, p: &Plane) {
    let _ = writeln!(out, "{prefix}.slope = {}", join(&p.slope));
    let _ = writeln!(out, "{prefix}.offset = {:?}", p.offset);
}

pub fn graph_to_string(g: &GraphFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "kind = graph");
    let _ = writeln!(out, "dim = {}", g.dim());
    let _ = writeln!(out, "radius = {:?}", g.radius());
    let _ = writeln!(out, "spacing = {:?}", g.spacing());
    let nested = match g.exterior() {
        ExteriorSpec::Zero => {
            let _ = writeln!(out, "exterior = zero");
            None
        }
        ExteriorSpec::Plane(p) => {
            let _ = writeln!(out, "exterior = plane");
            write_plane(&mut out, "exterior", p);
            None
        }
        ExteriorSpec::Samples(c) | ExteriorSpec::ObstacleContinuation(c) => {
            let tag = if matches!(g.exterior(), ExteriorSpec::Samples(_)) {
                "samples"
            } else {
                "obstacle-continuation"
            };
            let _ = writeln!(out, "exterior = {tag}");
            let _ = writeln!(out, "exterior.radius = {:?}", c.radius);
            let _ = writeln!(out, "exterior.spacing = {:?}", c.spacing);
            if let Some(p) = &c.tail {
                write_plane(&mut out, "exterior.tail", p);
            }
            Some(&c.values)
        }
    };
    let _ = writeln!(out, "samples = {}", g.len());
    let _ = writeln!(out, "---");
    for v in g.values() {
        let _ = writeln!(out, "{v:?}");
    }
    if let Some(values) = nested {
        let _ = writeln!(out, "--- exterior");
        for v in values {
            let _ = writeln!(out, "{v:?}");
        }
    }
    out
}

pub fn indicator_to_string(e: &IndicatorGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "kind = set");
    let _ = writeln!(out, "dim = {}", e.dim());
    let _ = writeln!(out, "lower = {}", join(e.lower()));
    let counts: Vec<String> = e.counts().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "counts = {}", counts.join(" "));
    let _ = writeln!(out, "spacing = {:?}", e.spacing());
    let nested = match e.exterior() {
        SetExterior::HalfSpace { normal, offset } => {
            let _ = writeln!(out, "exterior = half-space");
            let _ = writeln!(out, "exterior.normal = {}", join(normal));
            let _ = writeln!(out, "exterior.offset = {offset:?}");
            None
        }
        SetExterior::Complement => {
            let _ = writeln!(out, "exterior = complement");
            None
        }
        SetExterior::Full => {
            let _ = writeln!(out, "exterior = full");
            None
        }
        SetExterior::Custom(g) => {
            let _ = writeln!(out, "exterior = custom");
            Some(g)
        }
    };
    let _ = writeln!(out, "samples = {}", e.len());
    let _ = writeln!(out, "---");
    for v in e.cells() {
        let _ = writeln!(out, "{v:?}");
    }
    if let Some(g) = nested {
        let _ = writeln!(out, "--- exterior");
        out.push_str(&indicator_to_string(g));
    }
    out
}

struct Record<'a> {
    header: BTreeMap<String, String>,
    lines: &'a [(usize, &'a str)],
    cursor: usize,
}

impl<'a> Record<'a> {
    fn parse(lines: &'a [(usize, &'a str)]) -> Result<Self> {
        let mut header = BTreeMap::new();
        let mut cursor = 0;
        match lines.first() {
            Some((_, l)) if l.trim() == MAGIC => cursor += 1,
            Some((n, _)) => return Err(Error::Parse { line: *n, msg: "missing grid magic line".into() }),
            None => return Err(Error::Parse { line: 0, msg: "empty record".into() }),
        }
        loop {
            let (n, line) = lines
                .get(cursor)
                .ok_or(Error::Parse { line: 0, msg: "missing '---' separator".into() })?;
            cursor += 1;
            let t = line.trim();
            if t == "---" {
                break;
            }
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (k, v) = t
                .split_once('=')
                .ok_or(Error::Parse { line: *n, msg: format!("expected key = value, got {t:?}") })?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { header, lines, cursor })
    }

    fn get(&self, key: &str) -> Result<&str> {
        self.header
            .get(key)
            .map(String::as_str)
            .ok_or(Error::Parse { line: 0, msg: format!("missing header key {key:?}") })
    }

    fn real(&self, key: &str) -> Result<f64> {
        parse_real(self.get(key)?, 0)
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>> {
        self.get(key)?.split_whitespace().map(|t| parse_real(t, 0)).collect()
    }

    fn usize(&self, key: &str) -> Result<usize> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Parse { line: 0, msg: format!("bad integer for {key}") })
    }

    fn take_values(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (n, line) = self
                .lines
                .get(self.cursor)
                .ok_or(Error::Parse { line: 0, msg: format!("expected {count} values, found {}", out.len()) })?;
            self.cursor += 1;
            out.push(parse_real(line.trim(), *n)?);
        }
        Ok(out)
    }

    fn expect_nested(&mut self) -> Result<()> {
        match self.lines.get(self.cursor) {
            Some((_, l)) if l.trim() == "--- exterior" => {
                self.cursor += 1;
                Ok(())
            }
            Some((n, _)) => Err(Error::Parse { line: *n, msg: "expected '--- exterior'".into() }),
            None => Err(Error::Parse { line: 0, msg: "missing exterior payload".into() }),
        }
    }
}

fn parse_real(t: &str, line: usize) -> Result<f64> {
    t.parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("bad real {t:?}") })
}

fn numbered(text: &str) -> Vec<(usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect()
}

pub fn graph_from_str(text: &str) -> Result<GraphFunction> {
    let lines = numbered(text);
    let mut rec = Record::parse(&lines)?;
    if rec.get("kind")? != "graph" {
        return Err(Error::Parse { line: 0, msg: "record is not a graph".into() });
    }
    let dim = rec.usize("dim")?;
    let radius = rec.real("radius")?;
    let spacing = rec.real("spacing")?;
    let samples = rec.usize("samples")?;
    let plane = |rec: &Record, prefix: &str| -> Result<Plane> {
        Ok(Plane {
            slope: rec.reals(&format!("{prefix}.slope"))?,
            offset: rec.real(&format!("{prefix}.offset"))?,
        })
    };
    let kind = rec.get("exterior")?.to_string();
    let values = rec.take_values(samples)?;
    let exterior = match kind.as_str() {
        "zero" => ExteriorSpec::Zero,
        "plane" => ExteriorSpec::Plane(plane(&rec, "exterior")?),
        "samples" | "obstacle-continuation" => {
            let r = rec.real("exterior.radius")?;
            let h = rec.real("exterior.spacing")?;
            let tail = if rec.header.contains_key("exterior.tail.slope") {
                Some(plane(&rec, "exterior.tail")?)
            } else {
                None
            };
            rec.expect_nested()?;
            let n = axis_count(r, h).pow(dim as u32);
            let c = CoarseSamples { radius: r, spacing: h, values: rec.take_values(n)?, tail };
            if kind == "samples" {
                ExteriorSpec::Samples(c)
            } else {
                ExteriorSpec::ObstacleContinuation(c)
            }
        }
        other => return Err(Error::Parse { line: 0, msg: format!("unknown exterior kind {other:?}") }),
    };
    GraphFunction::new(dim, radius, spacing, values, exterior)
}

fn indicator_from_lines(lines: &[(usize, &str)]) -> Result<(IndicatorGrid, usize)> {
    let mut rec = Record::parse(lines)?;
    if rec.get("kind")? != "set" {
        return Err(Error::Parse { line: 0, msg: "record is not a set".into() });
    }
    let dim = rec.usize("dim")?;
    let lower = rec.reals("lower")?;
    let counts: Vec<usize> = rec
        .get("counts")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse { line: 0, msg: "bad count".into() }))
        .collect::<Result<_>>()?;
    let spacing = rec.real("spacing")?;
    let samples = rec.usize("samples")?;
    let kind = rec.get("exterior")?.to_string();
    let cells = rec.take_values(samples)?;
    let exterior = match kind.as_str() {
        "half-space" => SetExterior::HalfSpace {
            normal: rec.reals("exterior.normal")?,
            offset: rec.real("exterior.offset")?,
        },
        "complement" => SetExterior::Complement,
        "full" => SetExterior::Full,
        "custom" => {
            rec.expect_nested()?;
            let (inner, used) = indicator_from_lines(&lines[rec.cursor..])?;
            rec.cursor += used;
            SetExterior::Custom(Box::new(inner))
        }
        other => return Err(Error::Parse { line: 0, msg: format!("unknown exterior kind {other:?}") }),
    };
    let grid = IndicatorGrid::new(dim, &lower, &counts, spacing, cells, exterior)?;
    Ok((grid, rec.cursor))
}

pub fn indicator_from_str(text: &str) -> Result<IndicatorGrid> {
    let lines = numbered(text);
    Ok(indicator_from_lines(&lines)?.0)
}

pub fn write_graph(path: &Path, g: &GraphFunction) -> Result<()> {
    std::fs::write(path, graph_to_string(g)).map_err(|e| Error::io(path, e))
}

pub fn read_graph(path: &Path) -> Result<GraphFunction> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    graph_from_str(&text)
}

pub fn write_indicator(path: &Path, e: &IndicatorGrid) -> Result<()> {
    std::fs::write(path, indicator_to_string(e)).map_err(|e2| Error::io(path, e2))
}

pub fn read_indicator(path: &Path) -> Result<IndicatorGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    indicator_from_str(&text)
}
