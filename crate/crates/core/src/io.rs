//! File formats: knot files, link manifests, blades, matrices and run
//! manifests. Also resolves `gen:` input specs to built-in curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::curve::{LinkSet, PolyCurve};
use crate::error::{Error, Result};
use crate::generators;
use crate::minkowski::Blade;

/// Seventeen significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Parses a knot file. `label` names the source in error messages.
///
/// Lines starting with `#` are comments. The first other line is
/// `closed` or `open`; vertex lines `x,y,z` follow up to the first blank
/// line or the end of input.
pub fn parse_knot(text: &str, label: &str) -> Result<PolyCurve> {
    let mut closed = None;
    let mut verts = Vec::new();
    let mut header_line = 0;
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if closed.is_none() {
            if line.is_empty() {
                continue;
            }
            closed = Some(match line {
                "closed" => true,
                "open" => false,
                other => return Err(parse_err(label, line_no, format!("expected 'closed' or 'open', found '{other}'"))),
            });
            header_line = line_no;
            continue;
        }
        if line.is_empty() {
            break;
        }
        let coords: Vec<&str> = line.split(',').map(str::trim).collect();
        if coords.len() != 3 {
            return Err(parse_err(label, line_no, format!("expected 3 comma-separated coordinates, found {}", coords.len())));
        }
        let mut v = Vector3::zeros();
        for (axis, s) in coords.iter().enumerate() {
            v[axis] = s
                .parse::<f64>()
                .map_err(|e| parse_err(label, line_no, format!("bad number '{s}': {e}")))?;
            if !v[axis].is_finite() {
                return Err(parse_err(label, line_no, format!("non-finite coordinate '{s}'")));
            }
        }
        verts.push((line_no, v));
    }
    let Some(closed) = closed else {
        return Err(parse_err(label, 1, "missing 'closed'/'open' header"));
    };
    let lines: Vec<usize> = verts.iter().map(|(l, _)| *l).collect();
    PolyCurve::new(verts.into_iter().map(|(_, v)| v).collect(), closed).map_err(|e| match e {
        Error::DegenerateSegment(a, _) => parse_err(label, lines[a], e.to_string()),
        Error::TooFewVertices { .. } => parse_err(label, header_line, e.to_string()),
        other => other,
    })
}

pub fn read_knot(path: &Path) -> Result<PolyCurve> {
    let text = std::fs::read_to_string(path)?;
    parse_knot(&text, &path.display().to_string())
}

pub fn format_knot(c: &PolyCurve) -> String {
    let mut s = String::from(if c.is_closed() { "closed\n" } else { "open\n" });
    for v in c.vertices() {
        let _ = writeln!(s, "{},{},{}", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z));
    }
    s.push('\n');
    s
}

pub fn write_knot(path: &Path, c: &PolyCurve) -> Result<()> {
    std::fs::write(path, format_knot(c))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkManifest {
    /// Knot file paths, relative to the manifest's directory.
    pub components: Vec<PathBuf>,
}

pub fn read_link(path: &Path) -> Result<LinkSet> {
    let text = std::fs::read_to_string(path)?;
    let manifest: LinkManifest = serde_json::from_str(&text)
        .map_err(|e| parse_err(&path.display().to_string(), e.line(), e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let comps = manifest
        .components
        .iter()
        .map(|p| read_knot(&base.join(p)))
        .collect::<Result<Vec<_>>>()?;
    LinkSet::new(comps)
}

/// Writes each component next to the manifest as `<stem>_<k>.knot`.
pub fn write_link(path: &Path, link: &LinkSet) -> Result<Vec<PathBuf>> {
    let base = path.parent().unwrap_or(Path::new("."));
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("link");
    let mut names = Vec::new();
    let mut written = Vec::new();
    for (k, c) in link.components().iter().enumerate() {
        let name = PathBuf::from(format!("{stem}_{k}.knot"));
        write_knot(&base.join(&name), c)?;
        written.push(base.join(&name));
        names.push(name);
    }
    std::fs::write(path, serde_json::to_string_pretty(&LinkManifest { components: names })?)?;
    written.push(path.to_path_buf());
    Ok(written)
}

#[derive(Serialize, Deserialize)]
struct BladeDoc {
    q: usize,
    n: usize,
    legend: Option<Vec<Vec<usize>>>,
    coords: Vec<f64>,
}

pub fn blade_to_json(b: &Blade) -> Result<String> {
    let doc = BladeDoc {
        q: b.q,
        n: b.n,
        legend: Some(b.legend()),
        coords: b.coords.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Reads a blade; a legend, if given, must list the lexicographic
/// multi-indices.
pub fn blade_from_json(text: &str, label: &str) -> Result<Blade> {
    let doc: BladeDoc = serde_json::from_str(text).map_err(|e| parse_err(label, e.line(), e.to_string()))?;
    let b = Blade::new(doc.q, doc.n, doc.coords)?;
    if let Some(legend) = doc.legend {
        if legend != b.legend() {
            return Err(parse_err(label, 1, "legend is not the lexicographic multi-index list"));
        }
    }
    Ok(b)
}

/// Row-major CSV with a `c0,c1,...` header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let header: Vec<String> = (0..m.ncols()).map(|k| format!("c{k}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_f64(m[(r, c)])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Reads a numeric CSV whose first line is a header. Every row must have
/// the header's width.
pub fn matrix_from_csv(text: &str, label: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(label, 1, "empty matrix file"));
    };
    let width = header.split(',').count();
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, line) in lines {
        let vals: Vec<&str> = line.split(',').map(str::trim).collect();
        if vals.len() != width {
            return Err(parse_err(label, k + 1, format!("expected {width} columns, found {}", vals.len())));
        }
        for v in vals {
            data.push(v.parse::<f64>().map_err(|e| parse_err(label, k + 1, format!("bad number '{v}': {e}")))?);
        }
        rows += 1;
    }
    Ok(DMatrix::from_row_slice(rows, width, &data))
}

/// Record written next to every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: serde_json::Value,
    pub version: String,
    pub wall_time_seconds: f64,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub deterministic: bool,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| parse_err(&path.display().to_string(), e.line(), e.to_string()))
    }
}

/// A parsed `gen:name:key=value,...` spec.
#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl GenSpec {
    pub fn parse(spec: &str) -> Option<Result<GenSpec>> {
        let rest = spec.strip_prefix("gen:")?;
        let (name, args) = rest.split_once(':').unwrap_or((rest, ""));
        let mut params = BTreeMap::new();
        for kv in args.split(',').filter(|s| !s.is_empty()) {
            let Some((k, v)) = kv.split_once('=') else {
                return Some(Err(Error::InvalidParameter(format!("generator argument '{kv}' is not key=value"))));
            };
            params.insert(k.trim().to_string(), v.trim().to_string());
        }
        Some(Ok(GenSpec {
            name: name.to_string(),
            params,
        }))
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("generator {}: bad value '{v}' for {key}", self.name))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidParameter(format!("generator {} has no parameter '{k}'", self.name))),
            None => Ok(()),
        }
    }

    pub fn is_link(&self) -> bool {
        matches!(self.name.as_str(), "hopf" | "torus-link")
    }

    pub fn curve(&self) -> Result<PolyCurve> {
        let n = self.get("n", 256usize)?;
        match self.name.as_str() {
            "circle" => {
                self.check_keys(&["n", "r"])?;
                generators::circle(n, self.get("r", 1.0)?)
            }
            "ellipse" => {
                self.check_keys(&["n", "a", "b"])?;
                generators::ellipse(n, self.get("a", 2.0)?, self.get("b", 1.0)?)
            }
            "trefoil" => {
                self.check_keys(&["n"])?;
                generators::torus_knot(n, 2, 3)
            }
            "torus" => {
                self.check_keys(&["n", "p", "q"])?;
                generators::torus_knot(n, self.get("p", 2)?, self.get("q", 3)?)
            }
            "perturbed" => {
                self.check_keys(&["n", "seed", "amp"])?;
                generators::perturbed_circle(n, self.get("seed", 1)?, self.get("amp", 0.3)?)
            }
            "figure8" => {
                self.check_keys(&["n"])?;
                generators::figure_eight(n)
            }
            "clasp" => {
                self.check_keys(&["n", "gap"])?;
                generators::clasp(n, self.get("gap", 0.01)?)
            }
            other => Err(Error::InvalidParameter(format!("unknown curve generator '{other}'"))),
        }
    }

    pub fn link(&self) -> Result<LinkSet> {
        self.check_keys(&["n"])?;
        let n = self.get("n", 256usize)?;
        match self.name.as_str() {
            "hopf" => generators::hopf_link(n),
            "torus-link" => generators::torus_link_2_4(n),
            other => Err(Error::InvalidParameter(format!("unknown link generator '{other}'"))),
        }
    }
}

/// Loads a curve from a knot file path or a `gen:` spec.
pub fn load_curve(spec: &str) -> Result<PolyCurve> {
    match GenSpec::parse(spec) {
        Some(g) => g?.curve(),
        None => read_knot(Path::new(spec)),
    }
}

/// Loads a link from a manifest path or a `gen:` spec.
pub fn load_link(spec: &str) -> Result<LinkSet> {
    match GenSpec::parse(spec) {
        Some(g) => g?.link(),
        None => read_link(Path::new(spec)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn knot_round_trip_is_exact() {
        let c = generators::torus_knot(64, 2, 3).unwrap();
        let back = parse_knot(&format_knot(&c), "mem").unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "# trefoil\nclosed\n1,0,0\n0,1,0\n0,0,x\n";
        match parse_knot(text, "t.knot") {
            Err(Error::Parse { line, path, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(path, "t.knot");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_knot("loop\n", "x"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_knot("closed\n1,2\n", "x"), Err(Error::Parse { line: 2, .. })));
        let dup = "open\n0,0,0\n1,0,0\n1,0,0\n";
        assert!(matches!(parse_knot(dup, "x"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn blank_line_ends_the_vertex_list() {
        let c = parse_knot("open\n0,0,0\n1,0,0\n\ntrailing notes\n", "x").unwrap();
        assert_eq!(c.len(), 2);
        assert!(!c.is_closed());
    }

    #[test]
    fn matrix_csv_round_trip() {
        let m = DMatrix::from_fn(3, 4, |r, c| (r * 4 + c) as f64 / 7.0);
        let back = matrix_from_csv(&matrix_to_csv(&m), "m").unwrap();
        assert_eq!(back, m);
        assert!(matrix_from_csv("a,b\n1,2\n3\n", "m").is_err());
    }

    #[test]
    fn blade_json_carries_legend() {
        let b = Blade::new(1, 3, (0..10).map(|k| k as f64).collect()).unwrap();
        let s = blade_to_json(&b).unwrap();
        assert!(s.contains("legend"));
        assert_eq!(blade_from_json(&s, "b").unwrap(), b);
        let mut doc: serde_json::Value = serde_json::from_str(&s).unwrap();
        doc["legend"][0] = serde_json::json!([0, 2, 1]);
        assert!(blade_from_json(&doc.to_string(), "b").is_err());
    }

    #[test]
    fn gen_specs_resolve() {
        assert_eq!(load_curve("gen:circle:n=32,r=2").unwrap().len(), 32);
        assert_eq!(load_curve("gen:torus:p=2,q=5,n=64").unwrap().len(), 64);
        assert_eq!(load_link("gen:hopf:n=16").unwrap().len(), 2);
        assert!(load_curve("gen:circle:m=3").is_err());
        assert!(load_curve("gen:nothing").is_err());
    }

    #[test]
    fn link_manifest_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let link = generators::hopf_link(16).unwrap();
        let path = dir.path().join("hopf.json");
        write_link(&path, &link).unwrap();
        let back = read_link(&path).unwrap();
        assert_eq!(back.components(), link.components());
    }
}
