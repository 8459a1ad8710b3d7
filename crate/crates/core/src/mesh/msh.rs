//! Reader and writer for the ASCII Gmsh 2.2 subset used by the plate mesh.
//!
//! Supported sections are `$MeshFormat`, `$PhysicalNames`, `$Nodes` and
//! `$Elements`; any other well-formed section is skipped. Elements may be
//! 2-node lines (type 1), whose nodes populate the boundary tag named by the
//! first (physical) tag, or 3-node triangles (type 2). The z coordinate is
//! ignored.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use super::{Mesh, Point};
use crate::error::{Error, Result};

/// Counts read from a mesh file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MshStats {
    pub declared_nodes: usize,
    pub declared_elements: usize,
    pub lines: usize,
    pub triangles: usize,
}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Parse { line, message: message.into() })
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, l) in self.inner.by_ref() {
            self.last = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.next() {
            Some(x) => Ok(x),
            None => err(self.last, format!("unexpected end of file, expected {what}")),
        }
    }

    fn expect_end(&mut self, section: &str) -> Result<()> {
        let (ln, l) = self.expect(&format!("$End{section}"))?;
        if l != format!("$End{section}") {
            return err(ln, format!("expected $End{section}, found '{l}'"));
        }
        Ok(())
    }

    fn count(&mut self, section: &str) -> Result<usize> {
        let (ln, l) = self.expect(&format!("{section} count"))?;
        l.parse().or_else(|_| err(ln, format!("invalid {section} count '{l}'")))
    }
}

fn parse_num<T: std::str::FromStr>(ln: usize, tok: Option<&str>, what: &str) -> Result<T> {
    match tok {
        Some(t) => t.parse().or_else(|_| err(ln, format!("invalid {what} '{t}'"))),
        None => err(ln, format!("missing {what}")),
    }
}

pub fn parse_mesh_file(text: &str) -> Result<Mesh> {
    parse_mesh_file_with_stats(text).map(|(m, _)| m)
}

/// Parses a mesh and also returns the declared and observed counts.
pub fn parse_mesh_file_with_stats(text: &str) -> Result<(Mesh, MshStats)> {
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let mut stats = MshStats::default();
    let mut names: HashMap<i64, String> = HashMap::new();
    let mut nodes: Vec<Point> = Vec::new();
    let mut node_index: HashMap<i64, usize> = HashMap::new();
    let mut seen_format = false;
    let mut seen_nodes = false;
    let mut raw_lines: Vec<(usize, i64, i64, [i64; 2])> = Vec::new();
    let mut raw_tris: Vec<(usize, i64, [i64; 3])> = Vec::new();

    while let Some((ln, header)) = lines.next() {
        let Some(section) = header.strip_prefix('$') else {
            return err(ln, format!("expected a section header, found '{header}'"));
        };
        match section {
            "MeshFormat" => {
                let (fl, l) = lines.expect("format line")?;
                let mut tok = l.split_whitespace();
                let version = tok.next().unwrap_or("");
                let file_type: i64 = parse_num(fl, tok.next(), "file type")?;
                if !version.starts_with("2.") {
                    return err(fl, format!("unsupported format version {version}"));
                }
                if file_type != 0 {
                    return err(fl, "only ASCII mesh files are supported");
                }
                lines.expect_end("MeshFormat")?;
                seen_format = true;
            }
            "PhysicalNames" => {
                let n = lines.count("PhysicalNames")?;
                for _ in 0..n {
                    let (pl, l) = lines.expect("physical name")?;
                    let mut tok = l.splitn(3, char::is_whitespace);
                    let _dim: i64 = parse_num(pl, tok.next(), "physical dimension")?;
                    let tag: i64 = parse_num(pl, tok.next(), "physical tag")?;
                    let rest = tok.next().unwrap_or("").trim();
                    let name = rest
                        .strip_prefix('"')
                        .and_then(|r| r.strip_suffix('"'))
                        .ok_or_else(|| Error::Parse { line: pl, message: format!("unquoted physical name '{rest}'") })?;
                    names.insert(tag, name.to_string());
                }
                lines.expect_end("PhysicalNames")?;
            }
            "Nodes" => {
                let n = lines.count("Nodes")?;
                stats.declared_nodes = n;
                for _ in 0..n {
                    let (nl, l) = lines.expect("node")?;
                    if l.starts_with('$') {
                        return err(nl, format!("node section declares {n} nodes but ends early"));
                    }
                    let mut tok = l.split_whitespace();
                    let id: i64 = parse_num(nl, tok.next(), "node id")?;
                    let x: f64 = parse_num(nl, tok.next(), "x coordinate")?;
                    let y: f64 = parse_num(nl, tok.next(), "y coordinate")?;
                    if node_index.insert(id, nodes.len()).is_some() {
                        return err(nl, format!("duplicate node id {id}"));
                    }
                    nodes.push([x, y]);
                }
                lines.expect_end("Nodes")?;
                seen_nodes = true;
            }
            "Elements" => {
                let n = lines.count("Elements")?;
                stats.declared_elements = n;
                for _ in 0..n {
                    let (el, l) = lines.expect("element")?;
                    if l.starts_with('$') {
                        return err(el, format!("element section declares {n} elements but ends early"));
                    }
                    let mut tok = l.split_whitespace();
                    let id: i64 = parse_num(el, tok.next(), "element id")?;
                    let ty: i64 = parse_num(el, tok.next(), "element type")?;
                    let ntags: usize = parse_num(el, tok.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num::<i64>(el, tok.next(), "element tag")?);
                    }
                    let physical = tags.first().copied().unwrap_or(0);
                    let node_count = match ty {
                        1 => 2,
                        2 => 3,
                        _ => return err(el, format!("element {id} has unsupported type {ty}")),
                    };
                    let mut v = [0i64; 3];
                    for slot in v.iter_mut().take(node_count) {
                        *slot = parse_num(el, tok.next(), "element node")?;
                    }
                    if tok.next().is_some() {
                        return err(el, format!("element {id} has trailing fields"));
                    }
                    if ty == 1 {
                        raw_lines.push((el, id, physical, [v[0], v[1]]));
                    } else {
                        raw_tris.push((el, id, v));
                    }
                }
                lines.expect_end("Elements")?;
            }
            other if other.starts_with("End") => {
                return err(ln, format!("unmatched section end '${other}'"));
            }
            other => {
                // skip unknown sections up to their end marker
                let end = format!("$End{other}");
                loop {
                    let (_, l) = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
        }
    }

    if !seen_format {
        return err(lines.last.max(1), "missing $MeshFormat section");
    }
    if !seen_nodes {
        return err(lines.last.max(1), "missing $Nodes section");
    }
    if raw_tris.is_empty() {
        return err(lines.last.max(1), "mesh contains no triangles");
    }

    let lookup = |ln: usize, id: i64, node: i64| -> Result<usize> {
        node_index.get(&node).copied().ok_or_else(|| Error::Parse {
            line: ln,
            message: format!("element {id} references node {node}, but only {} nodes exist", nodes.len()),
        })
    };

    let mut elements = Vec::with_capacity(raw_tris.len());
    for &(ln, id, v) in &raw_tris {
        let t = [lookup(ln, id, v[0])?, lookup(ln, id, v[1])?, lookup(ln, id, v[2])?];
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return err(ln, format!("element {id} repeats a node"));
        }
        let [a, b, c] = [nodes[t[0]], nodes[t[1]], nodes[t[2]]];
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        if !(area > 0.0) {
            return err(ln, format!("element {id} has non-positive area {area:e}"));
        }
        elements.push(t.to_vec());
    }

    let mut tags: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for &(ln, id, physical, v) in &raw_lines {
        let name = names.get(&physical).cloned().unwrap_or_else(|| physical.to_string());
        let set = tags.entry(name).or_default();
        set.insert(lookup(ln, id, v[0])?);
        set.insert(lookup(ln, id, v[1])?);
    }

    stats.lines = raw_lines.len();
    stats.triangles = raw_tris.len();
    let mesh = Mesh::new(2, nodes, elements, tags)?;
    Ok((mesh, stats))
}

/// Writes a triangle mesh. Each boundary tag becomes a physical line group
/// made of the boundary edges whose endpoints both carry the tag.
pub fn write_mesh_file<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    if mesh.dim() != 2 {
        return Err(Error::UnsupportedElement("only triangle meshes can be written".to_string()));
    }
    let io = |e: std::io::Error| Error::InvalidArgument(format!("write failed: {e}"));
    let tags: Vec<(&String, &BTreeSet<usize>)> = mesh.boundary_tags().iter().collect();
    let edges = mesh.boundary_edges();
    let mut line_elems = Vec::new();
    for (k, (_, set)) in tags.iter().enumerate() {
        for &(a, b) in &edges {
            if set.contains(&a) && set.contains(&b) {
                line_elems.push((k + 1, a, b));
            }
        }
    }
    let domain_tag = tags.len() + 1;
    let mut out = String::new();
    out.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$PhysicalNames\n");
    out.push_str(&format!("{}\n", tags.len() + 1));
    for (k, (name, _)) in tags.iter().enumerate() {
        out.push_str(&format!("1 {} \"{}\"\n", k + 1, name));
    }
    out.push_str(&format!("2 {domain_tag} \"domain\"\n$EndPhysicalNames\n$Nodes\n{}\n", mesh.num_nodes()));
    for (i, p) in mesh.nodes().iter().enumerate() {
        out.push_str(&format!("{} {:?} {:?} 0\n", i + 1, p[0], p[1]));
    }
    out.push_str(&format!("$EndNodes\n$Elements\n{}\n", line_elems.len() + mesh.num_elements()));
    let mut id = 1;
    for (tag, a, b) in line_elems {
        out.push_str(&format!("{id} 1 2 {tag} {tag} {} {}\n", a + 1, b + 1));
        id += 1;
    }
    for el in mesh.elements() {
        out.push_str(&format!("{id} 2 2 {domain_tag} {domain_tag} {} {} {}\n", el[0] + 1, el[1] + 1, el[2] + 1));
        id += 1;
    }
    out.push_str("$EndElements\n");
    w.write_all(out.as_bytes()).map_err(io)
}
