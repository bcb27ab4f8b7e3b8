//! Plain-text mesh format.
//!
//! ```text
//! meshfile 1
//! dim 2
//! nodes 4
//! 0 0.0 0.0
//! 1 1.0 0.0
//! 2 0.0 1.0
//! 3 1.0 1.0
//! elements 1
//! quad 1 0 1 2 3
//! facets 1
//! bottom 0 1
//! ```
//!
//! Node lines are `id x y [z]` with ids covering `0..n` in any order.
//! Element lines are `kind order node...` with kind `quad`, `simplex` or
//! `hex`. Facet lines are `tag node...`. `#` starts a comment.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fe::ElementKind;
use crate::mesh::{Element, Facet, Mesh};

const MAGIC: &str = "meshfile";
const VERSION: u32 = 1;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next non-blank line split into words, with its 1-based number.
    fn next_words(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("");
            let words: Vec<&str> = content.split_whitespace().collect();
            if !words.is_empty() {
                self.last = i + 1;
                return Some((i + 1, words));
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        self.next_words().ok_or_else(|| Error::Parse {
            line: self.last + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn header(&mut self, key: &str) -> Result<(usize, usize)> {
        let (line, words) = self.expect(key)?;
        if words.len() != 2 || words[0] != key {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{key} <count>`"),
            });
        }
        Ok((line, parse_num(line, words[1], key)?))
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, word: &str, what: &str) -> Result<T> {
    word.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} `{word}`"),
    })
}

pub fn parse_mesh(text: &str) -> Result<Mesh> {
    let mut lines = Lines::new(text);
    let (line, words) = lines.expect("header")?;
    if words.first() != Some(&MAGIC) {
        return Err(Error::Parse {
            line,
            msg: format!("missing `{MAGIC}` header"),
        });
    }
    let version: u32 = match words.get(1) {
        Some(w) => parse_num(line, w, "version")?,
        None => {
            return Err(Error::Parse {
                line,
                msg: "missing format version".into(),
            })
        }
    };
    if version != VERSION {
        return Err(Error::Parse {
            line,
            msg: format!("unsupported format version {version}"),
        });
    }
    let (line, dim) = lines.header("dim")?;
    if !(2..=3).contains(&dim) {
        return Err(Error::Parse {
            line,
            msg: format!("dimension must be 2 or 3, got {dim}"),
        });
    }

    let (_, n_nodes) = lines.header("nodes")?;
    let mut nodes: Vec<Option<[f64; 3]>> = vec![None; n_nodes];
    for _ in 0..n_nodes {
        let (line, words) = lines.expect("node line")?;
        if words.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                msg: format!("node line needs an id and {dim} coordinates"),
            });
        }
        let id: usize = parse_num(line, words[0], "node id")?;
        let slot = nodes.get_mut(id).ok_or_else(|| Error::Parse {
            line,
            msg: format!("node id {id} out of range 0..{n_nodes}"),
        })?;
        if slot.is_some() {
            return Err(Error::Parse {
                line,
                msg: format!("duplicate node id {id}"),
            });
        }
        let mut x = [0.0f64; 3];
        for k in 0..dim {
            x[k] = parse_num(line, words[k + 1], "coordinate")?;
            if !x[k].is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: "non-finite coordinate".into(),
                });
            }
        }
        *slot = Some(x);
    }
    let nodes: Vec<[f64; 3]> = nodes.into_iter().map(|n| n.expect("all ids seen")).collect();

    let (_, n_elements) = lines.header("elements")?;
    let mut elements = Vec::with_capacity(n_elements);
    for _ in 0..n_elements {
        let (line, words) = lines.expect("element line")?;
        if words.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "element line needs kind, order and nodes".into(),
            });
        }
        let kind = ElementKind::parse(words[0]).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown element kind `{}`", words[0]),
        })?;
        let order: usize = parse_num(line, words[1], "order")?;
        let ids = words[2..]
            .iter()
            .map(|w| parse_num(line, w, "node index"))
            .collect::<Result<Vec<usize>>>()?;
        elements.push(Element { kind, order, nodes: ids });
    }

    let (_, n_facets) = lines.header("facets")?;
    let mut facets = Vec::with_capacity(n_facets);
    for _ in 0..n_facets {
        let (line, words) = lines.expect("facet line")?;
        if words.len() < 2 {
            return Err(Error::Parse {
                line,
                msg: "facet line needs a tag and nodes".into(),
            });
        }
        let ids = words[1..]
            .iter()
            .map(|w| parse_num(line, w, "node index"))
            .collect::<Result<Vec<usize>>>()?;
        facets.push(Facet {
            tag: words[0].to_string(),
            nodes: ids,
        });
    }
    if let Some((line, _)) = lines.next_words() {
        return Err(Error::Parse {
            line,
            msg: "trailing content after facets".into(),
        });
    }
    Mesh::new(dim, nodes, elements, facets)
}

pub fn read_mesh(path: &Path) -> Result<Mesh> {
    parse_mesh(&std::fs::read_to_string(path)?)
}

pub fn format_mesh(mesh: &Mesh) -> String {
    let mut out = String::new();
    let d = mesh.dim();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "dim {d}");
    let _ = writeln!(out, "nodes {}", mesh.n_nodes());
    for (i, x) in mesh.nodes().iter().enumerate() {
        let coords: Vec<String> = x[..d].iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(out, "{i} {}", coords.join(" "));
    }
    let _ = writeln!(out, "elements {}", mesh.elements().len());
    for el in mesh.elements() {
        let ids: Vec<String> = el.nodes.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{} {} {}", el.kind, el.order, ids.join(" "));
    }
    let _ = writeln!(out, "facets {}", mesh.facets().len());
    for f in mesh.facets() {
        let ids: Vec<String> = f.nodes.iter().map(usize::to_string).collect();
        let _ = writeln!(out, "{} {}", f.tag, ids.join(" "));
    }
    out
}

pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<()> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}
