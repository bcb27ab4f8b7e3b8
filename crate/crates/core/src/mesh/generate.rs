//! Structured generators for the built-in case geometries.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fe::ElementKind;
use crate::mesh::{Element, Facet, Mesh};

/// Side tags of a logical square, in the order bottom (t=0), right (s=1),
/// top (t=1), left (s=0).
pub const SIDES: [&str; 4] = ["bottom", "right", "top", "left"];

/// `nx` by `ny` quadrilaterals of the given order on the image of the unit
/// square under `map`. Nodes are numbered row by row, `s` fastest.
pub fn structured_quad(
    nx: usize,
    ny: usize,
    order: usize,
    map: impl Fn(f64, f64) -> [f64; 2],
) -> Result<Mesh> {
    structured_quad_tagged(nx, ny, order, map, SIDES)
}

pub fn structured_quad_tagged(
    nx: usize,
    ny: usize,
    order: usize,
    map: impl Fn(f64, f64) -> [f64; 2],
    tags: [&str; 4],
) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Config("grid needs at least one element per direction".into()));
    }
    let p = order;
    let (mx, my) = (p * nx + 1, p * ny + 1);
    let id = |i: usize, j: usize| i + mx * j;
    let mut nodes = Vec::with_capacity(mx * my);
    for j in 0..my {
        for i in 0..mx {
            let x = map(i as f64 / (mx - 1) as f64, j as f64 / (my - 1) as f64);
            nodes.push([x[0], x[1], 0.0]);
        }
    }
    let mut elements = Vec::with_capacity(nx * ny);
    for ey in 0..ny {
        for ex in 0..nx {
            let mut conn = Vec::with_capacity((p + 1) * (p + 1));
            for b in 0..=p {
                for a in 0..=p {
                    conn.push(id(ex * p + a, ey * p + b));
                }
            }
            elements.push(Element {
                kind: ElementKind::Quadrilateral,
                order: p,
                nodes: conn,
            });
        }
    }
    let mut facets = Vec::new();
    for ex in 0..nx {
        facets.push(Facet {
            tag: tags[0].into(),
            nodes: (0..=p).map(|a| id(ex * p + a, 0)).collect(),
        });
    }
    for ey in 0..ny {
        facets.push(Facet {
            tag: tags[1].into(),
            nodes: (0..=p).map(|b| id(mx - 1, ey * p + b)).collect(),
        });
    }
    for ex in 0..nx {
        facets.push(Facet {
            tag: tags[2].into(),
            nodes: (0..=p).map(|a| id(ex * p + a, my - 1)).collect(),
        });
    }
    for ey in 0..ny {
        facets.push(Facet {
            tag: tags[3].into(),
            nodes: (0..=p).map(|b| id(0, ey * p + b)).collect(),
        });
    }
    Mesh::new(2, nodes, elements, facets)
}

pub fn unit_square(n: usize, order: usize) -> Result<Mesh> {
    structured_quad(n, n, order, |s, t| [s, t])
}

/// Unit disk from four curved quadrilaterals meeting at the center, all
/// boundary facets tagged `boundary`.
pub fn unit_disk(order: usize) -> Result<Mesh> {
    structured_quad_tagged(
        2,
        2,
        order,
        |s, t| disk_point(2.0 * s - 1.0, 2.0 * t - 1.0),
        ["boundary"; 4],
    )
}

/// Maps `[-1,1]^2` onto the unit disk so that the square's sides land on
/// the circle and its corners at 45 degrees. Gives smaller nodal errors
/// than patching each quadrant separately.
fn disk_point(s: f64, t: f64) -> [f64; 2] {
    [s * (1.0 - 0.5 * t * t).sqrt(), t * (1.0 - 0.5 * s * s).sqrt()]
}

/// Half-width reduction of the stenosis channel.
pub const STENOSIS_DEPTH: f64 = 0.4;

/// Channel width at height `y`: one at both ends, narrowing smoothly to
/// `1 - STENOSIS_DEPTH` at `y = 1`.
pub fn stenosis_width(y: f64) -> f64 {
    let d = y - 1.0;
    if d.abs() >= 0.5 {
        1.0
    } else {
        1.0 - 0.5 * STENOSIS_DEPTH * (1.0 + (2.0 * PI * d).cos())
    }
}

/// Constricted channel `0 <= y <= 2`, centered on `x = 0`, with tags
/// `inlet` (bottom), `outlet` (top) and `wall` (both sides).
pub fn stenosis(n: usize, order: usize) -> Result<Mesh> {
    structured_quad_tagged(
        n,
        n,
        order,
        |s, t| {
            let y = 2.0 * t;
            [stenosis_width(y) * (s - 0.5), y]
        },
        ["inlet", "wall", "outlet", "wall"],
    )
}

/// Hollow cylinder around the z axis, tags `inner`, `outer`, `left`
/// (z = 0) and `right` (z = length). Local element axes follow radius,
/// angle and height.
pub fn hollow_cylinder(
    n_theta: usize,
    n_r: usize,
    n_z: usize,
    order: usize,
    r_inner: f64,
    r_outer: f64,
    length: f64,
) -> Result<Mesh> {
    if n_theta < 3 || n_r == 0 || n_z == 0 {
        return Err(Error::Config("cylinder needs n_theta >= 3 and n_r, n_z >= 1".into()));
    }
    let p = order;
    let (mr, mt, mz) = (p * n_r + 1, p * n_theta, p * n_z + 1);
    let id = |ir: usize, it: usize, iz: usize| ir + mr * ((it % mt) + mt * iz);
    let mut nodes = Vec::with_capacity(mr * mt * mz);
    for iz in 0..mz {
        for it in 0..mt {
            for ir in 0..mr {
                let r = r_inner + (r_outer - r_inner) * ir as f64 / (mr - 1) as f64;
                let th = 2.0 * PI * it as f64 / mt as f64;
                let z = length * iz as f64 / (mz - 1) as f64;
                nodes.push([r * th.cos(), r * th.sin(), z]);
            }
        }
    }
    let mut elements = Vec::new();
    let mut facets = Vec::new();
    for ez in 0..n_z {
        for et in 0..n_theta {
            for er in 0..n_r {
                let node = |a: usize, b: usize, c: usize| id(er * p + a, et * p + b, ez * p + c);
                let mut conn = Vec::with_capacity((p + 1).pow(3));
                for c in 0..=p {
                    for b in 0..=p {
                        for a in 0..=p {
                            conn.push(node(a, b, c));
                        }
                    }
                }
                elements.push(Element {
                    kind: ElementKind::Hexahedron,
                    order: p,
                    nodes: conn,
                });
                let face = |f: &dyn Fn(usize, usize) -> usize| -> Vec<usize> {
                    (0..=p).flat_map(|i| (0..=p).map(move |j| (i, j))).map(|(i, j)| f(i, j)).collect()
                };
                if er == 0 {
                    facets.push(Facet { tag: "inner".into(), nodes: face(&|b, c| node(0, b, c)) });
                }
                if er == n_r - 1 {
                    facets.push(Facet { tag: "outer".into(), nodes: face(&|b, c| node(p, b, c)) });
                }
                if ez == 0 {
                    facets.push(Facet { tag: "left".into(), nodes: face(&|a, b| node(a, b, 0)) });
                }
                if ez == n_z - 1 {
                    facets.push(Facet { tag: "right".into(), nodes: face(&|a, b| node(a, b, p)) });
                }
            }
        }
    }
    Mesh::new(3, nodes, elements, facets)
}

/// Linear-triangle square `[-0.4, 0.4]^2` with a V-shaped notch cut into
/// the middle of the top edge, a third of the way down. Tags: `left`,
/// `right` and `free` for the remaining boundary.
pub fn notched_plate() -> Result<Mesh> {
    let (cols, rows) = (9usize, 3usize);
    let (x0, x1, y0, y1) = (-0.4, 0.4, -0.4, 0.4);
    let id = |i: usize, j: usize| i + (cols + 1) * j;
    let mut nodes = Vec::new();
    for j in 0..=rows {
        for i in 0..=cols {
            nodes.push([
                x0 + (x1 - x0) * i as f64 / cols as f64,
                y0 + (y1 - y0) * j as f64 / rows as f64,
                0.0,
            ]);
        }
    }
    let (nc, nr) = (cols / 2, rows - 1);
    let tip = nodes.len();
    let ya = nodes[id(nc, nr)][1];
    nodes.push([0.5 * (nodes[id(nc, nr)][0] + nodes[id(nc + 1, nr)][0]), ya, 0.0]);
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for j in 0..rows {
        for i in 0..cols {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            if (i, j) == (nc, nr) {
                tris.push([a, tip, c]);
                tris.push([tip, b, d]);
            } else if (i, j) == (nc, nr - 1) {
                tris.push([a, b, tip]);
                tris.push([a, tip, c]);
                tris.push([b, d, tip]);
            } else {
                tris.push([a, b, d]);
                tris.push([a, d, c]);
            }
        }
    }
    let elements: Vec<Element> = tris
        .iter()
        .map(|t| Element {
            kind: ElementKind::Simplex,
            order: 1,
            nodes: t.to_vec(),
        })
        .collect();
    let facets = boundary_edges(&tris)
        .into_iter()
        .map(|(a, b)| {
            let (xa, xb) = (nodes[a][0], nodes[b][0]);
            let tag = if xa == x0 && xb == x0 {
                "left"
            } else if xa == x1 && xb == x1 {
                "right"
            } else {
                "free"
            };
            Facet {
                tag: tag.into(),
                nodes: vec![a, b],
            }
        })
        .collect();
    Mesh::new(2, nodes, elements, facets)
}

/// Edges used by exactly one triangle, in a deterministic order.
fn boundary_edges(tris: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: BTreeMap<(usize, usize), (usize, (usize, usize))> = BTreeMap::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let entry = count.entry((a.min(b), a.max(b))).or_insert((0, (a, b)));
            entry.0 += 1;
        }
    }
    count.into_values().filter(|(n, _)| *n == 1).map(|(_, e)| e).collect()
}
