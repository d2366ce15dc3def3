use std::collections::HashMap;

use super::grid::GridField;

pub type Segment = ([f64; 2], [f64; 2]);

// Edge ids: 2·node for the edge to the right of a node, 2·node + 1 for the
// edge above it.
fn horizontal(field: &GridField, i: usize, j: usize) -> usize {
    2 * field.grid.index(i, j)
}

fn vertical(field: &GridField, i: usize, j: usize) -> usize {
    2 * field.grid.index(i, j) + 1
}

fn crossing(a: [f64; 2], b: [f64; 2], va: f64, vb: f64, level: f64) -> [f64; 2] {
    let t = if vb == va {
        0.5
    } else {
        ((level - va) / (vb - va)).clamp(0.0, 1.0)
    };
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Marching squares. Calls `emit` with both endpoints of each cell segment
/// and the ids of the edges they lie on. Saddles are split by the cell-center
/// average.
fn march(field: &GridField, level: f64, mut emit: impl FnMut((usize, [f64; 2]), (usize, [f64; 2]))) {
    if !level.is_finite() {
        return;
    }
    let grid = &field.grid;
    let [nx, ny] = grid.resolution;
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let v = [
                field.at(i, j),
                field.at(i + 1, j),
                field.at(i + 1, j + 1),
                field.at(i, j + 1),
            ];
            let above: Vec<bool> = v.iter().map(|&x| x >= level).collect();
            let case = above
                .iter()
                .enumerate()
                .fold(0u8, |acc, (b, &a)| acc | ((a as u8) << b));
            if case == 0 || case == 15 {
                continue;
            }
            let p = [
                grid.node(i, j),
                grid.node(i + 1, j),
                grid.node(i + 1, j + 1),
                grid.node(i, j + 1),
            ];
            // edges: 0 bottom (0-1), 1 right (1-2), 2 top (3-2), 3 left (0-3)
            let edge = |e: usize| -> (usize, [f64; 2]) {
                match e {
                    0 => (horizontal(field, i, j), crossing(p[0], p[1], v[0], v[1], level)),
                    1 => (vertical(field, i + 1, j), crossing(p[1], p[2], v[1], v[2], level)),
                    2 => (horizontal(field, i, j + 1), crossing(p[3], p[2], v[3], v[2], level)),
                    _ => (vertical(field, i, j), crossing(p[0], p[3], v[0], v[3], level)),
                }
            };
            let pairs: &[(usize, usize)] = match case {
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 | 10 => {
                    let center = 0.25 * v.iter().sum::<f64>();
                    if (center >= level) == above[0] {
                        &[(0, 1), (2, 3)]
                    } else {
                        &[(0, 3), (1, 2)]
                    }
                }
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                emit(edge(a), edge(b));
            }
        }
    }
}

/// Unordered contour segments of `field` at `level`.
pub fn contour_segments(field: &GridField, level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    march(field, level, |a, b| out.push((a.1, b.1)));
    out
}

/// Contour polylines of `field` at `level`, stitched across cells. Closed
/// curves repeat their first vertex at the end.
pub fn contour_polylines(field: &GridField, level: f64) -> Vec<Vec<[f64; 2]>> {
    let mut position: HashMap<usize, [f64; 2]> = HashMap::new();
    let mut adjacent: HashMap<usize, Vec<usize>> = HashMap::new();
    march(field, level, |a, b| {
        position.insert(a.0, a.1);
        position.insert(b.0, b.1);
        adjacent.entry(a.0).or_default().push(b.0);
        adjacent.entry(b.0).or_default().push(a.0);
    });
    let mut ids: Vec<usize> = adjacent.keys().copied().collect();
    ids.sort_unstable();
    // open chains start at degree-one vertices, then closed loops
    ids.sort_by_key(|id| adjacent[id].len() != 1);
    let mut used: HashMap<usize, bool> = HashMap::new();
    let mut lines = Vec::new();
    for &start in &ids {
        if used.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        used.insert(start, true);
        let mut current = start;
        loop {
            let next = adjacent[&current].iter().copied().find(|n| !used.contains_key(n));
            match next {
                Some(n) => {
                    used.insert(n, true);
                    chain.push(n);
                    current = n;
                }
                None => {
                    if chain.len() > 2 && adjacent[&current].contains(&start) {
                        chain.push(start);
                    }
                    break;
                }
            }
        }
        if chain.len() >= 2 {
            lines.push(chain.iter().map(|id| position[id]).collect());
        }
    }
    lines
}
