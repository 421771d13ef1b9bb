//! SLIC over-segmentation and the superpixel adjacency graph.
//!
//! The clustering runs in CIELAB + position space with the joint distance
//! D^2 = d_lab^2 + (d_xy / S)^2 * m^2, where S is the seed grid interval and
//! m the compactness weight. Seeds start on a regular grid, are nudged to the
//! lowest-gradient spot in a 3x3 neighborhood, and each k-means pass searches
//! a 2S x 2S window per seed. A final pass re-labels stray components so that
//! every superpixel is 4-connected.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::image::{ColorSpace, Image};

/// Per-pixel label map plus per-superpixel statistics.
#[derive(Debug, Clone)]
pub struct Segmentation {
    labels: Vec<u32>,
    height: usize,
    width: usize,
    num_superpixels: usize,
    mean_lab: Vec<[f64; 3]>,
    centroid: Vec<[f64; 2]>,
    area_px: Vec<usize>,
    touches_boundary: Vec<bool>,
}

impl Segmentation {
    /// Build a segmentation from an existing label map, computing statistics
    /// from `lab` (a CIELAB image of the same dimensions). Labels must be
    /// compact: every id in [0, max+1) occurs at least once.
    pub fn from_labels(labels: Vec<u32>, lab: &Image) -> Result<Self> {
        if lab.colorspace() != ColorSpace::Lab {
            return Err(Error::WrongColorSpace {
                expected: "CIELAB".into(),
                found: "other".into(),
            });
        }
        let (h, w) = (lab.height(), lab.width());
        if labels.len() != h * w {
            return Err(Error::InvalidSegmentation {
                reason: format!("label map has {} entries for {h}x{w}", labels.len()),
            });
        }
        let k = match labels.iter().max() {
            Some(&m) => m as usize + 1,
            None => {
                return Err(Error::InvalidSegmentation {
                    reason: "empty label map".into(),
                })
            }
        };
        let stats = SegmentStats::accumulate(&labels, k, h, w, lab)?;
        Ok(Self {
            labels,
            height: h,
            width: w,
            num_superpixels: k,
            mean_lab: stats.mean_lab,
            centroid: stats.centroid,
            area_px: stats.area_px,
            touches_boundary: stats.touches_boundary,
        })
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_superpixels(&self) -> usize {
        self.num_superpixels
    }

    pub fn mean_lab(&self) -> &[[f64; 3]] {
        &self.mean_lab
    }

    pub fn centroid(&self) -> &[[f64; 2]] {
        &self.centroid
    }

    pub fn area_px(&self) -> &[usize] {
        &self.area_px
    }

    pub fn touches_boundary(&self) -> &[bool] {
        &self.touches_boundary
    }

    #[inline]
    pub fn label_at(&self, y: usize, x: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

struct SegmentStats {
    mean_lab: Vec<[f64; 3]>,
    centroid: Vec<[f64; 2]>,
    area_px: Vec<usize>,
    touches_boundary: Vec<bool>,
}

impl SegmentStats {
    fn accumulate(labels: &[u32], k: usize, h: usize, w: usize, lab: &Image) -> Result<Self> {
        let mut sum_lab = vec![[0.0f64; 3]; k];
        let mut sum_pos = vec![[0.0f64; 2]; k];
        let mut area = vec![0usize; k];
        let mut touches = vec![false; k];
        for y in 0..h {
            for x in 0..w {
                let l = labels[y * w + x] as usize;
                if l >= k {
                    return Err(Error::InvalidSegmentation {
                        reason: format!("label {l} out of range [0,{k})"),
                    });
                }
                for (c, acc) in sum_lab[l].iter_mut().enumerate() {
                    *acc += lab.sample(y, x, c);
                }
                sum_pos[l][0] += y as f64;
                sum_pos[l][1] += x as f64;
                area[l] += 1;
                if y == 0 || y == h - 1 || x == 0 || x == w - 1 {
                    touches[l] = true;
                }
            }
        }
        if let Some(empty) = area.iter().position(|&a| a == 0) {
            return Err(Error::InvalidSegmentation {
                reason: format!("label {empty} has no pixels"),
            });
        }
        let mean_lab = sum_lab
            .iter()
            .zip(&area)
            .map(|(s, &a)| [s[0] / a as f64, s[1] / a as f64, s[2] / a as f64])
            .collect();
        let centroid = sum_pos
            .iter()
            .zip(&area)
            .map(|(s, &a)| [s[0] / a as f64, s[1] / a as f64])
            .collect();
        Ok(Self {
            mean_lab,
            centroid,
            area_px: area,
            touches_boundary: touches,
        })
    }
}

/// SLIC seed grid interval S = sqrt(H*W / n_target).
pub fn grid_interval(height: usize, width: usize, n_target: usize) -> f64 {
    ((height * width) as f64 / n_target as f64).sqrt()
}

#[derive(Clone, Copy)]
struct Center {
    lab: [f64; 3],
    row: f64,
    col: f64,
}

#[inline]
fn joint_d2(
    lab: &Image,
    y: usize,
    x: usize,
    center: &Center,
    inv_s2_m2: f64,
) -> f64 {
    let dl = lab.sample(y, x, 0) - center.lab[0];
    let da = lab.sample(y, x, 1) - center.lab[1];
    let db = lab.sample(y, x, 2) - center.lab[2];
    let dy = y as f64 - center.row;
    let dx = x as f64 - center.col;
    (dl * dl + da * da + db * db) + (dy * dy + dx * dx) * inv_s2_m2
}

/// Run SLIC, returning the segmentation and the per-iteration clustering
/// objective (sum of squared joint distances to assigned centers), which is
/// non-increasing.
pub fn slic_with_energy(
    lab: &Image,
    n_target: usize,
    compactness: f64,
    iters: usize,
) -> Result<(Segmentation, Vec<f64>)> {
    if lab.colorspace() != ColorSpace::Lab {
        return Err(Error::WrongColorSpace {
            expected: "CIELAB".into(),
            found: "other".into(),
        });
    }
    if n_target == 0 || iters == 0 {
        return Err(Error::InvalidConfig {
            reason: "n_target and iters must be at least 1".into(),
        });
    }
    let (h, w) = (lab.height(), lab.width());
    if n_target > h * w {
        return Err(Error::TooManySuperpixels {
            n_target,
            pixels: h * w,
        });
    }

    let interval = grid_interval(h, w, n_target);
    let inv_s2_m2 = compactness * compactness / (interval * interval);

    let mut centers = seed_centers(lab, n_target);
    let k0 = centers.len();
    let mut labels = vec![u32::MAX; h * w];
    let mut dist2 = vec![f64::INFINITY; h * w];

    // Initial assignment: nearest seed in image space, ties to the smaller id.
    let win = ((h as f64 / rows_of(h, w, n_target) as f64)
        .max(w as f64 / cols_of(h, w, n_target) as f64)
        .ceil() as isize)
        + 1;
    for (id, c) in centers.iter().enumerate() {
        let (y0, y1, x0, x1) = window(c, win as f64, h, w);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let dy = y as f64 - c.row;
                let dx = x as f64 - c.col;
                let d2 = dy * dy + dx * dx;
                let p = y * w + x;
                if d2 < dist2[p] {
                    dist2[p] = d2;
                    labels[p] = id as u32;
                }
            }
        }
    }
    for p in 0..h * w {
        if labels[p] == u32::MAX {
            // Rare fallback for pixels outside every init window.
            let (y, x) = (p / w, p % w);
            for (id, c) in centers.iter().enumerate() {
                let dy = y as f64 - c.row;
                let dx = x as f64 - c.col;
                let d2 = dy * dy + dx * dx;
                if d2 < dist2[p] {
                    dist2[p] = d2;
                    labels[p] = id as u32;
                }
            }
        }
    }

    let mut energies = Vec::with_capacity(iters);
    for _ in 0..iters {
        // Seed each pixel with the distance to its current center so the
        // assignment step can only lower the objective.
        for p in 0..h * w {
            let (y, x) = (p / w, p % w);
            dist2[p] = joint_d2(lab, y, x, &centers[labels[p] as usize], inv_s2_m2);
        }
        for (id, c) in centers.iter().enumerate() {
            let (y0, y1, x0, x1) = window(c, interval, h, w);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d2 = joint_d2(lab, y, x, c, inv_s2_m2);
                    let p = y * w + x;
                    if d2 < dist2[p] {
                        dist2[p] = d2;
                        labels[p] = id as u32;
                    }
                }
            }
        }

        // Means in joint space minimize the squared objective per cluster.
        let mut sum = vec![[0.0f64; 5]; k0];
        let mut count = vec![0usize; k0];
        for y in 0..h {
            for x in 0..w {
                let l = labels[y * w + x] as usize;
                sum[l][0] += lab.sample(y, x, 0);
                sum[l][1] += lab.sample(y, x, 1);
                sum[l][2] += lab.sample(y, x, 2);
                sum[l][3] += y as f64;
                sum[l][4] += x as f64;
                count[l] += 1;
            }
        }
        for (id, c) in centers.iter_mut().enumerate() {
            if count[id] > 0 {
                let n = count[id] as f64;
                c.lab = [sum[id][0] / n, sum[id][1] / n, sum[id][2] / n];
                c.row = sum[id][3] / n;
                c.col = sum[id][4] / n;
            }
        }

        let mut energy = 0.0;
        for p in 0..h * w {
            let (y, x) = (p / w, p % w);
            energy += joint_d2(lab, y, x, &centers[labels[p] as usize], inv_s2_m2);
        }
        energies.push(energy);
    }

    let labels = enforce_connectivity(&labels, h, w, interval);
    let seg = Segmentation::from_labels(labels, lab)?;
    Ok((seg, energies))
}

/// Run SLIC with the standard return value.
pub fn slic(lab: &Image, n_target: usize, compactness: f64, iters: usize) -> Result<Segmentation> {
    slic_with_energy(lab, n_target, compactness, iters).map(|(seg, _)| seg)
}

fn rows_of(h: usize, w: usize, n_target: usize) -> usize {
    let ny = (n_target as f64 * h as f64 / w as f64).sqrt().round();
    (ny.max(1.0) as usize).min(h)
}

fn cols_of(h: usize, w: usize, n_target: usize) -> usize {
    let ny = rows_of(h, w, n_target);
    let nx = (n_target as f64 / ny as f64).round();
    (nx.max(1.0) as usize).min(w)
}

fn seed_centers(lab: &Image, n_target: usize) -> Vec<Center> {
    let (h, w) = (lab.height(), lab.width());
    let (ny, nx) = (rows_of(h, w, n_target), cols_of(h, w, n_target));
    let mut centers = Vec::with_capacity(ny * nx);
    for i in 0..ny {
        for j in 0..nx {
            // Centroid of the ideal grid cell. Kept fractional unless the
            // gradient check finds a strictly better pixel, so that flat
            // images tessellate into exact Voronoi cells without pixel ties.
            let row = (i as f64 + 0.5) * h as f64 / ny as f64 - 0.5;
            let col = (j as f64 + 0.5) * w as f64 / nx as f64 - 0.5;
            let ry = (row.round().max(0.0) as usize).min(h - 1);
            let rx = (col.round().max(0.0) as usize).min(w - 1);
            let (row, col, py, px) = match lower_gradient_3x3(lab, ry, rx) {
                Some((y, x)) => (y as f64, x as f64, y, x),
                None => (row, col, ry, rx),
            };
            centers.push(Center {
                lab: [
                    lab.sample(py, px, 0),
                    lab.sample(py, px, 1),
                    lab.sample(py, px, 2),
                ],
                row,
                col,
            });
        }
    }
    centers
}

fn gradient_at(lab: &Image, y: usize, x: usize) -> f64 {
    let (h, w) = (lab.height(), lab.width());
    let xl = x.saturating_sub(1);
    let xr = (x + 1).min(w - 1);
    let yu = y.saturating_sub(1);
    let yd = (y + 1).min(h - 1);
    let mut g = 0.0;
    for c in 0..3 {
        let dh = lab.sample(y, xr, c) - lab.sample(y, xl, c);
        let dv = lab.sample(yd, x, c) - lab.sample(yu, x, c);
        g += dh * dh + dv * dv;
    }
    g
}

/// The strictly lowest-gradient pixel in the 3x3 neighborhood, if any beats
/// the center.
fn lower_gradient_3x3(lab: &Image, row: usize, col: usize) -> Option<(usize, usize)> {
    let (h, w) = (lab.height(), lab.width());
    let mut best = None;
    let mut best_g = gradient_at(lab, row, col);
    for dy in -1i64..=1 {
        for dx in -1i64..=1 {
            if dy == 0 && dx == 0 {
                continue;
            }
            let y = row as i64 + dy;
            let x = col as i64 + dx;
            if y < 0 || y >= h as i64 || x < 0 || x >= w as i64 {
                continue;
            }
            let g = gradient_at(lab, y as usize, x as usize);
            if g < best_g {
                best_g = g;
                best = Some((y as usize, x as usize));
            }
        }
    }
    best
}

fn window(c: &Center, half: f64, h: usize, w: usize) -> (usize, usize, usize, usize) {
    let y0 = (c.row - half).ceil().max(0.0) as usize;
    let y1 = ((c.row + half).floor() as usize).min(h - 1);
    let x0 = (c.col - half).ceil().max(0.0) as usize;
    let x1 = ((c.col + half).floor() as usize).min(w - 1);
    (y0, y1.max(y0), x0, x1.max(x0))
}

/// Re-label so every segment is one 4-connected component. Components that
/// are not their label's largest piece and are smaller than S^2/4 get merged
/// into the adjacent component sharing the longest border (ties: smallest
/// original label, then smallest component id); larger strays become new
/// segments. Final ids are compacted in scan order.
fn enforce_connectivity(labels: &[u32], h: usize, w: usize, interval: f64) -> Vec<u32> {
    let n = h * w;
    let mut comp_of = vec![u32::MAX; n];
    let mut comp_label = Vec::new();
    let mut comp_pixels: Vec<Vec<u32>> = Vec::new();

    let mut stack = Vec::new();
    for start in 0..n {
        if comp_of[start] != u32::MAX {
            continue;
        }
        let cid = comp_label.len() as u32;
        let lbl = labels[start];
        comp_label.push(lbl);
        let mut pixels = Vec::new();
        comp_of[start] = cid;
        stack.push(start);
        while let Some(p) = stack.pop() {
            pixels.push(p as u32);
            let (y, x) = (p / w, p % w);
            let mut visit = |q: usize| {
                if comp_of[q] == u32::MAX && labels[q] == lbl {
                    comp_of[q] = cid;
                    stack.push(q);
                }
            };
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
        }
        comp_pixels.push(pixels);
    }

    let num_comps = comp_label.len();
    // Largest component of each original label survives as that label.
    let mut largest: std::collections::HashMap<u32, u32> = std::collections::HashMap::new();
    for cid in 0..num_comps {
        let lbl = comp_label[cid];
        let entry = largest.entry(lbl).or_insert(cid as u32);
        if comp_pixels[cid].len() > comp_pixels[*entry as usize].len() {
            *entry = cid as u32;
        }
    }

    let min_size = (interval * interval / 4.0).max(1.0);
    let mut redirect: Vec<u32> = (0..num_comps as u32).collect();
    fn resolve(redirect: &mut [u32], mut c: u32) -> u32 {
        while redirect[c as usize] != c {
            let next = redirect[redirect[c as usize] as usize];
            redirect[c as usize] = next;
            c = next;
        }
        c
    }

    for cid in 0..num_comps as u32 {
        if largest[&comp_label[cid as usize]] == cid {
            continue;
        }
        if comp_pixels[cid as usize].len() as f64 >= min_size {
            continue; // large stray: keep as its own segment
        }
        // Count shared border pixels with each neighboring component.
        let mut border: std::collections::HashMap<u32, u64> = std::collections::HashMap::new();
        for &p in &comp_pixels[cid as usize] {
            let p = p as usize;
            let (y, x) = (p / w, p % w);
            let tally = |q: usize, border: &mut std::collections::HashMap<u32, u64>,
                         redirect: &mut Vec<u32>| {
                let t = resolve(redirect, comp_of[q]);
                if t != cid {
                    *border.entry(t).or_insert(0) += 1;
                }
            };
            if y > 0 {
                tally(p - w, &mut border, &mut redirect);
            }
            if y + 1 < h {
                tally(p + w, &mut border, &mut redirect);
            }
            if x > 0 {
                tally(p - 1, &mut border, &mut redirect);
            }
            if x + 1 < w {
                tally(p + 1, &mut border, &mut redirect);
            }
        }
        let target = border
            .iter()
            .min_by(|(ca, na), (cb, nb)| {
                nb.cmp(na)
                    .then(comp_label[**ca as usize].cmp(&comp_label[**cb as usize]))
                    .then(ca.cmp(cb))
            })
            .map(|(&c, _)| c);
        if let Some(t) = target {
            redirect[cid as usize] = t;
        }
    }

    // Compact the surviving components into labels 0..K in scan order.
    let mut final_label = vec![u32::MAX; num_comps];
    let mut out = vec![0u32; n];
    let mut next = 0u32;
    for p in 0..n {
        let root = resolve(&mut redirect, comp_of[p]);
        if final_label[root as usize] == u32::MAX {
            final_label[root as usize] = next;
            next += 1;
        }
        out[p] = final_label[root as usize];
    }
    out
}

/// Undirected superpixel adjacency graph. Edge weights are the Euclidean
/// distances between mean CIELAB colors.
#[derive(Debug, Clone)]
pub struct SuperpixelGraph {
    num_nodes: usize,
    edges: Vec<(u32, u32, f64)>,
    adjacency: Vec<Vec<(u32, f64)>>,
}

impl SuperpixelGraph {
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Unique undirected edges, ascending by (smaller id, larger id).
    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[(u32, f64)] {
        &self.adjacency[node]
    }
}

/// Adjacency from 4-neighborhood label transitions.
pub fn build_graph(seg: &Segmentation) -> SuperpixelGraph {
    let (h, w) = (seg.height(), seg.width());
    let labels = seg.labels();
    let mut pairs = BTreeSet::new();
    for y in 0..h {
        for x in 0..w {
            let a = labels[y * w + x];
            if x + 1 < w {
                let b = labels[y * w + x + 1];
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            if y + 1 < h {
                let b = labels[(y + 1) * w + x];
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
    }
    let mean = seg.mean_lab();
    let mut edges = Vec::with_capacity(pairs.len());
    let mut adjacency = vec![Vec::new(); seg.num_superpixels()];
    for (a, b) in pairs {
        let d = lab_distance(&mean[a as usize], &mean[b as usize]);
        edges.push((a, b, d));
        adjacency[a as usize].push((b, d));
        adjacency[b as usize].push((a, d));
    }
    SuperpixelGraph {
        num_nodes: seg.num_superpixels(),
        edges,
        adjacency,
    }
}

pub(crate) fn lab_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    (d0 * d0 + d1 * d1 + d2 * d2).sqrt()
}

/// Ids of superpixels with at least one pixel on the image border, ascending.
pub fn boundary_superpixels(seg: &Segmentation) -> Vec<u32> {
    seg.touches_boundary()
        .iter()
        .enumerate()
        .filter_map(|(i, &t)| t.then_some(i as u32))
        .collect()
}

/// Write the per-pixel label map as a 16-bit grayscale PNG.
pub fn save_labels_png<P: AsRef<std::path::Path>>(seg: &Segmentation, path: P) -> Result<()> {
    let path = path.as_ref();
    if seg.num_superpixels() > u16::MAX as usize + 1 {
        return Err(Error::InvalidSegmentation {
            reason: format!(
                "{} superpixels exceed the 16-bit label range",
                seg.num_superpixels()
            ),
        });
    }
    let pixels: Vec<u16> = seg.labels().iter().map(|&l| l as u16).collect();
    let buf: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
        image::ImageBuffer::from_raw(seg.width() as u32, seg.height() as u32, pixels)
            .expect("validated dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Io {
            path: path.into(),
            source: std::io::Error::other(e),
        })
}

#[derive(serde::Serialize)]
struct SuperpixelStats<'a> {
    id: u32,
    mean_lab: &'a [f64; 3],
    centroid: &'a [f64; 2],
    area_px: usize,
    touches_boundary: bool,
}

#[derive(serde::Serialize)]
struct SegmentationStats<'a> {
    height: usize,
    width: usize,
    num_superpixels: usize,
    superpixels: Vec<SuperpixelStats<'a>>,
}

/// JSON sidecar with per-superpixel statistics.
pub fn write_stats_json<P: AsRef<std::path::Path>>(seg: &Segmentation, path: P) -> Result<()> {
    let path = path.as_ref();
    let stats = SegmentationStats {
        height: seg.height(),
        width: seg.width(),
        num_superpixels: seg.num_superpixels(),
        superpixels: (0..seg.num_superpixels())
            .map(|k| SuperpixelStats {
                id: k as u32,
                mean_lab: &seg.mean_lab()[k],
                centroid: &seg.centroid()[k],
                area_px: seg.area_px()[k],
                touches_boundary: seg.touches_boundary()[k],
            })
            .collect(),
    };
    let mut json = serde_json::to_string_pretty(&stats).expect("stats serialize");
    json.push('\n');
    std::fs::write(path, json).map_err(|source| Error::Io {
        path: path.into(),
        source,
    })
}
