// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;

use super::belief::{BeliefVolume, UNDERFLOW};
use super::MotionInput;
use crate::volume::CellBox;

/// Fractional parts this close to an integer are snapped so exact cell shifts stay exact.
const SNAP: f64 = 1e-9;

/// Integer and fractional parts of a shift, with near-integers snapped.
fn split_shift(s: f64) -> (i64, f64) {
    let mut f = s.floor();
    let mut a = s - f;
    if a < SNAP {
        a = 0.0;
    } else if a > 1.0 - SNAP {
        f += 1.0;
        a = 0.0;
    }
    (f as i64, a)
}

/// Normalized Gaussian taps for offsets `−r..=r`, truncated at `3σ`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-r..=r)
        .map(|o| (-0.5 * (o as f64 / sigma).powi(2)).exp())
        .collect();
    let s: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / s).collect()
}

/// Prediction step: per-bin body-frame translation with Gaussian blur, then a
/// circular orientation shift with a wrapped Gaussian. Mass leaving the grid or
/// landing on occupied cells is dropped before renormalization. If nothing
/// survives, the belief resets to uniform over free space.
pub fn transition_update(belief: &BeliefVolume, motion: &MotionInput) -> BeliefVolume {
    let mut out = belief.clone();
    transition_in_place(&mut out, motion);
    out
}

/// Per-bin shift in cells, split into integer and fractional parts.
#[derive(Clone, Copy)]
struct Shift {
    fx: i64,
    ax: f64,
    fy: i64,
    ay: f64,
}

pub(crate) fn transition_in_place(belief: &mut BeliefVolume, motion: &MotionInput) {
    let shape = belief.shape;
    let (tx, ty, tphi) = motion.t;
    let (sx, sy, sphi) = motion.sigma;
    let translate = tx != 0.0 || ty != 0.0 || sx > 0.0 || sy > 0.0;
    let rotate = tphi != 0.0 || sphi > 0.0;
    if !translate && !rotate {
        return;
    }
    let (w, h, n) = (shape.width, shape.height, shape.n_theta);
    let plane = shape.plane();
    let src_box = belief.bbox;

    let shifts: Vec<Shift> = (0..n)
        .map(|k| {
            let (s, c) = shape.bin_center(k).sin_cos();
            let (fx, ax) = split_shift((c * tx - s * ty) / shape.resolution);
            let (fy, ay) = split_shift((s * tx + c * ty) / shape.resolution);
            Shift { fx, ax, fy, ay }
        })
        .collect();
    let kx = gaussian_kernel(sx / shape.resolution);
    let ky = gaussian_kernel(sy / shape.resolution);
    let (rx, ry) = ((kx.len() / 2) as i64, (ky.len() / 2) as i64);

    // cells that can receive mass, over all bins
    let clip = |lo: i64, hi: i64, max: usize| (lo.max(0) as usize, hi.clamp(0, max as i64) as usize);
    let out_box = shifts.iter().fold(CellBox::EMPTY, |acc, s| {
        let (i0, i1) = clip(
            src_box.i0 as i64 + s.fx - rx,
            src_box.i1 as i64 + s.fx + (s.ax > 0.0) as i64 + rx,
            w,
        );
        let (j0, j1) = clip(
            src_box.j0 as i64 + s.fy - ry,
            src_box.j1 as i64 + s.fy + (s.ay > 0.0) as i64 + ry,
            h,
        );
        acc.union(CellBox { i0, i1, j0, j1 })
    });
    if out_box.is_empty() {
        belief.reset_uniform();
        return;
    }
    let (bw, bh) = (out_box.width(), out_box.height());
    let bp = bw * bh;

    let mut work = vec![0.0; n * bp];
    let mut slice_max = vec![f64::NEG_INFINITY; n];
    let src_values = &belief.log_values;
    work.par_chunks_mut(bp)
        .zip(slice_max.par_iter_mut())
        .enumerate()
        .for_each(|(k, (dst, m))| {
            let src = &src_values[k * plane..(k + 1) * plane];
            *m = (src_box.j0..src_box.j1)
                .flat_map(|j| src[j * w + src_box.i0..j * w + src_box.i1].iter().copied())
                .fold(f64::NEG_INFINITY, f64::max);
            if *m == f64::NEG_INFINITY {
                return;
            }
            let s = shifts[k];
            let weights = [
                (0, 0, (1.0 - s.ax) * (1.0 - s.ay)),
                (1, 0, s.ax * (1.0 - s.ay)),
                (0, 1, (1.0 - s.ax) * s.ay),
                (1, 1, s.ax * s.ay),
            ];
            let mut shifted = vec![0.0; bp];
            for j in src_box.j0..src_box.j1 {
                for i in src_box.i0..src_box.i1 {
                    let v = src[j * w + i] - *m;
                    if !(v > -UNDERFLOW) {
                        continue;
                    }
                    let p = v.exp();
                    for &(oi, oj, wt) in &weights {
                        if wt == 0.0 {
                            continue;
                        }
                        let ti = i as i64 + s.fx + oi - out_box.i0 as i64;
                        let tj = j as i64 + s.fy + oj - out_box.j0 as i64;
                        if ti >= 0 && tj >= 0 && (ti as usize) < bw && (tj as usize) < bh {
                            shifted[tj as usize * bw + ti as usize] += wt * p;
                        }
                    }
                }
            }
            blur(&shifted, dst, bw, bh, &kx, &ky);
        });

    let global_max = slice_max.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    work.par_chunks_mut(bp).zip(slice_max.par_iter()).for_each(|(slice, &m)| {
        let f = if m == f64::NEG_INFINITY { 0.0 } else { (m - global_max).exp() };
        if f != 1.0 {
            slice.iter_mut().for_each(|v| *v *= f);
        }
    });
    if rotate {
        work = rotate_bins(&work, n, bp, tphi / shape.bin_width(), sphi / shape.bin_width());
    }

    // clear the old support, then write the new one inside `out_box`
    let free = &belief.free;
    belief
        .log_values
        .par_chunks_mut(plane)
        .zip(work.par_chunks(bp))
        .for_each(|(dst, src)| {
            for j in src_box.j0..src_box.j1 {
                dst[j * w + src_box.i0..j * w + src_box.i1].fill(f64::NEG_INFINITY);
            }
            for bj in 0..bh {
                for bi in 0..bw {
                    let p = src[bj * bw + bi];
                    let cell = (out_box.j0 + bj) * w + out_box.i0 + bi;
                    if p > 0.0 && free[cell] {
                        dst[cell] = p.ln() + global_max;
                    }
                }
            }
        });
    belief.bbox = out_box;
    if belief.renormalize().is_err() {
        belief.reset_uniform();
    }
}

/// Separable zero-padded convolution of a `bw × bh` plane into `dst`.
fn blur(src: &[f64], dst: &mut [f64], bw: usize, bh: usize, kx: &[f64], ky: &[f64]) {
    if kx.len() == 1 && ky.len() == 1 {
        dst.copy_from_slice(src);
        return;
    }
    let (rx, ry) = (kx.len() / 2, ky.len() / 2);
    let mut tmp = vec![0.0; bw * bh];
    if rx == 0 {
        tmp.copy_from_slice(src);
    } else {
        for j in 0..bh {
            let row = &src[j * bw..(j + 1) * bw];
            let out = &mut tmp[j * bw..(j + 1) * bw];
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (t, &kw) in kx.iter().enumerate() {
                    let si = i as i64 + rx as i64 - t as i64;
                    if si >= 0 && (si as usize) < bw {
                        acc += kw * row[si as usize];
                    }
                }
                *o = acc;
            }
        }
    }
    if ry == 0 {
        dst.copy_from_slice(&tmp);
        return;
    }
    for j in 0..bh {
        let out = &mut dst[j * bw..(j + 1) * bw];
        out.fill(0.0);
        for (t, &kw) in ky.iter().enumerate() {
            let sj = j as i64 + ry as i64 - t as i64;
            if sj < 0 || sj as usize >= bh {
                continue;
            }
            let row = &tmp[sj as usize * bw..(sj as usize + 1) * bw];
            for (o, &v) in out.iter_mut().zip(row) {
                *o += kw * v;
            }
        }
    }
}

/// Circular bilinear shift by `shift` bins followed by a wrapped Gaussian of
/// `sigma` bins, over `n` planes of `bp` entries.
fn rotate_bins(work: &[f64], n: usize, bp: usize, shift: f64, sigma: f64) -> Vec<f64> {
    let (f, a) = split_shift(shift);
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let wrap = |o: i64| o.rem_euclid(n as i64) as usize;
    let mut taps = vec![0.0; n];
    for (t, &kw) in kernel.iter().enumerate() {
        let g = t as i64 - r;
        if a == 0.0 {
            taps[wrap(f + g)] += kw;
        } else {
            taps[wrap(f + g)] += kw * (1.0 - a);
            taps[wrap(f + g + 1)] += kw * a;
        }
    }
    let taps: Vec<(usize, f64)> = taps.into_iter().enumerate().filter(|(_, t)| *t != 0.0).collect();
    let mut out = vec![0.0; work.len()];
    out.par_chunks_mut(bp).enumerate().for_each(|(k, dst)| {
        for &(off, wt) in &taps {
            let src = &work[((k + n - off) % n) * bp..][..bp];
            if wt == 1.0 {
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
            } else {
                dst.iter_mut().zip(src).for_each(|(d, s)| *d += wt * s);
            }
        }
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::belief::init_uniform;
    use crate::floorplan::{Cell, OccupancyGrid};
    use crate::pose::normalize_angle;
    use crate::volume::VolumeShape;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn open(w: usize, h: usize, res: f64) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, res, (0.0, 0.0), Cell::Free).unwrap()
    }

    fn delta(grid: &OccupancyGrid, n: usize, k: usize, j: usize, i: usize) -> BeliefVolume {
        let shape = VolumeShape::for_grid(grid, n);
        let mut w = vec![f64::NEG_INFINITY; shape.len()];
        w[shape.index(k, j, i)] = 0.0;
        BeliefVolume::from_log_weights(grid, n, w).unwrap()
    }

    fn random_belief(grid: &OccupancyGrid, n: usize, seed: u64) -> BeliefVolume {
        let shape = VolumeShape::for_grid(grid, n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        BeliefVolume::from_log_weights(grid, n, (0..shape.len()).map(|_| rng.gen_range(-4.0..0.0)).collect()).unwrap()
    }

    fn motion(t: (f64, f64, f64), s: (f64, f64, f64)) -> MotionInput {
        MotionInput::new(t, s).unwrap()
    }

    #[test]
    fn split_shift_snaps() {
        assert_eq!(split_shift(1.0), (1, 0.0));
        assert_eq!(split_shift(0.999_999_999_9), (1, 0.0));
        assert_eq!(split_shift(-0.25), (-1, 0.75));
        assert_eq!(split_shift(2.0 + 1e-12), (2, 0.0));
    }

    #[test]
    fn kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(gaussian_kernel(0.0), vec![1.0]);
        assert_eq!(gaussian_kernel(0.29).len(), 3);
    }

    #[test]
    fn exact_one_cell_shift() {
        let g = open(8, 6, 0.1);
        // n = 4: bin 2 is centered on φ = 0
        let b = delta(&g, 4, 2, 3, 2);
        assert_eq!(b.shape.bin_center(2), 0.0);
        let out = transition_update(&b, &motion((0.1, 0.0, 0.0), (0.0, 0.0, 0.0)));
        let target = b.shape.index(2, 3, 3);
        assert_eq!(out.log_values[target], 0.0);
        for (idx, v) in out.log_values.iter().enumerate() {
            if idx != target {
                assert_eq!(*v, f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn body_frame_shift_follows_heading() {
        let g = open(8, 8, 0.5);
        // bin 3 of 4 is centered on φ = π/2: forward motion goes to +y
        let b = delta(&g, 4, 3, 2, 4);
        let out = transition_update(&b, &motion((1.0, 0.0, 0.0), (0.0, 0.0, 0.0)));
        let (pose, p) = crate::filter::map_pose(&out);
        assert!((p - 1.0).abs() < 1e-12);
        assert_eq!(out.shape.index_of(&pose), Some(out.shape.index(3, 4, 4)));
    }

    #[test]
    fn half_cell_shift_splits_mass() {
        let g = open(6, 6, 1.0);
        let b = delta(&g, 4, 2, 2, 2);
        let out = transition_update(&b, &motion((0.5, 0.0, 0.0), (0.0, 0.0, 0.0)));
        assert!((out.probability(out.shape.index(2, 2, 2)) - 0.5).abs() < 1e-15);
        assert!((out.probability(out.shape.index(2, 2, 3)) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn identity_is_bit_exact() {
        let g = open(7, 5, 0.1);
        let b = random_belief(&g, 8, 4);
        let out = transition_update(&b, &motion((0.0, 0.0, 0.0), (0.0, 0.0, 0.0)));
        assert_eq!(out, b);
    }

    #[test]
    fn blur_matches_direct_kernel() {
        let res = 0.1;
        let g = open(21, 21, res);
        let b = delta(&g, 4, 0, 10, 10);
        let out = transition_update(&b, &motion((0.0, 0.0, 0.0), (res, res, 0.0)));
        // direct evaluation of the truncated, normalized 2D kernel with unit-cell std
        let mut oracle = vec![vec![0.0; 7]; 7];
        let mut z = 0.0;
        for (dj, row) in oracle.iter_mut().enumerate() {
            for (di, v) in row.iter_mut().enumerate() {
                let (x, y) = (di as f64 - 3.0, dj as f64 - 3.0);
                *v = (-0.5 * (x * x + y * y)).exp();
                z += *v;
            }
        }
        for j in 0..21 {
            for i in 0..21 {
                let got = out.probability(out.shape.index(0, j, i));
                let (di, dj) = (i as i64 - 10, j as i64 - 10);
                let want = if di.abs() <= 3 && dj.abs() <= 3 {
                    oracle[(dj + 3) as usize][(di + 3) as usize] / z
                } else {
                    0.0
                };
                assert!((got - want).abs() < 1e-9, "({i},{j}) {got} vs {want}");
            }
        }
    }

    #[test]
    fn rotation_shift_and_blur() {
        let g = open(3, 3, 1.0);
        let n = 12;
        let b = delta(&g, n, 5, 1, 1);
        let bin = std::f64::consts::TAU / n as f64;
        let out = transition_update(&b, &motion((0.0, 0.0, 2.0 * bin), (0.0, 0.0, 0.0)));
        assert!((out.probability(out.shape.index(7, 1, 1)) - 1.0).abs() < 1e-15);
        // wraps around the seam
        let b = delta(&g, n, 11, 1, 1);
        let out = transition_update(&b, &motion((0.0, 0.0, 1.5 * bin), (0.0, 0.0, 0.0)));
        assert!((out.probability(out.shape.index(0, 1, 1)) - 0.5).abs() < 1e-12);
        assert!((out.probability(out.shape.index(1, 1, 1)) - 0.5).abs() < 1e-12);
        // wrapped Gaussian with unit-bin std
        let b = delta(&g, n, 0, 1, 1);
        let out = transition_update(&b, &motion((0.0, 0.0, 0.0), (0.0, 0.0, bin)));
        let k = gaussian_kernel(1.0);
        for o in -3i64..=3 {
            let idx = out.shape.index(o.rem_euclid(n as i64) as usize, 1, 1);
            assert!((out.probability(idx) - k[(o + 3) as usize]).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_is_conserved_and_confined() {
        let mut g = open(20, 15, 0.1);
        for j in 4..11 {
            g.set(9, j, Cell::Occupied);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut b = init_uniform(&g, 12).unwrap();
        let free = g.free_space_mask();
        for _ in 0..10 {
            let m = motion(
                (rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3), rng.gen_range(-1.0..1.0)),
                (rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2), rng.gen_range(0.0..0.2)),
            );
            b = transition_update(&b, &m);
            assert!((b.total_mass() - 1.0).abs() < 1e-6);
            for (idx, v) in b.log_values.iter().enumerate() {
                if !free[idx % b.shape.plane()] {
                    assert_eq!(*v, f64::NEG_INFINITY);
                }
            }
        }
    }

    #[test]
    fn lost_mass_resets_to_uniform() {
        let g = open(4, 4, 1.0);
        let b = delta(&g, 4, 2, 1, 1);
        let out = transition_update(&b, &motion((10.0, 0.0, 0.0), (0.0, 0.0, 0.0)));
        assert_eq!(out, init_uniform(&g, 4).unwrap());
    }

    #[test]
    fn exact_shifts_commute() {
        let g = open(12, 10, 0.25);
        let b = random_belief(&g, 4, 11);
        let a = motion((0.25, 0.0, 0.0), (0.0, 0.0, 0.0));
        let c = motion((0.5, 0.0, 0.0), (0.0, 0.0, 0.0));
        let two = transition_update(&transition_update(&b, &a), &a);
        let one = transition_update(&b, &c);
        for (x, y) in two.log_values.iter().zip(&one.log_values) {
            assert!(x == y || (x - y).abs() < 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn rotation_equivariance() {
        // square grid with origin at the center: a 90° map rotation is a cell permutation
        let n = 8;
        let size = 10;
        let half = size as f64 * 0.5 * 0.2;
        let mut g = OccupancyGrid::filled(size, size, 0.2, (-half, -half), Cell::Free).unwrap();
        g.set(2, 7, Cell::Occupied);
        g.set(3, 7, Cell::Occupied);
        g.set(6, 1, Cell::Occupied);
        // rotated map: cell (i, j) goes to (size-1-j, i)
        let mut gr = g.clone();
        for j in 0..size {
            for i in 0..size {
                gr.set(size - 1 - j, i, g.cell(i, j));
            }
        }
        let shape = VolumeShape::for_grid(&g, n);
        let rot_idx = |idx: usize| {
            let (k, j, i) = shape.unravel(idx);
            shape.index((k + n / 4) % n, i, size - 1 - j)
        };
        let b = random_belief(&g, n, 21);
        let mut wr = vec![f64::NEG_INFINITY; shape.len()];
        for idx in 0..shape.len() {
            wr[rot_idx(idx)] = b.log_values[idx];
        }
        let br = BeliefVolume::from_log_weights(&gr, n, wr).unwrap();
        // body-frame motion is unchanged by a world rotation
        let m = motion((0.13, -0.07, normalize_angle(0.3)), (0.1, 0.1, 0.2));
        let out = transition_update(&b, &m);
        let outr = transition_update(&br, &m);
        for idx in 0..shape.len() {
            let (x, y) = (out.probability(idx), outr.probability(rot_idx(idx)));
            assert!((x - y).abs() < 1e-9, "{idx}: {x} vs {y}");
        }
    }
}
