//! Group convolution on the lattice and the heat semigroup built on it.
//!
//! `(f ∗ g)(η) = Σ_ξ f(η ∘ ξ⁻¹) g(ξ) · cellVolume` with
//! `η ∘ ξ⁻¹ = (x − x′, y − y′, τ − τ′ − 2(x·y′ − x′·y))`.
//!
//! Horizontal differences land exactly on the lattice, so `f` is evaluated
//! off-grid only in τ, where the shear `−2(x·y′ − x′·y)` is constant for a
//! fixed pair of horizontal columns. Per column pair the inner work is a
//! 1D correlation of the source τ-line against a once-blended (linearly
//! interpolated, constant fractional shift) kernel τ-line, restricted to
//! the nonzero windows of both lines. Summation order within every output
//! element is fixed, so results do not depend on the worker count.

use super::{kernel_field_from_table, KernelTable};
use crate::error::{Error, Result};
use crate::field::{GridField, GridSpec};
use rayon::prelude::*;

/// Nonzero τ-window `[lo, hi)` of every horizontal column.
fn column_windows(values: &[f64], ncols: usize, ntau: usize) -> Vec<(u32, u32)> {
    (0..ncols)
        .map(|c| {
            let line = &values[c * ntau..(c + 1) * ntau];
            let lo = line.iter().position(|&v| v != 0.0);
            match lo {
                None => (0, 0),
                Some(lo) => {
                    let hi = ntau - line.iter().rev().position(|&v| v != 0.0).unwrap();
                    (lo as u32, hi as u32)
                }
            }
        })
        .collect()
}

/// Per-combination decoded axis indices and coordinates for one block of
/// `count` identical axes.
struct ComboTable {
    idx: Vec<Vec<u16>>,
    coords: Vec<Vec<f64>>,
}

fn combo_table(spec: &GridSpec, axis0: usize, count: usize) -> ComboTable {
    let len = spec.axis_len(axis0);
    let total = len.pow(count as u32);
    let mut idx = Vec::with_capacity(total);
    let mut coords = Vec::with_capacity(total);
    for combo in 0..total {
        let mut c = combo;
        let mut ids = vec![0u16; count];
        let mut cs = vec![0.0f64; count];
        for a in (0..count).rev() {
            let i = c % len;
            c /= len;
            ids[a] = i as u16;
            cs[a] = spec.axis_coord(axis0, i);
        }
        idx.push(ids);
        coords.push(cs);
    }
    ComboTable { idx, coords }
}

/// Group convolution `f ∗ g` of two fields on the same lattice.
pub fn group_convolve(f: &GridField, g: &GridField) -> Result<GridField> {
    let spec = f.spec();
    if spec != g.spec() {
        return Err(Error::usage("group_convolve requires matching grid specs"));
    }
    let n = spec.n();
    let ntau = spec.ntau();
    let nx = spec.nx();
    let ny = spec.ny();
    let nxc = nx.pow(n as u32);
    let nyc = ny.pow(n as u32);
    let htau = spec.htau();
    let cell = spec.cell_volume();

    let xt = combo_table(spec, 0, n);
    let yt = combo_table(spec, n, n);

    let fwin = column_windows(f.values(), nxc * nyc, ntau);
    let gwin = column_windows(g.values(), nxc * nyc, ntau);
    let gcols: Vec<usize> = (0..nxc * nyc).filter(|&c| gwin[c].0 < gwin[c].1).collect();

    let fvals = f.values();
    let gvals = g.values();

    // B holds the blended kernel line; padding keeps every slice in range
    // for shear offsets up to ±3·ntau/2 (larger shears cannot overlap).
    let pad = 2 * ntau;
    let blen = 5 * ntau;

    let mut out = vec![0.0f64; spec.len()];
    out.par_chunks_mut(ntau)
        .enumerate()
        .for_each_init(
            || vec![0.0f64; blen],
            |bline, (ocol, ochunk)| {
                let oxc = ocol / nyc;
                let oyc = ocol % nyc;
                let ox = &xt.coords[oxc];
                let oy = &yt.coords[oyc];
                let oxi = &xt.idx[oxc];
                let oyi = &yt.idx[oyc];

                for &scol in &gcols {
                    let sxc = scol / nyc;
                    let syc = scol % nyc;

                    // horizontal difference must stay on the lattice
                    let mut fxc = 0usize;
                    let mut ok = true;
                    for a in 0..n {
                        let d = oxi[a] as isize - xt.idx[sxc][a] as isize + (nx / 2) as isize;
                        if d < 0 || d >= nx as isize {
                            ok = false;
                            break;
                        }
                        fxc = fxc * nx + d as usize;
                    }
                    if !ok {
                        continue;
                    }
                    let mut fyc = 0usize;
                    for a in 0..n {
                        let d = oyi[a] as isize - yt.idx[syc][a] as isize + (ny / 2) as isize;
                        if d < 0 || d >= ny as isize {
                            ok = false;
                            break;
                        }
                        fyc = fyc * ny + d as usize;
                    }
                    if !ok {
                        continue;
                    }

                    let fcol = fxc * nyc + fyc;
                    let (flo, fhi) = fwin[fcol];
                    if flo >= fhi {
                        continue;
                    }
                    let (flo, fhi) = (flo as isize, fhi as isize);

                    let sx = &xt.coords[sxc];
                    let sy = &yt.coords[syc];
                    let mut twist = 0.0;
                    for a in 0..n {
                        twist += ox[a] * sy[a] - sx[a] * oy[a];
                    }
                    let shear = -2.0 * twist / htau;
                    let base = shear.floor();
                    let frac = shear - base;
                    let bs = base as isize;

                    // skip pairs whose shifted window cannot meet the grid
                    let half = (ntau / 2) as isize;
                    if bs <= -(2 * ntau as isize) || bs >= 2 * ntau as isize {
                        continue;
                    }

                    // blended kernel line over its nonzero support
                    let fline = &fvals[fcol * ntau..(fcol + 1) * ntau];
                    let blo = flo - 1;
                    let bhi = fhi; // inclusive range [blo, bhi - 1] plus edge
                    for m in blo..=bhi {
                        let a = if m >= 0 && m < ntau as isize {
                            fline[m as usize]
                        } else {
                            0.0
                        };
                        let b = if m + 1 >= 0 && m + 1 < ntau as isize {
                            fline[(m + 1) as usize]
                        } else {
                            0.0
                        };
                        bline[(pad as isize + m) as usize] = (1.0 - frac) * a + frac * b;
                    }

                    let (glo, ghi) = gwin[scol];
                    let gline = &gvals[scol * ntau..(scol + 1) * ntau];
                    let k0 = pad as isize + half + bs;
                    for j in glo as isize..ghi as isize {
                        let gv = gline[j as usize];
                        if gv == 0.0 {
                            continue;
                        }
                        // c-range where the blended index stays in support
                        let c_lo = (blo - half - bs + j).max(0);
                        let c_hi = (bhi - half - bs + j + 1).min(ntau as isize);
                        if c_lo >= c_hi {
                            continue;
                        }
                        let start = (c_lo - j + k0) as usize;
                        let src = &bline[start..start + (c_hi - c_lo) as usize];
                        let dst = &mut ochunk[c_lo as usize..c_hi as usize];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += gv * s;
                        }
                    }

                    // clear the scratch window for the next pair
                    for m in blo..=bhi {
                        bline[(pad as isize + m) as usize] = 0.0;
                    }
                }

                for v in ochunk.iter_mut() {
                    *v *= cell;
                }
            },
        );

    GridField::new(spec.clone(), out)
}

/// Heat semigroup `S(t) f = h_t ∗ f`, with `h_t` obtained from the
/// unit-time table by parabolic scaling.
///
/// Convolution with a nonnegative kernel of discrete mass ≤ 1 makes this a
/// positivity-preserving contraction: box mass and the maximum value never
/// increase.
pub fn heat_semigroup_apply(table: &KernelTable, f: &GridField, t: f64) -> Result<GridField> {
    if !(t > 0.0) {
        return Err(Error::usage(format!("time must be positive, got {t}")));
    }
    let ht = kernel_field_from_table(table, f.spec(), t)?;
    group_convolve(&ht, f)
}
