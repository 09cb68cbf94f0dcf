//! Isotropic Gaussian convolution in exact integer arithmetic.
//!
//! Inputs in `[0,1]` are quantized to `INPUT_BITS` fractional bits and the 1-D
//! taps are integers, so every output voxel is an exact integer ratio. The three
//! separable passes therefore commute and mirror symmetrically, which makes the
//! operator exactly equivariant under the 24 axis-aligned rotations. Near the
//! faces the kernel is truncated and renormalized to unit mass, so constants
//! are preserved and the operator stays non-expansive up to the quantization
//! step `2^-INPUT_BITS`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ScalarField3D;
use crate::potentials::ChannelId;

pub const INPUT_BITS: u32 = 42;
const MAX_TAP_BITS: u32 = 21;

/// Largest step by which quantization can violate the 1-Lipschitz bound.
pub const QUANTIZATION_STEP: f64 = 1.0 / (1u64 << INPUT_BITS) as f64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussianKernel {
    radius: usize,
    tap_bits: u32,
    /// `taps[r + a]` for offsets `a` in `-r..=r`.
    taps: Vec<u64>,
}

impl GaussianKernel {
    /// Taps `round(2^W exp(-a² h² / (2σ²)))` for `|a| ≤ min(⌈3σ/h⌉, max_len - 1)`.
    pub fn new(sigma: f64, spacing: f64, max_len: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
        }
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::domain(format!("spacing must be positive, got {spacing}")));
        }
        let reach = (3.0 * sigma / spacing).ceil();
        let radius = (reach.min(1e6) as usize).min(max_len.saturating_sub(1));
        let shape: Vec<f64> = (0..=radius)
            .map(|a| {
                let x = a as f64 * spacing / sigma;
                (-0.5 * x * x).exp()
            })
            .collect();
        // x pass sums mass * 2^INPUT_BITS in a u64
        let mut bits = MAX_TAP_BITS;
        loop {
            let scale = (1u64 << bits) as f64;
            let half: Vec<u64> = shape.iter().map(|g| (g * scale).round() as u64).collect();
            let mass: u64 = half[0] + 2 * half[1..].iter().sum::<u64>();
            if (mass as u128) << INPUT_BITS < 1u128 << 64 {
                let taps = (0..=2 * radius).map(|t| half[t.abs_diff(radius)]).collect();
                return Ok(GaussianKernel {
                    radius,
                    tap_bits: bits,
                    taps,
                });
            }
            bits -= 1;
        }
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// `W`, the fixed-point scale of the taps: the center tap is `2^W`.
    pub fn tap_bits(&self) -> u32 {
        self.tap_bits
    }

    pub fn taps(&self) -> &[u64] {
        &self.taps
    }

    /// Taps divided by their sum.
    pub fn normalized_taps(&self) -> Vec<f64> {
        let m: u64 = self.taps.iter().sum();
        self.taps.iter().map(|&t| t as f64 / m as f64).collect()
    }

    /// Sum of the taps that land inside `0..n` when centered on `i`.
    fn inbound_mass(&self, i: usize, n: usize) -> u64 {
        let r = self.radius;
        let lo = i.saturating_sub(r);
        let hi = (i + r).min(n - 1);
        (lo..=hi).map(|p| self.taps[p + r - i]).sum()
    }
}

/// One GENEO unit: a channel and the width of its Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneoUnit {
    pub channel: ChannelId,
    pub sigma: f64,
}

pub fn quantize(x: f64) -> u64 {
    (x * (1u64 << INPUT_BITS) as f64).round() as u64
}

/// Convolve a `[0,1]`-valued field with the unit's kernel.
pub fn apply_unit(unit: &GeneoUnit, field: &ScalarField3D) -> Result<ScalarField3D> {
    let spec = field.spec();
    let max_len = *spec.dims().iter().max().unwrap_or(&1);
    let kernel = GaussianKernel::new(unit.sigma, spec.spacing(), max_len)?;
    apply_kernel(&kernel, field)
}

const LOW32: u64 = (1 << 32) - 1;

const TWO64: f64 = 18446744073709551616.0;

/// Nearest-ish float of a 128-bit integer; cheaper than `as f64`.
#[inline]
fn to_f64(x: u128) -> f64 {
    (x >> 64) as u64 as f64 * TWO64 + x as u64 as f64
}

/// `(num / den, num % den)` for quotients below 2^63, without a slow 128-bit
/// division: the float estimate is off by at most a few units and gets corrected.
#[inline]
fn div_rem(num: u128, den: u128) -> (u64, u128) {
    let mut q = (to_f64(num) / to_f64(den)) as u64;
    let mut p = q as u128 * den;
    while p > num {
        q -= 1;
        p -= den;
    }
    let mut rem = num - p;
    while rem >= den {
        q += 1;
        rem -= den;
    }
    (q, rem)
}

// Every pass works on 32-bit limbs and overwrites its output. A tap is below
// 2^22 and the taps sum to less than 2^22, so each accumulator stays below 2^54.

/// `dst[c * rows + r] = src[r * cols + c]`, in cache-sized tiles.
#[inline(always)]
fn transpose(src: &[u32], dst: &mut [u32], rows: usize, cols: usize) {
    const TILE: usize = 32;
    for r0 in (0..rows).step_by(TILE) {
        for c0 in (0..cols).step_by(TILE) {
            for r in r0..(r0 + TILE).min(rows) {
                for c in c0..(c0 + TILE).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Along an outer axis of length `n` whose neighbours are `block` apart.
/// Columns go in strips of `STRIP` so the sums stay in registers across taps.
#[inline(always)]
fn pass_outer(src: &[u32], dst: &mut [u64], n: usize, block: usize, taps: &[u32], r: usize) {
    const STRIP: usize = 16;
    let strips = block / STRIP * STRIP;
    for (s, d) in src.chunks_exact(n * block).zip(dst.chunks_exact_mut(n * block)) {
        for (c, out) in d.chunks_exact_mut(block).enumerate() {
            let lo = c.saturating_sub(r);
            let hi = (c + r).min(n - 1);
            for col in (0..strips).step_by(STRIP) {
                let mut acc = [0u64; STRIP];
                for p in lo..=hi {
                    let t = taps[p + r - c] as u64;
                    let row = &s[p * block + col..p * block + col + STRIP];
                    for l in 0..STRIP {
                        acc[l] += t * row[l] as u64;
                    }
                }
                out[col..col + STRIP].copy_from_slice(&acc);
            }
            for col in strips..block {
                out[col] = (lo..=hi).map(|p| taps[p + r - c] as u64 * s[p * block + col] as u64).sum();
            }
        }
    }
}

pub fn apply_kernel(kernel: &GaussianKernel, field: &ScalarField3D) -> Result<ScalarField3D> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: the feature was just detected
        return unsafe { apply_kernel_avx2(kernel, field) };
    }
    apply_kernel_body(kernel, field)
}

// Integer arithmetic: wider registers cannot change the result.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn apply_kernel_avx2(kernel: &GaussianKernel, field: &ScalarField3D) -> Result<ScalarField3D> {
    apply_kernel_body(kernel, field)
}

#[inline(always)]
fn apply_kernel_body(kernel: &GaussianKernel, field: &ScalarField3D) -> Result<ScalarField3D> {
    let spec = *field.spec();
    let [nx, ny, nz] = spec.dims();
    let len = spec.len();
    let r = kernel.radius;
    let taps: Vec<u32> = kernel.taps.iter().map(|&t| t as u32).collect();

    let mut lo = Vec::with_capacity(len);
    let mut hi = Vec::with_capacity(len);
    for &v in field.values() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::domain(format!("convolution input {v} outside [0,1]")));
        }
        let q = quantize(v);
        lo.push((q & LOW32) as u32);
        hi.push((q >> 32) as u32);
    }

    // x: run as an outer pass on the transpose so every tap streams whole
    // rows; the sum stays below mass * 2^INPUT_BITS < 2^64
    let lines = ny * nz;
    let mut lo_t = vec![0u32; len];
    let mut hi_t = vec![0u32; len];
    transpose(&lo, &mut lo_t, lines, nx);
    transpose(&hi, &mut hi_t, lines, nx);
    let mut a0 = vec![0u64; len];
    let mut a1 = vec![0u64; len];
    pass_outer(&lo_t, &mut a0, nx, lines, &taps, r);
    pass_outer(&hi_t, &mut a1, nx, lines, &taps, r);
    for (i, (r0, r1)) in a0.chunks_exact(lines).zip(a1.chunks_exact(lines)).enumerate() {
        for (line, (&x0, &x1)) in r0.iter().zip(r1).enumerate() {
            let v = x0 + (x1 << 32);
            lo[line * nx + i] = (v & LOW32) as u32;
            hi[line * nx + i] = (v >> 32) as u32;
        }
    }

    // y: the value is below 2^86, spread it over three limbs
    pass_outer(&lo, &mut a0, ny, nx, &taps, r);
    pass_outer(&hi, &mut a1, ny, nx, &taps, r);
    let mut top = vec![0u32; len];
    for (((l, m), t), (&y0, &y1)) in lo.iter_mut().zip(hi.iter_mut()).zip(top.iter_mut()).zip(a0.iter().zip(&a1)) {
        let h = y1 + (y0 >> 32);
        *l = (y0 & LOW32) as u32;
        *m = (h & LOW32) as u32;
        *t = (h >> 32) as u32;
    }

    // z
    let plane = nx * ny;
    let mut a2 = vec![0u64; len];
    pass_outer(&lo, &mut a0, nz, plane, &taps, r);
    pass_outer(&hi, &mut a1, nz, plane, &taps, r);
    pass_outer(&top, &mut a2, nz, plane, &taps, r);

    let mx: Vec<u64> = (0..nx).map(|i| kernel.inbound_mass(i, nx)).collect();
    let my: Vec<u64> = (0..ny).map(|j| kernel.inbound_mass(j, ny)).collect();
    let mz: Vec<u64> = (0..nz).map(|k| kernel.inbound_mass(k, nz)).collect();
    let mut out = Vec::with_capacity(len);
    let mut idx = 0;
    for k in 0..nz {
        for j in 0..ny {
            let myz = my[j] as u128 * mz[k] as u128;
            for &m in &mx {
                let den = myz * m as u128;
                let num = a0[idx] as u128 + ((a1[idx] as u128) << 32) + ((a2[idx] as u128) << 64);
                let (whole, rem) = div_rem(num, den);
                out.push(((whole as f64 + to_f64(rem) / to_f64(den)) * QUANTIZATION_STEP).min(1.0));
                idx += 1;
            }
        }
    }
    ScalarField3D::new(spec, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{rotate_field, GridSpec, Rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> GridSpec {
        GridSpec::new([0.0; 3], 1.0, [n; 3]).unwrap()
    }

    /// Direct 3-D sum with renormalization over the in-bounds part of the kernel.
    fn brute(kernel: &GaussianKernel, f: &ScalarField3D) -> Vec<f64> {
        let spec = f.spec();
        let [nx, ny, nz] = spec.dims();
        let r = kernel.radius() as i64;
        let t = kernel.normalized_taps();
        let mut out = Vec::new();
        for k in 0..nz as i64 {
            for j in 0..ny as i64 {
                for i in 0..nx as i64 {
                    let (mut num, mut den) = (0.0, 0.0);
                    for c in -r..=r {
                        for b in -r..=r {
                            for a in -r..=r {
                                let (x, y, z) = (i + a, j + b, k + c);
                                if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
                                    continue;
                                }
                                let w = t[(a + r) as usize] * t[(b + r) as usize] * t[(c + r) as usize];
                                num += w * f.get([x as usize, y as usize, z as usize]);
                                den += w;
                            }
                        }
                    }
                    out.push(num / den);
                }
            }
        }
        out
    }

    #[test]
    fn taps_follow_the_gaussian() {
        for sigma in [0.4, 1.0, 2.561, 6.166] {
            let k = GaussianKernel::new(sigma, 1.0, 100).unwrap();
            assert_eq!(k.radius(), (3.0f64 * sigma).ceil() as usize);
            let scale = (1u64 << k.tap_bits()) as f64;
            for (n, &t) in k.taps().iter().enumerate() {
                let a = n as f64 - k.radius() as f64;
                let g = (-a * a / (2.0 * sigma * sigma)).exp();
                assert!((t as f64 / scale - g).abs() <= 0.5 / scale);
            }
            assert_eq!(k.taps()[k.radius()], 1 << k.tap_bits());
            assert!(k.tap_bits() >= 16);
        }
    }

    #[test]
    fn radius_capped_by_grid() {
        let k = GaussianKernel::new(50.0, 1.0, 10).unwrap();
        assert_eq!(k.radius(), 9);
        assert!(GaussianKernel::new(0.0, 1.0, 10).is_err());
    }

    #[test]
    fn constant_is_preserved() {
        let f = ScalarField3D::filled(GridSpec::new([0.0; 3], 1.0, [7, 5, 9]).unwrap(), 0.375);
        let u = GeneoUnit {
            channel: ChannelId::Polar,
            sigma: 3.110,
        };
        let g = apply_unit(&u, &f).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.375));
    }

    #[test]
    fn hot_voxel_matches_direct_sum() {
        let spec = cube(12);
        let mut f = ScalarField3D::filled(spec, 0.0);
        f.set([3, 7, 5], 1.0);
        let kernel = GaussianKernel::new(3.110, 1.0, 12).unwrap();
        let got = apply_kernel(&kernel, &f).unwrap();
        for (a, b) in got.values().iter().zip(brute(&kernel, &f)) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn random_field_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = GridSpec::new([0.0; 3], 0.5, [6, 9, 5]).unwrap();
        // dyadic inputs are represented exactly by the quantizer
        let f = ScalarField3D::from_fn(spec, |_| rng.random_range(0..=1u64 << INPUT_BITS) as f64 * QUANTIZATION_STEP);
        let kernel = GaussianKernel::new(1.3, 0.5, 9).unwrap();
        let got = apply_kernel(&kernel, &f).unwrap();
        for (a, b) in got.values().iter().zip(brute(&kernel, &f)) {
            assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn rejects_out_of_range_input() {
        let f = ScalarField3D::filled(cube(3), 1.5);
        let u = GeneoUnit {
            channel: ChannelId::Distance,
            sigma: 1.0,
        };
        assert!(matches!(apply_unit(&u, &f), Err(Error::Domain(_))));
    }

    #[test]
    fn exactly_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = ScalarField3D::from_fn(cube(9), |_| rng.random::<f64>());
        let u = GeneoUnit {
            channel: ChannelId::Distance,
            sigma: 2.561,
        };
        let base = apply_unit(&u, &f).unwrap();
        for rot in Rotation::all() {
            let lhs = apply_unit(&u, &rotate_field(&f, rot).unwrap()).unwrap();
            assert_eq!(lhs, rotate_field(&base, rot).unwrap());
        }
    }

    #[test]
    fn one_voxel_perturbation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField3D::from_fn(cube(8), |_| rng.random::<f64>());
        let mut g = f.clone();
        g.set([2, 5, 1], (f.get([2, 5, 1]) + 0.3).min(1.0));
        let delta = f.sup_distance(&g).unwrap();
        let u = GeneoUnit {
            channel: ChannelId::Distance,
            sigma: 4.678,
        };
        let d = apply_unit(&u, &f).unwrap().sup_distance(&apply_unit(&u, &g).unwrap()).unwrap();
        assert!(d <= delta + 1e-12);
    }
}
