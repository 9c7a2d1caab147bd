//! Fused correlation scans: dot products of every dictionary column against a
//! block of per-build vectors.
//!
//! Wide blocks are interleaved row-major and processed four buffered columns
//! at a time, so one pass over the block feeds four independent FMA chains
//! per lane tile; that keeps the kernel compute-bound instead of re-streaming
//! the block per column. The lane kernels are written with explicit x86 FMA
//! intrinsics (AVX-512 or AVX2, picked at runtime) because the compiler does
//! not reliably pack these reductions; everything falls back to portable
//! scalar code elsewhere. This is the hot kernel of every ranking step.

use super::dict::Dictionary;

/// Columns per chunk handed to the per-build sinks.
pub const CHUNK: usize = 512;

/// Blocks narrower than this use the contiguous per-vector path.
const NARROW: usize = 4;

/// Columns buffered per pass over the vector block.
const COLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Isa {
    Avx512,
    Avx2,
    Generic,
}

fn isa() -> Isa {
    use std::sync::OnceLock;
    static ISA: OnceLock<Isa> = OnceLock::new();
    *ISA.get_or_init(|| {
        #[cfg(target_arch = "x86_64")]
        {
            if is_x86_feature_detected!("avx512f") {
                return Isa::Avx512;
            }
            if is_x86_feature_detected!("avx2") && is_x86_feature_detected!("fma") {
                return Isa::Avx2;
            }
        }
        Isa::Generic
    })
}

/// Computes, for every column j and every build b,
/// `dot(col_j (optionally squared), v_b)` where `v_b` is column b of the
/// row-major block `v_rm` (n rows, nb columns).
///
/// Results arrive chunk by chunk: `sink(j0, len, dots)` with `dots[b * len + (j - j0)]`.
pub fn scan_dots(
    dict: &dyn Dictionary,
    v_rm: &[f64],
    nb: usize,
    square: bool,
    sink: &mut dyn FnMut(usize, usize, &[f64]),
) {
    let n = dict.n_rows();
    let p = dict.n_cols();
    debug_assert_eq!(v_rm.len(), n * nb);
    if p == 0 || nb == 0 {
        return;
    }
    // De-interleave narrow blocks once; contiguous dots beat strided lanes.
    let narrow: Vec<Vec<f64>> = if nb < NARROW {
        (0..nb)
            .map(|b| (0..n).map(|i| v_rm[i * nb + b]).collect())
            .collect()
    } else {
        Vec::new()
    };

    let mut dots = vec![0.0f64; nb * CHUNK];
    let mut group = vec![0.0f64; COLS * n];
    let mut in_group = 0usize;
    let mut chunk_start = 0usize;
    let mut filled = 0usize;

    dict.stream(&mut |j, col| {
        debug_assert_eq!(j, chunk_start + filled + in_group);
        let len = (p - chunk_start).min(CHUNK);
        if nb < NARROW {
            let col = if square {
                let dst = &mut group[..n];
                for (d, &c) in dst.iter_mut().zip(col) {
                    *d = c * c;
                }
                &*dst
            } else {
                col
            };
            for (b, v) in narrow.iter().enumerate() {
                dots[b * len + filled] = dot_contig(col, v);
            }
            filled += 1;
        } else {
            {
                let dst = &mut group[in_group * n..(in_group + 1) * n];
                if square {
                    for (d, &c) in dst.iter_mut().zip(col) {
                        *d = c * c;
                    }
                } else {
                    dst.copy_from_slice(col);
                }
            }
            in_group += 1;
            if in_group == COLS || filled + in_group == len {
                flush_group(&group, in_group, n, v_rm, nb, &mut dots, len, filled);
                filled += in_group;
                in_group = 0;
            }
        }
        if filled == len {
            sink(chunk_start, len, &dots[..nb * len]);
            chunk_start += len;
            filled = 0;
        }
    });
    debug_assert_eq!(chunk_start, p);
    debug_assert_eq!(filled, 0);
}

/// Contiguous dot product dispatching to the best available lanes.
pub fn dot_contig(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    #[cfg(target_arch = "x86_64")]
    match isa() {
        Isa::Avx512 => return unsafe { x86::dot_avx512(a, b) },
        Isa::Avx2 => return unsafe { x86::dot_avx2(a, b) },
        Isa::Generic => {}
    }
    dot_scalar(a, b)
}

fn dot_scalar(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for l in 0..4 {
            acc[l] = a[i * 4 + l].mul_add(b[i * 4 + l], acc[l]);
        }
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s = a[i].mul_add(b[i], s);
    }
    s
}

/// Dots of up to COLS buffered columns against the whole block.
#[allow(clippy::too_many_arguments)]
fn flush_group(
    group: &[f64],
    gcount: usize,
    n: usize,
    v_rm: &[f64],
    nb: usize,
    dots: &mut [f64],
    stride: usize,
    jj0: usize,
) {
    debug_assert!(v_rm.len() >= n * nb && group.len() >= gcount * n);
    #[cfg(target_arch = "x86_64")]
    match isa() {
        Isa::Avx512 => {
            return unsafe { x86::flush_avx512(group, gcount, n, v_rm, nb, dots, stride, jj0) }
        }
        Isa::Avx2 => {
            return unsafe { x86::flush_avx2(group, gcount, n, v_rm, nb, dots, stride, jj0) }
        }
        Isa::Generic => {}
    }
    flush_scalar(group, gcount, n, v_rm, nb, dots, stride, jj0);
}

#[allow(clippy::too_many_arguments)]
fn flush_scalar(
    group: &[f64],
    gcount: usize,
    n: usize,
    v_rm: &[f64],
    nb: usize,
    dots: &mut [f64],
    stride: usize,
    jj0: usize,
) {
    for g in 0..gcount {
        let col = &group[g * n..(g + 1) * n];
        for b in 0..nb {
            let mut acc = [0.0f64; 4];
            let chunks = n / 4;
            for i in 0..chunks {
                for l in 0..4 {
                    let row = (i * 4 + l) * nb + b;
                    acc[l] = col[i * 4 + l].mul_add(v_rm[row], acc[l]);
                }
            }
            let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
            for i in chunks * 4..n {
                s = col[i].mul_add(v_rm[i * nb + b], s);
            }
            dots[b * stride + jj0 + g] = s;
        }
    }
}

#[cfg(target_arch = "x86_64")]
mod x86 {
    //! Explicit-FMA lane kernels. All pointer arithmetic is bounded by the
    //! `debug_assert`ed invariants of the safe wrappers: `v_rm` holds
    //! `n * nb` elements, `group` holds `gcount * n`, and lane offsets stay
    //! below `nb`.

    #[cfg(target_arch = "x86_64")]
    use core::arch::x86_64::*;

    use super::COLS;

    #[target_feature(enable = "avx512f")]
    pub unsafe fn dot_avx512(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let ap = a.as_ptr();
        let bp = b.as_ptr();
        let mut acc0 = _mm512_setzero_pd();
        let mut acc1 = _mm512_setzero_pd();
        let mut i = 0usize;
        while i + 16 <= n {
            acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(ap.add(i)), _mm512_loadu_pd(bp.add(i)), acc0);
            acc1 = _mm512_fmadd_pd(
                _mm512_loadu_pd(ap.add(i + 8)),
                _mm512_loadu_pd(bp.add(i + 8)),
                acc1,
            );
            i += 16;
        }
        if i + 8 <= n {
            acc0 = _mm512_fmadd_pd(_mm512_loadu_pd(ap.add(i)), _mm512_loadu_pd(bp.add(i)), acc0);
            i += 8;
        }
        let mut s = _mm512_reduce_add_pd(acc0) + _mm512_reduce_add_pd(acc1);
        while i < n {
            s = (*ap.add(i)).mul_add(*bp.add(i), s);
            i += 1;
        }
        s
    }

    #[target_feature(enable = "avx2", enable = "fma")]
    pub unsafe fn dot_avx2(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let ap = a.as_ptr();
        let bp = b.as_ptr();
        let mut acc0 = _mm256_setzero_pd();
        let mut acc1 = _mm256_setzero_pd();
        let mut i = 0usize;
        while i + 8 <= n {
            acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(ap.add(i)), _mm256_loadu_pd(bp.add(i)), acc0);
            acc1 = _mm256_fmadd_pd(
                _mm256_loadu_pd(ap.add(i + 4)),
                _mm256_loadu_pd(bp.add(i + 4)),
                acc1,
            );
            i += 8;
        }
        let acc = _mm256_add_pd(acc0, acc1);
        let lo = _mm256_castpd256_pd128(acc);
        let hi = _mm256_extractf128_pd(acc, 1);
        let q = _mm_add_pd(lo, hi);
        let mut s = _mm_cvtsd_f64(q) + _mm_cvtsd_f64(_mm_unpackhi_pd(q, q));
        while i < n {
            s = (*ap.add(i)).mul_add(*bp.add(i), s);
            i += 1;
        }
        s
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx512f")]
    pub unsafe fn flush_avx512(
        group: &[f64],
        gcount: usize,
        n: usize,
        v_rm: &[f64],
        nb: usize,
        dots: &mut [f64],
        stride: usize,
        jj0: usize,
    ) {
        let gp = group.as_ptr();
        let vp0 = v_rm.as_ptr();
        let mut b = 0usize;
        // Full 8-lane tiles, then one masked tile for the remaining lanes.
        loop {
            let rest = nb - b;
            if rest == 0 {
                break;
            }
            let lanes_here = rest.min(8);
            let mask: __mmask8 = if lanes_here == 8 {
                0xFF
            } else {
                (1u8 << lanes_here) - 1
            };
            if gcount == COLS {
                let c0 = gp;
                let c1 = gp.add(n);
                let c2 = gp.add(2 * n);
                let c3 = gp.add(3 * n);
                let mut a0 = _mm512_setzero_pd();
                let mut a1 = _mm512_setzero_pd();
                let mut a2 = _mm512_setzero_pd();
                let mut a3 = _mm512_setzero_pd();
                let mut vp = vp0.add(b);
                if lanes_here == 8 {
                    for i in 0..n {
                        let r = _mm512_loadu_pd(vp);
                        a0 = _mm512_fmadd_pd(_mm512_set1_pd(*c0.add(i)), r, a0);
                        a1 = _mm512_fmadd_pd(_mm512_set1_pd(*c1.add(i)), r, a1);
                        a2 = _mm512_fmadd_pd(_mm512_set1_pd(*c2.add(i)), r, a2);
                        a3 = _mm512_fmadd_pd(_mm512_set1_pd(*c3.add(i)), r, a3);
                        vp = vp.add(nb);
                    }
                } else {
                    for i in 0..n {
                        let r = _mm512_maskz_loadu_pd(mask, vp);
                        a0 = _mm512_fmadd_pd(_mm512_set1_pd(*c0.add(i)), r, a0);
                        a1 = _mm512_fmadd_pd(_mm512_set1_pd(*c1.add(i)), r, a1);
                        a2 = _mm512_fmadd_pd(_mm512_set1_pd(*c2.add(i)), r, a2);
                        a3 = _mm512_fmadd_pd(_mm512_set1_pd(*c3.add(i)), r, a3);
                        vp = vp.add(nb);
                    }
                }
                let mut lanes = [0.0f64; 8];
                for (g, acc) in [a0, a1, a2, a3].into_iter().enumerate() {
                    _mm512_storeu_pd(lanes.as_mut_ptr(), acc);
                    for (l, &v) in lanes.iter().enumerate().take(lanes_here) {
                        dots[(b + l) * stride + jj0 + g] = v;
                    }
                }
            } else {
                for g in 0..gcount {
                    let c = gp.add(g * n);
                    let mut a0 = _mm512_setzero_pd();
                    let mut a1 = _mm512_setzero_pd();
                    let mut vp = vp0.add(b);
                    let r2 = n / 2 * 2;
                    let mut i = 0usize;
                    while i < r2 {
                        a0 = _mm512_fmadd_pd(
                            _mm512_set1_pd(*c.add(i)),
                            _mm512_maskz_loadu_pd(mask, vp),
                            a0,
                        );
                        a1 = _mm512_fmadd_pd(
                            _mm512_set1_pd(*c.add(i + 1)),
                            _mm512_maskz_loadu_pd(mask, vp.add(nb)),
                            a1,
                        );
                        vp = vp.add(2 * nb);
                        i += 2;
                    }
                    if i < n {
                        a0 = _mm512_fmadd_pd(
                            _mm512_set1_pd(*c.add(i)),
                            _mm512_maskz_loadu_pd(mask, vp),
                            a0,
                        );
                    }
                    let acc = _mm512_add_pd(a0, a1);
                    let mut lanes = [0.0f64; 8];
                    _mm512_storeu_pd(lanes.as_mut_ptr(), acc);
                    for (l, &v) in lanes.iter().enumerate().take(lanes_here) {
                        dots[(b + l) * stride + jj0 + g] = v;
                    }
                }
            }
            b += lanes_here;
        }
    }

    #[allow(clippy::too_many_arguments)]
    #[target_feature(enable = "avx2", enable = "fma")]
    pub unsafe fn flush_avx2(
        group: &[f64],
        gcount: usize,
        n: usize,
        v_rm: &[f64],
        nb: usize,
        dots: &mut [f64],
        stride: usize,
        jj0: usize,
    ) {
        let gp = group.as_ptr();
        let vp0 = v_rm.as_ptr();
        let mut b = 0usize;
        while b + 4 <= nb {
            if gcount == COLS {
                let c0 = gp;
                let c1 = gp.add(n);
                let c2 = gp.add(2 * n);
                let c3 = gp.add(3 * n);
                let mut a0 = _mm256_setzero_pd();
                let mut a1 = _mm256_setzero_pd();
                let mut a2 = _mm256_setzero_pd();
                let mut a3 = _mm256_setzero_pd();
                let mut vp = vp0.add(b);
                for i in 0..n {
                    let r = _mm256_loadu_pd(vp);
                    a0 = _mm256_fmadd_pd(_mm256_set1_pd(*c0.add(i)), r, a0);
                    a1 = _mm256_fmadd_pd(_mm256_set1_pd(*c1.add(i)), r, a1);
                    a2 = _mm256_fmadd_pd(_mm256_set1_pd(*c2.add(i)), r, a2);
                    a3 = _mm256_fmadd_pd(_mm256_set1_pd(*c3.add(i)), r, a3);
                    vp = vp.add(nb);
                }
                let mut lanes = [0.0f64; 4];
                for (g, acc) in [a0, a1, a2, a3].into_iter().enumerate() {
                    _mm256_storeu_pd(lanes.as_mut_ptr(), acc);
                    for (l, &v) in lanes.iter().enumerate() {
                        dots[(b + l) * stride + jj0 + g] = v;
                    }
                }
            } else {
                for g in 0..gcount {
                    let c = gp.add(g * n);
                    let mut a0 = _mm256_setzero_pd();
                    let mut a1 = _mm256_setzero_pd();
                    let mut vp = vp0.add(b);
                    let r2 = n / 2 * 2;
                    let mut i = 0usize;
                    while i < r2 {
                        a0 = _mm256_fmadd_pd(_mm256_set1_pd(*c.add(i)), _mm256_loadu_pd(vp), a0);
                        a1 = _mm256_fmadd_pd(
                            _mm256_set1_pd(*c.add(i + 1)),
                            _mm256_loadu_pd(vp.add(nb)),
                            a1,
                        );
                        vp = vp.add(2 * nb);
                        i += 2;
                    }
                    if i < n {
                        a0 = _mm256_fmadd_pd(_mm256_set1_pd(*c.add(i)), _mm256_loadu_pd(vp), a0);
                    }
                    let acc = _mm256_add_pd(a0, a1);
                    let mut lanes = [0.0f64; 4];
                    _mm256_storeu_pd(lanes.as_mut_ptr(), acc);
                    for (l, &v) in lanes.iter().enumerate() {
                        dots[(b + l) * stride + jj0 + g] = v;
                    }
                }
            }
            b += 4;
        }
        if b < nb {
            tail_lanes(group, gcount, n, v_rm, nb, b, dots, stride, jj0);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn tail_lanes(
        group: &[f64],
        gcount: usize,
        n: usize,
        v_rm: &[f64],
        nb: usize,
        b: usize,
        dots: &mut [f64],
        stride: usize,
        jj0: usize,
    ) {
        let rest = nb - b;
        for g in 0..gcount {
            let col = &group[g * n..(g + 1) * n];
            let mut acc = [0.0f64; 7];
            for (i, &c) in col.iter().enumerate() {
                for l in 0..rest {
                    acc[l] = c.mul_add(v_rm[i * nb + b + l], acc[l]);
                }
            }
            for (l, &a) in acc.iter().enumerate().take(rest) {
                dots[(b + l) * stride + jj0 + g] = a;
            }
        }
    }
}
