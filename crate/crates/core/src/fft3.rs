//! Forward 3D FFT of a real cubic grid, returning the half spectrum.
//!
//! Input is `n³` reals with x fastest (`x + n·(y + n·z)`). Output holds
//! `kx ∈ 0..=n/2` only, laid out as `kx + h·(ky + n·kz)` with `h = n/2 + 1`;
//! the other half follows from conjugate symmetry, see [`HalfLayout`].
//! The transform is unnormalized with kernel `exp(-2πi·jk/n)`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

/// Index bookkeeping for a half spectrum of an `n³` real grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfLayout {
    n: usize,
}

impl HalfLayout {
    pub fn new(n: usize) -> Self {
        HalfLayout { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored extent along x.
    pub fn h(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn len(&self) -> usize {
        self.h() * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Maps a full-grid index triple (each in `0..n`, FFT order) to the
    /// stored slot and whether the stored value must be conjugated.
    #[inline]
    pub fn locate(&self, ix: usize, iy: usize, iz: usize) -> (usize, bool) {
        let n = self.n;
        let h = self.h();
        if ix < h {
            (ix + h * (iy + n * iz), false)
        } else {
            let (mx, my, mz) = ((n - ix) % n, (n - iy) % n, (n - iz) % n);
            (mx + h * (my + n * mz), true)
        }
    }

    /// Full-grid index triple of a stored slot.
    #[inline]
    pub fn triple(&self, slot: usize) -> (usize, usize, usize) {
        let h = self.h();
        let ix = slot % h;
        let rest = slot / h;
        (ix, rest % self.n, rest / self.n)
    }
}

/// Signed frequency index in FFT order: `0, 1, …, n/2, -(n/2 - 1), …, -1`.
#[inline]
pub fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Inverse of [`signed_index`]; `None` when outside the grid.
#[inline]
pub fn fft_index(m: i64, n: usize) -> Option<usize> {
    let n_i = n as i64;
    let lo = -((n_i - 1) / 2);
    let hi = n_i / 2;
    (lo..=hi).contains(&m).then(|| m.rem_euclid(n_i) as usize)
}

/// Reusable plans for one grid size.
pub struct RealFft3 {
    n: usize,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2c: Arc<dyn Fft<f64>>,
}

impl RealFft3 {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points per axis");
        let r2c = RealFftPlanner::<f64>::new().plan_fft_forward(n);
        let c2c = FftPlanner::<f64>::new().plan_fft_forward(n);
        RealFft3 { n, r2c, c2c }
    }

    pub fn layout(&self) -> HalfLayout {
        HalfLayout::new(self.n)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        assert_eq!(input.len(), n * n * n, "input is not n³");
        self.forward_planes(|iz, plane| plane.copy_from_slice(&input[iz * n * n..(iz + 1) * n * n]))
    }

    /// Forward transform of a cube supplied one z plane at a time;
    /// `fill(iz, plane)` must overwrite all n² values of plane `iz`.
    pub fn forward_planes<F>(&self, fill: F) -> Vec<Complex64>
    where
        F: Fn(usize, &mut [f64]) + Sync,
    {
        let n = self.n;
        let h = n / 2 + 1;
        let zero = Complex64::new(0.0, 0.0);
        let mut data = zeroed(h * n * n);

        // x then y within each z plane
        data.par_chunks_mut(h * n).enumerate().for_each_init(
            || {
                (
                    vec![0.0; n * n],
                    self.r2c.make_scratch_vec(),
                    vec![zero; h * n],
                    vec![zero; self.c2c.get_inplace_scratch_len()],
                )
            },
            |(plane, r_scratch, buf, c_scratch), (iz, out_plane)| {
                fill(iz, plane);
                for (out_row, in_row) in out_plane.chunks_mut(h).zip(plane.chunks_mut(n)) {
                    self.r2c
                        .process_with_scratch(in_row, out_row, r_scratch)
                        .expect("realfft buffer sizes");
                }
                transpose(out_plane, n, h, buf);
                self.c2c.process_with_scratch(buf, c_scratch);
                transpose(buf, h, n, out_plane);
            },
        );

        // z: one (kx, kz) slab per ky, gathered straight into kz-contiguous lines
        let mut buf = vec![zero; h * n];
        for ky in 0..n {
            for_blocks(n, h, |kz, kx| buf[kx * n + kz] = data[h * (ky + n * kz) + kx]);
            buf.par_chunks_mut(n).for_each_init(
                || vec![zero; self.c2c.get_inplace_scratch_len()],
                |scratch, line| self.c2c.process_with_scratch(line, scratch),
            );
            for_blocks(n, h, |kz, kx| data[h * (ky + n * kz) + kx] = buf[kx * n + kz]);
        }
        data
    }
}

/// Visits every `(r, c)` of a `rows × cols` index space in cache-sized tiles.
#[inline]
fn for_blocks(rows: usize, cols: usize, mut f: impl FnMut(usize, usize)) {
    const B: usize = 16;
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    f(r, c);
                }
            }
        }
    }
}

/// A zero-filled buffer from zeroed pages, without an explicit fill pass.
pub(crate) fn zeroed(len: usize) -> Vec<Complex64> {
    if len == 0 {
        return Vec::new();
    }
    let layout = std::alloc::Layout::array::<Complex64>(len).expect("buffer size overflows");
    // SAFETY: Complex64 is two f64s and all-zero bits are 0.0 + 0.0i; the
    // pointer comes from the global allocator with this exact layout.
    unsafe {
        let ptr = std::alloc::alloc_zeroed(layout) as *mut Complex64;
        if ptr.is_null() {
            std::alloc::handle_alloc_error(layout);
        }
        Vec::from_raw_parts(ptr, len, len)
    }
}

/// `dst[c·rows + r] = src[r·cols + c]` in cache-sized blocks.
fn transpose<T: Copy>(src: &[T], rows: usize, cols: usize, dst: &mut [T]) {
    const B: usize = 16;
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    for r0 in (0..rows).step_by(B) {
        for c0 in (0..cols).step_by(B) {
            for r in r0..(r0 + B).min(rows) {
                for c in c0..(c0 + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

/// Unnormalized forward DFT of one real line, full length.
pub fn forward_1d_real(input: &[f64]) -> Vec<Complex64> {
    let n = input.len();
    let mut buf: Vec<Complex64> = input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    buf
}
