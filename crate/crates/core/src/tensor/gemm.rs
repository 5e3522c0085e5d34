//! Row-major single-precision matrix products backed by `matrixmultiply`.

#[derive(Clone, Copy)]
pub(crate) enum Layout {
    /// Stored row-major as given.
    Normal,
    /// Stored row-major, used transposed.
    Transposed,
}

/// `c = a · b + beta · c` where `a` is `m × k`, `b` is `k × n` and `c` is `m × n`
/// after applying the layouts. All buffers are dense and row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    a_layout: Layout,
    b: &[f32],
    b_layout: Layout,
    beta: f32,
    c: &mut [f32],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    let (rsa, csa) = match a_layout {
        Layout::Normal => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_layout {
        Layout::Normal => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };
    // SAFETY: the asserts above guarantee every index reachable through the
    // given dimensions and strides lies inside the slices.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
