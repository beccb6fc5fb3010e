# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implicit-midpoint loop on banded, node-interleaved matrices."""

cdef inline void _band_matvec(const double[:, ::1] ab, const double[::1] x,
                              double[::1] y, double scale) noexcept nogil:
    # y += scale * A x, A symmetric in lower band form
    cdef Py_ssize_t n = ab.shape[1], nb = ab.shape[0], i, k
    cdef double c
    for i in range(n):
        y[i] += scale * ab[0, i] * x[i]
    for k in range(1, nb):
        for i in range(n - k):
            c = scale * ab[k, i]
            y[i] += c * x[i + k]
            y[i + k] += c * x[i]


cdef inline double _band_quad(const double[:, ::1] ab, const double[::1] x) noexcept nogil:
    # x' A x accumulated row by row so neighbouring terms cancel locally
    cdef Py_ssize_t n = ab.shape[1], nb = ab.shape[0], i, k
    cdef double s = 0.0, r
    for i in range(n):
        r = ab[0, i] * x[i]
        for k in range(1, nb):
            if i + k < n:
                r += ab[k, i] * x[i + k]
            if i - k >= 0:
                r += ab[k, i - k] * x[i - k]
        s += x[i] * r
    return s


cdef inline void _band_cho_solve(const double[:, ::1] c, double[::1] x) noexcept nogil:
    # in-place solve of L L^T x = b, L in lower band form
    cdef Py_ssize_t n = c.shape[1], nb = c.shape[0], j, k
    cdef double s
    for j in range(n):
        s = x[j]
        for k in range(1, nb):
            if j - k >= 0:
                s -= c[k, j - k] * x[j - k]
        x[j] = s / c[0, j]
    for j in range(n - 1, -1, -1):
        s = x[j]
        for k in range(1, nb):
            if j + k < n:
                s -= c[k, j] * x[j + k]
        x[j] = s / c[0, j]


def midpoint_run(const double[:, ::1] mband, const double[:, ::1] kband,
                 const double[::1] damp, const double[:, ::1] sfac, double dt,
                 double[::1] q, double[::1] v, Py_ssize_t nsteps, Py_ssize_t record_every,
                 double[:, ::1] q_out, double[:, ::1] v_out,
                 double[::1] energy_out, double[::1] dissip_out):
    """Advance ``nsteps`` implicit-midpoint steps in place.

    ``sfac`` is the banded Cholesky factor of ``M + dt/2 D + dt^2/4 K``.
    Writes the total energy after every step, the per-step dissipated energy
    ``dt * sum d_i w_i^2`` (``w`` the midpoint velocity), and every
    ``record_every``-th state into ``q_out``/``v_out`` (row 0 is the start).
    """
    cdef Py_ssize_t n = q.shape[0], step, i, rec = 1
    cdef double half = 0.5 * dt, s
    cdef double[::1] w = q.copy()
    with nogil:
        energy_out[0] = 0.5 * (_band_quad(kband, q) + _band_quad(mband, v))
        for i in range(n):
            q_out[0, i] = q[i]
            v_out[0, i] = v[i]
        for step in range(nsteps):
            for i in range(n):
                w[i] = 0.0
            _band_matvec(mband, v, w, 1.0)
            _band_matvec(kband, q, w, -half)
            _band_cho_solve(sfac, w)
            s = 0.0
            for i in range(n):
                q[i] += dt * w[i]
                v[i] = 2.0 * w[i] - v[i]
                s += damp[i] * w[i] * w[i]
            dissip_out[step] = dt * s
            energy_out[step + 1] = 0.5 * (_band_quad(kband, q) + _band_quad(mband, v))
            if (step + 1) % record_every == 0:
                for i in range(n):
                    q_out[rec, i] = q[i]
                    v_out[rec, i] = v[i]
                rec += 1
