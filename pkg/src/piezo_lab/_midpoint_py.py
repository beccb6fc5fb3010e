"""Pure-Python version of the midpoint loop in ``_midpoint.pyx``."""
import numpy as np
from scipy.linalg import cho_solve_banded

from .banded import sym_band_matvec


def midpoint_run(mband, kband, damp, sfac, dt, q, v, nsteps, record_every,
                 q_out, v_out, energy_out, dissip_out):
    half = 0.5 * dt
    mband = np.asarray(mband)
    kband = np.asarray(kband)
    damp = np.asarray(damp)
    fac = (np.asarray(sfac), True)

    def total(q, v):
        return 0.5 * (q @ sym_band_matvec(kband, q) + v @ sym_band_matvec(mband, v))

    energy_out[0] = total(q, v)
    q_out[0] = q
    v_out[0] = v
    rec = 1
    for step in range(nsteps):
        w = sym_band_matvec(mband, v) - half * sym_band_matvec(kband, q)
        w = cho_solve_banded(fac, w, check_finite=False)
        q += dt * w
        v[:] = 2.0 * w - v
        dissip_out[step] = dt * (damp @ (w * w))
        energy_out[step + 1] = total(q, v)
        if (step + 1) % record_every == 0:
            q_out[rec] = q
            v_out[rec] = v
            rec += 1
