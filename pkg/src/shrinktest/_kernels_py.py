"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

_CHUNK = 256


def shrink_moments(z, base, kappa, omk):
    z = np.ascontiguousarray(z, dtype=float)
    log_d = np.empty(z.size)
    weight = np.empty(z.size)
    var_k = np.empty(z.size)
    for start in range(0, z.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        e = base[None, :] - (0.5 * z[sl] ** 2)[:, None] * kappa[None, :]
        mx = e.max(axis=1)
        p = np.exp(e - mx[:, None])
        s0 = p.sum(axis=1)
        ek = (p @ kappa) / s0
        log_d[sl] = mx + np.log(s0)
        weight[sl] = (p @ omk) / s0
        var_k[sl] = (p * (kappa[None, :] - ek[:, None]) ** 2).sum(axis=1) / s0
    return log_d, weight, var_k


def _hermite_rows(f, df, dz, zz):
    t = zz / dz
    g = np.floor(t).astype(np.intp)
    u = t - g
    u2 = u * u
    om = 1.0 - u
    return (
        (1.0 + 2.0 * u) * om * om * f[g]
        + u * om * om * dz * df[g]
        + u2 * (3.0 - 2.0 * u) * f[g + 1]
        - u2 * om * dz * df[g + 1]
    )


def hermite_sum(f, df, dz, zs):
    out = np.empty((f.shape[0], zs.shape[0]))
    for j in range(f.shape[0]):
        out[j] = _hermite_rows(f[j], df[j], dz, zs).sum(axis=1)
    return out


def hermite_mix(f, df, dz, zs, prob):
    out = np.zeros(zs.shape[1])
    for j in range(f.shape[0]):
        row = prob[j]
        if not np.any(row):
            continue
        out += row @ _hermite_rows(f[j], df[j], dz, zs)
    return out
