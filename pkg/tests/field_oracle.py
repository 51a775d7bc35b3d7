"""Independent numerical oracle for the field of a dipole in a conducting
sphere.

The closed-form gain computation is checked against a quadrature route that
never uses the closed form:

1. the electric potential inside the homogeneous sphere is the
   infinite-medium dipole potential plus a harmonic correction enforcing a
   zero normal current at the boundary; the correction is found numerically
   by expanding the Neumann data in spherical harmonics on a
   Gauss-Legendre x uniform-azimuth surface grid;
2. the Biot-Savart volume integral over the return currents -sigma grad V
   is converted with the curl theorem into a surface integral of the
   boundary potential against n x (s - r') / |s - r'|^3, which is then
   evaluated on the same quadrature grid;
3. the primary term is the free-space Biot-Savart field of the point
   dipole itself.

The result is independent of the conductivity value, so sigma = 1 is used.
"""

import numpy as np
from scipy.special import lpmn

MU0_OVER_4PI = 1e-7


def _legendre_table(l_max, x_nodes):
    """P_l^m(x) for all 0 <= m <= l <= l_max; shape (n_nodes, m, l)."""
    tables = np.empty((len(x_nodes), l_max + 1, l_max + 1))
    for i, x in enumerate(x_nodes):
        p, _ = lpmn(l_max, l_max, x)
        tables[i] = p
    return tables


def _sh_norms(l_max):
    """Orthonormalization constants for N_lm P_l^m e^{i m phi}, m >= 0."""
    norms = np.zeros((l_max + 1, l_max + 1))
    for l in range(l_max + 1):
        for m in range(l + 1):
            lognum = np.sum(np.log(np.arange(l - m + 1, l + m + 1))) if m else 0.0
            norms[m, l] = np.sqrt((2 * l + 1) / (4 * np.pi)) * np.exp(-0.5 * lognum)
    return norms


def _infinite_medium_potential(points, r0, q):
    d = points - r0[None, :]
    dist = np.linalg.norm(d, axis=-1)
    return (d @ q) / (4.0 * np.pi * dist**3)


def _infinite_medium_gradient(points, r0, q):
    d = points - r0[None, :]
    dist = np.linalg.norm(d, axis=-1)[:, None]
    return (q[None, :] / dist**3 - 3.0 * (d @ q)[:, None] * d / dist**5) / (4.0 * np.pi)


def conducting_sphere_field(r0, q, sensor_pos, sphere_radius,
                            l_max=90, n_theta=128, n_phi=256):
    """Total magnetic field (3-vector) at one exterior point."""
    r0 = np.asarray(r0, dtype=float)
    q = np.asarray(q, dtype=float)
    sensor_pos = np.asarray(sensor_pos, dtype=float)
    R = float(sphere_radius)

    x_nodes, x_weights = np.polynomial.legendre.leggauss(n_theta)
    sin_t = np.sqrt(1.0 - x_nodes**2)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi

    # surface points, shape (n_theta, n_phi, 3); normals point outward
    normals = np.empty((n_theta, n_phi, 3))
    normals[..., 0] = sin_t[:, None] * np.cos(phi)[None, :]
    normals[..., 1] = sin_t[:, None] * np.sin(phi)[None, :]
    normals[..., 2] = x_nodes[:, None]
    surface = R * normals
    flat = surface.reshape(-1, 3)

    # Neumann data for the harmonic correction: d(V_h)/dr = -d(V_0)/dr
    grad0 = _infinite_medium_gradient(flat, r0, q).reshape(n_theta, n_phi, 3)
    g = -np.einsum("tpj,tpj->tp", grad0, normals)

    # forward spherical-harmonic analysis, m >= 0 (g is real)
    gm = np.fft.fft(g, axis=1)[:, : l_max + 1] * (2.0 * np.pi / n_phi)
    ptab = _legendre_table(l_max, x_nodes)  # (n_theta, m, l)
    norms = _sh_norms(l_max)
    weighted = gm * x_weights[:, None]
    # a[m, l] = sum_nodes w * N_lm * P_lm * G_m
    a = np.einsum("tml,tm->ml", ptab, weighted) * norms

    # V_h on the surface: c_lm = R a_lm / l, synthesized over the grid;
    # negative azimuthal orders enter through conjugate symmetry (V_h real)
    ls = np.arange(l_max + 1, dtype=float)
    c = np.zeros_like(a)
    c[:, 1:] = R * a[:, 1:] / ls[None, 1:]
    sm = np.einsum("tml,ml->tm", ptab, c * norms)  # (n_theta, m)
    spectrum = np.zeros((n_theta, n_phi), dtype=complex)
    spectrum[:, 0] = sm[:, 0]
    spectrum[:, 1 : l_max + 1] = sm[:, 1:]
    spectrum[:, n_phi - l_max :] = np.conj(sm[:, 1:])[:, ::-1]
    v_h = np.fft.ifft(spectrum, axis=1).real * n_phi

    v_surface = _infinite_medium_potential(flat, r0, q).reshape(n_theta, n_phi) + v_h

    # surface form of the Biot-Savart integral over the return currents
    diff = sensor_pos[None, :] - flat
    dist = np.linalg.norm(diff, axis=1)[:, None]
    kernel = np.cross(normals.reshape(-1, 3), diff / dist**3)
    w_surface = (x_weights[:, None] * (2.0 * np.pi / n_phi) * R**2).repeat(n_phi, axis=1)
    b_volume = -MU0_OVER_4PI * np.sum(
        (v_surface.reshape(-1, 1) * w_surface.reshape(-1, 1)) * kernel, axis=0
    )

    d = sensor_pos - r0
    b_primary = MU0_OVER_4PI * np.cross(q, d) / np.linalg.norm(d) ** 3
    return b_primary + b_volume
