# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulator hot loops.

Arithmetic order matches ``_kernels_py`` exactly; the build disables FMA
contraction so both backends agree bit for bit.
"""

from libc.math cimport exp, floor


cdef inline void _trilinear(const double[:, ::1] vel, double ox, double oy, double oz,
                            double sx, double sy, double sz, int nx, int ny, int nz,
                            double px, double py, double pz, double* out) noexcept nogil:
    cdef double fx = (px - ox) / sx
    cdef double fy = (py - oy) / sy
    cdef double fz = (pz - oz) / sz
    if not fx >= 0.0:  # NaN lands here too
        fx = 0.0
    elif fx > nx - 1:
        fx = <double>(nx - 1)
    if not fy >= 0.0:
        fy = 0.0
    elif fy > ny - 1:
        fy = <double>(ny - 1)
    if not fz >= 0.0:
        fz = 0.0
    elif fz > nz - 1:
        fz = <double>(nz - 1)
    cdef int ix = <int>floor(fx)
    cdef int iy = <int>floor(fy)
    cdef int iz = <int>floor(fz)
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    cdef double tx = fx - ix
    cdef double ty = fy - iy
    cdef double tz = fz - iz
    cdef double ux = 1.0 - tx
    cdef double uy = 1.0 - ty
    cdef double uz = 1.0 - tz

    cdef Py_ssize_t i000 = ix + nx * (iy + ny * iz)
    cdef Py_ssize_t i100 = i000 + 1
    cdef Py_ssize_t i010 = i000 + nx
    cdef Py_ssize_t i110 = i010 + 1
    cdef Py_ssize_t i001 = i000 + nx * ny
    cdef Py_ssize_t i101 = i001 + 1
    cdef Py_ssize_t i011 = i001 + nx
    cdef Py_ssize_t i111 = i011 + 1

    cdef double c00, c10, c01, c11, c0, c1
    cdef int c
    for c in range(3):
        c00 = ux * vel[i000, c] + tx * vel[i100, c]
        c10 = ux * vel[i010, c] + tx * vel[i110, c]
        c01 = ux * vel[i001, c] + tx * vel[i101, c]
        c11 = ux * vel[i011, c] + tx * vel[i111, c]
        c0 = uy * c00 + ty * c10
        c1 = uy * c01 + ty * c11
        out[c] = uz * c0 + tz * c1


def trilinear(const double[:, ::1] vel, double ox, double oy, double oz,
              double sx, double sy, double sz, int nx, int ny, int nz,
              double px, double py, double pz):
    cdef double out[3]
    _trilinear(vel, ox, oy, oz, sx, sy, sz, nx, ny, nz, px, py, pz, out)
    return out[0], out[1], out[2]


def integrate(state, double thrust, double roll_ref, double pitch_ref,
              double mass, double gravity, double tau_att, double drag_gain,
              double h, int substeps, double cos_yaw, double sin_yaw,
              const double[:, ::1] vel, double ox, double oy, double oz,
              double sx, double sy, double sz, int nx, int ny, int nz):
    cdef double x = state[0], y = state[1], z = state[2]
    cdef double vx = state[3], vy = state[4], vz = state[5]
    cdef double phi = state[6], theta = state[7], psi = state[8]
    cdef double decay = exp(-h / tau_att)
    cdef double kw = drag_gain / mass
    cdef double tm = thrust / mass
    cdef double half_h = 0.5 * h
    cdef double lag_mean = tau_att / h * (1.0 - decay)
    cdef double hk = 0.5 * h * kw
    cdef double keep = (1.0 - hk) / (1.0 + hk)
    cdef double gain = h / (1.0 + hk)
    cdef double wp = 0.0, wt = 0.0
    cdef double phi_m, theta_m, ax_cmd, ay_cmd, az_cmd, nvx, nvy, nvz
    cdef double w[3]
    cdef int k
    with nogil:
        for k in range(substeps):
            phi_m = roll_ref + (phi - roll_ref) * lag_mean
            theta_m = pitch_ref + (theta - pitch_ref) * lag_mean
            phi = roll_ref + (phi - roll_ref) * decay
            theta = pitch_ref + (theta - pitch_ref) * decay
            wp = (roll_ref - phi) / tau_att
            wt = (pitch_ref - theta) / tau_att
            ax_cmd = tm * (cos_yaw * theta_m + sin_yaw * phi_m)
            ay_cmd = tm * (sin_yaw * theta_m - cos_yaw * phi_m)
            az_cmd = tm - gravity
            _trilinear(vel, ox, oy, oz, sx, sy, sz, nx, ny, nz, x, y, z, w)
            nvx = keep * vx + gain * (ax_cmd + kw * w[0])
            nvy = keep * vy + gain * (ay_cmd + kw * w[1])
            nvz = keep * vz + gain * (az_cmd + kw * w[2])
            x = x + half_h * (vx + nvx)
            y = y + half_h * (vy + nvy)
            z = z + half_h * (vz + nvz)
            vx = nvx
            vy = nvy
            vz = nvz
    return [x, y, z, vx, vy, vz, phi, theta, psi, wp, wt, 0.0]
