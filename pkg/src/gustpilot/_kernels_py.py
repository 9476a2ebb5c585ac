"""Pure-Python versions of the simulator hot loops.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce bitwise-identical trajectories.
"""

import math


def trilinear(vel, ox, oy, oz, sx, sy, sz, nx, ny, nz, px, py, pz):
    """Trilinearly interpolate a flat (n, 3) velocity table at (px, py, pz).

    Points outside the grid are clamped onto its boundary first.
    """
    fx = (px - ox) / sx
    fy = (py - oy) / sy
    fz = (pz - oz) / sz
    if not fx >= 0.0:  # NaN lands here too
        fx = 0.0
    elif fx > nx - 1:
        fx = float(nx - 1)
    if not fy >= 0.0:
        fy = 0.0
    elif fy > ny - 1:
        fy = float(ny - 1)
    if not fz >= 0.0:
        fz = 0.0
    elif fz > nz - 1:
        fz = float(nz - 1)
    ix = int(math.floor(fx))
    iy = int(math.floor(fy))
    iz = int(math.floor(fz))
    if ix > nx - 2:
        ix = nx - 2
    if iy > ny - 2:
        iy = ny - 2
    if iz > nz - 2:
        iz = nz - 2
    tx = fx - ix
    ty = fy - iy
    tz = fz - iz
    ux = 1.0 - tx
    uy = 1.0 - ty
    uz = 1.0 - tz

    i000 = ix + nx * (iy + ny * iz)
    i100 = i000 + 1
    i010 = i000 + nx
    i110 = i010 + 1
    i001 = i000 + nx * ny
    i101 = i001 + 1
    i011 = i001 + nx
    i111 = i011 + 1

    out = [0.0, 0.0, 0.0]
    for c in range(3):
        c00 = ux * vel[i000][c] + tx * vel[i100][c]
        c10 = ux * vel[i010][c] + tx * vel[i110][c]
        c01 = ux * vel[i001][c] + tx * vel[i101][c]
        c11 = ux * vel[i011][c] + tx * vel[i111][c]
        c0 = uy * c00 + ty * c10
        c1 = uy * c01 + ty * c11
        out[c] = uz * c0 + tz * c1
    return out[0], out[1], out[2]


def integrate(state, thrust, roll_ref, pitch_ref, mass, gravity, tau_att,
              drag_gain, h, substeps, cos_yaw, sin_yaw,
              vel, ox, oy, oz, sx, sy, sz, nx, ny, nz):
    """Advance a 12-entry vehicle state by ``substeps`` steps of size ``h``.

    State layout: position(3), velocity(3), euler(3), angular rate(3).
    Returns a new list; the input is not modified.
    """
    x, y, z, vx, vy, vz, phi, theta, psi, _, _, _ = [float(s) for s in state]
    decay = math.exp(-h / tau_att)
    kw = drag_gain / mass
    tm = thrust / mass
    half_h = 0.5 * h
    # mean of the lagged angle over one substep, as a fraction of its initial offset
    lag_mean = tau_att / h * (1.0 - decay)
    # drag is integrated with the implicit midpoint rule
    hk = 0.5 * h * kw
    keep = (1.0 - hk) / (1.0 + hk)
    gain = h / (1.0 + hk)
    wp = 0.0
    wt = 0.0
    for _ in range(substeps):
        phi_m = roll_ref + (phi - roll_ref) * lag_mean
        theta_m = pitch_ref + (theta - pitch_ref) * lag_mean
        phi = roll_ref + (phi - roll_ref) * decay
        theta = pitch_ref + (theta - pitch_ref) * decay
        wp = (roll_ref - phi) / tau_att
        wt = (pitch_ref - theta) / tau_att
        ax_cmd = tm * (cos_yaw * theta_m + sin_yaw * phi_m)
        ay_cmd = tm * (sin_yaw * theta_m - cos_yaw * phi_m)
        az_cmd = tm - gravity
        wx, wy, wz = trilinear(vel, ox, oy, oz, sx, sy, sz, nx, ny, nz, x, y, z)
        nvx = keep * vx + gain * (ax_cmd + kw * wx)
        nvy = keep * vy + gain * (ay_cmd + kw * wy)
        nvz = keep * vz + gain * (az_cmd + kw * wz)
        x = x + half_h * (vx + nvx)
        y = y + half_h * (vy + nvy)
        z = z + half_h * (vz + nvz)
        vx = nvx
        vy = nvy
        vz = nvz
    return [x, y, z, vx, vy, vz, phi, theta, psi, wp, wt, 0.0]
