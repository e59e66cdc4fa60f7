"""Compiled inner loop of the plant: capsule/circle contacts and 1 kHz stepping.

Everything here works on flat arrays so that it can be jitted; the public,
object-level API lives in :mod:`clutter_mpc.world`.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def joint_points(lengths, theta):
    m = lengths.shape[0]
    pts = np.zeros((m + 1, 2))
    ang = 0.0
    for i in range(m):
        ang += theta[i]
        pts[i + 1, 0] = pts[i, 0] + lengths[i] * np.cos(ang)
        pts[i + 1, 1] = pts[i, 1] + lengths[i] * np.sin(ang)
    return pts


@njit(cache=True)
def find_contacts(lengths, radius, theta, centers, radii):
    """All (link, obstacle) pairs whose capsule and disc overlap.

    Returns ``(count, link, obstacle, point, normal, depth)``; only the first
    ``count`` rows are meaningful. ``point`` is on the capsule surface and
    ``normal`` points from the arm towards the obstacle centre.
    """
    m = lengths.shape[0]
    n_obs = centers.shape[0]
    cap = m * n_obs
    link = np.empty(cap, np.int64)
    obs = np.empty(cap, np.int64)
    point = np.empty((cap, 2))
    normal = np.empty((cap, 2))
    depth = np.empty(cap)
    pts = joint_points(lengths, theta)
    count = 0
    for i in range(m):
        ax = pts[i, 0]
        ay = pts[i, 1]
        dx = pts[i + 1, 0] - ax
        dy = pts[i + 1, 1] - ay
        seg2 = dx * dx + dy * dy
        for o in range(n_obs):
            cx = centers[o, 0]
            cy = centers[o, 1]
            reach = radius + radii[o]
            # cheap bounding test before the projection
            if cx < min(ax, ax + dx) - reach or cx > max(ax, ax + dx) + reach:
                continue
            if cy < min(ay, ay + dy) - reach or cy > max(ay, ay + dy) + reach:
                continue
            t = ((cx - ax) * dx + (cy - ay) * dy) / seg2
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            px = ax + t * dx
            py = ay + t * dy
            rx = cx - px
            ry = cy - py
            dist = np.sqrt(rx * rx + ry * ry)
            pen = reach - dist
            if pen <= 0.0:
                continue
            if dist > 1e-12:
                nx = rx / dist
                ny = ry / dist
            else:
                seg = np.sqrt(seg2)
                nx = -dy / seg
                ny = dx / seg
            link[count] = i
            obs[count] = o
            point[count, 0] = px + radius * nx
            point[count, 1] = py + radius * ny
            normal[count, 0] = nx
            normal[count, 1] = ny
            depth[count] = pen
            count += 1
    return count, link, obs, point, normal, depth


@njit(cache=True)
def _solve_spd(a, b):
    # Cholesky solve; the implicit step matrix is symmetric positive definite.
    n = a.shape[0]
    low = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1):
            s = a[i, j]
            for k in range(j):
                s -= low[i, k] * low[j, k]
            if i == j:
                if s <= 0.0:
                    return np.full(n, np.nan)
                low[i, i] = np.sqrt(s)
            else:
                low[i, j] = s / low[j, j]
    y = np.zeros(n)
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= low[i, k] * y[k]
        y[i] = s / low[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= low[k, i] * x[k]
        x[i] = s / low[i, i]
    return x


@njit(cache=True)
def contact_load(lengths, theta, link, obs, point, normal, depth, count, stiffness, n_obs):
    """Joint torque from contacts, its normal-stiffness matrix, and per-obstacle push."""
    m = lengths.shape[0]
    pts = joint_points(lengths, theta)
    tau = np.zeros(m)
    kc = np.zeros((m, m))
    push = np.zeros((n_obs, 2))
    jn = np.zeros(m)
    for c in range(count):
        o = obs[c]
        k = stiffness[o]
        fx = k * depth[c] * normal[c, 0]
        fy = k * depth[c] * normal[c, 1]
        push[o, 0] += fx
        push[o, 1] += fy
        for j in range(m):
            jn[j] = 0.0
        for j in range(link[c] + 1):
            lx = point[c, 0] - pts[j, 0]
            ly = point[c, 1] - pts[j, 1]
            # column j of the point Jacobian is (-ly, lx)
            tau[j] += -ly * fx + lx * fy
            jn[j] = -ly * normal[c, 0] + lx * normal[c, 1]
        for a in range(m):
            for b in range(m):
                kc[a, b] += k * jn[a] * jn[b]
    return tau, kc, push


@njit(cache=True)
def inner_steps(lengths, radius, inertia, kj, dj, qmin, qmax,
                theta, theta_dot, phi,
                centers, radii, stiffness, movable, friction, gain,
                dt, n_steps):
    """Advance the impedance-controlled arm and movable obstacles ``n_steps`` times.

    Uses a linearly implicit Euler step: joint springs, joint damping and the
    normal contact stiffness are taken implicitly, the contact force itself is
    evaluated at the start of the step. Returns ``(theta, theta_dot, centers, ok)``.
    """
    m = lengths.shape[0]
    n_obs = centers.shape[0]
    theta = theta.copy()
    theta_dot = theta_dot.copy()
    centers = centers.copy()
    a = np.zeros((m, m))
    rhs = np.zeros(m)
    for _ in range(n_steps):
        count, link, obs, point, normal, depth = find_contacts(lengths, radius, theta, centers, radii)
        tau_c, kc, push = contact_load(lengths, theta, link, obs, point, normal, depth, count,
                                       stiffness, n_obs)
        for i in range(m):
            for j in range(m):
                a[i, j] = dt * dt * kc[i, j]
            a[i, i] += inertia[i] + dt * dj[i] + dt * dt * kj[i]
            rhs[i] = inertia[i] * theta_dot[i] + dt * (kj[i] * (phi[i] - theta[i]) - tau_c[i])
        v = _solve_spd(a, rhs)
        for i in range(m):
            if not np.isfinite(v[i]):
                return theta, theta_dot, centers, False
            theta[i] += dt * v[i]
            theta_dot[i] = v[i]
            if theta[i] < qmin[i]:
                theta[i] = qmin[i]
                if theta_dot[i] < 0.0:
                    theta_dot[i] = 0.0
            elif theta[i] > qmax[i]:
                theta[i] = qmax[i]
                if theta_dot[i] > 0.0:
                    theta_dot[i] = 0.0
        for o in range(n_obs):
            if not movable[o]:
                continue
            f = np.sqrt(push[o, 0] ** 2 + push[o, 1] ** 2)
            if f > friction[o]:
                s = gain[o] * (f - friction[o]) * dt / f
                centers[o, 0] += s * push[o, 0]
                centers[o, 1] += s * push[o, 1]
    return theta, theta_dot, centers, True
