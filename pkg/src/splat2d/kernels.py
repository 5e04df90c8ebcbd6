"""Serial numba kernels: splat compositing, its adjoint, and window filters.

All kernels are deterministic: loops run in a fixed order, so accumulation
order (and therefore float rounding) is identical across runs.  Geometry
arrays are indexed by storage row; ``order`` carries the front-to-back
permutation.
"""

import numpy as np
from numba import njit

ALPHA_CLAMP = 0.999
STOP_TRANSMITTANCE = 1e-4
BBOX_SIGMA = 3.0


@njit(cache=True)
def splat_forward(mean, inv_cov, radii, alpha, color, order, origin_x, origin_y,
                  image, transm, last_proc, weight, max_contrib):
    """Front-to-back alpha compositing onto a pixel grid.

    image (H,W,3) and transm (H,W) must arrive zeroed / set to one;
    last_proc (H,W) int64 must arrive filled with -1.  weight and
    max_contrib are per-primitive accumulators (storage order).
    """
    height, width = transm.shape
    n = order.shape[0]
    for k in range(n):
        i = order[k]
        mx = mean[i, 0] - origin_x
        my = mean[i, 1] - origin_y
        ia = inv_cov[i, 0]
        ib = inv_cov[i, 1]
        ic = inv_cov[i, 2]
        x0 = int(np.ceil(mx - radii[i, 0]))
        x1 = int(np.floor(mx + radii[i, 0]))
        y0 = int(np.ceil(my - radii[i, 1]))
        y1 = int(np.floor(my + radii[i, 1]))
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width - 1:
            x1 = width - 1
        if y1 > height - 1:
            y1 = height - 1
        al = alpha[i]
        cr = color[i, 0]
        cg = color[i, 1]
        cb = color[i, 2]
        for y in range(y0, y1 + 1):
            dy = y - my
            for x in range(x0, x1 + 1):
                t = transm[y, x]
                if t < STOP_TRANSMITTANCE:
                    continue
                dx = x - mx
                q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
                a = al * np.exp(-0.5 * q)
                if a > ALPHA_CLAMP:
                    a = ALPHA_CLAMP
                w = a * t
                image[y, x, 0] += cr * w
                image[y, x, 1] += cg * w
                image[y, x, 2] += cb * w
                weight[i] += w
                if w > max_contrib[i]:
                    max_contrib[i] = w
                transm[y, x] = t * (1.0 - a)
                last_proc[y, x] = k


@njit(cache=True)
def splat_backward(mean, inv_cov, radii, alpha, color, order, origin_x, origin_y,
                   d_image, transm_final, last_proc,
                   d_mean, d_inv_cov, d_alpha, d_color):
    """Adjoint of splat_forward for a pixelwise cotangent d_image.

    Walks primitives back-to-front, rebuilding per-pixel transmittance by
    division and keeping the suffix color sum needed for the occlusion term.
    Gradient accumulators must arrive zeroed.
    """
    height, width = transm_final.shape
    n = order.shape[0]
    t_cur = transm_final.copy()
    suffix = np.zeros((height, width, 3))
    for k in range(n - 1, -1, -1):
        i = order[k]
        mx = mean[i, 0] - origin_x
        my = mean[i, 1] - origin_y
        ia = inv_cov[i, 0]
        ib = inv_cov[i, 1]
        ic = inv_cov[i, 2]
        x0 = int(np.ceil(mx - radii[i, 0]))
        x1 = int(np.floor(mx + radii[i, 0]))
        y0 = int(np.ceil(my - radii[i, 1]))
        y1 = int(np.floor(my + radii[i, 1]))
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > width - 1:
            x1 = width - 1
        if y1 > height - 1:
            y1 = height - 1
        al = alpha[i]
        cr = color[i, 0]
        cg = color[i, 1]
        cb = color[i, 2]
        for y in range(y0, y1 + 1):
            dy = y - my
            for x in range(x0, x1 + 1):
                if k > last_proc[y, x]:
                    continue
                dx = x - mx
                q = ia * dx * dx + 2.0 * ib * dx * dy + ic * dy * dy
                g = np.exp(-0.5 * q)
                a = al * g
                clamped = a > ALPHA_CLAMP
                if clamped:
                    a = ALPHA_CLAMP
                t_before = t_cur[y, x] / (1.0 - a)
                w = a * t_before
                dr = d_image[y, x, 0]
                dg = d_image[y, x, 1]
                db = d_image[y, x, 2]
                d_color[i, 0] += dr * w
                d_color[i, 1] += dg * w
                d_color[i, 2] += db * w
                # dL/da at this pixel: own emission minus re-exposed suffix
                inv_om = 1.0 / (1.0 - a)
                da = (dr * (cr * t_before - suffix[y, x, 0] * inv_om)
                      + dg * (cg * t_before - suffix[y, x, 1] * inv_om)
                      + db * (cb * t_before - suffix[y, x, 2] * inv_om))
                if not clamped:
                    d_alpha[i] += da * g
                    gq = da * al * g * (-0.5)
                    d_mean[i, 0] += gq * (-2.0) * (ia * dx + ib * dy)
                    d_mean[i, 1] += gq * (-2.0) * (ib * dx + ic * dy)
                    d_inv_cov[i, 0] += gq * dx * dx
                    d_inv_cov[i, 1] += gq * 2.0 * dx * dy
                    d_inv_cov[i, 2] += gq * dy * dy
                suffix[y, x, 0] += cr * w
                suffix[y, x, 1] += cg * w
                suffix[y, x, 2] += cb * w
                t_cur[y, x] = t_before


@njit(cache=True)
def corr_valid_axis0(x, g):
    """1D correlation along rows, valid positions only; x is (H, W, C).

    Tap loop is innermost so each output element accumulates in a register
    and every array is streamed once per pass.
    """
    h, w, c = x.shape
    k = g.shape[0]
    out = np.empty((h - k + 1, w, c))
    for i in range(h - k + 1):
        for y in range(w):
            for ch in range(c):
                acc = 0.0
                for j in range(k):
                    acc += g[j] * x[i + j, y, ch]
                out[i, y, ch] = acc
    return out


@njit(cache=True)
def corr_valid_axis1(x, g):
    """1D correlation along columns, valid positions only."""
    h, w, c = x.shape
    k = g.shape[0]
    out = np.empty((h, w - k + 1, c))
    for i in range(h):
        for y in range(w - k + 1):
            for ch in range(c):
                acc = 0.0
                for j in range(k):
                    acc += g[j] * x[i, y + j, ch]
                out[i, y, ch] = acc
    return out


@njit(cache=True)
def corr_adjoint_axis0(u, g, h_out):
    """Adjoint of corr_valid_axis0; maps (H', W, C) back to (h_out, W, C).

    Interior rows take the fixed-trip path so the tap loop can unroll.
    """
    hp, w, c = u.shape
    k = g.shape[0]
    out = np.empty((h_out, w, c))
    for p in range(h_out):
        j0 = p - hp + 1
        if j0 < 0:
            j0 = 0
        j1 = p if p < k - 1 else k - 1
        if j0 == 0 and j1 == k - 1:
            for y in range(w):
                for ch in range(c):
                    acc = 0.0
                    for j in range(k):
                        acc += g[j] * u[p - j, y, ch]
                    out[p, y, ch] = acc
        else:
            for y in range(w):
                for ch in range(c):
                    acc = 0.0
                    for j in range(j0, j1 + 1):
                        acc += g[j] * u[p - j, y, ch]
                    out[p, y, ch] = acc
    return out


@njit(cache=True)
def corr_adjoint_axis1(u, g, w_out):
    """Adjoint of corr_valid_axis1; maps (H, W', C) back to (H, w_out, C)."""
    h, wp, c = u.shape
    k = g.shape[0]
    out = np.empty((h, w_out, c))
    for i in range(h):
        for p in range(w_out):
            j0 = p - wp + 1
            if j0 < 0:
                j0 = 0
            j1 = p if p < k - 1 else k - 1
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            if c == 3:
                for j in range(j0, j1 + 1):
                    gj = g[j]
                    acc0 += gj * u[i, p - j, 0]
                    acc1 += gj * u[i, p - j, 1]
                    acc2 += gj * u[i, p - j, 2]
                out[i, p, 0] = acc0
                out[i, p, 1] = acc1
                out[i, p, 2] = acc2
            else:
                for ch in range(c):
                    acc = 0.0
                    for j in range(j0, j1 + 1):
                        acc += g[j] * u[i, p - j, ch]
                    out[i, p, ch] = acc
    return out


@njit(cache=True)
def ssim_fields(mu_x, mu_y, e_xx, var_y, e_xy, c1, c2, want_grad):
    """Per-window SSIM score and cotangents in one pass.

    Returns (mean score, d_mu_x, d_e_xx, d_e_xy); the gradient arrays are
    the cotangents of the filtered moments, already divided by the window
    count, and are zero-filled when want_grad is false.
    """
    h, w, c = mu_x.shape
    n = h * w * c
    inv_n = 1.0 / n
    d_mu = np.zeros((h, w, c))
    d_exx = np.zeros((h, w, c))
    d_exy = np.zeros((h, w, c))
    total = 0.0
    for i in range(h):
        for y in range(w):
            for ch in range(c):
                mx = mu_x[i, y, ch]
                my = mu_y[i, y, ch]
                vx = e_xx[i, y, ch] - mx * mx
                cv = e_xy[i, y, ch] - mx * my
                a1 = 2.0 * mx * my + c1
                a2 = 2.0 * cv + c2
                b1 = mx * mx + my * my + c1
                b2 = vx + var_y[i, y, ch] + c2
                inv_bb = 1.0 / (b1 * b2)
                s = a1 * a2 * inv_bb
                total += s
                if want_grad:
                    d_a1 = a2 * inv_bb * inv_n
                    d_a2 = a1 * inv_bb * inv_n
                    d_b1 = -s / b1 * inv_n
                    d_b2 = -s / b2 * inv_n
                    d_cov = 2.0 * d_a2
                    # vx and cv fold their mu_x dependence back into d_mu
                    d_mu[i, y, ch] = (2.0 * my * d_a1 + 2.0 * mx * d_b1
                                      - 2.0 * mx * d_b2 - my * d_cov)
                    d_exx[i, y, ch] = d_b2
                    d_exy[i, y, ch] = d_cov
    return total * inv_n, d_mu, d_exx, d_exy


def warmup():
    """Force JIT compilation of every kernel on tiny inputs."""
    mean = np.array([[1.0, 1.0]])
    inv_cov = np.array([[1.0, 0.0, 1.0]])
    radii = np.array([[3.0, 3.0]])
    alpha = np.array([0.5])
    color = np.array([[1.0, 1.0, 1.0]])
    order = np.array([0], dtype=np.int64)
    img = np.zeros((4, 4, 3))
    tr = np.ones((4, 4))
    lp = np.full((4, 4), -1, dtype=np.int64)
    wt = np.zeros(1)
    mc = np.zeros(1)
    splat_forward(mean, inv_cov, radii, alpha, color, order, 0.0, 0.0,
                  img, tr, lp, wt, mc)
    splat_backward(mean, inv_cov, radii, alpha, color, order, 0.0, 0.0,
                   np.ones((4, 4, 3)), tr, lp,
                   np.zeros((1, 2)), np.zeros((1, 3)), np.zeros(1), np.zeros((1, 3)))
    g = np.ones(3) / 3.0
    x = np.ones((5, 5, 1))
    corr_adjoint_axis0(corr_valid_axis0(x, g), g, 5)
    corr_adjoint_axis1(corr_valid_axis1(x, g), g, 5)
    f = np.full((2, 2, 3), 0.5)
    ssim_fields(f, f, f, f, f, 1e-4, 9e-4, True)
