"""Pure-Python fallback for the compiled scalar kernels.

Every function mirrors its ``_kernels`` counterpart operation for operation
(same expression order, same libm functions through ``math``), so the two
backends produce bit-identical trajectories.
"""

from math import exp, fabs, isfinite, log, log1p, tanh


def _eval_scalar(th, b, a, exact, mu, center):
    """Scalar log-sum-exp evaluation, optionally ridge-regularized (mu > 0)."""
    x = b * th
    ax = fabs(x)
    value = log(a) + ax + log1p(exp(-2.0 * ax))
    t = tanh(x)
    grad = b * t
    if exact:
        hess = b * b * (1.0 - t * t)
    else:
        hess = b * b
    norm = 1.0 + hess
    if mu > 0.0:
        # already-normalized wrapper: value/norm + ridge, reported normalizer 1
        value = value / norm + 0.5 * mu * ((th - center) * (th - center))
        grad = grad / norm + mu * (th - center)
        norm = 1.0
    return value, grad, norm


def ht_scalar_run(theta0, vartheta0, b, a, gamma, beta, exact, mu, center,
                  limit, theta_out, vartheta_out, loss_out, grad_out, norm_out):
    """High-order tuner loop; returns the diverged row index, or -1."""
    iters = len(b) - 1
    th = theta0
    vt = vartheta0
    diverged = -1
    for k in range(iters):
        value, grad, norm = _eval_scalar(th, b[k], a[k], exact, mu, center)
        theta_out[k] = th
        vartheta_out[k] = vt
        loss_out[k] = value
        grad_out[k] = fabs(grad)
        norm_out[k] = norm
        if not (isfinite(th) and isfinite(vt)) or value / norm > limit:
            diverged = k
            break
        tb = th - (gamma * beta) * (grad / norm)
        th1 = tb - beta * (tb - vt)
        _, grad1, _ = _eval_scalar(th1, b[k], a[k], exact, mu, center)
        vt = vt - gamma * (grad1 / norm)
        th = th1
    if diverged < 0:
        value, grad, norm = _eval_scalar(th, b[iters], a[iters], exact, mu, center)
        theta_out[iters] = th
        vartheta_out[iters] = vt
        loss_out[iters] = value
        grad_out[iters] = fabs(grad)
        norm_out[iters] = norm
        if not (isfinite(th) and isfinite(vt)) or value / norm > limit:
            diverged = iters
    return diverged


def gd_scalar_run(theta0, b, a, alpha_bar, live_normalize, exact, mu, center,
                  limit, theta_out, loss_out, grad_out, norm_out):
    """Gradient-descent loop, normalized (live) or raw; returns diverged row or -1."""
    iters = len(b) - 1
    th = theta0
    diverged = -1
    for k in range(iters + 1):
        value, grad, norm = _eval_scalar(th, b[k], a[k], exact, mu, center)
        used_norm = norm if live_normalize else 1.0
        theta_out[k] = th
        loss_out[k] = value
        grad_out[k] = fabs(grad)
        norm_out[k] = used_norm
        if not isfinite(th) or value / norm > limit:
            diverged = k
            break
        if k < iters:
            th = th - alpha_bar * (grad / used_norm)
    return diverged


def nesterov_scalar_run(theta0, nu0, b, a, alpha_bar, beta_bar, exact, mu,
                        center, limit, theta_out, nu_out, loss_out, grad_out,
                        norm_out):
    """Constant-momentum Nesterov loop on the raw model gradient."""
    iters = len(b) - 1
    th = theta0
    nu = nu0
    diverged = -1
    for k in range(iters + 1):
        value, grad, norm = _eval_scalar(th, b[k], a[k], exact, mu, center)
        theta_out[k] = th
        nu_out[k] = nu
        loss_out[k] = value
        grad_out[k] = fabs(grad)
        norm_out[k] = 1.0
        if not (isfinite(th) and isfinite(nu)) or value / norm > limit:
            diverged = k
            break
        if k < iters:
            _, gn, _ = _eval_scalar(nu, b[k], a[k], exact, mu, center)
            th1 = nu - alpha_bar * gn
            nu = (1.0 + beta_bar) * th1 - beta_bar * th
            th = th1
    return diverged


def _rk4_dvt(th, b, gamma):
    return -gamma * ((b * tanh(b * th)) / (1.0 + b * b))


def ht_rk4_run(theta0, vartheta0, b_step, gamma, beta, h, theta_out, vartheta_out):
    """Classical RK4 on the continuous tuner over the plain scalar
    log-sum-exp loss, sample held constant within each step."""
    n = len(b_step)
    th = theta0
    vt = vartheta0
    diverged = -1
    theta_out[0] = th
    vartheta_out[0] = vt
    for i in range(n):
        bb = b_step[i]
        k1t = -beta * (th - vt)
        k1v = _rk4_dvt(th, bb, gamma)
        k2t = -beta * ((th + 0.5 * h * k1t) - (vt + 0.5 * h * k1v))
        k2v = _rk4_dvt(th + 0.5 * h * k1t, bb, gamma)
        k3t = -beta * ((th + 0.5 * h * k2t) - (vt + 0.5 * h * k2v))
        k3v = _rk4_dvt(th + 0.5 * h * k2t, bb, gamma)
        k4t = -beta * ((th + h * k3t) - (vt + h * k3v))
        k4v = _rk4_dvt(th + h * k3t, bb, gamma)
        th = th + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
        vt = vt + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        theta_out[i + 1] = th
        vartheta_out[i + 1] = vt
        if not (isfinite(th) and isfinite(vt)):
            diverged = i + 1
            break
    return diverged
