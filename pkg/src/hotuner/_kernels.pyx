# cython: boundscheck=False, wraparound=False, cdivision=False, language_level=3
"""Compiled scalar kernels for the hot iteration loops.

Mirrors ``_pykernels`` operation for operation; both backends must produce
bit-identical trajectories (same expression order, same libm calls, no FMA
contraction).
"""

from libc.math cimport exp, fabs, isfinite, log, log1p, tanh


cdef struct Eval:
    double value
    double grad
    double norm


cdef inline Eval _eval_scalar(double th, double b, double a, bint exact,
                              double mu, double center) nogil:
    """Scalar log-sum-exp evaluation, optionally ridge-regularized (mu > 0)."""
    cdef Eval ev
    cdef double x = b * th
    cdef double ax = fabs(x)
    cdef double value = log(a) + ax + log1p(exp(-2.0 * ax))
    cdef double t = tanh(x)
    cdef double grad = b * t
    cdef double hess
    if exact:
        hess = b * b * (1.0 - t * t)
    else:
        hess = b * b
    cdef double norm = 1.0 + hess
    if mu > 0.0:
        # already-normalized wrapper: value/norm + ridge, reported normalizer 1
        value = value / norm + 0.5 * mu * ((th - center) * (th - center))
        grad = grad / norm + mu * (th - center)
        norm = 1.0
    ev.value = value
    ev.grad = grad
    ev.norm = norm
    return ev


def ht_scalar_run(double theta0, double vartheta0,
                  double[::1] b, double[::1] a,
                  double gamma, double beta, bint exact,
                  double mu, double center, double limit,
                  double[::1] theta_out, double[::1] vartheta_out,
                  double[::1] loss_out, double[::1] grad_out,
                  double[::1] norm_out):
    """High-order tuner loop; returns the diverged row index, or -1.

    ``b``/``a`` hold one sample per row (iterations + 1); row k is recorded
    before the k-th update.
    """
    cdef Py_ssize_t iters = b.shape[0] - 1
    cdef Py_ssize_t k
    cdef double th = theta0
    cdef double vt = vartheta0
    cdef double tb, th1
    cdef Eval e0, e1
    cdef Py_ssize_t diverged = -1
    with nogil:
        for k in range(iters):
            e0 = _eval_scalar(th, b[k], a[k], exact, mu, center)
            theta_out[k] = th
            vartheta_out[k] = vt
            loss_out[k] = e0.value
            grad_out[k] = fabs(e0.grad)
            norm_out[k] = e0.norm
            if not (isfinite(th) and isfinite(vt)) or e0.value / e0.norm > limit:
                diverged = k
                break
            tb = th - (gamma * beta) * (e0.grad / e0.norm)
            th1 = tb - beta * (tb - vt)
            e1 = _eval_scalar(th1, b[k], a[k], exact, mu, center)
            vt = vt - gamma * (e1.grad / e0.norm)
            th = th1
        if diverged < 0:
            e0 = _eval_scalar(th, b[iters], a[iters], exact, mu, center)
            theta_out[iters] = th
            vartheta_out[iters] = vt
            loss_out[iters] = e0.value
            grad_out[iters] = fabs(e0.grad)
            norm_out[iters] = e0.norm
            if not (isfinite(th) and isfinite(vt)) or e0.value / e0.norm > limit:
                diverged = iters
    return diverged


def gd_scalar_run(double theta0, double[::1] b, double[::1] a,
                  double alpha_bar, bint live_normalize, bint exact,
                  double mu, double center, double limit,
                  double[::1] theta_out, double[::1] loss_out,
                  double[::1] grad_out, double[::1] norm_out):
    """Gradient-descent loop, normalized (live) or raw; returns diverged row or -1."""
    cdef Py_ssize_t iters = b.shape[0] - 1
    cdef Py_ssize_t k
    cdef double th = theta0
    cdef Eval ev
    cdef double used_norm
    cdef Py_ssize_t diverged = -1
    with nogil:
        for k in range(iters + 1):
            ev = _eval_scalar(th, b[k], a[k], exact, mu, center)
            if live_normalize:
                used_norm = ev.norm
            else:
                used_norm = 1.0
            theta_out[k] = th
            loss_out[k] = ev.value
            grad_out[k] = fabs(ev.grad)
            norm_out[k] = used_norm
            if not isfinite(th) or ev.value / ev.norm > limit:
                diverged = k
                break
            if k < iters:
                th = th - alpha_bar * (ev.grad / used_norm)
    return diverged


def nesterov_scalar_run(double theta0, double nu0,
                        double[::1] b, double[::1] a,
                        double alpha_bar, double beta_bar, bint exact,
                        double mu, double center, double limit,
                        double[::1] theta_out, double[::1] nu_out,
                        double[::1] loss_out, double[::1] grad_out,
                        double[::1] norm_out):
    """Constant-momentum Nesterov loop on the raw model gradient."""
    cdef Py_ssize_t iters = b.shape[0] - 1
    cdef Py_ssize_t k
    cdef double th = theta0
    cdef double nu = nu0
    cdef double th1
    cdef Eval ev, en
    cdef Py_ssize_t diverged = -1
    with nogil:
        for k in range(iters + 1):
            ev = _eval_scalar(th, b[k], a[k], exact, mu, center)
            theta_out[k] = th
            nu_out[k] = nu
            loss_out[k] = ev.value
            grad_out[k] = fabs(ev.grad)
            norm_out[k] = 1.0
            if not (isfinite(th) and isfinite(nu)) or ev.value / ev.norm > limit:
                diverged = k
                break
            if k < iters:
                en = _eval_scalar(nu, b[k], a[k], exact, mu, center)
                th1 = nu - alpha_bar * en.grad
                nu = (1.0 + beta_bar) * th1 - beta_bar * th
                th = th1
    return diverged


cdef inline double _rk4_dvt(double th, double b, double gamma) nogil:
    return -gamma * ((b * tanh(b * th)) / (1.0 + b * b))


def ht_rk4_run(double theta0, double vartheta0, double[::1] b_step,
               double gamma, double beta, double h,
               double[::1] theta_out, double[::1] vartheta_out):
    """Classical RK4 on the continuous tuner over the plain scalar
    log-sum-exp loss, sample held constant within each step."""
    cdef Py_ssize_t n = b_step.shape[0]
    cdef Py_ssize_t i
    cdef double th = theta0
    cdef double vt = vartheta0
    cdef double bb
    cdef double k1t, k1v, k2t, k2v, k3t, k3v, k4t, k4v
    cdef Py_ssize_t diverged = -1
    with nogil:
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
