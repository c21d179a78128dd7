"""Nonlocal forces F and G, their representations, the sup-norm bounds, and the
blowup certificate.

Conventions: ``u`` is a mean-zero :class:`FourierField`; seminorms are
``seminorm_sq`` (``2 pi sum w_r(n) |c_n|^2``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import BoundViolated, CertificateFailed
from .spectral import (
    FourierField,
    differentiate,
    evaluate_with_derivative,
    grid,
    helmholtz_inverse_restricted,
    hilbert_transform,
    multiply,
    seminorm_sq,
)

# diagonal cutoff for the difference quotient in F_integral
_DIAGONAL_EPS = 1e-6


def _require_mean_zero(u, tol=1e-10):
    if abs(u.mode(0)) > tol * max(u.max_abs_coeff(), 1.0):
        raise ValueError("field must have mean zero")


# --- forces -------------------------------------------------------------


def compute_F(u):
    """``F = -u u'' - H(u H u'')``, exact (band limit ``2N``)."""
    _require_mean_zero(u)
    N2 = 2 * u.N
    u2 = differentiate(u, 2)
    a = multiply(u, u2, N2)
    b = multiply(u, hilbert_transform(u2), N2)
    return -a - hilbert_transform(b)


def F_series(u):
    """F as ``2 sum_{n>=1} (2n-1) |phi_n|^2`` with ``phi_n = sum_{m>=n} c_m e^{im theta}``.

    The tails ``phi_n`` are accumulated on a grid and the sum is analysed
    back to a field of band limit ``2N`` (the top ``N+1`` modes come out zero).
    """
    _require_mean_zero(u)
    N = u.N
    M = 4 * N + 2
    m = np.arange(1, N + 1)
    # reduce m*j mod M before exponentiating to keep the phases exact
    phase = np.outer(m, np.arange(M)) % M
    terms = u.positive[1:, None] * np.exp(2j * np.pi * phase / M)
    tails = np.cumsum(terms[::-1], axis=0)[::-1]  # tails[n-1] = phi_n
    weights = 2.0 * (2.0 * m - 1.0)
    values = np.sum(weights[:, None] * np.abs(tails) ** 2, axis=0)
    return FourierField.from_samples(values, 2 * N)


class _HolomorphicPart:
    """``Phi(z) = sum_{n>=1} c_n z^n`` with derivatives, for the integral form of F."""

    def __init__(self, u):
        c = np.array(u.positive, dtype=np.complex128)
        c[0] = 0.0
        self.p0 = c
        self.p1 = np.polynomial.polynomial.polyder(c, 1) if c.size > 1 else np.zeros(1)
        self.p2 = np.polynomial.polynomial.polyder(c, 2) if c.size > 2 else np.zeros(1)

    def __call__(self, z, order=0):
        coeffs = (self.p0, self.p1, self.p2)[order]
        return np.polynomial.polynomial.polyval(z, coeffs)


def F_integral(u, theta, n_radial=64, n_angle=256, n_boundary=None):
    """Evaluate F at ``theta`` from the difference quotient of ``Phi``.

    ``F = (1/pi) int |Y(e^{it}, e^{ip})|^2 dp + (4/pi) iint_D |dY/dw(w, e^{it})|^2 dA``
    where ``Y(w, z) = (Phi(w) - Phi(z)) / (w - z)``. Trapezoid in ``p``,
    Gauss-Legendre (radius) x trapezoid (angle) on the disc. ``theta`` may be
    an array.
    """
    _require_mean_zero(u)
    phi = _HolomorphicPart(u)
    if n_boundary is None:
        n_boundary = max(256, 4 * u.N)

    x, wx = np.polynomial.legendre.leggauss(n_radial)
    r = 0.5 * (x + 1.0)
    wr = 0.5 * wx
    ang = grid(n_angle)
    w = (r[:, None] * np.exp(1j * ang)[None, :]).ravel()
    dA = (wr * r)[:, None] * np.full(n_angle, 2.0 * np.pi / n_angle)[None, :]
    dA = dA.ravel()
    phi_w = phi(w)
    dphi_w = phi(w, 1)

    thetas = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    out = np.empty(thetas.shape[0])
    offsets = grid(n_boundary)
    for i, t in enumerate(thetas):
        z = np.exp(1j * t)
        phi_z = phi(z)
        dphi_z = phi(z, 1)
        d2phi_z = phi(z, 2)

        # boundary term; the node psi = theta sits on the diagonal
        v = np.exp(1j * (t + offsets))
        dv = v - z
        near = np.abs(dv) < _DIAGONAL_EPS
        safe = np.where(near, 1.0, dv)
        ups = np.where(near, dphi_z, (phi(v) - phi_z) / safe)
        boundary = np.sum(np.abs(ups) ** 2) * (2.0 * np.pi / n_boundary)

        dw = w - z
        near = np.abs(dw) < _DIAGONAL_EPS
        safe = np.where(near, 1.0, dw)
        dups = np.where(near, 0.5 * d2phi_z, (dphi_w * dw - (phi_w - phi_z)) / safe**2)
        disc = np.sum(np.abs(dups) ** 2 * dA)

        out[i] = boundary / np.pi + 4.0 * disc / np.pi
    if np.ndim(theta) == 0:
        return float(out[0])
    return out


def compute_G(u, tol=1e-10):
    """``G = H (1 + d^2)^{-1} [2 u' H u' - u'' H u'']`` (band limit ``2N``).

    A ResonantModes error from the restricted inverse means the bilinear
    term lost its orthogonality to ``{1, sin, cos}``, which is a bug.
    """
    _require_mean_zero(u)
    N2 = 2 * u.N
    u1 = differentiate(u, 1)
    u2 = differentiate(u, 2)
    inner = 2.0 * multiply(u1, hilbert_transform(u1), N2) - multiply(
        u2, hilbert_transform(u2), N2
    )
    return hilbert_transform(helmholtz_inverse_restricted(inner, tol=tol))


def transfer_coefficients(f):
    """``h_k = sum_{n=1}^{k-1} n (k-n) f_n f_{k-n}`` for ``k = 0..2N``.

    Entries ``k = 0, 1`` are zero by construction. With these,
    ``H(f' H f') = 2 Re sum_{k>=2} h_k e^{ik theta}``.
    """
    _require_mean_zero(f)
    n = np.arange(f.N + 1)
    g = n * f.positive
    g[0] = 0.0
    h = np.convolve(g, g)
    return h[: 2 * f.N + 1]


def synthesize_transfer(h, N_out=None):
    """Field ``2 Re sum_{k>=2} h_k e^{ik theta}``."""
    h = np.asarray(h, dtype=np.complex128)
    if N_out is None:
        N_out = h.shape[0] - 1
    cpos = np.zeros(N_out + 1, dtype=np.complex128)
    k = min(N_out + 1, h.shape[0])
    cpos[2:k] = h[2:k]
    return FourierField.from_positive(cpos)


# --- sup norms ----------------------------------------------------------


def _refined_extremum(f, oversample=8, sign=1.0):
    """Max of ``sign * f`` on an ``oversample * N`` grid plus one Newton step."""
    M = max(oversample * max(f.N, 1), 16)
    theta = grid(M)
    vals = sign * f.synthesize(M)
    j = int(np.argmax(vals))
    best_t, best_v = theta[j], vals[j]
    d1, d2 = evaluate_with_derivative(differentiate(f, 1), [theta[j]])
    if d2[0] != 0.0:
        t_new = theta[j] - d1[0] / d2[0]
        if abs(t_new - theta[j]) <= 2 * np.pi / M:
            v_new = sign * evaluate_with_derivative(f, [t_new])[0][0]
            if v_new > best_v:
                best_t, best_v = t_new, v_new
    return float(best_t), float(sign * best_v)


def sup_norm(f, oversample=8):
    """``max |f|`` via the refined grid search (returns value, location)."""
    t_hi, v_hi = _refined_extremum(f, oversample, 1.0)
    t_lo, v_lo = _refined_extremum(f, oversample, -1.0)
    if abs(v_hi) >= abs(v_lo):
        return abs(v_hi), t_hi
    return abs(v_lo), t_lo


def max_value(f, oversample=8):
    return _refined_extremum(f, oversample, 1.0)[1]


def min_value(f, oversample=8):
    return _refined_extremum(f, oversample, -1.0)[1]


# --- bound reports ------------------------------------------------------


@dataclass
class BoundReport:
    quantity: str
    sup_norm: float
    bound: float
    slack: float
    seminorms: dict = field(default_factory=dict)
    constant: float | None = None

    @property
    def passed(self):
        return self.slack >= 0.0

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _seminorms(u):
    return {r: seminorm_sq(u, v) for r, v in (("1/2", 0.5), ("1", 1), ("3/2", 1.5))}


def _check(report, tol):
    if report.slack < -tol * max(1.0, abs(report.bound)):
        raise BoundViolated(
            f"{report.quantity}: sup {report.sup_norm:.6g} exceeds bound {report.bound:.6g}"
        )
    return report


def bound_F(u, tol=1e-9):
    """Check ``max F <= (1/pi)|u|^2_{3/2} + (pi/2)|u|^2_{1}``."""
    F = compute_F(u)
    s = _seminorms(u)
    value = max(max_value(F), 0.0) if u.max_abs_coeff() > 0 else 0.0
    bound = s["3/2"] / np.pi + 0.5 * np.pi * s["1"]
    return _check(BoundReport("F", value, bound, bound - value, s), tol)


def bound_G(u, tol=1e-9):
    """Check ``|G|_inf <= 8 pi |u|^2_{1/2} + 4 pi |u|^2_{3/2}``."""
    G = compute_G(u)
    s = _seminorms(u)
    value = sup_norm(G)[0] if u.max_abs_coeff() > 0 else 0.0
    bound = 8.0 * np.pi * s["1/2"] + 4.0 * np.pi * s["3/2"]
    return _check(BoundReport("G", value, bound, bound - value, s), tol)


# Rate constant for d/dt |u_theta|_inf <= |F|_inf + |G|_inf when u has only
# modes |n| >= 2: there |u|^2_1 <= (2/3) E0 and |u|^2_{1/2} <= (1/3) E0.
GROWTH_CONSTANT = 1.0 / math.pi + 4.0 * math.pi + 0.5 * math.pi * (2.0 / 3.0) + 8.0 * math.pi / 3.0


def growth_monitor(record, E0=None):
    """Compare ``|u_theta(t)|_inf`` against ``|u0'|_inf + C E0 t`` along an EWP run.

    Violations come back as negative slack rather than an exception.
    """
    if getattr(record, "kind", None) != "ewp":
        raise ValueError("growth monitor applies to EWP trajectories only")
    times = np.asarray(record.times, dtype=np.float64)
    slopes = np.asarray(record.column("max_abs_u_theta"), dtype=np.float64)
    if E0 is None:
        E0 = float(record.column("energy")[0])
    bound = slopes[0] + GROWTH_CONSTANT * E0 * (times - times[0])
    slack = bound - slopes
    # at the first sample the slack is zero by construction
    i = int(np.argmin(slack[1:])) + 1 if len(slack) > 1 else 0
    return BoundReport(
        "growth",
        float(slopes[i]),
        float(bound[i]),
        float(slack[i]),
        {"3/2": float(E0)},
        constant=GROWTH_CONSTANT,
    )


# --- blowup certificate -------------------------------------------------


@dataclass
class BlowupCertificate:
    theta0: float
    u0_slope: float
    omega0_value: float
    tolerance: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls(**json.loads(text))


def _critical_point(g1, lo, hi, start):
    """Zero of ``g1`` near ``start`` by Newton, bisection-guarded inside ``[lo, hi]``."""
    f_lo = evaluate_with_derivative(g1, [lo])[0][0]
    f_hi = evaluate_with_derivative(g1, [hi])[0][0]
    bracketed = f_lo * f_hi <= 0.0
    t = start
    for _ in range(60):
        v, dv = evaluate_with_derivative(g1, [t])
        v, dv = v[0], dv[0]
        if v == 0.0:
            break
        if bracketed:
            if v * f_lo > 0:
                lo, f_lo = t, v
            else:
                hi = t
        step = v / dv if dv != 0.0 else np.inf
        t_new = t - step
        if bracketed and not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) < 1e-15 * (1.0 + abs(t)):
            t = t_new
            break
        t = t_new
    return t


def certify_blowup(u0, oversample=8, tol=1e-9):
    """Find ``theta0`` with ``u0'(theta0) < 0`` and ``(H u0)'(theta0) = 0``.

    ``theta0`` is the global maximiser of ``H u0``, refined by Newton on
    ``(H u0)'``. The Wunsch momentum ``omega0 = H u0'`` vanishes there.
    """
    _require_mean_zero(u0)
    if u0.max_abs_coeff() == 0.0:
        raise ValueError("certificate needs a non-constant field")
    g = hilbert_transform(u0)
    g1 = differentiate(g, 1)
    M = max(oversample * u0.N, 64)
    theta = grid(M)
    j = int(np.argmax(g.synthesize(M)))
    h = 2.0 * np.pi / M
    t0 = _critical_point(g1, theta[j] - h, theta[j] + h, theta[j])
    t0 = float(np.mod(t0, 2.0 * np.pi))
    omega = float(evaluate_with_derivative(g1, [t0])[0][0])
    slope = float(evaluate_with_derivative(u0, [t0])[1][0])
    scale = float(np.sum(np.abs(u0.positive) * np.arange(u0.N + 1))) * 2.0
    if not slope < 0.0:
        raise CertificateFailed(f"u0'({t0:.12g}) = {slope:.3e} is not negative")
    if abs(omega) > tol * max(scale, 1.0):
        raise CertificateFailed(f"omega0({t0:.12g}) = {omega:.3e} did not vanish")
    return BlowupCertificate(t0, slope, omega, tol * max(scale, 1.0))
