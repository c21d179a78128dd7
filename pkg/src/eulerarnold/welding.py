"""Conformal welding of circle diffeomorphisms to plane curves.

The exterior boundary values ``W(theta) = Phi_+(e^{i theta})`` solve the
second-kind equation ``(I + K) W = e^{i theta}`` with

    K W(theta) = p * avg_psi [cot((theta - psi)/2) - a'(psi) cot((a(theta) - a(psi))/2)] W(psi)

where ``a`` is the inverse diffeomorphism and ``avg_psi`` is the mean over
the circle (integration against ``d psi / 2 pi``).  The default prefactor is
``p = i/2``.  The interior map is recovered from ``Phi_-(e^{i theta}) = W(eta(theta))``.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft
from scipy import linalg
from scipy.linalg import lapack

from . import _backend
from .errors import (
    DegenerateScale,
    HolomorphyViolation,
    IllConditioned,
    OrderMismatch,
    SlopeCollapse,
)
from .spectral import TWO_PI, FourierField, differentiate, evaluate_with_derivative, grid

DEFAULT_PREFACTOR = 0.5j
SLOPE_FLOOR = 1e-4
CONDITION_LIMIT = 1e12
HOLOMORPHY_TOL = 1e-4


@dataclass
class CircleDiffeo:
    """Samples of an orientation-preserving circle diffeomorphism on a uniform grid.

    ``eta`` is the lift, ``eta(theta + 2 pi) = eta(theta) + 2 pi``.
    """

    theta: np.ndarray
    eta: np.ndarray
    eta_prime: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.eta = np.asarray(self.eta, dtype=np.float64)
        self.eta_prime = np.asarray(self.eta_prime, dtype=np.float64)
        if not (self.theta.shape == self.eta.shape == self.eta_prime.shape):
            raise ValueError("theta, eta and eta_prime must have equal length")

    @property
    def M(self):
        return self.theta.shape[0]

    @classmethod
    def from_function(cls, eta, eta_prime, M):
        th = grid(M)
        return cls(th, eta(th), eta_prime(th))

    @classmethod
    def identity(cls, M):
        th = grid(M)
        return cls(th, th.copy(), np.ones(M))

    @classmethod
    def rotation(cls, alpha, M):
        th = grid(M)
        return cls(th, th + alpha, np.ones(M))

    @classmethod
    def from_displacement(cls, d, M):
        """``eta = theta + d`` for a real trigonometric polynomial ``d``."""
        th = grid(M)
        values, derivs = evaluate_with_derivative(d, th)
        return cls(th, th + values, 1.0 + derivs)

    @classmethod
    def from_lagrangian(cls, lag):
        return cls(lag.theta.copy(), lag.eta.copy(), lag.eta_theta.copy())

    def min_slope(self):
        return float(np.min(self.eta_prime))

    def displacement(self):
        """Trigonometric interpolant of ``eta - theta``."""
        return FourierField.from_samples(self.eta - self.theta)

    def slope_field(self):
        return FourierField.from_samples(self.eta_prime)

    def check(self, tol=1e-6):
        """Largest mismatch between ``eta'`` and the spectral derivative of ``eta - theta``.

        Raises ``SlopeCollapse`` when the lift is not strictly increasing.
        """
        if np.any(self.eta_prime <= 0.0):
            raise SlopeCollapse(f"eta' reaches {self.min_slope():.3e}")
        steps = np.diff(np.append(self.eta, self.eta[0] + TWO_PI))
        if np.any(steps <= 0.0):
            raise SlopeCollapse("lift is not strictly increasing")
        d = differentiate(self.displacement()).synthesize(self.M)
        mismatch = float(np.max(np.abs(1.0 + d - self.eta_prime)))
        return mismatch <= tol * max(1.0, float(np.max(self.eta_prime))), mismatch

    def resample(self, M):
        """Re-sample on a uniform grid of ``M`` points through the trigonometric interpolants."""
        th = grid(M)
        d = _values(self.displacement(), th)
        s = _values(self.slope_field(), th)
        return CircleDiffeo(th, th + d, s)

    def to_dict(self):
        return {
            "theta": self.theta.tolist(),
            "eta": self.eta.tolist(),
            "eta_prime": self.eta_prime.tolist(),
        }


def _values(f, points):
    v, _ = evaluate_with_derivative(f, points)
    return v


def _solve_lift(d, targets, bracket_theta, bracket_eta, iters=60, tol=1e-15):
    """Solve ``x + d(x) = target`` for each target, given monotone samples of the lift."""
    ext_theta = np.concatenate([bracket_theta - TWO_PI, bracket_theta, bracket_theta + TWO_PI,
                                [bracket_theta[0] + 2 * TWO_PI]])
    ext_eta = np.concatenate([bracket_eta - TWO_PI, bracket_eta, bracket_eta + TWO_PI,
                              [bracket_eta[0] + 2 * TWO_PI]])
    idx = np.searchsorted(ext_eta, targets, side="right") - 1
    if np.any(idx < 0) or np.any(idx >= ext_eta.shape[0] - 1):
        raise SlopeCollapse("target angle outside the sampled lift")
    lo = ext_theta[idx].copy()
    hi = ext_theta[idx + 1].copy()
    e_lo = ext_eta[idx]
    e_hi = ext_eta[idx + 1]
    x = lo + (targets - e_lo) * (hi - lo) / (e_hi - e_lo)
    for _ in range(iters):
        v, dv = evaluate_with_derivative(d, x)
        g = x + v - targets
        slope = 1.0 + dv
        lo = np.where(g < 0, x, lo)
        hi = np.where(g > 0, x, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope > 0, g / slope, np.inf)
        xn = x - step
        outside = ~((xn > lo) & (xn < hi))
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        done = np.max(np.abs(xn - x)) <= tol * (1.0 + np.max(np.abs(x)))
        x = xn
        if done:
            break
    v, _ = evaluate_with_derivative(d, x)
    return x, float(np.max(np.abs(x + v - targets)))


def invert_circle_diffeo(eta, slope_floor=SLOPE_FLOOR, tol=1e-10):
    """Samples of the inverse diffeomorphism on the same uniform grid.

    Each value is found by bracketing on the monotone lift and then a
    safeguarded Newton iteration on the trigonometric interpolant of ``eta - theta``.
    """
    if eta.min_slope() <= slope_floor:
        raise SlopeCollapse(f"min eta' = {eta.min_slope():.3e} is below the floor {slope_floor:g}")
    psi = eta.theta
    d = eta.displacement()
    x, resid = _solve_lift(d, psi, eta.theta, eta.eta)
    if resid > tol:
        raise SlopeCollapse(f"inversion residual {resid:.3e} exceeds {tol:g}")
    slope_at_x = _values(eta.slope_field(), x)
    if np.any(slope_at_x <= 0.0):
        raise SlopeCollapse("interpolated eta' is not positive")
    return CircleDiffeo(psi.copy(), x, 1.0 / slope_at_x, residual=resid)


def _cot_half(x):
    return 1.0 / np.tan(0.5 * x)


class WeldingKernel:
    """Pointwise evaluator of the continuous welding kernel (without prefactor)."""

    def __init__(self, eta):
        self.eta = eta
        self._d = eta.displacement()
        self._slope = eta.slope_field()

    def inverse(self, points):
        pts = np.atleast_1d(np.asarray(points, dtype=np.float64))
        x, _ = _solve_lift(self._d, pts, self.eta.theta, self.eta.eta)
        return x, 1.0 / _values(self._slope, x)

    def __call__(self, theta, psi):
        a_t, _ = self.inverse(theta)
        a_p, ap_p = self.inverse(psi)
        theta = np.asarray(theta, dtype=np.float64)
        psi = np.asarray(psi, dtype=np.float64)
        return _cot_half(theta - psi) - ap_p * _cot_half(a_t - a_p)


def welding_matrix(eta, prefactor=DEFAULT_PREFACTOR, inverse=None, slope_floor=SLOPE_FLOOR):
    """Nystrom matrix of ``K`` on the grid of ``eta`` with equal trapezoid weights.

    Diagonal entries carry the continuous limit ``a''/a'`` of the kernel,
    with ``a'' `` obtained spectrally from the samples of ``a'``.
    """
    a = inverse if inverse is not None else invert_circle_diffeo(eta, slope_floor=slope_floor)
    M = eta.M
    th = eta.theta
    ap = a.eta_prime
    app = differentiate(FourierField.from_samples(ap)).synthesize(M)
    dth = th[:, None] - th[None, :]
    da = a.eta[:, None] - a.eta[None, :]
    kern = np.empty((M, M), dtype=np.float64)
    off = ~np.eye(M, dtype=bool)
    kern[off] = _cot_half(dth[off]) - (ap[None, :] * np.ones((M, 1)))[off] * _cot_half(da[off])
    kern[np.diag_indices(M)] = app / ap
    return (prefactor / M) * kern


@dataclass
class WeldingSolution:
    theta: np.ndarray
    W: np.ndarray
    eta: CircleDiffeo
    inverse: CircleDiffeo
    residual: float
    condition: float
    prefactor: complex = DEFAULT_PREFACTOR


def solve_welding(eta, prefactor=DEFAULT_PREFACTOR, slope_floor=SLOPE_FLOOR,
                  condition_limit=CONDITION_LIMIT):
    """Solve ``(I + K) W = e^{i theta}`` by dense LU factorization."""
    a = invert_circle_diffeo(eta, slope_floor=slope_floor)
    K = welding_matrix(eta, prefactor=prefactor, inverse=a)
    A = K + np.eye(eta.M)
    rhs = np.exp(1j * eta.theta)
    anorm = float(np.max(np.sum(np.abs(A), axis=0)))
    lu, piv = linalg.lu_factor(A, check_finite=True)
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    condition = np.inf if rcond == 0.0 else 1.0 / rcond
    if info != 0 or condition > condition_limit:
        raise IllConditioned(f"condition estimate {condition:.3e} exceeds {condition_limit:g}")
    W = linalg.lu_solve((lu, piv), rhs)
    residual = float(np.max(np.abs(A @ W - rhs)))
    return WeldingSolution(eta.theta.copy(), W, eta, a, residual, float(condition), prefactor)


@dataclass
class InteriorCoefficients:
    """Coefficients ``a_n`` of the interior map for ``n = -K..K``."""

    values: np.ndarray
    K: int

    @property
    def modes(self):
        return np.arange(-self.K, self.K + 1)

    def mode(self, n):
        if abs(n) > self.K:
            return 0j
        return complex(self.values[n + self.K])

    def negative_energy_fraction(self):
        total = float(np.sum(np.abs(self.values) ** 2))
        if total == 0.0:
            return 0.0
        return float(np.sum(np.abs(self.values[: self.K]) ** 2)) / total

    def boundary_values(self, theta):
        cpos = np.ascontiguousarray(self.values[self.K:])
        cneg = np.ascontiguousarray(self.values[: self.K][::-1])
        v, _ = _backend.eval_complex(cpos, cneg, np.ascontiguousarray(theta, dtype=np.float64))
        return v


def _complex_coefficients(samples):
    """Symmetric coefficient array ``c_{-K..K}`` of complex samples, Nyquist split evenly."""
    M = samples.shape[0]
    c = sfft.fft(samples) / M
    K = M // 2
    out = np.zeros(2 * K + 1, dtype=np.complex128)
    out[K:] = c[: K + 1]
    out[:K] = c[M - K:]
    if M % 2 == 0:
        out[0] *= 0.5
        out[-1] *= 0.5
    return out, K


def _compose(values, points):
    """Trigonometric interpolant of complex grid samples evaluated at ``points``."""
    c, K = _complex_coefficients(values)
    return InteriorCoefficients(c, K).boundary_values(points)


def _interior_from(W, eta_values):
    boundary = _compose(W, eta_values)
    c, K = _complex_coefficients(boundary)
    return InteriorCoefficients(c, K)


def interior_coefficients(sol, tol=HOLOMORPHY_TOL):
    """Fourier coefficients of ``Phi_-`` on the circle, from ``W`` composed with ``eta``."""
    coeffs = _interior_from(sol.W, sol.eta.eta)
    frac = coeffs.negative_energy_fraction()
    if frac > tol:
        raise HolomorphyViolation(f"negative-mode energy fraction {frac:.3e} exceeds {tol:g}")
    return coeffs


@dataclass
class NormalizedCurve:
    theta: np.ndarray
    points: np.ndarray
    coefficients: InteriorCoefficients
    a0: complex
    a1: complex
    solver_residual: float = 0.0
    metadata: dict = field(default_factory=dict)

    def to_csv(self, path=None):
        lines = ["theta,re,im"]
        for t, z in zip(self.theta, self.points):
            lines.append(f"{float(t)!r},{float(z.real)!r},{float(z.imag)!r}")
        # closed polyline
        z0 = self.points[0]
        lines.append(f"{TWO_PI!r},{float(z0.real)!r},{float(z0.imag)!r}")
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    def sidecar(self, config_hash=None, **extra):
        doc = {
            "a0": [self.a0.real, self.a0.imag],
            "a1": [self.a1.real, self.a1.imag],
            "solver_residual": self.solver_residual,
            "negative_energy_fraction": self.coefficients.negative_energy_fraction(),
            "config_hash": config_hash,
        }
        doc.update(self.metadata)
        doc.update(extra)
        return json.dumps(doc, indent=2, sort_keys=True)


def read_curve_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 0], rows[:, 1] + 1j * rows[:, 2]


def normalize_curve(sol, a, tol=1e-12):
    """Translate and scale so the interior map fixes 0 with unit derivative there."""
    a0 = a.mode(0)
    a1 = a.mode(1)
    if abs(a1) <= tol:
        raise DegenerateScale(f"|a1| = {abs(a1):.3e}")
    values = a.values / a1
    values[a.K] = 0.0
    coeffs = InteriorCoefficients(values, a.K)
    points = (sol.W - a0) / a1
    return NormalizedCurve(sol.theta.copy(), points, coeffs, a0, a1, sol.residual)


def weld(eta, prefactor=DEFAULT_PREFACTOR, holomorphy_tol=HOLOMORPHY_TOL, slope_floor=SLOPE_FLOOR):
    """Solve, recover the interior map, and normalize in one call."""
    sol = solve_welding(eta, prefactor=prefactor, slope_floor=slope_floor)
    a = interior_coefficients(sol, tol=holomorphy_tol)
    return normalize_curve(sol, a), sol


def welding_residual(curve, eta, prefactor=DEFAULT_PREFACTOR):
    """Round-trip defect of an exported curve against ``eta``.

    The curve is taken as the closed polyline it is exported as.  With the
    normalization undone, the larger of two defects is returned: the
    ``(I + K)`` residual at the grid nodes, and the negative-mode energy
    fraction of the interior boundary values rebuilt by reading the polyline
    at ``eta(theta_j)``.  Linear reading makes the second term converge at
    second order in the grid spacing.
    """
    if curve.points.shape[0] != eta.M:
        raise ValueError("curve and diffeomorphism must share the grid")
    W = curve.a1 * curve.points + curve.a0
    try:
        K = welding_matrix(eta, prefactor=prefactor, slope_floor=0.0)
    except SlopeCollapse:
        return float("inf")
    eq = float(np.max(np.abs(W + K @ W - np.exp(1j * eta.theta))))
    boundary = np.interp(np.mod(eta.eta, TWO_PI), curve.theta, W, period=TWO_PI)
    c, K_ = _complex_coefficients(boundary)
    frac = InteriorCoefficients(c, K_).negative_energy_fraction()
    return max(eq, frac)


@dataclass(frozen=True)
class MobiusMap:
    """Disc automorphism ``z -> e^{i alpha} (z - a) / (1 - conj(a) z)``."""

    alpha: float
    a: complex = 0j

    def __post_init__(self):
        if not abs(self.a) < 1.0:
            raise ValueError(f"|a| = {abs(self.a)} must be below 1")

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        return np.exp(1j * self.alpha) * (z - self.a) / (1.0 - np.conj(self.a) * z)

    def boundary_angle(self, theta):
        """Continuous lift of the induced circle map."""
        theta = np.asarray(theta, dtype=np.float64)
        return theta + self.alpha - 2.0 * np.angle(1.0 - np.conj(self.a) * np.exp(1j * theta))

    def boundary_slope(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return (1.0 - abs(self.a) ** 2) / np.abs(1.0 - np.conj(self.a) * np.exp(1j * theta)) ** 2

    def circle_diffeo(self, M):
        return CircleDiffeo.from_function(self.boundary_angle, self.boundary_slope, M)


def _cyclic_sign(angles):
    x = np.mod(np.asarray(angles, dtype=np.float64) - angles[0], TWO_PI)
    if x[1] == 0.0 or x[2] == 0.0 or x[1] == x[2]:
        raise OrderMismatch("angles are not distinct")
    return 1 if x[1] < x[2] else -1


def _to_standard(z):
    """Matrix of the map sending ``z[0], z[1], z[2]`` to ``0, 1, inf``."""
    z1, z2, z3 = z
    return np.array([[z2 - z3, -z1 * (z2 - z3)], [z2 - z1, -z3 * (z2 - z1)]], dtype=np.complex128)


def mobius_from_triple(sources, targets):
    """The disc automorphism carrying ``e^{i sources}`` to ``e^{i targets}``."""
    if _cyclic_sign(sources) != _cyclic_sign(targets):
        raise OrderMismatch("source and target triples have opposite cyclic order")
    zs = np.exp(1j * np.asarray(sources, dtype=np.float64))
    zt = np.exp(1j * np.asarray(targets, dtype=np.float64))
    T1 = _to_standard(zs)
    T2 = _to_standard(zt)
    P = np.linalg.solve(T2, T1)
    p, q = P[0]
    r, s = P[1]
    a = -q / p
    alpha = float(np.angle(p / s))
    return MobiusMap(alpha, complex(a))


def config_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
