"""Band-limited Fourier fields on the circle and the nonlocal operators acting on them.

A :class:`FourierField` stores the coefficients ``c_n`` for ``n = -N..N`` of a
real 2*pi-periodic function ``f(theta) = sum_n c_n exp(i n theta)``. The
full symmetric range is kept so that sign-dependent multipliers (Hilbert
transform, inertia symbols) act index by index.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import _backend
from .errors import KernelContamination, ResonantModes

DEFAULT_GATE_TOL = 1e-10

TWO_PI = 2.0 * np.pi


def grid(M):
    """Uniform grid ``theta_j = 2 pi j / M``."""
    return TWO_PI * np.arange(M) / M


class FourierField:
    """Real periodic function as complex Fourier coefficients ``c_{-N..N}``.

    The coefficient array is checked for finiteness and conjugate symmetry
    (to ``symmetry_tol`` relative to the largest coefficient), then
    symmetrized exactly and frozen.
    """

    __slots__ = ("_c", "N")

    def __init__(self, coeffs, symmetry_tol=1e-12):
        c = np.array(coeffs, dtype=np.complex128)
        if c.ndim != 1 or c.shape[0] % 2 != 1:
            raise ValueError("coefficient array must be 1-D with odd length 2N+1")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        scale = np.max(np.abs(c)) if c.size else 0.0
        mirror = np.conj(c[::-1])
        if np.max(np.abs(c - mirror)) > symmetry_tol * max(scale, 1e-300) and scale > 0:
            raise ValueError("coefficients are not conjugate symmetric (field is not real)")
        c = 0.5 * (c + mirror)
        c.flags.writeable = False
        self._c = c
        self.N = (c.shape[0] - 1) // 2

    @classmethod
    def _trusted(cls, c):
        # caller guarantees symmetry and finiteness
        obj = cls.__new__(cls)
        c = np.asarray(c, dtype=np.complex128)
        c.flags.writeable = False
        obj._c = c
        obj.N = (c.shape[0] - 1) // 2
        return obj

    @classmethod
    def from_positive(cls, cpos):
        """Build from ``c_0..c_N``; negative modes are the conjugates."""
        cpos = np.array(cpos, dtype=np.complex128)
        if not np.all(np.isfinite(cpos)):
            raise ValueError("coefficients must be finite")
        cpos[0] = cpos[0].real
        full = np.concatenate([np.conj(cpos[:0:-1]), cpos])
        return cls._trusted(full)

    @classmethod
    def zeros(cls, N):
        return cls._trusted(np.zeros(2 * N + 1, dtype=np.complex128))

    @classmethod
    def from_trig(cls, N, cos=None, sin=None):
        """``sum a_n cos(n theta) + sum b_n sin(n theta)`` from ``{n: a_n}`` / ``{n: b_n}`` maps."""
        cpos = np.zeros(N + 1, dtype=np.complex128)
        for n, a in (cos or {}).items():
            if not 0 <= n <= N:
                raise ValueError(f"mode {n} outside band limit {N}")
            cpos[n] += a if n == 0 else 0.5 * a
        for n, b in (sin or {}).items():
            if not 1 <= n <= N:
                raise ValueError(f"sine mode {n} outside 1..{N}")
            cpos[n] += -0.5j * b
        return cls.from_positive(cpos)

    @classmethod
    def from_samples(cls, values, N=None):
        """Analyse real samples on the uniform grid of ``len(values)`` points."""
        values = np.asarray(values, dtype=np.float64)
        M = values.shape[0]
        if N is None:
            N = (M - 1) // 2
        if 2 * N + 1 > M:
            raise ValueError(f"{M} samples cannot resolve band limit {N}")
        cpos = sfft.rfft(values)[: N + 1] / M
        return cls.from_positive(cpos)

    @classmethod
    def from_function(cls, func, N, oversample=4):
        M = max(oversample * N, 2 * N + 1)
        return cls.from_samples(func(grid(M)), N)

    @property
    def coeffs(self):
        return self._c

    @property
    def positive(self):
        """Coefficients ``c_0..c_N``."""
        return self._c[self.N:]

    def mode(self, n):
        if abs(n) > self.N:
            return 0j
        return complex(self._c[n + self.N])

    @property
    def modes(self):
        return np.arange(-self.N, self.N + 1)

    def max_abs_coeff(self):
        return float(np.max(np.abs(self._c)))

    def with_band_limit(self, N):
        if N == self.N:
            return self
        if N < self.N:
            return FourierField._trusted(self._c[self.N - N: self.N + N + 1].copy())
        pad = np.zeros(N - self.N, dtype=np.complex128)
        return FourierField._trusted(np.concatenate([pad, self._c, pad]))

    def synthesize(self, M=None):
        """Values on the uniform grid of ``M >= 2N+1`` points."""
        if M is None:
            M = 2 * self.N + 2
        if M < 2 * self.N + 1:
            raise ValueError(f"grid of {M} points aliases band limit {self.N}")
        spec = np.zeros(M // 2 + 1, dtype=np.complex128)
        spec[: self.N + 1] = self.positive
        return sfft.irfft(spec, n=M) * M

    def __call__(self, theta):
        return evaluate_at(self, theta)

    def _aligned(self, other):
        N = max(self.N, other.N)
        return self.with_band_limit(N)._c, other.with_band_limit(N)._c

    def __add__(self, other):
        if isinstance(other, FourierField):
            a, b = self._aligned(other)
            return FourierField._trusted(a + b)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, FourierField):
            a, b = self._aligned(other)
            return FourierField._trusted(a - b)
        return NotImplemented

    def __neg__(self):
        return FourierField._trusted(-self._c)

    def __mul__(self, scalar):
        if isinstance(scalar, FourierField):
            raise TypeError("use multiply() for products of fields")
        s = float(scalar)
        return FourierField._trusted(s * self._c)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def allclose(self, other, atol=1e-12):
        a, b = self._aligned(other)
        return bool(np.max(np.abs(a - b), initial=0.0) <= atol)

    def __repr__(self):
        return f"FourierField(N={self.N}, max|c|={self.max_abs_coeff():.3g})"

    # --- CSV -----------------------------------------------------------

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "re", "im"])
        for n, c in zip(self.modes, self._c):
            w.writerow([int(n), repr(float(c.real)), repr(float(c.imag))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source):
        """Read the ``n,re,im`` format from a path or a text stream."""
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, Path) or "\n" not in str(source):
            text = Path(source).read_text()
        else:
            text = str(source)
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or set(rows[0]) != {"n", "re", "im"}:
            raise ValueError("expected CSV header n,re,im")
        entries = {int(r["n"]): complex(float(r["re"]), float(r["im"])) for r in rows}
        N = max(abs(n) for n in entries)
        c = np.zeros(2 * N + 1, dtype=np.complex128)
        for n, v in entries.items():
            c[n + N] = v
        return cls(c, symmetry_tol=1e-9)


@dataclass(frozen=True)
class InertiaOperator:
    """Fourier multiplier defining the metric: ``kind`` in {wunsch, ewp, clm}."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("wunsch", "ewp", "clm"):
            raise ValueError(f"unknown operator kind {self.kind!r}")

    @property
    def kernel_modes(self):
        return (-1, 0, 1) if self.kind == "ewp" else (0,)

    def symbol(self, n):
        n = np.abs(np.asarray(n, dtype=np.float64))
        if self.kind == "ewp":
            return n * (n * n - 1.0)
        return n

    @property
    def energy_exponent(self):
        return Fraction(3, 2) if self.kind == "ewp" else Fraction(1, 2)


WUNSCH = InertiaOperator("wunsch")
EWP = InertiaOperator("ewp")
CLM = InertiaOperator("clm")


def operator(kind):
    try:
        return {"wunsch": WUNSCH, "ewp": EWP, "clm": CLM}[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown equation kind {kind!r}") from None


def _kernel_index(op, N):
    return np.array([k + N for k in op.kernel_modes if abs(k) <= N], dtype=int)


def _gate(f, modes, tol):
    """Largest |c_n| over ``modes`` compared against ``tol * max|c|``."""
    idx = np.array([n + f.N for n in modes if abs(n) <= f.N], dtype=int)
    if idx.size == 0:
        return 0.0, False
    worst = float(np.max(np.abs(f.coeffs[idx])))
    scale = f.max_abs_coeff()
    return worst, worst > tol * scale and worst > 0.0


def hilbert_transform(f):
    n = f.modes
    return FourierField._trusted(-1j * np.sign(n) * f.coeffs)


def differentiate(f, order=1):
    if order < 1:
        raise ValueError("order must be a positive integer")
    n = f.modes
    return FourierField._trusted((1j * n) ** order * f.coeffs)


def apply_inertia(op, u):
    return FourierField._trusted(op.symbol(u.modes) * u.coeffs)


def invert_inertia(op, m, tol=DEFAULT_GATE_TOL):
    """Recover the velocity representative from momentum ``m``.

    Raises KernelContamination when ``m`` carries weight on the operator's
    kernel modes beyond ``tol`` relative to its largest coefficient.
    """
    worst, bad = _gate(m, op.kernel_modes, tol)
    if bad:
        raise KernelContamination(
            f"{op.kind}: kernel-mode coefficient {worst:.3e} exceeds tolerance"
        )
    s = op.symbol(m.modes)
    out = np.zeros_like(m.coeffs)
    nz = s != 0
    out[nz] = m.coeffs[nz] / s[nz]
    return FourierField._trusted(out)


def helmholtz_inverse_restricted(f, tol=DEFAULT_GATE_TOL):
    """Invert ``1 + d^2/dtheta^2`` on the complement of ``{1, sin, cos}``."""
    worst, bad = _gate(f, (-1, 0, 1), tol)
    if bad:
        raise ResonantModes(f"|n|<=1 coefficient {worst:.3e} exceeds tolerance")
    n = f.modes.astype(np.float64)
    out = np.zeros_like(f.coeffs)
    keep = np.abs(n) >= 2
    out[keep] = f.coeffs[keep] / (1.0 - n[keep] ** 2)
    return FourierField._trusted(out)


def project_representative(op, u):
    c = u.coeffs.copy()
    c[_kernel_index(op, u.N)] = 0.0
    return FourierField._trusted(c)


def multiply(f, g, band_limit=None):
    """Pointwise product, exact up to mode ``band_limit`` (default ``max(N_f, N_g)``).

    The product is formed on a grid of at least ``N_f + N_g + N_out + 1``
    points, which keeps every aliased mode outside the retained band (the
    3N+1 rule when all three limits agree).
    """
    N_out = max(f.N, g.N) if band_limit is None else int(band_limit)
    M = sfft.next_fast_len(max(f.N + g.N + N_out + 1, 2 * max(f.N, g.N) + 1), real=True)
    prod = f.synthesize(M) * g.synthesize(M)
    cpos = sfft.rfft(prod)[: min(N_out, M // 2) + 1] / M
    if cpos.shape[0] < N_out + 1:
        cpos = np.concatenate([cpos, np.zeros(N_out + 1 - cpos.shape[0], dtype=np.complex128)])
    return FourierField.from_positive(cpos)


def evaluate_at(f, points):
    """Exact trigonometric-polynomial values at arbitrary angles (direct summation)."""
    pts = np.ascontiguousarray(np.atleast_1d(np.asarray(points, dtype=np.float64)))
    values, _ = _backend.eval_real(np.ascontiguousarray(f.positive), pts)
    if np.ndim(points) == 0:
        return float(values[0])
    return values


def evaluate_with_derivative(f, points):
    """``(f(points), f'(points))`` in one pass of the evaluation kernel."""
    pts = np.ascontiguousarray(np.atleast_1d(np.asarray(points, dtype=np.float64)))
    return _backend.eval_real(np.ascontiguousarray(f.positive), pts)


_WEIGHTS = {
    Fraction(1, 2): lambda n: n,
    Fraction(1): lambda n: n * n,
    Fraction(3, 2): lambda n: n * (n * n - 1.0),
}


def seminorm_sq(f, r):
    """``2 pi sum_n w_r(n) |c_n|^2`` for ``r`` in {1/2, 1, 3/2}.

    For ``r = 3/2`` this is the degenerate seminorm ``int (Hf)(f''' + f')``,
    which ignores the modes ``|n| <= 1``.
    """
    key = Fraction(r).limit_denominator(4)
    if key not in _WEIGHTS:
        raise ValueError(f"unsupported Sobolev exponent {r}")
    n = np.abs(f.modes).astype(np.float64)
    return float(TWO_PI * np.sum(_WEIGHTS[key](n) * np.abs(f.coeffs) ** 2))


def energy(op, u):
    """Conserved quantity ``int u * Lambda u`` for the operator's dynamics."""
    return seminorm_sq(u, op.energy_exponent)


def tail_fraction(op, u):
    """Share of the energy ``sum symbol(n)|c_n|^2`` carried by the top third of modes."""
    n = u.modes
    w = op.symbol(n) * np.abs(u.coeffs) ** 2
    total = float(np.sum(w))
    if total <= 0.0:
        return 0.0
    cut = 2 * u.N / 3.0
    return float(np.sum(w[np.abs(n) > cut]) / total)
