"""Seeded property suites over random trigonometric polynomials.

Each suite draws its own fields from a generator seeded by ``(seed, suite)``
so adding or reordering suites never changes another suite's inputs.
"""

import json
import zlib

import numpy as np

from .analysis import (
    F_integral,
    F_series,
    bound_F,
    bound_G,
    certify_blowup,
    compute_F,
    min_value,
    synthesize_transfer,
    transfer_coefficients,
)
from .errors import NumericalError
from .spectral import (
    EWP,
    WUNSCH,
    FourierField,
    apply_inertia,
    differentiate,
    hilbert_transform,
    invert_inertia,
    multiply,
    project_representative,
    seminorm_sq,
)


def random_field(rng, N_max=32, N_min=1, mean_zero=True, scale=1.0):
    """Real trig polynomial with coefficients uniform in ``[-scale, scale]`` (real and imaginary parts)."""
    N = int(rng.integers(N_min, N_max + 1))
    cpos = scale * (rng.uniform(-1, 1, N + 1) + 1j * rng.uniform(-1, 1, N + 1))
    cpos[0] = 0.0 if mean_zero else cpos[0].real
    if np.all(cpos[1:] == 0):
        cpos[1] = 1.0
    return FourierField.from_positive(cpos)


def _sup(f):
    return float(np.max(np.abs(f.coeffs))) if f.N >= 0 else 0.0


def _sup_grid(f):
    return float(np.max(np.abs(f.synthesize(max(8 * f.N, 16)))))


def _direct_product(f, g, N_out):
    full = np.convolve(f.coeffs, g.coeffs)
    mid = f.N + g.N
    c = np.zeros(2 * N_out + 1, dtype=np.complex128)
    for n in range(-N_out, N_out + 1):
        if abs(n) <= mid:
            c[n + N_out] = full[n + mid]
    return FourierField(c)


def _hilbert_involution(rng):
    f = random_field(rng)
    return _sup_grid(hilbert_transform(hilbert_transform(f)) + f)


def _hilbert_product(rng):
    f = random_field(rng)
    Hf = hilbert_transform(f)
    lhs = hilbert_transform(multiply(f, Hf, 2 * f.N)) * 2.0
    rhs = multiply(Hf, Hf, 2 * f.N) - multiply(f, f, 2 * f.N)
    return _sup_grid(lhs - rhs) / max(1.0, _sup_grid(rhs))


def _orthogonality(rng):
    f = random_field(rng)
    p = multiply(f, hilbert_transform(f), 2 * f.N)
    return max(abs(p.mode(0)), abs(p.mode(1))) / max(1.0, p.max_abs_coeff())


def _inertia_roundtrip(rng):
    f = random_field(rng, mean_zero=False)
    err = 0.0
    for op in (WUNSCH, EWP):
        back = invert_inertia(op, apply_inertia(op, f))
        err = max(err, _sup(back - project_representative(op, f)))
    return err


def _seminorm_rotation(rng):
    f = random_field(rng)
    alpha = rng.uniform(0, 2 * np.pi)
    rot = FourierField(f.coeffs * np.exp(1j * f.modes * alpha))
    err = 0.0
    for r in (0.5, 1, 1.5):
        a, b = seminorm_sq(f, r), seminorm_sq(rot, r)
        err = max(err, abs(a - b) / max(1.0, a))
    return err


def _multiply_oracle(rng):
    f, g = random_field(rng, mean_zero=False), random_field(rng, mean_zero=False)
    N_out = int(rng.integers(1, f.N + g.N + 1))
    return _sup(multiply(f, g, N_out) - _direct_product(f, g, N_out))


def _F_series(rng):
    u = random_field(rng)
    F = compute_F(u)
    return _sup_grid(F - F_series(u)) / max(1.0, _sup_grid(F))


def _F_integral(rng):
    u = random_field(rng)
    theta = rng.uniform(0, 2 * np.pi, 2)
    ref = compute_F(u)(theta)
    return float(np.max(np.abs(F_integral(u, theta) - ref)))


def _F_positive(rng):
    u = random_field(rng)
    return max(0.0, -min_value(compute_F(u)))


def _bounds(rng):
    u = random_field(rng)
    try:
        rf = bound_F(u)
        rg = bound_G(u)
    except NumericalError:
        return float("inf")
    return max(0.0, -rf.slack, -rg.slack)


def _transfer(rng):
    f = random_field(rng)
    fp = differentiate(f, 1)
    direct = hilbert_transform(multiply(fp, hilbert_transform(fp), 2 * f.N))
    h = transfer_coefficients(f)
    via = synthesize_transfer(h, 2 * f.N)
    scale = max(1.0, _sup_grid(direct))
    return max(_sup_grid(direct - via) / scale, abs(h[0]), abs(h[1]))


def _certificate(rng):
    u = random_field(rng)
    try:
        cert = certify_blowup(u)
    except NumericalError:
        return float("inf")
    return 0.0 if cert.u0_slope < 0 else float("inf")


SUITES = {
    "hilbert_involution": (_hilbert_involution, 1e-12),
    "hilbert_product_identity": (_hilbert_product, 1e-12),
    "product_orthogonality": (_orthogonality, 1e-12),
    "inertia_roundtrip": (_inertia_roundtrip, 1e-12),
    "seminorm_rotation_invariance": (_seminorm_rotation, 1e-12),
    "multiply_vs_convolution": (_multiply_oracle, 1e-12),
    "F_products_vs_series": (_F_series, 1e-10),
    "F_products_vs_integral": (_F_integral, 1e-3),
    "F_positivity": (_F_positive, 1e-10),
    "bounds_F_G": (_bounds, 0.0),
    "transfer_coefficients": (_transfer, 1e-12),
    "blowup_certificate": (_certificate, 0.0),
}


def _suite_rng(seed, name):
    return np.random.default_rng([seed, zlib.crc32(name.encode())])


def run_suite(name, trials, seed=0):
    func, tol = SUITES[name]
    rng = _suite_rng(seed, name)
    worst = 0.0
    failures = 0
    for _ in range(trials):
        err = func(rng)
        worst = max(worst, err)
        if not err <= tol:
            failures += 1
    return {"trials": trials, "failures": failures, "max_error": worst, "tolerance": tol,
            "passed": failures == 0}


def run_all(trials=100, seed=0, suites=None):
    names = list(SUITES) if suites is None else list(suites)
    results = {name: run_suite(name, trials, seed) for name in names}
    return {
        "seed": seed,
        "trials": trials,
        "suites": results,
        "passed": all(r["passed"] for r in results.values()),
    }


def report_json(report):
    return json.dumps(report, indent=2, sort_keys=True)
