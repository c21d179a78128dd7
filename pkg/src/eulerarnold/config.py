"""Experiment configuration documents (TOML).

A minimal document::

    equation = "wunsch"

    [initial]
    modes = [[2, 1.0, "sin"], [3, 0.5, "cos"]]

Each mode triple ``[n, amplitude, phase]`` contributes
``amplitude * sin(n theta + phase)``; the phase may also be the literal
``"sin"`` (phase 0) or ``"cos"`` (phase pi/2).  ``initial.fourier_csv``
names a coefficient file (columns ``n,re,im``) instead.
"""

import copy
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .dynamics import SimulationConfig
from .errors import ParseError, ValidationError
from .spectral import FourierField

EQUATIONS = ("wunsch", "ewp", "clm")

_SCHEMA = {
    "equation": str,
    "N": int,
    "M": int,
    "dt": float,
    "t_fin": float,
    "snapshots": list,
    "out": str,
    "seed": int,
    "initial.modes": list,
    "initial.fourier_csv": str,
    "detect.slope_threshold": float,
    "detect.tail_threshold": float,
    "detect.cadence": float,
    "detect.continue_past_blowup": bool,
    "detect.refine_levels": int,
    "weld.enabled": bool,
    "weld.prefactor": list,
    "weld.slope_floor": float,
    "weld.svg": bool,
    "verify.trials": int,
    "output.svg": bool,
}


@dataclass
class ExperimentConfig:
    equation: str
    modes: list = field(default_factory=list)
    fourier_csv: str | None = None
    N: int = 256
    M: int = 512
    dt: float = 1e-4
    t_fin: float = 0.5
    snapshots: list = field(default_factory=list)
    weld: bool = False
    weld_prefactor: complex = 0.5j
    weld_slope_floor: float = 1e-4
    out: str = "out"
    seed: int = 0
    slope_threshold: float = 1e-3
    tail_threshold: float = 0.01
    cadence: float = 0.005
    continue_past_blowup: bool = False
    refine_levels: int = 3
    verify_trials: int = 100
    svg: bool = True
    base_dir: str = "."

    def simulation_config(self):
        return SimulationConfig(
            kind=self.equation,
            N=self.N,
            dt=self.dt,
            t_fin=self.t_fin,
            M=self.M,
            slope_threshold=self.slope_threshold,
            tail_threshold=self.tail_threshold,
            cadence=self.cadence,
            snapshot_times=tuple(self.snapshots),
            continue_past_blowup=self.continue_past_blowup,
            refine_levels=self.refine_levels,
        )

    def initial_condition(self):
        if self.fourier_csv is not None:
            return FourierField.from_csv(self._resolve(self.fourier_csv)).with_band_limit(self.N)
        cos, sin = {}, {}
        for n, amp, phase in self.modes:
            if phase == "sin":
                sin[n] = sin.get(n, 0.0) + amp
            elif phase == "cos":
                cos[n] = cos.get(n, 0.0) + amp
            else:
                sin[n] = sin.get(n, 0.0) + amp * math.cos(phase)
                cos[n] = cos.get(n, 0.0) + amp * math.sin(phase)
        return FourierField.from_trig(self.N, cos=cos, sin=sin)

    def _resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        d["weld_prefactor"] = [self.weld_prefactor.real, self.weld_prefactor.imag]
        return d

    def digest(self):
        """Hash of the resolved configuration (stable across key order and formatting).

        The output directory is left out: it says where results go, not what they are.
        """
        d = self.to_dict()
        d.pop("out")
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _set_dotted(doc, key, value):
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        nxt = node.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ValidationError(f"'{p}' is not a section", field=key)
        node = nxt
    node[parts[-1]] = value


def parse_override(text):
    """``key=value`` with a TOML value; bare words are taken as strings."""
    if "=" not in text:
        raise ParseError(f"override '{text}' is not of the form key=value", field=text)
    key, raw = text.split("=", 1)
    key = key.strip()
    if not key:
        raise ParseError("override has an empty key", field=text)
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return key, value


def _line_of(text, key):
    leaf = key.split(".")[-1]
    for i, line in enumerate(text.splitlines(), start=1):
        if line.strip().startswith(leaf):
            return i
    return None


def _check_type(key, value, expected):
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if expected is int and isinstance(value, bool):
        raise ValidationError(f"{key} must be an integer", field=key)
    if not isinstance(value, expected):
        raise ValidationError(f"{key} must be of type {expected.__name__}", field=key)
    return value


def _modes(raw):
    modes = []
    for i, m in enumerate(raw):
        where = f"initial.modes[{i}]"
        if not isinstance(m, list) or len(m) != 3:
            raise ValidationError(f"{where} must be [mode, amplitude, phase]", field=where)
        n, amp, phase = m
        if isinstance(n, bool) or not isinstance(n, int) or n <= 0:
            raise ValidationError(f"{where}: mode must be a positive integer", field=where)
        if isinstance(amp, bool) or not isinstance(amp, (int, float)) or not math.isfinite(amp):
            raise ValidationError(f"{where}: amplitude must be a finite number", field=where)
        if isinstance(phase, str):
            if phase not in ("sin", "cos"):
                raise ValidationError(f"{where}: phase must be a number, 'sin' or 'cos'", field=where)
        elif isinstance(phase, bool) or not isinstance(phase, (int, float)):
            raise ValidationError(f"{where}: phase must be a number, 'sin' or 'cos'", field=where)
        else:
            phase = float(phase)
        modes.append((n, float(amp), phase))
    return modes


def parse_config(text, overrides=(), base_dir="."):
    """Parse and validate a configuration document, filling defaults."""
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc), line=getattr(exc, "lineno", None)) from exc
    doc = copy.deepcopy(doc)
    for ov in overrides:
        key, value = parse_override(ov) if isinstance(ov, str) else ov
        _set_dotted(doc, key, value)

    flat = _flatten(doc)
    vals = {}
    for key, value in flat.items():
        if key not in _SCHEMA:
            raise ParseError(f"unknown key '{key}'", line=_line_of(text, key), field=key)
        vals[key] = _check_type(key, value, _SCHEMA[key])

    if "equation" not in vals:
        raise ValidationError("missing required key 'equation'", field="equation")
    if vals["equation"] not in EQUATIONS:
        raise ValidationError(f"equation must be one of {EQUATIONS}", field="equation")

    cfg = ExperimentConfig(equation=vals["equation"], base_dir=str(base_dir))
    simple = {
        "N": "N", "M": "M", "dt": "dt", "t_fin": "t_fin", "out": "out", "seed": "seed",
        "detect.slope_threshold": "slope_threshold", "detect.tail_threshold": "tail_threshold",
        "detect.cadence": "cadence", "detect.continue_past_blowup": "continue_past_blowup",
        "detect.refine_levels": "refine_levels", "weld.enabled": "weld",
        "weld.slope_floor": "weld_slope_floor", "verify.trials": "verify_trials",
        "output.svg": "svg",
    }
    for key, attr in simple.items():
        if key in vals:
            setattr(cfg, attr, vals[key])

    if "weld.prefactor" in vals:
        pf = vals["weld.prefactor"]
        if len(pf) != 2 or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pf):
            raise ValidationError("weld.prefactor must be [re, im]", field="weld.prefactor")
        cfg.weld_prefactor = complex(pf[0], pf[1])

    if "initial.modes" in vals and "initial.fourier_csv" in vals:
        raise ValidationError("give either initial.modes or initial.fourier_csv, not both",
                              field="initial")
    if "initial.modes" in vals:
        cfg.modes = _modes(vals["initial.modes"])
    elif "initial.fourier_csv" in vals:
        cfg.fourier_csv = vals["initial.fourier_csv"]
        if not cfg._resolve(cfg.fourier_csv).is_file():
            raise ValidationError(f"file not found: {cfg.fourier_csv}", field="initial.fourier_csv")
    else:
        raise ValidationError("initial condition missing: set initial.modes or initial.fourier_csv",
                              field="initial")

    _validate(cfg)
    if "snapshots" in vals:
        snaps = []
        for i, ts in enumerate(vals["snapshots"]):
            if isinstance(ts, bool) or not isinstance(ts, (int, float)):
                raise ValidationError(f"snapshots[{i}] must be a number", field="snapshots")
            if not 0.0 <= ts <= cfg.t_fin:
                raise ValidationError(f"snapshot time {ts} outside [0, t_fin={cfg.t_fin}]",
                                      field="snapshots")
            snaps.append(float(ts))
        cfg.snapshots = sorted(set(snaps))
    return cfg


def _validate(cfg):
    if not cfg.t_fin > 0:
        raise ValidationError("t_fin must be positive", field="t_fin")
    if not cfg.dt > 0:
        raise ValidationError("dt must be positive", field="dt")
    if cfg.dt > cfg.t_fin:
        raise ValidationError("dt exceeds t_fin", field="dt")
    if cfg.N < 4:
        raise ValidationError("N must be at least 4", field="N")
    if cfg.M < 8:
        raise ValidationError("M must be at least 8", field="M")
    for attr in ("slope_threshold", "tail_threshold"):
        if not 0.0 < getattr(cfg, attr) < 1.0:
            raise ValidationError(f"{attr} must lie in (0, 1)", field=f"detect.{attr}")
    if not cfg.cadence > 0:
        raise ValidationError("cadence must be positive", field="detect.cadence")
    if cfg.refine_levels < 0:
        raise ValidationError("refine_levels must be non-negative", field="detect.refine_levels")
    if cfg.verify_trials < 1:
        raise ValidationError("verify.trials must be positive", field="verify.trials")
    if cfg.seed < 0:
        raise ValidationError("seed must be non-negative", field="seed")
    if not cfg.weld_slope_floor >= 0:
        raise ValidationError("weld.slope_floor must be non-negative", field="weld.slope_floor")
    for n, _, _ in cfg.modes:
        if n > cfg.N:
            raise ValidationError(f"mode {n} exceeds band limit N={cfg.N}", field="initial.modes")


def load_config(path, overrides=()):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}", field="--config") from exc
    return parse_config(text, overrides=overrides, base_dir=p.parent)
