"""INI-style experiment configs: ``[section]`` headers, ``key = value`` lines, ``#`` comments.

All problems are collected with their line numbers before anything is
raised.  A repeated key keeps the last value and records a warning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameterError
from .noise import SCALAR_MAPS, AdditiveNoise, MarkSpace, NoiseModel
from .nonlinearity import MonotoneFunction
from .solver import Model
from .spectral import Field, SemigroupOperator, SpatialGrid

__all__ = ["ConfigError", "ExperimentConfig", "EXPERIMENTS", "parse_config", "load_config"]

EXPERIMENTS = ("simulate", "bj", "bjconv", "apriori", "stability", "lipschitz", "yosida", "mixing", "backward", "kb",
               "moment_ode")


class ConfigError(InvalidParameterError):
    """Every problem found in a config, one ``line N: message`` per entry."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"{s!r} is not finite")
    return v


def _int(s):
    return int(s)


def _floats(s):
    return tuple(_float(p) for p in s.split(",") if p.strip())


def _ints(s):
    return tuple(int(p) for p in s.split(",") if p.strip())


def _optional_float(s):
    return None if s.strip().lower() in ("", "none") else _float(s)


def _alpha(s):
    return None if s.strip().lower() == "auto" else _float(s)


def _pairs(s, left=float, right=float):
    out = []
    for item in s.split(","):
        item = item.strip()
        if not item:
            continue
        a, sep, b = item.partition(":")
        if not sep:
            raise ValueError(f"expected a:b, got {item!r}")
        out.append((left(a), right(b)))
    return tuple(out)


def _coefficients(s):
    return _pairs(s, int, float)


def _profile(s):
    """``amplitude:mode`` list for ``sum a sin(k pi x)``; ``0`` or empty is the zero field."""
    if s.strip() in ("", "0", "zero"):
        return ()
    return _pairs(s, float, int)


def _choice(*options):
    def conv(s):
        s = s.strip().lower()
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {s!r}")
        return s

    return conv


def _positive(v):
    return v > 0


def _nonneg(v):
    return v >= 0


def _all(pred):
    return lambda vs: all(pred(v) for v in vs)


# section -> key -> (converter, default, check, bound description)
SCHEMA = {
    "grid": {"n_interior": (_int, 31, lambda v: 1 <= v <= 4096, "1 <= n_interior <= 4096")},
    "operator": {
        "kind": (_choice("laplacian", "fractional"), "laplacian", None, ""),
        "s": (_float, 1.0, _positive, "s > 0"),
    },
    "nonlinearity": {
        "coefficients": (_coefficients, (), lambda v: all(d >= 1 and d % 2 == 1 and a >= 0 for d, a in v),
                         "odd degrees >= 1 with nonnegative coefficients"),
        "eta": (_float, 0.0, None, ""),
        "offset": (_float, 0.0, None, ""),
    },
    "noise": {
        "kind": (_choice("none", "additive", "multiplicative"), "none", None, ""),
        "marks": (_pairs, (), lambda v: all(w > 0 for _, w in v), "mark weights > 0"),
        "modes": (_ints, (), _all(lambda k: k >= 1), "modes >= 1"),
        "g": (_choice(*SCALAR_MAPS), "identity", None, ""),
        "offset": (_float, 0.0, None, ""),
    },
    "solver": {
        "T": (_float, 1.0, _positive, "T > 0"),
        "dt": (_float, 1e-2, _positive, "dt > 0"),
        "lambda": (_optional_float, None, lambda v: v is None or v > 0, "lambda > 0"),
        "lambda_sequence": (_floats, (1e-2, 5e-3, 2.5e-3, 1.25e-3), _all(_positive), "lambda > 0"),
        "alpha": (_alpha, None, lambda v: v is None or v >= 0, "alpha >= 0"),
        "tol": (_float, 1e-10, _positive, "tol > 0"),
    },
    "experiment": {
        "name": (_choice(*EXPERIMENTS), "simulate", None, ""),
        "samples": (_int, 10_000, lambda v: v >= 1, "samples >= 1"),
        "seed": (_int, 0, _nonneg, "seed >= 0"),
        "x": (_profile, ((1.0, 1),), None, ""),
        "y": (_profile, ((-1.0, 1),), None, ""),
        "ps": (_floats, (2.0, 4.0), _all(lambda p: p >= 2), "p >= 2"),
        "intensities": (_floats, (1.0, 2.0, 4.0), _all(_positive), "intensities > 0"),
        "scalings": (_floats, (0.0, 1.0, 2.0, 4.0), _all(_nonneg), "scalings >= 0"),
        "starts": (_floats, (-1.0, -2.0, -4.0, -8.0), _all(lambda s: s < 0), "starts < 0"),
        "multiples": (_ints, (1, 2, 4), _all(_positive), "multiples >= 1"),
        "tau": (_float, 1.0, _positive, "tau > 0"),
        "beta0": (_float, 1e-3, _positive, "beta0 > 0"),
        "noise_scale": (_float, 1.0, _nonneg, "noise_scale >= 0"),
    },
}

REQUIRED_SECTIONS = ("experiment",)


@dataclass
class ExperimentConfig:
    """Validated settings; ``sections`` maps section -> key -> value with defaults filled in."""

    sections: dict
    text: str = ""
    warnings: list = field(default_factory=list)

    def __getitem__(self, section):
        return self.sections[section]

    @property
    def name(self) -> str:
        return self.sections["experiment"]["name"]

    @property
    def seed(self) -> int:
        return self.sections["experiment"]["seed"]

    @property
    def samples(self) -> int:
        return self.sections["experiment"]["samples"]

    def grid(self) -> SpatialGrid:
        return SpatialGrid(self["grid"]["n_interior"])

    def operator(self) -> SemigroupOperator:
        grid = self.grid()
        if self["operator"]["kind"] == "fractional":
            return SemigroupOperator.fractional(grid, self["operator"]["s"])
        return SemigroupOperator.laplacian(grid)

    def nonlinearity(self) -> MonotoneFunction:
        nl = self["nonlinearity"]
        return MonotoneFunction(nl["coefficients"], nl["eta"], nl["offset"])

    def noise(self, grid: SpatialGrid | None = None, scale: float = 1.0) -> NoiseModel:
        grid = grid or self.grid()
        nz = self["noise"]
        if nz["kind"] == "none" or not nz["marks"]:
            return NoiseModel.zero()
        sigmas = [s * scale for s, _ in nz["marks"]]
        weights = [w for _, w in nz["marks"]]
        if nz["kind"] == "multiplicative":
            return NoiseModel.multiplicative(grid, weights, sigmas, nz["g"], nz["offset"])
        return NoiseModel(MarkSpace(tuple(weights)), AdditiveNoise(grid, self.noise_fields(grid, sigmas)))

    def noise_fields(self, grid: SpatialGrid | None = None, sigmas=None) -> np.ndarray:
        """Additive fields ``sigma_i sin(k_i pi x)``; ``k_i`` from ``modes`` or ``i + 1``."""
        grid = grid or self.grid()
        nz = self["noise"]
        if sigmas is None:
            sigmas = [s for s, _ in nz["marks"]]
        modes = nz["modes"] or tuple(range(1, len(sigmas) + 1))
        return np.stack([s * np.sin(k * np.pi * grid.points) for s, k in zip(sigmas, modes)])

    def model(self) -> Model:
        S = self.operator()
        f = self.nonlinearity()
        return Model(S, f, self["solver"]["lambda"], self.noise(S.grid))

    def field(self, key: str, grid: SpatialGrid | None = None) -> Field:
        grid = grid or self.grid()
        vals = np.zeros(grid.n_interior)
        for a, k in self["experiment"][key]:
            vals = vals + a * np.sin(k * np.pi * grid.points)
        return Field(grid, vals)


def _split(text: str):
    """Raw parse into section -> key -> (value, line); returns (raw, errors, warnings)."""
    raw: dict = {}
    errors, warnings = [], []
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                errors.append(f"line {lineno}: malformed section header {stripped!r}")
                continue
            section = stripped[1:-1].strip().lower()
            if section not in SCHEMA:
                errors.append(f"line {lineno}: unknown section [{section}]")
            raw.setdefault(section, {})
            continue
        key, sep, value = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            errors.append(f"line {lineno}: expected 'key = value', got {stripped!r}")
            continue
        if section is None:
            errors.append(f"line {lineno}: key {key!r} outside any section")
            continue
        if key in raw[section]:
            warnings.append(f"line {lineno}: duplicate key {key!r} in [{section}] (line {raw[section][key][1]}); last one wins")
        raw[section][key] = (value.strip(), lineno)
    return raw, errors, warnings


def parse_config(text: str) -> ExperimentConfig:
    """Validate config text; raises ConfigError listing every problem."""
    raw, errors, warnings = _split(text)
    for name in REQUIRED_SECTIONS:
        if name not in raw:
            errors.append(f"line {len(text.splitlines()) + 1}: missing section [{name}]")
    sections = {}
    for sec, schema in SCHEMA.items():
        out = {}
        given = raw.get(sec, {})
        for key, (value, lineno) in given.items():
            if key not in schema:
                errors.append(f"line {lineno}: unknown key {key!r} in [{sec}]")
        for key, (conv, default, check, bound) in schema.items():
            if key not in given:
                out[key] = default
                continue
            value, lineno = given[key]
            try:
                v = conv(value)
            except ValueError as exc:
                errors.append(f"line {lineno}: bad value for {key!r}: {exc}")
                continue
            if check is not None and not check(v):
                errors.append(f"line {lineno}: {key} = {value} out of range (need {bound})")
                continue
            out[key] = v
        sections[sec] = out
    if not errors:
        errors.extend(_cross_checks(sections, raw))
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(sections, text, warnings)


def _line(raw, sec, key):
    return raw.get(sec, {}).get(key, (None, 0))[1]


def _cross_checks(sections, raw):
    errors = []
    nz = sections["noise"]
    if nz["modes"] and len(nz["modes"]) != len(nz["marks"]):
        errors.append(f"line {_line(raw, 'noise', 'modes')}: modes must list one mode per mark")
    if nz["kind"] != "none" and not nz["marks"]:
        errors.append(f"line {_line(raw, 'noise', 'kind')}: noise kind {nz['kind']} needs marks")
    seq = sections["solver"]["lambda_sequence"]
    if len(seq) < 2 or any(b >= a for a, b in zip(seq, seq[1:])):
        errors.append(f"line {_line(raw, 'solver', 'lambda_sequence')}: lambda_sequence must be strictly decreasing, length >= 2")
    sol = sections["solver"]
    if sol["dt"] > sol["T"]:
        errors.append(f"line {_line(raw, 'solver', 'dt')}: dt must not exceed T")
    name = sections["experiment"]["name"]
    if name in ("bj", "bjconv", "stability") and nz["kind"] == "multiplicative":
        errors.append(f"line {_line(raw, 'noise', 'kind')}: experiment {name} needs additive noise")
    if name in ("bj", "bjconv") and nz["kind"] != "additive":
        errors.append(f"line {_line(raw, 'noise', 'kind')}: experiment {name} needs additive noise")
    return errors


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
