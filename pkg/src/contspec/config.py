"""Scenario files: a strict, flat ``key = value`` format.

Grammar (one statement per line)::

    # comment            (``;`` also starts a comment line; `` #`` ends a value)
    [section]            sets the prefix for following keys
    key = value          stored as "section.key" (or "key" if it already has a dot
                         or no section is open)

Values are typed by the schema below:

* numbers use ``.`` decimals (``1e-3`` allowed); booleans are ``true``/``false``;
* lists are comma separated (``1, 2.5, 3``); a float list may also be a
  range ``start:stop:count`` (inclusive, ``count`` points);
* integer matrices (ergodic modes) separate rows by ``;`` and entries by
  spaces or commas: ``1 -1; 2 3``;
* ``none`` leaves an optional value unset.

Unknown keys, duplicate keys, malformed lines and ill-typed values are all
rejected with the offending line number.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .spectral import SCHEMES

_SECTION = re.compile(r"^\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\]$")
PIPELINES = ("decohere", "maxent", "kms", "wigner", "ergodic", "canonical", "localize", "full-chain")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{': '.join(where)}: {message}" if where else message)
        self.line, self.key = line, key


def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    low = s.lower()
    if low not in ("true", "false"):
        raise ValueError(f"{s!r} is not true/false")
    return low == "true"


def _split(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _float_list(s):
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise ValueError("ranges are start:stop:count")
        return np.linspace(float(parts[0]), float(parts[1]), _int(parts[2])).tolist()
    return [float(x) for x in _split(s)]


def _int_list(s):
    return [_int(x) for x in _split(s)]


def _str_list(s):
    return _split(s)


def _int_matrix(s):
    rows = [r.strip() for r in s.split(";") if r.strip()]
    return [[_int(x) for x in r.replace(",", " ").split()] for r in rows]


def _choice(*options):
    def parse(s):
        if s not in options:
            raise ValueError(f"{s!r} not in {options}")
        return s
    return parse


# key -> (parser, default); a default of REQUIRED must be supplied by the file
REQUIRED = object()
SCHEMA = {
    "scenario.name": (str, REQUIRED),
    "scenario.pipeline": (_choice(*PIPELINES), REQUIRED),
    "scenario.seed": (_int, 0),
    "scenario.output": (str, None),
    "grid.scheme": (_choice(*SCHEMES), "gauss-legendre"),
    "grid.nodes": (_int, 64),
    "grid.omega_max": (_float, 30.0),
    "csco.bound_energy": (_float, None),
    "csco.degeneracy": (_int, 1),
    "csco.n_momenta": (_int, 0),
    "csco.n_isolating": (_int, 1),
    "evolution.times": (_float_list, None),
    "evolution.revival_override": (_bool, False),
    "evolution.center": (_float, 5.0),
    "evolution.sigma": (_float, 1.0),
    "pointer.families": (_int, 10),
    "pointer.test_observables": (_int, 20),
    "thermal.E": (_float, None),
    "thermal.beta": (_float, None),
    "thermal.gammas": (_float_list, []),
    "thermal.competitors": (_int, 200),
    "kms.t_max": (_float, 2.0),
    "kms.t_steps": (_int, 41),
    "kms.strip_rows": (_int, 9),
    "kms.random_pairs": (_int, 10),
    "wigner.q_extent": (_float, 4.0),
    "wigner.p_extent": (_float, 3.0),
    "wigner.nq": (_int, 257),
    "wigner.np": (_int, 121),
    "wigner.hbar_eff": (_float, 0.1),
    "wigner.hbar_series": (_float_list, [0.2, 0.1, 0.05, 0.025]),
    "wigner.epsilon": (_float, 0.02),
    "wigner.omega": (_float, 2.0),
    "wigner.shell_extent": (_float, 2.3),
    "wigner.shell_nodes": (_int, 1151),
    "flow.frequencies": (_str_list, ["1", "sqrt2"]),
    "flow.actions": (_float_list, None),
    "flow.classification": (_str_list, None),
    "flow.initial_angles": (_float_list, None),
    "ergodic.T": (_float, 1e4),
    "ergodic.samples": (_int, 200_000),
    "ergodic.modes": (_int_matrix, [[1, -1]]),
    "canonical.nu": (_float, 50.0),
    "canonical.E_total": (_float, 1.0),
    "canonical.beta": (_float, 2.0),
    "canonical.hbar_series": (_float_list, [0.4, 0.2, 0.1]),
    "localization.ensemble_size": (_int, 4000),
    "localization.observed_indices": (_int_list, [0]),
    "localization.seed": (_int, None),
    "localization.flow": (_choice("shear", "identity"), "shear"),
    "localization.sigma_q": (_float, 1.0),
    "localization.sigma_p": (_float, 0.03),
    "localization.t_max": (_float, 10.0),
    "localization.t_steps": (_int, 21),
    "localization.band": (_float_list, [0.9, 1.1]),
}


@dataclass
class Scenario:
    values: dict
    path: Path | None = None
    lines: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key, default)
        return default if v is None else v

    @property
    def name(self) -> str:
        return self.values["scenario.name"]

    @property
    def pipeline(self) -> str:
        return self.values["scenario.pipeline"]

    @property
    def seed(self) -> int:
        return self.values["scenario.seed"]

    @property
    def output(self) -> str:
        return self.values["scenario.output"] or self.name

    def section(self, prefix: str) -> dict:
        return {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith(prefix + ".")}

    def line_of(self, key):
        return self.lines.get(key)


def parse_text(text: str, path=None) -> Scenario:
    section = None
    raw, lines = {}, {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        if s.startswith("["):
            m = _SECTION.match(s)
            if not m:
                raise ConfigError(f"malformed section header {s!r}", lineno, path=path)
            section = m.group(1)
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno, path=path)
        key, value = (x.strip() for x in s.split("=", 1))
        if " #" in value:
            value = value.split(" #", 1)[0].strip()
        if not key:
            raise ConfigError("empty key", lineno, path=path)
        full = key if ("." in key or section is None) else f"{section}.{key}"
        if full not in SCHEMA:
            raise ConfigError("unknown key", lineno, full, path)
        if full in raw:
            raise ConfigError(f"duplicate key (first set on line {lines[full]})", lineno, full, path)
        raw[full], lines[full] = value, lineno
    values = {}
    for key, (parser, default) in SCHEMA.items():
        if key not in raw:
            if default is REQUIRED:
                raise ConfigError("missing required key", None, key, path)
            values[key] = default
            continue
        text_value = raw[key]
        if text_value.lower() == "none" and default is not REQUIRED:
            values[key] = None
            continue
        try:
            values[key] = parser(text_value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value {text_value!r}: {exc}", lines[key], key, path) from None
    _check_ranges(values, lines, path)
    return Scenario(values, Path(path) if path else None, lines)


def _check_ranges(v, lines, path):
    def need(cond, key, msg):
        if not cond:
            raise ConfigError(msg, lines.get(key), key, path)

    need(v["grid.nodes"] >= 2, "grid.nodes", "need at least 2 nodes")
    need(v["grid.omega_max"] > 0, "grid.omega_max", "must be positive")
    need(v["csco.degeneracy"] >= 1, "csco.degeneracy", "must be >= 1")
    need(v["csco.n_momenta"] >= 0, "csco.n_momenta", "must be >= 0")
    need(1 <= v["csco.n_isolating"] <= v["csco.n_momenta"] + 1, "csco.n_isolating",
         "must lie in [1, n_momenta + 1]")
    need(v["wigner.nq"] % 2 == 1 and v["wigner.nq"] >= 9, "wigner.nq", "must be odd and >= 9")
    need(v["wigner.np"] >= 3, "wigner.np", "must be >= 3")
    need(v["kms.t_steps"] >= 3, "kms.t_steps", "must be >= 3")
    need(v["kms.strip_rows"] >= 3, "kms.strip_rows", "must be >= 3")
    need(v["ergodic.samples"] >= 100, "ergodic.samples", "must be >= 100")
    need(v["localization.ensemble_size"] >= 1000, "localization.ensemble_size", "must be >= 1000")
    need(v["localization.t_steps"] >= 5, "localization.t_steps", "must be >= 5")
    need(len(v["localization.band"]) == 2 and v["localization.band"][0] < v["localization.band"][1],
         "localization.band", "needs two increasing edges")
    need(len(v["wigner.hbar_series"]) >= 4, "wigner.hbar_series", "needs at least 4 values")


def load(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read: {exc}", path=path) from None
    return parse_text(text, path)
