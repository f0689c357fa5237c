"""YAML experiment configs: validation with line numbers and construction of model objects."""
from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import presets
from .coefficients import DegeneracyModel
from .forward import RatePack, box_bump, fertility_bump, rate_from_csv
from .hum import METHODS, ControlSetup
from .mesh import TensorGrid, field_from_csv
from .weights import CarlemanConfig, Window


class ConfigError(ValueError):
    def __init__(self, path, message, line=None):
        self.path, self.line = path, line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path}: {message}")


DEFAULTS = {
    "seed": 0,
    "grid": {"T": 2.0, "A": 1.0, "Na": 40, "Nx": 60, "grading": 1.0},
    "coefficients": {"k1": {"kind": "power_at_0", "exponent": 0.5},
                     "k2": {"kind": "power_at_0", "exponent": 0.7}},
    "rates": {"mu11": {"kind": "constant", "value": 0.1},
              "mu22": {"kind": "constant", "value": 0.1},
              "mu21": {"kind": "constant", "value": 1.0},
              "beta1": {"kind": "fertility_bump", "amplitude": 4.0},
              "beta2": {"kind": "fertility_bump", "amplitude": 3.0},
              "abar1": 0.5, "abar2": 0.5},
    "initial": {"u0": {"kind": "gaussian_bump", "center": [0.3, 0.5], "width": [0.12, 0.12],
                       "amplitude": 1.0},
                "v0": {"kind": "bubble_product", "amplitude": 0.5, "a_range": [0.0, 0.6]}},
    "carleman": {"s": [1.0, 2.0, 4.0, 8.0], "R": 1.0, "window": None, "side": "at0",
                 "members": 20, "component": "y"},
    "observability": {"members": 50, "delta": 0.6},
    "control": {"omega": [0.3, 0.7], "delta": 0.6, "eps": 1e-8, "tol": 1e-10, "maxiter": 2000,
                "method": "joint", "equal_coefficients": False, "experimental": False,
                "full": False},
    "simulate": {"dump_trajectory": False},
    "adjoint": {"trials": 10},
    "sweep": {"command": "hum", "axis": "control.eps", "values": [1e-6, 1e-7, 1e-8]},
}

COEFF_KINDS = ("power_at_0", "power_at_1", "constant", "csv")
RATE_KINDS = ("constant", "fertility_bump", "box_bump", "csv")
INIT_KINDS = ("zero", "gaussian_bump", "bubble_product", "csv")


def _line_map(text):
    """Map dotted key paths to 1-based source lines using the YAML node tree."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                lines[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                lines[f"{prefix}[{i}]"] = v.start_mark.line + 1
    if root is not None:
        walk(root, "")
    return lines


def _merge(base, over, path, lines):
    out = copy.deepcopy(base)
    for k, v in over.items():
        p = f"{path}.{k}" if path else str(k)
        if k not in base:
            raise ConfigError(p, "unknown key", lines.get(p))
        if isinstance(base[k], dict) and not _is_leaf(base[k]):
            if not isinstance(v, dict):
                raise ConfigError(p, "expected a mapping", lines.get(p))
            out[k] = _merge(base[k], v, p, lines)
        else:
            out[k] = v
    return out


def _is_leaf(d):
    return "kind" in d


@dataclass
class ExperimentConfig:
    data: dict
    text: str
    lines: dict
    base_dir: Path

    # -- loading ------------------------------------------------------------
    @classmethod
    def from_text(cls, text, base_dir="."):
        try:
            raw = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            raise ConfigError("<file>", f"YAML syntax error: {exc}",
                              None if mark is None else mark.line + 1) from None
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "top level must be a mapping", 1)
        lines = _line_map(text)
        cfg = cls(_merge(DEFAULTS, raw, "", lines), text, lines, Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config: {exc}") from None
        return cls.from_text(text, path.parent)

    @classmethod
    def default(cls):
        return cls.from_text("")

    @property
    def sha256(self):
        return hashlib.sha256(self.text.encode()).hexdigest()

    def get(self, dotted):
        node = self.data
        for part in dotted.split("."):
            node = node[part]
        return node

    def with_value(self, dotted, value):
        """Copy with one dotted key replaced (used by sweeps)."""
        data = copy.deepcopy(self.data)
        node = data
        parts = dotted.split(".")
        for part in parts[:-1]:
            if part not in node:
                raise ConfigError(dotted, "unknown sweep axis")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(dotted, "unknown sweep axis")
        node[parts[-1]] = value
        new = ExperimentConfig(data, self.text + f"\n# sweep {dotted}={value!r}\n", self.lines, self.base_dir)
        new.validate()
        return new

    def _err(self, path, msg):
        raise ConfigError(path, msg, self.lines.get(path))

    # -- validation -----------------------------------------------------------
    def _num(self, path, positive=False, integer=False, lo=None):
        v = self.get(path)
        ok = isinstance(v, (int, float)) and not isinstance(v, bool)
        if integer:
            ok = ok and float(v) == int(v)
        if not ok:
            self._err(path, "expected an integer" if integer else "expected a number")
        if positive and v <= 0:
            self._err(path, "must be positive")
        if lo is not None and v < lo:
            self._err(path, f"must be >= {lo}")
        return v

    def validate(self):
        d = self.data
        self._num("seed", integer=True, lo=0)
        for key in ("T", "A", "grading"):
            self._num(f"grid.{key}", positive=True)
        for key in ("Na", "Nx"):
            self._num(f"grid.{key}", integer=True, lo=4)
        try:
            self.grid()
        except ValueError as exc:
            self._err("grid", str(exc))
        for name in ("k1", "k2"):
            entry = d["coefficients"][name]
            path = f"coefficients.{name}"
            if not isinstance(entry, dict) or entry.get("kind") not in COEFF_KINDS:
                self._err(path, f"kind must be one of {COEFF_KINDS}")
            try:
                self.coefficient(name)
            except (ValueError, OSError) as exc:
                self._err(path, str(exc))
        for name in ("mu11", "mu22", "mu21", "beta1", "beta2"):
            entry = d["rates"][name]
            if not isinstance(entry, dict) or entry.get("kind") not in RATE_KINDS:
                self._err(f"rates.{name}", f"kind must be one of {RATE_KINDS}")
        for name in ("abar1", "abar2"):
            self._num(f"rates.{name}", positive=True)
        try:
            self.rates()
        except (ValueError, OSError) as exc:
            self._err("rates", str(exc))
        for name in ("u0", "v0"):
            entry = d["initial"][name]
            if not isinstance(entry, dict) or entry.get("kind") not in INIT_KINDS:
                self._err(f"initial.{name}", f"kind must be one of {INIT_KINDS}")
        c = d["control"]
        if c["method"] not in METHODS:
            self._err("control.method", f"must be one of {METHODS}")
        for key in ("delta", "eps", "tol"):
            self._num(f"control.{key}", positive=True)
        self._num("control.maxiter", integer=True, lo=1)
        try:
            self.control_setup()
        except ValueError as exc:
            self._err("control", str(exc))
        s = d["carleman"]["s"]
        if not isinstance(s, list) or not s or not all(isinstance(v, (int, float)) and v > 0 for v in s):
            self._err("carleman.s", "expected a nonempty list of positive numbers")
        if d["carleman"]["component"] not in ("y", "z"):
            self._err("carleman.component", "must be 'y' or 'z'")
        self._num("carleman.members", integer=True, lo=1)
        self._num("observability.members", integer=True, lo=1)
        self._num("observability.delta", positive=True)
        self._num("adjoint.trials", integer=True, lo=1)
        if not isinstance(d["sweep"]["values"], list) or not d["sweep"]["values"]:
            self._err("sweep.values", "expected a nonempty list")

    # -- construction -----------------------------------------------------------
    def grid(self):
        g = self.data["grid"]
        return TensorGrid.aligned_grid(float(g["T"]), float(g["A"]), int(g["Na"]), int(g["Nx"]),
                                       float(g["grading"]))

    def _path(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def coefficient(self, name):
        entry = self.data["coefficients"][name]
        kind = entry["kind"]
        if kind == "power_at_0":
            return DegeneracyModel.power_at_0(entry.get("exponent", 1.0), entry.get("scale", 1.0))
        if kind == "power_at_1":
            return DegeneracyModel.power_at_1(entry.get("exponent", 1.0), entry.get("scale", 1.0))
        if kind == "constant":
            return DegeneracyModel.constant(entry.get("value", 1.0))
        return DegeneracyModel.from_csv(self._path(entry["path"]), entry.get("side", "at0"))

    def _rate(self, grid, name, abar=None):
        entry = self.data["rates"][name]
        kind = entry["kind"]
        if kind == "constant":
            return float(entry.get("value", 0.0))
        if kind == "fertility_bump":
            if abar is None:
                raise ValueError(f"{name}: fertility_bump is only meaningful for beta1/beta2")
            return fertility_bump(grid, float(entry.get("amplitude", 1.0)), abar)
        if kind == "box_bump":
            return box_bump(grid, float(entry.get("amplitude", 1.0)),
                            tuple(entry.get("a_range", (0.0, grid.A))), tuple(entry.get("x_range", (0.0, 1.0))))
        return rate_from_csv(self._path(entry["path"]), grid)

    def rates(self, grid=None):
        grid = grid or self.grid()
        r = self.data["rates"]
        a1, a2 = float(r["abar1"]), float(r["abar2"])
        return RatePack(grid, self._rate(grid, "mu11"), self._rate(grid, "mu22"), self._rate(grid, "mu21"),
                        self._rate(grid, "beta1", a1), self._rate(grid, "beta2", a2), a1, a2)

    def initial(self, name, grid=None):
        grid = grid or self.grid()
        entry = self.data["initial"][name]
        kind = entry["kind"]
        if kind == "zero":
            return np.zeros((grid.Na + 1, grid.Nx + 1))
        if kind == "gaussian_bump":
            return presets.gaussian_bump(grid, tuple(entry.get("center", (0.3, 0.5))),
                                         tuple(entry.get("width", (0.12, 0.12))), float(entry.get("amplitude", 1.0)))
        if kind == "bubble_product":
            a_range = entry.get("a_range", [0.0, None])
            return presets.bubble_product(grid, float(entry.get("amplitude", 1.0)), tuple(a_range))
        f = field_from_csv(self._path(entry["path"]), grid)
        f[:, 0] = f[:, -1] = 0.0
        return f

    def control_setup(self):
        c = self.data["control"]
        return ControlSetup(omega=tuple(c["omega"]), delta=float(c["delta"]), eps=float(c["eps"]),
                            tol=float(c["tol"]), maxiter=int(c["maxiter"]), method=c["method"],
                            equal_coefficients=bool(c["equal_coefficients"]),
                            experimental=bool(c["experimental"]))

    def carleman_config(self, k):
        c = self.data["carleman"]
        g = self.data["grid"]
        win = c["window"] or [0.0, float(g["T"]), 0.0]
        return CarlemanConfig(float(c["s"][0]), k, Window(*map(float, win)), float(c["R"]), c["side"])
