"""JSON configuration parsing.  Errors name the JSON path of the offending
field, e.g. ``$.hazards[0][1].shape``."""

from __future__ import annotations

import json
import math

import numpy as np

from . import frailty as fr
from .closedform import ModelSpec
from .errors import ConfigError
from .hazards import FAMILIES, HazardSet

HAZARD_FIELDS = {"constant": ("rate",), "weibull": ("shape", "scale"), "gompertz": ("a", "c")}

# law -> (scalar fields, list fields)
FRAILTY_FIELDS = {
    "shared_gamma": (("sigma",), ()),
    "correlated_gamma": (("sigma1", "sigma2", "rho"), ()),
    "shared_cause_specific": ((), ("sigmas",)),
    "correlated_cause_specific": ((), ("sigma1", "sigma2", "rho")),
    "dirichlet_gamma": (("sigma",), ("alpha1", "alpha2")),
    "independent_gamma": ((), ("sigma1", "sigma2")),
    "rescaled": (("c1", "c2"), ()),
}


def load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("$", f"invalid JSON in {path}: {exc}") from None
    except OSError as exc:
        raise ConfigError("$", f"cannot read {path}: {exc.strerror}") from None


def _object(obj, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    return obj


def _number(obj, key, path, positive=True):
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing field")
    value = obj[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{path}.{key}", f"must be a positive finite number, got {value!r}")
    return value


def _numbers(obj, key, path, positive=True):
    if key not in obj:
        raise ConfigError(f"{path}.{key}", "missing field")
    values = obj[key]
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}.{key}", "expected a non-empty list of numbers")
    return tuple(_number({str(i): v}, str(i), f"{path}.{key}", positive)
                 for i, v in enumerate(values))


def _fix_index_path(exc: ConfigError) -> ConfigError:
    # "$.x.sigmas.0" -> "$.x.sigmas[0]"
    head, _, tail = exc.path.rpartition(".")
    if tail.isdigit():
        return ConfigError(f"{head}[{tail}]", str(exc).split(": ", 1)[1])
    return exc


def _unknown(obj, allowed, path):
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}", "unknown field")


def parse_hazard(obj, path="$"):
    obj = _object(obj, path)
    family = obj.get("family")
    if family not in HAZARD_FIELDS:
        raise ConfigError(f"{path}.family", f"expected one of {sorted(HAZARD_FIELDS)}, got {family!r}")
    fields = HAZARD_FIELDS[family]
    _unknown(obj, ("family",) + fields, path)
    return FAMILIES[family](*(_number(obj, f, path) for f in fields))


def parse_hazards(obj, path="$.hazards") -> HazardSet:
    if not isinstance(obj, list) or len(obj) != 2:
        raise ConfigError(path, "expected a list of two per-individual lists")
    groups = []
    for k, group in enumerate(obj):
        gpath = f"{path}[{k}]"
        if not isinstance(group, list) or not group:
            raise ConfigError(gpath, "expected a non-empty list of hazards")
        groups.append(tuple(parse_hazard(h, f"{gpath}[{j}]") for j, h in enumerate(group)))
    return HazardSet(*groups)


def parse_frailty(obj, path="$.frailty"):
    obj = _object(obj, path)
    law = obj.get("law")
    if law not in FRAILTY_FIELDS:
        raise ConfigError(f"{path}.law", f"expected one of {sorted(FRAILTY_FIELDS)}, got {law!r}")
    scalars, lists = FRAILTY_FIELDS[law]
    extra = ("base",) if law == "rescaled" else ()
    _unknown(obj, ("law",) + scalars + lists + extra, path)
    try:
        kw = {f: _number(obj, f, path) for f in scalars}
        kw.update({f: _numbers(obj, f, path) for f in lists})
    except ConfigError as exc:
        raise _fix_index_path(exc) from None
    if law == "rescaled":
        if "base" not in obj:
            raise ConfigError(f"{path}.base", "missing field")
        return fr.Rescaled(parse_frailty(obj["base"], f"{path}.base"), kw["c1"], kw["c2"])
    return fr.LAWS[law](**kw)


def _rho_path(spec, path):
    while isinstance(spec, fr.Rescaled):
        spec, path = spec.base, f"{path}.base"
    return f"{path}.rho" if hasattr(spec, "rho") else path


def parse_model(obj, path="$") -> ModelSpec:
    obj = _object(obj, path)
    _unknown(obj, ("hazards", "frailty"), path)
    if "hazards" not in obj:
        raise ConfigError(f"{path}.hazards", "missing field")
    if "frailty" not in obj:
        raise ConfigError(f"{path}.frailty", "missing field")
    hs = parse_hazards(obj["hazards"], f"{path}.hazards")
    spec = parse_frailty(obj["frailty"], f"{path}.frailty")
    problems = fr.validate(spec, *hs.dims)
    if problems:
        where = f"{path}.frailty"
        if all("rho" in p for p in problems):
            where = _rho_path(spec, where)
        raise ConfigError(where, "; ".join(problems))
    return ModelSpec(hs, spec)


def parse_grid(obj, path="$") -> np.ndarray:
    """A list of non-negative numbers or ``{start, stop, count, spacing}``
    with spacing ``linear`` (default) or ``log``."""
    if isinstance(obj, list):
        if not obj:
            raise ConfigError(path, "empty grid")
        try:
            vals = [_number({str(i): v}, str(i), path, positive=False) for i, v in enumerate(obj)]
        except ConfigError as exc:
            raise _fix_index_path(exc) from None
        arr = np.asarray(vals)
        if np.any(arr < 0):
            raise ConfigError(path, "grid values must be >= 0")
        return arr
    obj = _object(obj, path)
    _unknown(obj, ("start", "stop", "count", "spacing"), path)
    start = _number(obj, "start", path, positive=False)
    stop = _number(obj, "stop", path, positive=False)
    count = obj.get("count")
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"{path}.count", f"expected a positive integer, got {count!r}")
    spacing = obj.get("spacing", "linear")
    if spacing == "linear":
        if start < 0 or stop < start:
            raise ConfigError(path, "need 0 <= start <= stop")
        return np.linspace(start, stop, count)
    if spacing == "log":
        if start <= 0 or stop < start:
            raise ConfigError(path, "log spacing needs 0 < start <= stop")
        return np.geomspace(start, stop, count)
    raise ConfigError(f"{path}.spacing", f"expected 'linear' or 'log', got {spacing!r}")
