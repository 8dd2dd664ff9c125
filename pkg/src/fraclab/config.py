"""Experiment configuration: JSON text, validated before any computation.

A configuration is a JSON object with a ``command`` and command-specific
keys; unknown keys are rejected. See the README for the schema.
"""

from dataclasses import dataclass
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError
from .expressions import parse_constant, parse_expression
from .grid import MatrixCoefficient, ScalarCoefficient, build_interval_grid, build_rectangle_grid

__all__ = [
    "COMMANDS",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "config_hash",
    "build_grid",
    "matrix_coefficient",
    "scalar_spec",
]

COMMANDS = ("spectrum", "frac", "extend", "picone", "compare", "radial")

_COMMON = {"command", "name", "description", "domain", "s", "A", "eigen", "out", "seed"}
_KEYS = {
    "spectrum": {"modes_out", "export_matrices"},
    "frac": {"u", "C", "method", "quadrature"},
    "extend": {"u", "method", "ladder", "trace_nodes"},
    "picone": {"U", "v", "Y", "lattice", "derivatives", "fd_order", "scale"},
    "compare": {"mode", "A1", "C1", "A2", "C2", "C", "ladder", "gate", "random", "zero_tol"},
    "radial": {"n", "c", "r0", "rmax", "windows", "y0", "dy0", "q", "sturm"},
}
_NEEDS_DOMAIN = {"spectrum", "frac", "extend", "picone", "compare"}
_NEEDS_S = {"frac", "extend", "picone", "compare"}
_LADDER_KEYS = {"Y_factor", "Ny", "gamma", "first_node_power"}
_QUAD_KEYS = {"rtol", "initial_intervals", "max_levels", "low_factor", "high_factor"}


def _bad(msg, code="invalid_config", **details):
    raise InvalidArgumentError(msg, code=code, **details)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        _bad(f"{where} must be an object")
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        _bad(f"unknown key(s) {unknown} in {where}", code="unknown_key", keys=unknown)


def _number(value, where, lo=None, hi=None, integer=False, lo_open=False):
    try:
        v = parse_constant(value)
    except InvalidArgumentError:
        _bad(f"{where} must be a number, got {value!r}", code="bad_value")
    if not np.isfinite(v):
        _bad(f"{where} must be finite, got {value!r}", code="bad_value")
    if integer:
        if v != int(v):
            _bad(f"{where} must be an integer, got {value!r}", code="bad_value")
        v = int(v)
    if lo is not None and (v < lo or (lo_open and v == lo)):
        _bad(f"{where} = {v} is below {'or at ' if lo_open else ''}{lo}", code="bad_value")
    if hi is not None and v > hi:
        _bad(f"{where} = {v} exceeds {hi}", code="bad_value")
    return v


def config_hash(raw):
    """SHA-256 of the canonical JSON form (sorted keys, compact separators)."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _domain(raw):
    _check_keys(raw, {"type", "bounds", "n"}, "domain")
    kind = raw.get("type", "interval")
    if "bounds" not in raw or "n" not in raw:
        _bad("domain needs 'bounds' and 'n'", code="missing_key")
    if kind == "interval":
        b = raw["bounds"]
        if not isinstance(b, list) or len(b) != 2:
            _bad("interval bounds must be [a, b]")
        a, bb = _number(b[0], "domain.bounds[0]"), _number(b[1], "domain.bounds[1]")
        n = _number(raw["n"], "domain.n", lo=3, hi=4096, integer=True)
        if not bb > a:
            _bad(f"interval needs b > a, got [{a}, {bb}]", code="bad_value")
        return {"type": "interval", "bounds": (a, bb), "n": n}
    if kind == "rectangle":
        b = raw["bounds"]
        if not (isinstance(b, list) and len(b) == 2 and all(isinstance(r, list) and len(r) == 2
                                                           for r in b)):
            _bad("rectangle bounds must be [[ax, bx], [ay, by]]")
        (ax, bx), (ay, by) = [[_number(v, "domain.bounds") for v in r] for r in b]
        n = raw["n"]
        if not isinstance(n, list) or len(n) != 2:
            _bad("rectangle n must be [nx, ny]")
        nx = _number(n[0], "domain.n[0]", lo=3, hi=256, integer=True)
        ny = _number(n[1], "domain.n[1]", lo=3, hi=256, integer=True)
        if not (bx > ax and by > ay):
            _bad("rectangle needs bx > ax and by > ay", code="bad_value")
        return {"type": "rectangle", "bounds": ((ax, bx), (ay, by)), "n": (nx, ny)}
    _bad(f"unknown domain type {kind!r}", code="bad_value")


def build_grid(domain):
    if domain["type"] == "interval":
        a, b = domain["bounds"]
        return build_interval_grid(a, b, domain["n"])
    (ax, bx), (ay, by) = domain["bounds"]
    return build_rectangle_grid(ax, bx, ay, by, *domain["n"])


def _validate_matrix_spec(spec, dim, where):
    if spec is None:
        return
    if isinstance(spec, (int, float, str)) and not isinstance(spec, bool):
        _scalar_field(spec, dim, where)
    elif isinstance(spec, dict):
        _check_keys(spec, {"diag"}, where)
        d = spec.get("diag")
        if not isinstance(d, list) or len(d) != dim:
            _bad(f"{where}.diag must list {dim} entries")
        for i, e in enumerate(d):
            _scalar_field(e, dim, f"{where}.diag[{i}]")
    elif isinstance(spec, list):
        if len(spec) != dim or any(not isinstance(r, list) or len(r) != dim for r in spec):
            _bad(f"{where} must be a {dim}x{dim} matrix")
        for i, r in enumerate(spec):
            for j, e in enumerate(r):
                _scalar_field(e, dim, f"{where}[{i}][{j}]")
        if any(str(spec[i][j]) != str(spec[j][i]) for i in range(dim) for j in range(dim)):
            _bad(f"{where} must be symmetric", code="coefficient_violation")
    else:
        _bad(f"unsupported coefficient spec for {where}")


def _scalar_field(spec, dim, where):
    """Callable (P, dim) -> (P,) from a number or expression."""
    if isinstance(spec, bool):
        _bad(f"{where} must be a number or expression")
    if isinstance(spec, (int, float)):
        value = float(spec)
        if not np.isfinite(value):
            _bad(f"{where} is not finite", code="bad_value")
        return lambda pts: np.full(len(pts), value)
    if isinstance(spec, str):
        try:
            return parse_expression(spec, dim)
        except InvalidArgumentError as exc:
            _bad(f"{where}: {exc}", code="bad_expression")
    _bad(f"{where} must be a number or expression")


def matrix_coefficient(spec, dim):
    """MatrixCoefficient from a validated spec (number, expression, matrix or diag)."""
    if spec is None:
        return MatrixCoefficient.constant(1.0, dim)
    label = json.dumps(spec, sort_keys=True)
    if isinstance(spec, dict):
        fields = [_scalar_field(e, dim, "A.diag") for e in spec["diag"]]

        def diag(pts):
            vals = np.stack([f(pts) for f in fields], axis=1)
            return vals[:, :, None] * np.eye(dim)

        return MatrixCoefficient(diag, dim, vectorized=True, label=label)
    if isinstance(spec, list):
        fields = [[_scalar_field(e, dim, "A") for e in row] for row in spec]

        def full(pts):
            out = np.empty((len(pts), dim, dim))
            for i in range(dim):
                for j in range(dim):
                    out[:, i, j] = fields[i][j](pts)
            return out

        return MatrixCoefficient(full, dim, vectorized=True, label=label)
    f = _scalar_field(spec, dim, "A")
    return MatrixCoefficient(lambda pts: f(pts), dim, vectorized=True, label=label)


def scalar_spec(spec, dim, where):
    """(ScalarCoefficient, calibration index or None) from a validated spec."""
    if isinstance(spec, dict):
        f = _scalar_field(spec.get("expr", 0.0), dim, where)
        k = spec.get("calibrate")
        return ScalarCoefficient(f, vectorized=True, label=json.dumps(spec, sort_keys=True)), k
    f = _scalar_field(spec, dim, where)
    return ScalarCoefficient(f, vectorized=True, label=json.dumps(spec)), None


def _validate_scalar_spec(spec, dim, where, required=True):
    if spec is None:
        if required:
            _bad(f"missing coefficient {where}", code="missing_key")
        return
    if isinstance(spec, dict):
        _check_keys(spec, {"expr", "calibrate"}, where)
        _scalar_field(spec.get("expr", 0.0), dim, f"{where}.expr")
        if "calibrate" in spec:
            _number(spec["calibrate"], f"{where}.calibrate", lo=1, integer=True)
    else:
        _scalar_field(spec, dim, where)


def _validate_u(spec, dim):
    if spec is None:
        _bad("missing trace data 'u'", code="missing_key")
    if isinstance(spec, dict):
        _check_keys(spec, {"modes", "weights", "expr"}, "u")
        if "expr" in spec:
            if "modes" in spec:
                _bad("u takes either 'expr' or 'modes'")
            _scalar_field(spec["expr"], dim, "u.expr")
            return
        modes = spec.get("modes")
        if not isinstance(modes, list) or not modes:
            _bad("u.modes must be a non-empty list of mode indices")
        for k in modes:
            _number(k, "u.modes", lo=1, integer=True)
        w = spec.get("weights")
        if w is not None:
            if not isinstance(w, list) or len(w) != len(modes):
                _bad("u.weights must match u.modes in length")
            for x in w:
                _number(x, "u.weights")
    else:
        _scalar_field(spec, dim, "u")


def _validate_ladder(raw):
    if raw is None:
        return {}
    _check_keys(raw, _LADDER_KEYS, "ladder")
    out = {}
    if "Y_factor" in raw:
        out["Y_factor"] = _number(raw["Y_factor"], "ladder.Y_factor", lo=0, lo_open=True)
    if "Ny" in raw:
        out["Ny"] = _number(raw["Ny"], "ladder.Ny", lo=4, hi=2048, integer=True)
    if "gamma" in raw:
        out["gamma"] = _number(raw["gamma"], "ladder.gamma", lo=1, hi=8)
    if "first_node_power" in raw:
        out["first_node_power"] = _number(
            raw["first_node_power"], "ladder.first_node_power", lo=0, lo_open=True, hi=1
        )
    return out


def _validate_s(raw, command):
    if "s" not in raw:
        if command in _NEEDS_S:
            _bad("missing key 's'", code="missing_key")
        return None
    s = _number(raw["s"], "s")
    upper_ok = command == "radial" and s == 1.0
    if not (0.0 < s < 1.0 or upper_ok):
        _bad(f"fractional order must lie in (0, 1), got {s}", code="s_out_of_range")
    return s


def _choice(raw, key, options, default):
    v = raw.get(key, default)
    if v not in options:
        _bad(f"{key} must be one of {list(options)}, got {v!r}", code="bad_value")
    return v


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Validated configuration. ``raw`` keeps the original mapping."""

    raw: dict
    command: str
    name: str
    s: object
    domain: object
    seed: int
    hash: str
    options: dict

    @property
    def dim(self):
        if self.domain is None:
            return 1
        return 1 if self.domain["type"] == "interval" else 2


def parse_config(raw, name=None):
    """Validate a configuration mapping; raises InvalidArgumentError with a code."""
    if not isinstance(raw, dict):
        _bad("configuration must be a JSON object")
    command = raw.get("command")
    if command not in COMMANDS:
        _bad(f"command must be one of {list(COMMANDS)}, got {command!r}", code="bad_command")
    _check_keys(raw, _COMMON | _KEYS[command], "configuration")
    cfg_name = raw.get("name", name or command)
    if not isinstance(cfg_name, str) or not cfg_name or "/" in cfg_name:
        _bad(f"invalid scenario name {cfg_name!r}")
    s = _validate_s(raw, command)
    domain = None
    if command in _NEEDS_DOMAIN:
        if "domain" not in raw:
            _bad("missing key 'domain'", code="missing_key")
        domain = _domain(raw["domain"])
    elif "domain" in raw:
        _bad("radial runs take no domain", code="unknown_key")
    dim = 1 if domain is None or domain["type"] == "interval" else 2
    seed = _number(raw.get("seed", 0), "seed", lo=0, integer=True)
    _validate_matrix_spec(raw.get("A"), dim, "A")
    eig = raw.get("eigen", {})
    _check_keys(eig, {"method"}, "eigen")
    opts = {"eigen": _choice(eig, "method", ("lapack", "jacobi"), "lapack")}
    if opts["eigen"] == "jacobi" and domain is not None:
        size = domain["n"] if dim == 1 else domain["n"][0] * domain["n"][1]
        if size > 400:
            _bad("the Jacobi solver is limited to small grids (<= 400 cells)", code="bad_value")

    if command == "spectrum":
        opts["modes_out"] = _number(raw.get("modes_out", 5), "modes_out", lo=1, integer=True)
        opts["export_matrices"] = bool(raw.get("export_matrices", False))
    elif command == "frac":
        _validate_u(raw.get("u"), dim)
        _validate_scalar_spec(raw.get("C"), dim, "C", required=False)
        opts["method"] = _choice(raw, "method", ("spectral", "semigroup", "both"), "both")
        q = raw.get("quadrature") or {}
        _check_keys(q, _QUAD_KEYS, "quadrature")
        opts["quadrature"] = {
            k: _number(v, f"quadrature.{k}", lo=0, lo_open=True,
                       integer=k in ("initial_intervals", "max_levels"))
            for k, v in q.items()
        }
    elif command == "extend":
        _validate_u(raw.get("u"), dim)
        opts["method"] = _choice(raw, "method", ("spectral", "direct", "both"), "both")
        opts["ladder"] = _validate_ladder(raw.get("ladder"))
        opts["trace_nodes"] = _number(raw.get("trace_nodes", 4), "trace_nodes", lo=4, hi=8,
                                      integer=True)
    elif command == "picone":
        if dim != 1:
            _bad("manufactured Picone checks are implemented on intervals", code="bad_value")
        for key in ("U", "v"):
            if key not in raw:
                _bad(f"missing key {key!r}", code="missing_key")
            try:
                parse_expression(raw[key], 2)
            except InvalidArgumentError as exc:
                _bad(f"{key}: {exc}", code="bad_expression")
        opts["Y"] = _number(raw.get("Y", "pi"), "Y", lo=0, lo_open=True)
        lat = raw.get("lattice", [64, 64])
        if not isinstance(lat, list) or len(lat) != 2:
            _bad("lattice must be [nx, ny]")
        opts["lattice"] = tuple(_number(v, "lattice", lo=5, hi=1024, integer=True) for v in lat)
        opts["derivatives"] = _choice(raw, "derivatives", ("fd", "analytic", "both"), "both")
        opts["fd_order"] = _choice(raw, "fd_order", (2, 4), 4)
        opts["scale"] = _choice(raw, "scale", ("sides", "terms"), "sides")
    elif command == "compare":
        mode = _choice(raw, "mode", ("ordering", "variation", "leighton"), "ordering")
        opts["mode"] = mode
        opts["ladder"] = _validate_ladder(raw.get("ladder"))
        opts["gate"] = _number(raw.get("gate", 1e-6), "gate", lo=0, lo_open=True, hi=1e-2)
        opts["zero_tol"] = _number(raw.get("zero_tol", 1e-6), "zero_tol", lo=0, hi=0.5)
        if "random" in raw:
            r = raw["random"]
            _check_keys(r, {"count"}, "random")
            opts["random"] = _number(r.get("count", 20), "random.count", lo=1, hi=200,
                                     integer=True)
            for key in ("A1", "A2", "C1", "C2", "C", "A"):
                if key in raw:
                    _bad(f"randomized runs take no {key!r}", code="unknown_key")
        elif mode == "leighton":
            _validate_scalar_spec(raw.get("C"), dim, "C")
            for key in ("A1", "A2", "C1", "C2"):
                if key in raw:
                    _bad(f"leighton runs take 'A' and 'C', not {key!r}", code="unknown_key")
        else:
            if "A" in raw or "C" in raw:
                _bad("pair runs take A1/C1/A2/C2, not A/C", code="unknown_key")
            _validate_matrix_spec(raw.get("A1"), dim, "A1")
            _validate_matrix_spec(raw.get("A2"), dim, "A2")
            _validate_scalar_spec(raw.get("C1"), dim, "C1")
            _validate_scalar_spec(raw.get("C2"), dim, "C2")
    elif command == "radial":
        if "q" in raw:
            try:
                parse_expression(raw["q"], 1, names=("r",))
            except InvalidArgumentError as exc:
                _bad(f"q: {exc}", code="bad_expression")
            for key in ("n", "c"):
                if key in raw:
                    _bad(f"an explicit potential q excludes {key!r}", code="unknown_key")
        else:
            if s is None:
                _bad("missing key 's'", code="missing_key")
            opts["n"] = _number(raw.get("n", 1), "n", lo=1, hi=1, integer=True)
            opts["c"] = _number(raw.get("c", 4), "c")
        opts["r0"] = _number(raw.get("r0", 1), "r0", lo=0, lo_open=True)
        opts["rmax"] = _number(raw.get("rmax", 256), "rmax", lo=0, lo_open=True, hi=1e4)
        if not opts["rmax"] > opts["r0"]:
            _bad("rmax must exceed r0", code="bad_value")
        w = raw.get("windows")
        opts["windows"] = None if w is None else _number(w, "windows", lo=4, hi=64, integer=True)
        opts["y0"] = _number(raw.get("y0", 0), "y0")
        opts["dy0"] = _number(raw.get("dy0", 1), "dy0")
        if opts["y0"] == 0 and opts["dy0"] == 0:
            _bad("initial data y0 = dy0 = 0 is trivial", code="bad_value")
        if "sturm" in raw:
            st = raw["sturm"]
            _check_keys(st, {"q1", "q2", "interval", "trials"}, "sturm")
            for key in ("q1", "q2"):
                if key not in st:
                    _bad(f"sturm needs {key!r}", code="missing_key")
                try:
                    parse_expression(st[key], 1, names=("r",))
                except InvalidArgumentError as exc:
                    _bad(f"sturm.{key}: {exc}", code="bad_expression")
            iv = st.get("interval")
            if not isinstance(iv, list) or len(iv) != 2:
                _bad("sturm.interval must be [a, b]")
            a, b = (_number(v, "sturm.interval") for v in iv)
            if not b > a:
                _bad("sturm.interval needs b > a", code="bad_value")
            opts["sturm"] = {"q1": st["q1"], "q2": st["q2"], "interval": (a, b),
                             "trials": _number(st.get("trials", 5), "sturm.trials", lo=1,
                                               hi=100, integer=True)}
    return ExperimentConfig(raw, command, cfg_name, s, domain, seed, config_hash(raw), opts)


def load_config(path):
    """Read and validate a JSON configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        _bad(f"cannot read configuration {str(path)!r}: {exc.strerror}", code="io_error")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        _bad(f"malformed JSON in {path.name}: {exc.msg} (line {exc.lineno})",
             code="malformed_config")
    return parse_config(raw, name=path.stem)
