"""Declarative flow scenarios: text format, validation, registries.

A scenario file is a flat list of ``key: value`` lines (``#`` starts a
comment; blank lines ignored).  Keys and closed-form names are chosen
from fixed registries rather than parsed expressions, so identical
files produce identical runs byte for byte.

Common keys
-----------
kind          one of: umbilical, tau-heat, twisted, prescribed-F, ftau,
              reeb, pde-reference
grid          number of spatial nodes (circle kinds) or intervals (reeb)
dt            time step
T             time horizon
scheme        implicit-euler (default) or crank-nicolson
length        circle circumference (default 2*pi)
save-every    snapshot cadence in steps (0 = automatic)

Closed-form fields (init / target) are selected by name with parameters
``*-amplitude``, ``*-frequency``, ``*-offset``:

    zero | constant | cos | sin | square-wave | gaussian-bump
    | exact-quasilinear

Kind-specific keys are documented in the README grammar table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .parabolic import exact_quasilinear_solution

__all__ = ["FlowScenario", "ScenarioParseError", "parse_scenario", "load_scenario",
           "build_field", "FIELD_FORMS", "KINDS"]

KINDS = (
    "umbilical",
    "tau-heat",
    "twisted",
    "prescribed-F",
    "ftau",
    "reeb",
    "pde-reference",
)

FIELD_FORMS = (
    "zero",
    "constant",
    "cos",
    "sin",
    "square-wave",
    "gaussian-bump",
    "exact-quasilinear",
)

_COMMON_KEYS = {"kind", "grid", "dt", "T", "scheme", "length", "save-every",
                "check-tolerance"}
_FIELD_KEYS = ("", "-amplitude", "-frequency", "-offset", "-width")

_KIND_KEYS = {
    "umbilical": {"init", "psi", "psi-slope"},
    "tau-heat": {"init"},
    "twisted": {"base-grid", "fiber-grid", "n", "profile", "fiber-length"},
    "prescribed-F": {"init", "target", "n"},
    "ftau": {"init", "f", "n", "spectrum"},
    "reeb": {"method"},
    "pde-reference": {"problem", "init"},
}


class ScenarioParseError(Exception):
    """Raised on malformed scenario text (not a semantic violation)."""


def allowed_keys(kind: str) -> set[str]:
    """All keys a scenario of this kind may carry."""
    if kind not in KINDS:
        raise ValidationError(f"unknown kind {kind!r}; choose from {KINDS}")
    keys = set(_COMMON_KEYS)
    for base in _KIND_KEYS[kind]:
        for suffix in _FIELD_KEYS:
            keys.add(base + suffix)
    return keys


@dataclass
class FlowScenario:
    """A parsed, validated scenario ready to run."""

    kind: str
    grid: int
    dt: float
    T: float
    scheme: str = "implicit-euler"
    length: float = 2.0 * math.pi
    save_every: int = 0
    check_tolerance: float | None = None
    extra: dict = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.extra.get(key, default)


def _parse_lines(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ScenarioParseError(f"line {lineno}: expected 'key: value'")
        key, value = line.split(":", 1)
        key, value = key.strip(), value.strip()
        if not key or not value:
            raise ScenarioParseError(f"line {lineno}: empty key or value")
        if key in out:
            raise ScenarioParseError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _as_float(entries: dict, key: str, default=None) -> float:
    if key not in entries:
        if default is None:
            raise ValidationError(f"missing required key {key!r}")
        return default
    try:
        return float(entries[key])
    except ValueError as exc:
        raise ScenarioParseError(f"key {key!r}: not a number: {entries[key]!r}") from exc


def _as_int(entries: dict, key: str, default=None) -> int:
    val = _as_float(entries, key, default)
    if val != int(val):
        raise ValidationError(f"key {key!r} must be an integer")
    return int(val)


def parse_scenario(text: str) -> FlowScenario:
    """Parse and validate scenario text.

    Raises :class:`ScenarioParseError` for malformed text and
    :class:`ValidationError` for semantic violations (unknown kind or
    key, missing requirement, non-positive parameter).
    """
    entries = _parse_lines(text)
    if "kind" not in entries:
        raise ValidationError("missing required key 'kind'")
    kind = entries["kind"]
    allowed = allowed_keys(kind) | {"kind"}
    unknown = set(entries) - allowed
    if unknown:
        raise ValidationError(f"unknown keys for kind {kind!r}: {sorted(unknown)}")

    scn = FlowScenario(
        kind=kind,
        grid=_as_int(entries, "grid", 256),
        dt=_as_float(entries, "dt"),
        T=_as_float(entries, "T"),
        scheme=entries.get("scheme", "implicit-euler"),
        length=_as_float(entries, "length", 2.0 * math.pi),
        save_every=_as_int(entries, "save-every", 0),
        check_tolerance=(
            _as_float(entries, "check-tolerance") if "check-tolerance" in entries else None
        ),
        extra={k: v for k, v in entries.items() if k not in _COMMON_KEYS},
    )
    if scn.grid < 8:
        raise ValidationError("grid must be at least 8")
    if scn.dt <= 0 or scn.T < 0 or scn.length <= 0:
        raise ValidationError("dt, T and length must be positive")
    if scn.scheme not in ("implicit-euler", "crank-nicolson"):
        raise ValidationError(f"unknown scheme {entries.get('scheme')!r}")
    _validate_kind(scn)
    return scn


def load_scenario(path) -> FlowScenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def _validate_kind(scn: FlowScenario) -> None:
    g = scn.get
    if scn.kind in ("umbilical", "tau-heat", "prescribed-F", "ftau", "pde-reference"):
        form = g("init", "cos" if scn.kind != "prescribed-F" else "zero")
        if form not in FIELD_FORMS:
            raise ValidationError(f"unknown init form {form!r}")
    if scn.kind == "umbilical":
        if g("psi", "linear") != "linear":
            raise ValidationError("only the linear psi form is registered")
    if scn.kind == "twisted":
        if g("profile", "one-plus-x-squared") not in ("one-plus-x-squared", "constant"):
            raise ValidationError("unknown twisted profile")
        if int(float(g("n", "1"))) < 1:
            raise ValidationError("n must be >= 1")
    if scn.kind == "prescribed-F":
        if g("target", "cos") not in FIELD_FORMS:
            raise ValidationError("unknown target form")
    if scn.kind == "ftau":
        if g("f", "scaled-tau1") not in ("scaled-tau1", "scaled-tau2"):
            raise ValidationError("unknown coefficient function for ftau")
        if "spectrum" not in scn.extra:
            raise ValidationError("ftau needs a 'spectrum' (comma-separated reals)")
        try:
            vals = [float(v) for v in scn.extra["spectrum"].split(",")]
        except ValueError as exc:
            raise ScenarioParseError("spectrum: expected comma-separated reals") from exc
        if len(vals) != _as_int(scn.extra, "n", len(vals)):
            raise ValidationError("spectrum length must equal n")
    if scn.kind == "reeb":
        if g("method", "x-space") not in ("x-space", "arclength-kernel"):
            raise ValidationError("reeb method must be x-space or arclength-kernel")
    if scn.kind == "pde-reference":
        if g("problem", "exact-quasilinear") not in (
            "exact-quasilinear",
            "circle-heat-decay",
        ):
            raise ValidationError("unknown pde-reference problem")


def build_field(scn: FlowScenario, base: str, x: np.ndarray) -> np.ndarray:
    """Evaluate the named closed form ``base`` of the scenario on nodes x."""
    form = scn.get(base, "cos" if base == "init" else "zero")
    amp = float(scn.get(base + "-amplitude", 1.0))
    freq = float(scn.get(base + "-frequency", 1.0))
    offset = float(scn.get(base + "-offset", 0.0))
    width = float(scn.get(base + "-width", 0.1))
    L = scn.length
    if form == "zero":
        return np.zeros_like(x)
    if form == "constant":
        return np.full_like(x, offset if offset != 0.0 else amp)
    if form == "cos":
        return offset + amp * np.cos(2 * math.pi * freq * x / L)
    if form == "sin":
        return offset + amp * np.sin(2 * math.pi * freq * x / L)
    if form == "square-wave":
        return offset + amp * np.where(x < 0.5 * L, 1.0, -1.0)
    if form == "gaussian-bump":
        mid = 0.5 * L
        return offset + amp * np.exp(-((x - mid) ** 2) / (2 * width**2))
    if form == "exact-quasilinear":
        return exact_quasilinear_solution(0.0, x)
    raise ValidationError(f"unknown field form {form!r}")
