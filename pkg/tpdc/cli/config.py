"""
Run configuration for tpdc: key schema, presets, key = value files.

Every key is described once in CONFIG_KEYS; the RunConfig dataclass,
the config-file parser and the command-line flags are all generated from
that table.
"""

import dataclasses
import logging
import math
import re
from pathlib import Path

from tpdc.core.basis import BasisSpec, NuclearModel
from tpdc.core.channels import DEFAULT_CHANNELS, get_channel
from tpdc.core.errors import ConfigError, SelectionRuleError
from tpdc.core.specfun import MIN_DIGITS

logger = logging.getLogger(__name__)

BOHR_FM = 52917.721              # Bohr radius in fm
DEFAULT_FIRST_KNOT = 1e-3        # a.u., divided by Z

CONFIG_KEYS = {
    "z": {
        "label": "Nuclear charge(s)",
        "type": "float_list",
        "default": (1.0,),
        "min": 1e-6,
        "help": "Hydrogen-like ion nuclear charge Z; a comma list runs several ions.",
    },
    "basis": {
        "label": "Basis kind",
        "type": "choice",
        "default": "bpoly",
        "choices": ["bpoly", "bspline"],
        "help": "bpoly = B-polynomials of degree count-1 on [0, R]; bspline = B-splines on an exponential knot grid.",
    },
    "order": {
        "label": "B-spline order",
        "type": "int",
        "default": None,
        "min": 2,
        "max": 30,
        "help": "Order k of the B-splines (ignored for bpoly). Empty = preset.",
    },
    "count": {
        "label": "Basis size",
        "type": "int",
        "default": None,
        "min": 3,
        "max": 400,
        "help": "Number of basis functions N (n_BP or n_BS). Empty = preset for Z.",
    },
    "radius": {
        "label": "Cavity radius",
        "type": "float",
        "default": None,
        "min": 1e-6,
        "help": "Cavity radius R in bohr. Empty = preset for Z.",
    },
    "first_knot": {
        "label": "First knot",
        "type": "float",
        "default": None,
        "min": 1e-12,
        "help": "First non-zero B-spline knot in bohr. Empty = 1e-3/Z.",
    },
    "nuclear": {
        "label": "Nuclear model",
        "type": "choice",
        "default": "point",
        "choices": ["point", "uniform"],
        "help": "point = Coulomb potential; uniform = uniformly charged sphere of radius nuclear_radius.",
    },
    "nuclear_radius": {
        "label": "Nuclear radius",
        "type": "float",
        "default": None,
        "min": 1e-12,
        "help": "Uniform-sphere radius r_N in bohr. Empty = estimate from Z.",
    },
    "digits": {
        "label": "Precision",
        "type": "int_list",
        "default": (34,),
        "min": MIN_DIGITS,
        "max": 1000,
        "help": "Working decimal digits. scan accepts a list (e.g. 16,34) for a precision study.",
    },
    "solver": {
        "label": "Eigensolver",
        "type": "choice",
        "default": "auto",
        "choices": ["auto", "mpmath", "lapack"],
        "help": "auto = LAPACK float64 at <= 16 digits, mpmath otherwise.",
    },
    "channels": {
        "label": "Multipole channels",
        "type": "channel_list",
        "default": DEFAULT_CHANNELS,
        "help": "Two-photon channels to evaluate (2E1, E1M2, 2M1, 2E2, 2M2, E2M1).",
    },
    "restriction": {
        "label": "Intermediate states",
        "type": "choice",
        "default": "all",
        "choices": ["all", "pos", "neg"],
        "help": "Intermediate-state restriction printed in table output (csv/json carry all three).",
    },
    "quad_points": {
        "label": "Quadrature points",
        "type": "int",
        "default": 15,
        "min": 1,
        "max": 200,
        "help": "Gauss-Legendre points over the photon energy.",
    },
    "initial": {
        "label": "Initial state",
        "type": "state",
        "default": "2s",
        "help": "Decaying state, e.g. 2s, 2p-, 3d+.",
    },
    "final": {
        "label": "Final state",
        "type": "state",
        "default": "1s",
        "help": "Final state of the decay.",
    },
    "states": {
        "label": "Spectrum states",
        "type": "state_list",
        "default": ("1s", "2s", "3s", "4s"),
        "help": "Bound states reported by the spectrum command.",
    },
    "scan_counts": {
        "label": "Scan basis sizes",
        "type": "int_list",
        "default": (),
        "min": 3,
        "max": 400,
        "help": "Basis sizes swept by the scan command.",
    },
    "scan_radii": {
        "label": "Scan radii",
        "type": "float_list",
        "default": (),
        "min": 1e-6,
        "help": "Cavity radii swept by the scan command.",
    },
    "bond_variant": {
        "label": "Boundary term",
        "type": "choice",
        "default": "johnson",
        "choices": ["johnson", "literal"],
        "help": "Origin boundary term for kappa > 0 (the two agree once P(0) = 0 is built in).",
    },
    "jobs": {
        "label": "Worker threads",
        "type": "int",
        "default": 1,
        "min": 1,
        "max": 64,
        "help": "Thread pool size for independent spectra and channels.",
    },
    "format": {
        "label": "Output format",
        "type": "choice",
        "default": "table",
        "choices": ["table", "csv", "json"],
        "help": "table = human-readable, csv/json = full precision.",
    },
    "out": {
        "label": "Output path",
        "type": "str",
        "default": None,
        "help": "Write the report here instead of stdout.",
    },
    "strict": {
        "label": "Strict",
        "type": "bool",
        "default": False,
        "help": "Treat spurious-state warnings as numerical failures.",
    },
}

# (Z, kind, order, count, radius, note)
PRESETS = [
    (1.0,  "bpoly",   39, 40, 50.0, "hydrogen, optimal B-polynomial set"),
    (40.0, "bpoly",   41, 42, 1.0,  "Zr39+, optimal B-polynomial set"),
    (92.0, "bpoly",   41, 42, 0.25, "U91+, optimal B-polynomial set"),
    (1.0,  "bspline", 9,  60, 60.0, "hydrogen, reference B-spline set (R scaled as 1/Z)"),
]


def preset_for(Z: float, kind: str) -> tuple:
    """Preset row of the nearest tabulated Z for this basis kind."""
    rows = [p for p in PRESETS if p[1] == kind]
    row = min(rows, key=lambda p: (abs(math.log(p[0]) - math.log(Z)), p[0]))
    if kind == "bspline" and Z != row[0]:
        return (Z, kind, row[2], row[3], row[4] * row[0] / Z, row[5])
    return row


# ── States ────────────────────────────────────────────────────────────

_L_LETTERS = "spdfghik"
_STATE_RE = re.compile(r"^(\d+)([spdfghik])([+-]?)$")


def parse_state(label: str) -> tuple:
    """'2s' -> (2, -1), '2p-' -> (2, 1), '2p' or '2p+' -> (2, -2)."""
    m = _STATE_RE.match(label.strip().lower())
    if not m:
        raise ConfigError(f"cannot parse state {label!r}; expected e.g. 1s, 2p-, 3d+")
    n, l, sign = int(m.group(1)), _L_LETTERS.index(m.group(2)), m.group(3)
    if n <= l:
        raise ConfigError(f"state {label!r}: n must exceed l")
    if sign == "-":
        if l == 0:
            raise ConfigError(f"state {label!r}: s states have only j = 1/2")
        return n, l
    return n, -(l + 1)


def state_label(n: int, kappa: int) -> str:
    l = kappa if kappa > 0 else -kappa - 1
    suffix = "" if l == 0 else ("-" if kappa > 0 else "+")
    return f"{n}{_L_LETTERS[l]}{suffix}"


# ── Value parsing / rendering ─────────────────────────────────────────

def _check_range(key: str, value, info: dict):
    lo, hi = info.get("min"), info.get("max")
    if lo is not None and value < lo:
        raise ConfigError(f"{key} = {value} is below the minimum {lo}")
    if hi is not None and value > hi:
        raise ConfigError(f"{key} = {value} is above the maximum {hi}")


def _number(key: str, text: str, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(f"{key}: {text!r} is not a valid {kind.__name__}") from None


def parse_value(key: str, text: str):
    """Parse the textual value of *key* according to its schema entry."""
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown configuration key {key!r}")
    info = CONFIG_KEYS[key]
    kind = info["type"]
    text = text.strip()
    items = [t.strip() for t in text.split(",") if t.strip()]
    if kind in ("int", "float", "str") and text == "":
        return None
    if kind == "int":
        value = _number(key, text, int)
        _check_range(key, value, info)
        return value
    if kind == "float":
        value = _number(key, text, float)
        _check_range(key, value, info)
        return value
    if kind in ("int_list", "float_list"):
        conv = int if kind == "int_list" else float
        values = tuple(_number(key, t, conv) for t in items)
        for v in values:
            _check_range(key, v, info)
        return values
    if kind == "choice":
        if text not in info["choices"]:
            raise ConfigError(f"{key}: {text!r} is not one of {', '.join(info['choices'])}")
        return text
    if kind == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: {text!r} is not a boolean")
    if kind == "channel_list":
        try:
            return tuple(get_channel(t).name for t in items)
        except SelectionRuleError as e:
            raise ConfigError(f"{key}: {e}") from None
    if kind == "state":
        parse_state(text)
        return text.lower()
    if kind == "state_list":
        for t in items:
            parse_state(t)
        return tuple(t.lower() for t in items)
    return text


def render_value(key: str, value) -> str:
    kind = CONFIG_KEYS[key]["type"]
    if value is None:
        return ""
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind.endswith("_list"):
        return ",".join(repr(float(v)) if kind == "float_list" else str(v) for v in value)
    return str(value)


# ── RunConfig ─────────────────────────────────────────────────────────

def _basis_for(self, Z: float, count: int | None = None, radius: float | None = None) -> BasisSpec:
    """Basis for nuclear charge Z: explicit keys win over the preset row."""
    row = preset_for(Z, self.basis)
    count = count or self.count or row[3]
    radius = radius or self.radius or row[4]
    if self.basis == "bpoly":
        return BasisSpec.bpolynomial(count, radius)
    order = self.order or row[2]
    if count < order:
        raise ConfigError(f"B-spline count {count} must be at least the order {order}")
    first_knot = self.first_knot or DEFAULT_FIRST_KNOT / Z
    if first_knot >= radius:
        raise ConfigError(f"first_knot {first_knot} must be smaller than the radius {radius}")
    return BasisSpec.bspline(order, count, radius, first_knot)


def _nucleus_for(self, Z: float) -> NuclearModel:
    if self.nuclear == "point":
        return NuclearModel(Z)
    return NuclearModel(Z, "uniform", self.nuclear_radius or default_nuclear_radius(Z))


RunConfig = dataclasses.make_dataclass(
    "RunConfig",
    [(key, object, dataclasses.field(default=info["default"])) for key, info in CONFIG_KEYS.items()],
    frozen=True,
    namespace={
        "__doc__": "Resolved run settings; one field per CONFIG_KEYS entry.",
        "basis_for": _basis_for,
        "nucleus_for": _nucleus_for,
        "initial_state": property(lambda self: parse_state(self.initial)),
        "final_state": property(lambda self: parse_state(self.final)),
    },
)
RunConfig.__module__ = __name__


def default_nuclear_radius(Z: float) -> float:
    """Uniform-sphere radius in bohr from the rms charge radius estimate, A ~ 2.5 Z."""
    A = 2.5 * Z
    rms_fm = 0.836 * A ** (1 / 3) + 0.570
    return math.sqrt(5 / 3) * rms_fm / BOHR_FM


def apply_overrides(cfg, overrides: dict):
    unknown = set(overrides) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
    return dataclasses.replace(cfg, **overrides)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """key = value lines -> {key: parsed value}; '#' starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lower().replace("-", "_")
        try:
            values[key] = parse_value(key, value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from None
    return values


def load_config(text: str, base=None, source: str = "<config>"):
    """RunConfig from key = value text layered over *base* (default: schema defaults)."""
    return apply_overrides(base if base is not None else RunConfig(), parse_config_text(text, source))


def read_config_file(path, base=None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    logger.debug("loaded config file %s", path)
    return load_config(text, base, str(path))


def emit_config(cfg) -> str:
    """Every key in schema order; load_config(emit_config(cfg)) == cfg."""
    lines = ["# tpdc run configuration"]
    for key, info in CONFIG_KEYS.items():
        lines.append(f"# {info['label']}: {info['help']}")
        lines.append(f"{key} = {render_value(key, getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def validate(cfg):
    """Cross-key checks that single-key parsing cannot see."""
    if not cfg.z:
        raise ConfigError("z: at least one nuclear charge is required")
    if not cfg.digits:
        raise ConfigError("digits: at least one precision is required")
    if not cfg.channels:
        raise ConfigError("channels: at least one channel is required")
    if cfg.basis == "bpoly" and cfg.order is not None and cfg.count is not None and cfg.order != cfg.count - 1:
        raise ConfigError(f"bpoly: order must be count - 1 ({cfg.count - 1}), got {cfg.order}")
    if cfg.nuclear == "uniform":
        for Z in cfg.z:
            r_n = cfg.nuclear_radius or default_nuclear_radius(Z)
            R = cfg.radius or preset_for(Z, cfg.basis)[4]
            if r_n >= R:
                raise ConfigError(f"nuclear radius {r_n} must be smaller than the cavity radius {R}")
    if parse_state(cfg.initial) == parse_state(cfg.final):
        raise ConfigError("initial and final states must differ")
    return cfg
