"""YAML configuration with explicit units and source locations.

Physical quantities are written as ``"<number> <unit>"`` strings, e.g.
``fsr: 7.90 GHz`` or ``cavity_waist: 50 um``.  Scaling to SI happens once,
in decimal arithmetic, so a value printed back in base units parses to the
same float.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources

import yaml

from .analysis import Preparation, SweepGrid, fsr_window
from .cavity import FUSED_SILICA_INDEX, CavityParams
from .circuit import PAPER_MODES, PAPER_SOURCE_WAIST, CircuitSpec
from .elements import Fidelity
from .errors import ConfigError, PhysicsError
from .modes import Truncation

UNITS = {
    "length": {"m": "1", "cm": "1e-2", "mm": "1e-3", "um": "1e-6", "μm": "1e-6", "nm": "1e-9"},
    "frequency": {"Hz": "1", "kHz": "1e3", "MHz": "1e6", "GHz": "1e9", "THz": "1e12"},
    "angle": {"rad": "1"},
}
BASE_UNIT = {"length": "m", "frequency": "Hz", "angle": "rad"}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([^\s\d].*?)?\s*$")


@dataclass(frozen=True)
class Key:
    kind: str  # length, frequency, angle, number, integer, int_list, choice, pair:<kind>, bool
    default: object = None
    required: bool = False
    choices: tuple = ()
    allow_inf: bool = False


SCHEMA = {
    "cavity": {
        "fsr": Key("frequency", required=True),
        "fwhm": Key("frequency", required=True),
        "curvature_back": Key("length", required=True),
        "curvature_front": Key("length", math.inf, allow_inf=True),
        "refractive_index": Key("number", FUSED_SILICA_INDEX),
        "internal_fwhm": Key("frequency", 0.0),
        "optical_length_offset": Key("length", 0.0),
    },
    "beam": {
        "wavelength": Key("length", required=True),
        "cavity_waist": Key("length", required=True),
        "source_waist": Key("length", PAPER_SOURCE_WAIST),
        "detection_waist": Key("length"),
    },
    "circuit": {
        "input_modes": Key("int_list", list(PAPER_MODES)),
        "target_l": Key("integer"),
        "shift_fidelity": Key("choice", "phase_only", choices=tuple(f.value for f in Fidelity)),
        "detection": Key("choice", "vortex", choices=("vortex", "modal")),
        "arm_phase": Key("angle", 0.0),
        "mirror_flips_right_arm": Key("integer", 3),
        "extra_flips_left_arm": Key("integer", 1),
        "fp2_frequency_offset": Key("frequency", 0.0),
        "p_max": Key("integer", 10),
        "l_max": Key("integer", 6),
        "loss_threshold": Key("number", 0.01),
        "truncation_policy": Key("choice", "warn", choices=("warn", "fail")),
    },
    "sweep": {
        "l_values": Key("int_list", [-3, -2, -1, 0, 1, 2, 3]),
        "center_wavelength": Key("length"),
        "span_fsr": Key("number", 1.2),
        "steps": Key("integer", 4000),
        "waist_start": Key("length", 10e-6),
        "waist_stop": Key("length", 100e-6),
        "waist_steps": Key("integer", 91),
    },
    "optimize": {
        "objective": Key(
            "choice",
            "max_avg_efficiency",
            choices=("max_avg_efficiency", "max_min_mode_separation", "max_target_coupling"),
        ),
        "source_waist_bounds": Key("pair:length"),
        "optical_length_offset_bounds": Key("pair:length"),
        "grid_points": Key("integer", 11),
        "sweeps": Key("integer", 2),
        "golden_iterations": Key("integer", 40),
    },
    "output": {
        "manifest": Key("bool", True),
    },
}

REQUIRED = tuple(f"{s}.{k}" for s, keys in SCHEMA.items() for k, spec in keys.items() if spec.required)


@dataclass(frozen=True)
class Location:
    line: int
    column: int


@dataclass
class ConfigDocument:
    """Parsed configuration: ``values[section][key]`` in SI units.

    Only keys present in the source are stored; defaults are applied by the
    accessors.  Equality ignores locations.
    """

    values: dict
    locations: dict = field(default_factory=dict, compare=False)
    source: str = field(default="<config>", compare=False)
    ignored: tuple = field(default=(), compare=False)

    def get(self, section: str, key: str):
        if key in self.values.get(section, {}):
            return self.values[section][key]
        return SCHEMA[section][key].default

    def where(self, section: str, key: str | None = None) -> Location | None:
        return self.locations.get(f"{section}.{key}" if key else section)


def _err(msg, key, node, source):
    if node is None:
        return ConfigError(msg, key=key, line=1, column=1, source=source)
    return ConfigError(msg, key=key, line=node.start_mark.line + 1, column=node.start_mark.column + 1, source=source)


def _scalar(node, key, source) -> str:
    if not isinstance(node, yaml.ScalarNode):
        raise _err("expected a single value", key, node, source)
    return node.value


def _quantity(text: str, kind: str, key: str, node, source, allow_inf=False) -> float:
    m = _QUANTITY.match(text)
    if not m:
        raise _err(f"cannot read {text!r} as a {kind}", key, node, source)
    number, unit = m.group(1), m.group(2)
    if unit is None:
        raise _err(f"{text!r} has no unit; a {kind} needs one of {sorted(UNITS[kind])}", key, node, source)
    if unit not in UNITS[kind]:
        other = [k for k, table in UNITS.items() if unit in table]
        got = f"a {other[0]} unit" if other else "an unknown unit"
        raise _err(f"unit mismatch: {unit!r} is {got}, expected a {kind} in {sorted(UNITS[kind])}", key, node, source)
    try:
        value = float(Decimal(number) * Decimal(UNITS[kind][unit]))
    except InvalidOperation:
        raise _err(f"cannot read {text!r} as a {kind}", key, node, source) from None
    if math.isinf(value) and not allow_inf:
        raise _err("value must be finite", key, node, source)
    return value


def _number(text, key, node, source, integer=False):
    try:
        if integer:
            if not re.fullmatch(r"[-+]?\d+", text.strip()):
                raise ValueError
            return int(text)
        value = float(text)
    except ValueError:
        raise _err(f"expected a plain {'integer' if integer else 'number'} without units, got {text!r}", key, node, source) from None
    if not math.isfinite(value):
        raise _err("value must be finite", key, node, source)
    return value


def _convert(spec: Key, node, key: str, source):
    kind = spec.kind
    if kind in UNITS:
        return _quantity(_scalar(node, key, source), kind, key, node, source, spec.allow_inf)
    if kind == "number":
        return _number(_scalar(node, key, source), key, node, source)
    if kind == "integer":
        return _number(_scalar(node, key, source), key, node, source, integer=True)
    if kind == "bool":
        text = _scalar(node, key, source).strip().lower()
        if text not in ("true", "false"):
            raise _err(f"expected true or false, got {text!r}", key, node, source)
        return text == "true"
    if kind == "choice":
        text = _scalar(node, key, source).strip()
        if text not in spec.choices:
            raise _err(f"expected one of {list(spec.choices)}, got {text!r}", key, node, source)
        return text
    if kind == "int_list":
        if not isinstance(node, yaml.SequenceNode):
            raise _err("expected a list of integers", key, node, source)
        return [_number(_scalar(n, key, source), key, n, source, integer=True) for n in node.value]
    if kind.startswith("pair:"):
        inner = kind.split(":", 1)[1]
        if not isinstance(node, yaml.SequenceNode) or len(node.value) != 2:
            raise _err("expected a [low, high] pair", key, node, source)
        lo, hi = (_quantity(_scalar(n, key, source), inner, key, n, source) for n in node.value)
        if not lo < hi:
            raise _err("bounds need low < high", key, node, source)
        return [lo, hi]
    raise AssertionError(kind)


def parse_config(text: str, source: str = "<config>", strict: bool = True) -> ConfigDocument:
    """Parse and unit-convert a configuration document.

    In strict mode unknown sections and keys are errors; otherwise they are
    collected in ``ignored``.  Every error carries line, column and key.
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None) or getattr(exc, "context_mark", None)
        problem = getattr(exc, "problem", None) or str(exc)
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise ConfigError(f"syntax error: {problem}", line=line, column=col, source=source) from None
    if root is None:
        raise ConfigError(f"empty document; required keys: {', '.join(REQUIRED)}", line=1, column=1, source=source)
    if not isinstance(root, yaml.MappingNode):
        raise _err("top level must be a mapping of sections", None, root, source)

    values, locations, ignored = {}, {}, []
    for knode, vnode in root.value:
        section = knode.value
        if section not in SCHEMA:
            if strict:
                raise _err(f"unknown section; expected one of {list(SCHEMA)}", section, knode, source)
            ignored.append(section)
            continue
        if section in values:
            raise _err("section given twice", section, knode, source)
        locations[section] = Location(knode.start_mark.line + 1, knode.start_mark.column + 1)
        values[section] = {}
        if isinstance(vnode, yaml.ScalarNode) and vnode.value == "":
            continue
        if not isinstance(vnode, yaml.MappingNode):
            raise _err("section must be a mapping", section, vnode, source)
        for k, v in vnode.value:
            name = f"{section}.{k.value}"
            if k.value not in SCHEMA[section]:
                if strict:
                    raise _err(f"unknown key; {section} accepts {sorted(SCHEMA[section])}", name, k, source)
                ignored.append(name)
                continue
            if k.value in values[section]:
                raise _err("key given twice", name, k, source)
            values[section][k.value] = _convert(SCHEMA[section][k.value], v, name, source)
            locations[name] = Location(k.start_mark.line + 1, k.start_mark.column + 1)

    missing = [r for r in REQUIRED if r.split(".")[1] not in values.get(r.split(".")[0], {})]
    if missing:
        first = missing[0].split(".")[0]
        loc = locations.get(first)
        raise ConfigError(
            f"missing required key(s): {', '.join(missing)}",
            key=missing[0],
            line=loc.line if loc else 1,
            column=loc.column if loc else 1,
            source=source,
        )
    return ConfigDocument(values, locations, source, tuple(ignored))


def _emit(kind: str, value) -> str:
    if kind in BASE_UNIT:
        return f'"{value!r} {BASE_UNIT[kind]}"'
    if kind.startswith("pair:"):
        inner = kind.split(":", 1)[1]
        return "[" + ", ".join(_emit(inner, v) for v in value) + "]"
    if kind == "int_list":
        return "[" + ", ".join(str(v) for v in value) + "]"
    if kind == "bool":
        return "true" if value else "false"
    if kind == "choice":
        return f'"{value}"'
    return repr(value)


def serialize(doc: ConfigDocument) -> str:
    """YAML text in SI base units that parses back to an equal document."""
    lines = []
    for section, keys in SCHEMA.items():
        if section not in doc.values:
            continue
        lines.append(f"{section}:" if doc.values[section] else f"{section}: {{}}")
        for key, spec in keys.items():
            if key in doc.values[section]:
                lines.append(f"  {key}: {_emit(spec.kind, doc.values[section][key])}")
    return "\n".join(lines) + "\n"


def default_config_text() -> str:
    return resources.files("oamcirc").joinpath("data/paper.yaml").read_text(encoding="utf-8")


def load_config(path: str | None, strict: bool = True) -> ConfigDocument:
    """Read a config file; ``None`` loads the packaged six-mode setup."""
    if path is None:
        return parse_config(default_config_text(), "paper.yaml", strict)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path), strict)


# --------------------------------------------------------------------------
# building simulation objects


def _located(doc: ConfigDocument, section: str, exc: Exception, key: str | None = None) -> ConfigError:
    loc = doc.where(section, key) or doc.where(section)
    return ConfigError(
        str(exc),
        key=f"{section}.{key}" if key else section,
        line=loc.line if loc else None,
        column=loc.column if loc else None,
        source=doc.source,
    )


def build_cavity(doc: ConfigDocument) -> CavityParams:
    g = lambda k: doc.get("cavity", k)  # noqa: E731
    try:
        cav = CavityParams.from_spectrum(
            g("fsr"), g("fwhm"), g("curvature_back"), g("curvature_front"), g("refractive_index"), g("internal_fwhm")
        )
        if g("optical_length_offset"):
            cav = cav.with_optical_length(cav.optical_length + g("optical_length_offset"))
        return cav
    except PhysicsError:
        raise
    except ValueError as exc:
        raise _located(doc, "cavity", exc) from None


def build_spec(doc: ConfigDocument) -> CircuitSpec:
    """CircuitSpec from a parsed document, errors tagged with the circuit section."""
    cavity = build_cavity(doc)
    c = lambda k: doc.get("circuit", k)  # noqa: E731
    b = lambda k: doc.get("beam", k)  # noqa: E731
    try:
        truncation = Truncation(c("p_max"), c("l_max"), c("loss_threshold"), c("truncation_policy"))
        return CircuitSpec(
            cavity=cavity,
            input_modes=tuple(c("input_modes")),
            target_l=c("target_l"),
            wavelength=b("wavelength"),
            source_waist=b("source_waist"),
            cavity_waist=b("cavity_waist"),
            detection_waist=b("detection_waist"),
            shift_fidelity=Fidelity(c("shift_fidelity")),
            detection=c("detection"),
            arm_phase=c("arm_phase"),
            mirror_flips_right_arm=c("mirror_flips_right_arm"),
            extra_flips_left_arm=c("extra_flips_left_arm"),
            fp2_frequency_offset=2.0 * math.pi * c("fp2_frequency_offset"),
            truncation=truncation,
        )
    except ValueError as exc:
        raise _located(doc, "circuit", exc) from None


def build_preparation(doc: ConfigDocument, spec: CircuitSpec) -> Preparation:
    return Preparation(spec.source_waist, spec.cavity_waist, spec.shift_fidelity, spec.truncation)


def build_sweep(doc: ConfigDocument, spec: CircuitSpec) -> SweepGrid:
    s = lambda k: doc.get("sweep", k)  # noqa: E731
    center = s("center_wavelength") or spec.wavelength
    try:
        return fsr_window(spec.cavity, center, s("span_fsr"), s("steps"))
    except ValueError as exc:
        raise _located(doc, "sweep", exc) from None


def build_waist_grid(doc: ConfigDocument) -> SweepGrid:
    s = lambda k: doc.get("sweep", k)  # noqa: E731
    try:
        return SweepGrid("source_waist", s("waist_start"), s("waist_stop"), s("waist_steps"))
    except ValueError as exc:
        raise _located(doc, "sweep", exc) from None


def build_bounds(doc: ConfigDocument) -> dict:
    bounds = {}
    for name in ("source_waist", "optical_length_offset"):
        b = doc.get("optimize", f"{name}_bounds")
        if b is not None:
            bounds[name] = tuple(b)
    return bounds
