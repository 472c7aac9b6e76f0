"""
Scenario configuration: YAML schema, validation, presets and round-trip.

All powers are linear milliwatts; distances are metres. A file may name a
``preset`` whose geometry is used for every geometry key the file leaves
out. Unknown keys are rejected with the dotted path of the offending field.
"""

from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
import copy
import math
from pathlib import Path

import yaml

from .channel import NodePosition, PathLossModel, ScenarioGeometry
from .errors import ConfigError

SCHEMA_VERSION = 1
SCHEME_CHOICES = ("auto", "omni", "mrt", "zf2", "zf4")
NULLING_NODES = ("primary_rx", "primary_tx")
GRID_PITCH = 2.0


@dataclass
class GeometryConfig:
    n_antennas: int = 4
    secondary_tx: list = field(default_factory=lambda: [0.0, 3.0])
    secondary_rx: list = field(default_factory=lambda: [[2.0, 2.0]])
    primary_tx: list = field(default_factory=lambda: [6.0, 0.0])
    primary_rx: list = field(default_factory=lambda: [6.0, 6.0])


@dataclass
class PathLossConfig:
    exponent: float = 3.0
    reference_loss_db: float = 40.0
    reference_distance: float = 1.0


@dataclass
class RadioConfig:
    secondary_power: float = 1.0
    primary_power: float = 1.0
    secondary_noise_power: float = 1e-9
    primary_noise_power: float = 1e-9
    path_loss: PathLossConfig = field(default_factory=PathLossConfig)


@dataclass
class SensingConfig:
    alpha: float = 0.05
    kpi_threshold: float = 0.5
    pilot_count: int = 16
    pilot_power: float = 1.0
    # per-entry CSI error variance relative to the link path gain; when set
    # it replaces the LS pilot model
    relative_csi_error: float | None = None


@dataclass
class MacConfig:
    offered_load: float = 1.0
    cw_min: int = 16
    sensing_threshold: float = 10 ** (-62 / 10)
    sinr_threshold_db: float = 5.0


@dataclass
class RunConfig:
    slots: int = 60000
    slot_duration: float = 1e-3
    seeds: list = field(default_factory=lambda: [1])
    scheme: str = "auto"
    # [start, end) windows in seconds during which the secondary transmits;
    # null means always on
    secondary_active: list | None = None
    throughput_mode: str = "packets"
    nulling_order: list = field(default_factory=lambda: list(NULLING_NODES))


@dataclass
class ScenarioConfig:
    schema_version: int = SCHEMA_VERSION
    preset: str | None = None
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    sensing: SensingConfig = field(default_factory=SensingConfig)
    mac: MacConfig = field(default_factory=MacConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def scenario_geometry(self):
        g = self.geometry
        return ScenarioGeometry(
            n_antennas=g.n_antennas,
            secondary_tx=NodePosition(*g.secondary_tx),
            secondary_rx=tuple(NodePosition(*p) for p in g.secondary_rx),
            primary_tx=NodePosition(*g.primary_tx),
            primary_rx=NodePosition(*g.primary_rx))

    def path_loss_model(self):
        return PathLossModel(**asdict(self.radio.path_loss))


# -- presets ----------------------------------------------------------------

def grid_position(sdr):
    """Coordinates of testbed node ``sdr`` (1..16) on the 4x4 grid.

    Nodes are numbered column by column, so SDRs 1-4 form the left column.
    """
    if not 1 <= sdr <= 16:
        raise ConfigError("sdr", f"grid node {sdr} outside 1..16")
    col, row = divmod(sdr - 1, 4)
    return [col * GRID_PITCH, row * GRID_PITCH]


def _array_centre(sdrs):
    pts = [grid_position(s) for s in sdrs]
    return [sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)]


_TX_SDRS = (1, 2, 3, 4)

# (primary tx SDR, primary rx SDR, default secondary rx SDR)
_PRESET_NODES = {
    "scenario1": (13, 16, 6),
    "scenario2": (11, 7, 5),
    "scenario3": (10, 8, 5),
}


def preset_geometry(name):
    """Geometry of a named preset as a ``GeometryConfig``."""
    try:
        ap, sta, rx = _PRESET_NODES[name]
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from "
                          f"{sorted(_PRESET_NODES)}") from None
    return GeometryConfig(n_antennas=4,
                          secondary_tx=_array_centre(_TX_SDRS),
                          secondary_rx=[grid_position(rx)],
                          primary_tx=grid_position(ap),
                          primary_rx=grid_position(sta))


def receiver_locations(name):
    """Every grid node of a preset not taken by the transmitter array or the
    primary pair; these are the candidate secondary receiver positions."""
    ap, sta, _ = _PRESET_NODES.get(name, (None, None, None))
    if ap is None:
        raise ConfigError("preset", f"unknown preset {name!r}")
    taken = set(_TX_SDRS) | {ap, sta}
    return [grid_position(s) for s in range(1, 17) if s not in taken]


PRESETS = tuple(_PRESET_NODES)


# -- parsing ----------------------------------------------------------------

def _build(cls, data, path):
    """Instantiate dataclass ``cls`` from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        where = f"{path}.{unknown[0]}" if path else unknown[0]
        raise ConfigError(where, "unknown key")
    kwargs = {}
    defaults = cls()
    for name, f in known.items():
        key = f"{path}.{name}" if path else name
        if name not in data:
            continue
        default = getattr(defaults, name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), data[name], key)
        else:
            kwargs[name] = copy.deepcopy(data[name])
    return cls(**kwargs)


def _number(value, path, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and not value > 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(path, f"must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _point(value, path):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(path, f"expected [x, y], got {value!r}")
    return [_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]")]


def validate(cfg):
    """Check every invariant and normalize numeric types in place."""
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError("schema_version",
                          f"unsupported version {cfg.schema_version!r}")
    g = cfg.geometry
    g.n_antennas = _number(g.n_antennas, "geometry.n_antennas", integer=True)
    if g.n_antennas not in (1, 2, 4):
        raise ConfigError("geometry.n_antennas", "must be 1, 2 or 4")
    g.secondary_tx = _point(g.secondary_tx, "geometry.secondary_tx")
    g.primary_tx = _point(g.primary_tx, "geometry.primary_tx")
    g.primary_rx = _point(g.primary_rx, "geometry.primary_rx")
    if not isinstance(g.secondary_rx, list) or not g.secondary_rx:
        raise ConfigError("geometry.secondary_rx", "need a non-empty list of [x, y]")
    g.secondary_rx = [_point(p, f"geometry.secondary_rx[{i}]")
                      for i, p in enumerate(g.secondary_rx)]

    r = cfg.radio
    for name in ("secondary_power", "primary_power",
                 "secondary_noise_power", "primary_noise_power"):
        setattr(r, name, _number(getattr(r, name), f"radio.{name}", positive=True))
    pl = r.path_loss
    pl.exponent = _number(pl.exponent, "radio.path_loss.exponent")
    if pl.exponent < 1:
        raise ConfigError("radio.path_loss.exponent", "must be >= 1")
    pl.reference_loss_db = _number(pl.reference_loss_db,
                                   "radio.path_loss.reference_loss_db")
    pl.reference_distance = _number(pl.reference_distance,
                                    "radio.path_loss.reference_distance",
                                    positive=True)

    s = cfg.sensing
    s.alpha = _number(s.alpha, "sensing.alpha", positive=True)
    if s.alpha > 1:
        raise ConfigError("sensing.alpha", "must be in (0, 1]")
    s.kpi_threshold = _number(s.kpi_threshold, "sensing.kpi_threshold", nonneg=True)
    if s.kpi_threshold > 1:
        raise ConfigError("sensing.kpi_threshold", "must be in [0, 1]")
    s.pilot_count = _number(s.pilot_count, "sensing.pilot_count",
                            positive=True, integer=True)
    s.pilot_power = _number(s.pilot_power, "sensing.pilot_power", positive=True)
    if s.relative_csi_error is not None:
        s.relative_csi_error = _number(s.relative_csi_error,
                                       "sensing.relative_csi_error", nonneg=True)

    m = cfg.mac
    m.offered_load = _number(m.offered_load, "mac.offered_load", nonneg=True)
    if m.offered_load > 1:
        raise ConfigError("mac.offered_load", "must be in [0, 1]")
    m.cw_min = _number(m.cw_min, "mac.cw_min", positive=True, integer=True)
    m.sensing_threshold = _number(m.sensing_threshold, "mac.sensing_threshold",
                                  positive=True)
    m.sinr_threshold_db = _number(m.sinr_threshold_db, "mac.sinr_threshold_db")

    u = cfg.run
    u.slots = _number(u.slots, "run.slots", nonneg=True, integer=True)
    u.slot_duration = _number(u.slot_duration, "run.slot_duration", positive=True)
    if not isinstance(u.seeds, list) or not u.seeds:
        raise ConfigError("run.seeds", "need a non-empty list of integer seeds")
    u.seeds = [_number(x, f"run.seeds[{i}]", nonneg=True, integer=True)
               for i, x in enumerate(u.seeds)]
    if u.scheme not in SCHEME_CHOICES:
        raise ConfigError("run.scheme", f"must be one of {SCHEME_CHOICES}")
    need = {"zf2": 2, "zf4": 4, "auto": 4}.get(u.scheme, 1)
    if g.n_antennas < need:
        raise ConfigError("run.scheme",
                          f"scheme {u.scheme!r} needs {need} antennas, "
                          f"geometry has {g.n_antennas}")
    if u.secondary_active is not None:
        if not isinstance(u.secondary_active, list):
            raise ConfigError("run.secondary_active", "expected a list of [start, end]")
        windows = []
        for i, w in enumerate(u.secondary_active):
            a, b = _point(w, f"run.secondary_active[{i}]")
            if a < 0 or b < a:
                raise ConfigError(f"run.secondary_active[{i}]",
                                  "need 0 <= start <= end")
            windows.append([a, b])
        u.secondary_active = windows
    if u.throughput_mode not in ("packets", "shannon"):
        raise ConfigError("run.throughput_mode", "must be 'packets' or 'shannon'")
    if (not isinstance(u.nulling_order, list)
            or sorted(u.nulling_order) != sorted(NULLING_NODES)):
        raise ConfigError("run.nulling_order",
                          f"must be a permutation of {list(NULLING_NODES)}")
    if cfg.preset is not None and cfg.preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {cfg.preset!r}")
    return cfg


def config_from_dict(data):
    """Build and validate a ``ScenarioConfig`` from parsed YAML."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("", "config root must be a mapping")
    data = copy.deepcopy(data)
    preset = data.get("preset")
    if preset is not None:
        if not isinstance(preset, str):
            raise ConfigError("preset", "must be a string")
        base = asdict(preset_geometry(preset))
        user_geom = data.get("geometry") or {}
        if not isinstance(user_geom, dict):
            raise ConfigError("geometry", "expected a mapping")
        base.update(user_geom)
        data["geometry"] = base
    cfg = _build(ScenarioConfig, data, "")
    return validate(cfg)


def parse_config(path):
    """Read, default and validate a YAML scenario file."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError("", f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{p}: invalid YAML: {exc}") from None
    return config_from_dict(data)


def config_to_dict(cfg):
    return asdict(cfg)


def dump_config(cfg):
    """Serialize a config to YAML; ``parse(dump(cfg)) == cfg``."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


def set_path(cfg, dotted, value):
    """Return a copy of ``cfg`` with the dotted key replaced and revalidated."""
    data = config_to_dict(cfg)
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        if not isinstance(node, dict) or part not in node:
            raise ConfigError(dotted, "unknown parameter path")
        node = node[part]
    if not isinstance(node, dict) or parts[-1] not in node:
        raise ConfigError(dotted, "unknown parameter path")
    node[parts[-1]] = value
    return config_from_dict(data)


def with_overrides(cfg, **run_fields):
    """Copy of ``cfg`` with fields of the ``run`` section replaced."""
    out = copy.deepcopy(cfg)
    out.run = replace(out.run, **run_fields)
    return validate(out)
