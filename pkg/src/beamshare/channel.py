"""
Block-fading channel realizations between every transmitter and receiver.

Every coefficient is ``sqrt(path_gain(d)) * z`` with ``z`` a unit-variance
circularly symmetric complex Gaussian (Rayleigh fading). Coefficients are
constant within a slot and independent across slots and links. All antennas
of the secondary transmitter sit at one position, so per-antenna fading is
i.i.d. with a common path gain.

Slots are generated in fixed-size blocks. The random stream of a block is
keyed by ``(seed, block index)`` only, which makes a slot's realization a
pure function of ``(seed, geometry, slot index)`` while still letting the
simulator draw thousands of slots per numpy call.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import math

import numpy as np

from .errors import InvalidGeometry, InvalidParameter

BLOCK_SLOTS = 1024
_CHANNEL_STREAM = 0

PRIMARY_TX = "primary_tx"
PRIMARY_RX = "primary_rx"
PRIMARY_NODES = (PRIMARY_TX, PRIMARY_RX)


@dataclass(frozen=True)
class NodePosition:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidGeometry(f"non-finite position ({self.x}, {self.y})")

    def distance(self, other):
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss, ``L(d) = L0 + 10 n log10(d / d0)`` in dB."""
    exponent: float = 3.0
    reference_loss_db: float = 40.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if not self.exponent >= 1:
            raise InvalidParameter(f"path-loss exponent {self.exponent} < 1")
        if not self.reference_distance > 0:
            raise InvalidParameter("reference distance must be positive")


def path_gain(model, d):
    """Linear power gain at distance ``d`` metres.

    Distances below the reference distance are clamped to it.
    """
    if not d > 0:
        raise InvalidGeometry(f"link distance must be positive, got {d}")
    d = max(d, model.reference_distance)
    loss_db = (model.reference_loss_db
               + 10.0 * model.exponent * math.log10(d / model.reference_distance))
    return 10.0 ** (-loss_db / 10.0)


def draw_small_scale(rng, size=None):
    """Unit-variance circularly symmetric complex Gaussian sample(s)."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) * math.sqrt(0.5)


@dataclass(frozen=True)
class ScenarioGeometry:
    """Node layout of one run: a multi-antenna secondary transmitter, its
    single-antenna receivers and one primary (transmitter, receiver) pair."""
    n_antennas: int
    secondary_tx: NodePosition
    secondary_rx: tuple
    primary_tx: NodePosition
    primary_rx: NodePosition

    def __post_init__(self):
        if self.n_antennas < 1:
            raise InvalidGeometry("need at least one transmit antenna")
        if len(self.secondary_rx) < 1:
            raise InvalidGeometry("need at least one secondary receiver")

    @property
    def n_users(self):
        return len(self.secondary_rx)

    def primary_position(self, node):
        return {PRIMARY_TX: self.primary_tx, PRIMARY_RX: self.primary_rx}[node]


@dataclass(frozen=True)
class LinkGains:
    """Large-scale (path) gains of every link in a geometry."""
    h: np.ndarray        # (U,)  secondary tx -> secondary rx s
    g: np.ndarray        # (2,)  secondary tx -> primary node k
    q_cross: np.ndarray  # (U,)  primary tx -> secondary rx s
    q_prim: float        # primary tx -> primary rx

    @classmethod
    def from_geometry(cls, geometry, model):
        tx = geometry.secondary_tx
        h = np.array([path_gain(model, tx.distance(r))
                      for r in geometry.secondary_rx])
        g = np.array([path_gain(model, tx.distance(geometry.primary_position(k)))
                      for k in PRIMARY_NODES])
        qc = np.array([path_gain(model, geometry.primary_tx.distance(r))
                       for r in geometry.secondary_rx])
        qp = path_gain(model, geometry.primary_tx.distance(geometry.primary_rx))
        return cls(h=h, g=g, q_cross=qc, q_prim=qp)


@dataclass(frozen=True)
class ChannelBlock:
    """Channels of ``BLOCK_SLOTS`` consecutive slots, as arrays.

    Shapes: ``h (B, U, N)``, ``g (B, 2, N)`` (rows ordered as
    ``PRIMARY_NODES``), ``q_cross (B, U)``, ``q_prim (B,)``.
    """
    first_slot: int
    h: np.ndarray
    g: np.ndarray
    q_cross: np.ndarray
    q_prim: np.ndarray

    def __len__(self):
        return self.h.shape[0]


@dataclass(frozen=True)
class ChannelRealization:
    """Channels of one slot, keyed by node."""
    slot_index: int
    h: dict = field(default_factory=dict)        # user -> (N,) vector
    g: dict = field(default_factory=dict)        # primary node -> (N,) vector
    q_cross: dict = field(default_factory=dict)  # (primary tx, user) -> scalar
    q_prim: dict = field(default_factory=dict)   # (primary tx, primary rx) -> scalar

    @property
    def n_antennas(self):
        return len(next(iter(self.h.values())))


def realize_block(geometry, model, block_index, seed):
    """Draw the channels of slots ``[block_index * B, (block_index + 1) * B)``."""
    if block_index < 0:
        raise InvalidParameter("negative block index")
    gains = LinkGains.from_geometry(geometry, model)
    rng = np.random.default_rng([int(seed), _CHANNEL_STREAM, int(block_index)])
    B, U, N = BLOCK_SLOTS, geometry.n_users, geometry.n_antennas
    h = draw_small_scale(rng, (B, U, N)) * np.sqrt(gains.h)[None, :, None]
    g = draw_small_scale(rng, (B, 2, N)) * np.sqrt(gains.g)[None, :, None]
    qc = draw_small_scale(rng, (B, U)) * np.sqrt(gains.q_cross)[None, :]
    qp = draw_small_scale(rng, B) * math.sqrt(gains.q_prim)
    return ChannelBlock(block_index * B, h, g, qc, qp)


@lru_cache(maxsize=8)
def _cached_block(geometry, model, block_index, seed):
    return realize_block(geometry, model, block_index, seed)


def realize_slot(geometry, model, slot_index, seed):
    """Channel realization of a single slot.

    The result depends only on the arguments: reading the same slot twice
    returns identical coefficients (block fading).
    """
    if slot_index < 0:
        raise InvalidParameter("negative slot index")
    block = _cached_block(geometry, model, slot_index // BLOCK_SLOTS, seed)
    return block_row(block, slot_index - block.first_slot)


def block_row(block, i):
    """Convert row ``i`` of a ``ChannelBlock`` to a ``ChannelRealization``."""
    U = block.h.shape[1]
    return ChannelRealization(
        slot_index=block.first_slot + i,
        h={s: block.h[i, s].copy() for s in range(U)},
        g={k: block.g[i, j].copy() for j, k in enumerate(PRIMARY_NODES)},
        q_cross={(PRIMARY_TX, s): complex(block.q_cross[i, s]) for s in range(U)},
        q_prim={(PRIMARY_TX, PRIMARY_RX): complex(block.q_prim[i])},
    )
