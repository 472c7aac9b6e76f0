"""
Slot-level medium access: a carrier-sensing primary (slotted CSMA with a
uniform backoff) and the round-robin scheduler of the secondary transmitter.

One primary packet occupies one slot. With a single primary pair there are
no collisions, so the backoff window is never doubled.
"""

from dataclasses import dataclass, replace

from .beamforming import Scheme
from .errors import InvalidParameter

DEFAULT_CW_MIN = 16


@dataclass(frozen=True)
class PrimaryMacState:
    backoff_counter: int
    contention_window: int
    queue: int
    offered_load: float
    cw_min: int = DEFAULT_CW_MIN
    cw_max: int = DEFAULT_CW_MIN

    def __post_init__(self):
        if self.backoff_counter < 0:
            raise InvalidParameter("negative backoff counter")
        if not self.cw_min <= self.contention_window <= self.cw_max:
            raise InvalidParameter(
                f"contention window {self.contention_window} outside "
                f"[{self.cw_min}, {self.cw_max}]")
        if not 0.0 <= self.offered_load <= 1.0:
            raise InvalidParameter(f"offered load {self.offered_load} not in [0, 1]")
        if self.queue < 0:
            raise InvalidParameter("negative queue length")


def initial_mac_state(offered_load, rng, cw_min=DEFAULT_CW_MIN):
    if cw_min < 1:
        raise InvalidParameter("cw_min must be at least 1")
    return PrimaryMacState(backoff_counter=int(rng.integers(0, cw_min)),
                           contention_window=cw_min, queue=0,
                           offered_load=offered_load, cw_min=cw_min,
                           cw_max=cw_min)


def primary_mac_step(state, channel_busy, rng):
    """
    Advance the primary MAC by one slot.

    A packet arrives with probability ``offered_load``. With a non-empty
    queue and an idle channel the node transmits once its backoff counter
    is zero (and redraws it uniformly in ``[0, CW)``), otherwise it counts
    the backoff down. A busy channel freezes the counter.

    Returns
    -------
    (PrimaryMacState, bool)
        New state and whether the node transmitted in this slot.
    """
    queue = state.queue + (1 if rng.random() < state.offered_load else 0)
    if queue == 0 or channel_busy:
        return replace(state, queue=queue), False
    if state.backoff_counter > 0:
        return replace(state, queue=queue,
                       backoff_counter=state.backoff_counter - 1), False
    backoff = int(rng.integers(0, state.contention_window))
    return replace(state, queue=queue - 1, backoff_counter=backoff), True


def sensing_threshold_check(received_secondary_power, threshold):
    """Carrier sense: busy iff the received power reaches ``threshold``."""
    if not threshold > 0:
        raise InvalidParameter("sensing threshold must be positive")
    return received_secondary_power >= threshold


@dataclass(frozen=True)
class SecondarySchedule:
    served_users: tuple = ()

    def __len__(self):
        return len(self.served_users)


def stream_cap(scheme, n_t, k_r, strict_dof=True):
    """Largest number of streams the scheme can serve in one slot."""
    scheme = Scheme(scheme)
    if scheme is Scheme.OMNI:
        return 1
    if scheme is Scheme.MRT:
        return n_t
    return max(0, n_t - k_r - (1 if strict_dof else 0))


def schedule_secondary(queued_users, n_t, k_r, scheme, slot_index=0,
                       strict_dof=True):
    """
    Round-robin selection of the users served in slot ``slot_index``.

    Slot ``v`` serves positions ``v*c, ..., v*c + c - 1`` (mod ``U``) of the
    queue, where ``c`` is the stream cap: ``n_t - k_r - 1`` under ZF (keeps
    ``N_t > S + K``), ``n_t`` under MRT and 1 for the single-antenna
    baseline. Over ``U`` consecutive slots every user is served exactly
    ``c`` times.
    """
    users = list(queued_users)
    if not users:
        return SecondarySchedule(())
    cap = min(stream_cap(scheme, n_t, k_r, strict_dof), len(users))
    if cap == 0:
        return SecondarySchedule(())
    start = slot_index * cap
    return SecondarySchedule(tuple(users[(start + i) % len(users)]
                                   for i in range(cap)))
