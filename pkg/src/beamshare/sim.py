"""
Slot-loop engine.

Each slot runs: channel realization -> sensing (KPI, CSI) -> scheme
selection -> scheduling -> precoding -> primary MAC step -> SINRs ->
packet success -> accumulation.

Everything that does not depend on the sequential MAC/KPI state (channels,
CSI estimates, and the precoders and their SINR terms for every candidate
scheme) is computed a block of slots at a time with batched numpy. The
per-slot loop then only picks the candidate selected by the KPI, steps the
MAC and combines scalar terms. SINRs are always evaluated on the true
channels; estimated channels are used only to build precoders.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from . import beamforming as bf
from .beamforming import Scheme, select_scheme
from .channel import (BLOCK_SLOTS, LinkGains, PRIMARY_NODES, PRIMARY_RX,
                      PRIMARY_TX, block_row, draw_small_scale,
                      realize_block)
from .errors import (BeamshareError, Inconsistent, InvalidParameter,
                     NotTransmitting, SimulationError, Undefined)
from .mac import (initial_mac_state, primary_mac_step, schedule_secondary,
                  sensing_threshold_check, stream_cap)
from .sensing import PilotModel, TrafficKpi, update_traffic_kpi

_CSI_STREAM = 1
_MAC_STREAM = 2

SLOT_CSV_COLUMNS = ("slot", "scheme", "primary_tx", "sinr_primary_db",
                    "sinr_secondary_db_per_user", "leakage_dbm",
                    "delivered_primary", "delivered_secondary")


# -- SINR terms -------------------------------------------------------------

def secondary_terms(h, g, stream_power):
    """
    Useful and cross-stream power at each served secondary receiver.

    ``h`` (..., S, N) holds the true channels of the served users in
    schedule order and ``g`` (..., N, S) the precoder. Returns ``signal``
    and ``cross``, both (..., S): ``p |h_s w_s|^2`` and
    ``sum_{s' != s} p |h_s w_s'|^2``.
    """
    eff = np.abs(h @ g) ** 2 * stream_power
    signal = np.diagonal(eff, axis1=-2, axis2=-1)
    cross = np.sum(eff, axis=-1) - signal
    return signal, cross


def leakage_terms(g_primary, g, stream_power):
    """``|sum_s sqrt(p) g_k w_s|^2`` for every primary row of ``g_primary``."""
    amp = np.sum(g_primary @ g, axis=-1) * math.sqrt(stream_power)
    return np.abs(amp) ** 2


def _served_channels(realization, schedule, n_t):
    try:
        h = np.stack([np.asarray(realization.h[s], complex)
                      for s in schedule.served_users])
    except KeyError as exc:
        raise Inconsistent(f"scheduled user {exc} has no channel") from None
    if h.shape[-1] != n_t:
        raise Inconsistent(f"channel has {h.shape[-1]} antennas, precoder {n_t}")
    return h


def compute_sinr_secondary(realization, precoding, schedule, primary_active,
                           noise_power):
    """
    SINR at every scheduled secondary receiver.

    ``primary_active`` maps each transmitting primary node to its power;
    their amplitudes add coherently at the receiver. Returns
    ``{user: sinr}``.
    """
    if not schedule.served_users:
        return {}
    if precoding.n_streams != len(schedule):
        raise Inconsistent(f"{precoding.n_streams} precoder columns for "
                           f"{len(schedule)} scheduled users")
    h = _served_channels(realization, schedule, precoding.g.shape[0])
    signal, cross = secondary_terms(h, precoding.g, precoding.stream_power)
    out = {}
    for i, s in enumerate(schedule.served_users):
        amp = sum(math.sqrt(p) * realization.q_cross[(k, s)]
                  for k, p in primary_active.items())
        out[s] = float(signal[i] / (cross[i] + abs(amp) ** 2 + noise_power))
    return out


def compute_sinr_primary(realization, precoding, schedule, pair,
                         primary_active, noise_power):
    """
    SINR of primary link ``pair = (k, j)``.

    The denominator holds the beamformed secondary leakage at ``j``, the
    coherent sum of the other active primary transmitters and the noise.
    ``precoding`` may be ``None`` when the secondary is silent.
    """
    k, j = pair
    if k not in primary_active:
        raise NotTransmitting(f"primary transmitter {k!r} is not active")
    num = primary_active[k] * abs(realization.q_prim[(k, j)]) ** 2
    leak = 0.0
    if precoding is not None and schedule.served_users:
        gj = np.asarray(realization.g[j], complex)
        if gj.shape[-1] != precoding.g.shape[0]:
            raise Inconsistent("primary channel and precoder sizes differ")
        leak = float(leakage_terms(gj[None, :], precoding.g,
                                   precoding.stream_power)[0])
    other = sum(math.sqrt(p) * realization.q_prim[(k2, j)]
                for k2, p in primary_active.items() if k2 != k)
    return float(num / (leak + abs(other) ** 2 + noise_power))


def packet_success(sinr, threshold_sinr):
    if not threshold_sinr > 0:
        raise InvalidParameter("SINR threshold must be positive")
    return sinr >= threshold_sinr


def jain_index(throughputs):
    """Jain's fairness index ``(sum x)^2 / (n sum x^2)``."""
    x = np.asarray(list(throughputs), dtype=float)
    if x.size == 0:
        raise InvalidParameter("jain_index needs at least one value")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise InvalidParameter("throughputs must be finite and non-negative")
    top = float(np.max(x))
    if top == 0.0:
        raise Undefined("Jain index is undefined when every throughput is zero")
    # scale-invariant; dividing by the maximum keeps x**2 out of the subnormals
    x = x / top
    j = float(np.sum(x) ** 2 / (x.size * np.sum(x ** 2)))
    return min(1.0, max(1.0 / x.size, j))


# -- run records ------------------------------------------------------------

@dataclass
class SlotReport:
    slot_index: int
    scheme_used: str
    primary_transmitted: bool
    sinr_secondary: dict = field(default_factory=dict)
    sinr_primary: dict = field(default_factory=dict)
    packets_delivered: dict = field(default_factory=dict)
    leakage: float = 0.0


@dataclass
class RunMetrics:
    seed: int
    scheme: str
    slots: int
    duration_s: float
    throughput: dict
    aggregate_throughput: float
    jain_index: float | None
    jain_index_load_normalized: float | None
    mean_interference_at_primary: float
    scheme_slots: dict = field(default_factory=dict)

    @property
    def primary_throughput(self):
        return self.throughput.get("primary", 0.0)

    @property
    def secondary_throughput(self):
        return sum(v for k, v in self.throughput.items() if k != "primary")

    @property
    def mean_leakage_dbm(self):
        m = self.mean_interference_at_primary
        return 10 * math.log10(m) if m > 0 else float("-inf")


# -- scheme plans -----------------------------------------------------------

@dataclass(frozen=True)
class SchemePlan:
    key: str
    kind: Scheme
    n_sub: int            # antennas used, the first n_sub of the array
    nulled: tuple         # indices into PRIMARY_NODES
    strict_dof: bool
    cap: int

    @property
    def label(self):
        name = {Scheme.OMNI: "TX", Scheme.MRT: "MRT", Scheme.ZF: "ZF"}[self.kind]
        return f"{name}-{self.n_sub}Ant"


def _zf_plan(key, n_sub, nulling_order, strict):
    # null as many primary users as the antennas allow with one stream left
    room = n_sub - 1 - (1 if strict else 0)
    k_r = max(0, min(len(nulling_order), room))
    nulled = tuple(PRIMARY_NODES.index(n) for n in nulling_order[:k_r])
    cap = stream_cap(Scheme.ZF, n_sub, k_r, strict)
    return SchemePlan(key, Scheme.ZF, n_sub, nulled, strict, cap)


def scheme_plans(cfg):
    """Candidate precoding schemes of a run, keyed as selected per slot."""
    n_t = cfg.geometry.n_antennas
    order = cfg.run.nulling_order
    choice = cfg.run.scheme
    if choice == "omni":
        return {"omni": SchemePlan("omni", Scheme.OMNI, 1, (), True, 1)}
    if choice == "mrt":
        return {"mrt": SchemePlan("mrt", Scheme.MRT, n_t, (), True, n_t)}
    if choice == "zf2":
        # two-antenna baseline: runs at the DoF boundary N_t == S + K
        return {"zf2": _zf_plan("zf2", 2, order, strict=False)}
    if choice == "zf4":
        return {"zf4": _zf_plan("zf4", 4, order, strict=True)}
    return {"mrt": SchemePlan("mrt", Scheme.MRT, n_t, (), True, n_t),
            "zf": _zf_plan("zf", n_t, order, strict=True)}


# -- block precomputation ---------------------------------------------------

@dataclass
class _PlanBlock:
    served: np.ndarray    # (B, S) user indices
    signal: np.ndarray    # (B, S)
    cross: np.ndarray     # (B, S)
    leak: np.ndarray      # (B, 2) leakage at PRIMARY_NODES


def _csi_block(cfg, gains, channels, block_index, seed):
    rng = np.random.default_rng([int(seed), _CSI_STREAM, int(block_index)])
    rel = cfg.sensing.relative_csi_error
    if rel is None:
        var = PilotModel(cfg.sensing.pilot_count, cfg.sensing.pilot_power,
                         cfg.radio.secondary_noise_power).error_variance
        var_h = np.full(gains.h.shape, var)
        var_g = np.full(gains.g.shape, var)
    else:
        var_h, var_g = rel * gains.h, rel * gains.g
    h_hat = channels.h + draw_small_scale(rng, channels.h.shape) * np.sqrt(var_h)[None, :, None]
    g_hat = channels.g + draw_small_scale(rng, channels.g.shape) * np.sqrt(var_g)[None, :, None]
    return h_hat, g_hat


def _plan_block(plan, cfg, channels, h_hat, g_hat, first_slot):
    B, U, N = channels.h.shape
    P = cfg.radio.secondary_power
    S = min(plan.cap, U)
    slots = first_slot + np.arange(B)
    served = (slots[:, None] * S + np.arange(S)[None, :]) % U
    idx = served[:, :, None]
    h_true = np.take_along_axis(channels.h, np.broadcast_to(idx, (B, S, N)), axis=1)
    if plan.kind is Scheme.OMNI:
        g = np.zeros((B, N, 1), complex)
        g[:, 0, 0] = 1.0
        p = P
    else:
        h_est = np.take_along_axis(h_hat, np.broadcast_to(idx, (B, S, N)), axis=1)
        h_est = h_est[..., :plan.n_sub]
        if plan.kind is Scheme.MRT:
            w = bf.mrt_directions(h_est)
        else:
            g_null = g_hat[:, list(plan.nulled), :plan.n_sub]
            w = bf.zf_directions(h_est, g_null, plan.strict_dof)
        w, _, p = bf.normalize_instantaneous(w, P)
        g = np.zeros((B, N, S), complex)
        g[:, :plan.n_sub, :] = w
    signal, cross = secondary_terms(h_true, g, p)
    leak = leakage_terms(channels.g, g, p)
    return _PlanBlock(served, signal, cross, leak)


# -- the run ----------------------------------------------------------------

def _active_mask(cfg, first_slot, count):
    windows = cfg.run.secondary_active
    if windows is None:
        return np.ones(count, bool)
    t = (first_slot + np.arange(count)) * cfg.run.slot_duration
    mask = np.zeros(count, bool)
    for a, b in windows:
        mask |= (t >= a) & (t < b)
    return mask


def _fmt(x):
    return f"{x:.4f}"


def _db(x):
    return 10 * math.log10(x) if x > 0 else float("-inf")


def run_scenario(cfg, seed=None, slot_csv=None, on_slot=None):
    """
    Execute ``cfg.run.slots`` slots and return the run's ``RunMetrics``.

    Parameters
    ----------
    cfg : ScenarioConfig
    seed : int, optional
        Defaults to the first seed of the config.
    slot_csv : text stream, optional
        Receives one CSV row per slot (see ``SLOT_CSV_COLUMNS``).
    on_slot : callable, optional
        Called with a ``SlotReport`` after every slot.
    """
    seed = cfg.run.seeds[0] if seed is None else int(seed)
    try:
        geometry = cfg.scenario_geometry()
        model = cfg.path_loss_model()
        gains = LinkGains.from_geometry(geometry, model)
        plans = scheme_plans(cfg)
    except BeamshareError as exc:
        raise SimulationError(0, "setup", exc) from exc
    auto = cfg.run.scheme == "auto"
    fixed_key = None if auto else next(iter(plans))

    U = geometry.n_users
    T = cfg.run.slots
    p_k = cfg.radio.primary_power
    sigma_s = cfg.radio.secondary_noise_power
    sigma_k = cfg.radio.primary_noise_power
    theta = 10 ** (cfg.mac.sinr_threshold_db / 10)
    sense_thr = cfg.mac.sensing_threshold
    shannon = cfg.run.throughput_mode == "shannon"
    tx_i = PRIMARY_NODES.index(PRIMARY_TX)
    rx_i = PRIMARY_NODES.index(PRIMARY_RX)
    alpha = cfg.sensing.alpha
    kpi_thr = cfg.sensing.kpi_threshold

    mac_rng = np.random.default_rng([seed, _MAC_STREAM])
    mac = initial_mac_state(cfg.mac.offered_load, mac_rng, cfg.mac.cw_min)
    kpi = TrafficKpi(0.0)

    delivered = {"primary": 0.0, **{f"secondary:{u}": 0.0 for u in range(U)}}
    scheduled = {f"secondary:{u}": 0 for u in range(U)}
    scheme_slots = {}
    leak_sum, leak_slots = 0.0, 0

    writer = None
    if slot_csv is not None:
        writer = csv.writer(slot_csv, lineterminator="\n")
        writer.writerow(SLOT_CSV_COLUMNS)

    slot = 0
    while slot < T:
        block_index = slot // BLOCK_SLOTS
        phase = "channel"
        try:
            channels = realize_block(geometry, model, block_index, seed)
            phase = "sensing"
            h_hat, g_hat = _csi_block(cfg, gains, channels, block_index, seed)
            phase = "precoding"
            blocks = {key: _plan_block(plan, cfg, channels, h_hat, g_hat,
                                       channels.first_slot)
                      for key, plan in plans.items()}
        except BeamshareError as exc:
            raise SimulationError(slot, phase, exc) from exc
        qc_pow = np.abs(channels.q_cross) ** 2 * p_k
        qp_pow = np.abs(channels.q_prim) ** 2 * p_k
        end = min(T, channels.first_slot + len(channels))
        active = _active_mask(cfg, slot, end - slot)

        for v in range(slot, end):
            i = v - channels.first_slot
            on = bool(active[v - slot])
            if auto:
                key = select_scheme(kpi, kpi_thr).scheme.value
            else:
                key = fixed_key
            pb = blocks[key]
            label = plans[key].label if on else "off"
            scheme_slots[label] = scheme_slots.get(label, 0) + 1

            leak = pb.leak[i] if on else (0.0, 0.0)
            busy = on and sensing_threshold_check(leak[tx_i], sense_thr)
            mac, ptx = primary_mac_step(mac, busy, mac_rng)
            kpi = update_traffic_kpi(kpi, ptx, alpha)

            sinr_p = None
            got_p = 0.0
            if ptx:
                sinr_p = qp_pow[i] / (leak[rx_i] + sigma_k)
                if sinr_p >= theta:
                    got_p = math.log2(1 + sinr_p) if shannon else 1.0
                delivered["primary"] += got_p

            sinr_s = {}
            got_s = 0.0
            if on:
                interf = 0.0
                for j, u in enumerate(pb.served[i]):
                    u = int(u)
                    if ptx:
                        interf = qc_pow[i, u]
                    sinr = pb.signal[i, j] / (pb.cross[i, j] + interf + sigma_s)
                    sinr_s[u] = sinr
                    scheduled[f"secondary:{u}"] += 1
                    if sinr >= theta:
                        credit = math.log2(1 + sinr) if shannon else 1.0
                        delivered[f"secondary:{u}"] += credit
                        got_s += credit
                mean_leak = 0.5 * (leak[0] + leak[1])
                leak_sum += mean_leak
                leak_slots += 1

            if writer is not None:
                writer.writerow((
                    v, label, int(ptx),
                    _fmt(_db(sinr_p)) if sinr_p is not None else "",
                    ";".join(f"{u}:{_fmt(_db(x))}" for u, x in sinr_s.items()),
                    _fmt(_db(mean_leak)) if on else "",
                    _fmt(got_p) if shannon else int(got_p),
                    _fmt(got_s) if shannon else int(got_s)))
            if on_slot is not None:
                on_slot(SlotReport(
                    slot_index=v, scheme_used=label, primary_transmitted=ptx,
                    sinr_secondary={u: float(x) for u, x in sinr_s.items()},
                    sinr_primary={} if sinr_p is None else
                    {(PRIMARY_TX, PRIMARY_RX): float(sinr_p)},
                    packets_delivered={"primary": got_p, "secondary": got_s},
                    leakage=float(mean_leak) if on else 0.0))
        slot = end

    return _metrics(cfg, seed, T, delivered, scheduled, scheme_slots,
                    leak_sum, leak_slots)


def _metrics(cfg, seed, T, delivered, scheduled, scheme_slots, leak_sum,
             leak_slots):
    duration = T * cfg.run.slot_duration
    if T == 0:
        thr = {k: 0.0 for k in delivered}
    else:
        thr = {k: v / duration for k, v in delivered.items()}
    try:
        jain = jain_index(thr.values())
    except Undefined:
        jain = None
    # throughput relative to what each node asked for
    norm = []
    if T:
        offered = {"primary": cfg.mac.offered_load / cfg.run.slot_duration}
        offered.update({k: n / duration for k, n in scheduled.items()})
        norm = [thr[k] / offered[k] for k in thr if offered[k] > 0]
    try:
        jain_norm = jain_index(norm) if norm else None
    except Undefined:
        jain_norm = None
    return RunMetrics(
        seed=seed, scheme=cfg.run.scheme, slots=T, duration_s=duration,
        throughput=thr, aggregate_throughput=float(sum(thr.values())),
        jain_index=jain, jain_index_load_normalized=jain_norm,
        mean_interference_at_primary=leak_sum / leak_slots if leak_slots else 0.0,
        scheme_slots=scheme_slots)


def slot_inputs(cfg, seed, slot_index):
    """True channels and the engine's CSI estimates of one slot.

    Returns ``(realization, h_est, g_est)`` where the estimates are keyed
    like the realization's ``h`` and ``g`` maps.
    """
    geometry = cfg.scenario_geometry()
    model = cfg.path_loss_model()
    gains = LinkGains.from_geometry(geometry, model)
    block_index = slot_index // BLOCK_SLOTS
    channels = realize_block(geometry, model, block_index, seed)
    h_hat, g_hat = _csi_block(cfg, gains, channels, block_index, seed)
    i = slot_index - channels.first_slot
    real = block_row(channels, i)
    h_est = {s: h_hat[i, s].copy() for s in range(geometry.n_users)}
    g_est = {k: g_hat[i, j].copy() for j, k in enumerate(PRIMARY_NODES)}
    return real, h_est, g_est


def slot_precoder(cfg, realization, h_est, g_est, scheme, slot_index=0):
    """
    Schedule and precoder of one slot built with the public operations.

    ``scheme`` is a key of ``scheme_plans(cfg)``. The rules match the
    engine's batched path, so a slot of a run can be re-evaluated with
    ``compute_sinr_secondary`` / ``compute_sinr_primary``.
    """
    plans = scheme_plans(cfg)
    if scheme not in plans:
        raise InvalidParameter(f"scheme {scheme!r} not available in this config")
    plan = plans[scheme]
    users = sorted(realization.h)
    schedule = schedule_secondary(users, plan.n_sub, len(plan.nulled),
                                  plan.kind, slot_index, plan.strict_dof)
    N = realization.n_antennas
    P = cfg.radio.secondary_power
    if plan.kind is Scheme.OMNI:
        return schedule, bf.omni_precoder(N, P)
    rows = [np.asarray(h_est[s])[:plan.n_sub] for s in schedule.served_users]
    if plan.kind is Scheme.MRT:
        pm = bf.mrt_precoder(rows, P)
    else:
        nulled = [np.asarray(g_est[PRIMARY_NODES[k]])[:plan.n_sub]
                  for k in plan.nulled]
        pm = bf.zf_precoder(rows, nulled, P, strict_dof=plan.strict_dof)
    g = np.zeros((N, pm.n_streams), complex)
    g[:plan.n_sub] = pm.g
    return schedule, bf.PrecodingMatrix(g, pm.scheme, pm.power_scale,
                                        pm.stream_power)
