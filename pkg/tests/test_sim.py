import io
import math
from pathlib import Path

import numpy as np
import pytest

from beamshare.beamforming import mrt_precoder, omni_precoder, zf_precoder
from beamshare.channel import PRIMARY_RX, PRIMARY_TX, ChannelRealization
from beamshare.config import config_from_dict
from beamshare.errors import (Inconsistent, NotTransmitting, SimulationError,
                              Undefined)
from beamshare.mac import SecondarySchedule
from beamshare.sim import (SLOT_CSV_COLUMNS, compute_sinr_primary,
                           compute_sinr_secondary, jain_index, packet_success,
                           run_scenario, scheme_plans, slot_inputs,
                           slot_precoder)

from conftest import crandn
from oracles import primary_sinr_expansion, secondary_sinr_expansion

GOLDEN = Path(__file__).parent / "golden"
PAIR = (PRIMARY_TX, PRIMARY_RX)


def _cfg(**run):
    base = {"preset": "scenario1", "run": {"slots": 2000, "seeds": [1], **run}}
    return config_from_dict(base)


def _realization(rng, n_users, n_t):
    return ChannelRealization(
        slot_index=0,
        h={u: crandn(rng, n_t) for u in range(n_users)},
        g={PRIMARY_TX: crandn(rng, n_t), PRIMARY_RX: crandn(rng, n_t)},
        q_cross={(PRIMARY_TX, u): complex(crandn(rng, 1)[0]) for u in range(n_users)},
        q_prim={PAIR: complex(crandn(rng, 1)[0])})


def test_scalar_sinr():
    real = ChannelRealization(0, h={0: np.array([2.0 + 0j])})
    sinr = compute_sinr_secondary(real, omni_precoder(1, 1.0),
                                  SecondarySchedule((0,)), {}, 1.0)
    assert sinr == {0: pytest.approx(4.0)}


def test_zf_streams_do_not_interfere(rng):
    real = _realization(rng, 2, 4)
    pm = zf_precoder([real.h[0], real.h[1]], [real.g[PRIMARY_RX]])
    h = np.stack([real.h[0], real.h[1]])
    eff = np.abs(h @ pm.g) ** 2
    assert eff[0, 1] <= 1e-24 and eff[1, 0] <= 1e-24
    sinr = compute_sinr_secondary(real, pm, SecondarySchedule((0, 1)), {}, 1e-3)
    for u in (0, 1):
        assert sinr[u] == pytest.approx(pm.stream_power * eff[u, u] / 1e-3, rel=1e-12)


def test_secondary_sinr_matches_expansion(rng):
    for _ in range(200):
        real = _realization(rng, 2, 4)
        pm = mrt_precoder([real.h[0], real.h[1]], total_power=1.7)
        got = compute_sinr_secondary(real, pm, SecondarySchedule((0, 1)),
                                     {PRIMARY_TX: 0.6}, 0.3)
        g = pm.g.tolist()
        ref = secondary_sinr_expansion(
            [list(real.h[0]), list(real.h[1])], g, pm.stream_power,
            [[(0.6, real.q_cross[(PRIMARY_TX, u)])] for u in (0, 1)], 0.3)
        assert got[0] == pytest.approx(ref[0], rel=1e-12)
        assert got[1] == pytest.approx(ref[1], rel=1e-12)


def test_primary_sinr_secondary_silent(rng):
    real = _realization(rng, 1, 4)
    sinr = compute_sinr_primary(real, None, SecondarySchedule(()), PAIR,
                                {PRIMARY_TX: 2.0}, 0.1)
    assert sinr == pytest.approx(2.0 * abs(real.q_prim[PAIR]) ** 2 / 0.1, rel=1e-12)


def test_primary_sinr_zf_perfect_csi(rng):
    real = _realization(rng, 1, 4)
    pm = zf_precoder([real.h[0]], [real.g[PRIMARY_RX]])
    silent = compute_sinr_primary(real, None, SecondarySchedule(()), PAIR,
                                  {PRIMARY_TX: 1.0}, 1e-3)
    with_zf = compute_sinr_primary(real, pm, SecondarySchedule((0,)), PAIR,
                                   {PRIMARY_TX: 1.0}, 1e-3)
    assert with_zf == pytest.approx(silent, rel=1e-12)


def test_primary_sinr_omni_matches_expansion(rng):
    real = _realization(rng, 1, 4)
    pm = omni_precoder(4, 1.0)
    got = compute_sinr_primary(real, pm, SecondarySchedule((0,)), PAIR,
                               {PRIMARY_TX: 1.0}, 0.5)
    ref = primary_sinr_expansion(real.q_prim[PAIR], 1.0, list(real.g[PRIMARY_RX]),
                                 pm.g.tolist(), pm.stream_power, [], 0.5)
    assert got == pytest.approx(ref, rel=1e-12)


def test_primary_inactive_raises(rng):
    real = _realization(rng, 1, 4)
    with pytest.raises(NotTransmitting):
        compute_sinr_primary(real, None, SecondarySchedule(()), PAIR, {}, 1.0)


def test_inconsistent_schedule(rng):
    real = _realization(rng, 2, 4)
    pm = mrt_precoder([real.h[0]])
    with pytest.raises(Inconsistent):
        compute_sinr_secondary(real, pm, SecondarySchedule((0, 1)), {}, 1.0)


def test_packet_success_boundary():
    assert packet_success(10.0, 3.16)
    assert packet_success(3.16, 3.16)
    assert not packet_success(3.0, 3.16)


def test_jain_examples():
    assert jain_index([100, 100]) == pytest.approx(1.0)
    assert jain_index([7, 0]) == pytest.approx(0.5)
    # 305^2 / (2 * (75^2 + 230^2))
    assert jain_index([75, 230]) == pytest.approx(0.7947458, abs=1e-7)
    with pytest.raises(Undefined):
        jain_index([0, 0])


def test_zero_slot_run():
    m = run_scenario(_cfg(slots=0, scheme="omni"))
    assert m.slots == 0 and m.aggregate_throughput == 0.0 and m.jain_index is None


def test_primary_alone_throughput_matches_outage_oracle():
    # secondary never active; primary load below the MAC capacity
    # 2/(cw+1) so every arrival is served. |q|^2 is exponential, so
    # P(SINR >= theta) = exp(-theta sigma^2 / (p * gain)).
    gain = 1e-4 * 6.0 ** -3
    theta = 10 ** 0.5
    noise = 0.5 * gain / theta
    p_ok = math.exp(-theta * noise / gain)
    cfg = config_from_dict({
        "preset": "scenario1",
        "radio": {"primary_noise_power": noise},
        "mac": {"offered_load": 0.1},
        "run": {"slots": 200_000, "seeds": [4], "scheme": "omni",
                "secondary_active": []}})
    sent, ok = [0], [0]

    def tally(rep):
        if rep.primary_transmitted:
            sent[0] += 1
            ok[0] += rep.packets_delivered["primary"] > 0

    m = run_scenario(cfg, on_slot=tally)
    assert ok[0] / sent[0] == pytest.approx(p_ok, rel=0.02)
    assert m.primary_throughput == pytest.approx(0.1 * 1000 * p_ok, rel=0.03)
    assert m.scheme_slots == {"off": 200_000}


def _csv(cfg, seed=1):
    buf = io.StringIO()
    run_scenario(cfg, seed=seed, slot_csv=buf)
    return buf.getvalue()


def test_csv_deterministic_and_seed_sensitive():
    cfg = _cfg(scheme="auto", slots=3000)
    a, b = _csv(cfg), _csv(cfg)
    assert a == b
    assert _csv(cfg, seed=2) != a
    assert a.splitlines()[0] == ",".join(SLOT_CSV_COLUMNS)
    assert len(a.splitlines()) == 3001


def test_slot_csv_golden():
    cfg = _cfg(scheme="zf4", slots=40)
    assert _csv(cfg) == (GOLDEN / "slots_scenario1_zf4_seed1.csv").read_text()


@pytest.mark.parametrize("scheme", ["omni", "mrt", "zf2", "zf4"])
def test_engine_slot_matches_public_operations(scheme):
    cfg = _cfg(scheme=scheme, slots=50)
    reports = []
    run_scenario(cfg, on_slot=reports.append)
    key = next(iter(scheme_plans(cfg)))
    for rep in reports[:50]:
        real, h_est, g_est = slot_inputs(cfg, 1, rep.slot_index)
        sched, pm = slot_precoder(cfg, real, h_est, g_est, key, rep.slot_index)
        active = {PRIMARY_TX: cfg.radio.primary_power} if rep.primary_transmitted else {}
        sinr = compute_sinr_secondary(real, pm, sched, active,
                                      cfg.radio.secondary_noise_power)
        assert set(sinr) == set(rep.sinr_secondary)
        for u, x in sinr.items():
            assert rep.sinr_secondary[u] == pytest.approx(x, rel=1e-9)
        if rep.primary_transmitted:
            sp = compute_sinr_primary(real, pm, sched, PAIR, active,
                                      cfg.radio.primary_noise_power)
            assert rep.sinr_primary[PAIR] == pytest.approx(sp, rel=1e-9)


def test_auto_switches_to_zf_when_threshold_calibrated():
    cfg = config_from_dict({"preset": "scenario1",
                            "sensing": {"kpi_threshold": 0.02},
                            "run": {"slots": 20000, "scheme": "auto"}})
    m = run_scenario(cfg)
    assert m.scheme_slots.get("ZF-4Ant", 0) > 0.9 * 20000


def test_setup_error_has_context():
    cfg = config_from_dict({"geometry": {"secondary_rx": [[0.0, 3.0]]},
                            "run": {"slots": 10, "scheme": "omni"}})
    with pytest.raises(SimulationError) as exc:
        run_scenario(cfg)
    assert exc.value.phase == "setup" and exc.value.slot == 0


def test_metrics_bounds():
    m = run_scenario(_cfg(scheme="zf4", slots=5000))
    assert 1 / 2 <= m.jain_index <= 1
    assert m.mean_interference_at_primary > 0
    assert sum(m.scheme_slots.values()) == 5000
