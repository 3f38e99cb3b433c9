"""Exit criteria. Each test is one criterion; the terminal summary prints PASS/FAIL per line."""

import csv
import time
from pathlib import Path

import numpy as np
import pytest

from burstgate import metrics
from burstgate.cli import main
from burstgate.core import BufferCapacity, LinkSpec, from_seconds
from burstgate.engine import build_arrivals, run_many, service_times, sweep
from burstgate.kernel import droptail
from burstgate.metrics import ie_eff, mos_from_r
from burstgate.scenario import RunConfig, load_scenario, make_scenario, utilization
from burstgate.traffic import CameraParams, FlowSpec, SynthVcParams, VoipParams

SEED = 1
SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"
ALL_RESULTS = []  # every iteration of every acceptance run, for criterion 2


def runs(scenario, cfg):
    res = run_many(scenario, cfg)
    ALL_RESULTS.extend(res)
    return res


@pytest.fixture(scope="module")
def determinism_outputs(tmp_path_factory):
    base = tmp_path_factory.mktemp("det")
    out = {}
    t0 = time.perf_counter()
    for label, threads in (("serial", "1"), ("auto", "0")):
        mp = pytest.MonkeyPatch()
        mp.setenv("BURSTGATE_THREADS", threads)
        code = main(["run", "--scenario", str(SCENARIOS / "scenario2_mixed.json"),
                     "--iterations", "40", "--seed", str(SEED), "--out", str(base / label)])
        mp.undo()
        assert code == 0
        out[label] = base / label
    return out, time.perf_counter() - t0


@pytest.mark.criterion("1. determinism across parallelism")
def test_determinism(criterion, determinism_outputs):
    out, elapsed = determinism_outputs
    files = sorted(p.name for p in out["serial"].iterdir())
    assert len(files) == 5
    for name in files:
        assert (out["serial"] / name).read_bytes() == (out["auto"] / name).read_bytes(), name
    assert elapsed < 30


@pytest.mark.criterion("3. E-model golden values")
def test_emodel_golden(criterion):
    assert mos_from_r(100) == 4.5
    assert 3.595 <= mos_from_r(70) <= 3.605
    assert ie_eff(19) == pytest.approx(53.0, abs=1e-12)
    assert 4.025 <= mos_from_r(80) <= 4.035, f"mos_from_r(80) = {mos_from_r(80):.6f}"


@pytest.mark.criterion("4. utilization landmarks 57% / 86%")
def test_utilization_landmarks(criterion, scenario_dir):
    for name, target in (("scenario1_two_cameras.json", 0.57), ("scenario1_three_cameras.json", 0.86)):
        s = load_scenario(scenario_dir / name)
        res = runs(s, RunConfig(40, SEED))
        measured = np.mean([r.measured_utilization for r in res])
        assert abs(measured - target) <= 0.02, (name, measured)
        assert abs(utilization(s) - target) <= 0.02


BUFFERS = [10, 20, 30, 40, 60, 80, 100]


@pytest.mark.criterion("5. buffer sweep shape")
def test_buffer_sweep_shape(criterion, scenario_dir):
    t0 = time.perf_counter()
    cfg = RunConfig(40, SEED)
    curves = {}
    for n, name in ((2, "scenario1_two_cameras.json"), (3, "scenario1_three_cameras.json")):
        s = load_scenario(scenario_dir / name)
        curves[n] = {b: np.mean([r.aggregate.loss_rate for r in runs(s.with_buffer_limit(b), cfg)])
                     for b in BUFFERS}
        assert utilization(s) < 0.9
    elapsed = time.perf_counter() - t0
    # (b) non-increasing in buffer size
    for n in (2, 3):
        seq = [curves[n][b] for b in BUFFERS]
        assert all(y <= x for x, y in zip(seq, seq[1:])), (n, seq)
    # (c) loss at the 30-packet buffer despite utilization < 90%
    assert curves[2][30] > 0 and curves[3][30] > 0
    assert elapsed < 120
    # (a) three cameras strictly worse at every buffer size
    worse = {b: curves[3][b] > curves[2][b] for b in BUFFERS}
    assert all(worse.values()), {b: (curves[2][b], curves[3][b]) for b in BUFFERS}


@pytest.mark.criterion("6. burst-overflow oracle")
def test_burst_overflow_oracle(criterion):
    cam = CameraParams(packets_per_burst=10, packet_bytes=1500, burst_interval_mean_s=0.5,
                       burst_interval_halfwidth_s=0.1, intra_burst_gap_s=0.0001)
    # 1500 B at 1 Mbps = 12 ms per packet, longer than the 0.9 ms burst span
    s = make_scenario(LinkSpec(1e6), BufferCapacity("packets", 5), [FlowSpec("camera", cam)],
                      duration_s=60.0, start_window_s=0.0)
    arr = build_arrivals(s, 2024)
    dep = droptail(arr.t_ns, arr.size, service_times(arr.size, 1e6), False, 5, True)
    burst = arr.seq // 10
    per_burst = np.bincount(burst[dep < 0], minlength=burst.max() + 1)[:100]
    assert len(per_burst) == 100
    assert np.all(per_burst == 4) and per_burst.var() == 0


UTILS = [0.5, 0.6, 0.7, 0.8, 0.9]


@pytest.mark.criterion("7. utilization sweep shape")
def test_utilization_sweep_shape(criterion, scenario_dir):
    base = load_scenario(scenario_dir / "scenario2_mixed.json")
    assert base.buffer.limit == 40
    load = utilization(base) * base.link.capacity_bps
    cfg = RunConfig(40, SEED)
    per_u = {}
    for u in UTILS:
        s = base.with_capacity(load / u)
        assert utilization(s) == pytest.approx(u)
        res = runs(s, cfg)
        per_u[u] = {f: np.mean([r.per_flow[f].loss_rate for r in res]) for f in s.flow_ids}
    for f in base.flow_ids:
        seq = [per_u[u][f] for u in UTILS]
        assert all(y >= x for x, y in zip(seq, seq[1:])), (f, seq)
    kinds = {f.flow_id: f.kind for f in base.flows}
    for kind in ("camera", "synth_vc", "voip"):
        assert all(per_u[0.9][f] > 0 for f, k in kinds.items() if k == kind), kind


@pytest.fixture(scope="module")
def deep_study():
    s = load_scenario(SCENARIOS / "scenario2_mixed.json")
    t0 = time.perf_counter()
    res = runs(s, RunConfig(200, SEED))
    return s, res, time.perf_counter() - t0


@pytest.mark.criterion("8b. deep study: best band never reached")
def test_deep_study_no_best_band(criterion, deep_study):
    s, res, elapsed = deep_study
    assert utilization(s) == pytest.approx(0.70) and s.buffer.limit == 40
    calls = metrics.voip_mos_per_iteration(res, 0.0)
    assert len(calls) == 400
    assert max(c.mos for c in calls) < 4.34
    assert elapsed < 180


@pytest.mark.criterion("8c. deep study: P(MOS >= 3.6) >= 0.90")
def test_deep_study_medium_share(criterion, deep_study):
    _, res, _ = deep_study
    mos = np.array([c.mos for c in metrics.voip_mos_per_iteration(res, 0.0)])
    assert np.mean(mos >= 3.6) >= 0.90


@pytest.mark.criterion("8a. deep study: VoIP loss modal at lowest bin")
def test_deep_study_loss_distribution(criterion, deep_study):
    _, res, _ = deep_study
    loss = [c.loss_percent for c in metrics.voip_mos_per_iteration(res, 0.0)]
    h = metrics.histogram(loss, metrics.LOSS_EDGES_PERCENT)
    assert np.mean(np.array(loss) < 1.0) >= 0.60
    assert int(np.argmax(h.counts)) == 0, h.counts[:6]


@pytest.mark.criterion("9. MOS CDF monotone in delay")
def test_mos_cdf_monotone(criterion, determinism_outputs):
    out, _ = determinism_outputs
    rows = list(csv.DictReader(open(out["serial"] / "mos_cdf.csv")))
    by_delay = {}
    for r in rows:
        by_delay.setdefault(float(r["delay_ms"]), {})[float(r["mos"])] = float(r["probability"])
    delays = sorted(by_delay)
    assert delays == [0.0, 50.0, 100.0, 150.0, 200.0]
    grid = sorted(by_delay[delays[0]])
    assert len(grid) == 351
    violations = sum(by_delay[b][x] > by_delay[a][x]
                     for a, b in zip(delays, delays[1:]) for x in grid)
    assert violations == 0


def random_scenario(rng):
    flows = []
    for _ in range(rng.integers(1, 5)):
        kind = rng.choice(["voip", "camera", "synth_vc"])
        if kind == "voip":
            flows.append(FlowSpec("voip", VoipParams(inter_packet_s=float(rng.uniform(0.005, 0.03)))))
        elif kind == "camera":
            flows.append(FlowSpec("camera", CameraParams(packets_per_burst=int(rng.integers(3, 30)),
                                                         burst_interval_mean_s=float(rng.uniform(0.1, 0.4)),
                                                         burst_interval_halfwidth_s=0.05)))
        else:
            flows.append(FlowSpec("synth_vc", SynthVcParams(mean_bps=float(rng.uniform(2e5, 2e6)))))
    s = make_scenario(LinkSpec(1.0), BufferCapacity("packets", int(rng.integers(1, 30))), flows, 5.0, 1.0)
    load = utilization(s)
    return s.with_capacity(load / rng.uniform(0.5, 1.1))


@pytest.mark.criterion("10. open-loop drop-set nesting")
def test_drop_set_nesting(criterion):
    rng = np.random.default_rng(SEED)
    nested = 0
    for _ in range(50):
        s = random_scenario(rng)
        arr = build_arrivals(s, int(rng.integers(0, 2**63)))
        svc = service_times(arr.size, s.link.capacity_bps)
        k = s.buffer.limit
        d_k = droptail(arr.t_ns, arr.size, svc, False, k)
        d_k1 = droptail(arr.t_ns, arr.size, svc, False, k + 1)
        ids_k = set(zip(arr.flow[d_k < 0].tolist(), arr.seq[d_k < 0].tolist()))
        ids_k1 = set(zip(arr.flow[d_k1 < 0].tolist(), arr.seq[d_k1 < 0].tolist()))
        nested += ids_k1 <= ids_k
    assert nested == 50, f"{50 - nested} of 50 scenarios have drops at K+1 outside the drop set at K"


@pytest.mark.criterion("2. conservation across acceptance runs")
def test_conservation(criterion, determinism_outputs):
    # defined last so it sees every run made above
    out, _ = determinism_outputs
    assert len(ALL_RESULTS) >= 200
    violations = 0
    for r in ALL_RESULTS:
        for st in list(r.per_flow.values()) + [r.aggregate]:
            violations += st.sent != st.delivered + st.dropped + st.residual
    for row in csv.DictReader(open(out["serial"] / "per_iteration.csv")):
        violations += int(row["sent"]) != int(row["delivered"]) + int(row["dropped"]) + int(row["residual"])
    assert violations == 0
