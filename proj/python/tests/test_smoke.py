import random

import pytest

import dcs


def test_quantize_and_throughput():
    assert dcs.quantize(2.5, 1000.0) == 2500
    assert dcs.max_throughput() == pytest.approx(2.5e6 / 136)
    assert dcs.max_throughput(gap_bits=0, cmd_bits=50, resp_bits=50) == pytest.approx(25_000)


def test_command_frames_round_trip():
    rng = random.Random(3)
    for _ in range(200):
        fn = rng.randrange(32)
        data = rng.randrange(1 << 24) if 16 <= fn <= 23 else None
        args = dict(crate=rng.randint(1, 62), station=rng.randint(1, 23), sub=rng.randrange(16), fn=fn)
        frame = dcs.encode_command(data=data, **args)
        assert dcs.decode_command(frame) == dict(args, data=data)
    with pytest.raises(dcs.DcsError) as err:
        dcs.decode_command(0)
    assert dcs.error_code(err.value) == "FRAME_CORRUPTION"


def test_message_framing():
    msg = {"t": "hello", "id": 1, "ver": 1}
    raw = dcs.frame_encode(msg)
    assert int.from_bytes(raw[:4], "big") == len(raw) - 4
    assert dcs.frame_decode(raw) == {"status": "ok", "message": msg, "consumed": len(raw)}
    assert dcs.frame_decode(raw[:-1])["status"] == "incomplete"
    bad = (3).to_bytes(4, "big") + b"{x}"
    assert dcs.frame_decode(bad)["error"] == "BAD_FRAME"


def test_bench_is_reproducible():
    a = dcs.run_bench("central", readers=4, duration_virtual=0.5, seed=9)
    b = dcs.run_bench("central", readers=4, duration_virtual=0.5, seed=9)
    assert a == b
    assert a["throughput_tx_per_s"] == pytest.approx(2.5e6 / 136, rel=0.005)
    d = dcs.run_bench("distributed", nodes=3, readers=6, duration_virtual=0.2)
    assert d["throughput_tx_per_s"] == pytest.approx(3 * 100_000, rel=0.005)


def test_deployment_read_write_and_errors():
    dep = dcs.Deployment(sigma_scale=0.0)
    assert sorted(dep.databases()) == ["cryo", "injectors", "linac", "sources"]
    assert dep.read("cryo:LHe_level")["val"] == pytest.approx(80.0)
    assert dep.write("cryo:H1", 2.4999)["raw"] == 250
    with pytest.raises(dcs.DcsError) as err:
        dep.read("cryo:nope")
    assert dcs.error_code(err.value) == "NO_SUCH_CHANNEL"


def test_migration_and_failover():
    dep = dcs.Deployment(sigma_scale=0.0)
    assert dep.failover()["readable"] == 0
    out = dep.migrate(verify_tolerance=0.0)
    assert out["verify"]["pass"] is True
    assert dep.directory()["databases"]["cryo"]["node"] == "edge"
    before = dep.highway_transactions()
    dep.read("cryo:T01")
    assert dep.highway_transactions() == before
    post = dep.failover()
    assert post["databases"]["cryo"]["readable"] == post["databases"]["cryo"]["total"]


def test_tunes(tmp_path):
    dep = dcs.Deployment(sigma_scale=0.0)
    store = str(tmp_path)
    first = dep.save_tune(store, "t")
    dep.write("cryo:H2", 9.0)
    report = dep.restore_tune(store, "t")
    assert all(r["status"] == "APPLIED" for r in report["results"])
    assert dep.save_tune(store, "t2")["entries"] == first["entries"]
