import threading

import pytest

from tpdc.cli.cache import SpectrumCache
from tpdc.core.basis import BasisSpec, NuclearModel
from tpdc.core.channels import get_channel
from tpdc.core.runner import JobOutcome, RateJob, RateWorker, Signal

SPEC = BasisSpec.bpolynomial(10, 15.0)


def make_job(**kwargs):
    base = dict(spec=SPEC, nuc=NuclearModel(1.0), channels=(get_channel("2E1"),), digits=20, quad_points=2)
    base.update(kwargs)
    return RateJob(**base)


def recorded(worker):
    events = {"log": [], "started": [], "finished": [], "done": 0}
    worker.log_output.connect(events["log"].append)
    worker.job_started.connect(lambda *a: events["started"].append(a))
    worker.job_finished.connect(lambda *a: events["finished"].append(a))

    def on_done():
        events["done"] += 1

    worker.done.connect(on_done)
    return events


@pytest.fixture(scope="module")
def serial_outcome():
    return RateWorker([make_job()]).run()[0]


class TestSignal:
    def test_concurrent_connects_are_all_kept(self):
        signal = Signal()
        hits = []
        threads = [threading.Thread(target=signal.connect, args=(lambda i=i: hits.append(i),))
                   for i in range(32)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        signal.emit()
        assert sorted(hits) == list(range(32))

    def test_slot_connected_during_emit_waits_for_the_next_one(self):
        signal = Signal()
        calls = []

        def late():
            calls.append("late")

        def first():
            calls.append("first")
            signal.connect(late)

        signal.connect(first)
        signal.emit()
        assert calls == ["first"]
        signal.emit()
        assert calls == ["first", "first", "late"]


class TestRateJob:
    def test_kappas(self):
        assert make_job().kappas == [-1, 1, -2]
        assert make_job(channels=(get_channel("2M1"),)).kappas == [-1, 2]

    def test_label(self):
        assert make_job().label == "Z=1 bpoly N=10 R=15 [2E1]"


class TestRateWorker:
    def test_successful_run(self, serial_outcome):
        assert isinstance(serial_outcome, JobOutcome)
        assert serial_outcome.success
        assert not serial_outcome.cached
        (result,) = serial_outcome.results
        assert result.channel == "2E1"
        assert result.total_length > 0
        assert result.quad_points == 2

    def test_callbacks_and_log_lines(self):
        worker = RateWorker([make_job()])
        events = recorded(worker)
        worker.run()
        assert events["started"] == [(1, 1, make_job().label)]
        assert events["finished"] == [(1, 1, make_job().label, True)]
        assert events["done"] == 1
        assert any(line.startswith("[1/1] DONE:") for line in events["log"])
        assert events["log"][-1] == "=== All jobs done. ==="

    def test_cached_job_is_skipped(self, tmp_path, serial_outcome):
        cache = SpectrumCache(tmp_path)
        first = RateWorker([make_job()], cache=cache).run()[0]
        assert not first.cached
        worker = RateWorker([make_job()], cache=cache)
        events = recorded(worker)
        second = worker.run()[0]
        assert second.cached and second.success
        assert any("SKIP (cached)" in line for line in events["log"])
        assert float(second.results[0].total_length) == pytest.approx(float(first.results[0].total_length), rel=1e-15)

    def test_cancel_before_run(self):
        worker = RateWorker([make_job(), make_job()])
        events = recorded(worker)
        worker.cancel()
        assert worker.run() == []
        assert events["started"] == []
        assert "--- Rate run cancelled ---" in events["log"]
        assert "=== All jobs done. ===" not in events["log"]
        assert events["done"] == 1

    def test_failing_job_does_not_stop_the_batch(self):
        worker = RateWorker([make_job(initial=(9, -1)), make_job(channels=(get_channel("2M1"),), quad_points=1)])
        events = recorded(worker)
        bad, good = worker.run()
        assert not bad.success
        assert bad.error.startswith("SpectrumError")
        assert good.success
        assert any("FAILED" in line for line in events["log"])
        assert [f[3] for f in events["finished"]] == [False, True]

    def test_thread_pool_matches_serial(self, serial_outcome):
        parallel = RateWorker([make_job()], max_workers=2).run()[0]
        assert parallel.success
        assert parallel.results[0].total_length == serial_outcome.results[0].total_length
        assert parallel.results[0].split == serial_outcome.results[0].split

    def test_background_thread(self):
        worker = RateWorker([make_job(channels=(get_channel("2M1"),), quad_points=1)])
        worker.start()
        assert worker.wait(timeout=600)
        assert len(worker.outcomes) == 1
        assert worker.outcomes[0].success

    def test_wait_without_start(self):
        assert RateWorker([]).wait()
