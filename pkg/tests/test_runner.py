"""Tests for the batch runner."""

import json

import pytest

from flagcheck.checks import RELATIONS, CheckResult, run_property
from flagcheck.config import RunConfig
from flagcheck.errors import FormatError
from flagcheck.formats import write_qstate
from flagcheck.measures import get_measure
from flagcheck.qstate import plus_state, rng_for
from flagcheck.runner import SweepRunner, is_unexpected, make_instance


def _config(**kwargs) -> RunConfig:
    config = RunConfig(measures=["c_l1"], properties=["flag_additivity"], trials=2, nmax=2)
    for key, value in kwargs.items():
        setattr(config, key, value)
    return config


def _result(measure: str, prop: str, verdict: str) -> CheckResult:
    return CheckResult(measure, prop, 1.0, 0.5, 0.5, 1e-9, verdict, "0" * 16)


class TestMakeInstance:
    """Random instance parts per property."""

    @pytest.mark.parametrize("prop", sorted(RELATIONS))
    def test_every_property_runs(self, prop):
        """Each property gets parts its checker accepts."""
        desc = get_measure("c_l1")
        parts = make_instance(desc, prop, 2, rng_for(0, 1), _config())
        result = run_property(desc, prop, parts)
        assert result.verdict in ("holds", "violated", "inconclusive")
        assert result.property == prop

    def test_unknown_property(self):
        """Unknown properties raise FormatError."""
        with pytest.raises(FormatError):
            make_instance(get_measure("c_l1"), "triangle", 2, rng_for(0), _config())

    def test_entanglement_parts(self):
        """Entanglement instances live on d ⊗ d."""
        parts = make_instance(get_measure("negativity"), "strong_mono", 2, rng_for(3), _config())
        assert parts["state"].dims == (2, 2)


class TestSweep:
    """Property sweeps over the job grid."""

    def test_jobs_grid(self):
        """measures × properties × dims × trials jobs, indexed in order."""
        config = _config(measures=["c_l1", "c_rel_ent"], properties=["flag_sup", "convexity"], dims=[2, 3], trials=3)
        jobs = SweepRunner(config, threads=1).jobs()
        assert len(jobs) == 24
        assert [j[0] for j in jobs] == list(range(24))
        assert jobs[0] == (0, "c_l1", "flag_sup", 2)

    def test_check_results(self):
        """Flag-additive measures hold on random instances."""
        results = SweepRunner(_config(properties=["flag_additivity", "convexity"]), threads=1).check()
        assert [r.index for r in results] == [0, 1, 2, 3]
        assert all(r.verdict == "holds" for r in results)
        assert not any(is_unexpected(r) for r in results)

    def test_threads_do_not_change_output(self):
        """A threaded sweep matches the sequential one."""
        config = _config(measures=["c_l1", "c_rel_ent"], properties=["flag_sup", "convexity"], trials=3)
        seq = SweepRunner(config, threads=1).check()
        par = SweepRunner(config, threads=3).check()
        assert [r.to_dict(include_instance=False) for r in seq] == [r.to_dict(include_instance=False) for r in par]
        assert [r.instance_digest for r in seq] == [r.instance_digest for r in par]

    def test_seed_changes_instances(self):
        """Different master seeds give different instances."""
        a = SweepRunner(_config(master_seed=1), threads=1).check()
        b = SweepRunner(_config(master_seed=2), threads=1).check()
        assert a[0].instance_digest != b[0].instance_digest

    def test_results_record_dimension(self):
        """Each sweep result carries the local dimension of its cell."""
        results = SweepRunner(_config(dims=[2, 3], trials=1), threads=1).check()
        assert [r.details["d"] for r in results] == [2, 3]

    def test_progress_events(self):
        """Start, one event per instance, then completion."""
        events = []
        SweepRunner(_config(), on_progress=events.append, threads=1).check()
        kinds = [e["type"] for e in events]
        assert kinds == ["sweep_start", "instance_done", "instance_done", "sweep_complete"]
        assert events[0]["total"] == 2

    def test_progress_errors_are_swallowed(self):
        """A failing callback does not stop the sweep."""

        def broken(event):
            raise ValueError("no display")

        assert len(SweepRunner(_config(), on_progress=broken, threads=1).check()) == 2


class TestUnexpected:
    """Which violations count as unexpected."""

    def test_flag_additive_measure(self):
        """c_l1 violating flag_sup is unexpected."""
        assert is_unexpected(_result("c_l1", "flag_sup", "violated"))

    def test_not_flag_additive_measure(self):
        """c_tr may violate flag_sup."""
        assert not is_unexpected(_result("c_tr", "flag_sup", "violated"))

    def test_property_not_implied(self):
        """c_l1 failing two-copy additivity is expected."""
        assert not is_unexpected(_result("c_l1", "two_copy", "violated"))

    def test_holds(self):
        """Holding results are never unexpected."""
        assert not is_unexpected(_result("c_l1", "flag_sup", "holds"))


class TestRegularize:
    """Regularization tables and sandwich checks."""

    def test_tables(self):
        """One table per trial with nmax rows."""
        tables, sandwiches = SweepRunner(_config(command="regularize", nmax=3), threads=1).regularize()
        assert len(tables) == 2
        assert [row["N"] for row in tables[0]["rows"]] == [1, 2, 3]
        assert tables[0]["measure_id"] == "c_l1"
        assert tables[0]["state"].startswith("qstate 1")
        assert sandwiches == []

    def test_state_file(self, tmp_path):
        """A state file replaces the random states."""
        path = tmp_path / "plus.qstate"
        write_qstate(str(path), plus_state())
        tables, _ = SweepRunner(_config(command="regularize", nmax=3, state_path=str(path)), threads=1).regularize()
        assert len(tables) == 1
        per_copy = [row["per_copy"] for row in tables[0]["rows"]]
        assert per_copy == pytest.approx([1.0, 1.5, 7 / 3])
        assert tables[0]["trend"] == "increasing"

    def test_sandwich(self):
        """sandwich adds one check per table."""
        tables, sandwiches = SweepRunner(_config(command="regularize", sandwich=True), threads=1).regularize()
        assert len(sandwiches) == len(tables) == 2
        assert all(s.property == "sandwich" for s in sandwiches)

    def test_row_events(self):
        """Each row is reported as it is computed."""
        events = []
        SweepRunner(_config(command="regularize", trials=1), on_progress=events.append, threads=1).regularize()
        assert [e["N"] for e in events if e["type"] == "regularize_row"] == [1, 2]


class TestWitness:
    """Replaying stored search witnesses."""

    def test_malformed_json(self, tmp_path):
        """Unparsable witness files raise FormatError."""
        path = tmp_path / "w.json"
        path.write_text("{not json")
        with pytest.raises(FormatError):
            SweepRunner(_config(), threads=1).replay_witness(str(path))

    def test_missing_keys(self, tmp_path):
        """Witnesses without an instance raise FormatError."""
        path = tmp_path / "w.json"
        path.write_text('{"measure_id": "c_l1"}')
        with pytest.raises(FormatError):
            SweepRunner(_config(), threads=1).replay_witness(str(path))

    def test_replay_search_witness(self, tmp_path):
        """A search outcome replays to the same verdict."""
        config = _config(command="search", properties=["two_copy"], budget=20, master_seed=5)
        outcome = SweepRunner(config, threads=1).search()
        path = tmp_path / "w.json"
        path.write_text(json.dumps(outcome))
        result = SweepRunner(config, threads=1).replay_witness(str(path))
        assert result.property == "two_copy"
        assert result.verdict == outcome["verdict"]
