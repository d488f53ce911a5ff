import json
from dataclasses import replace

import pytest

from swapinject.errors import ScenarioError
from swapinject.experiments import (
    AttackSpec,
    DefenseSpec,
    Scenario,
    SweepReport,
    VictimSpec,
    aggregate,
    density_ladder,
    run_allocation_sweep,
    run_complexity_sweep,
    run_end_to_end,
)
from swapinject.experiments import run_size_sweep
from swapinject.hardware import allocation_density, grid20, is_connected_subset, line5
from swapinject.routing import swap_overhead

SMALL = Scenario(coupling="grid20", victim=VictimSpec(6, 60, 0.5), seeds=tuple(range(4)))


class TestScenario:
    def test_defaults_and_range(self):
        s = Scenario.from_dict({"seeds": {"start": 3, "stop": 6}})
        assert s.seeds == (3, 4, 5) and s.coupling == "grid20" and s.routing_scope == "device"

    def test_explicit_seed_list(self):
        assert Scenario.from_dict({"seeds": [0, 100]}).seeds == (0, 100)

    @pytest.mark.parametrize("bad", [
        {"seeds": []},
        {"gate_menu": []},
        {"gate_menu": [300, 50]},
        {"routing_scope": "everywhere"},
        {"qubit_range": [5, 4]},
        {"victim": {"qubitz": 3}},
        {"allocations": [[0, 1, 2, 3, 4, 5]]},
    ])
    def test_validation(self, bad):
        with pytest.raises(ScenarioError):
            Scenario.from_dict(bad)

    def test_unreadable_file(self, tmp_path):
        (tmp_path / "s.json").write_text("{not json")
        with pytest.raises(ScenarioError):
            Scenario.load(tmp_path / "s.json")

    def test_unknown_coupling(self):
        with pytest.raises(ScenarioError):
            Scenario(coupling="nope").hardware()

    def test_shipped_scenarios_load(self):
        from pathlib import Path
        for path in sorted(Path(__file__).parent.parent.joinpath("scenarios").glob("*.json")):
            Scenario.load(path)


class TestLadder:
    def test_ordered_sparse_to_dense(self):
        ladder = density_ladder(grid20(), 6, 5)
        dens = [allocation_density(grid20(), a) for a in ladder]
        assert dens == sorted(dens) and dens[-1] == 7 and dens[0] == 5
        assert all(is_connected_subset(grid20(), a) for a in ladder)

    def test_whole_device_single_config(self):
        assert density_ladder(line5(), 5, 5) == [(0, 1, 2, 3, 4)]


class TestAllocationSweep:
    def test_identical_configs_zero(self):
        s = replace(SMALL, allocations=((1, 2, 3, 6, 7, 8),) * 2)
        rep = run_allocation_sweep(s)
        assert [r.overhead_pct for r in rep.rows] == [0.0] * 4

    def test_single_seed_aggregate_equals_row(self):
        rep = run_allocation_sweep(replace(SMALL, seeds=(7,), allocations=((14, 15, 16, 17, 18, 19), (1, 2, 3, 6, 7, 8))))
        (row,), (agg,) = rep.rows, rep.aggregates
        assert agg.n == 1 and agg.overhead_mean == agg.overhead_median == agg.overhead_max == row.overhead_pct
        assert agg.swaps_added_max == row.swaps_added

    def test_disconnected_config_rejected(self):
        s = replace(SMALL, allocations=((0, 1, 2, 3, 4, 19), (1, 2, 3, 6, 7, 8)))
        with pytest.raises(ScenarioError):
            run_allocation_sweep(s)

    def test_undersized_config_rejected(self):
        with pytest.raises(ScenarioError):
            run_allocation_sweep(replace(SMALL, allocations=((0, 1, 2), (1, 2, 3, 6, 7, 8))))

    def test_rows_consistent(self):
        rep = run_allocation_sweep(SMALL)
        assert rep.is_consistent()
        assert [(r.cell, r.seed) for r in rep.rows] == sorted((r.cell, r.seed) for r in rep.rows)
        assert {r.cell for r in rep.rows} == {"config1", "config2", "config3", "config4"}
        for r in rep.rows:
            assert r.overhead_pct == swap_overhead(r.cnot_test, r.cnot_baseline)
            assert r.swaps_added == r.swaps_test - r.swaps_baseline

    def test_allocation_scope(self):
        rep = run_allocation_sweep(replace(SMALL, routing_scope="allocation"))
        assert rep.is_consistent() and len(rep.rows) == 16


class TestComplexitySweep:
    def test_single_cell(self):
        rep = run_complexity_sweep(replace(SMALL, gate_menu=(50,)))
        assert [a.cell for a in rep.aggregates] == ["gates=50"]

    def test_no_two_qubit_gates(self):
        rep = run_complexity_sweep(replace(SMALL, victim=VictimSpec(6, 60, 0.0), gate_menu=(20, 40)))
        assert all(r.overhead_pct == 0.0 and r.cnot_baseline == 0 for r in rep.rows)

    def test_cells_follow_menu(self):
        rep = run_complexity_sweep(replace(SMALL, gate_menu=(30, 60, 90)))
        assert [a.cell for a in rep.aggregates] == ["gates=30", "gates=60", "gates=90"]
        assert all(r.num_gates == int(r.cell.split("=")[1]) for r in rep.rows)


class TestSizeSweep:
    def test_whole_device_zero_gap(self):
        s = Scenario(coupling="line5", victim=VictimSpec(5, 30, 0.5), seeds=(0, 1, 2), qubit_range=(5, 5))
        rep = run_size_sweep(s)
        assert rep.configs["qubits=5:densest"] == rep.configs["qubits=5:sparsest"]
        assert all(r.overhead_pct == 0.0 for r in rep.rows)

    def test_single_size(self):
        rep = run_size_sweep(replace(SMALL, qubit_range=(4, 4)))
        assert [a.cell for a in rep.aggregates] == ["qubits=4"]

    def test_range_beyond_hardware(self):
        with pytest.raises(ScenarioError):
            run_size_sweep(Scenario(coupling="line5", qubit_range=(4, 6)))


class TestEndToEnd:
    BASE = Scenario(coupling="grid20", victim=VictimSpec(6, 100, 0.5), seeds=tuple(range(5)),
                    attack=AttackSpec(2, 3, (36, 44, 52)), defense=DefenseSpec(nu=0.05))

    def test_no_adversary(self):
        rep = run_end_to_end(replace(self.BASE, attack=None))
        assert rep.pre == rep.post == [0.0] * 5 and rep.detection is None

    def test_defense_disabled(self):
        rep = run_end_to_end(replace(self.BASE, defense=DefenseSpec(enabled=False)))
        assert rep.post == rep.pre

    def test_attack_detected_and_neutralised(self):
        rep = run_end_to_end(self.BASE)
        assert sorted(rep.pre)[2] > 0
        assert rep.detection.attackers_flagged == rep.detection.attackers
        assert rep.post == [0.0] * 5

    def test_deprioritize_policy_runs(self):
        rep = run_end_to_end(replace(self.BASE, defense=DefenseSpec(nu=0.05, policy="deprioritize")))
        assert len(rep.rows) == 5


class TestReportFiles:
    def test_write_and_load(self, tmp_path):
        rep = run_allocation_sweep(SMALL)
        rep.write(tmp_path)
        loaded = SweepReport.load(tmp_path)
        assert loaded.rows == rep.rows and loaded.aggregates == rep.aggregates

    def test_tampered_aggregates_detected(self, tmp_path):
        run_allocation_sweep(SMALL).write(tmp_path)
        agg = (tmp_path / "aggregates.csv").read_text().splitlines()
        fields = agg[1].split(",")
        fields[2] = "99.0"
        agg[1] = ",".join(fields)
        (tmp_path / "aggregates.csv").write_text("\n".join(agg) + "\n")
        with pytest.raises(ValueError):
            SweepReport.load(tmp_path)

    def test_csv_header(self):
        header = run_allocation_sweep(replace(SMALL, seeds=(0,))).rows_csv().splitlines()[0]
        assert header == ("cell,seed,num_qubits,num_gates,allocation,baseline_allocation,cnot_baseline,"
                          "cnot_test,swaps_baseline,swaps_test,swaps_added,overhead_pct")

    def test_workers_do_not_change_output(self, monkeypatch):
        serial = run_allocation_sweep(SMALL).rows_csv()
        monkeypatch.setenv("SWAPINJECT_WORKERS", "3")
        assert run_allocation_sweep(SMALL).rows_csv() == serial

    def test_e2e_files(self, tmp_path):
        rep = run_end_to_end(replace(TestEndToEnd.BASE, seeds=(0, 1)))
        rep.write(tmp_path)
        assert (tmp_path / "e2e.csv").read_text() == rep.rows_csv()
        assert json.loads((tmp_path / "summary.json").read_text())["seeds"] == 2


def test_aggregate_recomputes():
    rep = run_allocation_sweep(SMALL)
    assert aggregate(rep.rows) == rep.aggregates
