import json

import pytest

from advice_exchange.cli import main
from advice_exchange.config import ConfigError, default_config, load_config, resolve
from advice_exchange.harness import (CSV_COLUMNS, OutputWriter, RunTrace, build_world, read_trace, run_experiment,
                                     run_standalone, write_outputs)


def small(**overrides):
    base = {"epochs": 8, "scenario": {"cycles_per_epoch": 3},
            "advice_params": {"ban_horizon": 2}}
    base.update(overrides)
    return resolve(base)


class TestConfig:
    def test_minimal(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"seed": 9}')
        cfg = load_config(p)
        assert cfg.seed == 9 and cfg.epochs == 1600 and cfg.scenario.cycles_per_epoch == 50
        assert cfg.agents == ["RW", "SA", "EA", "QL", "HEU"]
        assert cfg.advice_params == {"ban_horizon": 5, "discount": 0.8, "ql_reward": None}
        assert cfg.scenario.quality.lifemax == 300

    def test_desk_preset(self):
        cfg = default_config("desk")
        assert cfg.epochs == 100 and cfg.scenario.cycles_per_epoch == 10

    def test_preset_key_in_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"preset": "desk", "epochs": 150}')
        cfg = load_config(p)
        assert cfg.epochs == 150 and cfg.scenario.cycles_per_epoch == 10

    def test_bad_car_gen_names_key(self):
        with pytest.raises(ConfigError, match=r"scenario\.lanes\.E"):
            resolve({"scenario": {"lanes": {"E": {"min_prob": 0.3, "max_prob": 0.1}}}})

    @pytest.mark.parametrize("data, key", [
        ({"epochs": 0}, "epochs"),
        ({"agents": ["RW", "XX"]}, "agents"),
        ({"nope": 1}, "nope"),
        ({"scenario": {"yellow": 60}}, "scenario.yellow"),
        ({"learners": {"EA": {"partition": {"elite": 9}}}}, "learners.EA.partition"),
        ({"learners": {"QL": {"discount": 1.0}}}, "learners.QL.discount"),
        ({"learners": {"backprop": {"momentum": 1.0}}}, "learners.backprop"),
        ({"advice_params": {"discount": 1.5}}, "advice_params.discount"),
        ({"advice_params": {"ql_reward": 2.0}}, "advice_params.ql_reward"),
        ({"advice_params": {"ql_reward": True}}, "advice_params.ql_reward"),
        ({"scenario": {"quality": {"midpoint": 1.0}}}, "scenario.quality"),
    ])
    def test_range_violations(self, data, key):
        with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
            resolve(data)

    def test_parse_error(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{seed: ")
        with pytest.raises(ConfigError, match="parse"):
            load_config(p)

    def test_round_trip(self, tmp_path):
        cfg = resolve({"seed": 4, "scenario": {"lanes": {"N": {"max_prob": 0.25}}}})
        cfg.dump(tmp_path / "a.json")
        again = load_config(tmp_path / "a.json")
        assert again.raw == cfg.raw
        again.dump(tmp_path / "b.json")
        assert (tmp_path / "a.json").read_text() == (tmp_path / "b.json").read_text()

    def test_turn_arithmetic(self):
        cfg = default_config()
        sc = cfg.scenario
        assert cfg.epochs * sc.cycles_per_epoch * sc.cycle_length == 8_000_000


class TestRun:
    def test_deterministic(self):
        a, b = run_experiment(small()), run_experiment(small())
        assert a.rows == b.rows
        assert [e.to_dict() for e in a.events] == [e.to_dict() for e in b.events]

    def test_advice_off_matches_standalone(self):
        cfg = small(advice=False)
        together = run_experiment(cfg)
        for i in range(len(cfg.agents)):
            assert run_standalone(cfg, i).rows == together.for_agent(i)

    def test_advice_events_respect_protocol(self):
        cfg = small(epochs=12)
        trace = run_experiment(cfg)
        heu = cfg.agents.index("HEU")
        for e in trace.events:
            assert e.epoch >= 2
            assert heu not in (e.advisee, e.advisor)
            assert e.cycle >= 1
        requested = sum(r.advice_requested for r in trace.rows)
        given = sum(r.advice_given for r in trace.rows)
        assert requested == given == len(trace.events)

    def test_advisor_is_argmax_of_broadcast(self):
        cfg = small(epochs=12)
        trace = run_experiment(cfg)
        best_before = {}
        for r in trace.rows:
            best_before.setdefault(r.epoch + 1, {})[r.agent_id] = r.best_quality
        heu = cfg.agents.index("HEU")
        for e in trace.events:
            board = {k: v for k, v in best_before[e.epoch].items() if k not in (e.advisee, heu)}
            assert board[e.advisor] == max(board.values())

    def test_best_non_decreasing(self):
        trace = run_experiment(small(epochs=15))
        for i in range(5):
            best = [r.best_quality for r in trace.for_agent(i)]
            assert all(x <= y for x, y in zip(best, best[1:]))

    def test_on_cycle_hook(self):
        seen = []
        run_experiment(small(epochs=2), on_cycle=lambda ep, c, i, a: seen.append((ep, c, i)))
        assert len(seen) == 2 * 3 * 5
        assert seen[:5] == [(0, 0, i) for i in range(5)]

    def test_worlds_use_distinct_streams(self):
        cfg = small()
        assert build_world(cfg, 0).rng.random() != build_world(cfg, 1).rng.random()


class TestOutputs:
    def test_cardinality_and_round_trip(self, tmp_path):
        cfg = small(epochs=10)
        trace = run_experiment(cfg, out_dir=tmp_path)
        lines = (tmp_path / "trace.csv").read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert json.loads(lines[0][len("# config: "):])["seed"] == cfg.seed
        assert lines[1].split(",") == list(CSV_COLUMNS)
        assert len(lines) - 2 == 50
        assert read_trace(tmp_path / "trace.csv").rows == trace.rows
        events = (tmp_path / "advice_events.jsonl").read_text().splitlines()
        assert [json.loads(x) for x in events] == [e.to_dict() for e in trace.events]
        assert json.loads((tmp_path / "config.json").read_text()) == cfg.raw

    def test_write_outputs_matches_streaming(self, tmp_path):
        cfg = small()
        trace = run_experiment(cfg, out_dir=tmp_path / "a")
        write_outputs(trace, cfg, tmp_path / "b")
        for name in ("trace.csv", "advice_events.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_append_keeps_previous_rows(self, tmp_path):
        cfg = small()
        trace = run_experiment(cfg)
        first = RunTrace([r for r in trace.rows if r.epoch < 4])
        second = RunTrace([r for r in trace.rows if r.epoch >= 4])
        write_outputs(first, cfg, tmp_path)
        snapshot = (tmp_path / "trace.csv").read_text()
        write_outputs(second, cfg, tmp_path)
        text = (tmp_path / "trace.csv").read_text()
        assert text.startswith(snapshot)
        assert text.count("# config") == 1
        assert read_trace(tmp_path / "trace.csv").rows == trace.rows

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            OutputWriter(blocker / "sub", small())


class TestCli:
    def test_run(self, tmp_path, capsys):
        code = main(["run", "--desk", "--epochs", "3", "--seed", "2", "--advice", "off", "--out", str(tmp_path)])
        assert code == 0
        assert len(read_trace(tmp_path / "trace.csv").rows) == 15
        assert "advice=off seed=2" in capsys.readouterr().out

    def test_paired(self, tmp_path):
        assert main(["paired", "--desk", "--epochs", "2", "--out", str(tmp_path)]) == 0
        assert (tmp_path / "advice" / "trace.csv").exists()
        assert (tmp_path / "standalone" / "trace.csv").exists()

    def test_validation_failure(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"scenario": {"lanes": {"N": {"min_prob": 0.5, "max_prob": 0.2}}}}')
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "scenario.lanes.N" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "none.json")]) != 0
