import csv
import json
import xml.etree.ElementTree as ET

import pytest

from platoonsim.cli import main
from platoonsim.errors import ConfigError
from platoonsim.io import config_from_dict, config_to_dict, load_config

TRACE_HEADER = "t,vehicle_id,x,y,theta,v,a,omega,delta,e_long,e_lat"
CAM_HEADER = "tx_time,rx_time,station_id,seq,speed_q,heading_q,accel_q,yawrate_q,dropped"


@pytest.fixture
def cfg_file(tmp_path):
    def write(data, name="scenario.json"):
        p = tmp_path / name
        p.write_text(json.dumps(data, indent=2) + "\n")
        return p
    return write


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    def test_defaults_follow_theoretical_preset(self):
        cfg = config_from_dict({})
        c = cfg.controller[0]
        assert (cfg.n_vehicles, cfg.dt, cfg.plant, cfg.channel) == (4, 0.01, "unicycle", "ideal")
        assert (c.gains.k_long, c.gains.k_lat, c.policy.r, c.policy.h) == (3.5, 3.5, 1.0, 0.2)
        assert not cfg.noise.enabled

    def test_realistic_preset(self):
        cfg = config_from_dict({"preset": "realistic"})
        c = cfg.controller[0]
        assert (cfg.plant, cfg.channel, cfg.noise.enabled) == ("bicycle", "itsg5", True)
        assert (c.gains.k_long, c.policy.h) == (1.0, 1.0)

    def test_round_trip(self):
        cfg = config_from_dict({"preset": "realistic", "seed": 4, "duration": 20})
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_profile_and_per_vehicle_controller(self):
        cfg = config_from_dict({
            "n_vehicles": 3,
            "controller": [{"k_long": 2.0}, {"k_long": 1.0, "h": 0.5}],
            "leader_profile": {"segments": [[5, 1.0], {"duration": 5, "target_v": 2.0, "yaw_rate": 0.1}],
                               "ramp_time": 1.0},
        })
        assert [c.gains.k_long for c in cfg.controller] == [2.0, 1.0]
        assert cfg.leader_profile(7.0) == (2.0, 0.1)

    @pytest.mark.parametrize("data,path", [
        ({"n_vehicles": 1}, "n_vehicles"),
        ({"dt": -1}, "dt"),
        ({"controller": {"k_lat": 0}}, "controller"),
        ({"channel_model": {"loss_prob": 2}}, "channel_model"),
        ({"bogus": 1}, "bogus"),
        ({"noise": {"enabled": "yes"}}, "noise.enabled"),
    ])
    def test_validation_paths(self, data, path):
        with pytest.raises(ConfigError) as exc:
            config_from_dict(data)
        assert str(exc.value).startswith(path)

    def test_line_referenced_message(self, cfg_file):
        p = cfg_file({"duration": 10, "n_vehicles": 1})
        with pytest.raises(ConfigError, match=r"scenario\.json:3: n_vehicles: .*n_vehicles ≥ 2"):
            load_config(p)

    def test_seed_override_reaches_channel(self, cfg_file):
        p = cfg_file({"channel_model": {"rng_seed": 1}})
        assert load_config(p, {"seed": 9}).channel_model.rng_seed == 9


class TestCli:
    def test_run(self, cfg_file, tmp_path, capsys):
        p = cfg_file({"duration": 5})
        out = tmp_path / "out"
        assert main(["run", "--config", str(p), "--out", str(out)]) == 0
        names = {f.name for f in out.iterdir()}
        assert {"trace.csv", "cam_log.csv", "metrics.json", "received_signal.csv"} <= names
        assert (out / "trace.csv").read_text().splitlines()[0] == TRACE_HEADER
        assert (out / "cam_log.csv").read_text().splitlines()[0] == CAM_HEADER
        assert len(_rows(out / "trace.csv")) == 1 + 4 * 500

    def test_cam_log_rows(self, cfg_file, tmp_path):
        p = cfg_file({"duration": 5, "channel": "itsg5", "channel_model": {"loss_prob": 0.3}})
        out = tmp_path / "out"
        assert main(["run", "--config", str(p), "--out", str(out)]) == 0
        rows = _rows(out / "cam_log.csv")[1:]
        assert rows
        for r in rows:
            dropped = r[8] == "1"
            assert (r[1] == "") == dropped
        assert any(r[8] == "1" for r in rows) and any(r[8] == "0" for r in rows)

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")]) == 2

    def test_invalid_config(self, cfg_file, tmp_path, capsys):
        p = cfg_file({"n_vehicles": 1})
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
        assert "n_vehicles ≥ 2" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{\n  \"duration\": ,\n}\n")
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2

    def test_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main(["fly"])
        assert exc.value.code == 2

    def test_runtime_failure(self, cfg_file, tmp_path, monkeypatch):
        import platoonsim.scenario as scenario

        def boom(cfg):
            raise RuntimeError("disk on fire")

        monkeypatch.setattr(scenario, "run_scenario", boom)
        p = cfg_file({"duration": 1})
        assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 1

    def test_overrides(self, cfg_file, tmp_path):
        p = cfg_file({"duration": 2})
        out = tmp_path / "o"
        assert main(["run", "--config", str(p), "--out", str(out), "--channel", "itsg5", "--seed", "3"]) == 0
        assert len(_rows(out / "cam_log.csv")) > 1

    def test_compare_and_plot(self, cfg_file, tmp_path):
        p = cfg_file({"duration": 5})
        out = tmp_path / "cmp"
        assert main(["compare", "--config", str(p), "--out", str(out)]) == 0
        for sub in ("ideal", "itsg5"):
            assert (out / sub / "trace.csv").exists() and (out / sub / "metrics.json").exists()
        labels = {r[3] for r in _rows(out / "received_signal.csv")[1:]}
        assert labels == {"ideal", "itsg5"}
        first = (out / "ideal" / "trace.csv").read_bytes()

        out2 = tmp_path / "cmp2"
        assert main(["compare", "--config", str(p), "--out", str(out2)]) == 0
        assert (out2 / "ideal" / "trace.csv").read_bytes() == first

        assert main(["plot", "--out", str(out)]) == 0
        for svg in (out / "received_signal.svg", out / "ideal" / "velocity.svg", out / "itsg5" / "trajectory.svg"):
            assert ET.parse(svg).getroot().tag.endswith("svg")

    def test_plot_after_run(self, cfg_file, tmp_path):
        p = cfg_file({"duration": 3})
        out = tmp_path / "run"
        main(["run", "--config", str(p), "--out", str(out)])
        assert main(["plot", "--out", str(out)]) == 0
        for name in ("velocity.svg", "trajectory.svg"):
            assert ET.parse(out / name).getroot().tag.endswith("svg")
        first = (out / "velocity.svg").read_bytes()
        assert main(["plot", "--out", str(out)]) == 0
        assert (out / "velocity.svg").read_bytes() == first

    def test_plot_empty_or_missing(self, tmp_path):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["plot", "--out", str(empty)]) == 2
        (empty / "trace.csv").write_text(TRACE_HEADER + "\n")
        assert main(["plot", "--out", str(empty)]) == 2
        assert main(["plot", "--out", str(tmp_path / "missing")]) == 2

    def test_outputs_stay_under_out_dir(self, cfg_file, tmp_path, monkeypatch):
        work = tmp_path / "cwd"
        work.mkdir()
        monkeypatch.chdir(work)
        p = cfg_file({"duration": 2})
        before = set(tmp_path.rglob("*"))
        out = tmp_path / "o"
        assert main(["run", "--config", str(p), "--out", str(out)]) == 0
        assert main(["plot", "--out", str(out)]) == 0
        new = set(tmp_path.rglob("*")) - before
        assert new and all(out == f or out in f.parents for f in new)
