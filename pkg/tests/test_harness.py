import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from endheat import cli
from endheat.config import GeometricGrid, config_from_mapping, load_config, parse_config, parse_text
from endheat.errors import ConfigError, LengthMismatchError, NonPositiveError
from endheat.harness import (
    OUTPUT_ENV,
    builtin_scenarios,
    get_scenario,
    ratio_fit,
    read_csv,
    resolve_output_dir,
    run_scenario,
    validate_csv,
    write_csv,
)
from endheat.volume_models import EuclideanPlaneProfile, OscillatingProfile, ScheduleMode

# a cheap run: one short p_oo sweep on a small mesh
QUICK = ["tasks=p_oo", "mesh.r_max=1000", "mesh.nodes_per_decade=32", "grid.t.max=1e4", "grid.t.per_decade=2"]

BASE = """
scenario = demo
end.1.kind = powerlog
end.1.alpha = 3
end.2.kind = powerlog
end.2.alpha = 3
mesh.r_max = 1000
grid.t.min = 100
grid.t.max = 1e4
tasks = p_oo
"""


def _quick_overrides():
    return dict(s.split("=", 1) for s in QUICK)


# ratio bands


def test_ratio_fit_identical():
    b = ratio_fit([1.0, 2.0, 3.0], [1.0, 2.0, 3.0])
    assert b.spread == 1.0 and b.min_ratio == b.max_ratio == 1.0


def test_ratio_fit_half():
    b = ratio_fit([1.0, 2.0], [2.0, 4.0])
    assert b.min_ratio == b.max_ratio == 0.5


@given(st.lists(st.floats(1e-6, 1e6), min_size=1, max_size=20), st.floats(1e-3, 1e3))
def test_ratio_fit_scale_invariant(xs, c):
    b = ratio_fit(np.array(xs) * c, xs)
    assert b.spread == pytest.approx(1.0)
    assert b.min_ratio == pytest.approx(c)


def test_ratio_fit_errors():
    with pytest.raises(LengthMismatchError):
        ratio_fit([1.0, 2.0], [1.0])
    with pytest.raises(LengthMismatchError):
        ratio_fit([], [])
    with pytest.raises(NonPositiveError):
        ratio_fit([1.0, 0.0], [1.0, 1.0])


def test_band_verdict():
    assert ratio_fit([1.0, 3.0], [1.0, 1.0], "q", 3.0).passed is True
    assert ratio_fit([1.0, 3.0], [1.0, 1.0], "q", 2.9).passed is False
    assert ratio_fit([1.0, 3.0], [1.0, 1.0], "q").passed is None


# config


def test_parse_text_comments_and_overrides():
    raw = parse_text("# c\na = 1\n\na = 2  # later wins\nb.c = x y\nd = x#1\n")
    assert raw == {"a": "2", "b.c": "x y", "d": "x#1"}


def test_config_roundtrip(tmp_path):
    path = tmp_path / "demo.cfg"
    path.write_text(BASE)
    cfg = load_config(path)
    assert cfg.scenario == "demo" and cfg.spec.k == 2
    assert cfg.r_max == pytest.approx(1000)
    assert cfg.t_grid == GeometricGrid(100.0, 1e4, 4)
    assert len(cfg.t_grid.values()) == 9


@pytest.mark.parametrize(
    "override,path",
    [
        ({"grid.t.min": "1e4", "grid.t.max": "1e4"}, "grid.t"),
        ({"grid.t.min": "x"}, "grid.t.min"),
        ({"end.1.kind": "sphere"}, "end.1.kind"),
        ({"tasks": "p_oo, teleport"}, "tasks"),
        ({"mesh.nodes_per_decade": "8"}, "mesh.nodes_per_decade"),
        ({"grid.t.max": "1e6"}, "grid.t.max"),
        ({"band.p_oo.max_spread": "0.5"}, "band.p_oo.max_spread"),
        ({"solver.fraction": "0.9"}, "solver.fraction"),
        ({"end.3.kind": "m1"}, "end"),
    ],
)
def test_config_errors_name_the_key(override, path):
    raw = {**parse_text(BASE), **override}
    if override.get("end.3.kind"):
        raw.pop("end.3.kind")
        raw["end.4.kind"] = "m1"
    with pytest.raises(ConfigError) as info:
        config_from_mapping(raw)
    assert info.value.code == "CONFIG_INVALID"
    assert info.value.path == path


def test_missing_t_grid_is_invalid():
    raw = {k: v for k, v in parse_text(BASE).items() if not k.startswith("grid.t")}
    with pytest.raises(ConfigError) as info:
        config_from_mapping(raw)
    assert info.value.code == "CONFIG_INVALID"


def test_unreadable_config(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")


def test_auto_radius_follows_schedule():
    cfg = get_scenario("osc_example1").config()
    s = cfg.spec.profiles[1].schedule
    assert cfg.log_r_max == pytest.approx(s.log_a()[3] + math.log(4))


# CSV


def test_csv_roundtrip_seventeen_digits(tmp_path):
    rng = np.random.default_rng(3)
    x = np.sort(rng.uniform(1, 10, 20))
    y = rng.uniform(1e-300, 1e300, 20) * rng.uniform(0.5, 1.5, 20)
    write_csv(tmp_path / "a.csv", "t", x, {"p_oo:numeric": y})
    header, data = read_csv(tmp_path / "a.csv")
    assert header == ["t", "p_oo:numeric"]
    assert np.array_equal(data[:, 0], x) and np.array_equal(data[:, 1], y)
    assert validate_csv(tmp_path / "a.csv") == []


def test_csv_schema_checks(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", "x", [1.0], {"p:q": [1.0]})
    with pytest.raises(ValueError):
        write_csv(tmp_path / "a.csv", "t", [1.0], {"no_colon": [1.0]})
    with pytest.raises(LengthMismatchError):
        write_csv(tmp_path / "a.csv", "t", [1.0, 2.0], {"p:q": [1.0]})
    (tmp_path / "b.csv").write_text("t,p:q\n2,1\n1,-1\n")
    assert len(validate_csv(tmp_path / "b.csv")) == 2


# scenarios


def test_builtin_catalogue():
    names = [s.name for s in builtin_scenarios()]
    assert len(names) >= 7 and len(set(names)) == len(names)
    for want in ("rn_sum_2", "rn_sum_3", "rn_sum_4", "parabolic_lex", "osc_example1", "osc_example2",
                 "liouville_r3", "bottleneck_3", "poincare_table"):
        assert want in names
    for s in builtin_scenarios():
        s.config()


def test_osc_example1_ends():
    spec = get_scenario("osc_example1").config().spec
    plane, osc = spec.profiles
    assert isinstance(plane, EuclideanPlaneProfile) and isinstance(osc, OscillatingProfile)
    s = osc.schedule
    assert (s.alpha, s.beta, s.mode) == (4, 1, ScheduleMode.EXAMPLE1)


def test_unknown_scenario():
    with pytest.raises(KeyError):
        get_scenario("nope")


def test_rn_sum_3_quick_run(tmp_path):
    cfg = get_scenario("rn_sum_3").config(_quick_overrides())
    rep = run_scenario(cfg, tmp_path)
    assert rep.passed
    header, data = read_csv(tmp_path / "rn_sum_3" / "p_oo.csv")
    assert header == ["t", "p_oo:numeric", "p_oo:smallest_end", "p_oo:min_min"]
    summary = json.loads((tmp_path / "rn_sum_3" / "summary.json").read_text())
    assert summary["scenario"] == "rn_sum_3" and summary["bands"][0]["quantity"] == "p_oo"


def test_reruns_are_bit_identical(tmp_path):
    cfg = get_scenario("rn_sum_3").config(_quick_overrides())
    run_scenario(cfg, tmp_path / "a")
    run_scenario(cfg, tmp_path / "b")
    for name in ("p_oo.csv", "summary.json"):
        assert (tmp_path / "a" / "rn_sum_3" / name).read_bytes() == (tmp_path / "b" / "rn_sum_3" / name).read_bytes()


def test_osc_example1_writes_both_candidates(tmp_path):
    cfg = get_scenario("osc_example1").config({"tasks": "osc_gap", "grid.t.periods": "2", "mesh.nodes_per_decade": "16"})
    rep = run_scenario(cfg, tmp_path)
    header, _ = read_csv(tmp_path / "osc_example1" / "osc_gap.csv")
    assert {"p_oo:min_min", "p_oo:cand_loglog", "p_oo:cand_log"} <= set(header)
    # candidate quotients are recorded, never judged
    assert rep.band("osc_cand_loglog").passed is None
    assert rep.band("osc_cand_log").passed is None


def test_output_dir_from_environment(tmp_path, monkeypatch):
    cfg = get_scenario("rn_sum_3").config()
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert resolve_output_dir(cfg) == tmp_path / "env" / "rn_sum_3"
    assert resolve_output_dir(cfg, tmp_path / "cli") == tmp_path / "cli" / "rn_sum_3"
    monkeypatch.delenv(OUTPUT_ENV)
    assert resolve_output_dir(cfg).name == "rn_sum_3"


# CLI


def _run_cli(tmp_path, *extra):
    args = ["simulate", "--scenario", "rn_sum_3", "--output-dir", str(tmp_path)]
    for s in QUICK:
        args += ["--set", s]
    return cli.main(args + list(extra))


def test_cli_exit_ok(tmp_path, capsys):
    assert _run_cli(tmp_path) == 0
    assert "[PASS] rn_sum_3" in capsys.readouterr().out


def test_cli_exit_band_violation(tmp_path, capsys):
    assert _run_cli(tmp_path, "--set", "band.p_oo.max_spread=1.0001") == 1
    assert "VIOLATED" in capsys.readouterr().out


def test_cli_exit_config_error(tmp_path, capsys):
    assert _run_cli(tmp_path, "--set", "grid.t.min=1e5") == 2
    assert "CONFIG_INVALID" in capsys.readouterr().err


def test_cli_unknown_scenario(tmp_path):
    assert cli.main(["simulate", "--scenario", "nope", "--output-dir", str(tmp_path)]) == 2


def test_cli_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path))
    args = ["simulate", "--scenario", "rn_sum_3"]
    for s in QUICK:
        args += ["--set", s]
    assert cli.main(args) == 0
    assert (tmp_path / "rn_sum_3" / "summary.json").exists()


def test_cli_report_rereads_summary(tmp_path, capsys):
    _run_cli(tmp_path)
    capsys.readouterr()
    assert cli.main(["report", "--validate", str(tmp_path / "rn_sum_3")]) == 0
    assert "band p_oo" in capsys.readouterr().out


def test_cli_list_scenarios(capsys):
    assert cli.main(["list-scenarios"]) == 0
    out = capsys.readouterr().out
    assert len(out.strip().splitlines()) == len(builtin_scenarios())


def test_cli_schedule_verify(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["schedule", "--verify", "--output", str(out)]) == 0
    header, data = read_csv(out)
    assert header[0] == "n" and len(data) == 8


def test_cli_envelope(tmp_path):
    assert cli.main(["envelope", "--scenario", "parabolic_lex", "--output-dir", str(tmp_path)]) == 0
    header, _ = read_csv(tmp_path / "parabolic_lex" / "envelope_p_oo.csv")
    assert "p_oo:largest_end" in header


def test_cli_config_file(tmp_path):
    path = tmp_path / "demo.cfg"
    path.write_text(BASE)
    assert cli.main(["simulate", "--config", str(path), "--output-dir", str(tmp_path)]) == 0
    assert validate_csv(tmp_path / "demo" / "p_oo.csv") == []


def test_parse_config_overrides_win():
    cfg = parse_config(BASE, {"mesh.r_max": "2000"})
    assert cfg.r_max == pytest.approx(2000)
