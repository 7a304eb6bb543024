import importlib

from gswlr import default_values


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("GSWLR_SEED", "7")
    monkeypatch.setenv("GSWLR_DEBUG", "true")
    monkeypatch.setenv("GSWLR_PROB_TOL", "not-a-number")
    try:
        values = importlib.reload(default_values).DEFAULT_ARGUMENTS
        assert values["SEED"] == 7
        assert values["DEBUG"] is True
        assert values["PROB_TOL"] == 1e-8
    finally:
        monkeypatch.undo()
        importlib.reload(default_values)


def test_defaults():
    values = default_values.DEFAULT_ARGUMENTS

    assert values["REPLICATES"] == 10000
    assert values["GRID_POINTS"] == 2001
    assert values["SIM_GRID_POINTS"] == 201
    assert values["OUT_DIR"] == "."
