import json
import shutil
from pathlib import Path

import pytest

CONFIGS = Path(__file__).resolve().parents[3] / "configs"


@pytest.fixture()
def out_dir(tmp_path):
    return tmp_path / "out"


@pytest.fixture()
def shipped_config(tmp_path):
    def copy(name):
        target = tmp_path / name
        shutil.copy(CONFIGS / name, target)
        return str(target)
    return copy


@pytest.fixture()
def write_config(tmp_path):
    def write(doc, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return str(path)
    return write


@pytest.fixture()
def data_csv(tmp_path):
    path = tmp_path / "snapshot.csv"
    path.write_text(
        "time,event,arm\n"
        "1.0,1,0\n2.0,1,0\n4.0,1,0\n6.0,0,0\n"
        "1.5,1,1\n3.0,0,1\n5.0,1,1\n7.0,0,1\n"
    )
    return str(path)


@pytest.fixture()
def null_design():
    return {
        "arms": {"control": {"medians": [8]}, "experimental": {"medians": [8]}},
        "n_per_arm": 100,
        "recruitment": {"duration": 8},
        "test": {"scheme": "logrank"},
        "schedule": {"calendar_times": [21]},
        "spending": {"kind": "hsd", "gamma": -4},
    }
