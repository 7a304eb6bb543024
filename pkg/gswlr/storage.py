import json
import logging
import os
from io import StringIO

import numpy as np
import pandas as pd

from gswlr.counting import Cohort
from gswlr.errors import DataError, StateError
from gswlr.gs_core import GsState

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ("time", "event", "arm")
STATE_VERSION = 1

class Storage:
    def exists(self, name):
        raise Exception("not implemented")

    def read_text(self, name):
        raise Exception("not implemented")
    def write_text(self, name, text):
        raise Exception("not implemented")

    def read_frame(self, name, **kwargs):
        raise Exception("not implemented")
    def write_frame(self, name, frame, **kwargs):
        raise Exception("not implemented")

    def read_json(self, name):
        try:
            return json.loads(self.read_text(name))
        except json.JSONDecodeError as e:
            raise DataError("%s:%d:%d: invalid JSON: %s" % (name, e.lineno, e.colno, e.msg))

    def write_json(self, name, obj):
        self.write_text(name, json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError("Cannot serialise %r" % type(value))


class MemoryStorage(Storage):
    def __init__(self):
        self.store = {}

    def exists(self, name):
        return name in self.store

    def read_text(self, name):
        try:
            return self.store[name]
        except KeyError:
            raise DataError("%s: not found" % name)

    def write_text(self, name, text):
        self.store[name] = text

    def read_frame(self, name, **kwargs):
        return pd.read_csv(StringIO(self.read_text(name)), **kwargs)

    def write_frame(self, name, frame, **kwargs):
        self.store[name] = frame.to_csv(**kwargs)


class FileStorage(Storage):
    def __init__(self, root):
        self.root = root

    def path(self, name):
        return name if os.path.isabs(name) else os.path.join(self.root, name)

    def exists(self, name):
        return os.path.exists(self.path(name))

    def read_text(self, name):
        try:
            with open(self.path(name), encoding="utf-8") as f:
                return f.read()
        except OSError as e:
            raise DataError("%s: cannot read (%s)" % (self.path(name), e.strerror))
        except UnicodeDecodeError as e:
            raise DataError("%s: not UTF-8 text (%s)" % (self.path(name), e.reason))

    def write_text(self, name, text):
        path = self.path(name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info("Wrote %s", path)

    def read_frame(self, name, **kwargs):
        try:
            return pd.read_csv(self.path(name), encoding="utf-8", **kwargs)
        except OSError as e:
            raise DataError("%s: cannot read (%s)" % (self.path(name), e.strerror))

    def write_frame(self, name, frame, **kwargs):
        path = self.path(name)
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        frame.to_csv(path, encoding="utf-8", **kwargs)
        logger.info("Wrote %s", path)


def setup(storage_uri):
    if storage_uri.startswith("memory://"):
        return MemoryStorage()
    if storage_uri.startswith("file://"):
        return FileStorage(storage_uri[len("file://"):] or ".")
    if "://" not in storage_uri:
        return FileStorage(storage_uri)
    raise DataError("Invalid storage URI: " + storage_uri)


def _row_error(i, message):
    # header is line 1
    return DataError("row %d (line %d): %s" % (i + 1, i + 2, message))


def parse_dataset(frame: pd.DataFrame) -> Cohort:
    """Validate a ``time,event,arm`` snapshot."""
    missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError("Dataset is missing column(s): %s" % ", ".join(missing))
    extra = [c for c in frame.columns if c not in DATASET_COLUMNS]
    if extra:
        logger.warning("Ignoring dataset column(s): %s", ", ".join(map(str, extra)))
    if len(frame) == 0:
        raise DataError("Dataset has no rows")

    time = pd.to_numeric(frame["time"], errors="coerce").to_numpy(dtype=float)
    event = pd.to_numeric(frame["event"], errors="coerce").to_numpy(dtype=float)
    arm = pd.to_numeric(frame["arm"], errors="coerce").to_numpy(dtype=float)

    bad = np.nonzero(~np.isfinite(time) | (time <= 0))[0]
    if len(bad):
        raise _row_error(bad[0], "time must be a number > 0, got %r" % frame["time"].iloc[bad[0]])
    bad = np.nonzero((event != 0) & (event != 1))[0]
    if len(bad):
        raise _row_error(bad[0], "event must be 0 or 1, got %r" % frame["event"].iloc[bad[0]])
    bad = np.nonzero((arm != 0) & (arm != 1))[0]
    if len(bad):
        raise _row_error(bad[0], "arm must be 0 or 1, got %r" % frame["arm"].iloc[bad[0]])

    return Cohort.from_followup(time, event.astype(bool), arm.astype(np.int8))


def read_dataset(store: Storage, name) -> Cohort:
    try:
        frame = store.read_frame(name, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise DataError("%s: empty dataset" % name)
    except pd.errors.ParserError as e:
        raise DataError("%s: malformed CSV: %s" % (name, e))
    except UnicodeDecodeError as e:
        raise DataError("%s: not UTF-8 text (%s at byte %d)" % (name, e.reason, e.start))
    except ValueError as e:
        raise DataError("%s: unreadable CSV: %s" % (name, e))
    try:
        return parse_dataset(frame)
    except DataError as e:
        raise DataError("%s: %s" % (name, e))


def save_state(store: Storage, name, fingerprint, state: GsState):
    store.write_json(name, {
        "version": STATE_VERSION,
        "config_fingerprint": fingerprint,
        "looks": state.audit(),
    })


def load_state(store: Storage, name, fingerprint, config) -> GsState:
    try:
        doc = store.read_json(name)
    except DataError as e:
        raise StateError(str(e))
    if not isinstance(doc, dict) or doc.get("version") != STATE_VERSION:
        raise StateError("%s: unsupported state file" % name)
    if doc.get("config_fingerprint") != fingerprint:
        raise StateError("%s: state was written for a different design configuration" % name)
    looks = doc.get("looks")
    if not isinstance(looks, list):
        raise StateError("%s: 'looks' must be a list" % name)
    return GsState.from_audit(config, looks)
