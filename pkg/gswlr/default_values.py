import os

_prefix = 'GSWLR_'


def _get_value_str(name, default_value):
    env_value = os.environ.get(name)
    return default_value if env_value is None else env_value


def _get_value_int(name, default_value):
    try:
        return int(os.environ[name])
    except (KeyError, ValueError):
        return default_value


def _get_value_float(name, default_value):
    try:
        return float(os.environ[name])
    except (KeyError, ValueError):
        return default_value


def _get_value_bool(name, default_value):
    env_value = os.environ.get(name)
    if env_value in ['FALSE', 'False', 'false', '0']:
        return False
    if env_value in ['TRUE', 'True', 'true', '1']:
        return True
    return default_value


def _get_value(name, default_value, value_type):
    env_name = _prefix + name
    if value_type == 'str':
        return _get_value_str(env_name, default_value)
    if value_type == 'int':
        return _get_value_int(env_name, default_value)
    if value_type == 'float':
        return _get_value_float(env_name, default_value)
    if value_type == 'bool':
        return _get_value_bool(env_name, default_value)
    return default_value


_default_options_objects = [
    {
        'name': 'OUT_DIR',
        'default_value': '.',
        'value_type': 'str'
    },
    {
        'name': 'SEED',
        'default_value': 20211,
        'value_type': 'int'
    },
    {
        'name': 'REPLICATES',
        'default_value': 10000,
        'value_type': 'int'
    },
    {
        'name': 'JOBS',
        'default_value': 1,
        'value_type': 'int'
    },
    {
        'name': 'CHUNK_SIZE',
        'default_value': 250,
        'value_type': 'int'
    },
    {
        'name': 'GRID_POINTS',
        'default_value': 2001,
        'value_type': 'int'
    },
    {
        'name': 'SIM_GRID_POINTS',
        'default_value': 201,
        'value_type': 'int'
    },
    {
        'name': 'GRID_MAX_POINTS',
        'default_value': 8001,
        'value_type': 'int'
    },
    {
        'name': 'PROB_TOL',
        'default_value': 1e-8,
        'value_type': 'float'
    },
    {
        'name': 'TIME_STEP',
        'default_value': 0.01,
        'value_type': 'float'
    },
    {
        'name': 'SEARCH_STEP',
        'default_value': 5,
        'value_type': 'int'
    },
    {
        'name': 'SEARCH_MAX_N',
        'default_value': 1000,
        'value_type': 'int'
    },
    {
        'name': 'MILESTONE',
        'default_value': 18.0,
        'value_type': 'float'
    },
    {
        'name': 'RMST_TAU',
        'default_value': 18.0,
        'value_type': 'float'
    },
    {
        'name': 'DEBUG',
        'default_value': False,
        'value_type': 'bool'
    },
]


DEFAULT_ARGUMENTS = {obj['name']: _get_value(**obj) for obj in _default_options_objects}
