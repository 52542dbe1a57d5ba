import copy
import json
from pathlib import Path

SMALL_CONFIG = {
    'schema_version': 1,
    'market': {
        'feature_dim': 1,
        'utility_weights': [1.5],
        'utility_bias': -0.5,
        'price_loc_weights': [0.5],
        'price_coupling': 1.0,
        'price_scale': 1.0,
        'bid': 1.2,
    },
    'train': {'learning_rate': 0.1, 'epochs': 3, 'batch_size': 128},
    'extra': {'learning_rate': 0.05, 'batch_size': 128, 'lambda': 1.0, 'max_steps': 300, 'tol': 1e-6, 'patience': 5},
    'statistic': {'kind': 'identity'},
    'n_stream': 3000,
    'n_oracle': 2000,
    'seed': 11,
}


def small_config(**overrides):
    config = copy.deepcopy(SMALL_CONFIG)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    return config


def write_config(directory, document) -> Path:
    path = Path(directory) / 'config.json'
    path.write_text(json.dumps(document), encoding='utf-8')
    return path


def data_rows(path) -> int:
    return len(Path(path).read_text(encoding='utf-8').splitlines()) - 1
