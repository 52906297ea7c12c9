"""Shared fixtures for the test suite.

The expensive synthetic pipelines are session-scoped so the module tests
and the acceptance gate can reuse them without re-training.
"""

import numpy as np
import pytest

from epfcast import cli
from epfcast.synth import synth_series


@pytest.fixture(scope="session")
def synth_frame_700():
    return synth_series(700, seed=0)


@pytest.fixture(scope="session")
def pipe_700():
    """Prepared pipeline on 700 synthetic days with a small window."""
    cfg = cli._merge_config(cli.DEFAULT_CONFIG, {
        "data": {"synth": {"n_days": 700}, "seed": 0},
        "preprocess": {"window": 14},
    })
    return cli.prepare(cfg)


@pytest.fixture(scope="session")
def quick_cli_config(tmp_path_factory):
    """Config file that keeps CLI end-to-end runs fast."""
    import json
    path = tmp_path_factory.mktemp("cfg") / "quick.json"
    path.write_text(json.dumps({
        "preprocess": {"window": 14},
        "model": {
            "conv_blocks": [[8, 3, 2]],
            "lstm_hidden": 16,
            "dense_head": [8, 1],
            "rnn_hidden": 16,
            "ann_hidden": [32],
        },
        "training": {"epochs": 6, "early_stop_patience": 3, "batch_size": 32},
        "forecast": {"days": 45, "monthly": True},
    }))
    return str(path)


@pytest.fixture
def announce(capsys):
    """Print a line that survives pytest's capture (acceptance verdicts)."""
    def _announce(line: str) -> None:
        with capsys.disabled():
            print(line, flush=True)
    return _announce


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
