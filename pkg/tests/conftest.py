import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from leachsim.config import sim_config_from_dict


def small_config(**overrides):
    """A quick desk-top configuration for engine-level tests."""
    base = {
        "node_count": 12,
        "area_width_m": 400.0,
        "area_height_m": 200.0,
        "sim_duration_s": 60.0,
        "rng_seed": 3,
    }
    base.update(overrides)
    return sim_config_from_dict(base)
