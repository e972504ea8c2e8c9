import hashlib
import json
from typing import Any, Dict, Optional

import numpy as np


def config_seed(payload: Dict[str, Any]) -> int:
    """64-bit seed from the canonical JSON form of a config document."""
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(canonical.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def effective_seed(cli_seed: Optional[int], cfg_seed: Optional[int], payload: Dict[str, Any]) -> int:
    if cli_seed is not None:
        return cli_seed
    if cfg_seed is not None:
        return cfg_seed
    return config_seed(payload)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=master_seed, spawn_key=(trial_index,))
    )
