"""Counter-based random streams keyed by (trajectory, mode, component).

Each key gets its own Philox stream; the position inside a stream is the time-step
counter.  Draws therefore do not depend on how trajectories are split between workers
or on which other modes are present in the lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COMPONENT_R = 0
COMPONENT_I = 1


def _zigzag(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


@dataclass(frozen=True)
class RngPolicy:
    master_seed: int = 0

    def __post_init__(self):
        if not (isinstance(self.master_seed, int) and 0 <= self.master_seed < 2**64):
            raise ValueError(f"master_seed must be an unsigned 64-bit integer, got {self.master_seed!r}")

    def stream(self, traj_id: int, n, component: int) -> np.random.Generator:
        """Independent generator for one (trajectory, mode, component) triple."""
        if traj_id < 0:
            raise ValueError("trajectory id must be non-negative")
        key = (int(traj_id), *(_zigzag(int(c)) for c in n), int(component))
        seq = np.random.SeedSequence(self.master_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def normals(self, traj_id: int, n, component: int, count: int) -> np.ndarray:
        """The first ``count`` standard normals of a stream; entry ``j`` drives step ``j``."""
        return self.stream(traj_id, n, component).standard_normal(count)
