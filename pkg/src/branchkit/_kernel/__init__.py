"""Growth-kernel backends and selection.

The compiled extension is preferred when importable; the numpy fallback is
bit-compatible with it, so swapping backends never changes results. Set
BRANCHKIT_KERNEL=py (or cy) to force a backend.
"""

from __future__ import annotations

import os

import numpy as np

from . import core_py
from .spec import (
    CPL_INDEPENDENT,
    CPL_PAIR_TABLE,
    CPL_SHARED,
    FAM_WBP_PRIMS,
    FAM_WBP_TABLE,
    FAM_WBT_PRIMS,
    FAM_WBT_TABLE,
    ROOT_PRIMS,
    ROOT_TABLE,
    KernelSpec,
    PairProgram,
    RootPairProgram,
    RootProgram,
    SideProgram,
)

try:
    from . import core_cy
except ImportError:  # extension not built; numpy path only
    core_cy = None

_FORCED = os.environ.get("BRANCHKIT_KERNEL", "").strip().lower()


def available_backends() -> tuple[str, ...]:
    return ("py", "cy") if core_cy is not None else ("py",)


def get_backend(name: str | None = None):
    name = name or _FORCED or ("cy" if core_cy is not None else "py")
    if name == "py":
        return core_py
    if name == "cy":
        if core_cy is None:
            raise RuntimeError("compiled kernel requested but not built")
        return core_cy
    raise ValueError(f"unknown kernel backend {name!r}")


def backend_name(name: str | None = None) -> str:
    return get_backend(name).BACKEND


DEFAULT_CHUNK = 8192


def run_batch(
    spec: KernelSpec,
    seed: int,
    n_reps: int,
    depth: int,
    cap: int = 10_000_000,
    chunk: int = DEFAULT_CHUNK,
    backend: str | None = None,
):
    """Grow n_reps trees in chunks; see core_py.run_chunk for the outputs.

    Chunking is a memory knob only: replication r is keyed by (seed, r), so
    results never depend on chunk boundaries.
    """
    impl = get_backend(backend)
    if n_reps <= chunk:
        return impl.run_chunk(spec, seed, 0, n_reps, depth, cap)
    parts = []
    start = 0
    while start < n_reps:
        size = min(chunk, n_reps - start)
        parts.append(impl.run_chunk(spec, seed, start, size, depth, cap))
        start += size
    out = []
    for pos in range(6):
        if parts[0][pos] is None:
            out.append(None)
        else:
            out.append(np.concatenate([p[pos] for p in parts], axis=0))
    return tuple(out)
