"""Fixed slab decomposition and the fork-join worker contract.

The decomposition depends only on the image extents and the supergrid, never
on the worker count: one slab per supergrid row along the slowest axis.
Workers pull task indices from a shared counter, and results are returned in
task order, so any reduction over them is independent of scheduling.
"""

from __future__ import annotations

import math
import os
import threading
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

import numpy as np

from .image import ImageRegion, pixel_count

T = TypeVar("T")

THREADS_ENV = "SSLIC_THREADS"


class OwnershipError(RuntimeError):
    """A map-phase task wrote outside the slab it owns."""


@dataclass(frozen=True)
class SlabDecomposition:
    dims: tuple[int, ...]
    slabs: tuple[ImageRegion, ...]

    @property
    def slab_count(self) -> int:
        return len(self.slabs)

    @property
    def axis(self) -> int:
        return len(self.dims) - 1


def decompose(dims: Sequence[int], grid: Sequence[int]) -> SlabDecomposition:
    dims = tuple(int(d) for d in dims)
    if len(grid) != len(dims):
        raise ValueError("grid rank does not match dims")
    step = int(grid[-1])
    if step < 1:
        raise ValueError("grid sizes must be >= 1")
    last = dims[-1]
    slabs = []
    for j in range(math.ceil(last / step)):
        start = j * step
        size = min(step, last - start)
        slabs.append(ImageRegion((0,) * (len(dims) - 1) + (start,), dims[:-1] + (size,)))
    return SlabDecomposition(dims, tuple(slabs))


def default_workers() -> int:
    """Worker count from ``SSLIC_THREADS``, else the number of logical cores."""
    env = os.environ.get(THREADS_ENV)
    if env:
        value = int(env)
        if value < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer")
        return value
    return os.cpu_count() or 1


def parallel_for(count: int, workers: int, body: Callable[[int], T]) -> list[T]:
    """Run ``body(i)`` for ``i in range(count)`` on up to ``workers`` threads.

    Returns the results indexed by task. The first exception raised by any
    task stops the phase (no new tasks are pulled) and is re-raised here
    after all workers have joined.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    results: list = [None] * count
    if workers == 1 or count <= 1:
        for i in range(count):
            results[i] = body(i)
        return results

    lock = threading.Lock()
    state = {"next": 0, "error": None}

    def worker():
        while True:
            with lock:
                if state["error"] is not None or state["next"] >= count:
                    return
                i = state["next"]
                state["next"] += 1
            try:
                results[i] = body(i)
            except BaseException as exc:  # surfaced to the caller below
                with lock:
                    if state["error"] is None:
                        state["error"] = exc
                return

    threads = [threading.Thread(target=worker, daemon=True) for _ in range(min(workers, count))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if state["error"] is not None:
        raise state["error"]
    return results


def parallel_for_slabs(
    decomp: SlabDecomposition, workers: int, body: Callable[[int, ImageRegion], T]
) -> list[T]:
    """Fork-join over the slabs; results come back in slab order."""
    return parallel_for(decomp.slab_count, workers, lambda i: body(i, decomp.slabs[i]))


def slab_owner_map(decomp: SlabDecomposition) -> np.ndarray:
    """Slab index owning each flat pixel offset."""
    plane = pixel_count(decomp.dims[:-1]) if len(decomp.dims) > 1 else 1
    owner = np.empty(pixel_count(decomp.dims), dtype=np.int64)
    for i, slab in enumerate(decomp.slabs):
        start = slab.index[-1] * plane
        owner[start : start + slab.size[-1] * plane] = i
    return owner


def checked_map_phase(
    decomp: SlabDecomposition,
    workers: int,
    arrays: Sequence[np.ndarray],
    body: Callable[[int, ImageRegion, Sequence[np.ndarray]], object],
) -> None:
    """Debug variant of a map phase that verifies write ownership.

    Each slab task mutates private copies of ``arrays``; every changed element
    must belong to the task's slab, else :class:`OwnershipError`. Owned
    changes are then committed to the shared arrays.
    """
    owner = slab_owner_map(decomp)
    before = [a.copy() for a in arrays]

    def run(i: int, region: ImageRegion):
        private = [a.copy() for a in before]
        body(i, region, private)
        changed = np.zeros(owner.size, dtype=bool)
        for old, new in zip(before, private):
            same = old == new
            if old.dtype.kind == "f":
                same |= np.isnan(old) & np.isnan(new)
            changed |= ~same
        bad = np.flatnonzero(changed & (owner != i))
        if bad.size:
            raise OwnershipError(f"slab {i} wrote {bad.size} pixels outside its region (first: {bad[0]})")
        return private

    privates = parallel_for_slabs(decomp, workers, run)
    for i, private in enumerate(privates):
        mask = owner == i
        for shared, mine in zip(arrays, private):
            shared[mask] = mine[mask]
