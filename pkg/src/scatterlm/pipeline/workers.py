"""Process pool and simulation cache shared by the pipeline stages.

Every forward evaluation is independent per parameter set and per wavelength,
and the solver returns bit-identical values regardless of batch composition,
so splitting work across processes or reusing cached values never changes results.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence

import numpy as np

from ..forward.simulate import ForwardModel
from ..forward.structure import IncidenceConfig, StructureModel
from ..materials import MaterialLibrary

__all__ = ["SimulationError", "worker_count", "map_jobs", "simulate_mueller", "SimulationCache"]

log = logging.getLogger(__name__)

WORKERS_ENV = "SCATTERLM_WORKERS"
_CHUNK = 64


class SimulationError(RuntimeError):
    """Forward-model failure, carrying the offending parameter set."""

    def __init__(self, message, params=None):
        super().__init__(message)
        self.params = params


def worker_count(requested: int | None = None) -> int:
    if requested is None:
        requested = int(os.environ.get(WORKERS_ENV, "1") or 1)
    return max(1, int(requested))


def map_jobs(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Ordered map, in-process for one worker, else over a process pool."""
    workers = worker_count(workers)
    items = list(items)
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _sim_job(args):
    structure, incidence, mat_dir, params, wl = args
    fm = ForwardModel(structure, incidence, MaterialLibrary(mat_dir))
    return _checked(fm, params, wl)


def _checked(fm: ForwardModel, params: list, wl: np.ndarray) -> np.ndarray:
    try:
        return fm.mueller(params, wl)
    except Exception as exc:
        # locate the offending parameter set
        for p in params:
            try:
                fm.mueller([p], wl)
            except Exception as inner:
                raise SimulationError(f"forward model failed at {p}: {inner}", p) from inner
        raise SimulationError(f"forward model failed: {exc}") from exc


def simulate_mueller(fm: ForwardModel, params: Sequence[dict], wavelengths=None,
                     workers: int | None = None) -> np.ndarray:
    """(P, W, 4, 4) Mueller arrays; spreads chunks over a pool when workers > 1."""
    wl = fm.wavelengths if wavelengths is None else np.asarray(wavelengths, dtype=float)
    params = list(params)
    if not params:
        return np.zeros((0, wl.size, 4, 4))
    workers = worker_count(workers)
    if workers == 1:
        return _checked(fm, params, wl)
    chunks = [params[i:i + _CHUNK] for i in range(0, len(params), _CHUNK)]
    jobs = [(fm.structure, fm.incidence, fm.materials.directory, c, wl) for c in chunks]
    return np.concatenate(map_jobs(_sim_job, jobs, workers), axis=0)


class SimulationCache:
    """Memo of Mueller matrices keyed by (parameter vector, wavelength)."""

    def __init__(self, fm: ForwardModel, workers: int | None = None):
        self.fm = fm
        self.workers = workers
        self._store: dict[tuple, dict[float, np.ndarray]] = {}
        self.n_simulated = 0

    def __len__(self):
        return len(self._store)

    def mueller(self, points: np.ndarray, names: Iterable[str], wavelengths) -> np.ndarray:
        names = list(names)
        wl = np.asarray(wavelengths, dtype=float)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        keys = [tuple(row.tolist()) for row in pts]
        todo: dict[tuple, None] = {}
        for key in keys:
            have = self._store.get(key)
            if have is None or any(w not in have for w in wl.tolist()):
                todo[key] = None
        if todo:
            need = sorted({w for key in todo for w in wl.tolist()
                           if w not in self._store.get(key, {})})
            need_wl = np.array(need)
            todo_keys = list(todo)
            m = simulate_mueller(self.fm, [dict(zip(names, k)) for k in todo_keys], need_wl, self.workers)
            self.n_simulated += len(todo_keys)
            for key, mk in zip(todo_keys, m):
                slot = self._store.setdefault(key, {})
                for w, mw in zip(need, mk):
                    slot.setdefault(w, mw)
        return np.array([[self._store[key][w] for w in wl.tolist()] for key in keys]).reshape(len(keys), wl.size, 4, 4)
