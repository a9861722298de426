import json
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

SNAPSHOT_COLUMNS = ["time", "X", "u_total", "u_coarse", "u_fine", "F_avg"]

@dataclass(frozen=True, eq=False)
class Snapshot:
    '''Immutable copy of the total field at one step. X, u_* are nodal values on the finest grid of the run; F_avg holds one element-averaged stretch per element (element i spans nodes 2i..2i+2).'''
    time: float
    X: np.ndarray
    u_total: np.ndarray
    u_coarse: np.ndarray
    u_fine: np.ndarray
    F_avg: np.ndarray
    step: int = 0

@dataclass(frozen=True)
class StepRecord:
    step: int
    t: float
    dt: float
    split_iters: int
    newton_iters: int
    worst_subdomain: int
    energy: float

    def to_line(self):
        return (f'step={self.step} t={self.t:.17g} dt={self.dt:.17g} split_iters={self.split_iters} '
                f'newton_iters={self.newton_iters} worst_subdomain={self.worst_subdomain} energy={self.energy:.17g}')

#A class to keep track of everything a run produces: snapshots, per-step records, timing and error rows.
@dataclass(eq=False)
class RunResult:
    solver: str
    config: dict = field(default_factory=dict)
    snapshots: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    wall_seconds: float = 0.0
    errors: list = field(default_factory=list)

    def add_snapshot(self, snapshot):
        if self.snapshots and snapshot.time <= self.snapshots[-1].time:
            raise ValueError(f'ERROR: snapshot times must increase ({snapshot.time} after {self.snapshots[-1].time}).')
        self.snapshots.append(snapshot)
        return snapshot

    def add_step(self, record):
        self.steps.append(record)

    def nearest_snapshot(self, time):
        if not self.snapshots: return None
        return min(self.snapshots, key=lambda s: abs(s.time - time))

    @property
    def max_dt(self):
        return max((s.dt for s in self.steps), default=0.0)

    def statistics(self):
        _splits = [s.split_iters for s in self.steps]
        _newton = [s.newton_iters for s in self.steps]
        return {
            "n_steps": len(self.steps),
            "final_time": self.steps[-1].t if self.steps else 0.0,
            "split_iters_max": int(max(_splits, default=0)),
            "split_iters_mean": float(np.mean(_splits)) if _splits else 0.0,
            "newton_iters_max": int(max(_newton, default=0)),
            "dt_min": float(min((s.dt for s in self.steps), default=0.0)),
            "dt_max": float(self.max_dt),
        }

    def snapshot_table(self):
        _frames = []
        for s in self.snapshots:
            _F = np.full(len(s.X), np.nan)
            _F[1::2] = s.F_avg
            _frames.append(pd.DataFrame({"time": np.full(len(s.X), s.time), "X": s.X, "u_total": s.u_total,
                                         "u_coarse": s.u_coarse, "u_fine": s.u_fine, "F_avg": _F}))
        if not _frames: return pd.DataFrame(columns=SNAPSHOT_COLUMNS)
        return pd.concat(_frames, ignore_index=True)[SNAPSHOT_COLUMNS]

    def write_csv(self, filepath):
        self.snapshot_table().to_csv(filepath, index=False, float_format="%.17g")

    def write_steps(self, filepath):
        with open(filepath, "w") as a_file:
            for record in self.steps:
                a_file.write(record.to_line() + "\n")

    def metrics(self):
        return {"solver": self.solver, "wall_seconds": float(self.wall_seconds),
                "snapshot_times": [float(s.time) for s in self.snapshots],
                **self.statistics(), "errors": self.errors}

def write_metrics(filepath, metrics):
    with open(filepath, "w") as a_file:
        json.dump(metrics, a_file, indent=2, default=float)

def read_snapshots(filepath):
    '''Read a snapshots CSV back into Snapshot objects. Values are parsed with round-trip precision.'''
    _table = pd.read_csv(filepath, float_precision="round_trip")
    snapshots = []
    for time, _rows in _table.groupby("time", sort=True):
        _F = _rows["F_avg"].to_numpy()
        snapshots.append(Snapshot(float(time), _rows["X"].to_numpy(), _rows["u_total"].to_numpy(),
                                  _rows["u_coarse"].to_numpy(), _rows["u_fine"].to_numpy(), _F[1::2]))
    return snapshots
