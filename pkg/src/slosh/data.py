"""Sampled input/output records and their CSV / snapshot file formats."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

DATASET_COLUMNS = ("t", "u_x", "u_y", "tau", "r_x", "r_y", "theta", "rdot_x", "rdot_y", "thetadot")
SNAPSHOT_COLUMNS = ("id", "x", "y", "vx", "vy")
SPACECRAFT_COLUMNS = ("r_x", "r_y", "theta", "rdot_x", "rdot_y", "thetadot")
FLOAT_FMT = "%.17g"


@dataclass
class Dataset:
    """Uniformly sampled record ``{(u_k, y_k)}``.

    ``y`` holds either the six pose/rate outputs or, for velocity-level
    identification, the three rates.  ``u_scale``/``y_scale`` (and offsets)
    are the per-channel normalisation applied during training.
    """

    u: np.ndarray
    y: np.ndarray
    ts: float
    t0: float = 0.0
    u_scale: np.ndarray | None = None
    y_scale: np.ndarray | None = None
    u_offset: np.ndarray | None = None
    y_offset: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float).reshape(len(self.u), -1)
        self.y = np.asarray(self.y, dtype=float).reshape(len(self.y), -1)
        if len(self.u) != len(self.y):
            raise ConfigurationError("u and y must have the same number of samples")
        if not self.ts > 0.0:
            raise ConfigurationError("sampling time must be positive")

    def __len__(self):
        return len(self.u)

    @property
    def t(self):
        return self.t0 + self.ts * np.arange(len(self))

    @property
    def n_u(self):
        return self.u.shape[1]

    @property
    def n_y(self):
        return self.y.shape[1]

    def velocity_level(self):
        """Keep only the rate outputs ``[rdot_x, rdot_y, thetadot]``."""
        if self.n_y == 3:
            return self
        return Dataset(self.u, self.y[:, 3:6], self.ts, self.t0, meta=dict(self.meta))

    def slice(self, start, stop=None):
        stop = len(self) if stop is None else stop
        return Dataset(
            self.u[start:stop], self.y[start:stop], self.ts, self.t0 + start * self.ts, meta=dict(self.meta)
        )

    def to_csv(self, path=None):
        """Write the ``t,u_x,u_y,tau,r_x,...`` table; empty output columns if ``y`` is missing."""
        buf = io.StringIO()
        buf.write(",".join(DATASET_COLUMNS) + "\n")
        t = self.t
        for k in range(len(self)):
            row = [t[k], *self.u[k]]
            cells = [FLOAT_FMT % v for v in row]
            if self.n_y == 6:
                cells += [FLOAT_FMT % v for v in self.y[k]]
            elif self.n_y == 3:
                cells += ["", "", ""] + [FLOAT_FMT % v for v in self.y[k]]
            else:
                cells += [""] * 6
            buf.write(",".join(cells) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text):
        text = _read_text(path_or_text)
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = tuple(lines[0].split(","))
        if header != DATASET_COLUMNS:
            raise ConfigurationError(f"unexpected dataset header {header}")
        rows = [ln.split(",") for ln in lines[1:]]
        t = np.array([float(r[0]) for r in rows])
        u = np.array([[float(c) for c in r[1:4]] for r in rows]).reshape(-1, 3)
        ycells = [r[4:10] for r in rows]
        if ycells and all(c != "" for c in ycells[0]):
            y = np.array([[float(c) for c in r] for r in ycells])
        elif ycells and ycells[0][3] != "":
            y = np.array([[float(c) for c in r[3:]] for r in ycells])
        else:
            y = np.zeros((len(rows), 0))
        ts = 1.0
        if len(t) > 1:
            # the time column is t0 + ts * k; 12 digits recovers the configured step
            ts = float(f"{(t[-1] - t[0]) / (len(t) - 1):.12g}")
        return cls(u, y, ts, t0=float(t[0]) if len(t) else 0.0)


def _read_text(path_or_text):
    if isinstance(path_or_text, Path) or (isinstance(path_or_text, str) and "\n" not in path_or_text):
        return Path(path_or_text).read_text()
    return path_or_text


def write_snapshot(path, spacecraft_vector, positions, velocities, t=None):
    """Particle snapshot CSV with a spacecraft header.

    Format::

        # t=<t>
        # spacecraft,r_x,r_y,theta,rdot_x,rdot_y,thetadot
        # spacecraft,<six values>
        id,x,y,vx,vy
        0,...
    """
    lines = []
    if t is not None:
        lines.append(f"# t={FLOAT_FMT % t}")
    lines.append("# spacecraft," + ",".join(SPACECRAFT_COLUMNS))
    lines.append("# spacecraft," + ",".join(FLOAT_FMT % v for v in spacecraft_vector))
    lines.append(",".join(SNAPSHOT_COLUMNS))
    for i, (p, v) in enumerate(zip(positions, velocities)):
        lines.append(",".join([str(i)] + [FLOAT_FMT % c for c in (p[0], p[1], v[0], v[1])]))
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def read_snapshot(path_or_text):
    """Inverse of :func:`write_snapshot`: ``(t or None, spacecraft (6,), positions, velocities)``."""
    text = _read_text(path_or_text)
    t = None
    sc = None
    rows = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        if ln.startswith("# t="):
            t = float(ln[4:])
        elif ln.startswith("# spacecraft,"):
            cells = ln[len("# spacecraft,") :].split(",")
            if cells[0] != SPACECRAFT_COLUMNS[0]:
                sc = np.array([float(c) for c in cells])
        elif ln.startswith("id,") or ln.startswith("#"):
            continue
        else:
            rows.append([float(c) for c in ln.split(",")[1:]])
    if sc is None:
        raise ConfigurationError("snapshot has no spacecraft header")
    arr = np.array(rows).reshape(-1, 4)
    return t, sc, arr[:, 0:2].copy(), arr[:, 2:4].copy()
