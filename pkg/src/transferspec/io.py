"""On-disk formats: trajectory/density CSV, matrix files, resonance and
oracle JSON, run manifests.

All floating-point CSV fields are written with 17 significant digits so
that values round-trip exactly; JSON floats use Python's shortest
round-trip repr.  Every writer is deterministic given its inputs, which
is what makes stage checksums reproducible.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np
import scipy.sparse as sparse

from . import __version__
from .eigen import Resonance, ResonanceSet
from .errors import ValidationError
from .hopf import Trajectory
from .partition import GridSpec, SojournDensity, StandardizeParams
from .transfer import TransitionMatrix

SCHEMA_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# trajectory


def write_trajectory_csv(path: Path, traj: Trajectory) -> None:
    with open(path, "w") as fh:
        fh.write("t,x,y\n")
        dt = traj.sampling_interval
        for i, (x, y) in enumerate(traj.states):
            fh.write(f"{_fmt(i * dt)},{_fmt(x)},{_fmt(y)}\n")


def read_trajectory_csv(path: Path) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 3:
        raise ValidationError(f"{path}: expected columns t,x,y")
    interval = float(data[1, 0] - data[0, 0]) if data.shape[0] > 1 else 1.0
    return Trajectory(sampling_interval=interval, states=data[:, 1:3])


# ---------------------------------------------------------------------------
# sojourn density


def write_density_csv(path: Path, density: SojournDensity) -> None:
    with open(path, "w") as fh:
        fh.write("box,m\n")
        for i, v in enumerate(density.values):
            fh.write(f"{i},{_fmt(v)}\n")


def read_density_csv(path: Path) -> SojournDensity:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    values = data[:, 1]
    if abs(values.sum() - 1.0) > 1e-12:
        raise ValidationError(f"{path}: density does not sum to 1")
    return SojournDensity(values=values, n_samples_in_domain=1)


# ---------------------------------------------------------------------------
# transition matrix: one-line JSON header, then an i,j,p triplet CSV body


def write_matrix(
    path: Path,
    tm: TransitionMatrix,
    grid: GridSpec,
    standardize: StandardizeParams | None = None,
    n_pairs: int | None = None,
) -> None:
    header = {
        "schema_version": SCHEMA_VERSION,
        "lag": tm.lag,
        "dim": int(tm.dim),
        "kept_boxes": [int(b) for b in tm.kept_boxes],
        "grid": {"lo": list(grid.lo), "hi": list(grid.hi), "n_per_dim": list(grid.n_per_dim)},
    }
    if standardize is not None:
        header["standardize"] = {
            "mean": [float(v) for v in standardize.mean],
            "std": [float(v) for v in standardize.std],
        }
    if n_pairs is not None:
        header["n_pairs"] = int(n_pairs)
    coo = tm.matrix.tocoo()
    order = np.lexsort((coo.row, coo.col))
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        fh.write("i,j,p\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r},{c},{_fmt(v)}\n")


def read_matrix(path: Path) -> tuple[TransitionMatrix, dict]:
    with open(path) as fh:
        header = json.loads(fh.readline())
        body = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    dim = int(header["dim"])
    mat = sparse.coo_array(
        (body[:, 2], (body[:, 0].astype(np.int64), body[:, 1].astype(np.int64))),
        shape=(dim, dim),
    ).tocsc()
    tm = TransitionMatrix(
        lag=float(header["lag"]),
        kept_boxes=np.array(header["kept_boxes"], dtype=np.int64),
        matrix=mat,
    )
    return tm, header


# ---------------------------------------------------------------------------
# resonances: JSON records plus one eigenvector CSV per resonance and side


def _write_vector_csv(path: Path, boxes: np.ndarray, vec: np.ndarray) -> None:
    with open(path, "w") as fh:
        fh.write("box,re,im\n")
        for b, v in zip(boxes, vec):
            fh.write(f"{b},{_fmt(v.real)},{_fmt(v.imag)}\n")


def _read_vector_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0].astype(np.int64), data[:, 1] + 1j * data[:, 2]


def write_resonances(
    out_dir: Path,
    stem: str,
    rset: ResonanceSet,
    kept_boxes: np.ndarray,
    n_filtered: int = 0,
) -> Path:
    records = []
    for idx, res in enumerate(rset.resonances):
        right_file = f"{stem}.vec{idx:02d}.right.csv"
        left_file = f"{stem}.vec{idx:02d}.left.csv"
        _write_vector_csv(out_dir / right_file, kept_boxes, res.right)
        _write_vector_csv(out_dir / left_file, kept_boxes, res.left)
        records.append(
            {
                "index": idx,
                "re_lambda": res.value.real,
                "im_lambda": res.value.imag,
                "re_lambda_single": res.value_single.real,
                "im_lambda_single": res.value_single.imag,
                "kappa": res.kappa,
                "pair_quality": res.pair_quality,
                "weight": None,
                "vector_files": {"right": right_file, "left": left_file},
            }
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "lag": rset.lag,
        "dlag": rset.dlag,
        "n_dropped": rset.n_dropped,
        "n_filtered": n_filtered,
        "resonances": records,
    }
    path = out_dir / f"{stem}.resonances.json"
    _dump_json(doc, path)
    return path


def read_resonances(path: Path) -> tuple[ResonanceSet, dict]:
    doc = json.loads(Path(path).read_text())
    resonances = []
    base = Path(path).parent
    kept = None
    for rec in doc["resonances"]:
        boxes, right = _read_vector_csv(base / rec["vector_files"]["right"])
        _, left = _read_vector_csv(base / rec["vector_files"]["left"])
        if kept is None:
            kept = boxes
        resonances.append(
            Resonance(
                value=complex(rec["re_lambda"], rec["im_lambda"]),
                value_single=complex(rec["re_lambda_single"], rec["im_lambda_single"]),
                kappa=float(rec["kappa"]),
                pair_quality=float(rec["pair_quality"]),
                right=right,
                left=left,
            )
        )
    rset = ResonanceSet(
        lag=float(doc["lag"]),
        dlag=float(doc["dlag"]),
        resonances=resonances,
        n_dropped=int(doc.get("n_dropped", 0)),
    )
    doc["kept_boxes"] = kept
    return rset, doc


def update_resonance_weights(path: Path, weights: np.ndarray) -> None:
    doc = json.loads(Path(path).read_text())
    if len(weights) != len(doc["resonances"]):
        raise ValidationError("weight count does not match resonance records")
    for rec, w in zip(doc["resonances"], weights):
        rec["weight"] = [w.real, w.imag]
    _dump_json(doc, Path(path))


# ---------------------------------------------------------------------------
# oracle and comparison reports


def lattice_to_records(lattice) -> list[dict]:
    recs = []
    for e in lattice.entries:
        recs.append(
            {
                "l": list(e.l) if isinstance(e.l, tuple) else e.l,
                "n": e.n,
                "re_lambda": e.value.real,
                "im_lambda": e.value.imag,
                "multiplicity": e.multiplicity,
            }
        )
    return recs


def write_manifest(
    out_dir: Path,
    stem: str,
    stage: str,
    config_echo: dict,
    outputs: dict[str, str],
    timings: dict[str, float],
    figures: list[str] | None = None,
) -> Path:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "software_version": __version__,
        "seed": config_echo.get("sim", {}).get("seed"),
        "config": config_echo,
        "outputs": outputs,
        "figures": figures or [],
        "timings_seconds": timings,
    }
    path = out_dir / f"{stem}.manifest.{stage}.json"
    _dump_json(doc, path)
    return path
