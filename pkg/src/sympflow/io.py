"""Checkpoints, dataset CSV files, and config parsing.

Checkpoint format: a JSON object with ``magic: "sympflow-ckpt-v1"``,
``kind`` ("sympflow" or "mlp"), ``d``, ``L``, ``h``, ``seed``, and
``params``: base64 of the IEEE-754 little-endian float64 parameter vector in
canonical order (per net A1 row-major, b1, A2, b2, A3, b3; nets ordered
Vq_1, Vp_1, ..., Vq_L, Vp_L; MLP affine layers in order).  Round-trips are
bit-exact.

Datasets are two CSV files: ``ics.csv`` (header ``traj_id,x_1..x_{2d}``) and
``samples.csv`` (header ``traj_id,t,y_1..y_{2d}``), floats written with 17
significant digits.

Configs are flat JSON objects; unknown keys are rejected.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from . import mlp as mlpmod
from . import model as sfm
from .errors import CheckpointError, ConfigError, KindMismatchError
from .integrate import TrajectoryDataset

__all__ = [
    "save_checkpoint",
    "load_checkpoint",
    "save_dataset",
    "load_dataset",
    "load_config",
    "CONFIG_KEYS",
]

MAGIC = "sympflow-ckpt-v1"


def _encode(vec: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(vec, dtype="<f8").tobytes()).decode("ascii")


def _decode(blob: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(blob.encode("ascii")), dtype="<f8").astype(float)


def save_checkpoint(model_obj, path, seed: int = 0) -> None:
    """Write the model to a JSON checkpoint (bit-exact round trip)."""
    if isinstance(model_obj, sfm.SympFlowModel):
        payload = {
            "magic": MAGIC,
            "kind": "sympflow",
            "d": model_obj.d,
            "L": model_obj.n_layers,
            "h": model_obj.h,
            "seed": int(seed),
            "params": _encode(sfm.params_to_vector(model_obj)),
        }
    elif isinstance(model_obj, mlpmod.MlpFlowModel):
        payload = {
            "magic": MAGIC,
            "kind": "mlp",
            "d": model_obj.d,
            "L": model_obj.n_layers,
            "h": model_obj.hidden,
            "seed": int(seed),
            "params": _encode(mlpmod.params_to_vector(model_obj)),
        }
    else:
        raise CheckpointError(f"cannot checkpoint object of type {type(model_obj).__name__}")
    Path(path).write_text(json.dumps(payload) + "\n")


def load_checkpoint(path, expect_kind: str | None = None):
    """Load a model from a checkpoint; optionally enforce the stored kind."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("magic") != MAGIC:
        raise CheckpointError(f"{path} is not a {MAGIC} checkpoint")
    kind = payload.get("kind")
    if kind not in ("sympflow", "mlp"):
        raise CheckpointError(f"unknown checkpoint kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise KindMismatchError(f"expected a {expect_kind} checkpoint, found {kind}")
    try:
        d, L, h = int(payload["d"]), int(payload["L"]), int(payload["h"])
        vec = _decode(payload["params"])
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint {path}: {exc}") from exc
    if kind == "sympflow":
        skeleton = sfm.zero_sympflow(d, L, h=h)
        if vec.size != sfm.param_count(skeleton):
            raise CheckpointError("parameter vector length does not match the header")
        return sfm.model_with_params(skeleton, vec)
    skeleton = mlpmod.zero_mlp_flow(d, L, hidden=h)
    if vec.size != mlpmod.param_count(skeleton):
        raise CheckpointError("parameter vector length does not match the header")
    return mlpmod.model_with_params(skeleton, vec)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_dataset(dataset: TrajectoryDataset, out_dir) -> None:
    """Write ics.csv and samples.csv with 17-significant-digit floats."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dim = dataset.ics.shape[1]
    with open(out / "ics.csv", "w") as fh:
        fh.write("traj_id," + ",".join(f"x_{i + 1}" for i in range(dim)) + "\n")
        for n, row in enumerate(dataset.ics):
            fh.write(str(n) + "," + ",".join(_fmt(v) for v in row) + "\n")
    with open(out / "samples.csv", "w") as fh:
        fh.write("traj_id,t," + ",".join(f"y_{i + 1}" for i in range(dim)) + "\n")
        for tid, t, row in zip(dataset.sample_traj, dataset.sample_t, dataset.sample_y):
            fh.write(f"{tid},{_fmt(t)}," + ",".join(_fmt(v) for v in row) + "\n")
    meta = {
        "delta_t": dataset.delta_t,
        "noise_std": dataset.noise_std,
        "seed": dataset.seed,
    }
    (out / "meta.json").write_text(json.dumps(meta) + "\n")


def load_dataset(in_dir) -> TrajectoryDataset:
    src = Path(in_dir)
    ics_rows = (src / "ics.csv").read_text().strip().split("\n")
    ics = np.array([[float(v) for v in line.split(",")[1:]] for line in ics_rows[1:]])
    sample_rows = (src / "samples.csv").read_text().strip().split("\n")
    traj, ts, ys = [], [], []
    for line in sample_rows[1:]:
        parts = line.split(",")
        traj.append(int(parts[0]))
        ts.append(float(parts[1]))
        ys.append([float(v) for v in parts[2:]])
    meta_path = src / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return TrajectoryDataset(
        ics=ics,
        sample_traj=np.array(traj, dtype=int),
        sample_t=np.array(ts),
        sample_y=np.array(ys),
        delta_t=float(meta.get("delta_t", max(ts) if ts else 1.0)),
        noise_std=float(meta.get("noise_std", 0.0)),
        seed=meta.get("seed"),
    )


# Every key a config file may carry; commands require the subset they need.
CONFIG_KEYS = {
    "system": str,
    "mass": float,
    "spring_k": float,
    "damping": float,
    "model_kind": str,
    "regime": str,
    "epochs": int,
    "fine_tune_epochs": int,
    "learning_rate": float,
    "batch_collocation": int,
    "batch_matching": int,
    "delta_t": float,
    "omega": list,
    "seed": int,
    "derivative_mode": str,
    "layers": int,
    "hidden": int,
    "checkpoint_every": int,
    "n_trajectories": int,
    "m_samples": int,
    "noise_std": float,
    "dataset_dir": str,
    "horizon": float,
    "step": float,
    "x0": list,
    "n_eval_samples": int,
    "k_steps": list,
    "project_physical": bool,
}


def load_config(path) -> dict:
    """Read a flat JSON config; unknown keys are rejected, types coerced."""
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    out = {}
    for key, val in raw.items():
        want = CONFIG_KEYS[key]
        try:
            if want is list:
                if not isinstance(val, list):
                    raise TypeError("expected a list")
                out[key] = val
            elif want is bool:
                if not isinstance(val, bool):
                    raise TypeError("expected a boolean")
                out[key] = val
            else:
                out[key] = want(val)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    return out
