"""Serialization of environments, ratio tables, buffers, checkpoints and run outputs."""
from __future__ import annotations

import csv
import hashlib
import json
from typing import Sequence

import numpy as np

from .data import ReplayBuffer, TransitionSample
from .env import EpisodicMdp
from .records import EpisodeRecord

FORMAT_VERSION = 1
CSV_COLUMNS = ("episode", "return", "regret", "cum_regret", "epsilon")


def _mdp_arrays(mdp: EpisodicMdp, prefix: str) -> dict:
    arrays = {f"{prefix}rewards": np.ascontiguousarray(mdp.rewards)}
    if mdp.deterministic:
        arrays[f"{prefix}next_states"] = np.ascontiguousarray(mdp.next_states)
    else:
        arrays[f"{prefix}transitions"] = np.ascontiguousarray(mdp.transitions)
    if mdp.state_features is not None:
        arrays[f"{prefix}state_features"] = np.ascontiguousarray(mdp.state_features)
    return arrays


def _mdp_header(mdp: EpisodicMdp) -> dict:
    return {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "horizon": mdp.horizon,
        "discount": mdp.discount,
        "initial_state": mdp.initial_state,
        "meta": dict(mdp.meta or {}),
    }


def save_tasks(path, target: EpisodicMdp, sources: Sequence[EpisodicMdp] = ()) -> None:
    """Store a target and its sources in one ``.npz``; tables are row-major."""
    tasks = [target, *sources]
    arrays = {}
    for i, t in enumerate(tasks):
        arrays.update(_mdp_arrays(t, f"task{i}_"))
    header = {"format": FORMAT_VERSION, "tasks": [_mdp_header(t) for t in tasks]}
    arrays["header"] = np.array(json.dumps(header))
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_tasks(path) -> tuple[EpisodicMdp, list[EpisodicMdp]]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        tasks = []
        for i, h in enumerate(header["tasks"]):
            p = f"task{i}_"
            tasks.append(
                EpisodicMdp(
                    num_states=h["num_states"],
                    num_actions=h["num_actions"],
                    horizon=h["horizon"],
                    discount=h["discount"],
                    rewards=z[p + "rewards"],
                    transitions=z[p + "transitions"] if p + "transitions" in z else None,
                    next_states=z[p + "next_states"] if p + "next_states" in z else None,
                    initial_state=h["initial_state"],
                    state_features=z[p + "state_features"] if p + "state_features" in z else None,
                    meta=h["meta"],
                )
            )
    return tasks[0], tasks[1:]


def save_mdp(path, mdp: EpisodicMdp) -> None:
    save_tasks(path, mdp)


def load_mdp(path) -> EpisodicMdp:
    return load_tasks(path)[0]


def mdp_hash(tasks: Sequence[EpisodicMdp]) -> str:
    """Content hash of the tables that define a set of tasks."""
    h = hashlib.sha256()
    for t in tasks:
        h.update(json.dumps({k: v for k, v in _mdp_header(t).items() if k != "meta"}, sort_keys=True).encode())
        for name, arr in sorted(_mdp_arrays(t, "").items()):
            h.update(name.encode())
            h.update(np.ascontiguousarray(arr, dtype=np.float64 if arr.dtype.kind == "f" else np.int64).tobytes())
    return h.hexdigest()


def save_ratio_table(path, table: np.ndarray) -> None:
    """An ``(H, S, A, S)`` ratio table, stored like a transition table."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 4:
        raise ValueError("ratio table must have shape (H, S, A, S)")
    with open(path, "wb") as fh:
        np.savez_compressed(fh, omega=table, header=np.array(json.dumps({"format": FORMAT_VERSION})))


def load_ratio_table(path) -> np.ndarray:
    with np.load(path, allow_pickle=False) as z:
        return np.array(z["omega"])


def save_buffers(path, buffers: Sequence[ReplayBuffer]) -> None:
    arrays = {}
    meta = []
    for i, buf in enumerate(buffers):
        meta.append({"task_id": buf.task_id, "horizon": buf.horizon})
        samples = buf.samples()
        cols = np.array([(s.stage, s.state, s.action, s.next_state) for s in samples], dtype=np.int64).reshape(-1, 4)
        arrays[f"buf{i}_index"] = cols
        arrays[f"buf{i}_reward"] = np.array([s.reward for s in samples], dtype=float)
    arrays["header"] = np.array(json.dumps({"format": FORMAT_VERSION, "buffers": meta}))
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_buffers(path) -> list[ReplayBuffer]:
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        out = []
        for i, m in enumerate(header["buffers"]):
            buf = ReplayBuffer(m["horizon"], task_id=m["task_id"])
            for (h, s, a, s2), r in zip(z[f"buf{i}_index"], z[f"buf{i}_reward"]):
                buf.add(TransitionSample(m["task_id"], int(h), int(s), int(a), float(r), int(s2)))
            out.append(buf)
    return out


CHECKPOINT_ATTRS = ("q_", "delta_", "Q_", "Q_raw_", "q_base_", "bonus_")


def save_checkpoint(path, agent) -> None:
    """Value tables plus constructor parameters of a fitted agent."""
    arrays = {k: np.asarray(getattr(agent, k)) for k in CHECKPOINT_ATTRS if hasattr(agent, k)}
    params = {k: v for k, v in agent.get_params().items() if isinstance(v, (int, float, str, bool, type(None)))}
    header = {"format": FORMAT_VERSION, "class": type(agent).__name__, "params": params}
    arrays["header"] = np.array(json.dumps(header))
    with open(path, "wb") as fh:
        np.savez_compressed(fh, **arrays)


def load_checkpoint(path) -> dict:
    """``{"class": ..., "params": {...}, "<table>": ndarray, ...}``."""
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        out = {"class": header["class"], "params": header["params"]}
        out.update({k: np.array(z[k]) for k in z.files if k != "header"})
    return out


def write_records_csv(path, records: Sequence[EpisodeRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        cum = 0.0
        for r in records:
            cum += r.regret
            w.writerow([r.episode, repr(float(r.ret)), repr(float(r.regret)), repr(cum), repr(float(r.epsilon))])


def read_records_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in CSV_COLUMNS}


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
