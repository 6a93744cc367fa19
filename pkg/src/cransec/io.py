"""JSON round-trips for configs, channels, beamformers and solutions.

Complex arrays are stored as {"shape": [...], "re": [...], "im": [...]}.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analogbf import AnalogBeamformer
from .model import ChannelSet, SystemConfig
from .rates import BFSolution


def pack(a) -> dict:
    a = np.asarray(a)
    return {"shape": list(a.shape), "re": np.real(a).ravel().tolist(), "im": np.imag(a).ravel().tolist()}


def unpack(d: dict) -> np.ndarray:
    shape = tuple(d["shape"])
    return (np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)).reshape(shape)


CHANNEL_FIELDS = ("g", "h", "he_true", "he_est")
PATH_FIELDS = ("user_gains", "user_angles", "eve_gains", "eve_angles")


def channels_to_dict(ch: ChannelSet) -> dict:
    out = {name: pack(getattr(ch, name)) for name in CHANNEL_FIELDS}
    out.update({name: pack(getattr(ch, name)) for name in PATH_FIELDS if getattr(ch, name) is not None})
    return out


def channels_from_dict(d: dict) -> ChannelSet:
    kw = {name: unpack(d[name]) for name in CHANNEL_FIELDS}
    kw.update({name: np.real(unpack(d[name])) if "angles" in name else unpack(d[name])
               for name in PATH_FIELDS if name in d})
    return ChannelSet(**kw)


def beamformer_to_dict(bf: AnalogBeamformer) -> dict:
    return {"phase_index": np.asarray(bf.phase_index).tolist(), "assignment": np.asarray(bf.assignment).tolist(),
            "bits": int(bf.bits), "f": pack(bf.f)}


def beamformer_from_dict(d: dict) -> AnalogBeamformer:
    return AnalogBeamformer(f=unpack(d["f"]), phase_index=np.asarray(d["phase_index"]),
                            assignment=np.asarray(d["assignment"]), bits=int(d["bits"]))


def solution_to_dict(sol: BFSolution) -> dict:
    out = {"V0": pack(sol.V0), "Vk": pack(sol.Vk), "Lambda": pack(sol.Lambda)}
    if sol.v0 is not None:
        out["v0"] = pack(sol.v0)
    if sol.vk is not None:
        out["vk"] = pack(sol.vk)
    return out


def solution_from_dict(d: dict) -> BFSolution:
    return BFSolution(V0=unpack(d["V0"]), Vk=unpack(d["Vk"]), Lambda=unpack(d["Lambda"]),
                      v0=unpack(d["v0"]) if "v0" in d else None, vk=unpack(d["vk"]) if "vk" in d else None)


def save_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True))
    return path


def save_case(path, cfg: SystemConfig, channels: ChannelSet, bf: AnalogBeamformer | None = None,
              solution: BFSolution | None = None) -> Path:
    payload = {"config": cfg.to_dict(), "channels": channels_to_dict(channels)}
    if bf is not None:
        payload["beamformer"] = beamformer_to_dict(bf)
    if solution is not None:
        payload["solution"] = solution_to_dict(solution)
    return save_json(path, payload)


def load_case(path):
    """Returns (cfg, channels, bf or None, solution or None)."""
    d = json.loads(Path(path).read_text())
    bf = beamformer_from_dict(d["beamformer"]) if "beamformer" in d else None
    sol = solution_from_dict(d["solution"]) if "solution" in d else None
    return SystemConfig.from_dict(d["config"]), channels_from_dict(d["channels"]), bf, sol
