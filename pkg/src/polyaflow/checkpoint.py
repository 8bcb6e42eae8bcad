"""Versioned JSON checkpoints: full model state, exact float64 round-trip.

Floats are serialized through json's repr path, which emits the shortest
decimal string that parses back to the identical double, so a saved and
reloaded model evaluates bit-for-bit the same.
"""

import dataclasses
import json

import numpy as np

from .baselines import FixedPrior, LearnableHistogram
from .flow import CouplingLayer, DensityEstimator, FlowModel, ScalingLayer, SigmoidLayer
from .polya_tree import PolyaTreeModel
from .train import TrainConfig

SCHEMA_VERSION = 1


@dataclasses.dataclass
class Checkpoint:
    """A reloaded checkpoint: the estimator plus its training context."""

    estimator: DensityEstimator
    config: TrainConfig = None
    seed: int = None
    standardization: tuple = None      # (mean, std) arrays or None
    summary: dict = None


def _flow_payload(flow):
    layers = []
    for layer in flow.layers:
        if isinstance(layer, CouplingLayer):
            layers.append({
                "type": "coupling",
                "mask": [bool(m) for m in layer.mask],
                "activation": layer.activation,
                "weights": [w.tolist() for w in layer.weights],
            })
        elif isinstance(layer, ScalingLayer):
            layers.append({"type": "scaling", "log_scale": layer.log_scale.tolist()})
        elif isinstance(layer, SigmoidLayer):
            layers.append({"type": "sigmoid"})
        else:
            raise TypeError(f"cannot serialize layer {type(layer).__name__}")
    return {"dims": flow.dims, "layers": layers}


def _flow_restore(payload):
    layers = []
    for spec in payload["layers"]:
        kind = spec["type"]
        if kind == "coupling":
            layers.append(CouplingLayer(
                np.asarray(spec["mask"], dtype=bool),
                [np.asarray(w, dtype=np.float64) for w in spec["weights"]],
                spec["activation"],
            ))
        elif kind == "scaling":
            layers.append(ScalingLayer(np.asarray(spec["log_scale"], dtype=np.float64)))
        elif kind == "sigmoid":
            layers.append(SigmoidLayer())
        else:
            raise ValueError(f"unknown flow layer type {kind!r} in checkpoint")
    return FlowModel(int(payload["dims"]), layers)


def _base_payload(base):
    if isinstance(base, PolyaTreeModel):
        return {
            "kind": "vpt",
            "levels": base.levels,
            "dims": base.dims,
            "partition_mode": base.partition_mode,
            "raw_left": base.raw_left.tolist(),
            "raw_right": base.raw_right.tolist(),
            "split_raw": None if base.split_raw is None else base.split_raw.tolist(),
        }
    if isinstance(base, LearnableHistogram):
        return {
            "kind": "histogram",
            "bins": base.bins,
            "dims": base.dims,
            "raw_widths": base.raw_widths.tolist(),
            "raw_logits": base.raw_logits.tolist(),
        }
    if isinstance(base, FixedPrior):
        return {"kind": base.kind, "dims": base.dims}
    raise TypeError(f"cannot serialize base {type(base).__name__}")


def _base_restore(payload):
    kind = payload["kind"]
    if kind == "vpt":
        split = payload["split_raw"]
        return PolyaTreeModel(
            int(payload["levels"]),
            int(payload["dims"]),
            np.asarray(payload["raw_left"], dtype=np.float64),
            np.asarray(payload["raw_right"], dtype=np.float64),
            payload["partition_mode"],
            None if split is None else np.asarray(split, dtype=np.float64),
        )
    if kind == "histogram":
        return LearnableHistogram(
            int(payload["bins"]),
            int(payload["dims"]),
            np.asarray(payload["raw_widths"], dtype=np.float64),
            np.asarray(payload["raw_logits"], dtype=np.float64),
        )
    if kind in ("gaussian", "logistic"):
        return FixedPrior(kind, int(payload["dims"]))
    raise ValueError(f"unknown prior kind {kind!r} in checkpoint")


def save_checkpoint(path, estimator, config=None, seed=None, standardization=None,
                    summary=None):
    """Write the full estimator state (and training context) as JSON."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "flow": _flow_payload(estimator.flow),
        "prior": _base_payload(estimator.base),
        "smooth_base": bool(estimator.smooth_base),
        "config": None if config is None else dataclasses.asdict(config),
        "seed": None if seed is None else int(seed),
        "standardization": None if standardization is None else {
            "mean": np.asarray(standardization[0], dtype=np.float64).tolist(),
            "std": np.asarray(standardization[1], dtype=np.float64).tolist(),
        },
        "summary": summary,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    """Reload a checkpoint; rejects unknown schema versions."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported checkpoint schema version {version!r} "
            f"(this build reads {SCHEMA_VERSION})"
        )
    estimator = DensityEstimator(
        _flow_restore(doc["flow"]),
        _base_restore(doc["prior"]),
        smooth_base=bool(doc.get("smooth_base", False)),
    )
    config = doc.get("config")
    if config is not None:
        config = TrainConfig(**config)
    standardization = doc.get("standardization")
    if standardization is not None:
        standardization = (
            np.asarray(standardization["mean"], dtype=np.float64),
            np.asarray(standardization["std"], dtype=np.float64),
        )
    return Checkpoint(
        estimator=estimator,
        config=config,
        seed=doc.get("seed"),
        standardization=standardization,
        summary=doc.get("summary"),
    )
