"""
Training and evaluation loops.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional

import numpy as np

from ..data.augment import AugmentConfig, augment
from ..data.dataset import Dataset
from ..data.rng import Rng
from ..errors import ConfigError, NumericError, SizeError
from ..logger import get_logger
from ..numerics import Adam, Graph, save_checkpoint, scale
from .metrics import classification_metrics, restricted_argmax, segmentation_metrics

logger = get_logger(__name__)


@dataclass
class TrainSettings:
    epochs: int = 50
    lr: float = 1e-3
    batch: int = 16
    seed: int = 42
    jobs: int = 1
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    @classmethod
    def from_dict(cls, values: Dict) -> "TrainSettings":
        values = dict(values)
        aug = AugmentConfig.from_dict(values.pop("augment", {}) or {})
        known = {f.name for f in fields(cls)} - {"augment"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown train key(s): {', '.join(unknown)}")
        settings = cls(augment=aug, **values)
        if settings.epochs < 0 or settings.batch < 1 or settings.jobs < 1 or settings.lr < 0:
            raise ConfigError("train needs epochs >= 0, batch >= 1, jobs >= 1 and lr >= 0")
        return settings


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    oa: float
    macc: float
    inst_miou: Optional[float] = None
    cls_miou: Optional[float] = None
    per_category_iou: Dict[str, float] = field(default_factory=dict)

    def row(self) -> Dict:
        row = {"epoch": self.epoch, "loss": self.loss, "oa": self.oa, "macc": self.macc}
        if self.inst_miou is not None:
            row["inst_miou"] = self.inst_miou
            row["cls_miou"] = self.cls_miou
            for name, iou in self.per_category_iou.items():
                row[f"iou_{name}"] = iou
        return row


@dataclass
class History:
    records: List[EpochRecord] = field(default_factory=list)

    def rows(self) -> List[Dict]:
        return [r.row() for r in self.records]

    @property
    def final(self) -> Optional[EpochRecord]:
        return self.records[-1] if self.records else None

    @property
    def losses(self) -> List[float]:
        return [r.loss for r in self.records]


def _is_segmenter(model) -> bool:
    return model.cfg.task == "segment"


def predict(model, cloud, parts_by_category=None):
    """Class id, or per-point part ids restricted to the cloud's category."""
    if not _is_segmenter(model):
        return int(np.argmax(model.forward(cloud).data[0]))
    logits = model.forward(cloud, cloud.category).data
    if parts_by_category:
        return restricted_argmax(logits, parts_by_category[cloud.category])
    return np.argmax(logits, axis=1)


def evaluate(model, dataset: Dataset, jobs: int = 1) -> Dict:
    """
    Augmentation-free evaluation with frozen parameters.

    Args:
        model: Classifier or PartSegmenter
        dataset: Labelled samples
        jobs: Worker threads for the per-sample forward passes

    Returns:
        dict with oa, macc, per_class_acc and, for segmentation, inst_miou,
        cls_miou and per_category_iou
    """
    if len(dataset) == 0:
        raise SizeError("cannot evaluate an empty dataset")
    parts = dataset.parts_by_category

    def run(cloud):
        return predict(model, cloud, parts)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            predictions = list(pool.map(run, dataset.samples))
    else:
        predictions = [run(cloud) for cloud in dataset.samples]

    if not _is_segmenter(model):
        return classification_metrics(dataset.labels, predictions, model.cfg.num_classes)

    truth = np.concatenate([s.seg_labels for s in dataset.samples])
    flat = np.concatenate(predictions)
    result = classification_metrics(truth, flat, model.cfg.num_parts, warn=False)
    if parts is None:
        parts = {s.category: sorted(set(s.seg_labels.tolist())) for s in dataset.samples}
    result.update(segmentation_metrics(
        [(s.category, pred, s.seg_labels) for s, pred in zip(dataset.samples, predictions)],
        parts,
        dataset.class_names,
    ))
    return result


def _nonfinite_report(graph: Graph) -> str:
    found = graph.first_nonfinite()
    if found is None:
        return "no recorded op produced a non-finite value"
    position, node = found
    return f"first non-finite tensor produced by op #{position} ({node.op}, shape {node.output.shape})"


def train(
    model,
    dataset: Dataset,
    epochs: int = 50,
    lr: float = 1e-3,
    seed: int = 42,
    batch: int = 16,
    augment_cfg: Optional[AugmentConfig] = None,
    test_set: Optional[Dataset] = None,
    jobs: int = 1,
    progress=None,
    checkpoint_path=None,
) -> History:
    """
    Minibatch Adam on cross entropy.

    Shuffling and augmentation draw from streams named by (seed, purpose,
    epoch/sample), so a run is reproducible from its seed. With a test set the
    per-epoch oa/macc are test metrics; otherwise they are running training
    accuracies on the augmented samples.
    """
    dataset.validate()
    if augment_cfg is None:
        augment_cfg = AugmentConfig(enabled=False)
    optimizer = Adam(model.parameters(), lr=lr)
    segmenter = _is_segmenter(model)
    history = History()
    n = len(dataset)

    if progress:
        progress.start()
    for epoch in range(1, epochs + 1):
        order = Rng(seed, "shuffle", epoch).generator.permutation(n)
        total = 0.0
        seen_true, seen_pred = [], []
        for start in range(0, n, batch):
            members = order[start:start + batch]
            for i in members:
                cloud = dataset.samples[int(i)]
                if augment_cfg.enabled:
                    cloud = augment(cloud, Rng(seed, "augment", epoch * n + int(i)), augment_cfg)
                with Graph() as graph:
                    loss, logits = model.loss(cloud)
                    scaled = scale(loss, 1.0 / len(members))
                value = loss.item()
                if not math.isfinite(value):
                    raise NumericError(
                        f"non-finite loss {value} at epoch {epoch}, sample {int(i)}: {_nonfinite_report(graph)}"
                    )
                graph.backward(scaled)
                total += value
                if segmenter:
                    seen_true.append(cloud.seg_labels)
                    seen_pred.append(np.argmax(logits.data, axis=1))
                else:
                    seen_true.append(cloud.label)
                    seen_pred.append(int(np.argmax(logits.data[0])))
            optimizer.step()

        record = EpochRecord(epoch=epoch, loss=total / n, oa=0.0, macc=0.0)
        if test_set is not None:
            metrics = evaluate(model, test_set, jobs=jobs)
            record.inst_miou = metrics.get("inst_miou")
            record.cls_miou = metrics.get("cls_miou")
            record.per_category_iou = metrics.get("per_category_iou", {})
        elif segmenter:
            metrics = classification_metrics(
                np.concatenate(seen_true), np.concatenate(seen_pred), model.cfg.num_parts, warn=False
            )
        else:
            metrics = classification_metrics(seen_true, seen_pred, model.cfg.num_classes, warn=False)
        record.oa, record.macc = metrics["oa"], metrics["macc"]
        history.records.append(record)
        logger.info("epoch finished", epoch=epoch, loss=record.loss, oa=record.oa, macc=record.macc)
        if progress:
            progress.update(detail=f"epoch {epoch} loss={record.loss:.4f} oa={record.oa:.3f}")

    if progress:
        progress.finish()
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, model.parameters())
    return history
