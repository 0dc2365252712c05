"""
Accuracy and IoU metrics.
"""

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..logger import get_logger

logger = get_logger(__name__)


def classification_metrics(
    y_true: Sequence[int], y_pred: Sequence[int], num_classes: int, warn: bool = True
) -> Dict:
    """
    Overall accuracy, mean per-class accuracy and per-class accuracies.

    Classes with no samples are reported as None and left out of mAcc.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        return {"oa": 0.0, "macc": 0.0, "per_class_acc": [None] * num_classes}
    per_class: List[Optional[float]] = []
    for c in range(num_classes):
        members = y_true == c
        count = int(np.count_nonzero(members))
        if count == 0:
            if warn:
                logger.warning("class has no samples; excluded from mAcc", class_id=c)
            per_class.append(None)
            continue
        per_class.append(float(np.count_nonzero(y_pred[members] == c)) / count)
    present = [acc for acc in per_class if acc is not None]
    return {
        "oa": float(np.count_nonzero(y_true == y_pred)) / y_true.size,
        "macc": float(np.mean(present)) if present else 0.0,
        "per_class_acc": per_class,
    }


def part_ious(pred: np.ndarray, target: np.ndarray, parts: Iterable[int]) -> List[float]:
    """TP / (TP + FP + FN) per part; a part absent from both counts as 1."""
    pred = np.asarray(pred)
    target = np.asarray(target)
    ious = []
    for part in parts:
        p = pred == part
        t = target == part
        union = int(np.count_nonzero(p | t))
        if union == 0:
            ious.append(1.0)
        else:
            ious.append(int(np.count_nonzero(p & t)) / union)
    return ious


def restricted_argmax(logits: np.ndarray, parts: Sequence[int]) -> np.ndarray:
    """Per-point argmax over the category's own part ids."""
    parts = np.asarray(parts, dtype=np.int64)
    return parts[np.argmax(np.asarray(logits)[:, parts], axis=1)]


def segmentation_metrics(
    shapes: Iterable[Tuple[int, np.ndarray, np.ndarray]],
    parts_by_category: Mapping[int, Sequence[int]],
    category_names: Optional[Sequence[str]] = None,
) -> Dict:
    """
    Instance and category mIoU.

    Args:
        shapes: (category, predicted parts, target parts) per shape
        parts_by_category: Part ids belonging to each category
        category_names: Optional names used as keys of per_category_iou

    Returns:
        dict with inst_miou, cls_miou and per_category_iou
    """
    by_category: Dict[int, List[float]] = {}
    shape_ious = []
    for category, pred, target in shapes:
        miou = float(np.mean(part_ious(pred, target, parts_by_category[category])))
        shape_ious.append(miou)
        by_category.setdefault(category, []).append(miou)
    if not shape_ious:
        return {"inst_miou": 0.0, "cls_miou": 0.0, "per_category_iou": {}}
    per_category = {}
    for category in sorted(by_category):
        key = category_names[category] if category_names else str(category)
        per_category[key] = float(np.mean(by_category[category]))
    return {
        "inst_miou": float(np.mean(shape_ious)),
        "cls_miou": float(np.mean(list(per_category.values()))),
        "per_category_iou": per_category,
    }
