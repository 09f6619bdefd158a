"""Extreme multi-class classification by merging classes into hashed buckets.

``R`` independent softmax classifiers, each over ``B`` buckets chosen by a
2-universal hash of the class id, replace one ``K``-way classifier. Memory
and inference cost scale with ``B*R`` instead of ``K``.
"""
from .analysis import CostReport, PlanRequest, audit_distinguishability, cost_report, plan_R
from .core import (
    EstimatorKind,
    MachConfig,
    MachModel,
    estimate_class_probability,
    mach_train,
    meta_probabilities,
    merge_probabilities,
    predict,
    score_classes,
    scores_from_meta,
)
from .data_io import Dataset, SparseVector, hashed_label_view, load_libsvm, write_libsvm
from .hashing import HashKind, HashSpec, bucket_table, hash_class, identity_spec, make_hash_family
from .persist import ModelFormatError, load_model, save_model
from .softmax import SoftmaxModel, TrainConfig, gradient, predict_proba, train_logistic

__version__ = "0.1.0"
