# coding: utf-8

# # Memory versus accuracy on a synthetic problem
#
# A 64-class sparse softmax problem with a known ground truth. One-vs-all keeps
# K*d weights; MACH keeps B*R*d. Accuracy climbs with R towards the one-vs-all
# baseline.

import time

import numpy as np

from mach.analysis import cost_report
from mach.core import MachConfig, mach_train
from mach.evaluate import accuracies, accuracy, train_oaa
from mach.softmax import TrainConfig
from mach.synth import make_synthetic, truth_accuracy

data = make_synthetic(K=64, d=32, N=8000, seed=0)
ds = data.dataset
train, test = ds.subset(np.arange(6000)), ds.subset(np.arange(6000, 8000))
cfg = TrainConfig(epochs=10, batch_size=64, learning_rate=1.0, lr_decay=0.9)

print(f"Bayes rate of the generating model: {truth_accuracy(data.truth, test):.3f}")

t0 = time.perf_counter()
oaa = train_oaa(train, cfg)
print(f"one-vs-all: accuracy {accuracy(oaa, test):.3f}, {64 * 32} weights, "
      f"{time.perf_counter() - t0:.1f}s")

for B, R in ((16, 1), (16, 2), (16, 4), (16, 8), (8, 8)):
    t0 = time.perf_counter()
    mm = mach_train(train, MachConfig(64, B, R, seed=0, train=cfg))
    acc = accuracies(mm, test)
    cost = cost_report(64, B, R, 32)
    print(f"B={B:2d} R={R}: " + " ".join(f"{k}={v:.3f}" for k, v in acc.items())
          + f"  weights={cost.model_floats} ({time.perf_counter() - t0:.1f}s)")

# At this small K the hashed model is not smaller than one-vs-all; the saving
# B*R/K only appears once K is much larger than B*R.

print(cost_report(105033, 32, 25, 422713).reduction_ratio)
