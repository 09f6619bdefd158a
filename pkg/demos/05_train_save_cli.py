# coding: utf-8

# # Training in parallel, saving and using the command line
#
# Sub-models are independent, so they train on separate processes. The result
# does not depend on the number of workers.

import io
import os
import tempfile

from mach.cli import main
from mach.core import MachConfig, mach_train, predict
from mach.persist import dump_model, load_model, save_model
from mach.synth import make_synthetic
from mach.softmax import TrainConfig

ds = make_synthetic(K=32, d=20, N=3000, seed=2).dataset
cfg = MachConfig(32, 8, 4, seed=5, train=TrainConfig(epochs=3, learning_rate=1.0))
serial = mach_train(ds, cfg, workers=1)
parallel = mach_train(ds, cfg, workers=4)
print("identical:", dump_model(serial) == dump_model(parallel))

tmp = tempfile.mkdtemp()
path = os.path.join(tmp, "model.mach")
save_model(serial, path)
back = load_model(path)
print("round trip equal:", back == serial)
print(predict(back, ds.subset(range(5)), top_k=3).top_classes)

# Half the repetitions, read straight from the offset table.

half = load_model(path, subset=[0, 1])
print("R after subset load:", half.config.R)

# The same work through the CLI; every line is key=value.

data = os.path.join(tmp, "synth.svm")
for argv in (
    ["synth", "--K", "32", "--d", "20", "--N", "3000", "--seed", "2", "--out", data],
    ["train", "--data", data, "--B", "8", "--R", "4", "--epochs", "3", "--lr", "1.0",
     "--out", path],
    ["eval", "--model", path, "--data", data, "--all-estimators"],
    ["audit", "--model", path, "--max-pairs", "3"],
):
    out = io.StringIO()
    code = main(argv, out=out)
    print(f"$ mach {' '.join(argv[:1])} -> exit {code}")
    print(out.getvalue().rstrip())
