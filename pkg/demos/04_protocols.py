"""Evaluation protocols and what each one holds out.

k-fold mixes subjects between train and test; leave-one-subject-out tests on
people the model has never seen; session-out trains and tests within each
subject on disjoint recording sessions. The row-normalized confusion matrix
shows which gestures get mixed up.
"""
import numpy as np

from esngesture import PRESETS, SynthSpec, plan_split, run_eval, synth_generate
from esngesture.evaluation import confusion_percent

spec = SynthSpec(samples_per_class=30, subjects=5, sessions=2, noise=1.0)
records = synth_generate(spec, as_maps=True)
cfg = PRESETS["soli_mr"]
for protocol in ("kfold_10", "leave_one_subject_out", "leave_one_session_out"):
    rep = run_eval(records, cfg, plan_split(records, protocol, seed=0))
    print(f"{protocol:22s} {len(rep.folds):2d} folds  "
          f"{100 * rep.mean_accuracy:5.1f}% +/- {100 * rep.std_accuracy:.1f}")

pct = confusion_percent(rep.confusion)
np.fill_diagonal(pct, 0)
i, j = np.unravel_index(pct.argmax(), pct.shape)
print(f"most frequent confusion: {rep.classes[i]} -> {rep.classes[j]} ({pct[i, j]:.1f}% of its row)")
