"""Four readouts on the same reservoir states.

Reservoir states are computed once and shared; only the readout differs:
linear ridge, ridge on the [1, r, tanh r] expansion, an RBF SVM, and a
random forest.

The SVM default C = 10 underfits here: multi-reservoir states on this
synthetic corpus are strongly correlated, so the scale-heuristic RBF kernel
is very smooth and needs a weaker margin penalty. A larger C recovers
ridge-level accuracy.
"""
from esngesture import PRESETS, SynthSpec, plan_split, run_eval, synth_generate

records = synth_generate(SynthSpec(samples_per_class=40, noise=1.0), as_maps=True)
plan = plan_split(records, "holdout_50_50", seed=0)
for readout, extra in (("rr_l", {}), ("rr_n", {}), ("svm", {}), ("svm", {"svm_c": 1000.0}),
                       ("rf", {"forest_trees": 100})):
    cfg = PRESETS["soli_mr"].with_(readout=readout, **extra)
    rep = run_eval(records, cfg, plan)
    note = ", ".join(f"{k}={v:g}" for k, v in extra.items())
    print(f"{cfg.name:8s} {note:18s} accuracy {100 * rep.mean_accuracy:5.1f}%")
