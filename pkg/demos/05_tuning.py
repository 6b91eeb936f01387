"""Random search over reservoir hyperparameters.

Tuning only ever sees the training half of a holdout split; each trial is
scored by 3-fold accuracy inside it. The best configuration is then trained
on the whole training half and tested once on the held-out half.
"""
from esngesture import PRESETS, SynthSpec, plan_split, run_eval, synth_generate
from esngesture.hpo import apply_params, default_space, random_search

records = synth_generate(SynthSpec(samples_per_class=30, noise=1.0), as_maps=True)
plan = plan_split(records, "holdout_50_50", seed=0)
train_ids = set(plan.folds[0].train)
train = [r for r in records if r.id in train_ids]

base = PRESETS["soli_mr"]
result = random_search(default_space(base), budget=6, records=train, cfg=base, seed=0,
                       log=lambda t: print(f"trial {t.index}: cv {100 * t.objective:5.1f}%"))
best = apply_params(base, result.best.params)
print("best:", {k: round(v, 4) if isinstance(v, float) else v for k, v in result.best.params.items()})
for name, cfg in (("preset", base), ("tuned", best)):
    print(f"{name:6s} holdout accuracy {100 * run_eval(records, cfg, plan).mean_accuracy:5.1f}%")
