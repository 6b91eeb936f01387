"""Bundled fixture corpus: 12 small synthetic RDM samples, 3 classes.

The data under ``tiny/`` is produced by :func:`regenerate` from
:data:`TINY_SPEC` and is committed so loading never depends on the generator.
"""
from __future__ import annotations

from pathlib import Path

from ..synth import SynthSpec

__all__ = ["TINY_SPEC", "fixture_path", "regenerate"]

ROOT = Path(__file__).resolve().parent

TINY_SPEC = SynthSpec(classes=3, samples_per_class=4, subjects=2, sessions=2,
                      min_steps=10, max_steps=20, noise=0.1, seed=7, antennas=2,
                      range_bins=8, doppler_bins=8, blob_width=1.0, doppler_gain=2.0)


def fixture_path(name: str = "tiny") -> Path:
    """Manifest path of a bundled fixture dataset."""
    path = ROOT / name / "manifest.json"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled fixture named {name!r}")
    return path


def regenerate(directory=None) -> Path:
    from ..datasets import save
    from ..synth import synth_iter

    directory = Path(directory) if directory is not None else ROOT / "tiny"
    return save(synth_iter(TINY_SPEC), directory, "tiny", TINY_SPEC.class_names)
