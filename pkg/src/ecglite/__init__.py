"""ecglite: a lightweight CNN+LSTM pipeline for rhythm classification of ECG records.

Subpackages and modules:

- ``wfdb_io``: PhysioNet-style header/signal/annotation parsing.
- ``dsp``: baseline-wander removal, resampling to 128 Hz, normalization.
- ``dataset``: 500-sample segment extraction, class capping/weights, splits,
  and the on-disk dataset container.
- ``nn``: from-scratch layers, the reference conv+LSTM model, Adam, training.
- ``evaluation``: confusion matrix, Se/Sp/Acc, ROC/AUC, report emission.
- ``model_store``: compact binary model files with a CRC32 trailer.
- ``synthetic``: labeled synthetic waveforms for sanity runs and demos.
- ``cli``: the ``ecglite`` command (preprocess, segment, train, evaluate,
  infer, bench).
"""
from . import dataset, dsp, evaluation, model_store, nn, synthetic, wfdb_io
from .wfdb_io import CLASS_NAMES, N_CLASSES, EcgRecord, RhythmClass

__version__ = "0.1.0"

__all__ = [
    "CLASS_NAMES", "N_CLASSES", "EcgRecord", "RhythmClass", "dataset", "dsp",
    "evaluation", "model_store", "nn", "synthetic", "wfdb_io", "__version__",
]
