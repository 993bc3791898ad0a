"""Seizure detection from EEG windows with wavelet time-frequency statistics.

Modules
-------
io_datasets
    Bonn and generic corpora, segmentation, splits, synthetic recordings.
dsp_preprocess
    Zero-phase bandpass and amplitude clipping.
spectral_features
    Morse-wavelet CWT, MS-WTC / M-WTC / S-WTC reductions, FFT periodogram.
temporal_features
    Empirical mode decomposition baseline.
micro_nn
    Numpy 1-D CNN with explicit backpropagation and Adam.
pipeline
    Segment to feature tensor, feature dumps.
eval_harness
    Metrics, Monte Carlo cross-validation, report export.
cli
    ``mswtc`` command-line front end.
"""

__version__ = "0.1.0"
