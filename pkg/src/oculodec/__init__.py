"""Offline saccade decoding from intravascular neural recordings.

Preprocessing, cardiac artefact removal, source separation, gaze-based
epoching, feature extraction, ERP/r²/spectrogram analysis and classification
with leave-one-run-out evaluation, checked against a synthetic session
generator with planted ground truth.
"""

__version__ = "0.1.0"
