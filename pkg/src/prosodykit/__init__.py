"""Speech-prosody toolkit.

Submodules:

- ``lexicon``: ARPABET pronunciation dictionaries and tense/lax vowel classes
- ``clarity``: clarity-mode duration planning and duration application
- ``stimgen``: random pitch/stretch breakpoint profiles and trial batches
- ``dsp``: phase-vocoder time-stretch / pitch-shift, f0 tracking, WAV I/O
- ``features``: ten-feature voice profiles, robust scaling, k-means
- ``analysis``: classification-image kernels, perception statistics, WER
- ``ambiguity``: F1/F2 grid search between two vowels via injected oracles
- ``session``: 2AFC experiment HTTP service with append-only response logs
- ``cli``: the ``prosodykit`` command line
"""

__version__ = "0.1.0"
