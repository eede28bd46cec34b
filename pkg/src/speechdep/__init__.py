"""Speaker-level depression classification from speech.

Pipeline: WAV loading / synthetic corpus generation -> fixed-length crops ->
normalized log-spectrograms -> 1d-CNN trained with Adadelta -> ensemble fusion
of M machines -> speaker-level metrics under speaker-disjoint cross-validation.
"""

__version__ = "0.1.0"
