"""Score-file adapter between real transformer detectors and the ensemble
pipeline.

The bridge reads the pipeline's corpus JSONL, runs either a sequence
classifier (detector m1) or a causal-LM likelihood-curvature scorer with
masked-LM infilling (detector m2), and writes score-record JSONL that the
pipeline ingests verbatim. Calibration stays on the pipeline side.
"""

__version__ = "0.1.0"
