"""Hybrid ensemble detector for machine-generated text.

Three methodologically diverse detectors (a hashed-feature MLP classifier,
a perturbation likelihood-curvature scorer backed by a smoothed n-gram
language model, and a stylometric feature analyzer) are calibrated with
Platt scaling and fused with weights found by an exhaustive grid search
over the probability simplex, maximizing F1 on a validation split.
"""

__version__ = "0.1.0"
