"""
Soft Label Localization

Static and dynamic soft label coding for classification-based 2D sound source
localization with ad-hoc microphone arrays, with a synthetic scene generator,
a compact set classifier and the MAE / ACC / UB-MAE metric suite.
"""

__version__ = "0.1.0"
