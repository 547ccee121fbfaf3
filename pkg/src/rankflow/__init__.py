"""rankflow: fixation-based saliency ranking pipeline.

Generates saliency rank-order ground truth from fixation data, ranks flexible
proposal counts through circular fixed-size windows with exclusive per-window
classification, trains a small window scorer, and evaluates rankings with
Spearman correlation and salient-set F1.
"""

__version__ = "0.1.0"
