"""ddimine: drug-drug interaction evidence mining from medical abstracts.

The package covers the full desk-scale pipeline: corpus ingestion and drug
lexicon matching, pair labeling against an interaction catalog, leakage-free
train/dev/test splitting, sparse count and embedding features, L1-regularized
linear classifiers with AUC-tuned cross-validation, confusion/ROC metrics,
and time-window interaction alerts over medication administration records.
"""

__version__ = "0.1.0"
