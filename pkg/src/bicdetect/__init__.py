"""Bug-inducing commit detection from syntax-pattern features.

Token patterns (kind paths from statement roots to leaves) and token
sequences (n-grams over normalized token kinds) are mined from commit
patches, combined with churn metrics, ranked, selected and fed to
classifiers.
"""

__version__ = "0.1.0"
