"""Topic selection and language polarization measurement for TV news.

The package turns raw episode transcripts into station-level measures:
weakly supervised topic labels refined by human annotation, a leave-out
estimator of how well language identifies a station's political side,
topic-coverage divergence between station pairs, and audience consumption
metrics from a viewing panel.
"""

__version__ = "0.1.0"
