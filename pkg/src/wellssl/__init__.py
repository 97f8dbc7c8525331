"""Non-contrastive self-supervised embeddings for multivariate well-log intervals."""

__version__ = "0.1.0"

FEATURES = ("DRHO", "DENS", "GR", "DTC")
INTERVAL_LENGTH = 100
