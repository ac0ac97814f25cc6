"""Skeleton-based kinesics recognition pipeline.

Ingests dyadic 3D skeleton recordings, trains a spatial-temporal graph
convolutional backbone on activity labels, and trains a small CNN head on the
frozen backbone's features to classify the five kinesic categories.
"""

__version__ = "0.1.0"
