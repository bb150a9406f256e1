"""Real-time underwater survey analytics pipeline.

Frame ingestion with geotagging, batched pluggable detection, frame
skipping with optical-flow track propagation, queue-decoupled concurrent
stages, a live review/curation HTTP service, and an evaluation harness.
"""

__version__ = "0.1.0"
