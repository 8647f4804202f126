"""Embedding container exporter for the compositional-caching pipeline."""

from .container import write_container
from .encoders import HashEncoder, ImageDecode, ModelLoad, resolve_encoder
from .jobs import ExportJob, ExportResult, export

__version__ = "0.1.0"
