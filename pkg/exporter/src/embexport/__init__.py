"""Embedding exporter: images + prompts -> binary embedding-stream dataset."""

from .encoders import EncoderLoadError, load_encoder
from .jobs import DEFAULT_TEMPLATES, ExportJob, discover_images, export_embeddings
from .writer import DatasetHeader, write_dataset

__all__ = [
    "DEFAULT_TEMPLATES",
    "DatasetHeader",
    "EncoderLoadError",
    "ExportJob",
    "discover_images",
    "export_embeddings",
    "load_encoder",
    "write_dataset",
]

__version__ = "0.1.0"
