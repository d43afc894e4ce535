"""omner: BiLSTM-CNN-CRF named-entity recognition for organic-materials
abstracts, with corpus ingestion, annotation management, embedding training,
and knowledge-base export."""

from ._kernels import BACKEND_NAME

__version__ = "0.1.0"
__all__ = ["BACKEND_NAME", "__version__"]
