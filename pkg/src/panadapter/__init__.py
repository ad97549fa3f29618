"""Two-stage adapter fine-tuning for pansharpening, at desk scale and from scratch."""

__version__ = "0.1.0"
