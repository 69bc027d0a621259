"""Instrumented diffusion-based singing voice conversion at desk scale.

The package covers the full loop: synthetic singer corpus, mel/F0 feature
extraction, a small conditional denoising diffusion model over log-mel
spectrograms, a deterministic step-skipping sampler that records every
intermediate state, objective conversion metrics, 2D trajectory projection
of step embeddings, and an HTTP service that exposes stored traces to a
browser viewer.
"""

__version__ = "0.1.0"
