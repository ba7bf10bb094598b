"""EEG-conditioned diffusion reconstruction of fMRI sequences.

A latent diffusion transformer translates EEG windows into cortical-vertex
BOLD frames; a null-space constrained sampler additionally reconstructs
missing frames between observed anchors without retraining. Ships with a
synthetic paired-session generator, training/evaluation harnesses, a CLI,
and a scripted acceptance suite.
"""

__version__ = "0.1.0"
