"""Desk-scale laboratory for robust learning of Gaussian mixtures.

Layers: exact polynomial arithmetic and Hermite generating functions, the
differential-operator elimination identities, robust moment estimation under
adversarial contamination, pseudoexpectation (moment-SDP) programs, rough
clustering, and the end-to-end learning pipeline with hypothesis testing.
"""

__version__ = "0.1.0"
