"""Constructive solver for the translation-symmetric 2+1 Einstein constraint equations."""
