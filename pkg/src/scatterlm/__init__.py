"""SVM-guided Levenberg-Marquardt reconstruction of grating profiles from Mueller-matrix scatterometry."""

__version__ = "0.1.0"
